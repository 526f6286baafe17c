//! Deterministic fan-out of an element stream over worker threads.
//!
//! Each worker folds a private accumulator; accumulators are merged in worker
//! order with an associative, commutative merge, so the result does not
//! depend on scheduling or on the worker count.

use crossbeam_channel::bounded;

use crate::basis::{Basis, BasisElement};

const MAX_CHUNK: usize = 4096;
const MIN_CHUNK: usize = 64;

pub(crate) fn fold_elements<S, I, F, M>(basis: &Basis, init: I, step: F, merge: M) -> S
where
    S: Send,
    I: Fn() -> S + Sync,
    F: Fn(&mut S, &BasisElement) + Sync,
    M: Fn(S, S) -> S,
{
    let workers = basis.workers();
    if workers <= 1 {
        let mut acc = init();
        for e in basis.elements() {
            step(&mut acc, &e);
        }
        return acc;
    }
    let chunk_len = (basis.len() as usize / (workers * 4)).clamp(MIN_CHUNK, MAX_CHUNK);
    let (tx, rx) = bounded::<Vec<BasisElement>>(workers * 2);
    let partials: Vec<S> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                let rx = rx.clone();
                let (init, step) = (&init, &step);
                scope.spawn(move || {
                    let mut acc = init();
                    for chunk in rx.iter() {
                        for e in &chunk {
                            step(&mut acc, e);
                        }
                    }
                    acc
                })
            })
            .collect();
        drop(rx);
        let mut chunk = Vec::with_capacity(chunk_len);
        for e in basis.elements() {
            chunk.push(e);
            if chunk.len() == chunk_len {
                tx.send(std::mem::replace(&mut chunk, Vec::with_capacity(chunk_len)))
                    .expect("workers alive");
            }
        }
        if !chunk.is_empty() {
            tx.send(chunk).expect("workers alive");
        }
        drop(tx);
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    partials.into_iter().reduce(merge).unwrap_or_else(init)
}
