//! Summed-area tables over a cell set.

use crate::basis::{BasisElement, CellBox};
use crate::grid::CellSet;

/// Inclusive prefix counts with a zero border, so any box count is an
/// inclusion-exclusion over its `2^n` corners.
#[derive(Debug, Clone)]
pub struct PrefixCounts {
    dims: usize,
    // padded table extents (N_i + 1) for real axes, 1 for padded axes
    ext: [usize; 3],
    table: Vec<u32>,
}

impl PrefixCounts {
    pub fn new(set: &CellSet) -> Self {
        let geom = set.geometry();
        let dims = geom.dimension();
        let shape = geom.shape3();
        let mut ext = [1usize; 3];
        for a in 0..dims {
            ext[a] = shape[a] + 1;
        }
        let mut table = vec![0u32; ext[0] * ext[1] * ext[2]];
        let at = |i: usize, j: usize, k: usize| (i * ext[1] + j) * ext[2] + k;
        // offset of a real axis: cell i sits at table index i + 1
        let off = |a: usize| usize::from(a < dims);
        for i in 0..shape[0] {
            for j in 0..shape[1] {
                for k in 0..shape[2] {
                    let cell = (i * shape[1] + j) * shape[2] + k;
                    table[at(i + off(0), j + off(1), k + off(2))] = u32::from(set.bit(cell));
                }
            }
        }
        // running sums along each real axis
        for a in 0..dims {
            for i in 0..ext[0] {
                for j in 0..ext[1] {
                    for k in 0..ext[2] {
                        let idx = [i, j, k];
                        if idx[a] == 0 {
                            continue;
                        }
                        let mut prev = idx;
                        prev[a] -= 1;
                        let p = table[at(prev[0], prev[1], prev[2])];
                        table[at(i, j, k)] += p;
                    }
                }
            }
        }
        PrefixCounts { dims, ext, table }
    }

    #[inline]
    fn at(&self, i: usize, j: usize, k: usize) -> u32 {
        self.table[(i * self.ext[1] + j) * self.ext[2] + k]
    }

    /// Number of set cells inside `b`.
    #[inline]
    pub fn box_count(&self, b: &CellBox) -> u64 {
        let (lo, hi) = (b.lo(), b.hi());
        match self.dims {
            1 => (self.at(hi[0] as usize, 0, 0) - self.at(lo[0] as usize, 0, 0)) as u64,
            2 => {
                let (l0, l1, h0, h1) = (
                    lo[0] as usize,
                    lo[1] as usize,
                    hi[0] as usize,
                    hi[1] as usize,
                );
                (self.at(h0, h1, 0) as i64 - self.at(l0, h1, 0) as i64 - self.at(h0, l1, 0) as i64
                    + self.at(l0, l1, 0) as i64) as u64
            }
            _ => {
                let mut total = 0i64;
                for corner in 0..8u32 {
                    let pick = |a: usize| {
                        if corner >> a & 1 == 1 {
                            lo[a] as usize
                        } else {
                            hi[a] as usize
                        }
                    };
                    let v = self.at(pick(0), pick(1), pick(2)) as i64;
                    if corner.count_ones() % 2 == 0 {
                        total += v;
                    } else {
                        total -= v;
                    }
                }
                total as u64
            }
        }
    }

    /// Cells of the set inside the element (its boxes are disjoint).
    #[inline]
    pub fn element_count(&self, e: &BasisElement) -> u64 {
        e.boxes().iter().map(|b| self.box_count(b)).sum()
    }
}
