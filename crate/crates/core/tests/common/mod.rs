//! Reference implementations that share no code with the library: plain
//! loops over every interval / rectangle and integer cross-multiplication.
#![allow(dead_code)]

use std::path::Path;

/// All half-open intervals `[a, b)` of `[0, n)` with length in `min..=max`.
pub fn intervals(n: usize, min: usize, max: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..=n {
            if (min..=max).contains(&(b - a)) {
                out.push((a, b));
            }
        }
    }
    out
}

/// Maximal value at every cell as `(count, length)`; `(0, 1)` when uncovered.
pub fn maximal_1d(set: &[bool], family: &[(usize, usize)]) -> Vec<(u64, u64)> {
    let mut best = vec![(0u64, 1u64); set.len()];
    for &(a, b) in family {
        let cnt = set[a..b].iter().filter(|&&x| x).count() as u64;
        let len = (b - a) as u64;
        for slot in &mut best[a..b] {
            if cnt * slot.1 > slot.0 * len {
                *slot = (cnt, len);
            }
        }
    }
    best
}

/// `M > p/q` (strict) or `M >= p/q`.
pub fn above(v: (u64, u64), p: u64, q: u64, strict: bool) -> bool {
    let (l, r) = (v.0 * q, p * v.1);
    if strict {
        l > r
    } else {
        l >= r
    }
}

/// `|{M χ_A > q/p}|` for `u = p/q`, in cells.
pub fn halo_count_1d(set: &[bool], family: &[(usize, usize)], up: u64, uq: u64) -> u64 {
    maximal_1d(set, family)
        .into_iter()
        .filter(|&v| above(v, uq, up, true))
        .count() as u64
}

/// Best ratio over all nonempty subsets of `[0, n)` as `(count, size, mask)`;
/// ties go to the smallest mask.
pub fn brute_halo_1d(n: usize, family: &[(usize, usize)], up: u64, uq: u64) -> (u64, u64, u64) {
    let mut best = (0u64, 1u64, 0u64);
    for mask in 1u64..(1 << n) {
        let set: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
        let size = mask.count_ones() as u64;
        let hits = halo_count_1d(&set, family, up, uq);
        if hits * best.1 > best.0 * size {
            best = (hits, size, mask);
        }
    }
    best
}

/// One orbit step `{M χ_H >= p/q}`.
pub fn orbit_step_1d(set: &[bool], family: &[(usize, usize)], p: u64, q: u64) -> Vec<bool> {
    maximal_1d(set, family)
        .into_iter()
        .map(|v| above(v, p, q, false))
        .collect()
}

/// Maximal values on a `w × w` grid over every axis-parallel rectangle,
/// cells indexed `y * w + x` (row-major, last axis fastest).
pub fn maximal_2d(set: &[bool], w: usize) -> Vec<(u64, u64)> {
    let mut best = vec![(0u64, 1u64); w * w];
    for y0 in 0..w {
        for y1 in y0 + 1..=w {
            for x0 in 0..w {
                for x1 in x0 + 1..=w {
                    let mut cnt = 0u64;
                    for y in y0..y1 {
                        for x in x0..x1 {
                            cnt += set[y * w + x] as u64;
                        }
                    }
                    let len = ((y1 - y0) * (x1 - x0)) as u64;
                    for y in y0..y1 {
                        for x in x0..x1 {
                            let slot = &mut best[y * w + x];
                            if cnt * slot.1 > slot.0 * len {
                                *slot = (cnt, len);
                            }
                        }
                    }
                }
            }
        }
    }
    best
}

/// Data rows of a CSV artifact (comment lines and the column header dropped).
pub fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).expect("artifact readable");
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

/// Column index by header name.
pub fn csv_column(path: &Path, name: &str) -> usize {
    let text = std::fs::read_to_string(path).expect("artifact readable");
    let header = text
        .lines()
        .find(|l| !l.starts_with('#'))
        .expect("header line");
    header
        .split(',')
        .position(|c| c == name)
        .expect("column present")
}
