//! The geometric maximal operator applied to indicator sets, and its
//! superlevel sets, computed exactly.
//!
//! Averages come from summed-area tables, so each element costs a constant
//! number of lookups. Per-cell suprema are accumulated in a product segment
//! tree (one range-max tag per canonical node), which keeps the cost per
//! element logarithmic instead of proportional to its size.

use std::sync::Arc;

use crate::basis::{Basis, BasisElement, BasisFamily, CellBox};
use crate::error::Result;
use crate::grid::{CellSet, GridGeometry};
use crate::parallel::fold_elements;
use crate::prefix::PrefixCounts;
use crate::rational::{count_ratio, Frac, Rational, Threshold};

/// Above this many tree nodes the field falls back to direct painting.
const MAX_TREE_NODES: usize = 1 << 25;

/// `|E ∩ R| / |R|`; the cell width cancels.
pub fn average(r: &BasisElement, e: &CellSet) -> Rational {
    let hits = PrefixCounts::new(e).element_count(r);
    count_ratio(hits, r.cell_count())
}

/// Per-cell values of `M_B χ_E`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaximalField {
    geom: Arc<GridGeometry>,
    values: Vec<Frac>,
    family: BasisFamily,
    elements: u64,
    budget: u64,
}

impl MaximalField {
    pub fn geometry(&self) -> &Arc<GridGeometry> {
        &self.geom
    }

    /// Exact value at `cell`; cells no element reaches hold 0.
    pub fn value(&self, cell: usize) -> Result<Rational> {
        self.geom.coords(cell)?;
        Ok(self.values[cell].to_rational())
    }

    pub fn values(&self) -> impl Iterator<Item = Rational> + '_ {
        self.values.iter().map(|f| f.to_rational())
    }

    /// `(numerator, denominator)` per cell in lowest terms; unreached cells read `0/1`.
    pub fn pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.values
            .iter()
            .map(|f| if f.is_none() { (0, 1) } else { (f.num, f.den) })
    }

    pub fn uncovered_count(&self) -> usize {
        self.values.iter().filter(|f| f.is_none()).count()
    }

    pub fn family(&self) -> &BasisFamily {
        &self.family
    }

    /// Elements enumerated to build the field, and the budget they were checked against.
    pub fn provenance(&self) -> (u64, u64) {
        (self.elements, self.budget)
    }
}

/// Range-max tags on the product of per-axis segment trees.
struct TagTree {
    leaves: [usize; 3],
    ext: [usize; 3],
    tags: Vec<Frac>,
}

fn decompose(lo: usize, hi: usize, leaves: usize) -> smallvec::SmallVec<[usize; 64]> {
    let mut out = smallvec::SmallVec::new();
    let (mut l, mut r) = (lo + leaves, hi + leaves);
    while l < r {
        if l & 1 == 1 {
            out.push(l);
            l += 1;
        }
        if r & 1 == 1 {
            r -= 1;
            out.push(r);
        }
        l >>= 1;
        r >>= 1;
    }
    out
}

impl TagTree {
    fn nodes_for(shape: [usize; 3]) -> usize {
        shape.iter().map(|&n| 2 * n.next_power_of_two()).product()
    }

    fn new(shape: [usize; 3]) -> Self {
        let leaves = shape.map(usize::next_power_of_two);
        let ext = leaves.map(|p| 2 * p);
        TagTree {
            leaves,
            ext,
            tags: vec![Frac::NONE; ext[0] * ext[1] * ext[2]],
        }
    }

    fn update(&mut self, b: &CellBox, v: Frac) {
        let (lo, hi) = (b.lo(), b.hi());
        let n0 = decompose(lo[0] as usize, hi[0] as usize, self.leaves[0]);
        let n1 = decompose(lo[1] as usize, hi[1] as usize, self.leaves[1]);
        let n2 = decompose(lo[2] as usize, hi[2] as usize, self.leaves[2]);
        for &a in &n0 {
            for &b in &n1 {
                let row = (a * self.ext[1] + b) * self.ext[2];
                for &c in &n2 {
                    let t = &mut self.tags[row + c];
                    if v > *t {
                        *t = v;
                    }
                }
            }
        }
    }

    fn merge(mut self, other: TagTree) -> TagTree {
        for (a, b) in self.tags.iter_mut().zip(other.tags) {
            if b > *a {
                *a = b;
            }
        }
        self
    }

    fn into_values(mut self, shape: [usize; 3]) -> Vec<Frac> {
        let ext = self.ext;
        let idx = |i: usize, j: usize, k: usize| (i * ext[1] + j) * ext[2] + k;
        for axis in 0..3 {
            for node in 1..self.leaves[axis] {
                for u in 0..ext[(axis + 1) % 3] {
                    for w in 0..ext[(axis + 2) % 3] {
                        let mut at = [0; 3];
                        at[axis] = node;
                        at[(axis + 1) % 3] = u;
                        at[(axis + 2) % 3] = w;
                        let parent = self.tags[idx(at[0], at[1], at[2])];
                        if parent.is_none() {
                            continue;
                        }
                        for child in [2 * node, 2 * node + 1] {
                            at[axis] = child;
                            let t = &mut self.tags[idx(at[0], at[1], at[2])];
                            if parent > *t {
                                *t = parent;
                            }
                        }
                    }
                }
            }
        }
        let p = self.leaves;
        let mut out = Vec::with_capacity(shape[0] * shape[1] * shape[2]);
        for i in 0..shape[0] {
            for j in 0..shape[1] {
                for k in 0..shape[2] {
                    out.push(self.tags[idx(i + p[0], j + p[1], k + p[2])].reduced());
                }
            }
        }
        out
    }
}

/// Per-cell supremum of `average(R, E)` over every enumerated `R` containing the cell.
pub fn maximal_field(e: &CellSet, basis: &Basis) -> Result<MaximalField> {
    crate::grid::same(e.geometry(), basis.geometry())?;
    let geom = basis.geometry();
    let shape = geom.shape3();
    let prefix = PrefixCounts::new(e);
    let values = if TagTree::nodes_for(shape) <= MAX_TREE_NODES {
        fold_elements(
            basis,
            || TagTree::new(shape),
            |tree, r| {
                let v = Frac::new(prefix.element_count(r) as u32, r.cell_count() as u32);
                for b in r.boxes() {
                    tree.update(b, v);
                }
            },
            TagTree::merge,
        )
        .into_values(shape)
    } else {
        let painted = fold_elements(
            basis,
            || vec![Frac::NONE; geom.cell_count()],
            |vals, r| {
                let v = Frac::new(prefix.element_count(r) as u32, r.cell_count() as u32);
                r.for_each_cell(shape, |c| {
                    if v > vals[c] {
                        vals[c] = v;
                    }
                });
            },
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    if y > *x {
                        *x = y;
                    }
                }
                a
            },
        );
        painted.into_iter().map(Frac::reduced).collect()
    };
    Ok(MaximalField {
        geom: Arc::clone(geom),
        values,
        family: basis.family().clone(),
        elements: basis.len(),
        budget: basis.budget(),
    })
}

/// Cells with value `> θ` (strict) or `>= θ`.
pub fn superlevel(field: &MaximalField, theta: &Rational, strict: bool) -> Result<CellSet> {
    let th = Threshold::new(theta, strict)?;
    let mut out = CellSet::empty(&field.geom);
    for (i, &v) in field.values.iter().enumerate() {
        if th.passes_frac(v) {
            out.set_bit(i);
        }
    }
    Ok(out)
}

/// Difference array over box corners; coverage is recovered by prefix sums.
#[derive(Clone)]
pub(crate) struct Coverage {
    dims: usize,
    ext: [usize; 3],
    diff: Vec<i32>,
}

impl Coverage {
    pub(crate) fn new(geom: &GridGeometry) -> Self {
        let dims = geom.dimension();
        let shape = geom.shape3();
        let mut ext = [1; 3];
        for a in 0..dims {
            ext[a] = shape[a] + 1;
        }
        Coverage {
            dims,
            ext,
            diff: vec![0; ext[0] * ext[1] * ext[2]],
        }
    }

    pub(crate) fn add(&mut self, b: &CellBox) {
        let (lo, hi) = (b.lo(), b.hi());
        for corner in 0..(1u32 << self.dims) {
            let mut at = [0usize; 3];
            for (a, slot) in at.iter_mut().enumerate().take(self.dims) {
                *slot = if corner >> a & 1 == 1 {
                    hi[a] as usize
                } else {
                    lo[a] as usize
                };
            }
            let sign = if corner.count_ones() % 2 == 0 { 1 } else { -1 };
            self.diff[(at[0] * self.ext[1] + at[1]) * self.ext[2] + at[2]] += sign;
        }
    }

    pub(crate) fn merge(mut self, other: Coverage) -> Coverage {
        for (a, b) in self.diff.iter_mut().zip(other.diff) {
            *a += b;
        }
        self
    }

    pub(crate) fn into_set(mut self, geom: &Arc<GridGeometry>) -> CellSet {
        let ext = self.ext;
        let idx = |i: usize, j: usize, k: usize| (i * ext[1] + j) * ext[2] + k;
        for a in 0..self.dims {
            for i in 0..ext[0] {
                for j in 0..ext[1] {
                    for k in 0..ext[2] {
                        let at = [i, j, k];
                        if at[a] == 0 {
                            continue;
                        }
                        let mut prev = at;
                        prev[a] -= 1;
                        let p = self.diff[idx(prev[0], prev[1], prev[2])];
                        self.diff[idx(i, j, k)] += p;
                    }
                }
            }
        }
        let shape = geom.shape3();
        let mut out = CellSet::empty(geom);
        for i in 0..shape[0] {
            for j in 0..shape[1] {
                for k in 0..shape[2] {
                    if self.diff[idx(i, j, k)] > 0 {
                        out.set_bit((i * shape[1] + j) * shape[2] + k);
                    }
                }
            }
        }
        out
    }
}

/// Superlevel set computed without materializing the field: the union of
/// every element whose average passes the threshold.
pub fn superlevel_direct(
    e: &CellSet,
    basis: &Basis,
    theta: &Rational,
    strict: bool,
) -> Result<CellSet> {
    crate::grid::same(e.geometry(), basis.geometry())?;
    let th = Threshold::new(theta, strict)?;
    let geom = basis.geometry();
    if !th.is_strict() && th.is_zero() {
        // every value, including the 0 of unreached cells, is >= 0
        return Ok(CellSet::full(geom));
    }
    if strict && e.is_empty() {
        return Ok(CellSet::empty(geom));
    }
    let prefix = PrefixCounts::new(e);
    let cover = fold_elements(
        basis,
        || Coverage::new(geom),
        |cov, r| {
            if th.passes(prefix.element_count(r), r.cell_count()) {
                for b in r.boxes() {
                    cov.add(b);
                }
            }
        },
        Coverage::merge,
    );
    Ok(cover.into_set(geom))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use num_traits::Zero;

    fn line(n: usize) -> Arc<GridGeometry> {
        Arc::new(GridGeometry::line(n).unwrap())
    }

    /// Brute-force supremum with exact rational averages.
    fn oracle_field(e: &CellSet, basis: &Basis) -> Vec<Rational> {
        let g = basis.geometry();
        let mut best = vec![Rational::zero(); g.cell_count()];
        for r in basis.elements() {
            let avg = average(&r, e);
            for c in r.to_cellset(g).iter() {
                if avg > best[c] {
                    best[c] = avg.clone();
                }
            }
        }
        best
    }

    #[test]
    fn average_examples() {
        let g = line(12);
        let r = crate::basis::rasterize_element(
            &crate::basis::ElementSpec::Interval { lo: 0, hi: 10 },
            &g,
        )
        .unwrap();
        assert_eq!(average(&r, &CellSet::full(&g)), rat(1, 1));
        assert_eq!(
            average(&r, &CellSet::from_cells(&g, [10, 11]).unwrap()),
            rat(0, 1)
        );
        assert_eq!(
            average(&r, &CellSet::from_cells(&g, 0..7).unwrap()),
            rat(7, 10)
        );
    }

    #[test]
    fn single_cell_field_decays_harmonically() {
        let g = line(6);
        let basis = Basis::new(&BasisFamily::intervals(1, None), &g, 100).unwrap();
        assert_eq!(basis.len(), 21);
        let e = CellSet::from_cells(&g, [0]).unwrap();
        let f = maximal_field(&e, &basis).unwrap();
        for k in 0..6 {
            assert_eq!(f.value(k).unwrap(), rat(1, k as i64 + 1));
        }
        assert_eq!(f.values().collect::<Vec<_>>(), oracle_field(&e, &basis));
        let strict = superlevel(&f, &rat(1, 3), true).unwrap();
        assert_eq!(strict.iter().collect::<Vec<_>>(), vec![0, 1]);
        let loose = superlevel(&f, &rat(1, 3), false).unwrap();
        assert_eq!(loose.iter().collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn empty_and_full_sets() {
        let g = line(9);
        let basis = Basis::new(&BasisFamily::intervals(2, Some(4)), &g, 100).unwrap();
        let f = maximal_field(&CellSet::empty(&g), &basis).unwrap();
        assert!(f.values().all(|v| v.is_zero()));
        let f = maximal_field(&CellSet::full(&g), &basis).unwrap();
        assert!(f.values().all(|v| v == rat(1, 1)));
        assert_eq!(
            superlevel(&f, &rat(1, 1), false).unwrap(),
            CellSet::full(&g)
        );
        assert!(superlevel(&f, &rat(1, 1), true).unwrap().is_empty());
        assert!(superlevel(&f, &rat(2, 1), true).is_err());
    }

    #[test]
    fn uncovered_cells_read_zero() {
        let g = Arc::new(GridGeometry::new(&[5, 5], rat(1, 1)).unwrap());
        let mut fam = BasisFamily::cubes(2, Some(2));
        fam.explicit.clear();
        let explicit = BasisFamily::explicit(vec![vec![crate::basis::BoxSpec {
            lo: vec![0, 0],
            hi: vec![2, 2],
        }]]);
        let basis = Basis::new(&explicit, &g, 10).unwrap();
        let f = maximal_field(&CellSet::full(&g), &basis).unwrap();
        assert_eq!(f.uncovered_count(), 21);
        assert_eq!(f.value(24).unwrap(), rat(0, 1));
        assert_eq!(f.value(6).unwrap(), rat(1, 1));
        let direct = superlevel_direct(&CellSet::full(&g), &basis, &rat(0, 1), false).unwrap();
        assert_eq!(direct, superlevel(&f, &rat(0, 1), false).unwrap());
        let direct = superlevel_direct(&CellSet::full(&g), &basis, &rat(0, 1), true).unwrap();
        assert_eq!(direct.len(), 4);
    }

    #[test]
    fn positive_threshold_zero_covers_line() {
        let g = line(10);
        let basis = Basis::new(&BasisFamily::intervals(1, None), &g, 100).unwrap();
        let e = CellSet::from_cells(&g, [7]).unwrap();
        let f = maximal_field(&e, &basis).unwrap();
        assert_eq!(superlevel(&f, &rat(0, 1), true).unwrap(), CellSet::full(&g));
    }

    #[test]
    fn direct_path_matches_two_step_on_every_threshold() {
        let g = line(12);
        let basis = Basis::new(&BasisFamily::intervals(1, None), &g, 1000).unwrap();
        for seed in 0..20u64 {
            let e = crate::grid::random_set(&g, &rat(2, 5), seed).unwrap();
            let f = maximal_field(&e, &basis).unwrap();
            for (n, d) in [(0, 1), (1, 12), (1, 3), (2, 5), (1, 2), (7, 10), (1, 1)] {
                for strict in [true, false] {
                    let theta = rat(n, d);
                    assert_eq!(
                        superlevel_direct(&e, &basis, &theta, strict).unwrap(),
                        superlevel(&f, &theta, strict).unwrap(),
                        "seed {seed} theta {n}/{d} strict {strict}"
                    );
                }
            }
        }
        assert!(
            superlevel_direct(&CellSet::empty(&g), &basis, &rat(1, 2), true)
                .unwrap()
                .is_empty()
        );
        assert!(
            superlevel_direct(&CellSet::empty(&g), &basis, &rat(0, 1), true)
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn tree_and_oracle_agree_in_three_dimensions() {
        let g = Arc::new(GridGeometry::new(&[3, 4, 5], rat(1, 2)).unwrap());
        let basis = Basis::new(&BasisFamily::axis_rects(1, None), &g, 1 << 20).unwrap();
        let e = crate::grid::random_set(&g, &rat(1, 3), 11).unwrap();
        let f = maximal_field(&e, &basis).unwrap();
        assert_eq!(f.values().collect::<Vec<_>>(), oracle_field(&e, &basis));
        for strict in [true, false] {
            assert_eq!(
                superlevel_direct(&e, &basis, &rat(1, 2), strict).unwrap(),
                superlevel(&f, &rat(1, 2), strict).unwrap()
            );
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let g = Arc::new(GridGeometry::new(&[7, 9], rat(1, 1)).unwrap());
        let basis = Basis::new(&BasisFamily::axis_rects(1, None), &g, 1 << 20).unwrap();
        let e = crate::grid::random_set(&g, &rat(1, 2), 3).unwrap();
        let one = maximal_field(&e, &basis).unwrap();
        let many = maximal_field(&e, &basis.clone().with_workers(5)).unwrap();
        assert_eq!(one, many);
        assert_eq!(
            superlevel_direct(&e, &basis, &rat(3, 5), true).unwrap(),
            superlevel_direct(&e, &basis.with_workers(5), &rat(3, 5), true).unwrap()
        );
    }

    #[test]
    fn geometry_mismatch_rejected() {
        let basis = Basis::new(&BasisFamily::intervals(1, None), &line(6), 100).unwrap();
        let other = CellSet::empty(&line(7));
        assert!(maximal_field(&other, &basis).is_err());
        assert!(superlevel_direct(&other, &basis, &rat(1, 2), true).is_err());
    }
}
