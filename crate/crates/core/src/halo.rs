//! Lower bounds on the halo function
//! `φ(u) = sup |{M χ_A > 1/u}| / |A|` over nonempty cell sets `A`.
//!
//! Every reported value is the exact ratio of a stored witness. Only the
//! exhaustive oracle certifies a discrete supremum; heuristic results are
//! lower bounds and are labelled by the method that produced them.

use std::cmp::Ordering;
use std::sync::Arc;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{Basis, BasisFamily, FamilyKind};
use crate::error::{Error, Result};
use crate::grid::{random_set, CellSet, GridGeometry};
use crate::maximal::superlevel_direct;
use crate::rational::{count_ratio, rat, Rational, Threshold};

/// Default cap on `2^cells - 1` for exhaustive enumeration.
pub const DEFAULT_SUBSET_BUDGET: u64 = (1 << 20) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exhaustive,
    Random,
    Hillclimb,
    Structured,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Exhaustive => "exhaustive",
            Method::Random => "random",
            Method::Hillclimb => "hillclimb",
            Method::Structured => "structured",
        }
    }
}

/// One certified lower-bound sample of the halo function.
#[derive(Debug, Clone, PartialEq)]
pub struct HaloPoint {
    pub u: Rational,
    pub ratio: Rational,
    pub witness: CellSet,
    pub method: Method,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HaloCurve {
    pub points: Vec<HaloPoint>,
    pub family: BasisFamily,
    pub geometry: String,
}

impl HaloCurve {
    /// Value on `[0, 1]`, where the halo function is extended by `φ(u) = u`.
    pub fn unit_interval_value(u: &Rational) -> Rational {
        u.clone()
    }
}

/// Heuristic search knobs shared by [`halo_search`] and [`halo_curve`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchSettings {
    pub strategy: Method,
    pub seed: u64,
    /// Candidate evaluations for heuristics; the subset budget for `Exhaustive`.
    pub budget: u64,
    /// Re-score every witness at every `u` of a curve.
    pub pool: bool,
}

impl SearchSettings {
    pub fn new(strategy: Method, seed: u64, budget: u64) -> Self {
        SearchSettings {
            strategy,
            seed,
            budget,
            pool: true,
        }
    }
}

fn level(u: &Rational) -> Result<Threshold> {
    if u <= &Rational::one() {
        return Err(Error::invalid("u", "halo ratios are evaluated for u > 1"));
    }
    Threshold::new(&u.recip(), true)
}

/// Exact `|{M χ_E > 1/u}| / |E|` for one candidate (cell counts; `h` cancels).
pub fn halo_ratio(e: &CellSet, u: &Rational, basis: &Basis) -> Result<Rational> {
    level(u)?;
    let (covered, size) = ratio_counts(e, u, basis)?;
    Ok(count_ratio(covered, size))
}

fn ratio_counts(e: &CellSet, u: &Rational, basis: &Basis) -> Result<(u64, u64)> {
    if e.is_empty() {
        return Err(Error::invalid(
            "candidate",
            "halo ratio needs a nonempty set",
        ));
    }
    let sup = superlevel_direct(e, basis, &u.recip(), true)?;
    Ok((sup.len() as u64, e.len() as u64))
}

/// Best `(covered, size, witness)` so far, ordered by ratio and then by the
/// numerically least witness.
#[derive(Debug, Clone)]
struct Best {
    covered: u64,
    size: u64,
    witness: CellSet,
}

impl Best {
    fn beats(&self, other: &Best) -> bool {
        let lhs = self.covered as u128 * other.size as u128;
        let rhs = other.covered as u128 * self.size as u128;
        match lhs.cmp(&rhs) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => self.witness.numeric_cmp(&other.witness) == Ordering::Less,
        }
    }

    fn offer(slot: &mut Option<Best>, cand: Best) {
        if slot.as_ref().is_none_or(|b| cand.beats(b)) {
            *slot = Some(cand);
        }
    }
}

/// Maximum of [`halo_ratio`] over every nonempty subset, with the numerically
/// least maximizing witness.
///
/// Subsets are visited in Gray-code order; each step flips one cell and
/// updates element hit counts, pass flags and per-cell cover counts
/// incrementally.
pub fn exact_discrete_halo(
    u: &Rational,
    basis: &Basis,
    subset_budget: u64,
) -> Result<(Rational, CellSet)> {
    let th = level(u)?;
    let geom = basis.geometry();
    let n = geom.cell_count();
    let required: u128 = if n >= 127 {
        u128::MAX
    } else {
        (1u128 << n) - 1
    };
    if required > subset_budget as u128 || n > 63 {
        return Err(Error::BudgetExceeded {
            what: "subset",
            required,
            budget: subset_budget as u128,
        });
    }
    let shape = geom.shape3();
    let mut el_cells: Vec<Vec<u32>> = Vec::new();
    let mut through: Vec<Vec<u32>> = vec![Vec::new(); n];
    for r in basis.elements() {
        let idx = el_cells.len() as u32;
        let mut cells = Vec::with_capacity(r.cell_count() as usize);
        r.for_each_cell(shape, |c| {
            cells.push(c as u32);
            through[c].push(idx);
        });
        el_cells.push(cells);
    }
    let sizes: Vec<u64> = el_cells.iter().map(|c| c.len() as u64).collect();
    let mut hits = vec![0u64; el_cells.len()];
    let mut passing = vec![false; el_cells.len()];
    let mut cover = vec![0u32; n];
    let (mut covered, mut size, mut mask) = (0u64, 0u64, 0u64);
    // (covered, size, mask) of the incumbent
    let mut best: Option<(u64, u64, u64)> = None;
    for step in 1..=(1u64 << n) - 1 {
        let cell = step.trailing_zeros() as usize;
        let adding = mask >> cell & 1 == 0;
        mask ^= 1 << cell;
        if adding {
            size += 1;
        } else {
            size -= 1;
        }
        for &el in &through[cell] {
            let el = el as usize;
            if adding {
                hits[el] += 1;
            } else {
                hits[el] -= 1;
            }
            let now = th.passes(hits[el], sizes[el]);
            if now != passing[el] {
                passing[el] = now;
                for &c in &el_cells[el] {
                    let slot = &mut cover[c as usize];
                    if now {
                        *slot += 1;
                        if *slot == 1 {
                            covered += 1;
                        }
                    } else {
                        *slot -= 1;
                        if *slot == 0 {
                            covered -= 1;
                        }
                    }
                }
            }
        }
        if size == 0 {
            continue;
        }
        let better = match best {
            None => true,
            Some((bc, bs, bm)) => {
                let lhs = covered as u128 * bs as u128;
                let rhs = bc as u128 * size as u128;
                lhs > rhs || (lhs == rhs && mask < bm)
            }
        };
        if better {
            best = Some((covered, size, mask));
        }
    }
    let (bc, bs, bm) = best.ok_or_else(|| Error::Internal("grid without cells".into()))?;
    let witness = CellSet::from_cells(geom, (0..n).filter(|&c| bm >> c & 1 == 1))?;
    Ok((count_ratio(bc, bs), witness))
}

fn mix_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const SWEEP_DENSITIES: [(i64, i64); 7] = [(1, 16), (1, 8), (1, 4), (3, 8), (1, 2), (5, 8), (3, 4)];

/// Heuristic (or, with `Exhaustive`, exact) lower bound at one `u`.
///
/// Deterministic in `(u, basis, settings)`.
pub fn halo_search(u: &Rational, basis: &Basis, settings: &SearchSettings) -> Result<HaloPoint> {
    level(u)?;
    if settings.budget == 0 {
        return Err(Error::invalid(
            "budget.search",
            "search budget must be positive",
        ));
    }
    let geom = basis.geometry();
    let best = match settings.strategy {
        Method::Exhaustive => {
            let (ratio, witness) = exact_discrete_halo(u, basis, settings.budget)?;
            return Ok(HaloPoint {
                u: u.clone(),
                ratio,
                witness,
                method: Method::Exhaustive,
                seed: settings.seed,
            });
        }
        Method::Random => random_sweep(u, basis, settings)?,
        Method::Hillclimb => hill_climb(u, basis, settings)?,
        Method::Structured => {
            let mut best = None;
            for cand in structured_library(geom, basis.family())
                .into_iter()
                .take(settings.budget.min(usize::MAX as u64) as usize)
            {
                let (covered, size) = ratio_counts(&cand, u, basis)?;
                Best::offer(
                    &mut best,
                    Best {
                        covered,
                        size,
                        witness: cand,
                    },
                );
            }
            best
        }
    };
    let best = best.ok_or_else(|| Error::Internal("search produced no candidate".into()))?;
    Ok(HaloPoint {
        u: u.clone(),
        ratio: count_ratio(best.covered, best.size),
        witness: best.witness,
        method: settings.strategy,
        seed: settings.seed,
    })
}

fn random_sweep(u: &Rational, basis: &Basis, settings: &SearchSettings) -> Result<Option<Best>> {
    let geom = basis.geometry();
    let mut best = None;
    for i in 0..settings.budget {
        let (n, d) = SWEEP_DENSITIES[(i % SWEEP_DENSITIES.len() as u64) as usize];
        let s = mix_seed(settings.seed, i);
        let mut cand = random_set(geom, &rat(n, d), s)?;
        if cand.is_empty() {
            cand.set_bit((s % geom.cell_count() as u64) as usize);
        }
        let (covered, size) = ratio_counts(&cand, u, basis)?;
        Best::offer(
            &mut best,
            Best {
                covered,
                size,
                witness: cand,
            },
        );
    }
    Ok(best)
}

/// Single-bit-flip ascent, accepting strict improvements only and restarting
/// from a fresh random set after a run of rejected flips.
fn hill_climb(u: &Rational, basis: &Basis, settings: &SearchSettings) -> Result<Option<Best>> {
    let geom = basis.geometry();
    let cells = geom.cell_count();
    let patience = cells.clamp(1, 64);
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut best = None;
    let mut evals = 0u64;
    let mut restart = 0u64;
    while evals < settings.budget {
        let mut current = random_set(geom, &rat(1, 4), mix_seed(settings.seed, restart))?;
        restart += 1;
        if current.is_empty() {
            current.set_bit(rng.gen_range(0..cells));
        }
        let (mut cov, mut size) = ratio_counts(&current, u, basis)?;
        evals += 1;
        Best::offer(
            &mut best,
            Best {
                covered: cov,
                size,
                witness: current.clone(),
            },
        );
        let mut stall = 0;
        while stall < patience && evals < settings.budget {
            let cell = rng.gen_range(0..cells);
            current.flip_bit(cell);
            if current.is_empty() {
                current.flip_bit(cell);
                stall += 1;
                continue;
            }
            let (c2, s2) = ratio_counts(&current, u, basis)?;
            evals += 1;
            if c2 as u128 * size as u128 > cov as u128 * s2 as u128 {
                cov = c2;
                size = s2;
                stall = 0;
                Best::offer(
                    &mut best,
                    Best {
                        covered: cov,
                        size,
                        witness: current.clone(),
                    },
                );
            } else {
                current.flip_bit(cell);
                stall += 1;
            }
        }
    }
    Ok(best)
}

/// Deterministic library of shapes: the center cell first, then centered
/// cubes, corner blocks, the jump family's unit blocks and unions of two
/// blocks. Duplicates are dropped.
pub fn structured_library(geom: &Arc<GridGeometry>, family: &BasisFamily) -> Vec<CellSet> {
    let ext = geom.extent().to_vec();
    let d = ext.len();
    let min_side = *ext.iter().min().unwrap_or(&1);
    let mut out: Vec<CellSet> = Vec::new();
    let mut push = |s: CellSet| {
        if !s.is_empty() && !out.contains(&s) {
            out.push(s);
        }
    };
    let block = |lo: &[usize], side: &[usize]| -> Option<CellSet> {
        let hi: Vec<usize> = lo.iter().zip(side).map(|(l, s)| l + s).collect();
        CellSet::from_box(geom, lo, &hi).ok()
    };
    let centered = |side: usize| -> Option<CellSet> {
        let lo: Vec<usize> = ext.iter().map(|&n| (n - side.min(n)) / 2).collect();
        block(&lo, &vec![side; d])
    };
    let center: Vec<usize> = ext.iter().map(|&n| n / 2).collect();
    push(block(&center, &vec![1; d]).expect("center cell"));
    let mut side = 2;
    while side <= min_side {
        push(centered(side).expect("fits"));
        side *= 2;
    }
    for side in [1usize, 2, 4] {
        if side <= min_side {
            push(block(&vec![0; d], &vec![side; d]).expect("fits"));
        }
    }
    if family.kind == FamilyKind::JumpExample {
        if let Some(j) = &family.jump {
            for &s in &j.scales {
                if s <= ext[0] {
                    if let Some(b) = block(&[0], &[s]) {
                        push(b);
                    }
                    if let Some(b) = block(&[(ext[0] - s) / 2], &[s]) {
                        push(b);
                    }
                }
            }
        }
    }
    // two cells or two blocks separated along the first axis
    let mut gap = 1;
    while gap < ext[0] {
        for side in [1usize, 2] {
            if side > min_side || 2 * side + gap > ext[0] {
                continue;
            }
            let mut lo = center.clone();
            lo[0] = (ext[0] - (2 * side + gap)) / 2;
            for a in 1..d {
                lo[a] = (ext[a] - side) / 2;
            }
            let first = block(&lo, &vec![side; d]);
            let mut lo2 = lo.clone();
            lo2[0] += side + gap;
            let second = block(&lo2, &vec![side; d]);
            if let (Some(a), Some(b)) = (first, second) {
                push(a.union(&b).expect("same grid"));
            }
        }
        gap *= 2;
    }
    out
}

/// Builds a curve over a strictly increasing `u_grid`.
pub fn halo_curve(
    u_grid: &[Rational],
    basis: &Basis,
    settings: &SearchSettings,
) -> Result<HaloCurve> {
    validate_grid(u_grid)?;
    let points = u_grid
        .iter()
        .map(|u| halo_search(u, basis, settings))
        .collect::<Result<Vec<_>>>()?;
    finish_curve(points, basis, settings.pool)
}

/// Curve over fixed candidate sets (each scored at every `u`, best kept).
pub fn curve_from_candidates(
    u_grid: &[Rational],
    candidates: &[CellSet],
    basis: &Basis,
    method: Method,
    seed: u64,
) -> Result<HaloCurve> {
    validate_grid(u_grid)?;
    if candidates.is_empty() {
        return Err(Error::invalid(
            "candidates",
            "need at least one candidate set",
        ));
    }
    let mut points = Vec::with_capacity(u_grid.len());
    for u in u_grid {
        level(u)?;
        let mut best = None;
        for c in candidates {
            let (covered, size) = ratio_counts(c, u, basis)?;
            Best::offer(
                &mut best,
                Best {
                    covered,
                    size,
                    witness: c.clone(),
                },
            );
        }
        let best = best.expect("nonempty candidates");
        points.push(HaloPoint {
            u: u.clone(),
            ratio: count_ratio(best.covered, best.size),
            witness: best.witness,
            method,
            seed,
        });
    }
    finish_curve(points, basis, true)
}

fn validate_grid(u_grid: &[Rational]) -> Result<()> {
    if u_grid.is_empty() {
        return Err(Error::invalid("u_grid", "must be nonempty"));
    }
    if u_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("u_grid", "must be strictly increasing"));
    }
    if u_grid.iter().any(|u| u <= &Rational::one()) {
        return Err(Error::invalid("u_grid", "every u must exceed 1"));
    }
    Ok(())
}

fn finish_curve(mut points: Vec<HaloPoint>, basis: &Basis, pool: bool) -> Result<HaloCurve> {
    if pool && points.len() > 1 {
        let pool: Vec<(CellSet, Method, u64)> = points
            .iter()
            .map(|p| (p.witness.clone(), p.method, p.seed))
            .collect();
        for p in points.iter_mut() {
            let mut best = Best {
                covered: 0,
                size: 1,
                witness: p.witness.clone(),
            };
            let (c, s) = ratio_counts(&p.witness, &p.u, basis)?;
            best.covered = c;
            best.size = s;
            let mut origin = (p.method, p.seed);
            for (w, m, sd) in &pool {
                if *w == p.witness {
                    continue;
                }
                let (covered, size) = ratio_counts(w, &p.u, basis)?;
                let cand = Best {
                    covered,
                    size,
                    witness: w.clone(),
                };
                if cand.beats(&best) {
                    best = cand;
                    origin = (*m, *sd);
                }
            }
            p.ratio = count_ratio(best.covered, best.size);
            p.witness = best.witness;
            p.method = origin.0;
            p.seed = origin.1;
        }
    }
    Ok(HaloCurve {
        points,
        family: basis.family().clone(),
        geometry: basis.geometry().descriptor(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Increment {
    pub u_left: Rational,
    pub u_right: Rational,
    pub delta: Rational,
}

/// Adjacent increments of a curve. Descriptive only: the discrete halo is a
/// step function.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpReport {
    pub increments: Vec<Increment>,
    pub max_increment: Rational,
    /// Index into `increments` of the first largest increment.
    pub max_at: usize,
    pub left_endpoint: (Rational, Rational),
}

pub fn continuity_scan(curve: &HaloCurve) -> Result<JumpReport> {
    if curve.points.len() < 2 {
        return Err(Error::invalid(
            "curve",
            "continuity scan needs at least two points",
        ));
    }
    let increments: Vec<Increment> = curve
        .points
        .windows(2)
        .map(|w| Increment {
            u_left: w[0].u.clone(),
            u_right: w[1].u.clone(),
            delta: &w[1].ratio - &w[0].ratio,
        })
        .collect();
    let mut max_at = 0;
    for (i, inc) in increments.iter().enumerate() {
        if inc.delta > increments[max_at].delta {
            max_at = i;
        }
    }
    let first = &curve.points[0];
    Ok(JumpReport {
        max_increment: increments[max_at].delta.clone(),
        max_at,
        increments,
        left_endpoint: (first.u.clone(), first.ratio.clone()),
    })
}

/// Nonnegative ratio check used by curve consumers.
pub fn is_nondecreasing(curve: &HaloCurve) -> bool {
    curve.points.windows(2).all(|w| w[0].ratio <= w[1].ratio)
        && curve.points.iter().all(|p| p.ratio >= Rational::zero())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_basis(n: usize) -> Basis {
        let g = Arc::new(GridGeometry::line(n).unwrap());
        Basis::new(&BasisFamily::intervals(1, None), &g, 1 << 20).unwrap()
    }

    /// Subset maximum by direct enumeration and exact rational comparison.
    fn brute_halo(u: &Rational, basis: &Basis) -> (Rational, CellSet) {
        let g = basis.geometry();
        let n = g.cell_count();
        let mut best: Option<(Rational, CellSet)> = None;
        for mask in 1u64..(1 << n) {
            let e = CellSet::from_cells(g, (0..n).filter(|c| mask >> c & 1 == 1)).unwrap();
            let r = halo_ratio(&e, u, basis).unwrap();
            if best.as_ref().is_none_or(|(b, _)| r > *b) {
                best = Some((r, e));
            }
        }
        best.unwrap()
    }

    #[test]
    fn ratio_examples() {
        let b = line_basis(12);
        let g = b.geometry().clone();
        assert_eq!(
            halo_ratio(&CellSet::full(&g), &rat(3, 2), &b).unwrap(),
            rat(1, 1)
        );
        let e = CellSet::from_cells(&g, [5]).unwrap();
        assert_eq!(halo_ratio(&e, &rat(5, 2), &b).unwrap(), rat(3, 1));
        assert!(halo_ratio(&CellSet::empty(&g), &rat(2, 1), &b).is_err());
        assert!(halo_ratio(&e, &rat(1, 1), &b).is_err());
        assert!(halo_ratio(&e, &rat(1, 2), &b).is_err());
    }

    #[test]
    fn ratio_is_independent_of_cell_width() {
        let fam = BasisFamily::intervals(1, None);
        let a = Arc::new(GridGeometry::new(&[10], rat(1, 1)).unwrap());
        let b = Arc::new(GridGeometry::new(&[10], rat(1, 7)).unwrap());
        let ba = Basis::new(&fam, &a, 1000).unwrap();
        let bb = Basis::new(&fam, &b, 1000).unwrap();
        for seed in 0..5 {
            let ea = random_set(&a, &rat(1, 3), seed).unwrap();
            if ea.is_empty() {
                continue;
            }
            let eb = CellSet::from_hex(&b, &ea.to_hex()).unwrap();
            assert_eq!(
                halo_ratio(&ea, &rat(7, 4), &ba).unwrap(),
                halo_ratio(&eb, &rat(7, 4), &bb).unwrap()
            );
        }
    }

    #[test]
    fn exhaustive_golden_small() {
        let b = line_basis(4);
        let (r, w) = exact_discrete_halo(&rat(3, 2), &b, DEFAULT_SUBSET_BUDGET).unwrap();
        assert_eq!(r, rat(4, 3));
        assert_eq!(w.iter().collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(brute_halo(&rat(3, 2), &b).0, r);
    }

    #[test]
    fn exhaustive_matches_brute_force() {
        for n in [1usize, 3, 6, 9] {
            let b = line_basis(n);
            for u in [rat(11, 10), rat(3, 2), rat(2, 1), rat(5, 2), rat(4, 1)] {
                let (r, w) = exact_discrete_halo(&u, &b, DEFAULT_SUBSET_BUDGET).unwrap();
                let (br, _) = brute_halo(&u, &b);
                assert_eq!(r, br, "n={n} u={u}");
                assert_eq!(halo_ratio(&w, &u, &b).unwrap(), r);
            }
        }
    }

    #[test]
    fn exhaustive_budget_failure() {
        let b = line_basis(10);
        let err = exact_discrete_halo(&rat(2, 1), &b, 1000).unwrap_err();
        assert_eq!(
            err,
            Error::BudgetExceeded {
                what: "subset",
                required: 1023,
                budget: 1000
            }
        );
    }

    #[test]
    fn structured_starts_with_center_cell() {
        let b = line_basis(12);
        let lib = structured_library(b.geometry(), b.family());
        assert_eq!(lib[0].iter().collect::<Vec<_>>(), vec![6]);
        let p = halo_search(
            &rat(5, 2),
            &b,
            &SearchSettings::new(Method::Structured, 0, 100),
        )
        .unwrap();
        assert!(p.ratio >= rat(3, 1));
        assert_eq!(halo_ratio(&p.witness, &p.u, &b).unwrap(), p.ratio);
    }

    #[test]
    fn heuristics_are_deterministic_and_dominated() {
        let b = line_basis(10);
        for strategy in [Method::Random, Method::Hillclimb, Method::Structured] {
            let s = SearchSettings::new(strategy, 42, 60);
            let p1 = halo_search(&rat(2, 1), &b, &s).unwrap();
            let p2 = halo_search(&rat(2, 1), &b, &s).unwrap();
            assert_eq!(p1, p2);
            let (exact, _) = exact_discrete_halo(&rat(2, 1), &b, DEFAULT_SUBSET_BUDGET).unwrap();
            assert!(p1.ratio <= exact);
            assert_eq!(halo_ratio(&p1.witness, &p1.u, &b).unwrap(), p1.ratio);
        }
        assert!(halo_search(&rat(2, 1), &b, &SearchSettings::new(Method::Random, 0, 0)).is_err());
    }

    #[test]
    fn curve_validation_and_pooling() {
        let b = line_basis(8);
        let s = SearchSettings::new(Method::Random, 5, 20);
        assert!(halo_curve(&[], &b, &s).is_err());
        assert!(halo_curve(&[rat(2, 1), rat(3, 2)], &b, &s).is_err());
        assert!(halo_curve(&[rat(1, 1), rat(3, 2)], &b, &s).is_err());
        let single = halo_curve(&[rat(3, 2)], &b, &s).unwrap();
        assert_eq!(single.points.len(), 1);
        assert_eq!(single.points[0], halo_search(&rat(3, 2), &b, &s).unwrap());
        let grid = [rat(11, 10), rat(3, 2), rat(2, 1), rat(3, 1), rat(5, 1)];
        for strategy in [Method::Random, Method::Hillclimb, Method::Structured] {
            let c = halo_curve(&grid, &b, &SearchSettings::new(strategy, 9, 15)).unwrap();
            assert!(is_nondecreasing(&c));
            for p in &c.points {
                assert_eq!(halo_ratio(&p.witness, &p.u, &b).unwrap(), p.ratio);
            }
        }
    }

    #[test]
    fn exhaustive_curve_matches_oracle() {
        let b = line_basis(12);
        let grid = [rat(11, 10), rat(3, 2), rat(2, 1), rat(3, 1)];
        let c = halo_curve(
            &grid,
            &b,
            &SearchSettings::new(Method::Exhaustive, 0, DEFAULT_SUBSET_BUDGET),
        )
        .unwrap();
        for p in &c.points {
            let (r, w) = exact_discrete_halo(&p.u, &b, DEFAULT_SUBSET_BUDGET).unwrap();
            assert_eq!(p.ratio, r);
            assert_eq!(p.witness, w);
        }
    }

    #[test]
    fn scan_reports_increments() {
        let b = line_basis(4);
        let c = halo_curve(
            &[rat(11, 10), rat(3, 2)],
            &b,
            &SearchSettings::new(Method::Exhaustive, 0, DEFAULT_SUBSET_BUDGET),
        )
        .unwrap();
        let scan = continuity_scan(&c).unwrap();
        assert_eq!(scan.max_increment, rat(1, 3));
        assert_eq!(scan.left_endpoint, (rat(11, 10), rat(1, 1)));
        let flat = HaloCurve {
            points: vec![
                c.points[0].clone(),
                HaloPoint {
                    u: rat(2, 1),
                    ..c.points[0].clone()
                },
            ],
            ..c.clone()
        };
        assert_eq!(continuity_scan(&flat).unwrap().max_increment, rat(0, 1));
        let short = HaloCurve {
            points: vec![c.points[0].clone()],
            ..c
        };
        assert!(continuity_scan(&short).is_err());
    }

    #[test]
    fn unit_interval_extension_is_identity() {
        assert_eq!(HaloCurve::unit_interval_value(&rat(1, 3)), rat(1, 3));
    }
}
