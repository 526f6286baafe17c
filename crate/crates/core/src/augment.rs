//! Constructive core of the augmentation lemma: select witnesses whose
//! averages exceed `α − ε`, add a set `E′` of relative density at least
//! `c ε` (`c = 1/(1 − α)`) inside each `R_j − E`, and check the resulting
//! inequalities exactly.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::basis::{Basis, BasisElement};
use crate::error::{Error, Result};
use crate::grid::CellSet;
use crate::maximal::{average, superlevel_direct};
use crate::prefix::PrefixCounts;
use crate::rational::{count_ratio, int, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentPlan {
    pub alpha: Rational,
    pub eps: Rational,
    /// `1 / (1 − α)`.
    pub c: Rational,
    /// `c ε`.
    pub target_density: Rational,
}

impl AugmentPlan {
    /// Requires `0 < α < 1` and `0 < ε < min(α/2, 1 − α)`.
    pub fn new(alpha: Rational, eps: Rational) -> Result<Self> {
        if alpha <= Rational::zero() || alpha >= Rational::one() {
            return Err(Error::invalid("alpha", "must lie in (0, 1)"));
        }
        let half = &alpha / Rational::from_integer(BigInt::from(2));
        let complement = Rational::one() - &alpha;
        let cap = if half < complement {
            half
        } else {
            complement.clone()
        };
        if eps <= Rational::zero() || eps >= cap {
            return Err(Error::invalid("eps", format!("must lie in (0, {cap})")));
        }
        let c = complement.recip();
        let target_density = &c * &eps;
        Ok(AugmentPlan {
            alpha,
            eps,
            c,
            target_density,
        })
    }

    fn floor_level(&self) -> Rational {
        &self.alpha - &self.eps
    }
}

#[derive(Debug, Clone)]
pub struct WitnessFamily {
    pub elements: Vec<BasisElement>,
    pub union: CellSet,
}

impl WitnessFamily {
    pub fn union_measure(&self) -> Rational {
        self.union.measure()
    }
}

/// Every enumerated element with `average(R, E) > α − ε`.
///
/// Whether the union is large relative to `E` is left to the caller to
/// inspect; the continuum constant it is compared with is unknown here.
pub fn witness_family(e: &CellSet, plan: &AugmentPlan, basis: &Basis) -> Result<WitnessFamily> {
    crate::grid::same(e.geometry(), basis.geometry())?;
    if e.is_empty() {
        return Err(Error::invalid(
            "candidate",
            "witness selection needs a nonempty set",
        ));
    }
    let level = plan.floor_level();
    let prefix = PrefixCounts::new(e);
    let geom = basis.geometry();
    let mut union = CellSet::empty(geom);
    let mut elements = Vec::new();
    for r in basis.elements() {
        if count_ratio(prefix.element_count(&r), r.cell_count()) > level {
            r.for_each_cell(geom.shape3(), |c| union.set_bit(c));
            elements.push(r);
        }
    }
    if elements.is_empty() {
        return Err(Error::EmptyWitnessFamily);
    }
    Ok(WitnessFamily { elements, union })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Augmentation {
    pub e_tilde: CellSet,
    pub e_prime: CellSet,
    /// Per witness, `⌈c ε |R_j − E|⌉` in cells.
    pub quotas: Vec<u64>,
}

/// `⌈q · n⌉` for a nonnegative rational `q`.
fn ceil_times(q: &Rational, n: u64) -> u64 {
    let v = (q * int(n)).ceil().to_integer();
    u64::try_from(v).expect("quota bounded by cell count")
}

/// Greedy choice of `E′ ⊆ ∪R_j − E` meeting every witness quota
/// `⌈c ε |R_j − E|⌉`.
///
/// Each pick is the free cell serving the most still-unsatisfied witnesses,
/// lowest index first among ties, so the result is fully determined by the
/// inputs.
pub fn augment_set(
    e: &CellSet,
    witnesses: &[BasisElement],
    plan: &AugmentPlan,
) -> Result<Augmentation> {
    if witnesses.is_empty() {
        return Err(Error::EmptyWitnessFamily);
    }
    let geom = e.geometry();
    let shape = geom.shape3();
    let level = plan.floor_level();
    let n = geom.cell_count();
    let mut free_cells: Vec<Vec<usize>> = Vec::with_capacity(witnesses.len());
    let mut holders: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (j, r) in witnesses.iter().enumerate() {
        if average(r, e) <= level {
            return Err(Error::invalid(
                "witnesses",
                format!("element {} does not exceed alpha - eps on E", r.id()),
            ));
        }
        let mut free = Vec::new();
        r.for_each_cell(shape, |c| {
            if c >= n {
                return;
            }
            if !e.bit(c) {
                free.push(c);
                holders[c].push(j as u32);
            }
        });
        free_cells.push(free);
    }
    let quotas: Vec<u64> = free_cells
        .iter()
        .map(|f| ceil_times(&plan.target_density, f.len() as u64))
        .collect();
    let mut remaining = quotas.clone();
    let mut score = vec![0u32; n];
    for (j, free) in free_cells.iter().enumerate() {
        if remaining[j] > 0 {
            free.iter().for_each(|&c| score[c] += 1);
        }
    }
    let mut e_prime = CellSet::empty(geom);
    while remaining.iter().any(|&q| q > 0) {
        let (cell, best) =
            score.iter().enumerate().fold(
                (0usize, 0u32),
                |acc, (c, &s)| if s > acc.1 { (c, s) } else { acc },
            );
        if best == 0 {
            return Err(Error::Internal(
                "augmentation quotas cannot be met inside the witness union".into(),
            ));
        }
        e_prime.set_bit(cell);
        score[cell] = 0;
        for &j in &holders[cell] {
            let j = j as usize;
            if remaining[j] == 0 {
                continue;
            }
            remaining[j] -= 1;
            if remaining[j] == 0 {
                for &c in &free_cells[j] {
                    if !e_prime.bit(c) {
                        score[c] -= 1;
                    }
                }
            }
        }
    }
    let e_tilde = e.union(&e_prime)?;
    Ok(Augmentation {
        e_tilde,
        e_prime,
        quotas,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessCheck {
    pub id: u64,
    #[serde(rename = "avg_E", serialize_with = "crate::cli::output::ser_q")]
    pub avg_e: Rational,
    #[serde(rename = "avg_Etilde", serialize_with = "crate::cli::output::ser_q")]
    pub avg_e_tilde: Rational,
    /// `average(R_j, Ẽ) ≥ α`.
    pub pass: bool,
    /// `average(R_j, Ẽ) > α`.
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    #[serde(serialize_with = "crate::cli::output::ser_q")]
    pub lhs: Rational,
    #[serde(serialize_with = "crate::cli::output::ser_q")]
    pub rhs: Rational,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeBoundCheck {
    #[serde(serialize_with = "crate::cli::output::ser_q")]
    pub lhs: Rational,
    #[serde(serialize_with = "crate::cli::output::ser_q")]
    pub rhs: Rational,
    pub pass: bool,
    /// `rhs` plus one cell per witness of ceiling slack.
    #[serde(serialize_with = "crate::cli::output::ser_q")]
    pub rhs_with_rounding: Rational,
    pub pass_with_rounding: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub witness_count: usize,
    pub per_witness: Vec<WitnessCheck>,
    pub e_prime_cells: usize,
    pub size_bound: SizeBoundCheck,
    pub superlevel_bound: BoundCheck,
    pub notes: Vec<String>,
}

impl LemmaReport {
    pub fn all_witnesses_pass(&self) -> bool {
        self.per_witness.iter().all(|w| w.pass)
    }
}

/// Exact check of the displayed inequalities for one augmentation:
/// per-witness averages on `Ẽ`, the size bound `|Ẽ| ≤ |E| + c ε |∪R_j|`
/// against the measured union, and `|{M χ_Ẽ > α}| ≥ |∪R_j|`.
pub fn lemma_chain_report(
    e: &CellSet,
    e_tilde: &CellSet,
    witnesses: &[BasisElement],
    plan: &AugmentPlan,
    basis: &Basis,
) -> Result<LemmaReport> {
    let geom = basis.geometry();
    let prefix_e = PrefixCounts::new(e);
    let prefix_t = PrefixCounts::new(e_tilde);
    let mut union = CellSet::empty(geom);
    let per_witness: Vec<WitnessCheck> = witnesses
        .iter()
        .map(|r| {
            r.for_each_cell(geom.shape3(), |c| union.set_bit(c));
            let avg_e = count_ratio(prefix_e.element_count(r), r.cell_count());
            let avg_e_tilde = count_ratio(prefix_t.element_count(r), r.cell_count());
            WitnessCheck {
                id: r.id(),
                pass: avg_e_tilde >= plan.alpha,
                strict: avg_e_tilde > plan.alpha,
                avg_e,
                avg_e_tilde,
            }
        })
        .collect();
    let e_prime = e_tilde.difference(e)?;
    let lhs = e_tilde.measure();
    let rhs = e.measure() + &plan.target_density * union.measure();
    let rhs_with_rounding = &rhs + int(witnesses.len() as u64) * geom.cell_measure();
    let sup = superlevel_direct(e_tilde, basis, &plan.alpha, true)?;
    let superlevel_bound = BoundCheck {
        lhs: sup.measure(),
        rhs: union.measure(),
        pass: sup.measure() >= union.measure(),
    };
    let notes = vec![
        "size bound uses the measured |∪R_j| in place of C_{α/2}|E|".to_string(),
        "the constant in the size bound is C_{α/2}, the Tauberian constant at level α/2"
            .to_string(),
        format!(
            "quotas are rounded up to whole cells; rounding adds at most {} cell(s)",
            witnesses.len()
        ),
    ];
    Ok(LemmaReport {
        witness_count: witnesses.len(),
        e_prime_cells: e_prime.len(),
        size_bound: SizeBoundCheck {
            pass: lhs <= rhs,
            pass_with_rounding: lhs <= rhs_with_rounding,
            lhs,
            rhs,
            rhs_with_rounding,
        },
        superlevel_bound,
        per_witness,
        notes,
    })
}
