//! Tauberian machinery for homothecy-invariant box bases: the iteration
//! constant `K_{α,γ}`, the halo orbit `H^k`, containment experiments, the
//! chained measure bound and strict-versus-non-strict gap measurements.

use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::basis::{Basis, BasisElement, BasisFamily};
use crate::error::{Error, Result};
use crate::grid::{CellSet, FractionalShape, GridGeometry};
use crate::maximal::{average, superlevel_direct};
use crate::rational::{ceil_log, Rational};

/// `0 < α < γ < 1` and the ambient dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterationParams {
    pub alpha: Rational,
    pub gamma: Rational,
    pub n: usize,
}

impl IterationParams {
    pub fn new(alpha: Rational, gamma: Rational, n: usize) -> Result<Self> {
        if alpha <= Rational::zero() {
            return Err(Error::invalid("alpha", "must be positive"));
        }
        if gamma >= Rational::one() || gamma <= Rational::zero() {
            return Err(Error::invalid("gamma", "must lie in (0, 1)"));
        }
        if alpha >= gamma {
            return Err(Error::invalid("alpha", "must be strictly below gamma"));
        }
        if n == 0 {
            return Err(Error::invalid("n", "dimension must be at least 1"));
        }
        Ok(IterationParams { alpha, gamma, n })
    }

    /// `γ̃ = γ + (1 − γ)/2`.
    pub fn gamma_tilde(&self) -> Rational {
        &self.gamma + (Rational::one() - &self.gamma) / Rational::from_integer(BigInt::from(2))
    }
}

/// Iteration count
/// `K = ⌈log(γ/α)/log(1/γ)⌉ · ⌈2 + log⁺(γ 2^n)/log(1/γ)⌉ + 1`.
///
/// Each ceiling `⌈log_b x⌉` is the least integer `m` with `b^m ≥ x`, found by
/// exact rational powers, so no rounding can move it.
pub fn k_alpha_gamma(alpha: &Rational, gamma: &Rational, n: usize) -> Result<u64> {
    let p = IterationParams::new(alpha.clone(), gamma.clone(), n)?;
    let base = p.gamma.recip();
    let first = ceil_log(&base, &(&p.gamma / &p.alpha));
    let scaled = &p.gamma * Rational::from_integer(BigInt::from(2).pow(n as u32));
    // log⁺ clamps at zero, which ceil_log already does for targets <= 1
    let second = 2 + ceil_log(&base, &scaled);
    Ok(first * second + 1)
}

/// `H^0 = E`, `H^j = {M χ_{H^{j-1}} ≥ γ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HaloOrbit {
    pub gamma: Rational,
    pub sets: Vec<CellSet>,
    pub measures: Vec<Rational>,
}

impl HaloOrbit {
    /// Whether step `j >= 1` strictly enlarged the previous set.
    pub fn grew(&self, j: usize) -> bool {
        j > 0 && j < self.sets.len() && self.sets[j].len() > self.sets[j - 1].len()
    }

    /// `H^j ⊆ H^{j+1}` for every consecutive pair.
    pub fn is_monotone(&self) -> bool {
        self.sets
            .windows(2)
            .all(|w| w[0].is_subset(&w[1]).unwrap_or(false))
    }
}

/// Runs the orbit for `k` steps with non-strict superlevels.
///
/// The element budget is enforced when `basis` is built, before step 0.
pub fn halo_orbit(e: &CellSet, gamma: &Rational, k: usize, basis: &Basis) -> Result<HaloOrbit> {
    if gamma <= &Rational::zero() || gamma >= &Rational::one() {
        return Err(Error::invalid("gamma", "must lie in (0, 1)"));
    }
    let mut sets = vec![e.clone()];
    for _ in 0..k {
        let prev = sets.last().expect("orbit starts with E");
        let next = if prev.is_empty() {
            prev.clone()
        } else {
            superlevel_direct(prev, basis, gamma, false)?
        };
        sets.push(next);
    }
    let measures = sets.iter().map(CellSet::measure).collect();
    Ok(HaloOrbit {
        gamma: gamma.clone(),
        sets,
        measures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContainmentReport {
    #[serde(serialize_with = "crate::cli::output::ser_q")]
    pub average: Rational,
    pub k: u64,
    /// First step `j >= 1` with `R ⊆ H^j`.
    pub contained_at: Option<usize>,
    pub contained_at_k: bool,
    #[serde(serialize_with = "crate::cli::output::ser_q_vec")]
    pub measures: Vec<Rational>,
}

/// Runs the orbit at `γ` for `K_{α,γ}` steps and records when `R` is swallowed.
///
/// A report, not an assertion: coarse grids may defeat the continuum lemma.
pub fn containment_experiment(
    r: &BasisElement,
    e: &CellSet,
    params: &IterationParams,
    basis: &Basis,
) -> Result<(ContainmentReport, HaloOrbit)> {
    let avg = average(r, e);
    if avg < params.alpha {
        return Err(Error::invalid(
            "alpha",
            "average of R over E must be at least alpha",
        ));
    }
    let k = k_alpha_gamma(&params.alpha, &params.gamma, params.n)?;
    let orbit = halo_orbit(e, &params.gamma, k as usize, basis)?;
    let rset = r.to_cellset(basis.geometry());
    let inside: Vec<bool> = orbit
        .sets
        .iter()
        .map(|h| rset.is_subset(h))
        .collect::<Result<_>>()?;
    let report = ContainmentReport {
        average: avg,
        k,
        contained_at: (1..inside.len()).find(|&j| inside[j]),
        contained_at_k: inside[k as usize],
        measures: orbit.measures.clone(),
    };
    Ok((report, orbit))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainStep {
    pub step: usize,
    #[serde(serialize_with = "crate::cli::output::ser_q")]
    pub measure: Rational,
    /// `|H^j| / |H^{j-1}|`; absent when `H^{j-1}` is empty.
    #[serde(serialize_with = "crate::cli::output::ser_q_opt")]
    pub ratio: Option<Rational>,
    pub within_probe: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainReport {
    #[serde(serialize_with = "crate::cli::output::ser_q")]
    pub alpha: Rational,
    #[serde(serialize_with = "crate::cli::output::ser_q")]
    pub gamma: Rational,
    #[serde(serialize_with = "crate::cli::output::ser_q")]
    pub gamma_tilde: Rational,
    pub k: u64,
    #[serde(serialize_with = "crate::cli::output::ser_q")]
    pub c_probe: Rational,
    #[serde(serialize_with = "crate::cli::output::ser_q")]
    pub e_measure: Rational,
    pub steps: Vec<ChainStep>,
    /// `|{M χ_E > α}|`.
    #[serde(serialize_with = "crate::cli::output::ser_q")]
    pub lhs: Rational,
    /// `C_probe^K |E|`.
    #[serde(serialize_with = "crate::cli::output::ser_q")]
    pub rhs: Rational,
    pub pass: bool,
    /// `{M χ_E > α} ⊆ H^K` at level `γ̃`.
    pub superlevel_within_orbit: bool,
}

/// Evaluates the chain `|{M χ_E > α}| ≤ |H^K| ≤ C|H^{K-1}| ≤ … ≤ C^K |E|`
/// with `K = K_{α,γ̃}` and a caller-supplied per-step constant.
pub fn chained_bound_report(
    e: &CellSet,
    params: &IterationParams,
    basis: &Basis,
    c_probe: &Rational,
) -> Result<ChainReport> {
    if c_probe < &Rational::one() {
        return Err(Error::invalid("c_probe", "must be at least 1"));
    }
    let gamma_tilde = params.gamma_tilde();
    let k = k_alpha_gamma(&params.alpha, &gamma_tilde, params.n)?;
    let orbit = halo_orbit(e, &gamma_tilde, k as usize, basis)?;
    let steps = (1..orbit.sets.len())
        .map(|j| {
            let prev = &orbit.measures[j - 1];
            let ratio = (!prev.is_zero()).then(|| &orbit.measures[j] / prev);
            ChainStep {
                step: j,
                measure: orbit.measures[j].clone(),
                within_probe: ratio.as_ref().is_none_or(|r| r <= c_probe),
                ratio,
            }
        })
        .collect();
    let sup = superlevel_direct(e, basis, &params.alpha, true)?;
    let lhs = sup.measure();
    let rhs = num_traits::pow(c_probe.clone(), k as usize) * e.measure();
    Ok(ChainReport {
        alpha: params.alpha.clone(),
        gamma: params.gamma.clone(),
        gamma_tilde,
        k,
        c_probe: c_probe.clone(),
        e_measure: e.measure(),
        steps,
        pass: lhs <= rhs,
        superlevel_within_orbit: sup.is_subset(orbit.sets.last().expect("nonempty orbit"))?,
        lhs,
        rhs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRung {
    pub extent: Vec<usize>,
    #[serde(serialize_with = "crate::cli::output::ser_q")]
    pub h: Rational,
    #[serde(serialize_with = "crate::cli::output::ser_q")]
    pub nonstrict_measure: Rational,
    #[serde(serialize_with = "crate::cli::output::ser_q")]
    pub strict_measure: Rational,
    #[serde(serialize_with = "crate::cli::output::ser_q")]
    pub gap_measure: Rational,
    pub gap_cells: usize,
    /// Gap measure divided by the previous measured rung's gap measure.
    #[serde(serialize_with = "crate::cli::output::ser_q_opt")]
    pub decay: Option<Rational>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    #[serde(serialize_with = "crate::cli::output::ser_q")]
    pub gamma: Rational,
    pub rungs: Vec<GapRung>,
    pub notices: Vec<String>,
}

/// Measures `|{M χ_E ≥ γ}| − |{M χ_E > γ}|` on each geometry of a ladder.
///
/// Rungs on which the shape is not cell-aligned are skipped with a notice.
pub fn strict_gap_report(
    shape: &FractionalShape,
    gamma: &Rational,
    family: &BasisFamily,
    ladder: &[GridGeometry],
    budget: u64,
    workers: usize,
) -> Result<GapReport> {
    if gamma <= &Rational::zero() || gamma > &Rational::one() {
        return Err(Error::invalid("gamma", "must lie in (0, 1]"));
    }
    let mut rungs: Vec<GapRung> = Vec::new();
    let mut notices = Vec::new();
    for geom in ladder {
        let geom = Arc::new(geom.clone());
        let e = match shape.rasterize(&geom) {
            Ok(e) => e,
            Err(err) => {
                notices.push(format!("skipped extent {:?}: {err}", geom.extent()));
                continue;
            }
        };
        let basis = Basis::new(family, &geom, budget)?.with_workers(workers);
        let loose = superlevel_direct(&e, &basis, gamma, false)?;
        let tight = superlevel_direct(&e, &basis, gamma, true)?;
        if !tight.is_subset(&loose)? {
            return Err(Error::Internal(
                "strict superlevel escaped the non-strict one".into(),
            ));
        }
        let gap_cells = loose.len() - tight.len();
        let gap_measure = loose.measure() - tight.measure();
        let decay = rungs
            .last()
            .filter(|r| !r.gap_measure.is_zero())
            .map(|r| &gap_measure / &r.gap_measure);
        rungs.push(GapRung {
            extent: geom.extent().to_vec(),
            h: geom.cell_width().clone(),
            nonstrict_measure: loose.measure(),
            strict_measure: tight.measure(),
            gap_measure,
            gap_cells,
            decay,
        });
    }
    Ok(GapReport {
        gamma: gamma.clone(),
        rungs,
        notices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::ElementSpec;
    use crate::maximal::{maximal_field, superlevel};
    use crate::rational::rat;

    fn line(n: usize) -> Arc<GridGeometry> {
        Arc::new(GridGeometry::line(n).unwrap())
    }

    fn intervals(g: &Arc<GridGeometry>) -> Basis {
        Basis::new(&BasisFamily::intervals(1, None), g, 1 << 22).unwrap()
    }

    /// Ceiling of a real quotient of logarithms, evaluated in floating point;
    /// only trusted when the quotient is far from an integer.
    fn float_ceiling(x: f64, base: f64) -> Option<u64> {
        let q = x.ln() / base.ln();
        ((q - q.round()).abs() > 1e-9).then(|| q.ceil().max(0.0) as u64)
    }

    #[test]
    fn k_examples() {
        assert_eq!(k_alpha_gamma(&rat(1, 4), &rat(1, 2), 1).unwrap(), 3);
        assert_eq!(k_alpha_gamma(&rat(1, 10), &rat(1, 2), 2).unwrap(), 10);
        assert!(k_alpha_gamma(&rat(1, 2), &rat(1, 2), 1).is_err());
        assert!(k_alpha_gamma(&rat(3, 4), &rat(1, 2), 1).is_err());
        assert!(k_alpha_gamma(&rat(1, 4), &rat(1, 1), 1).is_err());
    }

    #[test]
    fn k_agrees_with_float_logs_off_the_boundaries() {
        for (a, g, n) in [
            (1, 3, 1usize),
            (1, 7, 2),
            (2, 9, 3),
            (1, 100, 2),
            (3, 10, 1),
        ] {
            let (alpha, gamma) = (rat(a, 10), rat(g, 10));
            if alpha >= gamma {
                continue;
            }
            let (af, gf) = (a as f64 / 10.0, g as f64 / 10.0);
            let first = float_ceiling(gf / af, 1.0 / gf);
            let second = float_ceiling((gf * 2f64.powi(n as i32)).max(1.0), 1.0 / gf);
            if let (Some(f), Some(s)) = (first, second) {
                assert_eq!(k_alpha_gamma(&alpha, &gamma, n).unwrap(), f * (2 + s) + 1);
            }
        }
    }

    #[test]
    fn k_is_nonincreasing_in_alpha() {
        let gamma = rat(2, 3);
        let mut prev = u64::MAX;
        for a in 1..66 {
            let k = k_alpha_gamma(&rat(a, 100), &gamma, 2).unwrap();
            assert!(k <= prev);
            prev = k;
        }
    }

    #[test]
    fn orbit_examples() {
        let g = line(8);
        let b = intervals(&g);
        let e = CellSet::from_cells(&g, [3, 4]).unwrap();
        let o = halo_orbit(&e, &rat(1, 2), 0, &b).unwrap();
        assert_eq!(o.sets, vec![e.clone()]);
        let o = halo_orbit(&e, &rat(1, 2), 3, &b).unwrap();
        assert_eq!(o.sets[1].iter().collect::<Vec<_>>(), vec![1, 2, 3, 4, 5, 6]);
        assert!(o.is_monotone());
        assert!(o.grew(1));
        let field = maximal_field(&e, &b).unwrap();
        assert_eq!(o.sets[1], superlevel(&field, &rat(1, 2), false).unwrap());
        let empty = halo_orbit(&CellSet::empty(&g), &rat(1, 2), 4, &b).unwrap();
        assert!(empty.sets.iter().all(CellSet::is_empty));
        assert!(halo_orbit(&e, &rat(1, 1), 1, &b).is_err());
    }

    #[test]
    fn containment_examples() {
        let g = line(64);
        let b = intervals(&g);
        let params = IterationParams::new(rat(1, 4), rat(1, 2), 1).unwrap();
        let r =
            crate::basis::rasterize_element(&ElementSpec::Interval { lo: 0, hi: 32 }, &g).unwrap();
        let inside = CellSet::from_cells(&g, 0..32).unwrap();
        let (rep, _) = containment_experiment(&r, &inside, &params, &b).unwrap();
        assert_eq!(rep.contained_at, Some(1));
        let alternate = CellSet::from_cells(&g, (0..32).step_by(2)).unwrap();
        let (rep, orbit) = containment_experiment(&r, &alternate, &params, &b).unwrap();
        assert_eq!(rep.k, 3);
        assert_eq!(rep.average, rat(1, 2));
        assert_eq!(rep.contained_at, Some(1));
        assert_eq!(orbit.sets.len(), 4);
        let sparse = CellSet::from_cells(&g, (0..32).step_by(8)).unwrap();
        assert!(containment_experiment(&r, &sparse, &params, &b).is_err());
    }

    #[test]
    fn chained_bound_examples() {
        let g = line(64);
        let b = intervals(&g);
        let params = IterationParams::new(rat(1, 4), rat(1, 2), 1).unwrap();
        let rep = chained_bound_report(&CellSet::empty(&g), &params, &b, &rat(2, 1)).unwrap();
        assert!(rep.pass);
        assert!(rep.lhs.is_zero() && rep.rhs.is_zero());
        assert_eq!(rep.gamma_tilde, rat(3, 4));
        let corner = CellSet::from_cells(&g, [0]).unwrap();
        let rep = chained_bound_report(&corner, &params, &b, &rat(3, 1)).unwrap();
        assert_eq!(rep.lhs, rat(3, 1));
        assert_eq!(rep.k, k_alpha_gamma(&rat(1, 4), &rat(3, 4), 1).unwrap());
        // {M > 1/4} = {0, 1, 2} while the orbit at 3/4 never leaves {0}
        assert!(!rep.superlevel_within_orbit);
        // a lone cell cannot grow at level 3/4, so every step ratio is 1
        assert!(rep.steps.iter().all(|s| s.ratio == Some(rat(1, 1))));
        let middle = CellSet::from_cells(&g, [30]).unwrap();
        let rep = chained_bound_report(&middle, &params, &b, &rat(5, 1)).unwrap();
        assert_eq!(rep.lhs, rat(5, 1));
        assert!(chained_bound_report(&middle, &params, &b, &rat(1, 2)).is_err());
    }

    #[test]
    fn gap_ladder_middle_half() {
        let mut fam = BasisFamily::intervals(1, None);
        fam.scale_max_fraction = Some(rat(1, 2));
        let shape = FractionalShape::interval(rat(1, 4), rat(3, 4));
        let ladder: Vec<_> = [16usize, 64, 256]
            .iter()
            .map(|&n| GridGeometry::new(&[n], rat(2, n as i64)).unwrap())
            .collect();
        let rep = strict_gap_report(&shape, &rat(1, 2), &fam, &ladder, 1 << 22, 1).unwrap();
        assert_eq!(rep.rungs.len(), 3);
        for rung in &rep.rungs {
            assert_eq!(rung.gap_cells, 2);
            assert_eq!(rung.gap_measure, &rung.h * rat(2, 1));
        }
        assert_eq!(rep.rungs[1].decay, Some(rat(1, 4)));
    }

    #[test]
    fn gap_vanishes_without_scale_cap() {
        // with every interval length available, each outside cell of the middle
        // half sees an average of at least 2/3, so no cell sits exactly at 1/2
        let shape = FractionalShape::interval(rat(1, 4), rat(3, 4));
        let ladder = vec![GridGeometry::new(&[16], rat(1, 8)).unwrap()];
        let rep = strict_gap_report(
            &shape,
            &rat(1, 2),
            &BasisFamily::intervals(1, None),
            &ladder,
            1 << 20,
            1,
        )
        .unwrap();
        assert_eq!(rep.rungs[0].gap_cells, 0);
    }

    #[test]
    fn gap_edge_cases() {
        let fam = BasisFamily::intervals(1, None);
        let ladder = vec![
            GridGeometry::line(8).unwrap(),
            GridGeometry::line(10).unwrap(),
        ];
        let full = strict_gap_report(
            &FractionalShape::full(1),
            &rat(1, 2),
            &fam,
            &ladder,
            1 << 20,
            1,
        )
        .unwrap();
        assert!(full.rungs.iter().all(|r| r.gap_cells == 0));
        let quarter = FractionalShape::interval(rat(1, 4), rat(1, 2));
        let rep = strict_gap_report(&quarter, &rat(1, 1), &fam, &ladder, 1 << 20, 1).unwrap();
        assert_eq!(rep.rungs.len(), 1);
        assert_eq!(rep.notices.len(), 1);
        assert_eq!(rep.rungs[0].strict_measure, rat(0, 1));
        assert_eq!(rep.rungs[0].gap_cells, 2);
    }
}
