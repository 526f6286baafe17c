//! Homothecy-invariant set families and their rasterized members.
//!
//! Homothecies are discretized to integer translations and integer scale
//! factors; members that would leave the grid are omitted, never clipped.

use std::collections::HashSet;
use std::sync::Arc;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::grid::{CellSet, GridGeometry};
use crate::rational::Rational;

/// Default ceiling on the number of elements one enumeration may produce.
pub const DEFAULT_ELEMENT_BUDGET: u64 = 1 << 26;

/// Half-open box `[lo, hi)` in cell coordinates, padded to three axes
/// (unused axes hold `[0, 1)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellBox {
    lo: [u32; 3],
    hi: [u32; 3],
}

impl CellBox {
    pub fn new(geom: &GridGeometry, lo: &[usize], hi: &[usize]) -> Result<Self> {
        let d = geom.dimension();
        if lo.len() != d || hi.len() != d {
            return Err(Error::invalid(
                "box",
                format!("expected {d} coordinates per corner"),
            ));
        }
        let mut b = CellBox {
            lo: [0; 3],
            hi: [1; 3],
        };
        for a in 0..d {
            if lo[a] >= hi[a] {
                return Err(Error::invalid(
                    "box",
                    format!("empty range on axis {a}: [{}, {})", lo[a], hi[a]),
                ));
            }
            if hi[a] > geom.extent()[a] {
                return Err(Error::OutOfBounds {
                    coord: hi.to_vec(),
                    extent: geom.extent().to_vec(),
                });
            }
            b.lo[a] = lo[a] as u32;
            b.hi[a] = hi[a] as u32;
        }
        Ok(b)
    }

    fn from_raw(lo: [usize; 3], hi: [usize; 3]) -> Self {
        CellBox {
            lo: lo.map(|v| v as u32),
            hi: hi.map(|v| v as u32),
        }
    }

    pub fn lo(&self) -> [u32; 3] {
        self.lo
    }

    pub fn hi(&self) -> [u32; 3] {
        self.hi
    }

    pub fn cell_count(&self) -> u64 {
        (0..3).map(|a| (self.hi[a] - self.lo[a]) as u64).product()
    }

    pub fn contains(&self, c: [usize; 3]) -> bool {
        (0..3).all(|a| self.lo[a] as usize <= c[a] && c[a] < self.hi[a] as usize)
    }

    pub fn intersects(&self, other: &CellBox) -> bool {
        (0..3).all(|a| self.lo[a] < other.hi[a] && other.lo[a] < self.hi[a])
    }

    /// Visits the row-major linear index of every cell.
    pub fn for_each_cell(&self, shape: [usize; 3], mut f: impl FnMut(usize)) {
        for i in self.lo[0] as usize..self.hi[0] as usize {
            for j in self.lo[1] as usize..self.hi[1] as usize {
                let row = (i * shape[1] + j) * shape[2];
                for k in self.lo[2] as usize..self.hi[2] as usize {
                    f(row + k);
                }
            }
        }
    }
}

/// One rasterized member of a family: a union of pairwise disjoint boxes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisElement {
    id: u64,
    boxes: SmallVec<[CellBox; 2]>,
    size: u64,
}

impl BasisElement {
    pub fn new(id: u64, boxes: &[CellBox]) -> Result<Self> {
        if boxes.is_empty() {
            return Err(Error::invalid("element", "needs at least one box"));
        }
        for (i, a) in boxes.iter().enumerate() {
            if boxes[i + 1..].iter().any(|b| a.intersects(b)) {
                return Err(Error::invalid("element", "boxes must be pairwise disjoint"));
            }
        }
        Ok(Self::from_disjoint(id, boxes.iter().copied().collect()))
    }

    fn from_disjoint(id: u64, boxes: SmallVec<[CellBox; 2]>) -> Self {
        let size = boxes.iter().map(CellBox::cell_count).sum();
        BasisElement { id, boxes, size }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn boxes(&self) -> &[CellBox] {
        &self.boxes
    }

    /// Cell count, always at least one.
    pub fn cell_count(&self) -> u64 {
        self.size
    }

    pub fn contains_coords(&self, c: [usize; 3]) -> bool {
        self.boxes.iter().any(|b| b.contains(c))
    }

    pub fn for_each_cell(&self, shape: [usize; 3], mut f: impl FnMut(usize)) {
        for b in &self.boxes {
            b.for_each_cell(shape, &mut f);
        }
    }

    pub fn to_cellset(&self, geom: &Arc<GridGeometry>) -> CellSet {
        let mut s = CellSet::empty(geom);
        self.for_each_cell(geom.shape3(), |c| s.set_bit(c));
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Intervals,
    Cubes,
    AxisRects,
    JumpExample,
    Explicit,
}

/// Side-length bound: one value for every axis, or one per axis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScaleBound {
    Uniform(usize),
    PerAxis(Vec<usize>),
}

impl ScaleBound {
    fn resolve(&self, dims: usize, field: &str) -> Result<[usize; 3]> {
        let mut out = [1usize; 3];
        match self {
            ScaleBound::Uniform(v) => out[..dims].iter_mut().for_each(|o| *o = *v),
            ScaleBound::PerAxis(v) if v.len() == dims => out[..dims].copy_from_slice(v),
            ScaleBound::PerAxis(v) => {
                return Err(Error::invalid(
                    field,
                    format!("expected {dims} per-axis values, got {}", v.len()),
                ))
            }
        }
        Ok(out)
    }
}

/// Parameters of the jump family `((t, t+s) ∪ (t+x, t+x+e)) ∩ (t, t+2s)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JumpParams {
    pub scales: Vec<usize>,
    pub gaps: Vec<usize>,
    #[serde(default = "one")]
    pub stride: usize,
}

fn one() -> usize {
    1
}

/// Box corners as they appear in config files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
}

/// Descriptor of a family B. Resolved against a geometry by [`Basis::new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisFamily {
    pub kind: FamilyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_min: Option<ScaleBound>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_max: Option<ScaleBound>,
    /// Caps side lengths at `floor(fraction * N_i)`; lets one descriptor
    /// follow a resolution ladder.
    #[serde(
        default,
        with = "crate::rational::serde_q::opt",
        skip_serializing_if = "Option::is_none"
    )]
    pub scale_max_fraction: Option<Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump: Option<JumpParams>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub explicit: Vec<Vec<BoxSpec>>,
}

impl BasisFamily {
    fn plain(kind: FamilyKind, min: usize, max: Option<usize>) -> Self {
        BasisFamily {
            kind,
            scale_min: Some(ScaleBound::Uniform(min)),
            scale_max: max.map(ScaleBound::Uniform),
            scale_max_fraction: None,
            jump: None,
            explicit: Vec::new(),
        }
    }

    /// Intervals with side lengths in `[min, max]` (`None` = whole extent).
    pub fn intervals(min: usize, max: Option<usize>) -> Self {
        Self::plain(FamilyKind::Intervals, min, max)
    }

    pub fn cubes(min: usize, max: Option<usize>) -> Self {
        Self::plain(FamilyKind::Cubes, min, max)
    }

    pub fn axis_rects(min: usize, max: Option<usize>) -> Self {
        Self::plain(FamilyKind::AxisRects, min, max)
    }

    pub fn jump(scales: Vec<usize>, gaps: Vec<usize>, stride: usize) -> Self {
        BasisFamily {
            jump: Some(JumpParams {
                scales,
                gaps,
                stride,
            }),
            ..Self::plain(FamilyKind::JumpExample, 1, None)
        }
    }

    pub fn explicit(elements: Vec<Vec<BoxSpec>>) -> Self {
        BasisFamily {
            explicit: elements,
            ..Self::plain(FamilyKind::Explicit, 1, None)
        }
    }
}

/// Merged cells of the jump member with translate `t`, scale `s`, offset `x`, gap `e`.
fn jump_runs(t: usize, s: usize, x: usize, e: usize) -> SmallVec<[(usize, usize); 2]> {
    let first = (t, t + s);
    let lo = t + x;
    let hi = (t + x + e).min(t + 2 * s);
    let mut runs = SmallVec::new();
    if lo <= first.1 {
        runs.push((t, first.1.max(hi)));
    } else {
        runs.push(first);
        runs.push((lo, hi));
    }
    runs
}

/// Kind-specific parameters of a single element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ElementSpec {
    Interval {
        lo: usize,
        hi: usize,
    },
    Cube {
        corner: Vec<usize>,
        side: usize,
    },
    Rect {
        lo: Vec<usize>,
        hi: Vec<usize>,
    },
    Jump {
        t: usize,
        s: usize,
        x: usize,
        e: usize,
    },
    Boxes(Vec<BoxSpec>),
}

/// Rasterizes one member; elements reaching past the grid are rejected.
pub fn rasterize_element(spec: &ElementSpec, geom: &GridGeometry) -> Result<BasisElement> {
    let boxes: Vec<CellBox> = match spec {
        ElementSpec::Interval { lo, hi } => {
            if geom.dimension() != 1 {
                return Err(Error::invalid("element", "intervals live on 1D grids"));
            }
            vec![CellBox::new(geom, &[*lo], &[*hi])?]
        }
        ElementSpec::Cube { corner, side } => {
            let hi: Vec<usize> = corner.iter().map(|c| c + side).collect();
            vec![CellBox::new(geom, corner, &hi)?]
        }
        ElementSpec::Rect { lo, hi } => vec![CellBox::new(geom, lo, hi)?],
        ElementSpec::Jump { t, s, x, e } => {
            if geom.dimension() != 1 {
                return Err(Error::invalid("element", "jump members live on 1D grids"));
            }
            if *e == 0 || e >= s {
                return Err(Error::invalid("element.e", "gap must satisfy 1 <= e < s"));
            }
            if *x > 2 * s - e {
                return Err(Error::invalid(
                    "element.x",
                    "offset must satisfy 0 <= x <= 2s - e",
                ));
            }
            jump_runs(*t, *s, *x, *e)
                .iter()
                .map(|&(lo, hi)| CellBox::new(geom, &[lo], &[hi]))
                .collect::<Result<_>>()?
        }
        ElementSpec::Boxes(list) => list
            .iter()
            .map(|b| CellBox::new(geom, &b.lo, &b.hi))
            .collect::<Result<_>>()?,
    };
    BasisElement::new(0, &boxes)
}

type JumpShape = (SmallVec<[(usize, usize); 2]>, usize);

#[derive(Debug, Clone)]
enum Plan {
    Rects {
        min: [usize; 3],
        max: [usize; 3],
        cube: bool,
    },
    // canonical shapes as merged runs starting at 0, with their span
    Jump {
        shapes: Vec<JumpShape>,
        stride: usize,
    },
    Explicit {
        elements: Vec<SmallVec<[CellBox; 2]>>,
    },
}

/// A family resolved on a geometry, with its exact element count checked
/// against the budget.
#[derive(Debug, Clone)]
pub struct Basis {
    geom: Arc<GridGeometry>,
    family: BasisFamily,
    plan: Plan,
    count: u64,
    budget: u64,
    workers: usize,
}

impl Basis {
    pub fn new(family: &BasisFamily, geom: &Arc<GridGeometry>, budget: u64) -> Result<Self> {
        if budget == 0 {
            return Err(Error::invalid("budget.elements", "must be positive"));
        }
        let plan = resolve(family, geom)?;
        let count = count_elements(&plan, geom);
        if count > budget as u128 {
            return Err(Error::BudgetExceeded {
                what: "element",
                required: count,
                budget: budget as u128,
            });
        }
        Ok(Basis {
            geom: Arc::clone(geom),
            family: family.clone(),
            plan,
            count: count as u64,
            budget,
            workers: 1,
        })
    }

    /// Number of worker threads used by the kernels; results never depend on it.
    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn geometry(&self) -> &Arc<GridGeometry> {
        &self.geom
    }

    pub fn family(&self) -> &BasisFamily {
        &self.family
    }

    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Every member, ids in enumeration order.
    pub fn elements(&self) -> Box<dyn Iterator<Item = BasisElement> + Send + '_> {
        let shape = self.geom.shape3();
        let dims = self.geom.dimension();
        let raw: Box<dyn Iterator<Item = SmallVec<[CellBox; 2]>> + Send + '_> = match &self.plan {
            Plan::Rects {
                min,
                max,
                cube: false,
            } => {
                let (min, max) = (*min, *max);
                Box::new(
                    (min[0]..=max[0].min(shape[0]))
                        .flat_map(move |l0| (min[1]..=max[1].min(shape[1])).map(move |l1| (l0, l1)))
                        .flat_map(move |(l0, l1)| {
                            (min[2]..=max[2].min(shape[2])).map(move |l2| [l0, l1, l2])
                        })
                        .flat_map(move |len| placements(shape, len)),
                )
            }
            Plan::Rects {
                min,
                max,
                cube: true,
            } => {
                let hi = max[0].min(shape[..dims].iter().copied().min().unwrap_or(1));
                Box::new((min[0]..=hi).flat_map(move |s| {
                    let mut len = [1; 3];
                    len[..dims].iter_mut().for_each(|l| *l = s);
                    placements(shape, len)
                }))
            }
            Plan::Jump { shapes, stride } => {
                let n = shape[0];
                Box::new((0..n).step_by(*stride).flat_map(move |t| {
                    shapes
                        .iter()
                        .filter(move |(_, span)| t + span <= n)
                        .map(move |(runs, _)| {
                            runs.iter()
                                .map(|&(lo, hi)| CellBox::from_raw([t + lo, 0, 0], [t + hi, 1, 1]))
                                .collect()
                        })
                }))
            }
            Plan::Explicit { elements } => Box::new(elements.iter().cloned()),
        };
        Box::new(
            raw.enumerate()
                .map(|(i, boxes)| BasisElement::from_disjoint(i as u64, boxes)),
        )
    }

    /// Members whose cells include `cell`, in enumeration order.
    pub fn elements_through(&self, cell: usize) -> Result<impl Iterator<Item = BasisElement> + '_> {
        let coords = self.geom.coords(cell)?;
        let mut c3 = [0; 3];
        c3[..coords.len()].copy_from_slice(&coords);
        Ok(self.elements().filter(move |e| e.contains_coords(c3)))
    }
}

/// Every placement of a box with side lengths `len` inside `shape`, row-major.
fn placements(shape: [usize; 3], len: [usize; 3]) -> impl Iterator<Item = SmallVec<[CellBox; 2]>> {
    let fits = (0..3).all(|a| len[a] >= 1 && len[a] <= shape[a]);
    let span = |a: usize| if fits { shape[a] - len[a] + 1 } else { 0 };
    let (s0, s1, s2) = (span(0), span(1), span(2));
    (0..s0)
        .flat_map(move |i| (0..s1).map(move |j| (i, j)))
        .flat_map(move |(i, j)| (0..s2).map(move |k| [i, j, k]))
        .map(move |lo| {
            let hi = [lo[0] + len[0], lo[1] + len[1], lo[2] + len[2]];
            let mut v = SmallVec::new();
            v.push(CellBox::from_raw(lo, hi));
            v
        })
}

fn resolve(family: &BasisFamily, geom: &GridGeometry) -> Result<Plan> {
    let dims = geom.dimension();
    let shape = geom.shape3();
    match family.kind {
        FamilyKind::Intervals | FamilyKind::Cubes | FamilyKind::AxisRects => {
            if family.kind == FamilyKind::Intervals && dims != 1 {
                return Err(Error::invalid(
                    "family.kind",
                    "intervals need a 1D geometry",
                ));
            }
            let min = family
                .scale_min
                .as_ref()
                .map_or(Ok([1; 3]), |b| b.resolve(dims, "family.scale_min"))?;
            let mut max = family
                .scale_max
                .as_ref()
                .map_or(Ok(shape), |b| b.resolve(dims, "family.scale_max"))?;
            if let Some(frac) = &family.scale_max_fraction {
                if frac <= &Rational::zero() || frac > &Rational::one() {
                    return Err(Error::invalid(
                        "family.scale_max_fraction",
                        "must lie in (0, 1]",
                    ));
                }
                for a in 0..dims {
                    let cap = (frac * Rational::from_integer(shape[a].into())).floor();
                    let cap: usize = cap.to_integer().try_into().unwrap_or(usize::MAX);
                    max[a] = max[a].min(cap);
                }
            }
            if min[..dims].contains(&0) {
                return Err(Error::invalid(
                    "family.scale_min",
                    "side lengths start at 1",
                ));
            }
            if (0..dims).any(|a| min[a] > max[a]) {
                return Err(Error::invalid(
                    "family.scale_max",
                    "scale_max is below scale_min",
                ));
            }
            let cube = family.kind == FamilyKind::Cubes;
            if cube
                && (min[..dims].iter().any(|&m| m != min[0])
                    || max[..dims].iter().any(|&m| m != max[0]))
            {
                return Err(Error::invalid(
                    "family.scale_min",
                    "cubes take one side-length range",
                ));
            }
            Ok(Plan::Rects { min, max, cube })
        }
        FamilyKind::JumpExample => {
            if dims != 1 {
                return Err(Error::invalid(
                    "family.kind",
                    "jump_example needs a 1D geometry",
                ));
            }
            let p = family.jump.as_ref().ok_or_else(|| {
                Error::invalid("family.jump", "jump_example requires jump parameters")
            })?;
            if p.scales.is_empty() || p.gaps.is_empty() {
                return Err(Error::invalid(
                    "family.jump",
                    "scales and gaps must be nonempty",
                ));
            }
            if p.stride == 0 {
                return Err(Error::invalid("family.jump.stride", "must be positive"));
            }
            let mut seen = HashSet::new();
            let mut shapes = Vec::new();
            for &s in &p.scales {
                for &e in &p.gaps {
                    if e == 0 || e >= s {
                        return Err(Error::invalid(
                            "family.jump.gaps",
                            format!("gap {e} must satisfy 1 <= e < s = {s}"),
                        ));
                    }
                    for x in 0..=2 * s - e {
                        let runs = jump_runs(0, s, x, e);
                        if seen.insert(runs.clone()) {
                            let span = runs.last().map_or(0, |r| r.1);
                            shapes.push((runs, span));
                        }
                    }
                }
            }
            Ok(Plan::Jump {
                shapes,
                stride: p.stride,
            })
        }
        FamilyKind::Explicit => {
            if family.explicit.is_empty() {
                return Err(Error::invalid(
                    "family.explicit",
                    "explicit family needs at least one element",
                ));
            }
            let elements = family
                .explicit
                .iter()
                .map(|boxes| {
                    let boxes: Vec<CellBox> = boxes
                        .iter()
                        .map(|b| CellBox::new(geom, &b.lo, &b.hi))
                        .collect::<Result<_>>()?;
                    Ok(BasisElement::new(0, &boxes)?.boxes)
                })
                .collect::<Result<_>>()?;
            Ok(Plan::Explicit { elements })
        }
    }
}

fn count_elements(plan: &Plan, geom: &GridGeometry) -> u128 {
    let shape = geom.shape3();
    let dims = geom.dimension();
    let placements_along = |a: usize, len: usize| -> u128 {
        if len >= 1 && len <= shape[a] {
            (shape[a] - len + 1) as u128
        } else {
            0
        }
    };
    match plan {
        Plan::Rects {
            min,
            max,
            cube: false,
        } => (0..3)
            .map(|a| {
                (min[a]..=max[a])
                    .map(|l| placements_along(a, l))
                    .sum::<u128>()
            })
            .product(),
        Plan::Rects {
            min,
            max,
            cube: true,
        } => (min[0]..=max[0])
            .map(|s| (0..dims).map(|a| placements_along(a, s)).product::<u128>())
            .sum(),
        Plan::Jump { shapes, stride } => shapes
            .iter()
            .filter(|(_, span)| *span <= shape[0])
            .map(|(_, span)| ((shape[0] - span) / stride + 1) as u128)
            .sum(),
        Plan::Explicit { elements } => elements.len() as u128,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn geom(extent: &[usize]) -> Arc<GridGeometry> {
        Arc::new(GridGeometry::new(extent, rat(1, 1)).unwrap())
    }

    fn cells(e: &BasisElement, g: &Arc<GridGeometry>) -> Vec<usize> {
        e.to_cellset(g).iter().collect()
    }

    #[test]
    fn jump_rasterization() {
        let g = geom(&[8]);
        let e = rasterize_element(
            &ElementSpec::Jump {
                t: 0,
                s: 4,
                x: 4,
                e: 1,
            },
            &g,
        )
        .unwrap();
        assert_eq!(cells(&e, &g), vec![0, 1, 2, 3, 4]);
        assert_eq!(e.cell_count(), 5);
        let e = rasterize_element(
            &ElementSpec::Jump {
                t: 0,
                s: 4,
                x: 2,
                e: 1,
            },
            &g,
        )
        .unwrap();
        assert_eq!(cells(&e, &g), vec![0, 1, 2, 3]);
        assert_eq!(e.boxes().len(), 1);
        let e = rasterize_element(
            &ElementSpec::Jump {
                t: 1,
                s: 3,
                x: 5,
                e: 1,
            },
            &g,
        )
        .unwrap();
        assert_eq!(cells(&e, &g), vec![1, 2, 3, 6]);
        assert_eq!(e.boxes().len(), 2);
    }

    #[test]
    fn jump_rejections() {
        let g = geom(&[8]);
        assert!(rasterize_element(
            &ElementSpec::Jump {
                t: 0,
                s: 4,
                x: 0,
                e: 4
            },
            &g
        )
        .is_err());
        assert!(rasterize_element(
            &ElementSpec::Jump {
                t: 0,
                s: 4,
                x: 8,
                e: 1
            },
            &g
        )
        .is_err());
        assert!(rasterize_element(
            &ElementSpec::Jump {
                t: 4,
                s: 4,
                x: 5,
                e: 1
            },
            &g
        )
        .is_err());
    }

    #[test]
    fn interval_rasterization_is_identity() {
        let g = geom(&[8]);
        let e = rasterize_element(&ElementSpec::Interval { lo: 3, hi: 5 }, &g).unwrap();
        assert_eq!(e.boxes().len(), 1);
        assert_eq!((e.boxes()[0].lo()[0], e.boxes()[0].hi()[0]), (3, 5));
        assert!(rasterize_element(&ElementSpec::Interval { lo: 5, hi: 5 }, &g).is_err());
        assert!(rasterize_element(&ElementSpec::Interval { lo: 5, hi: 9 }, &g).is_err());
    }

    #[test]
    fn overlapping_boxes_rejected() {
        let g = geom(&[8]);
        let spec = ElementSpec::Boxes(vec![
            BoxSpec {
                lo: vec![0],
                hi: vec![3],
            },
            BoxSpec {
                lo: vec![2],
                hi: vec![4],
            },
        ]);
        assert!(rasterize_element(&spec, &g).is_err());
    }

    #[test]
    fn enumeration_counts() {
        let b = Basis::new(&BasisFamily::intervals(1, Some(4)), &geom(&[4]), 100).unwrap();
        assert_eq!(b.len(), 10);
        assert_eq!(b.elements().count(), 10);
        let b = Basis::new(&BasisFamily::cubes(1, Some(2)), &geom(&[3, 3]), 100).unwrap();
        assert_eq!(b.len(), 13);
        assert_eq!(b.elements().count(), 13);
        let b = Basis::new(&BasisFamily::axis_rects(1, Some(3)), &geom(&[3, 3]), 100).unwrap();
        assert_eq!(b.len(), 36);
        assert_eq!(b.elements().count(), 36);
    }

    #[test]
    fn axis_rect_count_matches_brute_force() {
        // every pair of half-open ranges per axis
        let g = geom(&[3, 4, 2]);
        let ranges = |n: usize| {
            (0..n)
                .flat_map(move |lo| (lo + 1..=n).map(move |hi| (lo, hi)))
                .count()
        };
        let b = Basis::new(&BasisFamily::axis_rects(1, None), &g, 1 << 20).unwrap();
        assert_eq!(b.len() as usize, ranges(3) * ranges(4) * ranges(2));
        assert_eq!(b.elements().count() as u64, b.len());
    }

    #[test]
    fn budget_failure_reports_exact_count() {
        let err = Basis::new(&BasisFamily::intervals(1, None), &geom(&[4]), 9).unwrap_err();
        assert_eq!(
            err,
            Error::BudgetExceeded {
                what: "element",
                required: 10,
                budget: 9
            }
        );
    }

    #[test]
    fn elements_through_examples() {
        let b = Basis::new(&BasisFamily::intervals(1, Some(4)), &geom(&[4]), 100).unwrap();
        let through: Vec<_> = b
            .elements_through(0)
            .unwrap()
            .map(|e| e.cell_count())
            .collect();
        assert_eq!(through, vec![1, 2, 3, 4]);
        let g = geom(&[3, 3]);
        let b = Basis::new(&BasisFamily::cubes(1, Some(2)), &g, 100).unwrap();
        assert_eq!(b.elements_through(0).unwrap().count(), 2);
        assert!(b.elements_through(9).is_err());
    }

    #[test]
    fn elements_through_is_filtered_enumeration() {
        let g = geom(&[4, 3]);
        let b = Basis::new(&BasisFamily::axis_rects(1, None), &g, 1 << 16).unwrap();
        for cell in 0..g.cell_count() {
            let oracle: Vec<_> = b
                .elements()
                .filter(|e| e.to_cellset(&g).contains(cell).unwrap())
                .collect();
            let got: Vec<_> = b.elements_through(cell).unwrap().collect();
            assert_eq!(got, oracle);
        }
    }

    #[test]
    fn enumeration_is_deterministic_and_unique() {
        let g = geom(&[24]);
        let fam = BasisFamily::jump(vec![4, 6], vec![1, 2], 1);
        let b = Basis::new(&fam, &g, 1 << 16).unwrap();
        let first: Vec<_> = b.elements().collect();
        let second: Vec<_> = b.elements().collect();
        assert_eq!(first, second);
        assert_eq!(first.len() as u64, b.len());
        let distinct: HashSet<Vec<usize>> = first.iter().map(|e| cells(e, &g)).collect();
        assert_eq!(distinct.len(), first.len());
        for (i, e) in first.iter().enumerate() {
            assert_eq!(e.id(), i as u64);
            assert!(e.cell_count() >= 1);
        }
    }

    #[test]
    fn translation_and_scaling_closure() {
        let g = geom(&[5, 4]);
        let b = Basis::new(&BasisFamily::cubes(1, Some(3)), &g, 1 << 16).unwrap();
        let sets: HashSet<Vec<usize>> = b.elements().map(|e| cells(&e, &g)).collect();
        for e in b.elements() {
            let bx = e.boxes()[0];
            let side = (bx.hi()[0] - bx.lo()[0]) as usize;
            for (dx, dy) in [(1usize, 0usize), (0, 1), (1, 1)] {
                let lo = [bx.lo()[0] as usize + dx, bx.lo()[1] as usize + dy];
                if lo[0] + side <= 5 && lo[1] + side <= 4 {
                    let moved = CellSet::from_box(&g, &lo, &[lo[0] + side, lo[1] + side]).unwrap();
                    assert!(sets.contains(&moved.iter().collect::<Vec<_>>()));
                }
            }
            let lo = [bx.lo()[0] as usize, bx.lo()[1] as usize];
            if side < 3 && lo[0] + side < 5 && lo[1] + side < 4 {
                let grown =
                    CellSet::from_box(&g, &lo, &[lo[0] + side + 1, lo[1] + side + 1]).unwrap();
                assert!(sets.contains(&grown.iter().collect::<Vec<_>>()));
            }
        }
    }

    #[test]
    fn family_validation() {
        let g2 = geom(&[3, 3]);
        assert!(Basis::new(&BasisFamily::intervals(1, None), &g2, 100).is_err());
        assert!(Basis::new(&BasisFamily::intervals(3, Some(2)), &geom(&[4]), 100).is_err());
        assert!(Basis::new(&BasisFamily::jump(vec![4], vec![4], 1), &geom(&[8]), 100).is_err());
        assert!(Basis::new(&BasisFamily::explicit(vec![]), &geom(&[8]), 100).is_err());
        assert!(Basis::new(&BasisFamily::intervals(1, None), &geom(&[4]), 0).is_err());
    }

    #[test]
    fn scale_max_fraction_caps_lengths() {
        let mut fam = BasisFamily::intervals(1, None);
        fam.scale_max_fraction = Some(rat(1, 2));
        let b = Basis::new(&fam, &geom(&[16]), 1000).unwrap();
        assert!(b.elements().all(|e| e.cell_count() <= 8));
        assert_eq!(b.len(), (1..=8).map(|l| 17 - l).sum::<u64>());
    }

    #[test]
    fn family_json_round_trip() {
        let text = r#"{"kind":"jump_example","jump":{"scales":[4],"gaps":[1,2],"stride":2}}"#;
        let fam: BasisFamily = serde_json::from_str(text).unwrap();
        assert_eq!(fam.jump.as_ref().unwrap().stride, 2);
        let back: BasisFamily =
            serde_json::from_str(&serde_json::to_string(&fam).unwrap()).unwrap();
        assert_eq!(back, fam);
        let rects: BasisFamily = serde_json::from_str(
            r#"{"kind":"axis_rects","scale_min":[1,2],"scale_max":3,"scale_max_fraction":"1/2"}"#,
        )
        .unwrap();
        assert_eq!(rects.scale_min, Some(ScaleBound::PerAxis(vec![1, 2])));
        assert_eq!(rects.scale_max_fraction, Some(rat(1, 2)));
    }
}
