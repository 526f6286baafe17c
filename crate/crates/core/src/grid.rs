//! Grid geometry and measurable sets represented as bit-vectors over cells.
//!
//! Cells are closed-open cubes of side `h`; a set's measure is its cell count
//! times `h^n`. Linear indexing is row-major with the last axis fastest.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{int, to_u64_pair, Rational};

/// Default ceiling on the number of cells a geometry may hold.
pub const DEFAULT_CELL_BUDGET: u64 = 1 << 24;

/// Discretization of a box in R^n, n in {1, 2, 3}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridGeometry {
    extent: Vec<usize>,
    cell_width: Rational,
    cells: usize,
}

impl GridGeometry {
    pub fn new(extent: &[usize], cell_width: Rational) -> Result<Self> {
        Self::with_budget(extent, cell_width, DEFAULT_CELL_BUDGET)
    }

    pub fn with_budget(extent: &[usize], cell_width: Rational, budget: u64) -> Result<Self> {
        if extent.is_empty() || extent.len() > 3 {
            return Err(Error::invalid(
                "geometry.extent",
                "dimension must be 1, 2 or 3",
            ));
        }
        if extent.contains(&0) {
            return Err(Error::invalid(
                "geometry.extent",
                "cell counts must be positive",
            ));
        }
        if cell_width <= Rational::zero() {
            return Err(Error::invalid("geometry.h", "cell width must be positive"));
        }
        let required = extent.iter().map(|&n| n as u128).product::<u128>();
        if required > budget as u128 {
            return Err(Error::BudgetExceeded {
                what: "cell",
                required,
                budget: budget as u128,
            });
        }
        Ok(GridGeometry {
            extent: extent.to_vec(),
            cell_width,
            cells: required as usize,
        })
    }

    /// Unit-width 1D grid of `n` cells.
    pub fn line(n: usize) -> Result<Self> {
        Self::new(&[n], Rational::one())
    }

    pub fn dimension(&self) -> usize {
        self.extent.len()
    }

    pub fn extent(&self) -> &[usize] {
        &self.extent
    }

    /// Extent padded with trailing ones to three axes.
    pub fn shape3(&self) -> [usize; 3] {
        let mut s = [1; 3];
        s[..self.extent.len()].copy_from_slice(&self.extent);
        s
    }

    pub fn cell_width(&self) -> &Rational {
        &self.cell_width
    }

    pub fn cell_count(&self) -> usize {
        self.cells
    }

    /// `h^n`, the measure of one cell.
    pub fn cell_measure(&self) -> Rational {
        num_traits::pow(self.cell_width.clone(), self.dimension())
    }

    pub fn linear_index(&self, coords: &[usize]) -> Result<usize> {
        if coords.len() != self.dimension()
            || coords.iter().zip(&self.extent).any(|(&c, &n)| c >= n)
        {
            return Err(Error::OutOfBounds {
                coord: coords.to_vec(),
                extent: self.extent.clone(),
            });
        }
        Ok(coords
            .iter()
            .zip(&self.extent)
            .fold(0usize, |acc, (&c, &n)| acc * n + c))
    }

    pub fn coords(&self, index: usize) -> Result<Vec<usize>> {
        if index >= self.cells {
            return Err(Error::OutOfBounds {
                coord: vec![index],
                extent: self.extent.clone(),
            });
        }
        let mut out = vec![0; self.dimension()];
        let mut rest = index;
        for (axis, &n) in self.extent.iter().enumerate().rev() {
            out[axis] = rest % n;
            rest /= n;
        }
        Ok(out)
    }

    /// Header used in set serialization: `n=<dims>;extent=<..>;h=<num>/<den>;`.
    pub fn descriptor(&self) -> String {
        let extent: Vec<String> = self.extent.iter().map(|n| n.to_string()).collect();
        format!(
            "n={};extent={};h={}/{};",
            self.dimension(),
            extent.join(","),
            self.cell_width.numer(),
            self.cell_width.denom()
        )
    }

    fn parse_descriptor(text: &str) -> Result<(Self, &str)> {
        let bad = |m: &str| Error::invalid("cellset", m.to_string());
        let mut rest = text;
        let mut take = |key: &str| -> Result<String> {
            let body = rest
                .strip_prefix(key)
                .ok_or_else(|| bad(&format!("expected {key}")))?;
            let end = body.find(';').ok_or_else(|| bad("missing ';'"))?;
            let value = body[..end].to_string();
            rest = &body[end + 1..];
            Ok(value)
        };
        let dims: usize = take("n=")?.parse().map_err(|_| bad("bad dimension"))?;
        let extent: Vec<usize> = take("extent=")?
            .split(',')
            .map(|s| s.parse().map_err(|_| bad("bad extent")))
            .collect::<Result<_>>()?;
        let h = take("h=")?;
        let (hn, hd) = h.split_once('/').ok_or_else(|| bad("h must be num/den"))?;
        let hn: BigInt = hn.parse().map_err(|_| bad("bad h numerator"))?;
        let hd: BigInt = hd.parse().map_err(|_| bad("bad h denominator"))?;
        if hd.is_zero() {
            return Err(bad("zero h denominator"));
        }
        if dims != extent.len() {
            return Err(bad("dimension does not match extent"));
        }
        let geom = GridGeometry::new(&extent, Rational::new(hn, hd))?;
        Ok((geom, rest))
    }
}

/// Set operation selector for [`set_algebra`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetOp {
    Union,
    Intersect,
    Difference,
    Complement,
}

/// A finite union of grid cells.
#[derive(Clone, PartialEq, Eq)]
pub struct CellSet {
    geom: Arc<GridGeometry>,
    words: Vec<u64>,
}

impl fmt::Debug for CellSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CellSet")
            .field("extent", &self.geom.extent)
            .field("cells", &self.iter().collect::<Vec<_>>())
            .finish()
    }
}

impl CellSet {
    pub fn empty(geom: &Arc<GridGeometry>) -> Self {
        CellSet {
            geom: Arc::clone(geom),
            words: vec![0; geom.cells.div_ceil(64)],
        }
    }

    pub fn full(geom: &Arc<GridGeometry>) -> Self {
        let mut s = Self::empty(geom);
        s.words.iter_mut().for_each(|w| *w = !0);
        s.clear_tail();
        s
    }

    pub fn from_cells<I: IntoIterator<Item = usize>>(
        geom: &Arc<GridGeometry>,
        cells: I,
    ) -> Result<Self> {
        let mut s = Self::empty(geom);
        for c in cells {
            s.insert(c)?;
        }
        Ok(s)
    }

    /// Cells `[lo, hi)` along every axis.
    pub fn from_box(geom: &Arc<GridGeometry>, lo: &[usize], hi: &[usize]) -> Result<Self> {
        let d = geom.dimension();
        if lo.len() != d || hi.len() != d {
            return Err(Error::invalid(
                "box",
                "corner arity must match the dimension",
            ));
        }
        if lo
            .iter()
            .zip(hi)
            .zip(&geom.extent)
            .any(|((&l, &h), &n)| l >= h || h > n)
        {
            return Err(Error::OutOfBounds {
                coord: hi.to_vec(),
                extent: geom.extent.clone(),
            });
        }
        let mut s = Self::empty(geom);
        let (mut l3, mut h3) = ([0; 3], [1; 3]);
        l3[..d].copy_from_slice(lo);
        h3[..d].copy_from_slice(hi);
        let shape = geom.shape3();
        for i in l3[0]..h3[0] {
            for j in l3[1]..h3[1] {
                for k in l3[2]..h3[2] {
                    s.set_bit((i * shape[1] + j) * shape[2] + k);
                }
            }
        }
        Ok(s)
    }

    pub fn geometry(&self) -> &Arc<GridGeometry> {
        &self.geom
    }

    fn clear_tail(&mut self) {
        let rem = self.geom.cells % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    fn check(&self, index: usize) -> Result<()> {
        if index >= self.geom.cells {
            return Err(Error::OutOfBounds {
                coord: vec![index],
                extent: self.geom.extent.clone(),
            });
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn bit(&self, index: usize) -> bool {
        self.words[index / 64] >> (index % 64) & 1 == 1
    }

    #[inline]
    pub(crate) fn set_bit(&mut self, index: usize) {
        self.words[index / 64] |= 1 << (index % 64);
    }

    #[inline]
    pub(crate) fn flip_bit(&mut self, index: usize) {
        self.words[index / 64] ^= 1 << (index % 64);
    }

    pub fn contains(&self, index: usize) -> Result<bool> {
        self.check(index)?;
        Ok(self.bit(index))
    }

    pub fn contains_at(&self, coords: &[usize]) -> Result<bool> {
        Ok(self.bit(self.geom.linear_index(coords)?))
    }

    pub fn insert(&mut self, index: usize) -> Result<()> {
        self.check(index)?;
        self.set_bit(index);
        Ok(())
    }

    pub fn remove(&mut self, index: usize) -> Result<()> {
        self.check(index)?;
        self.words[index / 64] &= !(1 << (index % 64));
        Ok(())
    }

    /// Number of member cells.
    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Exact Lebesgue measure: cell count times `h^n`.
    pub fn measure(&self) -> Rational {
        int(self.len() as u64) * self.geom.cell_measure()
    }

    /// Member cells in ascending row-major order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let tz = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(wi * 64 + tz)
            })
        })
    }

    fn same_geometry(&self, other: &CellSet) -> Result<()> {
        same(&self.geom, &other.geom)
    }

    fn zip_with(&self, other: &CellSet, f: impl Fn(u64, u64) -> u64) -> Result<CellSet> {
        self.same_geometry(other)?;
        let words = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(CellSet {
            geom: Arc::clone(&self.geom),
            words,
        })
    }

    pub fn union(&self, other: &CellSet) -> Result<CellSet> {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn intersect(&self, other: &CellSet) -> Result<CellSet> {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn difference(&self, other: &CellSet) -> Result<CellSet> {
        self.zip_with(other, |a, b| a & !b)
    }

    pub fn complement(&self) -> CellSet {
        let mut out = CellSet {
            geom: Arc::clone(&self.geom),
            words: self.words.iter().map(|w| !w).collect(),
        };
        out.clear_tail();
        out
    }

    pub fn is_subset(&self, other: &CellSet) -> Result<bool> {
        self.same_geometry(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .all(|(&a, &b)| a & !b == 0))
    }

    pub(crate) fn union_in_place(&mut self, other: &CellSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    /// Orders sets as binary numbers in which cell `i` carries weight `2^i`.
    ///
    /// This is the order used to pick the least witness among ties.
    pub fn numeric_cmp(&self, other: &CellSet) -> Ordering {
        for (a, b) in self.words.iter().rev().zip(other.words.iter().rev()) {
            match a.cmp(b) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    }

    /// Lowercase hex body; hex digit `j` holds cells `4j..4j+3`, cell `4j` in its
    /// lowest bit, so the most significant cell comes last.
    pub fn to_hex(&self) -> String {
        let digits = self.geom.cells.div_ceil(4);
        (0..digits)
            .map(|j| {
                let nibble = (self.words[j / 16] >> ((j % 16) * 4)) & 0xf;
                char::from_digit(nibble as u32, 16).expect("nibble")
            })
            .collect()
    }

    /// Full serialization: geometry descriptor followed by [`CellSet::to_hex`].
    pub fn serialize(&self) -> String {
        format!("{}{}", self.geom.descriptor(), self.to_hex())
    }

    pub fn from_hex(geom: &Arc<GridGeometry>, hex: &str) -> Result<Self> {
        let digits = geom.cells.div_ceil(4);
        if hex.len() != digits {
            return Err(Error::invalid(
                "cellset",
                format!("expected {digits} hex digits, found {}", hex.len()),
            ));
        }
        let mut s = Self::empty(geom);
        for (j, ch) in hex.chars().enumerate() {
            let v = ch
                .to_digit(16)
                .filter(|_| !ch.is_ascii_uppercase())
                .ok_or_else(|| Error::invalid("cellset", format!("bad hex digit {ch:?}")))?;
            s.words[j / 16] |= (v as u64) << ((j % 16) * 4);
        }
        let before = s.words.clone();
        s.clear_tail();
        if before != s.words {
            return Err(Error::invalid("cellset", "bits set beyond the last cell"));
        }
        Ok(s)
    }

    pub fn deserialize(text: &str) -> Result<Self> {
        let (geom, hex) = GridGeometry::parse_descriptor(text)?;
        Self::from_hex(&Arc::new(geom), hex)
    }
}

/// Applies `op` to `s` (and `t` for binary operations).
pub fn set_algebra(op: SetOp, s: &CellSet, t: Option<&CellSet>) -> Result<CellSet> {
    let need = || Error::invalid("set_algebra", "binary operation needs two operands");
    match op {
        SetOp::Union => s.union(t.ok_or_else(need)?),
        SetOp::Intersect => s.intersect(t.ok_or_else(need)?),
        SetOp::Difference => s.difference(t.ok_or_else(need)?),
        SetOp::Complement => match t {
            None => Ok(s.complement()),
            Some(_) => Err(Error::invalid(
                "set_algebra",
                "complement takes one operand",
            )),
        },
    }
}

/// Seeded Bernoulli set: each cell is kept independently with probability `density`.
pub fn random_set(geom: &Arc<GridGeometry>, density: &Rational, seed: u64) -> Result<CellSet> {
    if density < &Rational::zero() || density > &Rational::one() {
        return Err(Error::invalid("density", "must lie in [0, 1]"));
    }
    let (num, den) = to_u64_pair(density, "density")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = CellSet::empty(geom);
    for i in 0..geom.cells {
        if rng.gen_range(0..den) < num {
            s.set_bit(i);
        }
    }
    Ok(s)
}


pub(crate) fn same(a: &Arc<GridGeometry>, b: &Arc<GridGeometry>) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(Error::GeometryMismatch)
    }
}

/// Box with corners given as fractions of the extent, so one shape can be
/// rasterized on every rung of a resolution ladder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FractionalBox {
    #[serde(with = "crate::rational::serde_q::vec")]
    pub lo: Vec<Rational>,
    #[serde(with = "crate::rational::serde_q::vec")]
    pub hi: Vec<Rational>,
}

/// Union of fractional boxes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FractionalShape {
    pub boxes: Vec<FractionalBox>,
}

impl FractionalShape {
    /// The whole domain.
    pub fn full(dims: usize) -> Self {
        FractionalShape {
            boxes: vec![FractionalBox {
                lo: vec![Rational::zero(); dims],
                hi: vec![Rational::one(); dims],
            }],
        }
    }

    /// `[lo, hi)` along the single axis of a 1D domain.
    pub fn interval(lo: Rational, hi: Rational) -> Self {
        FractionalShape {
            boxes: vec![FractionalBox {
                lo: vec![lo],
                hi: vec![hi],
            }],
        }
    }

    /// Rasterizes the shape; every corner must land exactly on a cell boundary.
    pub fn rasterize(&self, geom: &Arc<GridGeometry>) -> Result<CellSet> {
        let mut out = CellSet::empty(geom);
        for b in &self.boxes {
            let corner = |v: &[Rational]| -> Result<Vec<usize>> {
                if v.len() != geom.dimension() {
                    return Err(Error::invalid(
                        "shape",
                        "corner arity must match the dimension",
                    ));
                }
                v.iter()
                    .zip(geom.extent())
                    .map(|(f, &n)| {
                        let x = f * Rational::from_integer(BigInt::from(n));
                        if !x.is_integer()
                            || x < Rational::zero()
                            || x > Rational::from_integer(BigInt::from(n))
                        {
                            return Err(Error::invalid(
                                "shape",
                                format!(
                                    "fraction {f} does not fall on a cell boundary of extent {n}"
                                ),
                            ));
                        }
                        Ok(usize::try_from(x.to_integer()).expect("bounded by extent"))
                    })
                    .collect()
            };
            let lo = corner(&b.lo)?;
            let hi = corner(&b.hi)?;
            out.union_in_place(&CellSet::from_box(geom, &lo, &hi)?);
        }
        Ok(out)
    }
}
