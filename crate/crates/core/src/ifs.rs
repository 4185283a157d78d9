//! Affine similarity maps, iterated function systems and the similarity
//! dimension.
//!
//! A [`SimilarityMap`] is a strict contraction `x ↦ A·x + t` whose linear
//! part is a scaled orthogonal matrix; an [`IteratedFunctionSystem`] is an
//! ordered family of them sharing one ambient dimension. Words over the map
//! indices ([`Address`]) compose to deeper contractions, and
//! [`moran_dimension`] solves `Σ c_j^s = 1` for the similarity dimension.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Tolerance for the similarity check `AᵀA = ratio²·I` at construction.
const SIMILARITY_TOL: f64 = 1e-12;

/// Geometric tolerance for exact box arithmetic in overlap classification.
const GEOM_TOL: f64 = 1e-9;

/// One affine contraction `x ↦ A·x + t` with `A = ratio · Q`, `Q` orthogonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMap {
    linear: DMatrix<f64>,
    translation: DVector<f64>,
    ratio: f64,
}

impl SimilarityMap {
    /// Builds a similarity, rejecting non-contractions and linear parts that
    /// are not `ratio` times an orthogonal matrix.
    pub fn new(linear: DMatrix<f64>, translation: DVector<f64>, ratio: f64) -> Result<Self> {
        let d = translation.len();
        if d == 0 {
            return Err(Error::InvalidArgument("ambient dimension must be positive".into()));
        }
        if linear.nrows() != d || linear.ncols() != d {
            return Err(Error::InvalidArgument(format!(
                "linear part must be {d}x{d}, got {}x{}",
                linear.nrows(),
                linear.ncols()
            )));
        }
        if !(ratio > 0.0 && ratio < 1.0) || !ratio.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "contraction ratio must lie strictly in (0, 1), got {ratio}"
            )));
        }
        // AᵀA = ratio²·I characterizes scaled orthogonal matrices.
        let gram = linear.transpose() * &linear;
        for i in 0..d {
            for j in 0..d {
                let want = if i == j { ratio * ratio } else { 0.0 };
                if (gram[(i, j)] - want).abs() > SIMILARITY_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "linear part is not a similarity of ratio {ratio}: (AᵀA)[{i},{j}] = {}",
                        gram[(i, j)]
                    )));
                }
            }
        }
        Ok(Self { linear, translation, ratio })
    }

    /// Convenience constructor for `x ↦ ratio·x + t`.
    pub fn homothety(ratio: f64, translation: &[f64]) -> Result<Self> {
        let d = translation.len();
        Self::new(
            DMatrix::identity(d, d) * ratio,
            DVector::from_column_slice(translation),
            ratio,
        )
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn linear(&self) -> &DMatrix<f64> {
        &self.linear
    }

    pub fn translation(&self) -> &DVector<f64> {
        &self.translation
    }

    /// Applies the map: `A·x + t`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let y = &self.linear * DVector::from_column_slice(x) + &self.translation;
        Ok(y.as_slice().to_vec())
    }

    /// Inverts the map. `A⁻¹ = Aᵀ / ratio²` because `A` is a scaled
    /// orthogonal matrix, so no linear solve is needed.
    pub fn invert(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: y.len() });
        }
        let shifted = DVector::from_column_slice(y) - &self.translation;
        let x = self.linear.transpose() * shifted / (self.ratio * self.ratio);
        Ok(x.as_slice().to_vec())
    }

    /// Composition `self ∘ other`.
    fn compose_with(&self, other: &SimilarityMap) -> SimilarityMap {
        SimilarityMap {
            linear: &self.linear * &other.linear,
            translation: &self.linear * &other.translation + &self.translation,
            ratio: self.ratio * other.ratio,
        }
    }

    /// Axis-aligned image of the unit hypercube, when the linear part is a
    /// signed permutation times `ratio`. Returns `(lo, hi)` corners.
    fn box_image(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let d = self.dim();
        for r in 0..d {
            let mut hits = 0usize;
            for c in 0..d {
                let a = self.linear[(r, c)].abs();
                if a > GEOM_TOL {
                    if (a - self.ratio).abs() > GEOM_TOL {
                        return None;
                    }
                    hits += 1;
                }
            }
            if hits != 1 {
                return None;
            }
        }
        let zero = vec![0.0; d];
        let one = vec![1.0; d];
        let y0 = self.apply(&zero).expect("dimension checked");
        let y1 = self.apply(&one).expect("dimension checked");
        let lo: Vec<f64> = y0.iter().zip(&y1).map(|(a, b)| a.min(*b)).collect();
        let hi: Vec<f64> = y0.iter().zip(&y1).map(|(a, b)| a.max(*b)).collect();
        Some((lo, hi))
    }
}

/// How the copies of an IFS meet each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverlapClass {
    Disconnected,
    JustTouching,
    Overlapping,
}

impl fmt::Display for OverlapClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OverlapClass::Disconnected => write!(f, "disconnected"),
            OverlapClass::JustTouching => write!(f, "just-touching"),
            OverlapClass::Overlapping => write!(f, "overlapping"),
        }
    }
}

/// Overlap verdict together with the rasterization depth it was probed at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverlapVerdict {
    pub class: OverlapClass,
    pub probe_depth: u32,
}

/// An ordered family of similarities sharing one ambient dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct IteratedFunctionSystem {
    maps: Vec<SimilarityMap>,
    dim: usize,
    overlap: Option<OverlapVerdict>,
}

impl IteratedFunctionSystem {
    pub fn new(maps: Vec<SimilarityMap>) -> Result<Self> {
        if maps.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "an ifs needs at least 2 maps, got {}",
                maps.len()
            )));
        }
        let dim = maps[0].dim();
        for (i, m) in maps.iter().enumerate() {
            if m.dim() != dim {
                return Err(Error::InvalidArgument(format!(
                    "map {} has dimension {}, expected {dim}",
                    i + 1,
                    m.dim()
                )));
            }
        }
        Ok(Self { maps, dim, overlap: None })
    }

    pub fn maps(&self) -> &[SimilarityMap] {
        &self.maps
    }

    /// Number of maps, `p`.
    pub fn map_count(&self) -> usize {
        self.maps.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.maps.iter().map(|m| m.ratio()).collect()
    }

    /// Map for 1-based branch index `j`.
    pub fn map(&self, branch: usize) -> Result<&SimilarityMap> {
        if branch == 0 || branch > self.maps.len() {
            return Err(Error::InvalidArgument(format!(
                "branch {branch} out of range 1..={}",
                self.maps.len()
            )));
        }
        Ok(&self.maps[branch - 1])
    }

    pub fn overlap(&self) -> Option<OverlapVerdict> {
        self.overlap
    }

    /// Probes how the copies of the reference hypercube meet.
    ///
    /// Axis-aligned systems are decided by exact box arithmetic, for which
    /// the verdict does not depend on `depth`. Rotated systems fall back to a
    /// sampled probe at `depth` points per axis; ambiguity between touching
    /// and slight overlap is resolved conservatively towards `Overlapping`.
    pub fn classify_overlap(&self, depth: u32) -> OverlapClass {
        let depth = depth.max(1);
        let boxes: Option<Vec<_>> = self.maps.iter().map(|m| m.box_image()).collect();
        let mut verdict = OverlapClass::Disconnected;
        for i in 0..self.maps.len() {
            for j in (i + 1)..self.maps.len() {
                let pair = match &boxes {
                    Some(bs) => pair_relation_exact(&bs[i], &bs[j]),
                    None => pair_relation_sampled(&self.maps[i], &self.maps[j], depth),
                };
                match pair {
                    OverlapClass::Overlapping => return OverlapClass::Overlapping,
                    OverlapClass::JustTouching => verdict = OverlapClass::JustTouching,
                    OverlapClass::Disconnected => {}
                }
            }
        }
        verdict
    }

    /// Runs [`classify_overlap`](Self::classify_overlap) and records the
    /// verdict together with the probe depth.
    pub fn classify_and_record(&mut self, depth: u32) -> OverlapClass {
        let class = self.classify_overlap(depth);
        self.overlap = Some(OverlapVerdict { class, probe_depth: depth });
        class
    }

    /// Composes the maps named by `address`, leftmost letter applied last:
    /// the word `(a₁, …, a_N)` yields `w_{a₁} ∘ … ∘ w_{a_N}`.
    pub fn compose(&self, address: &Address) -> Result<ComposedMap> {
        let mut acc: Option<SimilarityMap> = None;
        for &letter in address.letters() {
            let m = self.map(letter)?;
            acc = Some(match acc {
                None => m.clone(),
                Some(prev) => prev.compose_with(m),
            });
        }
        Ok(match acc {
            None => ComposedMap::Initiator,
            Some(m) => ComposedMap::Contraction(m),
        })
    }
}

/// Relation between two axis-aligned boxes.
fn pair_relation_exact(a: &(Vec<f64>, Vec<f64>), b: &(Vec<f64>, Vec<f64>)) -> OverlapClass {
    let d = a.0.len();
    let mut touching_axis = false;
    for k in 0..d {
        let over = a.1[k].min(b.1[k]) - a.0[k].max(b.0[k]);
        if over < -GEOM_TOL {
            return OverlapClass::Disconnected;
        }
        if over.abs() <= GEOM_TOL {
            touching_axis = true;
        }
    }
    if touching_axis {
        OverlapClass::JustTouching
    } else {
        OverlapClass::Overlapping
    }
}

/// Signed distance of `p` to the unit hypercube: negative inside, positive
/// outside, zero on the boundary.
fn signed_distance_unit_cube(p: &[f64]) -> f64 {
    let mut outside_sq = 0.0;
    let mut inside = f64::INFINITY;
    for &x in p {
        let below = -x;
        let above = x - 1.0;
        let out = below.max(above);
        if out > 0.0 {
            outside_sq += out * out;
        } else {
            inside = inside.min(-out);
        }
    }
    if outside_sq > 0.0 {
        outside_sq.sqrt()
    } else {
        -inside
    }
}

/// Sampled relation for rotated copies: points of copy `a` are tested
/// against the exact pulled-back distance to copy `b`.
fn pair_relation_sampled(a: &SimilarityMap, b: &SimilarityMap, depth: u32) -> OverlapClass {
    let d = a.dim();
    let n = depth as usize + 1;
    // Half-diagonal of one sample cell of copy `a`, the Lipschitz slack.
    let inflation = a.ratio() * (d as f64).sqrt() / (2.0 * depth as f64);
    let mut min_sd = f64::INFINITY;
    let mut max_pen = f64::NEG_INFINITY;
    let mut idx = vec![0usize; d];
    loop {
        let u: Vec<f64> = idx.iter().map(|&i| i as f64 / depth as f64).collect();
        let x = a.apply(&u).expect("dimension checked");
        let back = b.invert(&x).expect("dimension checked");
        let sd = b.ratio() * signed_distance_unit_cube(&back);
        min_sd = min_sd.min(sd);
        max_pen = max_pen.max(-sd);
        // odometer over the sample lattice
        let mut k = 0;
        loop {
            if k == d {
                break;
            }
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == d {
            break;
        }
    }
    if max_pen > GEOM_TOL {
        OverlapClass::Overlapping
    } else if min_sd > inflation {
        OverlapClass::Disconnected
    } else {
        OverlapClass::JustTouching
    }
}

/// A word over the 1-based map indices; the empty word denotes the
/// initiator.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Address(Vec<usize>);

impl Address {
    pub fn new(word: Vec<usize>) -> Self {
        Self(word)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_initiator(&self) -> bool {
        self.0.is_empty()
    }
}

/// Result of composing a word of maps. The empty word is not a valid
/// contraction (its ratio is 1), so it gets a marker of its own.
#[derive(Debug, Clone, PartialEq)]
pub enum ComposedMap {
    Initiator,
    Contraction(SimilarityMap),
}

impl ComposedMap {
    pub fn ratio(&self) -> f64 {
        match self {
            ComposedMap::Initiator => 1.0,
            ComposedMap::Contraction(m) => m.ratio(),
        }
    }

    pub fn is_initiator(&self) -> bool {
        matches!(self, ComposedMap::Initiator)
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            ComposedMap::Initiator => Ok(x.to_vec()),
            ComposedMap::Contraction(m) => m.apply(x),
        }
    }

    pub fn as_contraction(&self) -> Option<&SimilarityMap> {
        match self {
            ComposedMap::Initiator => None,
            ComposedMap::Contraction(m) => Some(m),
        }
    }
}

/// Solves `Σ_j c_j^s = 1` for the unique root `s ≥ 0`.
///
/// The left side is strictly decreasing in `s`, so a bracketed bisection
/// cannot miss; one Newton step at the end polishes the root beyond the
/// bisection width. The result satisfies `|Σ c_j^s − 1| < 1e-12`.
pub fn moran_dimension(ratios: &[f64]) -> Result<f64> {
    if ratios.is_empty() {
        return Err(Error::InvalidArgument("at least one contraction ratio is required".into()));
    }
    for &c in ratios {
        if !(c > 0.0 && c < 1.0) || !c.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "contraction ratios must lie in (0, 1), got {c}"
            )));
        }
    }
    let f = |s: f64| ratios.iter().map(|c| c.powf(s)).sum::<f64>() - 1.0;
    if ratios.len() == 1 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::InvalidArgument(
                "moran equation root escaped the bracket; ratios too close to 1".into(),
            ));
        }
    }
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut s = 0.5 * (lo + hi);
    let derivative: f64 = ratios.iter().map(|c| c.powf(s) * c.ln()).sum();
    if derivative.abs() > 0.0 {
        s -= f(s) / derivative;
    }
    Ok(s)
}

/// Parses the plain-text IFS definition format.
///
/// ```text
/// dim 1
/// map
/// matrix 0.3333333333333333
/// translation 0.0
/// ratio 0.3333333333333333
/// map
/// ...
/// ```
///
/// `matrix` takes `dim²` row-major entries, `translation` takes `dim`
/// entries. Blank lines and `#` comments are ignored. Errors carry the
/// offending line number.
pub fn parse_ifs(text: &str) -> Result<IteratedFunctionSystem> {
    struct PartialMap {
        start_line: usize,
        matrix: Option<Vec<f64>>,
        translation: Option<Vec<f64>>,
        ratio: Option<f64>,
    }

    fn parse_floats(line: usize, items: &[&str]) -> Result<Vec<f64>> {
        items
            .iter()
            .map(|t| {
                t.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("expected a real number, found `{t}`"),
                })
            })
            .collect()
    }

    fn finish(dim: usize, pm: PartialMap) -> Result<SimilarityMap> {
        let line = pm.start_line;
        let matrix = pm.matrix.ok_or(Error::Parse {
            line,
            message: "map block is missing a `matrix` line".into(),
        })?;
        let translation = pm.translation.ok_or(Error::Parse {
            line,
            message: "map block is missing a `translation` line".into(),
        })?;
        let ratio = pm.ratio.ok_or(Error::Parse {
            line,
            message: "map block is missing a `ratio` line".into(),
        })?;
        SimilarityMap::new(
            DMatrix::from_row_slice(dim, dim, &matrix),
            DVector::from_column_slice(&translation),
            ratio,
        )
        .map_err(|e| Error::Parse { line, message: format!("invalid map: {e}") })
    }

    let mut dim: Option<usize> = None;
    let mut current: Option<PartialMap> = None;
    let mut maps = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let key = tokens.next().expect("nonempty line has a first token");
        let rest: Vec<&str> = tokens.collect();
        match key {
            "dim" => {
                if dim.is_some() {
                    return Err(Error::Parse { line, message: "duplicate `dim` line".into() });
                }
                if rest.len() != 1 {
                    return Err(Error::Parse {
                        line,
                        message: format!("`dim` expects one integer, found {} tokens", rest.len()),
                    });
                }
                let d: usize = rest[0].parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("`dim` expects a positive integer, found `{}`", rest[0]),
                })?;
                if d == 0 {
                    return Err(Error::Parse { line, message: "`dim` must be positive".into() });
                }
                dim = Some(d);
            }
            "map" => {
                let d = dim.ok_or(Error::Parse {
                    line,
                    message: "`dim` must appear before the first `map`".into(),
                })?;
                if let Some(pm) = current.take() {
                    maps.push(finish(d, pm)?);
                }
                current = Some(PartialMap {
                    start_line: line,
                    matrix: None,
                    translation: None,
                    ratio: None,
                });
            }
            "matrix" | "translation" | "ratio" => {
                let d = dim.ok_or(Error::Parse {
                    line,
                    message: "`dim` must appear before map fields".into(),
                })?;
                let pm = current.as_mut().ok_or(Error::Parse {
                    line,
                    message: format!("`{key}` must appear inside a `map` block"),
                })?;
                let values = parse_floats(line, &rest)?;
                match key {
                    "matrix" => {
                        if values.len() != d * d {
                            return Err(Error::Parse {
                                line,
                                message: format!(
                                    "`matrix` expects {} row-major entries for dim {d}, found {}",
                                    d * d,
                                    values.len()
                                ),
                            });
                        }
                        pm.matrix = Some(values);
                    }
                    "translation" => {
                        if values.len() != d {
                            return Err(Error::Parse {
                                line,
                                message: format!(
                                    "`translation` expects {d} entries, found {}",
                                    values.len()
                                ),
                            });
                        }
                        pm.translation = Some(values);
                    }
                    _ => {
                        if values.len() != 1 {
                            return Err(Error::Parse {
                                line,
                                message: format!(
                                    "`ratio` expects one real, found {}",
                                    values.len()
                                ),
                            });
                        }
                        pm.ratio = Some(values[0]);
                    }
                }
            }
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!(
                        "unknown key `{other}` (expected dim, map, matrix, translation, ratio)"
                    ),
                });
            }
        }
    }

    let d = dim.ok_or(Error::Parse { line: 1, message: "missing `dim` line".into() })?;
    if let Some(pm) = current.take() {
        maps.push(finish(d, pm)?);
    }
    IteratedFunctionSystem::new(maps)
}

/// Reads and parses an IFS definition file.
pub fn load_ifs(path: &Path) -> Result<IteratedFunctionSystem> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::InvalidArgument(format!("cannot read ifs file {}: {e}", path.display()))
    })?;
    parse_ifs(&text)
}
