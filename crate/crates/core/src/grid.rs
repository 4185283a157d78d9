//! Prefractal rasterization: integer cell lattices, Dirichlet node grids and
//! coarse-grained box counting.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::ifs::{Address, IteratedFunctionSystem};
use crate::{Error, Result};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Alignment tolerance when snapping mapped cell corners to the lattice.
const SNAP_TOL: f64 = 1e-6;

/// A level-`N` prefractal stored as the set of occupied cells of the
/// `base^N` lattice over the unit hypercube. Cells are lexicographically
/// sorted integer coordinate tuples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellSet {
    level: u32,
    base: u32,
    dim: usize,
    cells: Vec<Vec<u64>>,
}

impl CellSet {
    /// Builds a cell set from raw coordinates, validating range and
    /// rejecting duplicates.
    pub fn new(level: u32, base: u32, dim: usize, mut cells: Vec<Vec<u64>>) -> Result<Self> {
        if base < 1 {
            return Err(Error::InvalidArgument("base must be >= 1".into()));
        }
        let side = checked_side(base, level)?;
        for c in &cells {
            if c.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: c.len() });
            }
            if c.iter().any(|&x| x >= side) {
                return Err(Error::InvalidArgument(format!(
                    "cell {c:?} out of range [0, {side})"
                )));
            }
        }
        cells.sort();
        let before = cells.len();
        cells.dedup();
        if cells.len() != before {
            return Err(Error::InvalidArgument("duplicate cells".into()));
        }
        Ok(Self { level, base, dim, cells })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> &[Vec<u64>] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Cells per side of the lattice, `base^level`.
    pub fn cells_per_side(&self) -> u64 {
        checked_side(self.base, self.level).expect("validated at construction")
    }

    /// True when the closed cell `coords` belongs to the set.
    pub fn contains_cell(&self, coords: &[u64]) -> bool {
        self.cells.binary_search_by(|c| c.as_slice().cmp(coords)).is_ok()
    }

    /// Plain-text export: `#`-prefixed header carrying `level base dim`,
    /// then one line of space-separated integer coordinates per cell.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# level {} base {} dim {}\n", self.level, self.base, self.dim));
        for c in &self.cells {
            let line: Vec<String> = c.iter().map(|x| x.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

fn checked_side(base: u32, level: u32) -> Result<u64> {
    let mut side: u64 = 1;
    for _ in 0..level {
        side = side.checked_mul(base as u64).ok_or_else(|| {
            Error::InvalidArgument(format!("lattice side {base}^{level} overflows"))
        })?;
    }
    if side > (1u64 << 40) {
        return Err(Error::InvalidArgument(format!(
            "lattice side {base}^{level} is too fine to rasterize"
        )));
    }
    Ok(side)
}

/// Exact rasterization of the level-`level` prefractal of a grid-aligned
/// system: every map must send lattice cells of side `1/base` onto lattice
/// cells. The result holds the images of the unit cell under all length-
/// `level` words.
pub fn rasterize_prefractal(
    ifs: &IteratedFunctionSystem,
    level: u32,
    base: u32,
) -> Result<CellSet> {
    if base < 2 {
        return Err(Error::InvalidArgument("base must be >= 2".into()));
    }
    let d = ifs.dim();
    // Alignment precheck: ratio 1/base, axis-aligned, lattice translations.
    for (i, m) in ifs.maps().iter().enumerate() {
        let misaligned = |why: &str| {
            Error::UnsupportedIfs(format!(
                "map {} is not aligned to the 1/{base} lattice ({why}); \
                 rasterization needs a grid-aligned system — construct the \
                 grid domain directly instead",
                i + 1
            ))
        };
        if (m.ratio() * base as f64 - 1.0).abs() > SNAP_TOL {
            return Err(misaligned("ratio is not 1/base"));
        }
        let Some((lo, hi)) = box_image_of(m) else {
            return Err(misaligned("linear part is not axis-aligned"));
        };
        for k in 0..d {
            let lo_scaled = lo[k] * base as f64;
            let hi_scaled = hi[k] * base as f64;
            if (lo_scaled - lo_scaled.round()).abs() > SNAP_TOL
                || (hi_scaled - hi_scaled.round()).abs() > SNAP_TOL
            {
                return Err(misaligned("image corners miss the lattice"));
            }
            if lo_scaled.round() < 0.0 || hi_scaled.round() > base as f64 {
                return Err(misaligned("image leaves the unit hypercube"));
            }
        }
    }
    checked_side(base, level)?;

    let mut cells: Vec<Vec<u64>> = vec![vec![0; d]];
    for k in 1..=level {
        let scale_prev = (checked_side(base, k - 1)?) as f64;
        let scale = (checked_side(base, k)?) as f64;
        let step = |cell: &Vec<u64>| -> Result<Vec<Vec<u64>>> {
            let mut images = Vec::with_capacity(ifs.map_count());
            let lo_prev: Vec<f64> = cell.iter().map(|&v| v as f64 / scale_prev).collect();
            let hi_prev: Vec<f64> = cell.iter().map(|&v| (v + 1) as f64 / scale_prev).collect();
            for m in ifs.maps() {
                let y0 = m.apply(&lo_prev)?;
                let y1 = m.apply(&hi_prev)?;
                let mut coord = Vec::with_capacity(d);
                for a in 0..d {
                    let lo = y0[a].min(y1[a]) * scale;
                    let snapped = lo.round();
                    if (lo - snapped).abs() > SNAP_TOL || snapped < 0.0 || snapped >= scale {
                        return Err(Error::UnsupportedIfs(format!(
                            "cell image misses the level-{k} lattice at axis {a}"
                        )));
                    }
                    coord.push(snapped as u64);
                }
                images.push(coord);
            }
            Ok(images)
        };

        #[cfg(feature = "parallel")]
        let stepped: Result<Vec<Vec<Vec<u64>>>> = cells.par_iter().map(step).collect();
        #[cfg(not(feature = "parallel"))]
        let stepped: Result<Vec<Vec<Vec<u64>>>> = cells.iter().map(step).collect();

        let mut next: Vec<Vec<u64>> = stepped?.into_iter().flatten().collect();
        next.sort();
        next.dedup();
        cells = next;
    }
    CellSet::new(level, base, d, cells)
}

/// Sequential twin of [`rasterize_prefractal`], kept for benchmarking the
/// parallel step against a plain loop.
pub fn rasterize_prefractal_seq(
    ifs: &IteratedFunctionSystem,
    level: u32,
    base: u32,
) -> Result<CellSet> {
    let d = ifs.dim();
    let reference = rasterize_prefractal(ifs, 0, base)?; // runs the precheck
    debug_assert_eq!(reference.len(), 1);
    let mut cells: Vec<Vec<u64>> = vec![vec![0; d]];
    for k in 1..=level {
        let scale_prev = (checked_side(base, k - 1)?) as f64;
        let scale = (checked_side(base, k)?) as f64;
        let mut next = Vec::with_capacity(cells.len() * ifs.map_count());
        for cell in &cells {
            let lo_prev: Vec<f64> = cell.iter().map(|&v| v as f64 / scale_prev).collect();
            let hi_prev: Vec<f64> = cell.iter().map(|&v| (v + 1) as f64 / scale_prev).collect();
            for m in ifs.maps() {
                let y0 = m.apply(&lo_prev)?;
                let y1 = m.apply(&hi_prev)?;
                let mut coord = Vec::with_capacity(d);
                for a in 0..d {
                    let lo = y0[a].min(y1[a]) * scale;
                    let snapped = lo.round();
                    if (lo - snapped).abs() > SNAP_TOL || snapped < 0.0 || snapped >= scale {
                        return Err(Error::UnsupportedIfs(format!(
                            "cell image misses the level-{k} lattice at axis {a}"
                        )));
                    }
                    coord.push(snapped as u64);
                }
                next.push(coord);
            }
        }
        next.sort();
        next.dedup();
        cells = next;
    }
    CellSet::new(level, base, d, cells)
}

fn box_image_of(m: &crate::ifs::SimilarityMap) -> Option<(Vec<f64>, Vec<f64>)> {
    let d = m.dim();
    for r in 0..d {
        let mut hits = 0usize;
        for c in 0..d {
            let a = m.linear()[(r, c)].abs();
            if a > 1e-12 {
                if (a - m.ratio()).abs() > 1e-9 {
                    return None;
                }
                hits += 1;
            }
        }
        if hits != 1 {
            return None;
        }
    }
    let y0 = m.apply(&vec![0.0; d]).ok()?;
    let y1 = m.apply(&vec![1.0; d]).ok()?;
    let lo: Vec<f64> = y0.iter().zip(&y1).map(|(a, b)| a.min(*b)).collect();
    let hi: Vec<f64> = y0.iter().zip(&y1).map(|(a, b)| a.max(*b)).collect();
    Some((lo, hi))
}

/// Approximate rasterization for systems that are not lattice-aligned: a
/// level-`level` cell is kept when its center lies within half a cell
/// diagonal of some length-`level` word image of the unit cube. The
/// inflation makes the cover conservative (no occupied cell is missed).
pub fn rasterize_approximate(
    ifs: &IteratedFunctionSystem,
    level: u32,
    base: u32,
) -> Result<CellSet> {
    if base < 2 {
        return Err(Error::InvalidArgument("base must be >= 2".into()));
    }
    let d = ifs.dim();
    let side = checked_side(base, level)?;
    if (side as f64).powi(d as i32) > 2e7 {
        return Err(Error::InvalidArgument(
            "approximate rasterization lattice is too large".into(),
        ));
    }
    // All length-`level` word maps.
    let mut words = vec![Address::empty()];
    for _ in 0..level {
        let mut next = Vec::with_capacity(words.len() * ifs.map_count());
        for w in &words {
            for j in 1..=ifs.map_count() {
                let mut letters = vec![j];
                letters.extend_from_slice(w.letters());
                next.push(Address::new(letters));
            }
        }
        words = next;
    }
    let composed: Result<Vec<_>> = words.iter().map(|w| ifs.compose(w)).collect();
    let composed = composed?;
    let inflation = (d as f64).sqrt() / (2.0 * side as f64);

    let mut cells = Vec::new();
    let mut idx = vec![0u64; d];
    loop {
        let center: Vec<f64> =
            idx.iter().map(|&i| (i as f64 + 0.5) / side as f64).collect();
        let near = composed.iter().any(|cm| match cm.as_contraction() {
            Some(m) => {
                let back = m.invert(&center).expect("dimension checked");
                m.ratio() * signed_unit_distance(&back) <= inflation
            }
            None => signed_unit_distance(&center) <= inflation,
        });
        if near {
            cells.push(idx.clone());
        }
        let mut k = 0;
        loop {
            if k == d {
                break;
            }
            idx[k] += 1;
            if idx[k] < side {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == d {
            break;
        }
    }
    CellSet::new(level, base, d, cells)
}

fn signed_unit_distance(p: &[f64]) -> f64 {
    let mut outside_sq = 0.0;
    let mut inside = f64::INFINITY;
    for &x in p {
        let out = (-x).max(x - 1.0);
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

/// Uniform Dirichlet grid over a cell set: nodes strictly inside the union
/// of cells, boundary nodes eliminated.
#[derive(Debug, Clone)]
pub struct GridDomain {
    spacing: f64,
    dim: usize,
    level: u32,
    nodes: Vec<Vec<u64>>,
    index: HashMap<Vec<u64>, usize>,
    cell_side: u64,
    refinement: u32,
    cells: HashSet<Vec<u64>>,
}

impl GridDomain {
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Interior nodes as integer lattice coordinates, sorted.
    pub fn nodes(&self) -> &[Vec<u64>] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_index(&self, coords: &[u64]) -> Option<usize> {
        self.index.get(coords).copied()
    }

    /// Physical position of interior node `i`.
    pub fn point(&self, i: usize) -> Vec<f64> {
        self.nodes[i].iter().map(|&g| g as f64 * self.spacing).collect()
    }

    /// Index of the interior node sitting at physical point `p`, if `p`
    /// coincides with a lattice node.
    pub fn lookup_point(&self, p: &[f64]) -> Option<usize> {
        if p.len() != self.dim {
            return None;
        }
        let mut coords = Vec::with_capacity(self.dim);
        for &x in p {
            let g = x / self.spacing;
            let snapped = g.round();
            if (g - snapped).abs() > 1e-6 || snapped < 0.0 {
                return None;
            }
            coords.push(snapped as u64);
        }
        self.node_index(&coords)
    }

    /// True when `p` lies in the closed union of cells, within `tol`.
    pub fn contains_closed(&self, p: &[f64], tol: f64) -> bool {
        if p.len() != self.dim {
            return false;
        }
        if p.iter().any(|&x| x < -tol || x > 1.0 + tol) {
            return false;
        }
        let side = self.cell_side as f64;
        // A point near a cell face belongs to the closure of every adjacent
        // cell, so probe the lattice cells around p.
        let mut lo = Vec::with_capacity(self.dim);
        let mut hi = Vec::with_capacity(self.dim);
        for &x in p {
            let scaled = x * side;
            let a = (scaled - tol * side).floor() as i64;
            let b = (scaled + tol * side).floor() as i64;
            lo.push(a.clamp(0, self.cell_side as i64 - 1));
            hi.push(b.clamp(0, self.cell_side as i64 - 1));
        }
        let mut probe = lo.clone();
        loop {
            let cell: Vec<u64> = probe.iter().map(|&v| v as u64).collect();
            if self.cells.contains(&cell) {
                return true;
            }
            let mut k = 0;
            loop {
                if k == self.dim {
                    break;
                }
                probe[k] += 1;
                if probe[k] <= hi[k] {
                    break;
                }
                probe[k] = lo[k];
                k += 1;
            }
            if k == self.dim {
                return false;
            }
        }
    }
}

/// Refines a cell set into a Dirichlet grid with `refinement` subintervals
/// per cell side, spacing `base^-level / refinement`.
///
/// A node is interior exactly when all `2^dim` fine subcells around it are
/// covered by the cell set; nodes on the boundary of the union drop out,
/// while nodes on internal just-touching interfaces survive.
pub fn refine_to_grid(cs: &CellSet, refinement: u32) -> Result<GridDomain> {
    if refinement < 2 {
        return Err(Error::InvalidArgument(format!(
            "refinement must be >= 2, got {refinement}"
        )));
    }
    let d = cs.dim();
    let cell_side = cs.cells_per_side();
    let fine_side = cell_side
        .checked_mul(refinement as u64)
        .ok_or_else(|| Error::InvalidArgument("fine lattice overflows".into()))?;
    let spacing = 1.0 / fine_side as f64;
    let cell_set: HashSet<Vec<u64>> = cs.cells().iter().cloned().collect();

    let covered = |fine: &[i64]| -> bool {
        if fine.iter().any(|&q| q < 0 || q as u64 >= fine_side) {
            return false;
        }
        let coarse: Vec<u64> = fine.iter().map(|&q| q as u64 / refinement as u64).collect();
        cell_set.contains(&coarse)
    };

    let node_is_interior = |node: &[u64]| -> bool {
        // all 2^d fine subcells touching the node must be covered
        for mask in 0..(1u32 << d) {
            let fine: Vec<i64> = (0..d)
                .map(|a| node[a] as i64 - ((mask >> a) & 1) as i64)
                .collect();
            if !covered(&fine) {
                return false;
            }
        }
        true
    };

    // Candidate nodes: lattice nodes of each cell's closed refinement patch.
    let scan_cell = |cell: &Vec<u64>| -> Vec<Vec<u64>> {
        let mut found = Vec::new();
        let r = refinement as u64;
        let mut offset = vec![0u64; d];
        loop {
            let node: Vec<u64> = (0..d).map(|a| cell[a] * r + offset[a]).collect();
            if node_is_interior(&node) {
                found.push(node);
            }
            let mut k = 0;
            loop {
                if k == d {
                    break;
                }
                offset[k] += 1;
                if offset[k] <= r {
                    break;
                }
                offset[k] = 0;
                k += 1;
            }
            if k == d {
                break;
            }
        }
        found
    };

    #[cfg(feature = "parallel")]
    let scans: Vec<Vec<Vec<u64>>> = cs.cells().par_iter().map(scan_cell).collect();
    #[cfg(not(feature = "parallel"))]
    let scans: Vec<Vec<Vec<u64>>> = cs.cells().iter().map(scan_cell).collect();

    let mut uniq = BTreeSet::new();
    for group in scans {
        for node in group {
            uniq.insert(node);
        }
    }
    let nodes: Vec<Vec<u64>> = uniq.into_iter().collect();
    if nodes.is_empty() {
        return Err(Error::InvalidArgument(
            "refinement produced an empty interior".into(),
        ));
    }
    let index: HashMap<Vec<u64>, usize> =
        nodes.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
    Ok(GridDomain {
        spacing,
        dim: d,
        level: cs.level(),
        nodes,
        index,
        cell_side,
        refinement,
        cells: cell_set,
    })
}

impl GridDomain {
    pub fn refinement(&self) -> u32 {
        self.refinement
    }
}

/// Box counts over the native `base`-adic scales: for each `k` the number of
/// level-`k` boxes containing at least one cell of `cs`. Returns
/// `(delta, count)` pairs with `delta = base^-k`.
pub fn box_counts(cs: &CellSet, ks: &[u32]) -> Result<Vec<(f64, u64)>> {
    for &k in ks {
        if k > cs.level() {
            return Err(Error::InvalidArgument(format!(
                "scale base^-{k} is finer than the level-{} cell grid",
                cs.level()
            )));
        }
    }
    let count_at = |&k: &u32| -> (f64, u64) {
        let shrink = checked_side(cs.base(), cs.level() - k).expect("validated");
        let mut boxes = BTreeSet::new();
        for cell in cs.cells() {
            let coarse: Vec<u64> = cell.iter().map(|&v| v / shrink).collect();
            boxes.insert(coarse);
        }
        let delta = (cs.base() as f64).powi(-(k as i32));
        (delta, boxes.len() as u64)
    };

    #[cfg(feature = "parallel")]
    let counts: Vec<(f64, u64)> = ks.par_iter().map(count_at).collect();
    #[cfg(not(feature = "parallel"))]
    let counts: Vec<(f64, u64)> = ks.iter().map(count_at).collect();

    Ok(counts)
}

/// Box-count report rows: `delta,count,log_count` with natural logs.
pub fn box_counts_csv(counts: &[(f64, u64)]) -> String {
    let mut out = String::from("delta,count,log_count\n");
    for &(delta, count) in counts {
        out.push_str(&format!("{delta:.12e},{count},{:.12e}\n", (count as f64).ln()));
    }
    out
}

/// Least-squares slope of `log(count)` against `-log(delta)`.
pub fn box_dimension_fit(counts: &[(f64, u64)]) -> Result<f64> {
    if counts.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "box dimension fit needs at least 2 scales, got {}",
            counts.len()
        )));
    }
    for &(delta, count) in counts {
        if !delta.is_finite() || delta <= 0.0 || count == 0 {
            return Err(Error::InvalidArgument(
                "box counts must be positive at positive scales".into(),
            ));
        }
    }
    let xs: Vec<f64> = counts.iter().map(|&(d, _)| -d.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&(_, c)| (c as f64).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        cov += (x - mx) * (y - my);
        var += (x - mx) * (x - mx);
    }
    if var == 0.0 {
        return Err(Error::InvalidArgument("all scales are identical".into()));
    }
    Ok(cov / var)
}
