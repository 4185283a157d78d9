//! Discrete Dirichlet Laplacians and their spectra.
//!
//! The Laplacian is assembled with the standard second-order stencil on the
//! interior nodes of a [`GridDomain`]; eliminated boundary neighbors
//! implement the zero boundary condition. Raw eigenvalues are real and
//! non-positive. All downstream analysis runs over spectral magnitudes
//! `κ = sqrt(-λ)`, the wavenumber convention, under which one prefractal
//! iteration scales the self-similar part of the spectrum by the inverse
//! contraction ratio.

mod lanczos;

pub use lanczos::{partial_spectrum, partial_spectrum_with, LanczosOptions};

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;

use crate::grid::GridDomain;
use crate::{Error, Result};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Symmetry tolerance enforced at construction.
const SYMMETRY_TOL: f64 = 1e-14;

/// Relative cutoff below which eigenvalues count as zero modes and are
/// excluded from magnitude conversion.
const ZERO_CUT: f64 = 1e-12;

/// Default cap on the order of dense eigensolves.
pub const DEFAULT_DENSE_CAP: usize = 4000;

/// Sparse symmetric matrix in CSR form, both triangles stored.
#[derive(Debug, Clone)]
pub struct SparseSymMatrix {
    order: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Builds from triplets, accumulating duplicates and checking symmetry.
    pub fn from_triplets(order: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(r, c, v) in triplets {
            if r >= order || c >= order {
                return Err(Error::InvalidArgument(format!(
                    "entry ({r}, {c}) out of range for order {order}"
                )));
            }
            *map.entry((r, c)).or_insert(0.0) += v;
        }
        for (&(r, c), &v) in &map {
            let t = map.get(&(c, r)).copied().unwrap_or(0.0);
            if (v - t).abs() > SYMMETRY_TOL {
                return Err(Error::InvalidArgument(format!(
                    "matrix is not symmetric at ({r}, {c}): {v} vs {t}"
                )));
            }
        }
        let mut row_ptr = vec![0usize; order + 1];
        for &(r, _) in map.keys() {
            row_ptr[r + 1] += 1;
        }
        for i in 0..order {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut col_idx = Vec::with_capacity(map.len());
        let mut values = Vec::with_capacity(map.len());
        for ((_, c), v) in map {
            col_idx.push(c);
            values.push(v);
        }
        Ok(Self { order, row_ptr, col_idx, values })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Largest row-sum of absolute values (the induced infinity norm).
    pub fn norm_inf(&self) -> f64 {
        (0..self.order)
            .map(|r| {
                self.values[self.row_ptr[r]..self.row_ptr[r + 1]]
                    .iter()
                    .map(|v| v.abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Largest asymmetry `|a_ij - a_ji|`; zero up to accumulation noise.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.order {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                let v = self.values[k];
                let t = self.get(c, r);
                worst = worst.max((v - t).abs());
            }
        }
        worst
    }

    fn get(&self, r: usize, c: usize) -> f64 {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        match self.col_idx[lo..hi].binary_search(&c) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    fn row_dot(&self, r: usize, v: &[f64]) -> f64 {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        let mut acc = 0.0;
        for k in lo..hi {
            acc += self.values[k] * v[self.col_idx[k]];
        }
        acc
    }

    /// Matrix-vector product; runs the rows in parallel when the `parallel`
    /// feature is enabled.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.order, "matvec length mismatch");
        #[cfg(feature = "parallel")]
        {
            (0..self.order).into_par_iter().map(|r| self.row_dot(r, v)).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.matvec_seq(v)
        }
    }

    /// Sequential matrix-vector product.
    pub fn matvec_seq(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.order, "matvec length mismatch");
        (0..self.order).map(|r| self.row_dot(r, v)).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.order, self.order);
        for r in 0..self.order {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.col_idx[k])] = self.values[k];
            }
        }
        m
    }
}

/// Assembles the Dirichlet Laplacian on the interior nodes of `g`:
/// `-2·dim/h²` on the diagonal, `1/h²` towards each interior neighbor.
/// Neighbors eliminated by the boundary contribute nothing.
pub fn assemble_dirichlet_laplacian(g: &GridDomain) -> Result<SparseSymMatrix> {
    if g.is_empty() {
        return Err(Error::InvalidArgument("grid domain has no interior nodes".into()));
    }
    let d = g.dim();
    let h = g.spacing();
    let inv_h2 = 1.0 / (h * h);
    let n = g.len();
    let mut triplets = Vec::with_capacity(n * (2 * d + 1));
    for (i, node) in g.nodes().iter().enumerate() {
        triplets.push((i, i, -2.0 * d as f64 * inv_h2));
        for axis in 0..d {
            for dir in [-1i64, 1] {
                let q = node[axis] as i64 + dir;
                if q < 0 {
                    continue;
                }
                let mut nb = node.clone();
                nb[axis] = q as u64;
                if let Some(j) = g.node_index(&nb) {
                    triplets.push((i, j, inv_h2));
                }
            }
        }
    }
    SparseSymMatrix::from_triplets(n, &triplets)
}

/// Raw eigenpairs of a Laplacian: values ascending, optional eigenvectors as
/// matching columns.
#[derive(Debug, Clone)]
pub struct RawSpectrum {
    pub values: Vec<f64>,
    pub vectors: Option<DMatrix<f64>>,
}

impl RawSpectrum {
    /// Reorders eigenpairs by ascending magnitude `|λ|`.
    pub fn sorted_by_magnitude(&self) -> RawSpectrum {
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        order.sort_by(|&a, &b| {
            self.values[a].abs().partial_cmp(&self.values[b].abs()).expect("finite")
        });
        let values = order.iter().map(|&i| self.values[i]).collect();
        let vectors = self.vectors.as_ref().map(|m| {
            DMatrix::from_columns(&order.iter().map(|&i| m.column(i)).collect::<Vec<_>>())
        });
        RawSpectrum { values, vectors }
    }
}

/// Dense eigensolve under [`DEFAULT_DENSE_CAP`].
pub fn full_spectrum(m: &SparseSymMatrix, want_vectors: bool) -> Result<RawSpectrum> {
    full_spectrum_with_cap(m, want_vectors, DEFAULT_DENSE_CAP)
}

/// Dense eigensolve of all eigenpairs, ascending, with an explicit cap on
/// the matrix order.
pub fn full_spectrum_with_cap(
    m: &SparseSymMatrix,
    want_vectors: bool,
    cap: usize,
) -> Result<RawSpectrum> {
    if m.order() > cap {
        return Err(Error::DenseCapExceeded { order: m.order(), cap });
    }
    let dense = m.to_dense();
    if want_vectors {
        let eig = nalgebra::SymmetricEigen::new(dense);
        let mut order: Vec<usize> = (0..m.order()).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).expect("finite")
        });
        let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let columns: Vec<_> = order.iter().map(|&i| eig.eigenvectors.column(i)).collect();
        Ok(RawSpectrum { values, vectors: Some(DMatrix::from_columns(&columns)) })
    } else {
        let mut values: Vec<f64> = dense.symmetric_eigenvalues().iter().copied().collect();
        values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        Ok(RawSpectrum { values, vectors: None })
    }
}

/// How raw Laplacian eigenvalues are turned into positive magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MagnitudeConvention {
    /// `κ = sqrt(-λ)`. One prefractal iteration scales κ by the inverse
    /// contraction ratio, which is the scaling all dimension estimates here
    /// rely on.
    Wavenumber,
    /// `|λ|` itself; exposed for exploration.
    EigenvalueModulus,
}

impl fmt::Display for MagnitudeConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MagnitudeConvention::Wavenumber => write!(f, "wavenumber"),
            MagnitudeConvention::EigenvalueModulus => write!(f, "eigenvalue-modulus"),
        }
    }
}

/// Converts raw non-positive eigenvalues to ascending positive magnitudes.
/// Zero modes (relative to the largest magnitude) are excluded; a genuinely
/// positive eigenvalue is a convention violation and errors out.
pub fn to_magnitudes(raw: &[f64], convention: MagnitudeConvention) -> Result<Vec<f64>> {
    let scale = raw.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1.0);
    let cut = ZERO_CUT * scale;
    let mut out = Vec::with_capacity(raw.len());
    for &lambda in raw {
        if lambda > cut {
            return Err(Error::PositiveEigenvalue(lambda));
        }
        if lambda.abs() <= cut {
            continue; // zero mode, excluded by convention
        }
        out.push(match convention {
            MagnitudeConvention::Wavenumber => (-lambda).sqrt(),
            MagnitudeConvention::EigenvalueModulus => -lambda,
        });
    }
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    Ok(out)
}

/// Metadata carried with a clustered spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumMeta {
    pub level: Option<u32>,
    pub spacing: Option<f64>,
    pub convention: MagnitudeConvention,
    pub cluster_tol: f64,
}

impl Default for SpectrumMeta {
    fn default() -> Self {
        Self {
            level: None,
            spacing: None,
            convention: MagnitudeConvention::Wavenumber,
            cluster_tol: 0.0,
        }
    }
}

/// Clustered spectral magnitudes with multiplicities and, optionally, the
/// raw eigenvectors grouped by cluster.
#[derive(Debug, Clone)]
pub struct Spectrum {
    magnitudes: Vec<f64>,
    multiplicities: Vec<usize>,
    eigenvectors: Option<DMatrix<f64>>,
    cluster_offsets: Vec<usize>,
    meta: SpectrumMeta,
}

impl Spectrum {
    /// Clusters ascending positive magnitudes: a value joins the open
    /// cluster while it stays within `rel_tol · max(1, cluster mean)` of the
    /// running mean.
    pub fn cluster(magnitudes: &[f64], rel_tol: f64) -> Spectrum {
        Self::cluster_impl(magnitudes, None, rel_tol, SpectrumMeta {
            cluster_tol: rel_tol,
            ..SpectrumMeta::default()
        })
    }

    fn cluster_impl(
        magnitudes: &[f64],
        vectors: Option<DMatrix<f64>>,
        rel_tol: f64,
        meta: SpectrumMeta,
    ) -> Spectrum {
        debug_assert!(magnitudes.windows(2).all(|w| w[0] <= w[1]), "input must ascend");
        let mut means = Vec::new();
        let mut counts = Vec::new();
        let mut offsets = vec![0usize];
        let mut sum = 0.0;
        let mut n = 0usize;
        for &v in magnitudes {
            if n > 0 {
                let mean = sum / n as f64;
                if (v - mean).abs() <= rel_tol * mean.abs().max(1.0) {
                    sum += v;
                    n += 1;
                    continue;
                }
                means.push(mean);
                counts.push(n);
                offsets.push(offsets.last().unwrap() + n);
            }
            sum = v;
            n = 1;
        }
        if n > 0 {
            means.push(sum / n as f64);
            counts.push(n);
            offsets.push(offsets.last().unwrap() + n);
        }
        Spectrum {
            magnitudes: means,
            multiplicities: counts,
            eigenvectors: vectors,
            cluster_offsets: offsets,
            meta,
        }
    }

    /// Full pipeline from a raw eigensolve: exclude zero modes, convert to
    /// magnitudes, sort ascending and cluster. Eigenvector columns follow
    /// their eigenvalues through the reordering.
    pub fn from_raw(
        raw: &RawSpectrum,
        convention: MagnitudeConvention,
        cluster_tol: f64,
        level: Option<u32>,
        spacing: Option<f64>,
    ) -> Result<Spectrum> {
        let scale = raw.values.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1.0);
        let cut = ZERO_CUT * scale;
        let mut entries: Vec<(f64, usize)> = Vec::with_capacity(raw.values.len());
        for (i, &lambda) in raw.values.iter().enumerate() {
            if lambda > cut {
                return Err(Error::PositiveEigenvalue(lambda));
            }
            if lambda.abs() <= cut {
                continue;
            }
            let mag = match convention {
                MagnitudeConvention::Wavenumber => (-lambda).sqrt(),
                MagnitudeConvention::EigenvalueModulus => -lambda,
            };
            entries.push((mag, i));
        }
        entries.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
        let mags: Vec<f64> = entries.iter().map(|e| e.0).collect();
        let vectors = raw.vectors.as_ref().map(|m| {
            DMatrix::from_columns(&entries.iter().map(|e| m.column(e.1)).collect::<Vec<_>>())
        });
        let meta = SpectrumMeta { level, spacing, convention, cluster_tol };
        Ok(Self::cluster_impl(&mags, vectors, cluster_tol, meta))
    }

    /// Analytic spectrum from explicit `(magnitude, multiplicity)` pairs.
    pub fn from_entries(magnitudes: Vec<f64>, multiplicities: Vec<usize>) -> Result<Spectrum> {
        if magnitudes.len() != multiplicities.len() {
            return Err(Error::InvalidArgument("entry lists differ in length".into()));
        }
        if magnitudes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("magnitudes must strictly ascend".into()));
        }
        if magnitudes.iter().any(|&m| !m.is_finite() || m <= 0.0) || multiplicities.contains(&0) {
            return Err(Error::InvalidArgument("entries must be positive".into()));
        }
        let mut offsets = vec![0usize];
        for &m in &multiplicities {
            offsets.push(offsets.last().unwrap() + m);
        }
        Ok(Spectrum {
            magnitudes,
            multiplicities,
            eigenvectors: None,
            cluster_offsets: offsets,
            meta: SpectrumMeta { cluster_tol: 1e-6, ..SpectrumMeta::default() },
        })
    }

    /// First `count` Dirichlet magnitudes of the unit interval: `nπ`, all
    /// simple.
    pub fn interval_modes(count: usize) -> Spectrum {
        let mags: Vec<f64> = (1..=count).map(|n| n as f64 * std::f64::consts::PI).collect();
        Self::from_entries(mags, vec![1; count]).expect("ascending by construction")
    }

    /// First `count` distinct Dirichlet magnitudes of the unit square:
    /// `π·sqrt(m² + n²)` with lattice multiplicities.
    pub fn square_modes(count: usize) -> Spectrum {
        let mut k = (2.0 * (count as f64).sqrt()).ceil() as u64 + 2;
        loop {
            let mut by_norm: BTreeMap<u64, usize> = BTreeMap::new();
            for m in 1..=k {
                for n in 1..=k {
                    let s = m * m + n * n;
                    if s <= k * k {
                        *by_norm.entry(s).or_insert(0) += 1;
                    }
                }
            }
            if by_norm.len() >= count {
                let mags: Vec<f64> = by_norm
                    .keys()
                    .take(count)
                    .map(|&s| std::f64::consts::PI * (s as f64).sqrt())
                    .collect();
                let muls: Vec<usize> = by_norm.values().take(count).copied().collect();
                return Self::from_entries(mags, muls).expect("ascending by construction");
            }
            k *= 2;
        }
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    /// Number of distinct magnitudes (clusters).
    pub fn len(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.magnitudes.is_empty()
    }

    /// Total multiplicity, i.e. the number of retained raw eigenvalues.
    pub fn total_multiplicity(&self) -> usize {
        self.multiplicities.iter().sum()
    }

    pub fn eigenvectors(&self) -> Option<&DMatrix<f64>> {
        self.eigenvectors.as_ref()
    }

    /// Column range of the raw eigenvectors belonging to cluster `i`.
    pub fn cluster_columns(&self, i: usize) -> std::ops::Range<usize> {
        self.cluster_offsets[i]..self.cluster_offsets[i + 1]
    }

    pub fn meta(&self) -> &SpectrumMeta {
        &self.meta
    }

    pub fn set_meta(&mut self, meta: SpectrumMeta) {
        self.meta = meta;
    }

    /// CSV export: `#` metadata lines, then `magnitude,multiplicity` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self.meta.level {
            Some(l) => out.push_str(&format!("# level {l}\n")),
            None => out.push_str("# level -\n"),
        }
        match self.meta.spacing {
            Some(h) => out.push_str(&format!("# spacing {h:.12e}\n")),
            None => out.push_str("# spacing -\n"),
        }
        out.push_str(&format!("# convention {}\n", self.meta.convention));
        out.push_str(&format!("# cluster_tol {:.3e}\n", self.meta.cluster_tol));
        out.push_str("magnitude,multiplicity\n");
        for (m, c) in self.magnitudes.iter().zip(&self.multiplicities) {
            out.push_str(&format!("{m:.12e},{c}\n"));
        }
        out
    }
}
