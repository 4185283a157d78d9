//! Spectral dimension estimates and side-by-side dimension reports.
//!
//! The spectral dimension of a spectrum is the ratio of summed
//! log-multiplicities to summed log-magnitudes over the `M` smallest
//! distinct magnitudes. Both sums diverge with the full spectrum, so they
//! are truncated at the same count, matching the partial-sum limit the
//! estimate converges under. For a homogeneous system with `p` maps of
//! ratio `c` the level-`N` estimate approaches `-log p / log c`, the
//! similarity and box-counting dimension, with error `O(1/N)`.

use crate::diaperiodic::{predicted_spectrum_capped, PredictedSpectrum};
use crate::grid::{box_counts, box_dimension_fit, rasterize_prefractal, refine_to_grid};
use crate::ifs::{moran_dimension, IteratedFunctionSystem};
use crate::spectrum::{
    assemble_dirichlet_laplacian, full_spectrum, MagnitudeConvention, Spectrum,
};
use crate::{Error, Result};

/// Truncated log-sums `(Σ log mul, Σ log κ)` over the `m` smallest distinct
/// magnitudes of a clustered spectrum.
pub fn partial_log_sums(s: &Spectrum, m: usize) -> Result<(f64, f64)> {
    if m == 0 {
        return Err(Error::InvalidArgument("truncation must be positive".into()));
    }
    if s.len() < m {
        return Err(Error::InvalidArgument(format!(
            "spectrum has {} distinct magnitudes, truncation {m} requested",
            s.len()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..m {
        let mag = s.magnitudes()[i];
        if mag <= 1.0 {
            return Err(Error::IllConditioned { magnitude: mag });
        }
        num += (s.multiplicities()[i] as f64).ln();
        den += mag.ln();
    }
    Ok((num, den))
}

/// Log-sum counterpart for predicted spectra, which already live in log
/// space.
pub fn partial_log_sums_predicted(ps: &PredictedSpectrum, m: usize) -> Result<(f64, f64)> {
    if m == 0 {
        return Err(Error::InvalidArgument("truncation must be positive".into()));
    }
    if ps.len() < m {
        return Err(Error::InvalidArgument(format!(
            "predicted spectrum has {} entries, truncation {m} requested",
            ps.len()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for e in &ps.entries()[..m] {
        if e.log_magnitude <= 0.0 {
            return Err(Error::IllConditioned { magnitude: e.magnitude() });
        }
        num += e.log_multiplicity;
        den += e.log_magnitude;
    }
    Ok((num, den))
}

/// Spectral dimension of a clustered spectrum over the `truncation`
/// smallest distinct magnitudes.
pub fn spectral_dimension(s: &Spectrum, truncation: usize) -> Result<f64> {
    let (num, den) = partial_log_sums(s, truncation)?;
    Ok(num / den)
}

/// Spectral dimension of a predicted spectrum.
pub fn spectral_dimension_predicted(ps: &PredictedSpectrum, truncation: usize) -> Result<f64> {
    let (num, den) = partial_log_sums_predicted(ps, truncation)?;
    Ok(num / den)
}

/// Per-level retention cap handed to the predicted-spectrum recursion; wide
/// enough that the truncation window always reads exact entries.
fn recursion_keep(truncation: usize) -> usize {
    (4 * truncation + 64).max(256)
}

/// Analytic spectral-dimension sequence over prefractal levels, driven by
/// the predicted spectrum of the given initiator.
pub fn spectral_dimension_sequence(
    ratios: &[f64],
    initiator: &Spectrum,
    levels: &[u32],
    truncation: usize,
) -> Result<Vec<(u32, f64)>> {
    let keep = recursion_keep(truncation);
    levels
        .iter()
        .map(|&level| {
            let ps = predicted_spectrum_capped(initiator, ratios, level, keep)?;
            Ok((level, spectral_dimension_predicted(&ps, truncation)?))
        })
        .collect()
}

/// Pairwise absolute differences between the three estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionGaps {
    pub spectral_box: f64,
    pub spectral_moran: f64,
    pub box_moran: f64,
}

/// Side-by-side dimension estimates for one system.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionReport {
    pub spectral_dim: f64,
    pub box_dim: f64,
    pub moran_dim: f64,
    pub levels_used: Vec<u32>,
    pub truncation: usize,
    pub convention: String,
    pub mode: String,
    pub gaps: DimensionGaps,
}

impl DimensionReport {
    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("spectral_dim: {:.9}\n", self.spectral_dim));
        out.push_str(&format!("box_dim: {:.9}\n", self.box_dim));
        out.push_str(&format!("moran_dim: {:.9}\n", self.moran_dim));
        let levels: Vec<String> = self.levels_used.iter().map(|l| l.to_string()).collect();
        out.push_str(&format!("levels_used: {}\n", levels.join(" ")));
        out.push_str(&format!("truncation: {}\n", self.truncation));
        out.push_str(&format!("convention: {}\n", self.convention));
        out.push_str(&format!("mode: {}\n", self.mode));
        out.push_str(&format!("gap_spectral_box: {:.3e}\n", self.gaps.spectral_box));
        out.push_str(&format!("gap_spectral_moran: {:.3e}\n", self.gaps.spectral_moran));
        out.push_str(&format!("gap_box_moran: {:.3e}\n", self.gaps.box_moran));
        out
    }

    pub fn csv_header() -> &'static str {
        "spectral_dim,box_dim,moran_dim,levels_used,truncation,convention,mode,\
         gap_spectral_box,gap_spectral_moran,gap_box_moran"
    }

    pub fn to_csv_row(&self) -> String {
        let levels: Vec<String> = self.levels_used.iter().map(|l| l.to_string()).collect();
        format!(
            "{:.9},{:.9},{:.9},{},{},{},{},{:.3e},{:.3e},{:.3e}",
            self.spectral_dim,
            self.box_dim,
            self.moran_dim,
            levels.join(" "),
            self.truncation,
            self.convention,
            self.mode,
            self.gaps.spectral_box,
            self.gaps.spectral_moran,
            self.gaps.box_moran
        )
    }
}

/// How the spectral estimate of a report is computed.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralMode {
    /// Predicted spectrum of the analytic initiator at the given level.
    Analytic { level: u32 },
    /// Eigensolve of the rasterized prefractal.
    Numeric { level: u32, refine: u32, cluster_tol: f64 },
}

/// Report parameters; `box_depth` sets the deepest counted scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportParams {
    pub mode: SpectralMode,
    pub truncation: usize,
    pub box_depth: u32,
    pub initiator_modes: usize,
}

impl Default for ReportParams {
    fn default() -> Self {
        Self {
            mode: SpectralMode::Analytic { level: 1000 },
            truncation: 100,
            box_depth: 4,
            initiator_modes: 160,
        }
    }
}

/// Analytic initiator spectrum for the unit cell of a `dim`-dimensional
/// system.
pub fn analytic_initiator(dim: usize, modes: usize) -> Result<Spectrum> {
    match dim {
        1 => Ok(Spectrum::interval_modes(modes)),
        2 => Ok(Spectrum::square_modes(modes)),
        other => Err(Error::UnsupportedIfs(format!(
            "no analytic initiator spectrum for dimension {other}"
        ))),
    }
}

/// Runs the spectral, box-counting and similarity estimates for one system
/// and collects them with their pairwise gaps.
pub fn dimension_report(
    ifs: &IteratedFunctionSystem,
    base: u32,
    params: &ReportParams,
) -> Result<DimensionReport> {
    let moran = moran_dimension(&ifs.ratios())?;

    let cs = rasterize_prefractal(ifs, params.box_depth, base)?;
    let ks: Vec<u32> = (1..=params.box_depth).collect();
    let counts = box_counts(&cs, &ks)?;
    let box_dim = box_dimension_fit(&counts)?;

    let (spectral, levels_used, truncation_used, mode_tag) = match &params.mode {
        SpectralMode::Analytic { level } => {
            let initiator =
                analytic_initiator(ifs.dim(), params.initiator_modes.max(params.truncation))?;
            let ps = predicted_spectrum_capped(
                &initiator,
                &ifs.ratios(),
                *level,
                recursion_keep(params.truncation),
            )?;
            let dim = spectral_dimension_predicted(&ps, params.truncation)?;
            (dim, vec![*level], params.truncation, "analytic".to_string())
        }
        SpectralMode::Numeric { level, refine, cluster_tol } => {
            let cells = rasterize_prefractal(ifs, *level, base)?;
            let grid = refine_to_grid(&cells, *refine)?;
            let lap = assemble_dirichlet_laplacian(&grid)?;
            let raw = full_spectrum(&lap, false)?;
            let spec = Spectrum::from_raw(
                &raw,
                MagnitudeConvention::Wavenumber,
                *cluster_tol,
                Some(*level),
                Some(grid.spacing()),
            )?;
            let m = params.truncation.min(spec.len());
            let dim = spectral_dimension(&spec, m)?;
            (dim, vec![*level], m, "numeric".to_string())
        }
    };

    Ok(DimensionReport {
        spectral_dim: spectral,
        box_dim,
        moran_dim: moran,
        levels_used,
        truncation: truncation_used,
        convention: MagnitudeConvention::Wavenumber.to_string(),
        mode: mode_tag,
        gaps: DimensionGaps {
            spectral_box: (spectral - box_dim).abs(),
            spectral_moran: (spectral - moran).abs(),
            box_moran: (box_dim - moran).abs(),
        },
    })
}
