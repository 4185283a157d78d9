//! Self-similar mode machinery: lifting eigenfunctions onto copies,
//! predicting the self-similar part of the spectrum by the scaling law, and
//! splitting computed spectra into diaperiodic and interconnective parts.
//!
//! A lift contracts a level-`N-1` eigenfunction onto copy `j` of the
//! level-`N` prefractal: `x ↦ parent(w_j⁻¹(x))` inside the copy, zero
//! elsewhere. Its magnitude is the parent magnitude divided by the copy's
//! contraction ratio. Spectrum entries matching such rescaled parent
//! magnitudes are classified diaperiodic (branch `1..=p`); the rest are
//! interconnective (branch 0).

use crate::grid::GridDomain;
use crate::ifs::IteratedFunctionSystem;
use crate::spectrum::{SparseSymMatrix, Spectrum};
use crate::{Error, Result};

/// Relative collision tolerance when merging predicted magnitudes, applied
/// to the log-magnitudes.
const MERGE_TOL: f64 = 1e-12;

/// Identifies one spectral entry of a prefractal: branch 0 is
/// interconnective, branches `1..=p` are diaperiodic via the named copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeLabel {
    pub level: u32,
    pub branch: usize,
    pub index: usize,
}

/// A child spectrum entry matched to a rescaled parent entry.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedMode {
    pub magnitude: f64,
    pub multiplicity: usize,
    pub branch: usize,
    pub parent_index: usize,
    pub parent_magnitude: f64,
    pub predicted_magnitude: f64,
}

/// Partition of a spectrum into diaperiodic matches and interconnective
/// leftovers.
#[derive(Debug, Clone, Default)]
pub struct SpectrumPartition {
    pub diaperiodic: Vec<MatchedMode>,
    pub interconnective: Vec<(f64, usize)>,
}

impl SpectrumPartition {
    /// Total matched multiplicity.
    pub fn diaperiodic_count(&self) -> usize {
        self.diaperiodic.iter().map(|m| m.multiplicity).sum()
    }

    /// Total unmatched multiplicity.
    pub fn interconnective_count(&self) -> usize {
        self.interconnective.iter().map(|&(_, m)| m).sum()
    }

    /// CSV export: `magnitude,multiplicity,branch,parent_magnitude`, rows
    /// ascending in magnitude; interconnective rows carry branch 0 and an
    /// empty parent field.
    pub fn to_csv(&self) -> String {
        enum Row<'a> {
            Matched(&'a MatchedMode),
            Inter(f64, usize),
        }
        let mut rows: Vec<(f64, Row)> = self
            .diaperiodic
            .iter()
            .map(|m| (m.magnitude, Row::Matched(m)))
            .chain(self.interconnective.iter().map(|&(mag, mul)| (mag, Row::Inter(mag, mul))))
            .collect();
        rows.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
        let mut out = String::from("magnitude,multiplicity,branch,parent_magnitude\n");
        for (_, row) in rows {
            match row {
                Row::Matched(m) => out.push_str(&format!(
                    "{:.12e},{},{},{:.12e}\n",
                    m.magnitude, m.multiplicity, m.branch, m.parent_magnitude
                )),
                Row::Inter(mag, mul) => out.push_str(&format!("{mag:.12e},{mul},0,\n")),
            }
        }
        out
    }
}

/// Lifts a parent grid function onto copy `branch` of the target domain:
/// node values are pulled back through the branch map; nodes outside the
/// copy stay zero. Aligned grids resolve by exact node correspondence,
/// otherwise by multilinear interpolation with zero extension.
pub fn lift_eigenfunction(
    parent: &GridDomain,
    parent_values: &[f64],
    ifs: &IteratedFunctionSystem,
    branch: usize,
    target: &GridDomain,
) -> Result<Vec<f64>> {
    if parent_values.len() != parent.len() {
        return Err(Error::DimensionMismatch {
            expected: parent.len(),
            got: parent_values.len(),
        });
    }
    let map = ifs.map(branch)?;
    let d = target.dim();
    if parent.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: parent.dim() });
    }
    let hp = parent.spacing();
    let mut out = vec![0.0; target.len()];
    let mut any_nonzero = false;
    for (i, slot) in out.iter_mut().enumerate() {
        let y = target.point(i);
        let z = map.invert(&y)?;
        // skip points clearly outside the parent's closed cell union
        if !parent.contains_closed(&z, 1e-9) {
            continue;
        }
        let u: Vec<f64> = z.iter().map(|&c| c / hp).collect();
        let snapped: Vec<f64> = u.iter().map(|&c| c.round()).collect();
        let exact = u.iter().zip(&snapped).all(|(&c, &s)| (c - s).abs() <= 1e-6);
        let v = if exact {
            if snapped.iter().any(|&s| s < 0.0) {
                0.0
            } else {
                let coords: Vec<u64> = snapped.iter().map(|&s| s as u64).collect();
                match parent.node_index(&coords) {
                    Some(idx) => parent_values[idx],
                    None => 0.0, // a parent boundary or exterior node
                }
            }
        } else {
            multilinear(parent, parent_values, &u)
        };
        if v != 0.0 {
            any_nonzero = true;
        }
        *slot = v;
    }
    let parent_nonzero = parent_values.iter().any(|&v| v != 0.0);
    if parent_nonzero && !any_nonzero {
        return Err(Error::Resolution { branch });
    }
    Ok(out)
}

/// Multilinear interpolation of a grid function given fractional lattice
/// coordinates, extending by zero outside the interior.
fn multilinear(parent: &GridDomain, values: &[f64], u: &[f64]) -> f64 {
    let d = u.len();
    let base: Vec<i64> = u.iter().map(|&c| c.floor() as i64).collect();
    let frac: Vec<f64> = u.iter().zip(&base).map(|(&c, &b)| c - b as f64).collect();
    let mut acc = 0.0;
    for mask in 0..(1u32 << d) {
        let mut weight = 1.0;
        let mut coords = Vec::with_capacity(d);
        let mut valid = true;
        for a in 0..d {
            let hi = (mask >> a) & 1 == 1;
            weight *= if hi { frac[a] } else { 1.0 - frac[a] };
            let q = base[a] + if hi { 1 } else { 0 };
            if q < 0 {
                valid = false;
                break;
            }
            coords.push(q as u64);
        }
        if !valid || weight == 0.0 {
            continue;
        }
        if let Some(idx) = parent.node_index(&coords) {
            acc += weight * values[idx];
        }
    }
    acc
}

/// Relative eigen-residual of a lifted function against a predicted
/// magnitude: `‖L·v + κ̃²·v‖ / (κ̃²·‖v‖)`. The Laplacian is negative
/// definite, so an exact eigenvector at `λ = -κ̃²` gives zero.
pub fn lift_residual(
    lifted: &[f64],
    laplacian: &SparseSymMatrix,
    predicted_magnitude: f64,
) -> Result<f64> {
    if lifted.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidArgument("lifted function is identically zero".into()));
    }
    if !predicted_magnitude.is_finite() || predicted_magnitude <= 0.0 {
        return Err(Error::InvalidArgument("predicted magnitude must be positive".into()));
    }
    let kappa_sq = predicted_magnitude * predicted_magnitude;
    let lv = laplacian.matvec(lifted);
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, &v) in lv.iter().zip(lifted) {
        let r = a + kappa_sq * v;
        num += r * r;
        den += v * v;
    }
    Ok(num.sqrt() / (kappa_sq * den.sqrt()))
}

/// One predicted entry, kept in log space: deep prefractal levels push both
/// magnitudes and multiplicities far beyond the range of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedEntry {
    pub log_magnitude: f64,
    pub log_multiplicity: f64,
    /// Branch word locating the copy chain the entry descends through; the
    /// lexicographically smallest word survives a collision merge.
    pub provenance: Vec<usize>,
}

impl PredictedEntry {
    /// Magnitude in linear scale; may overflow to infinity at deep levels.
    pub fn magnitude(&self) -> f64 {
        self.log_magnitude.exp()
    }

    pub fn multiplicity(&self) -> f64 {
        self.log_multiplicity.exp()
    }
}

/// The diaperiodic part of a spectrum predicted from an initiator by the
/// scaling law, entries ascending in magnitude and merged on collisions.
#[derive(Debug, Clone, Default)]
pub struct PredictedSpectrum {
    entries: Vec<PredictedEntry>,
}

impl PredictedSpectrum {
    pub fn from_initiator(initiator: &Spectrum) -> Self {
        let entries = initiator
            .magnitudes()
            .iter()
            .zip(initiator.multiplicities())
            .map(|(&m, &c)| PredictedEntry {
                log_magnitude: m.ln(),
                log_multiplicity: (c as f64).ln(),
                provenance: Vec::new(),
            })
            .collect();
        Self { entries }
    }

    /// Builds directly from log-space entries; they must ascend in
    /// magnitude.
    pub fn from_log_entries(entries: Vec<PredictedEntry>) -> Result<Self> {
        if entries.windows(2).any(|w| w[0].log_magnitude > w[1].log_magnitude) {
            return Err(Error::InvalidArgument(
                "predicted entries must ascend in magnitude".into(),
            ));
        }
        Ok(Self { entries })
    }

    /// Merges extra entries (synthetic interconnective modes, say) into the
    /// spectrum, keeping the ascending order and collision merging.
    pub fn with_injected(&self, extra: Vec<PredictedEntry>) -> PredictedSpectrum {
        let mut entries = self.entries.clone();
        entries.extend(extra);
        entries.sort_by(|a, b| {
            a.log_magnitude
                .partial_cmp(&b.log_magnitude)
                .expect("finite")
                .then_with(|| a.provenance.cmp(&b.provenance))
        });
        let mut merged: Vec<PredictedEntry> = Vec::with_capacity(entries.len());
        for e in entries {
            match merged.last_mut() {
                Some(last) if (e.log_magnitude - last.log_magnitude).abs() <= MERGE_TOL => {
                    last.log_multiplicity = log_add(last.log_multiplicity, e.log_multiplicity);
                    if e.provenance < last.provenance {
                        last.provenance = e.provenance;
                    }
                }
                _ => merged.push(e),
            }
        }
        PredictedSpectrum { entries: merged }
    }

    pub fn entries(&self) -> &[PredictedEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Log of the total multiplicity across all entries.
    pub fn total_log_multiplicity(&self) -> f64 {
        let mut it = self.entries.iter().map(|e| e.log_multiplicity);
        let first = match it.next() {
            Some(v) => v,
            None => return f64::NEG_INFINITY,
        };
        it.fold(first, log_add)
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Applies `level` rounds of the scaling law to an initiator spectrum:
/// every round rescales each entry by every inverse contraction ratio and
/// merges entries whose magnitudes collide within 1e-12 relative,
/// accumulating multiplicities.
pub fn predicted_spectrum(
    initiator: &Spectrum,
    ratios: &[f64],
    level: u32,
) -> Result<PredictedSpectrum> {
    predict_impl(initiator, ratios, level, None)
}

/// Capped variant: after each round only the `keep` smallest magnitudes
/// survive. With `keep` comfortably above the number of entries later read
/// off the result (the dimension module uses 4x plus a constant), the
/// retained prefix matches the exact recursion, because descendants of a
/// larger entry cannot undercut the matching descendants of a smaller one.
pub fn predicted_spectrum_capped(
    initiator: &Spectrum,
    ratios: &[f64],
    level: u32,
    keep: usize,
) -> Result<PredictedSpectrum> {
    if keep == 0 {
        return Err(Error::InvalidArgument("keep must be positive".into()));
    }
    predict_impl(initiator, ratios, level, Some(keep))
}

fn predict_impl(
    initiator: &Spectrum,
    ratios: &[f64],
    level: u32,
    keep: Option<usize>,
) -> Result<PredictedSpectrum> {
    if ratios.is_empty() {
        return Err(Error::InvalidArgument("at least one contraction ratio is required".into()));
    }
    for &c in ratios {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "contraction ratios must lie in (0, 1), got {c}"
            )));
        }
    }
    let mut ps = PredictedSpectrum::from_initiator(initiator);
    if level == 0 || ps.is_empty() {
        return Ok(ps);
    }
    let p = ratios.len();
    let homogeneous = ratios.iter().all(|&c| (c - ratios[0]).abs() <= 1e-12 * ratios[0]);
    if homogeneous {
        // Every round rescales all entries by the same factor and merges the
        // p coincident copies, so the closed form is exact.
        let shift = level as f64 * (1.0 / ratios[0]).ln();
        let mul_shift = level as f64 * (p as f64).ln();
        for e in &mut ps.entries {
            e.log_magnitude += shift;
            e.log_multiplicity += mul_shift;
            e.provenance = vec![1; level as usize];
        }
        return Ok(ps);
    }
    let log_inv: Vec<f64> = ratios.iter().map(|&c| (1.0 / c).ln()).collect();
    for _ in 0..level {
        let mut raw: Vec<PredictedEntry> = Vec::with_capacity(ps.entries.len() * p);
        for e in &ps.entries {
            for (j, &shift) in log_inv.iter().enumerate() {
                let mut provenance = Vec::with_capacity(e.provenance.len() + 1);
                provenance.push(j + 1);
                provenance.extend_from_slice(&e.provenance);
                raw.push(PredictedEntry {
                    log_magnitude: e.log_magnitude + shift,
                    log_multiplicity: e.log_multiplicity,
                    provenance,
                });
            }
        }
        raw.sort_by(|a, b| {
            a.log_magnitude
                .partial_cmp(&b.log_magnitude)
                .expect("finite")
                .then_with(|| a.provenance.cmp(&b.provenance))
        });
        let mut merged: Vec<PredictedEntry> = Vec::with_capacity(raw.len());
        for e in raw {
            match merged.last_mut() {
                Some(last) if (e.log_magnitude - last.log_magnitude).abs() <= MERGE_TOL => {
                    last.log_multiplicity = log_add(last.log_multiplicity, e.log_multiplicity);
                    if e.provenance < last.provenance {
                        last.provenance = e.provenance;
                    }
                }
                _ => merged.push(e),
            }
        }
        if let Some(cap) = keep {
            merged.truncate(cap);
        }
        ps.entries = merged;
    }
    Ok(ps)
}

/// Greedy magnitude matching of a child spectrum against the rescaled
/// parent spectrum. Each child cluster claims the nearest predicted
/// magnitude within `match_tol` relative distance that still has
/// multiplicity budget, ties resolved towards the smaller predicted
/// magnitude and branch. Unclaimed child multiplicity is interconnective.
pub fn classify_spectrum(
    child: &Spectrum,
    parent: &Spectrum,
    ratios: &[f64],
    match_tol: f64,
) -> SpectrumPartition {
    struct Candidate {
        magnitude: f64,
        branch: usize,
        parent_index: usize,
        parent_magnitude: f64,
        budget: usize,
    }
    let mut candidates: Vec<Candidate> = Vec::new();
    for (pi, (&pm, &pmul)) in
        parent.magnitudes().iter().zip(parent.multiplicities()).enumerate()
    {
        for (j, &c) in ratios.iter().enumerate() {
            candidates.push(Candidate {
                magnitude: pm / c,
                branch: j + 1,
                parent_index: pi,
                parent_magnitude: pm,
                budget: pmul,
            });
        }
    }
    candidates.sort_by(|a, b| {
        a.magnitude
            .partial_cmp(&b.magnitude)
            .expect("finite")
            .then(a.branch.cmp(&b.branch))
    });

    let mut partition = SpectrumPartition::default();
    for (&mag, &mul) in child.magnitudes().iter().zip(child.multiplicities()) {
        let mut remaining = mul;
        while remaining > 0 {
            let mut best: Option<(usize, f64)> = None;
            for (ci, cand) in candidates.iter().enumerate() {
                if cand.budget == 0 {
                    continue;
                }
                let dist = (mag - cand.magnitude).abs() / cand.magnitude;
                if dist > match_tol {
                    continue;
                }
                // strict improvement keeps the earliest (smallest) candidate
                if best.is_none_or(|(_, d)| dist < d) {
                    best = Some((ci, dist));
                }
            }
            match best {
                Some((ci, _)) => {
                    let cand = &mut candidates[ci];
                    let take = remaining.min(cand.budget);
                    partition.diaperiodic.push(MatchedMode {
                        magnitude: mag,
                        multiplicity: take,
                        branch: cand.branch,
                        parent_index: cand.parent_index,
                        parent_magnitude: cand.parent_magnitude,
                        predicted_magnitude: cand.magnitude,
                    });
                    cand.budget -= take;
                    remaining -= take;
                }
                None => {
                    partition.interconnective.push((mag, remaining));
                    remaining = 0;
                }
            }
        }
    }
    partition
}
