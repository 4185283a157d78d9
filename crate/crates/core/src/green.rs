//! Modal Green's function evaluation and its self-similar renormalization.
//!
//! With eigenpairs `(λ_n, φ_n)` of the discrete Dirichlet Laplacian and the
//! eigenvectors normalized in the discrete L² inner product `h^d Σ u v`, the
//! cohomology-free Green's function is the modal sum
//! `g(x, x'; λ) = Σ_n φ_n(x) φ_n(x') / (λ - λ_n)`,
//! which with the full spectrum equals the resolvent solve
//! `(λ·I - L) g = δ_{x'} / h^d` exactly.
//!
//! The renormalized form reproduces the diaperiodic part of a child
//! prefractal's Green's function from the parent evaluator alone. For points
//! pulled back through copy `j` with ratio `c`, normalized lifted modes give
//! prefactor `c^(2-d)` and raw-eigenvalue argument `c²·λ`; in one dimension
//! this is the familiar `c · g(w⁻¹x, w⁻¹x'; c²λ)`.

use crate::grid::GridDomain;
use crate::ifs::IteratedFunctionSystem;
use crate::spectrum::RawSpectrum;
use crate::{Error, Result};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Relative pole guard: evaluation refuses λ closer than this to any
/// retained eigenvalue.
pub const POLE_GUARD: f64 = 1e-6;

/// One batch evaluation request.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenQuery {
    pub x: Vec<f64>,
    pub x_prime: Vec<f64>,
    pub lambda: f64,
}

/// Modal evaluator over a grid domain: raw eigenvalues ascending in
/// magnitude with eigenvectors normalized to unit discrete L² norm.
#[derive(Debug, Clone)]
pub struct GreenEvaluator<'a> {
    domain: &'a GridDomain,
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    truncation: usize,
}

impl<'a> GreenEvaluator<'a> {
    /// Builds the evaluator from a raw eigensolve with vectors. Pairs are
    /// reordered by ascending magnitude and the first `truncation` retained
    /// (all of them when `None`).
    pub fn new(
        domain: &'a GridDomain,
        raw: &RawSpectrum,
        truncation: Option<usize>,
    ) -> Result<Self> {
        let vectors = raw
            .vectors
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("green evaluator needs eigenvectors".into()))?;
        if vectors.nrows() != domain.len() {
            return Err(Error::DimensionMismatch {
                expected: domain.len(),
                got: vectors.nrows(),
            });
        }
        let sorted = raw.sorted_by_magnitude();
        let available = sorted.values.len();
        let m = truncation.unwrap_or(available);
        if m == 0 || m > available {
            return Err(Error::InvalidArgument(format!(
                "truncation must lie in 1..={available}, got {m}"
            )));
        }
        let hd = domain.spacing().powi(domain.dim() as i32);
        let smat = sorted.vectors.expect("vectors present");
        let mut cols = Vec::with_capacity(m);
        for c in 0..m {
            let col: Vec<f64> = smat.column(c).iter().copied().collect();
            let norm_sq: f64 = col.iter().map(|v| v * v).sum::<f64>() * hd;
            let scale = 1.0 / norm_sq.sqrt();
            cols.push(col.into_iter().map(|v| v * scale).collect());
        }
        Ok(Self {
            domain,
            values: sorted.values[..m].to_vec(),
            vectors: cols,
            truncation: m,
        })
    }

    pub fn domain(&self) -> &GridDomain {
        self.domain
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// Retained raw eigenvalues, ascending in magnitude.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    fn node_of(&self, p: &[f64]) -> Result<usize> {
        self.domain.lookup_point(p).ok_or_else(|| {
            Error::InvalidArgument(format!("point {p:?} is not an interior grid node"))
        })
    }

    fn guard(&self, lambda: f64, count: usize) -> Result<()> {
        for &ev in &self.values[..count] {
            if (lambda - ev).abs() < POLE_GUARD * ev.abs().max(1.0) {
                return Err(Error::PoleProximity { lambda, eigenvalue: ev });
            }
        }
        Ok(())
    }

    /// Modal sum over all retained modes.
    pub fn eval(&self, x: &[f64], x_prime: &[f64], lambda: f64) -> Result<f64> {
        self.eval_truncated(x, x_prime, lambda, self.truncation)
    }

    /// Modal sum over the first `count` retained modes.
    pub fn eval_truncated(
        &self,
        x: &[f64],
        x_prime: &[f64],
        lambda: f64,
        count: usize,
    ) -> Result<f64> {
        if count == 0 || count > self.truncation {
            return Err(Error::InvalidArgument(format!(
                "count must lie in 1..={}, got {count}",
                self.truncation
            )));
        }
        self.guard(lambda, count)?;
        let i = self.node_of(x)?;
        let j = self.node_of(x_prime)?;
        let mut acc = 0.0;
        for (n, v) in self.vectors.iter().enumerate().take(count) {
            acc += v[i] * v[j] / (lambda - self.values[n]);
        }
        Ok(acc)
    }

    /// Modal sum restricted to an explicit set of retained mode indices;
    /// used to evaluate the diaperiodic part after classification.
    pub fn eval_modes(
        &self,
        x: &[f64],
        x_prime: &[f64],
        lambda: f64,
        modes: &[usize],
    ) -> Result<f64> {
        self.guard(lambda, self.truncation)?;
        let i = self.node_of(x)?;
        let j = self.node_of(x_prime)?;
        let mut acc = 0.0;
        for &n in modes {
            if n >= self.truncation {
                return Err(Error::InvalidArgument(format!(
                    "mode index {n} out of range 0..{}",
                    self.truncation
                )));
            }
            let v = &self.vectors[n];
            acc += v[i] * v[j] / (lambda - self.values[n]);
        }
        Ok(acc)
    }

    /// Batch evaluation; rows run in parallel when the `parallel` feature is
    /// enabled.
    pub fn eval_batch(&self, queries: &[GreenQuery]) -> Result<Vec<f64>> {
        #[cfg(feature = "parallel")]
        {
            queries
                .par_iter()
                .map(|q| self.eval(&q.x, &q.x_prime, q.lambda))
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.eval_batch_seq(queries)
        }
    }

    /// Sequential batch evaluation.
    pub fn eval_batch_seq(&self, queries: &[GreenQuery]) -> Result<Vec<f64>> {
        queries.iter().map(|q| self.eval(&q.x, &q.x_prime, q.lambda)).collect()
    }
}

enum Pullback {
    Interior,
    Boundary,
    Outside,
}

/// Locates a pulled-back point on the parent grid: an interior node, a
/// lattice point of the closed domain that is not interior (where the
/// Dirichlet Green's function vanishes), or outside the copy entirely.
fn locate(parent: &GridDomain, z: &[f64]) -> Result<Pullback> {
    if !parent.contains_closed(z, 1e-9) {
        return Ok(Pullback::Outside);
    }
    if parent.lookup_point(z).is_some() {
        return Ok(Pullback::Interior);
    }
    let h = parent.spacing();
    let aligned = z.iter().all(|&c| {
        let g = c / h;
        (g - g.round()).abs() <= 1e-6
    });
    if aligned {
        Ok(Pullback::Boundary)
    } else {
        Err(Error::InvalidArgument(format!(
            "pullback point {z:?} is not a node of the parent grid"
        )))
    }
}

/// Diaperiodic Green's function of the child prefractal, renormalized from
/// the parent evaluator: branches whose copy contains both points contribute
/// `c^(2-d) · g_parent(w⁻¹x, w⁻¹x'; c²·λ)`.
///
/// Points must lie in at least one copy each; points in disjoint copies
/// yield zero, matching the single-copy support of diaperiodic modes.
pub fn green_renormalized(
    parent: &GreenEvaluator<'_>,
    ifs: &IteratedFunctionSystem,
    x: &[f64],
    x_prime: &[f64],
    lambda: f64,
) -> Result<f64> {
    let d = ifs.dim();
    if x.len() != d || x_prime.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: if x.len() != d { x.len() } else { x_prime.len() },
        });
    }
    let mut acc = 0.0;
    let mut x_covered = false;
    let mut x_prime_covered = false;
    for branch in 1..=ifs.map_count() {
        let map = ifs.map(branch)?;
        let z = map.invert(x)?;
        let z_prime = map.invert(x_prime)?;
        let loc = locate(parent.domain(), &z)?;
        let loc_prime = locate(parent.domain(), &z_prime)?;
        if !matches!(loc, Pullback::Outside) {
            x_covered = true;
        }
        if !matches!(loc_prime, Pullback::Outside) {
            x_prime_covered = true;
        }
        match (loc, loc_prime) {
            (Pullback::Interior, Pullback::Interior) => {
                let c = map.ratio();
                let scaled_lambda = c * c * lambda;
                let prefactor = c.powi(2 - d as i32);
                acc += prefactor * parent.eval(&z, &z_prime, scaled_lambda)?;
            }
            (Pullback::Outside, _) | (_, Pullback::Outside) => {}
            // a pullback on the parent boundary contributes nothing
            (Pullback::Boundary, _) | (_, Pullback::Boundary) => {}
        }
    }
    if !x_covered {
        return Err(Error::OutsideDomain(x.to_vec()));
    }
    if !x_prime_covered {
        return Err(Error::OutsideDomain(x_prime.to_vec()));
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diaperiodic::{classify_spectrum, lift_eigenfunction};
    use crate::grid::{rasterize_prefractal, refine_to_grid, CellSet};
    use crate::presets;
    use crate::spectrum::{
        assemble_dirichlet_laplacian, full_spectrum, MagnitudeConvention, SparseSymMatrix,
        Spectrum,
    };
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_interval_grid(r: u32) -> crate::grid::GridDomain {
        let unit = CellSet::new(0, 2, 1, vec![vec![0]]).unwrap();
        refine_to_grid(&unit, r).unwrap()
    }

    /// Independent oracle: dense solve of `(λ·I - L) g = δ_(x') / h^d`.
    fn dense_resolvent(
        m: &SparseSymMatrix,
        domain: &crate::grid::GridDomain,
        x: &[f64],
        x_prime: &[f64],
        lambda: f64,
    ) -> f64 {
        let n = m.order();
        let dense = m.to_dense();
        let mut shifted = -dense;
        for i in 0..n {
            shifted[(i, i)] += lambda;
        }
        let i = domain.lookup_point(x).unwrap();
        let j = domain.lookup_point(x_prime).unwrap();
        let hd = domain.spacing().powi(domain.dim() as i32);
        let mut rhs = nalgebra::DVector::zeros(n);
        rhs[j] = 1.0 / hd;
        let sol = shifted.lu().solve(&rhs).expect("off-pole resolvent is invertible");
        sol[i]
    }

    #[test]
    fn modal_sum_is_symmetric() {
        let g = unit_interval_grid(9);
        let m = assemble_dirichlet_laplacian(&g).unwrap();
        let raw = full_spectrum(&m, true).unwrap();
        let ev = GreenEvaluator::new(&g, &raw, None).unwrap();
        let x = g.point(1);
        let xp = g.point(6);
        let a = ev.eval(&x, &xp, -5.0).unwrap();
        let b = ev.eval(&xp, &x, -5.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn full_modal_sum_matches_dense_resolvent() {
        let g = unit_interval_grid(11);
        let m = assemble_dirichlet_laplacian(&g).unwrap();
        let raw = full_spectrum(&m, true).unwrap();
        let ev = GreenEvaluator::new(&g, &raw, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for &lambda in &[-3.0, -47.5, 12.0] {
            for _ in 0..6 {
                let i = rng.random_range(0..g.len());
                let j = rng.random_range(0..g.len());
                let x = g.point(i);
                let xp = g.point(j);
                let modal = ev.eval(&x, &xp, lambda).unwrap();
                let direct = dense_resolvent(&m, &g, &x, &xp, lambda);
                assert_relative_eq!(modal, direct, max_relative = 1e-8, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn pole_guard_triggers() {
        let g = unit_interval_grid(6);
        let m = assemble_dirichlet_laplacian(&g).unwrap();
        let raw = full_spectrum(&m, true).unwrap();
        let ev = GreenEvaluator::new(&g, &raw, None).unwrap();
        let lambda = ev.eigenvalues()[0] * (1.0 + 1e-9);
        match ev.eval(&g.point(0), &g.point(1), lambda).unwrap_err() {
            Error::PoleProximity { eigenvalue, .. } => {
                assert_relative_eq!(eigenvalue, ev.eigenvalues()[0]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn value_diverges_towards_the_pole() {
        let g = unit_interval_grid(6);
        let m = assemble_dirichlet_laplacian(&g).unwrap();
        let raw = full_spectrum(&m, true).unwrap();
        let ev = GreenEvaluator::new(&g, &raw, None).unwrap();
        let pole = ev.eigenvalues()[0];
        let x = g.point(g.len() / 2);
        let mut last = 0.0;
        for k in 1..=4 {
            let lambda = pole - 10f64.powi(-k) * pole.abs();
            let v = ev.eval(&x, &x, lambda).unwrap().abs();
            assert!(v > last, "not increasing at k = {k}: {v} <= {last}");
            last = v;
        }
    }

    #[test]
    fn truncated_sum_is_monotone_below_the_spectrum() {
        // at coincident points every summand has the same sign once λ sits
        // below the whole spectrum
        let g = unit_interval_grid(10);
        let m = assemble_dirichlet_laplacian(&g).unwrap();
        let raw = full_spectrum(&m, true).unwrap();
        let ev = GreenEvaluator::new(&g, &raw, None).unwrap();
        let lambda = raw.values[0] * 1.5; // below the most negative eigenvalue
        let x = g.point(3);
        let mut prev = 0.0;
        for count in 1..=ev.truncation() {
            let v = ev.eval_truncated(&x, &x, lambda, count).unwrap();
            assert!(v <= prev + 1e-15, "count {count}: {v} > {prev}");
            prev = v;
        }
    }

    #[test]
    fn renormalized_vanishes_across_disjoint_copies() {
        let r = 6;
        let parent = unit_interval_grid(r);
        let mp = assemble_dirichlet_laplacian(&parent).unwrap();
        let raw = full_spectrum(&mp, true).unwrap();
        let ev = GreenEvaluator::new(&parent, &raw, None).unwrap();
        let ifs = presets::cantor();
        // x in the first copy, x' in the second
        let x = [1.0 / 9.0];
        let xp = [8.0 / 9.0];
        let v = green_renormalized(&ev, &ifs, &x, &xp, -7.0).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn renormalized_rejects_points_outside_every_copy() {
        let parent = unit_interval_grid(6);
        let mp = assemble_dirichlet_laplacian(&parent).unwrap();
        let raw = full_spectrum(&mp, true).unwrap();
        let ev = GreenEvaluator::new(&parent, &raw, None).unwrap();
        let ifs = presets::cantor();
        // the middle third is outside both copies
        let err = green_renormalized(&ev, &ifs, &[0.5], &[1.0 / 9.0], -7.0).unwrap_err();
        assert!(matches!(err, Error::OutsideDomain(_)));
    }

    #[test]
    fn renormalized_matches_lifted_modal_sum_on_cantor() {
        // both sides built independently: the renormalized value from the
        // parent evaluator, the modal sum from explicitly lifted modes
        let r = 6;
        let parent = unit_interval_grid(r);
        let mp = assemble_dirichlet_laplacian(&parent).unwrap();
        let parent_raw = full_spectrum(&mp, true).unwrap();
        let parent_ev = GreenEvaluator::new(&parent, &parent_raw, None).unwrap();

        let ifs = presets::cantor();
        let cs = rasterize_prefractal(&ifs, 1, 3).unwrap();
        let child = refine_to_grid(&cs, r).unwrap();
        let hd = child.spacing();

        // lifted modes: parent eigenvector per branch, normalized in the
        // child's discrete L² norm; eigenvalues scale by 1/c² = 9
        let pvec = parent_raw.vectors.as_ref().unwrap();
        let mut lifted_modes: Vec<(f64, Vec<f64>)> = Vec::new();
        for (n, &lambda_p) in parent_raw.values.iter().enumerate() {
            let vals: Vec<f64> = pvec.column(n).iter().copied().collect();
            for branch in 1..=2 {
                let mut lifted = lift_eigenfunction(&parent, &vals, &ifs, branch, &child).unwrap();
                let norm_sq: f64 = lifted.iter().map(|v| v * v).sum::<f64>() * hd;
                let scale = 1.0 / norm_sq.sqrt();
                for v in &mut lifted {
                    *v *= scale;
                }
                lifted_modes.push((9.0 * lambda_p, lifted));
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(59);
        for &lambda in &[-4.0, -31.0, 5.5] {
            for _ in 0..10 {
                let i = rng.random_range(0..child.len());
                let j = rng.random_range(0..child.len());
                let x = child.point(i);
                let xp = child.point(j);
                let renorm = green_renormalized(&parent_ev, &ifs, &x, &xp, lambda).unwrap();
                let modal: f64 = lifted_modes
                    .iter()
                    .map(|(ev, v)| v[i] * v[j] / (lambda - ev))
                    .sum();
                assert_relative_eq!(renorm, modal, max_relative = 1e-8, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn renormalized_matches_lifted_modal_sum_on_interval_system() {
        // same identity as the cantor case, but with touching copies: the
        // renormalized value is the modal sum over the (single-copy) lifted
        // functions with rescaled eigenvalues, for any system
        let r = 5;
        let parent = unit_interval_grid(r);
        let mp = assemble_dirichlet_laplacian(&parent).unwrap();
        let parent_raw = full_spectrum(&mp, true).unwrap();
        let parent_ev = GreenEvaluator::new(&parent, &parent_raw, None).unwrap();

        let ifs = presets::interval();
        let cs = rasterize_prefractal(&ifs, 1, 2).unwrap();
        let child = refine_to_grid(&cs, r).unwrap();
        let hd = child.spacing();

        let pvec = parent_raw.vectors.as_ref().unwrap();
        let mut lifted_modes: Vec<(f64, Vec<f64>)> = Vec::new();
        for (n, &lambda_p) in parent_raw.values.iter().enumerate() {
            let vals: Vec<f64> = pvec.column(n).iter().copied().collect();
            for branch in 1..=2 {
                let mut lifted = lift_eigenfunction(&parent, &vals, &ifs, branch, &child).unwrap();
                let norm_sq: f64 = lifted.iter().map(|v| v * v).sum::<f64>() * hd;
                let scale = 1.0 / norm_sq.sqrt();
                for v in &mut lifted {
                    *v *= scale;
                }
                lifted_modes.push((4.0 * lambda_p, lifted));
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for &lambda in &[-2.0, -19.0] {
            for _ in 0..10 {
                let i = rng.random_range(0..child.len());
                let j = rng.random_range(0..child.len());
                let x = child.point(i);
                let xp = child.point(j);
                let renorm = green_renormalized(&parent_ev, &ifs, &x, &xp, lambda).unwrap();
                let modal: f64 = lifted_modes
                    .iter()
                    .map(|(ev, v)| v[i] * v[j] / (lambda - ev))
                    .sum();
                assert_relative_eq!(renorm, modal, max_relative = 1e-8, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn renormalized_relates_to_classified_part_on_interval_system() {
        // touching copies break the one-copy-per-branch idealization: the
        // child realizes each rescaled parent eigenvalue with multiplicity 1
        // (the odd reflection across the interface), not p. The renormalized
        // sum therefore carries twice the classified diaperiodic part on
        // same-copy pairs and vanishes across copies.
        let r = 5;
        let parent = unit_interval_grid(r);
        let mp = assemble_dirichlet_laplacian(&parent).unwrap();
        let parent_raw = full_spectrum(&mp, true).unwrap();
        let parent_ev = GreenEvaluator::new(&parent, &parent_raw, None).unwrap();

        let ifs = presets::interval();
        let cs = rasterize_prefractal(&ifs, 1, 2).unwrap();
        let child = refine_to_grid(&cs, r).unwrap();
        let mc = assemble_dirichlet_laplacian(&child).unwrap();
        let child_raw = full_spectrum(&mc, true).unwrap();
        let child_ev = GreenEvaluator::new(&child, &child_raw, None).unwrap();

        let parent_spec = Spectrum::from_raw(
            &parent_raw,
            MagnitudeConvention::Wavenumber,
            1e-9,
            Some(0),
            Some(parent.spacing()),
        )
        .unwrap();
        let child_spec = Spectrum::from_raw(
            &child_raw,
            MagnitudeConvention::Wavenumber,
            1e-9,
            Some(1),
            Some(child.spacing()),
        )
        .unwrap();
        let partition = classify_spectrum(&child_spec, &parent_spec, &ifs.ratios(), 1e-6);
        assert!(!partition.diaperiodic.is_empty());

        let mut matched_modes = Vec::new();
        for m in &partition.diaperiodic {
            for (n, &ev) in child_ev.eigenvalues().iter().enumerate() {
                let kappa = (-ev).sqrt();
                if ((kappa - m.magnitude) / m.magnitude).abs() < 1e-9 {
                    matched_modes.push(n);
                }
            }
        }
        matched_modes.sort();
        matched_modes.dedup();

        let lambda = -2.0;
        // same copy: both points left of the interface
        let x = child.point(1);
        let xp = child.point(2);
        let renorm = green_renormalized(&parent_ev, &ifs, &x, &xp, lambda).unwrap();
        let part = child_ev.eval_modes(&x, &xp, lambda, &matched_modes).unwrap();
        assert_relative_eq!(renorm, 2.0 * part, max_relative = 1e-8);
        // across copies: the renormalized sum vanishes, the modal part not
        let far = child.point(child.len() - 2);
        let renorm = green_renormalized(&parent_ev, &ifs, &x, &far, lambda).unwrap();
        assert_eq!(renorm, 0.0);
        let part = child_ev.eval_modes(&x, &far, lambda, &matched_modes).unwrap();
        assert!(part.abs() > 1e-6);
    }

    #[test]
    fn batch_eval_matches_sequential() {
        let g = unit_interval_grid(8);
        let m = assemble_dirichlet_laplacian(&g).unwrap();
        let raw = full_spectrum(&m, true).unwrap();
        let ev = GreenEvaluator::new(&g, &raw, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        let queries: Vec<GreenQuery> = (0..32)
            .map(|_| GreenQuery {
                x: g.point(rng.random_range(0..g.len())),
                x_prime: g.point(rng.random_range(0..g.len())),
                lambda: -rng.random_range(1.0..5.0),
            })
            .collect();
        let a = ev.eval_batch(&queries).unwrap();
        let b = ev.eval_batch_seq(&queries).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_node_points_are_rejected() {
        let g = unit_interval_grid(6);
        let m = assemble_dirichlet_laplacian(&g).unwrap();
        let raw = full_spectrum(&m, true).unwrap();
        let ev = GreenEvaluator::new(&g, &raw, None).unwrap();
        assert!(matches!(
            ev.eval(&[0.1234], &[0.5], -3.0),
            Err(Error::InvalidArgument(_))
        ));
    }
}
