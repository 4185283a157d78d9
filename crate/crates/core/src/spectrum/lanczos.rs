//! Lanczos iteration with full reorthogonalization for the smallest-magnitude
//! eigenpairs of a negative semidefinite sparse matrix.
//!
//! The smallest magnitudes sit at the upper (least negative) end of the
//! spectrum, an extreme end, where Lanczos converges well. Degenerate
//! eigenvalues cannot be resolved from a single Krylov sequence, so converged
//! pairs are deflated and the iteration restarts with a fresh seeded vector
//! until the requested count is reached.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{RawSpectrum, SparseSymMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct LanczosOptions {
    /// Krylov subspace cap per sweep; 0 picks `max(2k + 32, 64)`.
    pub max_subspace: usize,
    /// Restart budget across deflation sweeps.
    pub max_restarts: usize,
    /// Relative residual target per eigenpair.
    pub tol: f64,
    /// Seed for the start vectors; fixed by default so runs are repeatable.
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { max_subspace: 0, max_restarts: 80, tol: 1e-10, seed: 7 }
    }
}

/// `k` smallest-magnitude eigenpairs with default options, values sorted by
/// ascending `|λ|`, eigenvectors as columns.
pub fn partial_spectrum(m: &SparseSymMatrix, k: usize) -> Result<RawSpectrum> {
    partial_spectrum_with(m, k, &LanczosOptions::default())
}

pub fn partial_spectrum_with(
    m: &SparseSymMatrix,
    k: usize,
    opts: &LanczosOptions,
) -> Result<RawSpectrum> {
    let n = m.order();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "requested count must satisfy 1 <= k < order, got k = {k}, order = {n}"
        )));
    }
    let subspace_cap = if opts.max_subspace == 0 {
        (2 * k + 32).max(64)
    } else {
        opts.max_subspace
    };
    let norm = m.norm_inf().max(1.0);
    let breakdown = 1e-13 * norm;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut converged_values: Vec<f64> = Vec::new();
    let mut converged_vectors: Vec<Vec<f64>> = Vec::new();
    let mut sweeps = 0usize;
    let mut fruitless = 0usize;
    let mut total_iters = 0usize;
    let mut worst_residual = f64::INFINITY;

    // Sweeps continue past the first k harvested pairs: a sweep whose
    // smallest converged value already sits at or above the current k-th
    // smallest confirms that no undiscovered eigenvalue (e.g. a second copy
    // of a degenerate one) still belongs in the answer.
    loop {
        if converged_values.len() >= n {
            break;
        }
        sweeps += 1;
        if sweeps > opts.max_restarts || fruitless >= 3 {
            return Err(Error::Convergence { iterations: total_iters, residual: worst_residual });
        }
        let remaining = n - converged_vectors.len();
        let steps = subspace_cap.min(remaining);

        // seeded start vector, orthogonal to everything already converged
        let mut q0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        orthogonalize(&mut q0, &converged_vectors);
        orthogonalize(&mut q0, &converged_vectors);
        let nq = norm2(&q0);
        if nq < 1e-12 {
            fruitless += 1;
            continue;
        }
        scale(&mut q0, 1.0 / nq);

        let mut basis: Vec<Vec<f64>> = vec![q0];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut final_beta = 0.0;

        for j in 0..steps {
            let mut w = m.matvec(&basis[j]);
            total_iters += 1;
            orthogonalize(&mut w, &converged_vectors);
            let alpha = dot(&basis[j], &w);
            axpy(&mut w, -alpha, &basis[j]);
            if j > 0 {
                let beta_prev = betas[j - 1];
                let prev = basis[j - 1].clone();
                axpy(&mut w, -beta_prev, &prev);
            }
            // full reorthogonalization, twice for floating-point hygiene
            orthogonalize(&mut w, &basis);
            orthogonalize(&mut w, &basis);
            orthogonalize(&mut w, &converged_vectors);
            alphas.push(alpha);
            let beta = norm2(&w);
            if beta <= breakdown {
                // exact invariant subspace: every Ritz pair is converged
                final_beta = 0.0;
                break;
            }
            if j + 1 == steps {
                final_beta = beta;
                break;
            }
            betas.push(beta);
            scale(&mut w, 1.0 / beta);
            basis.push(w);
        }

        let s = alphas.len();
        if s == 0 {
            fruitless += 1;
            continue;
        }
        let mut tri = DMatrix::zeros(s, s);
        for i in 0..s {
            tri[(i, i)] = alphas[i];
            if i + 1 < s {
                tri[(i, i + 1)] = betas[i];
                tri[(i + 1, i)] = betas[i];
            }
        }
        let eig = nalgebra::SymmetricEigen::new(tri);

        // Ritz pairs sorted by ascending magnitude
        let mut order: Vec<usize> = (0..s).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[a].abs().partial_cmp(&eig.eigenvalues[b].abs()).expect("finite")
        });

        let mut harvested = 0usize;
        let mut sweep_min = f64::INFINITY;
        for &i in &order {
            if harvested >= k {
                break;
            }
            let theta = eig.eigenvalues[i];
            let est = (final_beta * eig.eigenvectors[(s - 1, i)]).abs();
            if est > opts.tol * theta.abs().max(1.0) {
                worst_residual = worst_residual.min(est / theta.abs().max(1.0));
                break; // only a converged prefix is trustworthy
            }
            // lift the Ritz vector and verify the true residual
            let mut y = vec![0.0; n];
            for (j, q) in basis.iter().enumerate().take(s) {
                axpy(&mut y, eig.eigenvectors[(j, i)], q);
            }
            orthogonalize(&mut y, &converged_vectors);
            let ny = norm2(&y);
            if ny < 1e-10 {
                continue;
            }
            scale(&mut y, 1.0 / ny);
            let ay = m.matvec(&y);
            let res: f64 = ay
                .iter()
                .zip(&y)
                .map(|(a, x)| (a - theta * x) * (a - theta * x))
                .sum::<f64>()
                .sqrt();
            if res > 100.0 * opts.tol * theta.abs().max(1.0) {
                worst_residual = worst_residual.min(res / theta.abs().max(1.0));
                break;
            }
            converged_values.push(theta);
            converged_vectors.push(y);
            sweep_min = sweep_min.min(theta.abs());
            harvested += 1;
        }
        if harvested == 0 {
            fruitless += 1;
            continue;
        }
        fruitless = 0;
        if converged_values.len() >= k {
            let mut mags: Vec<f64> = converged_values.iter().map(|v| v.abs()).collect();
            mags.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            let kth = mags[k - 1];
            if sweep_min >= kth * (1.0 - 1e-12) {
                break;
            }
        }
    }

    // sort the harvest by ascending magnitude
    let mut order: Vec<usize> = (0..converged_values.len()).collect();
    order.sort_by(|&a, &b| {
        converged_values[a].abs().partial_cmp(&converged_values[b].abs()).expect("finite")
    });
    order.truncate(k);
    let values: Vec<f64> = order.iter().map(|&i| converged_values[i]).collect();
    let mut vectors = DMatrix::zeros(n, k);
    for (col, &i) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, col)] = converged_vectors[i][r];
        }
    }
    Ok(RawSpectrum { values, vectors: Some(vectors) })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn scale(a: &mut [f64], s: f64) {
    for x in a {
        *x *= s;
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(v, b);
        if c != 0.0 {
            axpy(v, -c, b);
        }
    }
}
