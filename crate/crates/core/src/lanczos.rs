//! Lanczos iteration with full reorthogonalization for the low end of a symmetric spectrum.
//!
//! When the Krylov space closes (an invariant subspace is found) the iteration restarts
//! from a fresh random vector orthogonal to every previous Lanczos vector, so degenerate
//! eigenvalues show up with their full multiplicity once the whole space is exhausted.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    /// Upper bound on Lanczos vectors; the dimension caps it as well.
    pub max_iter: usize,
    /// Relative breakdown threshold for the residual norm.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            max_iter: 400,
            tolerance: 1e-12,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpairs {
    /// Ascending.
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for v in basis {
            let c = dot(v, w);
            axpy(-c, v, w);
        }
    }
}

fn random_unit<R: Rng>(dim: usize, rng: &mut R, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    for _ in 0..8 {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
        orthogonalize(&mut v, basis);
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            return Some(v);
        }
    }
    None
}

/// The `k` lowest eigenpairs of the symmetric operator applied by `matvec(x, y)`, which
/// must overwrite `y` with `A x`.
pub fn lowest_eigenpairs<F>(dim: usize, k: usize, matvec: F, options: &LanczosOptions) -> Result<Eigenpairs>
where
    F: Fn(&[f64], &mut [f64]),
{
    if dim == 0 {
        return Err(Error::InvalidParameter("empty operator".into()));
    }
    let steps = options.max_iter.min(dim).max(1);
    let mut rng = stream_rng(options.seed, 0);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut alphas = Vec::with_capacity(steps);
    let mut betas: Vec<f64> = Vec::with_capacity(steps);
    let mut v = random_unit(dim, &mut rng, &basis).expect("nonempty space");
    let mut w = vec![0.0; dim];
    let mut scale = 0.0f64;
    loop {
        matvec(&v, &mut w);
        let alpha = dot(&v, &w);
        axpy(-alpha, &v, &mut w);
        if let (Some(prev), Some(&beta)) = (basis.last(), betas.last()) {
            axpy(-beta, prev, &mut w);
        }
        basis.push(v.clone());
        alphas.push(alpha);
        orthogonalize(&mut w, &basis);
        let beta = dot(&w, &w).sqrt();
        scale = scale.max(alpha.abs()).max(beta);
        if basis.len() == steps {
            break;
        }
        if beta <= options.tolerance * scale.max(1.0) {
            match random_unit(dim, &mut rng, &basis) {
                Some(fresh) => {
                    betas.push(0.0);
                    v = fresh;
                }
                None => break,
            }
        } else {
            betas.push(beta);
            v = w.iter().map(|x| x / beta).collect();
        }
    }
    let m = alphas.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        t[(j, j)] = alphas[j];
        if j + 1 < m {
            t[(j, j + 1)] = betas[j];
            t[(j + 1, j)] = betas[j];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let take = k.min(m);
    let mut values = Vec::with_capacity(take);
    let mut vectors = Vec::with_capacity(take);
    for &j in order.iter().take(take) {
        values.push(eig.eigenvalues[j]);
        let mut x = vec![0.0; dim];
        for (q, vq) in basis.iter().enumerate() {
            axpy(eig.eigenvectors[(q, j)], vq, &mut x);
        }
        let norm = dot(&x, &x).sqrt();
        x.iter_mut().for_each(|e| *e /= norm);
        vectors.push(x);
    }
    Ok(Eigenpairs { values, vectors })
}
