//! Extreme eigenpairs of sparse symmetric operators.
//!
//! The solver is a thick-restarted Lanczos iteration. Every new Krylov vector
//! is fully reorthogonalised (two classical Gram-Schmidt passes) against the
//! deflation vectors and the current basis, and the Ritz pairs are extracted
//! from the explicit projection `V^T A V`. On restart the smallest Ritz vectors
//! are kept and the iteration continues from the residual direction of the
//! best one.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dense::{axpy, dot, norm2, DenseMatrix};
use crate::error::{Error, Result};
use crate::graph::Graph;

/// A symmetric linear operator available only through products.
pub trait SymOperator {
    fn dim(&self) -> usize;

    /// `y = Op x`
    fn apply(&self, x: &[f64], y: &mut [f64]);

    fn diagonal(&self) -> Option<Vec<f64>> {
        None
    }
}

impl<T: SymOperator + ?Sized> SymOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }
    fn diagonal(&self) -> Option<Vec<f64>> {
        (**self).diagonal()
    }
}

/// `diag(values)` as an operator.
#[derive(Clone, Debug)]
pub struct DiagonalOperator(pub Vec<f64>);

impl SymOperator for DiagonalOperator {
    fn dim(&self) -> usize {
        self.0.len()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, xi), di) in y.iter_mut().zip(x).zip(&self.0) {
            *yi = di * xi;
        }
    }
    fn diagonal(&self) -> Option<Vec<f64>> {
        Some(self.0.clone())
    }
}

/// The combinatorial Laplacian `L = D - A`.
#[derive(Clone, Copy, Debug)]
pub struct LaplacianOperator<'a>(pub &'a Graph);

impl SymOperator for LaplacianOperator<'_> {
    fn dim(&self) -> usize {
        self.0.num_vertices()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.0.laplacian_apply(x, y)
    }
    fn diagonal(&self) -> Option<Vec<f64>> {
        Some(self.0.degrees().to_vec())
    }
}

/// `N = D^{-1/2} L D^{-1/2} = I - D^{-1/2} A D^{-1/2}`.
#[derive(Clone, Debug)]
pub struct NormalizedLaplacian<'a> {
    graph: &'a Graph,
    inv_sqrt_d: Vec<f64>,
}

impl<'a> NormalizedLaplacian<'a> {
    pub fn new(graph: &'a Graph) -> Result<Self> {
        if let Some(v) = graph.degrees().iter().position(|&d| d <= 0.0) {
            return Err(Error::Validation(format!(
                "vertex {v} has zero degree; extract the largest connected component first (--lcc)"
            )));
        }
        let inv_sqrt_d = graph.degrees().iter().map(|d| 1.0 / d.sqrt()).collect();
        Ok(Self { graph, inv_sqrt_d })
    }

    /// Unit-norm null vector `d^{1/2} / ||d^{1/2}||`.
    pub fn null_vector(&self) -> Vec<f64> {
        let scale = 1.0 / self.graph.volume().sqrt();
        self.graph.degrees().iter().map(|d| d.sqrt() * scale).collect()
    }
}

impl SymOperator for NormalizedLaplacian<'_> {
    fn dim(&self) -> usize {
        self.graph.num_vertices()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let s = &self.inv_sqrt_d;
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, w) in self.graph.neighbors(i) {
                acc += w * s[j] * x[j];
            }
            *yi = x[i] - s[i] * acc;
        }
    }
    fn diagonal(&self) -> Option<Vec<f64>> {
        Some(vec![1.0; self.dim()])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EigConfig {
    /// Convergence threshold on `||Op v - value v||_2`.
    pub tol: f64,
    /// Matvec budget; `None` means `10 n` capped at 5000.
    pub max_iter: Option<usize>,
    pub seed: u64,
    /// Largest Krylov basis held before a restart.
    pub basis_size: usize,
}

impl Default for EigConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: None,
            seed: 0x5eed,
            basis_size: 96,
        }
    }
}

impl EigConfig {
    fn budget(&self, n: usize) -> usize {
        self.max_iter.unwrap_or_else(|| (10 * n).min(5000))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigResult {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Removes the components of `x` along every vector of the orthonormal
/// `blocks`, with two full Gram-Schmidt passes.
fn orthogonalize(x: &mut [f64], blocks: &[&[Vec<f64>]]) {
    for _ in 0..2 {
        for q in blocks.iter().flat_map(|b| b.iter()) {
            let c = dot(q, x);
            axpy(-c, q, x);
        }
    }
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng, against: &[&[Vec<f64>]]) -> Option<Vec<f64>> {
    for _ in 0..4 {
        let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        orthogonalize(&mut x, against);
        let nrm = norm2(&x);
        if nrm > 1e-8 {
            x.iter_mut().for_each(|v| *v /= nrm);
            return Some(x);
        }
    }
    None
}

/// Smallest algebraic eigenpair of `op` restricted to the orthogonal
/// complement of `deflation` (which must be orthonormal).
///
/// The reported residual is that of the projected operator
/// `P Op P`, with `P` the projector onto the complement. Non-convergence is
/// reported through `converged = false`, not as an error.
pub fn smallest_eigenpair<Op: SymOperator>(
    op: &Op,
    config: &EigConfig,
    deflation: &[Vec<f64>],
) -> Result<EigResult> {
    let n = op.dim();
    if n < 2 {
        return Err(Error::Validation("eigensolver needs dimension >= 2".into()));
    }
    if let Some(q) = deflation.iter().find(|q| q.len() != n) {
        return Err(Error::Dimension {
            expected: n,
            got: q.len(),
        });
    }
    if deflation.len() >= n {
        return Err(Error::Validation("deflation leaves an empty subspace".into()));
    }
    let n_eff = n - deflation.len();
    let max_basis = config.basis_size.max(4).min(n_eff);
    let keep = (max_basis / 3).max(1);
    let budget = config.budget(n).max(max_basis);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let start = random_unit(n, &mut rng, &[deflation])
        .ok_or_else(|| Error::Validation("could not draw a start vector".into()))?;

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_basis);
    let mut images: Vec<Vec<f64>> = Vec::with_capacity(max_basis);
    let mut matvecs = 0usize;

    let push = |v: Vec<f64>,
                    basis: &mut Vec<Vec<f64>>,
                    images: &mut Vec<Vec<f64>>,
                    matvecs: &mut usize| {
        let mut w = vec![0.0; n];
        op.apply(&v, &mut w);
        *matvecs += 1;
        basis.push(v);
        images.push(w);
    };
    push(start, &mut basis, &mut images, &mut matvecs);
    let mut source = images[0].clone();

    loop {
        // expand the Krylov basis
        while basis.len() < max_basis && matvecs < budget {
            let mut v = source.clone();
            orthogonalize(&mut v, &[deflation, &basis]);
            let nrm = norm2(&v);
            let scale = norm2(&source).max(1.0);
            let v = if nrm > 1e-8 * scale {
                v.into_iter().map(|x| x / nrm).collect()
            } else {
                // invariant subspace reached; continue with a fresh direction
                match random_unit(n, &mut rng, &[deflation, &basis]) {
                    Some(v) => v,
                    None => break,
                }
            };
            push(v, &mut basis, &mut images, &mut matvecs);
            source = images.last().expect("nonempty").clone();
        }

        let m = basis.len();
        let h = DMatrix::from_fn(m, m, |i, j| {
            0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i]))
        });
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

        let combine = |vs: &[Vec<f64>], col: usize| -> Vec<f64> {
            let mut out = vec![0.0; n];
            for (i, v) in vs.iter().enumerate() {
                axpy(eig.eigenvectors[(i, col)], v, &mut out);
            }
            out
        };
        let best = order[0];
        let mut x = combine(&basis, best);
        let xn = norm2(&x);
        x.iter_mut().for_each(|v| *v /= xn);
        let (value, residual_norm, ox) = ritz_residual(op, &x, deflation);
        let exhausted = m >= n_eff;
        if residual_norm <= config.tol || matvecs >= budget || exhausted {
            let converged = residual_norm <= config.tol;
            return Ok(EigResult {
                value,
                vector: x,
                residual_norm,
                iterations: matvecs,
                converged,
            });
        }

        // thick restart on the `keep` smallest Ritz vectors
        let kept: Vec<usize> = order.iter().copied().take(keep.min(m - 1).max(1)).collect();
        let new_basis: Vec<Vec<f64>> = kept.iter().map(|&c| combine(&basis, c)).collect();
        let new_images: Vec<Vec<f64>> = kept.iter().map(|&c| combine(&images, c)).collect();
        basis = new_basis;
        images = new_images;
        // re-orthonormalise the kept block to wash out drift
        let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(basis.len());
        let mut ortho_img: Vec<Vec<f64>> = Vec::with_capacity(basis.len());
        for (v, w) in basis.into_iter().zip(images) {
            let mut v = v;
            orthogonalize(&mut v, &[deflation, &ortho]);
            let nrm = norm2(&v);
            if nrm < 1e-8 {
                continue;
            }
            v.iter_mut().for_each(|x| *x /= nrm);
            let mut w2 = vec![0.0; n];
            if (nrm - 1.0).abs() > 1e-10 {
                op.apply(&v, &mut w2);
                matvecs += 1;
            } else {
                w2 = w;
            }
            ortho.push(v);
            ortho_img.push(w2);
        }
        basis = ortho;
        images = ortho_img;
        source = ox;
    }
}

/// Rayleigh quotient, projected residual norm and `Op x` for a unit vector.
fn ritz_residual<Op: SymOperator>(op: &Op, x: &[f64], deflation: &[Vec<f64>]) -> (f64, f64, Vec<f64>) {
    let mut ox = vec![0.0; x.len()];
    op.apply(x, &mut ox);
    let value = dot(x, &ox);
    let mut r = ox.clone();
    axpy(-value, x, &mut r);
    orthogonalize(&mut r, &[deflation]);
    (value, norm2(&r), ox)
}

/// `||Op v - value v||_2` restricted to the complement of `deflation`.
pub fn residual_norm<Op: SymOperator>(op: &Op, value: f64, v: &[f64], deflation: &[Vec<f64>]) -> f64 {
    let mut r = vec![0.0; v.len()];
    op.apply(v, &mut r);
    axpy(-value, v, &mut r);
    orthogonalize(&mut r, &[deflation]);
    norm2(&r)
}

/// The `k` smallest nonzero generalized eigenpairs of `L x = lambda D x`.
#[derive(Clone, Debug)]
pub struct GeneralizedEigs {
    pub values: Vec<f64>,
    /// Columns are `D`-orthonormal and orthogonal to `d`.
    pub vectors: DenseMatrix,
    pub matvecs: usize,
}

/// Solves for the `k` smallest nonzero generalized eigenpairs of the graph by
/// deflating the normalized Laplacian one vector at a time, then mapping
/// back with `x = D^{-1/2} v`.
pub fn smallest_k_nonzero_generalized(
    graph: &Graph,
    k: usize,
    config: &EigConfig,
) -> Result<GeneralizedEigs> {
    let n = graph.num_vertices();
    if n < 2 {
        return Err(Error::Validation("need at least two vertices".into()));
    }
    if k == 0 || k >= n {
        return Err(Error::Validation(format!("rank k = {k} must lie in [1, {})", n)));
    }
    let op = NormalizedLaplacian::new(graph)?;
    let mut deflation = vec![op.null_vector()];
    let mut values = Vec::with_capacity(k);
    let mut columns = Vec::with_capacity(k);
    let mut matvecs = 0;
    for i in 0..k {
        let cfg = EigConfig {
            seed: config.seed.wrapping_add(i as u64),
            ..config.clone()
        };
        let res = smallest_eigenpair(&op, &cfg, &deflation)?;
        matvecs += res.iterations;
        if i == 0 && res.value < 1e-10 {
            return Err(Error::Disconnected { value: res.value });
        }
        if !res.converged {
            return Err(Error::EigNotConverged {
                residual: res.residual_norm,
                iterations: res.iterations,
            });
        }
        values.push(res.value);
        columns.push(
            res.vector
                .iter()
                .zip(&op.inv_sqrt_d)
                .map(|(v, s)| v * s)
                .collect::<Vec<_>>(),
        );
        deflation.push(res.vector);
    }
    Ok(GeneralizedEigs {
        values,
        vectors: DenseMatrix::from_columns(&columns)?,
        matvecs,
    })
}

/// Second smallest generalized eigenvalue `lambda_2` of `L x = lambda D x`.
pub fn lambda2(graph: &Graph, config: &EigConfig) -> Result<f64> {
    Ok(smallest_k_nonzero_generalized(graph, 1, config)?.values[0])
}

/// `lambda_2 / 2`, the spectral lower bound on the minimum conductance.
pub fn lambda2_lower_bound_point(graph: &Graph, config: &EigConfig) -> Result<f64> {
    Ok(lambda2(graph, config)? / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::*;
    use crate::oracle::{dense_eig_reference, dense_normalized_laplacian};
    use std::f64::consts::PI;

    #[test]
    fn diagonal_spectrum() {
        let op = DiagonalOperator(vec![1.0, -2.0, 3.0]);
        let r = smallest_eigenpair(&op, &EigConfig::default(), &[]).unwrap();
        assert!(r.converged);
        assert!((r.value + 2.0).abs() < 1e-12);
        assert!(r.residual_norm < 1e-12);
        assert!(r.vector[1].abs() > 1.0 - 1e-12);
    }

    #[test]
    fn laplacian_null_vector() {
        let g = barbell();
        let r = smallest_eigenpair(&LaplacianOperator(&g), &EigConfig::default(), &[]).unwrap();
        assert!(r.converged);
        assert!(r.value.abs() < 1e-9);
        let c = r.vector[0];
        assert!(r.vector.iter().all(|v| (v - c).abs() < 1e-8));
    }

    #[test]
    fn cycle_with_deflation() {
        let g = cycle(4);
        let op = NormalizedLaplacian::new(&g).unwrap();
        let r = smallest_eigenpair(&op, &EigConfig::default(), &[op.null_vector()]).unwrap();
        assert!((r.value - (1.0 - (2.0 * PI / 4.0).cos())).abs() < 1e-10);
    }

    #[test]
    fn generalized_closed_forms() {
        let cfg = EigConfig::default();
        let k4 = smallest_k_nonzero_generalized(&complete(4), 1, &cfg).unwrap();
        assert!((k4.values[0] - 4.0 / 3.0).abs() < 1e-10);
        let k2 = smallest_k_nonzero_generalized(&path(2), 1, &cfg).unwrap();
        assert!((k2.values[0] - 2.0).abs() < 1e-10);
        let c4 = smallest_k_nonzero_generalized(&cycle(4), 2, &cfg).unwrap();
        assert!((c4.values[0] - 1.0).abs() < 1e-10);
        assert!((c4.values[1] - 1.0).abs() < 1e-10);
        for n in [6, 8] {
            let l2 = lambda2(&cycle(n), &cfg).unwrap();
            assert!((l2 - (1.0 - (2.0 * PI / n as f64).cos())).abs() < 1e-10);
        }
    }

    #[test]
    fn generalized_vectors_are_d_orthonormal() {
        let g = random_connected(30, 0.15, 7, true);
        let res = smallest_k_nonzero_generalized(&g, 4, &EigConfig::default()).unwrap();
        let d = g.degrees();
        let dn = norm2(d);
        for a in 0..4 {
            let xa = res.vectors.column(a);
            assert!(dot(&xa, d).abs() <= 1e-8 * dn);
            for b in 0..4 {
                let xb = res.vectors.column(b);
                let ip: f64 = (0..30).map(|i| xa[i] * d[i] * xb[i]).sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((ip - expect).abs() < 1e-8, "{a} {b} {ip}");
            }
        }
        assert!(res.values.windows(2).all(|w| w[0] <= w[1] + 1e-10));
    }

    #[test]
    fn disconnected_graph_detected() {
        let g = Graph::from_unweighted(4, [(0, 1), (2, 3)]).unwrap();
        assert!(matches!(
            smallest_k_nonzero_generalized(&g, 1, &EigConfig::default()),
            Err(Error::Disconnected { .. })
        ));
        let iso = Graph::from_unweighted(3, [(0, 1)]).unwrap();
        assert!(NormalizedLaplacian::new(&iso).is_err());
    }

    #[test]
    fn bad_rank_rejected() {
        let g = complete(4);
        assert!(smallest_k_nonzero_generalized(&g, 0, &EigConfig::default()).is_err());
        assert!(smallest_k_nonzero_generalized(&g, 4, &EigConfig::default()).is_err());
    }

    #[test]
    fn lambda2_bound_examples() {
        let cfg = EigConfig::default();
        assert!((lambda2_lower_bound_point(&complete(4), &cfg).unwrap() - 2.0 / 3.0).abs() < 1e-10);
        let p3 = path(3);
        let dense = dense_eig_reference(&dense_normalized_laplacian(&p3)).unwrap();
        assert!((lambda2_lower_bound_point(&p3, &cfg).unwrap() - dense.values[1] / 2.0).abs() < 1e-10);
    }

    #[test]
    fn matches_dense_reference_small_graphs() {
        for seed in 0..12u64 {
            let n = 5 + (seed as usize * 5) % 60;
            let g = random_connected(n, 0.1, seed, seed % 3 == 0);
            let dense = dense_eig_reference(&dense_normalized_laplacian(&g)).unwrap();
            let got = smallest_k_nonzero_generalized(&g, 3.min(n - 1), &EigConfig::default()).unwrap();
            for (i, v) in got.values.iter().enumerate() {
                assert!((v - dense.values[i + 1]).abs() < 1e-10, "n={n} i={i}");
            }
            // Ritz value never undershoots the true minimum by more than its residual
            let lap = LaplacianOperator(&g);
            let r = smallest_eigenpair(&lap, &EigConfig { tol: 1e-3, ..Default::default() }, &[]).unwrap();
            assert!(r.value >= -r.residual_norm - 1e-12);
            let recomputed = residual_norm(&lap, r.value, &r.vector, &[]);
            assert!((recomputed - r.residual_norm).abs() < 1e-12);
        }
    }

    #[test]
    fn restarts_converge_on_larger_operator() {
        let g = random_connected(400, 0.01, 3, false);
        let cfg = EigConfig {
            basis_size: 30,
            ..Default::default()
        };
        let small = smallest_k_nonzero_generalized(&g, 1, &cfg).unwrap();
        let big = smallest_k_nonzero_generalized(&g, 1, &EigConfig { basis_size: 400, ..Default::default() }).unwrap();
        assert!((small.values[0] - big.values[0]).abs() < 1e-9);
    }
}
