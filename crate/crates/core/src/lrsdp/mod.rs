//! Rank-`k` factorised relaxation of mu-conductance:
//!
//! ```text
//! minimise    Tr(Y^T L Y)
//! subject to  Tr(Y^T D Y) = 1                         (e)
//!             ||Y^T d||^2 = 0                         (f)
//!             Diag(Y Y^T) + s = cap_hi * 1            (g)
//!             0 <= s <= s_hi                          (h), (i)
//! ```
//!
//! with `cap_hi = (1 - mu) / (mu Vol(G))` and
//! `s_hi = (1 - 2 mu) / (mu (1 - mu) Vol(G))`. The equalities are handled by
//! an augmented Lagrangian; the box on `s` is kept exactly by the inner
//! bound-constrained quasi-Newton solver. `Y Y^T` is never formed.

pub mod lbfgsb;

use serde::{Deserialize, Serialize};

use crate::dense::{dot, norm_inf, DenseMatrix};
use crate::eig::{smallest_k_nonzero_generalized, EigConfig};
use crate::error::{Error, Result};
use crate::graph::Graph;

use lbfgsb::{LbfgsbOptions, LbfgsbReport, LbfgsbStatus};

/// One instance of the program: a graph, a volume fraction `mu` and a rank.
#[derive(Clone, Copy, Debug)]
pub struct MuProblem<'g> {
    graph: &'g Graph,
    mu: f64,
    k: usize,
    cap_hi: f64,
    s_hi: f64,
}

impl<'g> MuProblem<'g> {
    pub fn new(graph: &'g Graph, mu: f64, k: usize) -> Result<Self> {
        if !(mu > 0.0 && mu <= 0.5) {
            return Err(Error::Validation(format!("mu = {mu} must lie in (0, 1/2]")));
        }
        if k == 0 {
            return Err(Error::Validation("rank k must be at least 1".into()));
        }
        if graph.num_vertices() < 2 {
            return Err(Error::Validation("need at least two vertices".into()));
        }
        if let Some(v) = graph.degrees().iter().position(|&d| d <= 0.0) {
            return Err(Error::Validation(format!(
                "vertex {v} is isolated; extract the largest connected component first (--lcc)"
            )));
        }
        let vol = graph.volume();
        Ok(Self {
            graph,
            mu,
            k,
            cap_hi: (1.0 - mu) / (mu * vol),
            s_hi: (1.0 - 2.0 * mu) / (mu * (1.0 - mu) * vol),
        })
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Right-hand side of constraint (g).
    pub fn cap_hi(&self) -> f64 {
        self.cap_hi
    }

    /// Upper end of the slack box; zero exactly when `mu = 1/2`.
    pub fn s_hi(&self) -> f64 {
        self.s_hi
    }

    fn n(&self) -> usize {
        self.graph.num_vertices()
    }

    fn check_state(&self, state: &LrsdpState) -> Result<()> {
        let n = self.n();
        for (expected, got) in [
            (n, state.y.rows()),
            (self.k, state.y.cols()),
            (n, state.s.len()),
            (n, state.gamma.len()),
        ] {
            if expected != got {
                return Err(Error::Dimension { expected, got });
            }
        }
        Ok(())
    }
}

/// Primal iterate plus multiplier estimates and penalty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrsdpState {
    pub y: DenseMatrix,
    pub s: Vec<f64>,
    pub lambda: f64,
    pub beta: f64,
    pub gamma: Vec<f64>,
    pub sigma: f64,
}

/// Constraint residuals at a primal point.
#[derive(Clone, Debug, PartialEq)]
pub struct Residuals {
    /// `Tr(Y^T D Y) - 1`
    pub c_e: f64,
    /// `||Y^T d||^2`
    pub c_f: f64,
    /// `Diag(Y Y^T) + s - cap_hi`
    pub c_g: Vec<f64>,
    /// `Y^T d`
    pub ytd: Vec<f64>,
}

impl Residuals {
    pub fn max_abs(&self) -> f64 {
        self.c_e.abs().max(self.c_f.abs()).max(norm_inf(&self.c_g))
    }
}

pub fn residuals(problem: &MuProblem<'_>, y: &DenseMatrix, s: &[f64]) -> Residuals {
    let d = problem.graph.degrees();
    let rows = y.row_norms_sq();
    let c_e = rows.iter().zip(d).map(|(r, di)| r * di).sum::<f64>() - 1.0;
    let ytd = y.transpose_times(d);
    let c_f = dot(&ytd, &ytd);
    let c_g = rows
        .iter()
        .zip(s)
        .map(|(r, si)| r + si - problem.cap_hi)
        .collect();
    Residuals { c_e, c_f, c_g, ytd }
}

/// Evaluates the augmented Lagrangian and, when buffers are given, its
/// gradient, reusing `ly` as scratch for `L Y`.
fn evaluate(
    problem: &MuProblem<'_>,
    state: &LrsdpState,
    ly: &mut DenseMatrix,
    grad: Option<(&mut DenseMatrix, &mut [f64])>,
) -> f64 {
    let g = problem.graph;
    let d = g.degrees();
    let y = &state.y;
    let sigma = state.sigma;
    g.laplacian_apply_block(y, ly);
    let objective = dot(ly.as_slice(), y.as_slice());
    let r = residuals(problem, y, &state.s);
    let value = objective
        - state.lambda * r.c_e
        - state.beta * r.c_f
        - dot(&state.gamma, &r.c_g)
        + 0.5 * sigma * (r.c_e * r.c_e + r.c_f * r.c_f + dot(&r.c_g, &r.c_g));

    if let Some((gy, gs)) = grad {
        let coef_d = state.lambda - sigma * r.c_e;
        let coef_f = state.beta - sigma * r.c_f;
        let k = y.cols();
        for i in 0..g.num_vertices() {
            let coef_g = state.gamma[i] - sigma * r.c_g[i];
            let yi = y.row(i);
            let li = ly.row(i);
            let out = gy.row_mut(i);
            for c in 0..k {
                out[c] = 2.0 * li[c]
                    - 2.0 * coef_d * d[i] * yi[c]
                    - 2.0 * coef_f * d[i] * r.ytd[c]
                    - 2.0 * coef_g * yi[c];
            }
            gs[i] = -coef_g;
        }
    }
    value
}

/// `L_A(Y, s; lambda, beta, gamma, sigma)`.
pub fn augmented_lagrangian(state: &LrsdpState, problem: &MuProblem<'_>) -> Result<f64> {
    problem.check_state(state)?;
    let mut ly = DenseMatrix::zeros(state.y.rows(), state.y.cols());
    Ok(evaluate(problem, state, &mut ly, None))
}

/// Gradients of `L_A` with respect to `Y` and `s`.
pub fn augmented_lagrangian_gradient(
    state: &LrsdpState,
    problem: &MuProblem<'_>,
) -> Result<(DenseMatrix, Vec<f64>)> {
    problem.check_state(state)?;
    let (n, k) = (state.y.rows(), state.y.cols());
    let mut ly = DenseMatrix::zeros(n, k);
    let mut gy = DenseMatrix::zeros(n, k);
    let mut gs = vec![0.0; n];
    evaluate(problem, state, &mut ly, Some((&mut gy, &mut gs)));
    Ok((gy, gs))
}

/// `Tr(Y^T L Y)`.
pub fn objective(graph: &Graph, y: &DenseMatrix) -> f64 {
    let mut ly = DenseMatrix::zeros(y.rows(), y.cols());
    graph.laplacian_apply_block(y, &mut ly);
    dot(ly.as_slice(), y.as_slice())
}

/// Outer-loop settings. Serialises to the JSON config file format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlmConfig {
    pub sigma0: f64,
    pub sigma_growth: f64,
    pub sigma_max: f64,
    pub tol_stat: f64,
    pub tol_feas: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub lbfgs_memory: usize,
    /// Projected-gradient tolerance of the first inner solve.
    pub inner_tol0: f64,
    /// Keep `Y^T d = 0` exactly instead of only through the penalty on
    /// `||Y^T d||^2`, whose gradient vanishes at feasibility.
    pub project_degree: bool,
    /// Seed of the eigensolver start vectors used for initialisation.
    pub seed: u64,
}

impl Default for AlmConfig {
    fn default() -> Self {
        Self {
            sigma0: 10.0,
            sigma_growth: 10.0,
            sigma_max: 1e12,
            tol_stat: 1e-5,
            tol_feas: 1e-5,
            max_outer: 100,
            max_inner: 20_000,
            lbfgs_memory: 3,
            inner_tol0: 1e-3,
            project_degree: true,
            seed: 0x5eed,
        }
    }
}

impl AlmConfig {
    pub fn eig_config(&self) -> EigConfig {
        EigConfig {
            seed: self.seed,
            ..EigConfig::default()
        }
    }
}

/// Starting point from the `k` smallest nonzero normalized-Laplacian
/// eigenvectors, scaled so that `Tr(Y^T D Y) = 1`.
pub fn initialize(problem: &MuProblem<'_>, config: &AlmConfig) -> Result<LrsdpState> {
    let n = problem.n();
    let k = problem.k;
    let eig = smallest_k_nonzero_generalized(problem.graph, k, &config.eig_config())?;
    let scale = 1.0 / (k as f64).sqrt();
    let mut y = eig.vectors;
    y.as_mut_slice().iter_mut().for_each(|v| *v *= scale);
    let s = y
        .row_norms_sq()
        .iter()
        .map(|r| (problem.cap_hi - r).clamp(0.0, problem.s_hi))
        .collect();
    Ok(LrsdpState {
        y,
        s,
        lambda: 0.0,
        beta: 0.0,
        gamma: vec![0.0; n],
        sigma: config.sigma0,
    })
}

/// Result of one inner minimisation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerReport {
    pub status: LbfgsbStatus,
    pub iterations: usize,
    pub evaluations: usize,
    pub pg_norm_inf: f64,
    /// `L_A` after each accepted step when tracing is on.
    pub trace: Vec<f64>,
}

impl From<LbfgsbReport> for InnerReport {
    fn from(r: LbfgsbReport) -> Self {
        Self {
            status: r.status,
            iterations: r.iterations,
            evaluations: r.evaluations,
            pg_norm_inf: r.pg_norm_inf,
            trace: r.trace,
        }
    }
}

/// Minimises `L_A` over free `Y` and boxed `s`, holding multipliers and the
/// penalty fixed.
///
/// With `project` set, `Y` is restricted to the subspace `Y^T d = 0`: each
/// evaluation uses `P Y` with `P = I - d d^T / ||d||^2` and the `Y`-gradient
/// is projected the same way, so constraint (f) holds to rounding error.
pub fn inner_solve(
    state: LrsdpState,
    problem: &MuProblem<'_>,
    inner_tol: f64,
    max_iter: usize,
    memory: usize,
    trace: bool,
    project: bool,
) -> Result<(LrsdpState, InnerReport)> {
    problem.check_state(&state)?;
    let n = problem.n();
    let k = problem.k;
    let ny = n * k;
    let mut x: Vec<f64> = state.y.as_slice().to_vec();
    x.extend_from_slice(&state.s);
    let mut lower = vec![f64::NEG_INFINITY; ny];
    lower.extend(std::iter::repeat_n(0.0, n));
    let mut upper = vec![f64::INFINITY; ny];
    upper.extend(std::iter::repeat_n(problem.s_hi, n));

    let mut work = state;
    let mut ly = DenseMatrix::zeros(n, k);
    let mut gy = DenseMatrix::zeros(n, k);
    let mut gs = vec![0.0; n];
    let d = problem.graph.degrees();
    let fg = |x: &[f64], g: &mut [f64]| -> f64 {
        work.y.as_mut_slice().copy_from_slice(&x[..ny]);
        if project {
            project_out(&mut work.y, d);
        }
        work.s.copy_from_slice(&x[ny..]);
        let f = evaluate(problem, &work, &mut ly, Some((&mut gy, &mut gs)));
        if project {
            project_out(&mut gy, d);
        }
        g[..ny].copy_from_slice(gy.as_slice());
        g[ny..].copy_from_slice(&gs);
        f
    };
    let opts = LbfgsbOptions {
        memory,
        pg_tol: inner_tol,
        max_iter,
        trace,
        ..Default::default()
    };
    let report = lbfgsb::minimize(fg, &mut x, &lower, &upper, &opts);
    work.y.as_mut_slice().copy_from_slice(&x[..ny]);
    if project {
        project_out(&mut work.y, d);
    }
    work.s.copy_from_slice(&x[ny..]);
    Ok((work, report.into()))
}

/// Removes the `d` component of every column: `Y <- (I - d d^T / ||d||^2) Y`.
pub fn project_out(y: &mut DenseMatrix, d: &[f64]) {
    let dd = dot(d, d);
    let coef: Vec<f64> = y.transpose_times(d).iter().map(|c| c / dd).collect();
    for i in 0..y.rows() {
        let di = d[i];
        for (v, c) in y.row_mut(i).iter_mut().zip(&coef) {
            *v -= c * di;
        }
    }
}

/// Residuals and optimality measures recomputed from a converged point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// `||P (L - lambda* D - beta* d d^T - Diag(gamma*)) Y||_F` with `P` the
    /// projector onto the complement of `d`. Components along `d` pair with
    /// `Y^T d = 0` and drop out of `Tr(Y^T Z Y)`; the `beta*` term lies
    /// entirely along `d`.
    pub stationarity: f64,
    /// Infinity norm of the projected `s`-gradient, `-gamma*` off the bounds.
    pub stationarity_s: f64,
    pub c_e: f64,
    pub c_f: f64,
    pub c_g_inf: f64,
    /// `g*^T s`
    pub comp_lower: f64,
    /// `l*^T (s_hi - s)`
    pub comp_upper: f64,
    pub y_frobenius: f64,
}

impl ResidualReport {
    pub fn max_feasibility(&self) -> f64 {
        self.c_e.abs().max(self.c_f.abs()).max(self.c_g_inf)
    }
}

/// A primal-dual point of the low-rank program.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktSolution {
    pub mu: f64,
    pub k: usize,
    pub y: DenseMatrix,
    pub s: Vec<f64>,
    pub lambda: f64,
    pub beta: f64,
    pub gamma: Vec<f64>,
    /// Multiplier of `s >= 0`.
    pub g_box: Vec<f64>,
    /// Multiplier of `s <= s_hi`.
    pub l_box: Vec<f64>,
    pub objective: f64,
    pub residuals: ResidualReport,
    pub converged: bool,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub sigma: f64,
}

/// `(L - lambda D - beta d d^T - Diag(gamma)) Y`.
pub fn dual_slack_times(
    graph: &Graph,
    lambda: f64,
    beta: f64,
    gamma: &[f64],
    y: &DenseMatrix,
) -> DenseMatrix {
    let d = graph.degrees();
    let mut out = DenseMatrix::zeros(y.rows(), y.cols());
    graph.laplacian_apply_block(y, &mut out);
    let ytd = y.transpose_times(d);
    for i in 0..y.rows() {
        let yi = y.row(i).to_vec();
        let row = out.row_mut(i);
        for c in 0..yi.len() {
            row[c] -= lambda * d[i] * yi[c] + beta * d[i] * ytd[c] + gamma[i] * yi[c];
        }
    }
    out
}

impl KktSolution {
    /// Builds the solution from an iterate, turning the current multipliers
    /// into first-order estimates `lambda - sigma c_e` etc.
    pub fn from_state(
        problem: &MuProblem<'_>,
        state: &LrsdpState,
        converged: bool,
        outer_iterations: usize,
        inner_iterations: usize,
    ) -> Self {
        let r = residuals(problem, &state.y, &state.s);
        let sigma = state.sigma;
        let lambda = state.lambda - sigma * r.c_e;
        let beta = state.beta - sigma * r.c_f;
        let gamma: Vec<f64> = state
            .gamma
            .iter()
            .zip(&r.c_g)
            .map(|(g, c)| g - sigma * c)
            .collect();
        Self::with_multipliers(
            problem,
            state.y.clone(),
            state.s.clone(),
            lambda,
            beta,
            gamma,
            converged,
            outer_iterations,
            inner_iterations,
            sigma,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_multipliers(
        problem: &MuProblem<'_>,
        y: DenseMatrix,
        s: Vec<f64>,
        lambda: f64,
        beta: f64,
        gamma: Vec<f64>,
        converged: bool,
        outer_iterations: usize,
        inner_iterations: usize,
        sigma: f64,
    ) -> Self {
        let s_hi = problem.s_hi;
        let r = residuals(problem, &y, &s);
        let n = s.len();
        let mut g_box = vec![0.0; n];
        let mut l_box = vec![0.0; n];
        let mut stationarity_s = 0.0_f64;
        for i in 0..n {
            let at_lo = s[i] <= 0.0;
            let at_hi = s[i] >= s_hi;
            if at_lo {
                g_box[i] = (-gamma[i]).max(0.0);
            }
            if at_hi {
                l_box[i] = gamma[i].max(0.0);
            }
            // d L_A / d s_i = -gamma*_i; zero it where the bound absorbs it
            let gs = -gamma[i];
            let pg = if at_lo && gs > 0.0 || at_hi && gs < 0.0 {
                0.0
            } else {
                gs
            };
            stationarity_s = stationarity_s.max(pg.abs());
        }
        let mut zy = dual_slack_times(problem.graph, lambda, beta, &gamma, &y);
        project_out(&mut zy, problem.graph.degrees());
        let residuals = ResidualReport {
            stationarity: zy.frobenius_norm(),
            stationarity_s,
            c_e: r.c_e,
            c_f: r.c_f,
            c_g_inf: norm_inf(&r.c_g),
            comp_lower: dot(&g_box, &s),
            comp_upper: l_box.iter().zip(&s).map(|(l, si)| l * (s_hi - si)).sum(),
            y_frobenius: y.frobenius_norm(),
        };
        Self {
            mu: problem.mu,
            k: problem.k,
            objective: objective(problem.graph, &y),
            y,
            s,
            lambda,
            beta,
            gamma,
            g_box,
            l_box,
            residuals,
            converged,
            outer_iterations,
            inner_iterations,
            sigma,
        }
    }

    /// Stationarity and feasibility both within tolerance.
    pub fn meets(&self, tol_stat: f64, tol_feas: f64) -> bool {
        let r = &self.residuals;
        r.max_feasibility() <= tol_feas
            && r.stationarity <= tol_stat * (1.0 + r.y_frobenius)
            && r.stationarity_s <= tol_stat
    }
}

/// Augmented Lagrangian outer loop.
///
/// After each inner solve the multipliers are updated when the constraint
/// violation fell to a quarter of the last accepted value (or below
/// `tol_feas`), tightening the inner tolerance; otherwise the penalty grows.
pub fn alm_solve(problem: &MuProblem<'_>, config: &AlmConfig) -> Result<KktSolution> {
    let state = initialize(problem, config)?;
    alm_solve_from(problem, config, state)
}

/// [`alm_solve`] from a given starting state.
pub fn alm_solve_from(
    problem: &MuProblem<'_>,
    config: &AlmConfig,
    mut state: LrsdpState,
) -> Result<KktSolution> {
    problem.check_state(&state)?;
    let inner_floor = config.tol_stat * 1e-3;
    let mut inner_tol = config.inner_tol0.max(inner_floor);
    let mut last_feas = f64::INFINITY;
    let mut inner_total = 0;

    for outer in 1..=config.max_outer {
        let (next, report) = inner_solve(
            state,
            problem,
            inner_tol,
            config.max_inner,
            config.lbfgs_memory,
            false,
            config.project_degree,
        )?;
        state = next;
        inner_total += report.iterations;

        let candidate = KktSolution::from_state(problem, &state, true, outer, inner_total);
        let feas = candidate.residuals.max_feasibility();
        log::debug!(
            "mu={} outer={outer} sigma={:.1e} feas={feas:.3e} stat={:.3e} inner={} {:?}",
            problem.mu,
            state.sigma,
            candidate.residuals.stationarity,
            report.iterations,
            report.status
        );
        if candidate.meets(config.tol_stat, config.tol_feas) {
            return Ok(candidate);
        }
        if feas <= (0.25 * last_feas).max(config.tol_feas) {
            state.lambda = candidate.lambda;
            state.beta = candidate.beta;
            state.gamma = candidate.gamma;
            last_feas = feas;
            inner_tol = (inner_tol / 10.0).max(inner_floor);
        } else if state.sigma < config.sigma_max {
            state.sigma = (state.sigma * config.sigma_growth).min(config.sigma_max);
        } else {
            inner_tol = (inner_tol / 10.0).max(inner_floor);
        }
    }
    Ok(KktSolution::from_state(
        problem,
        &state,
        false,
        config.max_outer,
        inner_total,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::*;
    use crate::oracle::brute_mu_conductance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(problem: &MuProblem<'_>, rng: &mut ChaCha8Rng) -> LrsdpState {
        let n = problem.n();
        let k = problem.k;
        let scale = 1.0 / problem.graph.volume().sqrt();
        let y = DenseMatrix::from_row_major(
            n,
            k,
            (0..n * k).map(|_| rng.random_range(-1.0..1.0) * scale).collect(),
        )
        .unwrap();
        LrsdpState {
            y,
            s: (0..n).map(|_| rng.random_range(0.0..=1.0) * problem.s_hi).collect(),
            lambda: rng.random_range(-1.0..1.0),
            beta: rng.random_range(-1.0..1.0),
            gamma: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            sigma: rng.random_range(1.0..100.0),
        }
    }

    /// Straight transcription of the displayed formula, entrywise.
    fn transcribed(problem: &MuProblem<'_>, st: &LrsdpState) -> f64 {
        let g = problem.graph;
        let n = g.num_vertices();
        let k = problem.k;
        let d = g.degrees();
        let mut tr_l = 0.0;
        for (u, v, w) in g.edges() {
            for c in 0..k {
                tr_l += w * (st.y.get(u, c) - st.y.get(v, c)).powi(2);
            }
        }
        let mut tr_d = 0.0;
        for i in 0..n {
            for c in 0..k {
                tr_d += d[i] * st.y.get(i, c).powi(2);
            }
        }
        let mut dyyd = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut yy = 0.0;
                for c in 0..k {
                    yy += st.y.get(i, c) * st.y.get(j, c);
                }
                dyyd += d[i] * yy * d[j];
            }
        }
        let cap = (1.0 - problem.mu) / problem.mu / g.volume();
        let mut lin_g = 0.0;
        let mut sq_g = 0.0;
        for i in 0..n {
            let mut yy = 0.0;
            for c in 0..k {
                yy += st.y.get(i, c).powi(2);
            }
            let u = yy + st.s[i] - cap;
            lin_g += st.gamma[i] * u;
            sq_g += u * u;
        }
        tr_l - st.lambda * (tr_d - 1.0) - st.beta * dyyd - lin_g
            + st.sigma / 2.0 * ((tr_d - 1.0).powi(2) + dyyd.powi(2) + sq_g)
    }

    #[test]
    fn problem_constants() {
        let g = complete(4);
        let p = MuProblem::new(&g, 0.5, 1).unwrap();
        assert_eq!(p.s_hi(), 0.0);
        assert!((p.cap_hi() - 1.0 / 12.0).abs() < 1e-15);
        let p = MuProblem::new(&g, 0.1, 2).unwrap();
        assert!((p.cap_hi() - 0.9 / 1.2).abs() < 1e-14);
        assert!((p.s_hi() - 0.8 / (0.09 * 12.0)).abs() < 1e-14);
        assert!(MuProblem::new(&g, 0.0, 1).is_err());
        assert!(MuProblem::new(&g, 0.51, 1).is_err());
        assert!(MuProblem::new(&g, 0.2, 0).is_err());
    }

    #[test]
    fn zero_state_value() {
        let g = barbell();
        let p = MuProblem::new(&g, 0.2, 2).unwrap();
        let st = LrsdpState {
            y: DenseMatrix::zeros(8, 2),
            s: vec![0.0; 8],
            lambda: 0.0,
            beta: 0.0,
            gamma: vec![0.0; 8],
            sigma: 2.0,
        };
        let want = 1.0 + 8.0 * p.cap_hi().powi(2);
        assert!((augmented_lagrangian(&st, &p).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn matches_transcription() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for seed in 0..10 {
            let g = random_connected(6 + seed as usize, 0.3, seed, seed % 2 == 0);
            let p = MuProblem::new(&g, 0.05 + 0.04 * seed as f64, 1 + seed as usize % 3).unwrap();
            let st = random_state(&p, &mut rng);
            let a = augmented_lagrangian(&st, &p).unwrap();
            let b = transcribed(&p, &st);
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn gradient_without_multipliers_or_penalty() {
        let g = complete(5);
        let p = MuProblem::new(&g, 0.5, 1).unwrap();
        let mut st = initialize(&p, &AlmConfig::default()).unwrap();
        st.sigma = 0.0;
        let (gy, gs) = augmented_lagrangian_gradient(&st, &p).unwrap();
        let mut ly = DenseMatrix::zeros(5, 1);
        g.laplacian_apply_block(&st.y, &mut ly);
        for i in 0..5 {
            assert!((gy.get(i, 0) - 2.0 * ly.get(i, 0)).abs() < 1e-14);
            assert_eq!(gs[i], 0.0);
        }
    }

    #[test]
    fn beta_term_vanishes_when_orthogonal_to_degrees() {
        let g = barbell();
        let p = MuProblem::new(&g, 0.3, 2).unwrap();
        let mut st = initialize(&p, &AlmConfig::default()).unwrap();
        let base = augmented_lagrangian_gradient(&st, &p).unwrap();
        st.beta = 123.0;
        let shifted = augmented_lagrangian_gradient(&st, &p).unwrap();
        for (a, b) in base.0.as_slice().iter().zip(shifted.0.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn finite_difference_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..20 {
            let n = 5 + trial % 16;
            let k = 1 + trial % 3;
            let g = random_connected(n, 0.3, 100 + trial as u64, trial % 2 == 0);
            let p = MuProblem::new(&g, 0.1 + 0.02 * (trial % 10) as f64, k).unwrap();
            let st = random_state(&p, &mut rng);
            let (gy, gs) = augmented_lagrangian_gradient(&st, &p).unwrap();
            let dir_y: Vec<f64> = (0..n * k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let dir_s: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h = 1e-6;
            let shifted = |t: f64| {
                let mut s2 = st.clone();
                for (v, dv) in s2.y.as_mut_slice().iter_mut().zip(&dir_y) {
                    *v += t * dv;
                }
                for (v, dv) in s2.s.iter_mut().zip(&dir_s) {
                    *v += t * dv;
                }
                augmented_lagrangian(&s2, &p).unwrap()
            };
            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            let an = dot(gy.as_slice(), &dir_y) + dot(&gs, &dir_s);
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "trial {trial}: {fd} vs {an}");
        }
    }

    #[test]
    fn initialization_properties() {
        let g = random_connected(20, 0.2, 9, true);
        for k in [1, 3, 5] {
            let p = MuProblem::new(&g, 0.1, k).unwrap();
            let st = initialize(&p, &AlmConfig::default()).unwrap();
            let r = residuals(&p, &st.y, &st.s);
            assert!(r.c_e.abs() < 1e-10);
            assert!(norm_inf(&r.ytd) <= 1e-8 * crate::dense::norm2(g.degrees()));
            assert!(st.s.iter().all(|&v| (0.0..=p.s_hi()).contains(&v)));
        }
        let p = MuProblem::new(&g, 0.1, 1).unwrap();
        let st = initialize(&p, &AlmConfig::default()).unwrap();
        let fiedler = smallest_k_nonzero_generalized(&g, 1, &EigConfig::default()).unwrap();
        assert_eq!(st.y.column(0), fiedler.vectors.column(0));
    }

    #[test]
    fn inner_solve_returns_at_stationary_point() {
        let g = complete(4);
        let p = MuProblem::new(&g, 0.5, 1).unwrap();
        let sol = alm_solve(&p, &AlmConfig::default()).unwrap();
        assert!(sol.converged);
        let st = LrsdpState {
            y: sol.y.clone(),
            s: sol.s.clone(),
            lambda: sol.lambda,
            beta: sol.beta,
            gamma: sol.gamma.clone(),
            sigma: 0.0,
        };
        let (mut gy, _) = augmented_lagrangian_gradient(&st, &p).unwrap();
        project_out(&mut gy, g.degrees());
        let tol = norm_inf(gy.as_slice()) * 1.01 + 1e-15;
        let (_, report) = inner_solve(st, &p, tol, 100, 3, false, true).unwrap();
        assert_eq!(report.iterations, 0);
    }

    #[test]
    fn inner_trace_is_monotone() {
        let synth = crate::graphgen::generate_core_periphery(&crate::graphgen::SynthConfig {
            n: 85,
            seed: 2,
            ..Default::default()
        })
        .unwrap();
        let g = &synth.graph;
        let p = MuProblem::new(g, 0.25, 5).unwrap();
        let st = initialize(&p, &AlmConfig::default()).unwrap();
        let (_, report) = inner_solve(st, &p, 1e-8, 200, 3, true, true).unwrap();
        assert!(report.trace.len() > 2);
        for w in report.trace.windows(2) {
            assert!(w[1] <= w[0], "{} then {}", w[0], w[1]);
        }
    }

    #[test]
    fn half_mu_fixes_slack_at_zero() {
        let g = barbell();
        let p = MuProblem::new(&g, 0.5, 2).unwrap();
        let st = initialize(&p, &AlmConfig::default()).unwrap();
        let (out, _) = inner_solve(st, &p, 1e-8, 200, 3, false, true).unwrap();
        assert!(out.s.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bisection_structure_on_k4() {
        let g = complete(4);
        let p = MuProblem::new(&g, 0.5, 3).unwrap();
        let sol = alm_solve(&p, &AlmConfig::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.s.iter().all(|&v| v == 0.0));
        for r in sol.y.row_norms_sq() {
            assert!((r - 1.0 / 12.0).abs() < 1e-6);
        }
        let phi = brute_mu_conductance(&g, 0.5).unwrap().phi_mu;
        assert!(sol.objective / 2.0 <= phi + 1e-5);
    }

    #[test]
    fn spectral_limit_small_mu() {
        let g = barbell();
        let p = MuProblem::new(&g, 1e-6, 1).unwrap();
        let sol = alm_solve(&p, &AlmConfig::default()).unwrap();
        let l2 = crate::eig::lambda2(&g, &EigConfig::default()).unwrap();
        assert!(sol.converged);
        assert!((sol.objective - l2).abs() < 1e-6, "{} vs {l2}", sol.objective);
    }

    #[test]
    fn barbell_relaxation_below_bisection() {
        let g = barbell();
        let p = MuProblem::new(&g, 0.4, 3).unwrap();
        let sol = alm_solve(&p, &AlmConfig::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.objective / 2.0 <= 1.0 / 13.0 + 1e-9);
    }

    #[test]
    fn kkt_invariants_at_convergence() {
        for seed in 0..6 {
            let g = random_connected(10 + seed as usize, 0.25, 40 + seed, seed % 2 == 1);
            for mu in [0.05, 0.2, 0.45] {
                let cfg = AlmConfig::default();
                let p = MuProblem::new(&g, mu, 2).unwrap();
                let sol = alm_solve(&p, &cfg).unwrap();
                assert!(sol.converged, "seed {seed} mu {mu}");
                let r = &sol.residuals;
                assert!(r.c_e.abs() <= cfg.tol_feas);
                assert!(r.c_f >= 0.0 && r.c_f <= cfg.tol_feas);
                assert!(r.c_g_inf <= cfg.tol_feas);
                assert!(sol.s.iter().all(|&v| v >= 0.0 && v <= p.s_hi()));
                assert!(r.stationarity <= cfg.tol_stat * (1.0 + r.y_frobenius));
                let g1: f64 = sol.g_box.iter().sum();
                let l1: f64 = sol.l_box.iter().sum();
                assert!(r.comp_lower <= 10.0 * cfg.tol_feas * g1 * p.s_hi() + 1e-15);
                assert!(r.comp_upper <= 10.0 * cfg.tol_feas * l1 * p.s_hi() + 1e-15);
                // report is a pure function of the point
                let again = KktSolution::with_multipliers(
                    &p, sol.y.clone(), sol.s.clone(), sol.lambda, sol.beta, sol.gamma.clone(),
                    true, 0, 0, sol.sigma,
                );
                assert_eq!(again.residuals, sol.residuals);
            }
        }
    }

    #[test]
    fn deterministic_runs() {
        let g = random_connected(15, 0.2, 77, true);
        let p = MuProblem::new(&g, 0.2, 3).unwrap();
        let a = alm_solve(&p, &AlmConfig::default()).unwrap();
        let b = alm_solve(&p, &AlmConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = AlmConfig {
            sigma0: 3.0,
            seed: 9,
            ..Default::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: AlmConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let partial: AlmConfig = serde_json::from_str(r#"{"tol_stat": 1e-7}"#).unwrap();
        assert_eq!(partial.tol_stat, 1e-7);
        assert_eq!(partial.sigma0, 10.0);
    }
}
