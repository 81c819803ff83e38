//! Lower bounds on mu-conductance from a KKT point of the low-rank program.
//!
//! The dual slack `Z = L - lambda* D - beta* d d^T - Diag(gamma*)` is PSD at
//! an optimum of the SDP. At a low-rank KKT point it may not be, and its most
//! negative eigenvalue `-theta` measures by how much. At an exact KKT point
//! the bound is `(Tr(Y^T L Y) - theta * min{1, (1 - mu) n / (mu Vol)}) / 2`.
//! The solver stops at a tolerance, so the reported bound is the smaller of
//! that value and half the Lagrangian dual value at the same multipliers,
//! which is a valid bound whatever the multipliers are.

use std::io::Write;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::eig::{smallest_eigenpair, EigConfig, SymOperator};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::lrsdp::{alm_solve, AlmConfig, KktSolution, MuProblem, ResidualReport};

/// `Z x = L x - lambda D x - beta d (d^T x) - gamma .* x`.
#[derive(Clone, Debug)]
pub struct DualSlackOperator<'g> {
    graph: &'g Graph,
    lambda: f64,
    beta: f64,
    gamma: Vec<f64>,
}

pub fn dual_slack_operator<'g>(
    graph: &'g Graph,
    lambda: f64,
    beta: f64,
    gamma: &[f64],
) -> Result<DualSlackOperator<'g>> {
    if gamma.len() != graph.num_vertices() {
        return Err(Error::Dimension {
            expected: graph.num_vertices(),
            got: gamma.len(),
        });
    }
    Ok(DualSlackOperator {
        graph,
        lambda,
        beta,
        gamma: gamma.to_vec(),
    })
}

impl DualSlackOperator<'_> {
    /// `d / ||d||`. Every feasible `X` has `X d = 0`, so only the spectrum
    /// of `Z` on the complement of `d` affects the bound; this is the limit
    /// of sending the multiplier of `||Y^T d||^2 = 0` to minus infinity.
    pub fn feasible_deflation(&self) -> Vec<f64> {
        let d = self.graph.degrees();
        let nrm = crate::dense::norm2(d);
        d.iter().map(|v| v / nrm).collect()
    }

    /// `theta` restricted to the complement of `d`.
    pub fn theta(&self, config: &EigConfig) -> Result<Theta> {
        compute_theta(self, config, &[self.feasible_deflation()])
    }
}

impl SymOperator for DualSlackOperator<'_> {
    fn dim(&self) -> usize {
        self.graph.num_vertices()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let d = self.graph.degrees();
        self.graph.laplacian_apply(x, y);
        let dx: f64 = d.iter().zip(x).map(|(a, b)| a * b).sum();
        for i in 0..x.len() {
            y[i] -= self.lambda * d[i] * x[i] + self.beta * d[i] * dx + self.gamma[i] * x[i];
        }
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        let d = self.graph.degrees();
        Some(
            (0..d.len())
                .map(|i| d[i] - self.lambda * d[i] - self.beta * d[i] * d[i] - self.gamma[i])
                .collect(),
        )
    }
}

/// Dual infeasibility estimate from the smallest Ritz pair of `Z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    /// `max(0, -(value - residual))`
    pub theta: f64,
    /// `-min(0, value)`
    pub theta_raw: f64,
    /// Smallest Ritz value.
    pub value: f64,
    pub residual: f64,
    pub converged: bool,
}

/// Smallest Ritz pair of `z` on the orthogonal complement of `deflation`.
pub fn compute_theta<Op: SymOperator>(z: &Op, config: &EigConfig, deflation: &[Vec<f64>]) -> Result<Theta> {
    let r = smallest_eigenpair(z, config, deflation)?;
    Ok(Theta {
        theta: (-(r.value - r.residual_norm)).max(0.0),
        theta_raw: (-r.value).max(0.0),
        value: r.value,
        residual: r.residual_norm,
        converged: r.converged,
    })
}

/// Upper bound on `Tr X` over the feasible set: `min{1, (1 - mu) n / (mu Vol)}`.
/// The `1` stands for `1 / d_min`, so it is replaced by `1 / d_min` when
/// some weighted degree is below one.
pub fn trace_cap(graph: &Graph, mu: f64) -> f64 {
    let n = graph.num_vertices() as f64;
    let d_min = graph.degrees().iter().copied().fold(f64::INFINITY, f64::min);
    ((1.0 - mu) * n / (mu * graph.volume())).min(d_min.recip().max(1.0))
}

/// Wall-clock seconds spent in each stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub alm_seconds: f64,
    pub eig_seconds: f64,
}

/// Lower bound for one `(mu, k)` run.
///
/// Wall times are carried in memory but not serialised, so that result files
/// depend only on the inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifiedBound {
    pub mu: f64,
    pub k: usize,
    pub objective: f64,
    pub theta: f64,
    pub theta_raw: f64,
    pub theta_residual: f64,
    pub trace_cap: f64,
    /// `min(theorem_bound, dual_bound)`
    pub bound: f64,
    /// `(objective - theta * trace_cap) / 2`, exact only at a KKT point.
    pub theorem_bound: f64,
    /// Half the Lagrangian dual value at the reported multipliers,
    /// `(lambda* + cap_hi sum(gamma*) - s_hi sum(max(gamma*, 0)) - theta * trace_cap) / 2`,
    /// or at the multipliers with negative `gamma*` entries set to zero if
    /// that is larger. Valid whether or not the KKT conditions hold.
    pub dual_bound: f64,
    pub certified: bool,
    pub solver_converged: bool,
    pub eig_converged: bool,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub residuals: ResidualReport,
    #[serde(skip)]
    pub timings: Timings,
}

/// Assembles the bound from a solution and its `theta`.
pub fn theorem1_bound(solution: &KktSolution, theta: &Theta, problem: &MuProblem<'_>) -> CertifiedBound {
    let graph = problem.graph();
    let cap = trace_cap(graph, problem.mu());
    let penalty = theta.theta * cap;
    let gamma_sum: f64 = solution.gamma.iter().sum();
    let gamma_pos: f64 = solution.gamma.iter().map(|g| g.max(0.0)).sum();
    let gamma_neg = solution.gamma.iter().fold(0.0_f64, |m, g| m.max(-g));
    let (cap_hi, s_hi) = (problem.cap_hi(), problem.s_hi());
    let kept = solution.lambda + cap_hi * gamma_sum - s_hi * gamma_pos - penalty;
    // Dropping the negative entries of gamma moves Z by at most |gamma^-|
    // in spectrum, and removes the cap_hi * gamma^- terms that dominate
    // when mu is tiny and cap_hi is huge.
    let clipped = solution.lambda + (cap_hi - s_hi) * gamma_pos - (theta.theta + gamma_neg) * cap;
    let theorem = 0.5 * (solution.objective - penalty);
    let dual_bound = 0.5 * kept.max(clipped);
    CertifiedBound {
        mu: solution.mu,
        k: solution.k,
        objective: solution.objective,
        theta: theta.theta,
        theta_raw: theta.theta_raw,
        theta_residual: theta.residual,
        trace_cap: cap,
        bound: theorem.min(dual_bound),
        theorem_bound: theorem,
        dual_bound,
        certified: solution.converged && theta.converged,
        solver_converged: solution.converged,
        eig_converged: theta.converged,
        outer_iterations: solution.outer_iterations,
        inner_iterations: solution.inner_iterations,
        residuals: solution.residuals.clone(),
        timings: Timings::default(),
    }
}

/// Settings for a full bound computation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CertifyConfig {
    pub alm: AlmConfig,
    pub eig: EigConfig,
}

/// Solves the low-rank program for `(mu, k)` and certifies the result.
pub fn certify_mu(
    graph: &Graph,
    mu: f64,
    k: usize,
    config: &CertifyConfig,
) -> Result<(KktSolution, CertifiedBound)> {
    let problem = MuProblem::new(graph, mu, k)?;
    let t0 = Instant::now();
    let solution = alm_solve(&problem, &config.alm)?;
    let alm = t0.elapsed();
    let t1 = Instant::now();
    let z = dual_slack_operator(graph, solution.lambda, solution.beta, &solution.gamma)?;
    let theta = z.theta(&config.eig)?;
    let eig = t1.elapsed();
    let mut bound = theorem1_bound(&solution, &theta, &problem);
    bound.timings = Timings {
        alm_seconds: secs(alm),
        eig_seconds: secs(eig),
    };
    Ok((solution, bound))
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// One `(mu, bound)` point of a lower-bound profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub mu: f64,
    pub bound: f64,
    pub certified: bool,
}

/// Lower bounds made non-decreasing in `mu` by a running maximum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileLowerBound {
    pub points: Vec<BoundPoint>,
    /// The inputs before adjustment.
    pub raw: Vec<BoundPoint>,
}

/// Running maximum over `points`, which must have strictly increasing `mu`.
/// The `certified` flag of each output point is that of the input point the
/// maximum was taken from.
pub fn monotone_envelope(points: &[BoundPoint]) -> Result<ProfileLowerBound> {
    for w in points.windows(2) {
        if !(w[1].mu > w[0].mu) {
            return Err(Error::UnorderedMu {
                prev: w[0].mu,
                next: w[1].mu,
            });
        }
    }
    let mut out = Vec::with_capacity(points.len());
    let mut best: Option<BoundPoint> = None;
    for p in points {
        let b = match best {
            Some(b) if b.bound >= p.bound => b,
            _ => *p,
        };
        best = Some(b);
        out.push(BoundPoint {
            mu: p.mu,
            bound: b.bound,
            certified: b.certified,
        });
    }
    Ok(ProfileLowerBound {
        points: out,
        raw: points.to_vec(),
    })
}

/// Envelope over the best bound per `mu` (taking the largest over ranks),
/// skipping heuristic bounds unless `include_heuristic` is set.
pub fn profile_from_bounds(bounds: &[CertifiedBound], include_heuristic: bool) -> Result<ProfileLowerBound> {
    let mut pts: Vec<BoundPoint> = bounds
        .iter()
        .filter(|b| include_heuristic || b.certified)
        .map(|b| BoundPoint {
            mu: b.mu,
            bound: b.bound,
            certified: b.certified,
        })
        .collect();
    pts.sort_by(|a, b| a.mu.total_cmp(&b.mu).then(b.bound.total_cmp(&a.bound)));
    pts.dedup_by(|later, first| later.mu == first.mu);
    monotone_envelope(&pts)
}

pub const ENVELOPE_CSV_HEADER: &str = "mu,bound,certified";

/// Writes the envelope as CSV, one row per `mu`.
pub fn write_envelope_csv<W: Write>(profile: &ProfileLowerBound, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{ENVELOPE_CSV_HEADER}")?;
    for p in &profile.points {
        writeln!(out, "{:e},{:e},{}", p.mu, p.bound, p.certified)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eig::DiagonalOperator;
    use crate::fixtures::*;
    use crate::oracle::{brute_mu_conductance, dense_eig_reference, dense_laplacian};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(mu: f64, bound: f64) -> BoundPoint {
        BoundPoint { mu, bound, certified: true }
    }

    #[test]
    fn zero_multipliers_give_laplacian() {
        let g = barbell();
        let z = dual_slack_operator(&g, 0.0, 0.0, &[0.0; 8]).unwrap();
        let th = compute_theta(&z, &EigConfig::default(), &[]).unwrap();
        assert!(th.converged);
        assert!(th.value.abs() < 1e-8);
        assert!(th.theta <= 1e-8);
        assert_eq!(th.theta_raw, (-th.value).max(0.0));
    }

    #[test]
    fn explicit_spectrum_theta() {
        let op = DiagonalOperator(vec![1.0, -2.0, 3.0]);
        let th = compute_theta(&op, &EigConfig::default(), &[]).unwrap();
        assert!((th.theta - 2.0).abs() < 1e-10);
        assert!((th.theta_raw - 2.0).abs() < 1e-10);
        assert!(th.theta >= th.theta_raw);
    }

    #[test]
    fn operator_symmetric_and_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for seed in 0..5 {
            let g = random_connected(12 + 4 * seed as usize, 0.3, seed, true);
            let n = g.num_vertices();
            let lambda = rng.random_range(-1.0..1.0);
            let beta = rng.random_range(-1.0..1.0);
            let gamma: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let z = dual_slack_operator(&g, lambda, beta, &gamma).unwrap();
            let d = g.degrees();
            let mut dense = dense_laplacian(&g);
            for i in 0..n {
                for j in 0..n {
                    dense[i][j] -= beta * d[i] * d[j];
                }
                dense[i][i] -= lambda * d[i] + gamma[i];
            }
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut zx = vec![0.0; n];
            let mut zy = vec![0.0; n];
            z.apply(&x, &mut zx);
            z.apply(&y, &mut zy);
            let a: f64 = zx.iter().zip(&y).map(|(p, q)| p * q).sum();
            let b: f64 = zy.iter().zip(&x).map(|(p, q)| p * q).sum();
            assert!((a - b).abs() < 1e-10);
            for i in 0..n {
                let want: f64 = (0..n).map(|j| dense[i][j] * x[j]).sum();
                assert!((zx[i] - want).abs() < 1e-12);
            }
            let diag = z.diagonal().unwrap();
            for i in 0..n {
                assert!((diag[i] - dense[i][i]).abs() < 1e-12);
            }
            let spectrum = dense_eig_reference(&dense).unwrap();
            let th = compute_theta(&z, &EigConfig::default(), &[]).unwrap();
            assert!((th.value - spectrum.values[0]).abs() < 1e-8);
            // on the complement of d the value can only rise
            let th_d = z.theta(&EigConfig::default()).unwrap();
            assert!(th_d.value >= th.value - 1e-8);
        }
    }

    #[test]
    fn bound_arithmetic() {
        // 100 vertices, Vol = 1000: a 10-regular graph
        let edges: Vec<(usize, usize)> = (0..100)
            .flat_map(|i| (1..=5).map(move |j| (i, (i + j) % 100)))
            .collect();
        let g = Graph::from_unweighted(100, edges).unwrap();
        assert_eq!(g.volume(), 1000.0);
        assert!((trace_cap(&g, 0.1) - 0.9).abs() < 1e-15);
        let light = Graph::from_edges(2, [(0, 1, 0.25)]).unwrap();
        assert_eq!(trace_cap(&light, 0.01), 4.0);
        let p = MuProblem::new(&g, 0.1, 1).unwrap();
        let sol = KktSolution::with_multipliers(
            &p,
            crate::dense::DenseMatrix::zeros(100, 1),
            vec![0.0; 100],
            0.0,
            0.0,
            vec![0.0; 100],
            true,
            1,
            1,
            10.0,
        );
        let mut sol = sol;
        sol.objective = 0.01;
        let th = |t: f64| Theta {
            theta: t,
            theta_raw: t,
            value: -t,
            residual: 0.0,
            converged: true,
        };
        let b = theorem1_bound(&sol, &th(0.0), &p);
        assert!((b.theorem_bound - 0.005).abs() < 1e-15);
        let b = theorem1_bound(&sol, &th(0.002), &p);
        assert!((b.theorem_bound - 0.5 * (0.01 - 0.9 * 0.002)).abs() < 1e-15);
        assert!(b.theorem_bound <= b.objective / 2.0);
        // zero multipliers: the dual value is the theta term alone
        assert!((b.dual_bound + 0.5 * 0.9 * 0.002).abs() < 1e-15);
        assert_eq!(b.bound, b.dual_bound);
        let mut unconverged = sol.clone();
        unconverged.converged = false;
        assert!(!theorem1_bound(&unconverged, &th(0.0), &p).certified);
        let mut eig_fail = th(0.0);
        eig_fail.converged = false;
        assert!(!theorem1_bound(&sol, &eig_fail, &p).certified);
    }

    #[test]
    fn envelope_running_max() {
        let e = monotone_envelope(&[pt(0.01, 0.5), pt(0.1, 0.3)]).unwrap();
        assert_eq!(e.points, vec![pt(0.01, 0.5), pt(0.1, 0.5)]);
        let mono = [pt(0.01, 0.1), pt(0.1, 0.2), pt(0.3, 0.2)];
        assert_eq!(monotone_envelope(&mono).unwrap().points, mono.to_vec());
        assert_eq!(monotone_envelope(&[pt(0.2, -1.0)]).unwrap().points, vec![pt(0.2, -1.0)]);
        assert!(monotone_envelope(&[pt(0.1, 0.0), pt(0.1, 0.1)]).is_err());
        assert!(monotone_envelope(&[pt(0.2, 0.0), pt(0.1, 0.1)]).is_err());
    }

    #[test]
    fn heuristic_bounds_excluded_by_default() {
        let g = complete(4);
        let cfg = CertifyConfig::default();
        let (_, good) = certify_mu(&g, 0.25, 1, &cfg).unwrap();
        let mut bad = good.clone();
        bad.mu = 0.5;
        bad.bound = 100.0;
        bad.certified = false;
        let p = profile_from_bounds(&[good.clone(), bad.clone()], false).unwrap();
        assert_eq!(p.points.len(), 1);
        let p = profile_from_bounds(&[good, bad], true).unwrap();
        assert_eq!(p.points[1].bound, 100.0);
        assert!(!p.points[1].certified);
    }

    #[test]
    fn k4_bisection_bound() {
        let g = complete(4);
        let (sol, b) = certify_mu(&g, 0.5, 3, &CertifyConfig::default()).unwrap();
        assert!(b.certified);
        assert!(sol.s.iter().all(|&v| v == 0.0));
        let phi = brute_mu_conductance(&g, 0.5).unwrap().phi_mu;
        assert!(b.bound <= phi + 1e-9, "{} vs {phi}", b.bound);
        assert!(b.dual_bound <= phi + 1e-9);
        assert!(b.bound > phi - 1e-3);
    }

    #[test]
    fn tiny_mu_reaches_spectral_bound() {
        let g = barbell();
        let (_, b) = certify_mu(&g, 1e-6, 1, &CertifyConfig::default()).unwrap();
        let l2 = crate::eig::lambda2(&g, &EigConfig::default()).unwrap();
        assert!(b.certified);
        assert!(b.bound <= l2 / 2.0 + 1e-9);
        assert!(b.bound >= l2 / 2.0 - 1e-5, "{} vs {}", b.bound, l2 / 2.0);
    }

    #[test]
    fn bound_chain_on_barbell() {
        let g = barbell();
        for mu in [0.1, 0.3, 0.45] {
            let (_, b) = certify_mu(&g, mu, 3, &CertifyConfig::default()).unwrap();
            let brute = brute_mu_conductance(&g, mu).unwrap();
            let psi = crate::graph::psi_vector(&g, &brute.argmin_set).unwrap();
            let psi_l_psi = g.quadratic_form(&psi).unwrap();
            assert!(b.bound <= b.objective / 2.0);
            assert!(b.objective / 2.0 <= psi_l_psi / 2.0 + 1e-7);
            assert!(psi_l_psi / 2.0 <= brute.phi_mu + 1e-12);
            assert!(b.theta >= b.theta_raw);
        }
    }

    #[test]
    fn envelope_csv_layout() {
        let e = monotone_envelope(&[pt(0.01, 0.5), pt(0.5, 0.25)]).unwrap();
        let mut buf = Vec::new();
        write_envelope_csv(&e, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], ENVELOPE_CSV_HEADER);
        assert_eq!(lines[2], "5e-1,5e-1,true");
    }
}
