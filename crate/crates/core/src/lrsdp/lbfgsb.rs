//! Limited-memory BFGS with simple bounds.
//!
//! Each iteration fixes the variables that sit on a bound with the gradient
//! pushing outward, builds the two-loop quasi-Newton direction on the
//! remaining free variables, and runs a projected backtracking search along
//! `P(x + alpha d)` with an Armijo test on the projected step.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::dense::{dot, norm2};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbfgsbOptions {
    /// Number of correction pairs kept.
    pub memory: usize,
    /// Stop when the projected gradient infinity norm drops to this.
    pub pg_tol: f64,
    pub max_iter: usize,
    pub max_backtracks: usize,
    /// Sufficient-decrease constant.
    pub armijo: f64,
    /// Record the objective after every accepted step.
    pub trace: bool,
}

impl Default for LbfgsbOptions {
    fn default() -> Self {
        Self {
            memory: 3,
            pg_tol: 1e-5,
            max_iter: 20_000,
            max_backtracks: 50,
            armijo: 1e-4,
            trace: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LbfgsbStatus {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbfgsbReport {
    pub status: LbfgsbStatus,
    pub f: f64,
    pub pg_norm_inf: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub trace: Vec<f64>,
}

/// Infinity norm of the projected gradient.
pub fn projected_gradient_norm(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    let mut m = 0.0_f64;
    for i in 0..x.len() {
        let gi = if x[i] <= lower[i] && g[i] > 0.0 || x[i] >= upper[i] && g[i] < 0.0 {
            0.0
        } else {
            g[i]
        };
        m = m.max(gi.abs());
    }
    m
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// Minimises `f` over the box `[lower, upper]` starting from `x`, which is
/// overwritten with the final iterate. `fg(x, g)` returns `f(x)` and writes
/// the gradient into `g`.
pub fn minimize<F>(
    mut fg: F,
    x: &mut [f64],
    lower: &[f64],
    upper: &[f64],
    opts: &LbfgsbOptions,
) -> LbfgsbReport
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x.len();
    for i in 0..n {
        x[i] = x[i].clamp(lower[i], upper[i]);
    }
    let mut g = vec![0.0; n];
    let mut f = fg(x, &mut g);
    let mut evaluations = 1;
    let mut memory: VecDeque<Pair> = VecDeque::with_capacity(opts.memory);
    let mut trace = Vec::new();
    if opts.trace {
        trace.push(f);
    }

    let mut d = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut alpha_buf = vec![0.0; opts.memory.max(1)];

    let mut iterations = 0;
    let status = loop {
        let pg = projected_gradient_norm(x, &g, lower, upper);
        if pg <= opts.pg_tol {
            break LbfgsbStatus::Converged;
        }
        if iterations >= opts.max_iter {
            break LbfgsbStatus::MaxIterations;
        }
        iterations += 1;

        let active: Vec<bool> = (0..n)
            .map(|i| x[i] <= lower[i] && g[i] > 0.0 || x[i] >= upper[i] && g[i] < 0.0)
            .collect();

        // two-loop recursion on the free variables
        for i in 0..n {
            d[i] = if active[i] { 0.0 } else { g[i] };
        }
        for (j, p) in memory.iter().enumerate().rev() {
            let a = p.rho * dot(&p.s, &d);
            alpha_buf[j] = a;
            for i in 0..n {
                d[i] -= a * p.y[i];
            }
        }
        if let Some(p) = memory.back() {
            let scale = dot(&p.s, &p.y) / dot(&p.y, &p.y);
            d.iter_mut().for_each(|v| *v *= scale);
        }
        for (j, p) in memory.iter().enumerate() {
            let b = p.rho * dot(&p.y, &d);
            let a = alpha_buf[j];
            for i in 0..n {
                d[i] += (a - b) * p.s[i];
            }
        }
        for i in 0..n {
            d[i] = if active[i] { 0.0 } else { -d[i] };
        }
        let gd = dot(&g, &d);
        if !(gd < -1e-12 * norm2(&g) * norm2(&d)) {
            memory.clear();
            for i in 0..n {
                d[i] = if active[i] { 0.0 } else { -g[i] };
            }
        }

        let mut alpha = if memory.is_empty() {
            (1.0 / norm2(&d)).min(1.0)
        } else {
            1.0
        };
        let mut accepted = false;
        for _ in 0..opts.max_backtracks {
            for i in 0..n {
                x_new[i] = (x[i] + alpha * d[i]).clamp(lower[i], upper[i]);
            }
            let decrease: f64 = (0..n).map(|i| g[i] * (x_new[i] - x[i])).sum();
            if decrease >= 0.0 {
                alpha *= 0.5;
                continue;
            }
            let f_new = fg(&x_new, &mut g_new);
            evaluations += 1;
            if f_new.is_finite() && f_new <= f + opts.armijo * decrease {
                accepted = true;
                let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
                let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
                let sy = dot(&s, &y);
                if sy > 1e-12 * dot(&y, &y).max(f64::MIN_POSITIVE) && opts.memory > 0 {
                    if memory.len() == opts.memory {
                        memory.pop_front();
                    }
                    memory.push_back(Pair { s, y, rho: 1.0 / sy });
                }
                x.copy_from_slice(&x_new);
                g.copy_from_slice(&g_new);
                f = f_new;
                if opts.trace {
                    trace.push(f);
                }
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            if memory.is_empty() {
                break LbfgsbStatus::LineSearchFailed;
            }
            // retry once from steepest descent before giving up
            memory.clear();
        }
    };

    LbfgsbReport {
        status,
        f,
        pg_norm_inf: projected_gradient_norm(x, &g, lower, upper),
        iterations,
        evaluations,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64], g: &mut [f64]) -> f64 {
        let mut f = 0.0;
        g.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..x.len() - 1 {
            let a = x[i + 1] - x[i] * x[i];
            let b = 1.0 - x[i];
            f += 100.0 * a * a + b * b;
            g[i] += -400.0 * a * x[i] - 2.0 * b;
            g[i + 1] += 200.0 * a;
        }
        f
    }

    #[test]
    fn unconstrained_rosenbrock() {
        let n = 6;
        let mut x = vec![-1.2; n];
        let lo = vec![f64::NEG_INFINITY; n];
        let hi = vec![f64::INFINITY; n];
        let opts = LbfgsbOptions {
            memory: 5,
            pg_tol: 1e-8,
            ..Default::default()
        };
        let r = minimize(rosenbrock, &mut x, &lo, &hi, &opts);
        assert_eq!(r.status, LbfgsbStatus::Converged, "{r:?}");
        assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-6));
    }

    #[test]
    fn active_bounds() {
        // minimise sum (x_i - c_i)^2 over [0, 1]^4
        let c = [-1.0, 0.5, 2.0, 0.25];
        let fg = |x: &[f64], g: &mut [f64]| {
            let mut f = 0.0;
            for i in 0..4 {
                f += (x[i] - c[i]).powi(2);
                g[i] = 2.0 * (x[i] - c[i]);
            }
            f
        };
        let mut x = vec![0.5; 4];
        let r = minimize(fg, &mut x, &[0.0; 4], &[1.0; 4], &LbfgsbOptions::default());
        assert_eq!(r.status, LbfgsbStatus::Converged);
        let want = [0.0, 0.5, 1.0, 0.25];
        for i in 0..4 {
            assert!((x[i] - want[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn degenerate_box_is_respected() {
        let fg = |x: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * (x[0] - 3.0);
            g[1] = 2.0 * (x[1] + 1.0);
            (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2)
        };
        let mut x = vec![5.0, 5.0];
        let r = minimize(fg, &mut x, &[f64::NEG_INFINITY, 0.0], &[f64::INFINITY, 0.0], &LbfgsbOptions::default());
        assert_eq!(r.status, LbfgsbStatus::Converged);
        assert!((x[0] - 3.0).abs() < 1e-6);
        assert_eq!(x[1], 0.0);
    }

    #[test]
    fn starts_at_optimum() {
        let fg = |x: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * x[0];
            x[0] * x[0]
        };
        let mut x = vec![0.0];
        let r = minimize(fg, &mut x, &[-1.0], &[1.0], &LbfgsbOptions::default());
        assert_eq!(r.iterations, 0);
        assert_eq!(r.evaluations, 1);
    }
}
