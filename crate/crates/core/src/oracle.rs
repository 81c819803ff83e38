//! Exact references for small graphs: mu-conductance by exhaustive subset
//! enumeration and full dense spectra by cyclic Jacobi rotations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{conductance, Graph, VertexSet};

/// Largest graph accepted by the enumerators.
pub const BRUTE_MAX_VERTICES: usize = 24;
/// Largest matrix accepted by the dense eigensolver.
pub const DENSE_MAX_DIM: usize = 64;

const WINDOW_SLACK: f64 = 1e-12;
const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BruteResult {
    pub phi_mu: f64,
    pub argmin_set: VertexSet,
    /// Subsets whose volume falls inside the window.
    pub feasible_count: u64,
    /// Candidate subsets examined (every nonempty proper subset).
    pub visited: u64,
}

/// `min phi(S)` over `mu Vol(G) <= Vol(S) <= Vol(G)/2`.
pub fn brute_mu_conductance(graph: &Graph, mu: f64) -> Result<BruteResult> {
    if !(0.0..=0.5).contains(&mu) {
        return Err(Error::Validation(format!("mu = {mu} outside [0, 1/2]")));
    }
    enumerate(graph, mu * graph.volume(), graph.volume() / 2.0)
}

/// `min phi(S)` over all nonempty `S` with `Vol(S) <= Vol(G)/2`.
pub fn brute_min_conductance(graph: &Graph) -> Result<BruteResult> {
    enumerate(graph, 0.0, graph.volume() / 2.0)
}

/// Is the member list of `a` lexicographically smaller than that of `b`?
fn lex_less(a: u32, b: u32) -> bool {
    let diff = a ^ b;
    if diff == 0 {
        return false;
    }
    let x = diff.trailing_zeros();
    let above = |m: u32| x < 31 && (m >> (x + 1)) != 0;
    if a >> x & 1 == 1 {
        above(b)
    } else {
        !above(a)
    }
}

fn mask_members(mask: u32, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| mask >> i & 1 == 1).collect()
}

fn enumerate(graph: &Graph, lo: f64, hi: f64) -> Result<BruteResult> {
    let n = graph.num_vertices();
    if n > BRUTE_MAX_VERTICES {
        return Err(Error::TooLarge {
            n,
            cap: BRUTE_MAX_VERTICES,
        });
    }
    if n < 2 {
        return Err(Error::Validation("need at least two vertices".into()));
    }
    let slack = WINDOW_SLACK * graph.volume();
    let (lo_s, hi_s) = (lo - slack, hi + slack);
    let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let adjacency: Vec<Vec<(usize, f64)>> = (0..n).map(|v| graph.neighbors(v).collect()).collect();
    let degrees = graph.degrees();

    let exact_phi = |mask: u32| -> f64 {
        let mut cut = 0.0;
        let mut vol = 0.0;
        for u in 0..n {
            if mask >> u & 1 == 1 {
                vol += degrees[u];
                for &(v, w) in &adjacency[u] {
                    if mask >> v & 1 == 0 {
                        cut += w;
                    }
                }
            }
        }
        cut / vol.min(graph.volume() - vol)
    };

    let mut mask = 0u32;
    let mut cut = 0.0;
    let mut vol = 0.0;
    let mut visited = 0u64;
    let mut feasible = 0u64;
    let mut best: Option<(f64, u32)> = None;

    // Gray-code walk: step i flips the bit of its lowest set bit.
    for i in 1..=full {
        let v = i.trailing_zeros() as usize;
        let to_s: f64 = adjacency[v]
            .iter()
            .filter(|(u, _)| mask >> u & 1 == 1)
            .map(|(_, w)| w)
            .sum();
        if mask >> v & 1 == 0 {
            cut += degrees[v] - 2.0 * to_s;
            vol += degrees[v];
        } else {
            cut -= degrees[v] - 2.0 * to_s;
            vol -= degrees[v];
        }
        mask ^= 1 << v;
        if mask == full {
            continue;
        }
        visited += 1;
        if vol < lo_s || vol > hi_s {
            continue;
        }
        feasible += 1;
        let phi = cut / vol;
        match best {
            Some((b, _)) if phi > b + 1e-9 * b.max(1e-300) + 1e-15 => {}
            _ => {
                let phi = exact_phi(mask);
                best = match best {
                    None => Some((phi, mask)),
                    Some((b, bm)) => {
                        let tol = TIE_TOL * b.abs().max(1e-300);
                        if phi < b - tol || ((phi - b).abs() <= tol && lex_less(mask, bm)) {
                            Some((phi, mask))
                        } else {
                            Some((b, bm))
                        }
                    }
                };
            }
        }
    }

    let (_, best_mask) = best.ok_or(Error::InfeasibleWindow { lo, hi })?;
    let argmin_set = VertexSet::new(graph, mask_members(best_mask, n))?;
    let phi_mu = conductance(graph, &argmin_set)?;
    Ok(BruteResult {
        phi_mu,
        argmin_set,
        feasible_count: feasible,
        visited,
    })
}

/// Full spectrum of a dense symmetric matrix, eigenvalues ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseSpectrum {
    pub values: Vec<f64>,
    /// `vectors[j]` is the unit eigenvector for `values[j]`.
    pub vectors: Vec<Vec<f64>>,
}

pub fn dense_laplacian(graph: &Graph) -> Vec<Vec<f64>> {
    let n = graph.num_vertices();
    let mut l = vec![vec![0.0; n]; n];
    for u in 0..n {
        l[u][u] = graph.degree(u);
        for (v, w) in graph.neighbors(u) {
            l[u][v] -= w;
        }
    }
    l
}

pub fn dense_normalized_laplacian(graph: &Graph) -> Vec<Vec<f64>> {
    let s: Vec<f64> = graph.degrees().iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut l = dense_laplacian(graph);
    for (i, row) in l.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x *= s[i] * s[j];
        }
    }
    l
}

/// Cyclic Jacobi eigen-decomposition, sorted ascending.
pub fn dense_eig_reference(matrix: &[Vec<f64>]) -> Result<DenseSpectrum> {
    let n = matrix.len();
    if n > DENSE_MAX_DIM {
        return Err(Error::TooLarge {
            n,
            cap: DENSE_MAX_DIM,
        });
    }
    if let Some(row) = matrix.iter().find(|r| r.len() != n) {
        return Err(Error::Dimension {
            expected: n,
            got: row.len(),
        });
    }
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let frob: f64 = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * frob.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
    Ok(DenseSpectrum {
        values: order.iter().map(|&i| a[i][i]).collect(),
        vectors: order
            .iter()
            .map(|&j| (0..n).map(|i| v[i][j]).collect())
            .collect(),
    })
}
