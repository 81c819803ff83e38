//! Small named graphs and a seeded random generator, used by the test suites
//! and handy for experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::Graph;

pub fn path(n: usize) -> Graph {
    Graph::from_unweighted(n, (1..n).map(|i| (i - 1, i))).expect("valid path")
}

pub fn cycle(n: usize) -> Graph {
    Graph::from_unweighted(n, (0..n).map(|i| (i, (i + 1) % n))).expect("valid cycle")
}

pub fn complete(n: usize) -> Graph {
    let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
    Graph::from_unweighted(n, edges).expect("valid clique")
}

/// Star with centre 0 and `leaves` leaves.
pub fn star(leaves: usize) -> Graph {
    Graph::from_unweighted(leaves + 1, (1..=leaves).map(|i| (0, i))).expect("valid star")
}

/// Two copies of K4 joined by the bridge 3-4.
pub fn barbell() -> Graph {
    let mut edges = Vec::new();
    for base in [0, 4] {
        for i in 0..4 {
            for j in i + 1..4 {
                edges.push((base + i, base + j));
            }
        }
    }
    edges.push((3, 4));
    Graph::from_unweighted(8, edges).expect("valid barbell")
}

/// K4 on 0..4 with a pendant vertex 4 attached to 0.
pub fn k4_pendant() -> Graph {
    let mut edges: Vec<_> = complete(4).edges().map(|(u, v, _)| (u, v)).collect();
    edges.push((0, 4));
    Graph::from_unweighted(5, edges).expect("valid graph")
}

/// Connected random graph: a random spanning tree plus independent extra
/// edges with probability `p`. Weights are drawn from [0.5, 2] if `weighted`.
pub fn random_connected(n: usize, p: f64, seed: u64, weighted: bool) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    let weight = |rng: &mut ChaCha8Rng| {
        if weighted {
            rng.random_range(0.5..2.0)
        } else {
            1.0
        }
    };
    for v in 1..n {
        let u = rng.random_range(0..v);
        let w = weight(&mut rng);
        edges.push((u, v, w));
    }
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                let w = weight(&mut rng);
                edges.push((u, v, w));
            }
        }
    }
    Graph::from_edges(n, edges).expect("valid random graph")
}
