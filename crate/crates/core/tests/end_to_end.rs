use std::io::Write;

use mucond::certify::{certify_mu, profile_from_bounds, CertifyConfig};
use mucond::fixtures::{barbell, k4_pendant};
use mucond::graph::{load_edge_list, write_edge_list, EdgeListOptions};
use mucond::graphgen::{generate_core_periphery, k_core_subgraph, SynthConfig};
use mucond::ncp::{gap_report, run_sweeps, SeedSpec, SweepConfig, UpperEnvelope};
use mucond::oracle::brute_mu_conductance;

#[test]
fn file_round_trip_then_bound() {
    let g = barbell();
    let mut file = tempfile::NamedTempFile::new().unwrap();
    write_edge_list(&g, &mut file).unwrap();
    file.flush().unwrap();
    let loaded = load_edge_list(file.path(), &EdgeListOptions::default()).unwrap();
    assert_eq!(loaded.graph.num_edges(), g.num_edges());
    assert_eq!(loaded.graph.volume(), g.volume());

    let cfg = CertifyConfig::default();
    let mut bounds = Vec::new();
    for mu in [0.1, 0.3, 0.5] {
        let (_, b) = certify_mu(&loaded.graph, mu, 3, &cfg).unwrap();
        let phi = brute_mu_conductance(&loaded.graph, mu).unwrap().phi_mu;
        assert!(b.certified);
        assert!(b.bound <= phi + 1e-9, "mu {mu}: {} > {phi}", b.bound);
        bounds.push(b);
    }
    let lower = profile_from_bounds(&bounds, false).unwrap();

    let sweep = SweepConfig {
        seeds: SeedSpec::List((0..8).collect()),
        ..SweepConfig::default()
    };
    let samples = run_sweeps(&loaded.graph, &sweep).unwrap();
    let upper = UpperEnvelope::new(&samples, loaded.graph.volume());
    let rows = gap_report(&upper, &lower).unwrap();
    for r in rows {
        let u = r.upper.unwrap();
        assert!(r.lower <= u);
        assert!((u - 1.0 / 13.0).abs() < 1e-12);
    }
}

#[test]
fn core_of_pendant_graph_is_k4() {
    let (core, map) = k_core_subgraph(&k4_pendant(), 2).unwrap();
    assert_eq!(core.num_vertices(), 4);
    assert_eq!(core.num_edges(), 6);
    assert_eq!(map, vec![0, 1, 2, 3]);
    let (_, b) = certify_mu(&core, 0.5, 3, &CertifyConfig::default()).unwrap();
    assert!(b.bound <= 2.0 / 3.0 + 1e-9);
}

#[test]
fn synthetic_graph_bounds_below_sweeps() {
    let synth = generate_core_periphery(&SynthConfig {
        n: 120,
        seed: 4,
        ..SynthConfig::default()
    })
    .unwrap();
    let g = &synth.graph;
    let (_, b) = certify_mu(g, 0.2, 3, &CertifyConfig::default()).unwrap();
    let sweep = SweepConfig {
        seeds: SeedSpec::Random { count: 20, rng_seed: 1 },
        ..SweepConfig::default()
    };
    let samples = run_sweeps(g, &sweep).unwrap();
    assert!(!samples.is_empty());
    for s in samples.iter().filter(|s| s.volume >= 0.2 * g.volume()) {
        assert!(s.conductance >= b.bound);
    }
}
