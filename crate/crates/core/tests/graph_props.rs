mod common;

use common::{dbar_ref, random_rooted_weights, random_weights, roots_by_closure, to_sq, weights_of};
use rand::Rng;
use satsync::matkernel::{kron, spectral_radius};
use satsync::{dynamics::plant_a, graph::GraphError, Matrix, NodeId, WeightedDigraph};

fn from_table(w: &[Vec<f64>]) -> WeightedDigraph {
    let n = w.len();
    let a = Matrix::from_row_major(n, n, w.concat()).unwrap();
    WeightedDigraph::from_adjacency(&a).unwrap()
}

#[test]
fn root_set_matches_transitive_closure() {
    let mut rng = common::rng(11);
    for _ in 0..500 {
        let n = rng.gen_range(1..=10);
        let p = rng.gen_range(0.0..0.5);
        let w = random_weights(&mut rng, n, p);
        let g = from_table(&w);
        let got: Vec<usize> = g.root_set().iter().map(|r| r.index()).collect();
        assert_eq!(got, roots_by_closure(&w), "{w:?}");
    }
}

#[test]
fn laplacian_rows_sum_to_zero() {
    let mut rng = common::rng(12);
    for _ in 0..100 {
        let n = rng.gen_range(1..=8);
        let w = random_weights(&mut rng, n, 0.4);
        let l = from_table(&w).laplacian();
        for i in 0..n {
            let s: f64 = l.row(i).iter().sum();
            assert!(s.abs() < 1e-12);
            assert_eq!(l[(i, i)], w[i].iter().sum::<f64>());
        }
    }
}

#[test]
fn dbar_matches_oracle_and_contracts() {
    let mut rng = common::rng(13);
    for _ in 0..300 {
        let n = rng.gen_range(2..=12);
        let w = random_rooted_weights(&mut rng, n);
        let g = from_table(&w);
        let an = g.analyze();
        let roots: Vec<NodeId> = an.root_set.iter().copied().collect();
        let theta = roots[rng.gen_range(0..roots.len())];
        let mut bounds = an.default_bounds();
        if rng.gen_bool(0.5) {
            for b in bounds.iter_mut() {
                *b += rng.gen_range(0.0..5.0);
            }
        }
        let got = an.dbar(theta, &bounds).unwrap();
        let want = dbar_ref(&w, theta.index(), &bounds);
        let diff = got.as_slice().iter().zip(&want.a).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-14, "{diff}");
        let rho = spectral_radius(&got).unwrap();
        assert!(rho < 1.0, "ρ(D̄) = {rho}");
        // ρ(D̄⊗A) = ρ(D̄) because A has only the eigenvalue 1
        let full = kron(&got, &plant_a(1));
        assert!((spectral_radius(&full).unwrap() - rho).abs() < 1e-6);
        // the power-growth estimate agrees with the eigenvalue answer from above
        let est = common::growth_rate(&to_sq(&got), 4096);
        assert!(est >= rho - 1e-9 && est <= rho + 0.02, "{est} vs {rho}");
    }
}

#[test]
fn non_root_theta_is_rejected_with_root_set() {
    // 1 → 2 → 3: only node 1 is a root
    let g = from_table(&[vec![0.0; 3], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
    let err = g.analyze().require_root(NodeId::from_one_based(2).unwrap()).unwrap_err();
    assert!(matches!(err, GraphError::NotARoot { .. }));
    assert_eq!(err.to_string(), "node 2 is not a root; root set is {1}");
}

#[test]
fn graph_without_spanning_tree_is_rejected() {
    let g = WeightedDigraph::empty(3).unwrap();
    let an = g.analyze();
    assert!(!an.has_spanning_tree());
    let err = an.require_root(NodeId::new(0)).unwrap_err();
    assert!(matches!(err, GraphError::NoSpanningTree));
    assert_eq!(err.to_string(), "graph contains no directed spanning tree");
}

#[test]
fn reference_case_dbar_structure() {
    for case in satsync::Case::ALL {
        let g = case.graph();
        let an = g.analyze();
        let theta = NodeId::new(0);
        let d = an.dbar(theta, &an.default_bounds()).unwrap();
        let want = dbar_ref(&weights_of(&g), 0, &an.default_bounds());
        assert_eq!(d.as_slice(), &want.a[..]);
    }
}
