use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::diffnum::Tensor;

fn feats(n: usize) -> Tensor {
    Tensor::zeros(&[n, 2])
}

pub(crate) fn random_hypergraph(n: usize, m: usize, seed: u64) -> Hypergraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges: Vec<Vec<usize>> = (0..m)
        .map(|_| {
            let k = rng.random_range(1..=4.min(n));
            (0..k).map(|_| rng.random_range(0..n)).collect()
        })
        .collect();
    let labels = (0..n).map(|_| rng.random_range(0..3)).collect();
    Hypergraph::from_hyperedges(n, &edges, feats(n)).unwrap().with_labels(labels).unwrap()
}

#[test]
fn single_hyperedge_construction() {
    let h = Hypergraph::from_hyperedges(3, &[vec![0, 1, 2]], feats(3)).unwrap();
    assert_eq!((h.num_vertices(), h.num_hyperedges(), h.incidences().len()), (3, 1, 3));
}

#[test]
fn out_of_range_vertex_is_rejected() {
    let err = Hypergraph::from_hyperedges(3, &[vec![0, 5]], feats(3)).unwrap_err();
    assert!(matches!(err, crate::Error::InvalidHypergraph(_)));
}

#[test]
fn duplicate_members_are_collapsed() {
    let h = Hypergraph::from_hyperedges(3, &[vec![1, 1, 2]], feats(3)).unwrap();
    assert_eq!(h.incidences().len(), 2);
}

#[test]
fn empty_hyperedge_and_bad_weights_are_rejected() {
    assert!(Hypergraph::from_hyperedges(3, &[vec![]], feats(3)).is_err());
    let h = Hypergraph::from_hyperedges(3, &[vec![0, 1]], feats(3)).unwrap();
    assert!(h.clone().with_incidence_weights(vec![0.5, 1.5]).is_err());
    assert!(h.with_incidence_weights(vec![0.5]).is_err());
}

#[test]
fn bipartite_edges_follow_incidences() {
    let h = Hypergraph::from_hyperedges(3, &[vec![0, 1], vec![1, 2]], feats(3)).unwrap();
    let b = to_bipartite(&h);
    let edges: BTreeSet<_> = b.edges.iter().copied().collect();
    assert_eq!(edges, [(0, 0), (1, 0), (1, 1), (2, 1)].into_iter().collect());

    let empty = Hypergraph::new(3, 0, feats(3), vec![]).unwrap();
    assert!(to_bipartite(&empty).edges.is_empty());
}

#[test]
fn bipartite_round_trip_on_random_hypergraph() {
    let h = random_hypergraph(50, 20, 9);
    let back = to_bipartite(&h).to_hypergraph(h.features().clone()).unwrap();
    assert!(h.same_structure(&back));
}

#[test]
fn clique_expansion_examples() {
    let h = Hypergraph::from_hyperedges(3, &[vec![0, 1, 2]], feats(3)).unwrap();
    let c = clique_expand(&h).unwrap();
    assert_eq!(c.hyperedges(), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);

    let h = Hypergraph::from_hyperedges(2, &[vec![0, 1], vec![1, 0]], feats(2)).unwrap();
    assert_eq!(clique_expand(&h).unwrap().num_hyperedges(), 1);
}

#[test]
fn clique_expansion_pair_count_matches_enumeration() {
    let h = random_hypergraph(20, 15, 4);
    let members = h.hyperedges();
    let mut pairs = BTreeSet::new();
    for a in 0..20 {
        for b in a + 1..20 {
            if members.iter().any(|m| m.contains(&a) && m.contains(&b)) {
                pairs.insert((a, b));
            }
        }
    }
    let c = clique_expand(&h).unwrap();
    assert_eq!(c.num_hyperedges(), pairs.len());
    assert!(c.hyperedges().iter().all(|m| m.len() == 2));
    assert_eq!(c.labels(), h.labels());
}

#[test]
fn clique_expansion_is_idempotent_on_graphs() {
    let h = clique_expand(&random_hypergraph(20, 15, 5)).unwrap();
    let again = clique_expand(&h).unwrap();
    assert!(h.same_structure(&again));
}

#[test]
fn homophily_examples() {
    let h = Hypergraph::from_hyperedges(3, &[vec![0, 1, 2]], feats(3)).unwrap().with_labels(vec![2, 2, 2]).unwrap();
    assert_eq!(homophily(&h).unwrap(), Homophily { edge: 1.0, node: 1.0 });

    let h = Hypergraph::from_hyperedges(2, &[vec![0, 1]], feats(2)).unwrap().with_labels(vec![0, 1]).unwrap();
    assert_eq!(homophily(&h).unwrap(), Homophily { edge: 0.0, node: 0.0 });
}

#[test]
fn homophily_errors() {
    let h = Hypergraph::from_hyperedges(2, &[vec![0, 1]], feats(2)).unwrap();
    assert!(homophily(&h).is_err());
    let h = Hypergraph::from_hyperedges(2, &[vec![0], vec![1]], feats(2)).unwrap().with_labels(vec![0, 1]).unwrap();
    assert!(homophily(&h).is_err());
}

#[test]
fn homophily_hand_example() {
    // {0,1,2} labels (0,0,1): 1/3 same pairs; {2,3} labels (1,1): 1.
    let h = Hypergraph::from_hyperedges(4, &[vec![0, 1, 2], vec![2, 3]], feats(4))
        .unwrap()
        .with_labels(vec![0, 0, 1, 1])
        .unwrap();
    let hm = homophily(&h).unwrap();
    assert!((hm.edge - (1.0 / 3.0 + 1.0) / 2.0).abs() < 1e-15);
    // v0: {1,2} → 1/2; v1: {0,2} → 1/2; v2: {0,1,3} → 1/3; v3: {2} → 1
    let node = (0.5 + 0.5 + 1.0 / 3.0 + 1.0) / 4.0;
    assert!((hm.node - node).abs() < 1e-15);
}

#[test]
fn split_counts_and_determinism() {
    let h = random_hypergraph(100, 10, 1);
    let s = split(&h, 0.1, 0.1, 42).unwrap();
    assert_eq!(s.counts(), (10, 10, 80));
    assert_eq!(s, split(&h, 0.1, 0.1, 42).unwrap());
    assert_eq!(split(&h, 0.0, 0.0, 1).unwrap().counts(), (0, 0, 100));
    assert!(split(&h, 0.6, 0.5, 1).is_err());
    assert!(split(&h, -0.1, 0.5, 1).is_err());
}

#[test]
fn split_ignores_incidence_order() {
    let h = random_hypergraph(60, 10, 2);
    let mut incs = h.incidences().to_vec();
    incs.reverse();
    let r = Hypergraph::new(60, h.num_hyperedges(), h.features().clone(), incs)
        .unwrap()
        .with_labels(h.labels().unwrap().to_vec())
        .unwrap();
    assert_eq!(split(&h, 0.2, 0.3, 5).unwrap(), split(&r, 0.2, 0.3, 5).unwrap());
}

#[test]
fn synth_fully_intra_class_has_unit_edge_homophily() {
    let cfg = SynthConfig { intra_class_probability: 1.0, ..SynthConfig::default() };
    for seed in 0..3 {
        let h = synth_hypergraph(&cfg, seed).unwrap();
        assert_eq!(homophily(&h).unwrap().edge, 1.0);
    }
}

#[test]
fn synth_rejects_bad_configs() {
    let base = SynthConfig::default();
    assert!(synth_hypergraph(&SynthConfig { num_hyperedges: 0, ..base.clone() }, 0).is_err());
    assert!(synth_hypergraph(&SynthConfig { hyperedge_size_range: (3, 500), ..base.clone() }, 0).is_err());
    assert!(synth_hypergraph(&SynthConfig { intra_class_probability: 0.0, ..base }, 0).is_err());
}

#[test]
fn synth_default_edge_homophily_over_seeds() {
    let cfg = SynthConfig::default();
    for seed in 0..10 {
        let h = synth_hypergraph(&cfg, seed).unwrap();
        assert_eq!((h.num_vertices(), h.num_hyperedges()), (400, 120));
        assert!(homophily(&h).unwrap().edge >= 0.8, "seed {seed}");
    }
}

#[test]
fn synth_is_deterministic() {
    let cfg = SynthConfig::default();
    assert_eq!(synth_hypergraph(&cfg, 7).unwrap(), synth_hypergraph(&cfg, 7).unwrap());
}

proptest! {
    #[test]
    fn split_is_a_partition(n in 1usize..200, tf in 0.0f64..0.5, vf in 0.0f64..0.45, seed in any::<u64>()) {
        let h = Hypergraph::new(n, 0, Tensor::zeros(&[n, 1]), vec![]).unwrap()
            .with_labels(vec![0; n]).unwrap();
        let s = split(&h, tf, vf, seed).unwrap();
        for v in 0..n {
            let k = s.train[v] as u8 + s.val[v] as u8 + s.test[v] as u8;
            prop_assert_eq!(k, 1);
        }
    }

    #[test]
    fn homophily_is_label_permutation_invariant(seed in any::<u64>()) {
        let h = random_hypergraph(30, 12, seed);
        let perm = [2usize, 0, 1];
        let relabeled: Vec<usize> = h.labels().unwrap().iter().map(|&l| perm[l]).collect();
        let g = h.clone().with_labels(relabeled).unwrap();
        if let (Ok(a), Ok(b)) = (homophily(&h), homophily(&g)) {
            prop_assert_eq!(a, b);
            prop_assert!((0.0..=1.0).contains(&a.edge) && (0.0..=1.0).contains(&a.node));
        }
    }
}
