use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;
use rand::Rng;

use super::*;
use crate::augment::AugmentationSpec;
use crate::diffnum::Tensor;
use crate::error::Error;
use crate::generator::VhgaeParams;
use crate::hypergraph::{synth_hypergraph, Hypergraph, SplitMasks, SynthConfig};
use crate::math;
use crate::model::{ModelDims, ModelParams, Parameters};
use crate::seed;

/// Twenty vertices in two classes with one-hot class features and
/// within-class hyperedges.
fn separable() -> Hypergraph {
    let labels: Vec<usize> = (0..20).map(|v| v / 10).collect();
    let feats: Vec<f64> = labels.iter().flat_map(|&y| if y == 0 { [1.0, 0.0] } else { [0.0, 1.0] }).collect();
    let edges = vec![
        vec![0, 1, 2, 3],
        vec![4, 5, 6],
        vec![7, 8, 9, 0],
        vec![10, 11, 12],
        vec![13, 14, 15, 16],
        vec![17, 18, 19],
    ];
    Hypergraph::from_hyperedges(20, &edges, Tensor::matrix(20, 2, feats).unwrap()).unwrap().with_labels(labels).unwrap()
}

fn separable_masks() -> SplitMasks {
    let mut m = SplitMasks { train: vec![false; 20], val: vec![false; 20], test: vec![false; 20] };
    for v in 0..20 {
        match v % 10 {
            0 | 1 => m.train[v] = true,
            2 => m.val[v] = true,
            _ => m.test[v] = true,
        }
    }
    m
}

fn toy() -> Hypergraph {
    Hypergraph::from_hyperedges(5, &[vec![0, 1, 2], vec![1, 3], vec![2, 3, 4]], Tensor::identity(5))
        .unwrap()
        .with_labels(vec![0, 0, 1, 1, 1])
        .unwrap()
}

fn toy_masks() -> SplitMasks {
    SplitMasks {
        train: vec![true, false, true, false, false],
        val: vec![false, true, false, false, false],
        test: vec![false, false, false, true, true],
    }
}

fn small(mode: Mode) -> TrainConfig {
    TrainConfig {
        mode,
        epochs: 20,
        pretrain_epochs: 10,
        hidden: 8,
        proj: 8,
        latent: 4,
        num_blocks: 1,
        lr_model: 1e-2,
        lr_generator: 1e-2,
        seeds: vec![0],
        ..TrainConfig::default()
    }
}

fn fabricated(cfg: TrainConfig) -> TrainConfig {
    TrainConfig { view1: ViewSpec::Fabricated(AugmentationSpec::IncidenceRemoval(0.2)), ..cfg }
}

fn small_synth(seed: u64) -> Hypergraph {
    let cfg =
        SynthConfig { num_vertices: 60, num_classes: 3, num_hyperedges: 20, feature_dim: 6, ..SynthConfig::default() };
    synth_hypergraph(&cfg, seed).unwrap()
}

#[test]
fn supervised_separates_the_clean_toy() {
    let cfg = TrainConfig { epochs: 200, dropout: 0.0, ..small(Mode::Supervised) };
    let r = train_supervised(&separable(), &separable_masks(), &cfg, 3).unwrap();
    assert_eq!(r.test_acc, 100.0);
    assert_eq!(r.logs.len(), 200);
}

#[test]
fn zero_epochs_report_the_untrained_model() {
    let h = separable();
    let masks = separable_masks();
    let cfg = TrainConfig { epochs: 0, ..small(Mode::Supervised) };
    let r = train_supervised(&h, &masks, &cfg, 5).unwrap();
    assert!(r.logs.is_empty());
    assert_eq!(r.selected_epoch, 0);
    let dims = ModelDims { in_dim: 2, hidden: 8, proj: 8, num_classes: 2, num_blocks: 1 };
    let init = ModelParams::init(dims, &mut seed::rng(5, seed::tag::INIT, 0)).unwrap();
    assert_eq!(r.test_acc, evaluate(&init, &h, &masks.test).unwrap());
    assert_eq!(r.params.as_ref().unwrap(), &init);
}

#[test]
fn runs_are_deterministic_per_seed() {
    let h = small_synth(1);
    for cfg in [small(Mode::Supervised), small(Mode::Mtl), fabricated(small(Mode::Mtl))] {
        let a = run_seed(&h, &cfg, 4).unwrap();
        let b = run_seed(&h, &cfg, 4).unwrap();
        assert_eq!(a, b);
        let c = run_seed(&h, &cfg, 5).unwrap();
        assert_ne!(a.logs, c.logs);
    }
}

#[test]
fn mtl_with_zero_lambda_follows_the_supervised_trajectory() {
    let h = small_synth(2);
    let masks = crate::hypergraph::split(&h, 0.1, 0.1, 9).unwrap();
    let sup = train_supervised(&h, &masks, &small(Mode::Supervised), 7).unwrap();
    let mtl = train_mtl(&h, &masks, &TrainConfig { lambda: 0.0, ..fabricated(small(Mode::Mtl)) }, 7).unwrap();
    let ce = |r: &SeedResult| r.logs.iter().map(|l| l.ce.unwrap()).collect::<Vec<_>>();
    assert_eq!(ce(&sup), ce(&mtl));
    assert_eq!(sup.test_acc, mtl.test_acc);
    assert!(mtl.logs.iter().all(|l| l.ntxent.is_some() && l.l_gen.is_none()));
}

#[test]
fn generator_trains_on_the_elbo_when_beta_is_zero() {
    let cfg = TrainConfig { epochs: 200, beta: 0.0, ..small(Mode::Mtl) };
    let r = train_mtl(&toy(), &toy_masks(), &cfg, 1).unwrap();
    let l: Vec<f64> = r.logs.iter().map(|l| l.l_gen.unwrap()).collect();
    let head = l[..20].iter().sum::<f64>() / 20.0;
    let tail = l[180..].iter().sum::<f64>() / 20.0;
    assert!(tail < head, "L_gen {head} -> {tail}");
    for log in &r.logs {
        assert!(log.kl_v.unwrap().is_finite() && log.kl_e.unwrap().is_finite());
    }
}

#[test]
fn finetune_without_pretraining_is_supervised() {
    let h = small_synth(3);
    let masks = crate::hypergraph::split(&h, 0.1, 0.1, 1).unwrap();
    let sup = train_supervised(&h, &masks, &small(Mode::Supervised), 2).unwrap();
    let cfg = TrainConfig { pretrain_epochs: 0, ..small(Mode::PretrainFinetune) };
    let ft = train_pretrain(&h, &masks, &cfg, 2).unwrap();
    assert_eq!(sup.logs, ft.logs);
    assert_eq!(sup.test_acc, ft.test_acc);
    assert_eq!(sup.params, ft.params);
}

#[test]
fn linear_probe_freezes_the_encoder() {
    let h = small_synth(4);
    let masks = crate::hypergraph::split(&h, 0.1, 0.1, 2).unwrap();
    let cfg = TrainConfig { epochs: 30, ..small(Mode::PretrainLinear) };
    let probe = train_pretrain(&h, &masks, &cfg, 6).unwrap();
    let stage1 = train_pretrain(&h, &masks, &TrainConfig { epochs: 0, ..cfg.clone() }, 6).unwrap();
    let a = probe.params.unwrap();
    let b = stage1.params.unwrap();
    assert_eq!(a.encoder, b.encoder);
    assert_eq!(a.projection, b.projection);
    assert_eq!(probe.logs.iter().filter(|l| l.phase == Phase::Pretrain).count(), 10);
    assert_eq!(probe.logs.iter().filter(|l| l.phase == Phase::Train).count(), 30);
    // the best-of-training classifier may still be the initial one; the
    // final epochs must have moved it
    let ce: Vec<f64> = probe.logs.iter().filter_map(|l| l.ce).collect();
    assert!(ce.last().unwrap() < ce.first().unwrap());
}

#[test]
fn pretraining_logs_contrast_and_generator_terms() {
    let h = small_synth(5);
    let r = run_seed(&h, &small(Mode::PretrainFinetune), 0).unwrap();
    for l in r.logs.iter().filter(|l| l.phase == Phase::Pretrain) {
        assert!(l.ce.is_none() && l.ntxent.is_some() && l.l_gen.is_some());
        assert!(l.val_acc.is_none());
    }
    for l in r.logs.iter().filter(|l| l.phase == Phase::Train) {
        assert!(l.ce.is_some() && l.ntxent.is_none() && l.val_acc.is_some());
    }
}

#[test]
fn keep_ratios_lie_in_the_unit_interval() {
    let h = small_synth(6);
    let r = run_seed(&h, &small(Mode::Mtl), 1).unwrap();
    for l in &r.logs {
        let (s, t) = (l.soft_keep_ratio.unwrap(), l.hard_keep_ratio.unwrap());
        assert!((0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&t));
    }
}

#[test]
fn selection_picks_the_earliest_best_validation_epoch() {
    let h = small_synth(7);
    let r = run_seed(&h, &small(Mode::Supervised), 2).unwrap();
    let best = r.logs.iter().map(|l| l.val_acc.unwrap()).fold(f64::NEG_INFINITY, f64::max);
    let first = r.logs.iter().find(|l| l.val_acc.unwrap() == best).unwrap();
    if r.selected_epoch == 0 {
        assert!(r.val_acc.unwrap() >= best);
    } else {
        assert_eq!(r.selected_epoch, first.epoch);
        assert_eq!(r.test_acc, first.test_acc.unwrap());
        assert_eq!(r.val_acc, first.val_acc);
    }
}

/// Replays one generator step and one model step by hand through the
/// public pieces, checking which parameter sets move.
#[test]
fn generator_and_model_steps_touch_disjoint_parameters() {
    use crate::diffnum::Tape;
    use crate::generator::{elbo_on_tape, gumbel_on_tape, logistic_noise};
    use crate::model::{bind_inputs, encode_on_tape, project_on_tape, Structure};
    use crate::objectives::{generator_objective_on_tape, nt_xent_on_tape};
    use crate::optim::{Adam, AdamConfig};

    let h = toy();
    let s = Structure::of(&h);
    let dims = ModelDims { in_dim: 5, hidden: 6, proj: 4, num_classes: 2, num_blocks: 1 };
    let model = ModelParams::init(dims, &mut seed::plain(1)).unwrap();
    let mut gen = VhgaeParams::init(5, 6, 3, 1, &mut seed::plain(2)).unwrap();
    let model_before = model.clone();
    let gen_before = gen.clone();

    let mut tape = Tape::new();
    let mv = model.bind(&mut tape, false);
    let gv = gen.bind(&mut tape, true);
    let terms = elbo_on_tape(&mut tape, &h, &s, &gv, 1, &mut seed::plain(3)).unwrap();
    let t = gumbel_on_tape(&mut tape, terms.logits, 0.5, logistic_noise(8, &mut seed::plain(4))).unwrap();
    let x = tape.constant(h.features().clone());
    let (z1, _) = encode_on_tape(&mut tape, &s, x, t, &mv.encoder, None).unwrap();
    let (x2, w2) = bind_inputs(&mut tape, &h);
    let (z2, _) = encode_on_tape(&mut tape, &s, x2, w2, &mv.encoder, None).unwrap();
    let p1 = project_on_tape(&mut tape, z1, &mv.projection).unwrap();
    let p2 = project_on_tape(&mut tape, z2, &mv.projection).unwrap();
    let cl = nt_xent_on_tape(&mut tape, p1, p2, 0.5).unwrap();
    let obj = generator_objective_on_tape(&mut tape, terms.l_gen, cl, 1.0).unwrap();
    let g = tape.backward(obj).unwrap();
    let grads: Vec<Vec<f64>> = gv.all.iter().map(|&v| g.get_or_zeros(&tape, v)).collect();
    // constants receive nothing
    assert!(mv.all.iter().all(|&v| g.get(v).is_none()));
    Adam::new(AdamConfig::default()).step(gen.tensors_mut(), &grads).unwrap();
    assert_eq!(model, model_before);
    assert_ne!(gen, gen_before);

    // the full runner: generator params differ across runs only through
    // generator steps, so a supervised run never builds one
    let r = run_seed(&small_synth(8), &small(Mode::Supervised), 0).unwrap();
    assert!(r.generator.is_none());
}

#[test]
fn soft_keep_ratio_matches_recomputation() {
    use crate::generator::{decode_logits, reparam_sample, soft_keep_ratio, vhgae_encode};
    let h = toy();
    let p = VhgaeParams::init(5, 6, 3, 1, &mut seed::plain(11)).unwrap();
    let (mv, lv, me, le) = vhgae_encode(&h, &p).unwrap();
    let (zv, _) = reparam_sample(&mv, &lv, 1).unwrap();
    let (ze, _) = reparam_sample(&me, &le, 2).unwrap();
    let w = decode_logits(&zv, &ze, h.incidences()).unwrap();
    let independent: f64 = w.iter().map(|&x| 1.0 / (1.0 + (-x).exp())).sum::<f64>() / w.len() as f64;
    assert!((soft_keep_ratio(&w) - independent).abs() < 1e-10);
}

#[test]
fn evaluate_examples() {
    let h = toy();
    let perfect =
        Tensor::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
    let labels = h.labels().unwrap();
    let all = vec![true; 5];
    assert_eq!(accuracy(&perfect, labels, &all).unwrap(), 100.0);
    let inverted = perfect.map(|x| 1.0 - x);
    assert_eq!(accuracy(&inverted, labels, &all).unwrap(), 0.0);
    // hand count: predictions 0, 1, 1, 0, 0 (row 4 ties -> class 0)
    let mixed =
        Tensor::from_rows(&[vec![2.0, 1.0], vec![0.0, 3.0], vec![-1.0, 1.0], vec![5.0, 4.0], vec![0.5, 0.5]]).unwrap();
    assert_eq!(predictions(&mixed), vec![0, 1, 1, 0, 0]);
    assert_eq!(accuracy(&mixed, labels, &all).unwrap(), 40.0);
    let mask = vec![true, true, false, false, false];
    assert_eq!(accuracy(&mixed, labels, &mask).unwrap(), 50.0);
    assert!(matches!(accuracy(&mixed, labels, &[false; 5]), Err(Error::EmptyMask)));
}

#[test]
fn fairness_examples() {
    let labels = vec![true; 8];
    let sens = vec![0, 0, 0, 0, 1, 1, 1, 1];
    let preds = vec![true, true, true, false, true, false, false, false];
    assert_eq!(fairness_metrics(&preds, &labels, &sens).unwrap(), (50.0, 50.0));
    let same = vec![true, false, true, false, true, false, true, false];
    assert_eq!(fairness_metrics(&same, &labels, &sens).unwrap(), (0.0, 0.0));
    let one_group = vec![0u8; 8];
    match fairness_metrics(&preds, &labels, &one_group) {
        Err(Error::EmptyGroup(msg)) => assert!(msg.contains("s=1")),
        other => panic!("{other:?}"),
    }
    let no_pos = vec![false, false, false, false, true, true, true, true];
    match fairness_metrics(&preds, &no_pos, &sens) {
        Err(Error::EmptyGroup(msg)) => assert!(msg.contains("positives")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn independent_predictions_have_small_parity_gap() {
    let mut rng = seed::plain(99);
    let n = 10_000;
    let preds: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
    let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
    let sens: Vec<u8> = (0..n).map(|_| rng.random_bool(0.5) as u8).collect();
    let (sp, _) = fairness_metrics(&preds, &labels, &sens).unwrap();
    assert!(sp < 3.0, "{sp}");
}

#[test]
fn auroc_and_f1_match_hand_counts() {
    assert_eq!(auroc(&[0.9, 0.8, 0.3, 0.1], &[true, true, false, false]), Some(1.0));
    assert_eq!(auroc(&[0.1, 0.9], &[true, false]), Some(0.0));
    assert_eq!(auroc(&[0.5, 0.5], &[true, false]), Some(0.5));
    assert_eq!(auroc(&[0.5], &[true]), None);
    // tp 2, fp 1, fn 1
    let f1 = f1_binary(&[true, true, true, false], &[true, true, false, true]);
    assert!((f1 - 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn fairness_is_reported_for_binary_sensitive_tasks() {
    let h = separable().with_sensitive((0..20).map(|v| (v % 2) as u8).collect()).unwrap();
    let cfg = TrainConfig { epochs: 50, ..small(Mode::Supervised) };
    let r = train_supervised(&h, &separable_masks(), &cfg, 0).unwrap();
    let f = r.fairness.unwrap();
    assert!(f.delta_sp >= 0.0 && f.delta_eo >= 0.0 && (0.0..=1.0).contains(&f.f1));
    assert!(run_seed(&small_synth(0), &small(Mode::Supervised), 0).unwrap().fairness.is_none());
}

#[test]
fn attack_removes_an_exact_count() {
    let h = small_synth(9);
    let total = h.incidences().len();
    for s in 0..100 {
        let g = random_perturb_attack(&h, 0.1, s).unwrap();
        assert_eq!(g.incidences().len(), total - (0.1 * total as f64).round() as usize);
        assert!(g.incidence_set().is_subset(&h.incidence_set()) || g.num_hyperedges() < h.num_hyperedges());
    }
    assert_eq!(random_perturb_attack(&h, 0.0, 3).unwrap(), h);
    let gone = random_perturb_attack(&h, 1.0, 3).unwrap();
    assert_eq!(gone.num_hyperedges(), 0);
    assert_eq!(gone.num_vertices(), h.num_vertices());
    assert!(random_perturb_attack(&h, 1.5, 0).is_err());
}

#[test]
fn protocol_aggregates_seeds() {
    let h = small_synth(10);
    let one = run_protocol(&h, &TrainConfig { seeds: vec![3], ..small(Mode::Supervised) }).unwrap();
    assert_eq!(one.std, Some(0.0));
    assert_eq!(one.mean, Some(one.per_seed[0].test_acc));

    let a = run_protocol(&h, &TrainConfig { seeds: vec![1, 2], ..small(Mode::Supervised) }).unwrap();
    let b = run_protocol(&h, &TrainConfig { seeds: vec![2, 1], ..small(Mode::Supervised) }).unwrap();
    assert_eq!(a.per_seed, b.per_seed);
    assert_eq!((a.mean, a.std), (b.mean, b.std));
    let accs = a.test_accuracies();
    let m = accs.iter().sum::<f64>() / 2.0;
    let sd = math::sqrt(accs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 2.0);
    assert!((a.mean.unwrap() - m).abs() < 1e-9 && (a.std.unwrap() - sd).abs() < 1e-9);
}

#[test]
fn protocol_records_failures_and_continues() {
    let unlabelled = Hypergraph::from_hyperedges(4, &[vec![0, 1], vec![2, 3]], Tensor::identity(4)).unwrap();
    let r = run_protocol(&unlabelled, &TrainConfig { seeds: vec![0, 1], ..small(Mode::Supervised) }).unwrap();
    assert!(r.per_seed.is_empty());
    assert_eq!(r.failures.len(), 2);
    assert_eq!(r.mean, None);

    let h = small_synth(11);
    let ok = run_seed(&h, &small(Mode::Supervised), 0).unwrap();
    let mixed = aggregate(&small(Mode::Supervised), vec![(5, Err(Error::EmptyMask)), (0, Ok(ok.clone()))]);
    assert_eq!(mixed.per_seed, vec![ok]);
    assert_eq!(mixed.failures[0].seed, 5);
}

#[test]
fn config_validation() {
    assert!(TrainConfig::default().validate().is_ok());
    let two = TrainConfig { view1: ViewSpec::Generative, view2: ViewSpec::Generative, ..TrainConfig::default() };
    assert!(two.validate().is_err());
    assert!(TrainConfig { tau_gumbel: 0.0, ..TrainConfig::default() }.validate().is_err());
    assert!(TrainConfig { lr_model: 0.0, ..TrainConfig::default() }.validate().is_err());
    assert!(TrainConfig { seeds: vec![], ..TrainConfig::default() }.validate().is_err());
    assert!(TrainConfig { train_frac: 0.6, val_frac: 0.5, ..TrainConfig::default() }.validate().is_err());
    let h = toy();
    assert!(train_mtl(&h, &toy_masks(), &small(Mode::Supervised), 0).is_err());
    assert!(train_supervised(&h, &toy_masks(), &small(Mode::Mtl), 0).is_err());
}

#[test]
fn config_and_mode_parsing() {
    assert_eq!("pretrain-linear".parse::<Mode>().unwrap(), Mode::PretrainLinear);
    assert_eq!("MTL".parse::<Mode>().unwrap(), Mode::Mtl);
    assert!("semi".parse::<Mode>().is_err());
    assert_eq!("a6".parse::<ViewSpec>().unwrap(), ViewSpec::Generative);
}

#[test]
fn temperature_schedule() {
    let fixed = TrainConfig::default();
    assert_eq!(fixed.tau_at(50, 100), 0.5);
    let anneal = TrainConfig { anneal_tau_gumbel: true, ..TrainConfig::default() };
    assert_eq!(anneal.tau_at(0, 11), 0.5);
    assert!((anneal.tau_at(10, 11) - 0.1).abs() < 1e-15);
    assert!((anneal.tau_at(5, 11) - 0.3).abs() < 1e-15);
}

#[test]
fn anchor_budget_limits_contrast() {
    let h = small_synth(12);
    let cfg = TrainConfig { anchor_budget: 16, epochs: 5, ..fabricated(small(Mode::Mtl)) };
    let r = run_seed(&h, &cfg, 0).unwrap();
    assert!(r.logs.iter().all(|l| l.ntxent.unwrap().is_finite()));
    let full = run_seed(&h, &TrainConfig { epochs: 5, ..fabricated(small(Mode::Mtl)) }, 0).unwrap();
    assert_ne!(r.logs[0].ntxent, full.logs[0].ntxent);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn accuracy_is_a_percentage(rows in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0, 0usize..2, any::<bool>()), 1..30)) {
        let logits = Tensor::from_rows(&rows.iter().map(|r| vec![r.0, r.1]).collect::<Vec<_>>()).unwrap();
        let labels: Vec<usize> = rows.iter().map(|r| r.2).collect();
        let mut mask: Vec<bool> = rows.iter().map(|r| r.3).collect();
        mask[0] = true;
        let a = accuracy(&logits, &labels, &mask).unwrap();
        prop_assert!((0.0..=100.0).contains(&a));
    }

    #[test]
    fn fairness_gaps_are_bounded(rows in prop::collection::vec((any::<bool>(), any::<bool>()), 4..40)) {
        let n = rows.len();
        let preds: Vec<bool> = rows.iter().map(|r| r.0).collect();
        let labels = vec![true; n];
        let sens: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let (sp, eo) = fairness_metrics(&preds, &labels, &sens).unwrap();
        prop_assert!((0.0..=100.0).contains(&sp));
        prop_assert_eq!(sp, eo);
    }

    #[test]
    fn attack_count_is_exact(ratio in 0.0f64..=1.0, s in any::<u64>()) {
        let h = small_synth(13);
        let total = h.incidences().len();
        let g = random_perturb_attack(&h, ratio, s).unwrap();
        prop_assert_eq!(g.incidences().len(), total - (ratio * total as f64).round() as usize);
    }

    #[test]
    fn mean_std_recomputes(values in prop::collection::vec(0.0f64..100.0, 1..20)) {
        let (m, s) = mean_std(&values).unwrap();
        let n = values.len() as f64;
        let mm = values.iter().sum::<f64>() / n;
        prop_assert!((m - mm).abs() < 1e-9);
        prop_assert!(s >= 0.0);
    }
}

#[test]
fn unused_params_trait_is_object_safe_enough() {
    fn count(p: &impl Parameters) -> usize {
        p.named().len()
    }
    let dims = ModelDims { in_dim: 2, hidden: 3, proj: 3, num_classes: 2, num_blocks: 1 };
    assert!(count(&ModelParams::init(dims, &mut seed::plain(0)).unwrap()) > 0);
}
