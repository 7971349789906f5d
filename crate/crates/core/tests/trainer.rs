//! Training-step and trainer behaviour on small models.

mod common;

use common::*;
use reconcap::autodiff::Tape;
use reconcap::data::{gen_synthetic, SyntheticSpec};
use reconcap::metrics::{CiderVariant, DocFreq};
use reconcap::model::ReconKind;
use reconcap::train::{
    evaluate, joint_grads, scst_grads, xe_grads, xe_step, Checkpoint, OptimizerSpec, Optimizer, Phase, ScstContext,
    Stage, TrainConfig, Trainer, XeItem,
};

fn grads(model: &reconcap::model::CaptionModel) -> Vec<(String, Option<Vec<f64>>)> {
    model
        .store
        .iter()
        .map(|(_, p)| (p.name.clone(), p.tensor.grad.clone()))
        .collect()
}

fn small_cfg() -> TrainConfig {
    TrainConfig {
        embed_dim: 8,
        hidden: 8,
        attn_dim: 8,
        recon_attn_dim: 8,
        val_beam: 2,
        eval_beam: 2,
        ..TrainConfig::default()
    }
}

#[test]
fn repeated_gradient_calls_do_not_leak() {
    let mut model = shrunk_model(1, 8, 8, 8, Some(ReconKind::Local));
    let mut rng = reconcap::rng::XorShift64Star::new(2);
    let v = random_features(&mut rng, 28, 8, 28);
    let batch = [XeItem {
        features: &v,
        caption: &[4, 5, 6],
    }];
    xe_grads(&mut model, &batch).unwrap();
    let a = grads(&model);
    xe_grads(&mut model, &batch).unwrap();
    assert_eq!(a, grads(&model));
    joint_grads(&mut model, &batch, 0.3).unwrap();
    let b = grads(&model);
    joint_grads(&mut model, &batch, 0.3).unwrap();
    assert_eq!(b, grads(&model));
}

#[test]
fn reconstruction_touches_decoder_only_with_positive_lambda() {
    let mut model = shrunk_model(3, 8, 8, 8, Some(ReconKind::Joint));
    let mut rng = reconcap::rng::XorShift64Star::new(4);
    let v = random_features(&mut rng, 28, 8, 14);
    let batch = [XeItem {
        features: &v,
        caption: &[4, 7],
    }];
    let recon_ids = model.recon.as_ref().unwrap().param_ids();
    let dec_ids = model.decoder.param_ids();

    let s0 = joint_grads(&mut model, &batch, 0.0).unwrap();
    assert!(recon_ids.iter().all(|&id| model.store.get(id).tensor.grad.is_none()));
    let dec0: Vec<Vec<f64>> = dec_ids
        .iter()
        .map(|&id| model.store.get(id).tensor.grad.clone().unwrap())
        .collect();
    xe_grads(&mut model, &batch).unwrap();
    for (&id, g) in dec_ids.iter().zip(&dec0) {
        assert_eq!(model.store.get(id).tensor.grad.as_ref().unwrap(), g);
    }

    let s1 = joint_grads(&mut model, &batch, 0.5).unwrap();
    assert_eq!(s0.ed, s1.ed);
    assert_eq!(s0.recon, s1.recon);
    assert!(recon_ids.iter().all(|&id| model.store.get(id).tensor.grad.is_some()));
    let changed = dec_ids
        .iter()
        .zip(&dec0)
        .any(|(&id, g)| model.store.get(id).tensor.grad.as_ref().unwrap() != g);
    assert!(changed);
}

#[test]
fn joint_gradient_matches_finite_difference_on_embedding_row() {
    let mut model = shrunk_model(5, 8, 8, 8, Some(ReconKind::Local));
    let mut rng = reconcap::rng::XorShift64Star::new(6);
    let v = random_features(&mut rng, 28, 8, 28);
    let caption = [5u32, 6];
    let lambda = 0.4;
    joint_grads(
        &mut model,
        &[XeItem {
            features: &v,
            caption: &caption,
        }],
        lambda,
    )
    .unwrap();
    let embed = model.decoder.embed;
    let analytic = model.store.get(embed).tensor.grad.clone().unwrap();
    let width = model.cfg.embed_dim;
    let loss = |m: &reconcap::model::CaptionModel| {
        let mut t = Tape::with_params(&m.store);
        let (nll, seq) = m.decoder.teacher_forced(&mut t, &v, &caption).unwrap();
        let rv = m.recon.as_ref().unwrap().forward(&mut t, &seq.hidden, &v).unwrap();
        t.scalar(nll) + lambda * t.scalar(rv.loss)
    };
    let eps = 1e-5;
    for k in 0..width {
        let i = 5 * width + k;
        let mut probe = model.clone();
        probe.store.get_mut(embed).tensor.value.data_mut()[i] += eps;
        let up = loss(&probe);
        probe.store.get_mut(embed).tensor.value.data_mut()[i] -= 2.0 * eps;
        let down = loss(&probe);
        let numeric = (up - down) / (2.0 * eps);
        let err = (numeric - analytic[i]).abs() / numeric.abs().max(analytic[i].abs()).max(1e-6);
        assert!(err < 1e-4, "entry {k}: {numeric} vs {}", analytic[i]);
    }
}

#[test]
fn fifty_steps_lower_the_loss() {
    let mut model = shrunk_model(8, 10, 8, 8, None);
    let mut rng = reconcap::rng::XorShift64Star::new(9);
    let (v1, v2) = (random_features(&mut rng, 28, 8, 28), random_features(&mut rng, 28, 8, 28));
    let batch = [
        XeItem {
            features: &v1,
            caption: &[4, 5, 6],
        },
        XeItem {
            features: &v2,
            caption: &[7, 8, 9],
        },
    ];
    let mut opt = Optimizer::new(OptimizerSpec::adadelta());
    let first = xe_step(&mut model, &batch, &mut opt).unwrap();
    let mut last = first;
    for _ in 0..49 {
        last = xe_step(&mut model, &batch, &mut opt).unwrap();
    }
    assert!(last < first, "{first} -> {last}");
}

#[test]
fn zero_advantage_item_produces_no_gradient() {
    let mut model = shrunk_model(10, 8, 8, 8, None);
    let mut rng = reconcap::rng::XorShift64Star::new(11);
    let v = random_features(&mut rng, 28, 8, 28);
    let entry = reconcap::data::VideoEntry {
        video_id: "v".into(),
        features: v,
        // Token 9 is outside the 8-word vocabulary, so every reward is 0.
        references: vec![vec![9, 9, 9]],
    };
    let df = DocFreq::build(&[entry.references.clone(), vec![vec![4]]]);
    let ctx = ScstContext {
        df: &df,
        variant: CiderVariant::Plain,
        lambda: 0.0,
        sample_seed: 1,
    };
    let out = scst_grads(&mut model, &[&entry], &ctx).unwrap();
    assert_eq!(out.rewards[0].advantage, 0.0);
    assert!(model.store.iter().all(|(_, p)| p.tensor.grad.is_none()));
    assert_eq!(out.stats.ed, 0.0);
}

#[test]
fn decoder_init_does_not_depend_on_reconstructor() {
    let corpus = gen_synthetic(SyntheticSpec::new(3, 20, 8)).into_corpus().unwrap();
    let mut with = Trainer::new(small_cfg(), &corpus).unwrap();
    let without = Trainer::new(
        TrainConfig {
            reconstructor: None,
            ..small_cfg()
        },
        &corpus,
    )
    .unwrap();
    with.attach_reconstructor().unwrap();
    for id in without.model.decoder.param_ids() {
        assert_eq!(with.model.store.value(id), without.model.store.value(id));
    }
    assert!(with.model.store.len() > without.model.store.len());
}

#[test]
fn checkpoint_round_trip_preserves_evaluation() {
    let corpus = gen_synthetic(SyntheticSpec::new(4, 20, 8)).into_corpus().unwrap();
    let cfg = TrainConfig {
        stage: Stage::Joint,
        max_epochs: 3,
        ..small_cfg()
    };
    let out = reconcap::train::train(cfg, &corpus).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.rcnc");
    out.checkpoint.save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    let a = evaluate(&out.checkpoint.model().unwrap(), &corpus, "test", 3, CiderVariant::Plain).unwrap();
    let b = evaluate(&loaded.model().unwrap(), &corpus, "test", 3, CiderVariant::Plain).unwrap();
    assert_eq!(a, b);
    assert_eq!(loaded.to_bytes(), out.checkpoint.to_bytes());
    assert_eq!(loaded.config, out.checkpoint.config);
}

#[test]
fn rl_joint_stage_runs_and_logs_every_phase() {
    let corpus = gen_synthetic(SyntheticSpec::new(5, 20, 8)).into_corpus().unwrap();
    let cfg = TrainConfig {
        stage: Stage::RlJoint,
        reconstructor: Some(ReconKind::Global),
        max_epochs: 2,
        ..small_cfg()
    };
    let out = reconcap::train::train(cfg, &corpus).unwrap();
    let phases: Vec<Phase> = out.log.iter().map(|l| l.phase).collect();
    assert_eq!(
        phases,
        [Phase::Xe, Phase::Xe, Phase::Joint, Phase::Joint, Phase::ScstJoint, Phase::ScstJoint]
    );
    for l in &out.log {
        assert!(l.max_decomposition_error < 1e-12);
        assert!(l.val_cider.is_finite());
    }
}

#[test]
fn trainer_is_deterministic() {
    let corpus = gen_synthetic(SyntheticSpec::new(6, 20, 8)).into_corpus().unwrap();
    let cfg = TrainConfig {
        stage: Stage::Rl,
        max_epochs: 2,
        ..small_cfg()
    };
    let a = reconcap::train::train(cfg.clone(), &corpus).unwrap();
    let b = reconcap::train::train(cfg, &corpus).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.checkpoint.to_bytes(), b.checkpoint.to_bytes());
}
