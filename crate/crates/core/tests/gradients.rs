//! Finite-difference checks of every primitive and every training loss.

mod common;

use common::suites::{model_loss_reports, primitive_reports, primitives, report_ok};
use common::*;
use reconcap::autodiff::gradcheck::{check_params, Tolerance};
use reconcap::autodiff::Tape;
use reconcap::model::ReconKind;
use reconcap::rng::XorShift64Star;

#[test]
fn every_primitive() {
    for (name, shapes, build) in primitives() {
        for (k, r) in primitive_reports(name, &shapes, build).iter().enumerate() {
            let tol = Tolerance::default();
            assert!(report_ok(r), "{name} #{k}: {:?}", r.failures(&tol).first());
        }
    }
}

fn check_model(kind: Option<ReconKind>) {
    for (k, r) in model_loss_reports(kind, 0.7).iter().enumerate() {
        assert!(report_ok(r), "{kind:?} #{k}: {:?}", r.failures(&Tolerance::default()).first());
    }
}

#[test]
fn cross_entropy_loss() {
    check_model(None);
}

#[test]
fn global_reconstruction_loss() {
    check_model(Some(ReconKind::Global));
}

#[test]
fn local_reconstruction_loss() {
    check_model(Some(ReconKind::Local));
}

#[test]
fn joint_reconstruction_loss() {
    check_model(Some(ReconKind::Joint));
}

#[test]
fn reconstruction_gradient_reaches_embedding() {
    // Reconstruction loss alone, probed across the embedding table.
    for kind in [ReconKind::Global, ReconKind::Local, ReconKind::Joint] {
        let model = shrunk_model(7, 6, 8, 8, Some(kind));
        let mut rng = XorShift64Star::new(8);
        let v = random_features(&mut rng, 28, 8, 28);
        let report = check_params(
            &model.store,
            &[model.decoder.embed],
            36,
            |t| {
                let (_, seq) = model.decoder.teacher_forced(t, &v, &[4, 5])?;
                let rv = model.recon.as_ref().unwrap().forward(t, &seq.hidden, &v)?;
                Ok(rv.loss)
            },
            &Tolerance::default(),
        )
        .unwrap();
        assert!(report_ok(&report), "{kind}");
        assert!(report.entries.iter().any(|e| e.numeric.abs() > 1e-9));
    }
}

#[test]
fn reconstructor_parameters_receive_gradient() {
    for kind in [ReconKind::Global, ReconKind::Local, ReconKind::Joint] {
        let model = shrunk_model(9, 6, 8, 8, Some(kind));
        let mut rng = XorShift64Star::new(10);
        let v = random_features(&mut rng, 28, 8, 28);
        let mut t = Tape::with_params(&model.store);
        let (_, seq) = model.decoder.teacher_forced(&mut t, &v, &[4]).unwrap();
        let rv = model.recon.as_ref().unwrap().forward(&mut t, &seq.hidden, &v).unwrap();
        let g = t.backward(rv.loss).unwrap();
        for id in model.recon.as_ref().unwrap().param_ids() {
            assert!(g.param(id).unwrap().iter().any(|&x| x != 0.0), "{kind}");
        }
    }
}

#[test]
fn backward_is_bitwise_deterministic() {
    let model = shrunk_model(3, 6, 8, 8, Some(ReconKind::Joint));
    let mut rng = XorShift64Star::new(4);
    let v = random_features(&mut rng, 28, 8, 15);
    let run = || {
        let mut t = Tape::with_params(&model.store);
        let (nll, seq) = model.decoder.teacher_forced(&mut t, &v, &[4, 5, 3]).unwrap();
        let rv = model.recon.as_ref().unwrap().forward(&mut t, &seq.hidden, &v).unwrap();
        let loss = t.add(nll, rv.loss).unwrap();
        t.backward(loss).unwrap().into_params()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.len(), b.len());
    for ((ia, ga), (ib, gb)) in a.iter().zip(&b) {
        assert_eq!(ia, ib);
        assert!(ga.iter().zip(gb).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
