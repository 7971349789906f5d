//! Evaluation, accuracy, hidden-state diagnostics and the λ sweep.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::data::vocab::EOS;
use crate::data::{Corpus, VideoEntry};
use crate::error::{Error, Result};
use crate::metrics::{CiderVariant, MetricReport};
use crate::model::{search::argmax, CaptionModel};

use super::config::{Stage, TrainConfig};
use super::trainer::{Phase, Trainer};

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub video_ids: Vec<String>,
    pub captions: Vec<Vec<u32>>,
    pub report: MetricReport,
}

/// Beam-decodes every entry and scores against its references.
pub fn evaluate_entries(
    model: &CaptionModel,
    entries: &[&VideoEntry],
    beam: usize,
    variant: CiderVariant,
) -> Result<Evaluation> {
    let entries: Vec<&VideoEntry> = entries.iter().copied().filter(|e| !e.references.is_empty()).collect();
    if entries.is_empty() {
        return Err(Error::Config("nothing to evaluate".into()));
    }
    let captions: Vec<Vec<u32>> = entries
        .par_iter()
        .map(|e| model.beam(&e.features, beam).map(|d| d.tokens))
        .collect::<Result<_>>()?;
    let refs: Vec<Vec<Vec<u32>>> = entries.iter().map(|e| e.references.clone()).collect();
    let report = MetricReport::compute(&captions, &refs, variant)?;
    Ok(Evaluation {
        video_ids: entries.iter().map(|e| e.video_id.clone()).collect(),
        captions,
        report,
    })
}

pub fn evaluate(model: &CaptionModel, corpus: &Corpus, split: &str, beam: usize, variant: CiderVariant) -> Result<Evaluation> {
    let entries = corpus.split_entries(split)?;
    evaluate_entries(model, &entries, beam, variant)
}

/// Fraction of teacher-forced steps (EOS included) whose argmax logit is the
/// ground-truth token, over every reference of every entry.
pub fn teacher_forced_accuracy(model: &CaptionModel, entries: &[&VideoEntry]) -> Result<f64> {
    let counts: Vec<(usize, usize)> = entries
        .par_iter()
        .map(|e| {
            let mut hit = 0;
            let mut total = 0;
            for cap in &e.references {
                let mut targets = cap.clone();
                targets.push(EOS);
                let mut t = Tape::with_params(&model.store);
                let seq = model.decoder.score_sequence(&mut t, &e.features, &targets)?;
                for (l, &target) in seq.logits.iter().zip(&targets) {
                    hit += usize::from(argmax(t.data(*l)) == target as usize);
                    total += 1;
                }
            }
            Ok((hit, total))
        })
        .collect::<Result<_>>()?;
    let (hit, total) = counts.iter().fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    if total == 0 {
        return Err(Error::Empty("teacher_forced_accuracy"));
    }
    Ok(hit as f64 / total as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiagMode {
    TeacherForced,
    Greedy,
}

impl DiagMode {
    pub fn label(self) -> &'static str {
        match self {
            DiagMode::TeacherForced => "teacher_forced",
            DiagMode::Greedy => "greedy",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagRow {
    pub mode: DiagMode,
    pub video_id: String,
    pub state: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HiddenDiagnostic {
    pub rows: Vec<DiagRow>,
    /// Euclidean distance between the two modes' centroids.
    pub discrepancy: f64,
}

/// Last decoder hidden state per video under teacher forcing (first
/// reference) and under free-running greedy decoding.
pub fn hidden_diagnostic(model: &CaptionModel, entries: &[&VideoEntry]) -> Result<HiddenDiagnostic> {
    let entries: Vec<&VideoEntry> = entries.iter().copied().filter(|e| !e.references.is_empty()).collect();
    if entries.is_empty() {
        return Err(Error::Config("diagnostic split has no captioned videos".into()));
    }
    let last_hidden = |e: &VideoEntry, targets: &[u32]| -> Result<Vec<f64>> {
        let mut t = Tape::with_params(&model.store);
        let seq = model.decoder.score_sequence(&mut t, &e.features, targets)?;
        Ok(t.data(*seq.hidden.last().expect("nonempty sequence")).to_vec())
    };
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = entries
        .par_iter()
        .map(|e| {
            let mut gt = e.references[0].clone();
            gt.push(EOS);
            let tf = last_hidden(e, &gt)?;
            let free = model.greedy(&e.features)?.emitted();
            let gr = last_hidden(e, &free)?;
            Ok((tf, gr))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(2 * pairs.len());
    for (e, (tf, gr)) in entries.iter().zip(pairs) {
        rows.push(DiagRow {
            mode: DiagMode::TeacherForced,
            video_id: e.video_id.clone(),
            state: tf,
        });
        rows.push(DiagRow {
            mode: DiagMode::Greedy,
            video_id: e.video_id.clone(),
            state: gr,
        });
    }
    let centroid = |mode: DiagMode| {
        let sel: Vec<&DiagRow> = rows.iter().filter(|r| r.mode == mode).collect();
        let mut c = vec![0.0; sel[0].state.len()];
        for r in &sel {
            c.iter_mut().zip(&r.state).for_each(|(a, b)| *a += b);
        }
        c.iter_mut().for_each(|a| *a /= sel.len() as f64);
        c
    };
    let (a, b) = (centroid(DiagMode::TeacherForced), centroid(DiagMode::Greedy));
    let discrepancy = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    Ok(HiddenDiagnostic { rows, discrepancy })
}

impl HiddenDiagnostic {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let dim = self.rows.first().map_or(0, |r| r.state.len());
        let header: Vec<String> = (0..dim).map(|i| format!("dim_{i}")).collect();
        writeln!(out, "mode,video_id,{}", header.join(","))?;
        for r in &self.rows {
            let vals: Vec<String> = r.state.iter().map(|x| format!("{x:?}")).collect();
            writeln!(out, "{},{},{}", r.mode.label(), r.video_id, vals.join(","))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub bleu4: f64,
    pub rouge_l: f64,
    pub cider: f64,
}

pub const SWEEP_HEADER: &str = "lambda,bleu4,rouge_l,cider";

impl SweepRow {
    pub fn csv_row(&self) -> String {
        format!("{:?},{:?},{:?},{:?}", self.lambda, self.bleu4, self.rouge_l, self.cider)
    }
}

/// Joint training over several λ from one shared cross-entropy stage,
/// scoring each result on the validation split.
pub fn lambda_sweep(cfg: &TrainConfig, corpus: &Corpus, lambdas: &[f64]) -> Result<Vec<SweepRow>> {
    if cfg.reconstructor.is_none() {
        return Err(Error::Config("lambda sweep needs a reconstructor".into()));
    }
    if let Some(&l) = lambdas.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(Error::Config(format!("invalid lambda {l}")));
    }
    let base_cfg = TrainConfig {
        stage: Stage::Joint,
        ..cfg.clone()
    };
    let mut base = Trainer::new(base_cfg, corpus)?;
    base.run_phase(Phase::Xe)?;
    let mut rows = Vec::new();
    for &lambda in lambdas {
        let mut t = base.clone();
        t.cfg.lambda = Some(lambda);
        t.run_phase(Phase::Joint)?;
        let ev = evaluate_entries(&t.model, t.val_videos(), cfg.eval_beam, cfg.cider_variant)?;
        log::info!("lambda {lambda}: val cider {:.4}", ev.report.cider);
        rows.push(SweepRow {
            lambda,
            bleu4: ev.report.bleu4,
            rouge_l: ev.report.rouge_l,
            cider: ev.report.cider,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, SyntheticSpec};
    use crate::model::ModelConfig;
    use crate::rng::XorShift64Star;

    fn setup() -> (Corpus, CaptionModel) {
        let corpus = gen_synthetic(SyntheticSpec::new(2, 20, 8)).into_corpus().unwrap();
        let cfg = ModelConfig::shrunk(corpus.vocab.len(), 8, 8, 8);
        let model = CaptionModel::new(cfg, &mut XorShift64Star::new(1)).unwrap();
        (corpus, model)
    }

    #[test]
    fn evaluation_is_in_range_and_repeatable() {
        let (corpus, model) = setup();
        let a = evaluate(&model, &corpus, "test", 2, CiderVariant::Plain).unwrap();
        let b = evaluate(&model, &corpus, "test", 2, CiderVariant::Plain).unwrap();
        assert_eq!(a, b);
        assert!(a.report.in_range());
        assert_eq!(a.captions.len(), corpus.splits.test.len());
    }

    #[test]
    fn accuracy_is_a_fraction() {
        let (corpus, model) = setup();
        let entries = corpus.split_entries("train").unwrap();
        let acc = teacher_forced_accuracy(&model, &entries).unwrap();
        assert!((0.0..=1.0).contains(&acc));
        assert!(teacher_forced_accuracy(&model, &[]).is_err());
    }

    #[test]
    fn diagnostic_rows_and_csv() {
        let (corpus, model) = setup();
        let entries = corpus.split_entries("val").unwrap();
        let d = hidden_diagnostic(&model, &entries).unwrap();
        assert_eq!(d.rows.len(), 2 * entries.len());
        assert!(d.discrepancy >= 0.0);
        let mut out = Vec::new();
        d.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("mode,video_id,dim_0,"));
        assert_eq!(text.lines().count(), 1 + d.rows.len());
    }

    #[test]
    fn sweep_requires_reconstructor() {
        let (corpus, _) = setup();
        let cfg = TrainConfig {
            reconstructor: None,
            ..TrainConfig::default()
        };
        assert!(lambda_sweep(&cfg, &corpus, &[0.0]).is_err());
        let row = SweepRow {
            lambda: 0.1,
            bleu4: 0.0,
            rouge_l: 0.5,
            cider: 1.25,
        };
        assert_eq!(row.csv_row(), "0.1,0.0,0.5,1.25");
    }
}
