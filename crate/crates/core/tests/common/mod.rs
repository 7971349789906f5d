//! Plain-loop re-implementations used as oracles, plus small fixtures.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use reconcap::autodiff::{ParamStore, Tensor};
use reconcap::data::{SampledFeatures, BOS, EOS};
use reconcap::model::{CaptionModel, ModelConfig, ReconKind};
use reconcap::rng::XorShift64Star;

pub fn random_features(rng: &mut XorShift64Star, frames: usize, dim: usize, valid: usize) -> SampledFeatures {
    let mut data = vec![0.0; frames * dim];
    for x in data.iter_mut().take(valid * dim) {
        *x = rng.uniform(-1.0, 1.0);
    }
    SampledFeatures {
        matrix: Tensor::matrix(frames, dim, data).unwrap(),
        valid_count: valid,
    }
}

pub fn random_vec(rng: &mut XorShift64Star, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()
}

/// Shrunk model with a reconstructor of `kind` attached.
pub fn shrunk_model(seed: u64, vocab: usize, dim: usize, hidden: usize, kind: Option<ReconKind>) -> CaptionModel {
    let mut rng = XorShift64Star::new(seed);
    let mut model = CaptionModel::new(ModelConfig::shrunk(vocab, dim, hidden, hidden), &mut rng).unwrap();
    if let Some(k) = kind {
        model.attach_reconstructor(k, &mut rng).unwrap();
    }
    model
}

/// Row-major matrix pulled out of the store by name.
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

pub fn mat(store: &ParamStore, name: &str) -> Mat {
    let t = store.value(store.id(name).unwrap_or_else(|| panic!("no {name}")));
    let (rows, cols) = match t.shape() {
        [r, c] => (*r, *c),
        [n] => (1, *n),
        s => panic!("rank {}", s.len()),
    };
    Mat {
        rows,
        cols,
        data: t.data().to_vec(),
    }
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// x·W for a row vector x.
fn vecmat(x: &[f64], w: &Mat) -> Vec<f64> {
    assert_eq!(x.len(), w.rows);
    let mut out = vec![0.0; w.cols];
    for (i, xi) in x.iter().enumerate() {
        for (j, o) in out.iter_mut().enumerate() {
            *o += xi * w.get(i, j);
        }
    }
    out
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Gates in i, f, o, g order.
fn lstm(w: &Mat, b: Option<&Mat>, input: &[f64], mem: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = mem.len();
    let mut pre = vecmat(input, w);
    if let Some(b) = b {
        for (p, bb) in pre.iter_mut().zip(&b.data) {
            *p += bb;
        }
    }
    let mut h = vec![0.0; n];
    let mut c = vec![0.0; n];
    for k in 0..n {
        let i = sig(pre[k]);
        let f = sig(pre[n + k]);
        let o = sig(pre[2 * n + k]);
        let g = pre[3 * n + k].tanh();
        c[k] = f * mem[k] + i * g;
        h[k] = o * c[k].tanh();
    }
    (h, c)
}

/// Additive attention: softmax_i(w·tanh(keys_i + q)) and Σ α_i values_i.
pub fn attention(keys: &[Vec<f64>], q: &[f64], w: &[f64], values: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let e: Vec<f64> = keys
        .iter()
        .map(|k| k.iter().zip(q).zip(w).map(|((a, b), c)| c * (a + b).tanh()).sum())
        .collect();
    let alpha = softmax(&e);
    let mut ctx = vec![0.0; values[0].len()];
    for (a, v) in alpha.iter().zip(values) {
        for (c, x) in ctx.iter_mut().zip(v) {
            *c += a * x;
        }
    }
    (alpha, ctx)
}

pub fn rows(v: &SampledFeatures) -> Vec<Vec<f64>> {
    (0..v.frames()).map(|j| v.row(j).to_vec()).collect()
}

pub struct DecoderOracle {
    pub nll: f64,
    pub hidden: Vec<Vec<f64>>,
    pub alpha: Vec<Vec<f64>>,
}

/// Teacher-forced NLL of `caption` + EOS by explicit loops.
pub fn decoder_oracle(store: &ParamStore, v: &SampledFeatures, caption: &[u32]) -> DecoderOracle {
    let embed = mat(store, "decoder.embed");
    let w = mat(store, "decoder.lstm.w");
    let b = mat(store, "decoder.lstm.b");
    let w_vd = mat(store, "decoder.attn.w_vd");
    let w_hd = mat(store, "decoder.attn.w_hd");
    let b_d = mat(store, "decoder.attn.b_d");
    let w_a = mat(store, "decoder.attn.w_a");
    let out_w = mat(store, "decoder.out.w");
    let out_b = mat(store, "decoder.out.b");
    let hidden = w_hd.rows;
    let frames = rows(v);
    let keys: Vec<Vec<f64>> = frames.iter().map(|f| vecmat(f, &w_vd)).collect();
    let mut h = vec![0.0; hidden];
    let mut mem = vec![0.0; hidden];
    let mut prev = BOS;
    let mut out = DecoderOracle {
        nll: 0.0,
        hidden: Vec::new(),
        alpha: Vec::new(),
    };
    let targets: Vec<u32> = caption.iter().copied().chain([EOS]).collect();
    for &target in &targets {
        let q: Vec<f64> = vecmat(&h, &w_hd).iter().zip(&b_d.data).map(|(a, b)| a + b).collect();
        let (alpha, ctx) = attention(&keys, &q, &w_a.data, &frames);
        let mut input: Vec<f64> = (0..embed.cols).map(|k| embed.get(prev as usize, k)).collect();
        input.extend(&ctx);
        input.extend(&h);
        let (hn, mn) = lstm(&w, Some(&b), &input, &mem);
        h = hn;
        mem = mn;
        let logits: Vec<f64> = vecmat(&h, &out_w).iter().zip(&out_b.data).map(|(a, b)| a + b).collect();
        let p = softmax(&logits);
        out.nll -= p[target as usize].ln();
        out.hidden.push(h.clone());
        out.alpha.push(alpha);
        prev = target;
    }
    out
}

fn psi(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

fn mean_rows(xs: &[Vec<f64>]) -> Vec<f64> {
    let mut m = vec![0.0; xs[0].len()];
    for x in xs {
        for (a, b) in m.iter_mut().zip(x) {
            *a += b;
        }
    }
    m.iter().map(|a| a / xs.len() as f64).collect()
}

pub fn valid_mean(v: &SampledFeatures) -> Vec<f64> {
    mean_rows(&rows(v)[..v.valid_count])
}

/// Global reconstruction loss by explicit loops.
pub fn global_oracle(store: &ParamStore, hidden: &[Vec<f64>], v: &SampledFeatures) -> f64 {
    let w = mat(store, "recon.global.lstm.w");
    let r = v.dim();
    let pooled = mean_rows(hidden);
    let mut z = vec![0.0; r];
    let mut mem = vec![0.0; r];
    let mut zs = Vec::new();
    for h in hidden {
        let mut input = h.clone();
        input.extend(&z);
        input.extend(&pooled);
        let (zn, mn) = lstm(&w, None, &input, &mem);
        z = zn;
        mem = mn;
        zs.push(z.clone());
    }
    psi(&valid_mean(v), &mean_rows(&zs))
}

/// Reconstructed sequence and β rows of the attentive reconstructor.
pub fn local_pass(store: &ParamStore, hidden: &[Vec<f64>], steps: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let w_beta = mat(store, "recon.local.attn.w_beta");
    let w_hr = mat(store, "recon.local.attn.w_hr");
    let w_zr = mat(store, "recon.local.attn.w_zr");
    let b_r = mat(store, "recon.local.attn.b_r");
    let w = mat(store, "recon.local.lstm.w");
    let r = w_zr.rows;
    let keys: Vec<Vec<f64>> = hidden.iter().map(|h| vecmat(h, &w_hr)).collect();
    let mut z = vec![0.0; r];
    let mut mem = vec![0.0; r];
    let mut zs = Vec::new();
    let mut betas = Vec::new();
    for _ in 0..steps {
        let q: Vec<f64> = vecmat(&z, &w_zr).iter().zip(&b_r.data).map(|(a, b)| a + b).collect();
        let (beta, mu) = attention(&keys, &q, &w_beta.data, hidden);
        let mut input = mu;
        input.extend(&z);
        let (zn, mn) = lstm(&w, None, &input, &mem);
        z = zn;
        mem = mn;
        zs.push(z.clone());
        betas.push(beta);
    }
    (zs, betas)
}

pub fn local_oracle(store: &ParamStore, hidden: &[Vec<f64>], v: &SampledFeatures) -> f64 {
    let (zs, _) = local_pass(store, hidden, v.frames());
    let fr = rows(v);
    zs.iter().zip(&fr).map(|(z, f)| psi(z, f)).sum::<f64>() / v.frames() as f64
}

/// (total, global term, local term).
pub fn joint_oracle(store: &ParamStore, hidden: &[Vec<f64>], v: &SampledFeatures) -> (f64, f64, f64) {
    let (zs, _) = local_pass(store, hidden, v.frames());
    let fr = rows(v);
    let local = zs.iter().zip(&fr).map(|(z, f)| psi(z, f)).sum::<f64>() / v.frames() as f64;
    let global = psi(&mean_rows(&zs[..v.valid_count]), &valid_mean(v));
    (global + local, global, local)
}

fn grams(s: &[u32], n: usize) -> BTreeMap<Vec<u32>, f64> {
    let mut m = BTreeMap::new();
    if s.len() >= n {
        for w in s.windows(n) {
            *m.entry(w.to_vec()).or_insert(0.0) += 1.0;
        }
    }
    m
}

/// Plain CIDEr per sentence: TF-IDF cosine averaged over references and n.
pub fn cider_oracle(cands: &[Vec<u32>], refs: &[Vec<Vec<u32>>]) -> Vec<f64> {
    let n_ref = refs.len() as f64;
    let df = |g: &Vec<u32>| -> f64 {
        refs.iter()
            .filter(|set| set.iter().any(|r| r.windows(g.len()).any(|w| w == g.as_slice())))
            .count() as f64
    };
    let vecf = |s: &[u32], n: usize| -> BTreeMap<Vec<u32>, f64> {
        let g = grams(s, n);
        let total: f64 = g.values().sum();
        g.into_iter()
            .map(|(k, c)| {
                let d = df(&k);
                let idf = if d > 0.0 { (n_ref / d).ln() } else { n_ref.ln() };
                (k, c / total * idf)
            })
            .collect()
    };
    let cos = |a: &BTreeMap<Vec<u32>, f64>, b: &BTreeMap<Vec<u32>, f64>| -> f64 {
        let keys: BTreeSet<&Vec<u32>> = a.keys().chain(b.keys()).collect();
        let dot: f64 = keys.iter().map(|k| a.get(*k).unwrap_or(&0.0) * b.get(*k).unwrap_or(&0.0)).sum();
        let na = a.values().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.values().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            dot / (na * nb)
        }
    };
    cands
        .iter()
        .zip(refs)
        .map(|(c, set)| {
            let mut s = 0.0;
            for n in 1..=4 {
                let cv = vecf(c, n);
                s += set.iter().map(|r| cos(&cv, &vecf(r, n))).sum::<f64>() / set.len() as f64;
            }
            10.0 * s / 4.0
        })
        .collect()
}

/// Parses space-separated single-letter words into ids `a → 10, b → 11, …`.
pub fn toks(s: &str) -> Vec<u32> {
    s.split_whitespace()
        .map(|w| {
            assert_eq!(w.len(), 1);
            10 + (w.as_bytes()[0] - b'a') as u32
        })
        .collect()
}

pub mod suites {
    //! Checks shared by the focused test files and the acceptance run.

    use super::*;
    use reconcap::autodiff::gradcheck::{check_leaves, check_params, GradCheckReport, Tolerance};
    use reconcap::autodiff::{Tape, Var};
    use reconcap::error::Result;
    use reconcap::metrics::{bleu4, cider, rouge_l, CiderVariant, DocFreq};
    use reconcap::model::{beam_search, greedy_decode, StepModel};

    pub const INSTANCES: u64 = 10;

    fn rand_tensor(rng: &mut XorShift64Star, shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), random_vec(rng, n)).unwrap()
    }

    /// Reduces any output to a scalar through fixed random weights so every
    /// output entry gets a distinct adjoint.
    fn weighted_sum(t: &mut Tape<'static>, out: Var, seed: u64) -> Result<Var> {
        let shape = t.shape(out).to_vec();
        let mut rng = XorShift64Star::new(seed ^ 0xabcd);
        let w = t.constant(rand_tensor(&mut rng, &shape));
        let prod = t.hadamard(out, w)?;
        Ok(t.sum_all(prod))
    }

    type Build = fn(&mut Tape<'static>, &[Var]) -> Result<Var>;

    pub fn primitives() -> Vec<(&'static str, Vec<Vec<usize>>, Build)> {
        fn s(shapes: &[&[usize]]) -> Vec<Vec<usize>> {
            shapes.iter().map(|x| x.to_vec()).collect()
        }
        vec![
            ("matmul", s(&[&[3, 4], &[4, 2]]), |t, x| t.matmul(x[0], x[1])),
            ("vec-matmul", s(&[&[4], &[4, 3]]), |t, x| t.matmul(x[0], x[1])),
            ("matvec", s(&[&[3, 4], &[4]]), |t, x| t.matvec(x[0], x[1])),
            ("add", s(&[&[5], &[5]]), |t, x| t.add(x[0], x[1])),
            ("sub", s(&[&[2, 3], &[2, 3]]), |t, x| t.sub(x[0], x[1])),
            ("hadamard", s(&[&[6], &[6]]), |t, x| t.hadamard(x[0], x[1])),
            ("add_row_bias", s(&[&[3, 4], &[4]]), |t, x| t.add_row_bias(x[0], x[1])),
            ("scale", s(&[&[4]]), |t, x| Ok(t.scale(x[0], -1.7))),
            ("sigmoid", s(&[&[6]]), |t, x| Ok(t.sigmoid(x[0]))),
            ("tanh", s(&[&[2, 3]]), |t, x| Ok(t.tanh(x[0]))),
            ("softmax", s(&[&[5]]), |t, x| t.softmax(x[0])),
            ("log_softmax", s(&[&[5]]), |t, x| t.log_softmax(x[0])),
            ("pick", s(&[&[5]]), |t, x| {
                let l = t.log_softmax(x[0])?;
                t.pick(l, 2)
            }),
            ("concat", s(&[&[2], &[3], &[1]]), |t, x| t.concat(x)),
            ("slice", s(&[&[7]]), |t, x| t.slice(x[0], 2, 3)),
            ("row", s(&[&[3, 4]]), |t, x| t.row(x[0], 1)),
            ("stack", s(&[&[4], &[4], &[4]]), |t, x| t.stack(x)),
            ("reshape", s(&[&[2, 3]]), |t, x| t.reshape(x[0], &[3, 2])),
            ("add_n", s(&[&[3], &[3], &[3]]), |t, x| t.add_n(x)),
            ("sum_all", s(&[&[2, 2]]), |t, x| Ok(t.sum_all(x[0]))),
            ("mean_pool", s(&[&[3], &[3], &[3], &[3], &[3]]), |t, x| t.mean_pool(x)),
            ("sq_euclidean", s(&[&[8], &[8]]), |t, x| t.sq_euclidean(x[0], x[1])),
            ("affine-tanh-distance", s(&[&[3, 4], &[4], &[3]]), |t, x| {
                let wv = t.matvec(x[0], x[1])?;
                let a = t.tanh(wv);
                t.sq_euclidean(a, x[2])
            }),
        ]
    }

    /// `INSTANCES` random checks of one primitive.
    pub fn primitive_reports(name: &str, shapes: &[Vec<usize>], build: Build) -> Vec<GradCheckReport> {
        (0..INSTANCES)
            .map(|k| {
                let mut rng = XorShift64Star::stream(k, name.len() as u64);
                let inputs: Vec<Tensor> = shapes.iter().map(|s| rand_tensor(&mut rng, s)).collect();
                check_leaves(
                    &inputs,
                    |t, xs| {
                        let out = build(t, xs)?;
                        weighted_sum(t, out, k)
                    },
                    &Tolerance::default(),
                )
                .unwrap()
            })
            .collect()
    }

    /// `INSTANCES` checks of NLL + λ·reconstruction over every parameter of
    /// a shrunk model (6-word vocabulary, d = 8, hidden 8).
    pub fn model_loss_reports(kind: Option<ReconKind>, lambda: f64) -> Vec<GradCheckReport> {
        (0..INSTANCES)
            .map(|k| {
                let model = shrunk_model(200 + k, 6, 8, 8, kind);
                let mut rng = XorShift64Star::new(300 + k);
                let v = random_features(&mut rng, 28, 8, 10 + k as usize);
                let len = 1 + (k as usize % 3);
                let caption: Vec<u32> = (0..len).map(|_| 3 + rng.below(3) as u32).collect();
                let mut ids = model.decoder.param_ids();
                if let Some(r) = &model.recon {
                    ids.extend(r.param_ids());
                }
                check_params(
                    &model.store,
                    &ids,
                    6,
                    |t| {
                        let (nll, seq) = model.decoder.teacher_forced(t, &v, &caption)?;
                        match &model.recon {
                            Some(r) => {
                                let rv = r.forward(t, &seq.hidden, &v)?;
                                let w = t.scale(rv.loss, lambda);
                                t.add(nll, w)
                            }
                            None => Ok(nll),
                        }
                    },
                    &Tolerance::default(),
                )
                .unwrap()
            })
            .collect()
    }

    /// Passes the tolerance and is not trivially all-zero.
    pub fn report_ok(r: &GradCheckReport) -> bool {
        r.passes(&Tolerance::default()) && r.any_nonzero_analytic()
    }

    /// Largest relative error over entries whose gradient is not negligible.
    pub fn worst(reports: &[GradCheckReport]) -> f64 {
        reports
            .iter()
            .flat_map(|r| &r.entries)
            .filter(|e| e.analytic.abs().max(e.numeric.abs()) > 1e-6)
            .map(|e| e.rel_error())
            .fold(0.0, f64::max)
    }

    pub struct Fixture {
        pub name: &'static str,
        pub got: f64,
        pub expected: f64,
    }

    fn one(c: &str, refs: &[&str]) -> (Vec<Vec<u32>>, Vec<Vec<Vec<u32>>>) {
        (vec![toks(c)], vec![refs.iter().map(|r| toks(r)).collect()])
    }

    /// Hand-counted metric values.
    pub fn metric_fixtures() -> Vec<Fixture> {
        let mut out = Vec::new();
        let mut push = |name, got: f64, expected: f64| out.push(Fixture { name, got, expected });
        let bleu = |c: &str, r: &[&str]| {
            let (c, r) = one(c, r);
            bleu4(&c, &r).unwrap()
        };
        let rouge = |c: &str, r: &[&str]| {
            let (c, r) = one(c, r);
            rouge_l(&c, &r).unwrap()
        };
        let b2 = 1.2f64 * 1.2;
        let f = |p: f64, r: f64| (1.0 + b2) * p * r / (r + b2 * p);

        push("bleu identical", bleu("a b c d e", &["a b c d e"]), 1.0);
        push("bleu disjoint", bleu("a b c d", &["e f g h"]), 0.0);
        // p = 4/5, 3/4, 2/3, 1/2.
        push(
            "bleu one substitution",
            bleu("a b c d e", &["a b c d f"]),
            (0.8f64 * 0.75 * (2.0 / 3.0) * 0.5).powf(0.25),
        );
        push("bleu brevity", bleu("a b c d", &["a b c d e f"]), (-0.5f64).exp());
        push(
            "bleu closest reference",
            bleu("a b c d", &["a b c d e f g", "a b c d e"]),
            (-0.25f64).exp(),
        );
        // Bigrams aa ab bc cd vs ab bc cd da: 3/4; trigrams 2/3; 4-grams 1/2.
        push(
            "bleu reordered",
            bleu("a a b c d", &["a b c d a"]),
            (0.75f64 * (2.0 / 3.0) * 0.5).powf(0.25),
        );
        push("bleu clipped", bleu("a a a a a", &["a b c d e"]), 0.0);
        // Matched n-grams 4+3, 3+1, 2+0, 1+0 over totals 8, 6, 4, 2.
        let c = vec![toks("a b c d"), toks("e f g h")];
        let r = vec![vec![toks("a b c d")], vec![toks("e f x h")]];
        push(
            "bleu pooled corpus",
            bleu4(&c, &r).unwrap(),
            ((7.0 / 8.0) * (4.0 / 6.0) * (2.0 / 4.0) * (1.0 / 2.0f64)).powf(0.25),
        );

        push("rouge identical", rouge("a b c", &["a b c"]), 1.0);
        push("rouge disjoint", rouge("a b", &["c d"]), 0.0);
        push("rouge swapped", rouge("a c b", &["a b c"]), 2.0 / 3.0);
        push("rouge short candidate", rouge("a b", &["a b c d"]), f(1.0, 0.5));
        push("rouge best reference", rouge("a b c d", &["d c", "x a b c"]), f(0.75, 0.75));
        let c = vec![toks("a b c"), toks("a b")];
        let r = vec![vec![toks("a b c")], vec![toks("c d")]];
        push("rouge corpus mean", rouge_l(&c, &r).unwrap(), 0.5);

        let refs = vec![
            vec![toks("a b c d"), toks("a b c e")],
            vec![toks("f g h i")],
            vec![toks("a g h j"), toks("k b")],
        ];
        let df = DocFreq::build(&refs);
        let sent = |c: &str, set: usize, df: &DocFreq, refs: &[Vec<Vec<u32>>]| {
            cider(&[toks(c)], &refs[set..set + 1], df, CiderVariant::Plain).unwrap().1[0]
        };
        push("cider identical", sent("f g h i", 1, &df, &refs), 10.0);
        push("cider disjoint", sent("x y z", 0, &df, &refs), 0.0);
        let refs3 = vec![vec![toks("a b c")], vec![toks("d e f")]];
        let df3 = DocFreq::build(&refs3);
        push("cider three tokens", sent("a b c", 0, &df3, &refs3), 7.5);
        let cands = vec![toks("a b c e"), toks("f g h"), toks("a b g h j k")];
        let (_, per) = cider(&cands, &refs, &df, CiderVariant::Plain).unwrap();
        let oracle = cider_oracle(&cands, &refs);
        for (i, (g, e)) in per.iter().zip(oracle).enumerate() {
            push(["cider brute force 0", "cider brute force 1", "cider brute force 2"][i], *g, e);
        }
        out
    }

    /// Best emitted sequence by brute force over every path of at most
    /// `max_steps` tokens.
    pub fn exhaustive<M: StepModel>(model: &M) -> (Vec<u32>, f64) {
        fn go<M: StepModel>(m: &M, prefix: &mut Vec<u32>, state: &M::State, score: f64, best: &mut (Vec<u32>, f64)) {
            let prev = prefix.last().copied().unwrap_or(BOS);
            let (logp, next) = m.step(prev, state).unwrap();
            for (tok, lp) in logp.iter().enumerate() {
                let s = score + lp;
                prefix.push(tok as u32);
                if tok as u32 == EOS || prefix.len() == m.max_steps() {
                    if s > best.1 {
                        *best = (prefix.clone(), s);
                    }
                } else {
                    go(m, prefix, &next, s, best);
                }
                prefix.pop();
            }
        }
        let mut best = (Vec::new(), f64::NEG_INFINITY);
        go(model, &mut Vec::new(), &model.initial(), 0.0, &mut best);
        best
    }

    /// One random 4-word, length-3 model: (beam 64 == exhaustive, beam 1 == greedy).
    pub fn beam_draw(seed: u64) -> (bool, bool) {
        let mut rng = XorShift64Star::new(1000 + seed);
        let cfg = ModelConfig {
            max_steps: 3,
            ..ModelConfig::shrunk(4, 8, 8, 8)
        };
        let mut model = CaptionModel::new(cfg, &mut rng).unwrap();
        // Sharpen the output layer so paths differ clearly.
        let out = model.store.id("decoder.out.w").unwrap();
        model.store.get_mut(out).tensor.value.data_mut().iter_mut().for_each(|w| *w *= 8.0);
        let v = random_features(&mut rng, 28, 8, 28);
        let sess = model.session(&v).unwrap();
        let (best, score) = exhaustive(&sess);
        let got = beam_search(&sess, 64).unwrap();
        let exact = got.emitted() == best && (got.log_prob() - score).abs() < 1e-12;
        let greedy = beam_search(&sess, 1).unwrap() == greedy_decode(&sess).unwrap();
        (exact, greedy)
    }
}
