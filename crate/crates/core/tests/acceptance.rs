//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//!
//! The cheap checks run first. Criteria 1, 2 and 7 train the full model and
//! two ablations on three seeds each, which takes on the order of an hour on
//! one core.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use resgru_core::baselines;
use resgru_core::data::{load_cleveland, plan_folds, Dataset, PrepConfig, Preprocessor};
use resgru_core::embedviz::{self, tsne_2d, TsneParams, ENTROPY_TOL};
use resgru_core::eval::{
    pr_auc, roc_auc, run_cv, run_cv_with, sweep_threshold, threshold_grid, CvOptions, FoldResult, MetricsReport,
    Protocol, Summary,
};
use resgru_core::layers::{
    meanmax_backward, meanmax_pool, BiGru, ClsAttentionPool, ChannelReweight, ColumnEmbedding, EmbeddingKind,
    GruCell, GruConvention, Head, HeadDepth, InitialBlock, LayerNorm, LinearLayer, ParamSet, ResidualBlock, SeqBatch,
};
use resgru_core::model::{ModelConfig, Network, Variant};
use resgru_core::numkit::grad_check;
use resgru_core::train::{batch_loss, class_weights, clip_gradients, cosine_lr, LossSpec};
use resgru_core::{Matrix, Rng};

const SEEDS: [u64; 3] = [0, 1, 2];
const GRAD_TOL: f64 = 1e-4;
const FD_STEP: f64 = 1e-5;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn cleveland() -> Dataset {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/processed.cleveland.data");
    load_cleveland(&path).expect("bundled Cleveland file loads")
}

fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.normal()).collect()).unwrap()
}

fn dot(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
}

// ---- criterion 4 ----------------------------------------------------------

/// Worst relative error over every parameter and, when given, the input.
/// `objective` is the scalar being differentiated; `analytic` its gradients.
fn layer_error(
    ps: &ParamSet,
    input: Option<&Matrix>,
    objective: impl Fn(&ParamSet, Option<&Matrix>) -> f64,
    analytic: (ParamSet, Option<Matrix>),
) -> f64 {
    let n = ps.len();
    let mut tensors = ps.tensors().to_vec();
    let mut grads = analytic.0.tensors().to_vec();
    if let Some(x) = input {
        tensors.push(x.clone());
        grads.push(analytic.1.expect("input gradient"));
    }
    grad_check(
        |t| {
            let mut p = ps.clone();
            p.tensors_mut().clone_from_slice(&t[..n]);
            objective(&p, t.get(n))
        },
        &tensors,
        &grads,
        FD_STEP,
    )
    .expect("grad_check runs")
}

fn seq(steps: usize, batch: usize, x: &Matrix) -> SeqBatch {
    SeqBatch::new(steps, batch, x.clone())
}

/// Every layer's check for one trial, as (layer, error).
fn layer_trial(trial: u64) -> Vec<(&'static str, f64)> {
    let mut rng = Rng::new(1000 + trial);
    let (steps, batch, d_model, eps) = (6, 3, 4, 1e-5);
    let f = 2 * d_model;
    let mut out = Vec::new();

    {
        let mut ps = ParamSet::new();
        let lin = LinearLayer::new(&mut ps, "lin", 5, 3, true, &mut rng);
        let x = random_matrix(4, 5, &mut rng);
        let g = random_matrix(4, 3, &mut rng);
        let mut grads = ps.zeros_like();
        let dx = lin.backward(&ps, &x, &g, &mut grads);
        let e = layer_error(&ps, Some(&x), |p, x| dot(&lin.forward(p, x.unwrap()), &g), (grads, Some(dx)));
        out.push(("linear", e));
    }
    {
        let mut ps = ParamSet::new();
        let ln = LayerNorm::new(&mut ps, "ln", 5, eps);
        for t in ps.tensors_mut() {
            t.as_mut_slice().iter_mut().for_each(|v| *v += 0.3 * rng.normal());
        }
        let x = random_matrix(4, 5, &mut rng);
        let g = random_matrix(4, 5, &mut rng);
        let (_, cache) = ln.forward(&ps, &x);
        let mut grads = ps.zeros_like();
        let dx = ln.backward(&ps, &cache, &g, &mut grads);
        let e = layer_error(&ps, Some(&x), |p, x| dot(&ln.forward(p, x.unwrap()).0, &g), (grads, Some(dx)));
        out.push(("layernorm", e));
    }
    for (name, conv, reverse) in [
        ("gru_cell", GruConvention::KeepPrevious, false),
        ("gru_cell_reverse", GruConvention::KeepPrevious, true),
        ("gru_cell_alt_convention", GruConvention::KeepCandidate, false),
    ] {
        let mut ps = ParamSet::new();
        let cell = GruCell::new(&mut ps, "gru", d_model, 3, conv, &mut rng);
        let x = random_matrix(steps * batch, d_model, &mut rng);
        let g = random_matrix(steps * batch, 3, &mut rng);
        let cache = cell.run(&ps, &seq(steps, batch, &x), reverse);
        let mut grads = ps.zeros_like();
        let dx = cell.backward(&ps, &seq(steps, batch, &x), &cache, &g, &mut grads);
        let e = layer_error(
            &ps,
            Some(&x),
            |p, x| dot(&cell.run(p, &seq(steps, batch, x.unwrap()), reverse).hidden, &g),
            (grads, Some(dx)),
        );
        out.push((name, e));
    }
    {
        let mut ps = ParamSet::new();
        let bigru = BiGru::new(&mut ps, "bigru", d_model, d_model, true, GruConvention::KeepPrevious, &mut rng);
        let x = random_matrix(steps * batch, d_model, &mut rng);
        let g = random_matrix(steps * batch, f, &mut rng);
        let (_, cache) = bigru.forward(&ps, &seq(steps, batch, &x)).unwrap();
        let mut grads = ps.zeros_like();
        let dx = bigru.backward(&ps, &seq(steps, batch, &x), &cache, &g, &mut grads);
        let e = layer_error(
            &ps,
            Some(&x),
            |p, x| dot(&bigru.forward(p, &seq(steps, batch, x.unwrap())).unwrap().0.data, &g),
            (grads, Some(dx)),
        );
        out.push(("bigru", e));
    }
    {
        let mut ps = ParamSet::new();
        let block = InitialBlock::new(&mut ps, d_model, true, GruConvention::KeepPrevious, eps, &mut rng);
        let x = random_matrix(steps * batch, d_model, &mut rng);
        let g = random_matrix(steps * batch, f, &mut rng);
        let (_, cache) = block.forward(&ps, &seq(steps, batch, &x)).unwrap();
        let mut grads = ps.zeros_like();
        let dx = block.backward(&ps, &seq(steps, batch, &x), &cache, &g, &mut grads);
        let e = layer_error(
            &ps,
            Some(&x),
            |p, x| dot(&block.forward(p, &seq(steps, batch, x.unwrap())).unwrap().0.data, &g),
            (grads, Some(dx)),
        );
        out.push(("initial_block", e));
    }
    {
        let mut ps = ParamSet::new();
        let block = ResidualBlock::new(&mut ps, 0, f, true, GruConvention::KeepPrevious, 0.2, eps, &mut rng);
        let x = random_matrix(steps * batch, f, &mut rng);
        let g = random_matrix(steps * batch, f, &mut rng);
        let mask_seed = rng.next_u64();
        let (_, cache) = block.forward(&ps, &seq(steps, batch, &x), Some(&mut Rng::new(mask_seed))).unwrap();
        let mut grads = ps.zeros_like();
        let dx = block.backward(&ps, &seq(steps, batch, &x), &cache, &g, &mut grads);
        let e = layer_error(
            &ps,
            Some(&x),
            |p, x| {
                let (h, _) = block
                    .forward(p, &seq(steps, batch, x.unwrap()), Some(&mut Rng::new(mask_seed)))
                    .unwrap();
                dot(&h.data, &g)
            },
            (grads, Some(dx)),
        );
        out.push(("residual_block", e));
    }
    {
        let mut ps = ParamSet::new();
        let cr = ChannelReweight::new(&mut ps, f, 2, &mut rng).unwrap();
        let x = random_matrix(steps * batch, f, &mut rng);
        let g = random_matrix(steps * batch, f, &mut rng);
        let (_, cache) = cr.forward(&ps, &seq(steps, batch, &x));
        let mut grads = ps.zeros_like();
        let dx = cr.backward(&ps, &seq(steps, batch, &x), &cache, &g, &mut grads);
        let e = layer_error(
            &ps,
            Some(&x),
            |p, x| dot(&cr.forward(p, &seq(steps, batch, x.unwrap())).0.data, &g),
            (grads, Some(dx)),
        );
        out.push(("channel_reweight", e));
    }
    {
        let mut ps = ParamSet::new();
        let pool = ClsAttentionPool::new(&mut ps, f, 1, 1, 0.0, eps, &mut rng).unwrap();
        let x = random_matrix(steps * batch, f, &mut rng);
        let g = random_matrix(batch, f, &mut rng);
        let (_, cache) = pool.forward(&ps, &seq(steps, batch, &x), None);
        let mut grads = ps.zeros_like();
        let dx = pool.backward(&ps, &seq(steps, batch, &x), &cache, &g, &mut grads);
        let e = layer_error(
            &ps,
            Some(&x),
            |p, x| dot(&pool.forward(p, &seq(steps, batch, x.unwrap()), None).0, &g),
            (grads, Some(dx)),
        );
        out.push(("cls_attention", e));
    }
    {
        let ps = ParamSet::new();
        let x = random_matrix(steps * batch, f, &mut rng);
        let g = random_matrix(batch, 2 * f, &mut rng);
        let (_, argmax) = meanmax_pool(&seq(steps, batch, &x));
        let dx = meanmax_backward(&seq(steps, batch, &x), &argmax, &g);
        let e = layer_error(
            &ps,
            Some(&x),
            |_, x| dot(&meanmax_pool(&seq(steps, batch, x.unwrap())).0, &g),
            (ParamSet::new(), Some(dx)),
        );
        out.push(("meanmax_pool", e));
    }
    for (name, depth) in [("head_deep", HeadDepth::Deep), ("head_shallow", HeadDepth::Shallow)] {
        let mut ps = ParamSet::new();
        let head = Head::new(&mut ps, depth, f, 0.2, eps, &mut rng);
        let z = random_matrix(batch, f, &mut rng);
        let g: Vec<f64> = (0..batch).map(|_| rng.normal()).collect();
        let mask_seed = rng.next_u64();
        let (_, cache) = head.forward(&ps, &z, Some(&mut Rng::new(mask_seed)));
        let mut grads = ps.zeros_like();
        let dz = head.backward(&ps, &cache, &g, &mut grads);
        let e = layer_error(
            &ps,
            Some(&z),
            |p, z| {
                let (o, _) = head.forward(p, z.unwrap(), Some(&mut Rng::new(mask_seed)));
                o.iter().zip(&g).map(|(a, b)| a * b).sum()
            },
            (grads, Some(dz)),
        );
        out.push((name, e));
    }
    for (name, kind) in [("embedding_shared", EmbeddingKind::Shared), ("embedding_per_column", EmbeddingKind::PerColumn)] {
        let mut ps = ParamSet::new();
        let emb = ColumnEmbedding::new(&mut ps, kind, steps, d_model, &mut rng);
        let x = random_matrix(batch, steps, &mut rng);
        let g = seq(steps, batch, &random_matrix(steps * batch, d_model, &mut rng));
        let mut grads = ps.zeros_like();
        emb.backward(&x, &g, &mut grads);
        let e = layer_error(&ps, None, |p, _| dot(&emb.forward(p, &x).data, &g.data), (grads, None));
        out.push((name, e));
    }
    out
}

fn toy_config() -> ModelConfig {
    ModelConfig {
        d_model: 4,
        blocks: 1,
        attn_layers: 1,
        heads: 1,
        cr_reduction: 2,
        ..ModelConfig::default()
    }
}

/// Weighted, smoothed loss of the toy network on a batch of three, in
/// training mode with fixed dropout masks.
fn end_to_end_trial(trial: u64) -> f64 {
    let cfg = toy_config();
    let mut rng = Rng::new(5000 + trial);
    let net = Network::new(&cfg, 6, &mut rng).unwrap();
    let x = random_matrix(3, 6, &mut rng);
    let y = [1u8, 0, 1];
    let spec = LossSpec::new(cfg.label_smoothing, class_weights(&y).unwrap()).unwrap();
    let mask_seed = rng.next_u64();
    let (logits, tape) = net.forward_batch(&x, Some(&mut Rng::new(mask_seed))).unwrap();
    let (_, d_logits) = batch_loss(&logits, &y, &spec);
    let mut grads = net.params().zeros_like();
    net.backward(&tape, &d_logits, &mut grads);
    layer_error(
        net.params(),
        None,
        |p, _| {
            let n = Network::from_params(&cfg, 6, p.clone()).unwrap();
            let (l, _) = n.forward_batch(&x, Some(&mut Rng::new(mask_seed))).unwrap();
            batch_loss(&l, &y, &spec).0
        },
        (grads, None),
    )
}

fn criterion_4() -> Verdict {
    let mut worst: Vec<(&str, f64)> = Vec::new();
    for trial in 0..100 {
        for (name, e) in layer_trial(trial).into_iter().chain([("end_to_end_loss", end_to_end_trial(trial))]) {
            match worst.iter_mut().find(|(n, _)| *n == name) {
                Some(w) => w.1 = w.1.max(e),
                None => worst.push((name, e)),
            }
        }
    }
    let pass = worst.iter().all(|(_, e)| *e <= GRAD_TOL);
    let max = worst.iter().map(|w| w.1).fold(0.0, f64::max);
    let failing: Vec<String> = worst.iter().filter(|w| w.1 > GRAD_TOL).map(|w| format!("{}={:.1e}", w.0, w.1)).collect();
    let detail = if failing.is_empty() {
        format!("{} checks x 100 trials, worst relative error {max:.2e}", worst.len())
    } else {
        format!("over tolerance: {}", failing.join(", "))
    };
    verdict(pass, detail)
}

// ---- criterion 5 ----------------------------------------------------------

fn roc_oracle(y: &[u8], p: &[f64]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..y.len() {
        for j in 0..y.len() {
            if y[i] == 1 && y[j] == 0 {
                pairs += 1.0;
                if p[i] > p[j] {
                    wins += 1.0;
                } else if p[i] == p[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// Average precision from cumulative counts at each distinct score.
fn pr_oracle(y: &[u8], p: &[f64]) -> f64 {
    let mut cuts: Vec<f64> = p.to_vec();
    cuts.sort_by(|a, b| b.total_cmp(a));
    cuts.dedup();
    let total_pos = y.iter().filter(|&&v| v == 1).count() as f64;
    let (mut ap, mut prev_tp) = (0.0, 0.0);
    for c in cuts {
        let above: Vec<usize> = (0..p.len()).filter(|&i| p[i] >= c).collect();
        let tp = above.iter().filter(|&&i| y[i] == 1).count() as f64;
        ap += (tp - prev_tp) / total_pos * (tp / above.len() as f64);
        prev_tp = tp;
    }
    ap
}

fn sweep_oracle(y: &[u8], p: &[f64]) -> f64 {
    let f1 = |tp: f64, fp: f64, fn_: f64| if tp + fp + fn_ == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fn_) };
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    for k in 10..=90 {
        let tau = k as f64 / 100.0;
        let mut c = [0.0f64; 4];
        for (&yi, &pi) in y.iter().zip(p) {
            c[2 * usize::from(yi) + usize::from(pi >= tau)] += 1.0;
        }
        let [tn, fp, fn_, tp] = c;
        let score = 0.5 * (f1(tp, fp, fn_) + f1(tn, fn_, fp));
        if score > best.0 {
            best = (score, tau);
        }
    }
    best.1
}

fn criterion_5() -> Verdict {
    let mut rng = Rng::new(55);
    let (mut roc_err, mut pr_err, mut sweep_miss) = (0.0f64, 0.0f64, 0);
    assert_eq!(threshold_grid().len(), 81);
    for i in 0..500 {
        let n = 2 + rng.below(49);
        let mut y: Vec<u8> = (0..n).map(|_| u8::from(rng.bernoulli(0.5))).collect();
        y[0] = 0;
        y[1] = 1;
        rng.shuffle(&mut y);
        // Every third instance uses coarse scores so ties and exact boundary hits occur.
        let p: Vec<f64> = (0..n)
            .map(|_| if i % 3 == 0 { rng.below(21) as f64 / 20.0 } else { rng.uniform() })
            .collect();
        roc_err = roc_err.max((roc_auc(&y, &p).unwrap() - roc_oracle(&y, &p)).abs());
        pr_err = pr_err.max((pr_auc(&y, &p).unwrap() - pr_oracle(&y, &p)).abs());
        if sweep_threshold(&y, &p).unwrap() != sweep_oracle(&y, &p) {
            sweep_miss += 1;
        }
    }
    verdict(
        roc_err <= 1e-12 && pr_err <= 1e-12 && sweep_miss == 0,
        format!("500 instances: roc max err {roc_err:.1e}, pr max err {pr_err:.1e}, sweep mismatches {sweep_miss}"),
    )
}

// ---- criterion 6 ----------------------------------------------------------

fn stratification_holds(y: &[u8], k: usize, seed: u64) -> bool {
    let plan = plan_folds(y, k, seed).unwrap();
    let mut seen = vec![0usize; y.len()];
    for f in &plan.folds {
        for &i in &f.test {
            seen[i] += 1;
        }
        for c in [0u8, 1] {
            let n_c = y.iter().filter(|&&v| v == c).count();
            let got = f.test.iter().filter(|&&i| y[i] == c).count();
            if got != n_c / k && got != n_c.div_ceil(k) {
                return false;
            }
        }
        let mut all: Vec<usize> = f.train.iter().chain(&f.validation).chain(&f.test).copied().collect();
        all.sort_unstable();
        if all != (0..y.len()).collect::<Vec<_>>() {
            return false;
        }
    }
    seen.iter().all(|&s| s == 1)
}

fn small_config() -> ModelConfig {
    ModelConfig {
        d_model: 8,
        blocks: 1,
        attn_layers: 1,
        heads: 2,
        epochs: 3,
        ..ModelConfig::default()
    }
}

fn criterion_6(ds: &Dataset) -> Verdict {
    let mut notes = Vec::new();
    let mut rng = Rng::new(66);
    let mut strat = SEEDS.iter().all(|&s| stratification_holds(&ds.y, 5, s));
    for s in 0..200 {
        let n = 10 + rng.below(150);
        let prevalence = 0.2 + 0.6 * rng.uniform();
        let y: Vec<u8> = (0..n).map(|_| u8::from(rng.bernoulli(prevalence))).collect();
        let (n1, n0) = (y.iter().filter(|&&v| v == 1).count(), y.iter().filter(|&&v| v == 0).count());
        if n1 >= 2 && n0 >= 2 {
            strat &= stratification_holds(&y, 2 + rng.below(9).min(n - 2), s);
        }
    }
    notes.push(format!("stratification {}", if strat { "ok" } else { "VIOLATED" }));

    // Leakage sentinel: corrupting one fold's test cells must leave that
    // fold's fitted statistics, trained weights, τ and best epoch untouched.
    let protocol = Protocol::default();
    let cfg = small_config();
    let opts = CvOptions {
        keep_models: true,
        ..CvOptions::default()
    };
    let (_, base) = run_cv(ds, &protocol, &cfg, Variant::Full, &[0], &opts).unwrap();
    let plan = plan_folds(&ds.y, protocol.folds, 0).unwrap();
    let mut sentinel = true;
    for (k, fold) in plan.folds.iter().enumerate() {
        let mut poisoned = ds.clone();
        for &i in &fold.test {
            for (j, cell) in poisoned.rows[i].iter_mut().enumerate() {
                *cell = if j % 3 == 0 { None } else { Some(cell.unwrap_or(0.0) * 1000.0 + 77.0) };
            }
        }
        let mut prep = Preprocessor::new(&ds.schema, &PrepConfig::default()).unwrap();
        prep.fit_transform(&ds.select_rows(&fold.train)).unwrap();
        let mut prep_p = Preprocessor::new(&ds.schema, &PrepConfig::default()).unwrap();
        prep_p.fit_transform(&poisoned.select_rows(&fold.train)).unwrap();
        sentinel &= prep.fitted() == prep_p.fitted();

        let (_, again) = run_cv(&poisoned, &protocol, &cfg, Variant::Full, &[0], &opts).unwrap();
        let (a, b) = (&base[k], &again[k]);
        let (ma, mb) = (a.model.as_ref().unwrap(), b.model.as_ref().unwrap());
        sentinel &= ma.stats == mb.stats
            && ma.network.params() == mb.network.params()
            && a.record.tau == b.record.tau
            && a.record.best_epoch == b.record.best_epoch;
    }
    notes.push(format!("leakage sentinel {}", if sentinel { "ok" } else { "LEAKED" }));

    // Same-seed rerun of the default architecture, short schedule.
    let quick = ModelConfig {
        epochs: 4,
        ..ModelConfig::default()
    };
    let run = |jobs| {
        let o = CvOptions {
            keep_models: true,
            jobs,
            ..CvOptions::default()
        };
        let (report, results) = run_cv(ds, &protocol, &quick, Variant::Full, &[0], &o).unwrap();
        fingerprint(&report, &results)
    };
    let first = run(1);
    let identical = first == run(1);
    let parallel = first == run(2);
    notes.push(format!(
        "rerun {}, 2 workers {}",
        if identical { "byte-identical" } else { "DIFFERS" },
        if parallel { "identical" } else { "DIFFER" }
    ));
    verdict(strat && sentinel && identical && parallel, notes.join("; "))
}

/// Everything a run emits, as bytes.
fn fingerprint(report: &MetricsReport, results: &[FoldResult]) -> Vec<u8> {
    let mut out = report.records_csv().into_bytes();
    out.extend(report.summary_json().into_bytes());
    for r in results {
        out.extend(resgru_core::train::epoch_log_csv(&r.history).into_bytes());
        for p in &r.test_probs {
            out.extend(p.to_le_bytes());
        }
        if let Some(m) = &r.model {
            out.extend(m.to_bytes().unwrap());
        }
    }
    out
}

// ---- criterion 8 ----------------------------------------------------------

fn criterion_8() -> Verdict {
    let spec = LossSpec::new(0.05, (1.0, 1.0)).unwrap();
    let smoothing = spec.target(1) == 0.95;
    let cosine = cosine_lr(0, 150, 8e-4, 1e-6) == 8e-4 && cosine_lr(150, 150, 8e-4, 1e-6) == 1e-6;
    let mut ps = ParamSet::new();
    ps.add("a", Matrix::row_vector(&[12.0, 0.0]));
    ps.add("b", Matrix::row_vector(&[16.0]));
    let norm = clip_gradients(&mut ps, 10.0).unwrap();
    let clip = norm == 20.0 && ps.tensors()[0].as_slice() == [6.0, 0.0] && ps.tensors()[1].as_slice() == [8.0];
    let weights = class_weights(&[0, 0, 0, 0, 0, 0, 0, 0, 1, 1]).unwrap() == (0.625, 2.5);
    let flag = |b: bool| if b { "ok" } else { "WRONG" };
    verdict(
        smoothing && cosine && clip && weights,
        format!(
            "smoothed target {}, cosine ends {}, clip half {}, class weights {}",
            flag(smoothing),
            flag(cosine),
            flag(clip),
            flag(weights)
        ),
    )
}

// ---- criterion 3 ----------------------------------------------------------

fn criterion_3(ds: &Dataset) -> Verdict {
    let protocol = Protocol::default();
    let opts = CvOptions::default();
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, metric, lo, hi) in [("gnb", "accuracy", 0.78, 0.92), ("logreg", "roc_auc", 0.86, 0.95), ("knn", "accuracy", 0.76, 0.88)] {
        let learner = baselines::by_name(name).unwrap();
        let (report, _) = run_cv_with(ds, &protocol, learner.as_ref(), "baseline", &SEEDS, &opts).unwrap();
        let (again, _) = run_cv_with(ds, &protocol, learner.as_ref(), "baseline", &SEEDS, &opts).unwrap();
        let s = report.summary(name, "baseline", None).unwrap();
        let v = if metric == "accuracy" { s.accuracy } else { s.roc_auc };
        let ok = (lo..=hi).contains(&v.mean) && report.records_csv() == again.records_csv();
        pass &= ok;
        notes.push(format!("{name} {metric} {:.3} ± {:.3} in [{lo}, {hi}] {}", v.mean, v.std, if ok { "ok" } else { "NO" }));
    }
    verdict(pass, notes.join("; "))
}

// ---- criteria 1, 2, 7 -----------------------------------------------------

fn seed_summary<'a>(report: &'a MetricsReport, variant: &str, seed: u64) -> &'a Summary {
    report.summary("resgru", variant, Some(seed)).expect("per-seed summary")
}

fn criterion_1(full: &MetricsReport) -> (Verdict, Vec<String>) {
    let mut hits = 0;
    let mut lines = Vec::new();
    for s in SEEDS {
        let m = seed_summary(full, "full", s);
        let ok = (0.80..=0.91).contains(&m.accuracy.mean)
            && (0.79..=0.91).contains(&m.macro_f1.mean)
            && (0.85..=0.94).contains(&m.roc_auc.mean)
            && (0.84..=0.94).contains(&m.pr_auc.mean);
        hits += usize::from(ok);
        lines.push(format!(
            "seed {s}: acc {:.3} f1 {:.3} roc {:.3} pr {:.3} {}",
            m.accuracy.mean,
            m.macro_f1.mean,
            m.roc_auc.mean,
            m.pr_auc.mean,
            if ok { "in band" } else { "out of band" }
        ));
    }
    (verdict(hits >= 2, format!("{hits}/3 seeds inside every band")), lines)
}

fn criterion_2(full: &MetricsReport, unigru: &MetricsReport, meanmax: &MetricsReport) -> (Verdict, Vec<String>) {
    let (mut acc_hits, mut roc_hits) = (0, 0);
    let mut lines = Vec::new();
    for s in SEEDS {
        let (f, u, m) = (seed_summary(full, "full", s), seed_summary(unigru, "unigru", s), seed_summary(meanmax, "meanmax_pool", s));
        acc_hits += usize::from(u.accuracy.mean < f.accuracy.mean);
        roc_hits += usize::from(m.roc_auc.mean < f.roc_auc.mean);
        lines.push(format!(
            "seed {s}: acc full {:.3} vs unigru {:.3}; roc full {:.3} vs meanmax {:.3}",
            f.accuracy.mean, u.accuracy.mean, f.roc_auc.mean, m.roc_auc.mean
        ));
    }
    (
        verdict(
            acc_hits >= 2 && roc_hits >= 2,
            format!("unigru below full on accuracy {acc_hits}/3, meanmax below full on ROC-AUC {roc_hits}/3"),
        ),
        lines,
    )
}

fn criterion_7(results: &[FoldResult]) -> (Verdict, Vec<String>) {
    let seps = embedviz::fold_separation(results).unwrap();
    let mut wins = 0;
    let mut worst_gap = 0.0f64;
    let mut lines = Vec::new();
    for s in SEEDS {
        let mine: Vec<_> = seps.iter().filter(|f| f.seed == s).collect();
        let emb = mine.iter().map(|f| f.embedding).sum::<f64>() / mine.len() as f64;
        let raw = mine.iter().map(|f| f.raw).sum::<f64>() / mine.len() as f64;
        wins += usize::from(emb > raw);
        let pooled = embedviz::pool_test_points(results.iter().filter(|r| r.record.seed == s)).unwrap();
        let params = TsneParams {
            seed: s,
            ..TsneParams::default()
        };
        for (name, pts) in [("raw", &pooled.raw), ("embedding", &pooled.embedding)] {
            let gap = tsne_2d(pts, &params).unwrap().affinities.max_gap();
            worst_gap = worst_gap.max(gap);
            lines.push(format!("seed {s} t-SNE {name}: max entropy gap {gap:.2e}"));
        }
        lines.push(format!("seed {s}: silhouette embedding {emb:.3} vs raw {raw:.3}"));
    }
    (
        verdict(
            wins >= 2 && worst_gap <= ENTROPY_TOL,
            format!("embeddings separate better on {wins}/3 seeds; worst t-SNE entropy gap {worst_gap:.2e}"),
        ),
        lines,
    )
}

// ---- driver ---------------------------------------------------------------

fn report(id: u8, name: &str, v: &Verdict, started: Instant, extra: &[String]) -> bool {
    println!(
        "criterion {id} {name}: {} ({}) [{:.0}s]",
        if v.pass { "PASS" } else { "FAIL" },
        v.detail,
        started.elapsed().as_secs_f64()
    );
    for l in extra {
        println!("    {l}");
    }
    let _ = std::io::stdout().flush();
    v.pass
}

fn main() -> ExitCode {
    let ds = cleveland();
    let mut all = true;

    let t = Instant::now();
    all &= report(4, "gradient verification", &criterion_4(), t, &[]);
    let t = Instant::now();
    all &= report(5, "metric oracles", &criterion_5(), t, &[]);
    let t = Instant::now();
    all &= report(8, "loss and optimizer truths", &criterion_8(), t, &[]);
    let t = Instant::now();
    all &= report(6, "protocol invariants", &criterion_6(&ds), t, &[]);
    let t = Instant::now();
    all &= report(3, "classical baseline bands", &criterion_3(&ds), t, &[]);

    let protocol = Protocol::default();
    let cfg = ModelConfig::default();
    let progress = |r: &FoldResult| {
        eprintln!(
            "  {} seed {} fold {}: acc {:.3} roc {:.3} ({} epochs)",
            r.record.variant,
            r.record.seed,
            r.record.fold,
            r.record.accuracy,
            r.record.roc_auc,
            r.record.epochs_run.unwrap_or(0)
        );
    };
    let opts = |keep| CvOptions {
        keep_models: keep,
        on_fold: Some(&progress),
        ..CvOptions::default()
    };
    let t = Instant::now();
    let (full, full_results) = run_cv(&ds, &protocol, &cfg, Variant::Full, &SEEDS, &opts(true)).unwrap();
    let (v1, lines1) = criterion_1(&full);
    all &= report(1, "headline bands", &v1, t, &lines1);

    let t = Instant::now();
    let (v7, lines7) = criterion_7(&full_results);
    all &= report(7, "embedding separation", &v7, t, &lines7);

    let t = Instant::now();
    let (unigru, _) = run_cv(&ds, &protocol, &cfg, Variant::Unigru, &SEEDS, &opts(false)).unwrap();
    let (meanmax, _) = run_cv(&ds, &protocol, &cfg, Variant::MeanmaxPool, &SEEDS, &opts(false)).unwrap();
    let (v2, lines2) = criterion_2(&full, &unigru, &meanmax);
    all &= report(2, "ablation directionality", &v2, t, &lines2);

    println!("acceptance: {}", if all { "all criteria pass" } else { "at least one criterion FAILED" });
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
