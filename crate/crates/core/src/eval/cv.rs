use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{plan_folds, Dataset, FittedStats, PrepConfig, Preprocessor};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, Network, TrainedModel, Variant};
use crate::numkit::{Matrix, Rng};
use crate::train::{fit, EpochLog, Split};

use super::metrics::{confusion_metrics, mean, pr_auc, roc_auc, sample_std, sweep_threshold};

/// A fitted model that scores encoded rows.
pub trait Predictor: Send + Sync {
    fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>>;

    /// The underlying network, for models that have one.
    fn network(&self) -> Option<&Network> {
        None
    }
}

pub struct Fitted {
    pub predictor: Box<dyn Predictor>,
    pub history: Vec<EpochLog>,
    pub best_epoch: Option<usize>,
}

impl Fitted {
    pub fn plain(predictor: impl Predictor + 'static) -> Self {
        Fitted {
            predictor: Box::new(predictor),
            history: Vec::new(),
            best_epoch: None,
        }
    }
}

/// Anything the harness can train on one fold.
pub trait Learner: Sync {
    fn name(&self) -> String;
    fn fit(&self, train: Split<'_>, val: Split<'_>, rng: &mut Rng) -> Result<Fitted>;
}

impl Predictor for Network {
    fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        Network::predict_proba(self, x)
    }

    fn network(&self) -> Option<&Network> {
        Some(self)
    }
}

/// The residual recurrent classifier under a given configuration.
#[derive(Clone, Debug)]
pub struct NeuralLearner {
    pub config: ModelConfig,
}

impl Learner for NeuralLearner {
    fn name(&self) -> String {
        "resgru".into()
    }

    fn fit(&self, train: Split<'_>, val: Split<'_>, rng: &mut Rng) -> Result<Fitted> {
        let out = fit(&self.config, train, val, rng)?;
        Ok(Fitted {
            predictor: Box::new(out.network),
            history: out.history,
            best_epoch: Some(out.best_epoch),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Protocol {
    pub folds: usize,
    pub prep: PrepConfig,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            folds: 5,
            prep: PrepConfig::default(),
        }
    }
}

#[derive(Default)]
pub struct CvOptions<'a> {
    /// Worker threads for fold × seed cells; 0 or 1 runs serially.
    pub jobs: usize,
    /// Keep each fold's trained network with its preprocessing, and its test-split embeddings.
    pub keep_models: bool,
    pub on_fold: Option<&'a (dyn Fn(&FoldResult) + Sync)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub model: String,
    pub variant: String,
    pub seed: u64,
    pub fold: usize,
    pub n_test: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub roc_auc: f64,
    pub pr_auc: f64,
    pub tau: f64,
    pub best_epoch: Option<usize>,
    pub epochs_run: Option<usize>,
}

pub struct FoldResult {
    pub record: FoldRecord,
    pub test_indices: Vec<usize>,
    pub test_labels: Vec<u8>,
    pub test_probs: Vec<f64>,
    /// Standardized test features as the model saw them.
    pub test_features: Matrix,
    pub test_embeddings: Option<Matrix>,
    pub model: Option<TrainedModel>,
    pub history: Vec<EpochLog>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        Stat {
            mean: mean(values),
            std: sample_std(values),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub model: String,
    pub variant: String,
    /// `None` for the pooled summary over every seed and fold.
    pub seed: Option<u64>,
    pub n_folds: usize,
    pub accuracy: Stat,
    pub macro_f1: Stat,
    pub roc_auc: Stat,
    pub pr_auc: Stat,
}

impl Summary {
    fn of(records: &[&FoldRecord], seed: Option<u64>) -> Self {
        let pick = |f: fn(&FoldRecord) -> f64| Stat::of(&records.iter().map(|r| f(r)).collect::<Vec<_>>());
        Summary {
            model: records[0].model.clone(),
            variant: records[0].variant.clone(),
            seed,
            n_folds: records.len(),
            accuracy: pick(|r| r.accuracy),
            macro_f1: pick(|r| r.macro_f1),
            roc_auc: pick(|r| r.roc_auc),
            pr_auc: pick(|r| r.pr_auc),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub records: Vec<FoldRecord>,
    pub summaries: Vec<Summary>,
}

impl MetricsReport {
    /// Builds per-seed and pooled summaries for every (model, variant) group,
    /// in order of first appearance.
    pub fn from_records(mut records: Vec<FoldRecord>) -> Self {
        records.sort_by(|a, b| {
            (a.model.as_str(), a.variant.as_str(), a.seed, a.fold).cmp(&(b.model.as_str(), b.variant.as_str(), b.seed, b.fold))
        });
        let mut groups: Vec<(String, String)> = Vec::new();
        for r in &records {
            let key = (r.model.clone(), r.variant.clone());
            if !groups.contains(&key) {
                groups.push(key);
            }
        }
        let mut summaries = Vec::new();
        for (model, variant) in groups {
            let rows: Vec<&FoldRecord> = records.iter().filter(|r| r.model == model && r.variant == variant).collect();
            let mut seeds: Vec<u64> = rows.iter().map(|r| r.seed).collect();
            seeds.dedup();
            for s in seeds {
                let per: Vec<&FoldRecord> = rows.iter().copied().filter(|r| r.seed == s).collect();
                summaries.push(Summary::of(&per, Some(s)));
            }
            summaries.push(Summary::of(&rows, None));
        }
        MetricsReport { records, summaries }
    }

    pub fn merge(reports: impl IntoIterator<Item = MetricsReport>) -> Self {
        MetricsReport::from_records(reports.into_iter().flat_map(|r| r.records).collect())
    }

    pub fn summary(&self, model: &str, variant: &str, seed: Option<u64>) -> Option<&Summary> {
        self.summaries.iter().find(|s| s.model == model && s.variant == variant && s.seed == seed)
    }

    /// One row per fold × seed × variant × model.
    pub fn records_csv(&self) -> String {
        let mut out =
            String::from("model,variant,seed,fold,n_test,accuracy,macro_f1,roc_auc,pr_auc,tau,best_epoch,epochs_run\n");
        let opt = |v: Option<usize>| v.map(|e| e.to_string()).unwrap_or_default();
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.model,
                r.variant,
                r.seed,
                r.fold,
                r.n_test,
                r.accuracy,
                r.macro_f1,
                r.roc_auc,
                r.pr_auc,
                r.tau,
                opt(r.best_epoch),
                opt(r.epochs_run)
            );
        }
        out
    }

    /// Parses rows written by `records_csv`. Columns are matched by header
    /// name, so extra columns are ignored.
    pub fn parse_records_csv(text: &str) -> Result<Vec<FoldRecord>> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::Format { line: 1, msg: "empty file".into() })?;
        let cols: Vec<&str> = header.split(',').collect();
        let find = |name: &str| {
            cols.iter().position(|c| *c == name).ok_or_else(|| Error::Format {
                line: 1,
                msg: format!("missing column '{name}'"),
            })
        };
        const NAMES: [&str; 12] = [
            "model", "variant", "seed", "fold", "n_test", "accuracy", "macro_f1", "roc_auc", "pr_auc", "tau",
            "best_epoch", "epochs_run",
        ];
        let idx = NAMES.iter().map(|n| find(n)).collect::<Result<Vec<_>>>()?;
        let mut out = Vec::new();
        for (i, line) in lines {
            let f: Vec<&str> = line.split(',').collect();
            let bad = |msg: String| Error::Format { line: i + 1, msg };
            if f.len() != cols.len() {
                return Err(bad(format!("expected {} fields, found {}", cols.len(), f.len())));
            }
            let num = |k: usize| f[idx[k]].parse::<f64>().map_err(|_| bad(format!("bad {} '{}'", NAMES[k], f[idx[k]])));
            let int = |k: usize| f[idx[k]].parse::<usize>().map_err(|_| bad(format!("bad {} '{}'", NAMES[k], f[idx[k]])));
            let opt = |k: usize| if f[idx[k]].is_empty() { Ok(None) } else { int(k).map(Some) };
            out.push(FoldRecord {
                model: f[idx[0]].to_string(),
                variant: f[idx[1]].to_string(),
                seed: f[idx[2]].parse().map_err(|_| bad(format!("bad seed '{}'", f[idx[2]])))?,
                fold: int(3)?,
                n_test: int(4)?,
                accuracy: num(5)?,
                macro_f1: num(6)?,
                roc_auc: num(7)?,
                pr_auc: num(8)?,
                tau: num(9)?,
                best_epoch: opt(10)?,
                epochs_run: opt(11)?,
            });
        }
        Ok(out)
    }

    /// Pooled per-variant rows for the accuracy-band plot.
    pub fn ablation_csv(&self) -> String {
        let mut out = String::from("variant,acc_mean,acc_std,f1_mean,roc_mean,pr_mean\n");
        for s in self.summaries.iter().filter(|s| s.seed.is_none()) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                s.variant, s.accuracy.mean, s.accuracy.std, s.macro_f1.mean, s.roc_auc.mean, s.pr_auc.mean
            );
        }
        out
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summaries).expect("summaries serialize")
    }
}

#[allow(clippy::too_many_arguments)]
fn run_fold(
    dataset: &Dataset,
    protocol: &Protocol,
    learner: &dyn Learner,
    variant: &str,
    seed: u64,
    fold: usize,
    plan: &crate::data::Fold,
    keep_models: bool,
) -> Result<FoldResult> {
    let mut prep = Preprocessor::new(&dataset.schema, &protocol.prep)?;
    let x_train = prep.fit_transform(&dataset.select_rows(&plan.train))?;
    let x_val = prep.transform(&dataset.select_rows(&plan.validation))?;
    let x_test = prep.transform(&dataset.select_rows(&plan.test))?;
    let y_train = dataset.select_labels(&plan.train);
    let y_val = dataset.select_labels(&plan.validation);
    let y_test = dataset.select_labels(&plan.test);

    let mut rng = Rng::derive(seed, fold as u64, 0);
    let fitted = learner.fit(Split::new(&x_train, &y_train)?, Split::new(&x_val, &y_val)?, &mut rng)?;
    let tau = sweep_threshold(&y_val, &fitted.predictor.predict_proba(&x_val)?)?;
    let (test_probs, record) = evaluate_test(&*fitted.predictor, &x_test, &y_test, tau)?;
    let stats: FittedStats = prep.into_fitted().expect("fitted above");
    let (test_embeddings, model) = match (keep_models, fitted.predictor.network()) {
        (true, Some(net)) => (
            Some(net.penultimate(&x_test)?),
            Some(TrainedModel::new(net.clone(), stats, tau)?),
        ),
        _ => (None, None),
    };
    let epochs_run = (!fitted.history.is_empty()).then_some(fitted.history.len());
    Ok(FoldResult {
        record: FoldRecord {
            model: learner.name(),
            variant: variant.to_string(),
            seed,
            fold,
            best_epoch: fitted.best_epoch,
            epochs_run,
            ..record
        },
        test_indices: plan.test.clone(),
        test_labels: y_test,
        test_probs,
        test_features: x_test,
        test_embeddings,
        model,
        history: fitted.history,
    })
}

/// Scores the untouched test split: threshold metrics at `tau`, AUCs on raw
/// probabilities. Sees only test arrays and the tuned threshold.
fn evaluate_test(model: &dyn Predictor, x: &Matrix, y: &[u8], tau: f64) -> Result<(Vec<f64>, FoldRecord)> {
    let p = model.predict_proba(x)?;
    let (accuracy, macro_f1) = confusion_metrics(y, &p, tau)?;
    let record = FoldRecord {
        model: String::new(),
        variant: String::new(),
        seed: 0,
        fold: 0,
        n_test: y.len(),
        accuracy,
        macro_f1,
        roc_auc: roc_auc(y, &p)?,
        pr_auc: pr_auc(y, &p)?,
        tau,
        best_epoch: None,
        epochs_run: None,
    };
    Ok((p, record))
}

/// Stratified k-fold cross-validation of `learner` for every seed. Each seed
/// plans its own folds; results are ordered by (seed, fold).
pub fn run_cv_with(
    dataset: &Dataset,
    protocol: &Protocol,
    learner: &dyn Learner,
    variant: &str,
    seeds: &[u64],
    options: &CvOptions<'_>,
) -> Result<(MetricsReport, Vec<FoldResult>)> {
    if seeds.is_empty() {
        return Err(Error::config("at least one seed is required"));
    }
    let plans = seeds
        .iter()
        .map(|&s| plan_folds(&dataset.y, protocol.folds, s).map(|p| (s, p)))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(u64, usize, &crate::data::Fold)> = plans
        .iter()
        .flat_map(|(s, p)| p.folds.iter().enumerate().map(move |(k, f)| (*s, k, f)))
        .collect();
    let run = |&(s, k, f): &(u64, usize, &crate::data::Fold)| {
        let r = run_fold(dataset, protocol, learner, variant, s, k, f, options.keep_models)?;
        if let Some(cb) = options.on_fold {
            cb(&r);
        }
        Ok(r)
    };
    let mut results: Vec<FoldResult> = if options.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
            .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
        pool.install(|| cells.par_iter().map(run).collect::<Result<Vec<_>>>())?
    } else {
        cells.iter().map(run).collect::<Result<Vec<_>>>()?
    };
    results.sort_by_key(|r| (seeds.iter().position(|&s| s == r.record.seed), r.record.fold));
    let report = MetricsReport::from_records(results.iter().map(|r| r.record.clone()).collect());
    Ok((report, results))
}

/// Cross-validates the neural model under `cfg` with `variant` applied.
pub fn run_cv(
    dataset: &Dataset,
    protocol: &Protocol,
    cfg: &ModelConfig,
    variant: Variant,
    seeds: &[u64],
    options: &CvOptions<'_>,
) -> Result<(MetricsReport, Vec<FoldResult>)> {
    let learner = NeuralLearner {
        config: variant.apply(cfg),
    };
    run_cv_with(dataset, protocol, &learner, variant.name(), seeds, options)
}

/// Cross-validates every ablation variant.
pub fn run_ablation_suite(
    dataset: &Dataset,
    protocol: &Protocol,
    cfg: &ModelConfig,
    seeds: &[u64],
    options: &CvOptions<'_>,
) -> Result<MetricsReport> {
    let mut reports = Vec::with_capacity(Variant::ALL.len());
    for v in Variant::ALL {
        reports.push(run_cv(dataset, protocol, cfg, v, seeds, options)?.0);
    }
    Ok(MetricsReport::merge(reports))
}
