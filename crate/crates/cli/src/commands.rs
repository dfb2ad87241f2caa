use std::fmt::Write as _;
use std::fs;
use std::io::Read as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use resgru_core::baselines;
use resgru_core::data::{parse_cleveland, Dataset, PrepConfig, Preprocessor};
use resgru_core::embedviz::{self, FoldSeparation, Method, Source, TsneParams};
use resgru_core::eval::{run_cv, run_cv_with, CvOptions, FoldResult, MetricsReport};
use resgru_core::model::Variant;
use resgru_core::train::epoch_log_csv;
use serde_json::json;

use crate::config::RunConfig;
use crate::manifest::{sha256_hex, stamp_csv, DatasetInfo, RunManifest};
use crate::{cache_dir, report, ProjectionMethod, RunArgs, UsageError};

pub const PREPARED_FILE: &str = "cleveland.csv";
pub const SCHEMA_FILE: &str = "schema.json";

fn read_input(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read input {}: {e}", path.display())).into())
}

fn fetch(url: &str) -> Result<String> {
    let mut body = String::new();
    ureq::get(url)
        .call()
        .map_err(|e| UsageError(format!("cannot fetch {url}: {e}")))?
        .body_mut()
        .as_reader()
        .read_to_string(&mut body)
        .map_err(|e| UsageError(format!("cannot read response from {url}: {e}")))?;
    Ok(body)
}

pub fn prepare(input: Option<PathBuf>, fetch_url: Option<String>, out: PathBuf) -> Result<()> {
    let (source, text) = match (input, fetch_url) {
        (Some(p), _) => (p.display().to_string(), read_input(&p)?),
        (None, Some(u)) => (u.clone(), fetch(&u)?),
        (None, None) => bail!(UsageError("either --input or --fetch-url is required".into())),
    };
    let ds = parse_cleveland(&text).with_context(|| format!("parsing {source}"))?;
    let csv = ds.to_csv();
    let hash = sha256_hex(csv.as_bytes());

    let mut prep = Preprocessor::new(&ds.schema, &PrepConfig::default())?;
    prep.fit_transform(&ds.rows)?;
    let stats = prep.into_fitted().expect("fitted above");
    let schema = json!({
        "source_sha256": sha256_hex(text.as_bytes()),
        "sha256": hash,
        "n": ds.len(),
        "positives": ds.positives(),
        "encoded_width": stats.width(),
        "target": ds.schema.target,
        "columns": ds.schema.columns,
        "encoded": stats.encoded,
        "missing": ds.rows.iter().flatten().filter(|c| c.is_none()).count(),
    });

    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let info = DatasetInfo {
        path: out.join(PREPARED_FILE).display().to_string(),
        sha256: hash.clone(),
        rows: ds.len(),
        positives: ds.positives(),
    };
    let mut manifest = RunManifest::new("prepare", None, info, &[], vec![source]);
    manifest.write_output(&out, PREPARED_FILE, &csv)?;
    manifest.write_output(&out, SCHEMA_FILE, &(serde_json::to_string_pretty(&schema)? + "\n"))?;
    manifest.finish(&out)?;
    println!(
        "prepared {} rows ({} positive), encoded width {}, sha256 {hash}",
        ds.len(),
        ds.positives(),
        stats.width()
    );
    Ok(())
}

fn resolve_data(arg: Option<&Path>) -> Result<PathBuf> {
    let p = match arg {
        Some(p) if p.is_dir() => p.join(PREPARED_FILE),
        Some(p) => p.to_path_buf(),
        None => cache_dir().join(PREPARED_FILE),
    };
    if !p.is_file() {
        bail!(UsageError(format!(
            "no prepared dataset at {}; run `resgru prepare` first or pass --data",
            p.display()
        )));
    }
    Ok(p)
}

/// Everything a results-producing command starts from.
struct Session {
    config: RunConfig,
    dataset: Dataset,
    info: DatasetInfo,
}

impl Session {
    fn open(run: &RunArgs) -> Result<Self> {
        let config = RunConfig::load(run.config.as_deref(), &run.overrides)?;
        let path = resolve_data(run.data.as_deref())?;
        let text = read_input(&path)?;
        let dataset = parse_cleveland(&text).with_context(|| format!("parsing {}", path.display()))?;
        let info = DatasetInfo {
            path: path.display().to_string(),
            sha256: sha256_hex(text.as_bytes()),
            rows: dataset.len(),
            positives: dataset.positives(),
        };
        if run.seeds.is_empty() {
            bail!(UsageError("--seeds needs at least one seed".into()));
        }
        fs::create_dir_all(&run.out).with_context(|| format!("creating {}", run.out.display()))?;
        Ok(Session { config, dataset, info })
    }

    /// Starts the manifest and echoes the effective config next to it.
    fn manifest(&self, command: &str, run: &RunArgs, selection: Vec<String>) -> Result<RunManifest> {
        let mut m = RunManifest::new(command, Some(&self.config), self.info.clone(), &run.seeds, selection);
        m.write_output(&run.out, "config.toml", &self.config.to_flat_toml())?;
        Ok(m)
    }
}

fn progress(r: &FoldResult) {
    let rec = &r.record;
    eprintln!(
        "{}/{} seed {} fold {}: acc {:.3} f1 {:.3} roc {:.3} pr {:.3} tau {:.2}",
        rec.model, rec.variant, rec.seed, rec.fold, rec.accuracy, rec.macro_f1, rec.roc_auc, rec.pr_auc, rec.tau
    );
}

fn options(run: &RunArgs, keep_models: bool) -> CvOptions<'static> {
    CvOptions {
        jobs: run.jobs,
        keep_models,
        on_fold: if run.quiet { None } else { Some(&progress) },
    }
}

/// Epoch logs of every fold, keyed by variant, seed and fold.
fn epochs_csv(results: &[FoldResult]) -> String {
    let mut out = String::from("variant,seed,fold,epoch,lr,train_loss,val_loss,val_macro_f1\n");
    for r in results {
        for line in epoch_log_csv(&r.history).lines().skip(1) {
            let _ = writeln!(out, "{},{},{},{line}", r.record.variant, r.record.seed, r.record.fold);
        }
    }
    out
}

fn summary_json(report: &MetricsReport, manifest_id: &str) -> Result<String> {
    let summaries: serde_json::Value = serde_json::from_str(&report.summary_json())?;
    let v = json!({"manifest": manifest_id, "summaries": summaries});
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

/// Writes folds.csv, summary.json and, when any learner logged epochs, epochs.csv.
fn write_results(manifest: &mut RunManifest, dir: &Path, report: &MetricsReport, results: &[FoldResult]) -> Result<()> {
    let id = manifest.id.clone();
    manifest.write_output(dir, "folds.csv", &stamp_csv(&report.records_csv(), &id))?;
    manifest.write_output(dir, "summary.json", &summary_json(report, &id)?)?;
    if results.iter().any(|r| !r.history.is_empty()) {
        manifest.write_output(dir, "epochs.csv", &stamp_csv(&epochs_csv(results), &id))?;
    }
    Ok(())
}

fn print_summaries(report: &MetricsReport) {
    for s in report.summaries.iter().filter(|s| s.seed.is_none()) {
        println!(
            "{:<8} {:<20} acc {:.3} ± {:.3}  f1 {:.3}  roc {:.3}  pr {:.3}",
            s.model, s.variant, s.accuracy.mean, s.accuracy.std, s.macro_f1.mean, s.roc_auc.mean, s.pr_auc.mean
        );
    }
}

pub fn cv(run: &RunArgs, variant: &str, save_models: bool) -> Result<()> {
    let v: Variant = variant.parse()?;
    let session = Session::open(run)?;
    let mut manifest = session.manifest("cv", run, vec![v.name().to_string()])?;
    let (report, results) = run_cv(
        &session.dataset,
        &session.config.protocol,
        &session.config.model,
        v,
        &run.seeds,
        &options(run, save_models),
    )?;
    write_results(&mut manifest, &run.out, &report, &results)?;
    if save_models {
        let dir = run.out.join("models");
        fs::create_dir_all(&dir)?;
        for r in &results {
            if let Some(m) = &r.model {
                let name = format!("models/seed{}_fold{}.bin", r.record.seed, r.record.fold);
                m.save(run.out.join(&name))?;
                manifest.outputs.push(name);
            }
        }
    }
    manifest.finish(&run.out)?;
    print_summaries(&report);
    Ok(())
}

pub fn ablate(run: &RunArgs, names: &[String]) -> Result<()> {
    let variants: Vec<Variant> = if names.is_empty() {
        Variant::ALL.to_vec()
    } else {
        names.iter().map(|n| n.parse()).collect::<resgru_core::Result<_>>()?
    };
    let session = Session::open(run)?;
    let mut manifest = session.manifest("ablate", run, variants.iter().map(|v| v.name().to_string()).collect())?;
    let mut reports = Vec::new();
    let mut all = Vec::new();
    for v in variants {
        let (report, results) = run_cv(
            &session.dataset,
            &session.config.protocol,
            &session.config.model,
            v,
            &run.seeds,
            &options(run, false),
        )?;
        reports.push(report);
        all.extend(results);
    }
    let report = MetricsReport::merge(reports);
    write_results(&mut manifest, &run.out, &report, &all)?;
    manifest.write_output(&run.out, "ablation.csv", &stamp_csv(&report.ablation_csv(), &manifest.id.clone()))?;
    manifest.finish(&run.out)?;
    print_summaries(&report);
    Ok(())
}

pub fn baselines(run: &RunArgs, models: &[String]) -> Result<()> {
    let learners = models
        .iter()
        .map(|m| {
            baselines::by_name(m).ok_or_else(|| {
                UsageError(format!("unknown baseline '{m}'; valid baselines: {}", baselines::NAMES.join(", ")))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let session = Session::open(run)?;
    let mut manifest = session.manifest("baselines", run, models.to_vec())?;
    let mut reports = Vec::new();
    for l in &learners {
        let (report, _) = run_cv_with(
            &session.dataset,
            &session.config.protocol,
            l.as_ref(),
            "baseline",
            &run.seeds,
            &options(run, false),
        )?;
        reports.push(report);
    }
    let report = MetricsReport::merge(reports);
    write_results(&mut manifest, &run.out, &report, &[])?;
    manifest.finish(&run.out)?;
    print_summaries(&report);
    Ok(())
}

fn mean_of(v: impl Iterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = v.collect();
    resgru_core::eval::mean(&xs)
}

pub fn project(run: &RunArgs, variant: &str, method: ProjectionMethod, perplexity: f64, iterations: usize) -> Result<()> {
    let v: Variant = variant.parse()?;
    let session = Session::open(run)?;
    let method = match method {
        ProjectionMethod::Tsne => Method::Tsne,
        ProjectionMethod::Pca => Method::Pca,
    };
    let mut selection = vec![v.name().to_string(), format!("{method:?}").to_lowercase()];
    if method == Method::Tsne {
        selection.push(format!("perplexity={perplexity}"));
        selection.push(format!("iterations={iterations}"));
    }
    let mut manifest = session.manifest("project", run, selection)?;
    let (report, results) = run_cv(
        &session.dataset,
        &session.config.protocol,
        &session.config.model,
        v,
        &run.seeds,
        &options(run, true),
    )?;
    write_results(&mut manifest, &run.out, &report, &results)?;

    let seps = embedviz::fold_separation(&results)?;
    let per_seed: Vec<_> = run
        .seeds
        .iter()
        .map(|&s| {
            let folds: Vec<&FoldSeparation> = seps.iter().filter(|f| f.seed == s).collect();
            let emb = mean_of(folds.iter().map(|f| f.embedding));
            let raw = mean_of(folds.iter().map(|f| f.raw));
            json!({"seed": s, "embedding": emb, "raw": raw, "embedding_wins": emb > raw, "folds": folds})
        })
        .collect();
    let wins = per_seed.iter().filter(|s| s["embedding_wins"] == json!(true)).count();

    // Figures come from the first seed: every sample once, embedded by the
    // fold model that held it out.
    let first: Vec<FoldResult> = results.into_iter().filter(|r| r.record.seed == run.seeds[0]).collect();
    let pooled = embedviz::pool_test_points(&first)?;
    let params = TsneParams {
        perplexity,
        iterations,
        seed: run.seeds[0],
    };
    let raw = embedviz::project(&pooled.raw, &pooled.labels, Source::Raw, method, &params)?;
    let emb = embedviz::project(&pooled.embedding, &pooled.labels, Source::Embedding, method, &params)?;
    let csv = embedviz::projection_csv(&[
        (&raw, &pooled.ids, &pooled.labels, &pooled.folds),
        (&emb, &pooled.ids, &pooled.labels, &pooled.folds),
    ]);
    let id = manifest.id.clone();
    manifest.write_output(&run.out, "projection.csv", &stamp_csv(&csv, &id))?;
    manifest.write_output(&run.out, "raw.svg", &embedviz::scatter_svg(&raw, &pooled.labels, "Standardized input features"))?;
    manifest.write_output(
        &run.out,
        "embedding.svg",
        &embedviz::scatter_svg(&emb, &pooled.labels, "Penultimate embeddings"),
    )?;
    let sep = json!({
        "manifest": id,
        "metric": "silhouette, euclidean, per fold test split, full dimension",
        "seeds": per_seed,
        "seeds_embedding_wins": wins,
        "projection": {
            "seed": run.seeds[0],
            "raw_2d_silhouette": raw.separation,
            "embedding_2d_silhouette": emb.separation,
            "raw_entropy_gap": raw.entropy_gap,
            "embedding_entropy_gap": emb.entropy_gap,
        },
    });
    manifest.write_output(&run.out, "separation.json", &(serde_json::to_string_pretty(&sep)? + "\n"))?;
    manifest.finish(&run.out)?;
    print_summaries(&report);
    println!("embedding silhouette beats raw on {wins} of {} seeds", run.seeds.len());
    Ok(())
}

fn find_fold_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            find_fold_files(&p, out)?;
        } else if p.file_name().is_some_and(|n| n == "folds.csv") {
            out.push(p);
        }
    }
    Ok(())
}

pub fn report(results: &Path, out: &Path) -> Result<()> {
    if !results.is_dir() {
        bail!(UsageError(format!("{} is not a directory", results.display())));
    }
    let mut files = Vec::new();
    find_fold_files(results, &mut files)?;
    let mut records = Vec::new();
    for f in &files {
        let text = fs::read_to_string(f)?;
        records.extend(MetricsReport::parse_records_csv(&text).with_context(|| format!("parsing {}", f.display()))?);
    }
    if records.is_empty() {
        bail!(UsageError(format!("no results found under {}", results.display())));
    }
    let merged = MetricsReport::from_records(report::dedup(records));
    fs::create_dir_all(out)?;
    fs::write(out.join("report.md"), report::render_markdown(&merged))?;
    fs::write(out.join("accuracy_band.csv"), report::accuracy_band_csv(&merged))?;
    println!("{} fold records from {} files -> {}", merged.records.len(), files.len(), out.join("report.md").display());
    Ok(())
}
