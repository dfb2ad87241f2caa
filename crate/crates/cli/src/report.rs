use std::fmt::Write as _;

use resgru_core::eval::{FoldRecord, MetricsReport, Summary};
use resgru_core::model::Variant;

/// Keeps the first record seen for each (model, variant, seed, fold).
pub fn dedup(records: Vec<FoldRecord>) -> Vec<FoldRecord> {
    let mut seen = std::collections::HashSet::new();
    records
        .into_iter()
        .filter(|r| seen.insert((r.model.clone(), r.variant.clone(), r.seed, r.fold)))
        .collect()
}

fn cell(s: &Summary) -> [String; 4] {
    [
        format!("{:.3} ± {:.3}", s.accuracy.mean, s.accuracy.std),
        format!("{:.3} ± {:.3}", s.macro_f1.mean, s.macro_f1.std),
        format!("{:.3} ± {:.3}", s.roc_auc.mean, s.roc_auc.std),
        format!("{:.3} ± {:.3}", s.pr_auc.mean, s.pr_auc.std),
    ]
}

fn model_label(model: &str) -> &str {
    match model {
        "resgru" => "Residual GRU+MHSA",
        "gnb" => "GaussianNB",
        "logreg" => "Logistic Regression",
        "knn" => "kNN",
        other => other,
    }
}

fn variant_order(v: &str) -> usize {
    Variant::ALL.iter().position(|x| x.name() == v).unwrap_or(usize::MAX)
}

pub fn render_markdown(report: &MetricsReport) -> String {
    let mut out = String::from("# Cross-validation results\n\n");
    out.push_str("Mean ± sample std over every fold of every seed. Accuracy and macro-F1 use the threshold tuned on each fold's validation split; the AUCs use raw probabilities.\n\n");

    let pooled: Vec<&Summary> = report.summaries.iter().filter(|s| s.seed.is_none()).collect();
    let mut comparison: Vec<&Summary> = pooled
        .iter()
        .copied()
        .filter(|s| s.model != "resgru" || s.variant == "full")
        .collect();
    comparison.sort_by_key(|s| (s.model != "resgru", s.model.clone()));
    if !comparison.is_empty() {
        out.push_str("## Model comparison\n\n| Model | Accuracy | Macro-F1 | ROC-AUC | PR-AUC | Folds |\n|---|---|---|---|---|---|\n");
        for s in &comparison {
            let [a, f, r, p] = cell(s);
            let _ = writeln!(out, "| {} | {a} | {f} | {r} | {p} | {} |", model_label(&s.model), s.n_folds);
        }
        out.push('\n');
    }

    let mut variants: Vec<&Summary> = pooled.iter().copied().filter(|s| s.model == "resgru").collect();
    variants.sort_by_key(|s| variant_order(&s.variant));
    if !variants.is_empty() {
        out.push_str("## Ablations\n\n| Variant | Accuracy | Macro-F1 | ROC-AUC | PR-AUC | Folds |\n|---|---|---|---|---|---|\n");
        for s in &variants {
            let label = s.variant.parse::<Variant>().map(|v| v.label()).unwrap_or(&s.variant);
            let [a, f, r, p] = cell(s);
            let _ = writeln!(out, "| {label} | {a} | {f} | {r} | {p} | {} |", s.n_folds);
        }
        out.push('\n');
    }

    out.push_str("## Per seed\n\n| Model | Variant | Seed | Accuracy | Macro-F1 | ROC-AUC | PR-AUC |\n|---|---|---|---|---|---|---|\n");
    for s in report.summaries.iter().filter(|s| s.seed.is_some()) {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {:.3} | {:.3} | {:.3} | {:.3} |",
            model_label(&s.model),
            s.variant,
            s.seed.unwrap(),
            s.accuracy.mean,
            s.macro_f1.mean,
            s.roc_auc.mean,
            s.pr_auc.mean
        );
    }
    out
}

/// Accuracy band per neural variant: mean ± one std.
pub fn accuracy_band_csv(report: &MetricsReport) -> String {
    let mut rows: Vec<&Summary> = report.summaries.iter().filter(|s| s.seed.is_none() && s.model == "resgru").collect();
    rows.sort_by_key(|s| variant_order(&s.variant));
    let mut out = String::from("variant,acc_mean,acc_std,acc_lo,acc_hi\n");
    for s in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.variant,
            s.accuracy.mean,
            s.accuracy.std,
            s.accuracy.mean - s.accuracy.std,
            s.accuracy.mean + s.accuracy.std
        );
    }
    out
}
