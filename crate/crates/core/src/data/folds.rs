use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Rng;

/// Share of each training fold held out for validation.
pub const VALIDATION_FRACTION: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub folds: Vec<Fold>,
}

fn by_class(y: &[u8], idx: impl IntoIterator<Item = usize>) -> [Vec<usize>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for i in idx {
        out[usize::from(y[i] == 1)].push(i);
    }
    out
}

/// Stratified k-fold plan. Needs `k <= n`. Each class is shuffled and dealt round-robin to the
/// test folds with one counter running across both classes; each fold then
/// holds out a stratified validation share of its remaining indices.
pub fn plan_folds(y: &[u8], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::config(format!("need at least 2 folds, got {k}")));
    }
    if let Some(bad) = y.iter().find(|&&v| v > 1) {
        return Err(Error::Data(format!("label {bad} is not binary")));
    }
    if y.len() < k {
        return Err(Error::Stratification(format!("{} samples cannot fill {k} folds", y.len())));
    }
    let classes = by_class(y, 0..y.len());
    for (c, members) in classes.iter().enumerate() {
        // a class dealt to fewer folds than k is fine, but every training
        // portion must still contain both classes
        if members.len() < 2 {
            return Err(Error::Stratification(format!(
                "class {c} has {} members; at least 2 are needed",
                members.len()
            )));
        }
    }
    let mut rng = Rng::new(seed);
    let mut assignment = vec![0usize; y.len()];
    let mut counter = 0;
    for mut members in classes {
        rng.shuffle(&mut members);
        for i in members {
            assignment[i] = counter % k;
            counter += 1;
        }
    }
    let folds = (0..k)
        .map(|fold| {
            let test: Vec<usize> = (0..y.len()).filter(|&i| assignment[i] == fold).collect();
            let rest = (0..y.len()).filter(|&i| assignment[i] != fold);
            let mut frng = Rng::derive(seed, fold as u64, 1);
            let mut train = Vec::new();
            let mut validation = Vec::new();
            for mut members in by_class(y, rest) {
                frng.shuffle(&mut members);
                let n_val = (members.len() as f64 * VALIDATION_FRACTION).round() as usize;
                validation.extend_from_slice(&members[..n_val]);
                train.extend_from_slice(&members[n_val..]);
            }
            train.sort_unstable();
            validation.sort_unstable();
            Fold {
                train,
                validation,
                test,
            }
        })
        .collect();
    Ok(FoldPlan { k, folds })
}
