use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassLabel, Dataset};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
    /// Name of the key rows were grouped by.
    pub grouping: String,
    pub seed: Option<u64>,
}

impl FoldPlan {
    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }

    /// Checks that no group is on both sides of any fold.
    pub fn check_disjoint<S: AsRef<str>>(&self, groups: &[S]) -> Result<()> {
        for (i, fold) in self.folds.iter().enumerate() {
            let held: std::collections::BTreeSet<&str> =
                fold.validation.iter().map(|&r| groups[r].as_ref()).collect();
            if let Some(&r) = fold.train.iter().find(|&&r| held.contains(groups[r].as_ref())) {
                return Err(Error::Protocol(format!(
                    "fold {i}: group {} appears in train and validation",
                    groups[r].as_ref()
                )));
            }
        }
        Ok(())
    }
}

/// How rows are split into training and validation folds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EvalProtocol {
    LooByBottle,
    GroupedKfold { k: usize },
    /// One split holding out `fraction` of each class's bottles.
    GroupedHoldout { fraction: f64 },
}

impl EvalProtocol {
    /// Folds over `dataset`, grouped by bottle (or ethanol batch) id.
    pub fn plan(&self, dataset: &Dataset, seed: u64) -> Result<FoldPlan> {
        let labels: Vec<ClassLabel> = dataset.measurements.iter().map(|m| m.label).collect();
        self.plan_keys(&labels, &dataset.bottle_ids(), seed)
    }

    pub fn plan_keys<S: AsRef<str>>(&self, labels: &[ClassLabel], bottles: &[S], seed: u64) -> Result<FoldPlan> {
        match *self {
            EvalProtocol::LooByBottle => loo_by_bottle_keys(labels, bottles),
            EvalProtocol::GroupedKfold { k } => {
                let mut plan = grouped_kfold(bottles, k, seed)?;
                plan.grouping = "bottle_id".into();
                Ok(plan)
            }
            EvalProtocol::GroupedHoldout { fraction } => grouped_holdout_keys(labels, bottles, fraction, seed),
        }
    }
}

impl std::fmt::Display for EvalProtocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EvalProtocol::LooByBottle => f.write_str("leave-one-bottle-out"),
            EvalProtocol::GroupedKfold { k } => write!(f, "grouped {k}-fold"),
            EvalProtocol::GroupedHoldout { fraction } => write!(f, "grouped {:.0}% holdout", 100.0 * fraction),
        }
    }
}

/// Row indices per group, keyed and ordered by group name.
fn group_rows<S: AsRef<str>>(groups: &[S]) -> BTreeMap<&str, Vec<usize>> {
    let mut map: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (row, g) in groups.iter().enumerate() {
        map.entry(g.as_ref()).or_default().push(row);
    }
    map
}

fn build(n_rows: usize, held: Vec<Vec<usize>>, grouping: &str, seed: Option<u64>) -> FoldPlan {
    let folds = held
        .into_iter()
        .map(|mut validation| {
            validation.sort_unstable();
            let mut is_held = vec![false; n_rows];
            for &r in &validation {
                is_held[r] = true;
            }
            let train = (0..n_rows).filter(|&r| !is_held[r]).collect();
            Fold { train, validation }
        })
        .collect();
    FoldPlan { folds, grouping: grouping.to_string(), seed }
}

/// One fold per wine bottle. Ethanol batches are dealt round-robin, in
/// name order, onto the validation side of the bottle folds.
pub fn loo_by_bottle(dataset: &Dataset) -> Result<FoldPlan> {
    let labels: Vec<ClassLabel> = dataset.measurements.iter().map(|m| m.label).collect();
    loo_by_bottle_keys(&labels, &dataset.bottle_ids())
}

/// [`loo_by_bottle`] over bare labels and bottle keys, row `i` being
/// `(labels[i], bottles[i])`.
pub fn loo_by_bottle_keys<S: AsRef<str>>(labels: &[ClassLabel], bottles: &[S]) -> Result<FoldPlan> {
    if labels.len() != bottles.len() {
        return Err(Error::Input(format!("{} labels but {} bottle keys", labels.len(), bottles.len())));
    }
    let mut wine: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    let mut ethanol: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (row, (label, bottle)) in labels.iter().zip(bottles).enumerate() {
        let side = if *label == ClassLabel::Ea { &mut ethanol } else { &mut wine };
        side.entry(bottle.as_ref()).or_default().push(row);
    }
    if wine.len() < 2 {
        return Err(Error::Protocol(format!(
            "leave-one-bottle-out needs at least 2 wine bottles, found {}",
            wine.len()
        )));
    }
    let mut held: Vec<Vec<usize>> = wine.into_values().collect();
    let n_folds = held.len();
    for (i, rows) in ethanol.into_values().enumerate() {
        held[i % n_folds].extend(rows);
    }
    Ok(build(labels.len(), held, "bottle_id", None))
}

/// Partitions the distinct groups into `k` folds whose group counts differ
/// by at most one. Row `i` belongs to `groups[i]`.
pub fn grouped_kfold<S: AsRef<str>>(groups: &[S], k: usize, seed: u64) -> Result<FoldPlan> {
    let by_group = group_rows(groups);
    if k < 2 {
        return Err(Error::Protocol(format!("k-fold needs k >= 2, got {k}")));
    }
    if k > by_group.len() {
        return Err(Error::Protocol(format!("k = {k} exceeds the {} distinct groups", by_group.len())));
    }
    let mut order: Vec<Vec<usize>> = by_group.into_values().collect();
    order.shuffle(&mut seed::rng(seed, &[0xf01d]));
    let mut held = vec![Vec::new(); k];
    for (i, rows) in order.into_iter().enumerate() {
        held[i % k].extend(rows);
    }
    Ok(build(groups.len(), held, "group", Some(seed)))
}

/// A single split stratified by class: each class keeps at least one bottle
/// on each side, and about `fraction` of its bottles are held out.
pub fn grouped_holdout_keys<S: AsRef<str>>(
    labels: &[ClassLabel],
    bottles: &[S],
    fraction: f64,
    seed: u64,
) -> Result<FoldPlan> {
    if labels.len() != bottles.len() {
        return Err(Error::Input(format!("{} labels but {} bottle keys", labels.len(), bottles.len())));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Protocol(format!("holdout fraction must lie in (0, 1), got {fraction}")));
    }
    let mut by_class: BTreeMap<ClassLabel, BTreeMap<&str, Vec<usize>>> = BTreeMap::new();
    for (row, (label, bottle)) in labels.iter().zip(bottles).enumerate() {
        by_class.entry(*label).or_default().entry(bottle.as_ref()).or_default().push(row);
    }
    let mut rng = seed::rng(seed, &[0x401d]);
    let mut held = Vec::new();
    for (label, groups) in by_class {
        let n = groups.len();
        if n < 2 {
            return Err(Error::Protocol(format!("class {label} has {n} bottle(s); a holdout split needs 2")));
        }
        let take = ((n as f64 * fraction).round() as usize).clamp(1, n - 1);
        let mut order: Vec<Vec<usize>> = groups.into_values().collect();
        order.shuffle(&mut rng);
        held.extend(order.into_iter().take(take).flatten());
    }
    Ok(build(labels.len(), vec![held], "bottle_id", Some(seed)))
}
