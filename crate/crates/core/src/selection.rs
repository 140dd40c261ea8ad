//! Recursive feature elimination ranked by linear SVM weights, with the
//! subset size chosen by grouped cross-validation of a kernel SVM.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::grouped_kfold;
use crate::svm::{check_rows, standardize_fit, train_ovo, Kernel, SmoConfig, SvmParams, EXP1_KERNEL_SCALE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    /// Features removed per elimination round.
    pub step: usize,
    /// Grouped folds used to score each subset size.
    pub folds: usize,
    pub seed: u64,
    /// Machine whose weights rank the features. Must use the linear kernel.
    pub ranking: SvmParams,
    /// Machine scored by cross-validation at each subset size.
    pub scoring: SvmParams,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            step: 1,
            folds: 5,
            seed: 0,
            ranking: SvmParams { kernel: Kernel::Linear, smo: SmoConfig { c: 1.0, ..SmoConfig::default() } },
            scoring: SvmParams::gaussian_scale(EXP1_KERNEL_SCALE).expect("positive scale"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvPoint {
    pub n_features: usize,
    pub mean_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Selected columns, ascending.
    pub chosen_indices: Vec<usize>,
    /// Per feature, its position in the elimination order (1 = first out).
    pub ranking: Vec<usize>,
    /// Feature indices in the order they were eliminated.
    pub elimination_order: Vec<usize>,
    /// Mean grouped-CV accuracy at each size on the elimination path,
    /// largest size first.
    pub cv_curve: Vec<CvPoint>,
    pub chosen_size: usize,
}

impl SelectionResult {
    /// Report with feature names attached.
    pub fn to_json(&self, names: &[String]) -> Result<String> {
        #[derive(Serialize)]
        struct Report<'a> {
            chosen_size: usize,
            chosen_indices: &'a [usize],
            chosen_names: Vec<&'a str>,
            ranking: &'a [usize],
            cv_curve: &'a [CvPoint],
        }
        let chosen_names = self.chosen_indices.iter().map(|&i| names.get(i).map_or("", String::as_str)).collect();
        Ok(serde_json::to_string_pretty(&Report {
            chosen_size: self.chosen_size,
            chosen_indices: &self.chosen_indices,
            chosen_names,
            ranking: &self.ranking,
            cv_curve: &self.cv_curve,
        })?)
    }

    /// Restricts each row to the chosen columns.
    pub fn project(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|r| self.chosen_indices.iter().map(|&j| r[j]).collect()).collect()
    }
}

fn columns(x: &[Vec<f64>], cols: &[usize]) -> Vec<Vec<f64>> {
    x.iter().map(|r| cols.iter().map(|&j| r[j]).collect()).collect()
}

fn check_labels(x: &[Vec<f64>], y: &[usize]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::Input(format!("{} rows but {} labels", x.len(), y.len())));
    }
    let d = check_rows(x)?;
    if d == 0 {
        return Err(Error::Input("no features to select from".into()));
    }
    Ok(d)
}

/// Elimination order of every column of `x`, first eliminated first.
///
/// Columns are standardized on `x`, then each round trains a one-vs-one
/// machine on the survivors, scores each survivor by its summed squared
/// weight over the pairwise machines and removes the `step` lowest, lower
/// index first on ties.
pub fn rfe_rank(x: &[Vec<f64>], y: &[usize], step: usize, ranking: &SvmParams) -> Result<Vec<usize>> {
    let d = check_labels(x, y)?;
    if step == 0 {
        return Err(Error::Config("step must be at least 1".into()));
    }
    if ranking.kernel != Kernel::Linear {
        return Err(Error::Config("feature ranking requires the linear kernel".into()));
    }
    let std = standardize_fit(x)?;
    let z: Vec<Vec<f64>> = x.iter().map(|r| std.apply_row(r)).collect();
    let mut classes = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Training(format!("ranking needs at least 2 classes, got {}", classes.len())));
    }

    let mut alive: Vec<usize> = (0..d).collect();
    let mut order = Vec::with_capacity(d);
    while !alive.is_empty() {
        let sub = columns(&z, &alive);
        let machines = crate::svm::train_pairs(&sub, y, &classes, ranking)
            .map_err(|e| e.context(format!("ranking round with {} features", alive.len())))?;
        let mut score = vec![0.0; alive.len()];
        for m in &machines {
            if let Some(w) = m.linear_weights() {
                for (s, wj) in score.iter_mut().zip(&w) {
                    *s += wj * wj;
                }
            }
        }
        let mut by_score: Vec<usize> = (0..alive.len()).collect();
        by_score.sort_by(|&a, &b| score[a].total_cmp(&score[b]).then(alive[a].cmp(&alive[b])));
        let mut drop: Vec<usize> = by_score.into_iter().take(step.min(alive.len())).collect();
        order.extend(drop.iter().map(|&i| alive[i]));
        drop.sort_unstable();
        for &i in drop.iter().rev() {
            alive.remove(i);
        }
    }
    Ok(order)
}

/// `ranking[j]` is the 1-based position of column `j` in `order`.
pub fn ranking_from_order(order: &[usize]) -> Vec<usize> {
    let mut ranking = vec![0; order.len()];
    for (pos, &j) in order.iter().enumerate() {
        ranking[j] = pos + 1;
    }
    ranking
}

/// Recursive feature elimination with the subset size picked by mean
/// accuracy over grouped folds. Ties go to the smallest size.
pub fn rfecv_select<S: AsRef<str> + Sync>(
    x: &[Vec<f64>],
    y: &[usize],
    groups: &[S],
    cfg: &SelectionConfig,
) -> Result<SelectionResult> {
    let d = check_labels(x, y)?;
    if groups.len() != x.len() {
        return Err(Error::Input(format!("{} rows but {} group keys", x.len(), groups.len())));
    }
    let plan = grouped_kfold(groups, cfg.folds, cfg.seed)?;
    let order = rfe_rank(x, y, cfg.step, &cfg.ranking)?;

    // Sizes visited by the elimination path and the survivors at each.
    let mut sizes = Vec::new();
    let mut removed = 0;
    while removed < d {
        sizes.push(d - removed);
        removed += cfg.step.min(d - removed);
    }
    let survivors = |size: usize| {
        let mut cols = order[d - size..].to_vec();
        cols.sort_unstable();
        cols
    };

    let cv_curve = sizes
        .par_iter()
        .map(|&size| {
            let cols = survivors(size);
            let sub = columns(x, &cols);
            let mut total = 0.0;
            for (f, fold) in plan.folds.iter().enumerate() {
                let xt: Vec<Vec<f64>> = fold.train.iter().map(|&r| sub[r].clone()).collect();
                let yt: Vec<usize> = fold.train.iter().map(|&r| y[r]).collect();
                let model = train_ovo(&xt, &yt, &cfg.scoring)
                    .map_err(|e| e.context(format!("subset size {size}, fold {f}")))?;
                let mut correct = 0;
                for &r in &fold.validation {
                    if model.predict(&sub[r])? == y[r] {
                        correct += 1;
                    }
                }
                total += correct as f64 / fold.validation.len() as f64;
            }
            Ok(CvPoint { n_features: size, mean_accuracy: total / plan.len() as f64 })
        })
        .collect::<Result<Vec<_>>>()?;

    let best = cv_curve
        .iter()
        .max_by(|a, b| a.mean_accuracy.total_cmp(&b.mean_accuracy).then(b.n_features.cmp(&a.n_features)))
        .map_or(d, |p| p.n_features);
    let chosen_indices = survivors(best);
    Ok(SelectionResult {
        chosen_size: chosen_indices.len(),
        chosen_indices,
        ranking: ranking_from_order(&order),
        elimination_order: order,
        cv_curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn noisy(n: usize, d: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let x = y
            .iter()
            .map(|&c| {
                let mut row: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                row[0] = if c == 0 { -1.0 } else { 1.0 } + 0.05 * rng.sample::<f64, _>(StandardNormal);
                row
            })
            .collect();
        (x, y)
    }

    #[test]
    fn label_feature_is_eliminated_last() {
        let (x, y) = noisy(40, 10, 1);
        let order = rfe_rank(&x, &y, 1, &SelectionConfig::default().ranking).unwrap();
        assert_eq!(order.len(), 10);
        assert_eq!(*order.last().unwrap(), 0);
        let mut sorted = order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn duplicated_informative_pair_outranks_noise() {
        let (mut x, y) = noisy(40, 10, 2);
        for r in &mut x {
            r[5] = r[0];
        }
        let order = rfe_rank(&x, &y, 1, &SelectionConfig::default().ranking).unwrap();
        let mut tail = order[8..].to_vec();
        tail.sort_unstable();
        assert_eq!(tail, vec![0, 5]);
    }

    #[test]
    fn constant_feature_goes_first() {
        let (mut x, y) = noisy(30, 5, 3);
        for r in &mut x {
            r[3] = 7.0;
        }
        let order = rfe_rank(&x, &y, 1, &SelectionConfig::default().ranking).unwrap();
        assert_eq!(order[0], 3);
    }

    #[test]
    fn full_step_is_single_pass_score_order() {
        let (x, y) = noisy(40, 6, 4);
        let params = SelectionConfig::default().ranking;
        let order = rfe_rank(&x, &y, 6, &params).unwrap();
        let std = standardize_fit(&x).unwrap();
        let z: Vec<Vec<f64>> = x.iter().map(|r| std.apply_row(r)).collect();
        let m = crate::svm::train_pairs(&z, &y, &[0, 1], &params).unwrap();
        let w = m[0].linear_weights().unwrap();
        let mut expect: Vec<usize> = (0..6).collect();
        expect.sort_by(|&a, &b| (w[a] * w[a]).total_cmp(&(w[b] * w[b])).then(a.cmp(&b)));
        assert_eq!(order, expect);
    }

    #[test]
    fn rfecv_keeps_the_informative_feature() {
        let (x, y) = noisy(40, 8, 5);
        let groups: Vec<String> = (0..40).map(|i| format!("g{}", i / 4)).collect();
        let r = rfecv_select(&x, &y, &groups, &SelectionConfig::default()).unwrap();
        assert!(r.chosen_indices.contains(&0));
        assert_eq!(r.chosen_size, r.chosen_indices.len());
        assert_eq!(r.cv_curve.len(), 8);
        assert_eq!(r.cv_curve[0].n_features, 8);
        assert_eq!(r, rfecv_select(&x, &y, &groups, &SelectionConfig::default()).unwrap());
        let names: Vec<String> = (0..8).map(|i| format!("f{i}")).collect();
        assert!(r.to_json(&names).unwrap().contains("\"f0\""));
    }

    #[test]
    fn rfecv_needs_enough_groups() {
        let (x, y) = noisy(12, 3, 6);
        let groups: Vec<&str> = (0..12).map(|i| if i % 2 == 0 { "a" } else { "b" }).collect();
        let err = rfecv_select(&x, &y, &groups, &SelectionConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Protocol(_)));
    }

    #[test]
    fn step_larger_than_one_shortens_the_path() {
        let (x, y) = noisy(40, 7, 7);
        let groups: Vec<String> = (0..40).map(|i| format!("g{}", i % 10)).collect();
        let cfg = SelectionConfig { step: 3, ..SelectionConfig::default() };
        let r = rfecv_select(&x, &y, &groups, &cfg).unwrap();
        let sizes: Vec<usize> = r.cv_curve.iter().map(|p| p.n_features).collect();
        assert_eq!(sizes, vec![7, 4, 1]);
    }
}
