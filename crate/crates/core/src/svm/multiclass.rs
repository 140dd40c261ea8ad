use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    check_rows, from_versioned_json, standardize_fit, to_versioned_json, train_binary_svm, Kernel, SmoConfig,
    StandardizationParams, SvmBinaryModel,
};
use crate::error::{Error, Result};

const FORMAT: &str = "enose-svm-ovo";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub kernel: Kernel,
    pub smo: SmoConfig,
}

impl SvmParams {
    /// Gaussian kernel from a length scale with the default box constraint.
    pub fn gaussian_scale(scale: f64) -> Result<Self> {
        Ok(Self { kernel: Kernel::from_scale(scale)?, smo: SmoConfig::default() })
    }

    pub fn linear() -> Self {
        Self { kernel: Kernel::Linear, smo: SmoConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmMulticlassModel {
    /// Sorted class ids.
    pub classes: Vec<usize>,
    pub standardization: StandardizationParams,
    /// One machine per unordered pair `(classes[a], classes[b])`, `a < b`,
    /// in lexicographic order; positive decisions vote for `classes[a]`.
    pub machines: Vec<SvmBinaryModel>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OvoVote {
    pub votes: Vec<usize>,
    /// Sum of `|decision|` over the machines each class won.
    pub confidence: Vec<f64>,
}

impl OvoVote {
    /// Majority vote; ties go to the larger confidence, then the lower index.
    pub fn winner(&self) -> usize {
        (0..self.votes.len())
            .max_by(|&a, &b| {
                self.votes[a]
                    .cmp(&self.votes[b])
                    .then(self.confidence[a].total_cmp(&self.confidence[b]))
                    .then(b.cmp(&a))
            })
            .unwrap_or(0)
    }
}

pub(crate) fn pairs(n_classes: usize) -> Vec<(usize, usize)> {
    (0..n_classes).flat_map(|a| (a + 1..n_classes).map(move |b| (a, b))).collect()
}

/// Trains one binary machine per class pair on already-standardized rows.
pub(crate) fn train_pairs(x: &[Vec<f64>], y: &[usize], classes: &[usize], params: &SvmParams) -> Result<Vec<SvmBinaryModel>> {
    pairs(classes.len())
        .into_par_iter()
        .map(|(a, b)| {
            let (ca, cb) = (classes[a], classes[b]);
            let (rows, labels): (Vec<Vec<f64>>, Vec<f64>) = x
                .iter()
                .zip(y)
                .filter(|(_, &c)| c == ca || c == cb)
                .map(|(row, &c)| (row.clone(), if c == ca { 1.0 } else { -1.0 }))
                .unzip();
            let (mut model, _) = train_binary_svm(&rows, &labels, params.kernel, &params.smo)
                .map_err(|e| e.context(format!("class pair ({ca}, {cb})")))?;
            model.classes = (ca, cb);
            Ok(model)
        })
        .collect()
}

/// Standardizes `x`, then trains the one-vs-one ensemble.
pub fn train_ovo(x: &[Vec<f64>], y: &[usize], params: &SvmParams) -> Result<SvmMulticlassModel> {
    if x.len() != y.len() {
        return Err(Error::Input(format!("{} rows but {} labels", x.len(), y.len())));
    }
    check_rows(x)?;
    let mut classes: Vec<usize> = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Training(format!("one-vs-one needs at least 2 classes, got {}", classes.len())));
    }
    let standardization = standardize_fit(x)?;
    let z: Vec<Vec<f64>> = x.iter().map(|r| standardization.apply_row(r)).collect();
    let machines = train_pairs(&z, y, &classes, params)?;
    Ok(SvmMulticlassModel { classes, standardization, machines })
}

impl SvmMulticlassModel {
    pub fn vote(&self, x: &[f64]) -> Result<OvoVote> {
        if x.len() != self.standardization.dim() {
            return Err(Error::Input(format!(
                "input has {} features, model expects {}",
                x.len(),
                self.standardization.dim()
            )));
        }
        let z = self.standardization.apply_row(x);
        let n = self.classes.len();
        let mut vote = OvoVote { votes: vec![0; n], confidence: vec![0.0; n] };
        for ((a, b), machine) in pairs(n).into_iter().zip(&self.machines) {
            let d = machine.decision_unchecked(&z);
            let winner = if d >= 0.0 { a } else { b };
            vote.votes[winner] += 1;
            vote.confidence[winner] += d.abs();
        }
        Ok(vote)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(self.classes[self.vote(x)?.winner()])
    }

    pub fn to_json(&self) -> Result<String> {
        to_versioned_json(FORMAT, self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = from_versioned_json(FORMAT, text)?;
        let n = model.classes.len();
        if model.machines.len() != n * (n - 1) / 2 {
            return Err(Error::Input(format!("{} machines for {n} classes", model.machines.len())));
        }
        Ok(model)
    }
}

pub fn predict_ovo(model: &SvmMulticlassModel, x: &[f64]) -> Result<usize> {
    model.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn blobs(per_class: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let centers = [[0.0, 0.0], [6.0, 0.0], [0.0, 6.0]];
        let noise = Normal::new(0.0, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for _ in 0..per_class {
                x.push(center.iter().map(|v| v + noise.sample(&mut rng)).collect());
                y.push(c);
            }
        }
        (x, y)
    }

    #[test]
    fn separated_blobs() {
        let (x, y) = blobs(20, 3);
        let model = train_ovo(&x, &y, &SvmParams::gaussian_scale(1.0).unwrap()).unwrap();
        assert_eq!(model.machines.len(), 3);
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(predict_ovo(&model, xi).unwrap(), *yi);
        }
        let back = SvmMulticlassModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn two_classes_single_machine() {
        let (x, y) = blobs(10, 4);
        let keep: Vec<usize> = (0..x.len()).filter(|&i| y[i] != 1).collect();
        let x2: Vec<Vec<f64>> = keep.iter().map(|&i| x[i].clone()).collect();
        let y2: Vec<usize> = keep.iter().map(|&i| y[i]).collect();
        let model = train_ovo(&x2, &y2, &SvmParams::linear()).unwrap();
        assert_eq!(model.classes, vec![0, 2]);
        assert_eq!(model.machines.len(), 1);
        assert_eq!(model.machines[0].classes, (0, 2));
    }

    #[test]
    fn three_way_vote_tie_uses_confidence() {
        // Each class wins exactly one duel: a cyclic tie.
        let vote = OvoVote { votes: vec![1, 1, 1], confidence: vec![0.3, 0.9, 0.2] };
        assert_eq!(vote.winner(), 1);
        let even = OvoVote { votes: vec![1, 1, 1], confidence: vec![0.5, 0.5, 0.5] };
        assert_eq!(even.winner(), 0);
        assert_eq!(OvoVote { votes: vec![0, 2, 1], confidence: vec![9.0, 0.1, 0.1] }.winner(), 1);
    }

    #[test]
    fn constructed_cyclic_point() {
        // Hand-built machines: 0 beats 1, 1 beats 2, 2 beats 0 at the origin,
        // with the 1-vs-2 machine the most confident.
        let machine = |bias: f64, classes| SvmBinaryModel {
            kernel: Kernel::Linear,
            support_vectors: vec![vec![0.0]],
            dual_coef: vec![0.0],
            bias,
            classes,
        };
        let model = SvmMulticlassModel {
            classes: vec![0, 1, 2],
            standardization: StandardizationParams { mean: vec![0.0], std: vec![1.0] },
            machines: vec![machine(0.4, (0, 1)), machine(-0.2, (0, 2)), machine(0.7, (1, 2))],
        };
        let vote = model.vote(&[0.0]).unwrap();
        assert_eq!(vote.votes, vec![1, 1, 1]);
        assert_eq!(model.predict(&[0.0]).unwrap(), 1);
    }

    #[test]
    fn single_class_is_an_error() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(matches!(train_ovo(&x, &[0, 0], &SvmParams::linear()), Err(Error::Training(_))));
    }
}
