use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classify::platt;
use crate::error::{Error, Result};
use crate::features::PooledFeature;
use crate::{Label, Stream};

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_C: f64 = 1.0;

const BIAS_FEATURE: f64 = 1.0;
const MAX_EPOCHS: usize = 1000;
const TOLERANCE: f64 = 1e-3;
const CALIBRATION_FOLDS: usize = 3;

/// Calibrated linear SVM for one stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSvmModel {
    pub format_version: u32,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub calib_a: f64,
    pub calib_b: f64,
    pub class_weight_pos: f64,
    pub class_weight_neg: f64,
    pub c_param: f64,
    pub stream: Stream,
    pub descriptor_name: String,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct TrainParams {
    pub c_param: f64,
    pub seed: u64,
    pub descriptor_name: String,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            c_param: DEFAULT_C,
            seed: 0,
            descriptor_name: String::new(),
        }
    }
}

/// Inverse-frequency weights `(positive, negative)`, scaled so the majority
/// class weighs 1.
pub fn class_weights(n_pos: usize, n_neg: usize) -> (f64, f64) {
    let majority = n_pos.max(n_neg) as f64;
    (majority / n_pos as f64, majority / n_neg as f64)
}

struct Problem<'a> {
    rows: Vec<&'a [f32]>,
    y: Vec<f64>,
    dim: usize,
}

impl Problem<'_> {
    fn dot(&self, w: &[f64], i: usize) -> f64 {
        let x = self.rows[i];
        x.iter().zip(w).map(|(&xi, wi)| f64::from(xi) * wi).sum::<f64>() + BIAS_FEATURE * w[self.dim]
    }
}

/// L1-loss (hinge) dual coordinate descent with a per-sample box `[0, C_i]`.
/// Returns the primal weights with the bias appended.
fn solve(p: &Problem<'_>, upper: &[f64], seed: u64) -> Vec<f64> {
    let n = p.rows.len();
    let mut w = vec![0f64; p.dim + 1];
    let mut alpha = vec![0f64; n];
    let q: Vec<f64> = p
        .rows
        .iter()
        .map(|x| x.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>() + BIAS_FEATURE * BIAS_FEATURE)
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_EPOCHS {
        order.shuffle(&mut rng);
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for &i in &order {
            let g = p.y[i] * p.dot(&w, i) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == upper[i] {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / q[i]).clamp(0.0, upper[i]);
                let step = (alpha[i] - old) * p.y[i];
                for (wj, &xj) in w.iter_mut().zip(p.rows[i]) {
                    *wj += step * f64::from(xj);
                }
                w[p.dim] += step * BIAS_FEATURE;
            }
        }
        if pg_max - pg_min < TOLERANCE {
            break;
        }
    }
    w
}

fn check_inputs(features: &[PooledFeature], labels: &[Label]) -> Result<(usize, Stream, usize, usize)> {
    if features.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} features but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|l| l.is_positive()).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass {
            positives: n_pos,
            negatives: n_neg,
        });
    }
    let first = &features[0];
    for f in features {
        if f.dim() != first.dim() {
            return Err(Error::DimensionMismatch {
                expected: first.dim(),
                got: f.dim(),
            });
        }
        if f.source_stream != first.source_stream {
            return Err(Error::InvalidInput("features from both streams in one training set".into()));
        }
    }
    if first.dim() == 0 {
        return Err(Error::NoFeatures);
    }
    Ok((first.dim(), first.source_stream, n_pos, n_neg))
}

fn fit_linear(features: &[&PooledFeature], labels: &[Label], c: f64, seed: u64) -> Vec<f64> {
    let n_pos = labels.iter().filter(|l| l.is_positive()).count();
    let (wp, wn) = class_weights(n_pos, labels.len() - n_pos);
    let problem = Problem {
        rows: features.iter().map(|f| f.values.as_slice()).collect(),
        y: labels.iter().map(|l| l.sign()).collect(),
        dim: features[0].dim(),
    };
    let upper: Vec<f64> = labels.iter().map(|l| c * if l.is_positive() { wp } else { wn }).collect();
    solve(&problem, &upper, seed)
}

fn raw_margin(w: &[f64], x: &[f32]) -> f64 {
    let dim = w.len() - 1;
    x.iter().zip(&w[..dim]).map(|(&xi, wi)| f64::from(xi) * wi).sum::<f64>() + BIAS_FEATURE * w[dim]
}

/// Margins of each training example from models that did not see it.
fn out_of_fold_margins(features: &[&PooledFeature], labels: &[Label], c: f64, seed: u64) -> Vec<f64> {
    let n_pos = labels.iter().filter(|l| l.is_positive()).count();
    let k = CALIBRATION_FOLDS.min(n_pos).min(labels.len() - n_pos);
    if k < 2 {
        let w = fit_linear(features, labels, c, seed);
        return features.iter().map(|f| raw_margin(&w, &f.values)).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_ca1b);
    let mut fold_of = vec![0usize; labels.len()];
    for class in [Label::Sensitive, Label::NonSensitive] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for (j, i) in idx.into_iter().enumerate() {
            fold_of[i] = j % k;
        }
    }
    let mut margins = vec![0f64; labels.len()];
    for fold in 0..k {
        let (train, test): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| fold_of[i] != fold);
        let tf: Vec<&PooledFeature> = train.iter().map(|&i| features[i]).collect();
        let tl: Vec<Label> = train.iter().map(|&i| labels[i]).collect();
        let w = fit_linear(&tf, &tl, c, seed.wrapping_add(fold as u64 + 1));
        for i in test {
            margins[i] = raw_margin(&w, &features[i].values);
        }
    }
    margins
}

/// Trains a class-weighted linear SVM and calibrates it on out-of-fold margins.
pub fn train_svm(features: &[PooledFeature], labels: &[Label], params: &TrainParams) -> Result<LinearSvmModel> {
    if !(params.c_param > 0.0 && params.c_param.is_finite()) {
        return Err(Error::Config(format!("C must be positive, got {}", params.c_param)));
    }
    if features.is_empty() {
        return Err(Error::SingleClass { positives: 0, negatives: 0 });
    }
    let (dim, stream, n_pos, n_neg) = check_inputs(features, labels)?;
    let refs: Vec<&PooledFeature> = features.iter().collect();
    let mut w = fit_linear(&refs, labels, params.c_param, params.seed);
    let bias = w.pop().expect("bias term");
    let margins = out_of_fold_margins(&refs, labels, params.c_param, params.seed);
    let positive: Vec<bool> = labels.iter().map(|l| l.is_positive()).collect();
    let (calib_a, calib_b) = platt::fit_sigmoid(&margins, &positive);
    let (class_weight_pos, class_weight_neg) = class_weights(n_pos, n_neg);
    Ok(LinearSvmModel {
        format_version: MODEL_FORMAT_VERSION,
        dim,
        weights: w,
        bias,
        calib_a,
        calib_b,
        class_weight_pos,
        class_weight_neg,
        c_param: params.c_param,
        stream,
        descriptor_name: params.descriptor_name.clone(),
        seed: params.seed,
    })
}

impl LinearSvmModel {
    /// `w·x + b`.
    pub fn margin(&self, values: &[f32]) -> Result<f64> {
        if values.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: values.len(),
            });
        }
        Ok(values.iter().zip(&self.weights).map(|(&x, w)| f64::from(x) * w).sum::<f64>() + self.bias * BIAS_FEATURE)
    }

    pub fn probability_from_margin(&self, margin: f64) -> f64 {
        platt::sigmoid(margin, self.calib_a, self.calib_b)
    }

    pub fn predict_label(&self, feature: &PooledFeature) -> Result<Label> {
        Ok(if self.margin(&feature.values)? >= 0.0 { Label::Sensitive } else { Label::NonSensitive })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let err = |message: String| Error::ModelFile {
            path: path.to_path_buf(),
            message,
        };
        let bytes = fs::read(path).map_err(|e| err(e.to_string()))?;
        let model: LinearSvmModel = serde_json::from_slice(&bytes).map_err(|e| err(e.to_string()))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(err(format!("unsupported format version {}", model.format_version)));
        }
        if model.weights.len() != model.dim {
            return Err(err(format!("{} weights for dim {}", model.weights.len(), model.dim)));
        }
        if model.calib_a >= 0.0 {
            return Err(err("calibration slope must be negative".into()));
        }
        Ok(model)
    }
}

/// Calibrated probability that the video is sensitive.
pub fn predict_proba(model: &LinearSvmModel, feature: &PooledFeature) -> Result<f64> {
    if feature.source_stream != model.stream {
        return Err(Error::InvalidInput(format!(
            "{} feature given to a {} model",
            feature.source_stream, model.stream
        )));
    }
    Ok(model.probability_from_margin(model.margin(&feature.values)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn pf(values: Vec<f32>) -> PooledFeature {
        PooledFeature {
            video_id: String::new(),
            values,
            source_stream: Stream::Static,
            n_frames: 1,
        }
    }

    /// 20 points per class on either side of the line x + y = 0, at least
    /// 1 unit away from it.
    fn toy(seed: u64) -> (Vec<PooledFeature>, Vec<Label>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut feats = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let label = if i % 2 == 0 { Label::Sensitive } else { Label::NonSensitive };
            let along: f32 = rng.gen_range(-3.0..3.0);
            let off: f32 = rng.gen_range(1.0..3.0) * std::f32::consts::SQRT_2 * label.sign() as f32;
            let (ux, uy) = (std::f32::consts::FRAC_1_SQRT_2, std::f32::consts::FRAC_1_SQRT_2);
            feats.push(pf(vec![ux * off - uy * along, uy * off + ux * along]));
            labels.push(label);
        }
        (feats, labels)
    }

    fn params(seed: u64) -> TrainParams {
        TrainParams {
            c_param: 1.0,
            seed,
            descriptor_name: "toy".into(),
        }
    }

    #[test]
    fn separable_toy_set() {
        let (x, y) = toy(1);
        let m = train_svm(&x, &y, &params(0)).unwrap();
        for (f, l) in x.iter().zip(&y) {
            assert_eq!(m.predict_label(f).unwrap(), *l);
            let p = predict_proba(&m, f).unwrap();
            assert_eq!(p >= 0.5, l.is_positive(), "p={p}");
        }
        assert!(m.calib_a < 0.0);
    }

    #[test]
    fn flipped_labels_negate_scores() {
        let (x, y) = toy(2);
        let flipped: Vec<Label> = y
            .iter()
            .map(|l| if l.is_positive() { Label::NonSensitive } else { Label::Sensitive })
            .collect();
        let a = train_svm(&x, &y, &params(5)).unwrap();
        let b = train_svm(&x, &flipped, &params(5)).unwrap();
        for (wa, wb) in a.weights.iter().zip(&b.weights) {
            assert_eq!(*wa, -wb);
        }
        assert_eq!(a.bias, -b.bias);
        for f in &x {
            assert_eq!(a.margin(&f.values).unwrap(), -b.margin(&f.values).unwrap());
        }
    }

    #[test]
    fn imbalanced_class_ratio_weights() {
        let (pos, neg) = class_weights(1118, 1567);
        assert!((pos - 1567.0 / 1118.0).abs() < 1e-15);
        assert!((pos - 1.402).abs() < 1e-3);
        assert_eq!(neg, 1.0);
    }

    #[test]
    fn errors() {
        let (x, _) = toy(3);
        let all_pos = vec![Label::Sensitive; x.len()];
        assert!(matches!(train_svm(&x, &all_pos, &params(0)), Err(Error::SingleClass { .. })));
        let mixed = vec![pf(vec![1.0]), pf(vec![1.0, 2.0])];
        assert!(matches!(
            train_svm(&mixed, &[Label::Sensitive, Label::NonSensitive], &params(0)),
            Err(Error::DimensionMismatch { .. })
        ));
        let (x, y) = toy(3);
        let m = train_svm(&x, &y, &params(0)).unwrap();
        assert!(matches!(predict_proba(&m, &pf(vec![1.0])), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn deterministic_and_round_trips() {
        let (x, y) = toy(4);
        let a = train_svm(&x, &y, &params(9)).unwrap();
        let b = train_svm(&x, &y, &params(9)).unwrap();
        assert_eq!(a, b);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        a.save(&path).unwrap();
        assert_eq!(LinearSvmModel::load(&path).unwrap(), a);
    }

    #[test]
    fn probability_examples() {
        let mut m = train_svm(&toy(5).0, &toy(5).1, &params(0)).unwrap();
        m.calib_a = -1.0;
        m.calib_b = 0.0;
        assert_eq!(m.probability_from_margin(0.0), 0.5);
        assert!((m.probability_from_margin(2.0) - 0.8808).abs() < 1e-4);
        assert!(m.probability_from_margin(1e3) > 1.0 - 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn probability_follows_margin_order(seed in 0u64..1000, xs in proptest::collection::vec((-5.0f32..5.0, -5.0f32..5.0), 2..20)) {
            let (x, y) = toy(seed);
            let m = train_svm(&x, &y, &params(seed)).unwrap();
            let mut scored: Vec<(f64, f64)> = xs
                .iter()
                .map(|&(a, b)| {
                    let f = pf(vec![a, b]);
                    (m.margin(&f.values).unwrap(), predict_proba(&m, &f).unwrap())
                })
                .collect();
            scored.sort_by(|a, b| a.0.total_cmp(&b.0));
            for w in scored.windows(2) {
                prop_assert!(w[0].1 <= w[1].1);
            }
        }
    }
}
