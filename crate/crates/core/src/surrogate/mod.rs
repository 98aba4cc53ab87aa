//! MLP classifier from lever settings to outcome regime.

mod cv;
mod mlp;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::runner::Dataset;
use crate::space::{ParamVector, ParameterSpace};

pub use cv::{cross_validate, group_folds, CvReport};
pub use mlp::{Adam, Grads, Layer, Mlp};

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const N_CLASSES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainHyper {
    pub hidden: Vec<usize>,
    pub l2_lambda: f64,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub train_seed: u64,
    /// Weight each class by the inverse of its frequency.
    pub class_weights: bool,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            hidden: vec![128, 128],
            l2_lambda: 1e-4,
            epochs: 300,
            batch: 64,
            lr: 1e-3,
            train_seed: 0,
            class_weights: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub hyper: TrainHyper,
    pub n_samples: usize,
    pub final_loss: f64,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    pub format_version: u32,
    /// Inputs are mapped to [0, 1] by these bounds.
    pub space: ParameterSpace,
    pub net: Mlp,
    pub meta: TrainingMeta,
}

/// A prediction plus a flag for inputs outside the training space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub proba: [f64; N_CLASSES],
    pub extrapolated: bool,
}

fn scale(space: &ParameterSpace, x: &[f64]) -> Vec<f64> {
    space
        .dims
        .iter()
        .zip(x)
        .map(|(d, v)| (v - d.lower) / d.width())
        .collect()
}

impl SurrogateModel {
    /// Class probabilities in (extinction, prey survival, coexistence) order.
    pub fn predict_proba(&self, x: &[f64]) -> [f64; N_CLASSES] {
        let p = self.net.forward(&scale(&self.space, x));
        [p[0], p[1], p[2]]
    }

    pub fn predict(&self, x: &ParamVector) -> Prediction {
        Prediction {
            proba: self.predict_proba(&x.0),
            extrapolated: !self.space.contains(x),
        }
    }

    pub fn coexistence(&self, x: &[f64]) -> f64 {
        self.predict_proba(x)[2]
    }

    pub fn predict_class(&self, x: &[f64]) -> usize {
        argmax(&self.predict_proba(x))
    }
}

pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

/// Trains on raw feature rows and class labels.
pub fn train_xy(space: &ParameterSpace, x: &[Vec<f64>], y: &[usize], hyper: &TrainHyper) -> Result<SurrogateModel> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::Precondition("training needs matching, non-empty inputs and labels".into()));
    }
    let mut counts = [0usize; N_CLASSES];
    for &c in y {
        if c >= N_CLASSES {
            return Err(Error::Precondition(format!("label {c} out of range")));
        }
        counts[c] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::Precondition("training needs at least two classes".into()));
    }
    if hyper.batch == 0 || hyper.epochs == 0 {
        return Err(Error::Precondition("batch size and epochs must be positive".into()));
    }
    let inputs: Vec<Vec<f64>> = x.iter().map(|r| scale(space, r)).collect();
    let n = inputs.len();
    let class_w: [f64; N_CLASSES] = if hyper.class_weights {
        let present = counts.iter().filter(|&&c| c > 0).count() as f64;
        counts.map(|c| if c == 0 { 0.0 } else { n as f64 / (present * c as f64) })
    } else {
        [1.0; N_CLASSES]
    };
    let sample_w: Vec<f64> = y.iter().map(|&c| class_w[c]).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.train_seed);
    let mut sizes = vec![space.len()];
    sizes.extend(&hyper.hidden);
    sizes.push(N_CLASSES);
    let mut net = Mlp::new(&sizes, &mut rng);
    let mut opt = Adam::new(&net, hyper.lr);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(hyper.batch) {
            let xs: Vec<&[f64]> = chunk.iter().map(|&i| inputs[i].as_slice()).collect();
            let ys: Vec<usize> = chunk.iter().map(|&i| y[i]).collect();
            let ws: Vec<f64> = chunk.iter().map(|&i| sample_w[i]).collect();
            let (loss, grads) = net.loss_and_grad(&xs, &ys, &ws, hyper.l2_lambda);
            if !loss.is_finite() || grads.flat().any(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!(
                    "training loss became non-finite in epoch {} (lr {}); try a smaller learning rate",
                    epoch + 1,
                    hyper.lr
                )));
            }
            opt.step(&mut net, &grads);
        }
    }
    let all: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
    let (final_loss, _) = net.loss_and_grad(&all, y, &sample_w, hyper.l2_lambda);
    if !final_loss.is_finite() {
        return Err(Error::Numeric("final training loss is not finite".into()));
    }
    let correct = inputs.iter().zip(y).filter(|(r, &c)| argmax(&net.forward(r)) == c).count();
    Ok(SurrogateModel {
        format_version: MODEL_FORMAT_VERSION,
        space: space.clone(),
        net,
        meta: TrainingMeta {
            hyper: hyper.clone(),
            n_samples: n,
            final_loss,
            train_accuracy: correct as f64 / n as f64,
        },
    })
}

/// Trains on every run of the dataset, one sample per run.
pub fn train_mlp(ds: &Dataset, hyper: &TrainHyper) -> Result<SurrogateModel> {
    let x: Vec<Vec<f64>> = ds.records.iter().map(|r| r.params.0.clone()).collect();
    let y: Vec<usize> = ds.records.iter().map(|r| r.outcome.label.index()).collect();
    train_xy(&ds.space, &x, &y, hyper)
}

pub fn save_model(path: &std::path::Path, model: &SurrogateModel) -> Result<()> {
    crate::io::write_json(path, model)
}

pub fn load_model(path: &std::path::Path) -> Result<SurrogateModel> {
    let model: SurrogateModel = crate::io::read_json(path)?;
    if model.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::schema(
            path,
            format!("model format {} is not supported (expected {})", model.format_version, MODEL_FORMAT_VERSION),
        ));
    }
    model.space.validate()?;
    let sizes = model.net.sizes();
    if sizes.first() != Some(&model.space.len()) || sizes.last() != Some(&N_CLASSES) {
        return Err(Error::schema(path, format!("network shape {sizes:?} does not match the space")));
    }
    Ok(model)
}
