use ndarray::Axis;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::validate_adam;
use crate::dataset::TimeSeriesDataset;
use crate::error::{config_err, Error, Result};
use crate::losses::PROB_EPS;
use crate::nets::{argmax_rows, to_time_major, Classifier, ClassifierSpec, Parameterized};
use crate::optim::{Adam, AdamConfig};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    pub seed: u64,
    pub hidden_size: usize,
    pub n_layers: usize,
    pub bidirectional: bool,
    pub dropout: f64,
}

impl Default for ClassifierTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 32,
            optimizer: AdamConfig::new(1e-3, 0.9, 0.999),
            seed: 0,
            hidden_size: 64,
            n_layers: 1,
            bidirectional: true,
            dropout: 0.2,
        }
    }
}

impl ClassifierTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(config_err("epochs", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(config_err("batch_size", "must be at least 1"));
        }
        if self.hidden_size == 0 || self.n_layers == 0 {
            return Err(config_err("hidden_size", "layer sizes must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(config_err("dropout", "must lie in [0, 1)"));
        }
        validate_adam(&self.optimizer)
    }

    pub fn spec(&self, n_features: usize, n_classes: usize) -> ClassifierSpec {
        ClassifierSpec {
            n_features,
            n_classes,
            hidden_size: self.hidden_size,
            n_layers: self.n_layers,
            bidirectional: self.bidirectional,
            dropout: self.dropout,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierEpoch {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
}

#[derive(Clone, Debug)]
pub struct PretrainOutcome<A> {
    pub classifier: Classifier<A>,
    pub test_accuracy: f64,
    pub history: Vec<ClassifierEpoch>,
}

pub fn accuracy<A: Scalar>(classifier: &Classifier<A>, data: &TimeSeriesDataset<A>) -> f64 {
    let pred = classifier.predict(data.data().view());
    let hits = pred.iter().zip(data.labels()).filter(|(p, y)| p == y).count();
    hits as f64 / data.n_samples().max(1) as f64
}

/// Trains a classifier with mean cross-entropy and reports accuracy on `test`.
pub fn pretrain_classifier<A: Scalar>(
    train: &TimeSeriesDataset<A>,
    test: &TimeSeriesDataset<A>,
    config: &ClassifierTrainConfig,
) -> Result<PretrainOutcome<A>> {
    config.validate()?;
    if train.class_count() < 2 {
        return Err(config_err("class_count", "a classifier needs at least two classes"));
    }
    if test.n_features() != train.n_features() || test.class_count() != train.class_count() {
        return Err(Error::Shape("train and test splits disagree on features or classes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let spec = config.spec(train.n_features(), train.class_count());
    let mut model = Classifier::new(spec, &mut rng);
    let mut adam = Adam::new(config.optimizer);
    let mut order: Vec<usize> = (0..train.n_samples()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut step = 0;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut hits) = (0.0, 0usize);
        for idx in order.chunks(config.batch_size) {
            let x = to_time_major(train.data().select(Axis(0), idx).view());
            let labels: Vec<usize> = idx.iter().map(|&i| train.labels()[i]).collect();
            let pass = model.forward_tm(x.view(), Some(&mut rng));
            let probs = model.probabilities(&pass.logits);
            let loss: f64 = labels
                .iter()
                .enumerate()
                .map(|(b, &y)| {
                    let p = probs[[b, y]].as_f64();
                    -(if p < PROB_EPS { PROB_EPS } else { p }).ln()
                })
                .sum();
            if !loss.is_finite() {
                return Err(Error::NonFinite {
                    component: "classifier cross-entropy".into(),
                    epoch,
                    step,
                });
            }
            loss_sum += loss;
            hits += argmax_rows(&probs)
                .iter()
                .zip(&labels)
                .filter(|(p, y)| p == y)
                .count();
            let dz = model.cross_entropy_logit_grad(&probs, &labels);
            model.zero_grad();
            model.backward_logits(&pass, &dz, true);
            adam.step_params(model.params_mut());
            step += 1;
        }
        let n = train.n_samples() as f64;
        history.push(ClassifierEpoch {
            epoch,
            loss: loss_sum / n,
            train_accuracy: hits as f64 / n,
        });
    }
    let test_accuracy = accuracy(&model, test);
    Ok(PretrainOutcome {
        classifier: model,
        test_accuracy,
        history,
    })
}
