use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cell::{bptt_gradients, forward_sequence, LstmParams};
use super::data::{split_7_3, Standardizer, WindowedDataset};
use super::LstmError;
use crate::regression::{prediction_metrics, PredictionMetrics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub window: usize,
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Global gradient-norm cap; 0 disables clipping.
    pub clip_norm: f64,
    pub forget_bias: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            window: 12,
            hidden: 16,
            learning_rate: 1e-2,
            epochs: 300,
            seed: 42,
            optimizer: Optimizer::Adam,
            clip_norm: 5.0,
            forget_bias: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LstmError> {
        let bad = |m: &str| Err(LstmError::Config(m.to_string()));
        if self.window == 0 {
            return bad("window must be positive");
        }
        if self.hidden == 0 {
            return bad("hidden size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.clip_norm >= 0.0 && self.clip_norm.is_finite()) {
            return bad("clip norm must be non-negative");
        }
        if !self.forget_bias.is_finite() {
            return bad("forget bias must be finite");
        }
        Ok(())
    }

    /// Parses a `key = value` file. Missing keys take their defaults.
    pub fn from_kv(text: &str) -> Result<Self, LstmError> {
        let cfg: Self = toml::from_str(text).map_err(|e| LstmError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn clip(&self) -> Option<f64> {
        (self.clip_norm > 0.0).then_some(self.clip_norm)
    }

    pub fn to_kv(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Training-split loss before each update, one entry per epoch.
    pub losses: Vec<f64>,
    pub train_samples: usize,
    pub test_samples: usize,
    pub test_metrics: PredictionMetrics,
}

/// Fitted network together with the input scaling learned on its training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmModel {
    pub params: LstmParams,
    pub scaler: Standardizer,
}

impl LstmModel {
    pub fn predict(&self, data: &WindowedDataset) -> Result<Vec<f64>, LstmError> {
        let scaled = self.scaler.transform(data);
        scaled
            .samples
            .iter()
            .map(|s| forward_sequence(&s.inputs, &self.params).map(|(p, _)| p))
            .collect()
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for k in 0..params.len() {
            self.m[k] = Self::BETA1 * self.m[k] + (1.0 - Self::BETA1) * grad[k];
            self.v[k] = Self::BETA2 * self.v[k] + (1.0 - Self::BETA2) * grad[k] * grad[k];
            params[k] -= lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Splits `data` 7:3 in time, standardizes inputs with training statistics,
/// runs full-batch training and scores the test split.
pub fn train(
    data: &WindowedDataset,
    config: &TrainConfig,
) -> Result<(LstmModel, TrainHistory), LstmError> {
    config.validate()?;
    if data.window != config.window {
        return Err(LstmError::Config(format!(
            "dataset window {} differs from configured window {}",
            data.window, config.window
        )));
    }
    let (train_raw, test_raw) = split_7_3(data)?;
    let scaler = Standardizer::fit(&train_raw);
    let train_set = scaler.transform(&train_raw);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = LstmParams::init(data.features(), config.hidden, config.forget_bias, &mut rng);
    let mut flat = params.to_flat();
    let mut adam = Adam::new(flat.len());
    let mut losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let (grad, loss) = bptt_gradients(&train_set.samples, &params, config.clip())
            .map_err(|e| match e {
                LstmError::NonFiniteLoss { .. } => LstmError::NonFiniteLoss { epoch: Some(epoch) },
                other => other,
            })?;
        losses.push(loss);
        let g = grad.to_flat();
        match config.optimizer {
            Optimizer::Sgd => flat.iter_mut().zip(&g).for_each(|(p, d)| *p -= config.learning_rate * d),
            Optimizer::Adam => adam.step(&mut flat, &g, config.learning_rate),
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(LstmError::NonFiniteLoss { epoch: Some(epoch) });
        }
        params.set_flat(&flat);
    }

    let model = LstmModel { params, scaler };
    let test_metrics = evaluate(&model, &test_raw)?;
    Ok((
        model,
        TrainHistory {
            losses,
            train_samples: train_raw.len(),
            test_samples: test_raw.len(),
            test_metrics,
        },
    ))
}

/// Prediction metrics of `model` on unscaled samples.
pub fn evaluate(model: &LstmModel, test: &WindowedDataset) -> Result<PredictionMetrics, LstmError> {
    if test.is_empty() {
        return Err(LstmError::EmptyTest);
    }
    let preds = model.predict(test)?;
    Ok(prediction_metrics(&test.targets(), &preds)?)
}
