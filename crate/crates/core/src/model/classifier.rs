use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ops::{bias, outer, softmax, xavier};
use crate::corpus::StanceLabel;

/// Output of the classifier. Logits are ordered `[SUPPORT, OPPOSE]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StancePrediction {
    pub logits: [f64; 2],
    pub prob_support: f64,
    pub label: StanceLabel,
}

impl StancePrediction {
    pub fn from_logits(logits: [f64; 2]) -> StancePrediction {
        let prob_support = softmax(&logits)[0];
        let label = if prob_support >= 0.5 {
            StanceLabel::Support
        } else {
            StanceLabel::Oppose
        };
        StancePrediction {
            logits,
            prob_support,
            label,
        }
    }
}

pub(crate) fn label_index(label: StanceLabel) -> usize {
    match label {
        StanceLabel::Support => 0,
        StanceLabel::Oppose => 1,
    }
}

/// One tanh hidden layer then a linear map to two logits.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierParams {
    pub w1: Array2<f64>,
    pub b1: Array2<f64>,
    pub w2: Array2<f64>,
    pub b2: Array2<f64>,
}

pub(crate) struct ClassifierTrace {
    input: Array1<f64>,
    hidden: Array1<f64>,
    /// Inverted-dropout multipliers (0 or 1/(1−p)); all ones at evaluation.
    keep: Array1<f64>,
    pub(crate) logits: [f64; 2],
}

impl ClassifierParams {
    pub fn init<R: Rng>(input_dim: usize, hidden: usize, rng: &mut R) -> ClassifierParams {
        ClassifierParams {
            w1: xavier(input_dim, hidden, rng),
            b1: bias(hidden),
            w2: xavier(hidden, 2, rng),
            b2: bias(2),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn classify(&self, fused: &Array1<f64>) -> StancePrediction {
        StancePrediction::from_logits(self.forward(fused, None::<(&mut rand_chacha::ChaCha8Rng, f64)>).logits)
    }

    pub(crate) fn forward<R: Rng>(&self, fused: &Array1<f64>, dropout: Option<(&mut R, f64)>) -> ClassifierTrace {
        let z = fused.view().insert_axis(Axis(0)).dot(&self.w1) + &self.b1;
        let hidden = z.row(0).mapv(f64::tanh);
        let keep = match dropout {
            Some((rng, p)) if p > 0.0 => {
                Array1::from_shape_fn(hidden.len(), |_| if rng.random::<f64>() < p { 0.0 } else { 1.0 / (1.0 - p) })
            }
            _ => Array1::ones(hidden.len()),
        };
        let dropped = &hidden * &keep;
        let out = dropped.view().insert_axis(Axis(0)).dot(&self.w2) + &self.b2;
        ClassifierTrace {
            input: fused.clone(),
            hidden,
            keep,
            logits: [out[[0, 0]], out[[0, 1]]],
        }
    }

    /// Cross-entropy gradient for `gold`; returns (loss, param grads, d input).
    pub(crate) fn backward(&self, trace: &ClassifierTrace, gold: StanceLabel) -> (f64, ClassifierParams, Array1<f64>) {
        let probs = softmax(&trace.logits);
        let g = label_index(gold);
        let loss = -log_softmax(&trace.logits)[g];
        let mut d_logits = Array1::from(probs);
        d_logits[g] -= 1.0;
        let dropped = &trace.hidden * &trace.keep;
        let d_w2 = outer(&dropped, &d_logits);
        let d_b2 = d_logits.clone().insert_axis(Axis(0));
        let d_dropped = self.w2.dot(&d_logits);
        let d_z = &d_dropped * &trace.keep * trace.hidden.mapv(|h| 1.0 - h * h);
        let d_w1 = outer(&trace.input, &d_z);
        let d_b1 = d_z.clone().insert_axis(Axis(0));
        let d_input = self.w1.dot(&d_z);
        (
            loss,
            ClassifierParams {
                w1: d_w1,
                b1: d_b1,
                w2: d_w2,
                b2: d_b2,
            },
            d_input,
        )
    }

    pub(crate) fn tensors(&self) -> Vec<(&'static str, &Array2<f64>)> {
        vec![("w1", &self.w1), ("b1", &self.b1), ("w2", &self.w2), ("b2", &self.b2)]
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        vec![&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }
}

fn log_softmax(logits: &[f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let lse = m + ((logits[0] - m).exp() + (logits[1] - m).exp()).ln();
    [logits[0] - lse, logits[1] - lse]
}
