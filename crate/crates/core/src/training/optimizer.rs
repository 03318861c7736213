use serde::{Deserialize, Serialize};

use crate::model::{ImageEncoderFamily, ModelParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    /// Adam with decoupled weight decay.
    AdamW,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

/// What the optimizer rule needs to know about a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelDescription {
    /// `None` for text-only models.
    pub image_family: Option<ImageEncoderFamily>,
}

/// AdamW (decay 0.01) for layout-aware image encoders, plain Adam otherwise.
pub fn select_optimizer(model: &ModelDescription) -> OptimizerSpec {
    let layout_aware = model.image_family == Some(ImageEncoderFamily::LayoutAware);
    OptimizerSpec {
        kind: if layout_aware { OptimizerKind::AdamW } else { OptimizerKind::Adam },
        beta1: 0.9,
        beta2: 0.999,
        epsilon: 1e-8,
        weight_decay: if layout_aware { 0.01 } else { 0.0 },
    }
}

/// Global L2 norm above which gradients are rescaled.
pub const CLIP_NORM: f64 = 1.0;

pub fn clip_global_norm(grads: &mut ModelParams, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

pub(crate) struct Optimizer {
    spec: OptimizerSpec,
    learning_rate: f64,
    step: i32,
    m: ModelParams,
    v: ModelParams,
}

impl Optimizer {
    pub(crate) fn new(spec: OptimizerSpec, learning_rate: f64, params: &ModelParams) -> Optimizer {
        Optimizer {
            spec,
            learning_rate,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub(crate) fn update(&mut self, params: &mut ModelParams, grads: &ModelParams) {
        self.step += 1;
        let OptimizerSpec {
            kind,
            beta1,
            beta2,
            epsilon,
            weight_decay,
        } = self.spec;
        let lr = self.learning_rate;
        let c1 = 1.0 - beta1.powi(self.step);
        let c2 = 1.0 - beta2.powi(self.step);
        let g = grads.named_tensors();
        for (((p, (_, g)), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(g)
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
        {
            if kind == OptimizerKind::AdamW {
                p.mapv_inplace(|x| x * (1.0 - lr * weight_decay));
            }
            m.zip_mut_with(g, |m, &g| *m = beta1 * *m + (1.0 - beta1) * g);
            v.zip_mut_with(g, |v, &g| *v = beta2 * *v + (1.0 - beta2) * g * g);
            ndarray::Zip::from(p).and(&*m).and(&*v).for_each(|p, &m, &v| {
                *p -= lr * (m / c1) / ((v / c2).sqrt() + epsilon);
            });
        }
    }
}
