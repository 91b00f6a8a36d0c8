//! The learner: feature extractor, projection head and classifier, plus the
//! prediction-entropy criterion.

mod backbone;
mod checkpoint;

use std::collections::HashMap;

use candle_core::{DType, Device, Module, Tensor, Var};
use candle_nn::{linear, Linear, VarBuilder, VarMap};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use backbone::BackboneKind;
use backbone::Backbone;

use crate::data::{Image, Sample};
use crate::error::{Error, Result};
use crate::seed::{rng_for, Purpose};

/// Output width of the projection head.
pub const PROJECTION_DIM: usize = 128;

/// Whether batch normalization uses batch statistics (and updates its
/// running estimates) or the running estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

impl Mode {
    fn is_train(self) -> bool {
        self == Mode::Train
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub backbone: BackboneKind,
    /// `(height, width, channels)` of input images.
    pub input_dims: (usize, usize, usize),
    pub num_classes: usize,
    #[serde(default = "default_projection_dim")]
    pub projection_dim: usize,
}

fn default_projection_dim() -> usize {
    PROJECTION_DIM
}

impl ModelConfig {
    pub fn new(backbone: BackboneKind, input_dims: (usize, usize, usize), num_classes: usize) -> Self {
        Self {
            backbone,
            input_dims,
            num_classes,
            projection_dim: PROJECTION_DIM,
        }
    }
}

/// Outputs of one pass through the shared feature extractor.
pub struct Forward {
    /// Raw class scores, `N x C`.
    pub logits: Tensor,
    /// Row-normalized projections `g(f(x))`, `N x projection_dim`.
    pub z: Tensor,
}

pub struct Learner {
    config: ModelConfig,
    backbone: Backbone,
    projection_hidden: Linear,
    projection_out: Linear,
    classifier: Linear,
    varmap: VarMap,
    device: Device,
}

impl std::fmt::Debug for Learner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Learner").field("config", &self.config).finish_non_exhaustive()
    }
}

impl Learner {
    /// Builds a randomly initialized learner on the CPU. Initialization is a
    /// pure function of `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        let learner = Self::build(config)?;
        learner.initialize(seed)?;
        Ok(learner)
    }

    fn build(config: ModelConfig) -> Result<Self> {
        if config.num_classes < 2 {
            return Err(Error::InvalidArgument("a classifier needs at least two classes".into()));
        }
        let device = Device::Cpu;
        let varmap = VarMap::new();
        let vb = VarBuilder::from_varmap(&varmap, DType::F32, &device);
        let feat = config.backbone.feature_dim();
        let backbone = Backbone::new(config.backbone, config.input_dims.2, vb.pp("f"))?;
        let projection_hidden = linear(feat, feat, vb.pp("g.0"))?;
        let projection_out = linear(feat, config.projection_dim, vb.pp("g.1"))?;
        let classifier = linear(feat, config.num_classes, vb.pp("phi"))?;
        Ok(Self {
            config,
            backbone,
            projection_hidden,
            projection_out,
            classifier,
            varmap,
            device,
        })
    }

    /// Kaiming-uniform weights for convolutions, `1/sqrt(fan_in)` bounds for
    /// linear layers and biases; batch-norm parameters keep their constants.
    fn initialize(&self, seed: u64) -> Result<()> {
        let vars = self.named_vars();
        let mut names: Vec<&String> = vars.keys().collect();
        names.sort();
        let fan_in = |v: &Var| v.dims()[1..].iter().product::<usize>() as f64;
        let mut rng = rng_for(seed, Purpose::ModelInit);
        for name in names {
            let var = &vars[name];
            let bound = if var.rank() == 4 {
                (6.0 / fan_in(var)).sqrt()
            } else if var.rank() == 2 {
                1.0 / fan_in(var).sqrt()
            } else if let Some(prefix) = name.strip_suffix(".bias") {
                match vars.get(&format!("{prefix}.weight")) {
                    Some(w) if w.rank() >= 2 => 1.0 / fan_in(w).sqrt(),
                    _ => continue,
                }
            } else {
                continue;
            };
            let values: Vec<f32> = (0..var.elem_count())
                .map(|_| rng.random_range(-bound..bound) as f32)
                .collect();
            var.set(&Tensor::from_vec(values, var.shape(), &self.device)?)?;
        }
        Ok(())
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub(crate) fn named_vars(&self) -> HashMap<String, Var> {
        self.varmap.data().lock().expect("varmap lock").clone()
    }

    /// Trainable variables (batch-norm running statistics excluded).
    pub fn trainable_vars(&self) -> Vec<Var> {
        let mut vars: Vec<(String, Var)> = self
            .named_vars()
            .into_iter()
            .filter(|(n, _)| !n.ends_with("running_mean") && !n.ends_with("running_var"))
            .collect();
        vars.sort_by(|a, b| a.0.cmp(&b.0));
        vars.into_iter().map(|(_, v)| v).collect()
    }

    /// Stacks images into an `N x C x H x W` tensor, checking their shape.
    pub fn input_tensor(&self, images: &[&Image]) -> Result<Tensor> {
        let (h, w, c) = self.config.input_dims;
        let mut data = Vec::with_capacity(images.len() * h * w * c);
        for img in images {
            if img.dims() != (h, w, c) {
                return Err(Error::Shape(format!(
                    "model expects {h}x{w}x{c} images, got {:?}",
                    img.dims()
                )));
            }
            data.extend(img.to_chw());
        }
        Ok(Tensor::from_vec(data, (images.len(), c, h, w), &self.device)?)
    }

    pub fn sample_tensor(&self, samples: &[Sample]) -> Result<Tensor> {
        let images: Vec<&Image> = samples.iter().map(|s| s.image.as_ref()).collect();
        self.input_tensor(&images)
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let (h, w, c) = self.config.input_dims;
        match x.dims() {
            [_, cc, hh, ww] if (*hh, *ww, *cc) == (h, w, c) => Ok(()),
            other => Err(Error::Shape(format!(
                "expected N x {c} x {h} x {w} input, got {other:?}"
            ))),
        }
    }

    /// Pooled backbone features `f(x)`.
    pub fn features(&self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        self.check_input(x)?;
        Ok(self.backbone.forward(x, mode.is_train())?)
    }

    fn project(&self, features: &Tensor) -> Result<Tensor> {
        let h = self.projection_hidden.forward(features)?.relu()?;
        let z = self.projection_out.forward(&h)?;
        Ok(l2_normalize_rows(&z)?)
    }

    /// Logits and normalized projections from a single backbone pass.
    pub fn forward(&self, x: &Tensor, mode: Mode) -> Result<Forward> {
        let f = self.features(x, mode)?;
        Ok(Forward {
            logits: self.classifier.forward(&f)?,
            z: self.project(&f)?,
        })
    }

    /// Raw logits `phi(f(x))`.
    pub fn classify(&self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let f = self.features(x, mode)?;
        Ok(self.classifier.forward(&f)?)
    }

    /// `normalize(g(f(x)))`, one unit-norm row per image.
    pub fn embed(&self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let f = self.features(x, mode)?;
        self.project(&f)
    }

    /// Evaluation-mode logits for a list of samples, batched in chunks.
    pub fn logits_for(&self, samples: &[Sample], chunk: usize) -> Result<Vec<Vec<f32>>> {
        let mut out = Vec::with_capacity(samples.len());
        for part in samples.chunks(chunk.max(1)) {
            let x = self.sample_tensor(part)?;
            out.extend(self.classify(&x, Mode::Eval)?.to_vec2::<f32>()?);
        }
        Ok(out)
    }

    /// Prediction entropy of each sample under evaluation mode.
    pub fn entropies(&self, samples: &[Sample]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(samples.len());
        for part in samples.chunks(256) {
            let x = self.sample_tensor(part)?;
            out.extend(entropy(&self.classify(&x, Mode::Eval)?)?);
        }
        Ok(out)
    }

    /// Evaluation-mode embeddings, one row per sample.
    pub fn embeddings_for(&self, samples: &[Sample]) -> Result<Vec<Vec<f32>>> {
        let mut out = Vec::with_capacity(samples.len());
        for part in samples.chunks(256) {
            let x = self.sample_tensor(part)?;
            out.extend(self.embed(&x, Mode::Eval)?.to_vec2::<f32>()?);
        }
        Ok(out)
    }
}

pub(crate) fn l2_normalize_rows(z: &Tensor) -> candle_core::Result<Tensor> {
    let norm = z.sqr()?.sum_keepdim(1)?.sqrt()?.clamp(1e-12, f64::MAX)?;
    z.broadcast_div(&norm)
}

/// Shannon entropy (natural log) of `softmax(logits)` for every row of an
/// `N x C` logit matrix.
///
/// Rows are evaluated as `lse(x) - sum_c p_c x_c` with a max-shifted
/// log-sum-exp, so very large logits do not overflow. Results are clamped to
/// `[0, ln C]` to absorb rounding.
pub fn entropy(logits: &Tensor) -> Result<Vec<f64>> {
    let rows = match logits.dims() {
        [_, c] if *c >= 2 => logits.to_dtype(DType::F64)?.to_vec2::<f64>()?,
        other => {
            return Err(Error::Shape(format!(
                "entropy expects N x C logits with C >= 2, got {other:?}"
            )))
        }
    };
    rows.iter().map(|row| entropy_row(row)).collect()
}

pub(crate) fn entropy_row(row: &[f64]) -> Result<f64> {
    if row.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            component: "entropy logits".into(),
        });
    }
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
    let lse = max + sum.ln();
    let expected: f64 = row.iter().map(|v| (v - lse).exp() * v).sum();
    Ok((lse - expected).clamp(0.0, (row.len() as f64).ln()))
}
