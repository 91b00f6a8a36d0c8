//! The one-pass online training loop.
//!
//! Each stream batch is joined with a replay batch drawn from memory, the
//! learner takes exactly one optimizer step, and then the buffer is updated
//! from evaluation-mode entropies computed with the freshly updated weights.
//!
//! Under [`Method::Esrm`] the step minimizes
//! `CE(X) + CE(aug X) + lambda1 * SDC + lambda2 * RM`. The high/low entropy
//! split used by the similarity term is taken from the (detached) logits of
//! the same training forward pass; the buffer update later uses the
//! post-step entropies.

use std::path::{Path, PathBuf};

use candle_core::backprop::GradStore;
use candle_core::{Tensor, Var};
use candle_nn::Optimizer as _;
use serde::{Deserialize, Serialize};

use crate::buffer::{write_snapshot, MemoryBuffer, MemoryStrategy, SlotRecord};
use crate::data::{augment, stream, AugmentationPolicy, Image, Sample, Task, TaskSequence};
use crate::error::{Error, Result};
use crate::metrics::{self, AccuracyMatrix, EntropyHistogram};
use crate::model::{self, BackboneKind, Learner, ModelConfig, Mode};
use crate::objectives::{self, ContrastGroup, LossWeights};
use crate::seed::{derive_seed, rng_for, Purpose, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Esrm,
    Er,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adamw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub weight_decay: f64,
    /// SGD only.
    pub momentum: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adamw,
            lr: 1e-3,
            weight_decay: 1e-4,
            momentum: 0.0,
        }
    }
}

impl OptimizerConfig {
    fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.weight_decay < 0.0 || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument(
                "weight decay must be >= 0 and momentum in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub stream_batch: usize,
    pub mem_batch: usize,
    pub buffer_capacity: usize,
    pub optimizer: OptimizerConfig,
    pub method: Method,
    pub mem_strategy: MemoryStrategy,
    pub augmentation: AugmentationPolicy,
    pub backbone: BackboneKind,
    /// Set per run from the experiment's seed list.
    #[serde(skip)]
    pub seed: u64,
    pub loss_weights: LossWeights,
    /// Iterations between buffer-composition records.
    pub log_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            stream_batch: 10,
            mem_batch: 64,
            buffer_capacity: 500,
            optimizer: OptimizerConfig::default(),
            method: Method::Esrm,
            mem_strategy: MemoryStrategy::EntropySelection,
            augmentation: AugmentationPolicy::default(),
            backbone: BackboneKind::default(),
            seed: 0,
            loss_weights: LossWeights::default(),
            log_every: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stream_batch < 2 {
            return Err(Error::InvalidArgument(format!(
                "stream batch must be at least 2, got {}",
                self.stream_batch
            )));
        }
        if self.buffer_capacity == 0 {
            return Err(Error::InvalidArgument("buffer capacity must be positive".into()));
        }
        if self.log_every == 0 {
            return Err(Error::InvalidArgument("log_every must be positive".into()));
        }
        self.optimizer.validate()?;
        self.loss_weights.validate()
    }
}

/// Loss components of one step. Terms that were not computed are 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based, across tasks.
    pub iteration: u64,
    pub task: usize,
    pub ce: f64,
    pub sdc: f64,
    pub rm: f64,
    pub total: f64,
    pub stream_ids: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionPoint {
    pub iteration: u64,
    pub task: usize,
    pub len: usize,
    pub synthetic_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEvaluation {
    pub after_task: usize,
    pub accuracies: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub steps: Vec<StepRecord>,
    pub composition: Vec<CompositionPoint>,
    pub evaluations: Vec<TaskEvaluation>,
}

impl TrainLog {
    pub fn losses(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.total).collect()
    }
}

struct MomentumSgd {
    vars: Vec<Var>,
    velocity: Vec<Option<Tensor>>,
    lr: f64,
    momentum: f64,
    weight_decay: f64,
}

impl MomentumSgd {
    fn step(&mut self, grads: &GradStore) -> Result<()> {
        for (var, velocity) in self.vars.iter().zip(self.velocity.iter_mut()) {
            let Some(grad) = grads.get(var.as_tensor()) else {
                continue;
            };
            let mut g = grad.detach();
            if self.weight_decay != 0.0 {
                g = (g + (var.as_tensor().detach() * self.weight_decay)?)?;
            }
            if self.momentum != 0.0 {
                let v = match velocity.take() {
                    Some(v) => ((v * self.momentum)? + &g)?,
                    None => g,
                };
                *velocity = Some(v.clone());
                g = v;
            }
            var.set(&(var.as_tensor().detach() - (g * self.lr)?)?)?;
        }
        Ok(())
    }
}

enum Optimizer {
    Sgd(MomentumSgd),
    Adamw(candle_nn::AdamW),
}

impl Optimizer {
    fn new(vars: Vec<Var>, cfg: &OptimizerConfig) -> Result<Self> {
        Ok(match cfg.kind {
            OptimizerKind::Sgd => Optimizer::Sgd(MomentumSgd {
                velocity: vec![None; vars.len()],
                vars,
                lr: cfg.lr,
                momentum: cfg.momentum,
                weight_decay: cfg.weight_decay,
            }),
            OptimizerKind::Adamw => Optimizer::Adamw(candle_nn::AdamW::new(
                vars,
                candle_nn::ParamsAdamW {
                    lr: cfg.lr,
                    weight_decay: cfg.weight_decay,
                    ..Default::default()
                },
            )?),
        })
    }

    fn backward_step(&mut self, loss: &Tensor) -> Result<()> {
        let grads = loss.backward()?;
        match self {
            Optimizer::Sgd(sgd) => sgd.step(&grads),
            Optimizer::Adamw(adamw) => Ok(adamw.step(&grads)?),
        }
    }
}

/// Learner, memory and optimizer state for one run.
pub struct Trainer {
    cfg: TrainConfig,
    model: Learner,
    buffer: MemoryBuffer,
    optimizer: Optimizer,
    rng: Rng,
    iteration: u64,
    log: TrainLog,
}

impl Trainer {
    pub fn new(cfg: TrainConfig, model: Learner) -> Result<Self> {
        cfg.validate()?;
        let buffer = MemoryBuffer::new(cfg.buffer_capacity, cfg.mem_strategy)?;
        let optimizer = Optimizer::new(model.trainable_vars(), &cfg.optimizer)?;
        let rng = rng_for(cfg.seed, Purpose::Training);
        Ok(Self {
            cfg,
            model,
            buffer,
            optimizer,
            rng,
            iteration: 0,
            log: TrainLog::default(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn model(&self) -> &Learner {
        &self.model
    }

    pub fn buffer(&self) -> &MemoryBuffer {
        &self.buffer
    }

    pub fn log(&self) -> &TrainLog {
        &self.log
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn into_parts(self) -> (Learner, MemoryBuffer, TrainLog) {
        (self.model, self.buffer, self.log)
    }

    /// One optimizer step on `batch` plus a replay batch, then the buffer update.
    pub fn train_step(&mut self, task: usize, batch: &[Sample]) -> Result<StepRecord> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty stream batch".into()));
        }
        let memory = self.buffer.sample_memory(self.cfg.mem_batch, &mut self.rng);
        let combined: Vec<Sample> = batch.iter().chain(&memory).cloned().collect();
        let labels: Vec<usize> = combined.iter().map(Sample::target).collect();
        let raw: Vec<&Image> = combined.iter().map(|s| s.image.as_ref()).collect();
        let augmented = augment(&raw, &self.cfg.augmentation, &mut self.rng);
        let augmented: Vec<&Image> = augmented.iter().collect();
        let x_aug = self.model.input_tensor(&augmented)?;

        let (loss, mut record) = match self.cfg.method {
            Method::Er => {
                let logits = self.model.classify(&x_aug, Mode::Train)?;
                let ce = objectives::cross_entropy(&logits, &labels)?;
                let value = objectives::scalar(&ce, "cross-entropy")?;
                (ce, self.record(task, value, 0.0, 0.0)?)
            }
            Method::Esrm => {
                let x = self.model.input_tensor(&raw)?;
                self.esrm_loss(task, &x, &x_aug, &labels, batch.len())?
            }
        };
        self.optimizer.backward_step(&loss)?;
        self.iteration += 1;
        record.iteration = self.iteration;
        record.stream_ids = batch.iter().map(|s| s.id).collect();

        let entropies = self.model.entropies(batch)?;
        self.buffer.update(batch, &entropies, &mut self.rng)?;

        if self.iteration % self.cfg.log_every == 0 {
            let stats = self.buffer.composition_stats();
            self.log.composition.push(CompositionPoint {
                iteration: self.iteration,
                task,
                len: stats.len,
                synthetic_fraction: stats.synthetic_fraction,
            });
        }
        self.log.steps.push(record.clone());
        Ok(record)
    }

    fn record(&self, task: usize, ce: f64, sdc: f64, rm: f64) -> Result<StepRecord> {
        let total = objectives::total_loss(ce, sdc, rm, &self.cfg.loss_weights)?;
        Ok(StepRecord {
            iteration: 0,
            task,
            ce,
            sdc,
            rm,
            total,
            stream_ids: Vec::new(),
        })
    }

    fn esrm_loss(
        &self,
        task: usize,
        x: &Tensor,
        x_aug: &Tensor,
        labels: &[usize],
        n_new: usize,
    ) -> Result<(Tensor, StepRecord)> {
        let w = &self.cfg.loss_weights;
        let out = self.model.forward(x, Mode::Train)?;
        let logits_aug = self.model.classify(x_aug, Mode::Train)?;

        let ce = objectives::ce_pair(&out.logits, &logits_aug, labels)?;
        let ce_value = objectives::scalar(&ce, "cross-entropy")?;
        let mut loss = ce;

        let mut sdc_value = 0.0;
        if w.lambda1 != 0.0 {
            let sdc = objectives::sdc_loss(&out.logits, &logits_aug, w.t)?;
            sdc_value = objectives::scalar(&sdc, "self-distillation")?;
            loss = (loss + (sdc * w.lambda1)?)?;
        }

        let mut rm_value = 0.0;
        if w.lambda2 != 0.0 && n_new >= 2 {
            let stream_entropy = model::entropy(&out.logits.narrow(0, 0, n_new)?.detach())?;
            let (plus, minus) = objectives::split_by_entropy(&stream_entropy)?;
            let new = ContrastGroup::new(out.z.narrow(0, 0, n_new)?, labels[..n_new].to_vec())?;
            let n_mem = labels.len() - n_new;
            let mem = if n_mem > 0 {
                Some(ContrastGroup::new(
                    out.z.narrow(0, n_new, n_mem)?,
                    labels[n_new..].to_vec(),
                )?)
            } else {
                None
            };
            let rm = objectives::rm_loss_reduced(
                &new.select(&plus)?,
                &new.select(&minus)?,
                &new,
                mem.as_ref(),
                w.tau,
                w.anchor_reduction,
            )?;
            rm_value = objectives::scalar(&rm, "similarity")?;
            loss = (loss + (rm * w.lambda2)?)?;
        }
        let record = self.record(task, ce_value, sdc_value, rm_value)?;
        Ok((loss, record))
    }

    /// Streams `task` once in `stream_batch`-sized batches, then refreshes
    /// stored entropies when the buffer selects by entropy. Returns the number
    /// of steps taken.
    pub fn train_task(&mut self, task: &Task) -> Result<usize> {
        let batches = stream(
            task,
            self.cfg.stream_batch,
            derive_seed(self.cfg.seed, Purpose::Stream, task.index as u64),
        )?;
        for batch in &batches {
            self.train_step(task.index, batch)?;
        }
        if self.buffer.strategy() == MemoryStrategy::EntropySelection {
            self.buffer.refresh_entropy(&self.model)?;
        }
        Ok(batches.len())
    }

    /// Evaluation-mode accuracy on each test task, recorded as a log entry.
    pub fn evaluate(&mut self, after_task: usize, test_tasks: &[Task]) -> Result<Vec<f64>> {
        let accuracies = test_tasks
            .iter()
            .map(|t| metrics::accuracy(&self.model, &t.samples))
            .collect::<Result<Vec<_>>>()?;
        self.log.evaluations.push(TaskEvaluation {
            after_task,
            accuracies: accuracies.clone(),
        });
        Ok(accuracies)
    }
}

/// Real-vs-synthetic entropy diagnostics over the training samples under
/// the final weights. ROC data is absent when only one provenance is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyDiagnostics {
    pub histogram: EntropyHistogram,
    pub auc: Option<f64>,
    pub roc: Option<Vec<(f64, f64)>>,
}

impl EntropyDiagnostics {
    pub fn compute(model: &Learner, samples: &[Sample]) -> Result<Self> {
        let entropies = model.entropies(samples)?;
        let flags: Vec<bool> = samples.iter().map(|s| s.provenance().is_real()).collect();
        let histogram = EntropyHistogram::from_scores(&entropies, &flags, model.num_classes())?;
        let mixed = flags.iter().any(|f| *f) && flags.iter().any(|f| !*f);
        let (auc, roc) = if mixed {
            (
                Some(metrics::synthetic_roc_auc(&entropies, &flags)?),
                Some(metrics::roc_curve(&entropies, &flags)?),
            )
        } else {
            (None, None)
        };
        Ok(Self { histogram, auc, roc })
    }
}

pub struct ExperimentOutcome {
    pub accuracy: AccuracyMatrix,
    pub log: TrainLog,
    pub buffer: Vec<SlotRecord>,
    pub diagnostics: EntropyDiagnostics,
    pub model: Learner,
    pub memory: MemoryBuffer,
}

/// Where to write a model and buffer snapshot after every task.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub checkpoint_dir: Option<PathBuf>,
}

/// Trains on the tasks in order, evaluating every test task after each one.
pub fn run_experiment(
    cfg: &TrainConfig,
    sequence: &TaskSequence,
    test_tasks: &[Task],
) -> Result<ExperimentOutcome> {
    run_experiment_with(cfg, sequence, test_tasks, &RunOptions::default())
}

pub fn run_experiment_with(
    cfg: &TrainConfig,
    sequence: &TaskSequence,
    test_tasks: &[Task],
    options: &RunOptions,
) -> Result<ExperimentOutcome> {
    if sequence.is_empty() {
        return Err(Error::InvalidArgument("empty task sequence".into()));
    }
    if test_tasks.len() != sequence.len() {
        return Err(Error::InvalidArgument(format!(
            "{} test sets for {} tasks",
            test_tasks.len(),
            sequence.len()
        )));
    }
    let dims = sequence
        .tasks
        .iter()
        .flat_map(|t| t.samples.first())
        .next()
        .map(|s| s.image.dims())
        .ok_or_else(|| Error::InvalidArgument("task sequence has no samples".into()))?;
    let model_cfg = ModelConfig::new(cfg.backbone, dims, sequence.output_classes);
    let model = Learner::new(model_cfg, derive_seed(cfg.seed, Purpose::ModelInit, 0))?;
    let mut trainer = Trainer::new(cfg.clone(), model)?;
    let mut accuracy = AccuracyMatrix::new(sequence.len());
    for (k, task) in sequence.tasks.iter().enumerate() {
        let steps = trainer.train_task(task)?;
        let row = trainer.evaluate(k, test_tasks)?;
        for (j, a) in row.iter().enumerate() {
            accuracy.set(k, j, *a)?;
        }
        log::info!(
            "task {}/{}: {steps} steps, accuracy {:?}",
            k + 1,
            sequence.len(),
            row
        );
        if let Some(dir) = &options.checkpoint_dir {
            checkpoint(&trainer, dir, k)?;
        }
    }
    let all_train: Vec<Sample> = sequence.tasks.iter().flat_map(|t| t.samples.iter().cloned()).collect();
    let diagnostics = EntropyDiagnostics::compute(trainer.model(), &all_train)?;
    let buffer = trainer.buffer().snapshot();
    let (model, memory, log) = trainer.into_parts();
    Ok(ExperimentOutcome {
        accuracy,
        log,
        buffer,
        diagnostics,
        model,
        memory,
    })
}

fn checkpoint(trainer: &Trainer, dir: &Path, task: usize) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    trainer.model().save(&dir.join(format!("model_task{task}.safetensors")))?;
    write_snapshot(&trainer.buffer().snapshot(), &dir.join(format!("buffer_task{task}.jsonl")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{split_cil, LabeledDataset, Provenance};

    fn tiny_dataset(classes: usize, per_class: usize, seed: u64) -> LabeledDataset {
        use rand::Rng as _;
        let mut rng = rng_for(seed, Purpose::Surrogate);
        let mut samples = Vec::new();
        for c in 0..classes {
            for i in 0..per_class {
                let mut img = Image::zeros(8, 8, 3);
                for v in img.data_mut() {
                    *v = rng.random::<f32>() * 0.3 + 0.2 * c as f32 / classes as f32;
                }
                let prov = if i % 2 == 0 { Provenance::Real } else { Provenance::synthetic("t") };
                samples.push(Sample::new((c * per_class + i) as u64, img, c, prov));
            }
        }
        LabeledDataset::new("tiny", samples, classes, None).unwrap()
    }

    fn tiny_config(method: Method, strategy: MemoryStrategy) -> TrainConfig {
        TrainConfig {
            buffer_capacity: 8,
            mem_batch: 4,
            method,
            mem_strategy: strategy,
            backbone: BackboneKind::Reduced { width: 4 },
            seed: 3,
            ..TrainConfig::default()
        }
    }

    fn learner(cfg: &TrainConfig, classes: usize) -> Learner {
        Learner::new(ModelConfig::new(cfg.backbone, (8, 8, 3), classes), 1).unwrap()
    }

    #[test]
    fn rejects_small_stream_batch_and_zero_capacity() {
        let mut cfg = TrainConfig { stream_batch: 1, ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
        cfg.stream_batch = 10;
        cfg.buffer_capacity = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn cold_start_er_step_fills_buffer() {
        let cfg = tiny_config(Method::Er, MemoryStrategy::Reservoir);
        let ds = tiny_dataset(2, 5, 0);
        let mut trainer = Trainer::new(cfg.clone(), learner(&cfg, 2)).unwrap();
        let rec = trainer.train_step(0, &ds.samples()[..4]).unwrap();
        assert_eq!(rec.iteration, 1);
        assert_eq!(rec.sdc, 0.0);
        assert_eq!(rec.rm, 0.0);
        assert_eq!(rec.total, rec.ce);
        assert_eq!(trainer.buffer().len(), 4);
    }

    #[test]
    fn task_of_25_takes_3_steps_and_refreshes() {
        let cfg = tiny_config(Method::Esrm, MemoryStrategy::EntropySelection);
        let ds = tiny_dataset(5, 5, 1);
        let seq = split_cil(&ds, 1, 0).unwrap();
        let mut trainer = Trainer::new(cfg.clone(), learner(&cfg, 5)).unwrap();
        assert_eq!(trainer.train_task(&seq.tasks[0]).unwrap(), 3);
        let mut seen: Vec<u64> = trainer.log().steps.iter().flat_map(|s| s.stream_ids.clone()).collect();
        assert_eq!(seen.len(), 25);
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 25);
        let stored: Vec<Sample> = trainer.buffer().slots().iter().map(|s| s.sample.clone()).collect();
        let fresh = trainer.model().entropies(&stored).unwrap();
        for (slot, e) in trainer.buffer().slots().iter().zip(fresh) {
            assert_eq!(slot.entropy, e);
        }
    }

    #[test]
    fn composition_logged_every_log_every_steps() {
        let cfg = TrainConfig { stream_batch: 2, log_every: 2, ..tiny_config(Method::Er, MemoryStrategy::Reservoir) };
        let ds = tiny_dataset(2, 5, 2);
        let seq = split_cil(&ds, 1, 0).unwrap();
        let mut trainer = Trainer::new(cfg.clone(), learner(&cfg, 2)).unwrap();
        trainer.train_task(&seq.tasks[0]).unwrap();
        let its: Vec<u64> = trainer.log().composition.iter().map(|c| c.iteration).collect();
        assert_eq!(its, vec![2, 4]);
    }

    #[test]
    fn esrm_step_reports_all_components() {
        let cfg = tiny_config(Method::Esrm, MemoryStrategy::EntropySelection);
        let ds = tiny_dataset(2, 6, 3);
        let mut trainer = Trainer::new(cfg.clone(), learner(&cfg, 2)).unwrap();
        trainer.train_step(0, &ds.samples()[..6]).unwrap();
        let rec = trainer.train_step(0, &ds.samples()[6..]).unwrap();
        assert!(rec.ce > 0.0 && rec.sdc >= 0.0 && rec.rm > 0.0);
        let w = LossWeights::default();
        assert!((rec.total - (rec.ce + w.lambda1 * rec.sdc + w.lambda2 * rec.rm)).abs() < 1e-12);
    }

    #[test]
    fn zero_weights_reduce_to_ce_pair() {
        let mut cfg = tiny_config(Method::Esrm, MemoryStrategy::EntropySelection);
        cfg.loss_weights.lambda1 = 0.0;
        cfg.loss_weights.lambda2 = 0.0;
        let ds = tiny_dataset(2, 4, 4);
        let mut trainer = Trainer::new(cfg.clone(), learner(&cfg, 2)).unwrap();
        let rec = trainer.train_step(0, ds.samples()).unwrap();
        assert_eq!(rec.total, rec.ce);
    }

    #[test]
    fn sgd_with_momentum_moves_weights() {
        let mut cfg = tiny_config(Method::Er, MemoryStrategy::Reservoir);
        cfg.optimizer = OptimizerConfig {
            kind: OptimizerKind::Sgd,
            lr: 0.1,
            weight_decay: 1e-4,
            momentum: 0.9,
        };
        let ds = tiny_dataset(2, 4, 5);
        let mut trainer = Trainer::new(cfg.clone(), learner(&cfg, 2)).unwrap();
        let before = trainer.model().trainable_vars()[0].as_tensor().flatten_all().unwrap().to_vec1::<f32>().unwrap();
        trainer.train_step(0, ds.samples()).unwrap();
        trainer.train_step(0, ds.samples()).unwrap();
        let after = trainer.model().trainable_vars()[0].as_tensor().flatten_all().unwrap().to_vec1::<f32>().unwrap();
        assert_ne!(before, after);
    }

    #[test]
    fn single_task_run_gives_1x1_matrix_and_repeats() {
        let cfg = tiny_config(Method::Esrm, MemoryStrategy::EntropySelection);
        let train = tiny_dataset(2, 6, 6);
        let test = tiny_dataset(2, 3, 7);
        let seq = split_cil(&train, 1, 0).unwrap();
        let tests = seq.route(&test).unwrap();
        let a = run_experiment(&cfg, &seq, &tests).unwrap();
        let b = run_experiment(&cfg, &seq, &tests).unwrap();
        assert_eq!(a.accuracy.tasks(), 1);
        assert_eq!(a.accuracy, b.accuracy);
        assert_eq!(a.log, b.log);
        assert!(a.diagnostics.auc.is_some());
    }
}
