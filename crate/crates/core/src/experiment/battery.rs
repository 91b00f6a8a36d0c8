use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use candle_core::{Device, Tensor};
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::buffer::{read_snapshot, write_snapshot, BufferSlot, MemoryBuffer, MemoryStrategy};
use crate::data::surrogate::{self, SURROGATE_TAG};
use crate::data::{
    contaminate, load_dataset, split_cil, split_dil, ContaminationSpec, Image, LabeledDataset,
    Provenance, Sample, SplitMode, TaskSequence,
};
use crate::error::{Error, Result};
use crate::metrics::{final_average_accuracy, learning_accuracy, relative_forgetting, AccuracyMatrix};
use crate::seed::{derive_seed, Purpose};
use crate::trainer::{run_experiment_with, CompositionPoint, EntropyDiagnostics, ExperimentOutcome, RunOptions};

pub const RUNS_FILE: &str = "runs.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

/// Real training and test sets plus the twins available for substitution.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub twins: BTreeMap<String, LabeledDataset>,
    pub shares: BTreeMap<String, f64>,
}

pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let d = &cfg.data;
    if let Some(sc) = &d.surrogate {
        let data = surrogate::generate(sc)?;
        return Ok(PreparedData {
            train: data.train,
            test: data.test,
            twins: BTreeMap::from([(SURROGATE_TAG.to_string(), data.twin)]),
            shares: BTreeMap::from([(SURROGATE_TAG.to_string(), 1.0)]),
        });
    }
    let (Some(train_root), Some(test_root), Some(classes)) = (&d.train_root, &d.test_root, d.classes) else {
        return Err(Error::config("data", "incomplete folder dataset"));
    };
    let train = load_dataset(train_root, classes, Provenance::Real)?;
    let test = load_dataset(test_root, classes, Provenance::Real)?;
    let mut twins = BTreeMap::new();
    let mut shares = BTreeMap::new();
    let total: f64 = d.twins.iter().map(|t| t.share).sum();
    for t in &d.twins {
        twins.insert(t.tag.clone(), load_dataset(&t.root, classes, Provenance::synthetic(&t.tag))?);
        shares.insert(t.tag.clone(), t.share / total);
    }
    Ok(PreparedData { train, test, twins, shares })
}

/// The contaminated training set and task split for one seed.
pub fn build_sequence(cfg: &ExperimentConfig, data: &PreparedData, seed: u64) -> Result<TaskSequence> {
    let train = if cfg.ratio > 0.0 {
        let spec = ContaminationSpec {
            ratio: cfg.ratio,
            source_shares: data.shares.clone(),
            seed: derive_seed(seed, Purpose::Contamination, 0),
        };
        contaminate(&data.train, &data.twins, &spec)?
    } else {
        data.train.clone()
    };
    let split_seed = derive_seed(seed, Purpose::TaskSplit, 0);
    match cfg.split.mode {
        SplitMode::Cil => split_cil(&train, cfg.split.tasks, split_seed),
        SplitMode::Dil => split_dil(
            &train,
            cfg.split.coarse_map.as_deref().unwrap_or_default(),
            cfg.split.tasks,
            split_seed,
        ),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub faa: f64,
    pub la: f64,
    /// Absent for single-task sequences.
    pub rf: Option<f64>,
    pub accuracy: AccuracyMatrix,
    pub composition: Vec<CompositionPoint>,
    pub final_real_fraction: f64,
    pub diagnostics: EntropyDiagnostics,
}

impl RunMetrics {
    pub fn from_outcome(outcome: &ExperimentOutcome) -> Result<Self> {
        let a = &outcome.accuracy;
        let stats = outcome.memory.composition_stats();
        Ok(Self {
            faa: final_average_accuracy(a)?,
            la: learning_accuracy(a)?,
            rf: if a.tasks() > 1 { Some(relative_forgetting(a)?) } else { None },
            accuracy: a.clone(),
            composition: outcome.log.composition.clone(),
            final_real_fraction: if stats.len == 0 { 0.0 } else { 1.0 - stats.synthetic_fraction },
            diagnostics: outcome.diagnostics.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<RunMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self { mean, std: var.sqrt(), n: values.len() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub faa: Option<MeanStd>,
    pub la: Option<MeanStd>,
    pub rf: Option<MeanStd>,
    pub auc: Option<MeanStd>,
    pub final_real_fraction: Option<MeanStd>,
    /// Seed-averaged synthetic fraction per logged iteration.
    pub composition: Vec<(u64, f64)>,
    pub failed_seeds: Vec<u64>,
}

impl Aggregate {
    /// Aggregates the successful runs; failed ones are only listed.
    pub fn from_runs(runs: &[SeedRun]) -> Self {
        let ok: Vec<&RunMetrics> = runs.iter().filter_map(|r| r.metrics.as_ref()).collect();
        let pick = |f: &dyn Fn(&RunMetrics) -> Option<f64>| MeanStd::of(&ok.iter().filter_map(|m| f(m)).collect::<Vec<_>>());
        let mut by_iteration: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for m in &ok {
            for p in &m.composition {
                by_iteration.entry(p.iteration).or_default().push(p.synthetic_fraction);
            }
        }
        Self {
            faa: pick(&|m| Some(m.faa)),
            la: pick(&|m| Some(m.la)),
            rf: pick(&|m| m.rf),
            auc: pick(&|m| m.diagnostics.auc),
            final_real_fraction: pick(&|m| Some(m.final_real_fraction)),
            composition: by_iteration
                .into_iter()
                .map(|(it, v)| (it, v.iter().sum::<f64>() / v.len() as f64))
                .collect(),
            failed_seeds: runs.iter().filter(|r| r.metrics.is_none()).map(|r| r.seed).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsRecord {
    pub fingerprint: String,
    pub config: ExperimentConfig,
    pub runs: Vec<SeedRun>,
    pub aggregate: Aggregate,
}

impl ResultsRecord {
    pub fn has_failures(&self) -> bool {
        !self.aggregate.failed_seeds.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
struct Summary {
    fingerprint: String,
    config: ExperimentConfig,
    aggregate: Aggregate,
}

/// One training run for `seed`; with `out_dir`, also writes per-task
/// checkpoints, the final model, buffer and training log under `seed_<seed>/`.
pub fn run_seed(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    seed: u64,
    out_dir: Option<&Path>,
) -> Result<(RunMetrics, ExperimentOutcome)> {
    let sequence = build_sequence(cfg, data, seed)?;
    let tests = sequence.route(&data.test)?;
    let mut train = cfg.train.clone();
    train.seed = seed;
    let run_dir = out_dir.map(|d| d.join(format!("seed_{seed}")));
    let options = RunOptions {
        checkpoint_dir: run_dir.as_ref().map(|d| d.join("checkpoints")),
    };
    let outcome = run_experiment_with(&train, &sequence, &tests, &options)?;
    let metrics = RunMetrics::from_outcome(&outcome)?;
    if let Some(dir) = &run_dir {
        write_run_dir(dir, &outcome)?;
    }
    Ok((metrics, outcome))
}

fn write_run_dir(dir: &Path, outcome: &ExperimentOutcome) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    outcome.model.save(&dir.join("model.safetensors"))?;
    save_buffer(&outcome.memory, dir)?;
    let mut log = Vec::new();
    for step in &outcome.log.steps {
        serde_json::to_writer(&mut log, step)?;
        log.push(b'\n');
    }
    write_atomic(&dir.join("train_log.jsonl"), &log)?;
    write_atomic(&dir.join("accuracy.json"), &serde_json::to_vec_pretty(&outcome.accuracy)?)
}

/// Runs every seed in order. A failing seed is recorded and the battery
/// moves on; results are written atomically when the config names an
/// output directory.
pub fn run_battery(cfg: &ExperimentConfig) -> Result<ResultsRecord> {
    cfg.validate()?;
    let data = prepare_data(cfg)?;
    let out = cfg.out_dir.as_deref();
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut runs = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        log::info!("seed {seed}: starting");
        let run = match run_seed(cfg, &data, seed, out) {
            Ok((metrics, _)) => {
                log::info!("seed {seed}: final average accuracy {:.4}", metrics.faa);
                SeedRun { seed, metrics: Some(metrics), error: None }
            }
            Err(e) => {
                log::error!("seed {seed} failed: {e}");
                SeedRun { seed, metrics: None, error: Some(e.to_string()) }
            }
        };
        runs.push(run);
    }
    let record = ResultsRecord {
        fingerprint: cfg.fingerprint()?,
        config: cfg.clone(),
        aggregate: Aggregate::from_runs(&runs),
        runs,
    };
    if let Some(dir) = out {
        save_results(&record, dir)?;
    }
    Ok(record)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn save_results(record: &ResultsRecord, dir: &Path) -> Result<()> {
    let mut lines = Vec::new();
    for run in &record.runs {
        serde_json::to_writer(&mut lines, run)?;
        lines.push(b'\n');
    }
    write_atomic(&dir.join(RUNS_FILE), &lines)?;
    let summary = Summary {
        fingerprint: record.fingerprint.clone(),
        config: record.config.clone(),
        aggregate: record.aggregate.clone(),
    };
    write_atomic(&dir.join(SUMMARY_FILE), &serde_json::to_vec_pretty(&summary)?)
}

pub fn load_results(dir: &Path) -> Result<ResultsRecord> {
    let summary_path = dir.join(SUMMARY_FILE);
    let text = fs::read_to_string(&summary_path).map_err(|e| Error::io(&summary_path, e))?;
    let summary: Summary = serde_json::from_str(&text)?;
    let runs_path = dir.join(RUNS_FILE);
    let file = fs::File::open(&runs_path).map_err(|e| Error::io(&runs_path, e))?;
    let mut runs = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(&runs_path, e))?;
        if !line.trim().is_empty() {
            runs.push(serde_json::from_str(&line)?);
        }
    }
    Ok(ResultsRecord {
        fingerprint: summary.fingerprint,
        config: summary.config,
        runs,
        aggregate: summary.aggregate,
    })
}

const BUFFER_SNAPSHOT: &str = "buffer.jsonl";
const BUFFER_IMAGES: &str = "buffer_images.safetensors";

/// Writes the slot records and the stored images, so the buffer can be
/// rebuilt without the dataset it came from.
pub fn save_buffer(buffer: &MemoryBuffer, dir: &Path) -> Result<()> {
    write_snapshot(&buffer.snapshot(), &dir.join(BUFFER_SNAPSHOT))?;
    let mut tensors = HashMap::new();
    for (i, slot) in buffer.slots().iter().enumerate() {
        let img = &slot.sample.image;
        let (h, w, c) = img.dims();
        tensors.insert(format!("slot{i}"), Tensor::from_slice(img.data(), (h, w, c), &Device::Cpu)?);
    }
    let metadata = HashMap::from([
        ("capacity".to_string(), buffer.capacity().to_string()),
        ("strategy".to_string(), serde_json::to_string(&buffer.strategy())?),
        ("n_seen_so_far".to_string(), buffer.n_seen_so_far().to_string()),
    ]);
    let path = dir.join(BUFFER_IMAGES);
    safetensors::tensor::serialize_to_file(&tensors, Some(metadata), &path)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
}

pub fn load_buffer(dir: &Path) -> Result<MemoryBuffer> {
    let records = read_snapshot(&dir.join(BUFFER_SNAPSHOT))?;
    let path = dir.join(BUFFER_IMAGES);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let (_, header) = safetensors::SafeTensors::read_metadata(&bytes)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    let meta = header.metadata().clone().unwrap_or_default();
    let field = |k: &str| {
        meta.get(k)
            .cloned()
            .ok_or_else(|| Error::Checkpoint(format!("{}: missing `{k}`", path.display())))
    };
    let capacity: usize = field("capacity")?.parse().map_err(|_| Error::Checkpoint("bad capacity".into()))?;
    let n_seen: u64 = field("n_seen_so_far")?.parse().map_err(|_| Error::Checkpoint("bad n_seen_so_far".into()))?;
    let strategy: MemoryStrategy = serde_json::from_str(&field("strategy")?)?;
    let tensors = candle_core::safetensors::load_buffer(&bytes, &Device::Cpu)?;
    let mut slots = Vec::with_capacity(records.len());
    for r in records {
        let t = tensors
            .get(&format!("slot{}", r.slot))
            .ok_or_else(|| Error::Checkpoint(format!("no image for slot {}", r.slot)))?;
        let (h, w, c) = t.dims3()?;
        let image = Image::new(h, w, c, t.flatten_all()?.to_vec1::<f32>()?)?;
        let provenance = match (r.provenance.as_str(), r.source_tag) {
            ("real", _) => Provenance::Real,
            (_, Some(tag)) => Provenance::synthetic(tag),
            (other, None) => return Err(Error::Checkpoint(format!("slot {}: provenance `{other}` without tag", r.slot))),
        };
        slots.push(BufferSlot {
            sample: Sample::new(r.id, image, r.label, provenance),
            entropy: r.entropy,
        });
    }
    MemoryBuffer::restore(capacity, strategy, n_seen, slots)
}

/// Directory of a seed's artifacts inside a battery output directory.
pub fn seed_dir(out_dir: &Path, seed: u64) -> PathBuf {
    out_dir.join(format!("seed_{seed}"))
}
