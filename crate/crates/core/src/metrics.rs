//! Accuracy metrics over a task sequence and the real-vs-synthetic diagnostics.
//!
//! With `a[t][j]` the test accuracy on task `j` after training task `t`:
//!
//! * final average accuracy: mean of the last row;
//! * learning accuracy: mean of the diagonal;
//! * relative forgetting: for every task but the last, the drop from its
//!   best accuracy to its final accuracy relative to that best, averaged.
//!   A task whose best accuracy is 0 contributes 0.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::buffer::MemoryBuffer;
use crate::data::{LabeledDataset, Sample};
use crate::error::{Error, Result};
use crate::model::Learner;

/// Per-(training step, task) accuracies. Entries above the diagonal are
/// measured before the task was seen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyMatrix {
    values: Vec<Vec<Option<f64>>>,
}

impl AccuracyMatrix {
    pub fn new(tasks: usize) -> Self {
        Self {
            values: vec![vec![None; tasks]; tasks],
        }
    }

    /// Builds a complete matrix from rows.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let t = rows.len();
        if rows.iter().any(|r| r.len() != t) {
            return Err(Error::Shape("accuracy matrix must be square".into()));
        }
        let mut m = Self::new(t);
        for (i, row) in rows.into_iter().enumerate() {
            for (j, v) in row.into_iter().enumerate() {
                m.set(i, j, v)?;
            }
        }
        Ok(m)
    }

    pub fn tasks(&self) -> usize {
        self.values.len()
    }

    pub fn set(&mut self, after_task: usize, task: usize, accuracy: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&accuracy) {
            return Err(Error::InvalidArgument(format!("accuracy {accuracy} outside [0, 1]")));
        }
        self.values[after_task][task] = Some(accuracy);
        Ok(())
    }

    pub fn get(&self, after_task: usize, task: usize) -> Option<f64> {
        self.values.get(after_task)?.get(task).copied().flatten()
    }

    pub fn is_pre_exposure(&self, after_task: usize, task: usize) -> bool {
        task > after_task
    }

    pub fn rows(&self) -> &[Vec<Option<f64>>] {
        &self.values
    }

    fn require(&self, t: usize, j: usize, what: &str) -> Result<f64> {
        self.get(t, j).ok_or_else(|| {
            Error::InvalidArgument(format!("{what}: accuracy after task {t} on task {j} is missing"))
        })
    }
}

pub fn final_average_accuracy(a: &AccuracyMatrix) -> Result<f64> {
    let t = a.tasks();
    if t == 0 {
        return Err(Error::InvalidArgument("empty accuracy matrix".into()));
    }
    let mut total = 0.0;
    for j in 0..t {
        total += a.require(t - 1, j, "final average accuracy")?;
    }
    Ok(total / t as f64)
}

pub fn learning_accuracy(a: &AccuracyMatrix) -> Result<f64> {
    let t = a.tasks();
    if t == 0 {
        return Err(Error::InvalidArgument("empty accuracy matrix".into()));
    }
    let mut total = 0.0;
    for j in 0..t {
        total += a.require(j, j, "learning accuracy")?;
    }
    Ok(total / t as f64)
}

pub fn relative_forgetting(a: &AccuracyMatrix) -> Result<f64> {
    let t = a.tasks();
    if t < 2 {
        return Err(Error::InvalidArgument(
            "relative forgetting needs at least two tasks".into(),
        ));
    }
    let mut total = 0.0;
    for j in 0..t - 1 {
        let mut best = 0.0f64;
        for step in j..t {
            best = best.max(a.require(step, j, "relative forgetting")?);
        }
        let last = a.require(t - 1, j, "relative forgetting")?;
        if best > 0.0 {
            total += (best - last) / best;
        }
    }
    Ok(total / (t - 1) as f64)
}

/// Fraction of samples whose arg-max prediction equals their learner-facing label.
pub fn accuracy(model: &Learner, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("accuracy of an empty set".into()));
    }
    let logits = model.logits_for(samples, 256)?;
    let correct = logits
        .iter()
        .zip(samples)
        .filter(|(row, s)| argmax(row) == s.target())
        .count();
    Ok(correct as f64 / samples.len() as f64)
}

fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Bin count of the entropy histograms.
pub const HISTOGRAM_BINS: usize = 50;

/// Entropy histograms over `[0, ln C]` split by provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyHistogram {
    pub upper: f64,
    pub real: Vec<u64>,
    pub synthetic: Vec<u64>,
}

impl EntropyHistogram {
    pub fn from_scores(entropies: &[f64], is_real: &[bool], num_classes: usize) -> Result<Self> {
        if entropies.len() != is_real.len() {
            return Err(Error::InvalidArgument("scores and flags differ in length".into()));
        }
        let upper = (num_classes as f64).ln();
        let mut h = Self {
            upper,
            real: vec![0; HISTOGRAM_BINS],
            synthetic: vec![0; HISTOGRAM_BINS],
        };
        for (&e, &real) in entropies.iter().zip(is_real) {
            let bin = ((e / upper) * HISTOGRAM_BINS as f64).floor().clamp(0.0, (HISTOGRAM_BINS - 1) as f64) as usize;
            if real {
                h.real[bin] += 1;
            } else {
                h.synthetic[bin] += 1;
            }
        }
        Ok(h)
    }

    /// Lower edge of every bin.
    pub fn edges(&self) -> Vec<f64> {
        (0..HISTOGRAM_BINS)
            .map(|b| self.upper * b as f64 / HISTOGRAM_BINS as f64)
            .collect()
    }

    /// Element-wise sum, for pooling histograms of several runs.
    pub fn merge(&mut self, other: &EntropyHistogram) {
        for (a, b) in self.real.iter_mut().zip(&other.real) {
            *a += b;
        }
        for (a, b) in self.synthetic.iter_mut().zip(&other.synthetic) {
            *a += b;
        }
    }
}

/// Entropies of every sample of `dataset` under `model`, histogrammed by provenance.
pub fn entropy_histogram(model: &Learner, dataset: &LabeledDataset) -> Result<EntropyHistogram> {
    let entropies = model.entropies(dataset.samples())?;
    let flags: Vec<bool> = dataset.samples().iter().map(|s| s.provenance().is_real()).collect();
    EntropyHistogram::from_scores(&entropies, &flags, model.num_classes())
}

fn check_two_classes(entropies: &[f64], is_real: &[bool]) -> Result<(usize, usize)> {
    if entropies.len() != is_real.len() {
        return Err(Error::InvalidArgument("scores and flags differ in length".into()));
    }
    let pos = is_real.iter().filter(|r| **r).count();
    let neg = is_real.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidArgument(
            "ROC analysis needs both real and synthetic samples".into(),
        ));
    }
    Ok((pos, neg))
}

/// Area under the ROC curve of entropy as a score for "real" (positives).
/// Equals the probability that a random real sample has higher entropy than
/// a random synthetic one, ties counting one half.
pub fn synthetic_roc_auc(entropies: &[f64], is_real: &[bool]) -> Result<f64> {
    let (pos, neg) = check_two_classes(entropies, is_real)?;
    let mut order: Vec<usize> = (0..entropies.len()).collect();
    order.sort_by(|&a, &b| entropies[a].total_cmp(&entropies[b]));
    // Midranks (1-based) summed over positives.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && entropies[order[j + 1]] == entropies[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += midrank * order[i..=j].iter().filter(|&&k| is_real[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos * neg) as f64)
}

/// ROC points `(false positive rate, true positive rate)` sweeping the
/// threshold from high to low entropy, starting at `(0, 0)`.
pub fn roc_curve(entropies: &[f64], is_real: &[bool]) -> Result<Vec<(f64, f64)>> {
    let (pos, neg) = check_two_classes(entropies, is_real)?;
    let mut order: Vec<usize> = (0..entropies.len()).collect();
    order.sort_by(|&a, &b| entropies[b].total_cmp(&entropies[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let score = entropies[order[i]];
        while i < order.len() && entropies[order[i]] == score {
            if is_real[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(points)
}

/// Which labels an embedding export keeps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClassFilter {
    All,
    /// Labels `0..n`.
    FirstN(usize),
    Only(BTreeSet<usize>),
}

impl ClassFilter {
    pub fn admits(&self, label: usize) -> bool {
        match self {
            ClassFilter::All => true,
            ClassFilter::FirstN(n) => label < *n,
            ClassFilter::Only(set) => set.contains(&label),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: u64,
    pub label: usize,
    pub provenance: String,
    pub z: Vec<f32>,
}

/// Projections of the buffer samples admitted by `filter`, ordered by id.
pub fn export_embeddings(
    model: &Learner,
    buffer: &MemoryBuffer,
    filter: &ClassFilter,
) -> Result<Vec<EmbeddingRecord>> {
    let mut samples: Vec<Sample> = buffer
        .slots()
        .iter()
        .filter(|s| filter.admits(s.sample.target()))
        .map(|s| s.sample.clone())
        .collect();
    samples.sort_by_key(|s| s.id);
    if samples.is_empty() {
        return Ok(Vec::new());
    }
    let z = model.embeddings_for(&samples)?;
    Ok(samples
        .iter()
        .zip(z)
        .map(|(s, z)| EmbeddingRecord {
            id: s.id,
            label: s.target(),
            provenance: s.provenance().to_string(),
            z,
        })
        .collect())
}

/// Tab-separated export with a header line; `dim` sets the header width
/// when there are no records.
pub fn write_embeddings(records: &[EmbeddingRecord], dim: usize, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let dim = records.first().map_or(dim, |r| r.z.len());
    let mut header = String::from("id\tlabel\tprovenance");
    for k in 0..dim {
        header.push_str(&format!("\tz{k}"));
    }
    let io = |e| Error::io(path, e);
    writeln!(out, "{header}").map_err(io)?;
    for r in records {
        write!(out, "{}\t{}\t{}", r.id, r.label, r.provenance).map_err(io)?;
        for v in &r.z {
            write!(out, "\t{v}").map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    out.flush().map_err(io)
}
