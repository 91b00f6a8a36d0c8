use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::dataset::{LabeledDataset, Sample};
use crate::error::{Error, Result};
use crate::seed::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// Class-incremental: every task brings a disjoint set of classes.
    Cil,
    /// Domain-incremental: the label space is fixed, the fine classes behind
    /// each coarse label rotate from step to step.
    Dil,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub index: usize,
    /// Fine classes whose samples make up this task.
    pub classes: Vec<usize>,
    pub samples: Vec<Sample>,
}

impl Task {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSequence {
    pub tasks: Vec<Task>,
    pub mode: SplitMode,
    pub seed: u64,
    /// Size of the label space the learner predicts over.
    pub output_classes: usize,
    /// Fine-to-coarse map for domain-incremental sequences.
    coarse_map: Option<Vec<usize>>,
}

impl TaskSequence {
    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// Routes another dataset over the same classes (typically the test split)
    /// into tasks with the same class assignment and label exposure.
    pub fn route(&self, dataset: &LabeledDataset) -> Result<Vec<Task>> {
        let max_class = self.tasks.iter().flat_map(|t| t.classes.iter()).max().copied();
        if max_class.is_some_and(|m| m >= dataset.class_count()) {
            return Err(Error::InvalidArgument(format!(
                "dataset `{}` has {} classes, the task sequence uses class {}",
                dataset.name,
                dataset.class_count(),
                max_class.unwrap()
            )));
        }
        Ok(self
            .tasks
            .iter()
            .map(|task| {
                let classes: BTreeSet<usize> = task.classes.iter().copied().collect();
                let samples = dataset
                    .samples()
                    .iter()
                    .filter(|s| classes.contains(&s.label))
                    .map(|s| self.expose(s))
                    .collect();
                Task {
                    index: task.index,
                    classes: task.classes.clone(),
                    samples,
                }
            })
            .collect())
    }

    fn expose(&self, s: &Sample) -> Sample {
        let mut s = s.clone();
        if let Some(map) = &self.coarse_map {
            s.coarse_label = Some(map[s.label]);
        }
        s
    }
}

/// Randomly assigns classes to `n_tasks` equally sized, disjoint tasks.
pub fn split_cil(dataset: &LabeledDataset, n_tasks: usize, seed: u64) -> Result<TaskSequence> {
    let classes = dataset.class_count();
    if n_tasks == 0 || classes % n_tasks != 0 {
        return Err(Error::InvalidArgument(format!(
            "{classes} classes cannot be split into {n_tasks} equal tasks"
        )));
    }
    let mut order: Vec<usize> = (0..classes).collect();
    order.shuffle(&mut Rng::seed_from_u64(seed));
    let mut sequence = TaskSequence {
        tasks: Vec::with_capacity(n_tasks),
        mode: SplitMode::Cil,
        seed,
        output_classes: classes,
        coarse_map: None,
    };
    let blocks: Vec<Task> = order
        .chunks(classes / n_tasks)
        .enumerate()
        .map(|(index, block)| Task {
            index,
            classes: block.to_vec(),
            samples: Vec::new(),
        })
        .collect();
    sequence.tasks = blocks;
    sequence.tasks = sequence.route(dataset)?;
    Ok(sequence)
}

/// Builds `n_steps` domain-incremental steps from a fine-to-coarse class map.
///
/// Every coarse class must own exactly `n_steps` fine classes. Within each
/// coarse group the fine classes are permuted by `seed`; step `k` receives
/// the `k`-th fine class of every group, so each step covers the whole
/// coarse label set.
pub fn split_dil(
    dataset: &LabeledDataset,
    coarse_map: &[usize],
    n_steps: usize,
    seed: u64,
) -> Result<TaskSequence> {
    if coarse_map.len() != dataset.class_count() {
        return Err(Error::InvalidArgument(format!(
            "coarse map covers {} fine classes, dataset has {}",
            coarse_map.len(),
            dataset.class_count()
        )));
    }
    if n_steps == 0 {
        return Err(Error::InvalidArgument("at least one step is required".into()));
    }
    let coarse_count = coarse_map.iter().max().map_or(0, |m| m + 1);
    let mut groups = vec![Vec::new(); coarse_count];
    for (fine, &coarse) in coarse_map.iter().enumerate() {
        groups[coarse].push(fine);
    }
    if let Some((coarse, g)) = groups.iter().enumerate().find(|(_, g)| g.len() != n_steps) {
        return Err(Error::InvalidArgument(format!(
            "coarse class {coarse} has {} fine classes, expected {n_steps}",
            g.len()
        )));
    }
    let mut rng = Rng::seed_from_u64(seed);
    for g in &mut groups {
        g.shuffle(&mut rng);
    }
    let tasks = (0..n_steps)
        .map(|k| {
            let mut classes: Vec<usize> = groups.iter().map(|g| g[k]).collect();
            classes.sort_unstable();
            Task {
                index: k,
                classes,
                samples: Vec::new(),
            }
        })
        .collect();
    let mut sequence = TaskSequence {
        tasks,
        mode: SplitMode::Dil,
        seed,
        output_classes: coarse_count,
        coarse_map: Some(coarse_map.to_vec()),
    };
    sequence.tasks = sequence.route(dataset)?;
    Ok(sequence)
}

/// Shuffles a task once and cuts it into consecutive batches; the last batch
/// may be short. Each sample appears in exactly one batch.
pub fn stream(task: &Task, stream_batch_size: usize, seed: u64) -> Result<Vec<Vec<Sample>>> {
    if stream_batch_size < 2 {
        return Err(Error::InvalidArgument(format!(
            "stream batch size must be at least 2, got {stream_batch_size}"
        )));
    }
    if task.is_empty() {
        return Err(Error::InvalidArgument(format!("task {} is empty", task.index)));
    }
    let mut order = task.samples.clone();
    order.shuffle(&mut Rng::seed_from_u64(seed));
    Ok(order
        .chunks(stream_batch_size)
        .map(<[Sample]>::to_vec)
        .collect())
}
