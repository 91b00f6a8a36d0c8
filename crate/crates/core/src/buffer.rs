//! Fixed-capacity replay memory.
//!
//! [`MemoryStrategy::EntropySelection`] keeps samples the current model is
//! uncertain about. Each incoming batch is first cut at its median entropy
//! (only samples strictly above it survive). Survivors fill the buffer while
//! it has room; once it is full a reservoir draw over `n_seen_so_far + 1`
//! nominates a slot, and the lowest-entropy slot *of the nominated slot's
//! class* is overwritten. `n_seen_so_far` only advances when a sample is
//! stored, which differs from classical reservoir sampling. Stored entropies
//! are recomputed with the current model at every task boundary.
//!
//! The other strategies are baselines: classical reservoir sampling, and
//! reservoir sampling restricted to real-only or synthetic-only samples
//! (oracles that read the provenance flag).

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Provenance, Sample};
use crate::error::{Error, Result};
use crate::model::Learner;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MemoryStrategy {
    #[serde(rename = "es")]
    EntropySelection,
    #[serde(rename = "reservoir")]
    Reservoir,
    #[serde(rename = "real_only")]
    RealOnly,
    #[serde(rename = "synthetic_only")]
    SyntheticOnly,
}

impl MemoryStrategy {
    fn admits(self, provenance: &Provenance) -> bool {
        match self {
            MemoryStrategy::RealOnly => provenance.is_real(),
            MemoryStrategy::SyntheticOnly => provenance.is_synthetic(),
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BufferSlot {
    pub sample: Sample,
    pub entropy: f64,
}

/// What happened to one incoming sample.
#[derive(Debug, Clone, PartialEq)]
pub enum UpdateEvent {
    /// Dropped before the reservoir step (entropy at or below the batch
    /// median, or provenance rejected by an oracle).
    Filtered { id: u64 },
    Appended { id: u64, slot: usize },
    /// A full-buffer replacement. For entropy selection `nominated` is the
    /// slot drawn by the reservoir step, and `slot` the evicted one.
    Replaced {
        id: u64,
        slot: usize,
        nominated: usize,
        evicted_id: u64,
    },
    /// The reservoir draw fell outside the buffer.
    Rejected { id: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryBuffer {
    capacity: usize,
    slots: Vec<BufferSlot>,
    n_seen_so_far: u64,
    strategy: MemoryStrategy,
}

/// Composition summary of the buffer contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionStats {
    pub len: usize,
    pub synthetic_fraction: f64,
    /// Slot count per learner-facing label.
    pub per_class_counts: BTreeMap<usize, usize>,
}

/// The value `torch.quantile(x, 0.5)` returns: linear interpolation between
/// the two middle order statistics.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = 0.5 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

impl MemoryBuffer {
    pub fn new(capacity: usize, strategy: MemoryStrategy) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("buffer capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            slots: Vec::with_capacity(capacity),
            n_seen_so_far: 0,
            strategy,
        })
    }

    /// Rebuilds a buffer from stored state, e.g. a snapshot.
    pub fn restore(
        capacity: usize,
        strategy: MemoryStrategy,
        n_seen_so_far: u64,
        slots: Vec<BufferSlot>,
    ) -> Result<Self> {
        let mut buffer = Self::new(capacity, strategy)?;
        if slots.len() > capacity {
            return Err(Error::InvalidArgument(format!(
                "{} slots exceed capacity {capacity}",
                slots.len()
            )));
        }
        buffer.slots = slots;
        buffer.n_seen_so_far = n_seen_so_far;
        Ok(buffer)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.slots.len() >= self.capacity
    }

    pub fn slots(&self) -> &[BufferSlot] {
        &self.slots
    }

    pub fn n_seen_so_far(&self) -> u64 {
        self.n_seen_so_far
    }

    pub fn strategy(&self) -> MemoryStrategy {
        self.strategy
    }

    fn expect_strategy(&self, allowed: &[MemoryStrategy], op: &str) -> Result<()> {
        if allowed.contains(&self.strategy) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "{op} called on a {:?} buffer",
                self.strategy
            )))
        }
    }

    /// Runs the update that matches the buffer's strategy. `entropies` are
    /// stored alongside samples for every strategy and drive selection for
    /// entropy selection.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        batch: &[Sample],
        entropies: &[f64],
        rng: &mut R,
    ) -> Result<Vec<UpdateEvent>> {
        match self.strategy {
            MemoryStrategy::EntropySelection => self.es_update(batch, entropies, rng),
            _ => {
                check_entropies(batch, entropies)?;
                Ok(self.reservoir_insert(batch, Some(entropies), rng))
            }
        }
    }

    /// Entropy-selection update with uniform draws from `rng`.
    pub fn es_update<R: Rng + ?Sized>(
        &mut self,
        batch: &[Sample],
        entropies: &[f64],
        rng: &mut R,
    ) -> Result<Vec<UpdateEvent>> {
        self.es_update_with(batch, entropies, || rng.random::<f64>())
    }

    /// Entropy-selection update where `draw` supplies the uniform `[0, 1)`
    /// variate of each reservoir nomination (one per survivor, always
    /// consumed).
    pub fn es_update_with(
        &mut self,
        batch: &[Sample],
        entropies: &[f64],
        mut draw: impl FnMut() -> f64,
    ) -> Result<Vec<UpdateEvent>> {
        self.expect_strategy(&[MemoryStrategy::EntropySelection], "es_update")?;
        check_entropies(batch, entropies)?;
        if batch.is_empty() {
            return Ok(Vec::new());
        }
        let threshold = median(entropies);
        let mut events = Vec::with_capacity(batch.len());
        for (sample, &entropy) in batch.iter().zip(entropies) {
            if entropy <= threshold {
                events.push(UpdateEvent::Filtered { id: sample.id });
                continue;
            }
            let nominate = (draw() * (self.n_seen_so_far + 1) as f64).floor() as u64;
            if (self.n_seen_so_far as usize) < self.capacity && self.slots.len() < self.capacity {
                self.slots.push(BufferSlot {
                    sample: sample.clone(),
                    entropy,
                });
                self.n_seen_so_far += 1;
                events.push(UpdateEvent::Appended {
                    id: sample.id,
                    slot: self.slots.len() - 1,
                });
            } else if (nominate as usize) < self.slots.len() {
                let nominated = nominate as usize;
                let class = self.slots[nominated].sample.target();
                let slot = self
                    .lowest_entropy_slot_of(class)
                    .expect("the nominated slot belongs to its own class");
                let evicted_id = self.slots[slot].sample.id;
                self.slots[slot] = BufferSlot {
                    sample: sample.clone(),
                    entropy,
                };
                self.n_seen_so_far += 1;
                events.push(UpdateEvent::Replaced {
                    id: sample.id,
                    slot,
                    nominated,
                    evicted_id,
                });
            } else {
                events.push(UpdateEvent::Rejected { id: sample.id });
            }
        }
        Ok(events)
    }

    /// Minimum-entropy slot among those labelled `class`; lowest index wins ties.
    fn lowest_entropy_slot_of(&self, class: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in self.slots.iter().enumerate() {
            if s.sample.target() == class && best.is_none_or(|(_, e)| s.entropy < e) {
                best = Some((i, s.entropy));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Classical reservoir sampling; stored entropies are set to 0.
    pub fn reservoir_update<R: Rng + ?Sized>(&mut self, batch: &[Sample], rng: &mut R) -> Result<Vec<UpdateEvent>> {
        self.expect_strategy(&[MemoryStrategy::Reservoir], "reservoir_update")?;
        Ok(self.reservoir_insert(batch, None, rng))
    }

    /// Reservoir sampling over the samples whose provenance matches the
    /// oracle; the others neither enter nor count as seen.
    pub fn oracle_update<R: Rng + ?Sized>(&mut self, batch: &[Sample], rng: &mut R) -> Result<Vec<UpdateEvent>> {
        self.expect_strategy(
            &[MemoryStrategy::RealOnly, MemoryStrategy::SyntheticOnly],
            "oracle_update",
        )?;
        Ok(self.reservoir_insert(batch, None, rng))
    }

    fn reservoir_insert<R: Rng + ?Sized>(
        &mut self,
        batch: &[Sample],
        entropies: Option<&[f64]>,
        rng: &mut R,
    ) -> Vec<UpdateEvent> {
        let mut events = Vec::with_capacity(batch.len());
        for (i, sample) in batch.iter().enumerate() {
            if !self.strategy.admits(sample.provenance()) {
                events.push(UpdateEvent::Filtered { id: sample.id });
                continue;
            }
            let entropy = entropies.map_or(0.0, |e| e[i]);
            let slot = BufferSlot {
                sample: sample.clone(),
                entropy,
            };
            if self.slots.len() < self.capacity {
                self.slots.push(slot);
                events.push(UpdateEvent::Appended {
                    id: sample.id,
                    slot: self.slots.len() - 1,
                });
            } else {
                let j = rng.random_range(0..=self.n_seen_so_far) as usize;
                if j < self.capacity {
                    let evicted_id = self.slots[j].sample.id;
                    self.slots[j] = slot;
                    events.push(UpdateEvent::Replaced {
                        id: sample.id,
                        slot: j,
                        nominated: j,
                        evicted_id,
                    });
                } else {
                    events.push(UpdateEvent::Rejected { id: sample.id });
                }
            }
            self.n_seen_so_far += 1;
        }
        events
    }

    /// Up to `mem_batch_size` distinct slots drawn uniformly; all slots when
    /// the buffer holds fewer.
    pub fn sample_memory<R: Rng + ?Sized>(&self, mem_batch_size: usize, rng: &mut R) -> Vec<Sample> {
        if mem_batch_size >= self.slots.len() {
            return self.slots.iter().map(|s| s.sample.clone()).collect();
        }
        sample_indices(rng, self.slots.len(), mem_batch_size)
            .into_iter()
            .map(|i| self.slots[i].sample.clone())
            .collect()
    }

    /// Recomputes every stored entropy with `model` in evaluation mode.
    pub fn refresh_entropy(&mut self, model: &Learner) -> Result<()> {
        if self.slots.is_empty() {
            return Ok(());
        }
        let samples: Vec<Sample> = self.slots.iter().map(|s| s.sample.clone()).collect();
        let fresh = model.entropies(&samples)?;
        self.set_entropies(&fresh)
    }

    /// Overwrites stored entropies in slot order.
    pub fn set_entropies(&mut self, entropies: &[f64]) -> Result<()> {
        if entropies.len() != self.slots.len() {
            return Err(Error::InvalidArgument(format!(
                "{} entropies for {} slots",
                entropies.len(),
                self.slots.len()
            )));
        }
        for (slot, &e) in self.slots.iter_mut().zip(entropies) {
            slot.entropy = e;
        }
        Ok(())
    }

    pub fn composition_stats(&self) -> CompositionStats {
        let mut per_class_counts = BTreeMap::new();
        let mut synthetic = 0usize;
        for s in &self.slots {
            *per_class_counts.entry(s.sample.target()).or_insert(0) += 1;
            synthetic += usize::from(s.sample.provenance().is_synthetic());
        }
        CompositionStats {
            len: self.slots.len(),
            synthetic_fraction: if self.slots.is_empty() {
                0.0
            } else {
                synthetic as f64 / self.slots.len() as f64
            },
            per_class_counts,
        }
    }

    pub fn snapshot(&self) -> Vec<SlotRecord> {
        self.slots
            .iter()
            .enumerate()
            .map(|(slot, s)| SlotRecord {
                slot,
                id: s.sample.id,
                label: s.sample.target(),
                provenance: if s.sample.provenance().is_real() { "real" } else { "synthetic" }.into(),
                source_tag: s.sample.provenance().source_tag().map(str::to_owned),
                entropy: s.entropy,
            })
            .collect()
    }
}

fn check_entropies(batch: &[Sample], entropies: &[f64]) -> Result<()> {
    if batch.len() != entropies.len() {
        return Err(Error::InvalidArgument(format!(
            "{} entropies for a batch of {}",
            entropies.len(),
            batch.len()
        )));
    }
    if let Some(e) = entropies.iter().find(|e| !e.is_finite() || **e < 0.0) {
        return Err(Error::NonFinite {
            component: format!("buffer entropy ({e})"),
        });
    }
    Ok(())
}

/// One buffer slot in a snapshot file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotRecord {
    pub slot: usize,
    pub id: u64,
    pub label: usize,
    pub provenance: String,
    pub source_tag: Option<String>,
    pub entropy: f64,
}

/// Writes a snapshot as line-delimited JSON, one slot per line.
pub fn write_snapshot(records: &[SlotRecord], path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<Vec<SlotRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::SeedableRng;

    use super::*;
    use crate::data::Image;
    use crate::seed::Rng as SeededRng;

    fn sample(id: u64, label: usize, real: bool) -> Sample {
        let prov = if real { Provenance::Real } else { Provenance::synthetic("s") };
        Sample::new(id, Arc::new(Image::zeros(1, 1, 1)), label, prov)
    }

    fn es(capacity: usize) -> MemoryBuffer {
        MemoryBuffer::new(capacity, MemoryStrategy::EntropySelection).unwrap()
    }

    #[test]
    fn median_interpolates() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[7.0]), 7.0);
    }

    #[test]
    fn ten_distinct_entropies_leave_the_top_five() {
        let mut buf = es(100);
        let batch: Vec<Sample> = (0..10).map(|i| sample(i, 0, true)).collect();
        let ent: Vec<f64> = (0..10).map(|i| (9 - i) as f64 * 0.1).collect();
        let events = buf.es_update_with(&batch, &ent, || 0.0).unwrap();
        let stored: Vec<u64> = buf.slots().iter().map(|s| s.sample.id).collect();
        assert_eq!(stored, vec![0, 1, 2, 3, 4]);
        assert_eq!(events.iter().filter(|e| matches!(e, UpdateEvent::Filtered { .. })).count(), 5);
    }

    #[test]
    fn fill_phase_appends_survivors() {
        let mut buf = es(4);
        // median 0.35: the top three survive
        let batch: Vec<Sample> = (0..6).map(|i| sample(i, i as usize % 2, true)).collect();
        let ent = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        buf.es_update_with(&batch, &ent, || 0.99).unwrap();
        assert_eq!(buf.len(), 3);
        assert_eq!(buf.n_seen_so_far(), 3);
    }

    #[test]
    fn full_buffer_replaces_class_minimum_of_nominated_slot() {
        let slots = [(0, 0.1), (0, 0.5), (1, 0.2), (1, 0.9)]
            .into_iter()
            .enumerate()
            .map(|(i, (label, entropy))| BufferSlot {
                sample: sample(i as u64, label, true),
                entropy,
            })
            .collect();
        let mut buf = MemoryBuffer::restore(4, MemoryStrategy::EntropySelection, 4, slots).unwrap();
        let batch = vec![sample(100, 1, false), sample(101, 1, true)];
        // median 0.5: only the second sample (0.8) survives; u = 0.3 nominates
        // floor(0.3 * 5) = 1, a class-0 slot whose class minimum is slot 0.
        let events = buf.es_update_with(&batch, &[0.2, 0.8], || 0.3).unwrap();
        assert_eq!(
            events[1],
            UpdateEvent::Replaced { id: 101, slot: 0, nominated: 1, evicted_id: 0 }
        );
        assert_eq!(buf.slots()[0].sample.id, 101);
        assert_eq!(buf.slots()[0].entropy, 0.8);
        assert_eq!(buf.n_seen_so_far(), 5);
    }

    #[test]
    fn nomination_past_capacity_is_a_no_op() {
        let slots = (0..2)
            .map(|i| BufferSlot { sample: sample(i, 0, true), entropy: 0.5 })
            .collect();
        let mut buf = MemoryBuffer::restore(2, MemoryStrategy::EntropySelection, 10, slots).unwrap();
        let before = buf.clone();
        let events = buf.es_update_with(&[sample(7, 0, true), sample(8, 0, true)], &[0.0, 1.0], || 0.9).unwrap();
        assert_eq!(events[1], UpdateEvent::Rejected { id: 8 });
        assert_eq!(buf, before);
    }

    #[test]
    fn ties_at_the_median_are_filtered() {
        let mut buf = es(10);
        let batch: Vec<Sample> = (0..4).map(|i| sample(i, 0, true)).collect();
        buf.es_update_with(&batch, &[1.0; 4], || 0.0).unwrap();
        assert!(buf.is_empty());
    }

    #[test]
    fn class_minimum_ties_pick_lowest_index() {
        let slots = [(0, 0.3), (0, 0.3), (0, 0.3)]
            .into_iter()
            .enumerate()
            .map(|(i, (label, entropy))| BufferSlot { sample: sample(i as u64, label, true), entropy })
            .collect();
        let mut buf = MemoryBuffer::restore(3, MemoryStrategy::EntropySelection, 3, slots).unwrap();
        buf.es_update_with(&[sample(9, 0, true), sample(10, 0, true)], &[0.0, 1.0], || 0.6).unwrap();
        assert_eq!(buf.slots()[0].sample.id, 10);
    }

    #[test]
    fn wrong_strategy_and_bad_entropies_error() {
        let mut res = MemoryBuffer::new(3, MemoryStrategy::Reservoir).unwrap();
        let mut rng = SeededRng::seed_from_u64(0);
        assert!(res.es_update(&[sample(0, 0, true)], &[0.1], &mut rng).is_err());
        let mut buf = es(3);
        assert!(buf.es_update(&[sample(0, 0, true)], &[], &mut rng).is_err());
        assert!(buf.es_update(&[sample(0, 0, true)], &[f64::NAN], &mut rng).is_err());
        assert!(MemoryBuffer::new(0, MemoryStrategy::Reservoir).is_err());
    }

    #[test]
    fn reservoir_fill_and_determinism() {
        let stream: Vec<Sample> = (0..7).map(|i| sample(i, 0, true)).collect();
        let mut buf = MemoryBuffer::new(10, MemoryStrategy::Reservoir).unwrap();
        buf.reservoir_update(&stream, &mut SeededRng::seed_from_u64(0)).unwrap();
        assert_eq!(buf.slots().iter().map(|s| s.sample.id).collect::<Vec<_>>(), (0..7).collect::<Vec<_>>());

        let long: Vec<Sample> = (0..500).map(|i| sample(i, 0, true)).collect();
        let run = |seed| {
            let mut b = MemoryBuffer::new(20, MemoryStrategy::Reservoir).unwrap();
            b.reservoir_update(&long, &mut SeededRng::seed_from_u64(seed)).unwrap();
            b
        };
        assert_eq!(run(3), run(3));
        assert_eq!(run(3).n_seen_so_far(), 500);
    }

    #[test]
    fn oracles_filter_by_provenance() {
        let mut rng = SeededRng::seed_from_u64(1);
        let synthetic: Vec<Sample> = (0..5).map(|i| sample(i, 0, false)).collect();
        let mut real_only = MemoryBuffer::new(4, MemoryStrategy::RealOnly).unwrap();
        real_only.oracle_update(&synthetic, &mut rng).unwrap();
        assert!(real_only.is_empty());
        assert_eq!(real_only.n_seen_so_far(), 0);

        let real: Vec<Sample> = (0..9).map(|i| sample(i, 0, true)).collect();
        let mut a = MemoryBuffer::new(4, MemoryStrategy::RealOnly).unwrap();
        a.oracle_update(&real, &mut SeededRng::seed_from_u64(2)).unwrap();
        let mut b = MemoryBuffer::new(4, MemoryStrategy::Reservoir).unwrap();
        b.reservoir_update(&real, &mut SeededRng::seed_from_u64(2)).unwrap();
        assert_eq!(a.slots(), b.slots());

        let mixed: Vec<Sample> = (0..40).map(|i| sample(i, 0, i % 3 == 0)).collect();
        let mut syn = MemoryBuffer::new(6, MemoryStrategy::SyntheticOnly).unwrap();
        syn.oracle_update(&mixed, &mut rng).unwrap();
        assert!(syn.slots().iter().all(|s| s.sample.provenance().is_synthetic()));
        assert_eq!(syn.len(), 6);
    }

    #[test]
    fn sample_memory_clamps_and_handles_zero() {
        let mut buf = MemoryBuffer::new(10, MemoryStrategy::Reservoir).unwrap();
        let mut rng = SeededRng::seed_from_u64(0);
        assert!(buf.sample_memory(64, &mut rng).is_empty());
        buf.reservoir_update(&[sample(0, 0, true), sample(1, 0, true), sample(2, 1, true)], &mut rng).unwrap();
        assert_eq!(buf.sample_memory(64, &mut rng).len(), 3);
        assert!(buf.sample_memory(0, &mut rng).is_empty());
        let two = buf.sample_memory(2, &mut rng);
        assert_eq!(two.len(), 2);
        assert_ne!(two[0].id, two[1].id);
    }

    #[test]
    fn composition_counts() {
        let mut rng = SeededRng::seed_from_u64(0);
        let mut buf = MemoryBuffer::new(10, MemoryStrategy::Reservoir).unwrap();
        assert_eq!(buf.composition_stats().synthetic_fraction, 0.0);
        let batch: Vec<Sample> = (0..10).map(|i| sample(i, i as usize % 2, i >= 3)).collect();
        buf.reservoir_update(&batch, &mut rng).unwrap();
        let stats = buf.composition_stats();
        assert!((stats.synthetic_fraction - 0.3).abs() < 1e-12);
        assert_eq!(stats.per_class_counts, BTreeMap::from([(0, 5), (1, 5)]));

        let mut all_syn = MemoryBuffer::new(3, MemoryStrategy::Reservoir).unwrap();
        all_syn.reservoir_update(&[sample(0, 0, false)], &mut rng).unwrap();
        assert_eq!(all_syn.composition_stats().synthetic_fraction, 1.0);
    }

    #[test]
    fn snapshot_round_trip() {
        let mut buf = es(8);
        let batch: Vec<Sample> = (0..8).map(|i| sample(i, 0, i % 2 == 0)).collect();
        buf.es_update_with(&batch, &[0.1, 0.9, 0.3, 0.7, 0.2, 0.8, 0.4, 0.6], || 0.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("buffer.jsonl");
        write_snapshot(&buf.snapshot(), &path).unwrap();
        assert_eq!(read_snapshot(&path).unwrap(), buf.snapshot());
    }
}
