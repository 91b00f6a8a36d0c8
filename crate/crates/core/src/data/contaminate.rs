use std::collections::BTreeMap;

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::dataset::{LabeledDataset, Provenance};
use crate::error::{Error, Result};
use crate::seed::Rng;

/// How much of a real dataset to replace with synthetic twins, and from which generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationSpec {
    /// Fraction `P` of every class that is substituted.
    pub ratio: f64,
    /// Share of the substituted samples contributed by each twin source. Must sum to 1.
    pub source_shares: BTreeMap<String, f64>,
    pub seed: u64,
}

impl ContaminationSpec {
    pub fn single_source(ratio: f64, tag: impl Into<String>, seed: u64) -> Self {
        Self {
            ratio,
            source_shares: BTreeMap::from([(tag.into(), 1.0)]),
            seed,
        }
    }

    /// Equal shares for every tag.
    pub fn uniform_sources<I, S>(ratio: f64, tags: I, seed: u64) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tags: Vec<String> = tags.into_iter().map(Into::into).collect();
        let share = 1.0 / tags.len().max(1) as f64;
        Self {
            ratio,
            source_shares: tags.into_iter().map(|t| (t, share)).collect(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.ratio) {
            return Err(Error::InvalidArgument(format!(
                "contamination ratio {} outside [0, 1]",
                self.ratio
            )));
        }
        if self.source_shares.is_empty() {
            return Err(Error::InvalidArgument("no twin sources given".into()));
        }
        if self.source_shares.values().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::InvalidArgument("source shares must be non-negative".into()));
        }
        let total: f64 = self.source_shares.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "source shares sum to {total}, expected 1"
            )));
        }
        Ok(())
    }
}

/// Number of substitutions for a class with `n` real samples.
pub fn substitution_count(ratio: f64, n: usize) -> usize {
    (ratio * n as f64).round() as usize
}

/// Splits `total` substitutions across sources by largest remainder.
///
/// Each source first receives `floor(share * total)`; the leftover units go
/// to the sources with the largest fractional parts, ties resolved by tag
/// order. The result always sums to `total`.
pub fn apportion(total: usize, shares: &BTreeMap<String, f64>) -> Vec<(String, usize)> {
    let mut quotas: Vec<(String, usize, f64)> = shares
        .iter()
        .map(|(tag, share)| {
            let exact = share * total as f64;
            let floor = exact.floor();
            (tag.clone(), floor as usize, exact - floor)
        })
        .collect();
    let assigned: usize = quotas.iter().map(|q| q.1).sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    // stable sort keeps tag order among equal remainders
    order.sort_by(|&a, &b| quotas[b].2.total_cmp(&quotas[a].2));
    for &i in order.iter().cycle().take(total.saturating_sub(assigned)) {
        quotas[i].1 += 1;
    }
    quotas.into_iter().map(|(t, n, _)| (t, n)).collect()
}

/// Replaces `round(P * n_c)` samples of every class `c` with twin samples.
///
/// Substituted positions are drawn uniformly within each class; twin samples
/// are drawn uniformly without replacement from the twin's pool for the same
/// class. Substituted samples keep the id, label and position of the real
/// sample they replace, and carry the twin's pixels and provenance.
pub fn contaminate(
    real: &LabeledDataset,
    twins: &BTreeMap<String, LabeledDataset>,
    spec: &ContaminationSpec,
) -> Result<LabeledDataset> {
    spec.validate()?;
    for tag in spec.source_shares.keys() {
        let twin = twins.get(tag).ok_or_else(|| {
            Error::InvalidArgument(format!("no twin dataset for source `{tag}`"))
        })?;
        if twin.class_count() != real.class_count() {
            return Err(Error::InvalidArgument(format!(
                "twin `{tag}` has {} classes, real dataset has {}",
                twin.class_count(),
                real.class_count()
            )));
        }
        if twin.image_dims().is_some() && twin.image_dims() != real.image_dims() {
            return Err(Error::Format(format!(
                "twin `{tag}` images are {:?}, real images are {:?}",
                twin.image_dims(),
                real.image_dims()
            )));
        }
    }

    let mut rng = Rng::seed_from_u64(spec.seed);
    let twin_pools: BTreeMap<&str, Vec<Vec<usize>>> = spec
        .source_shares
        .keys()
        .map(|tag| (tag.as_str(), twins[tag].indices_by_class()))
        .collect();

    let mut out = real.samples().to_vec();
    for (class, members) in real.indices_by_class().iter().enumerate() {
        let k = substitution_count(spec.ratio, members.len());
        if k == 0 {
            continue;
        }
        let quotas = apportion(k, &spec.source_shares);
        for (tag, q) in &quotas {
            let available = twin_pools[tag.as_str()][class].len();
            if *q > available {
                return Err(Error::InsufficientTwin {
                    source_tag: tag.clone(),
                    class,
                    required: *q,
                    available,
                });
            }
        }
        // Random order, so consecutive runs of it form a uniform partition.
        let chosen = sample_indices(&mut rng, members.len(), k);
        let mut chosen = chosen.into_iter();
        for (tag, q) in quotas {
            let pool = &twin_pools[tag.as_str()][class];
            let picks = sample_indices(&mut rng, pool.len(), q);
            let twin = &twins[&tag];
            for pick in picks {
                let slot = members[chosen.next().expect("quotas sum to k")];
                let donor = &twin.samples()[pool[pick]];
                out[slot] = out[slot].substituted(donor.image.clone(), Provenance::Synthetic(tag.clone()));
            }
        }
    }
    let name = format!("{}+contaminated(P={})", real.name, spec.ratio);
    Ok(real.with_samples(name, out))
}
