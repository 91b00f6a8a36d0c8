use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::image::Image;
use crate::error::{Error, Result};

/// File name of the per-root provenance manifest.
pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// Where a sample came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "source")]
pub enum Provenance {
    Real,
    /// Generated image, tagged with the generator it came from.
    Synthetic(String),
}

impl Provenance {
    pub fn synthetic(tag: impl Into<String>) -> Self {
        Provenance::Synthetic(tag.into())
    }

    pub fn is_real(&self) -> bool {
        matches!(self, Provenance::Real)
    }

    pub fn is_synthetic(&self) -> bool {
        !self.is_real()
    }

    pub fn source_tag(&self) -> Option<&str> {
        match self {
            Provenance::Real => None,
            Provenance::Synthetic(tag) => Some(tag),
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Real => f.write_str("real"),
            Provenance::Synthetic(tag) => write!(f, "synthetic:{tag}"),
        }
    }
}

/// One labelled image. Cloning is cheap: the pixels are shared.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: u64,
    pub image: Arc<Image>,
    /// Fine class index within the source dataset.
    pub label: usize,
    provenance: Provenance,
    /// Set by the domain-incremental split; when present it is the label the
    /// learner is trained and evaluated on.
    pub coarse_label: Option<usize>,
}

impl Sample {
    pub fn new(id: u64, image: impl Into<Arc<Image>>, label: usize, provenance: Provenance) -> Self {
        Self {
            id,
            image: image.into(),
            label,
            provenance,
            coarse_label: None,
        }
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// The label exposed to the learner: the coarse label in domain-incremental
    /// streams, the fine label otherwise.
    pub fn target(&self) -> usize {
        self.coarse_label.unwrap_or(self.label)
    }

    /// Copy of this sample carrying a different image and provenance. Used by
    /// contamination, which substitutes pixels but keeps the slot identity.
    pub(crate) fn substituted(&self, image: Arc<Image>, provenance: Provenance) -> Self {
        Self {
            id: self.id,
            image,
            label: self.label,
            provenance,
            coarse_label: self.coarse_label,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub name: String,
    samples: Vec<Sample>,
    class_count: usize,
    class_names: Vec<String>,
}

impl LabeledDataset {
    /// Builds a dataset, checking label range, id uniqueness and uniform image shape.
    pub fn new(
        name: impl Into<String>,
        samples: Vec<Sample>,
        class_count: usize,
        class_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let class_names = match class_names {
            Some(names) if names.len() != class_count => {
                return Err(Error::Structure(format!(
                    "{} class names for {class_count} classes",
                    names.len()
                )))
            }
            Some(names) => names,
            None => (0..class_count).map(|c| format!("class_{c:03}")).collect(),
        };
        let mut ids = BTreeSet::new();
        let dims = samples.first().map(|s| s.image.dims());
        for s in &samples {
            if s.label >= class_count {
                return Err(Error::Structure(format!(
                    "sample {} has label {} but the dataset has {class_count} classes",
                    s.id, s.label
                )));
            }
            if !ids.insert(s.id) {
                return Err(Error::Structure(format!("duplicate sample id {}", s.id)));
            }
            if Some(s.image.dims()) != dims {
                return Err(Error::Format(format!(
                    "sample {} has shape {:?}, expected {:?}",
                    s.id,
                    s.image.dims(),
                    dims.unwrap()
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            samples,
            class_count,
            class_names,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `(height, width, channels)` of every image, or `None` when empty.
    pub fn image_dims(&self) -> Option<(usize, usize, usize)> {
        self.samples.first().map(|s| s.image.dims())
    }

    /// Sample indices grouped by fine label, in dataset order.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.class_count];
        for (i, s) in self.samples.iter().enumerate() {
            by_class[s.label].push(i);
        }
        by_class
    }

    pub fn class_counts(&self) -> Vec<usize> {
        self.indices_by_class().iter().map(Vec::len).collect()
    }

    pub fn get_by_id(&self, id: u64) -> Option<&Sample> {
        self.samples.iter().find(|s| s.id == id)
    }

    /// Map from id to sample, for repeated lookups.
    pub fn id_index(&self) -> HashMap<u64, &Sample> {
        self.samples.iter().map(|s| (s.id, s)).collect()
    }

    pub(crate) fn with_samples(&self, name: String, samples: Vec<Sample>) -> Self {
        Self {
            name,
            samples,
            class_count: self.class_count,
            class_names: self.class_names.clone(),
        }
    }
}

/// One line of the provenance manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub id: u64,
    /// Path relative to the dataset root, `/`-separated.
    pub path: String,
    pub label: usize,
    /// `real` or `synthetic`.
    pub provenance: String,
    pub source_tag: Option<String>,
}

impl ManifestRecord {
    fn provenance(&self) -> Result<Provenance> {
        match (self.provenance.as_str(), &self.source_tag) {
            ("real", None) => Ok(Provenance::Real),
            ("synthetic", Some(tag)) => Ok(Provenance::Synthetic(tag.clone())),
            ("synthetic", None) => Ok(Provenance::Synthetic(String::new())),
            (other, _) => Err(Error::Structure(format!(
                "manifest entry {} has unknown provenance `{other}`",
                self.path
            ))),
        }
    }
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ManifestRecord = serde_json::from_str(&line).map_err(|e| {
            Error::Structure(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Loads a class-directory tree `root/<class>/<file>.png`.
///
/// Classes are indexed by the lexicographic order of their directory names
/// and samples are ordered by class then file name, so two loads of the same
/// root agree exactly. When `root/manifest.jsonl` exists it supplies ids and
/// provenance; otherwise ids are assigned in load order and every sample gets
/// `provenance`.
pub fn load_dataset(
    root: &Path,
    expected_class_count: usize,
    provenance: Provenance,
) -> Result<LabeledDataset> {
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut class_dirs = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        if entry.path().is_dir() {
            class_dirs.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    if class_dirs.is_empty() {
        return Err(Error::Structure(format!(
            "no class directories under {}",
            root.display()
        )));
    }
    class_dirs.sort();
    if class_dirs.len() != expected_class_count {
        return Err(Error::Structure(format!(
            "expected {expected_class_count} class directories under {}, found {}",
            root.display(),
            class_dirs.len()
        )));
    }

    let manifest_path = root.join(MANIFEST_FILE);
    let manifest: Option<BTreeMap<String, ManifestRecord>> = if manifest_path.exists() {
        Some(
            read_manifest(&manifest_path)?
                .into_iter()
                .map(|r| (r.path.clone(), r))
                .collect(),
        )
    } else {
        None
    };

    let mut samples = Vec::new();
    let mut next_id = 0u64;
    for (label, class) in class_dirs.iter().enumerate() {
        let dir = root.join(class);
        let mut files: Vec<String> = fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_file())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n.to_ascii_lowercase().ends_with(".png"))
            .collect();
        if files.is_empty() {
            return Err(Error::Structure(format!(
                "class directory {} holds no png images",
                dir.display()
            )));
        }
        files.sort();
        for file in files {
            let rel = format!("{class}/{file}");
            let image = Image::load_png(&dir.join(&file))?;
            let (id, prov) = match &manifest {
                Some(m) => {
                    let record = m.get(&rel).ok_or_else(|| {
                        Error::Structure(format!("{rel} is missing from the manifest"))
                    })?;
                    if record.label != label {
                        return Err(Error::Structure(format!(
                            "manifest labels {rel} as class {}, directory order gives {label}",
                            record.label
                        )));
                    }
                    (record.id, record.provenance()?)
                }
                None => {
                    next_id += 1;
                    (next_id - 1, provenance.clone())
                }
            };
            samples.push(Sample::new(id, image, label, prov));
        }
    }
    let name = root
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    LabeledDataset::new(name, samples, expected_class_count, Some(class_dirs))
}

/// Writes `dataset` as a class-directory tree of PNGs plus a manifest.
///
/// Files are named by sample id, so the tree reloads in id order within each
/// class.
pub fn save_dataset(dataset: &LabeledDataset, root: &Path) -> Result<()> {
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    for name in dataset.class_names() {
        let dir = root.join(name);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let manifest_path = root.join(MANIFEST_FILE);
    let file = fs::File::create(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let mut out = BufWriter::new(file);
    for s in dataset.samples() {
        let rel = format!("{}/{:08}.png", dataset.class_names()[s.label], s.id);
        s.image.save_png(&root.join(&rel))?;
        let record = ManifestRecord {
            id: s.id,
            path: rel,
            label: s.label,
            provenance: if s.provenance().is_real() { "real" } else { "synthetic" }.into(),
            source_tag: s.provenance().source_tag().map(str::to_owned),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n").map_err(|e| Error::io(&manifest_path, e))?;
    }
    out.flush().map_err(|e| Error::io(&manifest_path, e))
}
