//! Datasets, contamination, task splits, streaming and augmentation.

mod augment;
mod contaminate;
mod dataset;
mod image;
mod split;
pub mod surrogate;

pub use augment::{
    augment, augment_one, color_jitter, grayscale, hflip, reflect_crop, AugmentationKind,
    AugmentationPolicy, JitterParams,
};
pub use contaminate::{apportion, contaminate, substitution_count, ContaminationSpec};
pub use dataset::{
    load_dataset, read_manifest, save_dataset, LabeledDataset, ManifestRecord, Provenance, Sample,
    MANIFEST_FILE,
};
pub use image::Image;
pub use split::{split_cil, split_dil, stream, SplitMode, Task, TaskSequence};
