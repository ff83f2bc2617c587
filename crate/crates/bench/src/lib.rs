//! Fixtures shared by the benchmarks.

use facelayout_core::facedesc::extract_channel;
use facelayout_core::learn::LabeledData;
use facelayout_core::synth::{default_archetypes, with_noise};
use facelayout_core::{generate, Channel, DatasetManifest, DescriptorConfig};

/// Noisy synthetic dataset with `per_class` images for each default archetype.
pub fn manifest(per_class: usize) -> DatasetManifest {
    generate(&with_noise(&default_archetypes(), 4.0, 0.2), per_class, 42).expect("valid archetypes")
}

pub fn descriptor_channel(m: &DatasetManifest) -> Channel {
    extract_channel(m, &DescriptorConfig::default()).expect("valid config")
}

/// Combined descriptors with labels, ready for training.
pub fn labeled(m: &DatasetManifest) -> LabeledData {
    let ch = descriptor_channel(m);
    LabeledData::new(
        ch.gather(m.ids()).expect("complete channel"),
        m.label_indices(),
        m.class_names.clone(),
    )
    .expect("consistent data")
}
