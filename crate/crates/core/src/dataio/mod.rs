//! Dataset ingestion (IDX pairs), class-based partitioning and deterministic
//! synthetic problem generation.

mod idx;
mod partition;
mod rng;
mod synthetic;

pub use idx::{load_idx, parse_idx_images, parse_idx_labels, IdxImageSet, IMAGE_MAGIC, LABEL_MAGIC};
pub use partition::partition_by_class;
pub use rng::{CounterRng, StreamRole};
pub use synthetic::{gen_synthetic_ls, SyntheticLsSpec};
