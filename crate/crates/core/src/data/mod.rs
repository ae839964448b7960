//! Dataset ingestion, non-IID partitioning and the randomized-response
//! mechanism.

mod dataset;
mod loaders;
mod partition;
mod privacy;

pub use dataset::TabularDataset;
pub use loaders::{
    load_adult, load_compas, standardize, GroupMode, LoadReport, ADULT_COLUMNS, COMPAS_COLUMNS,
};
pub use partition::{
    dirichlet_partition, train_test_split, train_test_split_indices, PartitionSpec,
    MAX_PARTITION_REDRAWS,
};
pub use privacy::randomized_response;
