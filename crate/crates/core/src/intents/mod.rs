//! Post-filtering of mined pairs into intent buckets, and dataset export.

mod aspects;
mod bucket;
mod dataset;
mod retrieval;

pub use aspects::{tag_aspects, AspectLexicon, TaggedQuery};
pub use bucket::{
    assign_bucket, bucketize, token_jaccard, IntentBucket, IntentContext, IntentThresholds,
    QueryCategories, RejectReason, Rejections, Verdict,
};
pub use dataset::{
    export_dataset, manifest_path, read_bucketed, read_dataset, write_bucketed, write_dataset,
    write_rejections, BucketCounts, DatasetRow,
};
pub use retrieval::{
    read_inventory, recall_set, recall_similarity, write_inventory, InventoryItem, RetrievalIndex,
};
