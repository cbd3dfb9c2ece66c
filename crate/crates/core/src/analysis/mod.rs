//! Significance testing and boundary (bucket) analysis over metric reports.

pub mod buckets;
pub mod significance;

pub use buckets::{bucket_report, BucketError, BucketKind, BucketRow, BucketSpec, BucketTable};
pub use significance::{
    compare_reports, paired_randomization_test, SignificanceError, SignificanceResult, TestOutcome,
    DEFAULT_PERMUTATIONS, MIN_PERMUTATIONS, SIGNIFICANCE_LEVEL,
};
