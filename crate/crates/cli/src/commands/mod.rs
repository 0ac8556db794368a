pub mod compare;
pub mod curves;
pub mod design;
pub mod fit;
pub mod recover;
pub mod report;
pub mod simulate;

/// Name of the run record written next to the draws of a fit.
pub const FIT_FILE: &str = "fit.json";
pub const DRAWS_FILE: &str = "draws.bin";
pub const SUMMARY_FILE: &str = "summary.csv";
