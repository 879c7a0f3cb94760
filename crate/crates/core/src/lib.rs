#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ais;
pub mod geo;
pub mod features;
pub mod dataprep;
pub mod metrics;
pub mod learners;
pub mod tuning;
pub mod matching;
pub mod pipeline;
