pub mod chunking;
pub mod cli;
pub mod corpus;
pub mod features;
pub mod metrics;
pub mod neural;
pub mod tagger;
pub mod tensor;
