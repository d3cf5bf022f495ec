pub mod corpus;
pub mod tagger;
pub mod metrics;
pub mod agreement;
pub mod slopmodel;
pub mod judge;
pub mod cli;
