pub mod corpus;
pub mod evalharness;
pub mod lexicon;
pub mod pipeline;
pub mod plugin;
pub mod qgen;
pub mod reader;
pub mod retrieval;
pub mod textseg;
