pub mod annotation;
pub mod corpus;
pub mod encoding;
pub mod features;
pub mod lexicon;
pub mod models;
pub mod review;
pub mod script;
pub mod segment;
pub mod synth;
