pub mod analysis;
pub mod cli;
pub mod cnn;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod fasttext;
pub mod ingest;
pub mod io;
pub mod model;
pub mod training;

pub use error::{Error, Result};
pub use model::{Classifier, Model, ModelKind};
