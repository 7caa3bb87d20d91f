//! Joint hate-speech classification and post/hashtag semantic relation
//! inference, with teacher/student pseudo-hashtag augmentation and a
//! cross-validation harness.

pub mod augment;
pub mod corpus;
pub mod config;
pub mod encoder;
pub mod eval;
pub mod error;
pub mod model;
pub mod relation;
pub mod segment;

pub use error::{Error, Result};
