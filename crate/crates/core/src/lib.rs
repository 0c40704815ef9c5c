//! Simulation, execution, codec, baseline understanding and evaluation for
//! conversational montage editing.

pub mod dialog;
pub mod dst;
pub mod error;
pub mod eval;
pub mod frame;
pub mod graph;
pub mod lexicon;
pub mod nlg;
pub mod nlu;
pub mod session;
pub mod sim;
pub mod splits;
pub mod story;
pub mod vocab;

pub use error::{Error, Result};
