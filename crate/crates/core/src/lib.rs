//! Synthetic FMCW radar data for driver head-movement recognition, the range
//! spectrum pipeline that turns it into images, and a Siamese one-shot
//! classifier with a softmax CNN baseline, trained with from-scratch
//! backpropagation.

pub mod dsp;
pub mod error;
pub mod eval;
pub mod nn;
pub mod radar_sim;
pub mod siamese;
pub mod tensor;

pub use error::{Error, Result};
