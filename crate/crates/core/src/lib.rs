//! Reconstruction of images from compressed measurements when the forward
//! model's parameter is only known up to a finite candidate set.
//!
//! An untrained decoder network is fit to a single measurement; at every
//! iteration the data-fidelity loss of each candidate parameter is computed,
//! converted into stop-gradient weights, and the weighted sum is
//! backpropagated. The crate ships the whole pipeline: a small reverse-mode
//! autodiff tape, the generator and Adam, Gaussian compressive sensing and
//! angular-spectrum holography forward models, the aggregation strategies,
//! PSNR/SSIM, dataset loading, and the experiment harness behind the
//! `momagg` CLI.

pub mod adam;
pub mod aggregation;
pub mod complex;
pub mod dataio;
pub mod error;
pub mod fft;
pub mod forward;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod tape;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
