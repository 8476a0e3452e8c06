//! Detection of GAN-generated images from per-channel pixel co-occurrence
//! matrices classified by a small convolutional network.
//!
//! The crate is organised bottom-up:
//!
//! * [`imaging`] decodes images, recompresses JPEGs and draws synthetic samples;
//! * [`cooc`] turns an RGB raster into a `3 x B x B` co-occurrence tensor;
//! * [`net`] holds the network, its gradients and the optimizer;
//! * [`harness`] manages manifests, splits, training and the experiment protocols.

pub mod cooc;
pub mod error;
pub mod harness;
pub mod imaging;
pub mod net;
pub mod parallel;

pub use error::{Error, ErrorClass, Result};
