//! Importance-aware power allocation for image transmission over fading
//! channels, with an importance-weighted MSE metric and a link-level
//! Monte Carlo harness.
//!
//! An image is split into bit streams by bit plane, by semantic segment or
//! by both ([`partitioner`]); each stream gets an importance weight. The
//! [`allocator`] distributes a power budget across streams by waterfilling
//! on an exponential BER model, [`phy`] transmits the streams, and
//! [`metrics`] scores the reconstruction.

pub mod allocator;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod partitioner;
pub mod phy;
pub mod pixel_source;
pub mod scene;

pub use error::{Error, Result};
