//! Self-correcting discriminator optimisation and consistency-preserving
//! losses for metric-discriminator GAN speech enhancement, at desk scale.

pub mod autonn;
pub mod cli;
pub mod check;
pub mod data;
pub mod dsp;
pub mod losses;
pub mod metrics;
pub mod surgery;
pub mod trainer;
