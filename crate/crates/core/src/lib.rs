//! Simulator-to-real unsupervised domain adaptation for multi-modal
//! (kinematic + visual) gesture segment classification.
//!
//! Kinematics are turned into unit motion-direction sequences ([`mdok`]),
//! both modalities are embedded by multi-scale temporal relation encoders
//! ([`relation`]), fused into a co-occurrence feature ([`fusion`]), and
//! aligned across domains with gradient-reversal discriminators
//! ([`adversarial`]) while a λ-mixed classifier is trained on simulator
//! labels only ([`train`]). [`synth`] provides a paired two-domain benchmark
//! with controllable shifts.

pub mod adversarial;
pub mod data;
pub mod error;
pub mod experiment;
pub mod fusion;
pub mod mdok;
pub mod metrics;
pub mod optim;
pub mod params;
pub mod relation;
pub mod rng;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
