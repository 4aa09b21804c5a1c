//! Simulation and supervised training of networks of antiferromagnetic
//! spiking neurons.
//!
//! - [`neuron`]: single-neuron dynamics and output voltage
//! - [`spikes`]: spike extraction from voltage traces
//! - [`network`]: coupled networks on a shared RK4 clock
//! - [`patterns`]: 5×5 symbols, training libraries and target times
//! - [`span`]: SPAN training of the input → output weights
//! - [`readout`]: multi-SPAN classification through a clocked coincidence layer
//! - [`calibration`], [`config`], [`metrics`], [`experiment`]: the harness

// `!(x > y)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod config;
pub mod error;
pub mod experiment;
pub mod integrator;
pub mod metrics;
pub mod network;
pub mod neuron;
pub mod patterns;
pub mod readout;
pub mod span;
pub mod spikes;
pub mod units;

pub use error::{Error, Result};
pub use network::{CouplingMatrix, DriveWaveform, Pulse, SimConfig, SimResult, StimulusPulse, KAPPA_0};
pub use neuron::{NeuronParams, NeuronState};
pub use spikes::SpikeEvent;
