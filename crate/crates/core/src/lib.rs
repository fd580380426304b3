//! Simulation of a Wilson–Cowan network with electrical coupling and of its
//! mean-field limit.
//!
//! The network has `2n + 1` groups, each holding `2 s_a + 1` neurons of every
//! population `a`. As `n` grows, each neuron converges to an independent copy
//! of a Gaussian process whose mean and variance solve a closed ODE system.

pub mod config;
pub mod error;
pub mod meanfield;
pub mod metrics;
pub mod model;
pub mod moments;
pub mod network;
pub mod noise;
pub mod output;
pub mod paths;
pub mod quadrature;
pub mod sampler;
pub mod sigmoid;

pub use config::{ConvergeConfig, RunConfig};
pub use error::{Error, Result};
pub use meanfield::{LinearCoefficients, MeanField, MeanFieldSolution, MeanFieldState};
pub use metrics::{
    borell_delta, convergence_study, coupled_distance, tail_decay_fit, w1_marginal, ConvergenceReport,
    CoupledDistance, TailFit, W1Reference,
};
pub use model::{reference_two_population, InputCurrent, Layout, ModelParams, NeuronIndex, RawModelParams};
pub use moments::{s_moment, xs_moment, GaussianParams};
pub use network::{coupling_stats, drift, em_step, simulate, CouplingStats, NetworkSimulator, NetworkState};
pub use noise::NoiseStream;
pub use paths::PathEnsemble;
pub use quadrature::QuadratureRule;
pub use sampler::{marginal_law, sample_paths, CoefficientTable, MarginalLaw};
pub use sigmoid::{SigmoidBounds, SigmoidSpec, TabulatedSigmoid};
