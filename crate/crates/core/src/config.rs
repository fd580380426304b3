use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meanfield::step_count;
use crate::model::ModelParams;
use crate::quadrature::DEFAULT_ORDER;

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    /// Time horizon `T`.
    #[serde(alias = "T")]
    pub t_end: f64,
    /// Euler–Maruyama step, shared by network and mean-field paths.
    pub dt: f64,
    /// Step of the mean/variance ODE solve; defaults to `dt`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ode_dt: Option<f64>,
    /// Group half-count: the network has `2n + 1` groups.
    #[serde(default)]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    /// Number of sampled mean-field paths.
    #[serde(default = "one")]
    pub samples: usize,
    #[serde(default = "default_order")]
    pub quadrature_order: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Store every `record_every`-th grid point of network trajectories.
    #[serde(default = "one")]
    pub record_every: usize,
    /// Groups whose neurons are stored; all groups when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stored_groups: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converge: Option<ConvergeConfig>,
}

fn one() -> usize {
    1
}

fn default_order() -> usize {
    DEFAULT_ORDER
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    #[serde(default = "default_ladder")]
    pub ladder: Vec<usize>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    /// Re-run the smallest `n` with the step halved on the same Brownian path.
    #[serde(default)]
    pub refinement_check: bool,
    /// Number of evenly spaced times at which marginal W1 is reported.
    #[serde(default = "default_w1_times")]
    pub w1_times: usize,
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        ConvergeConfig {
            ladder: default_ladder(),
            replications: default_replications(),
            refinement_check: false,
            w1_times: default_w1_times(),
        }
    }
}

fn default_ladder() -> Vec<usize> {
    vec![10, 50, 250]
}

fn default_replications() -> usize {
    100
}

fn default_w1_times() -> usize {
    10
}

impl RunConfig {
    pub fn new(model: ModelParams, t_end: f64, dt: f64) -> Self {
        RunConfig {
            model,
            t_end,
            dt,
            ode_dt: None,
            n: 0,
            seed: 0,
            samples: 1,
            quadrature_order: DEFAULT_ORDER,
            output_dir: None,
            record_every: 1,
            stored_groups: None,
            converge: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::invalid("t_end", "must be positive and finite"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("dt", "must be positive and finite"));
        }
        if self.dt > self.t_end {
            return Err(Error::invalid("dt", "must not exceed t_end"));
        }
        step_count(self.t_end, self.dt)?;
        if let Some(h) = self.ode_dt {
            step_count(self.t_end, h).map_err(|e| match e {
                Error::InvalidParameter { message, .. } => Error::invalid("ode_dt", message),
                other => other,
            })?;
        }
        if self.samples < 1 {
            return Err(Error::invalid("samples", "must be at least 1"));
        }
        if self.quadrature_order < 2 {
            return Err(Error::invalid("quadrature_order", "must be at least 2"));
        }
        if self.record_every < 1 {
            return Err(Error::invalid("record_every", "must be at least 1"));
        }
        if let Some(groups) = &self.stored_groups {
            let n = self.n as i64;
            if let Some(g) = groups.iter().find(|&&g| g < -n || g > n) {
                return Err(Error::invalid("stored_groups", format!("group {g} outside [-{n}, {n}]")));
            }
        }
        if let Some(c) = &self.converge {
            if c.ladder.is_empty() {
                return Err(Error::invalid("converge.ladder", "must not be empty"));
            }
            if c.replications < 2 {
                return Err(Error::invalid(
                    "converge.replications",
                    "need at least 2 replications for a standard error",
                ));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        step_count(self.t_end, self.dt).expect("validated config")
    }

    pub fn ode_dt(&self) -> f64 {
        self.ode_dt.unwrap_or(self.dt)
    }
}
