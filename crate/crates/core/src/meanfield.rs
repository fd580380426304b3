//! Mean and variance equations of the Gaussian mean-field limit.
//!
//! For every population `a` the limit law is Gaussian with mean `m^a` and
//! variance `q^a`; slots are uncorrelated. The pair evolves as
//!
//! ```text
//! dm^a/dt = F^a(m, q) m^a + f^a(t, m, q)
//! dq^a/dt = 2 F^a(m, q) q^a + (sigma^a)^2
//! F^a     = -1/tau + Σ_b (2 s_b + 1) J^{ab} E[S(Y_b)]
//! f^a     = I^a(t) - Σ_b (2 s_b + 1) J^{ab} E[Y_b S(Y_b)]
//! ```
//!
//! with `Y_b ~ N(m^b, q^b)`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::moments::{s_moment_unchecked, xs_moment_unchecked};
use crate::output::{fmt_f64, write_rows};
use crate::quadrature::QuadratureRule;

/// Tolerance below zero at which a variance is clamped rather than rejected.
pub const VARIANCE_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldState {
    pub m: Vec<f64>,
    pub q: Vec<f64>,
}

impl MeanFieldState {
    pub fn new(m: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if m.len() != q.len() {
            return Err(Error::Domain("mean and variance lengths differ".into()));
        }
        if m.iter().chain(&q).any(|v| !v.is_finite()) {
            return Err(Error::Domain("mean-field state must be finite".into()));
        }
        if q.iter().any(|&v| v < 0.0) {
            return Err(Error::Domain("variances must be non-negative".into()));
        }
        Ok(MeanFieldState { m, q })
    }

    pub fn initial(params: &ModelParams) -> Self {
        let p = params.num_populations();
        MeanFieldState {
            m: (0..p).map(|a| params.x_ini(a)).collect(),
            q: (0..p).map(|a| params.initial_variance(a)).collect(),
        }
    }

    pub fn populations(&self) -> usize {
        self.m.len()
    }

    /// `‖m‖ + ‖q‖` in the sup norm.
    pub fn norm(&self) -> f64 {
        let sup = |v: &[f64]| v.iter().fold(0.0, |a, x| f64::max(a, x.abs()));
        sup(&self.m) + sup(&self.q)
    }

    fn axpy(&self, h: f64, d: &MeanFieldState) -> MeanFieldState {
        MeanFieldState {
            m: self.m.iter().zip(&d.m).map(|(x, dx)| x + h * dx).collect(),
            q: self.q.iter().zip(&d.q).map(|(x, dx)| x + h * dx).collect(),
        }
    }
}

/// The mean-field right-hand side for one parameter set.
#[derive(Debug, Clone)]
pub struct MeanField {
    params: ModelParams,
    rule: QuadratureRule,
    weights: Vec<Vec<f64>>,
}

/// Linear SDE coefficients `(F^a, f^a)` of one population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearCoefficients {
    pub slope: f64,
    pub forcing: f64,
}

impl MeanField {
    pub fn new(params: ModelParams, rule: QuadratureRule) -> Self {
        let p = params.num_populations();
        // (2 s_b + 1) J^{ab}
        let weights = (0..p)
            .map(|a| (0..p).map(|b| params.slots(b) as f64 * params.coupling(a, b)).collect())
            .collect();
        MeanField {
            params,
            rule,
            weights,
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    fn moments(&self, state: &MeanFieldState) -> (Vec<f64>, Vec<f64>) {
        let spec = self.params.sigmoid();
        state
            .m
            .iter()
            .zip(&state.q)
            .map(|(&m, &q)| {
                (
                    s_moment_unchecked(m, q, spec, &self.rule),
                    xs_moment_unchecked(m, q, spec, &self.rule),
                )
            })
            .unzip()
    }

    fn check_population(&self, population: usize) -> Result<()> {
        let count = self.params.num_populations();
        if population >= count {
            return Err(Error::PopulationOutOfRange {
                index: population,
                count,
            });
        }
        Ok(())
    }

    /// Linear coefficient `F^a(m, q)`.
    pub fn f_bar_coeff(&self, state: &MeanFieldState, population: usize) -> Result<f64> {
        self.check_population(population)?;
        let (s, _) = self.moments(state);
        Ok(self.slope(&s, population))
    }

    /// Forcing term `f^a(t, m, q)`.
    pub fn f_bar_forcing(&self, t: f64, state: &MeanFieldState, population: usize) -> Result<f64> {
        self.check_population(population)?;
        let (_, xs) = self.moments(state);
        Ok(self.forcing(t, &xs, population))
    }

    #[inline]
    fn slope(&self, s: &[f64], a: usize) -> f64 {
        let coupling: f64 = self.weights[a].iter().zip(s).map(|(w, s)| w * s).sum();
        -1.0 / self.params.tau() + coupling
    }

    #[inline]
    fn forcing(&self, t: f64, xs: &[f64], a: usize) -> f64 {
        let coupling: f64 = self.weights[a].iter().zip(xs).map(|(w, x)| w * x).sum();
        self.params.input(a).at(t) - coupling
    }

    /// `(F^a, f^a)` for every population.
    pub fn coefficients(&self, t: f64, state: &MeanFieldState) -> Vec<LinearCoefficients> {
        let (s, xs) = self.moments(state);
        (0..self.params.num_populations())
            .map(|a| LinearCoefficients {
                slope: self.slope(&s, a),
                forcing: self.forcing(t, &xs, a),
            })
            .collect()
    }

    /// Time derivative of `(m, q)`.
    pub fn rhs(&self, t: f64, state: &MeanFieldState) -> MeanFieldState {
        let coeffs = self.coefficients(t, state);
        let mut d = MeanFieldState {
            m: Vec::with_capacity(coeffs.len()),
            q: Vec::with_capacity(coeffs.len()),
        };
        for (a, c) in coeffs.iter().enumerate() {
            let sigma = self.params.sigma(a);
            d.m.push(c.slope * state.m[a] + c.forcing);
            d.q.push(2.0 * c.slope * state.q[a] + sigma * sigma);
        }
        d
    }

    fn rk4_step(&self, t: f64, y: &MeanFieldState, h: f64) -> MeanFieldState {
        let k1 = self.rhs(t, y);
        let k2 = self.rhs(t + 0.5 * h, &y.axpy(0.5 * h, &k1));
        let k3 = self.rhs(t + 0.5 * h, &y.axpy(0.5 * h, &k2));
        let k4 = self.rhs(t + h, &y.axpy(h, &k3));
        let combine = |x: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
            (0..x.len())
                .map(|i| x[i] + h / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]))
                .collect()
        };
        MeanFieldState {
            m: combine(&y.m, &k1.m, &k2.m, &k3.m, &k4.m),
            q: combine(&y.q, &k1.q, &k2.q, &k3.q, &k4.q),
        }
    }

    /// Integrates from the model's initial condition over `[0, t_end]` with
    /// classical fixed-step RK4.
    pub fn solve(&self, t_end: f64, dt: f64) -> Result<MeanFieldSolution> {
        self.solve_from(MeanFieldState::initial(&self.params), t_end, dt)
    }

    pub fn solve_from(&self, initial: MeanFieldState, t_end: f64, dt: f64) -> Result<MeanFieldSolution> {
        let steps = step_count(t_end, dt)?;
        if initial.populations() != self.params.num_populations() {
            return Err(Error::Domain("initial state has the wrong number of populations".into()));
        }
        let mut times = Vec::with_capacity(steps + 1);
        let mut states = Vec::with_capacity(steps + 1);
        times.push(0.0);
        states.push(initial);
        for k in 0..steps {
            let t = k as f64 * dt;
            let mut next = self.rk4_step(t, &states[k], dt);
            let time = if k + 1 == steps { t_end } else { (k + 1) as f64 * dt };
            if next.m.iter().chain(&next.q).any(|v| !v.is_finite()) {
                return Err(Error::Integration {
                    step: k + 1,
                    time,
                    reason: "non-finite state".into(),
                });
            }
            for q in next.q.iter_mut() {
                if *q < -VARIANCE_CLAMP {
                    return Err(Error::Integration {
                        step: k + 1,
                        time,
                        reason: format!("variance {q} below zero"),
                    });
                }
                if *q < 0.0 {
                    *q = 0.0;
                }
            }
            times.push(time);
            states.push(next);
        }
        Ok(MeanFieldSolution {
            model: self.clone(),
            dt,
            times,
            states,
        })
    }
}

/// Number of steps of size `dt` covering `[0, t_end]`; `t_end / dt` must be
/// an integer up to rounding.
pub fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", "must be positive and finite"));
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::invalid("t_end", "must be non-negative and finite"));
    }
    let ratio = t_end / dt;
    let steps = ratio.round();
    if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::invalid(
            "dt",
            format!("t_end / dt = {ratio} is not an integer"),
        ));
    }
    Ok(steps as usize)
}

#[derive(Debug, Clone)]
pub struct MeanFieldSolution {
    model: MeanField,
    dt: f64,
    times: Vec<f64>,
    states: Vec<MeanFieldState>,
}

impl MeanFieldSolution {
    pub fn model(&self) -> &MeanField {
        &self.model
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[MeanFieldState] {
        &self.states
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("solution has at least one point")
    }

    pub fn last(&self) -> &MeanFieldState {
        self.states.last().expect("solution has at least one point")
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let horizon = self.t_end();
        if !(0.0..=horizon).contains(&t) {
            return Err(Error::TimeOutOfRange { t, horizon });
        }
        Ok(())
    }

    /// State at `t`, linearly interpolated between grid points.
    pub fn state_at(&self, t: f64) -> Result<MeanFieldState> {
        self.check_time(t)?;
        let last = self.times.len() - 1;
        if last == 0 {
            return Ok(self.states[0].clone());
        }
        let k = ((t / self.dt).floor() as usize).min(last - 1);
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        if w == 0.0 {
            return Ok(self.states[k].clone());
        }
        if w == 1.0 {
            return Ok(self.states[k + 1].clone());
        }
        let (a, b) = (&self.states[k], &self.states[k + 1]);
        let lerp = |x: &[f64], y: &[f64]| -> Vec<f64> {
            x.iter().zip(y).map(|(x, y)| x + w * (y - x)).collect()
        };
        Ok(MeanFieldState {
            m: lerp(&a.m, &b.m),
            q: lerp(&a.q, &b.q),
        })
    }

    /// `(F^a(t), f^a(t))` at the interpolated state.
    pub fn coefficients_at(&self, t: f64) -> Result<Vec<LinearCoefficients>> {
        let state = self.state_at(t)?;
        Ok(self.model.coefficients(t, &state))
    }

    /// `sup_t max_a q^a(t)` over the grid.
    pub fn max_variance(&self) -> f64 {
        self.states
            .iter()
            .flat_map(|s| s.q.iter().copied())
            .fold(0.0, f64::max)
    }

    /// CSV with columns `t, m_1..m_P, q_1..q_P`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let p = self.model.params.num_populations();
        let mut header = vec!["t".to_string()];
        header.extend((1..=p).map(|a| format!("m_{a}")));
        header.extend((1..=p).map(|a| format!("q_{a}")));
        let rows = self.times.iter().zip(&self.states).map(|(t, s)| {
            std::iter::once(*t)
                .chain(s.m.iter().copied())
                .chain(s.q.iter().copied())
                .map(fmt_f64)
                .collect::<Vec<_>>()
        });
        write_rows(out, &header, rows)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}
