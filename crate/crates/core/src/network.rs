//! Finite network of `2n + 1` groups with all-to-all electrical coupling,
//! integrated with Euler–Maruyama.
//!
//! The coupling felt by neuron `(i, a, p)` is
//!
//! ```text
//! (2n+1)^{-1} Σ_{j,b,q} J^{ab} (x - X^{j,b,q}) S(X^{j,b,q})
//!     = (2n+1)^{-1} Σ_b J^{ab} (x A_b - B_b)
//! ```
//!
//! with per-population sums `A_b = Σ S(X)` and `B_b = Σ X S(X)`, so one step
//! costs O(N) rather than O(N²).

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::model::{Layout, ModelParams, NeuronIndex};
use crate::noise::NoiseStream;
use crate::paths::PathEnsemble;

/// States with `|x|` above this are treated as a blow-up.
pub const BLOW_UP_THRESHOLD: f64 = 1e8;

/// Groups per partial sum in the coupling reduction. Partial sums are always
/// combined in the same order, so the result does not depend on threading.
const REDUCTION_CHUNK_GROUPS: usize = 64;

/// Below this many neurons the update runs on the calling thread.
const PARALLEL_MIN_NEURONS: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub n: usize,
    pub values: Vec<f64>,
    pub t: f64,
}

/// Per-population sufficient statistics of the coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingStats {
    /// `A_b = Σ_{j,q} S(X^{j,b,q})`
    pub a: Vec<f64>,
    /// `B_b = Σ_{j,q} X^{j,b,q} S(X^{j,b,q})`
    pub b: Vec<f64>,
}

fn chunk_stats(
    chunk: &[f64],
    slot_pop: &[usize],
    populations: usize,
    params: &ModelParams,
) -> (Vec<f64>, Vec<f64>) {
    let spec = params.sigmoid();
    let mut a = vec![0.0; populations];
    let mut b = vec![0.0; populations];
    for group in chunk.chunks_exact(slot_pop.len()) {
        for (&x, &pop) in group.iter().zip(slot_pop) {
            let s = spec.value(x);
            a[pop] += s;
            b[pop] += x * s;
        }
    }
    (a, b)
}

fn stats_of(params: &ModelParams, values: &[f64], slot_pop: &[usize]) -> CouplingStats {
    let p = params.num_populations();
    let chunk_len = REDUCTION_CHUNK_GROUPS * slot_pop.len();
    let partials: Vec<(Vec<f64>, Vec<f64>)> = if values.len() >= PARALLEL_MIN_NEURONS {
        values
            .par_chunks(chunk_len)
            .map(|c| chunk_stats(c, slot_pop, p, params))
            .collect()
    } else {
        values
            .chunks(chunk_len)
            .map(|c| chunk_stats(c, slot_pop, p, params))
            .collect()
    };
    let mut stats = CouplingStats {
        a: vec![0.0; p],
        b: vec![0.0; p],
    };
    for (a, b) in partials {
        for k in 0..p {
            stats.a[k] += a[k];
            stats.b[k] += b[k];
        }
    }
    stats
}

/// Sufficient statistics of a network state.
pub fn coupling_stats(params: &ModelParams, state: &NetworkState) -> Result<CouplingStats> {
    check_state(params, state)?;
    Ok(stats_of(params, &state.values, &params.slot_populations()))
}

/// Drift of every neuron, assembled from the sufficient statistics.
pub fn drift(params: &ModelParams, state: &NetworkState) -> Result<Vec<f64>> {
    check_state(params, state)?;
    let slot_pop = params.slot_populations();
    let stats = stats_of(params, &state.values, &slot_pop);
    let lin = LinearDrift::new(params, &stats, state.n, state.t);
    Ok(state
        .values
        .chunks_exact(slot_pop.len())
        .flat_map(|g| g.iter().zip(&slot_pop).map(|(&x, &a)| lin.eval(a, x)))
        .collect())
}

fn check_state(params: &ModelParams, state: &NetworkState) -> Result<()> {
    let expected = params.layout(state.n).len();
    if state.values.len() != expected {
        return Err(Error::Domain(format!(
            "state has {} values, layout with n = {} needs {expected}",
            state.values.len(),
            state.n
        )));
    }
    Ok(())
}

/// The drift is affine in the neuron's own value once the statistics are
/// known: `drift = x * slope[a] + offset[a]`.
struct LinearDrift {
    slope: Vec<f64>,
    offset: Vec<f64>,
}

impl LinearDrift {
    fn new(params: &ModelParams, stats: &CouplingStats, n: usize, t: f64) -> Self {
        let p = params.num_populations();
        let norm = 1.0 / (2 * n + 1) as f64;
        let mut slope = Vec::with_capacity(p);
        let mut offset = Vec::with_capacity(p);
        for a in 0..p {
            let (mut ja, mut jb) = (0.0, 0.0);
            for b in 0..p {
                let j = params.coupling(a, b);
                ja += j * stats.a[b];
                jb += j * stats.b[b];
            }
            slope.push(-1.0 / params.tau() + norm * ja);
            offset.push(params.input(a).at(t) - norm * jb);
        }
        LinearDrift { slope, offset }
    }

    #[inline]
    fn eval(&self, population: usize, x: f64) -> f64 {
        x * self.slope[population] + self.offset[population]
    }
}

/// Euler–Maruyama integrator owning the state and one noise stream per neuron.
#[derive(Debug, Clone)]
pub struct NetworkSimulator {
    params: ModelParams,
    layout: Layout,
    slot_pop: Vec<usize>,
    values: Vec<f64>,
    streams: Vec<NoiseStream>,
    step: usize,
    substeps: u32,
}

impl NetworkSimulator {
    /// Network at its initial condition with streams keyed by `seed` and
    /// each neuron's address.
    pub fn new(params: ModelParams, n: usize, seed: u64) -> Self {
        let layout = params.layout(n);
        let streams = (0..layout.len())
            .map(|k| NoiseStream::for_neuron(seed, layout.unflatten(k).expect("offset in range")))
            .collect();
        Self::with_streams(params, n, streams).expect("stream count matches layout")
    }

    /// Network driven by caller-supplied streams, in storage order.
    pub fn with_streams(params: ModelParams, n: usize, mut streams: Vec<NoiseStream>) -> Result<Self> {
        let layout = params.layout(n);
        if streams.len() != layout.len() {
            return Err(Error::Domain(format!(
                "{} noise streams supplied for {} neurons",
                streams.len(),
                layout.len()
            )));
        }
        let slot_pop = params.slot_populations();
        let mut values = Vec::with_capacity(layout.len());
        for (k, stream) in streams.iter_mut().enumerate() {
            let local = k % slot_pop.len();
            let a = slot_pop[local];
            let q0 = params.initial_variance(a);
            let mut x = params.x_ini_slots()[local];
            if q0 > 0.0 {
                x += q0.sqrt() * stream.next_normal();
            }
            values.push(x);
        }
        Ok(NetworkSimulator {
            params,
            layout,
            slot_pop,
            values,
            streams,
            step: 0,
            substeps: 1,
        })
    }

    /// Builds each Brownian increment from `substeps` finer ones; see
    /// [`NoiseStream::increment`].
    pub fn with_substeps(mut self, substeps: u32) -> Self {
        self.substeps = substeps.max(1);
        self
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn streams(&self) -> &[NoiseStream] {
        &self.streams
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn state(&self, dt: f64) -> NetworkState {
        NetworkState {
            n: self.layout.n(),
            values: self.values.clone(),
            t: self.step as f64 * dt,
        }
    }

    /// Replaces the current values (noise streams keep their position).
    pub fn set_state(&mut self, state: &NetworkState, dt: f64) -> Result<()> {
        if state.values.len() != self.values.len() {
            return Err(Error::Domain("state size does not match the network".into()));
        }
        self.values.copy_from_slice(&state.values);
        self.step = (state.t / dt).round() as usize;
        Ok(())
    }

    /// Advances one step of size `dt` from `t = step * dt`.
    pub fn advance(&mut self, dt: f64) -> Result<()> {
        let t = self.step as f64 * dt;
        let stats = stats_of(&self.params, &self.values, &self.slot_pop);
        let lin = LinearDrift::new(&self.params, &stats, self.layout.n(), t);
        let sigma: Vec<f64> = (0..self.params.num_populations())
            .map(|a| self.params.sigma(a))
            .collect();
        let width = self.slot_pop.len();
        let slot_pop = &self.slot_pop;
        let substeps = self.substeps;
        let update = |(k, (x, stream)): (usize, (&mut f64, &mut NoiseStream))| {
            let a = slot_pop[k % width];
            let next = *x + lin.eval(a, *x) * dt + sigma[a] * stream.increment(dt, substeps);
            *x = next;
        };
        if self.values.len() >= PARALLEL_MIN_NEURONS {
            self.values
                .par_iter_mut()
                .zip(self.streams.par_iter_mut())
                .enumerate()
                .for_each(update);
        } else {
            self.values
                .iter_mut()
                .zip(self.streams.iter_mut())
                .enumerate()
                .for_each(update);
        }
        self.step += 1;
        if let Some(&bad) = self
            .values
            .iter()
            .find(|x| !x.is_finite() || x.abs() > BLOW_UP_THRESHOLD)
        {
            return Err(Error::BlowUp {
                step: self.step,
                time: self.step as f64 * dt,
                value: bad.abs(),
            });
        }
        Ok(())
    }

    pub fn value(&self, idx: NeuronIndex) -> Result<f64> {
        Ok(self.values[self.layout.flatten(idx)?])
    }
}

/// One Euler–Maruyama step from `state`, drawing from `streams` (storage order).
pub fn em_step(
    params: &ModelParams,
    state: &NetworkState,
    dt: f64,
    streams: &mut [NoiseStream],
) -> Result<NetworkState> {
    check_state(params, state)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", "must be positive and finite"));
    }
    if streams.len() != state.values.len() {
        return Err(Error::Domain("one noise stream per neuron is required".into()));
    }
    let slot_pop = params.slot_populations();
    let stats = stats_of(params, &state.values, &slot_pop);
    let lin = LinearDrift::new(params, &stats, state.n, state.t);
    let mut values = Vec::with_capacity(state.values.len());
    for (k, (&x, stream)) in state.values.iter().zip(streams.iter_mut()).enumerate() {
        let a = slot_pop[k % slot_pop.len()];
        values.push(x + lin.eval(a, x) * dt + params.sigma(a) * stream.increment(dt, 1));
    }
    let t = state.t + dt;
    if let Some(&bad) = values.iter().find(|x| !x.is_finite() || x.abs() > BLOW_UP_THRESHOLD) {
        return Err(Error::BlowUp {
            step: (t / dt).round() as usize,
            time: t,
            value: bad.abs(),
        });
    }
    Ok(NetworkState { n: state.n, values, t })
}

/// Runs the network over `[0, T]` and records the configured groups.
pub fn simulate(run: &RunConfig) -> Result<PathEnsemble> {
    run.validate()?;
    let mut sim = NetworkSimulator::new(run.model.clone(), run.n, run.seed);
    simulate_with(&mut sim, run)
}

/// Like [`simulate`] but with a prepared simulator (custom streams or
/// substeps).
pub fn simulate_with(sim: &mut NetworkSimulator, run: &RunConfig) -> Result<PathEnsemble> {
    let layout = sim.layout().clone();
    let stored: Vec<usize> = match &run.stored_groups {
        None => (0..layout.len()).collect(),
        Some(groups) => groups
            .iter()
            .flat_map(|&g| layout.group_indices(g))
            .map(|idx| layout.flatten(idx))
            .collect::<Result<_>>()?,
    };
    let columns = stored
        .iter()
        .map(|&k| layout.unflatten(k))
        .collect::<Result<Vec<_>>>()?;
    let mut paths = PathEnsemble::new(columns);
    let steps = run.steps();
    paths.push_row(0.0, stored.iter().map(|&k| sim.values()[k]));
    for k in 1..=steps {
        sim.advance(run.dt)?;
        if k % run.record_every == 0 || k == steps {
            let t = if k == steps { run.t_end } else { k as f64 * run.dt };
            paths.push_row(t, stored.iter().map(|&j| sim.values()[j]));
        }
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{reference_two_population, InputCurrent, RawModelParams};
    use crate::sigmoid::SigmoidSpec;

    #[test]
    fn stats_at_zero_state() {
        let mut raw = reference_two_population().raw().clone();
        raw.group_sizes = vec![1, 2];
        raw.x_ini = vec![0.0; 8];
        let params = ModelParams::new(raw).unwrap();
        let n = 3;
        let state = NetworkState {
            n,
            values: vec![0.0; params.layout(n).len()],
            t: 0.0,
        };
        let stats = coupling_stats(&params, &state).unwrap();
        assert_eq!(stats.a, vec![0.5 * 7.0 * 3.0, 0.5 * 7.0 * 5.0]);
        assert_eq!(stats.b, vec![0.0, 0.0]);
    }

    #[test]
    fn uncoupled_noiseless_fixed_point() {
        let params = ModelParams::new(RawModelParams {
            group_sizes: vec![0],
            tau: 2.0,
            sigma: vec![1e-300],
            coupling: vec![vec![0.0]],
            input: vec![InputCurrent::Constant(0.3)],
            x_ini: vec![0.6],
            initial_variance: None,
            sigmoid: SigmoidSpec::Logistic,
        })
        .unwrap();
        let mut sim = NetworkSimulator::new(params, 2, 0);
        for _ in 0..100 {
            sim.advance(0.01).unwrap();
        }
        assert!(sim.values().iter().all(|&x| (x - 0.6).abs() < 1e-12));
    }

    #[test]
    fn em_step_matches_simulator() {
        let params = reference_two_population();
        let mut sim = NetworkSimulator::new(params.clone(), 2, 5);
        let mut streams = sim.streams().to_vec();
        let s0 = sim.state(0.01);
        let s1 = em_step(&params, &s0, 0.01, &mut streams).unwrap();
        sim.advance(0.01).unwrap();
        assert_eq!(s1.values, sim.values());
        assert!((s1.t - 0.01).abs() < 1e-15);
    }

    #[test]
    fn blow_up_carries_step() {
        let mut raw = reference_two_population().raw().clone();
        raw.coupling = vec![vec![40.0, 0.0], vec![0.0, 40.0]];
        raw.x_ini = vec![3.0, 3.0];
        let params = ModelParams::new(raw).unwrap();
        let mut sim = NetworkSimulator::new(params, 1, 0);
        let mut err = None;
        for _ in 0..10_000 {
            if let Err(e) = sim.advance(0.01) {
                err = Some(e);
                break;
            }
        }
        assert!(matches!(err, Some(Error::BlowUp { step, .. }) if step > 0), "{err:?}");
    }

    #[test]
    fn state_size_is_checked() {
        let params = reference_two_population();
        let state = NetworkState {
            n: 1,
            values: vec![0.0; 5],
            t: 0.0,
        };
        assert!(coupling_stats(&params, &state).is_err());
    }
}
