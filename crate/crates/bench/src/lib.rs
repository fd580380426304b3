//! Fixtures shared by the benchmarks.

use wcchaos_core::noise::NoiseStream;
use wcchaos_core::{ModelParams, NetworkState};

/// A network state with values drawn around zero.
pub fn random_state(params: &ModelParams, n: usize, seed: u64) -> NetworkState {
    let mut stream = NoiseStream::new(seed, 0);
    let values = (0..params.layout(n).len()).map(|_| stream.next_normal()).collect();
    NetworkState { n, values, t: 0.0 }
}

/// Pairwise drift, the quadratic baseline the sufficient statistics replace.
pub fn pairwise_drift(params: &ModelParams, state: &NetworkState) -> Vec<f64> {
    let layout = params.layout(state.n);
    let pops: Vec<usize> = (0..state.values.len())
        .map(|k| layout.unflatten(k).expect("in range").population)
        .collect();
    let s: Vec<f64> = state.values.iter().map(|&x| params.sigmoid().value(x)).collect();
    let norm = 1.0 / (2 * state.n + 1) as f64;
    state
        .values
        .iter()
        .zip(&pops)
        .map(|(&x, &a)| {
            let coupling: f64 = state
                .values
                .iter()
                .zip(&pops)
                .zip(&s)
                .map(|((&y, &b), &sy)| params.coupling(a, b) * (x - y) * sy)
                .sum();
            -x / params.tau() + params.input(a).at(state.t) + norm * coupling
        })
        .collect()
}
