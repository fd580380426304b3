//! Sample paths of the limiting mean-field process.
//!
//! Given the mean/variance solution, each slot `(a, p)` follows the linear
//! SDE `dX = (F^a(t) X + f^a(t)) dt + sigma^a dW`, integrated with
//! Euler–Maruyama on the same grid as the network.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::meanfield::{step_count, LinearCoefficients, MeanFieldSolution};
use crate::model::{ModelParams, NeuronIndex};
use crate::moments::GaussianParams;
use crate::network::BLOW_UP_THRESHOLD;
use crate::noise::NoiseStream;
use crate::paths::PathEnsemble;

/// Linear SDE coefficients tabulated on an Euler–Maruyama grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    dt: f64,
    t_end: f64,
    /// `coeffs[k][a]` holds `(F^a, f^a)` at `t = k dt`.
    coeffs: Vec<Vec<LinearCoefficients>>,
    sigma: Vec<f64>,
    slot_pop: Vec<usize>,
    group_sizes: Vec<usize>,
    x_ini: Vec<f64>,
    initial_variance: Vec<f64>,
}

impl CoefficientTable {
    /// Freezes the coefficients of `solution` on the grid `k dt`.
    pub fn from_solution(solution: &MeanFieldSolution, t_end: f64, dt: f64) -> Result<Self> {
        let steps = step_count(t_end, dt)?;
        if solution.t_end() + 1e-9 * t_end.max(1.0) < t_end {
            return Err(Error::GridMismatch(format!(
                "mean-field solution ends at {} but paths need {t_end}",
                solution.t_end()
            )));
        }
        let coeffs = (0..=steps)
            .map(|k| {
                let t = if k == steps { t_end.min(solution.t_end()) } else { k as f64 * dt };
                solution.coefficients_at(t)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::assemble(solution.model().params(), coeffs, t_end, dt))
    }

    /// Time-independent coefficients, one pair per population.
    pub fn constant(
        params: &ModelParams,
        coefficients: Vec<LinearCoefficients>,
        t_end: f64,
        dt: f64,
    ) -> Result<Self> {
        if coefficients.len() != params.num_populations() {
            return Err(Error::Domain("one coefficient pair per population is required".into()));
        }
        let steps = step_count(t_end, dt)?;
        Ok(Self::assemble(params, vec![coefficients; steps + 1], t_end, dt))
    }

    fn assemble(params: &ModelParams, coeffs: Vec<Vec<LinearCoefficients>>, t_end: f64, dt: f64) -> Self {
        let p = params.num_populations();
        CoefficientTable {
            dt,
            t_end,
            coeffs,
            sigma: (0..p).map(|a| params.sigma(a)).collect(),
            slot_pop: params.slot_populations(),
            group_sizes: params.raw().group_sizes.clone(),
            x_ini: params.x_ini_slots().to_vec(),
            initial_variance: (0..p).map(|a| params.initial_variance(a)).collect(),
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn steps(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps() {
            self.t_end
        } else {
            k as f64 * self.dt
        }
    }

    pub fn coefficients(&self, k: usize) -> &[LinearCoefficients] {
        &self.coeffs[k]
    }

    /// Slots of one path, population-major.
    pub fn width(&self) -> usize {
        self.slot_pop.len()
    }

    /// Addresses of the slots of path `group`.
    pub fn slot_indices(&self, group: i64) -> Vec<NeuronIndex> {
        self.group_sizes
            .iter()
            .enumerate()
            .flat_map(|(a, &s)| {
                let s = s as i64;
                (-s..=s).map(move |p| NeuronIndex::new(group, a, p))
            })
            .collect()
    }

    pub fn streams(&self, seed: u64, group: i64) -> Vec<NoiseStream> {
        self.slot_indices(group)
            .into_iter()
            .map(|idx| NoiseStream::for_neuron(seed, idx))
            .collect()
    }
}

/// Integrates the slots of one path, calling `visit(k, values)` at every
/// grid index `k` (including `k = 0`).
pub struct PathStepper<'a> {
    table: &'a CoefficientTable,
    values: Vec<f64>,
    step: usize,
    substeps: u32,
}

impl<'a> PathStepper<'a> {
    pub fn new(table: &'a CoefficientTable, streams: &mut [NoiseStream]) -> Self {
        let values = table
            .x_ini
            .iter()
            .zip(&table.slot_pop)
            .zip(streams.iter_mut())
            .map(|((&x, &a), stream)| {
                let q0 = table.initial_variance[a];
                if q0 > 0.0 {
                    x + q0.sqrt() * stream.next_normal()
                } else {
                    x
                }
            })
            .collect();
        PathStepper {
            table,
            values,
            step: 0,
            substeps: 1,
        }
    }

    pub fn with_substeps(mut self, substeps: u32) -> Self {
        self.substeps = substeps.max(1);
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn advance(&mut self, streams: &mut [NoiseStream]) -> Result<()> {
        let k = self.step;
        if k >= self.table.steps() {
            return Err(Error::TimeOutOfRange {
                t: self.table.time(k) + self.table.dt,
                horizon: self.table.t_end,
            });
        }
        let dt = self.table.dt;
        let coeffs = &self.table.coeffs[k];
        for ((x, &a), stream) in self.values.iter_mut().zip(&self.table.slot_pop).zip(streams.iter_mut()) {
            let c = coeffs[a];
            *x = *x + (c.slope * *x + c.forcing) * dt + self.table.sigma[a] * stream.increment(dt, self.substeps);
        }
        self.step += 1;
        if let Some(&bad) = self
            .values
            .iter()
            .find(|x| !x.is_finite() || x.abs() > BLOW_UP_THRESHOLD)
        {
            return Err(Error::BlowUp {
                step: self.step,
                time: self.table.time(self.step),
                value: bad.abs(),
            });
        }
        Ok(())
    }
}

/// Runs path `group` over the whole grid.
pub fn run_path(
    table: &CoefficientTable,
    seed: u64,
    group: i64,
    mut visit: impl FnMut(usize, &[f64]),
) -> Result<()> {
    let mut streams = table.streams(seed, group);
    let mut stepper = PathStepper::new(table, &mut streams);
    visit(0, stepper.values());
    for k in 1..=table.steps() {
        stepper.advance(&mut streams)?;
        visit(k, stepper.values());
    }
    Ok(())
}

/// Full trajectories of `count` paths (path `k` is labelled as group `k`).
pub fn sample_ensemble(table: &CoefficientTable, seed: u64, count: usize, record_every: usize) -> Result<PathEnsemble> {
    let record_every = record_every.max(1);
    let steps = table.steps();
    let recorded: Vec<usize> = (0..=steps)
        .filter(|k| k % record_every == 0 || *k == steps)
        .collect();
    let per_path: Vec<Vec<f64>> = (0..count)
        .into_par_iter()
        .map(|g| {
            let mut rows = Vec::with_capacity(recorded.len() * table.width());
            run_path(table, seed, g as i64, |k, v| {
                if k % record_every == 0 || k == steps {
                    rows.extend_from_slice(v);
                }
            })?;
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let columns = (0..count as i64).flat_map(|g| table.slot_indices(g)).collect();
    let mut ensemble = PathEnsemble::new(columns);
    let w = table.width();
    for (r, &k) in recorded.iter().enumerate() {
        ensemble.push_row(
            table.time(k),
            per_path.iter().flat_map(|rows| rows[r * w..(r + 1) * w].iter().copied()),
        );
    }
    Ok(ensemble)
}

/// Sampled trajectories of the mean-field process for a run.
pub fn sample_paths(solution: &MeanFieldSolution, count: usize, run: &RunConfig) -> Result<PathEnsemble> {
    run.validate()?;
    let table = CoefficientTable::from_solution(solution, run.t_end, run.dt)?;
    sample_ensemble(&table, run.seed, count, run.record_every)
}

/// Values of every slot of `count` paths at the requested grid indices:
/// `result[time][path][slot]`.
pub fn snapshots(table: &CoefficientTable, seed: u64, count: usize, at_steps: &[usize]) -> Result<Vec<Vec<Vec<f64>>>> {
    if let Some(&k) = at_steps.iter().find(|&&k| k > table.steps()) {
        return Err(Error::TimeOutOfRange {
            t: k as f64 * table.dt(),
            horizon: table.t_end(),
        });
    }
    let per_path: Vec<Vec<Vec<f64>>> = (0..count)
        .into_par_iter()
        .map(|g| {
            let mut out = vec![Vec::new(); at_steps.len()];
            run_path(table, seed, g as i64, |k, v| {
                for (slot, &target) in out.iter_mut().zip(at_steps) {
                    if k == target {
                        *slot = v.to_vec();
                    }
                }
            })?;
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok((0..at_steps.len())
        .map(|i| per_path.iter().map(|p| p[i].clone()).collect())
        .collect())
}

/// `sup_t max_slot |X_t|` of each of `count` paths.
pub fn sup_norms(table: &CoefficientTable, seed: u64, count: usize) -> Result<Vec<f64>> {
    (0..count)
        .into_par_iter()
        .map(|g| {
            let mut sup = 0.0_f64;
            run_path(table, seed, g as i64, |_, v| {
                for x in v {
                    sup = sup.max(x.abs());
                }
            })?;
            Ok(sup)
        })
        .collect()
}

/// Exact one-time marginal of the limit law: independent Gaussians per slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalLaw {
    pub t: f64,
    pub slots: Vec<NeuronIndex>,
    pub laws: Vec<GaussianParams>,
}

impl MarginalLaw {
    /// Covariance between slots `i` and `j`; distinct slots are uncorrelated.
    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.laws[i].variance
        } else {
            0.0
        }
    }
}

pub fn marginal_law(solution: &MeanFieldSolution, t: f64) -> Result<MarginalLaw> {
    let state = solution.state_at(t)?;
    let params = solution.model().params();
    let mut slots = Vec::new();
    let mut laws = Vec::new();
    for a in 0..params.num_populations() {
        let s = params.group_size(a) as i64;
        for p in -s..=s {
            slots.push(NeuronIndex::new(0, a, p));
            laws.push(GaussianParams {
                mean: state.m[a],
                variance: state.q[a],
            });
        }
    }
    Ok(MarginalLaw { t, slots, laws })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::MeanField;
    use crate::model::reference_two_population;
    use crate::quadrature::QuadratureRule;

    fn solution(t_end: f64, dt: f64) -> MeanFieldSolution {
        MeanField::new(reference_two_population(), QuadratureRule::default())
            .solve(t_end, dt)
            .unwrap()
    }

    #[test]
    fn table_matches_solution_on_grid() {
        let sol = solution(1.0, 0.01);
        let table = CoefficientTable::from_solution(&sol, 1.0, 0.01).unwrap();
        assert_eq!(table.steps(), 100);
        assert_eq!(table.coefficients(40), sol.coefficients_at(0.4).unwrap().as_slice());
        assert!(CoefficientTable::from_solution(&sol, 2.0, 0.01).is_err());
    }

    #[test]
    fn marginal_at_zero_is_point_mass() {
        let sol = solution(1.0, 0.01);
        let law = marginal_law(&sol, 0.0).unwrap();
        assert_eq!(law.laws[0], GaussianParams { mean: 0.2, variance: 0.0 });
        assert_eq!(law.laws[1], GaussianParams { mean: -0.35, variance: 0.0 });
        assert_eq!(law.covariance(0, 1), 0.0);
        assert!(marginal_law(&sol, 1.5).is_err());
    }

    #[test]
    fn ensemble_layout_and_determinism() {
        let sol = solution(0.5, 0.01);
        let table = CoefficientTable::from_solution(&sol, 0.5, 0.01).unwrap();
        let a = sample_ensemble(&table, 3, 4, 10).unwrap();
        let b = sample_ensemble(&table, 3, 4, 10).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
        assert_eq!(a.columns().len(), 8);
        assert_eq!(a.columns()[2], NeuronIndex::new(1, 0, 0));
        let snaps = snapshots(&table, 3, 4, &[0, 50]).unwrap();
        assert_eq!(snaps[1][1], a.row(5)[2..4].to_vec());
        assert!(snapshots(&table, 3, 4, &[51]).is_err());
    }
}
