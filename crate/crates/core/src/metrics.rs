//! Distances between the finite network and its mean-field limit.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::meanfield::MeanFieldSolution;
use crate::model::NeuronIndex;
use crate::network::NetworkSimulator;
use crate::noise::{combined_digest, replication_seed};
use crate::output::{fmt_f64, write_rows};
use crate::sampler::{CoefficientTable, PathStepper};

/// Group of the network compared with the mean-field path.
pub const TAGGED_GROUP: i64 = 0;

/// Outcome of one coupled replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledReplication {
    pub seed: u64,
    /// `sup_t max_{a,p} |X^{0,a,p}_t - Xbar^{0,a,p}_t|` over the grid.
    pub distance: f64,
    /// Digest of the noise consumed by the tagged network neurons.
    pub network_digest: u64,
    /// Digest of the noise consumed by the mean-field path.
    pub meanfield_digest: u64,
    /// Tagged-group network values at the requested probe steps,
    /// `probes[time][slot]`.
    pub probes: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledDistance {
    pub n: usize,
    pub estimate: f64,
    pub standard_error: f64,
    pub replications: Vec<CoupledReplication>,
}

impl CoupledDistance {
    pub fn distances(&self) -> Vec<f64> {
        self.replications.iter().map(|r| r.distance).collect()
    }

    pub fn digests_match(&self) -> bool {
        self.replications
            .iter()
            .all(|r| r.network_digest == r.meanfield_digest)
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.len() < 2 {
        return Err(Error::InsufficientData(
            "standard error needs at least two samples".into(),
        ));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Simulates the network and the mean-field paths of group 0 on shared
/// Brownian increments.
pub fn coupled_replication(
    run: &RunConfig,
    table: &CoefficientTable,
    n: usize,
    seed: u64,
    substeps: u32,
    probe_steps: &[usize],
) -> Result<CoupledReplication> {
    let steps = run.steps();
    if table.steps() != steps || (table.dt() - run.dt).abs() > 1e-12 * run.dt {
        return Err(Error::GridMismatch(format!(
            "coefficient grid ({} steps of {}) differs from the run ({steps} steps of {})",
            table.steps(),
            table.dt(),
            run.dt
        )));
    }
    let mut network = NetworkSimulator::new(run.model.clone(), n, seed).with_substeps(substeps);
    let layout = network.layout().clone();
    let tagged: Vec<usize> = layout
        .group_indices(TAGGED_GROUP)
        .into_iter()
        .map(|idx| layout.flatten(idx))
        .collect::<Result<_>>()?;
    let mut mf_streams = table.streams(seed, TAGGED_GROUP);
    let mut path = PathStepper::new(table, &mut mf_streams).with_substeps(substeps);

    let gap = |net: &[f64], mf: &[f64]| {
        tagged
            .iter()
            .zip(mf)
            .fold(0.0_f64, |m, (&k, &y)| m.max((net[k] - y).abs()))
    };
    let mut probes = vec![Vec::new(); probe_steps.len()];
    let mut record = |k: usize, net: &[f64]| {
        for (slot, &target) in probes.iter_mut().zip(probe_steps) {
            if k == target {
                *slot = tagged.iter().map(|&j| net[j]).collect();
            }
        }
    };
    let mut sup = gap(network.values(), path.values());
    record(0, network.values());
    for k in 1..=steps {
        network.advance(run.dt)?;
        path.advance(&mut mf_streams)?;
        sup = sup.max(gap(network.values(), path.values()));
        record(k, network.values());
    }
    let network_digest = combined_digest(tagged.iter().map(|&k| &network.streams()[k]));
    let meanfield_digest = combined_digest(mf_streams.iter());
    Ok(CoupledReplication {
        seed,
        distance: sup,
        network_digest,
        meanfield_digest,
        probes,
    })
}

/// `E[sup_t ‖X^0_t - Xbar^0_t‖]` estimated over independent replications.
/// Replication `r` uses seed `replication_seed(run.seed, r)`.
pub fn coupled_distance(
    run: &RunConfig,
    table: &CoefficientTable,
    n: usize,
    replications: usize,
) -> Result<CoupledDistance> {
    coupled_distance_with(run, table, n, replications, 1, &[])
}

pub fn coupled_distance_with(
    run: &RunConfig,
    table: &CoefficientTable,
    n: usize,
    replications: usize,
    substeps: u32,
    probe_steps: &[usize],
) -> Result<CoupledDistance> {
    if replications < 2 {
        return Err(Error::invalid(
            "replications",
            "need at least 2 replications for a standard error",
        ));
    }
    let reps = (0..replications as u64)
        .into_par_iter()
        .map(|r| coupled_replication(run, table, n, replication_seed(run.seed, r), substeps, probe_steps))
        .collect::<Result<Vec<_>>>()?;
    let distances: Vec<f64> = reps.iter().map(|r| r.distance).collect();
    let (estimate, standard_error) = mean_and_se(&distances)?;
    Ok(CoupledDistance {
        n,
        estimate,
        standard_error,
        replications: reps,
    })
}

/// Second argument of [`w1_marginal`].
#[derive(Debug, Clone, Copy)]
pub enum W1Reference<'a> {
    Sample(&'a [f64]),
    Gaussian { mean: f64, sd: f64 },
}

/// One-dimensional Wasserstein-1 distance between an empirical sample and a
/// second sample or an exact Gaussian.
pub fn w1_marginal(sample: &[f64], reference: W1Reference<'_>) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut a = sample.to_vec();
    a.sort_by(f64::total_cmp);
    match reference {
        W1Reference::Sample(other) => {
            if other.is_empty() {
                return Err(Error::EmptySample);
            }
            let mut b = other.to_vec();
            b.sort_by(f64::total_cmp);
            if a.len() == b.len() {
                let total: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
                Ok(total / a.len() as f64)
            } else {
                Ok(cdf_l1(&a, &b))
            }
        }
        W1Reference::Gaussian { mean, sd } => w1_to_gaussian(&a, mean, sd),
    }
}

/// `∫ |F_a(x) - F_b(x)| dx` for sorted samples.
fn cdf_l1(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut total = 0.0;
    let mut prev = a[0].min(b[0]);
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        total += (i as f64 / na - j as f64 / nb).abs() * (x - prev);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        prev = x;
    }
    total
}

/// `∫_0^1 |Q_n(u) - Q(u)| du` with the Gaussian quantile `Q`, integrated
/// exactly on each step of the empirical quantile function.
fn w1_to_gaussian(sorted: &[f64], mean: f64, sd: f64) -> Result<f64> {
    if !(sd >= 0.0 && sd.is_finite() && mean.is_finite()) {
        return Err(Error::Domain(format!("invalid gaussian reference N({mean}, {sd}^2)")));
    }
    let n = sorted.len() as f64;
    if sd == 0.0 {
        return Ok(sorted.iter().map(|x| (x - mean).abs()).sum::<f64>() / n);
    }
    let std = Normal::standard();
    // Antiderivative of Q: G(u) = mean u - sd φ(Φ^{-1}(u)).
    let g = |u: f64| -> f64 {
        if u <= 0.0 {
            0.0
        } else if u >= 1.0 {
            mean
        } else {
            mean * u - sd * std.pdf(std.inverse_cdf(u))
        }
    };
    let mut total = 0.0;
    for (k, &x) in sorted.iter().enumerate() {
        let (u0, u1) = (k as f64 / n, (k + 1) as f64 / n);
        let split = std.cdf((x - mean) / sd).clamp(u0, u1);
        let (g0, gs, g1) = (g(u0), g(split), g(u1));
        total += x * (split - u0) - (gs - g0) + (g1 - gs) - x * (u1 - split);
    }
    Ok(total)
}

/// Least-squares fit of `ln P(sup ≥ M)` against `M²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub slope: f64,
    pub intercept: f64,
    /// Smallest `M` with empirical survival at most [`BULK_SURVIVAL`].
    pub m0: f64,
    /// `(M, survival)` pairs used in the fit.
    pub points: Vec<(f64, f64)>,
    pub r_squared: f64,
}

impl TailFit {
    /// Decay rate `-slope`.
    pub fn delta(&self) -> f64 {
        -self.slope
    }
}

/// Survival level marking the end of the distribution bulk.
pub const BULK_SURVIVAL: f64 = 0.2;

/// Minimum exceedance count for a tail point to enter the fit.
pub const MIN_TAIL_COUNT: usize = 10;

/// Empirical survival `P(X ≥ m)` of a sorted sample.
fn survival(sorted: &[f64], m: f64) -> f64 {
    let below = sorted.partition_point(|&x| x < m);
    (sorted.len() - below) as f64 / sorted.len() as f64
}

/// Fits the tail of `sups` (sup-norms of sampled paths). With no grid, 12
/// evenly spaced levels from `M_0` to the level leaving [`MIN_TAIL_COUNT`]
/// exceedances are used.
pub fn tail_decay_fit(sups: &[f64], grid: Option<&[f64]>) -> Result<TailFit> {
    if sups.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sorted = sups.to_vec();
    sorted.sort_by(f64::total_cmp);
    let len = sorted.len();
    let m0_index = ((1.0 - BULK_SURVIVAL) * len as f64).ceil() as usize;
    if m0_index >= len {
        return Err(Error::InsufficientData("sample too small for a tail fit".into()));
    }
    let m0 = sorted[m0_index];
    let levels: Vec<f64> = match grid {
        Some(g) => g.to_vec(),
        None => {
            if len < MIN_TAIL_COUNT + 1 {
                return Err(Error::InsufficientData("sample too small for a tail fit".into()));
            }
            let top = sorted[len - MIN_TAIL_COUNT];
            (0..12).map(|k| m0 + (top - m0) * k as f64 / 11.0).collect()
        }
    };
    let points: Vec<(f64, f64)> = levels
        .into_iter()
        .filter(|&m| m >= m0)
        .map(|m| (m, survival(&sorted, m)))
        .filter(|&(_, p)| p * len as f64 >= MIN_TAIL_COUNT as f64)
        .collect();
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} usable tail levels, need 3",
            points.len()
        )));
    }
    let xs: Vec<f64> = points.iter().map(|(m, _)| m * m).collect();
    let ys: Vec<f64> = points.iter().map(|(_, p)| p.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("tail levels coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(TailFit {
        slope,
        intercept,
        m0,
        points,
        r_squared,
    })
}

/// `delta = 1 / (8 sup_t ‖Q(t)‖)` from a mean-field solution.
pub fn borell_delta(solution: &MeanFieldSolution) -> f64 {
    1.0 / (8.0 * solution.max_variance())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub estimate: f64,
    pub se: f64,
    pub reps: usize,
    pub seed_base: u64,
}

/// W1 between the tagged-group network values across replications and the
/// exact Gaussian marginal, at one time and one coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct W1Row {
    pub n: usize,
    pub t: f64,
    pub coordinate: String,
    pub w1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementCheck {
    pub n: usize,
    pub coarse_dt: f64,
    pub coarse_estimate: f64,
    pub fine_estimate: f64,
    pub relative_change: f64,
    pub accepted: bool,
}

/// Largest relative change of the coupled estimate allowed when the step is
/// halved on the same Brownian path.
pub const REFINEMENT_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub w1: Vec<W1Row>,
    pub replications: usize,
    pub seed_base: u64,
    /// Seeds of the replications, identical for every `n`.
    pub seeds: Vec<u64>,
    /// Least-squares slope of `ln estimate` against `ln n` (diagnostic only).
    pub log_log_slope: Option<f64>,
    pub refinement: Option<RefinementCheck>,
}

impl ConvergenceReport {
    /// True when estimates decrease along the ladder, each drop larger than
    /// twice the pooled standard error of the two estimates.
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| {
            let pooled = (w[0].se.powi(2) + w[1].se.powi(2)).sqrt();
            w[0].estimate - w[1].estimate > 2.0 * pooled
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let header: Vec<String> = ["n", "estimate", "se", "reps", "seed_base"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let rows = self.rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                fmt_f64(r.estimate),
                fmt_f64(r.se),
                r.reps.to_string(),
                r.seed_base.to_string(),
            ]
        });
        write_rows(out, &header, rows)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let csv = std::fs::File::create(dir.join("convergence.csv"))?;
        self.write_csv(std::io::BufWriter::new(csv))?;
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(dir.join("report.json"), json)?;
        Ok(())
    }
}

/// Runs the coupled-distance study over `ladder`.
pub fn convergence_study(
    run: &RunConfig,
    solution: &MeanFieldSolution,
    ladder: &[usize],
    replications: usize,
    w1_times: usize,
    refinement_check: bool,
) -> Result<ConvergenceReport> {
    if ladder.is_empty() {
        return Err(Error::invalid("converge.ladder", "must not be empty"));
    }
    let table = CoefficientTable::from_solution(solution, run.t_end, run.dt)?;
    let steps = run.steps();
    let probe_steps: Vec<usize> = (1..=w1_times).map(|k| k * steps / w1_times.max(1)).collect();
    let labels: Vec<NeuronIndex> = table.slot_indices(TAGGED_GROUP);

    let mut rows = Vec::new();
    let mut w1 = Vec::new();
    for &n in ladder {
        let result = coupled_distance_with(run, &table, n, replications, 1, &probe_steps)?;
        if !result.digests_match() {
            return Err(Error::Domain(format!(
                "network and mean-field paths consumed different noise at n = {n}"
            )));
        }
        for (i, &k) in probe_steps.iter().enumerate() {
            let t = table.time(k);
            let law = crate::sampler::marginal_law(solution, t)?;
            for (slot, label) in labels.iter().enumerate() {
                let sample: Vec<f64> = result.replications.iter().map(|r| r.probes[i][slot]).collect();
                let g = law.laws[slot];
                w1.push(W1Row {
                    n,
                    t,
                    coordinate: label.label(),
                    w1: w1_marginal(
                        &sample,
                        W1Reference::Gaussian {
                            mean: g.mean,
                            sd: g.variance.sqrt(),
                        },
                    )?,
                });
            }
        }
        rows.push(ConvergenceRow {
            n,
            estimate: result.estimate,
            se: result.standard_error,
            reps: replications,
            seed_base: run.seed,
        });
    }

    let log_log_slope = if rows.len() >= 2 && rows.iter().all(|r| r.estimate > 0.0) {
        let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.estimate.ln()).collect();
        let k = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    } else {
        None
    };

    let refinement = if refinement_check {
        Some(refinement_study(run, solution, ladder[0], replications)?)
    } else {
        None
    };

    Ok(ConvergenceReport {
        rows,
        w1,
        replications,
        seed_base: run.seed,
        seeds: (0..replications as u64).map(|r| replication_seed(run.seed, r)).collect(),
        log_log_slope,
        refinement,
    })
}

/// Compares the estimate at `dt` with the estimate at `dt / 2` on the same
/// Brownian paths.
pub fn refinement_study(
    run: &RunConfig,
    solution: &MeanFieldSolution,
    n: usize,
    replications: usize,
) -> Result<RefinementCheck> {
    let coarse_table = CoefficientTable::from_solution(solution, run.t_end, run.dt)?;
    let coarse = coupled_distance_with(run, &coarse_table, n, replications, 2, &[])?;
    let mut fine_run = run.clone();
    fine_run.dt = run.dt / 2.0;
    let fine_table = CoefficientTable::from_solution(solution, run.t_end, fine_run.dt)?;
    let fine = coupled_distance_with(&fine_run, &fine_table, n, replications, 1, &[])?;
    let relative_change = (fine.estimate - coarse.estimate).abs() / coarse.estimate.abs().max(f64::MIN_POSITIVE);
    Ok(RefinementCheck {
        n,
        coarse_dt: run.dt,
        coarse_estimate: coarse.estimate,
        fine_estimate: fine.estimate,
        relative_change,
        accepted: relative_change < REFINEMENT_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn w1_identities() {
        let a = [0.3, -1.0, 2.5, 0.0];
        assert_eq!(w1_marginal(&a, W1Reference::Sample(&a)).unwrap(), 0.0);
        let shuffled = [2.5, 0.0, 0.3, -1.0];
        assert_eq!(w1_marginal(&a, W1Reference::Sample(&shuffled)).unwrap(), 0.0);
        assert_eq!(w1_marginal(&[1.5], W1Reference::Sample(&[-0.5])).unwrap(), 2.0);
        assert_eq!(
            w1_marginal(&[1.5], W1Reference::Gaussian { mean: -0.5, sd: 0.0 }).unwrap(),
            2.0
        );
        assert!(matches!(w1_marginal(&[], W1Reference::Sample(&a)), Err(Error::EmptySample)));
        assert!(matches!(w1_marginal(&a, W1Reference::Sample(&[])), Err(Error::EmptySample)));
    }

    #[test]
    fn unequal_sizes_use_cdf_difference() {
        // Uniform point masses {0, 1} vs {0, 0, 1, 1} are the same law.
        let d = w1_marginal(&[0.0, 1.0], W1Reference::Sample(&[0.0, 0.0, 1.0, 1.0, 1.0])).unwrap();
        // F_a - F_b = 1/2 - 2/5 on [0, 1).
        assert!((d - 0.1).abs() < 1e-15);
        let e = w1_marginal(&[0.0, 1.0], W1Reference::Sample(&[0.0, 1.0, 0.0, 1.0, 0.5, 0.5])).unwrap();
        // F_b jumps to 1/3 at 0 and 2/3 at 0.5, F_a is 1/2 on [0, 1).
        assert!((e - (0.5 * (1.0 / 6.0) + 0.5 * (1.0 / 6.0))).abs() < 1e-15);
    }

    #[test]
    fn single_point_to_gaussian() {
        // W1(δ_0, N(0,1)) = E|Z| = sqrt(2/π).
        let d = w1_marginal(&[0.0], W1Reference::Gaussian { mean: 0.0, sd: 1.0 }).unwrap();
        assert!((d - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-12);
        // W1(δ_c, N(0,1)) = E|Z - c| = 2φ(c) + c(2Φ(c) - 1).
        let c = 0.7;
        let std = Normal::standard();
        let exact = 2.0 * std.pdf(c) + c * (2.0 * std.cdf(c) - 1.0);
        let d = w1_marginal(&[c], W1Reference::Gaussian { mean: 0.0, sd: 1.0 }).unwrap();
        assert!((d - exact).abs() < 1e-12);
    }

    #[test]
    fn mean_and_se_needs_two() {
        assert!(mean_and_se(&[1.0]).is_err());
        let (m, se) = mean_and_se(&[1.0, 3.0]).unwrap();
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tail_fit_of_exponential_square_law() {
        // Deterministic sample with survival exactly exp(-2 M^2) for M >= 0.
        let n = 100_000;
        let sample: Vec<f64> = (0..n)
            .map(|k| {
                let p = (k as f64 + 0.5) / n as f64;
                (-p.ln() / 2.0).sqrt()
            })
            .collect();
        let fit = tail_decay_fit(&sample, None).unwrap();
        assert!((fit.delta() - 2.0).abs() < 0.01, "{fit:?}");
        assert!(fit.r_squared > 0.999);
        assert!(fit.points.iter().all(|&(m, _)| m >= fit.m0));
    }

    #[test]
    fn tail_fit_needs_usable_levels() {
        let sample = vec![1.0; 50];
        assert!(matches!(
            tail_decay_fit(&sample, Some(&[2.0, 3.0, 4.0])),
            Err(Error::InsufficientData(_))
        ));
        // Levels below the bulk threshold are dropped.
        let sample: Vec<f64> = (0..1000).map(|k| k as f64 / 1000.0).collect();
        let fit = tail_decay_fit(&sample, Some(&[0.0, 0.1, 0.85, 0.9, 0.95])).unwrap();
        assert_eq!(fit.points.len(), 3);
    }

    #[test]
    fn report_trend() {
        let row = |n, estimate, se| ConvergenceRow {
            n,
            estimate,
            se,
            reps: 10,
            seed_base: 0,
        };
        let mut report = ConvergenceReport {
            rows: vec![row(10, 1.0, 0.01), row(50, 0.5, 0.01)],
            w1: vec![],
            replications: 10,
            seed_base: 0,
            seeds: vec![],
            log_log_slope: None,
            refinement: None,
        };
        assert!(report.strictly_decreasing());
        report.rows[1].estimate = 0.99;
        assert!(!report.strictly_decreasing());
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("n,estimate,se,reps,seed_base\n10,"));
    }
}
