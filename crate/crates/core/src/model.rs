//! Model parameterization and neuron indexing.
//!
//! Populations are indexed from zero in the API. Each population `a`
//! contributes `2 s_a + 1` neurons, labelled by a slot `p in [-s_a, s_a]`, to
//! every group `i in [-n, n]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sigmoid::{SigmoidBounds, SigmoidSpec};

/// Deterministic input current of one population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputCurrent {
    Constant(f64),
    /// `(t, value)` pairs with strictly increasing `t`, linearly interpolated
    /// and clamped to the end values outside the table.
    Table(Vec<(f64, f64)>),
}

impl InputCurrent {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            InputCurrent::Constant(c) => *c,
            InputCurrent::Table(points) => {
                let first = points[0];
                let last = points[points.len() - 1];
                if t <= first.0 {
                    return first.1;
                }
                if t >= last.0 {
                    return last.1;
                }
                let k = points.partition_point(|&(tk, _)| tk <= t);
                let (t0, v0) = points[k - 1];
                let (t1, v1) = points[k];
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }

    /// Largest absolute value the current takes.
    pub fn sup_abs(&self) -> f64 {
        match self {
            InputCurrent::Constant(c) => c.abs(),
            InputCurrent::Table(points) => points.iter().fold(0.0, |m, p| f64::max(m, p.1.abs())),
        }
    }

    fn validate(&self, field: &str) -> Result<()> {
        match self {
            InputCurrent::Constant(c) if !c.is_finite() => {
                Err(Error::invalid(field, "constant current must be finite"))
            }
            InputCurrent::Constant(_) => Ok(()),
            InputCurrent::Table(points) => {
                if points.is_empty() {
                    return Err(Error::invalid(field, "table must not be empty"));
                }
                if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
                    return Err(Error::invalid(field, "table entries must be finite"));
                }
                if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::invalid(field, "table times must be strictly increasing"));
                }
                Ok(())
            }
        }
    }
}

/// Serialized form of [`ModelParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawModelParams {
    pub group_sizes: Vec<usize>,
    pub tau: f64,
    pub sigma: Vec<f64>,
    pub coupling: Vec<Vec<f64>>,
    pub input: Vec<InputCurrent>,
    /// Initial value of every slot, population-major (`2 s_a + 1` entries per
    /// population).
    pub x_ini: Vec<f64>,
    /// Optional per-population variance of a Gaussian initial condition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_variance: Option<Vec<f64>>,
    #[serde(default)]
    pub sigmoid: SigmoidSpec,
}

/// Validated model parameters. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModelParams", into = "RawModelParams")]
pub struct ModelParams {
    raw: RawModelParams,
    initial_variance: Vec<f64>,
    slot_offsets: Vec<usize>,
    group_width: usize,
    bounds: SigmoidBounds,
}

impl TryFrom<RawModelParams> for ModelParams {
    type Error = Error;

    fn try_from(raw: RawModelParams) -> Result<Self> {
        ModelParams::new(raw)
    }
}

impl From<ModelParams> for RawModelParams {
    fn from(p: ModelParams) -> Self {
        p.raw
    }
}

impl ModelParams {
    pub fn new(raw: RawModelParams) -> Result<Self> {
        let count = raw.group_sizes.len();
        if count == 0 {
            return Err(Error::invalid("group_sizes", "need at least one population"));
        }
        if !(raw.tau.is_finite() && raw.tau > 0.0) {
            return Err(Error::invalid("tau", "must be positive and finite"));
        }
        if raw.sigma.len() != count {
            return Err(Error::invalid(
                "sigma",
                format!("expected {count} entries, found {}", raw.sigma.len()),
            ));
        }
        for (a, s) in raw.sigma.iter().enumerate() {
            if !(s.is_finite() && *s > 0.0) {
                return Err(Error::invalid(format!("sigma[{a}]"), "must be positive and finite"));
            }
        }
        if raw.coupling.len() != count {
            return Err(Error::invalid(
                "coupling",
                format!("expected {count} rows, found {}", raw.coupling.len()),
            ));
        }
        for (a, row) in raw.coupling.iter().enumerate() {
            if row.len() != count {
                return Err(Error::invalid(
                    format!("coupling[{a}]"),
                    format!("expected {count} columns, found {}", row.len()),
                ));
            }
            if row.iter().any(|j| !j.is_finite()) {
                return Err(Error::invalid(format!("coupling[{a}]"), "weights must be finite"));
            }
        }
        if raw.input.len() != count {
            return Err(Error::invalid(
                "input",
                format!("expected {count} entries, found {}", raw.input.len()),
            ));
        }
        for (a, input) in raw.input.iter().enumerate() {
            input.validate(&format!("input[{a}]"))?;
        }

        let mut slot_offsets = Vec::with_capacity(count);
        let mut group_width = 0;
        for &s in &raw.group_sizes {
            slot_offsets.push(group_width);
            group_width += 2 * s + 1;
        }
        if raw.x_ini.len() != group_width {
            return Err(Error::invalid(
                "x_ini",
                format!("expected {group_width} entries, found {}", raw.x_ini.len()),
            ));
        }
        if raw.x_ini.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("x_ini", "entries must be finite"));
        }
        // Slots of one population share a law, so they must start together.
        for (a, &s) in raw.group_sizes.iter().enumerate() {
            let slots = &raw.x_ini[slot_offsets[a]..slot_offsets[a] + 2 * s + 1];
            if slots.iter().any(|&x| x != slots[0]) {
                return Err(Error::invalid(
                    "x_ini",
                    format!("slots of population {a} must share one initial value"),
                ));
            }
        }
        let initial_variance = match &raw.initial_variance {
            None => vec![0.0; count],
            Some(v) => {
                if v.len() != count {
                    return Err(Error::invalid(
                        "initial_variance",
                        format!("expected {count} entries, found {}", v.len()),
                    ));
                }
                if v.iter().any(|q| !(q.is_finite() && *q >= 0.0)) {
                    return Err(Error::invalid(
                        "initial_variance",
                        "entries must be finite and non-negative",
                    ));
                }
                v.clone()
            }
        };
        let bounds = raw.sigmoid.validate()?;

        Ok(ModelParams {
            raw,
            initial_variance,
            slot_offsets,
            group_width,
            bounds,
        })
    }

    pub fn raw(&self) -> &RawModelParams {
        &self.raw
    }

    /// Copy with every noise intensity set to zero. Validated configurations
    /// require positive noise; this exists for checks of deterministic limits.
    pub fn without_noise(&self) -> Self {
        let mut out = self.clone();
        out.raw.sigma.iter_mut().for_each(|s| *s = 0.0);
        out
    }

    pub fn num_populations(&self) -> usize {
        self.raw.group_sizes.len()
    }

    pub fn group_size(&self, population: usize) -> usize {
        self.raw.group_sizes[population]
    }

    /// Number of neurons population `a` has in one group, `2 s_a + 1`.
    pub fn slots(&self, population: usize) -> usize {
        2 * self.raw.group_sizes[population] + 1
    }

    /// Neurons per group, `s̄ = Σ (2 s_a + 1)`.
    pub fn group_width(&self) -> usize {
        self.group_width
    }

    pub fn slot_offset(&self, population: usize) -> usize {
        self.slot_offsets[population]
    }

    pub fn tau(&self) -> f64 {
        self.raw.tau
    }

    pub fn sigma(&self, population: usize) -> f64 {
        self.raw.sigma[population]
    }

    pub fn sigma_min(&self) -> f64 {
        self.raw.sigma.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sigma_max(&self) -> f64 {
        self.raw.sigma.iter().copied().fold(0.0, f64::max)
    }

    /// Weight from presynaptic population `pre` onto postsynaptic `post`.
    #[inline]
    pub fn coupling(&self, post: usize, pre: usize) -> f64 {
        self.raw.coupling[post][pre]
    }

    pub fn coupling_max(&self) -> f64 {
        self.raw
            .coupling
            .iter()
            .flatten()
            .fold(0.0, |m, j| f64::max(m, j.abs()))
    }

    pub fn sigmoid(&self) -> &SigmoidSpec {
        &self.raw.sigmoid
    }

    /// Derivative bounds of the sigmoid, measured when the parameters were
    /// validated. `c_s` is the constant `sup |x S'(x)|`.
    pub fn sigmoid_bounds(&self) -> &SigmoidBounds {
        &self.bounds
    }

    pub fn input(&self, population: usize) -> &InputCurrent {
        &self.raw.input[population]
    }

    /// Initial value shared by the slots of `population`.
    pub fn x_ini(&self, population: usize) -> f64 {
        self.raw.x_ini[self.slot_offsets[population]]
    }

    /// Initial value of every slot of a group, population-major.
    pub fn x_ini_slots(&self) -> &[f64] {
        &self.raw.x_ini
    }

    pub fn initial_variance(&self, population: usize) -> f64 {
        self.initial_variance[population]
    }

    /// Population of each slot of a group.
    pub fn slot_populations(&self) -> Vec<usize> {
        (0..self.num_populations())
            .flat_map(|a| vec![a; self.slots(a)])
            .collect()
    }

    /// Input current `I^a(t)`.
    pub fn current_eval(&self, population: usize, t: f64) -> Result<f64> {
        if population >= self.num_populations() {
            return Err(Error::PopulationOutOfRange {
                index: population,
                count: self.num_populations(),
            });
        }
        if !t.is_finite() {
            return Err(Error::Domain(format!("time {t} is not finite")));
        }
        Ok(self.raw.input[population].at(t))
    }

    pub fn layout(&self, n: usize) -> Layout {
        Layout {
            n,
            group_sizes: self.raw.group_sizes.clone(),
            slot_offsets: self.slot_offsets.clone(),
            group_width: self.group_width,
        }
    }
}

/// Address of one neuron `(i, a, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NeuronIndex {
    pub group: i64,
    pub population: usize,
    pub slot: i64,
}

impl NeuronIndex {
    pub fn new(group: i64, population: usize, slot: i64) -> Self {
        NeuronIndex {
            group,
            population,
            slot,
        }
    }

    /// Column label `i_a_p` with a one-based population number.
    pub fn label(&self) -> String {
        format!("{}_{}_{}", self.group, self.population + 1, self.slot)
    }
}

/// Flat storage order of a network with `2n + 1` groups: group-major, then
/// population, then slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    n: usize,
    group_sizes: Vec<usize>,
    slot_offsets: Vec<usize>,
    group_width: usize,
}

impl Layout {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn groups(&self) -> usize {
        2 * self.n + 1
    }

    pub fn group_width(&self) -> usize {
        self.group_width
    }

    pub fn len(&self) -> usize {
        self.groups() * self.group_width
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn flatten(&self, idx: NeuronIndex) -> Result<usize> {
        let n = self.n as i64;
        if idx.group < -n || idx.group > n {
            return Err(Error::Domain(format!("group {} outside [-{n}, {n}]", idx.group)));
        }
        let s = *self
            .group_sizes
            .get(idx.population)
            .ok_or(Error::PopulationOutOfRange {
                index: idx.population,
                count: self.group_sizes.len(),
            })? as i64;
        if idx.slot < -s || idx.slot > s {
            return Err(Error::Domain(format!("slot {} outside [-{s}, {s}]", idx.slot)));
        }
        Ok((idx.group + n) as usize * self.group_width
            + self.slot_offsets[idx.population]
            + (idx.slot + s) as usize)
    }

    pub fn unflatten(&self, offset: usize) -> Result<NeuronIndex> {
        if offset >= self.len() {
            return Err(Error::Domain(format!(
                "offset {offset} outside network of {} neurons",
                self.len()
            )));
        }
        let group = (offset / self.group_width) as i64 - self.n as i64;
        let local = offset % self.group_width;
        let population = self.slot_offsets.partition_point(|&o| o <= local) - 1;
        let slot = (local - self.slot_offsets[population]) as i64
            - self.group_sizes[population] as i64;
        Ok(NeuronIndex {
            group,
            population,
            slot,
        })
    }

    /// Slot index within a group, population-major, of `(a, p)`.
    pub fn local_slot(&self, population: usize, slot: i64) -> usize {
        self.slot_offsets[population] + (slot + self.group_sizes[population] as i64) as usize
    }

    /// Every neuron of group `group`, in storage order.
    pub fn group_indices(&self, group: i64) -> Vec<NeuronIndex> {
        (0..self.group_sizes.len())
            .flat_map(|a| {
                let s = self.group_sizes[a] as i64;
                (-s..=s).map(move |p| NeuronIndex::new(group, a, p))
            })
            .collect()
    }
}

/// The two-population parameter set of the numerical study (with `tau = 1`).
pub fn reference_two_population() -> ModelParams {
    ModelParams::new(RawModelParams {
        group_sizes: vec![0, 0],
        tau: 1.0,
        sigma: vec![0.2, 0.2],
        coupling: vec![vec![-0.11, -1.1], vec![0.44, -0.11]],
        input: vec![InputCurrent::Constant(0.2), InputCurrent::Constant(-0.2)],
        x_ini: vec![0.2, -0.35],
        initial_variance: None,
        sigmoid: SigmoidSpec::Logistic,
    })
    .expect("reference parameters are valid")
}
