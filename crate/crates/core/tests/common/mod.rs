//! Independent oracles shared by the integration tests. None of these call
//! into the quadrature, mean-field or network code under test.

#![allow(dead_code)]

use wcchaos_core::{ModelParams, NeuronIndex, SigmoidSpec};

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `∫ g(y) ρ(m, v, y) dy` by the trapezoid rule on `m ± 14 sd`, doubling the
/// point count until successive estimates agree to 1e-14.
pub fn trapezoid_expectation(m: f64, v: f64, g: impl Fn(f64) -> f64) -> f64 {
    assert!(v > 0.0);
    let sd = v.sqrt();
    let (lo, hi) = (m - 14.0 * sd, m + 14.0 * sd);
    let density = |y: f64| (-(y - m).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
    let f = |y: f64| g(y) * density(y);
    let mut n = 64usize;
    let mut h = (hi - lo) / n as f64;
    let mut sum = 0.5 * (f(lo) + f(hi)) + (1..n).map(|k| f(lo + k as f64 * h)).sum::<f64>();
    let mut estimate = sum * h;
    loop {
        // Add the midpoints of the current panels.
        sum += (0..n).map(|k| f(lo + (k as f64 + 0.5) * h)).sum::<f64>();
        n *= 2;
        h /= 2.0;
        let next = sum * h;
        if (next - estimate).abs() < 1e-14 || n > 1 << 22 {
            return next;
        }
        estimate = next;
    }
}

pub fn oracle_s(m: f64, v: f64) -> f64 {
    if v == 0.0 {
        return logistic(m);
    }
    trapezoid_expectation(m, v, logistic)
}

pub fn oracle_xs(m: f64, v: f64) -> f64 {
    if v == 0.0 {
        return m * logistic(m);
    }
    trapezoid_expectation(m, v, |y| y * logistic(y))
}

/// Drift of every neuron by direct summation over all pairs.
pub fn naive_drift(params: &ModelParams, n: usize, values: &[f64], t: f64) -> Vec<f64> {
    let layout = params.layout(n);
    let spec: &SigmoidSpec = params.sigmoid();
    let idx: Vec<NeuronIndex> = (0..values.len()).map(|k| layout.unflatten(k).unwrap()).collect();
    let norm = 1.0 / (2 * n + 1) as f64;
    (0..values.len())
        .map(|i| {
            let a = idx[i].population;
            let x = values[i];
            let mut coupling = 0.0;
            for j in 0..values.len() {
                let b = idx[j].population;
                coupling += params.coupling(a, b) * (x - values[j]) * spec.value(values[j]);
            }
            -x / params.tau() + params.input(a).at(t) + norm * coupling
        })
        .collect()
}

/// Residual of the stationary mean/variance equations under oracle moments.
pub fn stationary_residual(params: &ModelParams, m: &[f64], q: &[f64]) -> Vec<f64> {
    let k = params.num_populations();
    let s: Vec<f64> = (0..k).map(|b| oracle_s(m[b], q[b])).collect();
    let xs: Vec<f64> = (0..k).map(|b| oracle_xs(m[b], q[b])).collect();
    let mut r = Vec::with_capacity(2 * k);
    let mut rq = Vec::with_capacity(k);
    for a in 0..k {
        let mut slope = -1.0 / params.tau();
        let mut forcing = params.input(a).at(f64::INFINITY);
        for b in 0..k {
            let w = params.slots(b) as f64 * params.coupling(a, b);
            slope += w * s[b];
            forcing -= w * xs[b];
        }
        r.push(slope * m[a] + forcing);
        rq.push(2.0 * slope * q[a] + params.sigma(a).powi(2));
    }
    r.extend(rq);
    r
}

/// Newton solve of the stationary equations with a central-difference
/// Jacobian and Gaussian elimination.
pub fn stationary_point(params: &ModelParams, m0: &[f64], q0: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let k = params.num_populations();
    let mut z: Vec<f64> = m0.iter().chain(q0).copied().collect();
    let res = |z: &[f64]| stationary_residual(params, &z[..k], &z[k..]);
    for _ in 0..50 {
        let r = res(&z);
        if r.iter().all(|x| x.abs() < 1e-13) {
            break;
        }
        let dim = 2 * k;
        let mut jac = vec![vec![0.0; dim + 1]; dim];
        for c in 0..dim {
            let h = 1e-6 * z[c].abs().max(1e-3);
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[c] += h;
            zm[c] -= h;
            let (rp, rm) = (res(&zp), res(&zm));
            for row in 0..dim {
                jac[row][c] = (rp[row] - rm[row]) / (2.0 * h);
            }
        }
        for row in 0..dim {
            jac[row][dim] = -r[row];
        }
        let step = solve_linear(jac);
        for (zi, d) in z.iter_mut().zip(step) {
            *zi += d;
        }
    }
    (z[..k].to_vec(), z[k..].to_vec())
}

/// Solves an augmented system `[A | b]` by partial-pivoting elimination.
pub fn solve_linear(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        for row in col + 1..n {
            let (upper, lower) = a.split_at_mut(row);
            let (pivot, target) = (&upper[col], &mut lower[0]);
            let f = target[col] / pivot[col];
            for (t, p) in target[col..].iter_mut().zip(&pivot[col..]) {
                *t -= f * p;
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (a[row][n] - tail) / a[row][row];
    }
    x
}

/// `P(sup_{[0,T]} |B| < a)` for standard Brownian motion, by the image series.
pub fn brownian_abs_sup_cdf(a: f64, t: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    if a <= 0.0 {
        return 0.0;
    }
    let std = Normal::standard();
    let r = a / t.sqrt();
    (-50i64..=50)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let k = k as f64;
            sign * (std.cdf((2.0 * k + 1.0) * r) - std.cdf((2.0 * k - 1.0) * r))
        })
        .sum()
}

pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}
