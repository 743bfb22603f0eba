//! Maximum-likelihood amplitude estimation over a power schedule.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statevector::ShotCounts;

/// Minimum number of grid points for the global likelihood scan.
pub const MIN_GRID_POINTS: usize = 100_000;
/// Refinement tolerance in θ.
pub const THETA_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlaeSchedule {
    pub powers: Vec<usize>,
    /// Shots per power. `0` means the hits are exact probabilities.
    pub shots: u64,
}

impl MlaeSchedule {
    pub fn new(powers: Vec<usize>, shots: u64) -> Result<Self> {
        if powers.is_empty() {
            return Err(Error::InvalidArgument("empty MLAE schedule".into()));
        }
        if powers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "MLAE powers must be strictly increasing".into(),
            ));
        }
        Ok(Self { powers, shots })
    }

    /// `{0} ∪ {2^j : j = 0..=k_max}`.
    pub fn exponential(k_max: u32, shots: u64) -> Self {
        let mut powers = vec![0];
        powers.extend((0..=k_max).map(|j| 1usize << j));
        Self { powers, shots }
    }

    /// Effective number of trials per power.
    pub fn trials(&self) -> f64 {
        if self.shots == 0 {
            1.0
        } else {
            self.shots as f64
        }
    }

    /// Total applications of `A`/`A†` over all shots.
    pub fn oracle_calls(&self, optimized: bool) -> u64 {
        let per: u64 = self
            .powers
            .iter()
            .map(|&k| {
                if optimized {
                    k as u64 + 1
                } else {
                    2 * k as u64 + 1
                }
            })
            .sum();
        per * self.shots.max(1)
    }

    fn grid_points(&self) -> usize {
        let k_max = *self.powers.last().unwrap_or(&0);
        // at least 20 samples between adjacent likelihood modes
        MIN_GRID_POINTS.max(40 * (2 * k_max + 1) + 1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlaeResult {
    pub a_hat: f64,
    pub theta_hat: f64,
    pub log_likelihood: f64,
    pub powers: Vec<usize>,
    pub shots: u64,
    pub per_power_hits: Vec<f64>,
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// `log L(θ) = Σ_j h_j log sin²((2k_j+1)θ) + (M − h_j) log cos²((2k_j+1)θ)`.
pub fn log_likelihood(theta: f64, powers: &[usize], hits: &[f64], trials: f64) -> f64 {
    powers
        .iter()
        .zip(hits)
        .map(|(&k, &h)| {
            let (s, c) = ((2 * k + 1) as f64 * theta).sin_cos();
            xlogy(h, s * s) + xlogy(trials - h, c * c)
        })
        .sum()
}

/// `d log L / dθ`.
pub fn log_likelihood_derivative(theta: f64, powers: &[usize], hits: &[f64], trials: f64) -> f64 {
    powers
        .iter()
        .zip(hits)
        .map(|(&k, &h)| {
            let w = (2 * k + 1) as f64;
            let (s, c) = (w * theta).sin_cos();
            let mut d = 0.0;
            if h > 0.0 {
                d += 2.0 * h * c / s;
            }
            if trials - h > 0.0 {
                d -= 2.0 * (trials - h) * s / c;
            }
            w * d
        })
        .sum()
}

fn bisect_root(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Maximizes the likelihood over `θ ∈ [0, π/2]`; ties go to the smaller θ.
pub fn mlae_estimate(schedule: &MlaeSchedule, hits: &[f64]) -> Result<MlaeResult> {
    if schedule.powers.is_empty() {
        return Err(Error::InvalidArgument("empty MLAE schedule".into()));
    }
    if hits.len() != schedule.powers.len() {
        return Err(Error::InvalidArgument(format!(
            "{} hit counts for {} powers",
            hits.len(),
            schedule.powers.len()
        )));
    }
    let m = schedule.trials();
    // allow rounding slack on exact probabilities
    let slack = 1e-9 * m;
    if let Some(h) = hits.iter().find(|h| !(-slack..=m + slack).contains(*h)) {
        return Err(Error::InvalidArgument(format!(
            "hit count {h} outside [0, {m}]"
        )));
    }
    let hits: Vec<f64> = hits.iter().map(|h| h.clamp(0.0, m)).collect();
    let hits = &hits[..];
    let powers = &schedule.powers;
    let ll = |t: f64| log_likelihood(t, powers, hits, m);

    let n = schedule.grid_points();
    let step = FRAC_PI_2 / (n - 1) as f64;
    let better = |a: (usize, f64), b: (usize, f64)| {
        if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
            b
        } else {
            a
        }
    };
    let (best_i, best_v) = (0..n)
        .into_par_iter()
        .map(|i| (i, ll(i as f64 * step)))
        .reduce(|| (usize::MAX, f64::NEG_INFINITY), better);
    let best_i = if best_i == usize::MAX { 0 } else { best_i };

    let lo = best_i.saturating_sub(1) as f64 * step;
    let hi = ((best_i + 1).min(n - 1)) as f64 * step;
    let dll = |t: f64| log_likelihood_derivative(t, powers, hits, m);
    let (t_ref, v_ref) = if dll(lo) > 0.0 && dll(hi) < 0.0 {
        let t = bisect_root(&dll, lo, hi, THETA_TOL);
        (t, ll(t))
    } else {
        golden_max(&ll, lo, hi, THETA_TOL)
    };
    let grid_theta = best_i as f64 * step;
    let (theta, value) = if v_ref > best_v || (v_ref == best_v && t_ref < grid_theta) {
        (t_ref, v_ref)
    } else {
        (grid_theta, best_v)
    };
    let theta = theta.clamp(0.0, FRAC_PI_2);
    Ok(MlaeResult {
        a_hat: theta.sin().powi(2),
        theta_hat: theta,
        log_likelihood: value,
        powers: powers.clone(),
        shots: schedule.shots,
        per_power_hits: hits.to_vec(),
    })
}

/// Convenience wrapper over sampled counts.
pub fn mlae_from_counts(schedule: &MlaeSchedule, counts: &[ShotCounts]) -> Result<MlaeResult> {
    if let Some(c) = counts.iter().find(|c| c.shots != schedule.shots) {
        return Err(Error::InvalidArgument(format!(
            "counts with {} shots for a {}-shot schedule",
            c.shots, schedule.shots
        )));
    }
    let hits: Vec<f64> = counts.iter().map(|c| c.good_hits as f64).collect();
    mlae_estimate(schedule, &hits)
}

/// Golden-section maximization on `[lo, hi]`.
fn golden_max(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}
