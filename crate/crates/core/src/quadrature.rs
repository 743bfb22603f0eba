//! Equidistant quadrature grids on `[0, y]`, rule combinations and a-priori
//! error bounds.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Left,
    Right,
    Midpoint,
    Trapezoid,
    Simpson,
}

impl Rule {
    pub const ALL: [Rule; 5] = [
        Rule::Left,
        Rule::Right,
        Rule::Midpoint,
        Rule::Trapezoid,
        Rule::Simpson,
    ];

    /// Whether the rule is a point grid rather than a combination.
    pub fn is_grid(self) -> bool {
        matches!(self, Rule::Left | Rule::Right | Rule::Midpoint)
    }

    /// Order of the derivative that enters the error bound.
    pub fn derivative_order(self) -> u32 {
        match self {
            Rule::Left | Rule::Right => 1,
            Rule::Midpoint | Rule::Trapezoid => 2,
            Rule::Simpson => 4,
        }
    }

    /// Grid rules needed to evaluate this rule.
    pub fn components(self) -> &'static [Rule] {
        match self {
            Rule::Left => &[Rule::Left],
            Rule::Right => &[Rule::Right],
            Rule::Midpoint => &[Rule::Midpoint],
            Rule::Trapezoid => &[Rule::Left, Rule::Right],
            Rule::Simpson => &[Rule::Left, Rule::Right, Rule::Midpoint],
        }
    }
}

impl std::str::FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "left" => Ok(Rule::Left),
            "right" => Ok(Rule::Right),
            "midpoint" | "mid" => Ok(Rule::Midpoint),
            "trapezoid" | "trapez" => Ok(Rule::Trapezoid),
            "simpson" => Ok(Rule::Simpson),
            other => Err(Error::InvalidArgument(format!("unknown rule {other:?}"))),
        }
    }
}

impl std::fmt::Display for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Rule::Left => "left",
            Rule::Right => "right",
            Rule::Midpoint => "midpoint",
            Rule::Trapezoid => "trapezoid",
            Rule::Simpson => "simpson",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rule: Rule,
    pub n: u32,
    pub interval_end: f64,
    pub dimension: u32,
}

impl QuadratureSpec {
    pub fn new(rule: Rule, n: u32, interval_end: f64) -> Result<Self> {
        Self::with_dimension(rule, n, interval_end, 1)
    }

    pub fn with_dimension(rule: Rule, n: u32, interval_end: f64, dimension: u32) -> Result<Self> {
        let spec = Self {
            rule,
            n,
            interval_end,
            dimension,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > 24 {
            return Err(Error::InvalidArgument(format!(
                "n = {} outside 1..=24",
                self.n
            )));
        }
        if !(self.interval_end > 0.0 && self.interval_end <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "interval end {} outside (0, 1]",
                self.interval_end
            )));
        }
        if self.dimension == 0 {
            return Err(Error::InvalidArgument(
                "dimension must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn with_rule(&self, rule: Rule) -> Self {
        Self { rule, ..*self }
    }

    pub fn points(&self) -> usize {
        1 << self.n
    }
}

/// The `2^n` points of a grid rule on `[0, y]`.
pub fn make_grid(spec: &QuadratureSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let offset = match spec.rule {
        Rule::Left => 0.0,
        Rule::Right => 1.0,
        Rule::Midpoint => 0.5,
        r => {
            return Err(Error::InvalidArgument(format!(
                "{r} is a combination of grid rules, not a grid"
            )))
        }
    };
    let m = spec.points() as f64;
    Ok((0..spec.points())
        .map(|i| spec.interval_end * (i as f64 + offset) / m)
        .collect())
}

/// `trapezoid = (L + R)/2`, `simpson = (2M + (L + R)/2)/3`; grid rules pass
/// their own estimate through.
pub fn combine_estimates(left: f64, right: f64, mid: f64, rule: Rule) -> f64 {
    match rule {
        Rule::Left => left,
        Rule::Right => right,
        Rule::Midpoint => mid,
        Rule::Trapezoid => 0.5 * (left + right),
        Rule::Simpson => (2.0 * mid + 0.5 * (left + right)) / 3.0,
    }
}

/// `y · 2^{-n} Σ g(x_i)` for grid rules, combined for trapezoid/Simpson.
pub fn classical_reference(g: impl Fn(f64) -> f64, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    let riemann = |rule: Rule| -> Result<f64> {
        let xs = make_grid(&spec.with_rule(rule))?;
        Ok(spec.interval_end * xs.iter().map(|&x| g(x)).sum::<f64>() / xs.len() as f64)
    };
    if spec.rule.is_grid() {
        return riemann(spec.rule);
    }
    let l = riemann(Rule::Left)?;
    let r = riemann(Rule::Right)?;
    let m = if spec.rule == Rule::Simpson {
        riemann(Rule::Midpoint)?
    } else {
        0.0
    };
    Ok(combine_estimates(l, r, m, spec.rule))
}

/// Tensor-grid Riemann sum over `[0, y]^d`; `g` receives one point per call.
pub fn classical_reference_nd(g: impl Fn(&[f64]) -> f64, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    if !spec.rule.is_grid() {
        return Err(Error::InvalidArgument(format!(
            "{} is not available for d > 1",
            spec.rule
        )));
    }
    let d = spec.dimension as usize;
    let xs = make_grid(spec)?;
    let total = xs
        .len()
        .checked_pow(d as u32)
        .filter(|&t| t <= 1 << 24)
        .ok_or_else(|| Error::TooManyQubits {
            what: "quadrature grid",
            limit: 24,
            actual: spec.n as usize * d,
        })?;
    let mut point = vec![0.0; d];
    let mut sum = 0.0;
    for idx in 0..total {
        let mut rest = idx;
        for p in point.iter_mut() {
            *p = xs[rest % xs.len()];
            rest /= xs.len();
        }
        sum += g(&point);
    }
    Ok(spec.interval_end.powi(d as i32) * sum / total as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBound {
    pub rule: Rule,
    pub n: u32,
    pub max_abs_derivative: f64,
    pub bound: f64,
}

fn unit_bound(rule: Rule, n: u32, m: f64) -> f64 {
    let two_n = 2f64.powi(n as i32);
    match rule {
        Rule::Left | Rule::Right => m / (2.0 * two_n),
        Rule::Midpoint => m / (24.0 * two_n * two_n),
        Rule::Trapezoid => 2.0 * m / (24.0 * two_n * two_n),
        Rule::Simpson => m / (2880.0 * two_n.powi(4)),
    }
}

fn check_deriv(m: f64) -> Result<()> {
    if m.is_nan() || m < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "derivative maximum {m} is negative"
        )));
    }
    Ok(())
}

/// Bound on `[0, 1]^d` with the same derivative maximum in every dimension.
pub fn error_bound(rule: Rule, n: u32, d: u32, max_deriv: f64) -> Result<ErrorBound> {
    let per_dim = vec![max_deriv; d.max(1) as usize];
    let mut b = error_bound_per_dimension(rule, n, &per_dim)?;
    if d == 0 {
        return Err(Error::InvalidArgument(
            "dimension must be at least 1".into(),
        ));
    }
    b.max_abs_derivative = max_deriv;
    Ok(b)
}

/// Bound on `[0, 1]^d` with one derivative maximum per dimension (summed).
pub fn error_bound_per_dimension(rule: Rule, n: u32, max_derivs: &[f64]) -> Result<ErrorBound> {
    if max_derivs.is_empty() {
        return Err(Error::InvalidArgument(
            "dimension must be at least 1".into(),
        ));
    }
    if max_derivs.len() > 1 && !rule.is_grid() {
        return Err(Error::InvalidArgument(format!(
            "{rule} bound is not available for d > 1"
        )));
    }
    let mut bound = 0.0;
    for &m in max_derivs {
        check_deriv(m)?;
        bound += unit_bound(rule, n, m);
    }
    Ok(ErrorBound {
        rule,
        n,
        max_abs_derivative: max_derivs.iter().copied().fold(0.0, f64::max),
        bound,
    })
}

/// One-dimensional bound on `[0, y]`; `max_deriv` is the maximum of the
/// relevant derivative of `g` over `[0, y]`. The bound picks up `y^{p+1}`
/// for a derivative of order `p`.
pub fn error_bound_on_interval(rule: Rule, n: u32, max_deriv: f64, y: f64) -> Result<ErrorBound> {
    let mut b = error_bound(rule, n, 1, max_deriv)?;
    b.bound *= y.powi(rule.derivative_order() as i32 + 1);
    Ok(b)
}

/// Derivative maxima of `sin²(πx)` over any interval containing a full
/// half-period: `π`, `2π²`, `8π⁴` for orders 1, 2, 4.
pub fn sin2_derivative_max(order: u32) -> f64 {
    // d^p/dx^p sin²(πx) = -½ (2π)^p cos(2πx + pπ/2)
    0.5 * (2.0 * PI).powi(order as i32)
}

/// Maximum of `|g^{(order)}|` on `[0, y]` by finite differences on 10⁴
/// samples. Intended as a fallback for smooth `g`; accuracy degrades for
/// high orders.
pub fn numerical_derivative_max(g: impl Fn(f64) -> f64, order: u32, y: f64) -> f64 {
    const SAMPLES: usize = 10_000;
    let coeffs: &[f64] = match order {
        0 => &[1.0],
        1 => &[-0.5, 0.0, 0.5],
        2 => &[1.0, -2.0, 1.0],
        3 => &[-0.5, 1.0, 0.0, -1.0, 0.5],
        _ => &[1.0, -4.0, 6.0, -4.0, 1.0],
    };
    let half = (coeffs.len() / 2) as f64;
    let h = match order {
        0..=2 => 1e-4,
        _ => 1e-2,
    } * y.max(f64::MIN_POSITIVE);
    (0..SAMPLES)
        .map(|i| {
            let x = y * i as f64 / (SAMPLES - 1) as f64;
            let s: f64 = coeffs
                .iter()
                .enumerate()
                .map(|(j, c)| c * g(x + (j as f64 - half) * h))
                .sum();
            (s / h.powi(order.min(4) as i32)).abs()
        })
        .fold(0.0, f64::max)
}

/// `∫_0^y sin²(πx) dx = (2πy − sin 2πy) / 4π`.
pub fn exact_sin2_integral(y: f64) -> f64 {
    (2.0 * PI * y - (2.0 * PI * y).sin()) / (4.0 * PI)
}

pub fn sin2(x: f64) -> f64 {
    (PI * x).sin().powi(2)
}
