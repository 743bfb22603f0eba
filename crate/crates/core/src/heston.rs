//! Euler-discretized Heston model with `ρ = 0`, grid-cell transition
//! probabilities and the `A` operator for a European call.
//!
//! Register layout for `T` steps: state registers by time step (`ν_t` for
//! `t < T`, then `S_t`), followed by one ancilla per transition oracle
//! (`f_t^ν`, `f_t^S`) and the payoff ancilla last. `ν_T` is never allocated.
//! For `T = 2` this is `ν1 q0, S1 q1, S2 q2 q3, f1ν q4, f1S q5, f2S q6, g q7`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::state_prep::{FlaggedOperator, RotationOracle};
use crate::statevector::{GoodStateFlags, MAX_SIM_QUBITS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HestonParams {
    pub kappa: f64,
    pub theta: f64,
    pub xi: f64,
    pub mu: f64,
    #[serde(default)]
    pub rho: f64,
    pub nu0: f64,
    pub s0: f64,
    pub dt: f64,
    pub steps: usize,
    pub strike: f64,
}

impl HestonParams {
    /// `κ = θ = μ = ν0 = S0 = δt = K = 1`, `ξ = 0.5`, `ρ = 0`, two steps.
    pub fn example() -> Self {
        Self {
            kappa: 1.0,
            theta: 1.0,
            xi: 0.5,
            mu: 1.0,
            rho: 0.0,
            nu0: 1.0,
            s0: 1.0,
            dt: 1.0,
            steps: 2,
            strike: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rho != 0.0 {
            return Err(Error::Unsupported(format!(
                "correlation rho = {} (only rho = 0 is implemented)",
                self.rho
            )));
        }
        if !(self.xi >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "xi = {} must be >= 0",
                self.xi
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "dt = {} must be > 0",
                self.dt
            )));
        }
        if self.steps == 0 {
            return Err(Error::InvalidArgument(
                "at least one time step is required".into(),
            ));
        }
        if !(self.nu0 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "nu0 = {} must be > 0",
                self.nu0
            )));
        }
        Ok(())
    }
}

/// Grid points per variable and time step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// `ν_t` grids for `t = 1..T−1`.
    pub nu: Vec<Vec<f64>>,
    /// `S_t` grids for `t = 1..T`.
    pub s: Vec<Vec<f64>>,
}

impl GridSpec {
    /// `ν1 ∈ {0.8, 1.2}`, `S1 ∈ {0.75, 1.25}`, `S2 ∈ {0, 1, 2, 3}`.
    pub fn example() -> Self {
        Self {
            nu: vec![vec![0.8, 1.2]],
            s: vec![vec![0.75, 1.25], vec![0.0, 1.0, 2.0, 3.0]],
        }
    }

    pub fn steps(&self) -> usize {
        self.s.len()
    }

    pub fn validate(&self, steps: usize) -> Result<()> {
        if self.s.len() != steps || self.nu.len() + 1 != steps {
            return Err(Error::InvalidArgument(format!(
                "{steps} steps need {} nu grids and {steps} S grids, got {} and {}",
                steps.saturating_sub(1),
                self.nu.len(),
                self.s.len()
            )));
        }
        for g in self.nu.iter().chain(&self.s) {
            if g.len() < 2 || !g.len().is_power_of_two() {
                return Err(Error::InvalidArgument(format!(
                    "grid of {} points (need a power of two >= 2)",
                    g.len()
                )));
            }
            if g.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::InvalidArgument(format!(
                    "grid {g:?} is not strictly increasing"
                )));
            }
        }
        Ok(())
    }

    fn qubits(grid: &[f64]) -> usize {
        grid.len().trailing_zeros() as usize
    }
}

/// Independent normals for `ν_t` and `S_t` given the previous values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDistribution {
    pub nu_mean: f64,
    pub nu_std: f64,
    pub s_mean: f64,
    pub s_std: f64,
}

/// `ν' ~ N(ν + κ(θ−ν)δt, ξ√(νδt))`, `S' ~ N(S(1+μδt), √(νδt)·S)`.
pub fn step_distribution(
    params: &HestonParams,
    nu_prev: f64,
    s_prev: f64,
) -> Result<StepDistribution> {
    params.validate()?;
    if !(nu_prev > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "variance {nu_prev} must be > 0"
        )));
    }
    let dt = params.dt;
    Ok(StepDistribution {
        nu_mean: nu_prev + params.kappa * (params.theta - nu_prev) * dt,
        nu_std: params.xi * (nu_prev * dt).sqrt(),
        s_mean: s_prev * (1.0 + params.mu * dt),
        s_std: (nu_prev * dt).sqrt() * s_prev.abs(),
    })
}

/// Probability of each cell `[(x_{i−1}+x_i)/2, (x_i+x_{i+1})/2]`, with
/// infinite outer bounds. A zero standard deviation puts all mass on the
/// nearest grid point (ties to the lower one).
pub fn grid_cell_probabilities(mean: f64, std: f64, grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument(format!(
            "grid {grid:?} is not strictly increasing"
        )));
    }
    if !(std >= 0.0) || !mean.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "invalid normal N({mean}, {std})"
        )));
    }
    let mut p = vec![0.0; grid.len()];
    if std == 0.0 {
        let mut best = 0;
        for (i, x) in grid.iter().enumerate() {
            if (x - mean).abs() < (grid[best] - mean).abs() {
                best = i;
            }
        }
        p[best] = 1.0;
        return Ok(p);
    }
    let normal = Normal::new(mean, std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut lower = 0.0;
    for i in 0..grid.len() {
        let upper = if i + 1 < grid.len() {
            normal.cdf(0.5 * (grid[i] + grid[i + 1]))
        } else {
            1.0
        };
        p[i] = upper - lower;
        lower = upper;
    }
    Ok(p)
}

/// Normalized call payoff on the terminal grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Payoff {
    pub values: Vec<f64>,
    /// `S_max − K`; the unnormalized payoff is `values · normalizer`.
    pub normalizer: f64,
    /// All payoffs are zero, so the estimation target is trivially 0.
    pub degenerate: bool,
}

/// `max(S_i − K, 0) / (S_max − K)`.
pub fn payoff_values(grid: &[f64], strike: f64) -> Payoff {
    let s_max = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(s_max > strike) {
        return Payoff {
            values: vec![0.0; grid.len()],
            normalizer: 0.0,
            degenerate: true,
        };
    }
    let norm = s_max - strike;
    Payoff {
        values: grid.iter().map(|s| (s - strike).max(0.0) / norm).collect(),
        normalizer: norm,
        degenerate: false,
    }
}

/// Conditional probability tables. `nu[t−1][prev][cur]` for `t = 1..T−1`
/// (a single `prev` row for `t = 1`); `s[t−1][cond][cur]` with
/// `cond = ν_{t−1} + |ν grid|·S_{t−1}` (a single row for `t = 1`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HestonTables {
    pub nu: Vec<Vec<Vec<f64>>>,
    pub s: Vec<Vec<Vec<f64>>>,
}

impl HestonTables {
    /// The published two-step tables, rounded as printed.
    pub fn published() -> Self {
        Self {
            nu: vec![vec![vec![0.50, 0.50]]],
            s: vec![
                vec![vec![0.38, 0.62]],
                vec![
                    vec![0.063, 0.937, 0.001, 0.000], // ν1 = 0.8, S1 = 0.75
                    vec![0.105, 0.890, 0.005, 0.000], // ν1 = 1.2, S1 = 0.75
                    vec![0.007, 0.631, 0.361, 0.001], // ν1 = 0.8, S1 = 1.25
                    vec![0.022, 0.592, 0.382, 0.005], // ν1 = 1.2, S1 = 1.25
                ],
            ],
        }
    }

    /// Tables from [`step_distribution`] and [`grid_cell_probabilities`].
    pub fn compute(params: &HestonParams, grids: &GridSpec) -> Result<Self> {
        params.validate()?;
        grids.validate(params.steps)?;
        let t_max = params.steps;
        let mut nu = Vec::new();
        let mut s = Vec::new();
        for t in 1..=t_max {
            let prev_nu: Vec<f64> = if t == 1 {
                vec![params.nu0]
            } else {
                grids.nu[t - 2].clone()
            };
            let prev_s: Vec<f64> = if t == 1 {
                vec![params.s0]
            } else {
                grids.s[t - 2].clone()
            };
            if t < t_max {
                let rows = prev_nu
                    .iter()
                    .map(|&v| {
                        let d = step_distribution(params, v, 1.0)?;
                        grid_cell_probabilities(d.nu_mean, d.nu_std, &grids.nu[t - 1])
                    })
                    .collect::<Result<Vec<_>>>()?;
                nu.push(rows);
            }
            let mut rows = Vec::with_capacity(prev_nu.len() * prev_s.len());
            for &sp in &prev_s {
                for &vp in &prev_nu {
                    let d = step_distribution(params, vp, sp)?;
                    rows.push(grid_cell_probabilities(d.s_mean, d.s_std, &grids.s[t - 1])?);
                }
            }
            s.push(rows);
        }
        Ok(Self { nu, s })
    }

    pub fn validate(&self, grids: &GridSpec) -> Result<()> {
        let steps = grids.steps();
        if self.s.len() != steps || self.nu.len() + 1 != steps {
            return Err(Error::InvalidArgument(
                "table count does not match the grids".into(),
            ));
        }
        for t in 1..=steps {
            let n_prev_nu = if t == 1 { 1 } else { grids.nu[t - 2].len() };
            let n_prev_s = if t == 1 { 1 } else { grids.s[t - 2].len() };
            if t < steps {
                check_rows(&self.nu[t - 1], n_prev_nu, grids.nu[t - 1].len(), "nu", t)?;
            }
            check_rows(
                &self.s[t - 1],
                n_prev_nu * n_prev_s,
                grids.s[t - 1].len(),
                "S",
                t,
            )?;
        }
        Ok(())
    }

    /// Largest `|Σ row − 1|` over all rows.
    pub fn max_row_sum_error(&self) -> f64 {
        self.nu
            .iter()
            .chain(&self.s)
            .flatten()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Distribution of `S_T`.
    pub fn terminal_marginal(&self, grids: &GridSpec) -> Result<Vec<f64>> {
        self.validate(grids)?;
        let mut out = vec![0.0; grids.s[grids.steps() - 1].len()];
        for_each_path(self, grids, |path, p| {
            out[*path.last().unwrap()] += p;
        });
        Ok(out)
    }

    /// CSV with header `kind,t,condition,state,probability`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["kind", "t", "condition", "state", "probability"])?;
        for (kind, tables) in [("nu", &self.nu), ("s", &self.s)] {
            for (t, rows) in tables.iter().enumerate() {
                for (c, row) in rows.iter().enumerate() {
                    for (i, p) in row.iter().enumerate() {
                        w.write_record([
                            kind.to_string(),
                            (t + 1).to_string(),
                            c.to_string(),
                            i.to_string(),
                            format!("{p:.17e}"),
                        ])?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format of [`HestonTables::write_csv`]; table shapes are
    /// checked against `grids`.
    pub fn read_csv<R: Read>(input: R, grids: &GridSpec) -> Result<Self> {
        let steps = grids.steps();
        let mut nu: Vec<Vec<Vec<Option<f64>>>> = Vec::new();
        let mut s: Vec<Vec<Vec<Option<f64>>>> = Vec::new();
        for t in 1..=steps {
            let n_prev = if t == 1 { 1 } else { grids.nu[t - 2].len() };
            let n_prev_s = if t == 1 { 1 } else { grids.s[t - 2].len() };
            if t < steps {
                nu.push(vec![vec![None; grids.nu[t - 1].len()]; n_prev]);
            }
            s.push(vec![vec![None; grids.s[t - 1].len()]; n_prev * n_prev_s]);
        }
        let mut r = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(input);
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = line + 2;
            let bad = |m: &str| Error::Parse {
                line,
                message: m.to_string(),
            };
            if rec.len() != 5 {
                return Err(bad("expected 5 columns"));
            }
            let num = |i: usize| rec[i].parse::<usize>().map_err(|_| bad("invalid integer"));
            let (t, c, i) = (num(1)?, num(2)?, num(3)?);
            let p: f64 = rec[4].parse().map_err(|_| bad("invalid probability"))?;
            let tables = match &rec[0] {
                "nu" => &mut nu,
                "s" | "S" => &mut s,
                _ => return Err(bad("kind must be nu or s")),
            };
            let slot = t
                .checked_sub(1)
                .and_then(|t| tables.get_mut(t))
                .and_then(|rows| rows.get_mut(c))
                .and_then(|row| row.get_mut(i))
                .ok_or_else(|| bad("entry outside the table shape"))?;
            if slot.replace(p).is_some() {
                return Err(bad("duplicate entry"));
            }
        }
        let fill = |tables: Vec<Vec<Vec<Option<f64>>>>| -> Result<Vec<Vec<Vec<f64>>>> {
            tables
                .into_iter()
                .map(|rows| {
                    rows.into_iter()
                        .map(|row| {
                            row.into_iter()
                                .collect::<Option<Vec<f64>>>()
                                .ok_or_else(|| {
                                    Error::InvalidArgument("incomplete probability table".into())
                                })
                        })
                        .collect()
                })
                .collect()
        };
        let tables = Self {
            nu: fill(nu)?,
            s: fill(s)?,
        };
        tables.validate(grids)?;
        Ok(tables)
    }
}

fn check_rows(rows: &[Vec<f64>], n_rows: usize, n_cols: usize, what: &str, t: usize) -> Result<()> {
    if rows.len() != n_rows || rows.iter().any(|r| r.len() != n_cols) {
        return Err(Error::InvalidArgument(format!(
            "{what} table for t = {t} must be {n_rows} x {n_cols}"
        )));
    }
    for row in rows {
        for (i, &p) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::ValueOutOfRange { index: i, value: p });
            }
        }
    }
    Ok(())
}

/// Calls `f(path, probability)` for every discretized path; `path` lists
/// the grid indices `[ν1, S1, ν2, S2, …, S_T]` in register order.
fn for_each_path(tables: &HestonTables, grids: &GridSpec, mut f: impl FnMut(&[usize], f64)) {
    fn rec(
        tables: &HestonTables,
        grids: &GridSpec,
        t: usize,
        prev: (usize, usize, usize),
        prob: f64,
        path: &mut Vec<usize>,
        f: &mut impl FnMut(&[usize], f64),
    ) {
        let steps = grids.steps();
        if t > steps {
            f(path, prob);
            return;
        }
        let (nu_prev, s_prev, n_nu_prev) = prev;
        let cond = nu_prev + n_nu_prev * s_prev;
        let nu_choices: Vec<(usize, f64)> = if t < steps {
            tables.nu[t - 1][nu_prev]
                .iter()
                .copied()
                .enumerate()
                .collect()
        } else {
            vec![(0, 1.0)]
        };
        for (v, pv) in nu_choices {
            if t < steps {
                path.push(v);
            }
            for (s, ps) in tables.s[t - 1][cond].iter().copied().enumerate() {
                path.push(s);
                let n_nu = if t < steps { grids.nu[t - 1].len() } else { 1 };
                rec(tables, grids, t + 1, (v, s, n_nu), prob * pv * ps, path, f);
                path.pop();
            }
            if t < steps {
                path.pop();
            }
        }
    }
    let mut path = Vec::new();
    rec(tables, grids, 1, (0, 0, 1), 1.0, &mut path, &mut f);
}

/// `Σ_paths P(path) · max(S_T − K, 0)`.
pub fn expected_payoff_reference(
    params: &HestonParams,
    grids: &GridSpec,
    tables: &HestonTables,
) -> Result<f64> {
    tables.validate(grids)?;
    let s_t = &grids.s[grids.steps() - 1];
    let mut total = 0.0;
    for_each_path(tables, grids, |path, p| {
        total += p * (s_t[*path.last().unwrap()] - params.strike).max(0.0);
    });
    Ok(total)
}

/// The `A` operator together with its register map.
#[derive(Clone, Debug, PartialEq)]
pub struct HestonOperator {
    pub operator: FlaggedOperator,
    pub state_qubits: usize,
    pub payoff: Payoff,
    /// `(name, qubits)` for every register in layout order.
    pub registers: Vec<(String, Vec<usize>)>,
}

impl HestonOperator {
    /// `2^{n_state} · P(good)`: the expected normalized payoff.
    pub fn normalized_payoff(&self, good_probability: f64) -> f64 {
        good_probability * (1usize << self.state_qubits) as f64
    }
}

/// Hadamards on the state registers, one rotation oracle per transition
/// table, and the payoff oracle; the flags are all ancillas.
#[allow(non_snake_case)]
pub fn build_heston_A(
    params: &HestonParams,
    grids: &GridSpec,
    tables: &HestonTables,
) -> Result<HestonOperator> {
    params.validate()?;
    grids.validate(params.steps)?;
    tables.validate(grids)?;
    let steps = params.steps;
    let mut next = 0usize;
    let mut registers = Vec::new();
    let mut nu_regs = Vec::new();
    let mut s_regs = Vec::new();
    for t in 1..=steps {
        if t < steps {
            let r = alloc(&mut next, GridSpec::qubits(&grids.nu[t - 1]));
            registers.push((format!("nu{t}"), r.clone()));
            nu_regs.push(r);
        }
        let r = alloc(&mut next, GridSpec::qubits(&grids.s[t - 1]));
        registers.push((format!("S{t}"), r.clone()));
        s_regs.push(r);
    }
    let state_qubits = next;
    let ancillas = 2 * steps;
    let total = state_qubits + ancillas;
    if total > MAX_SIM_QUBITS {
        return Err(Error::TooManyQubits {
            what: "Heston operator",
            limit: MAX_SIM_QUBITS,
            actual: total,
        });
    }

    let mut oracles = Vec::new();
    for t in 1..=steps {
        if t < steps {
            let mut controls = if t == 1 {
                vec![]
            } else {
                nu_regs[t - 2].clone()
            };
            controls.extend(&nu_regs[t - 1]);
            let values = flatten(&tables.nu[t - 1]);
            let target = alloc(&mut next, 1)[0];
            registers.push((format!("f{t}_nu"), vec![target]));
            oracles.push(RotationOracle::from_values(&values, &controls, target)?);
        }
        let mut controls = if t == 1 {
            vec![]
        } else {
            let mut c = nu_regs[t - 2].clone();
            c.extend(&s_regs[t - 2]);
            c
        };
        controls.extend(&s_regs[t - 1]);
        let values = flatten(&tables.s[t - 1]);
        let target = alloc(&mut next, 1)[0];
        registers.push((format!("f{t}_S"), vec![target]));
        oracles.push(RotationOracle::from_values(&values, &controls, target)?);
    }
    let payoff = payoff_values(&grids.s[steps - 1], params.strike);
    let target = alloc(&mut next, 1)[0];
    registers.push(("payoff".to_string(), vec![target]));
    oracles.push(RotationOracle::from_values(
        &payoff.values,
        &s_regs[steps - 1],
        target,
    )?);

    let mut c = Circuit::new(total)?;
    c.extend((0..state_qubits).map(Gate::H))?;
    for o in &oracles {
        c.push(o.gate())?;
    }
    let flags = GoodStateFlags::new(state_qubits..total)?;
    let operator =
        FlaggedOperator::new(c, flags, "(1/2^n) sum_paths P(path) * g(S_T) / (S_max - K)")?;
    Ok(HestonOperator {
        operator,
        state_qubits,
        payoff,
        registers,
    })
}

fn alloc(next: &mut usize, k: usize) -> Vec<usize> {
    let r: Vec<usize> = (*next..*next + k).collect();
    *next += k;
    r
}

/// `rows[cond][cur]` to the oracle index `cond + rows.len() · cur`.
fn flatten(rows: &[Vec<f64>]) -> Vec<f64> {
    let n_cond = rows.len();
    let n_cur = rows[0].len();
    let mut out = vec![0.0; n_cond * n_cur];
    for (c, row) in rows.iter().enumerate() {
        for (i, &p) in row.iter().enumerate() {
            out[c + n_cond * i] = p;
        }
    }
    out
}

/// One table entry compared between two sources.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableEntryDeviation {
    pub kind: String,
    pub t: usize,
    pub condition: usize,
    pub state: usize,
    pub reference: f64,
    pub computed: f64,
    /// Half a unit in the last printed digit of `reference`.
    pub rounding: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub max_abs_deviation: f64,
    /// Entries whose difference exceeds their reference rounding.
    pub entries_beyond_rounding: usize,
    pub entries: Vec<TableEntryDeviation>,
}

/// Rounding of the published tables: the first step is printed with two
/// decimals, the second with three.
pub fn published_rounding(_kind: &str, t: usize) -> f64 {
    if t == 1 {
        5e-3
    } else {
        5e-4
    }
}

/// Entry-wise comparison of `computed` against `reference` tables, where
/// `rounding(kind, t)` is the reference precision of step `t`.
pub fn deviation_report(
    reference: &HestonTables,
    computed: &HestonTables,
    rounding: impl Fn(&str, usize) -> f64,
) -> Result<DeviationReport> {
    let mut entries = Vec::new();
    for (kind, r, c) in [
        ("nu", &reference.nu, &computed.nu),
        ("s", &reference.s, &computed.s),
    ] {
        if r.len() != c.len() {
            return Err(Error::InvalidArgument("table shapes differ".into()));
        }
        for (t, (rr, cr)) in r.iter().zip(c).enumerate() {
            if rr.len() != cr.len() {
                return Err(Error::InvalidArgument("table shapes differ".into()));
            }
            for (cond, (rrow, crow)) in rr.iter().zip(cr).enumerate() {
                for (state, (a, b)) in rrow.iter().zip(crow).enumerate() {
                    entries.push(TableEntryDeviation {
                        kind: kind.into(),
                        t: t + 1,
                        condition: cond,
                        state,
                        reference: *a,
                        computed: *b,
                        rounding: rounding(kind, t + 1),
                    });
                }
            }
        }
    }
    let dev = |e: &TableEntryDeviation| (e.reference - e.computed).abs();
    Ok(DeviationReport {
        max_abs_deviation: entries.iter().map(dev).fold(0.0, f64::max),
        entries_beyond_rounding: entries
            .iter()
            .filter(|e| dev(e) > e.rounding + 1e-12)
            .count(),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevector::simulate;

    #[test]
    fn step_examples() {
        let p = HestonParams::example();
        let d = step_distribution(&p, 1.0, 1.0).unwrap();
        assert_eq!(d.nu_mean, 1.0);
        assert_eq!(d.nu_std, 0.5);
        let mut q = p.clone();
        q.xi = 0.0;
        q.theta = 1.7;
        let d = step_distribution(&q, 1.7, 1.0).unwrap();
        assert_eq!(d.nu_std, 0.0);
        assert!((d.nu_mean - 1.7).abs() < 1e-15);
        q.rho = 0.3;
        assert!(matches!(
            step_distribution(&q, 1.0, 1.0),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn cells() {
        let p = grid_cell_probabilities(1.0, 0.5, &[0.8, 1.2]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
        let p = grid_cell_probabilities(0.0, 1.0, &[-10.0, 10.0]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15);
        let p = grid_cell_probabilities(0.5, 0.0, &[0.0, 1.0]).unwrap();
        assert_eq!(p, vec![1.0, 0.0]);
        let p = grid_cell_probabilities(2.2, 0.0, &[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(p, vec![0.0, 0.0, 1.0, 0.0]);
        let p = grid_cell_probabilities(1.3, 0.7, &[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(grid_cell_probabilities(0.0, 1.0, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn payoffs() {
        assert_eq!(
            payoff_values(&[0.0, 1.0, 2.0, 3.0], 1.0).values,
            vec![0.0, 0.0, 0.5, 1.0]
        );
        assert_eq!(payoff_values(&[0.0, 1.0], 0.0).values, vec![0.0, 1.0]);
        let p = payoff_values(&[0.0, 1.0, 2.0, 3.0], 3.5);
        assert!(p.degenerate && p.values.iter().all(|v| *v == 0.0));
        let p = payoff_values(&[0.0, 1.0, 2.0, 3.0], 3.0 - 1e-9);
        assert!(p.values[..3].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn published_tables_through_the_circuit() {
        let params = HestonParams::example();
        let grids = GridSpec::example();
        let tables = HestonTables::published();
        let h = build_heston_A(&params, &grids, &tables).unwrap();
        assert_eq!(h.operator.num_qubits(), 8);
        assert_eq!(h.state_qubits, 4);
        let p = simulate(&h.operator.circuit)
            .unwrap()
            .good_probability(&h.operator.flags);
        let reference = expected_payoff_reference(&params, &grids, &tables).unwrap();
        assert!((16.0 * 2.0 * p - reference).abs() < 1e-12);
        let marginal = [0.040, 0.725, 0.233, 0.002];
        let g = [0.0, 0.0, 0.5, 1.0];
        let classical: f64 = marginal.iter().zip(g).map(|(m, g)| m * g).sum();
        assert!((classical - 0.1185).abs() < 1e-12);
    }

    #[test]
    fn computed_tables_and_csv() {
        let params = HestonParams::example();
        let grids = GridSpec::example();
        let t = HestonTables::compute(&params, &grids).unwrap();
        assert!(t.max_row_sum_error() < 1e-12);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = HestonTables::read_csv(&buf[..], &grids).unwrap();
        assert_eq!(back, t);
        assert!(HestonTables::read_csv(
            "kind,t,condition,state,probability\nnu,1,0,0,0.5\n".as_bytes(),
            &grids
        )
        .is_err());
        let m = back.terminal_marginal(&grids).unwrap();
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn worthless_option() {
        let mut params = HestonParams::example();
        params.strike = 5.0;
        let grids = GridSpec::example();
        let tables = HestonTables::published();
        assert_eq!(
            expected_payoff_reference(&params, &grids, &tables).unwrap(),
            0.0
        );
        let h = build_heston_A(&params, &grids, &tables).unwrap();
        let p = simulate(&h.operator.circuit)
            .unwrap()
            .good_probability(&h.operator.flags);
        assert!(p.abs() < 1e-15);
    }

    #[test]
    fn single_step_layout() {
        let mut params = HestonParams::example();
        params.steps = 1;
        let grids = GridSpec {
            nu: vec![],
            s: vec![vec![0.0, 1.0, 2.0, 3.0]],
        };
        let tables = HestonTables::compute(&params, &grids).unwrap();
        let h = build_heston_A(&params, &grids, &tables).unwrap();
        assert_eq!(h.operator.num_qubits(), 4);
        let p = simulate(&h.operator.circuit)
            .unwrap()
            .good_probability(&h.operator.flags);
        let r = expected_payoff_reference(&params, &grids, &tables).unwrap();
        assert!((h.normalized_payoff(p) * h.payoff.normalizer - r).abs() < 1e-12);
    }
}
