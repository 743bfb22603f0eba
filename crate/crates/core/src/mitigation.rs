//! Synthetic noise, readout calibration and correction, CNOT folding and
//! quadratic zero-noise extrapolation.
//!
//! CNOT noise is two-qubit depolarizing: after each CNOT, with probability
//! `cnot_error`, one of the 15 non-identity two-qubit Paulis is applied
//! uniformly at random. Shots are sampled by trajectories.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::statevector::{self, binomial, sample_bitstrings, GoodStateFlags, StateVector};

/// Largest register accepted by calibration.
pub const MAX_CALIBRATION_QUBITS: usize = 6;
/// Calibrations with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e8;
/// Largest `#CNOT · 2^n` for which trajectory prefix states are stored.
const MAX_PREFIX_AMPLITUDES: usize = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub cnot_error: f64,
    /// `P(measure 1 | prepared 0)`.
    pub readout_p01: f64,
    /// `P(measure 0 | prepared 1)`.
    pub readout_p10: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            cnot_error: 0.01,
            readout_p01: 0.02,
            readout_p10: 0.04,
        }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            cnot_error: 0.0,
            readout_p01: 0.0,
            readout_p10: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("cnot_error", self.cnot_error),
            ("readout_p01", self.readout_p01),
            ("readout_p10", self.readout_p10),
        ] {
            if !(0.0..=0.5).contains(&p) {
                return Err(Error::InvalidArgument(format!(
                    "{name} = {p} outside [0, 0.5]"
                )));
            }
        }
        Ok(())
    }

    /// `P(measured | prepared)` over `n` qubits with independent flips.
    pub fn readout_column(&self, n: usize, prepared: usize) -> Vec<f64> {
        (0..1usize << n)
            .map(|m| {
                (0..n)
                    .map(|q| {
                        let (s, r) = ((prepared >> q) & 1, (m >> q) & 1);
                        match (s, r) {
                            (0, 0) => 1.0 - self.readout_p01,
                            (0, _) => self.readout_p01,
                            (_, 0) => self.readout_p10,
                            _ => 1.0 - self.readout_p10,
                        }
                    })
                    .product()
            })
            .collect()
    }
}

/// Replaces every CNOT by `factor` copies.
pub fn fold_cnots(c: &Circuit, factor: usize) -> Result<Circuit> {
    if factor.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "fold factor {factor} must be odd"
        )));
    }
    let mut out = Circuit::new(c.num_qubits())?;
    for g in c.gates() {
        let copies = if matches!(g, Gate::Cx { .. }) {
            factor
        } else {
            1
        };
        for _ in 0..copies {
            out.push(g.clone())?;
        }
    }
    Ok(out)
}

/// Value at `c = 0` of the quadratic through three `(c, p)` points.
pub fn richardson_unclipped(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() != 3 {
        return Err(Error::InvalidArgument(format!(
            "quadratic extrapolation needs 3 points, got {}",
            points.len()
        )));
    }
    for i in 0..3 {
        for j in 0..i {
            if points[i].0 == points[j].0 {
                return Err(Error::InvalidArgument(format!(
                    "duplicate noise factor {}",
                    points[i].0
                )));
            }
        }
    }
    Ok((0..3)
        .map(|i| {
            let w: f64 = (0..3)
                .filter(|&j| j != i)
                .map(|j| -points[j].0 / (points[i].0 - points[j].0))
                .product();
            w * points[i].1
        })
        .sum())
}

/// [`richardson_unclipped`] clipped to `[0, 1]`.
pub fn richardson_zero_noise(points: &[(f64, f64)]) -> Result<f64> {
    Ok(richardson_unclipped(points)?.clamp(0.0, 1.0))
}

/// Good-state estimates at fold factors 1, 3, 5.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldedRun {
    pub fold_factors: Vec<usize>,
    pub probabilities: Vec<f64>,
}

impl FoldedRun {
    pub const FACTORS: [usize; 3] = [1, 3, 5];

    pub fn new(probabilities: [f64; 3]) -> Self {
        Self {
            fold_factors: Self::FACTORS.to_vec(),
            probabilities: probabilities.to_vec(),
        }
    }

    pub fn extrapolate(&self) -> Result<f64> {
        if self.fold_factors.iter().any(|f| f % 2 == 0) {
            return Err(Error::InvalidArgument("fold factors must be odd".into()));
        }
        let pts: Vec<(f64, f64)> = self
            .fold_factors
            .iter()
            .zip(&self.probabilities)
            .map(|(&c, &p)| (c as f64, p))
            .collect();
        richardson_zero_noise(&pts)
    }
}

/// Column-stochastic confusion matrix, `confusion[(m, s)] = P(m | s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReadoutCalibration {
    pub num_qubits: usize,
    pub confusion: DMatrix<f64>,
}

impl ReadoutCalibration {
    pub fn new(confusion: DMatrix<f64>) -> Result<Self> {
        let dim = confusion.nrows();
        if dim != confusion.ncols() || !dim.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "confusion matrix must be 2^n x 2^n, got {}x{}",
                confusion.nrows(),
                confusion.ncols()
            )));
        }
        if confusion
            .iter()
            .any(|&p| !(-1e-12..=1.0 + 1e-12).contains(&p))
        {
            return Err(Error::InvalidArgument(
                "confusion entries must lie in [0, 1]".into(),
            ));
        }
        for (j, col) in confusion.column_iter().enumerate() {
            if (col.sum() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "column {j} does not sum to 1"
                )));
            }
        }
        Ok(Self {
            num_qubits: dim.trailing_zeros() as usize,
            confusion,
        })
    }

    pub fn identity(num_qubits: usize) -> Self {
        Self {
            num_qubits,
            confusion: DMatrix::identity(1 << num_qubits, 1 << num_qubits),
        }
    }

    pub fn condition_number(&self) -> f64 {
        let sv = self.confusion.clone().svd(false, false).singular_values;
        let max = sv.iter().copied().fold(0.0, f64::max);
        let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// CSV of the matrix, one row per measured outcome, no header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(out);
        for row in self.confusion.row_iter() {
            w.write_record(row.iter().map(|p| format!("{p:.17e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>().map_err(|_| Error::Parse {
                        line: i + 1,
                        message: format!("invalid number {s:?}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument(
                "calibration CSV must be square".into(),
            ));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }
}

/// Prepares every basis state with X gates and samples its readout.
pub fn calibrate_readout(
    n: usize,
    noise: &NoiseModel,
    shots: u64,
    seed: u64,
) -> Result<ReadoutCalibration> {
    noise.validate()?;
    if n == 0 || n > MAX_CALIBRATION_QUBITS {
        return Err(Error::TooManyQubits {
            what: "readout calibration",
            limit: MAX_CALIBRATION_QUBITS,
            actual: n,
        });
    }
    if shots == 0 {
        return Err(Error::InvalidArgument(
            "calibration needs at least one shot".into(),
        ));
    }
    let dim = 1usize << n;
    let mut confusion = DMatrix::zeros(dim, dim);
    for s in 0..dim {
        let prep = Circuit::from_gates(n, (0..n).filter(|q| (s >> q) & 1 == 1).map(Gate::X))?;
        let state = statevector::simulate(&prep)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s as u64);
        let counts = apply_readout(&state.probabilities(), shots, noise, &mut rng);
        for (m, c) in counts.iter().enumerate() {
            confusion[(m, s)] = *c as f64 / shots as f64;
        }
    }
    Ok(ReadoutCalibration {
        num_qubits: n,
        confusion,
    })
}

/// Samples `shots` outcomes of `probabilities` and pushes each through the
/// readout channel.
fn apply_readout(
    probabilities: &[f64],
    shots: u64,
    noise: &NoiseModel,
    rng: &mut ChaCha8Rng,
) -> Vec<u64> {
    let ideal = sample_bitstrings(probabilities, shots, rng);
    readout_counts(&ideal, noise, rng)
}

fn readout_counts(ideal: &[u64], noise: &NoiseModel, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let n = ideal.len().trailing_zeros() as usize;
    let mut out = vec![0u64; ideal.len()];
    for (s, &c) in ideal.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let col = noise.readout_column(n, s);
        for (m, k) in sample_bitstrings(&col, c, rng).into_iter().enumerate() {
            out[m] += k;
        }
    }
    out
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &DVector<f64>) -> DVector<f64> {
    let mut u: Vec<f64> = v.iter().copied().collect();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (i, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            tau = t;
        }
    }
    v.map(|x| (x - tau).max(0.0))
}

/// `argmin ‖C x − measured‖₂` over the probability simplex.
pub fn correct_readout(measured: &[f64], cal: &ReadoutCalibration) -> Result<Vec<f64>> {
    let dim = cal.confusion.nrows();
    if measured.len() != dim {
        return Err(Error::InvalidArgument(format!(
            "distribution of length {} for a {dim}-outcome calibration",
            measured.len()
        )));
    }
    let condition = cal.condition_number();
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let m = DVector::from_column_slice(measured);
    let direct = cal
        .confusion
        .clone()
        .lu()
        .solve(&m)
        .ok_or(Error::IllConditioned { condition })?;
    if direct.iter().all(|&x| x >= -1e-12) && (direct.sum() - 1.0).abs() <= 1e-12 {
        let x = direct.map(|x| x.max(0.0));
        let s = x.sum();
        return Ok(x.iter().map(|v| v / s).collect());
    }

    // accelerated projected gradient (FISTA)
    let c = &cal.confusion;
    let ctc = c.transpose() * c;
    let ctm = c.transpose() * &m;
    let lipschitz = ctc
        .clone()
        .svd(false, false)
        .singular_values
        .max()
        .max(1e-300);
    let mut x = project_simplex(&direct);
    let mut y = x.clone();
    let mut t: f64 = 1.0;
    for _ in 0..200_000 {
        let grad = &ctc * &y - &ctm;
        let next = project_simplex(&(&y - grad / lipschitz));
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let step = (&next - &x).amax();
        y = &next + (&next - &x) * ((t - 1.0) / t_next);
        x = next;
        t = t_next;
        if step < 1e-15 {
            break;
        }
    }
    Ok(x.iter().copied().collect())
}

/// Noisy shot sampler for a lowered circuit.
pub struct NoisySampler {
    circuit: Circuit,
    noise: NoiseModel,
    cx_positions: Vec<usize>,
    prefix: Option<Vec<Vec<Complex64>>>,
    ideal: Vec<f64>,
    single_error: Option<Vec<Vec<f64>>>,
}

const PAULIS: usize = 15;

fn pauli_gate(code: usize, q: usize) -> Option<Gate> {
    match code {
        1 => Some(Gate::X(q)),
        2 => Some(Gate::Y(q)),
        3 => Some(Gate::Z(q)),
        _ => None,
    }
}

impl NoisySampler {
    /// `circuit` must use CNOT as its only multi-qubit gate.
    pub fn new(circuit: &Circuit, noise: &NoiseModel) -> Result<Self> {
        noise.validate()?;
        if let Some(g) = circuit
            .gates()
            .iter()
            .find(|g| g.qubits().len() > 1 && !matches!(g, Gate::Cx { .. }))
        {
            return Err(Error::Unsupported(format!(
                "noisy sampling needs a lowered circuit, found {}",
                g.name()
            )));
        }
        let cx_positions: Vec<usize> = circuit
            .gates()
            .iter()
            .enumerate()
            .filter(|(_, g)| matches!(g, Gate::Cx { .. }))
            .map(|(i, _)| i)
            .collect();
        let dim = 1usize << circuit.num_qubits();
        let mut state = StateVector::zero(circuit.num_qubits())?;
        let store = cx_positions.len().saturating_mul(dim) <= MAX_PREFIX_AMPLITUDES;
        let mut prefix = Vec::new();
        let mut amps = state.amplitudes().to_vec();
        for g in circuit.gates() {
            statevector::apply_gate(&mut amps, g);
            if store && matches!(g, Gate::Cx { .. }) {
                prefix.push(amps.clone());
            }
        }
        state = StateVector::from_amplitudes(amps)?;
        let mut sampler = Self {
            circuit: circuit.clone(),
            noise: *noise,
            cx_positions,
            prefix: store.then_some(prefix),
            ideal: state.probabilities(),
            single_error: None,
        };
        if store
            && sampler.cx_positions.len() * PAULIS * dim <= MAX_PREFIX_AMPLITUDES
            && noise.cnot_error > 0.0
        {
            let table: Vec<Vec<f64>> = (0..sampler.cx_positions.len() * PAULIS)
                .into_par_iter()
                .map(|i| sampler.trajectory(&[(i / PAULIS, i % PAULIS + 1)]))
                .collect();
            sampler.single_error = Some(table);
        }
        Ok(sampler)
    }

    pub fn ideal_probabilities(&self) -> &[f64] {
        &self.ideal
    }

    pub fn cnot_count(&self) -> usize {
        self.cx_positions.len()
    }

    /// Final distribution with Paulis `(cnot index, code 1..=15)` inserted.
    fn trajectory(&self, errors: &[(usize, usize)]) -> Vec<f64> {
        let gates = self.circuit.gates();
        let (first_cx, _) = errors[0];
        let (mut amps, start) = match &self.prefix {
            Some(p) => (p[first_cx].clone(), self.cx_positions[first_cx]),
            None => {
                let mut a = vec![Complex64::new(0.0, 0.0); 1 << self.circuit.num_qubits()];
                a[0] = Complex64::new(1.0, 0.0);
                for g in &gates[..self.cx_positions[first_cx]] {
                    statevector::apply_gate(&mut a, g);
                }
                let g = &gates[self.cx_positions[first_cx]];
                statevector::apply_gate(&mut a, g);
                (a, self.cx_positions[first_cx])
            }
        };
        let mut next_err = 0;
        let mut cx_index = first_cx;
        for (pos, g) in gates.iter().enumerate().skip(start) {
            if pos > start {
                statevector::apply_gate(&mut amps, g);
                if !matches!(g, Gate::Cx { .. }) {
                    continue;
                }
                cx_index += 1;
            }
            while next_err < errors.len() && errors[next_err].0 == cx_index {
                if let Gate::Cx { control, target } = g {
                    let code = errors[next_err].1;
                    for p in [
                        pauli_gate(code % 4, *control),
                        pauli_gate(code / 4, *target),
                    ]
                    .into_iter()
                    .flatten()
                    {
                        statevector::apply_gate(&mut amps, &p);
                    }
                }
                next_err += 1;
            }
        }
        amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Measurement counts over all basis states, readout noise included.
    pub fn sample_counts(&self, shots: u64, seed: u64) -> Vec<u64> {
        const CHUNK: u64 = 4096;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_cx = self.cx_positions.len();
        let p = self.noise.cnot_error;
        let p_clean = (1.0 - p).powi(n_cx as i32);
        let clean = if p == 0.0 || n_cx == 0 {
            shots
        } else {
            binomial(&mut rng, shots, p_clean)
        };
        let mut ideal = sample_bitstrings(&self.ideal, clean, &mut rng);
        let noisy = shots - clean;
        let chunks = noisy.div_ceil(CHUNK);
        let partial: Vec<Vec<u64>> = (0..chunks)
            .into_par_iter()
            .map(|ci| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(ci + 1);
                let len = CHUNK.min(noisy - ci * CHUNK);
                let mut counts = vec![0u64; self.ideal.len()];
                let mut errors = Vec::new();
                for _ in 0..len {
                    self.draw_errors(p, p_clean, &mut rng, &mut errors);
                    let owned;
                    let dist: &[f64] = match (&self.single_error, errors.len()) {
                        (Some(table), 1) => &table[errors[0].0 * PAULIS + errors[0].1 - 1],
                        _ => {
                            owned = self.trajectory(&errors);
                            &owned
                        }
                    };
                    counts[categorical(dist, &mut rng)] += 1;
                }
                counts
            })
            .collect();
        for c in partial {
            for (a, b) in ideal.iter_mut().zip(c) {
                *a += b;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        readout_counts(&ideal, &self.noise, &mut rng)
    }

    /// Error positions conditioned on at least one error.
    fn draw_errors(
        &self,
        p: f64,
        p_clean: f64,
        rng: &mut ChaCha8Rng,
        out: &mut Vec<(usize, usize)>,
    ) {
        out.clear();
        let n_cx = self.cx_positions.len();
        let ln_q = (1.0 - p).ln();
        let u: f64 = rng.random();
        let first = if p >= 1.0 {
            0
        } else {
            (((1.0 - u * (1.0 - p_clean)).ln() / ln_q).floor() as usize).min(n_cx - 1)
        };
        out.push((first, rng.random_range(1..=PAULIS)));
        let mut pos = first;
        loop {
            let u: f64 = rng.random();
            let skip = if p >= 1.0 {
                0
            } else {
                ((1.0 - u).ln() / ln_q).floor() as usize
            };
            pos = pos.saturating_add(skip).saturating_add(1);
            if pos >= n_cx {
                break;
            }
            out.push((pos, rng.random_range(1..=PAULIS)));
        }
    }
}

fn categorical(dist: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random::<f64>() * dist.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    dist.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// Fraction of counts with every flag qubit reading 1.
pub fn good_fraction(distribution: &[f64], flags: &GoodStateFlags) -> f64 {
    let mask = flags.mask();
    distribution
        .iter()
        .enumerate()
        .filter(|(i, _)| i & mask == mask)
        .map(|(_, p)| p)
        .sum::<f64>()
        / distribution.iter().sum::<f64>()
}

pub fn counts_to_distribution(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    counts
        .iter()
        .map(|&c| c as f64 / total.max(1) as f64)
        .collect()
}
