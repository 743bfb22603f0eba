//! Exact statevector simulation, good-state probabilities and shot sampling.
//!
//! Sampling uses ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64`, so a given seed reproduces bit-identical counts.

use std::collections::BTreeSet;
use std::io::Write;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};

/// Largest width accepted by [`simulate`].
pub const MAX_SIM_QUBITS: usize = 24;

/// Amplitudes of an `n`-qubit register (qubit 0 least significant).
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
    num_qubits: usize,
}

impl StateVector {
    /// `|0…0⟩` on `num_qubits` qubits.
    pub fn zero(num_qubits: usize) -> Result<Self> {
        if num_qubits > MAX_SIM_QUBITS {
            return Err(Error::TooManyQubits {
                what: "statevector simulation",
                limit: MAX_SIM_QUBITS,
                actual: num_qubits,
            });
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self {
            amplitudes,
            num_qubits,
        })
    }

    /// Wraps raw amplitudes; the length must be a power of two.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "amplitude vector length {len} is not a power of two"
            )));
        }
        Ok(Self {
            num_qubits: len.trailing_zeros() as usize,
            amplitudes,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Applies every gate of `c` in order.
    pub fn apply(&mut self, c: &Circuit) -> Result<()> {
        if c.num_qubits() != self.num_qubits {
            return Err(Error::WidthMismatch {
                left: self.num_qubits,
                right: c.num_qubits(),
            });
        }
        for g in c.gates() {
            apply_gate(&mut self.amplitudes, g);
        }
        Ok(())
    }

    pub fn apply_gate(&mut self, g: &Gate) {
        apply_gate(&mut self.amplitudes, g);
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .norm_sqr()
    }

    /// Probability that every qubit in `flags` reads `|1⟩`.
    pub fn good_probability(&self, flags: &GoodStateFlags) -> f64 {
        let mask = flags.mask();
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask == mask)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Writes `index,re,im` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "index,re,im")?;
        for (i, a) in self.amplitudes.iter().enumerate() {
            writeln!(out, "{i},{:.17e},{:.17e}", a.re, a.im)?;
        }
        Ok(())
    }
}

/// Qubits that must all read `|1⟩` for a basis state to count as good.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoodStateFlags {
    qubits: BTreeSet<usize>,
}

impl GoodStateFlags {
    pub fn new(qubits: impl IntoIterator<Item = usize>) -> Result<Self> {
        let qubits: BTreeSet<usize> = qubits.into_iter().collect();
        if qubits.is_empty() {
            return Err(Error::InvalidArgument(
                "good-state flags must name at least one qubit".into(),
            ));
        }
        Ok(Self { qubits })
    }

    pub fn single(qubit: usize) -> Self {
        Self {
            qubits: BTreeSet::from([qubit]),
        }
    }

    pub fn qubits(&self) -> Vec<usize> {
        self.qubits.iter().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.qubits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qubits.is_empty()
    }

    pub fn contains(&self, q: usize) -> bool {
        self.qubits.contains(&q)
    }

    pub fn mask(&self) -> usize {
        self.qubits.iter().fold(0, |m, q| m | (1 << q))
    }

    pub fn check_width(&self, num_qubits: usize) -> Result<()> {
        match self.qubits.iter().next_back() {
            Some(&q) if q >= num_qubits => Err(Error::QubitOutOfRange {
                index: q,
                num_qubits,
            }),
            _ => Ok(()),
        }
    }
}

/// Good/bad tally of a sampling run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotCounts {
    pub shots: u64,
    pub good_hits: u64,
    pub seed: u64,
}

impl ShotCounts {
    pub fn frequency(&self) -> f64 {
        self.good_hits as f64 / self.shots as f64
    }
}

/// Runs `c` on `|0…0⟩`.
pub fn simulate(c: &Circuit) -> Result<StateVector> {
    let mut s = StateVector::zero(c.num_qubits())?;
    s.apply(c)?;
    Ok(s)
}

pub fn good_probability(s: &StateVector, flags: &GoodStateFlags) -> f64 {
    s.good_probability(flags)
}

/// Draws `good_hits ~ Binomial(shots, P(good))`.
pub fn sample(
    s: &StateVector,
    flags: &GoodStateFlags,
    shots: u64,
    seed: u64,
) -> Result<ShotCounts> {
    let p = s.good_probability(flags).clamp(0.0, 1.0);
    sample_bernoulli(p, shots, seed)
}

/// Binomial draw of a good-state event with known probability `p`.
pub fn sample_bernoulli(p: f64, shots: u64, seed: u64) -> Result<ShotCounts> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let good_hits = binomial(&mut rng, shots, p);
    Ok(ShotCounts {
        shots,
        good_hits,
        seed,
    })
}

pub(crate) fn binomial(rng: &mut ChaCha8Rng, n: u64, p: f64) -> u64 {
    let p = p.clamp(0.0, 1.0);
    if p == 0.0 || n == 0 {
        return 0;
    }
    if p == 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("p in (0,1)").sample(rng)
}

/// Full computational-basis sampling: `counts[i]` is how often basis state
/// `i` was observed. Uses sequential conditional binomials (exact multinomial).
pub fn sample_bitstrings(probabilities: &[f64], shots: u64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut counts = vec![0u64; probabilities.len()];
    let mut remaining = shots;
    let mut mass: f64 = probabilities.iter().map(|p| p.max(0.0)).sum();
    for (i, &p) in probabilities.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let p = p.max(0.0);
        if i + 1 == probabilities.len() || mass <= p {
            counts[i] = remaining;
            break;
        }
        let k = binomial(rng, remaining, p / mass);
        counts[i] = k;
        remaining -= k;
        mass -= p;
    }
    counts
}

#[inline]
fn apply_single(amps: &mut [Complex64], q: usize, m: [[Complex64; 2]; 2]) {
    let bit = 1usize << q;
    for i in 0..amps.len() {
        if i & bit == 0 {
            let a0 = amps[i];
            let a1 = amps[i | bit];
            amps[i] = m[0][0] * a0 + m[0][1] * a1;
            amps[i | bit] = m[1][0] * a0 + m[1][1] * a1;
        }
    }
}

#[inline]
fn rotate_pair(amps: &mut [Complex64], i0: usize, i1: usize, angle: f64) {
    let (s, c) = (angle / 2.0).sin_cos();
    let a0 = amps[i0];
    let a1 = amps[i1];
    amps[i0] = a0 * c - a1 * s;
    amps[i1] = a0 * s + a1 * c;
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Applies one gate to a raw amplitude buffer.
pub fn apply_gate(amps: &mut [Complex64], gate: &Gate) {
    match gate {
        Gate::H(q) => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            apply_single(amps, *q, [[c(s, 0.0), c(s, 0.0)], [c(s, 0.0), c(-s, 0.0)]]);
        }
        Gate::X(q) => {
            let bit = 1usize << q;
            for i in 0..amps.len() {
                if i & bit == 0 {
                    amps.swap(i, i | bit);
                }
            }
        }
        Gate::Y(q) => apply_single(
            amps,
            *q,
            [[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]],
        ),
        Gate::Z(q) => {
            let bit = 1usize << q;
            amps.iter_mut()
                .enumerate()
                .filter(|(i, _)| i & bit != 0)
                .for_each(|(_, a)| *a = -*a);
        }
        Gate::Phase { target, angle } => {
            let bit = 1usize << target;
            let ph = Complex64::from_polar(1.0, *angle);
            amps.iter_mut()
                .enumerate()
                .filter(|(i, _)| i & bit != 0)
                .for_each(|(_, a)| *a *= ph);
        }
        Gate::Ry { target, angle } => {
            let bit = 1usize << target;
            for i in 0..amps.len() {
                if i & bit == 0 {
                    rotate_pair(amps, i, i | bit, *angle);
                }
            }
        }
        Gate::Cx { control, target } => {
            let cb = 1usize << control;
            let tb = 1usize << target;
            for i in 0..amps.len() {
                if i & cb != 0 && i & tb == 0 {
                    amps.swap(i, i | tb);
                }
            }
        }
        Gate::Cz { control, target } => {
            let mask = (1usize << control) | (1usize << target);
            amps.iter_mut()
                .enumerate()
                .filter(|(i, _)| i & mask == mask)
                .for_each(|(_, a)| *a = -*a);
        }
        Gate::Mcz { qubits } => {
            let mask = qubits.iter().fold(0usize, |m, q| m | (1 << q));
            amps.iter_mut()
                .enumerate()
                .filter(|(i, _)| i & mask == mask)
                .for_each(|(_, a)| *a = -*a);
        }
        Gate::Cry {
            control,
            target,
            angle,
        } => {
            let cb = 1usize << control;
            let tb = 1usize << target;
            for i in 0..amps.len() {
                if i & cb != 0 && i & tb == 0 {
                    rotate_pair(amps, i, i | tb, *angle);
                }
            }
        }
        Gate::MultiplexedRy {
            controls,
            target,
            angles,
        } => {
            let tb = 1usize << target;
            for i in 0..amps.len() {
                if i & tb == 0 {
                    let sel = controls
                        .iter()
                        .enumerate()
                        .fold(0usize, |acc, (j, q)| acc | (((i >> q) & 1) << j));
                    rotate_pair(amps, i, i | tb, angles[sel]);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Gate;
    use std::f64::consts::PI;

    #[test]
    fn uniform_superposition() {
        let c = Circuit::from_gates(2, [Gate::H(0), Gate::H(1)]).unwrap();
        let s = simulate(&c).unwrap();
        for a in s.amplitudes() {
            assert!((a.re - 0.5).abs() < 1e-15 && a.im.abs() < 1e-15);
        }
    }

    #[test]
    fn empty_circuit_is_zero_state() {
        let s = simulate(&Circuit::new(3).unwrap()).unwrap();
        assert_eq!(s.amplitudes()[0], Complex64::new(1.0, 0.0));
        assert!(s.amplitudes()[1..].iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn fig4_circuit_midpoint_n1() {
        // theta0 = 2*pi*x0, theta1 = 2*pi*(x1 - x0) with x = {1/4, 3/4}
        let c = Circuit::from_gates(
            2,
            [
                Gate::H(0),
                Gate::Ry {
                    target: 1,
                    angle: PI / 2.0,
                },
                Gate::Cry {
                    control: 0,
                    target: 1,
                    angle: PI,
                },
            ],
        )
        .unwrap();
        let s = simulate(&c).unwrap();
        let p = s.good_probability(&GoodStateFlags::single(1));
        let expected = ((PI / 4.0).sin().powi(2) + (3.0 * PI / 4.0).sin().powi(2)) / 2.0;
        assert!((p - expected).abs() < 1e-12);
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn guard_on_width() {
        assert!(StateVector::zero(MAX_SIM_QUBITS + 1).is_err());
    }

    #[test]
    fn pure_good_state() {
        let c = Circuit::from_gates(1, [Gate::X(0)]).unwrap();
        let s = simulate(&c).unwrap();
        assert_eq!(s.good_probability(&GoodStateFlags::single(0)), 1.0);
    }

    #[test]
    fn flags_reject_empty_and_out_of_range() {
        assert!(GoodStateFlags::new([]).is_err());
        assert!(GoodStateFlags::new([3]).unwrap().check_width(3).is_err());
    }

    #[test]
    fn spectator_hadamard_keeps_probability() {
        let c = Circuit::from_gates(
            3,
            [
                Gate::H(0),
                Gate::Cry {
                    control: 0,
                    target: 1,
                    angle: 1.2,
                },
            ],
        )
        .unwrap();
        let flags = GoodStateFlags::single(1);
        let p0 = simulate(&c).unwrap().good_probability(&flags);
        let mut c2 = c.clone();
        c2.push(Gate::H(2)).unwrap();
        let p1 = simulate(&c2).unwrap().good_probability(&flags);
        assert!((p0 - p1).abs() < 1e-12);
    }

    #[test]
    fn sampling_edge_cases() {
        let one = simulate(&Circuit::from_gates(1, [Gate::X(0)]).unwrap()).unwrap();
        let zero = simulate(&Circuit::new(1).unwrap()).unwrap();
        let f = GoodStateFlags::single(0);
        assert_eq!(sample(&one, &f, 100, 7).unwrap().good_hits, 100);
        assert_eq!(sample(&zero, &f, 100, 7).unwrap().good_hits, 0);
        assert!(sample(&zero, &f, 0, 7).is_err());
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let a = sample_bernoulli(0.3, 8192, 42).unwrap();
        let b = sample_bernoulli(0.3, 8192, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn binomial_concentration() {
        let shots = 8192u64;
        let mean: f64 = (0..100)
            .map(|seed| sample_bernoulli(0.5, shots, seed).unwrap().frequency())
            .sum::<f64>()
            / 100.0;
        let sigma = 0.5 / (shots as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * sigma);
    }

    #[test]
    fn bitstring_counts_sum_to_shots() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let counts = sample_bitstrings(&[0.1, 0.2, 0.3, 0.4], 10_000, &mut rng);
        assert_eq!(counts.iter().sum::<u64>(), 10_000);
        assert!((counts[3] as f64 / 10_000.0 - 0.4).abs() < 0.03);
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let s = StateVector::zero(1).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("index,re,im\n0,1."));
        assert_eq!(text.lines().count(), 3);
    }
}
