//! Spin-Echo rewrite of conjugated rotations.
//!
//! For Pauli axes `U ≠ V`, `R_U(θ) V R_U(−θ) = R_U(2θ) V`; the same holds
//! for a multiplexed rotation `R_U^f` with `V` on its target. Applied to
//! `A = R_Y^f (H^{⊗n} ⊗ I)` and `Sψ0 = Z` on the target, every
//! `A† Sψ0 A` block of `Q^k A` collapses to `H R_Y^{−2f} Z H`, so the power
//! needs `k + 1` oracle applications instead of `2k + 1`.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::grover::{build_s0, PowerCircuit};
use crate::state_prep::{FlaggedOperator, RotationOracle};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> Matrix2<Complex64> {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match self {
            Pauli::X => Matrix2::new(o, l, l, o),
            Pauli::Y => Matrix2::new(o, -i, i, o),
            Pauli::Z => Matrix2::new(l, o, o, -l),
        }
    }

    /// `exp(−i θ P / 2)`.
    pub fn rotation(self, theta: f64) -> Matrix2<Complex64> {
        let (s, c) = (theta / 2.0).sin_cos();
        Matrix2::identity() * Complex64::new(c, 0.0) - self.matrix() * Complex64::new(0.0, s)
    }

    fn gate(self, q: usize) -> Gate {
        match self {
            Pauli::X => Gate::X(q),
            Pauli::Y => Gate::Y(q),
            Pauli::Z => Gate::Z(q),
        }
    }
}

/// Max-entry deviation between `R_U(θ) V R_U(−θ)` and `R_U(2θ) V`.
pub fn single_qubit_identity_deviation(u: Pauli, v: Pauli, theta: f64) -> f64 {
    let lhs = u.rotation(theta) * v.matrix() * u.rotation(-theta);
    let rhs = u.rotation(2.0 * theta) * v.matrix();
    (lhs - rhs).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `R_U^f (I ⊗ V) R_U^{−f}` preceded by `prefix`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinEchoPattern {
    pub rotation_axis: Pauli,
    pub reflection: Pauli,
    pub oracle: RotationOracle,
    pub prefix: Circuit,
}

impl SpinEchoPattern {
    /// The three-gate original (time order `R^{−f}`, `V`, `R^{f}`).
    pub fn original(&self) -> Result<Circuit> {
        self.require_y_rotation()?;
        let mut c = self.prefix.clone();
        c.push(self.oracle.scaled(-1.0).gate())?;
        c.push(self.reflection.gate(self.oracle.target()))?;
        c.push(self.oracle.gate())?;
        Ok(c)
    }

    fn require_y_rotation(&self) -> Result<()> {
        if self.rotation_axis != Pauli::Y {
            return Err(Error::Unsupported(format!(
                "multiplexed rotations about {:?} are not in the gate set",
                self.rotation_axis
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Rewrite {
    /// `U ≠ V`: `V` followed by the doubled rotation.
    Rewritten(Circuit),
    /// `U = V`: the rotations commute away and only `V` remains.
    Commuting(Circuit),
}

impl Rewrite {
    pub fn circuit(&self) -> &Circuit {
        match self {
            Rewrite::Rewritten(c) | Rewrite::Commuting(c) => c,
        }
    }
}

/// Collapses the conjugation to `R_U^{2f} (I ⊗ V)`.
pub fn rewrite_conjugation(pattern: &SpinEchoPattern) -> Result<Rewrite> {
    pattern.require_y_rotation()?;
    let mut c = pattern.prefix.clone();
    c.push(pattern.reflection.gate(pattern.oracle.target()))?;
    if pattern.rotation_axis == pattern.reflection {
        return Ok(Rewrite::Commuting(c));
    }
    c.push(pattern.oracle.scaled(2.0).gate())?;
    Ok(Rewrite::Rewritten(c))
}

/// `A = R_Y^f (H^{⊗n} ⊗ I)` with the oracle target as the only flag.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalForm {
    pub num_qubits: usize,
    pub oracle: RotationOracle,
}

impl NormalForm {
    pub fn new(num_qubits: usize, oracle: RotationOracle) -> Result<Self> {
        if oracle.max_qubit() >= num_qubits {
            return Err(Error::QubitOutOfRange {
                index: oracle.max_qubit(),
                num_qubits,
            });
        }
        Ok(Self { num_qubits, oracle })
    }

    /// Recognises an operator consisting of Hadamards on exactly the oracle
    /// controls followed by one multiplexed (or plain) Y rotation on the
    /// single flag qubit.
    pub fn extract(op: &FlaggedOperator) -> Result<Self> {
        let flags = op.flags.qubits();
        let [flag] = flags[..] else {
            return Err(Error::NotNormalForm(format!("{} flag qubits", flags.len())));
        };
        let (last, prefix) = op
            .circuit
            .gates()
            .split_last()
            .ok_or_else(|| Error::NotNormalForm("empty circuit".into()))?;
        let oracle = match last {
            Gate::MultiplexedRy {
                controls,
                target,
                angles,
            } => RotationOracle::from_angles(angles.clone(), controls, *target)?,
            Gate::Ry { target, angle } => RotationOracle::from_angles(vec![*angle], &[], *target)?,
            other => {
                return Err(Error::NotNormalForm(format!(
                    "last gate is {} instead of a Y rotation",
                    other.name()
                )))
            }
        };
        if oracle.target() != flag {
            return Err(Error::NotNormalForm("oracle target is not the flag".into()));
        }
        let mut hs: Vec<usize> = Vec::with_capacity(prefix.len());
        for g in prefix {
            match g {
                Gate::H(q) if !hs.contains(q) => hs.push(*q),
                other => {
                    return Err(Error::NotNormalForm(format!(
                        "prefix contains {} gate",
                        other.name()
                    )))
                }
            }
        }
        let mut controls = oracle.controls().to_vec();
        controls.sort_unstable();
        hs.sort_unstable();
        if hs != controls {
            return Err(Error::NotNormalForm(
                "Hadamard layer does not match the oracle controls".into(),
            ));
        }
        Self::new(op.num_qubits(), oracle)
    }

    fn push_h_layer(&self, c: &mut Circuit) -> Result<()> {
        c.extend(self.oracle.controls().iter().map(|&q| Gate::H(q)))
    }

    /// The operator `A` itself.
    pub fn circuit(&self) -> Result<Circuit> {
        let mut c = Circuit::new(self.num_qubits)?;
        self.push_h_layer(&mut c)?;
        c.push(self.oracle.gate())?;
        Ok(c)
    }
}

/// `Q^k A` with each `A† Sψ0 A` block replaced by `H, Z, R_Y^{−2f}, H`
/// (time order), followed by `S0`; a final `A` closes the circuit.
pub fn build_optimized_power(form: &NormalForm, k: usize) -> Result<PowerCircuit> {
    let n = form.num_qubits;
    let target = form.oracle.target();
    let s0 = build_s0(n)?;
    let doubled = form.oracle.scaled(-2.0);
    let mut c = Circuit::new(n)?;
    for _ in 0..k {
        form.push_h_layer(&mut c)?;
        c.push(Gate::Z(target))?;
        c.push(doubled.gate())?;
        form.push_h_layer(&mut c)?;
        c.append(&s0)?;
    }
    form.push_h_layer(&mut c)?;
    c.push(form.oracle.gate())?;
    Ok(PowerCircuit {
        circuit: c,
        k,
        optimized: true,
        a_applications: k + 1,
    })
}

/// Result of a unitary comparison up to global phase.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Equivalence {
    pub equivalent: bool,
    pub max_deviation: f64,
}

/// Max-entry deviation of `a` from `e^{iφ} b`, with `φ` fixed on the
/// largest-magnitude entry of `a`.
pub fn phase_aligned_deviation(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    let (idx, _) = a.iter().enumerate().fold((0, -1.0), |best, (i, z)| {
        if z.norm() > best.1 {
            (i, z.norm())
        } else {
            best
        }
    });
    let (ai, bi) = (a.as_slice()[idx], b.as_slice()[idx]);
    let phase = if bi.norm() > 0.0 {
        ai / bi
    } else {
        Complex64::new(1.0, 0.0)
    };
    let phase = phase / phase.norm().max(f64::MIN_POSITIVE);
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - phase * y).norm())
        .fold(0.0, f64::max)
}

/// Whether `unitary(a) = e^{iφ} unitary(b)` within `tol`.
pub fn verify_equivalence(a: &Circuit, b: &Circuit, tol: f64) -> Result<Equivalence> {
    if a.num_qubits() != b.num_qubits() {
        return Err(Error::WidthMismatch {
            left: a.num_qubits(),
            right: b.num_qubits(),
        });
    }
    let dev = phase_aligned_deviation(&a.unitary()?, &b.unitary()?);
    Ok(Equivalence {
        equivalent: dev <= tol,
        max_deviation: dev,
    })
}
