//! Reflections, the Grover operator `Q = A S0 A† Sψ0` and its powers.

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::spin_echo;
use crate::state_prep::FlaggedOperator;
use crate::statevector::GoodStateFlags;

/// `I − 2|0⟩⟨0|`: X on all qubits, a Z controlled by all qubits, X again.
pub fn build_s0(num_qubits: usize) -> Result<Circuit> {
    if num_qubits == 0 {
        return Err(Error::InvalidArgument("S0 needs at least one qubit".into()));
    }
    let mut c = Circuit::new(num_qubits)?;
    c.extend((0..num_qubits).map(Gate::X))?;
    c.push(phase_flip(&(0..num_qubits).collect::<Vec<_>>()))?;
    c.extend((0..num_qubits).map(Gate::X))?;
    Ok(c)
}

/// Sign flip of every basis state whose flag qubits all read `|1⟩`.
pub fn build_s_psi0(num_qubits: usize, flags: &GoodStateFlags) -> Result<Circuit> {
    flags.check_width(num_qubits)?;
    Circuit::from_gates(num_qubits, [phase_flip(&flags.qubits())])
}

fn phase_flip(qubits: &[usize]) -> Gate {
    match qubits {
        [q] => Gate::Z(*q),
        [a, b] => Gate::Cz {
            control: *a,
            target: *b,
        },
        _ => Gate::Mcz {
            qubits: qubits.to_vec(),
        },
    }
}

/// One Grover iterate, in time order `Sψ0, A†, S0, A`.
pub fn build_q(a: &FlaggedOperator) -> Result<Circuit> {
    let n = a.num_qubits();
    let mut q = build_s_psi0(n, &a.flags)?;
    q.append(&a.circuit.inverse())?;
    q.append(&build_s0(n)?)?;
    q.append(&a.circuit)?;
    Ok(q)
}

/// A circuit preparing `Q^k A |0⟩`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerCircuit {
    pub circuit: Circuit,
    pub k: usize,
    /// Whether the Spin-Echo construction was used.
    pub optimized: bool,
    /// Number of applications of `A` or `A†` (Hadamard layers not counted).
    pub a_applications: usize,
}

/// `Q^k A`, plain: `A` followed by `k` iterates.
pub fn grover_power_plain(a: &FlaggedOperator, k: usize) -> Result<PowerCircuit> {
    let mut c = a.circuit.clone();
    if k > 0 {
        let q = build_q(a)?;
        for _ in 0..k {
            c.append(&q)?;
        }
    }
    Ok(PowerCircuit {
        circuit: c,
        k,
        optimized: false,
        a_applications: 2 * k + 1,
    })
}

/// `Q^k A`. With `optimized`, operators in H-layer + single-oracle normal
/// form are built with the Spin-Echo rewrite (`k + 1` oracle applications);
/// anything else falls back to the plain construction.
pub fn grover_power(a: &FlaggedOperator, k: usize, optimized: bool) -> Result<PowerCircuit> {
    if optimized {
        if let Ok(form) = spin_echo::NormalForm::extract(a) {
            return spin_echo::build_optimized_power(&form, k);
        }
    }
    grover_power_plain(a, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state_prep::RotationOracle;
    use crate::statevector::simulate;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn diag_up_to_phase(c: &Circuit, expected: &[f64]) -> bool {
        let u = c.unitary().unwrap();
        let phase = u[(0, 0)] / Complex64::new(expected[0], 0.0);
        let dim = expected.len();
        (0..dim).all(|i| {
            (0..dim).all(|j| {
                let e = if i == j {
                    phase * expected[i]
                } else {
                    Complex64::new(0.0, 0.0)
                };
                (u[(i, j)] - e).norm() < 1e-12
            })
        })
    }

    #[test]
    fn s0_matches_definition() {
        assert!(diag_up_to_phase(&build_s0(1).unwrap(), &[-1.0, 1.0]));
        assert!(diag_up_to_phase(
            &build_s0(2).unwrap(),
            &[-1.0, 1.0, 1.0, 1.0]
        ));
        let mut d = vec![1.0; 8];
        d[0] = -1.0;
        assert!(diag_up_to_phase(&build_s0(3).unwrap(), &d));
    }

    #[test]
    fn s_psi0_shapes() {
        let single = build_s_psi0(2, &GoodStateFlags::single(1)).unwrap();
        assert_eq!(single.gates(), &[Gate::Z(1)]);
        let two = build_s_psi0(2, &GoodStateFlags::new([0, 1]).unwrap()).unwrap();
        assert!(diag_up_to_phase(&two, &[1.0, 1.0, 1.0, -1.0]));
        let four = build_s_psi0(6, &GoodStateFlags::new([2, 3, 4, 5]).unwrap()).unwrap();
        assert!(matches!(&four.gates()[0], Gate::Mcz { qubits } if qubits.len() == 4));
        let d: Vec<f64> = (0..64)
            .map(|i| if i & 0b111100 == 0b111100 { -1.0 } else { 1.0 })
            .collect();
        assert!(diag_up_to_phase(&four, &d));
    }

    fn sin2_operator(theta: f64) -> FlaggedOperator {
        let o = RotationOracle::from_angles(vec![2.0 * theta], &[], 0).unwrap();
        FlaggedOperator::new(
            Circuit::from_gates(1, [o.gate()]).unwrap(),
            GoodStateFlags::single(0),
            "sin^2",
        )
        .unwrap()
    }

    #[test]
    fn amplification_identity() {
        for (theta, k, expect) in [
            (PI / 4.0, 1, 0.5),
            (PI / 8.0, 1, (3.0 * PI / 8.0).sin().powi(2)),
            (0.0, 3, 0.0),
        ] {
            let a = sin2_operator(theta);
            let pc = grover_power(&a, k, false).unwrap();
            let p = simulate(&pc.circuit).unwrap().good_probability(&a.flags);
            assert!((p - expect).abs() < 1e-12, "theta {theta} k {k}: {p}");
        }
    }

    #[test]
    fn q_for_zero_angles_matches_reflections() {
        // A = H on q0 with a zero-angle oracle: Q reduces to A S0 A† Sψ0
        let o = RotationOracle::from_angles(vec![0.0, 0.0], &[0], 1).unwrap();
        let mut c = Circuit::new(2).unwrap();
        c.push(Gate::H(0)).unwrap();
        c.push(o.gate()).unwrap();
        let a = FlaggedOperator::new(c, GoodStateFlags::single(1), "0").unwrap();
        let q = build_q(&a).unwrap().unitary().unwrap();
        let s0 = build_s0(2).unwrap().unitary().unwrap();
        let spsi = build_s_psi0(2, &a.flags).unwrap().unitary().unwrap();
        let au = a.circuit.unitary().unwrap();
        let hand = &au * &s0 * au.adjoint() * &spsi;
        assert!((q - hand).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn zero_power_is_a() {
        let a = sin2_operator(0.3);
        assert_eq!(grover_power(&a, 0, false).unwrap().circuit, a.circuit);
        assert_eq!(grover_power(&a, 0, true).unwrap().circuit.gates().len(), 1);
    }
}
