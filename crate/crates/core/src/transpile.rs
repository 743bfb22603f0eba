//! Lowering to CNOT + single-qubit gates, linear-chain placement and CNOT
//! counting.
//!
//! Decompositions: `CZ = H·CX·H`, `CRy` costs 2 CNOTs, an `m`-control
//! multiplexed `Ry` costs `2^m` (Gray-code uniformly controlled rotation) and
//! a `k`-qubit `MCZ` costs `2^k − 2` (Gray-code phase polynomial). On a
//! 3-qubit linear chain the `CCZ` parity term between the two end qubits is
//! reached with a SWAP through the middle qubit, for 10 CNOTs after
//! cancellation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::statevector::{GoodStateFlags, StateVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    AllToAll,
    LinearChain,
}

impl std::fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TopologyKind::AllToAll => "all_to_all",
            TopologyKind::LinearChain => "linear_chain",
        })
    }
}

impl std::str::FromStr for TopologyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all_to_all" | "all-to-all" => Ok(TopologyKind::AllToAll),
            "linear_chain" | "linear" => Ok(TopologyKind::LinearChain),
            other => Err(Error::InvalidArgument(format!(
                "unknown topology {other:?}"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologySpec {
    pub kind: TopologyKind,
    pub num_qubits: usize,
}

impl TopologySpec {
    pub fn all_to_all(num_qubits: usize) -> Self {
        Self {
            kind: TopologyKind::AllToAll,
            num_qubits,
        }
    }

    pub fn linear_chain(num_qubits: usize) -> Self {
        Self {
            kind: TopologyKind::LinearChain,
            num_qubits,
        }
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        match self.kind {
            TopologyKind::AllToAll => a != b,
            TopologyKind::LinearChain => a.abs_diff(b) == 1,
        }
    }

    /// Edge list; `(i, i+1)` only on a chain.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.num_qubits;
        match self.kind {
            TopologyKind::AllToAll => (0..n)
                .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
                .collect(),
            TopologyKind::LinearChain => (1..n).map(|i| (i - 1, i)).collect(),
        }
    }
}

/// A lowered circuit over physical qubits. `layout[logical] = physical`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lowered {
    pub circuit: Circuit,
    pub layout: Vec<usize>,
}

impl Lowered {
    /// The lowered circuit expressed on logical qubits again.
    pub fn logical_circuit(&self) -> Result<Circuit> {
        let mut inverse = vec![0; self.layout.len()];
        for (l, &p) in self.layout.iter().enumerate() {
            inverse[p] = l;
        }
        self.circuit.relabel(&inverse)
    }
}

fn cx(control: usize, target: usize) -> Gate {
    Gate::Cx { control, target }
}

fn phase(target: usize, angle: f64) -> Gate {
    Gate::Phase { target, angle }
}

/// Uniformly controlled `Ry` with `2^m` CNOTs.
fn emit_multiplexed_ry(controls: &[usize], target: usize, angles: &[f64], out: &mut Vec<Gate>) {
    let m = controls.len();
    if m == 0 {
        out.push(Gate::Ry {
            target,
            angle: angles[0],
        });
        return;
    }
    let size = 1usize << m;
    let scale = 1.0 / size as f64;
    for i in 0..size {
        let gray = i ^ (i >> 1);
        let theta: f64 = angles
            .iter()
            .enumerate()
            .map(|(j, a)| {
                if (j & gray).count_ones() % 2 == 0 {
                    *a
                } else {
                    -*a
                }
            })
            .sum::<f64>()
            * scale;
        out.push(Gate::Ry {
            target,
            angle: theta,
        });
        let bit = if i + 1 < size {
            (i + 1).trailing_zeros() as usize
        } else {
            m - 1
        };
        out.push(cx(controls[bit], target));
    }
}

/// `exp(iπ x_1⋯x_k)` as a sum of parity phases, `2^k − 2` CNOTs.
fn emit_phase_polynomial(qubits: &[usize], unit: f64, out: &mut Vec<Gate>) {
    let sign = |size: u32| if size % 2 == 1 { unit } else { -unit };
    let Some((&t, others)) = qubits.split_last() else {
        return;
    };
    out.push(phase(t, sign(1)));
    let m = others.len();
    if m > 0 {
        let size = 1usize << m;
        for i in 1..size {
            let bit = i.trailing_zeros() as usize;
            out.push(cx(others[bit], t));
            let gray = i ^ (i >> 1);
            out.push(phase(t, sign(gray.count_ones() + 1)));
        }
        out.push(cx(others[m - 1], t));
    }
    emit_phase_polynomial(others, unit, out);
}

fn emit_mcz(qubits: &[usize], out: &mut Vec<Gate>) {
    match qubits {
        [q] => out.push(Gate::Z(*q)),
        [a, b] => out.extend([Gate::H(*b), cx(*a, *b), Gate::H(*b)]),
        _ => {
            let unit = PI / 2f64.powi(qubits.len() as i32 - 1);
            emit_phase_polynomial(qubits, unit, out);
        }
    }
}

/// CCZ with `m` between `e1` and `e2` on a chain: SWAP(e2, m) brings the
/// `e1 ⊕ e2` parity next to `e1`.
fn emit_linear_ccz(e1: usize, m: usize, e2: usize, out: &mut Vec<Gate>) {
    let a = PI / 4.0;
    let swap = [cx(e2, m), cx(m, e2), cx(e2, m)];
    out.extend(swap.clone());
    out.extend([cx(e1, m), phase(m, -a), cx(e1, m)]);
    out.extend(swap);
    out.extend([
        cx(e2, m),
        phase(m, -a),
        cx(e1, m),
        phase(m, a),
        cx(e2, m),
        phase(m, -a),
        cx(e1, m),
    ]);
    out.extend([phase(e1, a), phase(e2, a), phase(m, a)]);
}

/// Lowers one physical-qubit gate.
fn lower_gate(g: &Gate, topo: &TopologySpec, out: &mut Vec<Gate>) -> Result<()> {
    match g {
        Gate::H(_)
        | Gate::X(_)
        | Gate::Y(_)
        | Gate::Z(_)
        | Gate::Phase { .. }
        | Gate::Ry { .. }
        | Gate::Cx { .. } => out.push(g.clone()),
        Gate::Cz { control, target } => emit_mcz(&[*control, *target], out),
        Gate::Cry {
            control,
            target,
            angle,
        } => out.extend([
            Gate::Ry {
                target: *target,
                angle: angle / 2.0,
            },
            cx(*control, *target),
            Gate::Ry {
                target: *target,
                angle: -angle / 2.0,
            },
            cx(*control, *target),
        ]),
        Gate::MultiplexedRy {
            controls,
            target,
            angles,
        } => emit_multiplexed_ry(controls, *target, angles, out),
        Gate::Mcz { qubits } => {
            let mut sorted = qubits.clone();
            sorted.sort_unstable();
            if topo.kind == TopologyKind::LinearChain
                && sorted.len() == 3
                && sorted[2] - sorted[0] == 2
            {
                emit_linear_ccz(sorted[0], sorted[1], sorted[2], out);
            } else {
                // far-apart CNOTs of the phase polynomial are routed later
                emit_mcz(qubits, out);
            }
        }
    }
    Ok(())
}

fn swap(a: usize, b: usize) -> [Gate; 3] {
    [cx(a, b), cx(b, a), cx(a, b)]
}

/// Replaces CNOTs between chain non-neighbours: a 4-CNOT bridge at
/// distance 2, otherwise SWAPs that walk the control next to the target and
/// back.
fn route(gates: Vec<Gate>, topo: &TopologySpec) -> Result<Vec<Gate>> {
    let mut out = Vec::with_capacity(gates.len());
    for g in gates {
        match g {
            Gate::Cx { control, target } if !topo.adjacent(control, target) => {
                if control.abs_diff(target) == 2 {
                    let b = control.min(target) + 1;
                    out.extend([cx(control, b), cx(b, target), cx(control, b), cx(b, target)]);
                    continue;
                }
                let step = |q: usize| if target > control { q + 1 } else { q - 1 };
                let mut path = vec![control];
                while step(*path.last().unwrap()) != target {
                    path.push(step(*path.last().unwrap()));
                }
                for w in path.windows(2) {
                    out.extend(swap(w[0], w[1]));
                }
                out.push(cx(*path.last().unwrap(), target));
                for w in path.windows(2).rev() {
                    out.extend(swap(w[0], w[1]));
                }
            }
            other => out.push(other),
        }
    }
    Ok(out)
}

/// Cancels CNOT pairs with no gate on either qubit in between.
pub fn cancel_adjacent_cnots(gates: &[Gate]) -> Vec<Gate> {
    let mut out: Vec<Gate> = Vec::with_capacity(gates.len());
    for g in gates {
        if let Gate::Cx { control, target } = g {
            let prev = out
                .iter()
                .rposition(|p| p.touches(*control) || p.touches(*target));
            if let Some(i) = prev {
                if out[i] == *g {
                    out.remove(i);
                    continue;
                }
            }
        }
        out.push(g.clone());
    }
    out
}

/// Places the logical qubit with the most two-qubit interactions in the
/// middle of a chain and fills outwards. Identity for all-to-all.
pub fn choose_layout(c: &Circuit, topo: &TopologySpec) -> Vec<usize> {
    let n = c.num_qubits();
    if topo.kind == TopologyKind::AllToAll || n <= 2 {
        return (0..n).collect();
    }
    let mut degree = vec![0usize; n];
    for g in c.gates() {
        match g {
            Gate::Mcz { qubits } => {
                for &q in qubits {
                    degree[q] += qubits.len() - 1;
                }
            }
            g => {
                // controls first, target last
                let qs = g.qubits();
                if let Some((&t, controls)) = qs.split_last() {
                    degree[t] += controls.len();
                    for &q in controls {
                        degree[q] += 1;
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| degree[*b].cmp(&degree[*a]).then(a.cmp(b)));
    let mid = (n - 1) / 2;
    let mut slots = vec![mid];
    for d in 1..n {
        if mid >= d {
            slots.push(mid - d);
        }
        if mid + d < n {
            slots.push(mid + d);
        }
    }
    let mut layout = vec![0; n];
    for (logical, slot) in order.into_iter().zip(slots) {
        layout[logical] = slot;
    }
    layout
}

/// Lowers `c` to `{CX, H, X, Y, Z, P, Ry}` on `topo`.
pub fn lower(c: &Circuit, topo: &TopologySpec) -> Result<Lowered> {
    if c.num_qubits() != topo.num_qubits {
        return Err(Error::WidthMismatch {
            left: c.num_qubits(),
            right: topo.num_qubits,
        });
    }
    let layout = choose_layout(c, topo);
    let placed = c.relabel(&layout)?;
    let mut gates = Vec::new();
    for g in placed.gates() {
        lower_gate(g, topo, &mut gates)?;
    }
    let gates = cancel_adjacent_cnots(&route(gates, topo)?);
    Ok(Lowered {
        circuit: Circuit::from_gates(c.num_qubits(), gates)?,
        layout,
    })
}

/// The CNOT removed by [`drop_final_cnot`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedCnot {
    pub control: usize,
    pub target: usize,
}

/// Removes the last CNOT. Nothing after it may touch its qubits, so the
/// measured target bit can be corrected classically as `target ⊕ control`.
pub fn drop_final_cnot(c: &Circuit) -> Result<(Circuit, DroppedCnot)> {
    let gates = c.gates();
    let i = gates
        .iter()
        .rposition(|g| matches!(g, Gate::Cx { .. }))
        .ok_or_else(|| Error::InvalidArgument("circuit contains no CNOT".into()))?;
    let Gate::Cx { control, target } = gates[i] else {
        unreachable!()
    };
    if gates[i + 1..]
        .iter()
        .any(|g| g.touches(control) || g.touches(target))
    {
        return Err(Error::Unsupported(
            "final CNOT is followed by gates on its qubits".into(),
        ));
    }
    let mut rest = gates.to_vec();
    rest.remove(i);
    Ok((
        Circuit::from_gates(c.num_qubits(), rest)?,
        DroppedCnot { control, target },
    ))
}

/// Good-state probability after reinterpreting `target` as `target ⊕ control`.
pub fn relabeled_good_probability(
    s: &StateVector,
    flags: &GoodStateFlags,
    dropped: DroppedCnot,
) -> f64 {
    let mask = flags.mask();
    s.probabilities()
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            let fixed = i ^ (((i >> dropped.control) & 1) << dropped.target);
            fixed & mask == mask
        })
        .map(|(_, p)| p)
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountReport {
    pub cnot_count: usize,
    pub dropped_final_cnot: bool,
    pub k: usize,
    pub optimized: bool,
    pub topology: TopologyKind,
    pub num_qubits: usize,
}

/// CNOT count of a lowered power circuit.
pub fn count_cnots(
    power: &crate::grover::PowerCircuit,
    topo: &TopologySpec,
    drop_final: bool,
) -> Result<CountReport> {
    let lowered = lower(&power.circuit, topo)?;
    let mut cnots = lowered.circuit.cnot_count();
    if drop_final {
        drop_final_cnot(&lowered.circuit)?;
        cnots -= 1;
    }
    Ok(CountReport {
        cnot_count: cnots,
        dropped_final_cnot: drop_final,
        k: power.k,
        optimized: power.optimized,
        topology: topo.kind,
        num_qubits: topo.num_qubits,
    })
}
