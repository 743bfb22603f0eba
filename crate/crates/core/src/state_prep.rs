//! Amplitude-level state preparation.
//!
//! A function `f` with values in `[0, 1]` on a `2^n`-point grid is loaded as
//! a rotation oracle `|i⟩|0⟩ ↦ |i⟩(√(1−f_i)|0⟩ + √f_i|1⟩)`. Products of
//! functions are realised by flagging the good states with several ancillas
//! (all must read `|1⟩`), sums by an LCU-style ancilla that halves the result.
//!
//! Register layout used by the builders here: state registers first (low
//! qubit indices), ancillas above them, the objective ancilla last.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::statevector::GoodStateFlags;

/// Rotation angle `2·arcsin(√v)` placing amplitude `√v` on `|1⟩`.
pub fn value_to_angle(v: f64) -> f64 {
    2.0 * v.clamp(0.0, 1.0).sqrt().asin()
}

/// `sin²(angle / 2)`, the probability written by a rotation of `angle`.
pub fn angle_to_value(angle: f64) -> f64 {
    (angle / 2.0).sin().powi(2)
}

/// Per-basis-state Y-rotation table on a target qubit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationOracle {
    controls: Vec<usize>,
    target: usize,
    angles: Vec<f64>,
}

impl RotationOracle {
    /// Oracle writing `√values[i]` onto the target for control state `i`.
    pub fn from_values(values: &[f64], controls: &[usize], target: usize) -> Result<Self> {
        for (index, &value) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) || value.is_nan() {
                return Err(Error::ValueOutOfRange { index, value });
            }
        }
        Self::from_angles(
            values.iter().map(|&v| value_to_angle(v)).collect(),
            controls,
            target,
        )
    }

    /// Oracle with an explicit angle table (any real angles).
    pub fn from_angles(angles: Vec<f64>, controls: &[usize], target: usize) -> Result<Self> {
        let expected = 1usize << controls.len();
        if angles.len() != expected {
            return Err(Error::TableLength {
                qubits: controls.len(),
                expected,
                actual: angles.len(),
            });
        }
        if controls.contains(&target) {
            return Err(Error::DuplicateQubit(target));
        }
        for (i, c) in controls.iter().enumerate() {
            if controls[..i].contains(c) {
                return Err(Error::DuplicateQubit(*c));
            }
        }
        Ok(Self {
            controls: controls.to_vec(),
            target,
            angles,
        })
    }

    pub fn controls(&self) -> &[usize] {
        &self.controls
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Probabilities `sin²(angle_i / 2)` encoded by the table.
    pub fn values(&self) -> Vec<f64> {
        self.angles.iter().map(|&a| angle_to_value(a)).collect()
    }

    /// Same oracle with every angle multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            controls: self.controls.clone(),
            target: self.target,
            angles: self.angles.iter().map(|a| a * factor).collect(),
        }
    }

    pub fn gate(&self) -> Gate {
        Gate::MultiplexedRy {
            controls: self.controls.clone(),
            target: self.target,
            angles: self.angles.clone(),
        }
    }

    pub fn max_qubit(&self) -> usize {
        self.controls
            .iter()
            .copied()
            .chain([self.target])
            .max()
            .unwrap_or(0)
    }

    /// The oracle as a multiplexer additionally controlled on `ancilla`
    /// reading `when`; the other branch gets zero angles.
    fn controlled_on(&self, ancilla: usize, when: bool) -> Gate {
        let zeros = vec![0.0; self.angles.len()];
        let angles = if when {
            [zeros, self.angles.clone()].concat()
        } else {
            [self.angles.clone(), zeros].concat()
        };
        let mut controls = self.controls.clone();
        controls.push(ancilla);
        Gate::MultiplexedRy {
            controls,
            target: self.target,
            angles,
        }
    }
}

/// Builds the multiplexed-Ry circuit of a value table on a circuit of
/// `num_qubits` qubits.
pub fn build_oracle(
    values: &[f64],
    controls: &[usize],
    target: usize,
    num_qubits: usize,
) -> Result<Circuit> {
    let oracle = RotationOracle::from_values(values, controls, target)?;
    Circuit::from_gates(num_qubits, [oracle.gate()])
}

/// A state-preparation circuit together with the qubits flagging its good
/// states. `scale` is the classical factor turning the good-state
/// probability into the quantity of interest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlaggedOperator {
    pub circuit: Circuit,
    pub flags: GoodStateFlags,
    pub value_semantics: String,
    pub scale: f64,
}

impl FlaggedOperator {
    pub fn new(
        circuit: Circuit,
        flags: GoodStateFlags,
        value_semantics: impl Into<String>,
    ) -> Result<Self> {
        flags.check_width(circuit.num_qubits())?;
        Ok(Self {
            circuit,
            flags,
            value_semantics: value_semantics.into(),
            scale: 1.0,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.circuit.num_qubits()
    }

    /// Prepends Hadamards on `qubits`, i.e. feeds a uniform superposition
    /// into the operator.
    pub fn with_uniform_prefix(&self, qubits: &[usize]) -> Result<Self> {
        let mut c = Circuit::new(self.num_qubits())?;
        c.extend(qubits.iter().map(|&q| Gate::H(q)))?;
        c.append(&self.circuit)?;
        Ok(Self {
            circuit: c,
            flags: self.flags.clone(),
            value_semantics: format!("uniform average of [{}]", self.value_semantics),
            scale: self.scale,
        })
    }

    pub fn widen(&self, num_qubits: usize) -> Result<Self> {
        Ok(Self {
            circuit: self.circuit.widen(num_qubits)?,
            ..self.clone()
        })
    }
}

fn width_for(oracles: &[&RotationOracle], extra: &[usize]) -> usize {
    oracles
        .iter()
        .map(|o| o.max_qubit())
        .chain(extra.iter().copied())
        .max()
        .unwrap_or(0)
        + 1
}

/// `H^{⊗n}` on the shared controls, then `f` and `g` onto their own targets.
/// Good states have both targets in `|1⟩`: `P = (1/2^n) Σ f_i g_i`.
pub fn multiply(f: &RotationOracle, g: &RotationOracle) -> Result<FlaggedOperator> {
    if f.controls != g.controls {
        return Err(Error::InvalidArgument(
            "multiplied oracles must share the control register".into(),
        ));
    }
    if f.target == g.target {
        return Err(Error::InvalidArgument(format!(
            "multiplied oracles need distinct targets, both use {}",
            f.target
        )));
    }
    if f.controls.contains(&g.target) {
        return Err(Error::DuplicateQubit(g.target));
    }
    let n = width_for(&[f, g], &[]);
    let mut c = Circuit::new(n)?;
    c.extend(f.controls.iter().map(|&q| Gate::H(q)))?;
    c.push(f.gate())?;
    c.push(g.gate())?;
    FlaggedOperator::new(
        c,
        GoodStateFlags::new([f.target, g.target])?,
        "(1/2^n)·Σ f·g",
    )
}

/// LCU-style sum: `H(anc)`, `g` if anc=0, `h` if anc=1, `H(anc)`. The good
/// states are the target in `|1⟩` (the ancilla is not a flag); for each
/// control state the probability is `(g_i + h_i)/2`, hence `scale = 2`.
pub fn add(g: &RotationOracle, h: &RotationOracle, lcu_ancilla: usize) -> Result<FlaggedOperator> {
    if g.controls != h.controls {
        return Err(Error::InvalidArgument(
            "added oracles must share the control register".into(),
        ));
    }
    if g.target != h.target {
        return Err(Error::InvalidArgument(format!(
            "added oracles must share the target, got {} and {}",
            g.target, h.target
        )));
    }
    if lcu_ancilla == g.target || g.controls.contains(&lcu_ancilla) {
        return Err(Error::DuplicateQubit(lcu_ancilla));
    }
    let n = width_for(&[g, h], &[lcu_ancilla]);
    let mut c = Circuit::new(n)?;
    c.push(Gate::H(lcu_ancilla))?;
    c.push(g.controlled_on(lcu_ancilla, false))?;
    c.push(h.controlled_on(lcu_ancilla, true))?;
    c.push(Gate::H(lcu_ancilla))?;
    let mut op = FlaggedOperator::new(
        c,
        GoodStateFlags::single(g.target),
        "(g+h)/2 per control state",
    )?;
    op.scale = 2.0;
    Ok(op)
}

/// Replaces a multi-qubit flag by a single fresh ancilla via a
/// multi-controlled X from all flag qubits.
pub fn reduce_flags(op: &FlaggedOperator, fresh_ancilla: usize) -> Result<FlaggedOperator> {
    if op.flags.len() < 2 {
        return Err(Error::InvalidArgument(
            "flag reduction needs at least two flag qubits".into(),
        ));
    }
    let used = op.flags.contains(fresh_ancilla)
        || op.circuit.gates().iter().any(|g| g.touches(fresh_ancilla));
    if used {
        return Err(Error::InvalidArgument(format!(
            "ancilla {fresh_ancilla} is already used by the operator"
        )));
    }
    let n = op.num_qubits().max(fresh_ancilla + 1);
    let mut c = op.circuit.widen(n)?;
    let mut qubits = op.flags.qubits();
    qubits.push(fresh_ancilla);
    c.push(Gate::H(fresh_ancilla))?;
    c.push(Gate::Mcz { qubits })?;
    c.push(Gate::H(fresh_ancilla))?;
    Ok(FlaggedOperator {
        circuit: c,
        flags: GoodStateFlags::single(fresh_ancilla),
        value_semantics: op.value_semantics.clone(),
        scale: op.scale,
    })
}

/// A discretised Markov process with tabulated initial and transition
/// probabilities.
///
/// `transitions[t-1][prev + 2^{n_{t-1}} · cur]` is `f_t(x^t_cur | x^{t-1}_prev)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovProcessSpec {
    pub register_sizes: Vec<usize>,
    pub initial: Vec<f64>,
    pub transitions: Vec<Vec<f64>>,
}

impl MarkovProcessSpec {
    pub fn new(
        register_sizes: Vec<usize>,
        initial: Vec<f64>,
        transitions: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let spec = Self {
            register_sizes,
            initial,
            transitions,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Tabulates `f0(i)` and `ft(t, prev, cur)`.
    pub fn from_fns(
        register_sizes: Vec<usize>,
        f0: impl Fn(usize) -> f64,
        ft: impl Fn(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        if register_sizes.is_empty() {
            return Err(Error::InvalidArgument(
                "a process needs at least one register".into(),
            ));
        }
        let initial = (0..1usize << register_sizes[0]).map(f0).collect();
        let transitions = (1..register_sizes.len())
            .map(|t| {
                let np = 1usize << register_sizes[t - 1];
                let nc = 1usize << register_sizes[t];
                let mut tab = vec![0.0; np * nc];
                for cur in 0..nc {
                    for prev in 0..np {
                        tab[prev + np * cur] = ft(t, prev, cur);
                    }
                }
                tab
            })
            .collect();
        Self::new(register_sizes, initial, transitions)
    }

    pub fn steps(&self) -> usize {
        self.register_sizes.len() - 1
    }

    pub fn state_qubits(&self) -> usize {
        self.register_sizes.iter().sum()
    }

    fn validate(&self) -> Result<()> {
        if self.register_sizes.is_empty() {
            return Err(Error::InvalidArgument(
                "a process needs at least one register".into(),
            ));
        }
        if self.transitions.len() != self.steps() {
            return Err(Error::InvalidArgument(format!(
                "{} registers need {} transition tables, got {}",
                self.register_sizes.len(),
                self.steps(),
                self.transitions.len()
            )));
        }
        let check = |tab: &[f64], qubits: usize| -> Result<()> {
            let expected = 1usize << qubits;
            if tab.len() != expected {
                return Err(Error::TableLength {
                    qubits,
                    expected,
                    actual: tab.len(),
                });
            }
            for (index, &value) in tab.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) || value.is_nan() {
                    return Err(Error::ValueOutOfRange { index, value });
                }
            }
            Ok(())
        };
        check(&self.initial, self.register_sizes[0])?;
        for t in 1..self.register_sizes.len() {
            check(
                &self.transitions[t - 1],
                self.register_sizes[t - 1] + self.register_sizes[t],
            )?;
        }
        Ok(())
    }

    /// Qubit indices of register `t`.
    pub fn register(&self, t: usize) -> Vec<usize> {
        let start: usize = self.register_sizes[..t].iter().sum();
        (start..start + self.register_sizes[t]).collect()
    }

    /// Brute-force `(1/2^n) Σ f0 · Π f_t` over every path.
    pub fn classical_value(&self) -> f64 {
        let sizes: Vec<usize> = self.register_sizes.iter().map(|&n| 1usize << n).collect();
        let total: usize = sizes.iter().product();
        let mut sum = 0.0;
        let mut idx = vec![0usize; sizes.len()];
        for mut flat in 0..total {
            for (t, &s) in sizes.iter().enumerate() {
                idx[t] = flat % s;
                flat /= s;
            }
            let mut p = self.initial[idx[0]];
            for t in 1..sizes.len() {
                p *= self.transitions[t - 1][idx[t - 1] + sizes[t - 1] * idx[t]];
            }
            sum += p;
        }
        sum / total as f64
    }
}

/// Hadamards on all state qubits, then `F_0` onto ancilla 0 and `F_t`
/// (controlled by registers `t-1` and `t`) onto ancilla `t`. All ancillas
/// are flags.
pub fn load_process(spec: &MarkovProcessSpec) -> Result<FlaggedOperator> {
    spec.validate()?;
    let n_state = spec.state_qubits();
    let width = n_state + spec.register_sizes.len();
    let mut c = Circuit::new(width)?;
    c.extend((0..n_state).map(Gate::H))?;
    let f0 = RotationOracle::from_values(&spec.initial, &spec.register(0), n_state)?;
    c.push(f0.gate())?;
    for t in 1..spec.register_sizes.len() {
        let controls = [spec.register(t - 1), spec.register(t)].concat();
        let ft = RotationOracle::from_values(&spec.transitions[t - 1], &controls, n_state + t)?;
        c.push(ft.gate())?;
    }
    FlaggedOperator::new(
        c,
        GoodStateFlags::new(n_state..width)?,
        "(1/2^n)·Σ f_0·Π f_t",
    )
}

/// Reads an `index,value` table; indices must run `0..len` in order.
pub fn read_value_table<R: Read>(reader: R) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(row + 1);
        if row == 0 && rec.get(0) == Some("index") {
            continue;
        }
        if rec.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected `index,value`, got {} fields", rec.len()),
            });
        }
        let index: usize = rec[0].parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad index `{}`", &rec[0]),
        })?;
        let value: f64 = rec[1].parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad value `{}`", &rec[1]),
        })?;
        if index != values.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected index {}, got {index}", values.len()),
            });
        }
        values.push(value);
    }
    Ok(values)
}
