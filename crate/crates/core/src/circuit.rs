//! Gate and circuit intermediate representation.
//!
//! Qubit 0 is the least-significant bit of a basis-state index. Circuits are
//! plain values: builders return new circuits and nothing mutates a circuit
//! after it has been handed out.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statevector;

/// Largest width accepted by [`Circuit::unitary`].
pub const MAX_UNITARY_QUBITS: usize = 12;

/// A single gate. Angles are in radians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    H(usize),
    X(usize),
    Y(usize),
    Z(usize),
    /// `diag(1, e^{i angle})`. Only produced by lowering.
    Phase {
        target: usize,
        angle: f64,
    },
    Ry {
        target: usize,
        angle: f64,
    },
    Cx {
        control: usize,
        target: usize,
    },
    Cz {
        control: usize,
        target: usize,
    },
    /// Phase flip of the all-ones pattern of `qubits` (symmetric in its qubits).
    Mcz {
        qubits: Vec<usize>,
    },
    Cry {
        control: usize,
        target: usize,
        angle: f64,
    },
    /// Uniformly controlled Y rotation: `angles[i]` is applied to the target
    /// when the control register (controls[0] least significant) reads `i`.
    MultiplexedRy {
        controls: Vec<usize>,
        target: usize,
        angles: Vec<f64>,
    },
}

impl Gate {
    /// All qubits the gate touches, controls first.
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::H(q) | Gate::X(q) | Gate::Y(q) | Gate::Z(q) => vec![*q],
            Gate::Phase { target, .. } | Gate::Ry { target, .. } => vec![*target],
            Gate::Cx { control, target }
            | Gate::Cz { control, target }
            | Gate::Cry {
                control, target, ..
            } => vec![*control, *target],
            Gate::Mcz { qubits } => qubits.clone(),
            Gate::MultiplexedRy {
                controls, target, ..
            } => {
                let mut qs = controls.clone();
                qs.push(*target);
                qs
            }
        }
    }

    pub fn touches(&self, qubit: usize) -> bool {
        self.qubits().contains(&qubit)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Gate::H(_) => "H",
            Gate::X(_) => "X",
            Gate::Y(_) => "Y",
            Gate::Z(_) => "Z",
            Gate::Phase { .. } => "P",
            Gate::Ry { .. } => "RY",
            Gate::Cx { .. } => "CX",
            Gate::Cz { .. } => "CZ",
            Gate::Mcz { .. } => "MCZ",
            Gate::Cry { .. } => "CRY",
            Gate::MultiplexedRy { .. } => "MRY",
        }
    }

    /// The adjoint gate. Rotations negate their angles, everything else is
    /// self-inverse.
    pub fn adjoint(&self) -> Gate {
        match self {
            Gate::Phase { target, angle } => Gate::Phase {
                target: *target,
                angle: -angle,
            },
            Gate::Ry { target, angle } => Gate::Ry {
                target: *target,
                angle: -angle,
            },
            Gate::Cry {
                control,
                target,
                angle,
            } => Gate::Cry {
                control: *control,
                target: *target,
                angle: -angle,
            },
            Gate::MultiplexedRy {
                controls,
                target,
                angles,
            } => Gate::MultiplexedRy {
                controls: controls.clone(),
                target: *target,
                angles: angles.iter().map(|a| -a).collect(),
            },
            other => other.clone(),
        }
    }

    /// The same gate with every qubit index sent through `f`.
    pub fn map_qubits(&self, f: impl Fn(usize) -> usize) -> Gate {
        match self {
            Gate::H(q) => Gate::H(f(*q)),
            Gate::X(q) => Gate::X(f(*q)),
            Gate::Y(q) => Gate::Y(f(*q)),
            Gate::Z(q) => Gate::Z(f(*q)),
            Gate::Phase { target, angle } => Gate::Phase {
                target: f(*target),
                angle: *angle,
            },
            Gate::Ry { target, angle } => Gate::Ry {
                target: f(*target),
                angle: *angle,
            },
            Gate::Cx { control, target } => Gate::Cx {
                control: f(*control),
                target: f(*target),
            },
            Gate::Cz { control, target } => Gate::Cz {
                control: f(*control),
                target: f(*target),
            },
            Gate::Mcz { qubits } => Gate::Mcz {
                qubits: qubits.iter().map(|&q| f(q)).collect(),
            },
            Gate::Cry {
                control,
                target,
                angle,
            } => Gate::Cry {
                control: f(*control),
                target: f(*target),
                angle: *angle,
            },
            Gate::MultiplexedRy {
                controls,
                target,
                angles,
            } => Gate::MultiplexedRy {
                controls: controls.iter().map(|&q| f(q)).collect(),
                target: f(*target),
                angles: angles.clone(),
            },
        }
    }

    fn validate(&self, num_qubits: usize) -> Result<()> {
        let qs = self.qubits();
        for (i, &q) in qs.iter().enumerate() {
            if q >= num_qubits {
                return Err(Error::QubitOutOfRange {
                    index: q,
                    num_qubits,
                });
            }
            if qs[..i].contains(&q) {
                return Err(Error::DuplicateQubit(q));
            }
        }
        if let Gate::Mcz { qubits } = self {
            if qubits.is_empty() {
                return Err(Error::InvalidArgument("MCZ without qubits".into()));
            }
        }
        if let Gate::MultiplexedRy {
            controls, angles, ..
        } = self
        {
            let expected = 1usize << controls.len();
            if angles.len() != expected {
                return Err(Error::AngleTableLength {
                    controls: controls.len(),
                    expected,
                    actual: angles.len(),
                });
            }
        }
        Ok(())
    }
}

/// An ordered gate list over a fixed number of qubits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    num_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Result<Self> {
        if num_qubits == 0 {
            return Err(Error::InvalidArgument(
                "a circuit needs at least one qubit".into(),
            ));
        }
        Ok(Self {
            num_qubits,
            gates: Vec::new(),
        })
    }

    pub fn from_gates(num_qubits: usize, gates: impl IntoIterator<Item = Gate>) -> Result<Self> {
        let mut c = Self::new(num_qubits)?;
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Appends a gate after checking its indices against the width.
    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.num_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn extend(&mut self, gates: impl IntoIterator<Item = Gate>) -> Result<()> {
        for g in gates {
            self.push(g)?;
        }
        Ok(())
    }

    /// Gates of `self` followed by gates of `other`.
    pub fn compose(&self, other: &Circuit) -> Result<Circuit> {
        if self.num_qubits != other.num_qubits {
            return Err(Error::WidthMismatch {
                left: self.num_qubits,
                right: other.num_qubits,
            });
        }
        let mut gates = self.gates.clone();
        gates.extend(other.gates.iter().cloned());
        Ok(Circuit {
            num_qubits: self.num_qubits,
            gates,
        })
    }

    /// Appends `other` in place (same widths required).
    pub fn append(&mut self, other: &Circuit) -> Result<()> {
        if self.num_qubits != other.num_qubits {
            return Err(Error::WidthMismatch {
                left: self.num_qubits,
                right: other.num_qubits,
            });
        }
        self.gates.extend(other.gates.iter().cloned());
        Ok(())
    }

    pub fn inverse(&self) -> Circuit {
        Circuit {
            num_qubits: self.num_qubits,
            gates: self.gates.iter().rev().map(Gate::adjoint).collect(),
        }
    }

    /// Same gates on a wider register.
    pub fn widen(&self, num_qubits: usize) -> Result<Circuit> {
        if num_qubits < self.num_qubits {
            return Err(Error::WidthMismatch {
                left: self.num_qubits,
                right: num_qubits,
            });
        }
        Ok(Circuit {
            num_qubits,
            gates: self.gates.clone(),
        })
    }

    /// Renames qubit `q` to `map[q]`; `map` must be a permutation.
    pub fn relabel(&self, map: &[usize]) -> Result<Circuit> {
        let mut seen = vec![false; self.num_qubits];
        if map.len() != self.num_qubits {
            return Err(Error::WidthMismatch {
                left: self.num_qubits,
                right: map.len(),
            });
        }
        for &m in map {
            if m >= self.num_qubits || std::mem::replace(&mut seen[m], true) {
                return Err(Error::InvalidArgument(format!(
                    "{map:?} is not a permutation"
                )));
            }
        }
        Ok(Circuit {
            num_qubits: self.num_qubits,
            gates: self
                .gates
                .iter()
                .map(|g| g.map_qubits(|q| map[q]))
                .collect(),
        })
    }

    pub fn count(&self, pred: impl Fn(&Gate) -> bool) -> usize {
        self.gates.iter().filter(|g| pred(g)).count()
    }

    pub fn cnot_count(&self) -> usize {
        self.count(|g| matches!(g, Gate::Cx { .. }))
    }

    pub fn multiplexer_count(&self) -> usize {
        self.count(|g| matches!(g, Gate::MultiplexedRy { .. }))
    }

    /// Dense unitary, column `j` being the image of basis state `j`.
    pub fn unitary(&self) -> Result<DMatrix<Complex64>> {
        if self.num_qubits > MAX_UNITARY_QUBITS {
            return Err(Error::TooManyQubits {
                what: "unitary extraction",
                limit: MAX_UNITARY_QUBITS,
                actual: self.num_qubits,
            });
        }
        let dim = 1usize << self.num_qubits;
        let mut u = DMatrix::<Complex64>::zeros(dim, dim);
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        for col in 0..dim {
            amps.iter_mut().for_each(|a| *a = Complex64::new(0.0, 0.0));
            amps[col] = Complex64::new(1.0, 0.0);
            for g in &self.gates {
                statevector::apply_gate(&mut amps, g);
            }
            for (row, a) in amps.iter().enumerate() {
                u[(row, col)] = *a;
            }
        }
        Ok(u)
    }

    /// Serializes to the line format read back by [`Circuit::from_str`].
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

/// Dense unitary of `c`; see [`Circuit::unitary`].
pub fn unitary_of(c: &Circuit) -> Result<DMatrix<Complex64>> {
    c.unitary()
}

fn fmt_angle(a: f64) -> String {
    format!("{a:.14e}")
}

fn fmt_list(qs: &[usize]) -> String {
    let items: Vec<String> = qs.iter().map(|q| q.to_string()).collect();
    format!("[{}]", items.join(","))
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = self.name();
        match self {
            Gate::H(q) | Gate::X(q) | Gate::Y(q) | Gate::Z(q) => write!(f, "{name} {q}"),
            Gate::Phase { target, angle } | Gate::Ry { target, angle } => {
                write!(f, "{name} {target} {}", fmt_angle(*angle))
            }
            Gate::Cx { control, target } | Gate::Cz { control, target } => {
                write!(f, "{name} {target} {}", fmt_list(&[*control]))
            }
            Gate::Mcz { qubits } => {
                let (last, rest) = qubits.split_last().expect("validated non-empty");
                write!(f, "{name} {last} {}", fmt_list(rest))
            }
            Gate::Cry {
                control,
                target,
                angle,
            } => write!(
                f,
                "{name} {target} {} {}",
                fmt_list(&[*control]),
                fmt_angle(*angle)
            ),
            Gate::MultiplexedRy {
                controls,
                target,
                angles,
            } => {
                write!(f, "{name} {target} {}", fmt_list(controls))?;
                for a in angles {
                    write!(f, " {}", fmt_angle(*a))?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "QUBITS {}", self.num_qubits)?;
        for g in &self.gates {
            writeln!(f, "{g}")?;
        }
        Ok(())
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_gate(line_no: usize, line: &str) -> Result<Gate> {
    let mut tokens = line.split_whitespace();
    let name = tokens
        .next()
        .ok_or_else(|| parse_err(line_no, "empty line"))?;
    let rest: Vec<&str> = tokens.collect();
    let uint = |s: &str| -> Result<usize> {
        s.parse::<usize>()
            .map_err(|_| parse_err(line_no, format!("bad qubit index `{s}`")))
    };
    let float = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| parse_err(line_no, format!("bad angle `{s}`")))
    };
    let list = |s: &str| -> Result<Vec<usize>> {
        let inner = s
            .strip_prefix('[')
            .and_then(|s| s.strip_suffix(']'))
            .ok_or_else(|| parse_err(line_no, format!("expected `[..]`, got `{s}`")))?;
        if inner.is_empty() {
            return Ok(Vec::new());
        }
        inner.split(',').map(uint).collect()
    };
    let need = |n: usize| -> Result<()> {
        if rest.len() == n {
            Ok(())
        } else {
            Err(parse_err(
                line_no,
                format!("{name} expects {n} fields, got {}", rest.len()),
            ))
        }
    };
    let single = |idx: &[usize]| -> Result<usize> {
        match idx {
            [c] => Ok(*c),
            _ => Err(parse_err(line_no, "expected exactly one control")),
        }
    };
    let gate = match name {
        "H" | "X" | "Y" | "Z" => {
            need(1)?;
            let q = uint(rest[0])?;
            match name {
                "H" => Gate::H(q),
                "X" => Gate::X(q),
                "Y" => Gate::Y(q),
                _ => Gate::Z(q),
            }
        }
        "P" | "RY" => {
            need(2)?;
            let target = uint(rest[0])?;
            let angle = float(rest[1])?;
            if name == "P" {
                Gate::Phase { target, angle }
            } else {
                Gate::Ry { target, angle }
            }
        }
        "CX" | "CZ" => {
            need(2)?;
            let target = uint(rest[0])?;
            let control = single(&list(rest[1])?)?;
            if name == "CX" {
                Gate::Cx { control, target }
            } else {
                Gate::Cz { control, target }
            }
        }
        "MCZ" => {
            need(2)?;
            let last = uint(rest[0])?;
            let mut qubits = list(rest[1])?;
            qubits.push(last);
            Gate::Mcz { qubits }
        }
        "CRY" => {
            need(3)?;
            Gate::Cry {
                target: uint(rest[0])?,
                control: single(&list(rest[1])?)?,
                angle: float(rest[2])?,
            }
        }
        "MRY" => {
            if rest.len() < 2 {
                return Err(parse_err(line_no, "MRY needs a target and controls"));
            }
            let target = uint(rest[0])?;
            let controls = list(rest[1])?;
            let angles = rest[2..]
                .iter()
                .map(|s| float(s))
                .collect::<Result<Vec<_>>>()?;
            Gate::MultiplexedRy {
                controls,
                target,
                angles,
            }
        }
        other => return Err(parse_err(line_no, format!("unknown gate `{other}`"))),
    };
    Ok(gate)
}

impl FromStr for Circuit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (first_no, first) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing `QUBITS n` header"))?;
        let n = first
            .strip_prefix("QUBITS")
            .and_then(|r| r.trim().parse::<usize>().ok())
            .ok_or_else(|| parse_err(first_no, "missing `QUBITS n` header"))?;
        let mut c = Circuit::new(n)?;
        for (no, line) in lines {
            let g = parse_gate(no, line)?;
            c.push(g).map_err(|e| parse_err(no, e.to_string()))?;
        }
        Ok(c)
    }
}
