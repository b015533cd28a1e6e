//! Circuit intermediate representation.
//!
//! Costs follow the global-gate model: single-qubit gates, measurements and
//! classically controlled single-qubit gates are free; every `GCZ`, `GT` and
//! `CXLayer` instruction costs one unit. A `CXLayer` is a set of CNOTs from a
//! control region into a disjoint target region and lowers to one `GCZ`
//! between Hadamard layers on its targets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::f2linalg::F2Matrix;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CircuitError {
    #[error("qubit {qubit} out of range for {num_qubits}-qubit circuit")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },
    #[error("invalid instruction: {0}")]
    Invalid(String),
    #[error("classical bit {0} is read before any measurement writes it")]
    UnsetClassicalBit(usize),
    #[error("parse error at line {line}, column {column}: {msg}")]
    Parse {
        line: usize,
        column: usize,
        msg: String,
    },
    #[error("json: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, CircuitError>;

/// Largest supported `log2` denominator of an angle.
pub const MAX_LOG2_DENOMINATOR: u32 = 60;

/// An exact dyadic angle `numerator / 2^log2_denominator`, taken mod 2 and
/// measured in units of pi: `Z^a = diag(1, e^{i pi a})`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "AngleRepr", into = "AngleRepr")]
pub struct Angle {
    numerator: u64,
    log2_denominator: u32,
}

#[derive(Serialize, Deserialize)]
struct AngleRepr {
    numerator: i64,
    log2_denominator: u32,
}

impl From<AngleRepr> for Angle {
    fn from(r: AngleRepr) -> Self {
        Angle::new(r.numerator, r.log2_denominator.min(MAX_LOG2_DENOMINATOR))
    }
}

impl From<Angle> for AngleRepr {
    fn from(a: Angle) -> Self {
        AngleRepr {
            numerator: a.numerator as i64,
            log2_denominator: a.log2_denominator,
        }
    }
}

impl Angle {
    pub const ZERO: Angle = Angle {
        numerator: 0,
        log2_denominator: 0,
    };
    pub const ONE: Angle = Angle {
        numerator: 1,
        log2_denominator: 0,
    };
    pub const HALF: Angle = Angle {
        numerator: 1,
        log2_denominator: 1,
    };

    /// `numerator / 2^log2_denominator` reduced mod 2.
    pub fn new(numerator: i64, log2_denominator: u32) -> Self {
        assert!(
            log2_denominator <= MAX_LOG2_DENOMINATOR,
            "angle denominator 2^{log2_denominator} too large"
        );
        let modulus = 1i128 << (log2_denominator + 1);
        let mut num = (numerator as i128).rem_euclid(modulus) as u64;
        let mut k = log2_denominator;
        if num == 0 {
            return Angle::ZERO;
        }
        while k > 0 && num % 2 == 0 {
            num /= 2;
            k -= 1;
        }
        Angle {
            numerator: num,
            log2_denominator: k,
        }
    }

    /// `1 / 2^k`.
    pub fn dyadic(k: u32) -> Self {
        Angle::new(1, k)
    }

    pub fn numerator(self) -> u64 {
        self.numerator
    }

    pub fn log2_denominator(self) -> u32 {
        self.log2_denominator
    }

    pub fn is_zero(self) -> bool {
        self.numerator == 0
    }

    pub fn add(self, other: Angle) -> Angle {
        let k = self.log2_denominator.max(other.log2_denominator);
        let a = (self.numerator as i128) << (k - self.log2_denominator);
        let b = (other.numerator as i128) << (k - other.log2_denominator);
        let modulus = 1i128 << (k + 1);
        Angle::new(((a + b) % modulus) as i64, k)
    }

    pub fn neg(self) -> Angle {
        Angle::new(-(self.numerator as i64), self.log2_denominator)
    }

    pub fn halve(self) -> Angle {
        Angle::new(self.numerator as i64, self.log2_denominator + 1)
    }

    /// Value in `[0, 2)`, in units of pi.
    pub fn value(self) -> f64 {
        self.numerator as f64 / (1u64 << self.log2_denominator) as f64
    }

    /// `Some(k)` when the angle is `k/2` for integer `k`, i.e. a Clifford phase.
    pub fn quarter_turns(self) -> Option<u8> {
        match self.log2_denominator {
            0 => Some((2 * self.numerator) as u8),
            1 => Some(self.numerator as u8),
            _ => None,
        }
    }
}

impl fmt::Debug for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.numerator, self.log2_denominator)
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.log2_denominator)
    }
}

/// Single-qubit gates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SqGate {
    H,
    X,
    S,
    Sdg,
    /// `diag(1, e^{i pi a})`; `ZPow(1)` is Pauli Z.
    ZPow(Angle),
    /// `H ZPow(a) H`.
    XPow(Angle),
    /// Element of the single-qubit Clifford group by table index, see
    /// [`crate::clifford_core::single_qubit_clifford`].
    Clifford1(u8),
}

impl SqGate {
    pub const Z: SqGate = SqGate::ZPow(Angle::ONE);
}

/// One instruction of a [`Circuit`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Instruction {
    Sq {
        qubit: usize,
        gate: SqGate,
    },
    /// Global CZ: `CZ` on every listed pair, pairs stored as `(i, j)`, `i < j`.
    Gcz { pairs: Vec<(usize, usize)> },
    /// Global tunable gate: `CZ^a(i, j)` on every listed pair.
    Gt { angles: Vec<((usize, usize), Angle)> },
    /// `matrix[i][j] = 1` means control `controls[i]` is XORed onto
    /// target `targets[j]`.
    CxLayer {
        matrix: F2Matrix,
        controls: Vec<usize>,
        targets: Vec<usize>,
    },
    /// Pauli-X basis measurement; outcome 1 means `|->`.
    MeasureX { qubit: usize, cbit: usize },
    /// Applies `gate` to `qubit` iff classical bit `cbit` is 1.
    Conditional {
        cbit: usize,
        qubit: usize,
        gate: SqGate,
    },
}

fn normalize_pair(i: usize, j: usize) -> Result<(usize, usize)> {
    if i == j {
        return Err(CircuitError::Invalid(format!(
            "pair ({i},{j}) must name distinct qubits"
        )));
    }
    Ok((i.min(j), i.max(j)))
}

impl Instruction {
    /// GCZ over the given pairs; duplicate pairs cancel.
    pub fn gcz<I: IntoIterator<Item = (usize, usize)>>(pairs: I) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (i, j) in pairs {
            let p = normalize_pair(i, j)?;
            if !set.remove(&p) {
                set.insert(p);
            }
        }
        Ok(Instruction::Gcz {
            pairs: set.into_iter().collect(),
        })
    }

    /// GT gate; angles on repeated pairs add, zero angles are dropped.
    pub fn gt<I: IntoIterator<Item = ((usize, usize), Angle)>>(angles: I) -> Result<Self> {
        let mut map: BTreeMap<(usize, usize), Angle> = BTreeMap::new();
        for ((i, j), a) in angles {
            let p = normalize_pair(i, j)?;
            let e = map.entry(p).or_insert(Angle::ZERO);
            *e = e.add(a);
        }
        Ok(Instruction::Gt {
            angles: map.into_iter().filter(|(_, a)| !a.is_zero()).collect(),
        })
    }

    pub fn cx_layer(matrix: F2Matrix, controls: Vec<usize>, targets: Vec<usize>) -> Result<Self> {
        if controls.is_empty() || targets.is_empty() {
            return Err(CircuitError::Invalid(
                "CX layer needs at least one control and one target".into(),
            ));
        }
        if matrix.rows() != controls.len() || matrix.cols() != targets.len() {
            return Err(CircuitError::Invalid(format!(
                "CX layer matrix is {}x{} for {} controls and {} targets",
                matrix.rows(),
                matrix.cols(),
                controls.len(),
                targets.len()
            )));
        }
        let cs: BTreeSet<usize> = controls.iter().copied().collect();
        let ts: BTreeSet<usize> = targets.iter().copied().collect();
        if cs.len() != controls.len() || ts.len() != targets.len() {
            return Err(CircuitError::Invalid("repeated qubit in CX layer".into()));
        }
        if !cs.is_disjoint(&ts) {
            return Err(CircuitError::Invalid(
                "CX layer controls and targets overlap".into(),
            ));
        }
        Ok(Instruction::CxLayer {
            matrix,
            controls,
            targets,
        })
    }

    /// Qubits acted on.
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Instruction::Sq { qubit, .. }
            | Instruction::MeasureX { qubit, .. }
            | Instruction::Conditional { qubit, .. } => vec![*qubit],
            Instruction::Gcz { pairs } => {
                let s: BTreeSet<usize> = pairs.iter().flat_map(|&(i, j)| [i, j]).collect();
                s.into_iter().collect()
            }
            Instruction::Gt { angles } => {
                let s: BTreeSet<usize> = angles.iter().flat_map(|&((i, j), _)| [i, j]).collect();
                s.into_iter().collect()
            }
            Instruction::CxLayer {
                controls, targets, ..
            } => controls.iter().chain(targets).copied().collect(),
        }
    }

    /// Whether the instruction counts toward the GT cost.
    pub fn is_entangling(&self) -> bool {
        matches!(
            self,
            Instruction::Gcz { .. } | Instruction::Gt { .. } | Instruction::CxLayer { .. }
        )
    }
}

/// An instruction list over `num_qubits` qubits; qubits `[0, num_data)` are
/// data, the rest ancillae.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Circuit {
    num_qubits: usize,
    num_data: usize,
    num_cbits: usize,
    instructions: Vec<Instruction>,
}

impl Circuit {
    pub fn new(num_qubits: usize, num_data: usize) -> Self {
        assert!(num_data <= num_qubits, "more data qubits than qubits");
        Circuit {
            num_qubits,
            num_data,
            num_cbits: 0,
            instructions: Vec::new(),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn num_data(&self) -> usize {
        self.num_data
    }

    pub fn num_ancilla(&self) -> usize {
        self.num_qubits - self.num_data
    }

    pub fn num_cbits(&self) -> usize {
        self.num_cbits
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    pub fn num_measurements(&self) -> usize {
        self.instructions
            .iter()
            .filter(|i| matches!(i, Instruction::MeasureX { .. }))
            .count()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.num_qubits {
            return Err(CircuitError::QubitOutOfRange {
                qubit: q,
                num_qubits: self.num_qubits,
            });
        }
        Ok(())
    }

    fn written_cbits(&self) -> BTreeSet<usize> {
        self.instructions
            .iter()
            .filter_map(|i| match i {
                Instruction::MeasureX { cbit, .. } => Some(*cbit),
                _ => None,
            })
            .collect()
    }

    /// Appends an instruction after validating it against the register.
    pub fn push(&mut self, instr: Instruction) -> Result<()> {
        for q in instr.qubits() {
            self.check_qubit(q)?;
        }
        match &instr {
            Instruction::CxLayer {
                matrix,
                controls,
                targets,
            } => {
                // Re-run the constructor checks for hand-built values.
                Instruction::cx_layer(matrix.clone(), controls.clone(), targets.clone())?;
            }
            Instruction::Gcz { pairs } => {
                if pairs.iter().any(|&(i, j)| i >= j) {
                    return Err(CircuitError::Invalid("GCZ pairs must be (i, j), i < j".into()));
                }
            }
            Instruction::Gt { angles } => {
                if angles.iter().any(|&((i, j), _)| i >= j) {
                    return Err(CircuitError::Invalid("GT pairs must be (i, j), i < j".into()));
                }
            }
            Instruction::MeasureX { cbit, .. } => {
                self.num_cbits = self.num_cbits.max(cbit + 1);
            }
            Instruction::Conditional { cbit, .. } => {
                if !self.written_cbits().contains(cbit) {
                    return Err(CircuitError::UnsetClassicalBit(*cbit));
                }
            }
            Instruction::Sq { .. } => {}
        }
        self.instructions.push(instr);
        Ok(())
    }

    /// Appends a gate known to be valid; panics otherwise. Used by the
    /// synthesis routines, which construct indices themselves.
    pub fn add(&mut self, instr: Instruction) {
        self.push(instr).expect("synthesized instruction is valid");
    }

    pub fn sq(&mut self, qubit: usize, gate: SqGate) {
        self.add(Instruction::Sq { qubit, gate });
    }

    pub fn h(&mut self, qubit: usize) {
        self.sq(qubit, SqGate::H);
    }

    pub fn x(&mut self, qubit: usize) {
        self.sq(qubit, SqGate::X);
    }

    pub fn z(&mut self, qubit: usize) {
        self.sq(qubit, SqGate::Z);
    }

    /// Measures `qubit` in the X basis into a fresh classical bit.
    pub fn measure_x(&mut self, qubit: usize) -> usize {
        let cbit = self.num_cbits;
        self.add(Instruction::MeasureX { qubit, cbit });
        cbit
    }

    pub fn conditional(&mut self, cbit: usize, qubit: usize, gate: SqGate) {
        self.add(Instruction::Conditional { cbit, qubit, gate });
    }

    /// Appends all instructions of `other`, which must act on the same
    /// register size.
    pub fn extend_from(&mut self, other: &Circuit) -> Result<()> {
        if other.num_qubits != self.num_qubits {
            return Err(CircuitError::Invalid(format!(
                "cannot append a {}-qubit circuit to a {}-qubit circuit",
                other.num_qubits, self.num_qubits
            )));
        }
        let offset = self.num_cbits;
        for instr in &other.instructions {
            let instr = match instr.clone() {
                Instruction::MeasureX { qubit, cbit } => Instruction::MeasureX {
                    qubit,
                    cbit: cbit + offset,
                },
                Instruction::Conditional { cbit, qubit, gate } => Instruction::Conditional {
                    cbit: cbit + offset,
                    qubit,
                    gate,
                },
                i => i,
            };
            self.push(instr)?;
        }
        Ok(())
    }

    /// The same instructions on a register of `num_qubits >= self.num_qubits()`
    /// qubits; the extra qubits count as ancillae.
    pub fn widened(&self, num_qubits: usize) -> Circuit {
        assert!(num_qubits >= self.num_qubits, "cannot shrink a circuit");
        Circuit {
            num_qubits,
            ..self.clone()
        }
    }

    /// Number of GCZ, GT and CX-layer instructions.
    pub fn gt_cost(&self) -> usize {
        self.instructions.iter().filter(|i| i.is_entangling()).count()
    }

    /// Replaces every CX layer by its GCZ lowering.
    pub fn lowered(&self) -> Circuit {
        let mut out = Circuit {
            instructions: Vec::with_capacity(self.instructions.len()),
            ..self.clone()
        };
        for instr in &self.instructions {
            match instr {
                Instruction::CxLayer { .. } => out.instructions.extend(lower_cx_layer(instr)),
                other => out.instructions.push(other.clone()),
            }
        }
        out
    }

    /// Text form, see [`Circuit::from_text`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "qubits {} data {} cbits {}",
            self.num_qubits, self.num_data, self.num_cbits
        )
        .unwrap();
        for instr in &self.instructions {
            s.push_str(&instruction_text(instr));
            s.push('\n');
        }
        s
    }

    /// Parses the line-oriented text format:
    ///
    /// ```text
    /// qubits N data D cbits C
    /// SQ q H | X | S | SDG | Z | ZPOW m k | XPOW m k | C1 idx
    /// GCZ (i,j) (k,l) ...
    /// GT (i,j):m/k ...            angle m / 2^k
    /// CXL controls i,j targets k,l matrix <hex row>,<hex row>
    /// MX q -> b
    /// IF b SQ q <gate>
    /// ```
    ///
    /// Blank lines and lines starting with `#` are ignored.
    pub fn from_text(text: &str) -> Result<Circuit> {
        parse_text(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit serializes")
    }

    /// Parses the JSON mirror and re-validates every instruction.
    pub fn from_json(text: &str) -> Result<Circuit> {
        let raw: Circuit =
            serde_json::from_str(text).map_err(|e| CircuitError::Json(e.to_string()))?;
        let mut c = Circuit::new(raw.num_qubits, raw.num_data.min(raw.num_qubits));
        if raw.num_data > raw.num_qubits {
            return Err(CircuitError::Invalid("more data qubits than qubits".into()));
        }
        for instr in raw.instructions {
            c.push(instr)?;
        }
        if raw.num_cbits < c.num_cbits {
            return Err(CircuitError::Invalid(format!(
                "header declares {} classical bits but {} are written",
                raw.num_cbits, c.num_cbits
            )));
        }
        c.num_cbits = raw.num_cbits;
        Ok(c)
    }
}

fn gate_text(g: &SqGate) -> String {
    match g {
        SqGate::H => "H".into(),
        SqGate::X => "X".into(),
        SqGate::S => "S".into(),
        SqGate::Sdg => "SDG".into(),
        SqGate::ZPow(a) if *a == Angle::ONE => "Z".into(),
        SqGate::ZPow(a) => format!("ZPOW {} {}", a.numerator(), a.log2_denominator()),
        SqGate::XPow(a) => format!("XPOW {} {}", a.numerator(), a.log2_denominator()),
        SqGate::Clifford1(i) => format!("C1 {i}"),
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(",")
}

fn instruction_text(instr: &Instruction) -> String {
    match instr {
        Instruction::Sq { qubit, gate } => format!("SQ {qubit} {}", gate_text(gate)),
        Instruction::Gcz { pairs } => {
            let mut s = String::from("GCZ");
            for (i, j) in pairs {
                write!(s, " ({i},{j})").unwrap();
            }
            s
        }
        Instruction::Gt { angles } => {
            let mut s = String::from("GT");
            for ((i, j), a) in angles {
                write!(s, " ({i},{j}):{a}").unwrap();
            }
            s
        }
        Instruction::CxLayer {
            matrix,
            controls,
            targets,
        } => {
            let rows: Vec<String> = (0..matrix.rows()).map(|i| matrix.row_hex(i)).collect();
            format!(
                "CXL controls {} targets {} matrix {}",
                join(controls),
                join(targets),
                rows.join(",")
            )
        }
        Instruction::MeasureX { qubit, cbit } => format!("MX {qubit} -> {cbit}"),
        Instruction::Conditional { cbit, qubit, gate } => {
            format!("IF {cbit} SQ {qubit} {}", gate_text(gate))
        }
    }
}

struct Tokens<'a> {
    line: usize,
    toks: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(line: usize, text: &'a str) -> Self {
        let mut toks = Vec::new();
        let mut start = None;
        for (i, ch) in text.char_indices() {
            if ch.is_whitespace() {
                if let Some(s) = start.take() {
                    toks.push((s, &text[s..i]));
                }
            } else if start.is_none() {
                start = Some(i);
            }
        }
        if let Some(s) = start {
            toks.push((s, &text[s..]));
        }
        Tokens { line, toks, pos: 0 }
    }

    fn err_at(&self, idx: usize, msg: impl Into<String>) -> CircuitError {
        let column = self
            .toks
            .get(idx)
            .map_or_else(|| self.toks.last().map_or(1, |(c, t)| c + t.len() + 1), |(c, _)| c + 1);
        CircuitError::Parse {
            line: self.line,
            column,
            msg: msg.into(),
        }
    }

    fn next(&mut self, what: &str) -> Result<&'a str> {
        let t = self
            .toks
            .get(self.pos)
            .map(|&(_, t)| t)
            .ok_or_else(|| self.err_at(self.pos, format!("expected {what}")))?;
        self.pos += 1;
        Ok(t)
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        let t = self.next(kw)?;
        if t != kw {
            return Err(self.err_at(self.pos - 1, format!("expected `{kw}`, found `{t}`")));
        }
        Ok(())
    }

    fn number<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let t = self.next(what)?;
        t.parse()
            .map_err(|_| self.err_at(self.pos - 1, format!("expected {what}, found `{t}`")))
    }

    fn list(&mut self, what: &str) -> Result<Vec<usize>> {
        let t = self.next(what)?;
        t.split(',')
            .map(|s| {
                s.parse()
                    .map_err(|_| self.err_at(self.pos - 1, format!("bad qubit list `{t}`")))
            })
            .collect()
    }

    fn done(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn finish(&self) -> Result<()> {
        if !self.done() {
            return Err(self.err_at(self.pos, "unexpected trailing input"));
        }
        Ok(())
    }

    fn rest(&mut self) -> Vec<(usize, &'a str)> {
        let r = self.toks[self.pos..].to_vec();
        self.pos = self.toks.len();
        r
    }
}

fn parse_angle(s: &str) -> Option<Angle> {
    let (m, k) = s.split_once('/')?;
    let m: i64 = m.parse().ok()?;
    let k: u32 = k.parse().ok()?;
    (k <= MAX_LOG2_DENOMINATOR).then(|| Angle::new(m, k))
}

fn parse_gate(t: &mut Tokens) -> Result<SqGate> {
    let name = t.next("gate name")?;
    let g = match name {
        "H" => SqGate::H,
        "X" => SqGate::X,
        "S" => SqGate::S,
        "SDG" => SqGate::Sdg,
        "Z" => SqGate::Z,
        "ZPOW" | "XPOW" => {
            let m: i64 = t.number("angle numerator")?;
            let k: u32 = t.number("angle log2 denominator")?;
            if k > MAX_LOG2_DENOMINATOR {
                return Err(t.err_at(t.pos - 1, "angle denominator too large"));
            }
            let a = Angle::new(m, k);
            if name == "ZPOW" {
                SqGate::ZPow(a)
            } else {
                SqGate::XPow(a)
            }
        }
        "C1" => {
            let i: u8 = t.number("clifford index")?;
            if i >= 24 {
                return Err(t.err_at(t.pos - 1, "single-qubit Clifford index must be < 24"));
            }
            SqGate::Clifford1(i)
        }
        other => return Err(t.err_at(t.pos - 1, format!("unknown gate `{other}`"))),
    };
    Ok(g)
}

fn parse_pair(t: &Tokens, idx: usize, s: &str) -> Result<(usize, usize)> {
    let inner = s
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| t.err_at(idx, format!("expected `(i,j)`, found `{s}`")))?;
    let (a, b) = inner
        .split_once(',')
        .ok_or_else(|| t.err_at(idx, format!("expected `(i,j)`, found `{s}`")))?;
    let a = a.parse().map_err(|_| t.err_at(idx, "bad qubit index"))?;
    let b = b.parse().map_err(|_| t.err_at(idx, "bad qubit index"))?;
    Ok((a, b))
}

fn parse_text(text: &str) -> Result<Circuit> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| {
            let l = l.trim();
            !l.is_empty() && !l.starts_with('#')
        });
    let (hline, htext) = lines.next().ok_or(CircuitError::Parse {
        line: 1,
        column: 1,
        msg: "missing header".into(),
    })?;
    let mut h = Tokens::new(hline, htext);
    h.keyword("qubits")?;
    let nq: usize = h.number("qubit count")?;
    h.keyword("data")?;
    let nd: usize = h.number("data qubit count")?;
    h.keyword("cbits")?;
    let nc: usize = h.number("classical bit count")?;
    h.finish()?;
    if nd > nq {
        return Err(h.err_at(3, "more data qubits than qubits"));
    }
    let mut c = Circuit::new(nq, nd);

    for (lineno, line) in lines {
        let mut t = Tokens::new(lineno, line);
        let op = t.next("instruction")?;
        let instr = match op {
            "SQ" => {
                let qubit = t.number("qubit")?;
                let gate = parse_gate(&mut t)?;
                Instruction::Sq { qubit, gate }
            }
            "GCZ" => {
                let base = t.pos;
                let rest = t.rest();
                let pairs = rest
                    .iter()
                    .enumerate()
                    .map(|(k, &(_, s))| parse_pair(&t, base + k, s))
                    .collect::<Result<Vec<_>>>()?;
                Instruction::gcz(pairs).map_err(|e| t.err_at(0, e.to_string()))?
            }
            "GT" => {
                let base = t.pos;
                let rest = t.rest();
                let mut angles = Vec::new();
                for (k, &(_, s)) in rest.iter().enumerate() {
                    let (p, a) = s
                        .split_once(':')
                        .ok_or_else(|| t.err_at(base + k, "expected `(i,j):m/k`"))?;
                    let pair = parse_pair(&t, base + k, p)?;
                    let angle = parse_angle(a)
                        .ok_or_else(|| t.err_at(base + k, format!("bad angle `{a}`")))?;
                    angles.push((pair, angle));
                }
                Instruction::gt(angles).map_err(|e| t.err_at(0, e.to_string()))?
            }
            "CXL" => {
                t.keyword("controls")?;
                let controls = t.list("control list")?;
                t.keyword("targets")?;
                let targets = t.list("target list")?;
                t.keyword("matrix")?;
                let mpos = t.pos;
                let rows_tok = t.next("matrix rows")?;
                let rows: Vec<&str> = rows_tok.split(',').collect();
                if rows.len() != controls.len() {
                    return Err(t.err_at(mpos, "matrix needs one hex row per control"));
                }
                let m = F2Matrix::from_hex_rows(&rows, targets.len())
                    .map_err(|e| t.err_at(mpos, e.to_string()))?;
                Instruction::cx_layer(m, controls, targets).map_err(|e| t.err_at(0, e.to_string()))?
            }
            "MX" => {
                let qubit = t.number("qubit")?;
                t.keyword("->")?;
                let cbit = t.number("classical bit")?;
                Instruction::MeasureX { qubit, cbit }
            }
            "IF" => {
                let cbit = t.number("classical bit")?;
                t.keyword("SQ")?;
                let qubit = t.number("qubit")?;
                let gate = parse_gate(&mut t)?;
                Instruction::Conditional { cbit, qubit, gate }
            }
            other => return Err(t.err_at(0, format!("unknown instruction `{other}`"))),
        };
        t.finish()?;
        c.push(instr).map_err(|e| match e {
            CircuitError::Parse { .. } => e,
            other => t.err_at(0, other.to_string()),
        })?;
    }
    if nc < c.num_cbits {
        return Err(CircuitError::Parse {
            line: hline,
            column: 1,
            msg: format!("header declares {nc} classical bits but {} are written", c.num_cbits),
        });
    }
    c.num_cbits = nc;
    Ok(c)
}

/// `H` on the targets, one GCZ with a `(control, target)` pair per set matrix
/// bit, `H` on the targets again.
pub fn lower_cx_layer(instr: &Instruction) -> Vec<Instruction> {
    let Instruction::CxLayer {
        matrix,
        controls,
        targets,
    } = instr
    else {
        return vec![instr.clone()];
    };
    let mut out = Vec::with_capacity(2 * targets.len() + 1);
    for &t in targets {
        out.push(Instruction::Sq {
            qubit: t,
            gate: SqGate::H,
        });
    }
    let mut pairs = Vec::new();
    for (i, &c) in controls.iter().enumerate() {
        for (j, &t) in targets.iter().enumerate() {
            if matrix.get(i, j) {
                pairs.push((c, t));
            }
        }
    }
    out.push(Instruction::gcz(pairs).expect("controls and targets are disjoint"));
    for &t in targets {
        out.push(Instruction::Sq {
            qubit: t,
            gate: SqGate::H,
        });
    }
    out
}

/// Dense `|C| x |T|` matrix of a CX layer indexed by qubit.
fn layer_edges(matrix: &F2Matrix, controls: &[usize], targets: &[usize]) -> BTreeSet<(usize, usize)> {
    let mut e = BTreeSet::new();
    for (i, &c) in controls.iter().enumerate() {
        for (j, &t) in targets.iter().enumerate() {
            if matrix.get(i, j) {
                e.insert((c, t));
            }
        }
    }
    e
}

fn ordered_union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = a.to_vec();
    for &q in b {
        if !out.contains(&q) {
            out.push(q);
        }
    }
    out
}

/// Composes two CX layers into one when the union of their controls is
/// disjoint from the union of their targets. Both layers then only XOR
/// control values, which neither changes, so the composition XORs the sum of
/// the two matrices.
pub fn merge_cx_layers(first: &Instruction, second: &Instruction) -> Option<Instruction> {
    let (
        Instruction::CxLayer {
            matrix: m1,
            controls: c1,
            targets: t1,
        },
        Instruction::CxLayer {
            matrix: m2,
            controls: c2,
            targets: t2,
        },
    ) = (first, second)
    else {
        return None;
    };
    let controls = ordered_union(c1, c2);
    let targets = ordered_union(t1, t2);
    if controls.iter().any(|q| targets.contains(q)) {
        return None;
    }
    let edges: BTreeSet<(usize, usize)> = layer_edges(m1, c1, t1)
        .symmetric_difference(&layer_edges(m2, c2, t2))
        .copied()
        .collect();
    let matrix = F2Matrix::from_fn(controls.len(), targets.len(), |i, j| {
        edges.contains(&(controls[i], targets[j]))
    });
    Some(Instruction::CxLayer {
        matrix,
        controls,
        targets,
    })
}

/// Merges CX layers that are adjacent up to single-qubit gates on qubits
/// untouched by both layers, until no merge applies.
pub fn optimize_merges(c: &Circuit) -> Circuit {
    let mut instrs = c.instructions.clone();
    loop {
        let mut changed = false;
        let mut i = 0;
        while i < instrs.len() {
            if !matches!(instrs[i], Instruction::CxLayer { .. }) {
                i += 1;
                continue;
            }
            let first_qubits: BTreeSet<usize> = instrs[i].qubits().into_iter().collect();
            let mut skipped: BTreeSet<usize> = BTreeSet::new();
            let mut merged = None;
            for j in i + 1..instrs.len() {
                match &instrs[j] {
                    Instruction::Sq { qubit, .. } if !first_qubits.contains(qubit) => {
                        skipped.insert(*qubit);
                    }
                    second @ Instruction::CxLayer { .. } => {
                        if second.qubits().iter().all(|q| !skipped.contains(q)) {
                            if let Some(m) = merge_cx_layers(&instrs[i], second) {
                                merged = Some((j, m));
                            }
                        }
                        break;
                    }
                    _ => break,
                }
            }
            if let Some((j, m)) = merged {
                // The second layer commutes back past the skipped gates.
                instrs.remove(j);
                instrs[i] = m;
                changed = true;
            } else {
                i += 1;
            }
        }
        if !changed {
            break;
        }
    }
    Circuit {
        instructions: instrs,
        ..c.clone()
    }
}
