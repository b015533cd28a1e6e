//! Dense statevector simulation, measurement-branch enumeration and the
//! contract checkers used to certify synthesized circuits.
//!
//! Basis index bit `q` is the value of qubit `q`. Angles are converted to
//! floating point only when a phase is applied.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::circuit::{Angle, Circuit, Instruction, SqGate};
use crate::clifford_core::{
    layered_decompose, single_qubit_clifford, CliffordError, CliffordTableau, Pauli,
};

/// Comparison tolerance for amplitudes and probabilities.
pub const TOLERANCE: f64 = 1e-9;
/// Largest register for [`extract_unitary`]; a 12-qubit unitary already
/// takes 256 MiB.
pub const MAX_UNITARY_QUBITS: usize = 12;
/// Largest register for dense simulation.
pub const MAX_DENSE_QUBITS: usize = 24;
pub const MAX_BRANCH_MEASUREMENTS: usize = 20;
/// Random stabilizer inputs per instance in the ancilla Clifford check.
pub const STABILIZER_INPUTS: usize = 32;

const PROBABILITY_FLOOR: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("register of {0} qubits exceeds the dense limit {1}")]
    TooLarge(usize, usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no forced outcome for classical bit {0}")]
    MissingOutcome(usize),
    #[error("forced outcome {outcome} for classical bit {cbit} has zero probability")]
    ZeroProbabilityBranch { cbit: usize, outcome: bool },
    #[error("circuit has {0} measurements; branch enumeration is limited to {MAX_BRANCH_MEASUREMENTS}")]
    TooManyMeasurements(usize),
    #[error("circuit contains measurements")]
    HasMeasurements,
    #[error(transparent)]
    Clifford(#[from] CliffordError),
}

pub type Result<T> = std::result::Result<T, SimError>;

/// A pure state together with the classical record and probability of the
/// branch that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
    cbits: BTreeMap<usize, bool>,
    probability: f64,
}

impl StateVector {
    pub fn basis(num_qubits: usize, index: usize) -> Result<Self> {
        if num_qubits > MAX_DENSE_QUBITS {
            return Err(SimError::TooLarge(num_qubits, MAX_DENSE_QUBITS));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(StateVector {
            num_qubits,
            amplitudes,
            cbits: BTreeMap::new(),
            probability: 1.0,
        })
    }

    pub fn zero(num_qubits: usize) -> Result<Self> {
        Self::basis(num_qubits, 0)
    }

    pub fn from_amplitudes(num_qubits: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != 1 << num_qubits {
            return Err(SimError::DimensionMismatch(format!(
                "{} amplitudes for {num_qubits} qubits",
                amplitudes.len()
            )));
        }
        Ok(StateVector {
            num_qubits,
            amplitudes,
            cbits: BTreeMap::new(),
            probability: 1.0,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn cbits(&self) -> &BTreeMap<usize, bool> {
        &self.cbits
    }

    pub fn probability(&self) -> f64 {
        self.probability
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn apply_matrix(&mut self, q: usize, m: &[[Complex64; 2]; 2]) {
        let bit = 1 << q;
        for i in 0..self.amplitudes.len() {
            if i & bit == 0 {
                let a = self.amplitudes[i];
                let b = self.amplitudes[i | bit];
                self.amplitudes[i] = m[0][0] * a + m[0][1] * b;
                self.amplitudes[i | bit] = m[1][0] * a + m[1][1] * b;
            }
        }
    }

    pub fn apply_sq(&mut self, q: usize, gate: &SqGate) {
        match gate {
            SqGate::Clifford1(idx) => {
                for g in single_qubit_clifford(*idx) {
                    self.apply_sq(q, g);
                }
            }
            g => self.apply_matrix(q, &sq_matrix(g)),
        }
    }

    /// Multiplies `|k>` by `e^{i pi sum a}` over the pairs with both bits set.
    fn apply_phase_pairs(&mut self, pairs: &[((usize, usize), Angle)]) {
        let masks: Vec<(usize, f64)> = pairs
            .iter()
            .map(|&((i, j), a)| ((1 << i) | (1 << j), a.value()))
            .collect();
        for (k, amp) in self.amplitudes.iter_mut().enumerate() {
            let total: f64 = masks
                .iter()
                .filter(|(m, _)| k & m == *m)
                .map(|(_, a)| a)
                .sum();
            if total != 0.0 {
                *amp *= Complex64::cis(PI * total);
            }
        }
    }

    /// Applies `i^phase X^x Z^z`.
    pub fn apply_pauli(&mut self, p: &Pauli) {
        let xmask = mask(&p.x);
        let zmask = mask(&p.z);
        let global = Complex64::i().powu(p.phase as u32);
        let old = self.amplitudes.clone();
        for (k, a) in old.into_iter().enumerate() {
            let sign = if (k & zmask).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            self.amplitudes[k ^ xmask] = a * sign * global;
        }
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

fn mask(bits: &[bool]) -> usize {
    bits.iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .fold(0, |m, (i, _)| m | 1 << i)
}

fn cplx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// 2x2 matrix of a gate other than `Clifford1`.
pub fn sq_matrix(g: &SqGate) -> [[Complex64; 2]; 2] {
    let h = FRAC_1_SQRT_2;
    match g {
        SqGate::H => [[cplx(h, 0.0), cplx(h, 0.0)], [cplx(h, 0.0), cplx(-h, 0.0)]],
        SqGate::X => [[cplx(0.0, 0.0), cplx(1.0, 0.0)], [cplx(1.0, 0.0), cplx(0.0, 0.0)]],
        SqGate::S => [[cplx(1.0, 0.0), cplx(0.0, 0.0)], [cplx(0.0, 0.0), cplx(0.0, 1.0)]],
        SqGate::Sdg => [[cplx(1.0, 0.0), cplx(0.0, 0.0)], [cplx(0.0, 0.0), cplx(0.0, -1.0)]],
        SqGate::ZPow(a) => [
            [cplx(1.0, 0.0), cplx(0.0, 0.0)],
            [cplx(0.0, 0.0), Complex64::cis(PI * a.value())],
        ],
        SqGate::XPow(a) => {
            // H diag(1, w) H = [[1+w, 1-w], [1-w, 1+w]] / 2
            let w = Complex64::cis(PI * a.value());
            let one = cplx(1.0, 0.0);
            [
                [(one + w) * 0.5, (one - w) * 0.5],
                [(one - w) * 0.5, (one + w) * 0.5],
            ]
        }
        SqGate::Clifford1(idx) => {
            let mut m = [[cplx(1.0, 0.0), cplx(0.0, 0.0)], [cplx(0.0, 0.0), cplx(1.0, 0.0)]];
            for g in single_qubit_clifford(*idx) {
                let a = sq_matrix(g);
                let mut r = [[cplx(0.0, 0.0); 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        r[i][j] = a[i][0] * m[0][j] + a[i][1] * m[1][j];
                    }
                }
                m = r;
            }
            m
        }
    }
}

fn apply_unitary(state: &mut StateVector, instr: &Instruction) {
    match instr {
        Instruction::Sq { qubit, gate } => state.apply_sq(*qubit, gate),
        Instruction::Gcz { pairs } => {
            let p: Vec<_> = pairs.iter().map(|&p| (p, Angle::ONE)).collect();
            state.apply_phase_pairs(&p);
        }
        Instruction::Gt { angles } => state.apply_phase_pairs(angles),
        Instruction::CxLayer {
            matrix,
            controls,
            targets,
        } => {
            let rows: Vec<usize> = (0..controls.len())
                .map(|i| {
                    targets
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| matrix.get(i, j))
                        .fold(0, |m, (_, &t)| m | 1 << t)
                })
                .collect();
            let old = state.amplitudes.clone();
            for (k, a) in old.into_iter().enumerate() {
                let flip = controls
                    .iter()
                    .zip(&rows)
                    .filter(|(&cq, _)| k >> cq & 1 == 1)
                    .fold(0, |m, (_, &r)| m ^ r);
                state.amplitudes[k ^ flip] = a;
            }
        }
        Instruction::MeasureX { .. } | Instruction::Conditional { .. } => {
            unreachable!("handled by the caller")
        }
    }
}

/// Probability of outcome `outcome` when measuring `q` in the X basis.
fn measure_x(state: &mut StateVector, q: usize, cbit: usize, outcome: bool) -> Result<()> {
    state.apply_sq(q, &SqGate::H);
    let bit = 1 << q;
    let p: f64 = state
        .amplitudes
        .iter()
        .enumerate()
        .filter(|(k, _)| (k & bit != 0) == outcome)
        .map(|(_, a)| a.norm_sqr())
        .sum();
    if p < PROBABILITY_FLOOR {
        return Err(SimError::ZeroProbabilityBranch { cbit, outcome });
    }
    let scale = 1.0 / p.sqrt();
    for (k, a) in state.amplitudes.iter_mut().enumerate() {
        if (k & bit != 0) == outcome {
            *a *= scale;
        } else {
            *a = cplx(0.0, 0.0);
        }
    }
    state.apply_sq(q, &SqGate::H);
    state.probability *= p;
    state.cbits.insert(cbit, outcome);
    Ok(())
}

fn step(state: &mut StateVector, instr: &Instruction, outcome: Option<bool>) -> Result<()> {
    match instr {
        Instruction::MeasureX { qubit, cbit } => {
            let o = outcome.ok_or(SimError::MissingOutcome(*cbit))?;
            measure_x(state, *qubit, *cbit, o)
        }
        Instruction::Conditional { cbit, qubit, gate } => {
            if state.cbits.get(cbit).copied().unwrap_or(false) {
                state.apply_sq(*qubit, gate);
            }
            Ok(())
        }
        other => {
            apply_unitary(state, other);
            Ok(())
        }
    }
}

fn check_dims(c: &Circuit, input: &StateVector) -> Result<()> {
    if input.num_qubits != c.num_qubits() {
        return Err(SimError::DimensionMismatch(format!(
            "{}-qubit state for a {}-qubit circuit",
            input.num_qubits,
            c.num_qubits()
        )));
    }
    Ok(())
}

/// Runs `c` on `input`. Every X measurement takes the outcome forced for its
/// classical bit.
pub fn simulate(
    c: &Circuit,
    input: &StateVector,
    outcomes: Option<&BTreeMap<usize, bool>>,
) -> Result<StateVector> {
    check_dims(c, input)?;
    let mut s = input.clone();
    for instr in c.instructions() {
        let forced = match instr {
            Instruction::MeasureX { cbit, .. } => outcomes.and_then(|o| o.get(cbit).copied()),
            _ => None,
        };
        step(&mut s, instr, forced)?;
    }
    Ok(s)
}

/// One measurement branch: the outcome record, its probability and the
/// renormalized final state.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub outcomes: BTreeMap<usize, bool>,
    pub probability: f64,
    pub state: StateVector,
}

/// Explores every outcome assignment depth-first. Branches of probability
/// zero are omitted.
pub fn enumerate_branches(c: &Circuit, input: &StateVector) -> Result<Vec<Branch>> {
    check_dims(c, input)?;
    let m = c.num_measurements();
    if m > MAX_BRANCH_MEASUREMENTS {
        return Err(SimError::TooManyMeasurements(m));
    }
    let mut out = Vec::new();
    explore(c.instructions(), input.clone(), &mut out)?;
    Ok(out)
}

fn explore(instrs: &[Instruction], mut state: StateVector, out: &mut Vec<Branch>) -> Result<()> {
    for (i, instr) in instrs.iter().enumerate() {
        if let Instruction::MeasureX { .. } = instr {
            for outcome in [false, true] {
                let mut s = state.clone();
                match step(&mut s, instr, Some(outcome)) {
                    Ok(()) => explore(&instrs[i + 1..], s, out)?,
                    Err(SimError::ZeroProbabilityBranch { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
            return Ok(());
        }
        step(&mut state, instr, None)?;
    }
    out.push(Branch {
        outcomes: state.cbits.clone(),
        probability: state.probability,
        state,
    });
    Ok(())
}

/// Dense unitary, row-major, `dim x dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    pub dim: usize,
    pub data: Vec<Complex64>,
}

impl DenseMatrix {
    pub fn get(&self, r: usize, col: usize) -> Complex64 {
        self.data[r * self.dim + col]
    }

    /// `max |(U^dagger U - I)_{ij}|`.
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let s: Complex64 = (0..d).map(|k| self.get(k, i).conj() * self.get(k, j)).sum();
                let e = if i == j { s - 1.0 } else { s };
                worst = worst.max(e.norm());
            }
        }
        worst
    }

    /// Distance after the best global phase, with the phase used.
    pub fn distance_up_to_phase(&self, other: &DenseMatrix) -> (f64, Complex64) {
        let (dev, phase, _) = align(&self.data, &other.data);
        (dev, phase)
    }
}

/// Column `k` is the output of `c` on `|k>`.
pub fn extract_unitary(c: &Circuit) -> Result<DenseMatrix> {
    let n = c.num_qubits();
    if n > MAX_UNITARY_QUBITS {
        return Err(SimError::TooLarge(n, MAX_UNITARY_QUBITS));
    }
    if c.num_measurements() > 0 {
        return Err(SimError::HasMeasurements);
    }
    let dim = 1 << n;
    let mut data = vec![cplx(0.0, 0.0); dim * dim];
    for col in 0..dim {
        let out = simulate(c, &StateVector::basis(n, col)?, None)?;
        for (r, a) in out.amplitudes.iter().enumerate() {
            data[r * dim + col] = *a;
        }
    }
    Ok(DenseMatrix { dim, data })
}

/// Result of comparing a circuit against a specification.
#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceVerdict {
    pub equal: bool,
    pub max_deviation: f64,
    pub global_phase: Complex64,
    pub failing_basis_state: Option<usize>,
    pub detail: Option<String>,
}

impl EquivalenceVerdict {
    fn pass(max_deviation: f64, global_phase: Complex64) -> Self {
        EquivalenceVerdict {
            equal: true,
            max_deviation,
            global_phase,
            failing_basis_state: None,
            detail: None,
        }
    }

    fn fail(max_deviation: f64, failing: Option<usize>, detail: String) -> Self {
        EquivalenceVerdict {
            equal: false,
            max_deviation,
            global_phase: cplx(1.0, 0.0),
            failing_basis_state: failing,
            detail: Some(detail),
        }
    }
}

/// Aligns `actual` to `expected` by the unit phase maximizing the real
/// overlap and returns `(max deviation, phase, index of max deviation)`.
fn align(expected: &[Complex64], actual: &[Complex64]) -> (f64, Complex64, usize) {
    let overlap: Complex64 = expected.iter().zip(actual).map(|(e, a)| e.conj() * a).sum();
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        cplx(1.0, 0.0)
    };
    let mut worst = (0.0, 0);
    for (k, (e, a)) in expected.iter().zip(actual).enumerate() {
        let d = (a - phase * e).norm();
        if d > worst.0 {
            worst = (d, k);
        }
    }
    (worst.0, phase, worst.1)
}

/// Checks that `c` maps `|x>|0^m>` to `(-1)^{OR(x)} |x>|0^m>` for every
/// data value `x`, up to one global phase. For adaptive circuits the check
/// runs per outcome record: every record must occur with the same
/// probability for every `x`, act as the OR phase up to a record-dependent
/// global phase, and leave each measured ancilla in the eigenstate it was
/// projected to.
pub fn check_or_contract(c: &Circuit, n_data: usize) -> Result<EquivalenceVerdict> {
    if n_data > c.num_qubits() {
        return Err(SimError::DimensionMismatch(format!(
            "{n_data} data qubits in a {}-qubit circuit",
            c.num_qubits()
        )));
    }
    let n = c.num_qubits();
    // Per outcome record: (expected, actual, probability) columns over x.
    let mut records: BTreeMap<Vec<(usize, bool)>, Vec<(usize, Vec<Complex64>, Vec<Complex64>, f64)>> =
        BTreeMap::new();
    let last_meas: BTreeMap<usize, usize> = c
        .instructions()
        .iter()
        .filter_map(|i| match i {
            Instruction::MeasureX { qubit, cbit } => Some((*cbit, *qubit)),
            _ => None,
        })
        .collect();
    for x in 0..1usize << n_data {
        let input = StateVector::basis(n, x)?;
        let sign = if x == 0 { 1.0 } else { -1.0 };
        for b in enumerate_branches(c, &input)? {
            // Expected: data sign-flipped, unmeasured ancillas in |0>, a
            // measured ancilla in H|m> for its last outcome m.
            let mut exp = StateVector::basis(n, x)?;
            let mut last_outcome: BTreeMap<usize, bool> = BTreeMap::new();
            for (cbit, qubit) in &last_meas {
                if let Some(&o) = b.outcomes.get(cbit) {
                    last_outcome.insert(*qubit, o);
                }
            }
            for (q, o) in last_outcome {
                if o {
                    exp.apply_sq(q, &SqGate::X);
                }
                exp.apply_sq(q, &SqGate::H);
            }
            for a in exp.amplitudes.iter_mut() {
                *a *= sign;
            }
            let key = b.outcomes.iter().map(|(&k, &v)| (k, v)).collect();
            records
                .entry(key)
                .or_default()
                .push((x, exp.amplitudes, b.state.amplitudes, b.probability));
        }
    }
    let mut worst = 0.0f64;
    let mut phase0 = cplx(1.0, 0.0);
    let total = 1usize << n_data;
    for (i, (record, cols)) in records.iter().enumerate() {
        if cols.len() != total {
            let seen: Vec<usize> = cols.iter().map(|c| c.0).collect();
            let missing = (0..total).find(|x| !seen.contains(x));
            return Ok(EquivalenceVerdict::fail(
                1.0,
                missing,
                format!("outcome record {record:?} does not occur for every input"),
            ));
        }
        let p0 = cols[0].3;
        if let Some(col) = cols.iter().find(|col| (col.3 - p0).abs() > TOLERANCE) {
            return Ok(EquivalenceVerdict::fail(
                (col.3 - p0).abs(),
                Some(col.0),
                format!("outcome record {record:?} has input-dependent probability"),
            ));
        }
        let expected: Vec<Complex64> = cols.iter().flat_map(|col| col.1.iter().copied()).collect();
        let actual: Vec<Complex64> = cols.iter().flat_map(|col| col.2.iter().copied()).collect();
        let (dev, phase, at) = align(&expected, &actual);
        if i == 0 {
            phase0 = phase;
        }
        worst = worst.max(dev);
        if dev > TOLERANCE {
            let x = cols[at / (1 << n)].0;
            return Ok(EquivalenceVerdict::fail(
                dev,
                Some(x),
                format!("output differs from the OR phase at x = {x} (record {record:?})"),
            ));
        }
    }
    Ok(EquivalenceVerdict::pass(worst, phase0))
}

/// Checks a Toffoli with `num_controls` controls on qubits
/// `0..num_controls` and its target next. Conjugating by `X` on the data and
/// `H` on the target turns a Toffoli into `-OR`, so the wrapped circuit goes
/// through [`check_or_contract`].
pub fn check_mct_contract(c: &Circuit, num_controls: usize) -> Result<EquivalenceVerdict> {
    let n = num_controls + 1;
    if n > c.num_qubits() {
        return Err(SimError::DimensionMismatch(format!(
            "{num_controls} controls and a target in a {}-qubit circuit",
            c.num_qubits()
        )));
    }
    let mut w = Circuit::new(c.num_qubits(), n);
    for q in 0..n {
        w.x(q);
    }
    w.h(num_controls);
    w.extend_from(c)
        .map_err(|e| SimError::DimensionMismatch(e.to_string()))?;
    w.h(num_controls);
    for q in 0..n {
        w.x(q);
    }
    check_or_contract(&w, n)
}

/// Modes of [`check_clifford_contract`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CliffordCheckMode {
    /// `c` acts on `n` qubits and its tableau must equal `t` bit-exactly.
    ExactTableau,
    /// `c` acts on `2n` qubits, `n` data then `n` ancillae starting in
    /// `|0>`, and must implement `t` on the data and restore the ancillae.
    StabilizerAncilla,
}

/// A random `n`-qubit Clifford circuit of `H`, `S` and `CZ` gates.
pub fn random_clifford_circuit(n: usize, gates: usize, rng: &mut impl rand::Rng) -> Circuit {
    let mut circ = Circuit::new(n, n);
    for _ in 0..gates {
        let q = rng.gen_range(0..n);
        match rng.gen_range(0..if n > 1 { 4 } else { 3 }) {
            0 => circ.h(q),
            1 => circ.sq(q, SqGate::S),
            2 => circ.x(q),
            _ => {
                let mut r = rng.gen_range(0..n - 1);
                if r >= q {
                    r += 1;
                }
                circ.add(Instruction::gcz([(q, r)]).unwrap());
            }
        }
    }
    circ
}

/// Checks a Clifford circuit against a tableau, see [`CliffordCheckMode`].
/// The ancilla mode prepares [`STABILIZER_INPUTS`] random stabilizer states
/// on the data register from a fixed seed.
pub fn check_clifford_contract(
    c: &Circuit,
    t: &CliffordTableau,
    mode: CliffordCheckMode,
) -> Result<EquivalenceVerdict> {
    let n = t.n();
    match mode {
        CliffordCheckMode::ExactTableau => {
            if c.num_qubits() != n {
                return Err(SimError::DimensionMismatch(format!(
                    "{}-qubit circuit for a {n}-qubit tableau",
                    c.num_qubits()
                )));
            }
            let got = CliffordTableau::from_circuit(c)?;
            if &got == t {
                Ok(EquivalenceVerdict::pass(0.0, cplx(1.0, 0.0)))
            } else {
                let row = (0..2 * n)
                    .find(|&i| got.row_pauli(i) != t.row_pauli(i))
                    .unwrap_or(0);
                Ok(EquivalenceVerdict::fail(
                    1.0,
                    None,
                    format!("tableau row {row} differs"),
                ))
            }
        }
        CliffordCheckMode::StabilizerAncilla => {
            if c.num_qubits() != 2 * n {
                return Err(SimError::DimensionMismatch(format!(
                    "{}-qubit circuit for a {n}-qubit tableau with {n} ancillae",
                    c.num_qubits()
                )));
            }
            let tc = CliffordTableau::from_circuit(c)?;
            let reference = layered_decompose(t).reference_circuit().widened(2 * n);
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + n as u64);
            let mut worst = 0.0f64;
            for k in 0..STABILIZER_INPUTS {
                let prep = random_clifford_circuit(n, 4 * n * n + 4, &mut rng);
                let v = CliffordTableau::from_circuit(&prep)?;
                // V, then c, then (U V)^{-1}: must fix |0...0>.
                let w = v
                    .extend(n)
                    .then(&tc)?
                    .then(&v.then(t)?.inverse().extend(n))?;
                if !w.stabilizes_zero_state() {
                    return Ok(EquivalenceVerdict::fail(
                        1.0,
                        None,
                        format!("stabilizer input {k}: output state differs"),
                    ));
                }
                if 2 * n <= 12 {
                    let psi = simulate(&prep.widened(2 * n), &StateVector::zero(2 * n)?, None)?;
                    let got = simulate(c, &psi, None)?;
                    let want = simulate(&reference, &psi, None)?;
                    let (dev, _, at) = align(&want.amplitudes, &got.amplitudes);
                    worst = worst.max(dev);
                    if dev > TOLERANCE {
                        return Ok(EquivalenceVerdict::fail(
                            dev,
                            Some(at),
                            format!("stabilizer input {k}: dense amplitudes differ"),
                        ));
                    }
                }
            }
            Ok(EquivalenceVerdict::pass(worst, cplx(1.0, 0.0)))
        }
    }
}

/// Checks `U P U^dagger = T(P)` densely for every generator `P`, where `T`
/// is the tableau obtained by replaying the Clifford circuit `c`.
pub fn pauli_conjugation_agrees(c: &Circuit) -> Result<EquivalenceVerdict> {
    let n = c.num_qubits();
    let t = CliffordTableau::from_circuit(c)?;
    let u = extract_unitary(c)?;
    let dim = 1 << n;
    let column = |k: usize| StateVector {
        num_qubits: n,
        amplitudes: (0..dim).map(|r| u.get(r, k)).collect(),
        cbits: BTreeMap::new(),
        probability: 1.0,
    };
    let mut worst = 0.0f64;
    for g in 0..2 * n {
        let p = if g < n {
            Pauli::single_x(n, g)
        } else {
            Pauli::single_z(n, g - n)
        };
        let img = t.conjugate(&p);
        for k in 0..dim {
            // U P |k> versus T(P) U |k>.
            let mut basis = StateVector::basis(n, k)?;
            basis.apply_pauli(&p);
            let (src, coef) = basis
                .amplitudes
                .iter()
                .enumerate()
                .find(|(_, a)| a.norm() > 0.5)
                .map(|(i, a)| (i, *a))
                .expect("Pauli maps basis states to basis states");
            let mut lhs = column(src);
            for a in lhs.amplitudes.iter_mut() {
                *a *= coef;
            }
            let mut rhs = column(k);
            rhs.apply_pauli(&img);
            for (a, b) in lhs.amplitudes.iter().zip(&rhs.amplitudes) {
                worst = worst.max((a - b).norm());
            }
            if worst > TOLERANCE {
                return Ok(EquivalenceVerdict::fail(
                    worst,
                    Some(k),
                    format!("generator {g} conjugates differently"),
                ));
            }
        }
    }
    Ok(EquivalenceVerdict::pass(worst, cplx(1.0, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::f2linalg::F2Matrix;

    fn amp(s: &StateVector, k: usize) -> Complex64 {
        s.amplitudes()[k]
    }

    #[test]
    fn gcz_and_gt_phases() {
        let mut circ = Circuit::new(2, 2);
        circ.add(Instruction::gcz([(0, 1)]).unwrap());
        let out = simulate(&circ, &StateVector::basis(2, 3).unwrap(), None).unwrap();
        assert!((amp(&out, 3) - cplx(-1.0, 0.0)).norm() < 1e-12);

        let mut circ = Circuit::new(2, 2);
        circ.add(Instruction::gt([((0, 1), Angle::HALF)]).unwrap());
        let out = simulate(&circ, &StateVector::basis(2, 3).unwrap(), None).unwrap();
        assert!((amp(&out, 3) - cplx(0.0, 1.0)).norm() < 1e-12);
        let out = simulate(&circ, &StateVector::basis(2, 1).unwrap(), None).unwrap();
        assert!((amp(&out, 1) - cplx(1.0, 0.0)).norm() < 1e-12);
    }

    fn cnot_01() -> Circuit {
        let mut circ = Circuit::new(2, 2);
        circ.add(Instruction::cx_layer(F2Matrix::identity(1), vec![0], vec![1]).unwrap());
        circ
    }

    #[test]
    fn lowered_cx_layer_is_cnot() {
        let u = extract_unitary(&cnot_01().lowered()).unwrap();
        // |x0 x1> with control qubit 0 = bit 0.
        let perm = [0, 3, 2, 1];
        for (col, &row) in perm.iter().enumerate() {
            for r in 0..4 {
                let want = if r == row { 1.0 } else { 0.0 };
                assert!((u.get(r, col) - cplx(want, 0.0)).norm() < 1e-12);
            }
        }
        assert!(u.unitarity_defect() < 1e-12);
    }

    #[test]
    fn empty_circuit_is_identity() {
        let u = extract_unitary(&Circuit::new(3, 3)).unwrap();
        for r in 0..8 {
            for col in 0..8 {
                let want = if r == col { 1.0 } else { 0.0 };
                assert_eq!(u.get(r, col), cplx(want, 0.0));
            }
        }
    }

    #[test]
    fn cnot_phase_kickback() {
        // CNOT (|phi> |+>) = |phi> |+>, CNOT (|phi> |->) = (Z |phi>) |->.
        let phi = [cplx(0.6, 0.0), cplx(0.0, 0.8)];
        for (minus, zsign) in [(false, 1.0), (true, -1.0)] {
            let t = if minus { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
            let input = vec![
                phi[0] * FRAC_1_SQRT_2,
                phi[1] * FRAC_1_SQRT_2,
                phi[0] * t,
                phi[1] * t,
            ];
            let out = simulate(
                &cnot_01(),
                &StateVector::from_amplitudes(2, input).unwrap(),
                None,
            )
            .unwrap();
            let want = [
                phi[0] * FRAC_1_SQRT_2,
                phi[1] * FRAC_1_SQRT_2 * zsign,
                phi[0] * t,
                phi[1] * t * zsign,
            ];
            for k in 0..4 {
                assert!((amp(&out, k) - want[k]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn branches() {
        let circ = Circuit::new(1, 1);
        let b = enumerate_branches(&circ, &StateVector::zero(1).unwrap()).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].probability, 1.0);

        let mut circ = Circuit::new(1, 1);
        circ.measure_x(0);
        let b = enumerate_branches(&circ, &StateVector::zero(1).unwrap()).unwrap();
        assert_eq!(b.len(), 2);
        for br in &b {
            assert!((br.probability - 0.5).abs() < 1e-12);
            assert!((br.state.norm() - 1.0).abs() < 1e-12);
        }

        // A |+> input gives a certain outcome; the other branch is dropped
        // and forcing it is an error.
        let mut circ = Circuit::new(1, 1);
        circ.h(0);
        let cb = circ.measure_x(0);
        let b = enumerate_branches(&circ, &StateVector::zero(1).unwrap()).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].outcomes[&cb], false);
        let forced = BTreeMap::from([(cb, true)]);
        assert_eq!(
            simulate(&circ, &StateVector::zero(1).unwrap(), Some(&forced)).unwrap_err(),
            SimError::ZeroProbabilityBranch { cbit: 0, outcome: true }
        );
        assert_eq!(
            simulate(&circ, &StateVector::zero(1).unwrap(), None).unwrap_err(),
            SimError::MissingOutcome(0)
        );
    }

    #[test]
    fn feedforward_applies_conditionally() {
        // Measure |-> then conditionally flip it back to |+>.
        let mut circ = Circuit::new(1, 1);
        circ.x(0);
        circ.h(0);
        let cb = circ.measure_x(0);
        circ.conditional(cb, 0, SqGate::Z);
        let b = enumerate_branches(&circ, &StateVector::zero(1).unwrap()).unwrap();
        assert_eq!(b.len(), 1);
        let a = b[0].state.amplitudes();
        assert!((a[0] - a[1]).norm() < 1e-12);
    }

    #[test]
    fn or2_base_case_passes() {
        // OR_2 = -Z x Z x CZ up to global phase.
        let mut circ = Circuit::new(2, 2);
        circ.add(Instruction::gcz([(0, 1)]).unwrap());
        circ.z(0);
        circ.z(1);
        let v = check_or_contract(&circ, 2).unwrap();
        assert!(v.equal, "{v:?}");

        let mut bad = Circuit::new(2, 2);
        bad.add(Instruction::gt([((0, 1), Angle::HALF)]).unwrap());
        bad.z(0);
        bad.z(1);
        let v = check_or_contract(&bad, 2).unwrap();
        assert!(!v.equal);
        assert_eq!(v.failing_basis_state, Some(3));
    }

    #[test]
    fn clifford_contract_modes() {
        let t = CliffordTableau::identity(3);
        let v = check_clifford_contract(&Circuit::new(3, 3), &t, CliffordCheckMode::ExactTableau)
            .unwrap();
        assert!(v.equal);
        let mut x = Circuit::new(3, 3);
        x.x(1);
        let v = check_clifford_contract(&x, &t, CliffordCheckMode::ExactTableau).unwrap();
        assert!(!v.equal);
        let v = check_clifford_contract(&Circuit::new(6, 3), &t, CliffordCheckMode::StabilizerAncilla)
            .unwrap();
        assert!(v.equal);
        let v = check_clifford_contract(&x.widened(6), &t, CliffordCheckMode::StabilizerAncilla)
            .unwrap();
        assert!(!v.equal);
        assert!(check_clifford_contract(&x, &t, CliffordCheckMode::StabilizerAncilla).is_err());
    }

    #[test]
    fn dense_and_tableau_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=5 {
            let circ = random_clifford_circuit(n, 30, &mut rng);
            assert!(pauli_conjugation_agrees(&circ).unwrap().equal);
        }
    }

    #[test]
    fn clifford1_matrices_are_distinct_unitaries() {
        let mut mats: Vec<[[Complex64; 2]; 2]> = Vec::new();
        for idx in 0..24 {
            let m = sq_matrix(&SqGate::Clifford1(idx));
            for prev in &mats {
                // Equal up to phase iff |tr(A^dag B)| = 2.
                let tr: Complex64 = (0..2)
                    .flat_map(|i| (0..2).map(move |j| (i, j)))
                    .map(|(i, j)| prev[i][j].conj() * m[i][j])
                    .sum();
                assert!((tr.norm() - 2.0).abs() > 1e-6);
            }
            mats.push(m);
        }
    }
}
