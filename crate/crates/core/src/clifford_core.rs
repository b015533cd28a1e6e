//! Stabilizer tableaux and the layered `L-CX-CZ-L-CZ-L` normal form.
//!
//! A tableau stores the images of the Pauli generators under conjugation
//! `P -> U P U^dagger`. Row `i < n` is the image of `X_i`, row `n + i` the
//! image of `Z_i`; columns are `[x | z]` and a set `(x, z)` pair on a qubit
//! denotes `Y`. Phases are sign bits.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::sync::OnceLock;

use rand::Rng;
use thiserror::Error;

use crate::circuit::{Circuit, Instruction, SqGate};
use crate::f2linalg::F2Matrix;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CliffordError {
    #[error("non-Clifford instruction: {0}")]
    NonClifford(String),
    #[error("qubit {qubit} out of range for {n} qubits")]
    QubitOutOfRange { qubit: usize, n: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("not a valid tableau: {0}")]
    InvalidTableau(String),
    #[error("tableau parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, CliffordError>;

/// A Pauli operator `i^phase X^x Z^z`, with every `X` factor to the left of
/// every `Z` factor.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Pauli {
    pub x: Vec<bool>,
    pub z: Vec<bool>,
    pub phase: u8,
}

impl Pauli {
    pub fn identity(n: usize) -> Self {
        Pauli {
            x: vec![false; n],
            z: vec![false; n],
            phase: 0,
        }
    }

    pub fn single_x(n: usize, q: usize) -> Self {
        let mut p = Pauli::identity(n);
        p.x[q] = true;
        p
    }

    pub fn single_z(n: usize, q: usize) -> Self {
        let mut p = Pauli::identity(n);
        p.z[q] = true;
        p
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// `self * other`.
    pub fn mul(&self, other: &Pauli) -> Pauli {
        // X^a Z^b X^c Z^d = (-1)^{b.c} X^{a+c} Z^{b+d}
        let swaps = self.z.iter().zip(&other.x).filter(|(&b, &c)| b && c).count();
        Pauli {
            x: self.x.iter().zip(&other.x).map(|(a, c)| a ^ c).collect(),
            z: self.z.iter().zip(&other.z).map(|(b, d)| b ^ d).collect(),
            phase: ((self.phase as usize + other.phase as usize + 2 * swaps) % 4) as u8,
        }
    }

    fn y_count(&self) -> usize {
        self.x.iter().zip(&self.z).filter(|(&a, &b)| a && b).count()
    }

    /// Builds `(-1)^sign` times the tensor product with `Y` where both bits
    /// are set.
    pub fn from_signed(x: Vec<bool>, z: Vec<bool>, sign: bool) -> Self {
        let mut p = Pauli { x, z, phase: 0 };
        p.phase = ((2 * sign as usize + p.y_count()) % 4) as u8;
        p
    }

    /// Sign bit of a Hermitian Pauli written with `Y` factors.
    pub fn sign(&self) -> bool {
        let d = (self.phase as usize + 4 - self.y_count() % 4) % 4;
        assert!(d % 2 == 0, "Pauli is not Hermitian");
        d == 2
    }

    pub fn commutes_with(&self, other: &Pauli) -> bool {
        let s = self
            .x
            .iter()
            .zip(&other.z)
            .chain(self.z.iter().zip(&other.x))
            .filter(|(&a, &b)| a && b)
            .count();
        s % 2 == 0
    }
}

/// A Clifford operator as a `2n x 2n` symplectic matrix plus sign bits.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct CliffordTableau {
    n: usize,
    symplectic: F2Matrix,
    phases: Vec<bool>,
}

impl CliffordTableau {
    pub fn identity(n: usize) -> Self {
        CliffordTableau {
            n,
            symplectic: F2Matrix::identity(2 * n),
            phases: vec![false; 2 * n],
        }
    }

    /// Validates the symplectic condition and builds a tableau.
    pub fn from_parts(symplectic: F2Matrix, phases: Vec<bool>) -> Result<Self> {
        let m = symplectic.rows();
        if !symplectic.is_square() || m % 2 != 0 || phases.len() != m {
            return Err(CliffordError::DimensionMismatch(format!(
                "{}x{} matrix with {} phases",
                symplectic.rows(),
                symplectic.cols(),
                phases.len()
            )));
        }
        let t = CliffordTableau {
            n: m / 2,
            symplectic,
            phases,
        };
        if !t.is_symplectic() {
            return Err(CliffordError::InvalidTableau(
                "matrix does not preserve the symplectic form".into(),
            ));
        }
        Ok(t)
    }

    /// Tableau of the CNOT circuit `|x> -> |A x>`.
    pub fn from_linear(a: &F2Matrix) -> Result<Self> {
        let inv = a
            .inverse()
            .map_err(|e| CliffordError::InvalidTableau(format!("linear map: {e}")))?;
        let n = a.rows();
        let mut s = F2Matrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for r in 0..n {
                // X_i -> X^{A e_i}, Z_i -> Z^{A^{-T} e_i}
                s.set(i, r, a.get(r, i));
                s.set(n + i, n + r, inv.get(i, r));
            }
        }
        Ok(CliffordTableau {
            n,
            symplectic: s,
            phases: vec![false; 2 * n],
        })
    }

    /// Tableau of a Clifford-only circuit.
    pub fn from_circuit(c: &Circuit) -> Result<Self> {
        let mut t = CliffordTableau::identity(c.num_qubits());
        t.apply_circuit(c)?;
        Ok(t)
    }

    /// Makes `5 n^2` draws from `{I, H, S, CZ}` on random qubits, applies
    /// them to the identity and finishes with a uniformly random Pauli
    /// layer. Not uniform over the group. The idle option matters: `H` and
    /// `S` are both odd modulo Paulis, so a fixed-length word of them only
    /// reaches half of the group.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut t = CliffordTableau::identity(n);
        for _ in 0..5 * n * n {
            let kind = if n >= 2 { rng.gen_range(0..4) } else { rng.gen_range(0..3) };
            let q = rng.gen_range(0..n);
            match kind {
                0 => {}
                1 => t.h(q),
                2 => t.s(q),
                _ => {
                    let mut r = rng.gen_range(0..n - 1);
                    if r >= q {
                        r += 1;
                    }
                    t.cz(q, r);
                }
            }
        }
        for q in 0..n {
            if rng.gen() {
                t.x(q);
            }
            if rng.gen() {
                t.z(q);
            }
        }
        t
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn symplectic(&self) -> &F2Matrix {
        &self.symplectic
    }

    pub fn phases(&self) -> &[bool] {
        &self.phases
    }

    /// Checks `S Omega S^T = Omega`.
    pub fn is_symplectic(&self) -> bool {
        let n = self.n;
        let mut omega = F2Matrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            omega.set(i, n + i, true);
            omega.set(n + i, i, true);
        }
        let lhs = self
            .symplectic
            .mul(&omega)
            .and_then(|m| m.mul(&self.symplectic.transpose()));
        lhs.map(|m| m == omega).unwrap_or(false)
    }

    /// Image of generator row `i` (`X_i` for `i < n`, else `Z_{i-n}`).
    pub fn row_pauli(&self, i: usize) -> Pauli {
        let n = self.n;
        let x = (0..n).map(|q| self.symplectic.get(i, q)).collect();
        let z = (0..n).map(|q| self.symplectic.get(i, n + q)).collect();
        Pauli::from_signed(x, z, self.phases[i])
    }

    pub fn x_image(&self, q: usize) -> Pauli {
        self.row_pauli(q)
    }

    pub fn z_image(&self, q: usize) -> Pauli {
        self.row_pauli(self.n + q)
    }

    fn set_row_pauli(&mut self, i: usize, p: &Pauli) {
        let n = self.n;
        for q in 0..n {
            self.symplectic.set(i, q, p.x[q]);
            self.symplectic.set(i, n + q, p.z[q]);
        }
        self.phases[i] = p.sign();
    }

    /// `U P U^dagger`.
    pub fn conjugate(&self, p: &Pauli) -> Pauli {
        assert_eq!(p.n(), self.n, "Pauli width mismatch");
        let mut out = Pauli::identity(self.n);
        out.phase = p.phase;
        for q in 0..self.n {
            if p.x[q] {
                out = out.mul(&self.row_pauli(q));
            }
        }
        for q in 0..self.n {
            if p.z[q] {
                out = out.mul(&self.row_pauli(self.n + q));
            }
        }
        out
    }

    /// The operator "apply `self`, then `after`".
    pub fn then(&self, after: &CliffordTableau) -> Result<CliffordTableau> {
        if after.n != self.n {
            return Err(CliffordError::DimensionMismatch(format!(
                "composing {}-qubit and {}-qubit tableaux",
                self.n, after.n
            )));
        }
        let mut out = self.clone();
        for i in 0..2 * self.n {
            let img = after.conjugate(&self.row_pauli(i));
            out.set_row_pauli(i, &img);
        }
        Ok(out)
    }

    pub fn inverse(&self) -> CliffordTableau {
        // Symplectic inverse is Omega S^T Omega; signs are then read off by
        // composing with the unsigned candidate.
        let n = self.n;
        let st = self.symplectic.transpose();
        let mut s = F2Matrix::zeros(2 * n, 2 * n);
        for i in 0..2 * n {
            for j in 0..2 * n {
                s.set(i, j, st.get((i + n) % (2 * n), (j + n) % (2 * n)));
            }
        }
        let mut cand = CliffordTableau {
            n,
            symplectic: s,
            phases: vec![false; 2 * n],
        };
        let check = cand.then(self).expect("same width");
        debug_assert_eq!(check.symplectic, F2Matrix::identity(2 * n));
        cand.phases = check.phases;
        cand
    }

    /// Extends with `extra` qubits on which the operator acts trivially.
    pub fn extend(&self, extra: usize) -> CliffordTableau {
        let n = self.n;
        let m = n + extra;
        let mut s = F2Matrix::identity(2 * m);
        let mut phases = vec![false; 2 * m];
        for (src, dst) in (0..n).map(|i| (i, i)).chain((0..n).map(|i| (n + i, m + i))) {
            for q in 0..m {
                s.set(dst, q, false);
                s.set(dst, m + q, false);
            }
            for q in 0..n {
                s.set(dst, q, self.symplectic.get(src, q));
                s.set(dst, m + q, self.symplectic.get(src, n + q));
            }
            phases[dst] = self.phases[src];
        }
        CliffordTableau {
            n: m,
            symplectic: s,
            phases,
        }
    }

    /// Whether `U |0...0>` equals `|0...0>` up to global phase.
    pub fn stabilizes_zero_state(&self) -> bool {
        let n = self.n;
        (n..2 * n).all(|i| !self.phases[i] && (0..n).all(|q| !self.symplectic.get(i, q)))
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n {
            return Err(CliffordError::QubitOutOfRange { qubit: q, n: self.n });
        }
        Ok(())
    }

    #[inline]
    fn xz(&self, i: usize, q: usize) -> (bool, bool) {
        (self.symplectic.get(i, q), self.symplectic.get(i, self.n + q))
    }

    pub fn h(&mut self, q: usize) {
        for i in 0..2 * self.n {
            let (x, z) = self.xz(i, q);
            self.phases[i] ^= x & z;
            self.symplectic.set(i, q, z);
            self.symplectic.set(i, self.n + q, x);
        }
    }

    pub fn s(&mut self, q: usize) {
        for i in 0..2 * self.n {
            let (x, z) = self.xz(i, q);
            self.phases[i] ^= x & z;
            self.symplectic.set(i, self.n + q, z ^ x);
        }
    }

    pub fn sdg(&mut self, q: usize) {
        for i in 0..2 * self.n {
            let (x, z) = self.xz(i, q);
            self.phases[i] ^= x & !z;
            self.symplectic.set(i, self.n + q, z ^ x);
        }
    }

    pub fn x(&mut self, q: usize) {
        for i in 0..2 * self.n {
            self.phases[i] ^= self.symplectic.get(i, self.n + q);
        }
    }

    pub fn z(&mut self, q: usize) {
        for i in 0..2 * self.n {
            self.phases[i] ^= self.symplectic.get(i, q);
        }
    }

    pub fn cnot(&mut self, c: usize, t: usize) {
        assert_ne!(c, t, "CNOT needs distinct qubits");
        for i in 0..2 * self.n {
            let (xc, zc) = self.xz(i, c);
            let (xt, zt) = self.xz(i, t);
            self.phases[i] ^= xc & zt & !(xt ^ zc);
            self.symplectic.set(i, t, xt ^ xc);
            self.symplectic.set(i, self.n + c, zc ^ zt);
        }
    }

    pub fn cz(&mut self, a: usize, b: usize) {
        assert_ne!(a, b, "CZ needs distinct qubits");
        for i in 0..2 * self.n {
            let (xa, za) = self.xz(i, a);
            let (xb, zb) = self.xz(i, b);
            self.phases[i] ^= xa & xb & (za ^ zb);
            self.symplectic.set(i, self.n + a, za ^ xb);
            self.symplectic.set(i, self.n + b, zb ^ xa);
        }
    }

    pub fn apply_sq(&mut self, q: usize, gate: &SqGate) -> Result<()> {
        self.check_qubit(q)?;
        match gate {
            SqGate::H => self.h(q),
            SqGate::X => self.x(q),
            SqGate::S => self.s(q),
            SqGate::Sdg => self.sdg(q),
            SqGate::ZPow(a) | SqGate::XPow(a) => {
                let k = a
                    .quarter_turns()
                    .ok_or_else(|| CliffordError::NonClifford(format!("{gate:?}")))?;
                let is_x = matches!(gate, SqGate::XPow(_));
                if is_x {
                    self.h(q);
                }
                match k {
                    1 => self.s(q),
                    2 => self.z(q),
                    3 => self.sdg(q),
                    _ => {}
                }
                if is_x {
                    self.h(q);
                }
            }
            SqGate::Clifford1(idx) => {
                if *idx >= 24 {
                    return Err(CliffordError::NonClifford(format!("Clifford1({idx})")));
                }
                for g in single_qubit_clifford(*idx) {
                    self.apply_sq(q, g)?;
                }
            }
        }
        Ok(())
    }

    pub fn apply_instruction(&mut self, instr: &Instruction) -> Result<()> {
        for q in instr.qubits() {
            self.check_qubit(q)?;
        }
        match instr {
            Instruction::Sq { qubit, gate } => self.apply_sq(*qubit, gate)?,
            Instruction::Gcz { pairs } => {
                for &(a, b) in pairs {
                    self.cz(a, b);
                }
            }
            Instruction::Gt { angles } => {
                if let Some((_, a)) = angles.iter().find(|(_, a)| a.quarter_turns() != Some(2)) {
                    return Err(CliffordError::NonClifford(format!("GT angle {a:?}")));
                }
                for &((a, b), _) in angles {
                    self.cz(a, b);
                }
            }
            Instruction::CxLayer {
                matrix,
                controls,
                targets,
            } => {
                for (i, &c) in controls.iter().enumerate() {
                    for (j, &t) in targets.iter().enumerate() {
                        if matrix.get(i, j) {
                            self.cnot(c, t);
                        }
                    }
                }
            }
            Instruction::MeasureX { .. } | Instruction::Conditional { .. } => {
                return Err(CliffordError::NonClifford(
                    "measurements and feedforward are not unitary".into(),
                ))
            }
        }
        Ok(())
    }

    pub fn apply_circuit(&mut self, c: &Circuit) -> Result<()> {
        if c.num_qubits() != self.n {
            return Err(CliffordError::DimensionMismatch(format!(
                "{}-qubit circuit on {}-qubit tableau",
                c.num_qubits(),
                self.n
            )));
        }
        for instr in c.instructions() {
            self.apply_instruction(instr)?;
        }
        Ok(())
    }

    /// `n`, then `2n` rows of `2n` bits, then one line of `2n` phase bits.
    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.n);
        for i in 0..2 * self.n {
            for j in 0..2 * self.n {
                s.push(if self.symplectic.get(i, j) { '1' } else { '0' });
            }
            s.push('\n');
        }
        for &p in &self.phases {
            s.push(if p { '1' } else { '0' });
        }
        s.push('\n');
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let perr = |line, msg: &str| CliffordError::Parse {
            line,
            msg: msg.into(),
        };
        let (l0, first) = lines.next().ok_or_else(|| perr(1, "missing qubit count"))?;
        let n: usize = first.parse().map_err(|_| perr(l0, "bad qubit count"))?;
        let bits = |line: usize, s: &str| -> Result<Vec<bool>> {
            let v: Vec<bool> = s
                .chars()
                .filter(|c| !c.is_whitespace())
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(perr(line, "expected 0 or 1")),
                })
                .collect::<Result<_>>()?;
            if v.len() != 2 * n {
                return Err(perr(line, &format!("expected {} bits, found {}", 2 * n, v.len())));
            }
            Ok(v)
        };
        let mut s = F2Matrix::zeros(2 * n, 2 * n);
        let mut last = l0;
        for i in 0..2 * n {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| perr(last + 1, "missing tableau row"))?;
            last = ln;
            s.set_row_bits(i, &bits(ln, l)?);
        }
        let (ln, l) = lines
            .next()
            .ok_or_else(|| perr(last + 1, "missing phase row"))?;
        let phases = bits(ln, l)?;
        if let Some((ln, _)) = lines.next() {
            return Err(perr(ln, "unexpected trailing input"));
        }
        CliffordTableau::from_parts(s, phases)
    }
}

/// Tableau conjugation of `instr`; see [`CliffordTableau::apply_instruction`].
pub fn apply_instruction(t: &CliffordTableau, instr: &Instruction) -> Result<CliffordTableau> {
    let mut t = t.clone();
    t.apply_instruction(instr)?;
    Ok(t)
}

/// [`CliffordTableau::random`] from a seeded generator.
pub fn random_clifford(n: usize, seed: u64) -> CliffordTableau {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    CliffordTableau::random(n, &mut rng)
}

struct SqTable {
    words: Vec<Vec<SqGate>>,
    index: HashMap<(F2Matrix, Vec<bool>), u8>,
}

fn sq_table() -> &'static SqTable {
    static TABLE: OnceLock<SqTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut words = Vec::new();
        let mut index = HashMap::new();
        let mut queue = VecDeque::new();
        queue.push_back((CliffordTableau::identity(1), Vec::new()));
        while let Some((t, word)) = queue.pop_front() {
            let key = (t.symplectic.clone(), t.phases.clone());
            if index.contains_key(&key) {
                continue;
            }
            index.insert(key, words.len() as u8);
            words.push(word.clone());
            for g in [SqGate::H, SqGate::S] {
                let mut t2 = t.clone();
                t2.apply_sq(0, &g).expect("Clifford");
                let mut w2 = word.clone();
                w2.push(g);
                queue.push_back((t2, w2));
            }
        }
        assert_eq!(words.len(), 24);
        SqTable { words, index }
    })
}

/// `H`/`S` word (in application order) of single-qubit Clifford `idx`;
/// index 0 is the identity.
pub fn single_qubit_clifford(idx: u8) -> &'static [SqGate] {
    &sq_table().words[idx as usize]
}

/// Index of the single-qubit Clifford equal, up to global phase, to applying
/// `gates` in order.
pub fn clifford1_index(gates: &[SqGate]) -> Result<u8> {
    let mut t = CliffordTableau::identity(1);
    for g in gates {
        t.apply_sq(0, g)?;
    }
    Ok(sq_table().index[&(t.symplectic, t.phases)])
}

/// Elimination schedule of CNOTs `(control, target)`, in application order,
/// implementing `|x> -> |A x>`.
pub fn cnot_schedule(a: &F2Matrix) -> Result<Vec<(usize, usize)>> {
    if !a.is_invertible() {
        return Err(CliffordError::InvalidTableau("CX matrix is singular".into()));
    }
    let n = a.rows();
    let mut m = a.clone();
    let mut ops = Vec::new();
    for c in 0..n {
        if !m.get(c, c) {
            let r = (c + 1..n).find(|&r| m.get(r, c)).expect("invertible");
            m.xor_row_into(r, c);
            ops.push((r, c));
        }
        for r in 0..n {
            if r != c && m.get(r, c) {
                m.xor_row_into(c, r);
                ops.push((c, r));
            }
        }
    }
    ops.reverse();
    Ok(ops)
}

/// `L1 CX(cx_matrix) CZ(cz1) L2 CZ(cz2) L3`, in application order. The `L`
/// layers hold one single-qubit Clifford index per qubit; `CX(A)` maps
/// `|x>` to `|A x>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayeredClifford {
    pub l1: Vec<u8>,
    pub cx_matrix: F2Matrix,
    pub cz1: F2Matrix,
    pub l2: Vec<u8>,
    pub cz2: F2Matrix,
    pub l3: Vec<u8>,
}

fn cz_pairs(m: &F2Matrix) -> Vec<(usize, usize)> {
    let n = m.rows();
    let mut v = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if m.get(i, j) {
                v.push((i, j));
            }
        }
    }
    v
}

impl LayeredClifford {
    pub fn n(&self) -> usize {
        self.l1.len()
    }

    pub fn cz1_pairs(&self) -> Vec<(usize, usize)> {
        cz_pairs(&self.cz1)
    }

    pub fn cz2_pairs(&self) -> Vec<(usize, usize)> {
        cz_pairs(&self.cz2)
    }

    fn apply_layer(t: &mut CliffordTableau, layer: &[u8]) {
        for (q, &idx) in layer.iter().enumerate() {
            t.apply_sq(q, &SqGate::Clifford1(idx)).expect("valid index");
        }
    }

    /// Exact tableau of the layered circuit.
    pub fn to_tableau(&self) -> CliffordTableau {
        let n = self.n();
        let mut t = CliffordTableau::identity(n);
        Self::apply_layer(&mut t, &self.l1);
        for (c, tg) in cnot_schedule(&self.cx_matrix).expect("invertible") {
            t.cnot(c, tg);
        }
        for (a, b) in self.cz1_pairs() {
            t.cz(a, b);
        }
        Self::apply_layer(&mut t, &self.l2);
        for (a, b) in self.cz2_pairs() {
            t.cz(a, b);
        }
        Self::apply_layer(&mut t, &self.l3);
        t
    }

    /// Gate-level circuit with the CX stage as individual CNOT layers.
    pub fn reference_circuit(&self) -> Circuit {
        let n = self.n();
        let mut c = Circuit::new(n, n);
        let layer = |c: &mut Circuit, l: &[u8]| {
            for (q, &idx) in l.iter().enumerate() {
                if idx != 0 {
                    c.sq(q, SqGate::Clifford1(idx));
                }
            }
        };
        layer(&mut c, &self.l1);
        for (ctl, tg) in cnot_schedule(&self.cx_matrix).expect("invertible") {
            c.add(Instruction::cx_layer(F2Matrix::identity(1), vec![ctl], vec![tg]).unwrap());
        }
        c.add(Instruction::gcz(self.cz1_pairs()).unwrap());
        layer(&mut c, &self.l2);
        c.add(Instruction::gcz(self.cz2_pairs()).unwrap());
        layer(&mut c, &self.l3);
        c
    }
}

fn strip_diagonal(m: &F2Matrix) -> (F2Matrix, Vec<bool>) {
    let n = m.rows();
    let diag = (0..n).map(|i| m.get(i, i)).collect();
    let mut off = m.clone();
    for i in 0..n {
        off.set(i, i, false);
    }
    (off, diag)
}

/// Layered normal form of `t`, certified by exact recomposition.
pub fn layered_decompose(t: &CliffordTableau) -> LayeredClifford {
    let n = t.n();
    let mut w = t.clone();

    // H on the complement of a pivot set of the Z-images' X block makes
    // that block invertible.
    let y = F2Matrix::from_fn(n, n, |i, q| w.symplectic.get(n + i, q));
    let mut h = vec![true; n];
    for p in y.pivot_columns() {
        h[p] = false;
    }
    for q in (0..n).filter(|&q| h[q]) {
        w.h(q);
    }

    let y = F2Matrix::from_fn(n, n, |i, q| w.symplectic.get(n + i, q));
    let r = F2Matrix::from_fn(n, n, |i, q| w.symplectic.get(n + i, n + q));
    let gamma2 = y
        .inverse()
        .expect("pivot choice gives an invertible block")
        .mul(&r)
        .expect("square");
    assert!(gamma2.is_symmetric(), "stabilizer rows commute");
    let (cz2, d2) = strip_diagonal(&gamma2);
    for (a, b) in cz_pairs(&cz2) {
        w.cz(a, b);
    }
    for q in (0..n).filter(|&q| d2[q]) {
        w.s(q);
    }
    for q in 0..n {
        w.h(q);
    }

    // Now Z-images are Z strings: what is left is CZ/S(gamma1) CX(A) Pauli.
    let a = F2Matrix::from_fn(n, n, |rr, i| w.symplectic.get(i, rr));
    let b = F2Matrix::from_fn(n, n, |rr, i| w.symplectic.get(i, n + rr));
    let gamma1 = b
        .mul(&a.inverse().expect("tableau is invertible"))
        .expect("square");
    assert!(gamma1.is_symmetric());
    let (cz1, d1) = strip_diagonal(&gamma1);

    let idx = |gates: &[SqGate]| clifford1_index(gates).expect("Clifford word");
    let l2: Vec<u8> = (0..n)
        .map(|q| {
            if d1[q] {
                idx(&[SqGate::S, SqGate::H])
            } else {
                idx(&[SqGate::H])
            }
        })
        .collect();
    let l3: Vec<u8> = (0..n)
        .map(|q| {
            let mut g = Vec::new();
            if d2[q] {
                g.push(SqGate::Sdg);
            }
            if h[q] {
                g.push(SqGate::H);
            }
            idx(&g)
        })
        .collect();

    let mut out = LayeredClifford {
        l1: vec![0; n],
        cx_matrix: a,
        cz1,
        l2,
        cz2,
        l3,
    };
    let t0 = out.to_tableau();
    debug_assert_eq!(t0.symplectic, t.symplectic);
    out.l1 = (0..n)
        .map(|q| {
            let mut g = Vec::new();
            if t.phases[n + q] != t0.phases[n + q] {
                g.push(SqGate::X);
            }
            if t.phases[q] != t0.phases[q] {
                g.push(SqGate::Z);
            }
            idx(&g)
        })
        .collect();
    assert_eq!(&out.to_tableau(), t, "layered recomposition certifies");
    out
}

/// Readable dump used by the CLI.
pub fn describe(lc: &LayeredClifford) -> String {
    let mut s = String::new();
    writeln!(s, "n = {}", lc.n()).unwrap();
    writeln!(s, "L1 = {:?}", lc.l1).unwrap();
    writeln!(s, "CX rank = {}", lc.cx_matrix.rank()).unwrap();
    writeln!(s, "CZ1 pairs = {}", lc.cz1_pairs().len()).unwrap();
    writeln!(s, "L2 = {:?}", lc.l2).unwrap();
    writeln!(s, "CZ2 pairs = {}", lc.cz2_pairs().len()).unwrap();
    writeln!(s, "L3 = {:?}", lc.l3).unwrap();
    s
}
