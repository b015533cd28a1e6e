//! Constant-cost synthesis of linear reversible maps and Clifford operators
//! from CX layers and GCZ gates.
//!
//! Notation: `CX_{1,2}(M) |x, y> = |x, y + M x>`. As an instruction this is a
//! CX layer with controls `reg1`, targets `reg2` and layer matrix `M^T`.
//! A "row-operation layer" is an `n x n` matrix `E = I + N` with `N^2 = 0`
//! whose support splits into disjoint control and target sets; it acts as
//! `v -> E v` and is its own inverse.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::circuit::{merge_cx_layers, optimize_merges, Circuit, CircuitError, Instruction, SqGate};
use crate::clifford_core::{layered_decompose, CliffordTableau};
use crate::f2linalg::{commutator_decompose, F2Error, F2Matrix};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SynthError {
    #[error(transparent)]
    Linalg(#[from] F2Error),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("register sizes do not match: {0}")]
    Registers(String),
    #[error("not a CX layer: {0}")]
    NotALayer(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, SynthError>;

/// Which of the two equivalent three-layer forms of `C3` to emit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    /// `CX_{1,2}(A)`, `CX_{2,1}(A^-1)`, `CX_{1,2}(A)`.
    Forward,
    /// `CX_{2,1}(A^-1)`, `CX_{1,2}(A)`, `CX_{2,1}(A^-1)`.
    Reversed,
}

/// Three disjoint, ordered qubit lists `X`, `Y`, `Z`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegisterSplit {
    pub parts: [Vec<usize>; 3],
}

impl RegisterSplit {
    /// Contiguous split of `0..n`: `(k, k, k)`, `(k+1, k, k)` or
    /// `(k, k+1, k+1)` for `n = 3k, 3k+1, 3k+2`.
    pub fn for_qubits(n: usize) -> Self {
        let k = n / 3;
        let sizes = match n % 3 {
            0 => [k, k, k],
            1 => [k + 1, k, k],
            _ => [k, k + 1, k + 1],
        };
        let mut start = 0;
        let parts = sizes.map(|s| {
            let p: Vec<usize> = (start..start + s).collect();
            start += s;
            p
        });
        RegisterSplit { parts }
    }

    pub fn sizes(&self) -> [usize; 3] {
        [self.parts[0].len(), self.parts[1].len(), self.parts[2].len()]
    }

    pub fn total(&self) -> usize {
        self.sizes().iter().sum()
    }

    fn offsets(&self) -> [usize; 3] {
        let s = self.sizes();
        [0, s[0], s[0] + s[1]]
    }

    fn validate(&self) -> Result<()> {
        let n = self.total();
        let mut seen = vec![false; n];
        for p in &self.parts {
            if p.is_empty() {
                return Err(SynthError::Registers("empty register part".into()));
            }
            for &q in p {
                if q >= n || seen[q] {
                    return Err(SynthError::Registers(format!(
                        "parts must partition 0..{n}"
                    )));
                }
                seen[q] = true;
            }
        }
        Ok(())
    }
}

/// `CX` layer realizing `to += M from`.
fn cx(m: &F2Matrix, from: &[usize], to: &[usize]) -> Result<Instruction> {
    if m.rows() != to.len() || m.cols() != from.len() {
        return Err(SynthError::Registers(format!(
            "{}x{} matrix from {} to {} qubits",
            m.rows(),
            m.cols(),
            from.len(),
            to.len()
        )));
    }
    Ok(Instruction::cx_layer(m.transpose(), from.to_vec(), to.to_vec())?)
}

fn check_pair(a: &F2Matrix, reg1: &[usize], reg2: &[usize]) -> Result<()> {
    if !a.is_square() || reg1.len() != a.rows() || reg2.len() != a.rows() {
        return Err(SynthError::Registers(format!(
            "{}x{} matrix on registers of size {} and {}",
            a.rows(),
            a.cols(),
            reg1.len(),
            reg2.len()
        )));
    }
    Ok(())
}

/// Layers of `C3(A) |x, y> = |A^-1 y, A x>`.
pub fn c3_layers(
    a: &F2Matrix,
    reg1: &[usize],
    reg2: &[usize],
    orientation: Orientation,
) -> Result<Vec<Instruction>> {
    check_pair(a, reg1, reg2)?;
    let inv = a.inverse()?;
    Ok(match orientation {
        Orientation::Forward => vec![
            cx(a, reg1, reg2)?,
            cx(&inv, reg2, reg1)?,
            cx(a, reg1, reg2)?,
        ],
        Orientation::Reversed => vec![
            cx(&inv, reg2, reg1)?,
            cx(a, reg1, reg2)?,
            cx(&inv, reg2, reg1)?,
        ],
    })
}

/// Layers of `C3'(A) |x, y> = |y + A x, A^-1 y>`.
pub fn c3_prime_layers(a: &F2Matrix, reg1: &[usize], reg2: &[usize]) -> Result<Vec<Instruction>> {
    check_pair(a, reg1, reg2)?;
    let n = a.rows();
    let id = F2Matrix::identity(n);
    let inv = a.inverse()?;
    Ok(vec![
        cx(&id.add(a)?, reg1, reg2)?,
        cx(&id, reg2, reg1)?,
        cx(&id.add(&inv)?, reg1, reg2)?,
    ])
}

fn wrap(layers: Vec<Instruction>) -> Result<Circuit> {
    let n = layers
        .iter()
        .flat_map(|l| l.qubits())
        .max()
        .map_or(0, |q| q + 1);
    let mut c = Circuit::new(n, n);
    for l in layers {
        c.push(l)?;
    }
    Ok(c)
}

/// [`c3_layers`] as a circuit on `max qubit + 1` qubits.
pub fn c3(a: &F2Matrix, reg1: &[usize], reg2: &[usize], orientation: Orientation) -> Result<Circuit> {
    wrap(c3_layers(a, reg1, reg2, orientation)?)
}

/// [`c3_prime_layers`] as a circuit on `max qubit + 1` qubits.
pub fn c3_prime(a: &F2Matrix, reg1: &[usize], reg2: &[usize]) -> Result<Circuit> {
    wrap(c3_prime_layers(a, reg1, reg2)?)
}

/// Layers of `W(A) |x, y, z> = |z, A x, y>` from a commutator factorization
/// `A = D^-1 B^-1 D B`, with `C3` orientations chosen so that three pairs of
/// adjacent layers merge.
pub fn w_layers<R: Rng + ?Sized>(
    a: &F2Matrix,
    x: &[usize],
    y: &[usize],
    z: &[usize],
    rng: &mut R,
) -> Result<Vec<Instruction>> {
    check_pair(a, x, y)?;
    check_pair(a, y, z)?;
    let (b, d) = commutator_decompose(a, rng)?;
    let mut out = c3_layers(&b, x, y, Orientation::Forward)?;
    out.extend(c3_layers(&d, y, z, Orientation::Reversed)?);
    out.extend(c3_layers(&b.inverse()?, z, x, Orientation::Forward)?);
    out.extend(c3_layers(&d.inverse()?, x, y, Orientation::Reversed)?);
    Ok(out)
}

/// `W(A)` on the three parts of `split`, which must have equal size `k >= 3`.
pub fn w_circuit(a: &F2Matrix, split: &RegisterSplit, seed: u64) -> Result<Circuit> {
    split.validate()?;
    let [x, y, z] = &split.parts;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Circuit::new(split.total(), split.total());
    for l in w_layers(a, x, y, z, &mut rng)? {
        c.push(l)?;
    }
    Ok(c)
}

/// Converts a row-operation layer `E = I + N` into a CX layer; `None` for
/// the identity.
pub fn row_op_layer(e: &F2Matrix) -> Result<Option<Instruction>> {
    let n = e.rows();
    let nm = e.add(&F2Matrix::identity(n))?;
    let controls: Vec<usize> = (0..n).filter(|&c| (0..n).any(|r| nm.get(r, c))).collect();
    let targets: Vec<usize> = (0..n).filter(|&r| !nm.row_is_zero(r)).collect();
    if controls.is_empty() {
        return Ok(None);
    }
    if controls.iter().any(|c| targets.contains(c)) {
        return Err(SynthError::NotALayer(
            "a qubit is both control and target".into(),
        ));
    }
    let m = F2Matrix::from_fn(controls.len(), targets.len(), |i, j| {
        nm.get(targets[j], controls[i])
    });
    Ok(Some(Instruction::cx_layer(m, controls, targets)?))
}

/// Output of [`preprocess_blocks`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Preprocessed {
    /// Row-operation layers in the order they are applied to `a`.
    pub layers: [F2Matrix; 2],
    /// `layers[1] * layers[0] * a`.
    pub a_new: F2Matrix,
}

/// Greedy depth-1 row additions making `rows` (restricted to the first
/// `width` columns) independent, using each of `sources` at most once.
fn fix_rows(
    a: &F2Matrix,
    base: &[usize],
    rows: &[usize],
    sources: &[usize],
    width: usize,
) -> Result<F2Matrix> {
    let n = a.rows();
    let prefix = |r: usize| -> Vec<bool> { (0..width).map(|c| a.get(r, c)).collect() };
    let mut accepted: Vec<Vec<bool>> = base.iter().map(|&r| prefix(r)).collect();
    let rank_of = |vs: &[Vec<bool>]| -> usize {
        if vs.is_empty() {
            return 0;
        }
        F2Matrix::from_fn(vs.len(), width, |i, j| vs[i][j]).rank()
    };
    let mut e = F2Matrix::identity(n);
    let mut dependent = Vec::new();
    for &r in rows {
        accepted.push(prefix(r));
        if rank_of(&accepted) < accepted.len() {
            accepted.pop();
            dependent.push(r);
        }
    }
    let mut used = vec![false; sources.len()];
    for r in dependent {
        let pr = prefix(r);
        let found = sources.iter().enumerate().find(|&(k, &t)| {
            if used[k] {
                return false;
            }
            let sum: Vec<bool> = pr.iter().zip(prefix(t)).map(|(a, b)| a ^ b).collect();
            accepted.push(sum);
            let ok = rank_of(&accepted) == accepted.len();
            accepted.pop();
            ok
        });
        let (k, &t) = found.ok_or_else(|| {
            SynthError::Precondition("matrix is singular; no source row restores rank".into())
        })?;
        used[k] = true;
        accepted.push(pr.iter().zip(prefix(t)).map(|(a, b)| a ^ b).collect());
        e.set(r, t, true);
    }
    Ok(e)
}

/// Two depth-1 row-addition layers after which the leading `s0 x s0` and
/// `(s0+s1) x (s0+s1)` blocks are invertible. The first layer adds `Y`/`Z`
/// rows onto `X` rows, the second `Z` rows onto `Y` rows. Source rows are
/// tried in an order shuffled by `seed`; the greedy search cannot fail for
/// invertible input.
pub fn preprocess_blocks(a: &F2Matrix, split: &RegisterSplit, seed: u64) -> Result<Preprocessed> {
    split.validate()?;
    if !a.is_square() || a.rows() != split.total() {
        return Err(SynthError::Registers("matrix does not match the split".into()));
    }
    if !a.is_invertible() {
        return Err(SynthError::Linalg(F2Error::Singular));
    }
    let [s0, s1, _] = split.sizes();
    let off = split.offsets();
    let n = a.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<usize> = (0..s0).collect();
    let ys: Vec<usize> = (off[1]..off[2]).collect();
    let zs: Vec<usize> = (off[2]..n).collect();

    let mut src1: Vec<usize> = ys.iter().chain(&zs).copied().collect();
    src1.shuffle(&mut rng);
    let e1 = fix_rows(a, &[], &xs, &src1, s0)?;
    let a1 = e1.mul(a)?;

    let mut src2 = zs.clone();
    src2.shuffle(&mut rng);
    let e2 = fix_rows(&a1, &xs, &ys, &src2, s0 + s1)?;
    let a2 = e2.mul(&a1)?;
    Ok(Preprocessed {
        layers: [e1, e2],
        a_new: a2,
    })
}

/// Output of [`block_diagonalize`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockDiagonal {
    /// Row-operation layers in application order: `diag = L3 L2 L1 a`.
    pub layers: [F2Matrix; 3],
    pub diag: [F2Matrix; 3],
}

/// Eliminates the off-diagonal blocks column by column with one
/// row-operation layer per block column.
pub fn block_diagonalize(a: &F2Matrix, split: &RegisterSplit) -> Result<BlockDiagonal> {
    split.validate()?;
    let n = a.rows();
    if !a.is_square() || n != split.total() {
        return Err(SynthError::Registers("matrix does not match the split".into()));
    }
    let sizes = split.sizes();
    let off = split.offsets();
    let mut cur = a.clone();
    let mut layers = Vec::new();
    for p in 0..3 {
        let pivot = cur.submatrix(off[p], off[p], sizes[p], sizes[p]);
        let inv = pivot.inverse().map_err(|_| {
            SynthError::Precondition(format!("diagonal block {p} is singular"))
        })?;
        let mut e = F2Matrix::identity(n);
        for q in (0..3).filter(|&q| q != p) {
            let m = cur
                .submatrix(off[q], off[p], sizes[q], sizes[p])
                .mul(&inv)?;
            e.set_block(off[q], off[p], &m);
        }
        cur = e.mul(&cur)?;
        layers.push(e);
    }
    let diag = [0, 1, 2].map(|p| cur.submatrix(off[p], off[p], sizes[p], sizes[p]));
    for p in 0..3 {
        for q in (0..3).filter(|&q| q != p) {
            debug_assert!(cur.submatrix(off[q], off[p], sizes[q], sizes[p]).is_zero());
        }
    }
    let [l1, l2, l3]: [F2Matrix; 3] = layers.try_into().expect("three layers");
    Ok(BlockDiagonal {
        layers: [l1, l2, l3],
        diag,
    })
}

/// Splits one qubit `s` off an invertible block `d`. Returns
/// `(s, P, first, last)` where `first` and `last` are row-operation layers
/// in block coordinates with `d = last * diag(P, 1) * first` (`P` on the
/// other indices, in order).
struct Peeled {
    s: usize,
    p: F2Matrix,
    first: F2Matrix,
    last: F2Matrix,
}

fn others(k: usize, s: usize) -> Vec<usize> {
    (0..k).filter(|&i| i != s).collect()
}

/// `first` adds `x_s` onto the other qubits, `last` adds the other qubits
/// onto `x_s`. Needs `(d^-1)_{ss} = 1`.
fn peel_control_first(d: &F2Matrix, s: usize) -> Result<Peeled> {
    let k = d.rows();
    let rest = others(k, s);
    let q = d.select(&rest, &rest);
    let qinv = q.inverse()?;
    let u = d.select(&rest, &[s]);
    let w = d.select(&[s], &rest);
    let v = qinv.mul(&u)?;
    let m = w.mul(&qinv)?;
    let mut first = F2Matrix::identity(k);
    let mut last = F2Matrix::identity(k);
    for (i, &r) in rest.iter().enumerate() {
        first.set(r, s, v.get(i, 0));
        last.set(s, r, m.get(0, i));
    }
    Ok(Peeled {
        s,
        p: q,
        first,
        last,
    })
}

/// `first` adds the other qubits onto `x_s`, `last` adds `x_s` onto the
/// others. Needs `d_{ss} = 1`.
fn peel_target_first(d: &F2Matrix, s: usize) -> Result<Peeled> {
    let k = d.rows();
    let rest = others(k, s);
    let q = d.select(&rest, &rest);
    let u = d.select(&rest, &[s]);
    let w = d.select(&[s], &rest);
    let p = q.add(&u.mul(&w)?)?;
    let mut first = F2Matrix::identity(k);
    let mut last = F2Matrix::identity(k);
    for (i, &r) in rest.iter().enumerate() {
        first.set(s, r, w.get(0, i));
        last.set(r, s, u.get(i, 0));
    }
    Ok(Peeled {
        s,
        p,
        first,
        last,
    })
}

/// Embeds a block-local row-operation matrix at the block's qubits.
fn embed_row_op(e: &mut F2Matrix, local: &F2Matrix, qubits: &[usize]) {
    for (i, &qi) in qubits.iter().enumerate() {
        for (j, &qj) in qubits.iter().enumerate() {
            if i != j && local.get(i, j) {
                e.toggle(qi, qj);
            }
        }
    }
}

/// A transvection `T = I + e_i e_j^T` (block coordinates) with `T d`
/// admitting a peel at index 0, or `None` if `d` already admits one.
fn peel_fix(d: &F2Matrix, control_first: bool) -> Result<(Option<(usize, usize)>, F2Matrix, usize)> {
    let k = d.rows();
    if control_first {
        let inv = d.inverse()?;
        if let Some(s) = (0..k).find(|&s| inv.get(s, s)) {
            return Ok((None, d.clone(), s));
        }
        // (d^-1 T)_{00} = (d^-1)_{0i} for T = I + e_i e_0^T.
        let i = (1..k).find(|&i| inv.get(0, i)).expect("nonzero row");
        let mut t = F2Matrix::identity(k);
        t.set(i, 0, true);
        Ok((Some((i, 0)), t.mul(d)?, 0))
    } else {
        if let Some(s) = (0..k).find(|&s| d.get(s, s)) {
            return Ok((None, d.clone(), s));
        }
        // (T d)_{00} = d_{j0} for T = I + e_0 e_j^T.
        let j = (1..k).find(|&j| d.get(j, 0)).expect("nonzero column");
        let mut t = F2Matrix::identity(k);
        t.set(0, j, true);
        Ok((Some((0, j)), t.mul(d)?, 0))
    }
}

fn push_row_op(out: &mut Vec<Instruction>, e: &F2Matrix) -> Result<()> {
    if let Some(l) = row_op_layer(e)? {
        out.push(l);
    }
    Ok(())
}

/// Prepends `pre` to the first layer of `layers` and appends `post` to the
/// last; both merges hold by construction of the register roles.
fn fold_into(layers: &mut [Instruction], pre: Option<Instruction>, post: Option<Instruction>) {
    if let Some(pre) = pre {
        layers[0] = merge_cx_layers(&pre, &layers[0]).expect("pre layer merges");
    }
    if let Some(post) = post {
        let last = layers.len() - 1;
        layers[last] = merge_cx_layers(&layers[last], &post).expect("post layer merges");
    }
}

/// Elimination with at most two layers per column, for registers too small
/// for the block construction.
fn gauss_layers(a: &F2Matrix) -> Result<Vec<Instruction>> {
    let n = a.rows();
    let mut m = a.clone();
    let mut layers = Vec::new();
    for c in 0..n {
        if !m.get(c, c) {
            let r = (c + 1..n)
                .find(|&r| m.get(r, c))
                .ok_or(SynthError::Linalg(F2Error::Singular))?;
            let mut e = F2Matrix::identity(n);
            e.set(c, r, true);
            m = e.mul(&m)?;
            layers.push(e);
        }
        let mut e = F2Matrix::identity(n);
        for r in (0..n).filter(|&r| r != c && m.get(r, c)) {
            e.set(r, c, true);
        }
        if !e.is_identity() {
            m = e.mul(&m)?;
            layers.push(e);
        }
    }
    let mut out = Vec::new();
    for e in layers.iter().rev() {
        push_row_op(&mut out, e)?;
    }
    Ok(out)
}

/// Smallest register handled by the block construction.
pub const MIN_BLOCK_QUBITS: usize = 9;

/// CX layers realizing `|v> -> |A v>` on qubits `0..n`, in application
/// order.
pub fn linear_layers(a: &F2Matrix, seed: u64) -> Result<Vec<Instruction>> {
    if !a.is_square() {
        return Err(SynthError::Linalg(F2Error::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        }));
    }
    if !a.is_invertible() {
        return Err(SynthError::Linalg(F2Error::Singular));
    }
    let n = a.rows();
    if n < MIN_BLOCK_QUBITS {
        return gauss_layers(a);
    }
    let split = RegisterSplit::for_qubits(n);
    let pre = preprocess_blocks(a, &split, seed)?;
    let bd = block_diagonalize(&pre.a_new, &split)?;
    let [d0, d1, d2] = bd.diag.clone();
    let [px, py, pz] = split.parts.clone();

    // Peel off the extra qubits so that the three registers have equal size.
    let mut pre_op = F2Matrix::identity(n);
    let mut post_op = F2Matrix::identity(n);
    let mut fix_op = F2Matrix::identity(n);
    let (x, y, z, m0, m1, m2) = match n % 3 {
        0 => (px, py, pz, d0, d1, d2),
        1 => {
            let (t, d0f, s) = peel_fix(&d0, false)?;
            if let Some((i, j)) = t {
                fix_op.set(px[i], px[j], true);
            }
            let pl = peel_target_first(&d0f, s)?;
            embed_row_op(&mut pre_op, &pl.first, &px);
            embed_row_op(&mut post_op, &pl.last, &px);
            let xr: Vec<usize> = others(px.len(), pl.s).iter().map(|&i| px[i]).collect();
            (xr, py, pz, pl.p, d1, d2)
        }
        _ => {
            let mut peel = |d: &F2Matrix, part: &[usize]| -> Result<(Vec<usize>, F2Matrix)> {
                let (t, df, s) = peel_fix(d, true)?;
                if let Some((i, j)) = t {
                    fix_op.set(part[i], part[j], true);
                }
                let pl = peel_control_first(&df, s)?;
                embed_row_op(&mut pre_op, &pl.first, part);
                embed_row_op(&mut post_op, &pl.last, part);
                let rest = others(part.len(), pl.s).iter().map(|&i| part[i]).collect();
                Ok((rest, pl.p))
            };
            let (yr, p1) = peel(&d1, &py)?;
            let (zr, p2) = peel(&d2, &pz)?;
            (px, yr, zr, d0, p1, p2)
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut diag_layers = c3_layers(&m0, &x, &z, Orientation::Forward)?;
    let m20 = m2.mul(&m0)?;
    diag_layers.extend(c3_layers(&m20, &x, &y, Orientation::Forward)?);
    diag_layers.extend(w_layers(&m1.mul(&m20)?, &x, &y, &z, &mut rng)?);
    fold_into(
        &mut diag_layers,
        row_op_layer(&pre_op)?,
        row_op_layer(&post_op)?,
    );

    // a = P1 P2 E1 E2 E3 T diag, applied right to left.
    let mut out = diag_layers;
    push_row_op(&mut out, &fix_op)?;
    for e in bd.layers.iter().rev() {
        push_row_op(&mut out, e)?;
    }
    for e in pre.layers.iter().rev() {
        push_row_op(&mut out, e)?;
    }
    Ok(out)
}

/// Ancilla-free circuit for `|v> -> |A v>`. For `n >= 9` the cost is at most
/// 23, or 24 when `n` is not a multiple of 3; smaller `n` use elimination.
pub fn synth_cx_ancilla_free(a: &F2Matrix, seed: u64) -> Result<Circuit> {
    let n = a.rows();
    let mut c = Circuit::new(n, n);
    for l in linear_layers(a, seed)? {
        c.push(l)?;
    }
    Ok(c)
}

fn single_layer(c: &mut Circuit, layer: &[u8]) {
    for (q, &idx) in layer.iter().enumerate() {
        if idx != 0 {
            c.sq(q, SqGate::Clifford1(idx));
        }
    }
}

/// Ancilla-free Clifford synthesis via the layered form. At most 25 GCZ-cost
/// instructions (26 when 3 does not divide `n`) for `n >= 9`; with
/// `optimize`, adjacent CX layers are merged.
pub fn synth_ancilla_free(t: &CliffordTableau, optimize: bool, seed: u64) -> Result<Circuit> {
    let n = t.n();
    let lc = layered_decompose(t);
    let mut c = Circuit::new(n, n);
    single_layer(&mut c, &lc.l1);
    for l in linear_layers(&lc.cx_matrix, seed)? {
        c.push(l)?;
    }
    c.push(Instruction::gcz(lc.cz1_pairs())?)?;
    single_layer(&mut c, &lc.l2);
    c.push(Instruction::gcz(lc.cz2_pairs())?)?;
    single_layer(&mut c, &lc.l3);
    Ok(if optimize { optimize_merges(&c) } else { c })
}

/// Clifford synthesis on `n` data qubits `0..n` plus `n` ancillae `n..2n`
/// that start and end in `|0>`. Exactly four GCZ-cost instructions for
/// `n >= 2`: the CX stage is `C3'(A)` with the ancillae as second register,
/// and its last layer shares one GCZ with the first CZ stage.
pub fn synth_with_ancilla(t: &CliffordTableau) -> Result<Circuit> {
    let n = t.n();
    let lc = layered_decompose(t);
    let data: Vec<usize> = (0..n).collect();
    let anc: Vec<usize> = (n..2 * n).collect();
    let mut c = Circuit::new(2 * n, n);
    single_layer(&mut c, &lc.l1);
    let layers = c3_prime_layers(&lc.cx_matrix, &data, &anc)?;
    let structural = n >= 2;
    let nonempty = |l: &Instruction| match l {
        Instruction::CxLayer { matrix, .. } => !matrix.is_zero(),
        Instruction::Gcz { pairs } => !pairs.is_empty(),
        _ => true,
    };
    for l in &layers[..2] {
        if structural || nonempty(l) {
            c.push(l.clone())?;
        }
    }
    // H on the ancillae turns the last CX layer into CZs, which commute
    // with the data-only CZ(gamma1) layer.
    let Instruction::CxLayer {
        matrix,
        controls,
        targets,
    } = &layers[2]
    else {
        unreachable!("C3' emits CX layers")
    };
    let mut pairs = lc.cz1_pairs();
    for (i, &ctl) in controls.iter().enumerate() {
        for (j, &tg) in targets.iter().enumerate() {
            if matrix.get(i, j) {
                pairs.push((ctl, tg));
            }
        }
    }
    let merged = Instruction::gcz(pairs)?;
    if structural || nonempty(&merged) {
        for &q in &anc {
            c.h(q);
        }
        c.push(merged)?;
        for &q in &anc {
            c.h(q);
        }
    }
    single_layer(&mut c, &lc.l2);
    let g2 = Instruction::gcz(lc.cz2_pairs())?;
    if structural || nonempty(&g2) {
        c.push(g2)?;
    }
    single_layer(&mut c, &lc.l3);
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simverify::{simulate, StateVector};

    fn vec_of(bits: usize, n: usize) -> Vec<bool> {
        (0..n).map(|i| bits >> i & 1 == 1).collect()
    }

    fn num_of(v: &[bool]) -> usize {
        v.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| 1 << i).sum()
    }

    /// Applies a CX-only circuit to a classical bit string.
    fn run_classical(c: &Circuit, input: &[bool]) -> Vec<bool> {
        let mut v = input.to_vec();
        for instr in c.instructions() {
            let Instruction::CxLayer {
                matrix,
                controls,
                targets,
            } = instr
            else {
                panic!("not a CX circuit")
            };
            let old = v.clone();
            for (i, &ctl) in controls.iter().enumerate() {
                for (j, &tg) in targets.iter().enumerate() {
                    if matrix.get(i, j) && old[ctl] {
                        v[tg] = !v[tg];
                    }
                }
            }
        }
        v
    }

    #[test]
    fn c3_identity_swaps() {
        let c = c3(&F2Matrix::identity(2), &[0, 1], &[2, 3], Orientation::Forward).unwrap();
        assert_eq!(c.gt_cost(), 3);
        for s in 0..16 {
            let v = vec_of(s, 4);
            assert_eq!(run_classical(&c, &v), vec![v[2], v[3], v[0], v[1]]);
        }
    }

    #[test]
    fn c3_small_example() {
        // A = [[1,1],[0,1]] maps |10, 01> to |11, 10>.
        let a = F2Matrix::from_rows(&[[1, 1], [0, 1]]).unwrap();
        for o in [Orientation::Forward, Orientation::Reversed] {
            let c = c3(&a, &[0, 1], &[2, 3], o).unwrap();
            let out = run_classical(&c, &[true, false, false, true]);
            assert_eq!(out, vec![true, true, true, false]);
        }
    }

    #[test]
    fn c3_prime_with_zero_second_register() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = F2Matrix::random_invertible(3, &mut rng);
        let c = c3_prime(&a, &[0, 1, 2], &[3, 4, 5]).unwrap();
        assert_eq!(c.gt_cost(), 3);
        for x in 0..8 {
            let xv = vec_of(x, 3);
            let mut input = xv.clone();
            input.extend([false; 3]);
            let mut want = a.mul_vec(&xv);
            want.extend([false; 3]);
            assert_eq!(run_classical(&c, &input), want);
        }
        let id = c3_prime(&F2Matrix::identity(2), &[0, 1], &[2, 3]).unwrap();
        for s in 0..16 {
            let v = vec_of(s, 4);
            assert_eq!(
                run_classical(&id, &v),
                vec![v[0] ^ v[2], v[1] ^ v[3], v[2], v[3]]
            );
        }
    }

    #[test]
    fn w_of_identity_rotates_registers() {
        let split = RegisterSplit::for_qubits(9);
        let c = w_circuit(&F2Matrix::identity(3), &split, 0).unwrap();
        assert_eq!(c.gt_cost(), 12);
        for s in [0b000_000_001usize, 0b101_011_110, 0b111_000_010] {
            let v = vec_of(s, 9);
            let mut want = v[6..9].to_vec();
            want.extend_from_slice(&v[0..3]);
            want.extend_from_slice(&v[3..6]);
            assert_eq!(run_classical(&c, &v), want);
        }
    }

    #[test]
    fn w_merges_to_nine() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = F2Matrix::random_invertible(4, &mut rng);
        let split = RegisterSplit::for_qubits(12);
        let c = w_circuit(&a, &split, 1).unwrap();
        assert_eq!(c.gt_cost(), 12);
        let o = optimize_merges(&c);
        assert_eq!(o.gt_cost(), 9);
        for s in 0..64usize {
            let v = vec_of(s * 977 % 4096, 12);
            assert_eq!(run_classical(&o, &v), run_classical(&c, &v));
        }
    }

    #[test]
    fn preprocess_constructed_instance() {
        // A_00 singular; one Y row added onto an X row fixes it.
        let n = 9;
        let mut a = F2Matrix::identity(n);
        a.swap_rows(0, 3);
        let split = RegisterSplit::for_qubits(n);
        assert_eq!(a.submatrix(0, 0, 3, 3).rank(), 2);
        let p = preprocess_blocks(&a, &split, 0).unwrap();
        assert_eq!(p.a_new.submatrix(0, 0, 3, 3).rank(), 3);
        assert_eq!(p.a_new.submatrix(0, 0, 6, 6).rank(), 6);
        let nonempty: Vec<bool> = p.layers.iter().map(|e| !e.is_identity()).collect();
        assert!(nonempty[0]);

        let id = preprocess_blocks(&F2Matrix::identity(n), &split, 0).unwrap();
        assert!(id.layers.iter().all(|e| e.is_identity()));
        assert_eq!(id.a_new, F2Matrix::identity(n));
    }

    #[test]
    fn preprocess_layers_are_depth_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for n in [6, 9, 10, 11, 12] {
            let split = RegisterSplit::for_qubits(n);
            for seed in 0..50 {
                let a = F2Matrix::random_invertible(n, &mut rng);
                let p = preprocess_blocks(&a, &split, seed).unwrap();
                let [s0, s1, _] = split.sizes();
                assert_eq!(p.a_new.submatrix(0, 0, s0, s0).rank(), s0);
                assert_eq!(p.a_new.submatrix(0, 0, s0 + s1, s0 + s1).rank(), s0 + s1);
                assert_eq!(p.layers[1].mul(&p.layers[0]).unwrap().mul(&a).unwrap(), p.a_new);
                for e in &p.layers {
                    let nm = e.add(&F2Matrix::identity(n)).unwrap();
                    for q in 0..n {
                        let deg = nm.row_bits(q).iter().filter(|&&b| b).count()
                            + nm.col_bits(q).iter().filter(|&&b| b).count();
                        assert!(deg <= 1, "qubit {q} in {deg} CNOTs");
                    }
                    assert!(row_op_layer(e).is_ok());
                }
            }
        }
    }

    #[test]
    fn block_diagonal_recomposes() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in [9, 10, 11] {
            let split = RegisterSplit::for_qubits(n);
            let a = F2Matrix::random_invertible(n, &mut rng);
            let p = preprocess_blocks(&a, &split, 3).unwrap();
            let bd = block_diagonalize(&p.a_new, &split).unwrap();
            let d = F2Matrix::block_diag(&[&bd.diag[0], &bd.diag[1], &bd.diag[2]]);
            let [e1, e2, e3] = &bd.layers;
            let back = e1.mul(e2).unwrap().mul(e3).unwrap().mul(&d).unwrap();
            assert_eq!(back, p.a_new);
            assert!(bd.diag.iter().all(|b| b.is_invertible()));
        }
        let split = RegisterSplit::for_qubits(9);
        let bd = block_diagonalize(&F2Matrix::identity(9), &split).unwrap();
        assert!(bd.layers.iter().all(|e| e.is_identity()));
    }

    #[test]
    fn peel_factorizations() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let k = rng.gen_range(2..7);
            let d = F2Matrix::random_invertible(k, &mut rng);
            for (cf, fixed) in [(true, peel_fix(&d, true).unwrap()), (false, peel_fix(&d, false).unwrap())] {
                let (t, df, s) = fixed;
                let pl = if cf {
                    peel_control_first(&df, s).unwrap()
                } else {
                    peel_target_first(&df, s).unwrap()
                };
                let mut mid = F2Matrix::identity(k);
                let rest = others(k, s);
                for (i, &r) in rest.iter().enumerate() {
                    for (j, &c) in rest.iter().enumerate() {
                        mid.set(r, c, pl.p.get(i, j));
                    }
                }
                assert_eq!(pl.last.mul(&mid).unwrap().mul(&pl.first).unwrap(), df);
                let mut back = df.clone();
                if let Some((i, j)) = t {
                    back.xor_row_into(j, i);
                }
                assert_eq!(back, d);
            }
        }
    }

    #[test]
    fn linear_synthesis_costs_and_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in [2, 5, 8, 9, 10, 11, 12, 13, 14] {
            for seed in 0..8 {
                let a = F2Matrix::random_invertible(n, &mut rng);
                let c = synth_cx_ancilla_free(&a, seed).unwrap();
                if n >= MIN_BLOCK_QUBITS {
                    assert!(c.gt_cost() <= if n % 3 == 0 { 23 } else { 24 }, "n={n}");
                }
                let want = CliffordTableau::from_linear(&a).unwrap();
                assert_eq!(CliffordTableau::from_circuit(&c).unwrap(), want, "n={n}");
            }
        }
    }

    #[test]
    fn identity_linear_map_n9() {
        let c = synth_cx_ancilla_free(&F2Matrix::identity(9), 0).unwrap();
        for s in [0usize, 1, 77, 300, 511] {
            assert_eq!(num_of(&run_classical(&c, &vec_of(s, 9))), s);
        }
    }

    #[test]
    fn ancilla_path_small() {
        for n in 1..=3 {
            for seed in 0..5 {
                let t = crate::clifford_core::random_clifford(n, seed);
                let c = synth_with_ancilla(&t).unwrap();
                if n >= 2 {
                    assert_eq!(c.gt_cost(), 4);
                } else {
                    assert!(c.gt_cost() <= 4);
                }
                let v = crate::simverify::check_clifford_contract(
                    &c,
                    &t,
                    crate::simverify::CliffordCheckMode::StabilizerAncilla,
                )
                .unwrap();
                assert!(v.equal, "n={n} seed={seed}: {v:?}");
            }
        }
        // Identity on |x>|0>.
        let c = synth_with_ancilla(&CliffordTableau::identity(2)).unwrap();
        for x in 0..4 {
            let out = simulate(&c, &StateVector::basis(4, x).unwrap(), None).unwrap();
            assert!((out.amplitudes()[x].norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn ancilla_free_small_sweep() {
        for n in [3, 9, 10, 11] {
            for seed in 0..4 {
                let t = crate::clifford_core::random_clifford(n, 100 + seed);
                for optimize in [false, true] {
                    let c = synth_ancilla_free(&t, optimize, seed).unwrap();
                    assert_eq!(CliffordTableau::from_circuit(&c).unwrap(), t);
                    if n >= 9 {
                        let bound = match (optimize, n % 3 == 0) {
                            (false, true) => 25,
                            (false, false) => 26,
                            (true, true) => 20,
                            (true, false) => 21,
                        };
                        assert!(c.gt_cost() <= bound, "n={n} opt={optimize}: {}", c.gt_cost());
                    }
                }
            }
        }
    }
}
