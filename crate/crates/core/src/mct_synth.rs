//! OR and multiply-controlled Toffoli circuits built from fractional CX
//! layers, EXOR layers and (optionally) X-basis measurements.
//!
//! `OR_n |x> = (-1)^{OR(x)} |x>`. Data qubits are `0..n`; ancillae follow and
//! start in `|0>`. Non-adaptive circuits return every ancilla to `|0>`;
//! adaptive ones leave each measured ancilla in `H|m>`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Angle, Circuit, CircuitError, Instruction, SqGate};
use crate::f2linalg::F2Matrix;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MctError {
    #[error("need at least {min} qubits, got {got}")]
    TooFew { min: usize, got: usize },
    #[error("unknown method {0:?} (expected recursive, flat, adaptive-flat or adaptive-recursive)")]
    UnknownMethod(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

pub type Result<T> = std::result::Result<T, MctError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MctMethod {
    Recursive,
    Flat,
    AdaptiveFlat,
    AdaptiveRecursive,
}

impl MctMethod {
    pub const ALL: [MctMethod; 4] = [
        MctMethod::Recursive,
        MctMethod::Flat,
        MctMethod::AdaptiveFlat,
        MctMethod::AdaptiveRecursive,
    ];

    pub fn is_adaptive(self) -> bool {
        matches!(self, MctMethod::AdaptiveFlat | MctMethod::AdaptiveRecursive)
    }

    pub fn name(self) -> &'static str {
        match self {
            MctMethod::Recursive => "recursive",
            MctMethod::Flat => "flat",
            MctMethod::AdaptiveFlat => "adaptive-flat",
            MctMethod::AdaptiveRecursive => "adaptive-recursive",
        }
    }
}

impl fmt::Display for MctMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MctMethod {
    type Err = MctError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        MctMethod::ALL
            .into_iter()
            .find(|m| m.name() == norm)
            .ok_or_else(|| MctError::UnknownMethod(s.to_string()))
    }
}

/// `X_q = H diag(1, e^{i pi / 2^q}) H`, a `2^q`-th root of Pauli X.
pub fn x_q_unitary(q: u32) -> [[Complex64; 2]; 2] {
    let w = Complex64::cis(std::f64::consts::PI / 2f64.powi(q as i32));
    let one = Complex64::new(1.0, 0.0);
    [
        [(one + w) * 0.5, (one - w) * 0.5],
        [(one - w) * 0.5, (one + w) * 0.5],
    ]
}

/// Number of base-2 logarithms needed to bring `n` down to at most 1.
pub fn iterated_log(n: usize) -> usize {
    let mut x = n as f64;
    let mut k = 0;
    while x > 1.0 {
        x = x.log2();
        k += 1;
    }
    k
}

/// `ceil(log2(n + 1))`: enough bits to write any Hamming weight `0..=n`.
pub fn reduced_size(n: usize) -> usize {
    (usize::BITS - n.leading_zeros()) as usize
}

/// Register sizes of the recursion, from `n` down to 2.
pub fn recursion_levels(n: usize) -> Vec<usize> {
    let mut levels = vec![n];
    while *levels.last().unwrap() > 2 {
        levels.push(reduced_size(*levels.last().unwrap()));
    }
    levels
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MctPlan {
    pub n: usize,
    pub method: MctMethod,
    /// `ceil(log2(n + 1))`.
    pub p: usize,
    /// Register sizes per level; a single entry for the flat methods.
    pub levels: Vec<usize>,
    /// Qubits holding the fractional-CX targets, per level.
    pub root_ancillae: Vec<Vec<usize>>,
    /// Qubits holding EXORs of two or more first-stage ancillae (flat only).
    pub exor_ancillae: Vec<usize>,
    pub num_ancillae: usize,
    /// Cost of the circuit this plan produces.
    pub gt_cost: usize,
    /// `2 log*(n) - 1`, `4`, `2` or `log*(n)`.
    pub formula_gt_cost: usize,
}

impl MctPlan {
    pub fn new(n: usize, method: MctMethod) -> Result<Self> {
        if n < 2 {
            return Err(MctError::TooFew { min: 2, got: n });
        }
        let p = reduced_size(n);
        let ls = iterated_log(n);
        let mut next = n;
        let mut alloc = |k: usize| {
            let r: Vec<usize> = (next..next + k).collect();
            next += k;
            r
        };
        let (levels, root_ancillae, exor_ancillae) = match method {
            MctMethod::Recursive | MctMethod::AdaptiveRecursive => {
                let levels = recursion_levels(n);
                let roots = levels[1..].iter().map(|&k| alloc(k)).collect();
                (levels, roots, Vec::new())
            }
            MctMethod::Flat | MctMethod::AdaptiveFlat => {
                let roots = vec![alloc(p)];
                let exors = alloc((1 << p) - p - 1);
                (vec![n], roots, exors)
            }
        };
        let r = levels.len() - 1;
        let (gt_cost, formula_gt_cost) = match method {
            MctMethod::Recursive => (2 * r + 1, 2 * ls - 1),
            MctMethod::AdaptiveRecursive => (r + 1, ls),
            MctMethod::Flat => (4, 4),
            MctMethod::AdaptiveFlat => (2, 2),
        };
        Ok(MctPlan {
            n,
            method,
            p,
            levels,
            root_ancillae,
            exor_ancillae,
            num_ancillae: next - n,
            gt_cost,
            formula_gt_cost,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.n + self.num_ancillae
    }

    /// Builds the OR circuit described by the plan.
    pub fn build(&self) -> Result<Circuit> {
        let mut c = Circuit::new(self.num_qubits(), self.n);
        let data: Vec<usize> = (0..self.n).collect();
        let adaptive = self.method.is_adaptive();
        match self.method {
            MctMethod::Recursive | MctMethod::AdaptiveRecursive => {
                or_recursive(&mut c, &data, &self.root_ancillae, adaptive)?
            }
            MctMethod::Flat | MctMethod::AdaptiveFlat => {
                let roots = &self.root_ancillae[0];
                fractional(&mut c, &data, roots, false)?;
                or_exor(&mut c, roots, &self.exor_ancillae, adaptive)?;
                uncompute_roots(&mut c, &data, roots, adaptive)?;
            }
        }
        debug_assert_eq!(c.gt_cost(), self.gt_cost);
        Ok(c)
    }
}

/// `prod_i CX_q(data_i -> roots_q)` for all `q`, as one GT between Hadamard
/// layers on the roots. `inverse` negates every angle.
fn fractional(c: &mut Circuit, data: &[usize], roots: &[usize], inverse: bool) -> Result<()> {
    for &r in roots {
        c.h(r);
    }
    let angles = roots.iter().enumerate().flat_map(|(q, &r)| {
        data.iter().map(move |&d| {
            let a = Angle::new(1, q as u32);
            ((d, r), if inverse { a.neg() } else { a })
        })
    });
    c.push(Instruction::gt(angles)?)?;
    for &r in roots {
        c.h(r);
    }
    Ok(())
}

/// Undoes [`fractional`], either unitarily or by measuring each root in the
/// X basis and cancelling the phase `e^{i pi w(x) / 2^q}` of outcome 1 with
/// `Z^{-1/2^q}` on every data qubit.
fn uncompute_roots(c: &mut Circuit, data: &[usize], roots: &[usize], adaptive: bool) -> Result<()> {
    if !adaptive {
        return fractional(c, data, roots, true);
    }
    for (q, &r) in roots.iter().enumerate() {
        let cbit = c.measure_x(r);
        let corr = SqGate::ZPow(Angle::new(-1, q as u32));
        for &d in data {
            c.conditional(cbit, d, corr);
        }
    }
    Ok(())
}

/// `OR_2` from `Z (x) Z` and one `CZ`: `pi (a + b - ab)`.
fn or2(c: &mut Circuit, a: usize, b: usize) -> Result<()> {
    c.z(a);
    c.z(b);
    c.push(Instruction::gt([((a, b), Angle::ONE)])?)?;
    Ok(())
}

fn or_recursive(c: &mut Circuit, reg: &[usize], roots: &[Vec<usize>], adaptive: bool) -> Result<()> {
    match roots.split_first() {
        None => {
            debug_assert_eq!(reg.len(), 2);
            or2(c, reg[0], reg[1])
        }
        Some((level, rest)) => {
            fractional(c, reg, level, false)?;
            or_recursive(c, level, rest, adaptive)?;
            uncompute_roots(c, reg, level, adaptive)
        }
    }
}

/// Subsets of `0..p` with at least two elements, as bit masks in
/// increasing order.
pub fn exor_subsets(p: usize) -> Vec<u32> {
    (1u32..1 << p).filter(|m| m.count_ones() >= 2).collect()
}

/// `OR_p` on `inputs` via all EXORs: since
/// `OR(y) = 2^{1-p} sum_{S != {}} parity_S(y)`, applying `Z^{1/2^{p-1}}` to
/// every EXOR holder gives the OR phase exactly.
fn or_exor(c: &mut Circuit, inputs: &[usize], exors: &[usize], adaptive: bool) -> Result<()> {
    let p = inputs.len();
    let masks = exor_subsets(p);
    debug_assert_eq!(masks.len(), exors.len());
    let layer = Instruction::cx_layer(
        F2Matrix::from_fn(p, masks.len(), |i, k| masks[k] >> i & 1 == 1),
        inputs.to_vec(),
        exors.to_vec(),
    )?;
    c.push(layer.clone())?;
    let rot = SqGate::ZPow(Angle::new(1, p as u32 - 1));
    for &q in inputs.iter().chain(exors) {
        c.sq(q, rot);
    }
    if adaptive {
        // CX |phi>|-> = (Z|phi>)|->, so measuring the targets first turns
        // the uncompute layer into conditional Z gates on the controls.
        for (k, &e) in exors.iter().enumerate() {
            let cbit = c.measure_x(e);
            for (i, &q) in inputs.iter().enumerate() {
                if masks[k] >> i & 1 == 1 {
                    c.conditional(cbit, q, SqGate::Z);
                }
            }
        }
    } else {
        c.push(layer)?;
    }
    Ok(())
}

pub fn synth_or(n: usize, method: MctMethod) -> Result<Circuit> {
    MctPlan::new(n, method)?.build()
}

pub fn synth_or_recursive(n: usize) -> Result<Circuit> {
    synth_or(n, MctMethod::Recursive)
}

pub fn synth_or_flat(n: usize) -> Result<Circuit> {
    synth_or(n, MctMethod::Flat)
}

pub fn synth_or_adaptive_flat(n: usize) -> Result<Circuit> {
    synth_or(n, MctMethod::AdaptiveFlat)
}

pub fn synth_or_adaptive_recursive(n: usize) -> Result<Circuit> {
    synth_or(n, MctMethod::AdaptiveRecursive)
}

/// Toffoli with `num_controls` controls on qubits `0..num_controls` and the
/// target on qubit `num_controls`. `X` on all data turns `OR` into `-MCZ`,
/// and `H` on the target turns `MCZ` into the Toffoli.
pub fn mct_circuit(num_controls: usize, method: MctMethod) -> Result<Circuit> {
    if num_controls < 2 {
        return Err(MctError::TooFew {
            min: 2,
            got: num_controls,
        });
    }
    let n = num_controls + 1;
    let or = synth_or(n, method)?;
    let mut c = Circuit::new(or.num_qubits(), n);
    c.h(num_controls);
    for q in 0..n {
        c.x(q);
    }
    c.extend_from(&or)?;
    for q in 0..n {
        c.x(q);
    }
    c.h(num_controls);
    Ok(c)
}
