//! wasm-bindgen bindings for the static demo page in `www/`.
//!
//! Every export returns a JSON string. The `*_json` functions hold the logic
//! so they can be tested natively.

use gtsynth::circuit::Circuit;
use gtsynth::clifford_core::{random_clifford, CliffordTableau};
use gtsynth::clifford_synth::{synth_ancilla_free, synth_with_ancilla};
use gtsynth::mct_synth::{mct_circuit, MctMethod, MctPlan};
use gtsynth::simverify::{check_clifford_contract, check_mct_contract, CliffordCheckMode, EquivalenceVerdict};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest Clifford the page will synthesize.
pub const MAX_CLIFFORD_QUBITS: usize = 64;
/// Largest control count the page will synthesize.
pub const MAX_CONTROLS: usize = 63;
// Dense checks in the browser stay well under a second below these.
const MAX_VERIFY_DATA: usize = 7;
const MAX_VERIFY_QUBITS: usize = 16;

#[derive(Serialize)]
struct Verdict {
    status: &'static str,
    max_deviation: Option<f64>,
    failing_basis_state: Option<usize>,
    detail: Option<String>,
}

impl Verdict {
    fn from(v: &EquivalenceVerdict) -> Self {
        Verdict {
            status: if v.equal { "pass" } else { "fail" },
            max_deviation: Some(v.max_deviation),
            failing_basis_state: v.failing_basis_state,
            detail: v.detail.clone(),
        }
    }

    fn skipped(why: &str) -> Self {
        Verdict { status: "skipped", max_deviation: None, failing_basis_state: None, detail: Some(why.into()) }
    }
}

#[derive(Serialize)]
struct Synthesis {
    method: String,
    qubits: usize,
    data_qubits: usize,
    gt_cost: usize,
    verdict: Verdict,
    circuit: String,
    tableau: Option<String>,
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

pub fn synth_clifford_json(n: usize, seed: u64, ancilla: bool, optimize: bool) -> Result<String, String> {
    if n == 0 || n > MAX_CLIFFORD_QUBITS {
        return Err(format!("n must be between 1 and {MAX_CLIFFORD_QUBITS}"));
    }
    let t = random_clifford(n, seed);
    let (c, mode, method) = if ancilla {
        (synth_with_ancilla(&t), CliffordCheckMode::StabilizerAncilla, "clifford-ancilla")
    } else if optimize {
        (synth_ancilla_free(&t, true, seed), CliffordCheckMode::ExactTableau, "clifford-ancilla-free-opt")
    } else {
        (synth_ancilla_free(&t, false, seed), CliffordCheckMode::ExactTableau, "clifford-ancilla-free")
    };
    let c = c.map_err(|e| e.to_string())?;
    let v = check_clifford_contract(&c, &t, mode).map_err(|e| e.to_string())?;
    to_json(&Synthesis {
        method: method.into(),
        qubits: c.num_qubits(),
        data_qubits: n,
        gt_cost: c.gt_cost(),
        verdict: Verdict::from(&v),
        circuit: c.to_text(),
        tableau: Some(t.to_text()),
    })
}

pub fn synth_mct_json(controls: usize, method: &str) -> Result<String, String> {
    if !(2..=MAX_CONTROLS).contains(&controls) {
        return Err(format!("controls must be between 2 and {MAX_CONTROLS}"));
    }
    let m: MctMethod = method.parse().map_err(|e: gtsynth::mct_synth::MctError| e.to_string())?;
    let plan = MctPlan::new(controls + 1, m).map_err(|e| e.to_string())?;
    let c = mct_circuit(controls, m).map_err(|e| e.to_string())?;
    let verdict = if controls < MAX_VERIFY_DATA && c.num_qubits() <= MAX_VERIFY_QUBITS {
        Verdict::from(&check_mct_contract(&c, controls).map_err(|e| e.to_string())?)
    } else {
        Verdict::skipped("too large for in-browser simulation")
    };
    to_json(&Synthesis {
        method: m.name().into(),
        qubits: c.num_qubits(),
        data_qubits: controls + 1,
        gt_cost: plan.gt_cost,
        verdict,
        circuit: c.to_text(),
        tableau: None,
    })
}

pub fn verify_clifford_json(circuit: &str, tableau: &str) -> Result<String, String> {
    let c = Circuit::from_text(circuit).map_err(|e| format!("circuit: {e}"))?;
    let t = CliffordTableau::from_text(tableau).map_err(|e| format!("tableau: {e}"))?;
    let mode = if c.num_qubits() == t.n() {
        CliffordCheckMode::ExactTableau
    } else if c.num_qubits() == 2 * t.n() {
        CliffordCheckMode::StabilizerAncilla
    } else {
        return Err(format!("circuit has {} qubits, tableau has {}", c.num_qubits(), t.n()));
    };
    let v = match check_clifford_contract(&c, &t, mode) {
        Ok(v) => Verdict::from(&v),
        Err(e) => Verdict { status: "fail", max_deviation: None, failing_basis_state: None, detail: Some(e.to_string()) },
    };
    to_json(&v)
}

/// Random `n`-qubit Clifford synthesized with or without ancillae.
#[wasm_bindgen]
pub fn synth_clifford(n: usize, seed: u64, ancilla: bool, optimize: bool) -> Result<String, JsError> {
    synth_clifford_json(n, seed, ancilla, optimize).map_err(|e| JsError::new(&e))
}

/// Toffoli with `controls` controls; `method` is one of the kebab-case names.
#[wasm_bindgen]
pub fn synth_mct(controls: usize, method: &str) -> Result<String, JsError> {
    synth_mct_json(controls, method).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn verify_clifford(circuit: &str, tableau: &str) -> Result<String, JsError> {
    verify_clifford_json(circuit, tableau).map_err(|e| JsError::new(&e))
}
