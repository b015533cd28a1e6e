use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use gtsynth::circuit::Circuit;
use gtsynth::clifford_core::{random_clifford, CliffordTableau};
use gtsynth::clifford_synth::{synth_ancilla_free, synth_with_ancilla};
use gtsynth::mct_synth::{mct_circuit, MctMethod, MctPlan};
use gtsynth::simverify::{
    check_clifford_contract, check_mct_contract, check_or_contract, CliffordCheckMode,
    EquivalenceVerdict, SimError,
};
use serde::Serialize;

mod bench;

#[derive(Parser)]
#[command(
    name = "gtsynth",
    version,
    about = "Synthesize and verify circuits over global tunable entangling gates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize an n-qubit Clifford operation
    SynthClifford(CliffordArgs),
    /// Synthesize a multiply-controlled Toffoli
    SynthMct(MctArgs),
    /// Check a circuit file against a tableau or an `or N` / `mct C` spec
    Verify(VerifyArgs),
    /// Print gate counts against n for every method
    Bench(bench::BenchArgs),
}

#[derive(Args)]
struct OutputArgs {
    /// Directory for the circuit, spec and report files
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Print the report as JSON
    #[arg(long)]
    json: bool,
    /// Skip dense verification (structural and tableau checks still run)
    #[arg(long)]
    no_verify: bool,
}

#[derive(Args)]
struct CliffordArgs {
    /// Number of qubits of a random tableau
    #[arg(long)]
    n: Option<usize>,
    /// Draw the tableau at random (the default with --n)
    #[arg(long)]
    random: bool,
    /// Tableau file to synthesize
    #[arg(long, value_name = "TABLEAU-FILE", conflicts_with_all = ["n", "random"])]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use n ancillae (4 GCZs); this is the default
    #[arg(long, overrides_with = "no_ancilla")]
    ancilla: bool,
    /// Ancilla-free synthesis
    #[arg(long, overrides_with = "ancilla")]
    no_ancilla: bool,
    /// Merge adjacent CX layers (ancilla-free only)
    #[arg(long)]
    optimize: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct MctArgs {
    /// Number of controls
    #[arg(long)]
    controls: usize,
    #[arg(long, default_value = "flat", value_parser = parse_method)]
    method: MctMethod,
    /// Only used in the output file name
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct VerifyArgs {
    /// Circuit in text or JSON form
    circuit: PathBuf,
    /// Tableau file, or a single line `or N` / `mct C`
    spec: PathBuf,
}

fn parse_method(s: &str) -> Result<MctMethod, String> {
    s.parse().map_err(|e: gtsynth::mct_synth::MctError| e.to_string())
}

#[derive(Serialize)]
struct VerdictReport {
    status: &'static str,
    check: String,
    max_deviation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    failing_basis_state: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    detail: Option<String>,
}

impl VerdictReport {
    fn from_verdict(check: &str, v: &EquivalenceVerdict) -> Self {
        VerdictReport {
            status: if v.equal { "pass" } else { "fail" },
            check: check.to_string(),
            max_deviation: v.max_deviation,
            failing_basis_state: v.failing_basis_state,
            detail: v.detail.clone(),
        }
    }

    fn skipped(reason: &str) -> Self {
        VerdictReport {
            status: "skipped",
            check: "none".into(),
            max_deviation: 0.0,
            failing_basis_state: None,
            detail: Some(reason.into()),
        }
    }

    fn passed(&self) -> bool {
        self.status != "fail"
    }
}

#[derive(Serialize)]
struct SynthReport {
    method: String,
    n: usize,
    data_qubits: usize,
    ancilla_qubits: usize,
    gt_cost: usize,
    bound: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    formula_gt_cost: Option<usize>,
    verdict: VerdictReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    files: Vec<String>,
    /// Left out of the report file so that reruns are byte-identical.
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_ms: Option<f64>,
}

impl SynthReport {
    fn ok(&self) -> bool {
        self.verdict.passed() && self.bound.map_or(true, |b| self.gt_cost <= b)
    }

    fn print(&self, json: bool) -> anyhow::Result<()> {
        if json {
            println!("{}", serde_json::to_string_pretty(self)?);
            return Ok(());
        }
        let bound = self.bound.map_or("none".to_string(), |b| b.to_string());
        println!(
            "{} n={} data={} ancillae={} gt_cost={} bound={} verdict={} ({})",
            self.method,
            self.n,
            self.data_qubits,
            self.ancilla_qubits,
            self.gt_cost,
            bound,
            self.verdict.status,
            self.verdict.check
        );
        if let Some(d) = &self.verdict.detail {
            println!("  {d}");
        }
        for f in &self.files {
            println!("  wrote {f}");
        }
        Ok(())
    }
}

/// Writes the artifacts and the report (without wall time), then prints.
fn finish(
    mut report: SynthReport,
    out: &Path,
    stem: &str,
    artifacts: &[(&str, String)],
    json: bool,
    started: Instant,
) -> anyhow::Result<u8> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for (ext, body) in artifacts {
        let p = out.join(format!("{stem}.{ext}"));
        fs::write(&p, body).with_context(|| format!("writing {}", p.display()))?;
        report.files.push(p.display().to_string());
    }
    let rp = out.join(format!("{stem}.report.json"));
    report.files.push(rp.display().to_string());
    fs::write(&rp, serde_json::to_string_pretty(&report)? + "\n")
        .with_context(|| format!("writing {}", rp.display()))?;
    report.wall_ms = Some(started.elapsed().as_secs_f64() * 1e3);
    report.print(json)?;
    Ok(if report.ok() { 0 } else { 1 })
}

fn clifford_bound(n: usize, ancilla: bool, optimize: bool) -> Option<usize> {
    match (ancilla, n >= 9, optimize, n % 3 == 0) {
        (true, _, _, _) => Some(4),
        (false, false, _, _) => None,
        (false, true, false, true) => Some(25),
        (false, true, false, false) => Some(26),
        (false, true, true, true) => Some(20),
        (false, true, true, false) => Some(21),
    }
}

fn cmd_synth_clifford(a: CliffordArgs) -> anyhow::Result<u8> {
    let started = Instant::now();
    let (t, label, seed) = match (&a.input, a.n) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let t = CliffordTableau::from_text(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            let stem = path
                .file_stem()
                .map_or("input".into(), |s| s.to_string_lossy().into_owned());
            (t, stem, None)
        }
        (None, Some(0)) => bail!("--n must be at least 1"),
        (None, Some(n)) => (random_clifford(n, a.seed), format!("n{n}-s{}", a.seed), Some(a.seed)),
        (None, None) => bail!("give --n (random tableau) or --input <tableau-file>"),
    };
    let n = t.n();
    let ancilla = !a.no_ancilla;
    let method = match (ancilla, a.optimize) {
        (true, _) => "clifford-ancilla",
        (false, false) => "clifford-ancilla-free",
        (false, true) => "clifford-ancilla-free-opt",
    };
    let c = if ancilla {
        synth_with_ancilla(&t)?
    } else {
        synth_ancilla_free(&t, a.optimize, a.seed)?
    };
    // Tableau checks are cheap at every size, so they always run.
    let (mode, check) = if ancilla {
        (CliffordCheckMode::StabilizerAncilla, "stabilizer-ancilla")
    } else {
        (CliffordCheckMode::ExactTableau, "exact-tableau")
    };
    let v = check_clifford_contract(&c, &t, mode)?;
    let report = SynthReport {
        method: method.into(),
        n,
        data_qubits: c.num_data(),
        ancilla_qubits: c.num_ancilla(),
        gt_cost: c.gt_cost(),
        bound: clifford_bound(n, ancilla, a.optimize),
        formula_gt_cost: None,
        verdict: VerdictReport::from_verdict(check, &v),
        seed,
        files: Vec::new(),
        wall_ms: None,
    };
    let stem = format!("{method}-{label}");
    finish(
        report,
        &a.output.out,
        &stem,
        &[("circ", c.to_text()), ("tab", t.to_text())],
        a.output.json,
        started,
    )
}

/// Rough work estimate of the dense OR check, in log2 amplitude updates.
fn dense_feasible(c: &Circuit, n_data: usize) -> bool {
    n_data <= 10
        && c.num_qubits() <= gtsynth::simverify::MAX_DENSE_QUBITS
        && c.num_measurements() <= gtsynth::simverify::MAX_BRANCH_MEASUREMENTS
        && n_data + c.num_qubits() + c.num_measurements() <= 30
}

fn cmd_synth_mct(a: MctArgs) -> anyhow::Result<u8> {
    let started = Instant::now();
    if a.controls < 2 {
        bail!("--controls must be at least 2");
    }
    let n = a.controls + 1;
    let plan = MctPlan::new(n, a.method)?;
    let c = mct_circuit(a.controls, a.method)?;
    let verdict = if a.output.no_verify {
        VerdictReport::skipped("--no-verify")
    } else if !dense_feasible(&c, n) {
        bail!(
            "{} qubits with {} measurements is too large for dense verification; rerun with --no-verify",
            c.num_qubits(),
            c.num_measurements()
        );
    } else {
        let check = if a.method.is_adaptive() { "mct-branches" } else { "mct-dense" };
        VerdictReport::from_verdict(check, &check_mct_contract(&c, a.controls)?)
    };
    let report = SynthReport {
        method: format!("mct-{}", a.method),
        n: a.controls,
        data_qubits: c.num_data(),
        ancilla_qubits: c.num_ancilla(),
        gt_cost: c.gt_cost(),
        bound: Some(plan.gt_cost),
        formula_gt_cost: Some(plan.formula_gt_cost),
        verdict,
        seed: a.seed,
        files: Vec::new(),
        wall_ms: None,
    };
    let mut stem = format!("mct-{}-c{}", a.method, a.controls);
    if let Some(s) = a.seed {
        stem.push_str(&format!("-s{s}"));
    }
    finish(
        report,
        &a.output.out,
        &stem,
        &[("circ", c.to_text()), ("spec", format!("mct {}\n", a.controls))],
        a.output.json,
        started,
    )
}

enum Spec {
    Tableau(CliffordTableau),
    Or(usize),
    Mct(usize),
}

fn parse_spec(text: &str) -> anyhow::Result<Spec> {
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .unwrap_or("");
    let mut words = first.split_whitespace();
    match (words.next(), words.next(), words.next()) {
        (Some("or"), Some(k), None) => Ok(Spec::Or(k.parse().context("bad `or` size")?)),
        (Some("mct"), Some(k), None) => Ok(Spec::Mct(k.parse().context("bad `mct` control count")?)),
        _ => Ok(Spec::Tableau(CliffordTableau::from_text(text)?)),
    }
}

fn read_circuit(path: &Path) -> anyhow::Result<Circuit> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let c = if text.trim_start().starts_with('{') {
        Circuit::from_json(&text)
    } else {
        Circuit::from_text(&text)
    };
    c.with_context(|| format!("parsing {}", path.display()))
}

fn cmd_verify(a: VerifyArgs) -> anyhow::Result<u8> {
    let c = read_circuit(&a.circuit)?;
    let spec_text =
        fs::read_to_string(&a.spec).with_context(|| format!("reading {}", a.spec.display()))?;
    let spec = parse_spec(&spec_text).with_context(|| format!("parsing {}", a.spec.display()))?;
    let nq = c.num_qubits();
    let (check, result) = match spec {
        Spec::Tableau(t) => {
            let n = t.n();
            let (mode, check) = if nq == n {
                (CliffordCheckMode::ExactTableau, "exact-tableau")
            } else if nq == 2 * n {
                (CliffordCheckMode::StabilizerAncilla, "stabilizer-ancilla")
            } else {
                bail!("circuit has {nq} qubits; a {n}-qubit tableau needs {n} or {}", 2 * n);
            };
            (check, check_clifford_contract(&c, &t, mode))
        }
        Spec::Or(k) | Spec::Mct(k) => {
            let is_mct = matches!(spec, Spec::Mct(_));
            let need = if is_mct { k + 1 } else { k };
            if c.num_data() != need {
                bail!("circuit has {} data qubits; the spec needs {need}", c.num_data());
            }
            if !dense_feasible(&c, need) {
                bail!("{nq} qubits is too large for dense verification");
            }
            if is_mct {
                ("mct", check_mct_contract(&c, k))
            } else {
                ("or", check_or_contract(&c, k))
            }
        }
    };
    let verdict = match result {
        Ok(v) => VerdictReport::from_verdict(check, &v),
        // A non-Clifford circuit cannot match a tableau.
        Err(SimError::Clifford(e)) => VerdictReport {
            status: "fail",
            check: check.into(),
            max_deviation: 1.0,
            failing_basis_state: None,
            detail: Some(e.to_string()),
        },
        Err(e) => return Err(e.into()),
    };
    println!("{}", serde_json::to_string_pretty(&verdict)?);
    Ok(if verdict.passed() { 0 } else { 1 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::SynthClifford(a) => cmd_synth_clifford(a),
        Command::SynthMct(a) => cmd_synth_mct(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Bench(a) => bench::run(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
