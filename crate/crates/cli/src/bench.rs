use clap::Args;
use gtsynth::clifford_core::random_clifford;
use gtsynth::clifford_synth::{synth_ancilla_free, synth_with_ancilla};
use gtsynth::mct_synth::{iterated_log, MctMethod, MctPlan};
use gtsynth::simverify::{check_clifford_contract, CliffordCheckMode};
use serde::Serialize;

#[derive(Args)]
pub struct BenchArgs {
    /// Random tableaus per Clifford size (the table shows the maximum cost)
    #[arg(long, default_value_t = 5)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Clifford sizes
    #[arg(long, value_delimiter = ',', default_values_t = [2, 4, 8, 9, 10, 11, 12, 15, 16, 24, 32])]
    clifford_n: Vec<usize>,
    /// OR sizes (Toffoli controls plus one)
    #[arg(long, value_delimiter = ',', default_values_t = [2, 3, 4, 5, 8, 16, 17, 32, 64])]
    mct_n: Vec<usize>,
    /// Print JSON instead of tables
    #[arg(long)]
    json: bool,
}

#[derive(Serialize)]
struct CliffordRow {
    n: usize,
    ancilla: usize,
    ancilla_free: usize,
    ancilla_free_opt: usize,
    /// Earlier constructions, leading terms of `12n`, `6n` and `6 log2 n`.
    prior_12n: usize,
    prior_6n: usize,
    prior_6logn: f64,
    verified: bool,
}

#[derive(Serialize)]
struct MctRow {
    n: usize,
    recursive: usize,
    recursive_formula: usize,
    flat: usize,
    adaptive_flat: usize,
    adaptive_recursive: usize,
    adaptive_recursive_formula: usize,
    flat_ancillae: usize,
    recursive_ancillae: usize,
    /// Earlier construction, leading term of `3n`.
    prior_3n: usize,
}

#[derive(Serialize)]
struct BenchReport {
    samples: u64,
    seed: u64,
    clifford: Vec<CliffordRow>,
    mct: Vec<MctRow>,
}

fn clifford_row(n: usize, samples: u64, seed: u64) -> anyhow::Result<CliffordRow> {
    let (mut anc, mut free, mut opt) = (0, 0, 0);
    let mut verified = true;
    for s in 0..samples {
        let t = random_clifford(n, seed.wrapping_add(s));
        let ca = synth_with_ancilla(&t)?;
        let cf = synth_ancilla_free(&t, false, s)?;
        let co = synth_ancilla_free(&t, true, s)?;
        verified &= check_clifford_contract(&ca, &t, CliffordCheckMode::StabilizerAncilla)?.equal;
        for c in [&cf, &co] {
            verified &= check_clifford_contract(c, &t, CliffordCheckMode::ExactTableau)?.equal;
        }
        anc = anc.max(ca.gt_cost());
        free = free.max(cf.gt_cost());
        opt = opt.max(co.gt_cost());
    }
    Ok(CliffordRow {
        n,
        ancilla: anc,
        ancilla_free: free,
        ancilla_free_opt: opt,
        prior_12n: 12 * n,
        prior_6n: 6 * n,
        prior_6logn: 6.0 * (n as f64).log2(),
        verified,
    })
}

fn mct_row(n: usize) -> anyhow::Result<MctRow> {
    let plan = |m| MctPlan::new(n, m);
    let rec = plan(MctMethod::Recursive)?;
    let flat = plan(MctMethod::Flat)?;
    Ok(MctRow {
        n,
        recursive: rec.gt_cost,
        recursive_formula: rec.formula_gt_cost,
        flat: flat.gt_cost,
        adaptive_flat: plan(MctMethod::AdaptiveFlat)?.gt_cost,
        adaptive_recursive: plan(MctMethod::AdaptiveRecursive)?.gt_cost,
        adaptive_recursive_formula: iterated_log(n),
        flat_ancillae: flat.num_ancillae,
        recursive_ancillae: rec.num_ancillae,
        prior_3n: 3 * n,
    })
}

fn print_tables(r: &BenchReport) {
    println!("Clifford, GT cost (max over {} tableaus; prior columns are leading terms, +O(1))", r.samples);
    println!(
        "{:>4} {:>8} {:>12} {:>16} {:>10} {:>9} {:>13} {:>9}",
        "n", "ancilla", "ancilla-free", "ancilla-free-opt", "prior 12n", "prior 6n", "prior 6log n", "verified"
    );
    for c in &r.clifford {
        println!(
            "{:>4} {:>8} {:>12} {:>16} {:>10} {:>9} {:>13.1} {:>9}",
            c.n, c.ancilla, c.ancilla_free, c.ancilla_free_opt, c.prior_12n, c.prior_6n, c.prior_6logn, c.verified
        );
    }
    println!();
    println!("OR_n / Toffoli with n-1 controls, GT cost (structural)");
    println!(
        "{:>4} {:>9} {:>13} {:>5} {:>13} {:>18} {:>15} {:>10} {:>9}",
        "n", "recursive", "2log*(n)-1", "flat", "adaptive-flat", "adaptive-recursive", "log*(n)", "flat anc", "prior 3n"
    );
    for m in &r.mct {
        println!(
            "{:>4} {:>9} {:>13} {:>5} {:>13} {:>18} {:>15} {:>10} {:>9}",
            m.n,
            m.recursive,
            m.recursive_formula,
            m.flat,
            m.adaptive_flat,
            m.adaptive_recursive,
            m.adaptive_recursive_formula,
            m.flat_ancillae,
            m.prior_3n
        );
    }
}

pub fn run(a: BenchArgs) -> anyhow::Result<u8> {
    if let Some(&n) = a.clifford_n.iter().find(|&&n| n == 0) {
        anyhow::bail!("Clifford size {n} is not allowed");
    }
    if let Some(&n) = a.mct_n.iter().find(|&&n| n < 2) {
        anyhow::bail!("OR size {n} is below 2");
    }
    let report = BenchReport {
        samples: a.samples,
        seed: a.seed,
        clifford: a
            .clifford_n
            .iter()
            .map(|&n| clifford_row(n, a.samples, a.seed))
            .collect::<anyhow::Result<_>>()?,
        mct: a.mct_n.iter().map(|&n| mct_row(n)).collect::<anyhow::Result<_>>()?,
    };
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print_tables(&report);
    }
    Ok(if report.clifford.iter().all(|c| c.verified) { 0 } else { 1 })
}
