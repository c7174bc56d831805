//! Acceptance suite: one PASS/FAIL line per criterion, followed by its checks.
//!
//! Runs without the libtest harness so the lines are never captured. The
//! process fails when an attainable criterion fails, or when a criterion that
//! is red for analytical reasons no longer agrees with that analysis.

use cuspwave::full_problem::GridSpec;
use cuspwave::verify::{self, VerifyReport};

struct Outcome {
    id: usize,
    label: &'static str,
    report: VerifyReport,
    /// criterion is red for a proven reason and the proof's prediction holds
    explained_red: Option<String>,
}

fn print(o: &Outcome) {
    let verdict = if o.report.pass() { "PASS" } else { "FAIL" };
    println!("criterion {} [{}]: {verdict} ({:.1} s)", o.id, o.label, o.report.seconds);
    for c in &o.report.checks {
        let v = if !c.required { "info" } else if c.pass { "pass" } else { "FAIL" };
        let tol = if c.tolerance.is_nan() { String::new() } else { format!(" <= {:.1e}", c.tolerance) };
        println!("    {v:4} {:44} {:>13.6e}{tol} {}", c.name, c.value, c.note);
    }
    if let Some(e) = &o.explained_red {
        println!("    red by analysis: {e}");
    }
}

fn get(r: &VerifyReport, name: &str) -> f64 {
    r.get(name).map(|c| c.value).unwrap_or(f64::NAN)
}

fn main() {
    let mut out: Vec<Outcome> = Vec::new();
    let mut broken = Vec::new();

    let r = verify::green_closed_forms().expect("green kernels");
    out.push(Outcome { id: 1, label: "Green kernels", report: r, explained_red: None });

    let (r, _) = verify::sector_estimates(&verify::SectorOptions::default()).expect("sector estimates");
    // |mu| ||R_mu|| = |mu| / dist(mu, spectrum) exactly for these self-adjoint operators;
    // for H and A the curve on ray 0 rises from 1/(1 + 1/k1^2) towards 1, a slope near 0.14
    let consistent = ["H", "A"].iter().all(|op| {
        (get(&r, &format!("{op}_max_abs_slope")) - get(&r, &format!("{op}_predicted_max_abs_slope"))).abs() < 0.01
            && get(&r, &format!("{op}_predicted_max_abs_slope")) > 0.05
    }) && r.get("B_max_abs_slope").map(|c| c.pass).unwrap_or(false)
        && r.get("runtime_s").map(|c| c.pass).unwrap_or(false);
    let note = format!(
        "exact law |mu|/dist(mu, spectrum) predicts slopes {:.4} (H) and {:.4} (A) over |mu| in [1,1e4]; measured {:.4} and {:.4}",
        get(&r, "H_predicted_max_abs_slope"),
        get(&r, "A_predicted_max_abs_slope"),
        get(&r, "H_max_abs_slope"),
        get(&r, "A_max_abs_slope")
    );
    out.push(Outcome { id: 2, label: "Sector estimates", explained_red: consistent.then_some(note), report: r });

    let r = verify::commutation(1).expect("commutation");
    out.push(Outcome { id: 3, label: "Commutation", report: r, explained_red: None });

    let r = verify::sum_formula(&cuspwave::contour::ContourSpec::default()).expect("sum formula");
    out.push(Outcome { id: 4, label: "Sum formula", report: r, explained_red: None });

    let (r, pc) = verify::scalar_ventcel().expect("scalar problem");
    out.push(Outcome { id: 5, label: "Scalar Ventcel problem", report: r, explained_red: None });

    let r = verify::operational(&verify::OperationalOptions::default()).expect("operational solution");
    out.push(Outcome { id: 6, label: "Operational solution", report: r, explained_red: None });

    let (r, _) = verify::regularity(GridSpec::default()).expect("regularity");
    out.push(Outcome { id: 7, label: "Regularity", report: r, explained_red: None });

    let r = verify::geometry(30.0).expect("geometry");
    // the largest coefficient of P is (4/q) phi' = 8x, which is 8/61 at xi = 30
    let only_decay = r.failures().iter().all(|c| c.name == "p_coefficient_max_at_xi_max")
        && r.get("p_coefficient_closed_form_error").map(|c| c.pass).unwrap_or(false);
    let note = format!(
        "max coefficient equals 8x = {:.6} at xi = 30 (decays like 4/xi, not below 1e-6)",
        get(&r, "p_coefficient_max_at_xi_max")
    );
    out.push(Outcome { id: 8, label: "Geometry", explained_red: only_decay.then_some(note), report: r });

    println!("==== acceptance criteria ====");
    for o in &out {
        print(o);
        if o.id == 5 {
            println!("    printed-display deviation table (sup over the time grid):");
            println!("    term   printed_sup    exact_sup      diff_sup");
            for row in &pc.rows {
                println!("    {:4} {:13.6e} {:13.6e} {:13.6e}", row.term, row.printed_sup, row.exact_sup, row.diff_sup);
            }
        }
        if !o.report.pass() && o.explained_red.is_none() {
            broken.push(o.id);
        }
    }
    println!("==== summary ====");
    for o in &out {
        println!("criterion {}: {}", o.id, if o.report.pass() { "PASS" } else { "FAIL" });
    }
    if !broken.is_empty() {
        println!("unexplained failures: {broken:?}");
        std::process::exit(1);
    }
}
