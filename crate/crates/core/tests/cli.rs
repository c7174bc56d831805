use cuspwave::cli::{run, RunConfig, EXIT_FAIL, EXIT_PASS, EXIT_USAGE};
use std::path::Path;

fn cmd(args: &[&str]) -> i32 {
    let mut v = vec!["cuspwave"];
    v.extend_from_slice(args);
    run(v)
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn validate_domain_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("o").to_str().unwrap().to_string();
    let quad = write(d.path(), "q.toml", "[profile]\nkind = \"quadratic-symmetric\"\n");
    assert_eq!(cmd(&["validate-domain", "-c", &quad, "-o", &out]), EXIT_PASS);
    let table = std::fs::read_to_string(d.path().join("o/domain_validation.csv")).unwrap();
    assert_eq!(table.lines().filter(|l| l.contains(",true,")).count(), 4);
    let lin = write(d.path(), "l.toml", "[profile]\nkind = \"polynomial\"\nphi1 = [0.0, 1.0]\nphi2 = [0.0, -1.0]\n");
    assert_eq!(cmd(&["validate-domain", "-c", &lin, "-o", &out]), EXIT_FAIL);
    let table = std::fs::read_to_string(d.path().join("o/domain_validation.csv")).unwrap();
    assert!(table.lines().any(|l| l.starts_with("3,false")), "{table}");
    let bad = write(d.path(), "b.toml", "[profile\nkind = 3\n");
    assert_eq!(cmd(&["validate-domain", "-c", &bad, "-o", &out]), EXIT_USAGE);
}

#[test]
fn range_validation_precedes_computation() {
    for text in [
        "[problem]\ntheta = 1.0\n",
        "[problem]\np = 1.0\n",
        "[problem]\nlambda = 0.0\n",
        "[contour]\ndelta = 1.6\n",
        "[source]\nkind = \"nope\"\n",
        "unknown_key = 1\n",
    ] {
        assert!(RunConfig::parse(text).is_err(), "{text}");
    }
    assert!(RunConfig::parse("").is_ok());
}

#[test]
fn crossing_contour_reports_collision() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("o").to_str().unwrap().to_string();
    let c = write(d.path(), "c.toml", "[contour]\ncenter = -2.0\n");
    assert_eq!(cmd(&["verify-sum", "-c", &c, "-o", &out]), EXIT_USAGE);
    let cfg = RunConfig::parse("[contour]\ncenter = -2.0\n").unwrap();
    let err = cuspwave::cli::verify_sum(&cfg, d.path()).unwrap_err().to_string();
    assert!(err.contains("contour collision at node"), "{err}");
}

#[test]
fn verify_scalar_emits_deviation_table_deterministically() {
    let d = tempfile::tempdir().unwrap();
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    assert_eq!(cmd(&["verify-scalar", "-o", a.to_str().unwrap()]), EXIT_PASS);
    assert_eq!(cmd(&["verify-scalar", "-o", b.to_str().unwrap()]), EXIT_PASS);
    for f in ["deviation.csv", "scalar.csv", "config-echo.toml"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let dev = std::fs::read_to_string(a.join("deviation.csv")).unwrap();
    assert_eq!(dev.lines().filter(|l| !l.starts_with('#')).count(), 7);
}

#[test]
fn commutation_is_seed_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let c = write(d.path(), "s.toml", "seed = 42\n");
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    assert_eq!(cmd(&["verify-commutation", "-c", &c, "-o", a.to_str().unwrap()]), EXIT_PASS);
    assert_eq!(cmd(&["verify-commutation", "-c", &c, "-o", b.to_str().unwrap()]), EXIT_PASS);
    assert_eq!(std::fs::read(a.join("commutation.csv")).unwrap(), std::fs::read(b.join("commutation.csv")).unwrap());
}

#[test]
fn zero_source_gives_zero_bundle() {
    let d = tempfile::tempdir().unwrap();
    let text = "[source]\nkind = \"zero\"\n[solver]\nbackend = \"oracle\"\n[grid]\nnt = 9\nh_end = 0.0\n";
    let c = write(d.path(), "z.toml", text);
    let out = d.path().join("o");
    assert_eq!(cmd(&["solve", "-c", &c, "-o", out.to_str().unwrap()]), EXIT_PASS);
    assert_eq!(std::fs::read_to_string(out.join("bundle/config-echo.toml")).unwrap(), text);
    assert_eq!(std::fs::read_to_string(out.join("config-echo.toml")).unwrap(), text);
    let b = cuspwave::full_problem::SolutionBundle::read_dir(&out.join("bundle")).unwrap();
    assert!(b.w.frames.iter().all(|f| f.max_abs() == 0.0));
    let rep = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(rep.lines().any(|l| l.starts_with("zero_source_field") && l.contains(",true,")));
    assert!(out.join("plot_tables.py").exists());
}

#[test]
fn manufactured_corpus_recovery_table() {
    let d = tempfile::tempdir().unwrap();
    let c = write(d.path(), "m.toml", "[source]\nkind = \"manufactured\"\n[solver]\nbackend = \"oracle\"\nn_modes = 160\n");
    let out = d.path().join("o");
    cmd(&["solve", "-c", &c, "-o", out.to_str().unwrap()]);
    let t = std::fs::read_to_string(out.join("recovery.csv")).unwrap();
    for name in ["w_rel_sup_l2", "w_rel_max"] {
        let row = t.lines().find(|l| l.starts_with(name)).unwrap();
        let v: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert!(v <= 1e-5, "{row}");
    }
}
