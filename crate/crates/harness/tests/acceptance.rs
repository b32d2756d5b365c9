//! End-to-end acceptance run at default configuration. Prints one line per criterion.
//!
//! Single core: expect around ten minutes, most of it in one-particle.

use std::io::Write;

use nelson_harness::{run_experiment, RunConfig};

const CRITERIA: &[(&str, &[&str])] = &[
    ("charge conservation", &["classical-charge"]),
    ("splitting order", &["classical-order"]),
    ("picard iteration", &["classical-picard"]),
    ("canonical commutation", &["ccr"]),
    ("structural zeros", &["structural-zeros"]),
    ("theta identity", &["theta-identity"]),
    ("one-particle preservation", &["one-particle"]),
    ("number-weighted bound", &["hdelta-bound"]),
    ("strong limit", &["strong-limit"]),
    ("coherent-state rates", &["rates-generic", "rates-vacuum"]),
    ("theta residue", &["theta-residue"]),
    ("determinism", &["determinism"]),
];

#[test]
fn acceptance() {
    let config = RunConfig::default();
    let dir = tempfile::tempdir().unwrap();
    let mut failed = Vec::new();
    writeln!(std::io::stdout()).unwrap();
    for (n, (label, names)) in CRITERIA.iter().enumerate() {
        let mut ok = true;
        let mut detail = Vec::new();
        for name in names.iter() {
            match run_experiment(name, &config, &dir.path().join(name)) {
                Ok(r) => {
                    for a in r.assertions.iter().filter(|a| !a.passed) {
                        detail.push(format!("{name}: {} = {:e} vs {:e}", a.name, a.value, a.bound));
                    }
                    if let Some(s) = r.slope {
                        detail.push(format!("{name}: slope {s:.3}"));
                    }
                    ok &= r.passed();
                }
                Err(e) => {
                    detail.push(format!("{name}: error {e}"));
                    ok = false;
                }
            }
        }
        // Written to the process stdout directly so the lines survive output capture.
        let mut out = std::io::stdout().lock();
        writeln!(out, "criterion {:>2} {:<26} {}  {}", n + 1, label, if ok { "PASS" } else { "FAIL" }, detail.join("; ")).unwrap();
        out.flush().unwrap();
        if !ok {
            failed.push(n + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
