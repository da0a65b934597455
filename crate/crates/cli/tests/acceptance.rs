//! Runs every headline acceptance criterion and prints one line per
//! criterion. Run with `--nocapture` to see the lines.

#[path = "../../core/tests/common/mod.rs"]
mod common;
mod support;

use common::criteria::{self, Outcome};
use gsfill_core::synthetic::disk_fixture;
use support::{inpaint, path_str, write_disk};

/// Two diffusion-backend runs with one seed must write identical files.
fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let files = write_disk(dir.path(), &disk_fixture(64));
    let outs = [dir.path().join("a.ply"), dir.path().join("b.ply")];
    for out in &outs {
        let run = inpaint(
            &files,
            out,
            &["--backend", "diffusion", "--seed", "1234", "--iterations", "20"],
        );
        if !run.status.success() {
            return Outcome::new(
                criteria::DETERMINISM,
                false,
                format!("gsfill exited with {:?}: {}", run.status.code(), String::from_utf8_lossy(&run.stderr)),
            );
        }
    }
    let a = std::fs::read(&outs[0]).unwrap();
    let b = std::fs::read(&outs[1]).unwrap();
    let other = dir.path().join("c.ply");
    let run = inpaint(
        &files,
        &other,
        &["--backend", "diffusion", "--seed", "4321", "--iterations", "20"],
    );
    let seed_matters = run.status.success() && std::fs::read(&other).unwrap() != a;
    Outcome::new(
        criteria::DETERMINISM,
        a == b,
        format!(
            "{} and {} bytes, identical {}, a different seed changes the output {}",
            a.len(),
            b.len(),
            a == b,
            seed_matters
        ),
    )
}

#[test]
fn acceptance() {
    let checks: [fn() -> Outcome; 10] = [
        criteria::compositing_oracle,
        criteria::gradient_suite,
        criteria::normalization_round_trip,
        criteria::ddim_closed_forms,
        criteria::outlier_procedure,
        criteria::unprojection_round_trip,
        criteria::disk_end_to_end,
        criteria::progressive_monotonicity,
        criteria::training_mask_statistics,
        cli_determinism,
    ];
    let outcomes: Vec<Outcome> = checks
        .iter()
        .map(|check| {
            let o = check();
            println!("{}", o.line());
            o
        })
        .collect();
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.name).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
