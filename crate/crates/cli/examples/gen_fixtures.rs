//! Regenerates the canned behavior fixtures in `fixtures/`.
//!
//! Run from the workspace root:
//!
//! ```text
//! cargo run -p bellkit-cli --example gen_fixtures
//! ```
//!
//! The fixtures are exact library outputs, so tests can compare against
//! them entry for entry:
//! - `prbox.json`: the PR box (CHSH = 4).
//! - `singlet-chsh-optimal.json`: the singlet at CHSH-optimal settings
//!   (S = 2*sqrt(2)).
//! - `werner-0.5.json`: the half-strength Werner state at the same
//!   settings (S = sqrt(2), inside the local polytope).
//! - `white-noise.json`: the uniform behavior.

use std::fs;
use std::path::Path;

use bellkit_core::{pr_box, singlet_behavior, werner_behavior, Behavior, Scenario, Vec3};

fn chsh_optimal_settings() -> (Vec<Vec3>, Vec<Vec3>) {
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    (
        vec![Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 0.0)],
        vec![Vec3::new(-inv, 0.0, -inv), Vec3::new(inv, 0.0, -inv)],
    )
}

fn write(dir: &Path, name: &str, behavior: &Behavior) {
    let mut text = serde_json::to_string_pretty(behavior).expect("serialize fixture");
    text.push('\n');
    let path = dir.join(name);
    fs::write(&path, text).expect("write fixture");
    println!("wrote {}", path.display());
}

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    fs::create_dir_all(&dir).expect("create fixtures dir");
    let (alice, bob) = chsh_optimal_settings();

    write(&dir, "prbox.json", &pr_box());
    write(
        &dir,
        "singlet-chsh-optimal.json",
        &singlet_behavior(&alice, &bob).expect("singlet behavior"),
    );
    write(
        &dir,
        "werner-0.5.json",
        &werner_behavior(0.5, &alice, &bob).expect("werner behavior"),
    );
    let uniform = Behavior::from_fn(Scenario::new(2, 2, 2, 2).expect("scenario"), |_, _, _, _| {
        0.25
    })
    .expect("uniform behavior");
    write(&dir, "white-noise.json", &uniform);
}
