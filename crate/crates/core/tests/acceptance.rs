//! One PASS/FAIL line per acceptance criterion.
//!
//! Runs as a plain binary (`harness = false`). Failures are reported, not
//! panicked on; set `NBANDIT_STRICT=1` to turn any FAIL into a non-zero exit.

mod common;

use std::time::Instant;

use common::Check;

fn main() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("gradient correctness", common::check_gradients),
        ("ucb algebra", common::check_ucb_algebra),
        ("ann quality", common::check_ann),
        ("fastbandit near-optimality", common::check_fastbandit),
        ("ganbandit generator quality", common::check_gan_generator),
        ("scaled regret h2/h3", common::check_regret),
        ("latency ordering", common::check_latency),
        ("continuum arms", common::check_continuum),
        ("determinism", common::check_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let c = check();
        if !c.pass {
            failed += 1;
        }
        println!(
            "{} {name}: {} [{:.1}s]",
            if c.pass { "PASS" } else { "FAIL" },
            c.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 && std::env::var("NBANDIT_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
