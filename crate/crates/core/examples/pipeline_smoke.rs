//! End-to-end smoke: solve, compute residues, resynthesize, verify.

use std::time::Instant;

use fdn_modal_core::analysis::random_lossless_fdn;
use fdn_modal_core::fdn::FdnSystem;
use fdn_modal_core::modal::{residues, verification_error};
use fdn_modal_core::solver::{solve, EaiConfig};

fn main() {
    for (seed, target) in [(11u64, 2_000usize), (12, 5_000), (13, 3_000)] {
        let sys = random_lossless_fdn(8, target / 8 - 15, target / 8 + 15, seed).unwrap();
        run(&sys, "lossless");
    }
    // Lossy variant: scaled feedback.
    let base = random_lossless_fdn(8, 200, 400, 21).unwrap();
    let sys = FdnSystem::new(
        base.delays().to_vec(),
        base.feedback().scale(0.9992.into()),
        base.input_gains().to_vec(),
        base.output_gains().to_vec(),
        base.direct_gain(),
    )
    .unwrap();
    run(&sys, "lossy");
}

fn run(sys: &FdnSystem, label: &str) {
    let order = sys.order();
    let config = EaiConfig {
        max_full_iterations: 100,
        ..EaiConfig::for_order(order)
    };
    let t = Instant::now();
    let (poles, stats) = solve(sys, &config).expect("solve");
    let t_solve = t.elapsed().as_secs_f64();
    assert!(poles.all_converged(), "unconverged: {}", poles.unconverged_count());
    let t = Instant::now();
    let dec = residues(sys, &poles).expect("residues");
    let t_res = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let err = verification_error(sys, &dec, 2 * order);
    let t_ver = t.elapsed().as_secs_f64();
    println!(
        "{label} order {order}: err {err:.3e} (solve {t_solve:.2}s iters {} avg {:.2}, residues {t_res:.2}s, verify {t_ver:.2}s)",
        stats.full_iterations, stats.average_iterations
    );
}
