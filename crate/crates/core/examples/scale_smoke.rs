//! Quick scaling probe: solve a random orthogonal 8-FDN at a few orders
//! and print iteration counts and wall time per deflation strategy.

use std::time::Instant;

use fdn_modal_core::analysis::random_lossless_fdn;
use fdn_modal_core::solver::{solve, DeflationStrategy, EaiConfig};

fn main() {
    let sizes = [1_000usize, 10_000, 100_000];
    for &order in &sizes {
        let per_line = order / 8;
        let sys = random_lossless_fdn(8, per_line - 20, per_line + 20, 7 + order as u64)
            .expect("valid system");
        let order = sys.order();
        for strategy in [DeflationStrategy::Approximate, DeflationStrategy::Exact] {
            // The quadratic exact sum dominates past a few ten thousand
            // poles; skip it there to keep the probe quick.
            if strategy == DeflationStrategy::Exact && order > 20_000 {
                continue;
            }
            let config = EaiConfig {
                deflation: strategy,
                ..EaiConfig::for_order(order)
            };
            let t = Instant::now();
            let (poles, stats) = solve(&sys, &config).expect("solve");
            let dt = t.elapsed().as_secs_f64();
            println!(
                "order {:>7} {:?}: {:.2}s, full_iters {}, steps {}, exact_defl {:.4}, unconverged {}",
                order,
                strategy,
                dt,
                stats.full_iterations,
                stats.total_steps,
                stats.exact_deflation_fraction,
                poles.unconverged_count(),
            );
        }
    }
}
