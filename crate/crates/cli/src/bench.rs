//! `bench`: wall-clock comparison of the solver methods over a sweep of
//! system orders, on random orthogonal FDNs with near-equal line lengths.

use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use fdn_modal_core::analysis::{derive_seed, match_pole_sets, oracle_poles, random_lossless_fdn};
use fdn_modal_core::solver::{solve, DeflationStrategy};

use crate::manifest::{manifest_path, tool_version, write_manifest, RunManifest};
use crate::tables::{write_bench, BenchRow};
use crate::{Failure, SolverFlags};

#[derive(Args)]
pub struct BenchArgs {
    /// Target system orders (sum of delays), e.g. --orders 200,1000,10000.
    #[arg(long, required = true, value_delimiter = ',')]
    pub orders: Vec<usize>,
    /// Delay lines per system.
    #[arg(long, default_value_t = 8)]
    pub size: usize,
    /// Skip the exact-deflation run above this order (it is quadratic).
    #[arg(long)]
    pub skip_exact_above: Option<usize>,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// Master seed for the benchmark systems.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Timing CSV destination.
    #[arg(long, default_value = "bench.csv")]
    pub out: PathBuf,
}

pub fn run(args: BenchArgs) -> Result<(), Failure> {
    let started = Instant::now();
    if args.size == 0 {
        return Err(Failure::Parse("need size ≥ 1".into()));
    }
    let mut rows = Vec::new();
    for (idx, &target) in args.orders.iter().enumerate() {
        if target < 2 * args.size {
            return Err(Failure::Parse(format!(
                "order {target} is too small for {} lines",
                args.size
            )));
        }
        let per_line = target as f64 / args.size as f64;
        let lo = ((0.9 * per_line).round() as usize).max(1);
        let hi = ((1.1 * per_line).round() as usize).max(lo);
        let sys = random_lossless_fdn(args.size, lo, hi, derive_seed(args.seed, idx as u64))
            .map_err(|e| Failure::Parse(format!("order {target}: {e}")))?;
        let order = sys.order();
        let config = args.solver.resolve(order)?;

        let mut approx_poles = None;
        for (method, strategy) in [
            ("eai_approx", DeflationStrategy::Approximate),
            ("eai_exact", DeflationStrategy::Exact),
        ] {
            if strategy == DeflationStrategy::Exact {
                if let Some(cap) = args.skip_exact_above {
                    if order > cap {
                        println!("order {order}: skipping {method} (above --skip-exact-above)");
                        continue;
                    }
                }
            }
            let mut config = config.clone();
            config.deflation = strategy;
            let t = Instant::now();
            let (poles, stats) = solve(&sys, &config).map_err(|e| Failure::Parse(format!("{e}")))?;
            let seconds = t.elapsed().as_secs_f64();
            if poles.unconverged_count() > 0 {
                eprintln!(
                    "warning: order {order} {method}: {} poles unconverged \
                     (timings still recorded; raise --max-iters)",
                    poles.unconverged_count(),
                );
            }
            println!(
                "order {order} {method:>10}: {seconds:.3} s, {} full iterations, \
                 exact fraction {:.4}",
                stats.full_iterations, stats.exact_deflation_fraction,
            );
            if strategy == DeflationStrategy::Approximate {
                approx_poles = Some(poles.poles.clone());
            } else if let (Some(a), true) = (&approx_poles, poles.unconverged_count() == 0) {
                if let Ok(m) = match_pole_sets(a, &poles.poles) {
                    println!("order {order}: exact vs approx max distance {:.3e}", m.max_distance);
                }
            }
            rows.push(BenchRow {
                order,
                method,
                seconds,
                full_iterations: stats.full_iterations,
                exact_deflation_fraction: stats.exact_deflation_fraction,
            });
        }

        // The dense linearization eigensolver doubles as a baseline at
        // oracle scale.
        let t = Instant::now();
        let oracle = oracle_poles(&sys);
        let seconds = t.elapsed().as_secs_f64();
        match oracle {
            Ok(reference) => {
                println!("order {order} {:>10}: {seconds:.3} s", "oracle");
                if let Some(a) = &approx_poles {
                    if let Ok(m) = match_pole_sets(a, &reference) {
                        println!(
                            "order {order}: oracle vs approx max distance {:.3e}",
                            m.max_distance,
                        );
                    }
                }
                rows.push(BenchRow {
                    order,
                    method: "oracle",
                    seconds,
                    full_iterations: 0,
                    exact_deflation_fraction: 0.0,
                });
            }
            Err(_) => println!("order {order}: oracle skipped (beyond dense eigensolver cap)"),
        }
    }

    write_bench(&args.out, &rows).map_err(Failure::Io)?;
    let manifest = RunManifest {
        tool: tool_version(),
        command: std::env::args().collect(),
        seed: Some(args.seed),
        input: None,
        config: serde_json::json!({
            "orders": args.orders,
            "size": args.size,
            "skip_exact_above": args.skip_exact_above,
            "max_iters": args.solver.max_iters,
        }),
        outputs: vec![args.out.display().to_string()],
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    let mpath = manifest_path(&args.out);
    write_manifest(&mpath, &manifest).map_err(Failure::Io)?;
    println!("wrote {} and {}", args.out.display(), mpath.display());
    Ok(())
}
