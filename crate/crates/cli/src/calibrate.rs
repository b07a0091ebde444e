//! `calibrate`: estimate the deflation error bound empirically. Probes
//! random systems with the deflation audit enabled, records the largest
//! observed |D − D̃| between the exact sum and the near/far estimate,
//! and recommends that maximum times a safety factor of 10.

use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use fdn_modal_core::analysis::{derive_seed, random_lossless_fdn};
use fdn_modal_core::solver::solve_observed;

use crate::manifest::{manifest_path, tool_version, write_manifest, RunManifest};
use crate::tables::full;
use crate::{Failure, SolverFlags};

const SAFETY_FACTOR: f64 = 10.0;

#[derive(Args)]
pub struct CalibrateArgs {
    /// Delay lines per probed system.
    #[arg(long, default_value_t = 8)]
    pub size: usize,
    /// Smallest per-line delay (samples).
    #[arg(long, default_value_t = 50)]
    pub min_delay: usize,
    /// Largest per-line delay (samples).
    #[arg(long, default_value_t = 1000)]
    pub max_delay: usize,
    /// Number of random systems to probe.
    #[arg(long, default_value_t = 10)]
    pub systems: usize,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// Master seed for the probe systems.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Optional per-system CSV report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: CalibrateArgs) -> Result<(), Failure> {
    let started = Instant::now();
    if args.systems == 0 || args.size == 0 || args.min_delay == 0 || args.max_delay < args.min_delay
    {
        return Err(Failure::Parse(
            "need systems ≥ 1, size ≥ 1 and 1 ≤ min-delay ≤ max-delay".into(),
        ));
    }

    let mut overall: f64 = 0.0;
    let mut report = Vec::new();
    for k in 0..args.systems {
        let sys = random_lossless_fdn(
            args.size,
            args.min_delay,
            args.max_delay,
            derive_seed(args.seed, k as u64),
        )
        .map_err(|e| Failure::Parse(format!("system {k}: {e}")))?;
        let order = sys.order();
        let config = args.solver.resolve(order)?;

        let mut max_dev: f64 = 0.0;
        let mut audited = 0u64;
        let mut observer = |rec: &fdn_modal_core::solver::StepRecord| {
            if let (Some(approx), Some(exact)) = (rec.deflation_approx, rec.deflation_exact) {
                max_dev = max_dev.max((exact - approx).norm());
                audited += 1;
            }
        };
        let (poles, _) = solve_observed(&sys, &config, true, &mut observer)
            .map_err(|e| Failure::Parse(format!("system {k}: {e}")))?;
        if poles.unconverged_count() > 0 {
            return Err(Failure::NonConvergence(format!(
                "system {k}: {} of {order} poles unconverged (raise --max-iters?)",
                poles.unconverged_count(),
            )));
        }
        println!("system {k}: order {order}, max |D - D~| {max_dev:.6e} over {audited} steps");
        overall = overall.max(max_dev);
        report.push((k, order, max_dev));
    }

    let recommended = SAFETY_FACTOR * overall;
    println!("largest observed deviation {overall:.6e}");
    println!("recommended --defl-err {recommended:.6e} (observed max x {SAFETY_FACTOR})");

    let mut outputs = Vec::new();
    if let Some(out) = &args.out {
        let mut text = String::from("system,order,max_abs_deviation\n");
        for (k, order, dev) in &report {
            text.push_str(&format!("{k},{order},{}\n", full(*dev)));
        }
        std::fs::write(out, text)
            .map_err(|e| Failure::Io(format!("cannot write {}: {e}", out.display())))?;
        outputs.push(out.display().to_string());

        let manifest = RunManifest {
            tool: tool_version(),
            command: std::env::args().collect(),
            seed: Some(args.seed),
            input: None,
            config: serde_json::json!({
                "size": args.size,
                "min_delay": args.min_delay,
                "max_delay": args.max_delay,
                "systems": args.systems,
                "max_iters": args.solver.max_iters,
                "recommended_defl_err": recommended,
            }),
            outputs: outputs.clone(),
            wall_seconds: started.elapsed().as_secs_f64(),
        };
        let mpath = manifest_path(out);
        write_manifest(&mpath, &manifest).map_err(Failure::Io)?;
        println!("wrote {} and {}", out.display(), mpath.display());
    }
    Ok(())
}
