//! `decompose`: solve for all poles, recover residues, write the modes
//! CSV (and optional impulse-response artifacts), report solver counters.

use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use fdn_modal_core::modal::{residues, synthesize, verification_error};
use fdn_modal_core::solver::solve;

use crate::manifest::{digest_file, manifest_path, tool_version, write_manifest, RunManifest};
use crate::system_file::load_system;
use crate::tables::write_modes;
use crate::wav::write_wav;
use crate::{default_out, Failure, SolverFlags};

#[derive(Args)]
pub struct DecomposeArgs {
    /// System description JSON.
    pub system: PathBuf,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// Modes CSV destination (default: <system stem>.modes.csv).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Resynthesize and compare against the time-domain recursion.
    #[arg(long)]
    pub verify: bool,
    /// Sample count for --verify/--impulse/--wav (default 2·order).
    #[arg(long)]
    pub length: Option<usize>,
    /// Largest acceptable verification error under --verify.
    #[arg(long, default_value_t = 1e-10)]
    pub threshold: f64,
    /// Write the resynthesized impulse response as index,value CSV.
    #[arg(long)]
    pub impulse: Option<PathBuf>,
    /// Write the resynthesized impulse response as float WAV.
    #[arg(long)]
    pub wav: Option<PathBuf>,
    /// WAV sample rate in Hz.
    #[arg(long, default_value_t = 48000)]
    pub sample_rate: u32,
    /// Seed override for "random_orthogonal" feedback.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(args: DecomposeArgs) -> Result<(), Failure> {
    let started = Instant::now();
    let loaded = load_system(&args.system, args.seed)?;
    let sys = &loaded.system;
    let order = sys.order();
    let config = args.solver.resolve(order)?;

    let (poles, stats) = solve(sys, &config).map_err(|e| Failure::Parse(format!("{e}")))?;
    println!(
        "order {order}: {}/{order} poles converged in {} full iterations \
         ({:.2} steps per pole)",
        order - poles.unconverged_count(),
        stats.full_iterations,
        stats.average_iterations,
    );
    println!(
        "exact deflation fraction {:.4} ({}/{} steps)",
        stats.exact_deflation_fraction, stats.exact_deflation_steps, stats.total_steps,
    );
    if poles.unconverged_count() > 0 {
        return Err(Failure::NonConvergence(format!(
            "{} of {order} poles unconverged after {} sweeps (raise --max-iters?)",
            poles.unconverged_count(),
            config.max_full_iterations,
        )));
    }

    let dec = residues(sys, &poles).map_err(|e| Failure::NonConvergence(format!("{e}")))?;

    let out = args.out.unwrap_or_else(|| default_out(&args.system, "modes"));
    write_modes(&out, &dec, &poles).map_err(Failure::Io)?;
    let mut outputs = vec![out.display().to_string()];

    let length = args.length.unwrap_or(2 * order);
    let mut verify_err = None;
    if args.verify {
        let err = verification_error(sys, &dec, length);
        verify_err = Some(err);
        let verdict = if err < args.threshold { "pass" } else { "FAIL" };
        println!("verification err {err:.3e} over {length} samples ({verdict} at {:.1e})",
            args.threshold);
    }
    if args.impulse.is_some() || args.wav.is_some() {
        let response = synthesize(&dec, length);
        if let Some(path) = &args.impulse {
            crate::tables::write_impulse(path, &response).map_err(Failure::Io)?;
            outputs.push(path.display().to_string());
        }
        if let Some(path) = &args.wav {
            let real: Vec<f64> = response.iter().map(|s| s.re).collect();
            write_wav(path, &real, args.sample_rate).map_err(Failure::Io)?;
            outputs.push(path.display().to_string());
        }
    }

    let mut config_json = SolverFlags::manifest_config(&config);
    config_json["length"] = length.into();
    config_json["threshold"] = args.threshold.into();
    config_json["sample_rate"] = args.sample_rate.into();
    let manifest = RunManifest {
        tool: tool_version(),
        command: std::env::args().collect(),
        seed: loaded.seed,
        input: Some(digest_file(&args.system).map_err(Failure::Io)?),
        config: config_json,
        outputs: outputs.clone(),
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    let mpath = manifest_path(&out);
    write_manifest(&mpath, &manifest).map_err(Failure::Io)?;
    if let Some(seed) = loaded.seed {
        println!("seed {seed}");
    }
    println!("wrote {} and {}", outputs.join(", "), mpath.display());

    match verify_err {
        Some(err) if err >= args.threshold => Err(Failure::Verification(format!(
            "verification err {err:.3e} is not below {:.1e}",
            args.threshold
        ))),
        _ => Ok(()),
    }
}
