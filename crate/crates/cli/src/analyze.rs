//! `analyze`: statistical studies. Cluster numbers of pole angles over
//! a random lossless ensemble, residue-magnitude histograms for one
//! system, and per-pole containment against the magnitude bounds.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Subcommand, ValueEnum};
use fdn_modal_core::analysis::{
    equidistributed_cluster_histogram, lossless_cluster_ensemble, poisson_cluster_reference,
    residue_histogram, uniform_random_cluster_histogram, ClusterHistogram, LosslessEnsembleSpec,
    ResidueKind,
};
use fdn_modal_core::attenuation::magnitude_bounds;
use fdn_modal_core::modal::{residues, residues_with_drive_maps};
use fdn_modal_core::solver::solve;

use crate::manifest::{digest_file, manifest_path, tool_version, write_manifest, RunManifest};
use crate::system_file::load_system;
use crate::tables::{write_bounds, write_cluster_table, write_db_histogram, BoundsRow};
use crate::{default_out, Failure, SolverFlags};

#[derive(Subcommand)]
pub enum AnalyzeCmd {
    /// Cluster-number statistics of pole angles over a random ensemble.
    Cluster(ClusterArgs),
    /// Residue-magnitude histogram (dB) for one system.
    Residues(ResiduesArgs),
    /// Solve one system and report pole containment in the bounds.
    Bounds(BoundsArgs),
}

pub fn run(cmd: AnalyzeCmd) -> Result<(), Failure> {
    match cmd {
        AnalyzeCmd::Cluster(args) => cluster(args),
        AnalyzeCmd::Residues(args) => residues_cmd(args),
        AnalyzeCmd::Bounds(args) => bounds(args),
    }
}

#[derive(Args)]
pub struct ClusterArgs {
    /// Delay lines per system.
    #[arg(long, default_value_t = 8)]
    pub size: usize,
    /// Smallest per-line delay (samples).
    #[arg(long, default_value_t = 50)]
    pub min_delay: usize,
    /// Largest per-line delay (samples).
    #[arg(long, default_value_t = 1000)]
    pub max_delay: usize,
    /// Systems in the ensemble.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Probe angles per unit of system order.
    #[arg(long, default_value_t = 4)]
    pub probe_factor: usize,
    /// Sweep budget per trial.
    #[arg(long, default_value_t = 200)]
    pub max_iters: u32,
    /// Master seed for the ensemble and the uniform control row.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Table CSV destination.
    #[arg(long, default_value = "cluster.csv")]
    pub out: PathBuf,
}

fn cluster(args: ClusterArgs) -> Result<(), Failure> {
    let started = Instant::now();
    if args.size == 0 || args.min_delay == 0 || args.max_delay < args.min_delay {
        return Err(Failure::Parse(
            "need size ≥ 1 and 1 ≤ min-delay ≤ max-delay".into(),
        ));
    }
    if args.trials == 0 || args.probe_factor == 0 {
        return Err(Failure::Parse("need trials ≥ 1 and probe-factor ≥ 1".into()));
    }

    // Synthetic rows use the ensemble's expected order. The
    // equidistributed control probes once per angle: those windows
    // center on the grid and their boundaries stay half a spacing away
    // from every angle, so the count is exactly one everywhere. Offset
    // probe grids put window edges onto the angles themselves, where
    // float rounding turns the ideal [0, 1, 0, 0, 0] row into noise.
    let order = args.size * (args.min_delay + args.max_delay) / 2;
    let probes = args.probe_factor * order;
    let equi = equidistributed_cluster_histogram(order, order);
    let uniform = uniform_random_cluster_histogram(order, probes, args.trials, args.seed);
    let spec = LosslessEnsembleSpec {
        size: args.size,
        delay_min: args.min_delay,
        delay_max: args.max_delay,
        trials: args.trials,
        probe_factor: args.probe_factor,
        sweep_cap: Some(args.max_iters),
    };
    let ensemble = lossless_cluster_ensemble(&spec, args.seed)
        .map_err(|e| Failure::NonConvergence(format!("ensemble: {e}")))?;
    let poisson = ClusterHistogram {
        probabilities: poisson_cluster_reference(),
        probes: 0,
        trials: 0,
    };

    for (label, h) in [
        ("equidistributed", &equi),
        ("uniform_random", &uniform),
        ("lossless_fdn", &ensemble),
        ("poisson_reference", &poisson),
    ] {
        println!(
            "{label:>18}: [{:.4}, {:.4}, {:.4}, {:.4}, {:.4}]",
            h.probabilities[0],
            h.probabilities[1],
            h.probabilities[2],
            h.probabilities[3],
            h.probabilities[4],
        );
    }
    write_cluster_table(
        &args.out,
        &[
            ("equidistributed", equi),
            ("uniform_random", uniform),
            ("lossless_fdn", ensemble),
            ("poisson_reference", poisson),
        ],
    )
    .map_err(Failure::Io)?;

    let manifest = RunManifest {
        tool: tool_version(),
        command: std::env::args().collect(),
        seed: Some(args.seed),
        input: None,
        config: serde_json::json!({
            "size": args.size,
            "min_delay": args.min_delay,
            "max_delay": args.max_delay,
            "trials": args.trials,
            "probe_factor": args.probe_factor,
            "max_iters": args.max_iters,
        }),
        outputs: vec![args.out.display().to_string()],
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    let mpath = manifest_path(&args.out);
    write_manifest(&mpath, &manifest).map_err(Failure::Io)?;
    println!("wrote {} and {}", args.out.display(), mpath.display());
    Ok(())
}

#[derive(Clone, Copy, ValueEnum)]
pub enum KindArg {
    /// |ρ|: residues under the system's input/output gains.
    Driven,
    /// |1/ρ̄|: inverse undriven residues.
    UndrivenInverse,
    /// All N² drive-map magnitudes per mode.
    DriveMap,
}

#[derive(Args)]
pub struct ResiduesArgs {
    /// System description JSON.
    pub system: PathBuf,
    #[arg(long, value_enum, default_value_t = KindArg::Driven)]
    pub kind: KindArg,
    /// Histogram bin width in dB.
    #[arg(long, default_value_t = 1.0)]
    pub bin_db: f64,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// Histogram CSV destination (default: <system stem>.residues.csv).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed override for "random_orthogonal" feedback.
    #[arg(long)]
    pub seed: Option<u64>,
}

fn residues_cmd(args: ResiduesArgs) -> Result<(), Failure> {
    let started = Instant::now();
    let loaded = load_system(&args.system, args.seed)?;
    let sys = &loaded.system;
    let config = args.solver.resolve(sys.order())?;
    let (poles, _) = solve(sys, &config).map_err(|e| Failure::Parse(format!("{e}")))?;
    if poles.unconverged_count() > 0 {
        return Err(Failure::NonConvergence(format!(
            "{} of {} poles unconverged (raise --max-iters?)",
            poles.unconverged_count(),
            sys.order(),
        )));
    }

    let (kind, kind_name) = match args.kind {
        KindArg::Driven => (ResidueKind::Driven, "driven"),
        KindArg::UndrivenInverse => (ResidueKind::UndrivenInverse, "undriven-inverse"),
        KindArg::DriveMap => (ResidueKind::DriveMap, "drive-map"),
    };
    let nc = |e| Failure::NonConvergence(format!("{e}"));
    let hist = match kind {
        ResidueKind::DriveMap => {
            let (dec, maps) = residues_with_drive_maps(sys, &poles).map_err(nc)?;
            residue_histogram(&dec, kind, Some(&maps), args.bin_db)
        }
        _ => {
            let dec = residues(sys, &poles).map_err(nc)?;
            residue_histogram(&dec, kind, None, args.bin_db)
        }
    }
    .map_err(|e| Failure::Io(format!("histogram: {e}")))?;

    println!(
        "{} magnitudes over [{:.1}, {:.1}] dB in {} bins of {} dB ({} zeros skipped)",
        hist.total(),
        hist.bin_lower(0),
        hist.bin_upper(hist.counts.len() - 1),
        hist.counts.len(),
        hist.bin_width_db,
        hist.skipped_zeros,
    );
    let out = args
        .out
        .unwrap_or_else(|| default_out(&args.system, "residues"));
    write_db_histogram(&out, &hist).map_err(Failure::Io)?;

    let mut config_json = SolverFlags::manifest_config(&config);
    config_json["kind"] = kind_name.into();
    config_json["bin_db"] = args.bin_db.into();
    let manifest = RunManifest {
        tool: tool_version(),
        command: std::env::args().collect(),
        seed: loaded.seed,
        input: Some(digest_file(&args.system).map_err(Failure::Io)?),
        config: config_json,
        outputs: vec![out.display().to_string()],
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    let mpath = manifest_path(&out);
    write_manifest(&mpath, &manifest).map_err(Failure::Io)?;
    println!("wrote {} and {}", out.display(), mpath.display());
    Ok(())
}

#[derive(Args)]
pub struct BoundsArgs {
    /// System description JSON.
    pub system: PathBuf,
    /// Containment slack on the bound radii.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// Report CSV destination (default: <system stem>.bounds.csv).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed override for "random_orthogonal" feedback.
    #[arg(long)]
    pub seed: Option<u64>,
}

fn bounds(args: BoundsArgs) -> Result<(), Failure> {
    let started = Instant::now();
    let loaded = load_system(&args.system, args.seed)?;
    let sys = &loaded.system;
    let config = args.solver.resolve(sys.order())?;
    let (poles, _) = solve(sys, &config).map_err(|e| Failure::Parse(format!("{e}")))?;
    if poles.unconverged_count() > 0 {
        return Err(Failure::NonConvergence(format!(
            "{} of {} poles unconverged (raise --max-iters?)",
            poles.unconverged_count(),
            sys.order(),
        )));
    }
    let bounds = magnitude_bounds(sys).map_err(|e| Failure::Parse(format!("bounds: {e}")))?;

    let mut rows = Vec::with_capacity(poles.poles.len());
    let mut outside = 0usize;
    for &pole in &poles.poles {
        let (lower, upper) = bounds.radii_at(pole.arg());
        let inside = bounds.contains(pole, args.tol);
        outside += usize::from(!inside);
        rows.push(BoundsRow {
            pole,
            lower,
            upper,
            inside,
        });
    }
    println!(
        "{} of {} poles within bounds ± {:.1e}",
        rows.len() - outside,
        rows.len(),
        args.tol,
    );
    let out = args
        .out
        .unwrap_or_else(|| default_out(&args.system, "bounds"));
    write_bounds(&out, &rows).map_err(Failure::Io)?;

    let mut config_json = SolverFlags::manifest_config(&config);
    config_json["tol"] = args.tol.into();
    let manifest = RunManifest {
        tool: tool_version(),
        command: std::env::args().collect(),
        seed: loaded.seed,
        input: Some(digest_file(&args.system).map_err(Failure::Io)?),
        config: config_json,
        outputs: vec![out.display().to_string()],
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    let mpath = manifest_path(&out);
    write_manifest(&mpath, &manifest).map_err(Failure::Io)?;
    println!("wrote {} and {}", out.display(), mpath.display());
    Ok(())
}
