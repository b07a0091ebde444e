//! `verify`: resynthesize a modes CSV and compare with the system's
//! time-domain recursion sample by sample.

use std::path::PathBuf;

use clap::Args;
use fdn_modal_core::modal::{verification_error, ModalDecomposition};

use crate::system_file::load_system;
use crate::tables::read_modes;
use crate::Failure;

#[derive(Args)]
pub struct VerifyArgs {
    /// System description JSON.
    pub system: PathBuf,
    /// Modes CSV produced by `decompose`.
    pub modes: PathBuf,
    /// Sample count to compare (default 2·order).
    #[arg(long)]
    pub length: Option<usize>,
    /// Largest acceptable maximum error.
    #[arg(long, default_value_t = 1e-10)]
    pub threshold: f64,
    /// Seed override for "random_orthogonal" feedback.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(args: VerifyArgs) -> Result<(), Failure> {
    let loaded = load_system(&args.system, args.seed)?;
    let sys = &loaded.system;
    let file = read_modes(&args.modes)?;
    if file.modes.len() != sys.order() {
        return Err(Failure::Parse(format!(
            "{}: {} modes for a system of order {}",
            args.modes.display(),
            file.modes.len(),
            sys.order(),
        )));
    }
    let unconverged = file.status.iter().filter(|s| *s == "max_iter").count();
    if unconverged > 0 {
        println!(
            "note: {unconverged} modes in {} are flagged max_iter",
            args.modes.display(),
        );
    }
    let dec = ModalDecomposition {
        direct_gain: sys.direct_gain(),
        modes: file.modes,
    };
    let length = args.length.unwrap_or(2 * sys.order());
    let err = verification_error(sys, &dec, length);
    let pass = err < args.threshold;
    println!(
        "verification err {err:.3e} over {length} samples ({} at {:.1e})",
        if pass { "pass" } else { "FAIL" },
        args.threshold,
    );
    if pass {
        Ok(())
    } else {
        Err(Failure::Verification(format!(
            "verification err {err:.3e} is not below {:.1e}",
            args.threshold
        )))
    }
}
