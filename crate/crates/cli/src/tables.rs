//! CSV writers and readers for the tool's artifacts. All floats are
//! written with 17 significant digits so every double round-trips
//! exactly; fields never need quoting.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use fdn_modal_core::analysis::{ClusterHistogram, DbHistogram};
use fdn_modal_core::modal::{ModalDecomposition, Mode};
use fdn_modal_core::solver::PoleSet;
use fdn_modal_core::Complex64;

/// Shortest exact decimal form: 17 significant digits.
pub fn full(x: f64) -> String {
    format!("{x:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>, String> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<(), String> {
    w.flush()
        .map_err(|e| format!("cannot write {}: {e}", path.display()))
}

pub const MODES_HEADER: &str = "re_lambda,im_lambda,abs_lambda,angle_lambda,\
re_rho,im_rho,re_rho_bar,im_rho_bar,iterations,status";

/// One mode per row, index-aligned with the pole set.
pub fn write_modes(path: &Path, dec: &ModalDecomposition, poles: &PoleSet) -> Result<(), String> {
    let mut w = create(path)?;
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "{MODES_HEADER}")?;
        for (i, m) in dec.modes.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                full(m.pole.re),
                full(m.pole.im),
                full(m.pole.norm()),
                full(m.pole.arg()),
                full(m.residue.re),
                full(m.residue.im),
                full(m.undriven_residue.re),
                full(m.undriven_residue.im),
                poles.iterations[i],
                poles.status[i].label(),
            )?;
        }
        Ok(())
    };
    emit().map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    finish(w, path)
}

/// A modes file read back: enough to resynthesize and to report status.
pub struct ModesFile {
    pub modes: Vec<Mode>,
    pub status: Vec<String>,
}

pub fn read_modes(path: &Path) -> Result<ModesFile, crate::Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| crate::Failure::Io(format!("cannot read {}: {e}", path.display())))?;
    parse_modes(&text, path).map_err(crate::Failure::Parse)
}

fn parse_modes(text: &str, path: &Path) -> Result<ModesFile, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == MODES_HEADER => {}
        _ => return Err(format!("{}: not a modes file (bad header)", path.display())),
    }
    let mut modes = Vec::new();
    let mut status = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(format!(
                "{}:{}: expected 10 fields, found {}",
                path.display(),
                lineno + 2,
                fields.len()
            ));
        }
        let num = |k: usize| -> Result<f64, String> {
            fields[k].parse().map_err(|e| {
                format!("{}:{}: field {}: {e}", path.display(), lineno + 2, k + 1)
            })
        };
        let pole = Complex64::new(num(0)?, num(1)?);
        let residue = Complex64::new(num(4)?, num(5)?);
        let undriven = Complex64::new(num(6)?, num(7)?);
        let drive = if undriven == Complex64::ZERO {
            Complex64::ZERO
        } else {
            residue / undriven
        };
        modes.push(Mode {
            pole,
            residue,
            undriven_residue: undriven,
            drive,
        });
        status.push(fields[9].to_string());
    }
    Ok(ModesFile { modes, status })
}

/// `index,value` rows; the real part of each sample (imaginary parts of
/// real systems cancel to rounding noise).
pub fn write_impulse(path: &Path, samples: &[Complex64]) -> Result<(), String> {
    let mut w = create(path)?;
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "index,value")?;
        for (n, s) in samples.iter().enumerate() {
            writeln!(w, "{n},{}", full(s.re))?;
        }
        Ok(())
    };
    emit().map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    finish(w, path)
}

pub fn write_db_histogram(path: &Path, hist: &DbHistogram) -> Result<(), String> {
    let mut w = create(path)?;
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "bin_lower,bin_upper,count,probability")?;
        for (i, &count) in hist.counts.iter().enumerate() {
            writeln!(
                w,
                "{},{},{count},{}",
                full(hist.bin_lower(i)),
                full(hist.bin_upper(i)),
                full(hist.probability(i)),
            )?;
        }
        Ok(())
    };
    emit().map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    finish(w, path)
}

/// One labeled spectrum per row, cluster-number probabilities κ = 0..≥4.
pub fn write_cluster_table(
    path: &Path,
    rows: &[(&str, ClusterHistogram)],
) -> Result<(), String> {
    let mut w = create(path)?;
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "spectrum,p0,p1,p2,p3,p4_plus,probes,trials")?;
        for (label, h) in rows {
            writeln!(
                w,
                "{label},{},{},{},{},{},{},{}",
                full(h.probabilities[0]),
                full(h.probabilities[1]),
                full(h.probabilities[2]),
                full(h.probabilities[3]),
                full(h.probabilities[4]),
                h.probes,
                h.trials,
            )?;
        }
        Ok(())
    };
    emit().map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    finish(w, path)
}

pub struct BenchRow {
    pub order: usize,
    pub method: &'static str,
    pub seconds: f64,
    pub full_iterations: u32,
    pub exact_deflation_fraction: f64,
}

pub fn write_bench(path: &Path, rows: &[BenchRow]) -> Result<(), String> {
    let mut w = create(path)?;
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "order,method,seconds,full_iterations,exact_deflation_fraction")?;
        for r in rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.order,
                r.method,
                full(r.seconds),
                r.full_iterations,
                full(r.exact_deflation_fraction),
            )?;
        }
        Ok(())
    };
    emit().map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    finish(w, path)
}

/// Per-pole containment against the magnitude bounds.
pub struct BoundsRow {
    pub pole: Complex64,
    pub lower: f64,
    pub upper: f64,
    pub inside: bool,
}

pub fn write_bounds(path: &Path, rows: &[BoundsRow]) -> Result<(), String> {
    let mut w = create(path)?;
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "re_lambda,im_lambda,abs_lambda,angle_lambda,lower,upper,inside")?;
        for r in rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                full(r.pole.re),
                full(r.pole.im),
                full(r.pole.norm()),
                full(r.pole.arg()),
                full(r.lower),
                full(r.upper),
                r.inside,
            )?;
        }
        Ok(())
    };
    emit().map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    finish(w, path)
}
