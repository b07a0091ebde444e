//! FDN system description files.
//!
//! JSON with the shape
//!
//! ```json
//! {
//!   "size": 8,
//!   "delays": [2300, 499, 1255, 866, 729, 964, 1363, 1491],
//!   "feedback": "random_orthogonal",
//!   "seed": 3,
//!   "input_gains": [1, 1, 1, 1, 1, 1, 1, 1],
//!   "output_gains": [1, 1, 1, 1, 1, 1, 1, 1],
//!   "direct_gain": 0,
//!   "filters": { "t60_dc": 2.0, "t60_ny": 0.4, "fs": 48000,
//!                "mode": "delay_proportional" }
//! }
//! ```
//!
//! `feedback` is either the string `"random_orthogonal"` (drawn from
//! `seed`, overridable by `--seed`) or a row-major `size × size` array.
//! Scalars are bare reals or `[re, im]` pairs. Gains default to all ones
//! and `direct_gain` to zero. `filters` is either a decay target as
//! above (`mode` defaults to `delay_proportional`; the alternative is
//! `{"average_delay": 1074}`) or an explicit per-line list
//! `[{"gain": g, "pole": p}, ...]`.

use std::fs;
use std::path::Path;

use fdn_modal_core::analysis::random_orthogonal;
use fdn_modal_core::attenuation::{design_one_pole, AttenuationMode, AttenuationSpec, OnePoleFilter};
use fdn_modal_core::fdn::FdnSystem;
use fdn_modal_core::linalg::ComplexMatrix;
use fdn_modal_core::Complex64;
use serde::Deserialize;

use crate::Failure;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemJson {
    size: usize,
    delays: Vec<usize>,
    feedback: FeedbackJson,
    seed: Option<u64>,
    input_gains: Option<Vec<ScalarJson>>,
    output_gains: Option<Vec<ScalarJson>>,
    direct_gain: Option<ScalarJson>,
    filters: Option<FiltersJson>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum FeedbackJson {
    Named(String),
    Rows(Vec<Vec<ScalarJson>>),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
enum ScalarJson {
    Real(f64),
    Pair([f64; 2]),
}

impl From<ScalarJson> for Complex64 {
    fn from(s: ScalarJson) -> Complex64 {
        match s {
            ScalarJson::Real(re) => Complex64::new(re, 0.0),
            ScalarJson::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum FiltersJson {
    Target(TargetJson),
    PerLine(Vec<LineFilterJson>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetJson {
    t60_dc: f64,
    t60_ny: f64,
    fs: f64,
    mode: Option<ModeJson>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ModeJson {
    Named(String),
    Average { average_delay: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineFilterJson {
    gain: f64,
    pole: f64,
}

/// A parsed system plus the seed that materialized it (present exactly
/// when the feedback matrix was drawn rather than listed).
pub struct LoadedSystem {
    pub system: FdnSystem,
    pub seed: Option<u64>,
}

/// Reads and materializes a system file. `seed_override` replaces the
/// file's `seed`; a missing seed for a random matrix is drawn from OS
/// entropy so the run stays reproducible through the manifest.
pub fn load_system(path: &Path, seed_override: Option<u64>) -> Result<LoadedSystem, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
    let parsed: SystemJson = serde_json::from_str(&text)
        .map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
    build(parsed, seed_override)
        .map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))
}

fn build(json: SystemJson, seed_override: Option<u64>) -> Result<LoadedSystem, String> {
    let n = json.size;
    if json.delays.len() != n {
        return Err(format!(
            "size is {n} but delays lists {} entries",
            json.delays.len()
        ));
    }

    let mut seed = None;
    let feedback = match json.feedback {
        FeedbackJson::Named(name) if name == "random_orthogonal" => {
            let s = seed_override
                .or(json.seed)
                .unwrap_or_else(rand::random::<u64>);
            seed = Some(s);
            random_orthogonal(n, s)
        }
        FeedbackJson::Named(name) => {
            return Err(format!(
                "unknown feedback \"{name}\" (expected \"random_orthogonal\" or a matrix)"
            ));
        }
        FeedbackJson::Rows(rows) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(format!("feedback must be a {n}x{n} matrix"));
            }
            let mut m = ComplexMatrix::zeros(n, n);
            for (i, row) in rows.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    m[(i, j)] = v.into();
                }
            }
            m
        }
    };

    let gains = |g: Option<Vec<ScalarJson>>, what: &str| -> Result<Vec<Complex64>, String> {
        match g {
            None => Ok(vec![Complex64::ONE; n]),
            Some(v) if v.len() == n => Ok(v.into_iter().map(Complex64::from).collect()),
            Some(v) => Err(format!("{what} lists {} entries, expected {n}", v.len())),
        }
    };
    let input_gains = gains(json.input_gains, "input_gains")?;
    let output_gains = gains(json.output_gains, "output_gains")?;
    let direct_gain = json.direct_gain.map_or(Complex64::ZERO, Complex64::from);

    let filters = match json.filters {
        None => None,
        Some(FiltersJson::Target(t)) => {
            let mode = match t.mode {
                None => AttenuationMode::DelayProportional,
                Some(ModeJson::Named(name)) if name == "delay_proportional" => {
                    AttenuationMode::DelayProportional
                }
                Some(ModeJson::Named(name)) => {
                    return Err(format!(
                        "unknown filter mode \"{name}\" (expected \"delay_proportional\" \
                         or {{\"average_delay\": samples}})"
                    ));
                }
                Some(ModeJson::Average { average_delay }) => {
                    AttenuationMode::AverageDelay(average_delay)
                }
            };
            if !(t.t60_dc > 0.0 && t.t60_ny > 0.0 && t.fs > 0.0) {
                return Err("filter t60_dc, t60_ny and fs must be positive".into());
            }
            let spec = AttenuationSpec {
                t60_dc: t.t60_dc,
                t60_nyquist: t.t60_ny,
                sample_rate: t.fs,
                mode,
            };
            Some(
                json.delays
                    .iter()
                    .map(|&m| design_one_pole(&spec, m))
                    .collect::<Vec<_>>(),
            )
        }
        Some(FiltersJson::PerLine(list)) => {
            if list.len() != n {
                return Err(format!("filters lists {} entries, expected {n}", list.len()));
            }
            let mut filters = Vec::with_capacity(n);
            for (i, f) in list.iter().enumerate() {
                filters.push(
                    OnePoleFilter::new(f.gain, f.pole)
                        .map_err(|e| format!("filter {i}: {e}"))?,
                );
            }
            Some(filters)
        }
    };

    let system = match filters {
        None => FdnSystem::new(json.delays, feedback, input_gains, output_gains, direct_gain),
        Some(filters) => FdnSystem::with_filters(
            json.delays,
            feedback,
            input_gains,
            output_gains,
            direct_gain,
            filters,
        ),
    }
    .map_err(|e| format!("{e}"))?;

    Ok(LoadedSystem { system, seed })
}
