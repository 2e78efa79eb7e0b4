//! EOF calibration from a directory of SGMF velocity snapshots.

use std::path::Path;

use super::{create_dir, fmt_f64, write_bytes, HarnessError, Result};
use crate::calibration::{compute_eof, encode_field, CalibrationError, EofResult, SnapshotEnsemble};

fn classify(e: CalibrationError) -> HarnessError {
    match e {
        CalibrationError::TooFewSnapshots(n) => {
            HarnessError::Usage(format!("need at least 2 SGMF snapshots, found {n}"))
        }
        CalibrationError::TooManyModes { requested, max } => HarnessError::Usage(format!(
            "requested {requested} modes but the fluctuation matrix has rank at most {max} \
             (snapshots minus one, capped by the degrees of freedom)"
        )),
        CalibrationError::SvdFailed => HarnessError::Numerical(e.to_string()),
        other => HarnessError::Config(format!("cannot read snapshots: {other}")),
    }
}

/// Writes `mode_XXX.sgmf`, `mean.sgmf` and `singular_values.csv` (columns
/// `mode, singular_value, captured_variance`) into `out`.
pub fn run_eof(input: &Path, k: usize, out: &Path) -> Result<EofResult> {
    let ens = SnapshotEnsemble::from_dir(input).map_err(classify)?;
    let eof = compute_eof(&ens, k).map_err(classify)?;
    create_dir(out)?;
    for (i, m) in eof.modes.iter().enumerate() {
        write_bytes(&out.join(format!("mode_{i:03}.sgmf")), &encode_field(&m.to_field()))?;
    }
    write_bytes(&out.join("mean.sgmf"), &encode_field(&eof.mean_field.to_field()))?;
    let mut csv = String::from("mode,singular_value,captured_variance\n");
    for (i, (s, c)) in eof.singular_values.iter().zip(eof.captured_variance()).enumerate() {
        csv.push_str(&format!("{i},{},{}\n", fmt_f64(*s), fmt_f64(c)));
    }
    write_bytes(&out.join("singular_values.csv"), csv.as_bytes())?;
    Ok(eof)
}
