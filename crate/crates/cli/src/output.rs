//! CSV and JSON emission.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

pub const SIGNIFICANT_DIGITS: usize = 9;

pub const CSV_HEADER: [&str; 16] = [
    "sweep_var",
    "V_M",
    "k",
    "I_AB",
    "chi_DR",
    "chi_RR",
    "R_DR",
    "R_RR",
    "R_DR_clamped",
    "R_RR_clamped",
    "dR_DR",
    "dR_RR",
    "eta_max_DR_dB",
    "eta_max_RR_dB",
    "d_eta_DR_dB",
    "d_eta_RR_dB",
];

/// One row of a sweep. Optional columns that were not requested stay empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub sweep_var: Option<f64>,
    #[serde(rename = "V_M")]
    pub v_m: f64,
    pub k: f64,
    #[serde(rename = "I_AB")]
    pub i_ab: f64,
    #[serde(rename = "chi_DR")]
    pub chi_dr: f64,
    #[serde(rename = "chi_RR")]
    pub chi_rr: f64,
    #[serde(rename = "R_DR")]
    pub r_dr: f64,
    #[serde(rename = "R_RR")]
    pub r_rr: f64,
    #[serde(rename = "R_DR_clamped")]
    pub r_dr_clamped: f64,
    #[serde(rename = "R_RR_clamped")]
    pub r_rr_clamped: f64,
    #[serde(rename = "dR_DR")]
    pub dr_dr: f64,
    #[serde(rename = "dR_RR")]
    pub dr_rr: f64,
    #[serde(rename = "eta_max_DR_dB")]
    pub eta_max_dr_db: Option<f64>,
    #[serde(rename = "eta_max_RR_dB")]
    pub eta_max_rr_db: Option<f64>,
    #[serde(rename = "d_eta_DR_dB")]
    pub d_eta_dr_db: Option<f64>,
    #[serde(rename = "d_eta_RR_dB")]
    pub d_eta_rr_db: Option<f64>,
}

impl SweepRow {
    fn cells(&self) -> [Option<f64>; 16] {
        [
            self.sweep_var,
            Some(self.v_m),
            Some(self.k),
            Some(self.i_ab),
            Some(self.chi_dr),
            Some(self.chi_rr),
            Some(self.r_dr),
            Some(self.r_rr),
            Some(self.r_dr_clamped),
            Some(self.r_rr_clamped),
            Some(self.dr_dr),
            Some(self.dr_rr),
            self.eta_max_dr_db,
            self.eta_max_rr_db,
            self.d_eta_dr_db,
            self.d_eta_rr_db,
        ]
    }
}

/// Rounds to [`SIGNIFICANT_DIGITS`] and prints the result in plain decimal
/// where that stays short, in exponent form otherwise.
pub fn format_number(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v);
    let rounded: f64 = sci.parse().expect("formatted float parses");
    if rounded == 0.0 {
        return "0".into();
    }
    let mag = rounded.abs();
    if (1e-5..1e9).contains(&mag) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

pub fn write_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record(row.cells().iter().map(|c| c.map(format_number).unwrap_or_default()))?;
    }
    w.flush().map_err(|e| CliError::Io("csv".into(), e))?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Path of the metadata file written next to `path`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    path.with_file_name(name)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Io(path.display().to_string(), e))
}
