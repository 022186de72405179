//! CSV artifacts, their checksums, and the per-run manifest.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// A versioned CSV layout. Bump `version` whenever `columns` change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schema {
    pub name: &'static str,
    pub version: u32,
    pub columns: &'static [&'static str],
}

impl Schema {
    pub fn id(&self) -> String {
        format!("{}/v{}", self.name, self.version)
    }
}

pub const SPEED_CURVE: Schema = Schema {
    name: "speed_curve",
    version: 1,
    columns: &["zeta", "v"],
};
pub const SIMULATE: Schema = Schema {
    name: "simulate",
    version: 1,
    columns: &[
        "law",
        "lambda",
        "mu",
        "n",
        "jumps_per_particle",
        "warmup",
        "seed",
        "statistic",
        "boundary",
        "v_n",
        "std_error",
        "wall_time",
    ],
};
pub const SIMULATE_SERIES: Schema = Schema {
    name: "simulate_series",
    version: 1,
    columns: &["t", "value"],
};
pub const BRW: Schema = Schema {
    name: "brw",
    version: 1,
    columns: &["t", "population", "leading"],
};
pub const BRW_LEADING_CDF: Schema = Schema {
    name: "brw_leading_cdf",
    version: 1,
    columns: &["x", "probability"],
};
/// Followed by one `q<nu>` column per tracked level.
pub const MFL_QUANTILES: Schema = Schema {
    name: "mfl_quantiles",
    version: 1,
    columns: &["t"],
};
pub const MFL_SNAPSHOTS: Schema = Schema {
    name: "mfl_snapshots",
    version: 1,
    columns: &["t", "x", "f"],
};
pub const TWS: Schema = Schema {
    name: "tws",
    version: 1,
    columns: &["x", "phi", "z"],
};
pub const OPTIMIZE_SWEEP: Schema = Schema {
    name: "optimize_sweep",
    version: 1,
    columns: &["lambda", "mu", "v_star_star"],
};
pub const REPRODUCE_TABLE: Schema = Schema {
    name: "reproduce_table",
    version: 1,
    columns: &[
        "lambda",
        "mu",
        "v_n_sim",
        "v_n_stderr",
        "v_star_star",
        "v_n_paper",
        "v_star_star_paper",
    ],
};

/// Nine significant digits; plain notation in the usual range.
pub fn fmt9(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    if (1e-5..1e16).contains(&rounded.abs()) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputRecord {
    pub path: String,
    pub schema: String,
    pub sha256: String,
}

/// Writes artifacts into one directory and remembers their checksums.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    pub records: Vec<OutputRecord>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            records: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes `rows` under `schema`'s header plus any `extra` columns.
    pub fn csv(
        &mut self,
        file: &str,
        schema: &Schema,
        extra: &[String],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<PathBuf, CliError> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = schema.columns.iter().copied().chain(extra.iter().map(String::as_str)).collect();
        writer.write_record(&header).map_err(csv_error)?;
        for row in rows {
            writer.write_record(&row).map_err(csv_error)?;
        }
        let bytes = writer.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        self.write(file, &schema.id(), &bytes)
    }

    pub fn write(&mut self, file: &str, schema: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(file);
        std::fs::write(&path, bytes)?;
        self.records.push(OutputRecord {
            path: path.display().to_string(),
            schema: schema.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(path)
    }
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Invalid(format!("csv: {e}"))
}

/// One JSON line per run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub config: serde_json::Value,
    pub status: String,
    pub exit_code: i32,
    pub error: Option<String>,
    pub wall_time: f64,
    pub outputs: Vec<OutputRecord>,
}

impl RunManifest {
    pub fn append(&self, path: &Path) -> Result<(), CliError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        let line = serde_json::to_string(self).map_err(|e| CliError::Invalid(e.to_string()))?;
        writeln!(file, "{line}")?;
        Ok(())
    }
}
