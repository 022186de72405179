//! Flat key-value run configuration. Command-line flags override file keys.

use std::path::Path;

use jumpsync::{BoundarySpec, JumpLaw};
use jumpsync::particles::SpeedStatistic;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Every key a config file may set. Subcommands read the keys they use.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(alias = "law")]
    pub dist: Option<LawSpec>,
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub boundary: Option<String>,
    pub statistic: Option<String>,
    pub jumps_per_particle: Option<u64>,
    pub warmup: Option<f64>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub h: Option<f64>,
    pub window: Option<[f64; 2]>,
    pub initial: Option<String>,
    pub replicas: Option<usize>,
    pub cap: Option<usize>,
    pub sample_interval: Option<f64>,
    pub v: Option<f64>,
    pub kind: Option<String>,
    pub phi0: Option<f64>,
    pub c: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub table: Option<u8>,
    pub out: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Invalid(format!("config {}: {e}", path.display())))
    }
}

/// `dist = "exp" | "uniform02" | "det1" | {type = "empirical", points = [[x, F], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LawSpec {
    Named(String),
    Table {
        #[serde(rename = "type")]
        kind: String,
        points: Vec<[f64; 2]>,
    },
}

impl LawSpec {
    pub fn build(&self) -> Result<JumpLaw, CliError> {
        match self {
            LawSpec::Named(name) => parse_law(name),
            LawSpec::Table { kind, points } if kind == "empirical" => {
                Ok(JumpLaw::empirical(points.iter().map(|p| (p[0], p[1])).collect())?)
            }
            LawSpec::Table { kind, .. } => Err(CliError::Invalid(format!("unknown dist type '{kind}'"))),
        }
    }
}

/// A law name, or `empirical:<csv>` with `x,F` rows.
pub fn parse_law(text: &str) -> Result<JumpLaw, CliError> {
    if let Some(path) = text.strip_prefix("empirical:") {
        let rows = read_pairs(Path::new(path))?;
        return Ok(JumpLaw::empirical(rows)?);
    }
    Ok(text.parse()?)
}

/// Two-column numeric CSV with a header row.
pub fn read_pairs(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        if record.len() != 2 {
            return Err(CliError::Invalid(format!("{}: expected two columns", path.display())));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Invalid(format!("{}: bad number '{s}'", path.display())))
        };
        rows.push((parse(&record[0])?, parse(&record[1])?));
    }
    Ok(rows)
}

fn numbers(text: &str, count: usize, what: &str) -> Result<Vec<f64>, CliError> {
    let values: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Invalid(format!("bad {what} '{text}'")))?;
    if values.len() != count {
        return Err(CliError::Invalid(format!("{what} needs {count} numbers, got '{text}'")));
    }
    Ok(values)
}

/// `none | fixed-right:B | moving-right:B0,V | moving-left:A0,V`.
pub fn parse_boundary(text: &str) -> Result<BoundarySpec, CliError> {
    let (kind, args) = text.split_once(':').unwrap_or((text, ""));
    let spec = match kind {
        "none" => BoundarySpec::None,
        "fixed-right" => BoundarySpec::FixedRight {
            b: numbers(args, 1, "boundary")?[0],
        },
        "moving-right" => {
            let p = numbers(args, 2, "boundary")?;
            BoundarySpec::MovingRight { b0: p[0], v: p[1] }
        }
        "moving-left" => {
            let p = numbers(args, 2, "boundary")?;
            BoundarySpec::MovingLeft { a0: p[0], v: p[1] }
        }
        _ => return Err(CliError::Invalid(format!("unknown boundary '{text}'"))),
    };
    spec.validate()?;
    Ok(spec)
}

/// `mean | leading | quantile:NU`.
pub fn parse_statistic(text: &str) -> Result<SpeedStatistic, CliError> {
    match text.split_once(':') {
        None if text == "mean" => Ok(SpeedStatistic::MeanDisplacement),
        None if text == "leading" => Ok(SpeedStatistic::LeadingParticle),
        Some(("quantile", nu)) => Ok(SpeedStatistic::QuantileDisplacement(numbers(nu, 1, "quantile level")?[0])),
        _ => Err(CliError::Invalid(format!("unknown statistic '{text}'"))),
    }
}

pub fn statistic_name(statistic: &SpeedStatistic) -> String {
    match statistic {
        SpeedStatistic::MeanDisplacement => "mean".into(),
        SpeedStatistic::LeadingParticle => "leading".into(),
        SpeedStatistic::QuantileDisplacement(nu) => format!("quantile:{nu}"),
    }
}

/// Initial mean-field state.
#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    Dirac,
    Logistic { v: f64, c: f64 },
    File(String),
}

/// `dirac | logistic:V,C | file:<csv>`.
pub fn parse_initial(text: &str) -> Result<Initial, CliError> {
    match text.split_once(':') {
        None if text == "dirac" => Ok(Initial::Dirac),
        Some(("logistic", args)) => {
            let p = numbers(args, 2, "logistic initial state")?;
            Ok(Initial::Logistic { v: p[0], c: p[1] })
        }
        Some(("file", path)) if !path.is_empty() => Ok(Initial::File(path.to_string())),
        _ => Err(CliError::Invalid(format!("unknown initial state '{text}'"))),
    }
}

/// `L,R` window bounds.
pub fn parse_window(text: &str) -> Result<[f64; 2], CliError> {
    let p = numbers(text, 2, "window")?;
    Ok([p[0], p[1]])
}
