//! Subcommand implementations.

use std::path::Path;
use std::time::Instant;

use clap::Args;
use jumpsync::brw::{leading_cdf, simulate_brw, DEFAULT_CAP};
use jumpsync::mfl::{GridCdf, Mfl, Recenter};
use jumpsync::optimize::{optimize_tradeoff, sweep, SWEEP_POINTS};
use jumpsync::particles::{simulate_speed, SpeedRun, SpeedStatistic};
use jumpsync::speed::{critical, speed_curve};
use jumpsync::tables::table;
use jumpsync::tws::{
    logistic_tws, shoot_original, tail_exponent_of_shape, tws_left_boundary, tws_right_boundary, v_star,
    Classification, WaveSolution,
};
use jumpsync::{BoundarySpec, JumpLaw};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{
    parse_boundary, parse_initial, parse_law, parse_statistic, parse_window, read_pairs, statistic_name, FileConfig,
    Initial,
};
use crate::output::{self, fmt9, Outputs};
use crate::{CliError, Common};

/// Resolved settings of one run: flags first, then the config file, then
/// defaults. Every resolved value is echoed into the manifest.
pub struct Ctx {
    common: Common,
    file: FileConfig,
    echo: Map<String, Value>,
}

impl Ctx {
    pub fn new(common: Common, file: FileConfig) -> Self {
        Ctx {
            common,
            file,
            echo: Map::new(),
        }
    }

    pub fn echo(&self) -> Value {
        Value::Object(self.echo.clone())
    }

    fn record<T: Serialize>(&mut self, key: &str, value: &T) {
        self.echo
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    fn opt<T: Serialize>(&mut self, key: &str, flag: Option<T>, file: Option<T>) -> Option<T> {
        let value = flag.or(file);
        if let Some(v) = &value {
            self.record(key, v);
        }
        value
    }

    fn get<T: Serialize>(&mut self, key: &str, flag: Option<T>, file: Option<T>, default: T) -> T {
        let value = flag.or(file).unwrap_or(default);
        self.record(key, &value);
        value
    }

    fn need<T: Serialize>(&mut self, key: &str, flag: Option<T>, file: Option<T>) -> Result<T, CliError> {
        self.opt(key, flag, file)
            .ok_or_else(|| CliError::Invalid(format!("missing --{} (flag or config key '{key}')", key.replace('_', "-"))))
    }

    fn law(&mut self) -> Result<JumpLaw, CliError> {
        let law = match (&self.common.law, &self.file.dist) {
            (Some(text), _) => parse_law(text)?,
            (None, Some(spec)) => spec.build()?,
            (None, None) => JumpLaw::ExponentialMeanOne,
        };
        let echo = match &law {
            JumpLaw::EmpiricalCdf(e) => json!({ "type": "empirical", "points": e.knots() }),
            other => json!(other.name()),
        };
        self.echo.insert("dist".into(), echo);
        Ok(law)
    }

    fn rates(&mut self) -> Result<(f64, f64), CliError> {
        let lambda = self.need("lambda", self.common.lambda, self.file.lambda)?;
        let mu = self.need("mu", self.common.mu, self.file.mu)?;
        if !(lambda >= 0.0 && lambda.is_finite() && mu > 0.0 && mu.is_finite()) {
            return Err(CliError::Invalid(format!("need lambda >= 0 and mu > 0, got {lambda}, {mu}")));
        }
        Ok((lambda, mu))
    }

    fn boundary(&mut self, flag: Option<String>) -> Result<BoundarySpec, CliError> {
        let text = self.get("boundary", flag, self.file.boundary.clone(), "none".to_string());
        parse_boundary(&text)
    }
}

fn boundary_name(b: &BoundarySpec) -> String {
    match *b {
        BoundarySpec::None => "none".into(),
        BoundarySpec::FixedRight { b } => format!("fixed-right:{b}"),
        BoundarySpec::MovingRight { b0, v } => format!("moving-right:{b0},{v}"),
        BoundarySpec::MovingLeft { a0, v } => format!("moving-left:{a0},{v}"),
    }
}

#[derive(Debug, Args)]
pub struct SpeedArgs {
    #[command(flatten)]
    pub common: Common,
    /// Also write the curve v(zeta) to speed_curve.csv.
    #[arg(long)]
    pub curve: bool,
    #[arg(long)]
    pub zeta_min: Option<f64>,
    #[arg(long)]
    pub zeta_max: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
}

pub fn speed(ctx: &mut Ctx, args: &SpeedArgs, out: &mut Outputs) -> Result<(), CliError> {
    let law = ctx.law()?;
    let (lambda, mu) = ctx.rates()?;
    let c = critical(&law, lambda, mu)?;
    println!("zeta**={} v**={}", fmt9(c.zeta_star), fmt9(c.v_star));
    if c.at_tail_boundary {
        println!("minimum at the tail exponent");
    }
    if !args.curve {
        return Ok(());
    }
    let alpha = law.tail_exponent().finite().unwrap_or(f64::INFINITY);
    let top = alpha.min(4.0 * c.zeta_star);
    let hi = ctx.get("zeta_max", args.zeta_max, None, 0.98 * top);
    let lo = ctx.get("zeta_min", args.zeta_min, None, 0.02 * top);
    ctx.record("points", &args.points);
    if !(lo > 0.0 && hi > lo && args.points >= 2) {
        return Err(CliError::Invalid("curve grid needs 0 < zeta-min < zeta-max and points >= 2".into()));
    }
    let zetas: Vec<f64> = (0..args.points)
        .map(|i| lo + (hi - lo) * i as f64 / (args.points - 1) as f64)
        .collect();
    let curve = speed_curve(&law, lambda, mu, &zetas)?;
    out.csv(
        "speed_curve.csv",
        &output::SPEED_CURVE,
        &[],
        curve.iter().map(|p| vec![fmt9(p.zeta), fmt9(p.speed)]),
    )?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub jumps_per_particle: Option<u64>,
    /// Fraction of events discarded before measuring.
    #[arg(long)]
    pub warmup: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// none, fixed-right:B, moving-right:B0,V or moving-left:A0,V.
    #[arg(long, allow_hyphen_values = true)]
    pub boundary: Option<String>,
    /// mean, leading or quantile:NU.
    #[arg(long)]
    pub statistic: Option<String>,
    /// Also write the tracked statistic at batch boundaries.
    #[arg(long)]
    pub series: bool,
}

pub fn simulate(ctx: &mut Ctx, args: &SimulateArgs, out: &mut Outputs) -> Result<(), CliError> {
    let seed = ctx.need("seed", args.seed, ctx.file.seed)?;
    let law = ctx.law()?;
    let (lambda, mu) = ctx.rates()?;
    let n = ctx.need("n", args.n, ctx.file.n)?;
    let jumps = ctx.get("jumps_per_particle", args.jumps_per_particle, ctx.file.jumps_per_particle, 400);
    let warmup = ctx.get("warmup", args.warmup, ctx.file.warmup, 0.5);
    let statistic_text = ctx.get(
        "statistic",
        args.statistic.clone(),
        ctx.file.statistic.clone(),
        "mean".to_string(),
    );
    let statistic = parse_statistic(&statistic_text)?;
    let boundary = ctx.boundary(args.boundary.clone())?;

    let start = Instant::now();
    let mut series = Vec::new();
    let estimate = SpeedRun::new(law.clone(), lambda, mu, n, seed)
        .jumps_per_particle(jumps)
        .warmup_fraction(warmup)
        .statistic(statistic)
        .boundary(boundary)
        .run_with_series(|t, value| series.push((t, value)))?;
    let wall = start.elapsed().as_secs_f64();

    println!("v_n={} std_error={}", fmt9(estimate.value), fmt9(estimate.std_error));
    let row = vec![
        law.name().to_string(),
        fmt9(lambda),
        fmt9(mu),
        n.to_string(),
        jumps.to_string(),
        fmt9(warmup),
        seed.to_string(),
        statistic_name(&statistic),
        boundary_name(&boundary),
        fmt9(estimate.value),
        fmt9(estimate.std_error),
        fmt9(wall),
    ];
    out.csv("simulate.csv", &output::SIMULATE, &[], [row])?;
    if args.series {
        out.csv(
            "simulate_series.csv",
            &output::SIMULATE_SERIES,
            &[],
            series.iter().map(|(t, v)| vec![fmt9(*t), fmt9(*v)]),
        )?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct BrwArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Population size at which a run stops and is flagged.
    #[arg(long)]
    pub cap: Option<usize>,
    #[arg(long)]
    pub sample_interval: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replicas for the leading-particle distribution; 0 skips it.
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Time of the leading-particle distribution; defaults to t-end.
    #[arg(long)]
    pub cdf_time: Option<f64>,
    #[arg(long, default_value_t = 201)]
    pub grid_points: usize,
}

pub fn brw(ctx: &mut Ctx, args: &BrwArgs, out: &mut Outputs) -> Result<(), CliError> {
    let seed = ctx.need("seed", args.seed, ctx.file.seed)?;
    let law = ctx.law()?;
    let (lambda, mu) = ctx.rates()?;
    let t_end = ctx.get("t_end", args.t_end, ctx.file.t_end, 10.0);
    let cap = ctx.get("cap", args.cap, ctx.file.cap, DEFAULT_CAP);
    let interval = ctx.get("sample_interval", args.sample_interval, ctx.file.sample_interval, 0.5);
    let replicas = ctx.get("replicas", args.replicas, ctx.file.replicas, 1000);

    let traj = simulate_brw(&law, lambda, mu, t_end, cap, interval, seed)?;
    if traj.capped {
        eprintln!("warning: population reached the cap of {cap}; the run stopped early");
    }
    out.csv(
        "brw.csv",
        &output::BRW,
        &[],
        traj.samples
            .iter()
            .map(|s| vec![fmt9(s.time), s.population.to_string(), fmt9(s.leading)]),
    )?;
    if let Some(last) = traj.samples.last() {
        println!("t={} population={} leading={}", fmt9(last.time), last.population, fmt9(last.leading));
    }
    if replicas == 0 {
        return Ok(());
    }

    let t = ctx.get("cdf_time", args.cdf_time, None, t_end);
    ctx.record("grid_points", &args.grid_points);
    if args.grid_points < 2 {
        return Err(CliError::Invalid("grid-points must be >= 2".into()));
    }
    let reach = 2.0 * critical(&law, lambda, mu)?.v_star * t.max(1.0);
    let grid: Vec<f64> = (0..args.grid_points)
        .map(|i| reach * i as f64 / (args.grid_points - 1) as f64)
        .collect();
    let cdf = leading_cdf(&law, lambda, mu, t, replicas, &grid, cap, seed)?;
    if cdf.biased() {
        eprintln!("warning: {} replicas hit the population cap", cdf.capped_replicas);
    }
    out.csv(
        "brw_leading_cdf.csv",
        &output::BRW_LEADING_CDF,
        &[],
        cdf.grid
            .iter()
            .zip(&cdf.probabilities)
            .map(|(x, p)| vec![fmt9(*x), fmt9(*p)]),
    )?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct MflArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, allow_hyphen_values = true)]
    pub boundary: Option<String>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    /// Grid window as L,R.
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<String>,
    /// dirac, logistic:V,C or file:<csv of x,f on a uniform grid>.
    #[arg(long)]
    pub initial: Option<String>,
    /// Comma-separated quantile levels to track.
    #[arg(long, default_value = "0.5")]
    pub track: String,
    #[arg(long, default_value_t = 0.1)]
    pub record_every: f64,
    /// Write the distribution function at every recorded time.
    #[arg(long)]
    pub snapshots: bool,
    /// Keep the window fixed instead of following the front.
    #[arg(long)]
    pub no_recenter: bool,
    /// Allowed shortfall of the right-edge value below 1.
    #[arg(long)]
    pub mass_tolerance: Option<f64>,
}

fn initial_state(initial: &Initial, window: [f64; 2], h: f64) -> Result<GridCdf, CliError> {
    let [left, right] = window;
    match initial {
        Initial::Dirac => Ok(GridCdf::dirac(left, right, h)?),
        Initial::Logistic { v, c } => {
            let wave = logistic_tws(*v, *c)?;
            Ok(GridCdf::from_fn(left, right, h, |x| wave.value_at(x))?)
        }
        Initial::File(path) => grid_from_file(Path::new(path)),
    }
}

fn grid_from_file(path: &Path) -> Result<GridCdf, CliError> {
    let rows = read_pairs(path)?;
    if rows.len() < 2 {
        return Err(CliError::Invalid(format!("{}: need at least two nodes", path.display())));
    }
    let h = rows[1].0 - rows[0].0;
    let uniform = rows
        .windows(2)
        .all(|w| ((w[1].0 - w[0].0) - h).abs() <= 1e-9 * h.abs().max(1.0));
    if !(h > 0.0 && uniform) {
        return Err(CliError::Invalid(format!("{}: x must be increasing and evenly spaced", path.display())));
    }
    let f = GridCdf::new(rows[0].0, h, rows.iter().map(|r| r.1).collect())?;
    f.validate()?;
    Ok(f)
}

pub fn mfl(ctx: &mut Ctx, args: &MflArgs, out: &mut Outputs) -> Result<(), CliError> {
    let law = ctx.law()?;
    let (lambda, mu) = ctx.rates()?;
    let boundary = ctx.boundary(args.boundary.clone())?;
    let t_end = ctx.get("t_end", args.t_end, ctx.file.t_end, 10.0);
    let dt = ctx.get("dt", args.dt, ctx.file.dt, jumpsync::mfl::DEFAULT_DT);
    let h = ctx.get("h", args.h, ctx.file.h, 0.05);
    let window = match &args.window {
        Some(text) => parse_window(text)?,
        None => ctx.file.window.unwrap_or([-20.0, 80.0]),
    };
    ctx.record("window", &window);
    let initial_text = ctx.get("initial", args.initial.clone(), ctx.file.initial.clone(), "dirac".to_string());
    let initial = parse_initial(&initial_text)?;
    let nus: Vec<f64> = args
        .track
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Invalid(format!("bad quantile levels '{}'", args.track)))?;
    ctx.record("track", &nus);
    ctx.record("record_every", &args.record_every);
    ctx.record("recenter", &!args.no_recenter);
    let mass_tolerance = ctx.get(
        "mass_tolerance",
        args.mass_tolerance,
        None,
        jumpsync::mfl::DEFAULT_MASS_TOLERANCE,
    );

    let f0 = initial_state(&initial, window, h)?;
    let recenter = if args.no_recenter { Recenter::Off } else { Recenter::default() };
    let traj = Mfl::new(law, lambda, mu)
        .boundary(boundary)
        .dt(dt)
        .recenter(recenter)
        .record_every(args.record_every)
        .track(&nus)
        .snapshots(args.snapshots)
        .mass_tolerance(mass_tolerance)
        .integrate(&f0, t_end)?;

    let extra: Vec<String> = nus.iter().map(|nu| format!("q{nu}")).collect();
    out.csv(
        "mfl_quantiles.csv",
        &output::MFL_QUANTILES,
        &extra,
        traj.frames.iter().map(|fr| {
            std::iter::once(fmt9(fr.time))
                .chain(fr.quantiles.iter().map(|q| fmt9(*q)))
                .collect()
        }),
    )?;
    if args.snapshots {
        let rows = traj.frames.iter().flat_map(|fr| {
            let snap = fr.snapshot.as_ref().expect("snapshots requested");
            (0..snap.len()).map(move |k| vec![fmt9(fr.time), fmt9(snap.x(k)), fmt9(snap.values[k])])
        });
        out.csv("mfl_snapshots.csv", &output::MFL_SNAPSHOTS, &[], rows)?;
    }
    let last = traj.last();
    let summary: Vec<String> = nus
        .iter()
        .zip(&last.quantiles)
        .map(|(nu, q)| format!("q{nu}={}", fmt9(*q)))
        .collect();
    println!("t={} {}", fmt9(last.time), summary.join(" "));
    Ok(())
}

#[derive(Debug, Args)]
pub struct TwsArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub v: Option<f64>,
    /// original, left (moving left boundary), right (moving right boundary)
    /// or logistic (no independent jumps).
    #[arg(long)]
    pub kind: Option<String>,
    /// Boundary value of a left-boundary wave.
    #[arg(long)]
    pub phi0: Option<f64>,
    /// Shift of the logistic wave.
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,
}

#[derive(Debug, Serialize)]
struct WaveRecord {
    kind: String,
    v: f64,
    v_star: Option<f64>,
    classification: &'static str,
    z1: Option<f64>,
    phi_hit: Option<f64>,
    tail_exponent: Option<f64>,
}

pub fn tws(ctx: &mut Ctx, args: &TwsArgs, out: &mut Outputs) -> Result<(), CliError> {
    let kind = ctx.get("kind", args.kind.clone(), ctx.file.kind.clone(), "original".to_string());
    let v = ctx.need("v", args.v, ctx.file.v)?;
    let (wave, v_star_value): (WaveSolution, Option<f64>) = if kind == "logistic" {
        let c = ctx.get("c", args.c, ctx.file.c, 0.0);
        (logistic_tws(v, c)?, None)
    } else {
        let (lambda, mu) = ctx.rates()?;
        let vs = mu * v_star(lambda / mu);
        let wave = match kind.as_str() {
            "original" => shoot_original(lambda, mu, v)?,
            "left" => {
                let phi0 = ctx.get("phi0", args.phi0, ctx.file.phi0, 1e-3);
                tws_left_boundary(lambda, mu, v, phi0)?
            }
            "right" => tws_right_boundary(lambda, mu, v)?,
            other => return Err(CliError::Invalid(format!("unknown wave kind '{other}'"))),
        };
        (wave, Some(vs))
    };

    let (z1, phi_hit) = match wave.classification {
        Classification::HitsOneAbove { z1 } => (Some(z1), None),
        Classification::FellToAxis { phi_hit } => (None, Some(phi_hit)),
        Classification::Proper => (None, None),
    };
    let tail_exponent = if wave.classification.is_proper() {
        tail_exponent_of_shape(&wave).ok()
    } else {
        None
    };
    let record = WaveRecord {
        kind,
        v,
        v_star: v_star_value,
        classification: wave.classification.name(),
        z1,
        phi_hit,
        tail_exponent,
    };
    let line = serde_json::to_string(&record).map_err(|e| CliError::Invalid(e.to_string()))?;
    println!("{line}");
    out.write("tws_classification.jsonl", "tws_classification/v1", format!("{line}\n").as_bytes())?;
    out.csv(
        "tws.csv",
        &output::TWS,
        &[],
        (0..wave.len()).map(|i| vec![fmt9(wave.x[i]), fmt9(wave.phi[i]), fmt9(wave.z[i])]),
    )?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Cost weight of independent jumps.
    #[arg(long)]
    pub a: Option<f64>,
    /// Cost weight of synchronization.
    #[arg(long)]
    pub b: Option<f64>,
}

pub fn optimize(ctx: &mut Ctx, args: &OptimizeArgs, out: &mut Outputs) -> Result<(), CliError> {
    let law = ctx.law()?;
    let a = ctx.need("a", args.a, ctx.file.a)?;
    let b = ctx.need("b", args.b, ctx.file.b)?;
    let result = optimize_tradeoff(&law, a, b)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "{}",
        serde_json::to_string(&result).map_err(|e| CliError::Invalid(e.to_string()))?
    );
    let grid = sweep(&law, a, b, SWEEP_POINTS)?;
    out.csv(
        "optimize_sweep.csv",
        &output::OPTIMIZE_SWEEP,
        &[],
        grid.iter()
            .map(|(lambda, v)| vec![fmt9(*lambda), fmt9((1.0 - a * lambda) / b), fmt9(*v)]),
    )?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[command(flatten)]
    pub common: Common,
    /// 1 (exponential jumps) or 2 (uniform jumps on [0, 2]).
    #[arg(long)]
    pub table: Option<u8>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub jumps_per_particle: Option<u64>,
    #[arg(long)]
    pub warmup: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Row `i` of the table runs with seed `seed + i`.
pub fn reproduce_table(ctx: &mut Ctx, args: &TableArgs, out: &mut Outputs) -> Result<(), CliError> {
    let seed = ctx.need("seed", args.seed, ctx.file.seed)?;
    let id = ctx.need("table", args.table, ctx.file.table)?;
    let (rows, law) = table(id).ok_or_else(|| CliError::Invalid(format!("no table {id}; choose 1 or 2")))?;
    let n = ctx.get("n", args.n, ctx.file.n, 10_000);
    let jumps = ctx.get("jumps_per_particle", args.jumps_per_particle, ctx.file.jumps_per_particle, 400);
    let warmup = ctx.get("warmup", args.warmup, ctx.file.warmup, 0.5);
    ctx.record("dist", &law.name());

    let results: Vec<Result<Vec<String>, CliError>> = rows
        .par_iter()
        .enumerate()
        .map(|(i, row)| {
            let c = critical(&law, row.lambda, row.mu)?;
            let est = simulate_speed(
                &law,
                row.lambda,
                row.mu,
                n,
                jumps,
                warmup,
                seed.wrapping_add(i as u64),
                SpeedStatistic::MeanDisplacement,
            )?;
            Ok(vec![
                fmt9(row.lambda),
                fmt9(row.mu),
                fmt9(est.value),
                fmt9(est.std_error),
                fmt9(c.v_star),
                fmt9(row.v_n),
                fmt9(row.v_star_star),
            ])
        })
        .collect();
    let lines = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let path = out.csv(&format!("table_{id}.csv"), &output::REPRODUCE_TABLE, &[], lines)?;
    print!("{}", std::fs::read_to_string(path)?);
    Ok(())
}
