//! End-to-end acceptance checks. Run with
//! `cargo test -p jumpsync-core --test acceptance -- --nocapture`
//! to see one PASS/FAIL line per criterion.

use jumpsync::brw::leading_cdf;
use jumpsync::mfl::{avg_speed, GridCdf, Mfl, MflTrajectory, Recenter};
use jumpsync::optimize::optimize_tradeoff;
use jumpsync::particles::{coupled_dominance_run, simulate_speed, SpeedEstimate, SpeedStatistic};
use jumpsync::rng::seeded;
use jumpsync::speed::{critical, critical_numeric, v_of_zeta};
use jumpsync::tables::{TABLE_1, TABLE_2};
use jumpsync::tws::{
    logistic_tws, shoot_original, tail_exponent_of_shape, tws_left_boundary, tws_original, tws_right_boundary,
    v_star, Classification, WaveSolution,
};
use jumpsync::{BoundarySpec, JumpLaw};
use rand::Rng;
use rayon::prelude::*;

const EXP: JumpLaw = JumpLaw::ExponentialMeanOne;
const UNIFORM: JumpLaw = JumpLaw::UniformZeroTwo;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn c1_exponential_table() -> Outcome {
    let mut worst = 0.0_f64;
    for row in &TABLE_1 {
        let c = critical(&EXP, row.lambda, row.mu).map_err(err)?;
        worst = worst.max((c.v_star - row.v_star_star).abs());
    }
    check(worst <= 1e-6, format!("max |v** - table| = {worst:.2e} over 10 rows"))
}

fn c2_uniform_table() -> Outcome {
    let mut worst = 0.0_f64;
    for row in &TABLE_2 {
        let c = critical_numeric(&UNIFORM, row.lambda, row.mu).map_err(err)?;
        worst = worst.max((c.v_star - row.v_star_star).abs());
    }
    check(worst <= 1e-3, format!("max |v** - table| = {worst:.2e} over 10 rows"))
}

fn c3_finite_n_speeds() -> Outcome {
    let rows: Vec<(JumpLaw, f64, f64, f64)> = TABLE_1
        .iter()
        .map(|r| (EXP, r.lambda, r.mu, r.v_n))
        .chain(TABLE_2.iter().map(|r| (UNIFORM, r.lambda, r.mu, r.v_n)))
        .collect();
    let results: Vec<Result<[f64; 6], String>> = rows
        .par_iter()
        .enumerate()
        .map(|(i, (law, lambda, mu, paper))| {
            let est = simulate_speed(law, *lambda, *mu, 10_000, 400, 0.5, 1000 + i as u64, SpeedStatistic::default())
                .map_err(err)?;
            let vss = critical(law, *lambda, *mu).map_err(err)?.v_star;
            Ok([*lambda, *mu, est.value, est.std_error, *paper, vss])
        })
        .collect();
    let mut failures = Vec::new();
    let mut worst = 0.0_f64;
    for r in results {
        let [lambda, mu, v, se, paper, vss] = r?;
        let tol = (4.0 * se).max(0.05);
        worst = worst.max((v - paper).abs() / tol);
        if (v - paper).abs() > tol || v >= vss {
            failures.push(format!("({lambda}, {mu}): v_n={v:.4} se={se:.4} table={paper} v**={vss:.4}"));
        }
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!("20 rows within tolerance (worst at {worst:.2} of its band), all below v**")
        } else {
            failures.join("; ")
        },
    )
}

fn c4_monotone_selection() -> Outcome {
    let (lambda, mu) = (1.0 / 6.0, 2.0 / 3.0);
    let vss = critical(&EXP, lambda, mu).map_err(err)?.v_star;
    let ests: Vec<SpeedEstimate> = [100usize, 1000, 10_000]
        .par_iter()
        .enumerate()
        .map(|(i, &n)| simulate_speed(&EXP, lambda, mu, n, 2000, 0.5, 40 + i as u64, SpeedStatistic::default()))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let nondecreasing = ests.windows(2).all(|w| {
        let pooled = (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt();
        w[1].value >= w[0].value - 2.0 * pooled
    });
    let gaps: Vec<f64> = ests.iter().map(|e| vss - e.value).collect();
    let shrinking = gaps.windows(2).all(|g| g[1] < g[0]);
    check(
        nondecreasing && shrinking,
        format!(
            "v_n = {:.4} / {:.4} / {:.4} (se {:.4} / {:.4} / {:.4}), gaps {:.4} > {:.4} > {:.4}",
            ests[0].value,
            ests[1].value,
            ests[2].value,
            ests[0].std_error,
            ests[1].std_error,
            ests[2].std_error,
            gaps[0],
            gaps[1],
            gaps[2]
        ),
    )
}

fn c5_threshold() -> Outcome {
    let mut kinds = Vec::new();
    let mut ok = true;
    for (v, proper) in [(7.0, false), (8.0, false), (8.9, false), (9.0, true), (9.5, true), (10.0, true)] {
        let wave = shoot_original(4.0, 1.0, v).map_err(err)?;
        let expected = if proper {
            wave.classification.is_proper()
        } else {
            matches!(wave.classification, Classification::HitsOneAbove { .. })
        };
        ok &= expected;
        kinds.push(format!("{v}:{}", wave.classification.name()));
    }
    // smaller root of v(zeta) = 10 at lambda = 4: b = 1 + 10 - 4, zeta = 2 / (b + sqrt(b^2 - 40))
    let oracle = 2.0 / (7.0 + (49.0_f64 - 40.0).sqrt());
    let wave = tws_original(4.0, 1.0, 10.0)
        .map_err(err)?
        .ok_or("no wave at v = 10")?;
    let tail = tail_exponent_of_shape(&wave).map_err(err)?;
    ok &= (tail - oracle).abs() <= 1e-3;
    check(ok, format!("{}; tail exponent {tail:.5} vs {oracle}", kinds.join(" ")))
}

fn c6_barrier() -> Outcome {
    let mut rng = seeded(6);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..20 {
        let lambda = rng.random_range(0.1..8.0);
        let v = v_star(lambda) * rng.random_range(1.01..2.0);
        let wave = tws_original(lambda, 1.0, v)
            .map_err(err)?
            .ok_or(format!("no wave at lambda={lambda}, v={v}"))?;
        for (p, z) in wave.phi.iter().zip(&wave.z) {
            worst = worst.max(z - v.sqrt() * p * (1.0 - p) / v);
        }
    }
    check(worst <= 1e-9, format!("max excess over the parabola {worst:.2e} on 20 waves"))
}

/// Largest distance between the recorded snapshots (up to `t_max`) and the
/// initial shape translated by `v t`.
fn rigidity(traj: &MflTrajectory, shape: impl Fn(f64) -> f64, v: f64, t_max: f64) -> f64 {
    traj.frames
        .iter()
        .filter(|fr| fr.time <= t_max + 1e-9)
        .map(|fr| {
            let snap = fr.snapshot.as_ref().expect("snapshots on");
            snap.sup_distance(|x| shape(x - v * fr.time))
        })
        .fold(0.0, f64::max)
}

fn center(wave: &WaveSolution) -> f64 {
    let k = wave.phi.iter().position(|p| *p >= 0.5).unwrap_or(0);
    wave.x[k]
}

fn c7_wave_rigidity() -> Outcome {
    let (lambda, mu, v) = (1.0, 1.0, 5.0);
    let wave = tws_original(lambda, mu, v).map_err(err)?.ok_or("no wave at v = 5")?;
    let x0 = center(&wave);
    let f0 = GridCdf::from_fn(x0 - 80.0, x0 + 110.0, 0.02, |x| wave.value_at(x)).map_err(err)?;
    let traj = Mfl::new(EXP, lambda, mu)
        .dt(0.01)
        .recenter(Recenter::Off)
        .snapshots(true)
        .record_every(0.5)
        .integrate(&f0, 4.0)
        .map_err(err)?;
    let d = rigidity(&traj, |x| wave.value_at(x), v, 4.0);

    let logistic = logistic_tws(1.0, 0.0).map_err(err)?;
    let g0 = GridCdf::from_fn(-30.0, 40.0, 0.02, |x| logistic.value_at(x)).map_err(err)?;
    let traj = Mfl::new(EXP, 0.0, 1.0)
        .dt(0.01)
        .recenter(Recenter::Off)
        .snapshots(true)
        .record_every(0.5)
        .integrate(&g0, 4.0)
        .map_err(err)?;
    let dl = rigidity(&traj, |x| logistic.value_at(x), 1.0, 4.0);
    check(
        d <= 5e-3 && dl <= 1e-3,
        format!("sup deviation {d:.2e} (tol 5e-3), logistic {dl:.2e} (tol 1e-3)"),
    )
}

fn c8_mckean() -> Outcome {
    let traj = Mfl::new(EXP, 1.0, 1.0)
        .dt(0.01)
        .recenter(Recenter::Off)
        .snapshots(true)
        .record_every(0.5)
        .bmfl(-10.0, 60.0, 0.02, 2.0)
        .map_err(err)?;
    let snap = traj.last().snapshot.clone().expect("snapshots on");
    let grid: Vec<f64> = (0..snap.len())
        .map(|k| snap.x(k))
        .filter(|x| (-0.5..=40.0).contains(x))
        .collect();
    let cdf = leading_cdf(&EXP, 1.0, 1.0, 2.0, 100_000, &grid, 1_000_000, 8).map_err(err)?;
    let d = grid
        .iter()
        .zip(&cdf.probabilities)
        .map(|(x, p)| (snap.value_at(*x) - p).abs())
        .fold(0.0, f64::max);
    check(
        d <= 0.02 && !cdf.biased(),
        format!("sup distance {d:.4} over {} points (tol 0.02)", grid.len()),
    )
}

const BMFL_H: f64 = 0.05;

fn bmfl_from(f0: &GridCdf, t_end: f64) -> Result<MflTrajectory, String> {
    Mfl::new(EXP, 1.0, 1.0)
        .dt(0.01)
        .recenter(Recenter::Off)
        .record_every(0.1)
        .track(&[0.5])
        .integrate(f0, t_end)
        .map_err(err)
}

/// Median speeds over (10,20), (20,30), (30,40) and (20,40).
fn median_speeds(traj: &MflTrajectory) -> Result<[f64; 4], String> {
    let s = |a: f64, b: f64| avg_speed(traj, 0.5, (a, b)).map_err(err);
    Ok([s(10.0, 20.0)?, s(20.0, 30.0)?, s(30.0, 40.0)?, s(20.0, 40.0)?])
}

fn in_bmfl_band(speeds: &[f64; 4], vss: f64) -> bool {
    let windows = [10.0, 10.0, 10.0, 20.0];
    (3.5..=4.02).contains(&speeds[3])
        && speeds[0] <= speeds[1]
        && speeds[1] <= speeds[2]
        && speeds.iter().zip(windows).all(|(s, w)| *s <= vss + BMFL_H / w)
}

fn c9_bmfl_speed() -> Outcome {
    let f0 = GridCdf::dirac(-10.0, 240.0, BMFL_H).map_err(err)?;
    let traj = bmfl_from(&f0, 40.0)?;
    let s = median_speeds(&traj)?;
    check(
        in_bmfl_band(&s, 4.0),
        format!(
            "median speeds {:.4} <= {:.4} <= {:.4}; over (20,40) {:.4} in [3.5, 4.02]",
            s[0], s[1], s[2], s[3]
        ),
    )
}

fn c10_comparison() -> Outcome {
    let mut rng = seeded(10);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..20 {
        let mut lo = vec![0.0; 20];
        let mut hi = vec![0.0; 20];
        let (mut a, mut b) = (0.0_f64, 0.0_f64);
        for _ in 0..40 {
            a = (a + rng.random_range(0.0..0.05)).min(1.0);
            b = (b + rng.random_range(0.0..0.05)).min(1.0);
            lo.push(a.min(b));
            hi.push(a.max(b));
        }
        lo.extend(vec![1.0; 400]);
        hi.extend(vec![1.0; 400]);
        let m = Mfl::new(EXP, rng.random_range(0.1..2.0), rng.random_range(0.1..2.0))
            .recenter(Recenter::Off)
            .snapshots(true)
            .record_every(0.25);
        let ta = m.integrate(&GridCdf::new(-2.0, 0.1, lo).map_err(err)?, 2.0).map_err(err)?;
        let tb = m.integrate(&GridCdf::new(-2.0, 0.1, hi).map_err(err)?, 2.0).map_err(err)?;
        for (x, y) in ta.frames.iter().zip(&tb.frames) {
            let (x, y) = (x.snapshot.as_ref().unwrap(), y.snapshot.as_ref().unwrap());
            for (p, q) in x.values.iter().zip(&y.values) {
                worst = worst.max(p - q);
            }
        }
    }

    let laws = [EXP, UNIFORM, JumpLaw::DeterministicOne];
    let mut dominated = 0;
    for run in 0..100u64 {
        let n = rng.random_range(2..20);
        let lower: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let upper: Vec<f64> = lower.iter().map(|x| x + rng.random_range(0.0..2.0)).collect();
        let law = &laws[run as usize % 3];
        let (lambda, mu) = (rng.random_range(0.0..2.0), rng.random_range(0.1..2.0));
        if coupled_dominance_run(&lower, &upper, law, lambda, mu, 2000, run).map_err(err)? {
            dominated += 1;
        }
    }
    check(
        worst <= 1e-9 && dominated == 100,
        format!("mean-field order violation {worst:.2e} (tol 1e-9); {dominated}/100 coupled runs dominated"),
    )
}

fn c11_tail_speeds() -> Outcome {
    let slow_tail = |zeta: f64| {
        GridCdf::from_fn(-10.0, 240.0, BMFL_H, move |x| if x < 0.0 { 0.0 } else { -(-zeta * x).exp_m1() })
    };
    let target = v_of_zeta(&EXP, 1.0, 1.0, 0.25).map_err(err)?.to_f64();
    let fast = bmfl_from(&slow_tail(0.25).map_err(err)?, 20.0)?;
    let measured = avg_speed(&fast, 0.5, (10.0, 20.0)).map_err(err)?;
    let critical_tail = bmfl_from(&slow_tail(0.5).map_err(err)?, 40.0)?;
    let s = median_speeds(&critical_tail)?;
    check(
        (measured - target).abs() <= 0.1 * target && in_bmfl_band(&s, 4.0),
        format!(
            "zeta=0.25: {measured:.4} vs v(0.25)={target:.4}; zeta=0.5: {:.4} <= {:.4} <= {:.4}, (20,40) {:.4}",
            s[0], s[1], s[2], s[3]
        ),
    )
}

fn c12_tradeoff() -> Outcome {
    let e = optimize_tradeoff(&EXP, 2.0, 1.0).map_err(err)?;
    let u = optimize_tradeoff(&UNIFORM, 2.0, 1.0).map_err(err)?;
    let exact = e.lambda_opt == 1.0 / 6.0 && e.mu_opt == 2.0 / 3.0 && (e.v_opt - 1.5).abs() <= 1e-14;
    check(
        exact && (u.v_opt - 1.0505).abs() <= 1e-3,
        format!(
            "exponential ({}, {}, {}); uniform v_opt {:.5} at ({:.4}, {:.4})",
            e.lambda_opt, e.mu_opt, e.v_opt, u.v_opt, u.lambda_opt, u.mu_opt
        ),
    )
}

fn c13_boundary_waves() -> Outcome {
    let (lambda, mu) = (4.0, 1.0);

    let right = tws_right_boundary(lambda, mu, 7.0).map_err(err)?;
    let Classification::HitsOneAbove { z1 } = right.classification else {
        return Err("right-boundary wave did not reach phi = 1".into());
    };
    let valid = right.phi.iter().all(|p| (0.0..=1.0).contains(p))
        && right.phi.windows(2).all(|w| w[1] >= w[0])
        && right.x.windows(2).all(|w| w[1] > w[0]);
    let f0 = GridCdf::from_fn(-80.0, 30.0, 0.02, |x| right.value_at(x)).map_err(err)?;
    let traj = Mfl::new(EXP, lambda, mu)
        .boundary(BoundarySpec::MovingRight { b0: 0.0, v: 7.0 })
        .dt(0.01)
        .recenter(Recenter::Off)
        .snapshots(true)
        .record_every(0.5)
        .integrate(&f0, 3.0)
        .map_err(err)?;
    let d_right = rigidity(&traj, |x| right.value_at(x), 7.0, 3.0);

    let left = tws_left_boundary(lambda, mu, 10.0, 1e-3).map_err(err)?;
    let tail = tail_exponent_of_shape(&left).map_err(err)?;
    let g0 = GridCdf::from_fn(-40.0, 200.0, 0.02, |x| left.value_at(x)).map_err(err)?;
    let traj = Mfl::new(EXP, lambda, mu)
        .boundary(BoundarySpec::MovingLeft { a0: 0.0, v: 10.0 })
        .dt(0.01)
        .recenter(Recenter::Off)
        .snapshots(true)
        .record_every(0.5)
        .integrate(&g0, 3.0)
        .map_err(err)?;
    let d_left = rigidity(&traj, |x| left.value_at(x), 10.0, 3.0);

    check(
        z1 > 0.0 && valid && (tail - 0.2).abs() <= 1e-3 && d_right <= 1e-2 && d_left <= 1e-2,
        format!(
            "right: z1={z1:.3e}, valid CDF {valid}, drift {d_right:.2e}; left: tail {tail:.5}, drift {d_left:.2e}"
        ),
    )
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 13] = [
        ("critical speeds, exponential table", c1_exponential_table),
        ("critical speeds, uniform table", c2_uniform_table),
        ("finite-n speeds against the tables", c3_finite_n_speeds),
        ("monotone approach of v_n to v**", c4_monotone_selection),
        ("wave existence threshold", c5_threshold),
        ("phase-plane barrier", c6_barrier),
        ("wave rigidity under mean-field dynamics", c7_wave_rigidity),
        ("BRW leading particle vs BMFL", c8_mckean),
        ("BMFL speed", c9_bmfl_speed),
        ("comparison principle", c10_comparison),
        ("tail-dependent speeds", c11_tail_speeds),
        ("trade-off optimum", c12_tradeoff),
        ("boundary waves", c13_boundary_waves),
    ];
    let outcomes: Vec<Outcome> = criteria.par_iter().map(|(_, f)| f()).collect();
    let mut failed = Vec::new();
    for (i, ((name, _), outcome)) in criteria.iter().zip(&outcomes).enumerate() {
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
