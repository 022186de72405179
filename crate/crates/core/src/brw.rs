//! The associated branching random walk.
//!
//! Each particle jumps forward at rate λ and splits in place at rate μ. The
//! law of the leading particle started from one particle at 0 is the
//! benchmark mean-field trajectory, which makes this a Monte-Carlo oracle
//! for the [`crate::mfl`] integrator.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::JumpLaw;
use crate::error::{invalid, Result};
use crate::rng::{replica, seeded};

pub const DEFAULT_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct BrwPopulation {
    pub locations: Vec<f64>,
    pub time: f64,
}

impl BrwPopulation {
    pub fn single() -> Self {
        BrwPopulation {
            locations: vec![0.0],
            time: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BrwSample {
    pub time: f64,
    pub population: usize,
    pub leading: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrwTrajectory {
    pub samples: Vec<BrwSample>,
    pub population: BrwPopulation,
    /// Set when the population outgrew the cap before `t_end`; the run stops
    /// at that moment and later samples are missing.
    pub capped: bool,
}

fn validate(lambda: f64, mu: f64, t_end: f64, cap: usize) -> Result<()> {
    if !(lambda >= 0.0 && mu >= 0.0 && lambda + mu > 0.0 && (lambda + mu).is_finite()) {
        return Err(invalid("rates must be >= 0 with lambda + mu > 0"));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(invalid("t_end must be finite and >= 0"));
    }
    if cap < 1 {
        return Err(invalid("population cap must be >= 1"));
    }
    Ok(())
}

/// Runs one replica, recording `(t, N, D)` at every time in `sample_times`
/// (sorted, within `[0, t_end]`).
fn run<R: Rng + ?Sized>(
    law: &JumpLaw,
    lambda: f64,
    mu: f64,
    t_end: f64,
    cap: usize,
    sample_times: &[f64],
    rng: &mut R,
) -> BrwTrajectory {
    let mut pop = BrwPopulation::single();
    let mut leading = 0.0_f64;
    let mut samples = Vec::with_capacity(sample_times.len());
    let mut next_sample = 0;
    let total = lambda + mu;
    let clock = Exp::new(total).expect("positive rate");
    let mut capped = false;
    loop {
        // total rate N (λ + μ): scale a rate-(λ + μ) draw by 1/N
        let dt = clock.sample(rng) / pop.len() as f64;
        let next = pop.time + dt;
        while next_sample < sample_times.len()
            && sample_times[next_sample] < next
            && sample_times[next_sample] <= t_end
        {
            samples.push(BrwSample {
                time: sample_times[next_sample],
                population: pop.len(),
                leading,
            });
            next_sample += 1;
        }
        if next > t_end {
            pop.time = t_end;
            break;
        }
        pop.time = next;
        let i = rng.random_range(0..pop.len());
        if rng.random::<f64>() * total < lambda {
            let x = pop.locations[i] + law.sample(rng);
            pop.locations[i] = x;
            leading = leading.max(x);
        } else {
            if pop.len() >= cap {
                capped = true;
                break;
            }
            let x = pop.locations[i];
            pop.locations.push(x);
        }
    }
    BrwTrajectory {
        samples,
        population: pop,
        capped,
    }
}

/// Simulates one branching random walk from a single particle at 0 until
/// `t_end`, sampling at multiples of `sample_interval` and at `t_end`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_brw(
    law: &JumpLaw,
    lambda: f64,
    mu: f64,
    t_end: f64,
    cap: usize,
    sample_interval: f64,
    seed: u64,
) -> Result<BrwTrajectory> {
    validate(lambda, mu, t_end, cap)?;
    if !(sample_interval > 0.0) {
        return Err(invalid("sample interval must be positive"));
    }
    let times = sample_grid(t_end, sample_interval);
    Ok(run(law, lambda, mu, t_end, cap, &times, &mut seeded(seed)))
}

fn sample_grid(t_end: f64, interval: f64) -> Vec<f64> {
    let steps = (t_end / interval + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=steps).map(|k| k as f64 * interval).collect();
    if t_end - times[steps] > 1e-9 * interval {
        times.push(t_end);
    }
    times
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeadingCdf {
    pub grid: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub capped_replicas: usize,
}

impl LeadingCdf {
    /// Truncated replicas report a leading position that is too small.
    pub fn biased(&self) -> bool {
        self.capped_replicas > 0
    }
}

/// Monte-Carlo estimate of `P{D(t) <= x}` on `grid`.
#[allow(clippy::too_many_arguments)]
pub fn leading_cdf(
    law: &JumpLaw,
    lambda: f64,
    mu: f64,
    t: f64,
    replicas: usize,
    grid: &[f64],
    cap: usize,
    seed: u64,
) -> Result<LeadingCdf> {
    validate(lambda, mu, t, cap)?;
    if replicas < 1 {
        return Err(invalid("need at least one replica"));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid("grid must be sorted"));
    }
    let outcomes: Vec<(f64, bool)> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let traj = run(law, lambda, mu, t, cap, &[], &mut replica(seed, i));
            let leading = traj.population.locations.iter().copied().fold(0.0, f64::max);
            (leading, traj.capped)
        })
        .collect();
    let capped_replicas = outcomes.iter().filter(|o| o.1).count();
    let mut leading: Vec<f64> = outcomes.into_iter().map(|o| o.0).collect();
    leading.sort_by(f64::total_cmp);
    let probabilities = grid
        .iter()
        .map(|&x| leading.partition_point(|&d| d <= x) as f64 / replicas as f64)
        .collect();
    Ok(LeadingCdf {
        grid: grid.to_vec(),
        probabilities,
        capped_replicas,
    })
}
