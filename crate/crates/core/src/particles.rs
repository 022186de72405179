//! Event-driven simulation of the `n`-particle system.
//!
//! All particles share one exponential clock of rate `n (λ + μ)`. At each
//! event a uniformly chosen particle either jumps forward by a draw from the
//! jump law (probability `λ / (λ + μ)`) or picks one of the other `n - 1`
//! particles uniformly and moves to it if that particle is ahead. Per event
//! only two locations are touched, so no ordered container is kept;
//! quantiles are computed by selection when measured.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::Serialize;

use crate::boundary::BoundarySpec;
use crate::dist::JumpLaw;
use crate::error::{invalid, Result};
use crate::rng::{seeded, SimRng};

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    /// Locations relative to `offset`, in no particular order.
    pub locations: Vec<f64>,
    /// Cumulative re-centering shift; absolute location = location + offset.
    pub offset: f64,
    pub time: f64,
    pub event_count: u64,
}

impl ParticleState {
    pub fn new(locations: Vec<f64>) -> Result<Self> {
        if locations.is_empty() {
            return Err(invalid("particle system needs n >= 1"));
        }
        if locations.iter().any(|x| !x.is_finite()) {
            return Err(invalid("particle locations must be finite"));
        }
        Ok(ParticleState {
            locations,
            offset: 0.0,
            time: 0.0,
            event_count: 0,
        })
    }

    /// `n` particles at the origin.
    pub fn colocated(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn absolute(&self, i: usize) -> f64 {
        self.locations[i] + self.offset
    }

    pub fn leading(&self) -> f64 {
        self.locations.iter().copied().fold(f64::NEG_INFINITY, f64::max) + self.offset
    }

    pub fn mean(&self) -> f64 {
        self.locations.iter().sum::<f64>() / self.len() as f64 + self.offset
    }

    /// Order statistic of rank `ceil(nu n)` in absolute coordinates.
    pub fn quantile(&self, nu: f64) -> f64 {
        let mut scratch = self.locations.clone();
        order_statistic(&mut scratch, nu) + self.offset
    }

    /// Shifts relative locations so that the minimum is 0. Absolute
    /// positions are unchanged; returns the shift.
    pub fn recenter(&mut self) -> f64 {
        let min = self.locations.iter().copied().fold(f64::INFINITY, f64::min);
        for x in &mut self.locations {
            *x -= min;
        }
        self.offset += min;
        min
    }
}

fn quantile_rank(n: usize, nu: f64) -> usize {
    // 1-based rank ceil(nu n), as a 0-based index
    ((nu * n as f64).ceil() as usize).clamp(1, n) - 1
}

fn order_statistic(values: &mut [f64], nu: f64) -> f64 {
    let k = quantile_rank(values.len(), nu);
    *values.select_nth_unstable_by(k, f64::total_cmp).1
}

/// One event of the system, as drawn (before boundary effects).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    Jump { particle: usize, size: f64 },
    Sync { particle: usize, target: usize },
    /// Synchronization attempt with `n = 1`: no other particle exists.
    SyncAlone { particle: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub dt: f64,
    pub kind: EventKind,
}

/// Draws the next event of an `n`-particle system.
pub fn draw_event<R: Rng + ?Sized>(n: usize, law: &JumpLaw, lambda: f64, mu: f64, rng: &mut R) -> Event {
    let total = lambda + mu;
    let dt = Exp::new(n as f64 * total).expect("positive rate").sample(rng);
    let particle = rng.random_range(0..n);
    let kind = if rng.random::<f64>() * total < lambda {
        EventKind::Jump {
            particle,
            size: law.sample(rng),
        }
    } else if n == 1 {
        EventKind::SyncAlone { particle }
    } else {
        let mut target = rng.random_range(0..n - 1);
        if target >= particle {
            target += 1;
        }
        EventKind::Sync { particle, target }
    };
    Event { dt, kind }
}

/// Applies an event at the state's clock advanced by `event.dt`.
/// Returns the change of the moved particle's location.
pub fn apply_event(state: &mut ParticleState, event: &Event, boundary: &BoundarySpec) -> f64 {
    state.time += event.dt;
    state.event_count += 1;
    match event.kind {
        EventKind::Jump { particle, size } => {
            let old = state.locations[particle];
            let mut from = old;
            if let Some(a) = boundary.left_at(state.time) {
                from = from.max(a - state.offset);
            }
            let mut to = from + size;
            if let Some(b) = boundary.right_at(state.time) {
                to = to.min(b - state.offset);
            }
            // a particle at or past a right boundary stays put
            let to = to.max(old);
            state.locations[particle] = to;
            to - old
        }
        EventKind::Sync { particle, target } => {
            let (old, ahead) = (state.locations[particle], state.locations[target]);
            if ahead > old {
                state.locations[particle] = ahead;
                ahead - old
            } else {
                0.0
            }
        }
        EventKind::SyncAlone { .. } => 0.0,
    }
}

/// Advances the system by one event and returns it.
pub fn step<R: Rng + ?Sized>(
    state: &mut ParticleState,
    law: &JumpLaw,
    lambda: f64,
    mu: f64,
    boundary: &BoundarySpec,
    rng: &mut R,
) -> Event {
    let event = draw_event(state.len(), law, lambda, mu, rng);
    apply_event(state, &event, boundary);
    event
}

/// Which functional of the empirical distribution is tracked for speed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub enum SpeedStatistic {
    /// Center of mass.
    #[default]
    MeanDisplacement,
    /// Order statistic of rank `ceil(nu n)`.
    QuantileDisplacement(f64),
    /// Right-most particle.
    LeadingParticle,
}

impl SpeedStatistic {
    fn measure(&self, state: &ParticleState, running_sum: f64, scratch: &mut Vec<f64>) -> f64 {
        match *self {
            SpeedStatistic::MeanDisplacement => running_sum / state.len() as f64 + state.offset,
            SpeedStatistic::LeadingParticle => state.leading(),
            SpeedStatistic::QuantileDisplacement(nu) => {
                scratch.clear();
                scratch.extend_from_slice(&state.locations);
                order_statistic(scratch, nu) + state.offset
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedEstimate {
    pub value: f64,
    /// Batch-means standard error over [`SPEED_BATCHES`] batches.
    pub std_error: f64,
    pub window: (f64, f64),
    pub statistic: SpeedStatistic,
}

pub const SPEED_BATCHES: usize = 10;

/// Parameters of a steady-state speed run.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedRun {
    pub law: JumpLaw,
    pub lambda: f64,
    pub mu: f64,
    pub n: usize,
    pub jumps_per_particle: u64,
    pub warmup_fraction: f64,
    pub seed: u64,
    pub statistic: SpeedStatistic,
    pub boundary: BoundarySpec,
    /// Initial locations; all particles at 0 when `None`.
    pub initial: Option<Vec<f64>>,
}

impl SpeedRun {
    /// Defaults: 400 events per particle, first half discarded as warmup.
    pub fn new(law: JumpLaw, lambda: f64, mu: f64, n: usize, seed: u64) -> Self {
        SpeedRun {
            law,
            lambda,
            mu,
            n,
            jumps_per_particle: 400,
            warmup_fraction: 0.5,
            seed,
            statistic: SpeedStatistic::MeanDisplacement,
            boundary: BoundarySpec::None,
            initial: None,
        }
    }

    pub fn jumps_per_particle(mut self, jumps: u64) -> Self {
        self.jumps_per_particle = jumps;
        self
    }

    pub fn warmup_fraction(mut self, fraction: f64) -> Self {
        self.warmup_fraction = fraction;
        self
    }

    pub fn statistic(mut self, statistic: SpeedStatistic) -> Self {
        self.statistic = statistic;
        self
    }

    pub fn boundary(mut self, boundary: BoundarySpec) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn initial(mut self, locations: Vec<f64>) -> Self {
        self.initial = Some(locations);
        self
    }

    pub fn run(&self) -> Result<SpeedEstimate> {
        self.run_with_series(|_, _| {})
    }

    /// Runs and reports `(time, statistic)` at every batch boundary.
    pub fn run_with_series(&self, mut observe: impl FnMut(f64, f64)) -> Result<SpeedEstimate> {
        self.validate()?;
        let mut state = match &self.initial {
            Some(locs) => ParticleState::new(locs.clone())?,
            None => ParticleState::colocated(self.n)?,
        };
        let mut rng = seeded(self.seed);
        let total_events = self.jumps_per_particle * self.n as u64;
        let warmup = (self.warmup_fraction * total_events as f64).floor() as u64;
        let measured = total_events - warmup;
        if measured < SPEED_BATCHES as u64 {
            return Err(invalid("too few post-warmup events for batch means"));
        }

        let mut sum: f64 = state.locations.iter().sum();
        let mut scratch = Vec::with_capacity(self.n);
        let advance = |state: &mut ParticleState, sum: &mut f64, events: u64, rng: &mut SimRng| {
            for _ in 0..events {
                let event = draw_event(self.n, &self.law, self.lambda, self.mu, rng);
                *sum += apply_event(state, &event, &self.boundary);
            }
        };

        advance(&mut state, &mut sum, warmup, &mut rng);
        sum -= state.recenter() * self.n as f64;
        let mut marks = Vec::with_capacity(SPEED_BATCHES + 1);
        let first = self.statistic.measure(&state, sum, &mut scratch);
        observe(state.time, first);
        marks.push((state.time, first));
        let per_batch = measured / SPEED_BATCHES as u64;
        for batch in 0..SPEED_BATCHES {
            let events = if batch + 1 == SPEED_BATCHES {
                measured - per_batch * (SPEED_BATCHES as u64 - 1)
            } else {
                per_batch
            };
            advance(&mut state, &mut sum, events, &mut rng);
            sum -= state.recenter() * self.n as f64;
            let value = self.statistic.measure(&state, sum, &mut scratch);
            observe(state.time, value);
            marks.push((state.time, value));
        }

        let (t0, s0) = marks[0];
        let (t1, s1) = marks[SPEED_BATCHES];
        let speeds: Vec<f64> = marks
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .collect();
        let mean = speeds.iter().sum::<f64>() / speeds.len() as f64;
        let var = speeds.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (speeds.len() - 1) as f64;
        Ok(SpeedEstimate {
            value: (s1 - s0) / (t1 - t0),
            std_error: (var / speeds.len() as f64).sqrt(),
            window: (t0, t1),
            statistic: self.statistic,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(invalid("n must be >= 1"));
        }
        if let Some(locs) = &self.initial {
            if locs.len() != self.n {
                return Err(invalid("initial locations must have n entries"));
            }
        }
        if !(self.lambda >= 0.0 && self.mu >= 0.0 && self.lambda + self.mu > 0.0) {
            return Err(invalid("rates must be >= 0 with lambda + mu > 0"));
        }
        if self.jumps_per_particle < 2 {
            return Err(invalid("need at least 2 events per particle"));
        }
        if !(self.warmup_fraction > 0.0 && self.warmup_fraction < 1.0) {
            return Err(invalid("warmup fraction must lie in (0, 1)"));
        }
        if let SpeedStatistic::QuantileDisplacement(nu) = self.statistic {
            if !(nu > 0.0 && nu < 1.0) {
                return Err(invalid("quantile level must lie in (0, 1)"));
            }
        }
        self.boundary.validate()
    }
}

/// Steady-state speed estimate with the default protocol (initially co-located,
/// no boundary).
#[allow(clippy::too_many_arguments)]
pub fn simulate_speed(
    law: &JumpLaw,
    lambda: f64,
    mu: f64,
    n: usize,
    jumps_per_particle: u64,
    warmup_fraction: f64,
    seed: u64,
    statistic: SpeedStatistic,
) -> Result<SpeedEstimate> {
    SpeedRun::new(law.clone(), lambda, mu, n, seed)
        .jumps_per_particle(jumps_per_particle)
        .warmup_fraction(warmup_fraction)
        .statistic(statistic)
        .run()
}

/// Locations minus their `nu`-quantile (rank `ceil(nu n)`), in particle order.
pub fn centered_snapshot(state: &ParticleState, nu: f64) -> Result<Vec<f64>> {
    if !(nu > 0.0 && nu < 1.0) {
        return Err(invalid("nu must lie in (0, 1)"));
    }
    let mut scratch = state.locations.clone();
    let q = order_statistic(&mut scratch, nu);
    Ok(state.locations.iter().map(|x| x - q).collect())
}

/// Runs two systems on one event stream and checks that the upper one
/// dominates the lower one rank by rank after every event.
///
/// Both initial states are sorted and particles are paired by rank; paired
/// particles share jump times and sizes and synchronization targets.
#[allow(clippy::too_many_arguments)]
pub fn coupled_dominance_run(
    init_lower: &[f64],
    init_upper: &[f64],
    law: &JumpLaw,
    lambda: f64,
    mu: f64,
    events: u64,
    seed: u64,
) -> Result<bool> {
    if init_lower.len() != init_upper.len() {
        return Err(invalid("coupled systems need equal particle counts"));
    }
    let mut lower_init = init_lower.to_vec();
    let mut upper_init = init_upper.to_vec();
    lower_init.sort_by(f64::total_cmp);
    upper_init.sort_by(f64::total_cmp);
    if lower_init.iter().zip(&upper_init).any(|(l, u)| l > u) {
        return Err(invalid("initial states are not rank-wise ordered"));
    }
    if !(lambda >= 0.0 && mu >= 0.0 && lambda + mu > 0.0) {
        return Err(invalid("rates must be >= 0 with lambda + mu > 0"));
    }
    let mut lower = ParticleState::new(lower_init)?;
    let mut upper = ParticleState::new(upper_init)?;
    let n = lower.len();
    let mut rng = seeded(seed);
    let none = BoundarySpec::None;
    for _ in 0..events {
        let event = draw_event(n, law, lambda, mu, &mut rng);
        apply_event(&mut lower, &event, &none);
        apply_event(&mut upper, &event, &none);
        let moved = match event.kind {
            EventKind::Jump { particle, .. }
            | EventKind::Sync { particle, .. }
            | EventKind::SyncAlone { particle } => particle,
        };
        // pairwise order implies rank-wise order; only fall back to the full
        // rank check when the moved pair broke it
        if lower.locations[moved] > upper.locations[moved] && !rankwise_dominated(&lower, &upper) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn rankwise_dominated(lower: &ParticleState, upper: &ParticleState) -> bool {
    let mut a: Vec<f64> = lower.locations.iter().map(|x| x + lower.offset).collect();
    let mut b: Vec<f64> = upper.locations.iter().map(|x| x + upper.offset).collect();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    a.iter().zip(&b).all(|(x, y)| x <= y)
}
