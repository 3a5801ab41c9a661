//! Binary particle swarm optimization over bit masks, with linearly scheduled
//! inertia and acceleration coefficients.
//!
//! Positions are bit vectors; velocities are mapped through a sigmoid to the
//! probability of a bit being set. Each particle draws from its own seeded
//! ChaCha stream so a run is reproducible regardless of evaluation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Velocities are clamped to `[-VELOCITY_LIMIT, VELOCITY_LIMIT]`.
pub const VELOCITY_LIMIT: f64 = 6.0;

pub type SwarmRng = ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmConfig {
    pub swarm_size: usize,
    pub dims: usize,
    pub max_iter: usize,
    pub w_max: f64,
    pub w_min: f64,
    /// Cognitive coefficient at t = 0 and t = T.
    pub c1_start: f64,
    pub c1_end: f64,
    /// Social coefficient at t = 0 and t = T.
    pub c2_start: f64,
    pub c2_end: f64,
    pub seed: u64,
}

impl SwarmConfig {
    /// Default schedules: inertia 0.9 -> 0.4, c1 0.5 -> 2.5, c2 2.5 -> 0.5.
    pub fn new(swarm_size: usize, dims: usize, max_iter: usize, seed: u64) -> Self {
        SwarmConfig {
            swarm_size,
            dims,
            max_iter,
            w_max: 0.9,
            w_min: 0.4,
            c1_start: 0.5,
            c1_end: 2.5,
            c2_start: 2.5,
            c2_end: 0.5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.swarm_size == 0 || self.dims == 0 {
            return Err(Error::InvalidConfig(format!(
                "swarm needs at least one particle and one dimension (got {} x {})",
                self.swarm_size, self.dims
            )));
        }
        if !(self.w_max > self.w_min) {
            return Err(Error::InvalidConfig(format!(
                "w_max ({}) must exceed w_min ({})",
                self.w_max, self.w_min
            )));
        }
        Ok(())
    }
}

fn schedule_fraction(t: usize, total: usize) -> Result<f64> {
    if total == 0 {
        return Err(Error::InvalidConfig("iteration budget T must be >= 1".into()));
    }
    if t > total {
        return Err(Error::InvalidConfig(format!("iteration {t} exceeds T = {total}")));
    }
    Ok(t as f64 / total as f64)
}

/// Linearly decreasing inertia `w_max - (w_max - w_min) t / T`.
pub fn schedule_inertia(t: usize, total: usize, w_max: f64, w_min: f64) -> Result<f64> {
    let frac = schedule_fraction(t, total)?;
    Ok(w_max - (w_max - w_min) * frac)
}

/// Linearly varying `(c1, c2)`.
pub fn schedule_accel(t: usize, total: usize, config: &SwarmConfig) -> Result<(f64, f64)> {
    let frac = schedule_fraction(t, total)?;
    Ok((
        (config.c1_end - config.c1_start) * frac + config.c1_start,
        (config.c2_end - config.c2_start) * frac + config.c2_start,
    ))
}

/// Sigmoid transfer from velocity to bit probability.
pub fn transfer(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

#[inline]
fn bit(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Per-dimension velocity update with explicit random draws, clamped.
#[allow(clippy::too_many_arguments)]
pub fn velocity_component(
    v: f64,
    x: bool,
    pbest: bool,
    gbest: bool,
    w: f64,
    c1: f64,
    c2: f64,
    r1: f64,
    r2: f64,
) -> f64 {
    let next = w * v + c1 * r1 * (bit(pbest) - bit(x)) + c2 * r2 * (bit(gbest) - bit(x));
    next.clamp(-VELOCITY_LIMIT, VELOCITY_LIMIT)
}

/// Bit is set iff `r3 < transfer(v)`.
pub fn position_bit(v: f64, r3: f64) -> bool {
    r3 < transfer(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub position: Vec<bool>,
    pub velocity: Vec<f64>,
    pub pbest_position: Vec<bool>,
    pub pbest_fitness: f64,
}

/// New velocity for `p`, drawing `r1`, `r2` independently per dimension.
pub fn update_velocity<R: Rng>(
    p: &Particle,
    gbest: &[bool],
    w: f64,
    c1: f64,
    c2: f64,
    rng: &mut R,
) -> Vec<f64> {
    p.velocity
        .iter()
        .zip(&p.position)
        .zip(&p.pbest_position)
        .zip(gbest)
        .map(|(((&v, &x), &pb), &gb)| {
            let r1: f64 = rng.random();
            let r2: f64 = rng.random();
            velocity_component(v, x, pb, gb, w, c1, c2, r1, r2)
        })
        .collect()
}

pub fn update_position<R: Rng>(v: f64, rng: &mut R) -> bool {
    position_bit(v, rng.random())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmState {
    pub particles: Vec<Particle>,
    pub gbest_position: Vec<bool>,
    pub gbest_fitness: f64,
    pub iteration: usize,
}

/// Applies the personal- and global-best rules for freshly evaluated
/// positions. Both replacements require strictly lower fitness; non-finite
/// fitness counts as `+inf`. Returns whether the global best moved.
pub fn update_bests(state: &mut SwarmState, fitness: &[f64]) -> Result<bool> {
    if fitness.len() != state.particles.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} fitness values for {} particles",
            fitness.len(),
            state.particles.len()
        )));
    }
    for (p, &f) in state.particles.iter_mut().zip(fitness) {
        let f = if f.is_finite() { f } else { f64::INFINITY };
        if f < p.pbest_fitness {
            p.pbest_fitness = f;
            p.pbest_position.clone_from(&p.position);
        }
    }
    let mut improved = false;
    for p in &state.particles {
        if p.pbest_fitness < state.gbest_fitness {
            state.gbest_fitness = p.pbest_fitness;
            state.gbest_position.clone_from(&p.pbest_position);
            improved = true;
        }
    }
    Ok(improved)
}

/// Fitness to minimize over bit masks.
pub trait Objective {
    fn evaluate(&mut self, bits: &[bool]) -> Result<f64>;

    /// Hook to fix infeasible positions before evaluation; the repaired
    /// position is what the particle keeps.
    fn repair(&mut self, _bits: &mut [bool], _rng: &mut SwarmRng) {}
}

/// Adapts a closure into an [`Objective`].
pub struct FnObjective<F>(pub F);

impl<F> Objective for FnObjective<F>
where
    F: FnMut(&[bool]) -> Result<f64>,
{
    fn evaluate(&mut self, bits: &[bool]) -> Result<f64> {
        (self.0)(bits)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpsoResult {
    pub gbest_position: Vec<bool>,
    pub gbest_fitness: f64,
    /// Global-best fitness after initialization and after each iteration.
    pub history: Vec<f64>,
    pub final_state: SwarmState,
}

fn particle_rng(seed: u64, index: usize) -> SwarmRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

fn evaluate_all<O: Objective>(objective: &mut O, state: &SwarmState) -> Result<Vec<f64>> {
    state
        .particles
        .iter()
        .map(|p| objective.evaluate(&p.position))
        .collect()
}

/// Runs the swarm for `config.max_iter` synchronous iterations: every particle
/// moves, the batch is evaluated, then the bests are updated.
pub fn run<O: Objective>(config: &SwarmConfig, objective: &mut O) -> Result<BpsoResult> {
    config.validate()?;
    let mut rngs: Vec<SwarmRng> = (0..config.swarm_size)
        .map(|i| particle_rng(config.seed, i))
        .collect();

    let particles = rngs
        .iter_mut()
        .map(|rng| {
            let mut position: Vec<bool> = (0..config.dims).map(|_| rng.random_bool(0.5)).collect();
            objective.repair(&mut position, rng);
            let velocity = (0..config.dims).map(|_| rng.random_range(-1.0..1.0)).collect();
            Particle {
                pbest_position: position.clone(),
                position,
                velocity,
                pbest_fitness: f64::INFINITY,
            }
        })
        .collect::<Vec<_>>();
    let mut state = SwarmState {
        gbest_position: particles[0].position.clone(),
        gbest_fitness: f64::INFINITY,
        particles,
        iteration: 0,
    };
    let fitness = evaluate_all(objective, &state)?;
    update_bests(&mut state, &fitness)?;
    let mut history = vec![state.gbest_fitness];

    for t in 0..config.max_iter {
        let w = schedule_inertia(t, config.max_iter, config.w_max, config.w_min)?;
        let (c1, c2) = schedule_accel(t, config.max_iter, config)?;
        let gbest = state.gbest_position.clone();
        for (p, rng) in state.particles.iter_mut().zip(rngs.iter_mut()) {
            p.velocity = update_velocity(p, &gbest, w, c1, c2, rng);
            for (x, &v) in p.position.iter_mut().zip(&p.velocity) {
                *x = update_position(v, rng);
            }
            objective.repair(&mut p.position, rng);
        }
        let fitness = evaluate_all(objective, &state)?;
        let before = state.gbest_fitness;
        update_bests(&mut state, &fitness)?;
        debug_assert!(state.gbest_fitness <= before);
        state.iteration = t + 1;
        history.push(state.gbest_fitness);
    }

    Ok(BpsoResult {
        gbest_position: state.gbest_position.clone(),
        gbest_fitness: state.gbest_fitness,
        history,
        final_state: state,
    })
}
