//! End-of-window population updates.
//!
//! Each ensemble is its own subpopulation: the GA recombines centres only
//! within an ensemble and every PSO swarm is bound to a single ensemble.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Ensemble, MicroClassifier, Model, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvolverKind {
    Ga,
    Pso,
    Static,
}

impl FromStr for EvolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ga" => Ok(EvolverKind::Ga),
            "pso" => Ok(EvolverKind::Pso),
            "static" => Ok(EvolverKind::Static),
            other => Err(Error::invalid(format!("unknown evolver {other:?}"))),
        }
    }
}

impl fmt::Display for EvolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvolverKind::Ga => "ga",
            EvolverKind::Pso => "pso",
            EvolverKind::Static => "static",
        })
    }
}

/// GA parent selection scheme.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    /// 2-way tournament.
    #[default]
    Tournament,
    /// Fitness-proportional.
    Roulette,
}

/// Hyperparameters for the evolvers. `None` fields are derived from the
/// shared radius and the stream dimension when a run starts:
/// mutation probability `1/D`, mutation sigma `radius/2`, vmax `2*radius`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolverConfig {
    pub kind: EvolverKind,
    pub selection: Selection,
    pub elitism: bool,
    pub ga_mutation_prob: Option<f64>,
    pub ga_mutation_sigma: Option<f64>,
    pub pso_inertia: f64,
    pub pso_cognitive: f64,
    pub pso_social: f64,
    pub pso_vmax: Option<f64>,
}

impl Default for EvolverConfig {
    fn default() -> Self {
        EvolverConfig {
            kind: EvolverKind::Ga,
            selection: Selection::Tournament,
            elitism: false,
            ga_mutation_prob: None,
            ga_mutation_sigma: None,
            pso_inertia: 0.72,
            pso_cognitive: 1.49,
            pso_social: 1.49,
            pso_vmax: None,
        }
    }
}

impl EvolverConfig {
    pub fn new(kind: EvolverKind) -> Self {
        EvolverConfig {
            kind,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.ga_mutation_prob {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("ga_mutation_prob must lie in [0,1], got {p}")));
            }
        }
        for (name, v) in [("ga_mutation_sigma", self.ga_mutation_sigma), ("pso_vmax", self.pso_vmax)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::invalid(format!("{name} must be > 0, got {v}")));
                }
            }
        }
        for (name, v) in [
            ("pso_inertia", self.pso_inertia),
            ("pso_cognitive", self.pso_cognitive),
            ("pso_social", self.pso_social),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    pub fn mutation_prob(&self, dim: usize) -> f64 {
        self.ga_mutation_prob.unwrap_or(1.0 / dim.max(1) as f64)
    }

    pub fn mutation_sigma(&self, radius: f64) -> f64 {
        self.ga_mutation_sigma.unwrap_or(radius / 2.0)
    }

    pub fn vmax(&self, radius: f64) -> f64 {
        self.pso_vmax.unwrap_or(2.0 * radius)
    }
}

/// One GA generation with full generational replacement.
///
/// Parents are picked into a pool the size of the ensemble, paired off in
/// pool order and recombined with single-cut crossover on the centres. An
/// odd parent left over is only mutated. Children restart at zero fitness.
pub fn ga_update<R: Rng + ?Sized>(
    ensemble: &mut Ensemble,
    config: &EvolverConfig,
    radius: f64,
    rng: &mut R,
) -> Result<()> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let n = ensemble.len();
    let dim = ensemble.members()[0].centre().dim();
    let fitness: Vec<f64> = ensemble.members().iter().map(MicroClassifier::fitness).collect();

    let pool: Vec<usize> = (0..n)
        .map(|_| match config.selection {
            Selection::Tournament => tournament(&fitness, rng),
            Selection::Roulette => roulette(&fitness, rng),
        })
        .collect();

    let mut children: Vec<Vec<f64>> = Vec::with_capacity(n);
    for pair in pool.chunks(2) {
        let a = ensemble.members()[pair[0]].centre().coords();
        match pair {
            [_, j] if dim > 1 => {
                let b = ensemble.members()[*j].centre().coords();
                let (c1, c2) = crossover(a, b, rng.random_range(1..dim));
                children.push(c1);
                children.push(c2);
            }
            [_, j] => {
                children.push(a.to_vec());
                children.push(ensemble.members()[*j].centre().coords().to_vec());
            }
            _ => children.push(a.to_vec()),
        }
    }

    let p_mut = config.mutation_prob(dim);
    let sigma = config.mutation_sigma(radius);
    if p_mut > 0.0 {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
        for child in &mut children {
            for x in child.iter_mut() {
                if rng.random_bool(p_mut) {
                    *x += normal.sample(rng);
                }
            }
        }
    }

    if config.elitism {
        let elite = argmax(&fitness);
        *children.last_mut().expect("n >= 1") = ensemble.members()[elite].centre().coords().to_vec();
    }

    let label = ensemble.label().clone();
    let members = children
        .into_iter()
        .map(|c| MicroClassifier::new(Point::from_raw(c), radius, label.clone()))
        .collect::<Result<Vec<_>>>()?;
    ensemble.replace_members(members);
    Ok(())
}

/// 2-way tournament: two uniform draws with replacement, the fitter wins and
/// ties are settled by a coin flip.
pub fn tournament<R: Rng + ?Sized>(fitness: &[f64], rng: &mut R) -> usize {
    let i = rng.random_range(0..fitness.len());
    let j = rng.random_range(0..fitness.len());
    if fitness[i] > fitness[j] {
        i
    } else if fitness[j] > fitness[i] {
        j
    } else if rng.random_bool(0.5) {
        i
    } else {
        j
    }
}

fn roulette<R: Rng + ?Sized>(fitness: &[f64], rng: &mut R) -> usize {
    let total: f64 = fitness.iter().sum();
    if total <= 0.0 {
        return rng.random_range(0..fitness.len());
    }
    let mut target = rng.random::<f64>() * total;
    for (i, f) in fitness.iter().enumerate() {
        if target < *f {
            return i;
        }
        target -= f;
    }
    // rounding left us past the end; fall back to the last non-zero entry
    fitness.iter().rposition(|&f| f > 0.0).unwrap_or(0)
}

/// Swaps the coordinate suffixes starting at `cut`.
pub(crate) fn crossover(a: &[f64], b: &[f64], cut: usize) -> (Vec<f64>, Vec<f64>) {
    let mut c1 = a[..cut].to_vec();
    c1.extend_from_slice(&b[cut..]);
    let mut c2 = b[..cut].to_vec();
    c2.extend_from_slice(&a[cut..]);
    (c1, c2)
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub velocity: Vec<f64>,
    pub pbest_position: Point,
    pub pbest_fitness: f64,
}

/// Memory of one swarm; particles line up 1:1 with the ensemble members.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwarmState {
    pub gbest_position: Point,
    pub gbest_fitness: f64,
    pub particles: Vec<ParticleState>,
}

impl SwarmState {
    /// Zero velocities, personal bests at the current centres.
    pub fn new(ensemble: &Ensemble) -> Result<Self> {
        let first = ensemble.members().first().ok_or(Error::EmptyEnsemble)?;
        let particles: Vec<ParticleState> = ensemble
            .members()
            .iter()
            .map(|c| ParticleState {
                velocity: vec![0.0; c.centre().dim()],
                pbest_position: c.centre().clone(),
                pbest_fitness: c.fitness(),
            })
            .collect();
        let mut swarm = SwarmState {
            gbest_position: first.centre().clone(),
            gbest_fitness: first.fitness(),
            particles,
        };
        swarm.refresh_gbest();
        Ok(swarm)
    }

    fn refresh_gbest(&mut self) {
        for p in &self.particles {
            if p.pbest_fitness > self.gbest_fitness {
                self.gbest_fitness = p.pbest_fitness;
                self.gbest_position = p.pbest_position.clone();
            }
        }
    }
}

/// One PSO step: refresh personal and swarm bests from the current fitness,
/// then move every particle with the inertia/cognitive/social rule and a
/// per-dimension speed clamp. Fitness, radius and label are left alone.
pub fn pso_update<R: Rng + ?Sized>(
    ensemble: &mut Ensemble,
    swarm: &mut SwarmState,
    config: &EvolverConfig,
    radius: f64,
    rng: &mut R,
) -> Result<()> {
    pso_update_with(ensemble, swarm, config, radius, || rng.random::<f64>())
}

pub(crate) fn pso_update_with(
    ensemble: &mut Ensemble,
    swarm: &mut SwarmState,
    config: &EvolverConfig,
    radius: f64,
    mut uniform: impl FnMut() -> f64,
) -> Result<()> {
    if swarm.particles.len() != ensemble.len() {
        return Err(Error::SwarmState {
            label: ensemble.label().to_string(),
            detail: format!(
                "{} particle states for {} classifiers",
                swarm.particles.len(),
                ensemble.len()
            ),
        });
    }
    let dim = swarm.gbest_position.dim();
    for (c, p) in ensemble.members().iter().zip(&swarm.particles) {
        if c.centre().dim() != dim || p.velocity.len() != dim || p.pbest_position.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: c.centre().dim(),
            });
        }
    }

    for (c, p) in ensemble.members().iter().zip(swarm.particles.iter_mut()) {
        if c.fitness() > p.pbest_fitness {
            p.pbest_fitness = c.fitness();
            p.pbest_position = c.centre().clone();
        }
    }
    swarm.refresh_gbest();

    let (w, c1, c2) = (config.pso_inertia, config.pso_cognitive, config.pso_social);
    let vmax = config.vmax(radius);
    let gbest = swarm.gbest_position.coords();
    for (c, p) in ensemble.members_mut().iter_mut().zip(swarm.particles.iter_mut()) {
        let pbest = p.pbest_position.coords();
        let x = c.centre_mut().coords_mut();
        for d in 0..dim {
            let r1 = uniform();
            let r2 = uniform();
            let v = w * p.velocity[d] + c1 * r1 * (pbest[d] - x[d]) + c2 * r2 * (gbest[d] - x[d]);
            let v = v.clamp(-vmax, vmax);
            p.velocity[d] = v;
            x[d] += v;
        }
    }
    Ok(())
}

/// The non-adaptive baseline: the ensemble is left exactly as it is.
pub fn static_update(ensemble: &Ensemble) -> Ensemble {
    ensemble.clone()
}

#[derive(Clone, Debug)]
enum SubpopState {
    Ga,
    Pso(SwarmState),
    Static,
}

/// Applies the configured evolver to every ensemble of a model.
///
/// Each ensemble owns a random stream derived from the run seed and its
/// ensemble index, so the result does not depend on update order.
#[derive(Clone, Debug)]
pub struct Evolver {
    config: EvolverConfig,
    radius: f64,
    states: Vec<SubpopState>,
    rngs: Vec<ChaCha8Rng>,
}

/// Stream ids 0..=15 are reserved for non-evolver uses of the run seed.
const EVOLVER_STREAM_BASE: u64 = 16;

impl Evolver {
    pub fn new(config: EvolverConfig, model: &Model, seed: u64) -> Result<Self> {
        config.validate()?;
        let states = model
            .ensembles()
            .iter()
            .map(|e| {
                Ok(match config.kind {
                    EvolverKind::Ga => SubpopState::Ga,
                    EvolverKind::Pso => SubpopState::Pso(SwarmState::new(e)?),
                    EvolverKind::Static => SubpopState::Static,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let rngs = (0..model.ensembles().len())
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(EVOLVER_STREAM_BASE + i as u64);
                rng
            })
            .collect();
        Ok(Evolver {
            config,
            radius: model.radius(),
            states,
            rngs,
        })
    }

    pub fn config(&self) -> &EvolverConfig {
        &self.config
    }

    pub fn swarm(&self, ensemble_index: usize) -> Option<&SwarmState> {
        match self.states.get(ensemble_index) {
            Some(SubpopState::Pso(s)) => Some(s),
            _ => None,
        }
    }

    pub fn update(&mut self, model: &mut Model) -> Result<()> {
        let ensembles = model.ensembles_mut();
        if ensembles.len() != self.states.len() {
            return Err(Error::invalid("evolver was built for a different model"));
        }
        for ((ensemble, state), rng) in ensembles.iter_mut().zip(&mut self.states).zip(&mut self.rngs) {
            match state {
                SubpopState::Ga => ga_update(ensemble, &self.config, self.radius, rng)?,
                SubpopState::Pso(swarm) => pso_update(ensemble, swarm, &self.config, self.radius, rng)?,
                SubpopState::Static => {}
            }
        }
        Ok(())
    }
}
