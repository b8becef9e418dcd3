//! Simulation estimate of the PAC failure probability.
//!
//! Each trial draws the pooled dataset, labels it with the target, and asks
//! the pessimistic ERM for the worst true error (on the audited agent's
//! distribution) among all hypotheses with zero empirical error. Trial `t`
//! uses its own ChaCha stream `(seed, t)`, so the estimate does not depend
//! on how trials are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::Serialize;

use super::is_bad_mass;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::instance::{ContributionVector, Instance};
use crate::region::PointSet;

const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy)]
pub struct McConfig {
    pub trials: usize,
    pub seed: u64,
    pub exec: Exec,
}

impl McConfig {
    pub fn new(trials: usize, seed: u64) -> Self {
        McConfig {
            trials,
            seed,
            exec: Exec::default(),
        }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub failures: u64,
    pub trials: usize,
}

impl McEstimate {
    fn from_counts(failures: u64, trials: usize) -> Self {
        let p = failures as f64 / trials as f64;
        McEstimate {
            estimate: p,
            std_error: (p * (1.0 - p) / trials as f64).sqrt(),
            failures,
            trials,
        }
    }

    /// Whether `value` lies within `z` standard errors of the estimate. A
    /// zero standard error only admits an exact match.
    pub fn agrees_with(&self, value: f64, z: f64) -> bool {
        (self.estimate - value).abs() <= z * self.std_error + 1e-12
    }
}

pub(crate) struct Sampler {
    draws: Vec<(usize, WeightedAliasIndex<f64>)>,
    universe: usize,
}

impl Sampler {
    pub(crate) fn new(instance: &Instance, m: &ContributionVector) -> Result<Self> {
        instance.check_vector(m)?;
        let mut draws = Vec::new();
        for (agent, &mi) in instance.agents().iter().zip(m.counts()) {
            if mi == 0 {
                continue;
            }
            let alias = WeightedAliasIndex::new(agent.distribution().to_vec())
                .map_err(|e| Error::invalid(format!("cannot sample agent distribution: {e}")))?;
            draws.push((mi as usize, alias));
        }
        Ok(Sampler {
            draws,
            universe: instance.domain().size(),
        })
    }

    /// Set of distinct points seen in trial `trial`.
    pub(crate) fn sample(&self, seed: u64, trial: u64) -> PointSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        let mut seen = PointSet::empty(self.universe);
        for (count, alias) in &self.draws {
            for _ in 0..*count {
                seen.insert(alias.sample(&mut rng));
            }
        }
        seen
    }
}

pub fn monte_carlo_pac_failure(
    instance: &Instance,
    m: &ContributionVector,
    target: usize,
    agent: usize,
    config: McConfig,
) -> Result<McEstimate> {
    if config.trials == 0 {
        return Err(Error::invalid("Monte Carlo needs at least one trial"));
    }
    if target >= instance.num_hypotheses() || agent >= instance.num_agents() {
        return Err(Error::invalid("target or agent index out of range"));
    }
    let sampler = Sampler::new(instance, m)?;
    let competitors: Vec<(&PointSet, f64)> = (0..instance.num_hypotheses())
        .filter(|&h| h != target)
        .map(|h| (instance.region(target, h), instance.pair_mass(agent, target, h)))
        .collect();
    let eps = instance.epsilon();
    let failures = config.exec.sum_range(config.trials, CHUNK, |t| {
        let seen = sampler.sample(config.seed, t as u64);
        let worst = competitors
            .iter()
            .filter(|(region, _)| region.is_disjoint(&seen))
            .map(|&(_, mass)| mass)
            .fold(0.0, f64::max);
        u64::from(is_bad_mass(worst, eps))
    });
    Ok(McEstimate::from_counts(failures, config.trials))
}
