//! Feasibility oracles for contribution vectors.
//!
//! A hypothesis `h` is ε-bad for agent `i` under target `t` when
//! `D_i(DIS(t, h)) > ε`. With realizable labels the target is always
//! consistent, so ERM fails agent `i` exactly when some ε-bad hypothesis
//! survives, i.e. its disagreement region receives no sample. Everything
//! here is computed exactly; [`monte_carlo`] gives an independent estimate
//! by simulating datasets.

pub mod monte_carlo;
mod union;

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{ContributionVector, Instance};
use crate::region::PointSet;
use union::UnionPlan;

pub use monte_carlo::{monte_carlo_pac_failure, McConfig, McEstimate};

/// Masses within this distance of ε are not bad.
pub const BAD_MASS_SLACK: f64 = 1e-12;

pub const DEFAULT_EXACT_CAP: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Pac,
    Expected,
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pac" => Ok(Objective::Pac),
            "expected" => Ok(Objective::Expected),
            other => Err(Error::invalid(format!("unknown objective `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLimits {
    /// Exact inclusion-exclusion is allowed up to `2^exact_cap - 1` terms,
    /// which for an unstructured bad set means `|B| <= exact_cap`.
    pub exact_cap: u32,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            exact_cap: DEFAULT_EXACT_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FailureProbability {
    pub value: f64,
    pub target: usize,
    pub agent: usize,
}

pub fn is_bad_mass(mass: f64, epsilon: f64) -> bool {
    mass > epsilon + BAD_MASS_SLACK
}

/// Competitors of `target` that are ε-bad for `agent`.
pub fn bad_set(instance: &Instance, target: usize, agent: usize) -> Vec<usize> {
    (0..instance.num_hypotheses())
        .filter(|&h| h != target && is_bad_mass(instance.pair_mass(agent, target, h), instance.epsilon()))
        .collect()
}

struct ExpectedPlan {
    /// Positive masses in non-increasing order (ties by hypothesis index).
    masses: Vec<f64>,
    /// `prefixes[j]` evaluates `P(E_(0) or ... or E_(j))`.
    prefixes: Vec<UnionPlan>,
}

/// Exact oracle bound to one instance. Region families are analysed once at
/// construction; evaluations for different vectors reuse them.
pub struct Oracle<'a> {
    instance: &'a Instance,
    limits: OracleLimits,
    distributions: Vec<&'a [f64]>,
    pac_plans: Vec<UnionPlan>,
    expected_plans: OnceLock<Vec<ExpectedPlan>>,
}

impl<'a> Oracle<'a> {
    pub fn new(instance: &'a Instance) -> Self {
        Self::with_limits(instance, OracleLimits::default())
    }

    pub fn with_limits(instance: &'a Instance, limits: OracleLimits) -> Self {
        let distributions: Vec<&[f64]> = instance.agents().iter().map(|a| a.distribution()).collect();
        let k = instance.num_agents();
        let mut pac_plans = Vec::with_capacity(instance.num_hypotheses() * k);
        for target in 0..instance.num_hypotheses() {
            for agent in 0..k {
                let regions = bad_set(instance, target, agent)
                    .into_iter()
                    .map(|h| instance.region(target, h).clone())
                    .collect();
                pac_plans.push(UnionPlan::build(regions, &distributions, limits.exact_cap));
            }
        }
        Oracle {
            instance,
            limits,
            distributions,
            pac_plans,
            expected_plans: OnceLock::new(),
        }
    }

    pub fn instance(&self) -> &'a Instance {
        self.instance
    }

    pub fn limits(&self) -> OracleLimits {
        self.limits
    }

    fn check_indices(&self, m: &ContributionVector, target: usize, agent: usize) -> Result<()> {
        self.instance.check_vector(m)?;
        if target >= self.instance.num_hypotheses() {
            return Err(Error::invalid(format!("target index {target} out of range")));
        }
        if agent >= self.instance.num_agents() {
            return Err(Error::invalid(format!("agent index {agent} out of range")));
        }
        Ok(())
    }

    /// `prod_i (1 - D_i(region))^{m_i}`.
    pub fn survival_probability(&self, m: &ContributionVector, region: &PointSet) -> Result<f64> {
        self.instance.check_vector(m)?;
        if region.universe() != self.instance.domain().size() {
            return Err(Error::invalid("region is not over this instance's domain"));
        }
        let masses: Vec<f64> = self.distributions.iter().map(|d| region.mass(d)).collect();
        Ok(union::survival(&masses, m.counts()))
    }

    pub fn pac_failure_probability(
        &self,
        m: &ContributionVector,
        target: usize,
        agent: usize,
    ) -> Result<FailureProbability> {
        self.check_indices(m, target, agent)?;
        let plan = &self.pac_plans[target * self.instance.num_agents() + agent];
        Ok(FailureProbability {
            value: plan.probability(m.counts(), &self.distributions)?,
            target,
            agent,
        })
    }

    /// Number of inclusion-exclusion terms behind one failure probability.
    pub fn pac_terms(&self, target: usize, agent: usize) -> u64 {
        self.pac_plans[target * self.instance.num_agents() + agent].terms()
    }

    /// Agent `agent`'s (ε,δ)-requirement: failure ≤ δ for every target.
    pub fn agent_requirement_met(&self, m: &ContributionVector, agent: usize) -> Result<bool> {
        for target in 0..self.instance.num_hypotheses() {
            if self.pac_failure_probability(m, target, agent)?.value > self.instance.delta() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn pac_feasible(&self, m: &ContributionVector) -> Result<bool> {
        for agent in 0..self.instance.num_agents() {
            if !self.agent_requirement_met(m, agent)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn expected_plans(&self) -> &[ExpectedPlan] {
        self.expected_plans.get_or_init(|| {
            let inst = self.instance;
            let mut plans = Vec::with_capacity(inst.num_hypotheses() * inst.num_agents());
            for target in 0..inst.num_hypotheses() {
                for agent in 0..inst.num_agents() {
                    let mut order: Vec<(usize, f64)> = (0..inst.num_hypotheses())
                        .filter(|&h| h != target)
                        .map(|h| (h, inst.pair_mass(agent, target, h)))
                        .filter(|&(_, a)| a > 0.0)
                        .collect();
                    order.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
                    let prefixes = (1..=order.len())
                        .map(|j| {
                            let regions = order[..j]
                                .iter()
                                .map(|&(h, _)| inst.region(target, h).clone())
                                .collect();
                            UnionPlan::build(regions, &self.distributions, self.limits.exact_cap)
                        })
                        .collect();
                    plans.push(ExpectedPlan {
                        masses: order.into_iter().map(|(_, a)| a).collect(),
                        prefixes,
                    });
                }
            }
            plans
        })
    }

    /// Expected error on `D_agent` of the worst consistent hypothesis:
    /// `sum_j a_(j) * P(E_(j) and every larger-mass region was hit)`.
    pub fn expected_erm_error(&self, m: &ContributionVector, target: usize, agent: usize) -> Result<f64> {
        self.check_indices(m, target, agent)?;
        let plan = &self.expected_plans()[target * self.instance.num_agents() + agent];
        let mut previous = 0.0;
        let mut total = 0.0;
        for (a, prefix) in plan.masses.iter().zip(&plan.prefixes) {
            let union = prefix.probability(m.counts(), &self.distributions)?;
            // P(E_(j) and not E_(t) for t < j) = P(first j) - P(first j-1)
            total += a * (union - previous).max(0.0);
            previous = union;
        }
        Ok(total)
    }

    pub fn agent_expected_met(&self, m: &ContributionVector, agent: usize) -> Result<bool> {
        for target in 0..self.instance.num_hypotheses() {
            if self.expected_erm_error(m, target, agent)? > self.instance.epsilon() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn expected_feasible(&self, m: &ContributionVector) -> Result<bool> {
        for agent in 0..self.instance.num_agents() {
            if !self.agent_expected_met(m, agent)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn requirement_met(&self, objective: Objective, m: &ContributionVector, agent: usize) -> Result<bool> {
        match objective {
            Objective::Pac => self.agent_requirement_met(m, agent),
            Objective::Expected => self.agent_expected_met(m, agent),
        }
    }

    pub fn feasible(&self, objective: Objective, m: &ContributionVector) -> Result<bool> {
        match objective {
            Objective::Pac => self.pac_feasible(m),
            Objective::Expected => self.expected_feasible(m),
        }
    }

    /// Union-bound cap `ceil(ln(H/δ)/ε)` on any agent's solo sample count.
    pub fn solo_search_cap(&self) -> u64 {
        let h = self.instance.num_hypotheses() as f64;
        ((h / self.instance.delta()).ln() / self.instance.epsilon()).ceil() as u64
    }

    /// `n_i^ind`: fewest samples agent `agent` needs alone for its own
    /// requirement, by binary search on the monotone indicator.
    pub fn individual_sample_complexity(&self, agent: usize) -> Result<u64> {
        self.individual_complexity(Objective::Pac, agent)
    }

    pub fn individual_complexity(&self, objective: Objective, agent: usize) -> Result<u64> {
        if agent >= self.instance.num_agents() {
            return Err(Error::invalid(format!("agent index {agent} out of range")));
        }
        let k = self.instance.num_agents();
        let solo = |n: u64| {
            let m = ContributionVector::zeros(k).with(agent, n);
            self.requirement_met(objective, &m, agent)
        };
        if solo(0)? {
            return Ok(0);
        }
        let mut hi = match objective {
            Objective::Pac => self.solo_search_cap().max(1),
            Objective::Expected => 1,
        };
        while !solo(hi)? {
            if objective == Objective::Pac || hi > 1 << 40 {
                return Err(Error::Infeasible(format!(
                    "agent {agent} cannot meet its own requirement within {hi} samples"
                )));
            }
            hi *= 2;
        }
        let mut lo = 0; // infeasible
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if solo(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

pub fn survival_probability(instance: &Instance, m: &ContributionVector, region: &PointSet) -> Result<f64> {
    Oracle::new(instance).survival_probability(m, region)
}

pub fn pac_failure_probability(
    instance: &Instance,
    m: &ContributionVector,
    target: usize,
    agent: usize,
) -> Result<FailureProbability> {
    Oracle::new(instance).pac_failure_probability(m, target, agent)
}

pub fn pac_feasible(instance: &Instance, m: &ContributionVector) -> Result<bool> {
    Oracle::new(instance).pac_feasible(m)
}

pub fn expected_erm_error(instance: &Instance, m: &ContributionVector, target: usize, agent: usize) -> Result<f64> {
    Oracle::new(instance).expected_erm_error(m, target, agent)
}

pub fn expected_feasible(instance: &Instance, m: &ContributionVector) -> Result<bool> {
    Oracle::new(instance).expected_feasible(m)
}

pub fn individual_sample_complexity(instance: &Instance, agent: usize) -> Result<u64> {
    Oracle::new(instance).individual_sample_complexity(agent)
}

#[cfg(test)]
mod tests;
