//! The contribution game played without a planner.
//!
//! Agent `i` picks `m_i`, pays `c_i m_i`, and receives 1 if the pooled
//! sample meets its own (ε,δ)-requirement. Contributing more than the solo
//! requirement `n_i^ind` is strictly dominated by contributing exactly
//! `n_i^ind`, so pure equilibria can be enumerated inside the box
//! `prod_i [0, n_i^ind]`.

use std::collections::HashSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact;
use crate::exec::Exec;
use crate::instance::{AgentSpec, ContributionVector, Domain, Hypothesis, HypothesisClass, Instance};
use crate::oracle::{Objective, Oracle};

pub const DEFAULT_ENUM_CAP: u64 = 1_000_000;
pub const DEFAULT_MAX_SWEEPS: usize = 1_000;
const UTILITY_TOL: f64 = 1e-12;
const SHARD: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrStep {
    pub agent: usize,
    pub from: u64,
    pub to: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameOutcome {
    pub pure_ne: Vec<ContributionVector>,
    pub best_ne_cost: Option<f64>,
    pub opt_cost: Option<f64>,
    pub pos: Option<f64>,
    pub br_trace: Option<Vec<BrStep>>,
    pub individual: Vec<u64>,
    pub box_size: u64,
    pub status: String,
}

/// Game view of an instance with the solo requirements precomputed.
pub struct Game<'a> {
    oracle: Oracle<'a>,
    individual: Vec<u64>,
}

impl<'a> Game<'a> {
    pub fn new(instance: &'a Instance) -> Result<Self> {
        Self::with_oracle(Oracle::new(instance))
    }

    pub fn with_oracle(oracle: Oracle<'a>) -> Result<Self> {
        let individual = (0..oracle.instance().num_agents())
            .map(|i| oracle.individual_sample_complexity(i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Game { oracle, individual })
    }

    pub fn oracle(&self) -> &Oracle<'a> {
        &self.oracle
    }

    pub fn instance(&self) -> &'a Instance {
        self.oracle.instance()
    }

    pub fn individual(&self) -> &[u64] {
        &self.individual
    }

    pub fn utility(&self, m: &ContributionVector, agent: usize) -> Result<f64> {
        let met = self.oracle.agent_requirement_met(m, agent)?;
        Ok(f64::from(u8::from(met)) - self.instance().agent(agent).cost() * m.0[agent] as f64)
    }

    /// Smallest own contribution meeting the agent's requirement given the
    /// others' entries of `m` (entry `agent` is ignored).
    pub fn threshold(&self, m: &ContributionVector, agent: usize) -> Result<u64> {
        let met = |v: u64| self.oracle.agent_requirement_met(&m.with(agent, v), agent);
        if met(0)? {
            return Ok(0);
        }
        let (mut lo, mut hi) = (0, self.individual[agent]);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if met(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Utility-maximising contribution, ties toward the smaller value.
    pub fn best_response(&self, m: &ContributionVector, agent: usize) -> Result<u64> {
        let t = self.threshold(m, agent)?;
        Ok(if self.instance().agent(agent).cost() * (t as f64) < 1.0 {
            t
        } else {
            0
        })
    }

    pub fn is_pure_ne(&self, m: &ContributionVector) -> Result<bool> {
        for agent in 0..self.instance().num_agents() {
            let br = self.best_response(m, agent)?;
            if br == m.0[agent] {
                continue;
            }
            if self.utility(&m.with(agent, br), agent)? > self.utility(m, agent)? + UTILITY_TOL {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn box_size(&self) -> u64 {
        self.individual
            .iter()
            .try_fold(1u64, |acc, &n| acc.checked_mul(n + 1))
            .unwrap_or(u64::MAX)
    }

    fn decode(&self, mut index: u64) -> ContributionVector {
        let mut m = vec![0; self.individual.len()];
        for (slot, &n) in m.iter_mut().zip(&self.individual) {
            *slot = index % (n + 1);
            index /= n + 1;
        }
        ContributionVector(m)
    }

    /// All pure equilibria in the strategy box, sorted.
    pub fn pure_equilibria(&self, enum_cap: u64, exec: Exec) -> Result<Vec<ContributionVector>> {
        let size = self.box_size();
        if size > enum_cap {
            return Err(Error::Capacity {
                what: "strategy profiles",
                needed: size,
                limit: enum_cap,
                hint: "run best-response dynamics instead or raise ENUM_CAP",
            });
        }
        let size = size as usize;
        let shards = exec.map_range(size.div_ceil(SHARD), |s| -> Result<Vec<ContributionVector>> {
            let mut found = Vec::new();
            for idx in s * SHARD..((s + 1) * SHARD).min(size) {
                let m = self.decode(idx as u64);
                if self.is_pure_ne(&m)? {
                    found.push(m);
                }
            }
            Ok(found)
        });
        let mut all = Vec::new();
        for shard in shards {
            all.extend(shard?);
        }
        all.sort();
        Ok(all)
    }
}

pub fn utility(instance: &Instance, m: &ContributionVector, agent: usize) -> Result<f64> {
    instance.check_vector(m)?;
    let met = Oracle::new(instance).agent_requirement_met(m, agent)?;
    Ok(f64::from(u8::from(met)) - instance.agent(agent).cost() * m.0[agent] as f64)
}

pub fn best_response(instance: &Instance, m: &ContributionVector, agent: usize) -> Result<u64> {
    instance.check_vector(m)?;
    Game::new(instance)?.best_response(m, agent)
}

fn outcome(game: &Game, pure_ne: Vec<ContributionVector>, status: &str) -> GameOutcome {
    let costs = game.instance().costs();
    let best_ne_cost = pure_ne.iter().map(|m| m.cost(&costs)).min_by(f64::total_cmp);
    GameOutcome {
        pure_ne,
        best_ne_cost,
        opt_cost: None,
        pos: None,
        br_trace: None,
        individual: game.individual.clone(),
        box_size: game.box_size(),
        status: status.to_string(),
    }
}

pub fn enumerate_pure_ne(instance: &Instance, enum_cap: u64, exec: Exec) -> Result<GameOutcome> {
    enumerate_pure_ne_with(Oracle::new(instance), enum_cap, exec)
}

pub fn enumerate_pure_ne_with(oracle: Oracle, enum_cap: u64, exec: Exec) -> Result<GameOutcome> {
    let game = Game::with_oracle(oracle)?;
    let ne = game.pure_equilibria(enum_cap, exec)?;
    let status = if ne.is_empty() { "no pure equilibrium" } else { "ok" };
    Ok(outcome(&game, ne, status))
}

/// Cheapest pure equilibrium over the exact optimum (1 when both cost 0).
pub fn price_of_stability(instance: &Instance, enum_cap: u64, exec: Exec) -> Result<GameOutcome> {
    price_of_stability_with(Oracle::new(instance), enum_cap, exec)
}

pub fn price_of_stability_with(oracle: Oracle, enum_cap: u64, exec: Exec) -> Result<GameOutcome> {
    let game = Game::with_oracle(oracle)?;
    let ne = game.pure_equilibria(enum_cap, exec)?;
    let opt = exact::exact_min_cost_with(game.oracle(), Objective::Pac, None)?;
    let mut out = outcome(&game, ne, "ok");
    out.opt_cost = Some(opt.cost);
    match out.best_ne_cost {
        None => out.status = "no pure equilibrium; price of stability undefined".into(),
        Some(c) if opt.cost == 0.0 => out.pos = Some(if c == 0.0 { 1.0 } else { f64::INFINITY }),
        Some(c) => out.pos = Some(c / opt.cost),
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DynamicsEnd {
    Converged { profile: ContributionVector },
    Cycle { profile: ContributionVector, sweep: usize },
    Exhausted { sweeps: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dynamics {
    pub end: DynamicsEnd,
    pub trace: Vec<BrStep>,
}

/// Round-robin best-response dynamics. A profile seen again at the start
/// of a sweep is reported as a cycle.
pub fn best_response_dynamics(instance: &Instance, start: &ContributionVector, max_sweeps: usize) -> Result<Dynamics> {
    Game::new(instance)?.dynamics(start, max_sweeps)
}

impl Game<'_> {
    pub fn dynamics(&self, start: &ContributionVector, max_sweeps: usize) -> Result<Dynamics> {
        let instance = self.instance();
        instance.check_vector(start)?;
        let mut m = start.clone();
        let mut seen = HashSet::new();
        let mut trace = Vec::new();
        for sweep in 0..max_sweeps {
            if !seen.insert(m.clone()) {
                return Ok(Dynamics {
                    end: DynamicsEnd::Cycle { profile: m, sweep },
                    trace,
                });
            }
            let mut changed = false;
            for agent in 0..instance.num_agents() {
                let br = self.best_response(&m, agent)?;
                if br != m.0[agent] {
                    trace.push(BrStep {
                        agent,
                        from: m.0[agent],
                        to: br,
                    });
                    m.0[agent] = br;
                    changed = true;
                }
            }
            if !changed {
                return Ok(Dynamics {
                    end: DynamicsEnd::Converged { profile: m },
                    trace,
                });
            }
        }
        Ok(Dynamics {
            end: DynamicsEnd::Exhausted { sweeps: max_sweeps },
            trace,
        })
    }
}

/// Three agents on three points, each one's mass split 1/3 : 2/3 over two
/// consecutive points of the cycle. Every agent is satisfied exactly when
/// it or its successor samples, so no pure equilibrium exists.
pub fn nonexistence_instance() -> Instance {
    let third = 1.0 / 3.0;
    let rows = [
        vec![third, 2.0 * third, 0.0],
        vec![0.0, third, 2.0 * third],
        vec![2.0 * third, 0.0, third],
    ];
    Instance::new(
        Domain::new(3).expect("nonzero domain"),
        HypothesisClass::all_labelings(3).expect("small class"),
        rows.into_iter()
            .map(|d| AgentSpec::new(d, 0.5).expect("valid agent"))
            .collect(),
        third,
        2.0 * third,
    )
    .expect("valid instance")
}

/// Two points, Alice mostly on the first and Bob mostly on the second,
/// each placing `2ε` on the other's point; class of all four labelings.
pub fn alice_bob_instance(epsilon: f64, delta: f64, cost: f64) -> Result<Instance> {
    if !(epsilon > 0.0 && epsilon < 0.25) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1/4), got {epsilon}")));
    }
    Instance::new(
        Domain::new(2)?,
        HypothesisClass::all_labelings(2)?,
        vec![
            AgentSpec::new(vec![1.0 - 2.0 * epsilon, 2.0 * epsilon], cost)?,
            AgentSpec::new(vec![2.0 * epsilon, 1.0 - 2.0 * epsilon], cost)?,
        ],
        epsilon,
        delta,
    )
}

/// The δ at which one sample from each agent is exactly enough.
pub fn alice_bob_delta(epsilon: f64) -> f64 {
    1.0 - (1.0 - 2.0 * epsilon).powi(2)
}

/// Number of Alice points in [`pos_instance`]: the least integer at least
/// `1/(2ε)`.
pub fn pos_points(epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1/2), got {epsilon}")));
    }
    let n = (1.0 / (2.0 * epsilon) - 1e-9).ceil().max(1.0);
    if n >= 1.0 / epsilon {
        return Err(Error::invalid(format!(
            "no integer n with 1/(2ε) <= n < 1/ε for ε = {epsilon}"
        )));
    }
    Ok(n as usize)
}

/// Alice is uniform on `x_1..x_n`; Bob puts ε on `z` and the rest on `y`.
/// The class is the all-negative hypothesis plus, for each `i`, the
/// hypothesis labelling `x_i` and `z` positive. Both agents pay
/// `1/(2·ceil(n ln(n/δ)) + 2)` per sample, so solo learning is affordable.
pub fn pos_instance(epsilon: f64, delta: f64) -> Result<Instance> {
    let n = pos_points(epsilon)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0,1), got {delta}")));
    }
    let (y, z) = (n, n + 1);
    let size = n + 2;
    let mut hyps = vec![Hypothesis::from_positives(size, [])];
    hyps.extend((0..n).map(|i| Hypothesis::from_positives(size, [i, z])));
    let mut alice = vec![1.0 / n as f64; n];
    alice.extend([0.0, 0.0]);
    let mut bob = vec![0.0; size];
    bob[y] = 1.0 - epsilon;
    bob[z] = epsilon;
    let cost = 1.0 / (2.0 * (n as f64 * (n as f64 / delta).ln()).ceil() + 2.0);
    Instance::new(
        Domain::new(size)?,
        HypothesisClass::new(hyps)?,
        vec![AgentSpec::new(alice, cost)?, AgentSpec::new(bob, cost)?],
        epsilon,
        delta,
    )
}

/// `(ln(1/ε) + ln(1/δ)) / ln(1/δ)`.
pub fn pos_formula(epsilon: f64, delta: f64) -> f64 {
    let inv = (1.0 / delta).ln();
    ((1.0 / epsilon).ln() + inv) / inv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclic_instance_has_no_pure_ne() {
        let inst = nonexistence_instance();
        let out = enumerate_pure_ne(&inst, DEFAULT_ENUM_CAP, Exec::Sequential).unwrap();
        assert!(out.pure_ne.is_empty());
        assert_eq!(out.individual, vec![1, 1, 1]);
        let dyn_ = best_response_dynamics(&inst, &ContributionVector::zeros(3), DEFAULT_MAX_SWEEPS).unwrap();
        assert!(matches!(dyn_.end, DynamicsEnd::Cycle { .. }));
    }

    #[test]
    fn alice_bob_one_each_is_ne() {
        let eps = 0.1;
        let inst = alice_bob_instance(eps, alice_bob_delta(eps), 0.1).unwrap();
        let game = Game::new(&inst).unwrap();
        assert!(game.is_pure_ne(&ContributionVector(vec![1, 1])).unwrap());
        let out = enumerate_pure_ne(&inst, DEFAULT_ENUM_CAP, Exec::default()).unwrap();
        assert!(out.pure_ne.contains(&ContributionVector(vec![1, 1])));
    }

    #[test]
    fn best_response_matches_scan() {
        let inst = nonexistence_instance();
        let game = Game::new(&inst).unwrap();
        let m = ContributionVector(vec![0, 1, 0]);
        let br = game.best_response(&m, 0).unwrap();
        let scan = (0..=game.individual()[0])
            .max_by(|&a, &b| {
                let ua = game.utility(&m.with(0, a), 0).unwrap();
                let ub = game.utility(&m.with(0, b), 0).unwrap();
                ua.total_cmp(&ub).then(b.cmp(&a))
            })
            .unwrap();
        assert_eq!(br, scan);
    }

    #[test]
    fn pos_instance_shape() {
        assert_eq!(pos_points(0.25).unwrap(), 2);
        assert_eq!(pos_points(0.05).unwrap(), 10);
        assert_eq!(pos_points(0.02).unwrap(), 25);
        let inst = pos_instance(0.25, 0.5).unwrap();
        assert_eq!(inst.domain().size(), 4);
        assert_eq!(Oracle::new(&inst).individual_sample_complexity(1).unwrap(), 0);
    }

    #[test]
    fn enumeration_cap() {
        let inst = nonexistence_instance();
        assert!(enumerate_pure_ne(&inst, 7, Exec::Sequential).unwrap_err().is_capacity());
    }
}
