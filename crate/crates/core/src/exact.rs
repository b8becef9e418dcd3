//! Exact integer optimum of the planner's problem on small instances.
//!
//! Vectors are popped from a priority queue in nondecreasing cost order
//! (ties lexicographic), starting from the zero vector and stepping one
//! coordinate at a time. Feasibility is monotone, so the first feasible
//! vector popped is a cheapest one.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{ContributionVector, Instance};
use crate::oracle::{Objective, Oracle};
use crate::planner;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactSolution {
    pub m: ContributionVector,
    pub cost: f64,
    pub cap: u64,
    pub explored: usize,
}

struct Node {
    cost: f64,
    m: Vec<u64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // reversed so that BinaryHeap pops the cheapest node first
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.m.cmp(&self.m))
    }
}

/// Largest solo requirement across agents: a feasible vector always exists
/// inside `[0, cap]^k` for this cap.
pub fn default_cap(oracle: &Oracle, objective: Objective) -> Result<u64> {
    let mut cap = 0;
    for agent in 0..oracle.instance().num_agents() {
        cap = cap.max(oracle.individual_complexity(objective, agent)?);
    }
    Ok(cap)
}

pub fn exact_min_cost(instance: &Instance, objective: Objective, cap: Option<u64>) -> Result<ExactSolution> {
    exact_min_cost_with(&Oracle::new(instance), objective, cap)
}

pub fn exact_min_cost_with(oracle: &Oracle, objective: Objective, cap: Option<u64>) -> Result<ExactSolution> {
    let instance = oracle.instance();
    let cap = match cap {
        Some(c) => c,
        None => default_cap(oracle, objective)?,
    };
    let costs = instance.costs();
    let k = instance.num_agents();
    let mut heap = BinaryHeap::new();
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let start = vec![0u64; k];
    seen.insert(start.clone());
    heap.push(Node { cost: 0.0, m: start });
    let mut explored = 0;
    while let Some(Node { cost, m }) = heap.pop() {
        explored += 1;
        let v = ContributionVector(m);
        if oracle.feasible(objective, &v)? {
            return Ok(ExactSolution {
                m: v,
                cost,
                cap,
                explored,
            });
        }
        for i in 0..k {
            if v.0[i] < cap {
                let mut next = v.0.clone();
                next[i] += 1;
                if seen.insert(next.clone()) {
                    let c = ContributionVector(next.clone()).cost(&costs);
                    heap.push(Node { cost: c, m: next });
                }
            }
        }
    }
    Err(Error::Infeasible(format!(
        "no feasible contribution vector with every entry at most {cap}"
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    pub objective: Objective,
    pub planner: ContributionVector,
    pub planner_cost: f64,
    pub lp_objective: f64,
    pub optimum: ContributionVector,
    pub optimum_cost: f64,
    /// Rounded planner cost over the optimum; 1 when both are zero.
    pub ratio: f64,
    /// Fractional LP cost over the optimum; 1 when both are zero.
    pub lp_ratio: f64,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        if a == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        a / b
    }
}

pub fn approximation_ratio(instance: &Instance, objective: Objective) -> Result<RatioReport> {
    let alloc = match objective {
        Objective::Pac => planner::plan_pac(instance)?,
        Objective::Expected => planner::plan_expected(instance)?,
    };
    let opt = exact_min_cost(instance, objective, None)?;
    let planner_cost = alloc.m.cost(&instance.costs());
    Ok(RatioReport {
        objective,
        ratio: ratio(planner_cost, opt.cost),
        lp_ratio: ratio(alloc.lp_objective, opt.cost),
        planner: alloc.m,
        planner_cost,
        lp_objective: alloc.lp_objective,
        optimum: opt.m,
        optimum_cost: opt.cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{AgentSpec, Domain, HypothesisClass};

    fn alice_bob() -> Instance {
        let eps: f64 = 0.1;
        Instance::new(
            Domain::new(2).unwrap(),
            HypothesisClass::all_labelings(2).unwrap(),
            vec![
                AgentSpec::new(vec![1.0 - 2.0 * eps, 2.0 * eps], 0.1).unwrap(),
                AgentSpec::new(vec![2.0 * eps, 1.0 - 2.0 * eps], 0.1).unwrap(),
            ],
            eps,
            1.0 - (1.0 - 2.0 * eps).powi(2),
        )
        .unwrap()
    }

    #[test]
    fn alice_bob_optimum_is_one_each() {
        let sol = exact_min_cost(&alice_bob(), Objective::Pac, None).unwrap();
        assert_eq!(sol.m.counts(), &[1, 1]);
        assert!((sol.cost - 0.2).abs() < 1e-12);
    }

    #[test]
    fn tiny_cap_is_infeasible() {
        let err = exact_min_cost(&alice_bob(), Objective::Pac, Some(0)).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn ratio_at_least_one() {
        let r = approximation_ratio(&alice_bob(), Objective::Pac).unwrap();
        assert!(r.ratio >= 1.0 - 1e-9);
        let r = approximation_ratio(&alice_bob(), Objective::Expected).unwrap();
        assert!(r.ratio >= 1.0 - 1e-9);
    }
}
