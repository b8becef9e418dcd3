//! Distribution profiles showing that the PAC planner is locally oblivious
//! for two agents.
//!
//! The domain has `n = H - 1` points and the class is the all-negative
//! hypothesis plus every singleton. Two rare points carry the binding
//! constraints: their masses are set so that `m_1 p + m_2 q = ln(H/δ)` for
//! both, to first order, and the remaining mass of each agent is uniform.
//! Moving to a unit neighbour `m'` only requires re-solving that linear
//! system for one agent's two rare masses.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::instance::{AgentSpec, ContributionVector, Domain, Hypothesis, HypothesisClass, Instance};
use crate::oracle::{monte_carlo_pac_failure, McConfig, McEstimate, Oracle};

pub const MIN_HYPOTHESES: usize = 18;
pub const MAX_DELTA: f64 = 0.5;

#[derive(Debug, Clone, Copy)]
pub struct WitnessConfig {
    pub trials: usize,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for WitnessConfig {
    fn default() -> Self {
        WitnessConfig {
            trials: 100_000,
            seed: 42,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxCheck {
    pub profile: &'static str,
    pub condition: String,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintCheck {
    pub profile: &'static str,
    pub point: usize,
    /// `m_1 p + m_2 q` at the vector the profile is built for.
    pub value: f64,
    pub alpha: f64,
    pub relative_error: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityCheck {
    pub profile: &'static str,
    pub vector: ContributionVector,
    pub feasible: bool,
    pub worst_failure: f64,
    pub worst_target: usize,
    pub worst_agent: usize,
    /// Simulation of the worst (target, agent) pair, when requested.
    pub monte_carlo: Option<McEstimate>,
    pub monte_carlo_pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessReport {
    pub hypotheses: usize,
    pub delta: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub m: ContributionVector,
    pub m_prime: ContributionVector,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d1_prime: Vec<f64>,
    pub d2_prime: Vec<f64>,
    pub boxes: Vec<BoxCheck>,
    pub constraints: Vec<ConstraintCheck>,
    pub feasibility: Vec<FeasibilityCheck>,
    /// Planner output on the base profile, for reference.
    pub planner_allocation: ContributionVector,
    pub passed: bool,
}

/// Lower bound `2 H log2 H` on both coordinates.
pub fn min_contribution(hypotheses: usize) -> f64 {
    let h = hypotheses as f64;
    2.0 * h * h.log2()
}

fn spread(first: f64, second: f64, n: usize) -> Vec<f64> {
    let rest = (1.0 - first - second) / (n - 2) as f64;
    let mut d = vec![rest; n];
    d[0] = first;
    d[1] = second;
    d
}

fn box_checks(profile: &'static str, d1: &[f64], d2: &[f64], n: usize, out: &mut Vec<BoxCheck>) {
    let half = 1.0 / (2.0 * n as f64);
    let full = 1.0 / n as f64;
    let (p1, p2, q1, q2) = (d1[0], d1[1], d2[0], d2[1]);
    let conds = [
        ("0 < p1 <= p2 <= 1/(2n)", p1 > 0.0 && p1 <= p2 && p2 <= half),
        ("0 < q2 <= q1 <= 1/(2n)", q2 > 0.0 && q2 <= q1 && q1 <= half),
        ("p1 + p2 <= 1/n", p1 + p2 <= full),
        ("q1 + q2 <= 1/n", q1 + q2 <= full),
        ("p_r >= 1/n for r >= 3", d1[2..].iter().all(|&p| p >= full)),
        ("q_r >= 1/n for r >= 3", d2[2..].iter().all(|&q| q >= full)),
    ];
    for (condition, holds) in conds {
        out.push(BoxCheck {
            profile,
            condition: condition.to_string(),
            holds,
        });
    }
}

fn build_instance(d1: &[f64], d2: &[f64], epsilon: f64, delta: f64) -> Result<Instance> {
    let n = d1.len();
    let mut hyps = vec![Hypothesis::from_positives(n, [])];
    hyps.extend((0..n).map(|i| Hypothesis::from_positives(n, [i])));
    Instance::new(
        Domain::new(n)?,
        HypothesisClass::new(hyps)?,
        vec![AgentSpec::new(d1.to_vec(), 1.0)?, AgentSpec::new(d2.to_vec(), 1.0)?],
        epsilon,
        delta,
    )
}

fn feasibility(
    profile: &'static str,
    instance: &Instance,
    vector: &ContributionVector,
    mc: Option<WitnessConfig>,
) -> Result<FeasibilityCheck> {
    let oracle = Oracle::new(instance);
    let mut worst = (f64::NEG_INFINITY, 0, 0);
    for target in 0..instance.num_hypotheses() {
        for agent in 0..2 {
            let p = oracle.pac_failure_probability(vector, target, agent)?.value;
            if p > worst.0 {
                worst = (p, target, agent);
            }
        }
    }
    let (monte_carlo, monte_carlo_pass) = match mc {
        Some(cfg) => {
            let est = monte_carlo_pac_failure(
                instance,
                vector,
                worst.1,
                worst.2,
                McConfig {
                    trials: cfg.trials,
                    seed: cfg.seed,
                    exec: cfg.exec,
                },
            )?;
            let pass = est.estimate <= instance.delta() + 4.0 * est.std_error;
            (Some(est), Some(pass))
        }
        None => (None, None),
    };
    Ok(FeasibilityCheck {
        profile,
        vector: vector.clone(),
        feasible: worst.0 <= instance.delta(),
        worst_failure: worst.0,
        worst_target: worst.1,
        worst_agent: worst.2,
        monte_carlo,
        monte_carlo_pass,
    })
}

/// Builds `(D1, D2, D1', D2')` for `m` and its unit neighbour `m'` and
/// verifies the construction. With `mc` set, the worst (target, agent)
/// pair of `m` and `m - (1,1)` on the base profile is also simulated.
pub fn obliviousness_witness(
    m: &ContributionVector,
    m_prime: &ContributionVector,
    hypotheses: usize,
    delta: f64,
    mc: Option<WitnessConfig>,
) -> Result<WitnessReport> {
    if m.len() != 2 || m_prime.len() != 2 {
        return Err(Error::Precondition(
            "the witness is defined for exactly two agents".into(),
        ));
    }
    if hypotheses < MIN_HYPOTHESES {
        return Err(Error::Precondition(format!(
            "H must be at least {MIN_HYPOTHESES}, got {hypotheses}"
        )));
    }
    if !(delta > 0.0 && delta <= MAX_DELTA) {
        return Err(Error::Precondition(format!(
            "delta must lie in (0, {MAX_DELTA}], got {delta}"
        )));
    }
    let bound = min_contribution(hypotheses);
    for (i, &mi) in m.0.iter().enumerate() {
        if (mi as f64) < bound {
            return Err(Error::Precondition(format!(
                "m_{} = {mi} is below 2 H log2 H = {bound:.3}",
                i + 1
            )));
        }
    }
    let l1: u64 = m.0.iter().zip(&m_prime.0).map(|(a, b)| a.abs_diff(*b)).sum();
    if l1 != 1 {
        return Err(Error::Precondition(format!(
            "m' must be a unit neighbour of m, distance is {l1}"
        )));
    }

    let n = hypotheses - 1;
    let alpha = (hypotheses as f64 / delta).ln();
    let (m1, m2) = (m.0[0] as f64, m.0[1] as f64);
    let (m1p, m2p) = (m_prime.0[0] as f64, m_prime.0[1] as f64);
    let p = [alpha / (m1 * m2), (1.0 - 1.0 / m1) * alpha / m1];
    let q = [(1.0 - 1.0 / m2) * alpha / m2, alpha / (m1 * m2)];
    let pp = [0, 1].map(|r| (m1 * p[r] + (m2 - m2p) * q[r]) / m1p);
    let qp = [0, 1].map(|r| (m2 * q[r] + (m1 - m1p) * p[r]) / m2p);
    let d1 = spread(p[0], p[1], n);
    let d2 = spread(q[0], q[1], n);
    let d1_prime = spread(pp[0], pp[1], n);
    let d2_prime = spread(qp[0], qp[1], n);

    let mut boxes = Vec::new();
    box_checks("D1,D2", &d1, &d2, n, &mut boxes);
    box_checks("D1',D2", &d1_prime, &d2, n, &mut boxes);
    box_checks("D1,D2'", &d1, &d2_prime, n, &mut boxes);

    let tol = 1.0 / m1.min(m2);
    let mut constraints = Vec::new();
    let mut first_order = |profile, a: &[f64], b: &[f64], x1: f64, x2: f64| {
        for r in 0..2 {
            let value = x1 * a[r] + x2 * b[r];
            let relative_error = (value - alpha).abs() / alpha;
            constraints.push(ConstraintCheck {
                profile,
                point: r,
                value,
                alpha,
                relative_error,
                holds: relative_error <= tol,
            });
        }
    };
    first_order("D1,D2", &d1, &d2, m1, m2);
    first_order("D1',D2", &d1_prime, &d2, m1p, m2p);
    first_order("D1,D2'", &d1, &d2_prime, m1p, m2p);

    let epsilon = d1
        .iter()
        .chain(&d2)
        .chain(&d1_prime)
        .chain(&d2_prime)
        .copied()
        .filter(|&x| x > 0.0)
        .fold(f64::INFINITY, f64::min)
        / 2.0;
    let base = build_instance(&d1, &d2, epsilon, delta)?;
    let left = build_instance(&d1_prime, &d2, epsilon, delta)?;
    let right = build_instance(&d1, &d2_prime, epsilon, delta)?;
    let reduced = ContributionVector(m.0.iter().map(|&x| x - 1).collect());
    let mut checks = Vec::new();
    for (name, inst) in [("D1,D2", &base), ("D1',D2", &left), ("D1,D2'", &right)] {
        for v in [m, m_prime, &reduced] {
            let sim = if name == "D1,D2" && v != m_prime { mc } else { None };
            checks.push(feasibility(name, inst, v, sim)?);
        }
    }
    let planner_allocation = crate::planner::solve_pac_allocation(&base)?;
    let passed = boxes.iter().all(|b| b.holds)
        && constraints.iter().all(|c| c.holds)
        && checks.iter().all(|c| c.feasible && c.monte_carlo_pass.unwrap_or(true));
    Ok(WitnessReport {
        hypotheses,
        delta,
        epsilon,
        alpha,
        m: m.clone(),
        m_prime: m_prime.clone(),
        d1,
        d2,
        d1_prime,
        d2_prime,
        boxes,
        constraints,
        feasibility: checks,
        planner_allocation,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_case_passes_without_simulation() {
        let m0 = min_contribution(18).ceil() as u64;
        let m = ContributionVector(vec![m0, m0]);
        let r = obliviousness_witness(&m, &m.with(0, m0 + 1), 18, 0.5, None).unwrap();
        assert!(r.boxes.iter().all(|b| b.holds), "{:?}", r.boxes);
        assert!(r.passed, "{r:?}");
        for d in [&r.d1, &r.d2, &r.d1_prime, &r.d2_prime] {
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn preconditions_are_named() {
        let m = ContributionVector(vec![10, 200]);
        let err = obliviousness_witness(&m, &m.with(1, 201), 18, 0.5, None).unwrap_err();
        assert!(err.to_string().contains("m_1"));
        let m = ContributionVector(vec![200, 200]);
        assert!(obliviousness_witness(&m, &m.with(1, 202), 18, 0.5, None).is_err());
        assert!(obliviousness_witness(&m, &m.with(1, 201), 17, 0.5, None).is_err());
        assert!(obliviousness_witness(&m, &m.with(1, 201), 18, 0.6, None).is_err());
    }
}
