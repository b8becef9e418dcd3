//! LP-relaxation planners.
//!
//! For every hypothesis pair that some agent can tell apart by more than
//! ε, the pooled sample must hit the pair's disagreement region with high
//! probability. Taking logs of `prod_i (1 - beta_i)^{m_i} <= delta / H`
//! turns each such requirement into a linear constraint on `m`; a union
//! bound over the at most `H` competitors of any target then gives
//! feasibility of the rounded-up LP solution.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{AgentSpec, ContributionVector, HypothesisClass, Instance};
use crate::lp::{solve_lp, LinearProgram, LpStatus};
use crate::oracle::is_bad_mass;

/// Masses are clamped to this before taking `ln(1 - beta)`.
pub const MASS_CLAMP: f64 = 1.0 - 1e-12;
/// LP values this close above an integer are snapped down before rounding.
const ROUNDING_SLACK: f64 = 1e-9;

/// `ln(1 / (1 - beta))` with beta clamped into `[0, MASS_CLAMP]`.
pub fn log_coefficient(beta: f64) -> f64 {
    -(-beta.clamp(0.0, MASS_CLAMP)).ln_1p()
}

fn pair_rows(instance: &Instance, include: impl Fn(&[f64]) -> Option<f64>) -> Result<LinearProgram> {
    let h = instance.num_hypotheses();
    let k = instance.num_agents();
    let mut matrix = Vec::new();
    let mut rhs = Vec::new();
    let mut tags = Vec::new();
    for a in 0..h {
        for b in a + 1..h {
            let masses: Vec<f64> = (0..k).map(|i| instance.pair_mass(i, a, b)).collect();
            if let Some(r) = include(&masses) {
                matrix.push(masses.iter().map(|&m| log_coefficient(m)).collect());
                rhs.push(r);
                tags.push((a, b));
            }
        }
    }
    LinearProgram::new(instance.costs(), matrix, rhs)?.with_row_tags(tags)
}

/// One row per unordered pair with some agent mass above ε, right-hand
/// side `ln(H/δ)`.
pub fn build_pac_lp(instance: &Instance) -> Result<LinearProgram> {
    let eps = instance.epsilon();
    let rhs = (instance.num_hypotheses() as f64 / instance.delta()).ln();
    pair_rows(instance, |masses| {
        masses.iter().any(|&m| is_bad_mass(m, eps)).then_some(rhs)
    })
}

/// Rows for pairs whose largest agent mass exceeds ε/2, each with
/// right-hand side `ln(2·H·a/ε)` where `a` is that largest mass.
pub fn build_expected_lp(instance: &Instance) -> Result<LinearProgram> {
    let eps = instance.epsilon();
    let h = instance.num_hypotheses() as f64;
    pair_rows(instance, |masses| {
        let a = masses.iter().copied().fold(0.0, f64::max);
        is_bad_mass(a, eps / 2.0).then(|| (2.0 * h * a / eps).ln())
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Allocation {
    pub m: ContributionVector,
    pub fractional: Vec<f64>,
    pub lp_objective: f64,
    pub rows: usize,
}

pub fn round_up(x: &[f64]) -> ContributionVector {
    ContributionVector(x.iter().map(|&v| (v - ROUNDING_SLACK).max(0.0).ceil() as u64).collect())
}

fn allocate(lp: LinearProgram) -> Result<Allocation> {
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        // every row has a positive coefficient for the agent that makes it bad
        return Err(Error::Solver(format!("allocation LP is {:?}", sol.status)));
    }
    Ok(Allocation {
        m: round_up(&sol.x),
        fractional: sol.x,
        lp_objective: sol.objective,
        rows: lp.num_rows(),
    })
}

pub fn plan_pac(instance: &Instance) -> Result<Allocation> {
    allocate(build_pac_lp(instance)?)
}

pub fn plan_expected(instance: &Instance) -> Result<Allocation> {
    allocate(build_expected_lp(instance)?)
}

pub fn solve_pac_allocation(instance: &Instance) -> Result<ContributionVector> {
    Ok(plan_pac(instance)?.m)
}

pub fn solve_expected_allocation(instance: &Instance) -> Result<ContributionVector> {
    Ok(plan_expected(instance)?.m)
}

/// `(ln(1/δ) + ln H) / ln(1/δ)`, the LP-to-optimum cost ratio bound.
pub fn pac_ratio_bound(num_hypotheses: usize, delta: f64) -> f64 {
    let inv = (1.0 / delta).ln();
    (inv + (num_hypotheses as f64).ln()) / inv
}

/// `ceil(log2(2H))`, the factor by which an expected-objective optimum at
/// ε/4 must be scaled to satisfy the expected LP.
pub fn expected_converse_multiplier(num_hypotheses: usize) -> u64 {
    (2.0 * num_hypotheses as f64).log2().ceil() as u64
}

/// Indices of a greedy γ-cover: hypotheses are scanned in order and kept
/// unless an earlier member lies within `γ/k` under the uniform mixture,
/// which bounds every agent's disagreement mass by `γ`.
pub fn gamma_cover_indices(class: &HypothesisClass, agents: &[AgentSpec], gamma: f64) -> Result<Vec<usize>> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
    }
    if agents.is_empty() {
        return Err(Error::invalid("gamma cover needs at least one agent"));
    }
    let size = class.get(0).len();
    if agents.iter().any(|a| a.distribution().len() != size) {
        return Err(Error::invalid("agent distributions do not match the class domain"));
    }
    if gamma >= 1.0 {
        return Ok(vec![0]);
    }
    let k = agents.len() as f64;
    let mixture: Vec<f64> = (0..size)
        .map(|x| agents.iter().map(|a| a.distribution()[x]).sum::<f64>() / k)
        .collect();
    let radius = gamma / k;
    let mut cover: Vec<usize> = Vec::new();
    for (i, h) in class.hypotheses().iter().enumerate() {
        let covered = cover.iter().any(|&c| {
            let rep = class.get(c);
            let d: f64 = (0..size)
                .filter(|&x| h.label(x) != rep.label(x))
                .map(|x| mixture[x])
                .sum();
            d <= radius
        });
        if !covered {
            cover.push(i);
        }
    }
    Ok(cover)
}

pub fn gamma_cover(class: &HypothesisClass, agents: &[AgentSpec], gamma: f64) -> Result<HypothesisClass> {
    class.subset(&gamma_cover_indices(class, agents, gamma)?)
}

/// Overrides for the scaling pipeline; unset fields take the defaults
/// derived from the instance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PipelineParams {
    pub gamma: Option<f64>,
    pub delta_prime: Option<f64>,
    pub delta_double_prime: Option<f64>,
    pub scale_d: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineResult {
    pub m: ContributionVector,
    pub base: ContributionVector,
    pub cover: Vec<usize>,
    pub gamma: f64,
    pub delta_prime: f64,
    pub delta_double_prime: f64,
    pub scale_d: f64,
    pub multiplier: u64,
    pub lp_objective: f64,
    pub rows: usize,
}

pub fn default_scale_d(num_hypotheses: usize) -> f64 {
    (num_hypotheses as f64).log2().ceil()
}

/// Cover the class, solve the PAC LP on the cover at confidence δ', and
/// multiply every count by `ceil(d + ln(1/δ''))`.
pub fn infinite_class_pipeline(instance: &Instance, params: PipelineParams) -> Result<PipelineResult> {
    let eps = instance.epsilon();
    let delta = instance.delta();
    let k = instance.num_agents() as f64;
    let d = params
        .scale_d
        .unwrap_or_else(|| default_scale_d(instance.num_hypotheses()));
    if !(d.is_finite() && d >= 0.0) {
        return Err(Error::invalid(format!("scale_d must be nonnegative, got {d}")));
    }
    let costs = instance.costs();
    let c_min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let c_max = costs.iter().copied().fold(0.0, f64::max);
    let gamma = params
        .gamma
        .unwrap_or(c_min * eps * delta / (c_max * k * (d + (1.0 / delta).ln())));
    let cover = gamma_cover_indices(instance.class(), instance.agents(), gamma)?;
    let hbar = cover.len() as f64;
    let delta_double_prime = params.delta_double_prime.unwrap_or(delta / (4.0 * hbar));
    let delta_prime = params
        .delta_prime
        .unwrap_or(delta / (8.0 * (d + (2.0 * hbar / delta).ln())));
    for (name, v) in [("delta_prime", delta_prime), ("delta_double_prime", delta_double_prime)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::invalid(format!("{name} must lie in (0,1), got {v}")));
        }
    }
    let reduced = instance
        .with_class(instance.class().subset(&cover)?)?
        .with_delta(delta_prime)?;
    let alloc = plan_pac(&reduced)?;
    let multiplier = (d + (1.0 / delta_double_prime).ln()).ceil().max(1.0) as u64;
    let m = ContributionVector(alloc.m.counts().iter().map(|&c| c * multiplier).collect());
    Ok(PipelineResult {
        m,
        base: alloc.m,
        cover,
        gamma,
        delta_prime,
        delta_double_prime,
        scale_d: d,
        multiplier,
        lp_objective: alloc.lp_objective,
        rows: alloc.rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Domain, Hypothesis};
    use crate::oracle;

    fn alice_bob(eps: f64) -> Instance {
        Instance::new(
            Domain::new(2).unwrap(),
            HypothesisClass::all_labelings(2).unwrap(),
            vec![
                AgentSpec::new(vec![1.0 - 2.0 * eps, 2.0 * eps], 0.1).unwrap(),
                AgentSpec::new(vec![2.0 * eps, 1.0 - 2.0 * eps], 0.1).unwrap(),
            ],
            eps,
            0.36,
        )
        .unwrap()
    }

    #[test]
    fn alice_bob_rows() {
        let eps = 0.1;
        let lp = build_pac_lp(&alice_bob(eps)).unwrap();
        // labelings 0 and 1 differ only on the first point
        let row = lp.row_tags().iter().position(|&t| t == (0, 1)).unwrap();
        assert!((lp.matrix()[row][0] - (1.0 / (2.0 * eps)).ln()).abs() < 1e-12);
        assert!((lp.matrix()[row][1] - (1.0 / (1.0 - 2.0 * eps)).ln()).abs() < 1e-12);
        assert_eq!(lp.num_rows(), 6);
    }

    #[test]
    fn single_pair_closed_form() {
        let beta: f64 = 0.3;
        let inst = Instance::new(
            Domain::new(2).unwrap(),
            HypothesisClass::new(vec![
                Hypothesis::new(vec![0, 0]).unwrap(),
                Hypothesis::new(vec![1, 0]).unwrap(),
            ])
            .unwrap(),
            vec![AgentSpec::new(vec![beta, 1.0 - beta], 0.01).unwrap()],
            0.1,
            0.05,
        )
        .unwrap();
        let m = solve_pac_allocation(&inst).unwrap();
        let expected = ((2.0f64 / 0.05).ln() / (1.0 / (1.0 - beta)).ln()).ceil() as u64;
        assert_eq!(m.counts(), &[expected]);
        assert!(oracle::pac_feasible(&inst, &m).unwrap());
    }

    #[test]
    fn singleton_class_needs_nothing() {
        let inst = alice_bob(0.1)
            .with_class(HypothesisClass::all_labelings(2).unwrap().subset(&[2]).unwrap())
            .unwrap();
        assert_eq!(build_pac_lp(&inst).unwrap().num_rows(), 0);
        assert_eq!(solve_pac_allocation(&inst).unwrap(), ContributionVector::zeros(2));
        assert_eq!(build_expected_lp(&inst).unwrap().num_rows(), 0);
    }

    #[test]
    fn expected_rhs_uses_largest_mass() {
        // first point: agent masses 0.6 and 0.3
        let inst = Instance::new(
            Domain::new(2).unwrap(),
            HypothesisClass::new(vec![
                Hypothesis::new(vec![0, 0]).unwrap(),
                Hypothesis::new(vec![1, 0]).unwrap(),
            ])
            .unwrap(),
            vec![
                AgentSpec::new(vec![0.6, 0.4], 1.0).unwrap(),
                AgentSpec::new(vec![0.3, 0.7], 1.0).unwrap(),
            ],
            0.5,
            0.1,
        )
        .unwrap();
        let lp = build_expected_lp(&inst).unwrap();
        assert_eq!(lp.num_rows(), 1);
        // H = 2 here
        assert!((lp.rhs()[0] - (2.0 * 2.0 * 0.6 / 0.5f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn cover_extremes() {
        let class = HypothesisClass::all_labelings(3).unwrap();
        let agents = vec![AgentSpec::new(vec![0.2, 0.3, 0.5], 1.0).unwrap()];
        assert_eq!(gamma_cover_indices(&class, &agents, 1.5).unwrap(), vec![0]);
        assert_eq!(gamma_cover_indices(&class, &agents, 1e-6).unwrap().len(), 8);
        assert!(gamma_cover_indices(&class, &agents, 0.0).is_err());
    }

    #[test]
    fn degenerate_pipeline_matches_lp() {
        let inst = alice_bob(0.1);
        let r = infinite_class_pipeline(
            &inst,
            PipelineParams {
                gamma: Some(1e-9),
                delta_prime: Some(inst.delta()),
                delta_double_prime: Some(0.9),
                scale_d: Some(0.0),
            },
        )
        .unwrap();
        assert_eq!(r.multiplier, 1);
        assert_eq!(r.m, solve_pac_allocation(&inst).unwrap());
    }

    #[test]
    fn multipliers() {
        assert_eq!(expected_converse_multiplier(4), 3);
        assert_eq!(expected_converse_multiplier(5), 4);
        assert!((pac_ratio_bound(1, 0.1) - 1.0).abs() < 1e-15);
    }
}
