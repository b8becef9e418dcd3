//! Payment mechanisms on top of the PAC planner.
//!
//! Agents report distributions, the planner turns the reports into a
//! contribution vector, and a payment rule pays each agent based on that
//! vector. An agent's realised utility is its accuracy indicator under its
//! true distribution, minus its sampling cost, plus its payment.

pub mod witness;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::instance::{ContributionVector, Instance, FORMAT_VERSION};
use crate::oracle::Oracle;
use crate::planner::solve_pac_allocation;

pub use witness::{obliviousness_witness, WitnessConfig, WitnessReport};

/// Utilities within this margin count as equal.
pub const UTILITY_TOL: f64 = 1e-9;

/// `p_i = c_i m_i + C_i`.
pub fn pwyc_payment(m: &ContributionVector, costs: &[f64], constants: &[f64]) -> Result<Vec<f64>> {
    if m.len() != costs.len() || m.len() != constants.len() {
        return Err(Error::invalid("payment inputs have mismatched lengths"));
    }
    Ok(m.0
        .iter()
        .zip(costs)
        .zip(constants)
        .map(|((&mi, c), k)| c * mi as f64 + k)
        .collect())
}

/// `p_i = k - 1 - sum_{j != i} c_j m_j + q_i`.
pub fn vcg_payment(instance: &Instance, m_opt: &ContributionVector, pivots: &[f64]) -> Result<Vec<f64>> {
    instance.check_vector(m_opt)?;
    let k = instance.num_agents();
    if pivots.len() != k {
        return Err(Error::invalid("one pivot term per agent is required"));
    }
    let costs = instance.costs();
    let spent: Vec<f64> = m_opt.0.iter().zip(&costs).map(|(&m, c)| c * m as f64).collect();
    let total: f64 = spent.iter().sum();
    Ok((0..k)
        .map(|i| (k - 1) as f64 - (total - spent[i]) + pivots[i])
        .collect())
}

/// Payments as an explicit function of the contribution vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PaymentTable {
    costs: Vec<f64>,
    entries: BTreeMap<ContributionVector, Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct TableEntry {
    m: Vec<u64>,
    payments: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TableFile {
    format: u64,
    costs: Vec<f64>,
    entries: Vec<TableEntry>,
}

impl PaymentTable {
    pub fn new(costs: Vec<f64>, entries: BTreeMap<ContributionVector, Vec<f64>>) -> Result<Self> {
        let k = costs.len();
        if k == 0 || costs.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::validation("table costs must be positive and finite"));
        }
        for (m, p) in &entries {
            if m.len() != k || p.len() != k {
                return Err(Error::validation(format!(
                    "table entry {m} does not have {k} components"
                )));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::validation(format!("table entry {m} has a non-finite payment")));
            }
        }
        Ok(PaymentTable { costs, entries })
    }

    /// Tabulates `f` over the lattice block `prod_i [lo_i, hi_i]`.
    pub fn from_fn(
        costs: Vec<f64>,
        lo: &[u64],
        hi: &[u64],
        f: impl Fn(&ContributionVector) -> Vec<f64>,
    ) -> Result<Self> {
        if lo.len() != costs.len() || hi.len() != costs.len() || lo.iter().zip(hi).any(|(a, b)| a > b) {
            return Err(Error::invalid("block bounds do not match the number of agents"));
        }
        let mut entries = BTreeMap::new();
        let mut m = lo.to_vec();
        'outer: loop {
            let v = ContributionVector(m.clone());
            let p = f(&v);
            entries.insert(v, p);
            for i in 0..m.len() {
                if m[i] < hi[i] {
                    m[i] += 1;
                    continue 'outer;
                }
                m[i] = lo[i];
            }
            break;
        }
        Self::new(costs, entries)
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn entries(&self) -> &BTreeMap<ContributionVector, Vec<f64>> {
        &self.entries
    }

    pub fn get(&self, m: &ContributionVector) -> Option<&[f64]> {
        self.entries.get(m).map(|p| p.as_slice())
    }

    pub fn set(&mut self, m: ContributionVector, payments: Vec<f64>) -> Result<()> {
        if payments.len() != self.costs.len() || m.len() != self.costs.len() {
            return Err(Error::invalid("payment vector has the wrong length"));
        }
        self.entries.insert(m, payments);
        Ok(())
    }

    pub fn to_json_string(&self) -> String {
        let file = TableFile {
            format: FORMAT_VERSION,
            costs: self.costs.clone(),
            entries: self
                .entries
                .iter()
                .map(|(m, p)| TableEntry {
                    m: m.0.clone(),
                    payments: p.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("table serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: TableFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            field: "table".into(),
            message: e.to_string(),
        })?;
        if file.format != FORMAT_VERSION {
            return Err(Error::Parse {
                field: "format".into(),
                message: format!("unsupported table format {}", file.format),
            });
        }
        let mut entries = BTreeMap::new();
        for (i, e) in file.entries.into_iter().enumerate() {
            if entries.insert(ContributionVector(e.m), e.payments).is_some() {
                return Err(Error::validation(format!("entries[{i}] repeats a contribution vector")));
            }
        }
        Self::new(file.costs, entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PaymentRule {
    /// `c_i m_i + C_i`.
    Pwyc {
        constants: Vec<f64>,
    },
    /// `factor · c_i m_i + C_i`; any factor other than 1 over- or
    /// under-reimburses sampling cost.
    Reimburse {
        factor: f64,
        constants: Vec<f64>,
    },
    /// VCG payments with pivot terms `q_i`.
    Vcg {
        pivots: Vec<f64>,
    },
    Table(PaymentTable),
}

impl PaymentRule {
    pub fn pwyc(k: usize) -> Self {
        PaymentRule::Pwyc {
            constants: vec![0.0; k],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PaymentRule::Pwyc { .. } => "pwyc",
            PaymentRule::Reimburse { .. } => "reimburse",
            PaymentRule::Vcg { .. } => "vcg",
            PaymentRule::Table(_) => "table",
        }
    }

    /// Payment vector at `m`; `None` when a table does not cover `m`.
    pub fn payments(&self, instance: &Instance, m: &ContributionVector) -> Result<Option<Vec<f64>>> {
        let costs = instance.costs();
        Ok(Some(match self {
            PaymentRule::Pwyc { constants } => pwyc_payment(m, &costs, constants)?,
            PaymentRule::Reimburse { factor, constants } => {
                let scaled: Vec<f64> = costs.iter().map(|c| factor * c).collect();
                pwyc_payment(m, &scaled, constants)?
            }
            PaymentRule::Vcg { pivots } => vcg_payment(instance, m, pivots)?,
            PaymentRule::Table(t) => match t.get(m) {
                Some(p) => p.to_vec(),
                None => return Ok(None),
            },
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub agent: usize,
    pub rule: &'static str,
    pub truthful_allocation: ContributionVector,
    pub truthful_utility: f64,
    pub best_misreport_utility: f64,
    pub misreport: Option<Vec<f64>>,
    pub misreport_allocation: Option<ContributionVector>,
    pub misreports_checked: usize,
    /// Misreports whose allocation fell outside a table rule's domain.
    pub outside_table: usize,
    pub strategyproof: bool,
}

/// Every distribution reachable by moving a positive multiple of `step`
/// of mass from one point to another, in `(from, to, multiple)` order.
pub fn misreport_grid(distribution: &[f64], step: f64) -> Result<Vec<Vec<f64>>> {
    if !(step > 0.0 && step < 1.0) {
        return Err(Error::invalid(format!("grid step must lie in (0,1), got {step}")));
    }
    let n = distribution.len();
    let mut out = Vec::new();
    for a in 0..n {
        let moves = ((distribution[a] + 1e-12) / step).floor() as usize;
        for b in 0..n {
            if a == b {
                continue;
            }
            for t in 1..=moves {
                let amount = (t as f64 * step).min(distribution[a]);
                let mut d = distribution.to_vec();
                d[a] = (d[a] - amount).max(0.0);
                d[b] += amount;
                out.push(d);
            }
        }
    }
    Ok(out)
}

/// Realised utility of `agent` at allocation `m`: accuracy under the true
/// instance minus cost plus payment.
fn realised(oracle: &Oracle, rule: &PaymentRule, m: &ContributionVector, agent: usize) -> Result<Option<f64>> {
    let inst = oracle.instance();
    let Some(p) = rule.payments(inst, m)? else {
        return Ok(None);
    };
    let met = oracle.agent_requirement_met(m, agent)?;
    Ok(Some(
        f64::from(u8::from(met)) - inst.agent(agent).cost() * m.0[agent] as f64 + p[agent],
    ))
}

pub fn strategyproofness_audit(
    instance: &Instance,
    step: f64,
    agent: usize,
    rule: &PaymentRule,
    exec: Exec,
) -> Result<AuditReport> {
    if agent >= instance.num_agents() {
        return Err(Error::invalid(format!("agent index {agent} out of range")));
    }
    let oracle = Oracle::new(instance);
    let truthful_allocation = solve_pac_allocation(instance)?;
    let truthful_utility = realised(&oracle, rule, &truthful_allocation, agent)?.ok_or_else(|| {
        Error::Precondition(format!(
            "table does not cover the truthful allocation {truthful_allocation}"
        ))
    })?;
    let grid = misreport_grid(instance.agent(agent).distribution(), step)?;
    let evaluated = exec.map(&grid, |d| -> Result<Option<(f64, ContributionVector)>> {
        let reported = instance.with_agent(agent, instance.agent(agent).with_distribution(d.clone())?)?;
        let m = solve_pac_allocation(&reported)?;
        Ok(realised(&oracle, rule, &m, agent)?.map(|u| (u, m)))
    });
    let mut best: Option<(f64, usize, ContributionVector)> = None;
    let mut outside = 0;
    for (idx, r) in evaluated.into_iter().enumerate() {
        match r? {
            None => outside += 1,
            Some((u, m)) => {
                if best.as_ref().is_none_or(|(bu, _, _)| u > *bu) {
                    best = Some((u, idx, m));
                }
            }
        }
    }
    let best_misreport_utility = best.as_ref().map_or(f64::NEG_INFINITY, |b| b.0);
    Ok(AuditReport {
        agent,
        rule: rule.name(),
        truthful_allocation,
        truthful_utility,
        best_misreport_utility,
        misreport: best.as_ref().map(|b| grid[b.1].clone()),
        misreport_allocation: best.map(|b| b.2),
        misreports_checked: grid.len(),
        outside_table: outside,
        strategyproof: truthful_utility >= best_misreport_utility - UTILITY_TOL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlackViolation {
    pub agent: usize,
    pub m: ContributionVector,
    pub m_prime: ContributionVector,
    pub slack: f64,
    pub slack_prime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub unique: bool,
    /// `C_i` when every agent's slack is constant.
    pub constants: Option<Vec<f64>>,
    pub witness: Option<SlackViolation>,
}

fn neighbours(m: &ContributionVector) -> impl Iterator<Item = ContributionVector> + '_ {
    (0..m.len()).flat_map(move |i| {
        let up = Some(m.with(i, m.0[i] + 1));
        let down = m.0[i].checked_sub(1).map(|v| m.with(i, v));
        up.into_iter().chain(down)
    })
}

/// Whether the table's domain is connected under unit L1 steps.
pub fn is_connected(table: &PaymentTable) -> bool {
    let Some(start) = table.entries.keys().next() else {
        return true;
    };
    let mut seen = BTreeSet::from([start.clone()]);
    let mut queue = VecDeque::from([start.clone()]);
    while let Some(m) = queue.pop_front() {
        for n in neighbours(&m) {
            if table.entries.contains_key(&n) && seen.insert(n.clone()) {
                queue.push_back(n);
            }
        }
    }
    seen.len() == table.entries.len()
}

/// Checks that `f_i(m) - c_i m_i` is the same across every unit edge of
/// the table's domain for every agent, which on a connected domain is
/// exactly the pay-what-you-contribute form. The first violating edge in
/// lexicographic order is returned as a witness.
pub fn check_pwyc_uniqueness(table: &PaymentTable) -> Result<UniquenessReport> {
    if table.entries.is_empty() {
        return Err(Error::Precondition("payment table is empty".into()));
    }
    if !is_connected(table) {
        return Err(Error::Precondition("payment table domain is not connected".into()));
    }
    let slack = |m: &ContributionVector, p: &[f64], i: usize| p[i] - table.costs[i] * m.0[i] as f64;
    for (m, p) in &table.entries {
        for i in 0..table.costs.len() {
            let up = m.with(i, m.0[i] + 1);
            if let Some(q) = table.entries.get(&up) {
                for agent in 0..table.costs.len() {
                    let (a, b) = (slack(m, p, agent), slack(&up, q, agent));
                    if (a - b).abs() > UTILITY_TOL {
                        return Ok(UniquenessReport {
                            unique: false,
                            constants: None,
                            witness: Some(SlackViolation {
                                agent,
                                m: m.clone(),
                                m_prime: up,
                                slack: a,
                                slack_prime: b,
                            }),
                        });
                    }
                }
            }
        }
    }
    let (m, p) = table.entries.iter().next().expect("nonempty");
    Ok(UniquenessReport {
        unique: true,
        constants: Some((0..table.costs.len()).map(|i| slack(m, p, i)).collect()),
        witness: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game;

    #[test]
    fn payment_arithmetic() {
        let p = pwyc_payment(&ContributionVector(vec![3, 5]), &[0.01, 0.02], &[0.0, 0.0]).unwrap();
        assert!((p[0] - 0.03).abs() < 1e-15 && (p[1] - 0.10).abs() < 1e-15);
        let inst = game::alice_bob_instance(0.1, 0.36, 1.0 / 3.0).unwrap();
        let costs = inst.costs();
        let v = vcg_payment(&inst, &ContributionVector(vec![2, 3]), &[0.0, 0.0]).unwrap();
        assert!((v[0] - (1.0 - 3.0 * costs[1])).abs() < 1e-15);
        assert!((v[1] - (1.0 - 2.0 * costs[0])).abs() < 1e-15);
    }

    #[test]
    fn uniqueness_on_blocks() {
        let costs = vec![0.5, 0.25];
        let pwyc = PaymentTable::from_fn(costs.clone(), &[0, 0], &[2, 2], |m| {
            vec![0.5 * m.0[0] as f64 + 7.0, 0.25 * m.0[1] as f64 + 7.0]
        })
        .unwrap();
        let r = check_pwyc_uniqueness(&pwyc).unwrap();
        assert!(r.unique);
        assert_eq!(r.constants, Some(vec![7.0, 7.0]));

        let mut bad = pwyc.clone();
        bad.set(ContributionVector(vec![1, 1]), vec![7.5 + 0.1, 7.25]).unwrap();
        let r = check_pwyc_uniqueness(&bad).unwrap();
        let w = r.witness.unwrap();
        assert!(w.m == ContributionVector(vec![1, 1]) || w.m_prime == ContributionVector(vec![1, 1]));

        let vcg = PaymentTable::from_fn(costs, &[0, 0], &[2, 2], |m| {
            vec![1.0 - 0.25 * m.0[1] as f64, 1.0 - 0.5 * m.0[0] as f64]
        })
        .unwrap();
        assert!(!check_pwyc_uniqueness(&vcg).unwrap().unique);
    }

    #[test]
    fn disconnected_table_is_rejected() {
        let mut entries = BTreeMap::new();
        entries.insert(ContributionVector(vec![0, 0]), vec![0.0, 0.0]);
        entries.insert(ContributionVector(vec![1, 1]), vec![0.0, 0.0]);
        let t = PaymentTable::new(vec![1.0, 1.0], entries).unwrap();
        assert!(matches!(check_pwyc_uniqueness(&t), Err(Error::Precondition(_))));
    }

    #[test]
    fn table_round_trip() {
        let t = PaymentTable::from_fn(vec![0.1, 0.3], &[1, 0], &[2, 1], |m| vec![m.0[0] as f64 / 3.0, 0.1]).unwrap();
        assert_eq!(PaymentTable::from_json_str(&t.to_json_string()).unwrap(), t);
    }

    #[test]
    fn grid_moves_preserve_mass() {
        let g = misreport_grid(&[0.5, 0.3, 0.2], 0.1).unwrap();
        // 5 + 5 + 3 + 3 + 2 + 2 moves
        assert_eq!(g.len(), 20);
        for d in g {
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(d.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn pwyc_is_strategyproof_on_cyclic_instance() {
        let inst = game::nonexistence_instance();
        let rule = PaymentRule::pwyc(3);
        for agent in 0..3 {
            let r = strategyproofness_audit(&inst, 0.1, agent, &rule, Exec::default()).unwrap();
            assert!(r.strategyproof, "{r:?}");
            assert!((r.truthful_utility - 1.0).abs() < 1e-12);
        }
    }
}
