//! Domain model: finite domain, binary hypotheses, agents and the
//! pairwise disagreement geometry every solver in the crate works from.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::region::PointSet;

/// Distributions must sum to one within this tolerance; inside it they are
/// renormalized, outside it they are rejected.
pub const DISTRIBUTION_SUM_TOL: f64 = 1e-9;

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Domain {
    size: usize,
}

impl Domain {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::validation("domain size must be at least 1"));
        }
        Ok(Domain { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Hypothesis {
    labels: Vec<u8>,
}

impl Hypothesis {
    pub fn new(labels: Vec<u8>) -> Result<Self> {
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::validation(format!("label {bad} is not binary")));
        }
        Ok(Hypothesis { labels })
    }

    /// Hypothesis labelling exactly `positives` with 1.
    pub fn from_positives(size: usize, positives: impl IntoIterator<Item = usize>) -> Self {
        let mut labels = vec![0u8; size];
        for p in positives {
            labels[p] = 1;
        }
        Hypothesis { labels }
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, x: usize) -> u8 {
        self.labels[x]
    }
}

/// Nonempty ordered list of pairwise distinct hypotheses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HypothesisClass {
    hypotheses: Vec<Hypothesis>,
}

impl HypothesisClass {
    pub fn new(hypotheses: Vec<Hypothesis>) -> Result<Self> {
        if hypotheses.is_empty() {
            return Err(Error::validation("hypothesis class is empty"));
        }
        let len = hypotheses[0].len();
        if let Some(h) = hypotheses.iter().position(|h| h.len() != len) {
            return Err(Error::validation(format!(
                "hypothesis {h} has {} labels, expected {len}",
                hypotheses[h].len()
            )));
        }
        let mut sorted: Vec<(&Hypothesis, usize)> = hypotheses.iter().zip(0..).collect();
        sorted.sort();
        for w in sorted.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::validation(format!(
                    "hypotheses {} and {} are identical",
                    w[0].1, w[1].1
                )));
            }
        }
        Ok(HypothesisClass { hypotheses })
    }

    /// Every labelling of `size` points, in binary counting order
    /// (hypothesis `j` labels point `x` with bit `x` of `j`).
    pub fn all_labelings(size: usize) -> Result<Self> {
        if size > 20 {
            return Err(Error::invalid("full labelling class limited to 20 points"));
        }
        let hs = (0..1usize << size)
            .map(|j| Hypothesis::from_positives(size, (0..size).filter(|x| j >> x & 1 == 1)))
            .collect();
        Self::new(hs)
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn get(&self, i: usize) -> &Hypothesis {
        &self.hypotheses[i]
    }

    pub fn hypotheses(&self) -> &[Hypothesis] {
        &self.hypotheses
    }

    /// Subclass keeping the given indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.hypotheses[i].clone()).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    distribution: Vec<f64>,
    cost: f64,
}

impl AgentSpec {
    /// Validates nonnegativity, cost > 0 and the sum tolerance; a sum within
    /// [`DISTRIBUTION_SUM_TOL`] of one but off by more than rounding is
    /// renormalized.
    pub fn new(distribution: Vec<f64>, cost: f64) -> Result<Self> {
        if !(cost.is_finite() && cost > 0.0) {
            return Err(Error::validation(format!("cost {cost} must be positive")));
        }
        if let Some(p) = distribution.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::validation(format!("probability {p} is negative or not finite")));
        }
        let sum: f64 = distribution.iter().sum();
        if (sum - 1.0).abs() > DISTRIBUTION_SUM_TOL {
            return Err(Error::validation(format!("distribution sums to {sum}, not 1")));
        }
        // rescaling a sum that is already 1 up to rounding would drift on every reload
        let distribution = if (sum - 1.0).abs() <= distribution.len() as f64 * f64::EPSILON {
            distribution
        } else {
            distribution.iter().map(|p| p / sum).collect()
        };
        Ok(AgentSpec { distribution, cost })
    }

    pub fn distribution(&self) -> &[f64] {
        &self.distribution
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn with_distribution(&self, distribution: Vec<f64>) -> Result<Self> {
        AgentSpec::new(distribution, self.cost)
    }
}

/// Nonnegative integer sample counts, one per agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContributionVector(pub Vec<u64>);

impl ContributionVector {
    pub fn zeros(k: usize) -> Self {
        ContributionVector(vec![0; k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn counts(&self) -> &[u64] {
        &self.0
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn cost(&self, costs: &[f64]) -> f64 {
        self.0.iter().zip(costs).map(|(&m, c)| m as f64 * c).sum()
    }

    pub fn with(&self, agent: usize, value: u64) -> Self {
        let mut v = self.clone();
        v.0[agent] = value;
        v
    }

    /// Componentwise `self <= other`.
    pub fn le(&self, other: &Self) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

impl From<Vec<u64>> for ContributionVector {
    fn from(v: Vec<u64>) -> Self {
        ContributionVector(v)
    }
}

impl fmt::Display for ContributionVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, m) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{m}")?;
        }
        write!(f, ")")
    }
}

/// Pairwise disagreement regions and their per-agent masses.
#[derive(Debug, Clone)]
struct Geometry {
    h: usize,
    k: usize,
    regions: Vec<PointSet>,
    masses: Vec<f64>,
}

impl Geometry {
    fn build(class: &HypothesisClass, agents: &[AgentSpec], size: usize) -> Self {
        let h = class.len();
        let k = agents.len();
        let mut regions = Vec::with_capacity(h * h);
        let mut masses = Vec::with_capacity(h * h * k);
        for a in class.hypotheses() {
            for b in class.hypotheses() {
                let r = region_of(a, b, size);
                masses.extend(agents.iter().map(|ag| r.mass(ag.distribution())));
                regions.push(r);
            }
        }
        Geometry { h, k, regions, masses }
    }

    fn region(&self, a: usize, b: usize) -> &PointSet {
        &self.regions[a * self.h + b]
    }

    fn mass(&self, agent: usize, a: usize, b: usize) -> f64 {
        self.masses[(a * self.h + b) * self.k + agent]
    }
}

fn region_of(a: &Hypothesis, b: &Hypothesis, size: usize) -> PointSet {
    PointSet::from_indices(
        size,
        a.labels
            .iter()
            .zip(&b.labels)
            .enumerate()
            .filter(|(_, (x, y))| x != y)
            .map(|(i, _)| i),
    )
}

#[derive(Debug, Clone)]
pub struct Instance {
    domain: Domain,
    class: HypothesisClass,
    agents: Vec<AgentSpec>,
    epsilon: f64,
    delta: f64,
    geometry: Geometry,
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.domain == other.domain
            && self.class == other.class
            && self.agents == other.agents
            && self.epsilon == other.epsilon
            && self.delta == other.delta
    }
}

impl Instance {
    pub fn new(
        domain: Domain,
        class: HypothesisClass,
        agents: Vec<AgentSpec>,
        epsilon: f64,
        delta: f64,
    ) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::validation("instance needs at least one agent"));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::validation(format!("epsilon {epsilon} not in (0,1)")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::validation(format!("delta {delta} not in (0,1)")));
        }
        if class.get(0).len() != domain.size() {
            return Err(Error::validation(format!(
                "hypotheses have {} labels but domain has {} points",
                class.get(0).len(),
                domain.size()
            )));
        }
        if let Some(i) = agents.iter().position(|a| a.distribution().len() != domain.size()) {
            return Err(Error::validation(format!(
                "agent {i} distribution has {} entries, domain has {} points",
                agents[i].distribution().len(),
                domain.size()
            )));
        }
        let geometry = Geometry::build(&class, &agents, domain.size());
        Ok(Instance {
            domain,
            class,
            agents,
            epsilon,
            delta,
            geometry,
        })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn class(&self) -> &HypothesisClass {
        &self.class
    }

    pub fn agents(&self) -> &[AgentSpec] {
        &self.agents
    }

    pub fn agent(&self, i: usize) -> &AgentSpec {
        &self.agents[i]
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn num_hypotheses(&self) -> usize {
        self.class.len()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn costs(&self) -> Vec<f64> {
        self.agents.iter().map(AgentSpec::cost).collect()
    }

    /// Region where hypotheses `a` and `b` (class indices) disagree.
    pub fn region(&self, a: usize, b: usize) -> &PointSet {
        self.geometry.region(a, b)
    }

    /// `D_agent(DIS(h_a, h_b))`.
    pub fn pair_mass(&self, agent: usize, a: usize, b: usize) -> f64 {
        self.geometry.mass(agent, a, b)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Instance::new(
            self.domain,
            self.class.clone(),
            self.agents.clone(),
            epsilon,
            self.delta,
        )
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Instance::new(
            self.domain,
            self.class.clone(),
            self.agents.clone(),
            self.epsilon,
            delta,
        )
    }

    pub fn with_class(&self, class: HypothesisClass) -> Result<Self> {
        Instance::new(self.domain, class, self.agents.clone(), self.epsilon, self.delta)
    }

    pub fn with_agent(&self, index: usize, agent: AgentSpec) -> Result<Self> {
        let mut agents = self.agents.clone();
        agents[index] = agent;
        Instance::new(self.domain, self.class.clone(), agents, self.epsilon, self.delta)
    }

    pub fn check_vector(&self, m: &ContributionVector) -> Result<()> {
        if m.len() != self.num_agents() {
            return Err(Error::invalid(format!(
                "contribution vector has {} entries for {} agents",
                m.len(),
                self.num_agents()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "format": FORMAT_VERSION,
            "domain_size": self.domain.size(),
            "hypotheses": self.class.hypotheses().iter().map(|h| h.labels().to_vec()).collect::<Vec<_>>(),
            "agents": self.agents.iter().map(|a| json!({
                "distribution": a.distribution(),
                "cost": a.cost(),
            })).collect::<Vec<_>>(),
            "epsilon": self.epsilon,
            "delta": self.delta,
        })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("instance serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
            field: "<document>".into(),
            message: e.to_string(),
        })?;
        Self::from_json(&value)
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let obj = value.as_object().ok_or_else(|| Error::Parse {
            field: "<document>".into(),
            message: "expected a JSON object".into(),
        })?;
        if let Some(v) = obj.get("format") {
            let version: u64 = typed(v, "format")?;
            if version != FORMAT_VERSION {
                return Err(Error::Parse {
                    field: "format".into(),
                    message: format!("unsupported version {version}"),
                });
            }
        }
        let domain_size: usize = typed(required(obj, "domain_size")?, "domain_size")?;
        let labels: Vec<Vec<u8>> = typed(required(obj, "hypotheses")?, "hypotheses")?;
        let agents_raw = required(obj, "agents")?
            .as_array()
            .ok_or_else(|| parse_err("agents", "expected an array"))?;
        let epsilon: f64 = typed(required(obj, "epsilon")?, "epsilon")?;
        let delta: f64 = typed(required(obj, "delta")?, "delta")?;

        let hypotheses = labels
            .into_iter()
            .enumerate()
            .map(|(i, l)| Hypothesis::new(l).map_err(|e| parse_err(&format!("hypotheses[{i}]"), &e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let mut agents = Vec::with_capacity(agents_raw.len());
        for (i, a) in agents_raw.iter().enumerate() {
            let a = a
                .as_object()
                .ok_or_else(|| parse_err(&format!("agents[{i}]"), "expected an object"))?;
            let field = format!("agents[{i}].distribution");
            let dist: Vec<f64> = typed(
                a.get("distribution").ok_or_else(|| parse_err(&field, "missing"))?,
                &field,
            )?;
            let field = format!("agents[{i}].cost");
            let cost: f64 = typed(a.get("cost").ok_or_else(|| parse_err(&field, "missing"))?, &field)?;
            agents.push(AgentSpec::new(dist, cost).map_err(|e| match e {
                Error::Validation(m) => Error::Validation(format!("agents[{i}]: {m}")),
                other => other,
            })?);
        }
        Instance::new(
            Domain::new(domain_size)?,
            HypothesisClass::new(hypotheses)?,
            agents,
            epsilon,
            delta,
        )
    }
}

fn parse_err(field: &str, message: &str) -> Error {
    Error::Parse {
        field: field.to_string(),
        message: message.to_string(),
    }
}

fn required<'a>(obj: &'a serde_json::Map<String, Value>, field: &str) -> Result<&'a Value> {
    obj.get(field).ok_or_else(|| parse_err(field, "missing"))
}

fn typed<T: for<'de> Deserialize<'de>>(v: &Value, field: &str) -> Result<T> {
    T::deserialize(v).map_err(|e| parse_err(field, &e.to_string()))
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance> {
    Instance::from_json_str(&std::fs::read_to_string(path)?)
}

pub fn save_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, instance.to_json_string() + "\n")?;
    Ok(())
}

/// `{x : h1(x) != h2(x)}`.
pub fn disagreement_region(h1: &Hypothesis, h2: &Hypothesis) -> Result<PointSet> {
    if h1.len() != h2.len() {
        return Err(Error::invalid(format!(
            "label vectors have lengths {} and {}",
            h1.len(),
            h2.len()
        )));
    }
    Ok(region_of(h1, h2, h1.len()))
}

pub fn disagreement_mass(agent: &AgentSpec, h1: &Hypothesis, h2: &Hypothesis) -> Result<f64> {
    let region = disagreement_region(h1, h2)?;
    if agent.distribution().len() != h1.len() {
        return Err(Error::invalid(format!(
            "distribution has {} entries, hypotheses have {} labels",
            agent.distribution().len(),
            h1.len()
        )));
    }
    Ok(region.mass(agent.distribution()).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(l: &[u8]) -> Hypothesis {
        Hypothesis::new(l.to_vec()).unwrap()
    }

    #[test]
    fn region_identity_and_complement() {
        assert!(disagreement_region(&h(&[0, 1, 0]), &h(&[0, 1, 0])).unwrap().is_empty());
        let r = disagreement_region(&h(&[0, 0, 0]), &h(&[1, 0, 1])).unwrap();
        assert_eq!(r.iter().collect::<Vec<_>>(), vec![0, 2]);
        assert!(disagreement_region(&h(&[0, 0]), &h(&[0, 0, 0])).is_err());
    }

    #[test]
    fn mass_examples() {
        let uniform = AgentSpec::new(vec![0.25; 4], 1.0).unwrap();
        assert_eq!(
            disagreement_mass(&uniform, &h(&[0, 0, 1, 1]), &h(&[0, 0, 1, 1])).unwrap(),
            0.0
        );
        assert_eq!(
            disagreement_mass(&uniform, &h(&[1, 1, 0, 0]), &h(&[0, 0, 0, 0])).unwrap(),
            0.5
        );
        let eps = 0.1;
        let alice = AgentSpec::new(vec![1.0 - 2.0 * eps, 2.0 * eps], 1.0).unwrap();
        let m = disagreement_mass(&alice, &h(&[0, 1]), &h(&[0, 0])).unwrap();
        assert!((m - 2.0 * eps).abs() < 1e-15);
        assert!(disagreement_mass(&uniform, &h(&[0, 1]), &h(&[0, 0])).is_err());
    }

    #[test]
    fn validation_rules() {
        assert!(AgentSpec::new(vec![0.5, 0.4], 1.0).is_err());
        assert!(AgentSpec::new(vec![0.5, 0.5], 0.0).is_err());
        assert!(AgentSpec::new(vec![1.5, -0.5], 1.0).is_err());
        let a = AgentSpec::new(vec![0.5, 0.5 + 5e-10], 1.0).unwrap();
        assert_eq!(a.distribution().iter().sum::<f64>(), 1.0);
        assert!(HypothesisClass::new(vec![h(&[0, 1]), h(&[0, 1])]).is_err());
        assert!(HypothesisClass::new(vec![]).is_err());
        assert!(Hypothesis::new(vec![0, 2]).is_err());
        assert!(Domain::new(0).is_err());
    }

    #[test]
    fn json_errors_name_the_field() {
        let text = r#"{"format":1,"domain_size":2,"hypotheses":[[0,0],[1,0]],
            "agents":[{"distribution":[0.5,"x"],"cost":1}],"epsilon":0.1,"delta":0.1}"#;
        match Instance::from_json_str(text) {
            Err(Error::Parse { field, .. }) => assert_eq!(field, "agents[0].distribution"),
            other => panic!("unexpected {other:?}"),
        }
        let text = r#"{"format":1,"domain_size":2,"hypotheses":[[0,0],[1,0]],
            "agents":[{"distribution":[0.5,0.5],"cost":1}],"delta":0.1}"#;
        match Instance::from_json_str(text) {
            Err(Error::Parse { field, .. }) => assert_eq!(field, "epsilon"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn full_labelling_class() {
        let c = HypothesisClass::all_labelings(3).unwrap();
        assert_eq!(c.len(), 8);
        assert_eq!(c.get(5).labels(), &[1, 0, 1]);
    }
}
