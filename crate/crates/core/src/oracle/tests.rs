use super::*;
use crate::instance::{AgentSpec, Domain, Hypothesis, HypothesisClass};

fn cyclic() -> Instance {
    let third = 1.0 / 3.0;
    let rows = [
        vec![third, 2.0 * third, 0.0],
        vec![0.0, third, 2.0 * third],
        vec![2.0 * third, 0.0, third],
    ];
    Instance::new(
        Domain::new(3).unwrap(),
        HypothesisClass::all_labelings(3).unwrap(),
        rows.into_iter().map(|d| AgentSpec::new(d, 0.5).unwrap()).collect(),
        third,
        2.0 * third,
    )
    .unwrap()
}

fn two_point(beta: f64, delta: f64) -> Instance {
    let class = HypothesisClass::new(vec![
        Hypothesis::new(vec![0, 0]).unwrap(),
        Hypothesis::new(vec![1, 0]).unwrap(),
    ])
    .unwrap();
    Instance::new(
        Domain::new(2).unwrap(),
        class,
        vec![AgentSpec::new(vec![beta, 1.0 - beta], 0.01).unwrap()],
        0.1,
        delta,
    )
    .unwrap()
}

fn v(x: &[u64]) -> ContributionVector {
    ContributionVector(x.to_vec())
}

#[test]
fn single_bad_hypothesis_closed_form() {
    let inst = two_point(0.3, 0.05);
    let oracle = Oracle::new(&inst);
    for m in 0..12u64 {
        let p = oracle.pac_failure_probability(&v(&[m]), 0, 0).unwrap().value;
        assert!((p - 0.7f64.powi(m as i32)).abs() < 1e-15);
        let e = oracle.expected_erm_error(&v(&[m]), 0, 0).unwrap();
        assert!((e - 0.3 * 0.7f64.powi(m as i32)).abs() < 1e-15);
    }
    let closed = (0.05f64.ln() / 0.7f64.ln()).ceil() as u64;
    assert_eq!(oracle.individual_sample_complexity(0).unwrap(), closed);
}

#[test]
fn cyclic_instance_agent_one() {
    // all-negative target: agent 1's bad hypotheses all label the middle point
    let inst = cyclic();
    let oracle = Oracle::new(&inst);
    let p = oracle.pac_failure_probability(&v(&[1, 1, 0]), 0, 0).unwrap().value;
    assert!((p - 2.0 / 9.0).abs() < 1e-15);
    for agent in 0..3 {
        assert_eq!(oracle.individual_sample_complexity(agent).unwrap(), 1);
    }
}

#[test]
fn singleton_class_is_trivial() {
    let inst = two_point(0.3, 0.05)
        .with_class(HypothesisClass::all_labelings(2).unwrap().subset(&[0]).unwrap())
        .unwrap();
    let oracle = Oracle::new(&inst);
    assert!(oracle.pac_feasible(&v(&[0])).unwrap());
    assert!(oracle.expected_feasible(&v(&[0])).unwrap());
    assert_eq!(oracle.individual_sample_complexity(0).unwrap(), 0);
}

#[test]
fn survival_of_empty_vector_is_one() {
    let inst = cyclic();
    let region = PointSet::from_indices(3, [0, 1]);
    assert_eq!(survival_probability(&inst, &v(&[0, 0, 0]), &region).unwrap(), 1.0);
    let s = survival_probability(&inst, &v(&[2, 0, 0]), &region).unwrap();
    assert_eq!(s, 0.0);
}

#[test]
fn monte_carlo_matches_exact_on_cyclic() {
    let inst = cyclic();
    let m = v(&[1, 1, 0]);
    let exact = pac_failure_probability(&inst, &m, 0, 0).unwrap().value;
    let est = monte_carlo_pac_failure(&inst, &m, 0, 0, McConfig::new(20_000, 7)).unwrap();
    assert!(est.agrees_with(exact, 4.0), "{est:?} vs {exact}");
    let seq = monte_carlo_pac_failure(
        &inst,
        &m,
        0,
        0,
        McConfig::new(20_000, 7).with_exec(crate::Exec::Sequential),
    )
    .unwrap();
    assert_eq!(est, seq);
}

#[test]
fn capacity_error_surfaces() {
    // 6 overlapping bad regions on a path, cap 3
    let n = 7;
    let hyps: Vec<Hypothesis> = std::iter::once(Hypothesis::from_positives(n, []))
        .chain((0..6).map(|i| Hypothesis::from_positives(n, [i, i + 1])))
        .collect();
    let inst = Instance::new(
        Domain::new(n).unwrap(),
        HypothesisClass::new(hyps).unwrap(),
        vec![AgentSpec::new(vec![1.0 / n as f64; n], 0.01).unwrap()],
        0.1,
        0.1,
    )
    .unwrap();
    let oracle = Oracle::with_limits(&inst, OracleLimits { exact_cap: 3 });
    assert!(oracle
        .pac_failure_probability(&v(&[2]), 0, 0)
        .unwrap_err()
        .is_capacity());
    assert!(Oracle::new(&inst).pac_failure_probability(&v(&[2]), 0, 0).is_ok());
}
