use collab_pac::exact::{approximation_ratio, exact_min_cost};
use collab_pac::game::{
    alice_bob_delta, alice_bob_instance, best_response_dynamics, enumerate_pure_ne, nonexistence_instance, DynamicsEnd,
};
use collab_pac::oracle::{pac_feasible, OracleLimits};
use collab_pac::planner::{self, PipelineParams};
use collab_pac::{ContributionVector, Exec, Instance, Objective, Oracle};

fn alice_bob() -> Instance {
    alice_bob_instance(0.1, alice_bob_delta(0.1), 0.1).unwrap()
}

#[test]
fn rounded_plans_are_feasible() {
    for inst in [alice_bob(), nonexistence_instance()] {
        let oracle = Oracle::new(&inst);
        let pac = planner::plan_pac(&inst).unwrap();
        assert!(oracle.pac_feasible(&pac.m).unwrap(), "{}", pac.m);
        let exp = planner::plan_expected(&inst).unwrap();
        assert!(oracle.expected_feasible(&exp.m).unwrap(), "{}", exp.m);
    }
}

#[test]
fn ratio_stays_under_bound() {
    let inst = alice_bob();
    let report = approximation_ratio(&inst, Objective::Pac).unwrap();
    assert!(report.optimum_cost > 0.0);
    assert!(report.planner_cost >= report.optimum_cost - 1e-12);
    assert!(report.ratio <= planner::pac_ratio_bound(inst.num_hypotheses(), inst.delta()) + 1e-9);
}

#[test]
fn alice_bob_optimum_is_one_each() {
    let sol = exact_min_cost(&alice_bob(), Objective::Pac, None).unwrap();
    assert_eq!(sol.m, ContributionVector(vec![1, 1]));
}

#[test]
fn pipeline_output_covers_the_full_class() {
    let inst = alice_bob();
    let res = planner::infinite_class_pipeline(&inst, PipelineParams::default()).unwrap();
    assert!(!res.cover.is_empty());
    assert!(res.multiplier >= 1);
    assert_eq!(
        res.m.0,
        res.base.0.iter().map(|c| c * res.multiplier).collect::<Vec<_>>()
    );
    assert!(pac_feasible(&inst, &res.m).unwrap());
}

#[test]
fn cyclic_instance_has_no_equilibrium() {
    let inst = nonexistence_instance();
    let out = enumerate_pure_ne(&inst, 1_000, Exec::Sequential).unwrap();
    assert!(out.pure_ne.is_empty());
    let dyn_ = best_response_dynamics(&inst, &ContributionVector::zeros(3), 100).unwrap();
    assert!(matches!(dyn_.end, DynamicsEnd::Cycle { .. }), "{:?}", dyn_.end);
}

#[test]
fn tiny_caps_report_capacity() {
    let inst = nonexistence_instance();
    let err = enumerate_pure_ne(&inst, 2, Exec::Sequential).unwrap_err();
    assert!(err.is_capacity());
    let oracle = Oracle::with_limits(&inst, OracleLimits { exact_cap: 0 });
    let err = oracle.pac_feasible(&ContributionVector(vec![1, 1, 1])).unwrap_err();
    assert!(err.is_capacity(), "{err}");
}
