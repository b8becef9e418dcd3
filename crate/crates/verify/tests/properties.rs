use collab_pac::exact::exact_min_cost;
use collab_pac::game::Game;
use collab_pac::instance::{disagreement_mass, AgentSpec, ContributionVector, Domain, Hypothesis, HypothesisClass};
use collab_pac::lp::{certifies, solve_lp, LpStatus};
use collab_pac::mechanism::{obliviousness_witness, vcg_payment, WitnessConfig};
use collab_pac::oracle::{monte_carlo_pac_failure, McConfig};
use collab_pac::planner::gamma_cover_indices;
use collab_pac::reduction::{
    brute_force_set_cover, consistent_hypotheses, min_eliminating_sample_count, set_cover_to_pac,
};
use collab_pac::{Exec, Instance, Objective, Oracle, PointSet};
use collab_pac_verify::brute;
use collab_pac_verify::gen::{self, Shape};
use proptest::prelude::*;

const SMALL: Shape = Shape {
    max_agents: 2,
    max_hypotheses: 6,
    max_domain: 4,
    epsilons: &[0.1, 0.25],
    delta: 0.2,
};

fn small(seed: u64) -> Instance {
    gen::instance(&mut gen::rng(seed), SMALL)
}

/// Random vector with at most `total` draws in all.
fn vector(k: usize, parts: &[u64], total: u64) -> ContributionVector {
    let mut left = total;
    ContributionVector(
        (0..k)
            .map(|i| {
                let v = parts[i % parts.len()].min(left);
                left -= v;
                v
            })
            .collect(),
    )
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig::with_cases(cases)
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn disagreement_is_a_pseudometric(seed in any::<u64>()) {
        let inst = small(seed);
        let class = inst.class();
        for agent in inst.agents() {
            for a in 0..class.len() {
                prop_assert_eq!(disagreement_mass(agent, class.get(a), class.get(a)).unwrap(), 0.0);
                for b in 0..class.len() {
                    let ab = disagreement_mass(agent, class.get(a), class.get(b)).unwrap();
                    prop_assert_eq!(ab, disagreement_mass(agent, class.get(b), class.get(a)).unwrap());
                    for c in 0..class.len() {
                        let ac = disagreement_mass(agent, class.get(a), class.get(c)).unwrap();
                        let bc = disagreement_mass(agent, class.get(b), class.get(c)).unwrap();
                        prop_assert!(ac <= ab + bc + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn instance_json_round_trip(seed in any::<u64>()) {
        let inst = small(seed);
        let text = inst.to_json_string();
        let back = Instance::from_json_str(&text).unwrap();
        prop_assert_eq!(back.to_json_string(), text);
        prop_assert_eq!(back.class(), inst.class());
        prop_assert_eq!(back.agents(), inst.agents());
        prop_assert_eq!(back.epsilon(), inst.epsilon());
    }

    #[test]
    fn oracle_matches_outcome_enumeration(seed in any::<u64>(), parts in prop::collection::vec(0u64..4, 2), total in 0u64..5) {
        let inst = small(seed);
        let m = vector(inst.num_agents(), &parts, total);
        let oracle = Oracle::new(&inst);
        for target in 0..inst.num_hypotheses() {
            for agent in 0..inst.num_agents() {
                let exact = oracle.pac_failure_probability(&m, target, agent).unwrap().value;
                let brute = brute::enumerate_pac_failure(&inst, &m, target, agent);
                prop_assert!((exact - brute).abs() <= 1e-12, "pac {exact} vs {brute}");
                let exact = oracle.expected_erm_error(&m, target, agent).unwrap();
                let brute = brute::enumerate_expected_error(&inst, &m, target, agent);
                prop_assert!((exact - brute).abs() <= 1e-12, "expected {exact} vs {brute}");
            }
        }
    }

    #[test]
    fn failure_and_feasibility_are_monotone(seed in any::<u64>(), parts in prop::collection::vec(0u64..6, 2)) {
        let inst = small(seed);
        let oracle = Oracle::new(&inst);
        let m = vector(inst.num_agents(), &parts, 12);
        for i in 0..inst.num_agents() {
            let up = m.with(i, m.0[i] + 1);
            for target in 0..inst.num_hypotheses() {
                for agent in 0..inst.num_agents() {
                    let lo = oracle.pac_failure_probability(&m, target, agent).unwrap().value;
                    let hi = oracle.pac_failure_probability(&up, target, agent).unwrap().value;
                    prop_assert!(hi <= lo + 1e-12);
                    let lo = oracle.expected_erm_error(&m, target, agent).unwrap();
                    let hi = oracle.expected_erm_error(&up, target, agent).unwrap();
                    prop_assert!(hi <= lo + 1e-12);
                }
            }
            for objective in [Objective::Pac, Objective::Expected] {
                if oracle.feasible(objective, &m).unwrap() {
                    prop_assert!(oracle.feasible(objective, &up).unwrap());
                }
            }
        }
    }

    #[test]
    fn expected_error_ignores_point_order(seed in any::<u64>(), m0 in 0u64..6, m1 in 0u64..6, rot in 1usize..4) {
        let inst = small(seed);
        let n = inst.domain().size();
        let perm = |x: usize| (x + rot) % n;
        let permute = |v: &[f64]| {
            let mut out = vec![0.0; n];
            for (x, &p) in v.iter().enumerate() {
                out[perm(x)] = p;
            }
            out
        };
        let class = HypothesisClass::new(
            inst.class()
                .hypotheses()
                .iter()
                .map(|h| Hypothesis::from_positives(n, (0..n).filter(|&x| h.label(x) == 1).map(perm)))
                .collect(),
        ).unwrap();
        let agents: Vec<AgentSpec> = inst.agents().iter().map(|a| AgentSpec::new(permute(a.distribution()), a.cost()).unwrap()).collect();
        let moved = Instance::new(Domain::new(n).unwrap(), class, agents, inst.epsilon(), inst.delta()).unwrap();
        let m = vector(inst.num_agents(), &[m0, m1], 12);
        let (a, b) = (Oracle::new(&inst), Oracle::new(&moved));
        for target in 0..inst.num_hypotheses() {
            for agent in 0..inst.num_agents() {
                let x = a.expected_erm_error(&m, target, agent).unwrap();
                let y = b.expected_erm_error(&m, target, agent).unwrap();
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn exact_search_matches_box_scan(seed in any::<u64>(), expected in any::<bool>()) {
        let inst = small(seed);
        let objective = if expected { Objective::Expected } else { Objective::Pac };
        let sol = exact_min_cost(&inst, objective, None).unwrap();
        let (_, cost) = brute::exhaustive_min_cost(&inst, objective, sol.cap).unwrap().expect("box holds a feasible vector");
        prop_assert!((sol.cost - cost).abs() <= 1e-12, "{} vs {}", sol.cost, cost);
        prop_assert!(Oracle::new(&inst).feasible(objective, &sol.m).unwrap());
    }

    #[test]
    fn ne_predicate_matches_deviation_scan(seed in any::<u64>()) {
        let inst = small(seed).with_delta(0.3).unwrap();
        let game = Game::new(&inst).unwrap();
        let ind = game.individual().to_vec();
        let k = inst.num_agents();
        let mut m = vec![0u64; k];
        'outer: loop {
            let v = ContributionVector(m.clone());
            let mut stable = true;
            for i in 0..k {
                let here = game.utility(&v, i).unwrap();
                for dev in 0..=ind[i] + 1 {
                    if game.utility(&v.with(i, dev), i).unwrap() > here + 1e-12 {
                        stable = false;
                    }
                }
                let br = game.best_response(&v, i).unwrap();
                prop_assert!(br <= ind[i]);
                if Oracle::new(&inst).agent_requirement_met(&v.with(i, 0), i).unwrap() {
                    prop_assert_eq!(br, 0);
                }
            }
            prop_assert_eq!(game.is_pure_ne(&v).unwrap(), stable, "at {}", v);
            for (slot, &cap) in m.iter_mut().zip(&ind) {
                if *slot < cap {
                    *slot += 1;
                    continue 'outer;
                }
                *slot = 0;
            }
            break;
        }
    }

    #[test]
    fn vcg_payments_balance(seed in any::<u64>(), parts in prop::collection::vec(0u64..50, 2), pivots in prop::collection::vec(-2.0f64..2.0, 2)) {
        let inst = small(seed);
        let k = inst.num_agents();
        let m = vector(k, &parts, 100);
        let pivots = &pivots[..k];
        let pay = vcg_payment(&inst, &m, pivots).unwrap();
        let costs = inst.costs();
        let spent = m.cost(&costs);
        for i in 0..k {
            let others = spent - costs[i] * m.0[i] as f64;
            prop_assert!((pay[i] + others - ((k - 1) as f64 + pivots[i])).abs() <= 1e-9);
        }
    }

    #[test]
    fn gamma_cover_is_a_cover(seed in any::<u64>(), gamma in 0.01f64..0.6) {
        let mut rng = gen::rng(seed);
        let inst = gen::instance(&mut rng, Shape { max_hypotheses: 10, ..SMALL });
        let cover = gamma_cover_indices(inst.class(), inst.agents(), gamma).unwrap();
        prop_assert!(!cover.is_empty());
        prop_assert!(cover.len() >= brute::min_cover_size(inst.class(), inst.agents(), gamma));
        for h in inst.class().hypotheses() {
            let near = cover.iter().any(|&c| {
                inst.agents().iter().all(|a| disagreement_mass(a, h, inst.class().get(c)).unwrap() <= gamma + 1e-12)
            });
            prop_assert!(near);
        }
    }

    #[test]
    fn reduction_preserves_optimum(seed in any::<u64>()) {
        let sc = gen::set_cover(&mut gen::rng(seed), 6, 6);
        let red = set_cover_to_pac(&sc).unwrap();
        let best = brute_force_set_cover(&sc).unwrap();
        prop_assert_eq!(min_eliminating_sample_count(&red).unwrap(), best);
        // the full subset sample leaves the target as the unique consistent hypothesis
        let all = PointSet::from_indices(red.instance.domain().size(), red.subset_points.iter().copied());
        prop_assert_eq!(consistent_hypotheses(&red.instance, red.target, &all), vec![red.target]);
    }
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn lp_matches_vertex_enumeration(seed in any::<u64>()) {
        let lp = gen::small_lp(&mut gen::rng(seed), 3, 6);
        let sol = solve_lp(&lp).unwrap();
        let vertex = brute::vertex_enumeration(&lp);
        match sol.status {
            LpStatus::Optimal => {
                let v = vertex.expect("optimal LP has a feasible vertex");
                prop_assert!((sol.objective - v).abs() <= 1e-8 * (1.0 + v.abs()), "{} vs {}", sol.objective, v);
                prop_assert!(lp.max_violation(&sol.x) <= 1e-7);
                prop_assert!(certifies(&lp, &sol, 1e-7));
                let again = solve_lp(&lp).unwrap();
                prop_assert_eq!(again.x, sol.x);
            }
            LpStatus::Infeasible => prop_assert!(vertex.is_none()),
            other => prop_assert!(false, "unexpected status {other:?}"),
        }
    }

    #[test]
    fn uniform_coverage_is_coupon_collecting(n in 2usize..7, draws in 0u64..15) {
        let hyps = std::iter::once(Hypothesis::from_positives(n, []))
            .chain((0..n).map(|x| Hypothesis::from_positives(n, [x])))
            .collect();
        let inst = Instance::new(
            Domain::new(n).unwrap(),
            HypothesisClass::new(hyps).unwrap(),
            vec![AgentSpec::new(vec![1.0 / n as f64; n], 1.0).unwrap()],
            0.5 / n as f64,
            0.1,
        ).unwrap();
        let p = Oracle::new(&inst).pac_failure_probability(&ContributionVector(vec![draws]), 0, 0).unwrap().value;
        prop_assert!((p - brute::coupon_collector_failure(n, draws)).abs() <= 1e-12);
    }

    #[test]
    fn simulation_is_policy_independent(seed in any::<u64>(), parts in prop::collection::vec(0u64..6, 2)) {
        let inst = small(seed);
        let m = vector(inst.num_agents(), &parts, 10);
        let cfg = McConfig::new(2_000, seed);
        let a = monte_carlo_pac_failure(&inst, &m, 0, 0, cfg.with_exec(Exec::Sequential)).unwrap();
        let b = monte_carlo_pac_failure(&inst, &m, 0, 0, cfg.with_exec(Exec::Parallel)).unwrap();
        prop_assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(config(4))]

    #[test]
    fn witness_profiles_are_distributions(a in 210u64..400, b in 210u64..400, h in 18usize..24) {
        let m = ContributionVector(vec![a, b]);
        let mp = m.with(0, a + 1);
        let cfg = WitnessConfig { trials: 500, ..WitnessConfig::default() };
        let rep = obliviousness_witness(&m, &mp, h, 0.5, Some(cfg)).unwrap();
        for d in [&rep.d1, &rep.d2, &rep.d1_prime, &rep.d2_prime] {
            prop_assert_eq!(d.len(), h - 1);
            prop_assert!((d.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            prop_assert!(d.iter().all(|&p| p >= 0.0));
        }
    }
}
