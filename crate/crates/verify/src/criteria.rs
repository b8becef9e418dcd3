//! Acceptance criteria as runnable checks. Each returns an [`Outcome`]
//! whose one-line rendering is what the acceptance test and the CLI
//! `suite` command print.

use std::fmt;
use std::time::Instant;

use collab_pac::exact::exact_min_cost_with;
use collab_pac::game::{self, Game};
use collab_pac::instance::ContributionVector;
use collab_pac::lp::FEASIBILITY_TOL;
use collab_pac::mechanism::{self, PaymentRule, PaymentTable};
use collab_pac::oracle::{monte_carlo_pac_failure, McConfig};
use collab_pac::planner;
use collab_pac::reduction;
use collab_pac::{Error, Exec, Instance, Objective, Oracle, Result};
use rand::Rng;

use crate::brute;
use crate::gen::{self, Shape};

#[derive(Debug, Clone, Copy)]
pub struct Settings {
    pub seed: u64,
    pub quick: bool,
    pub exec: Exec,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            seed: 42,
            quick: false,
            exec: Exec::default(),
        }
    }
}

impl Settings {
    fn count(&self, full: usize, quick: usize) -> usize {
        if self.quick {
            quick
        } else {
            full
        }
    }

    fn rng(&self, id: u8) -> rand_chacha::ChaCha8Rng {
        gen::rng(self.seed.wrapping_mul(1_000_003).wrapping_add(id as u64))
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] criterion {:>2} {}: {} ({:.2}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

pub const NAMES: [&str; 11] = [
    "approximation-ratio bound",
    "no pure NE on the cyclic instance",
    "Alice/Bob equilibria",
    "price of stability growth",
    "oracle cross-validation",
    "monotonicity",
    "PWYC strategyproofness",
    "uniqueness checker",
    "set-cover reduction fidelity",
    "expected-objective soundness",
    "obliviousness witness",
];

pub fn run(id: u8, settings: Settings) -> Outcome {
    let start = Instant::now();
    let result = match id {
        1 => approximation_ratio(settings),
        2 => nonexistence(settings),
        3 => alice_bob(settings),
        4 => price_of_stability(settings),
        5 => oracle_cross_validation(settings),
        6 => monotonicity(settings),
        7 => pwyc_strategyproofness(settings),
        8 => uniqueness(settings),
        9 => reduction_fidelity(settings),
        10 => expected_soundness(settings),
        11 => obliviousness(settings),
        _ => Err(Error::InvalidInput(format!("no criterion {id}"))),
    };
    let (passed, detail) = match result {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    Outcome {
        id,
        name: NAMES.get(id as usize - 1).copied().unwrap_or("unknown"),
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn run_all(settings: Settings) -> Vec<Outcome> {
    (1..=NAMES.len() as u8).map(|id| run(id, settings)).collect()
}

type Check = Result<(bool, String)>;

fn approximation_ratio(s: Settings) -> Check {
    let mut rng = s.rng(1);
    let n = s.count(100, 20);
    let instances: Vec<Instance> = (0..n).map(|_| gen::instance(&mut rng, Shape::RATIO_SUITE)).collect();
    let rows = s.exec.map(&instances, |inst| -> Result<(f64, f64, bool, bool)> {
        let alloc = planner::plan_pac(inst)?;
        let oracle = Oracle::new(inst);
        let opt = exact_min_cost_with(&oracle, Objective::Pac, None)?;
        let ratio = if opt.cost == 0.0 {
            1.0
        } else {
            alloc.lp_objective / opt.cost
        };
        let bound = planner::pac_ratio_bound(inst.num_hypotheses(), inst.delta());
        Ok((ratio, bound, oracle.pac_feasible(&alloc.m)?, opt.cost > 0.0))
    });
    let mut worst: f64 = 0.0;
    let (mut over, mut infeasible, mut nontrivial) = (0, 0, 0);
    for r in rows {
        let (ratio, bound, feasible, positive) = r?;
        nontrivial += usize::from(positive);
        worst = worst.max(ratio / bound);
        over += usize::from(ratio > bound + 1e-9);
        infeasible += usize::from(!feasible);
    }
    Ok((
        over == 0 && infeasible == 0,
        format!("{n} instances ({nontrivial} with positive optimum), {over} over the bound, {infeasible} rounded solutions infeasible, max ratio/bound {worst:.6}"),
    ))
}

fn nonexistence(s: Settings) -> Check {
    let inst = game::nonexistence_instance();
    let out = game::enumerate_pure_ne(&inst, game::DEFAULT_ENUM_CAP, s.exec)?;
    Ok((
        out.pure_ne.is_empty(),
        format!("box size {}, {} pure equilibria", out.box_size, out.pure_ne.len()),
    ))
}

fn alice_bob(s: Settings) -> Check {
    let eps = 0.1;
    let inst = game::alice_bob_instance(eps, game::alice_bob_delta(eps), 0.1)?;
    let game = Game::new(&inst)?;
    let one_each = game.is_pure_ne(&ContributionVector(vec![1, 1]))?;
    let ne = game.pure_equilibria(game::DEFAULT_ENUM_CAP, s.exec)?;
    let opt = exact_min_cost_with(game.oracle(), Objective::Pac, None)?;
    let costs = inst.costs();
    let free_rider = ne
        .iter()
        .filter(|m| m.counts().contains(&0))
        .map(|m| m.cost(&costs))
        .min_by(f64::total_cmp);
    let ratio = free_rider.map(|c| c / opt.cost);
    let ok = one_each && ratio.is_some_and(|r| r >= 5.0);
    Ok((
        ok,
        format!(
            "(1,1) is NE: {one_each}; optimum {} cost {:.4}; equilibria {:?}; free-rider/optimum {}",
            opt.m,
            opt.cost,
            ne.iter().map(|m| m.to_string()).collect::<Vec<_>>(),
            ratio.map_or("none".into(), |r| format!("{r:.4} (needs >= 5)"))
        ),
    ))
}

fn price_of_stability(s: Settings) -> Check {
    let mut parts = Vec::new();
    let mut pos = Vec::new();
    let mut ok = true;
    for (eps, delta) in [(0.05, 0.5), (0.02, 0.5)] {
        let inst = game::pos_instance(eps, delta)?;
        let out = game::price_of_stability(&inst, game::DEFAULT_ENUM_CAP, s.exec)?;
        let formula = game::pos_formula(eps, delta);
        let value = out.pos.unwrap_or(f64::NAN);
        let within = (value - formula).abs() <= 0.25 * formula;
        ok &= within;
        pos.push(value);
        parts.push(format!(
            "eps={eps}: PoS {value:.4} vs formula {formula:.4} (within 25%: {within})"
        ));
    }
    let grows = pos[1] > pos[0];
    parts.push(format!("PoS(0.02) > PoS(0.05): {grows}"));
    Ok((ok && grows, parts.join("; ")))
}

fn compositions(k: usize, total: u64, out: &mut Vec<ContributionVector>) {
    fn rec(k: usize, left: u64, cur: &mut Vec<u64>, out: &mut Vec<ContributionVector>) {
        if cur.len() == k {
            out.push(ContributionVector(cur.clone()));
            return;
        }
        for v in 0..=left {
            cur.push(v);
            rec(k, left - v, cur, out);
            cur.pop();
        }
    }
    rec(k, total, &mut Vec::new(), out);
}

const ORACLE_SHAPE: Shape = Shape {
    max_agents: 3,
    max_hypotheses: 5,
    max_domain: 4,
    epsilons: &[0.1, 0.2, 0.3],
    delta: 0.1,
};

fn oracle_cross_validation(s: Settings) -> Check {
    let mut rng = s.rng(5);
    let n = s.count(40, 8);
    let mut worst: f64 = 0.0;
    let mut compared = 0usize;
    for _ in 0..n {
        let inst = gen::instance(&mut rng, ORACLE_SHAPE);
        let oracle = Oracle::new(&inst);
        let mut vectors = Vec::new();
        compositions(inst.num_agents(), 5, &mut vectors);
        for m in vectors {
            for t in 0..inst.num_hypotheses() {
                for a in 0..inst.num_agents() {
                    let exact = oracle.pac_failure_probability(&m, t, a)?.value;
                    let brute = brute::enumerate_pac_failure(&inst, &m, t, a);
                    worst = worst.max((exact - brute).abs());
                    compared += 1;
                }
            }
        }
    }
    let checks = s.count(100, 20);
    let trials = s.count(100_000, 20_000);
    let mut agree = 0;
    for c in 0..checks {
        let inst = gen::instance(&mut rng, ORACLE_SHAPE);
        let m = ContributionVector((0..inst.num_agents()).map(|_| rng.random_range(0..5)).collect());
        let t = rng.random_range(0..inst.num_hypotheses());
        let a = rng.random_range(0..inst.num_agents());
        let exact = Oracle::new(&inst).pac_failure_probability(&m, t, a)?.value;
        let est = monte_carlo_pac_failure(
            &inst,
            &m,
            t,
            a,
            McConfig::new(trials, s.seed + c as u64).with_exec(s.exec),
        )?;
        agree += usize::from(est.agrees_with(exact, 4.0));
    }
    let needed = (checks * 99).div_ceil(100);
    Ok((
        worst <= 1e-12 && agree >= needed,
        format!(
            "{compared} exact-vs-enumeration comparisons, max gap {worst:.2e}; Monte Carlo within 4 SE in {agree}/{checks} checks ({trials} trials)"
        ),
    ))
}

fn monotonicity(s: Settings) -> Check {
    let mut rng = s.rng(6);
    let n = s.count(500, 100);
    let shape = Shape {
        max_agents: 3,
        max_hypotheses: 6,
        max_domain: 5,
        epsilons: &[0.1, 0.2],
        delta: 0.2,
    };
    let mut violations = 0;
    for _ in 0..n {
        let inst = gen::instance(&mut rng, shape);
        let k = inst.num_agents();
        let m = ContributionVector((0..k).map(|_| rng.random_range(0..12)).collect());
        let mut up = m.clone();
        let bump = rng.random_range(0..k);
        up.0[bump] += rng.random_range(1..6);
        for slot in up.0.iter_mut() {
            *slot += rng.random_range(0..3);
        }
        let oracle = Oracle::new(&inst);
        for t in 0..inst.num_hypotheses() {
            for a in 0..k {
                let lo = oracle.pac_failure_probability(&m, t, a)?.value;
                let hi = oracle.pac_failure_probability(&up, t, a)?.value;
                violations += usize::from(hi > lo + 1e-12);
            }
        }
        if oracle.pac_feasible(&m)? && !oracle.pac_feasible(&up)? {
            violations += 1;
        }
    }
    Ok((
        violations == 0,
        format!("{n} (instance, m, increment) triples, {violations} violations"),
    ))
}

fn pwyc_strategyproofness(s: Settings) -> Check {
    let mut rng = s.rng(7);
    let n = s.count(20, 5);
    let shape = Shape {
        max_agents: 3,
        max_hypotheses: 6,
        max_domain: 5,
        epsilons: &[0.1, 0.2],
        delta: 0.1,
    };
    let mut profitable = 0;
    let mut audits = 0;
    let mut flagged = 0;
    let mut example = String::new();
    for i in 0..n {
        let inst = gen::instance(&mut rng, shape);
        let k = inst.num_agents();
        let pwyc = PaymentRule::pwyc(k);
        let over = PaymentRule::Reimburse {
            factor: 2.0,
            constants: vec![0.0; k],
        };
        let mut flagged_here = false;
        for agent in 0..k {
            let r = mechanism::strategyproofness_audit(&inst, 0.05, agent, &pwyc, s.exec)?;
            audits += 1;
            profitable += usize::from(!r.strategyproof);
            if !flagged_here {
                let r = mechanism::strategyproofness_audit(&inst, 0.05, agent, &over, s.exec)?;
                if !r.strategyproof {
                    flagged_here = true;
                    if example.is_empty() {
                        example = format!(
                            "instance {i} agent {agent}: truthful {:.4} vs misreport {:.4} with allocation {}",
                            r.truthful_utility,
                            r.best_misreport_utility,
                            r.misreport_allocation.map_or("-".into(), |m| m.to_string())
                        );
                    }
                }
            }
        }
        flagged += usize::from(flagged_here);
    }
    Ok((
        profitable == 0 && flagged >= 1,
        format!(
            "{audits} PWYC audits, {profitable} with a profitable misreport; over-reimbursement flagged on {flagged}/{n} instances ({example})"
        ),
    ))
}

fn random_pwyc_table(rng: &mut impl Rng) -> Result<PaymentTable> {
    let k = rng.random_range(2..=3);
    let costs: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
    let constants: Vec<f64> = (0..k).map(|_| rng.random_range(-5.0..5.0)).collect();
    let lo: Vec<u64> = (0..k).map(|_| rng.random_range(0..4)).collect();
    let hi: Vec<u64> = lo.iter().map(|&l| l + rng.random_range(1..4)).collect();
    let c = costs.clone();
    PaymentTable::from_fn(costs, &lo, &hi, move |m| {
        mechanism::pwyc_payment(m, &c, &constants).expect("matching lengths")
    })
}

fn uniqueness(s: Settings) -> Check {
    let mut rng = s.rng(8);
    let n = s.count(100, 30);
    let mut accepted = 0;
    let mut rejected = 0;
    for _ in 0..n {
        let table = random_pwyc_table(&mut rng)?;
        accepted += usize::from(mechanism::check_pwyc_uniqueness(&table)?.unique);

        let keys: Vec<ContributionVector> = table.entries().keys().cloned().collect();
        let target = keys[rng.random_range(0..keys.len())].clone();
        let agent = rng.random_range(0..table.costs().len());
        let mut payments = table.get(&target).expect("key from table").to_vec();
        let shift = rng.random_range(1e-6..1.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        payments[agent] += shift;
        let mut perturbed = table.clone();
        perturbed.set(target.clone(), payments)?;
        let report = mechanism::check_pwyc_uniqueness(&perturbed)?;
        let valid = report.witness.as_ref().is_some_and(|w| {
            let l1: u64 = w.m.0.iter().zip(&w.m_prime.0).map(|(a, b)| a.abs_diff(*b)).sum();
            l1 == 1
                && (w.m == target || w.m_prime == target)
                && w.agent == agent
                && perturbed.get(&w.m).is_some()
                && perturbed.get(&w.m_prime).is_some()
                && (w.slack - w.slack_prime).abs() > mechanism::UTILITY_TOL
        });
        rejected += usize::from(!report.unique && valid);
    }
    Ok((
        accepted == n && rejected == n,
        format!("{accepted}/{n} PWYC tables accepted, {rejected}/{n} perturbations rejected with a valid witness edge"),
    ))
}

fn reduction_fidelity(s: Settings) -> Check {
    let mut rng = s.rng(9);
    let n = s.count(20, 10);
    let mut equal = 0;
    let mut pairs = Vec::new();
    for _ in 0..n {
        let sc = gen::set_cover(&mut rng, 8, 6);
        let red = reduction::set_cover_to_pac(&sc)?;
        let a = reduction::min_eliminating_sample_count(&red)?;
        let b = reduction::brute_force_set_cover(&sc)?;
        equal += usize::from(a == b);
        pairs.push(format!("{a}={b}"));
    }
    Ok((equal == n, format!("{equal}/{n} equal ({})", pairs.join(" "))))
}

fn expected_soundness(s: Settings) -> Check {
    let mut rng = s.rng(10);
    let n = s.count(20, 5);
    let shape = Shape {
        max_agents: 2,
        max_hypotheses: 4,
        max_domain: 4,
        epsilons: &[0.2, 0.3],
        delta: 0.1,
    };
    let instances: Vec<Instance> = (0..n).map(|_| gen::instance(&mut rng, shape)).collect();
    let rows = s.exec.map(&instances, |inst| -> Result<(bool, bool, bool)> {
        let m = planner::solve_expected_allocation(inst)?;
        let sound = collab_pac::oracle::expected_feasible(inst, &m)?;
        let quarter = inst.with_epsilon(inst.epsilon() / 4.0)?;
        let opt = exact_min_cost_with(&Oracle::new(&quarter), Objective::Expected, None)?;
        let mult = planner::expected_converse_multiplier(inst.num_hypotheses());
        let scaled: Vec<f64> = opt.m.counts().iter().map(|&v| (v * mult) as f64).collect();
        let lp = planner::build_expected_lp(inst)?;
        Ok((sound, lp.max_violation(&scaled) <= FEASIBILITY_TOL, lp.num_rows() > 0))
    });
    let (mut sound, mut converse, mut nontrivial) = (0, 0, 0);
    for r in rows {
        let (a, b, c) = r?;
        nontrivial += usize::from(c);
        sound += usize::from(a);
        converse += usize::from(b);
    }
    Ok((
        sound == n && converse == n,
        format!("{nontrivial}/{n} instances with LP rows; {sound}/{n} rounded LP solutions expected-feasible; {converse}/{n} scaled eps/4 optima satisfy every LP row"),
    ))
}

pub const WITNESS_PAIRS: [([u64; 2], [u64; 2]); 3] = [
    ([151, 151], [152, 151]),
    ([160, 200], [160, 201]),
    ([300, 250], [299, 250]),
];

fn obliviousness(s: Settings) -> Check {
    let cfg = mechanism::WitnessConfig {
        trials: s.count(100_000, 20_000),
        seed: s.seed,
        exec: s.exec,
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for (m, mp) in WITNESS_PAIRS {
        let r = mechanism::obliviousness_witness(
            &ContributionVector(m.to_vec()),
            &ContributionVector(mp.to_vec()),
            18,
            0.5,
            Some(cfg),
        )?;
        ok &= r.passed;
        let boxes = r.boxes.iter().filter(|b| b.holds).count();
        let worst_rel = r.constraints.iter().map(|c| c.relative_error).fold(0.0, f64::max);
        let mc: Vec<String> = r
            .feasibility
            .iter()
            .filter_map(|f| f.monte_carlo.map(|e| format!("{:.4}±{:.4}", e.estimate, e.std_error)))
            .collect();
        parts.push(format!(
            "{:?}->{:?}: boxes {boxes}/{}, max first-order rel. error {worst_rel:.2e}, MC failure {}",
            m,
            mp,
            r.boxes.len(),
            mc.join(",")
        ));
    }
    Ok((ok, parts.join("; ")))
}
