//! Seeded random instances for property suites and acceptance runs.

use collab_pac::instance::{AgentSpec, Domain, Hypothesis, HypothesisClass, Instance};
use collab_pac::lp::LinearProgram;
use collab_pac::reduction::SetCoverInstance;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub max_agents: usize,
    pub max_hypotheses: usize,
    pub max_domain: usize,
    pub epsilons: &'static [f64],
    pub delta: f64,
}

impl Shape {
    pub const RATIO_SUITE: Shape = Shape {
        max_agents: 3,
        max_hypotheses: 8,
        max_domain: 8,
        epsilons: &[0.1, 0.2],
        delta: 0.1,
    };
}

/// Random distribution with roughly a third of the points left empty.
pub fn distribution(rng: &mut impl Rng, size: usize) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..size)
            .map(|_| {
                if rng.random_bool(0.3) {
                    0.0
                } else {
                    rng.random_range(0.05..1.0)
                }
            })
            .collect();
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            return w.into_iter().map(|x| x / total).collect();
        }
    }
}

pub fn class(rng: &mut impl Rng, domain: usize, count: usize) -> HypothesisClass {
    let mut codes: Vec<u64> = (0..1u64 << domain).collect();
    codes.shuffle(rng);
    let hyps = codes[..count.min(codes.len())]
        .iter()
        .map(|&c| Hypothesis::new((0..domain).map(|x| (c >> x & 1) as u8).collect()).expect("binary labels"))
        .collect();
    HypothesisClass::new(hyps).expect("distinct codes")
}

pub fn instance(rng: &mut impl Rng, shape: Shape) -> Instance {
    let domain = rng.random_range(2..=shape.max_domain);
    let h = rng.random_range(2..=shape.max_hypotheses.min(1 << domain));
    let k = rng.random_range(1..=shape.max_agents);
    let agents = (0..k)
        .map(|_| AgentSpec::new(distribution(rng, domain), rng.random_range(0.001..0.01)).expect("valid agent"))
        .collect();
    let eps = shape.epsilons[rng.random_range(0..shape.epsilons.len())];
    Instance::new(
        Domain::new(domain).expect("domain"),
        class(rng, domain, h),
        agents,
        eps,
        shape.delta,
    )
    .expect("valid instance")
}

pub fn set_cover(rng: &mut impl Rng, max_universe: usize, max_subsets: usize) -> SetCoverInstance {
    let n = rng.random_range(1..=max_universe);
    let r = rng.random_range(1..=max_subsets);
    loop {
        let subsets: Vec<Vec<usize>> = (0..r)
            .map(|_| (0..n).filter(|_| rng.random_bool(0.4)).collect())
            .collect();
        if let Ok(sc) = SetCoverInstance::new(n, subsets) {
            return sc;
        }
    }
}

/// Bounded-below LP with positive costs and up to `max_rows` rows.
pub fn small_lp(rng: &mut impl Rng, max_vars: usize, max_rows: usize) -> LinearProgram {
    let n = rng.random_range(1..=max_vars);
    let m = rng.random_range(1..=max_rows);
    let costs = (0..n).map(|_| rng.random_range(0.1..3.0)).collect();
    let matrix = (0..m)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..3.0)).collect())
        .collect();
    let rhs = (0..m).map(|_| rng.random_range(-1.0..4.0)).collect();
    LinearProgram::new(costs, matrix, rhs).expect("well-formed")
}
