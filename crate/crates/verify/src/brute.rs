//! Slow, obviously-correct reference computations.

use collab_pac::instance::{AgentSpec, ContributionVector, HypothesisClass, Instance};
use collab_pac::lp::LinearProgram;
use collab_pac::oracle::is_bad_mass;
use collab_pac::{Objective, Oracle, PointSet, Result};

/// Calls `f(probability, seen)` for every ordered outcome of the pooled
/// draws: `m_i` independent points from each agent `i`.
pub fn for_each_outcome(instance: &Instance, m: &ContributionVector, mut f: impl FnMut(f64, &PointSet)) {
    let draws: Vec<&[f64]> = instance
        .agents()
        .iter()
        .zip(m.counts())
        .flat_map(|(a, &mi)| std::iter::repeat_n(a.distribution(), mi as usize))
        .collect();
    let size = instance.domain().size();
    fn walk(
        draws: &[&[f64]],
        depth: usize,
        prob: f64,
        seen: &mut Vec<usize>,
        size: usize,
        f: &mut dyn FnMut(f64, &PointSet),
    ) {
        if depth == draws.len() {
            f(prob, &PointSet::from_indices(size, seen.iter().copied()));
            return;
        }
        for (x, &p) in draws[depth].iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            seen.push(x);
            walk(draws, depth + 1, prob * p, seen, size, f);
            seen.pop();
        }
    }
    walk(&draws, 0, 1.0, &mut Vec::new(), size, &mut f);
}

/// Largest true error (on `agent`) among hypotheses consistent with the
/// target on `seen`.
fn worst_consistent(instance: &Instance, target: usize, agent: usize, seen: &PointSet) -> f64 {
    (0..instance.num_hypotheses())
        .filter(|&h| instance.region(target, h).is_disjoint(seen))
        .map(|h| instance.pair_mass(agent, target, h))
        .fold(0.0, f64::max)
}

pub fn enumerate_pac_failure(instance: &Instance, m: &ContributionVector, target: usize, agent: usize) -> f64 {
    let eps = instance.epsilon();
    let mut total = 0.0;
    for_each_outcome(instance, m, |p, seen| {
        if is_bad_mass(worst_consistent(instance, target, agent, seen), eps) {
            total += p;
        }
    });
    total
}

pub fn enumerate_expected_error(instance: &Instance, m: &ContributionVector, target: usize, agent: usize) -> f64 {
    let mut total = 0.0;
    for_each_outcome(instance, m, |p, seen| {
        total += p * worst_consistent(instance, target, agent, seen);
    });
    total
}

/// `P(some of n equally likely points is unseen after m draws)`.
pub fn coupon_collector_failure(n: usize, m: u64) -> f64 {
    let mut total = 0.0;
    let mut binom = 1.0;
    for j in 1..=n {
        binom *= (n - j + 1) as f64 / j as f64;
        let term = binom * (1.0 - j as f64 / n as f64).powi(m as i32);
        if j % 2 == 1 {
            total += term;
        } else {
            total -= term;
        }
    }
    total
}

fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Minimum objective over all basic feasible solutions, or `None` when no
/// vertex is feasible. Only meaningful for LPs bounded below.
pub fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    let rows = lp.num_rows();
    // candidate active constraints: LP rows, then x_j = 0
    let total = rows + n;
    let mut best: Option<f64> = None;
    let mut pick: Vec<usize> = (0..n).collect();
    if n == 0 {
        return (lp.max_violation(&[]) <= 1e-9).then_some(0.0);
    }
    if n > total {
        return None;
    }
    loop {
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for &c in &pick {
            if c < rows {
                a.push(lp.matrix()[c].clone());
                b.push(lp.rhs()[c]);
            } else {
                let mut e = vec![0.0; n];
                e[c - rows] = 1.0;
                a.push(e);
                b.push(0.0);
            }
        }
        if let Some(x) = solve_square(a, b) {
            if x.iter().all(|&v| v >= -1e-9) && lp.max_violation(&x) <= 1e-9 {
                let obj = lp.objective_at(&x);
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < total - n + i {
                pick[i] += 1;
                for j in i + 1..n {
                    pick[j] = pick[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Size of a smallest subset `S` of the class such that every hypothesis
/// lies within `gamma` of some member of `S` under every agent.
pub fn min_cover_size(class: &HypothesisClass, agents: &[AgentSpec], gamma: f64) -> usize {
    let h = class.len();
    let size = class.get(0).len();
    let close = |a: usize, b: usize| {
        agents.iter().all(|ag| {
            let d: f64 = (0..size)
                .filter(|&x| class.get(a).label(x) != class.get(b).label(x))
                .map(|x| ag.distribution()[x])
                .sum();
            d <= gamma
        })
    };
    (1..=h)
        .find(|&s| {
            (0u32..1 << h)
                .filter(|mask| mask.count_ones() as usize == s)
                .any(|mask| (0..h).all(|x| (0..h).any(|c| mask >> c & 1 == 1 && close(x, c))))
        })
        .unwrap_or(h)
}

/// Cheapest feasible vector in `[0, cap]^k` by scanning the whole box.
pub fn exhaustive_min_cost(
    instance: &Instance,
    objective: Objective,
    cap: u64,
) -> Result<Option<(ContributionVector, f64)>> {
    let oracle = Oracle::new(instance);
    let k = instance.num_agents();
    let costs = instance.costs();
    let mut best: Option<(ContributionVector, f64)> = None;
    let mut m = vec![0u64; k];
    'outer: loop {
        let v = ContributionVector(m.clone());
        let c = v.cost(&costs);
        if best.as_ref().is_none_or(|(_, bc)| c < *bc) && oracle.feasible(objective, &v)? {
            best = Some((v, c));
        }
        for slot in m.iter_mut() {
            if *slot < cap {
                *slot += 1;
                continue 'outer;
            }
            *slot = 0;
        }
        return Ok(best);
    }
}
