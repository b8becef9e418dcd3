//! Exact probability that at least one of a family of regions receives no
//! sample, for independent per-agent i.i.d. draws.
//!
//! For a region `R`, `P(no sample in R) = prod_i (1 - D_i(R))^{m_i}` and
//! intersections of these events are the same expression evaluated on the
//! union of the regions, so the union probability follows from
//! inclusion-exclusion over subsets of the family. Two exact reductions
//! keep the subset count small:
//!
//! * a region containing another region is dropped, because the event for
//!   the larger region implies the event for the smaller one;
//! * when the remaining regions share a common core and their petals
//!   (region minus core) are pairwise disjoint, every union mass is the
//!   core mass plus a sum of petal masses. Petals with identical per-agent
//!   masses are interchangeable, so the subset sum collapses to a sum over
//!   how many petals of each kind are chosen, weighted by binomials.

use crate::error::{Error, Result};
use crate::region::PointSet;

/// `prod_i (1 - mass_i)^{m_i}` with masses clamped to `[0, 1]`.
pub(crate) fn survival(masses: &[f64], m: &[u64]) -> f64 {
    let mut log = 0.0;
    for (&x, &mi) in masses.iter().zip(m) {
        if mi == 0 {
            continue;
        }
        let x = x.clamp(0.0, 1.0);
        if x >= 1.0 {
            return 0.0;
        }
        log += mi as f64 * (-x).ln_1p();
    }
    log.exp()
}

#[derive(Debug, Clone)]
struct PetalGroup {
    count: u32,
    masses: Vec<f64>,
}

#[derive(Debug, Clone)]
enum Shape {
    Empty,
    Sunflower { core: Vec<f64>, groups: Vec<PetalGroup> },
    Generic { regions: Vec<PointSet> },
    TooLarge { terms: u64 },
}

/// Precomputed evaluation strategy for one region family.
#[derive(Debug, Clone)]
pub(crate) struct UnionPlan {
    shape: Shape,
    limit: u64,
}

fn terms_for_subsets(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl UnionPlan {
    /// `distributions[i]` is agent `i`'s point-mass vector; `cap` bounds the
    /// number of inclusion-exclusion terms at `2^cap - 1`.
    pub(crate) fn build(regions: Vec<PointSet>, distributions: &[&[f64]], cap: u32) -> Self {
        let limit = terms_for_subsets(cap as usize);
        let minimal = minimal_regions(regions);
        if minimal.is_empty() {
            return UnionPlan {
                shape: Shape::Empty,
                limit,
            };
        }
        if let Some(shape) = sunflower(&minimal, distributions, limit) {
            return UnionPlan { shape, limit };
        }
        let terms = terms_for_subsets(minimal.len());
        let shape = if terms > limit {
            Shape::TooLarge { terms }
        } else {
            Shape::Generic { regions: minimal }
        };
        UnionPlan { shape, limit }
    }

    /// Number of inclusion-exclusion terms the plan evaluates.
    pub(crate) fn terms(&self) -> u64 {
        match &self.shape {
            Shape::Empty => 0,
            Shape::Sunflower { groups, .. } => sunflower_terms(groups),
            Shape::Generic { regions } => terms_for_subsets(regions.len()),
            Shape::TooLarge { terms } => *terms,
        }
    }

    pub(crate) fn probability(&self, m: &[u64], distributions: &[&[f64]]) -> Result<f64> {
        let p = match &self.shape {
            Shape::Empty => 0.0,
            Shape::TooLarge { terms } => {
                return Err(Error::Capacity {
                    what: "inclusion-exclusion terms",
                    needed: *terms,
                    limit: self.limit,
                    hint: "use the Monte Carlo estimator or raise the oracle cap",
                })
            }
            Shape::Sunflower { core, groups } => eval_sunflower(core, groups, m),
            Shape::Generic { regions } => eval_generic(regions, m, distributions),
        };
        Ok(p.clamp(0.0, 1.0))
    }
}

/// Inclusion-minimal members, smallest first, ties in input order.
fn minimal_regions(mut regions: Vec<PointSet>) -> Vec<PointSet> {
    regions.sort_by_key(|r| r.count());
    let mut kept: Vec<PointSet> = Vec::new();
    for r in regions {
        if !kept.iter().any(|k| k.is_subset(&r)) {
            kept.push(r);
        }
    }
    kept
}

fn sunflower_terms(groups: &[PetalGroup]) -> u64 {
    groups
        .iter()
        .try_fold(1u64, |acc, g| acc.checked_mul(g.count as u64 + 1))
        .map_or(u64::MAX, |t| t - 1)
}

fn sunflower(regions: &[PointSet], distributions: &[&[f64]], limit: u64) -> Option<Shape> {
    let mut core = regions[0].clone();
    for r in &regions[1..] {
        core.intersect_with(r);
    }
    let mut seen = PointSet::empty(core.universe());
    let mut groups: Vec<PetalGroup> = Vec::new();
    for r in regions {
        let petal = r.difference(&core);
        if !petal.is_disjoint(&seen) {
            return None;
        }
        seen.union_with(&petal);
        let masses: Vec<f64> = distributions.iter().map(|d| petal.mass(d)).collect();
        match groups
            .iter_mut()
            .find(|g| g.masses.iter().zip(&masses).all(|(a, b)| a.to_bits() == b.to_bits()))
        {
            Some(g) => g.count += 1,
            None => groups.push(PetalGroup { count: 1, masses }),
        }
    }
    if sunflower_terms(&groups) > limit {
        return None;
    }
    let core = distributions.iter().map(|d| core.mass(d)).collect();
    Some(Shape::Sunflower { core, groups })
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn eval_sunflower(core: &[f64], groups: &[PetalGroup], m: &[u64]) -> f64 {
    // A single petal whose region gets no samples at all makes the union certain.
    for g in groups {
        let single: Vec<f64> = core.iter().zip(&g.masses).map(|(c, p)| c + p).collect();
        if survival(&single, m) == 1.0 {
            return 1.0;
        }
    }
    let mut counts = vec![0u32; groups.len()];
    let mut masses = vec![0.0; core.len()];
    let mut total = 0.0;
    loop {
        // odometer increment
        let mut g = 0;
        while g < groups.len() && counts[g] == groups[g].count {
            counts[g] = 0;
            g += 1;
        }
        if g == groups.len() {
            break;
        }
        counts[g] += 1;

        let mut chosen = 0u32;
        let mut weight = 1.0;
        masses.copy_from_slice(core);
        for (c, grp) in counts.iter().zip(groups) {
            if *c == 0 {
                continue;
            }
            chosen += c;
            weight *= binomial(grp.count, *c);
            for (acc, p) in masses.iter_mut().zip(&grp.masses) {
                *acc += *c as f64 * p;
            }
        }
        let term = weight * survival(&masses, m);
        if chosen % 2 == 1 {
            total += term;
        } else {
            total -= term;
        }
    }
    total
}

fn eval_generic(regions: &[PointSet], m: &[u64], distributions: &[&[f64]]) -> f64 {
    let k = distributions.len();
    for r in regions {
        let masses: Vec<f64> = distributions.iter().map(|d| r.mass(d)).collect();
        if survival(&masses, m) == 1.0 {
            return 1.0;
        }
    }
    struct Walk<'a> {
        regions: &'a [PointSet],
        m: &'a [u64],
        distributions: &'a [&'a [f64]],
        k: usize,
        total: f64,
    }
    impl Walk<'_> {
        fn visit(&mut self, start: usize, size: usize, union: &PointSet, masses: &[f64]) {
            for j in start..self.regions.len() {
                let mut next_union = union.clone();
                let mut next = masses.to_vec();
                self.regions[j].for_each_new(union, |p| {
                    for (acc, d) in next.iter_mut().zip(self.distributions) {
                        *acc += d[p];
                    }
                });
                next_union.union_with(&self.regions[j]);
                let term = survival(&next, self.m);
                if term == 0.0 {
                    // every superset also has zero survival
                    continue;
                }
                if (size + 1) % 2 == 1 {
                    self.total += term;
                } else {
                    self.total -= term;
                }
                self.visit(j + 1, size + 1, &next_union, &next);
            }
        }
    }
    let mut walk = Walk {
        regions,
        m,
        distributions,
        k,
        total: 0.0,
    };
    let empty = PointSet::empty(regions[0].universe());
    let zeros = vec![0.0; walk.k];
    walk.visit(0, 0, &empty, &zeros);
    walk.total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(n: usize, idx: &[usize]) -> PointSet {
        PointSet::from_indices(n, idx.iter().copied())
    }

    #[test]
    fn superset_regions_are_dropped() {
        let kept = minimal_regions(vec![set(4, &[0, 1]), set(4, &[0]), set(4, &[2, 3]), set(4, &[0, 2])]);
        assert_eq!(kept, vec![set(4, &[0]), set(4, &[2, 3])]);
    }

    #[test]
    fn sunflower_matches_generic() {
        // core {0}, petals {1},{2},{3} with two identical petal masses
        let d: Vec<f64> = vec![0.1, 0.2, 0.2, 0.5];
        let e: Vec<f64> = vec![0.4, 0.3, 0.3, 0.0];
        let dists: Vec<&[f64]> = vec![&d, &e];
        let regions = vec![set(4, &[0, 1]), set(4, &[0, 2]), set(4, &[0, 3])];
        let plan = UnionPlan::build(regions.clone(), &dists, 20);
        assert!(matches!(plan.shape, Shape::Sunflower { ref groups, .. } if groups.len() == 2));
        for m in [[0u64, 1], [2, 3], [5, 0], [1, 1]] {
            let a = plan.probability(&m, &dists).unwrap();
            let b = eval_generic(&regions, &m, &dists);
            assert!((a - b).abs() < 1e-14, "{m:?}: {a} vs {b}");
        }
    }

    #[test]
    fn capacity_is_reported() {
        // 5 overlapping regions that are not a sunflower: {i, i+1} on a path
        let d = vec![0.1; 10];
        let dists: Vec<&[f64]> = vec![&d];
        let regions: Vec<PointSet> = (0..5).map(|i| set(10, &[i, i + 1])).collect();
        let plan = UnionPlan::build(regions, &dists, 4);
        assert!(plan.probability(&[3], &dists).unwrap_err().is_capacity());
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 0), 1.0);
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(25, 12), 5_200_300.0);
    }
}
