//! Set Cover as a collaborative PAC instance.
//!
//! Subset `E_j` becomes a point `x_j` and element `u_i` becomes a
//! hypothesis `h_i` that is positive on every `x_j` with `u_i in E_j` and
//! on a private point `y_i`. With the all-negative target, a set of `x`
//! points rules out every `h_i` exactly when the matching subsets cover the
//! universe.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{AgentSpec, Domain, Hypothesis, HypothesisClass, Instance};
use crate::region::PointSet;

pub const MAX_SUBSETS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetCoverInstance {
    pub universe_size: usize,
    pub subsets: Vec<Vec<usize>>,
}

impl SetCoverInstance {
    pub fn new(universe_size: usize, subsets: Vec<Vec<usize>>) -> Result<Self> {
        let sc = SetCoverInstance { universe_size, subsets };
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.universe_size == 0 {
            return Err(Error::validation("set cover universe must be nonempty"));
        }
        let mut covered = PointSet::empty(self.universe_size);
        for (j, s) in self.subsets.iter().enumerate() {
            for &u in s {
                if u >= self.universe_size {
                    return Err(Error::validation(format!(
                        "subsets[{j}] contains {u}, outside the universe"
                    )));
                }
                covered.insert(u);
            }
        }
        if covered.count() != self.universe_size {
            return Err(Error::validation("subsets do not cover the universe"));
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let sc: SetCoverInstance = serde_json::from_str(text).map_err(|e| Error::Parse {
            field: "setcover".into(),
            message: e.to_string(),
        })?;
        sc.validate()?;
        Ok(sc)
    }

    fn masks(&self) -> Vec<PointSet> {
        self.subsets
            .iter()
            .map(|s| PointSet::from_indices(self.universe_size, s.iter().copied()))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Reduction {
    pub instance: Instance,
    /// Domain indices of the subset points `x_1..x_r`.
    pub subset_points: Vec<usize>,
    /// Index of the all-negative hypothesis.
    pub target: usize,
}

pub fn set_cover_to_pac(sc: &SetCoverInstance) -> Result<Reduction> {
    sc.validate()?;
    let r = sc.subsets.len();
    let n = sc.universe_size;
    let size = r + n;
    let masks = sc.masks();
    let mut hyps = vec![Hypothesis::from_positives(size, [])];
    for i in 0..n {
        let xs = (0..r).filter(|&j| masks[j].contains(i));
        hyps.push(Hypothesis::from_positives(size, xs.chain([r + i])));
    }
    let instance = Instance::new(
        Domain::new(size)?,
        HypothesisClass::new(hyps)?,
        vec![AgentSpec::new(vec![1.0 / size as f64; size], 1.0)?],
        1.0 / (2.0 * size as f64),
        0.5,
    )?;
    Ok(Reduction {
        instance,
        subset_points: (0..r).collect(),
        target: 0,
    })
}

/// Hypotheses with zero empirical error when the points in `sample` are
/// labelled by `target`.
pub fn consistent_hypotheses(instance: &Instance, target: usize, sample: &PointSet) -> Vec<usize> {
    (0..instance.num_hypotheses())
        .filter(|&h| instance.region(target, h).is_disjoint(sample))
        .collect()
}

/// Calls `f` on every `size`-subset of `0..n` as a bitmask, stopping when
/// `f` returns true.
fn any_subset_of_size(n: usize, size: usize, mut f: impl FnMut(u32) -> bool) -> bool {
    if size == 0 {
        return f(0);
    }
    if size > n {
        return false;
    }
    // Gosper's hack over n-bit masks
    let mut mask: u32 = (1 << size) - 1;
    let limit: u64 = 1 << n;
    while (mask as u64) < limit {
        if f(mask) {
            return true;
        }
        let c = mask & mask.wrapping_neg();
        let r = mask + c;
        mask = (((r ^ mask) >> 2) / c) | r;
    }
    false
}

/// Fewest distinct subset points whose presence in the sample leaves the
/// target as the only consistent hypothesis.
pub fn min_eliminating_sample_count(reduction: &Reduction) -> Result<usize> {
    let inst = &reduction.instance;
    let pts = &reduction.subset_points;
    if pts.len() > MAX_SUBSETS {
        return Err(Error::Capacity {
            what: "subset points",
            needed: pts.len() as u64,
            limit: MAX_SUBSETS as u64,
            hint: "brute-force search is limited to small reductions",
        });
    }
    let universe = inst.domain().size();
    for size in 0..=pts.len() {
        let hit = any_subset_of_size(pts.len(), size, |mask| {
            let sample =
                PointSet::from_indices(universe, (0..pts.len()).filter(|b| mask >> b & 1 == 1).map(|b| pts[b]));
            consistent_hypotheses(inst, reduction.target, &sample) == [reduction.target]
        });
        if hit {
            return Ok(size);
        }
    }
    Err(Error::Infeasible(
        "no set of subset points eliminates every competitor; the subsets do not cover the universe".into(),
    ))
}

/// Minimum number of subsets covering the universe, by exhaustive search.
pub fn brute_force_set_cover(sc: &SetCoverInstance) -> Result<usize> {
    sc.validate()?;
    let r = sc.subsets.len();
    if r > MAX_SUBSETS {
        return Err(Error::Capacity {
            what: "subsets",
            needed: r as u64,
            limit: MAX_SUBSETS as u64,
            hint: "brute-force set cover is limited to 20 subsets",
        });
    }
    let masks = sc.masks();
    for size in 0..=r {
        let hit = any_subset_of_size(r, size, |mask| {
            let mut covered = PointSet::empty(sc.universe_size);
            for (j, m) in masks.iter().enumerate() {
                if mask >> j & 1 == 1 {
                    covered.union_with(m);
                }
            }
            covered.count() == sc.universe_size
        });
        if hit {
            return Ok(size);
        }
    }
    unreachable!("validated instances are covered by all subsets")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_subset() {
        let sc = SetCoverInstance::new(1, vec![vec![0]]).unwrap();
        let red = set_cover_to_pac(&sc).unwrap();
        assert_eq!(red.instance.class().get(1).labels(), &[1, 1]);
        assert_eq!(min_eliminating_sample_count(&red).unwrap(), 1);
        assert_eq!(brute_force_set_cover(&sc).unwrap(), 1);
    }

    #[test]
    fn pair_covering_subset_wins() {
        let sc = SetCoverInstance::new(2, vec![vec![0], vec![1], vec![0, 1]]).unwrap();
        assert_eq!(
            min_eliminating_sample_count(&set_cover_to_pac(&sc).unwrap()).unwrap(),
            1
        );
        let singletons = SetCoverInstance::new(4, (0..4).map(|i| vec![i]).collect()).unwrap();
        assert_eq!(brute_force_set_cover(&singletons).unwrap(), 4);
    }

    #[test]
    fn uncovered_universe_is_rejected() {
        assert!(SetCoverInstance::new(3, vec![vec![0], vec![1]]).is_err());
    }

    #[test]
    fn subset_enumeration_counts() {
        let mut count = 0;
        any_subset_of_size(6, 3, |_| {
            count += 1;
            false
        });
        assert_eq!(count, 20);
    }
}
