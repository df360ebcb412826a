//! The alternating block partition of [1:K] and the per-support symbol
//! multiplicities it induces.

use itertools::Itertools;
use num::bigint::BigInt;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::params::{symbols_per_server, Params, Regime};
use crate::ratio::int;
use crate::scheme::Support;

/// `[1:K]` split into g interleaved blocks of size M (S1) and f blocks of
/// size D-M (S2): block l of S1 is [(l-1)D+1 : (l-1)D+M], block l of S2 is
/// [(l-1)D+M+1 : lD].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub s1_blocks: Vec<Vec<usize>>,
    pub s2_blocks: Vec<Vec<usize>>,
}

/// One aligned-position class: the messages occupying the same within-block
/// offset across all blocks of their side. Two messages admit a common sum
/// symbol exactly when they share a class (equivalently, are congruent mod D
/// on the same side).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Class {
    pub members: Vec<usize>,
    pub in_s2: bool,
}

impl Partition {
    /// All of S1, ascending.
    pub fn s1(&self) -> Vec<usize> {
        self.s1_blocks.iter().flatten().copied().sorted().collect()
    }

    /// All of S2, ascending.
    pub fn s2(&self) -> Vec<usize> {
        self.s2_blocks.iter().flatten().copied().sorted().collect()
    }

    /// The M classes of size g (from S1) followed by the D-M classes of
    /// size f (from S2).
    pub fn classes(&self) -> Vec<Class> {
        let mut out = Vec::new();
        if let Some(first) = self.s1_blocks.first() {
            for pos in 0..first.len() {
                out.push(Class {
                    members: self.s1_blocks.iter().map(|b| b[pos]).collect(),
                    in_s2: false,
                });
            }
        }
        if let Some(first) = self.s2_blocks.first() {
            for pos in 0..first.len() {
                out.push(Class {
                    members: self.s2_blocks.iter().map(|b| b[pos]).collect(),
                    in_s2: true,
                });
            }
        }
        out
    }

    /// The class containing `message`.
    pub fn class_of(&self, message: usize) -> Option<Class> {
        self.classes()
            .into_iter()
            .find(|c| c.members.contains(&message))
    }
}

/// Lays out the interleaved partition. Only meaningful when the windows do
/// not pairwise overlap (2D <= K); the other regime reduces first.
pub fn build_partition(params: &Params) -> Result<Partition> {
    if params.regime != Regime::SmallD {
        return Err(Error::WrongRegime {
            expected: "SMALL_D",
            actual: params.regime.name(),
        });
    }
    let (d, m) = (params.d, params.m);
    let s1_blocks: Vec<Vec<usize>> = (0..params.g)
        .map(|l| (l * d + 1..=l * d + m).collect())
        .collect();
    let s2_blocks: Vec<Vec<usize>> = (0..params.f)
        .map(|l| (l * d + m + 1..=(l + 1) * d).collect())
        .collect();
    let partition = Partition {
        s1_blocks,
        s2_blocks,
    };
    debug_assert_eq!(
        partition.s1().len() + partition.s2().len(),
        params.k,
        "partition must cover [1:K]"
    );
    debug_assert_eq!(partition.s1_blocks.last().unwrap()[0], params.k - m + 1);
    Ok(partition)
}

/// Per-server symbol multiplicities, keyed by support. The key order
/// (size, then lex) is the construction order of the plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportPlan {
    pub entries: BTreeMap<Support, u64>,
}

impl SupportPlan {
    /// Total symbols per server.
    pub fn total(&self) -> BigInt {
        self.entries.values().map(|&t| int(t)).sum()
    }

    /// Number of distinct supports of each sum size.
    pub fn size_census(&self) -> BTreeMap<usize, usize> {
        let mut census = BTreeMap::new();
        for support in self.entries.keys() {
            *census.entry(support.len()).or_insert(0) += 1;
        }
        census
    }
}

/// Applies the four multiplicity rules: singletons get 1 (S1) or N (S2);
/// a k-sum (k >= 2) must take one element from each of k distinct blocks of
/// a single side, all at the same within-block offset (congruent mod D), and
/// gets (N-1)^(k-1) on S1 or N(N-1)^(k-1) on S2; supports mixing the two
/// sides never appear.
pub fn enumerate_supports(partition: &Partition, params: &Params) -> Result<SupportPlan> {
    let n = params.n as u64;
    let mut entries: BTreeMap<Support, u64> = BTreeMap::new();
    for i in partition.s1() {
        entries.insert(Support::singleton(i), 1);
    }
    for i in partition.s2() {
        entries.insert(Support::singleton(i), n);
    }
    for class in partition.classes() {
        for k in 2..=class.members.len() {
            let t = if class.in_s2 {
                n * (n - 1).pow(k as u32 - 1)
            } else {
                (n - 1).pow(k as u32 - 1)
            };
            for combo in class.members.iter().copied().combinations(k) {
                let support = Support::new(combo)?;
                if entries.insert(support.clone(), t).is_some() {
                    return Err(Error::Construction {
                        support: support.to_string(),
                        reason: "support enumerated twice".into(),
                    });
                }
            }
        }
    }
    let plan = SupportPlan { entries };
    let expected = symbols_per_server(params);
    if plan.total() != expected {
        return Err(Error::Construction {
            support: "-".into(),
            reason: format!(
                "support multiplicities sum to {}, expected {expected}",
                plan.total()
            ),
        });
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::geometric_sum;
    use num::traits::Zero;

    fn p(n: usize, k: usize, d: usize) -> Params {
        Params::derive(n, k, d).unwrap()
    }

    fn support(v: &[usize]) -> Support {
        Support::new(v.to_vec()).unwrap()
    }

    #[test]
    fn partition_2_5_2() {
        let part = build_partition(&p(2, 5, 2)).unwrap();
        assert_eq!(part.s1_blocks, vec![vec![1], vec![3], vec![5]]);
        assert_eq!(part.s2_blocks, vec![vec![2], vec![4]]);
        assert_eq!(part.s1(), vec![1, 3, 5]);
        assert_eq!(part.s2(), vec![2, 4]);
    }

    #[test]
    fn partition_2_4_2_has_empty_s2() {
        let part = build_partition(&p(2, 4, 2)).unwrap();
        assert_eq!(part.s1_blocks, vec![vec![1, 2], vec![3, 4]]);
        assert!(part.s2_blocks.iter().all(Vec::is_empty));
        assert!(part.s2().is_empty());
    }

    #[test]
    fn partition_3_7_3() {
        let part = build_partition(&p(3, 7, 3)).unwrap();
        assert_eq!(part.s1_blocks, vec![vec![1], vec![4], vec![7]]);
        assert_eq!(part.s2_blocks, vec![vec![2, 3], vec![5, 6]]);
    }

    #[test]
    fn partition_rejects_overlapping_windows() {
        let err = build_partition(&p(2, 5, 3)).unwrap_err();
        assert!(matches!(err, Error::WrongRegime { .. }));
    }

    #[test]
    fn classes_2_5_2() {
        let part = build_partition(&p(2, 5, 2)).unwrap();
        let classes = part.classes();
        assert_eq!(classes.len(), 2);
        assert_eq!(classes[0].members, vec![1, 3, 5]);
        assert!(!classes[0].in_s2);
        assert_eq!(classes[1].members, vec![2, 4]);
        assert!(classes[1].in_s2);
        assert_eq!(part.class_of(4).unwrap().members, vec![2, 4]);
        assert!(part.class_of(9).is_none());
    }

    #[test]
    fn multiplicities_2_5_2() {
        let params = p(2, 5, 2);
        let part = build_partition(&params).unwrap();
        let plan = enumerate_supports(&part, &params).unwrap();
        let t = |v: &[usize]| plan.entries.get(&support(v)).copied();
        assert_eq!(t(&[1]), Some(1));
        assert_eq!(t(&[2]), Some(2));
        assert_eq!(t(&[3]), Some(1));
        assert_eq!(t(&[4]), Some(2));
        assert_eq!(t(&[5]), Some(1));
        assert_eq!(t(&[1, 3]), Some(1));
        assert_eq!(t(&[1, 5]), Some(1));
        assert_eq!(t(&[3, 5]), Some(1));
        assert_eq!(t(&[2, 4]), Some(2));
        assert_eq!(t(&[1, 3, 5]), Some(1));
        // Mixed-side supports never appear.
        assert_eq!(t(&[1, 2]), None);
        assert_eq!(t(&[2, 3]), None);
        assert_eq!(plan.total(), int(13));
        assert_eq!(
            plan.size_census(),
            [(1, 5), (2, 4), (3, 1)].into_iter().collect()
        );
    }

    #[test]
    fn multiplicities_2_4_2() {
        let params = p(2, 4, 2);
        let part = build_partition(&params).unwrap();
        let plan = enumerate_supports(&part, &params).unwrap();
        let t = |v: &[usize]| plan.entries.get(&support(v)).copied();
        for i in 1..=4 {
            assert_eq!(t(&[i]), Some(1));
        }
        assert_eq!(t(&[1, 3]), Some(1));
        assert_eq!(t(&[2, 4]), Some(1));
        assert_eq!(t(&[1, 2]), None);
        assert_eq!(t(&[1, 4]), None);
        assert_eq!(plan.entries.keys().filter(|u| u.len() == 3).count(), 0);
        assert_eq!(plan.total(), int(6));
    }

    #[test]
    fn census_identities_on_a_grid() {
        // Support counts per size: M*C(g,k) on the S1 side, (D-M)*C(f,k) on
        // the S2 side; totals reproduce the two geometric-sum terms.
        for n in 2..=4 {
            for k in 3..=9 {
                for d in 2..k {
                    if 2 * d > k {
                        continue;
                    }
                    let params = p(n, k, d);
                    let part = build_partition(&params).unwrap();
                    let plan = enumerate_supports(&part, &params).unwrap();
                    for size in 1..=params.g {
                        let s1_side = plan
                            .entries
                            .keys()
                            .filter(|u| {
                                u.len() == size
                                    && u.indices().iter().all(|&i| (i - 1) % d < params.m)
                            })
                            .count();
                        let choose = |top: usize| -> usize {
                            if size > top {
                                0
                            } else {
                                (1..=size).fold(1usize, |acc, i| acc * (top - i + 1) / i)
                            }
                        };
                        assert_eq!(s1_side, params.m * choose(params.g));
                        let s2_side = plan
                            .entries
                            .keys()
                            .filter(|u| {
                                u.len() == size
                                    && u.indices().iter().all(|&i| (i - 1) % d >= params.m)
                            })
                            .count();
                        assert_eq!(s2_side, (params.d - params.m) * choose(params.f));
                    }
                    // The S1 side alone carries M * (1 + N + ... + N^(g-1)) symbols.
                    let s1_total: BigInt = plan
                        .entries
                        .iter()
                        .filter(|(u, _)| u.indices().iter().all(|&i| (i - 1) % d < params.m))
                        .map(|(_, &t)| int(t))
                        .sum();
                    assert_eq!(
                        s1_total,
                        int(params.m as u64) * geometric_sum(n as u64, params.g)
                    );
                    let s2_total = plan.total() - s1_total;
                    assert_eq!(
                        s2_total,
                        int((params.d - params.m) as u64)
                            * int(n as u64)
                            * geometric_sum(n as u64, params.f)
                    );
                    assert!(s2_total >= BigInt::zero());
                }
            }
        }
    }

    #[test]
    fn relaxed_unit_demand_partition() {
        let params = Params::derive_relaxed(2, 2, 1).unwrap();
        let part = build_partition(&params).unwrap();
        assert_eq!(part.s1_blocks, vec![vec![1], vec![2]]);
        assert!(part.s2().is_empty());
        let plan = enumerate_supports(&part, &params).unwrap();
        assert_eq!(plan.entries.get(&support(&[1, 2])), Some(&1));
        assert_eq!(plan.total(), int(3));
    }
}
