//! Grouping of mutually interfering HeNBs.
//!
//! Each aggressor HeNB first learns the set of victims it hurts
//! ([`collect_victim_sets`]). HeNBs that share a victim must blank the same
//! subframes, and sharing is transitive, so coalitions are the connected
//! components of the graph with an edge between `f` and `g` whenever
//! `H_f ∩ H_g` is non-empty.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::absf::{quantize_pattern, MutingPlan};
use crate::config::FrameConfig;
use crate::radio::AggressorSets;

/// `per_henb[f]` holds the indices of the victim MUEs hurt by HeNB `f`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct VictimSets {
    pub per_henb: Vec<BTreeSet<usize>>,
}

impl VictimSets {
    pub fn is_aggressor(&self, f: usize) -> bool {
        !self.per_henb[f].is_empty()
    }

    /// Rebuild the per-victim aggressor lists (indices sorted).
    pub fn to_aggressor_sets(&self, num_mues: usize) -> AggressorSets {
        let mut per_mue = vec![Vec::new(); num_mues];
        for (f, victims) in self.per_henb.iter().enumerate() {
            for &v in victims {
                per_mue[v].push(f);
            }
        }
        AggressorSets { per_mue }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Coalition {
    pub id: usize,
    /// HeNB indices.
    pub members: BTreeSet<usize>,
    /// Union of the members' victim sets.
    pub covered_victims: BTreeSet<usize>,
}

/// `H_f = { v in victims : f in A_v }` for every HeNB.
pub fn collect_victim_sets(victims: &[usize], aggressors: &AggressorSets, num_henbs: usize) -> VictimSets {
    let mut per_henb = vec![BTreeSet::new(); num_henbs];
    for (f, set) in per_henb.iter_mut().enumerate() {
        for &v in victims {
            if aggressors.of(v).contains(&f) {
                set.insert(v);
            }
        }
    }
    VictimSets { per_henb }
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        match self.rank[a].cmp(&self.rank[b]) {
            std::cmp::Ordering::Less => self.parent[a] = b,
            std::cmp::Ordering::Greater => self.parent[b] = a,
            std::cmp::Ordering::Equal => {
                self.parent[b] = a;
                self.rank[a] += 1;
            }
        }
    }
}

fn finish(groups: Vec<BTreeSet<usize>>, sets: &VictimSets) -> Vec<Coalition> {
    let mut groups = groups;
    groups.sort_by_key(|g| *g.iter().next().expect("non-empty group"));
    groups
        .into_iter()
        .enumerate()
        .map(|(id, members)| {
            let covered_victims = members.iter().flat_map(|&f| sets.per_henb[f].iter().copied()).collect();
            Coalition {
                id,
                members,
                covered_victims,
            }
        })
        .collect()
}

/// Partition the aggressor HeNBs into coalitions. Coalitions are numbered by
/// their smallest member, so the result does not depend on iteration order.
pub fn group_coalitions(sets: &VictimSets) -> Vec<Coalition> {
    let n = sets.per_henb.len();
    let mut dsu = DisjointSet::new(n);
    // First HeNB seen for each victim; every later one joins it.
    let mut anchor: std::collections::HashMap<usize, usize> = Default::default();
    for (f, victims) in sets.per_henb.iter().enumerate() {
        for &v in victims {
            match anchor.get(&v) {
                Some(&g) => dsu.union(f, g),
                None => {
                    anchor.insert(v, f);
                }
            }
        }
    }
    let mut by_root: std::collections::BTreeMap<usize, BTreeSet<usize>> = Default::default();
    for f in (0..n).filter(|&f| sets.is_aggressor(f)) {
        by_root.entry(dsu.find(f)).or_default().insert(f);
    }
    finish(by_root.into_values().collect(), sets)
}

/// The grouping loop exactly as a single outer pass: each ungrouped
/// aggressor seeds a coalition and absorbs, in index order, every ungrouped
/// HeNB whose victims meet the coalition's current victim set. A HeNB that
/// only connects through a member absorbed later in the same pass is missed,
/// so the result can be finer than [`group_coalitions`].
pub fn group_coalitions_single_pass(sets: &VictimSets) -> Vec<Coalition> {
    let n = sets.per_henb.len();
    let mut grouped = vec![false; n];
    let mut groups = Vec::new();
    for seed in 0..n {
        if grouped[seed] || !sets.is_aggressor(seed) {
            continue;
        }
        grouped[seed] = true;
        let mut covered = sets.per_henb[seed].clone();
        let mut members = BTreeSet::from([seed]);
        for (f, victims) in sets.per_henb.iter().enumerate() {
            if !grouped[f] && !covered.is_disjoint(victims) {
                covered.extend(victims.iter().copied());
                members.insert(f);
                grouped[f] = true;
            }
        }
        groups.push(members);
    }
    finish(groups, sets)
}

/// Give every coalition member the same pattern, built from the largest rate
/// in the coalition. Non-members keep their pattern.
pub fn align_coalition_patterns(
    coalitions: &[Coalition],
    plan: &MutingPlan,
    frame: &FrameConfig,
    offset: usize,
    stagger: bool,
) -> MutingPlan {
    let mut out = plan.clone();
    for c in coalitions {
        let alpha = c.members.iter().map(|&f| plan.rates[f]).fold(0.0, f64::max);
        let start = if stagger { offset + c.id } else { offset } % frame.subframes;
        let pattern = quantize_pattern(alpha, frame, start);
        for &f in &c.members {
            out.patterns[f] = pattern.clone();
            out.coalition[f] = Some(c.id);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sets(raw: &[&[usize]]) -> VictimSets {
        VictimSets {
            per_henb: raw.iter().map(|s| s.iter().copied().collect()).collect(),
        }
    }

    /// Aggressor lists of five victims against HeNBs 0, 1, 2.
    fn worked_example() -> AggressorSets {
        AggressorSets {
            per_mue: vec![vec![0], vec![0, 1, 2], vec![1, 2], vec![0, 1], vec![1, 2]],
        }
    }

    #[test]
    fn no_victims_no_sets() {
        let vs = collect_victim_sets(
            &[],
            &AggressorSets {
                per_mue: vec![vec![]; 3],
            },
            4,
        );
        assert!(vs.per_henb.iter().all(BTreeSet::is_empty));
        assert!(group_coalitions(&vs).is_empty());
    }

    #[test]
    fn worked_example_sets_and_coalition() {
        let vs = collect_victim_sets(&[0, 1, 2, 3, 4], &worked_example(), 3);
        assert_eq!(vs, sets(&[&[0, 1, 3], &[1, 2, 3, 4], &[1, 2, 4]]));
        let cs = group_coalitions(&vs);
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].members, BTreeSet::from([0, 1, 2]));
        assert_eq!(cs[0].covered_victims, BTreeSet::from([0, 1, 2, 3, 4]));
    }

    #[test]
    fn duality_round_trip() {
        let agg = worked_example();
        let vs = collect_victim_sets(&[0, 1, 2, 3, 4], &agg, 3);
        assert_eq!(vs.to_aggressor_sets(5), agg);
    }

    #[test]
    fn disjoint_sets_give_singletons() {
        let cs = group_coalitions(&sets(&[&[0], &[], &[1, 2], &[3]]));
        let members: Vec<Vec<usize>> = cs.iter().map(|c| c.members.iter().copied().collect()).collect();
        assert_eq!(members, vec![vec![0], vec![2], vec![3]]);
    }

    #[test]
    fn chain_is_one_coalition() {
        // a-b share 1, b-c share 2, a-c share nothing.
        let vs = sets(&[&[0, 1], &[1, 2], &[2, 3]]);
        let cs = group_coalitions(&vs);
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].members, BTreeSet::from([0, 1, 2]));
    }

    #[test]
    fn single_pass_misses_late_bridge() {
        // HeNB 1 only meets HeNB 0's group through HeNB 2, which is absorbed
        // after HeNB 1 was checked.
        let vs = sets(&[&[0], &[5], &[0, 5]]);
        assert_eq!(group_coalitions_single_pass(&vs).len(), 2);
        assert_eq!(group_coalitions(&vs).len(), 1);
    }

    #[test]
    fn alignment_uses_coalition_max() {
        let frame = FrameConfig::default();
        let plan = MutingPlan::from_rates(vec![0.1, 0.3, 0.0], &frame, 0);
        let cs = group_coalitions(&sets(&[&[0], &[0], &[]]));
        let aligned = align_coalition_patterns(&cs, &plan, &frame, 0, false);
        assert_eq!(aligned.patterns[0], aligned.patterns[1]);
        assert_eq!(aligned.patterns[0].popcount(), 3);
        assert_eq!(aligned.patterns[2].popcount(), 0);
        assert_eq!(aligned.coalition, vec![Some(0), Some(0), None]);
    }

    #[test]
    fn singleton_alignment_is_noop_on_patterns() {
        let frame = FrameConfig::default();
        let plan = MutingPlan::from_rates(vec![0.4], &frame, 0);
        let cs = group_coalitions(&sets(&[&[2]]));
        let aligned = align_coalition_patterns(&cs, &plan, &frame, 0, false);
        assert_eq!(aligned.patterns, plan.patterns);
    }

    #[test]
    fn staggered_offsets() {
        let frame = FrameConfig::default();
        let plan = MutingPlan::from_rates(vec![0.2, 0.2], &frame, 0);
        let cs = group_coalitions(&sets(&[&[0], &[1]]));
        let aligned = align_coalition_patterns(&cs, &plan, &frame, 0, true);
        assert_eq!(aligned.patterns[0].to_string(), "XX........");
        assert_eq!(aligned.patterns[1].to_string(), ".XX.......");
    }
}
