//! Structural properties of stable trees as falsifiable checks.
//!
//! Each check walks every position its inequality quantifies over (every
//! leaf-to-root path and index, every child pair) and reports the first
//! violation. Positions on a path use distances from the root: `u_0` is the
//! root, `u_k` the leaf, `d_j = indeg(u_j)` and `T_j = T(u_j)`.

use serde::Serialize;

use crate::equilibrium::is_nash;
use crate::interval::Interval;
use crate::tree_model::{compute_stats, extract_subtree, Children, RootedProfile, SubtreeStats};
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub nodes: Vec<usize>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckEntry {
    pub name: String,
    pub status: CheckStatus,
    pub positions: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

impl CheckEntry {
    fn new(name: &str) -> Self {
        Self { name: name.to_string(), status: CheckStatus::Pass, positions: 0, witness: None }
    }

    /// Count one position; record the first failure.
    fn test(&mut self, ok: bool, witness: impl FnOnce() -> Witness) {
        self.positions += 1;
        if !ok && self.witness.is_none() {
            self.status = CheckStatus::Fail;
            self.witness = Some(witness());
        }
    }

    pub fn passed(&self) -> bool {
        self.status != CheckStatus::Fail
    }
}

/// Values reported without a verdict.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Measurements {
    pub n: usize,
    pub root_indeg: usize,
    pub height: usize,
    /// `sqrt(log2 n)`, the scale of the root-degree upper bound exponent.
    pub sqrt_log_n: f64,
    /// `log2 n / log2 log2 n`, the scale of the height bound.
    pub log_over_loglog: Option<f64>,
    /// `ln(x) / ln ln(x)` with `x = 4 sqrt(n/5)`, when defined.
    pub root_lower_bound: Option<Interval>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StructureAudit {
    pub checks: Vec<CheckEntry>,
    pub measurements: Measurements,
}

impl StructureAudit {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(CheckEntry::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckEntry> {
        self.checks.iter().filter(|c| !c.passed())
    }

    pub fn get(&self, name: &str) -> Option<&CheckEntry> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Run every check on a spanning tree.
pub fn audit_equilibrium(profile: &RootedProfile) -> Result<StructureAudit> {
    let stats = compute_stats(profile)?;
    let (root_check, measurements) = root_degree_bounds(profile, &stats);
    Ok(StructureAudit {
        checks: vec![
            check_subtree_stability(profile),
            check_degree_formula_with(profile, &stats),
            check_degree_monotone_with(profile, &stats),
            check_strict_decrease_with(profile, &stats),
            check_leaf_parent_with(profile, &stats),
            check_sibling_degree_with(profile, &stats),
            root_check,
        ],
        measurements,
    })
}

/// Root paths `[u_0, …, u_k]` of every leaf.
fn leaf_paths(profile: &RootedProfile, stats: &SubtreeStats) -> Vec<Vec<usize>> {
    (1..profile.node_count())
        .filter(|&v| stats.size[v] == 1)
        .map(|leaf| {
            let mut path = vec![leaf];
            let mut v = leaf;
            while let Some(p) = profile.parent(v) {
                path.push(p);
                v = p;
            }
            path.reverse();
            path
        })
        .collect()
}

fn stats_of(profile: &RootedProfile) -> SubtreeStats {
    compute_stats(profile).expect("structure checks need a spanning tree")
}

/// Every agent subtree with at least one agent, as a standalone game, is stable.
pub fn check_subtree_stability(profile: &RootedProfile) -> CheckEntry {
    let mut entry = CheckEntry::new("subtree_stability");
    for x in 1..profile.node_count() {
        if let Some(sub) = extract_subtree(profile, x) {
            let verdict = is_nash(&sub);
            entry.test(verdict.stable, || Witness {
                nodes: vec![x],
                detail: format!("subgame at node {x} is unstable: {}", verdict.witness.expect("unstable has witness")),
            });
        }
    }
    entry
}

/// `d_{i-1} (|T_i| - |T_{i+1}|) >= |T_i| (d_i - 1)` for `1 < i < k` on every
/// leaf-to-root path of length `k`.
pub fn check_degree_formula(profile: &RootedProfile) -> CheckEntry {
    check_degree_formula_with(profile, &stats_of(profile))
}

fn check_degree_formula_with(profile: &RootedProfile, s: &SubtreeStats) -> CheckEntry {
    let mut entry = CheckEntry::new("degree_formula");
    for path in leaf_paths(profile, s) {
        let k = path.len() - 1;
        for i in 2..k {
            let (a, b, c) = (path[i - 1], path[i], path[i + 1]);
            let lhs = s.indeg[a] as i128 * (s.size[b] as i128 - s.size[c] as i128);
            let rhs = s.size[b] as i128 * (s.indeg[b] as i128 - 1);
            entry.test(lhs >= rhs, || Witness {
                nodes: vec![a, b, c],
                detail: format!("d_{} = {} below |T_{i}|/(|T_{i}|-|T_{}|)(d_{i}-1)", i - 1, s.indeg[a], i + 1),
            });
        }
    }
    entry
}

/// In-degrees never increase away from the root: `indeg(child) <= indeg(parent)`
/// on every edge.
pub fn check_degree_monotone(profile: &RootedProfile) -> CheckEntry {
    check_degree_monotone_with(profile, &stats_of(profile))
}

fn check_degree_monotone_with(profile: &RootedProfile, s: &SubtreeStats) -> CheckEntry {
    let mut entry = CheckEntry::new("degree_monotone");
    for v in 1..profile.node_count() {
        let p = profile.target(v - 1);
        entry.test(s.indeg[v] <= s.indeg[p], || Witness {
            nodes: vec![v, p],
            detail: format!("indeg({v}) = {} exceeds indeg({p}) = {}", s.indeg[v], s.indeg[p]),
        });
    }
    entry
}

/// `d_{i-1} > d_{i+1}` for `1 < i < k - 2` whenever `|T_{i-1}| > 4`.
pub fn check_strict_decrease(profile: &RootedProfile) -> CheckEntry {
    check_strict_decrease_with(profile, &stats_of(profile))
}

fn check_strict_decrease_with(profile: &RootedProfile, s: &SubtreeStats) -> CheckEntry {
    let mut entry = CheckEntry::new("strict_decrease");
    for path in leaf_paths(profile, s) {
        let k = path.len() - 1;
        for i in 2..k.saturating_sub(2) {
            let (top, low) = (path[i - 1], path[i + 1]);
            if s.size[top] <= 4 {
                continue;
            }
            entry.test(s.indeg[top] > s.indeg[low], || Witness {
                nodes: vec![top, path[i], low],
                detail: format!("d_{} = {} not above d_{} = {}", i - 1, s.indeg[top], i + 1, s.indeg[low]),
            });
        }
    }
    entry
}

/// The parent of every leaf has in-degree 1.
pub fn check_leaf_parent(profile: &RootedProfile) -> CheckEntry {
    check_leaf_parent_with(profile, &stats_of(profile))
}

fn check_leaf_parent_with(profile: &RootedProfile, s: &SubtreeStats) -> CheckEntry {
    let mut entry = CheckEntry::new("leaf_parent");
    for v in 1..profile.node_count() {
        if s.size[v] != 1 {
            continue;
        }
        let p = profile.target(v - 1);
        entry.test(s.indeg[p] == 1, || Witness {
            nodes: vec![p],
            detail: format!("leaf {v} hangs off node {p} of in-degree {}", s.indeg[p]),
        });
    }
    entry
}

/// `indeg(x) <= indeg(v) (1 + |T(u)|/|T(v)|) + 1` for every node `x` and
/// every ordered pair of distinct children `u`, `v`.
pub fn check_sibling_degree(profile: &RootedProfile) -> CheckEntry {
    check_sibling_degree_with(profile, &stats_of(profile))
}

fn check_sibling_degree_with(profile: &RootedProfile, s: &SubtreeStats) -> CheckEntry {
    let mut entry = CheckEntry::new("sibling_degree");
    let children = Children::of(profile);
    for x in 0..profile.node_count() {
        let kids = children.of_node(x);
        for &u in kids {
            for &v in kids {
                if u == v {
                    continue;
                }
                let (tu, tv) = (s.size[u] as u128, s.size[v] as u128);
                let ok = s.indeg[x] as u128 * tv <= s.indeg[v] as u128 * (tv + tu) + tv;
                entry.test(ok, || Witness {
                    nodes: vec![x, u, v],
                    detail: format!("indeg({x}) = {} too large for children {u}, {v}", s.indeg[x]),
                });
            }
        }
    }
    entry
}

/// Smallest `n` at which the root-degree lower bound is asserted.
pub const ROOT_BOUND_MIN_N: usize = 20;

/// `ln(x) / ln ln(x)` with `x = 4 sqrt(n/5)`; `None` where `ln ln x <= 0`.
pub fn root_lower_bound(n: usize) -> Option<Interval> {
    if n == 0 {
        return None;
    }
    let x = Interval::from_ratio(n as u64, 5).sqrt().mul(Interval::from_int(4));
    if x.lo <= std::f64::consts::E {
        return None;
    }
    let l = x.ln();
    Some(l.div(l.ln()))
}

/// The root-degree lower bound (asserted for `n >= 20`) together with the
/// root-degree and height measurements.
pub fn check_root_degree_bounds(profile: &RootedProfile) -> (CheckEntry, Measurements) {
    root_degree_bounds(profile, &stats_of(profile))
}

fn root_degree_bounds(profile: &RootedProfile, s: &SubtreeStats) -> (CheckEntry, Measurements) {
    let n = profile.n();
    let bound = root_lower_bound(n);
    let mut entry = CheckEntry::new("root_lower_bound");
    match &bound {
        Some(b) if n >= ROOT_BOUND_MIN_N => {
            let d0 = Interval::from_int(s.indeg[0] as u64);
            entry.test(b.certainly_le(&d0), || Witness {
                nodes: vec![0],
                detail: format!("root in-degree {} not certainly above [{}, {}]", s.indeg[0], b.lo, b.hi),
            });
        }
        _ => entry.status = CheckStatus::Skipped,
    }
    let measurements = Measurements {
        n,
        root_indeg: s.indeg[0],
        height: s.height,
        sqrt_log_n: (n.max(1) as f64).log2().sqrt(),
        log_over_loglog: height_scale(n),
        root_lower_bound: bound,
    };
    (entry, measurements)
}

/// Height of the tree next to `log2 n / log2 log2 n`. A measurement only.
pub fn check_height_bound(profile: &RootedProfile) -> (usize, Option<f64>) {
    (stats_of(profile).height, height_scale(profile.n()))
}

fn height_scale(n: usize) -> Option<f64> {
    let l = (n as f64).log2();
    (n > 2 && l.log2() > 0.0).then(|| l / l.log2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::red_agent_tree;

    #[test]
    fn counterfeit_leaf_parent() {
        // root <- 1 <- {2, 3}: node 1 has in-degree 2 and leaf children.
        let p = RootedProfile::new(vec![0, 1, 1]).unwrap();
        let e = check_leaf_parent(&p);
        assert_eq!(e.status, CheckStatus::Fail);
        assert_eq!(e.witness.unwrap().nodes, vec![1]);
    }

    #[test]
    fn single_edge_passes_vacuously() {
        let p = RootedProfile::path(1);
        let a = audit_equilibrium(&p).unwrap();
        assert!(a.all_passed());
        assert_eq!(a.get("subtree_stability").unwrap().positions, 0);
        assert_eq!(a.get("root_lower_bound").unwrap().status, CheckStatus::Skipped);
    }

    #[test]
    fn red_agent_tree_diagnostics_report_subtrees() {
        let a = audit_equilibrium(&red_agent_tree()).unwrap();
        assert!(a.get("subtree_stability").unwrap().positions > 0);
    }

    #[test]
    fn star_breaks_sibling_and_leaf_checks() {
        let p = RootedProfile::star(4);
        assert!(!check_leaf_parent(&p).passed());
        assert!(!check_sibling_degree(&p).passed());
        assert!(check_degree_monotone(&p).passed());
    }

    #[test]
    fn monotone_violation_is_located() {
        // root <- 1 <- 2 <- {3, 4, 5}
        let p = RootedProfile::new(vec![0, 1, 2, 2, 2]).unwrap();
        let e = check_degree_monotone(&p);
        assert_eq!(e.witness.unwrap().nodes, vec![2, 1]);
    }

    #[test]
    fn root_bound_domain() {
        assert!(root_lower_bound(1).is_none());
        let b = root_lower_bound(15).unwrap();
        let x = 4.0 * 3f64.sqrt();
        assert!(b.contains(x.ln() / x.ln().ln()));
        assert!(root_lower_bound(20).unwrap().hi < 3.0);
    }
}
