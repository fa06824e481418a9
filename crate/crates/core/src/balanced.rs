//! Balanced trees: every node at distance `i` from the root has in-degree `d_i`.
//!
//! A balanced tree of height `h` is encoded leaf-to-root as
//! `(0, d_{h-1}, …, d_0)`. The module builds such trees, evaluates their size
//! and social cost through exact recurrences, and turns the swap lemmas for
//! balanced trees into executable predicates. Every predicate answers whether
//! its hypothesis holds at the given nodes; the matching `*_conclusion` checker
//! confirms the claimed non-profitability by direct cost comparison.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::cost::Rational;
use crate::equilibrium::{is_nash, Labeled};
use crate::kernel::{Engine, Exact, Kernel};
use crate::tree_model::{compute_stats, RootedProfile, SubtreeStats};
use crate::{Error, Result};

pub const DEFAULT_CONSTRUCTION_CAP: usize = 10_000_000;

/// Leaf-to-root in-degree list `(0, d_{h-1}, …, d_0)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DegreeSequence {
    degs: Vec<u64>,
}

impl DegreeSequence {
    pub fn new(degs: Vec<u64>) -> Result<Self> {
        if degs.len() < 2 {
            return Err(Error::InvalidSequence("need at least (0, d_0)".into()));
        }
        if degs[0] != 0 {
            return Err(Error::InvalidSequence(format!("leaf entry must be 0, got {}", degs[0])));
        }
        if let Some(pos) = degs[1..].iter().position(|&d| d == 0) {
            return Err(Error::InvalidSequence(format!("entry {} is 0 above the leaves", pos + 1)));
        }
        Ok(Self { degs })
    }

    /// Leaf-to-root entries.
    pub fn degs(&self) -> &[u64] {
        &self.degs
    }

    pub fn height(&self) -> usize {
        self.degs.len() - 1
    }

    /// `d_i`, the in-degree of nodes at distance `i` from the root.
    pub fn at_level(&self, i: usize) -> u64 {
        self.degs[self.height() - i]
    }

    /// Matches `(0, 1, 2, 4, d_{h-4}, …, d_0)` with
    /// `d_{j+1} < d_j <= 2 d_{j+1} + 1` for all `j <= h - 4`.
    pub fn admissible_for_theorem(&self) -> bool {
        let h = self.height();
        h >= 3
            && self.degs[..4] == [0, 1, 2, 4]
            && (0..h.saturating_sub(3)).all(|j| {
                let (d, below) = (self.at_level(j), self.at_level(j + 1));
                below < d && d <= 2 * below + 1
            })
    }
}

impl fmt::Display for DegreeSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.degs.iter().map(u64::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl FromStr for DegreeSequence {
    type Err = Error;

    /// Comma-separated, leaf first, optionally parenthesized: `"0,1,2,4,9"`.
    fn from_str(s: &str) -> Result<Self> {
        let body = s.trim().trim_start_matches('(').trim_end_matches(')');
        let mut degs = Vec::new();
        let mut offset = s.len() - s.trim_start().len() + usize::from(s.trim_start().starts_with('('));
        for part in body.split(',') {
            let d = part.trim().parse::<u64>().map_err(|_| Error::Parse {
                position: offset,
                message: format!("not a degree: {:?}", part.trim()),
            })?;
            degs.push(d);
            offset += part.len() + 1;
        }
        Self::new(degs)
    }
}

impl Serialize for DegreeSequence {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// `d_h = 0`, `d_{h-1} = 1`, `d_{h-2} = 2`, `d_{h-3} = 4`, then
/// `d_i = 2 d_{i+1} + 1` towards the root.
pub fn extremal_sequence(h: usize) -> DegreeSequence {
    assert!(h >= 1, "height must be positive");
    let mut degs = vec![0u64];
    for k in 1..=h {
        let d = match k {
            1 => 1,
            2 => 2,
            3 => 4,
            _ => 2 * degs[k - 1] + 1,
        };
        degs.push(d);
    }
    DegreeSequence { degs }
}

fn big(v: &BigUint) -> String {
    v.to_string()
}

fn ser_big_vec<S: Serializer>(v: &[BigUint], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(big))
}

fn ser_big<S: Serializer>(v: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&big(v))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BalancedStats {
    /// `|T_h|, |T_{h-1}|, …, |T_0|`.
    #[serde(serialize_with = "ser_big_vec")]
    pub sizes: Vec<BigUint>,
    /// Social cost of the subtree rooted at each level, leaf first.
    #[serde(serialize_with = "ser_big_vec")]
    pub subtree_sc: Vec<BigUint>,
    /// Node count `|T_0|`, root included.
    #[serde(serialize_with = "ser_big")]
    pub nodes: BigUint,
    #[serde(serialize_with = "ser_big")]
    pub sc: BigUint,
    /// Average agent cost `sc / (nodes - 1)`.
    pub avg_cost: Rational,
}

impl BalancedStats {
    pub fn agents(&self) -> BigUint {
        &self.nodes - 1u32
    }
}

/// `|T_{i}| = d_{i} |T_{i+1}| + 1` and `sc(T_i) = d_i sc(T_{i+1}) + d_i^2`,
/// from the leaves inward. Never builds the tree.
pub fn balanced_stats(seq: &DegreeSequence) -> BalancedStats {
    let mut sizes = vec![BigUint::one()];
    let mut subtree_sc = vec![BigUint::zero()];
    for &d in &seq.degs[1..] {
        let d = BigUint::from(d);
        let size = &d * sizes.last().unwrap() + 1u32;
        let sc = &d * subtree_sc.last().unwrap() + &d * &d;
        sizes.push(size);
        subtree_sc.push(sc);
    }
    let nodes = sizes.last().unwrap().clone();
    let sc = subtree_sc.last().unwrap().clone();
    let avg_cost = Rational::new(BigInt::from(sc.clone()), BigInt::from(&nodes - 1u32));
    BalancedStats { sizes, subtree_sc, nodes, sc, avg_cost }
}

/// Breadth-first construction; node labels follow BFS order.
pub fn build_balanced(seq: &DegreeSequence) -> Result<RootedProfile> {
    build_balanced_capped(seq, DEFAULT_CONSTRUCTION_CAP)
}

pub fn build_balanced_capped(seq: &DegreeSequence, cap: usize) -> Result<RootedProfile> {
    let nodes = balanced_stats(seq).nodes;
    let m = nodes.to_usize().filter(|&m| m <= cap).ok_or_else(|| Error::Overflow { nodes: nodes.to_string(), cap })?;
    let mut choice = Vec::with_capacity(m - 1);
    let mut queue = VecDeque::from([(0usize, 0usize)]);
    let mut next = 1;
    while let Some((v, lvl)) = queue.pop_front() {
        if lvl == seq.height() {
            continue;
        }
        for _ in 0..seq.at_level(lvl) {
            choice.push(v);
            queue.push_back((next, lvl + 1));
            next += 1;
        }
    }
    Ok(RootedProfile::from_parents_unchecked(choice))
}

/// Build and run the full Nash check. Requires an admissible sequence.
pub fn verify_theorem_stability(seq: &DegreeSequence) -> Result<bool> {
    if !seq.admissible_for_theorem() {
        return Err(Error::InvalidSequence(format!("{seq} is not of the admissible form")));
    }
    Ok(is_nash(&build_balanced(seq)?).stable)
}

/// Every admissible sequence whose tree has at most `max_agents` agents,
/// ordered by height and then lexicographically.
pub fn admissible_sequences(max_agents: u64) -> Vec<DegreeSequence> {
    let mut out = Vec::new();
    let mut layer = vec![vec![0u64, 1, 2, 4]];
    while !layer.is_empty() {
        let mut next = Vec::new();
        for degs in layer {
            let seq = DegreeSequence { degs };
            if balanced_stats(&seq).agents() > BigUint::from(max_agents) {
                continue;
            }
            let top = *seq.degs.last().unwrap();
            for d in top + 1..=2 * top + 1 {
                let mut degs = seq.degs.clone();
                degs.push(d);
                next.push(degs);
            }
            out.push(seq);
        }
        layer = next;
    }
    out
}

static EXACT: Exact = Exact;

/// A spanning tree with exact swap-cost queries.
pub struct SwapContext {
    profile: RootedProfile,
    stats: SubtreeStats,
    lab: Labeled,
    engine: Engine<'static, Exact>,
    /// `d_i` per level if the tree is balanced.
    levels: Option<Vec<u64>>,
}

impl SwapContext {
    pub fn new(profile: &RootedProfile) -> Result<Self> {
        let stats = compute_stats(profile)?;
        let lab = Labeled::new(profile);
        let mut engine = Engine::new(&EXACT);
        engine.prepare(&lab.flat);
        let mut levels: Vec<Option<usize>> = vec![None; stats.height + 1];
        let mut balanced = true;
        for v in 0..profile.node_count() {
            let slot = &mut levels[stats.depth[v]];
            match slot {
                None => *slot = Some(stats.indeg[v]),
                Some(d) if *d != stats.indeg[v] => balanced = false,
                _ => {}
            }
        }
        let levels = balanced.then(|| levels.into_iter().map(|d| d.unwrap_or(0) as u64).collect());
        Ok(Self { profile: profile.clone(), stats, lab, engine, levels })
    }

    pub fn profile(&self) -> &RootedProfile {
        &self.profile
    }

    pub fn stats(&self) -> &SubtreeStats {
        &self.stats
    }

    pub fn depth(&self, v: usize) -> usize {
        self.stats.depth[v]
    }

    pub fn indeg(&self, v: usize) -> u64 {
        self.stats.indeg[v] as u64
    }

    pub fn size(&self, v: usize) -> u64 {
        self.stats.size[v] as u64
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.profile.parent(v)
    }

    /// `a` is an ancestor of `v` or `v` itself.
    pub fn is_ancestor_or_self(&self, a: usize, v: usize) -> bool {
        let fa = self.lab.to_flat[a];
        let fv = self.lab.to_flat[v];
        fv >= fa && fv < fa + self.lab.flat.size[fa]
    }

    /// Ancestor of `v` at distance `level` from the root.
    pub fn ancestor_at(&self, v: usize, level: usize) -> Option<usize> {
        let mut u = v;
        if self.depth(v) < level {
            return None;
        }
        while self.depth(u) > level {
            u = self.parent(u)?;
        }
        Some(u)
    }

    /// Per-level in-degrees `d_0, …, d_h` if the tree is balanced.
    pub fn balanced_levels(&self) -> Option<&[u64]> {
        self.levels.as_deref()
    }

    pub fn height(&self) -> usize {
        self.stats.height
    }

    pub fn cost(&self, v: usize) -> Rational {
        EXACT.to_rational(self.engine.node_cost(self.lab.to_flat[v]))
    }

    /// Cost of `v` after retargeting to `t`; `None` if that disconnects `v`.
    pub fn swap_cost(&mut self, v: usize, t: usize) -> Option<Rational> {
        if v == t {
            return None;
        }
        let (fv, ft) = (self.lab.to_flat[v], self.lab.to_flat[t]);
        self.engine.deviation_cost(&self.lab.flat, fv, ft).map(|c| EXACT.to_rational(&c))
    }

    /// Swapping `v` towards `t` strictly lowers `v`'s cost.
    pub fn profitable(&mut self, v: usize, t: usize) -> bool {
        match self.swap_cost(v, t) {
            Some(c) => c < self.cost(v),
            None => false,
        }
    }

    fn agent_node(&self, v: usize) -> Result<()> {
        if v == 0 || v >= self.profile.node_count() {
            return Err(Error::InvalidNodes(format!("{v} is not an agent node")));
        }
        Ok(())
    }
}

fn invalid<T>(msg: String) -> Result<T> {
    Err(Error::InvalidNodes(msg))
}

/// Balanced with `d_{h-1} = 1`, `d_{h-2} = 2`, `d_{h-3} = 4` and
/// `d_{j+1} <= d_j <= 2 d_{j+1} + extra` for every `j <= h - 4`.
fn balanced_prefix_with(ctx: &SwapContext, extra: u64) -> bool {
    let Some(d) = ctx.balanced_levels() else { return false };
    let h = ctx.height();
    h >= 3
        && d[h - 1] == 1
        && d[h - 2] == 2
        && d[h - 3] == 4
        && (0..h.saturating_sub(3)).all(|j| d[j + 1] <= d[j] && d[j] <= 2 * d[j + 1] + extra)
}

/// Condition 1 at `v = u_i` (level `i >= 2`): `d_{i-2} >= d_{i-1}` and
/// `|T_{i-1}| (d_{i-2} + 1 - d_{i-1}) >= d_{i-2} |T_i|`.
pub fn condition_1(ctx: &SwapContext, v: usize) -> Result<bool> {
    ctx.agent_node(v)?;
    if ctx.depth(v) < 2 {
        return invalid(format!("node {v} has no grandparent"));
    }
    let p = ctx.parent(v).unwrap();
    let g = ctx.parent(p).unwrap();
    let (d2, d1) = (ctx.indeg(g), ctx.indeg(p));
    Ok(d2 >= d1 && ctx.size(p) as u128 * (d2 + 1 - d1) as u128 >= d2 as u128 * ctx.size(v) as u128)
}

/// No profitable swap of `v` towards its grandparent.
pub fn condition_1_conclusion(ctx: &mut SwapContext, v: usize) -> Result<bool> {
    condition_1(ctx, v)?;
    let g = ctx.ancestor_at(v, ctx.depth(v) - 2).unwrap();
    Ok(!ctx.profitable(v, g))
}

/// Condition 2 at `v = u_i` and level `j` with `i >= j + 3`:
/// `|T_{j+2}| >= 2 |T_i|`, `d_j >= d_{j+1} + 1`, no profitable swap of `u_i`
/// towards level `j + 1` and none of `u_{j+2}` towards level `j`.
pub fn condition_2(ctx: &mut SwapContext, v: usize, j: usize) -> Result<bool> {
    ctx.agent_node(v)?;
    let i = ctx.depth(v);
    if i < j + 3 {
        return invalid(format!("node {v} at level {i} is not 3 levels below {j}"));
    }
    let uj = ctx.ancestor_at(v, j).unwrap();
    let uj1 = ctx.ancestor_at(v, j + 1).unwrap();
    let uj2 = ctx.ancestor_at(v, j + 2).unwrap();
    Ok(ctx.size(uj2) >= 2 * ctx.size(v)
        && ctx.indeg(uj) > ctx.indeg(uj1)
        && !ctx.profitable(v, uj1)
        && !ctx.profitable(uj2, uj))
}

/// No profitable swap of `v` towards its ancestor at level `j`.
pub fn condition_2_conclusion(ctx: &mut SwapContext, v: usize, j: usize) -> Result<bool> {
    condition_2(ctx, v, j)?;
    let uj = ctx.ancestor_at(v, j).unwrap();
    Ok(!ctx.profitable(v, uj))
}

/// Shared precondition of conditions 3 and 4: `u = u_j` is below the root,
/// outside `T(v)`, and its parent `u_{j-1}` is not on `v`'s root path.
fn lateral_pair(ctx: &SwapContext, v: usize, u: usize) -> Result<usize> {
    ctx.agent_node(v)?;
    ctx.agent_node(u)?;
    if ctx.is_ancestor_or_self(v, u) {
        return invalid(format!("node {u} lies in the subtree of {v}"));
    }
    let up = ctx.parent(u).unwrap();
    if ctx.is_ancestor_or_self(up, v) {
        return invalid(format!("parent {up} of {u} is an ancestor of {v}"));
    }
    Ok(up)
}

/// `(d_{j-1} - d_j) |T_j|` and `d_j |T_i|`, compared by conditions 3 and 4.
fn lateral_sides(ctx: &SwapContext, v: usize, u: usize, up: usize) -> (i128, i128) {
    let (dj1, dj) = (ctx.indeg(up) as i128, ctx.indeg(u) as i128);
    ((dj1 - dj) * ctx.size(u) as i128, dj * ctx.size(v) as i128)
}

/// Condition 3: no profitable swap of `v` towards `u_{j-1}` and
/// `|T_i| >= (d_{j-1} - d_j) / d_j · |T_j|`.
pub fn condition_3(ctx: &mut SwapContext, v: usize, u: usize) -> Result<bool> {
    let up = lateral_pair(ctx, v, u)?;
    let (lhs, rhs) = lateral_sides(ctx, v, u, up);
    Ok(lhs <= rhs && !ctx.profitable(v, up))
}

/// No profitable swap of `v` towards `u`.
pub fn condition_3_conclusion(ctx: &mut SwapContext, v: usize, u: usize) -> Result<bool> {
    lateral_pair(ctx, v, u)?;
    Ok(!ctx.profitable(v, u))
}

/// Condition 4: no profitable swap of `v` towards `u_j` and
/// `|T_i| <= (d_{j-1} - d_j) / d_j · |T_j|`.
pub fn condition_4(ctx: &mut SwapContext, v: usize, u: usize) -> Result<bool> {
    let up = lateral_pair(ctx, v, u)?;
    let (lhs, rhs) = lateral_sides(ctx, v, u, up);
    Ok(rhs <= lhs && !ctx.profitable(v, u))
}

/// No profitable swap of `v` towards the parent of `u`.
pub fn condition_4_conclusion(ctx: &mut SwapContext, v: usize, u: usize) -> Result<bool> {
    let up = lateral_pair(ctx, v, u)?;
    Ok(!ctx.profitable(v, up))
}

fn siblings(ctx: &SwapContext, v: usize, u: usize) -> Result<()> {
    ctx.agent_node(v)?;
    ctx.agent_node(u)?;
    if v == u || ctx.parent(v) != ctx.parent(u) {
        return invalid(format!("{v} and {u} are not distinct siblings"));
    }
    Ok(())
}

/// Condition 5: the tree is balanced with `d_j <= 2 d_{j+1} + 1` for every
/// `j < h`; `v` and `u` are siblings.
pub fn condition_5(ctx: &SwapContext, v: usize, u: usize) -> Result<bool> {
    siblings(ctx, v, u)?;
    let Some(d) = ctx.balanced_levels() else { return Ok(false) };
    Ok((0..ctx.height()).all(|j| d[j] <= 2 * d[j + 1] + 1))
}

/// No profitable swap of `v` towards its sibling `u`.
pub fn condition_5_conclusion(ctx: &mut SwapContext, v: usize, u: usize) -> Result<bool> {
    siblings(ctx, v, u)?;
    Ok(!ctx.profitable(v, u))
}

fn one_level_up(ctx: &SwapContext, v: usize, u: usize) -> Result<()> {
    ctx.agent_node(v)?;
    if ctx.depth(u) + 1 != ctx.depth(v) || ctx.is_ancestor_or_self(u, v) {
        return invalid(format!("{u} is not a non-ancestor one level above {v}"));
    }
    Ok(())
}

/// Condition 6: balanced with the `(…, 4, 2, 1, 0)` tail and
/// `d_{j+1} <= d_j <= 2 d_{j+1} + 1` above it; `u = u_{i-1}` is one level
/// above `v = v_i` and not its ancestor.
pub fn condition_6(ctx: &SwapContext, v: usize, u: usize) -> Result<bool> {
    one_level_up(ctx, v, u)?;
    Ok(balanced_prefix_with(ctx, 1))
}

/// No profitable swap of `v` towards `u`.
pub fn condition_6_conclusion(ctx: &mut SwapContext, v: usize, u: usize) -> Result<bool> {
    one_level_up(ctx, v, u)?;
    Ok(!ctx.profitable(v, u))
}

fn same_level_non_siblings(ctx: &SwapContext, v: usize, u: usize) -> Result<()> {
    ctx.agent_node(v)?;
    ctx.agent_node(u)?;
    if v == u || ctx.depth(v) != ctx.depth(u) || ctx.parent(v) == ctx.parent(u) {
        return invalid(format!("{v} and {u} are not distinct non-siblings on one level"));
    }
    Ok(())
}

/// Same-level lemma: balanced with the `(…, 4, 2, 1, 0)` tail and
/// `d_{j+1} <= d_j <= 2 d_{j+1} + 1` above it; `v`, `u` on one level and not
/// siblings.
pub fn same_level_swap(ctx: &SwapContext, v: usize, u: usize) -> Result<bool> {
    same_level_non_siblings(ctx, v, u)?;
    Ok(balanced_prefix_with(ctx, 1))
}

pub fn same_level_swap_conclusion(ctx: &mut SwapContext, v: usize, u: usize) -> Result<bool> {
    same_level_non_siblings(ctx, v, u)?;
    Ok(!ctx.profitable(v, u))
}

fn leaf_target(ctx: &SwapContext, v: usize, u: usize) -> Result<()> {
    ctx.agent_node(v)?;
    ctx.agent_node(u)?;
    if ctx.depth(u) != ctx.height() || ctx.is_ancestor_or_self(v, u) {
        return invalid(format!("{u} is not a deepest leaf outside the subtree of {v}"));
    }
    Ok(())
}

/// Heavy-subtree leaf lemma: `v` at level `i <= h - 2`, `u` a deepest leaf
/// outside `T(v)`; balanced with the `(…, 4, 2, 1, 0)` tail and
/// `d_{j+1} <= d_j <= 2 d_{j+1}` above it.
pub fn heavy_subtree_to_leaf(ctx: &SwapContext, v: usize, u: usize) -> Result<bool> {
    leaf_target(ctx, v, u)?;
    if ctx.depth(v) + 2 > ctx.height() {
        return invalid(format!("node {v} is below level h - 2"));
    }
    Ok(balanced_prefix_with(ctx, 0))
}

/// Leaf-to-leaf lemma: `v`, `u` distinct deepest leaves; balanced with the
/// `(…, 4, 2, 1, 0)` tail and `d_{j+1} <= d_j <= 2 d_{j+1} + 1` above it.
pub fn leaf_to_leaf(ctx: &SwapContext, v: usize, u: usize) -> Result<bool> {
    leaf_target(ctx, v, u)?;
    if ctx.depth(v) != ctx.height() {
        return invalid(format!("node {v} is not a deepest leaf"));
    }
    Ok(balanced_prefix_with(ctx, 1))
}

/// Light-subtree leaf lemma: `v` at level `h - 1`, `u` a deepest leaf that is
/// not a child of `v`; same degree hypotheses as the leaf-to-leaf lemma.
pub fn light_subtree_to_leaf(ctx: &SwapContext, v: usize, u: usize) -> Result<bool> {
    leaf_target(ctx, v, u)?;
    if ctx.depth(v) + 1 != ctx.height() {
        return invalid(format!("node {v} is not at level h - 1"));
    }
    Ok(balanced_prefix_with(ctx, 1))
}

/// Conclusion shared by the three leaf lemmas.
pub fn leaf_swap_conclusion(ctx: &mut SwapContext, v: usize, u: usize) -> Result<bool> {
    leaf_target(ctx, v, u)?;
    Ok(!ctx.profitable(v, u))
}

/// Internal nodes `u_j` with `j > k` on root paths through `w`: the
/// ancestors of `w` strictly below the least common ancestor with `v`, `w`
/// itself and the internal nodes of `T(w)`.
fn lateral_targets(ctx: &SwapContext, v: usize, w: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut a = w;
    while let Some(p) = ctx.parent(a) {
        if ctx.is_ancestor_or_self(p, v) {
            break;
        }
        a = p;
        out.push(a);
    }
    let children = crate::tree_model::Children::of(ctx.profile());
    let mut stack = vec![w];
    while let Some(x) = stack.pop() {
        out.push(x);
        stack.extend(children.of_node(x).iter().copied());
    }
    out.retain(|&x| ctx.indeg(x) > 0);
    out.sort_unstable();
    out
}

/// Shared shape of the lateral-swap corollaries: balanced, and
/// `d_{i+1} < d_i <= 2 d_{i+1} + extra` for every `i <= h - 3`.
fn lateral_corollary_degrees(ctx: &SwapContext, extra: u64) -> bool {
    let Some(d) = ctx.balanced_levels() else { return false };
    let h = ctx.height();
    h >= 3 && (0..=h - 3).all(|i| d[i + 1] < d[i] && d[i] <= 2 * d[i + 1] + extra)
}

/// Lateral corollary for `d_{i+1} < d_i <= 2 d_{i+1}`: `w = u_{i-1}` one level
/// above `v` and not its ancestor, with no profitable swap of `v` towards `w`.
pub fn lateral_corollary(ctx: &mut SwapContext, v: usize, w: usize) -> Result<bool> {
    one_level_up(ctx, v, w)?;
    Ok(lateral_corollary_degrees(ctx, 0) && !ctx.profitable(v, w))
}

/// Extremal variant: `d_{i+1} < d_i <= 2 d_{i+1} + 1`, and additionally no
/// profitable swap of `v` towards any child `u_i` of `w`.
pub fn lateral_corollary_extremal(ctx: &mut SwapContext, v: usize, w: usize) -> Result<bool> {
    one_level_up(ctx, v, w)?;
    if !lateral_corollary_degrees(ctx, 1) || ctx.profitable(v, w) {
        return Ok(false);
    }
    let children = crate::tree_model::Children::of(ctx.profile());
    let kids: Vec<usize> = children.of_node(w).to_vec();
    Ok(kids.into_iter().all(|c| !ctx.profitable(v, c)))
}

/// No profitable swap of `v` towards any internal `u_j` with `j > k`.
pub fn lateral_corollary_conclusion(ctx: &mut SwapContext, v: usize, w: usize) -> Result<bool> {
    one_level_up(ctx, v, w)?;
    let targets = lateral_targets(ctx, v, w);
    Ok(targets.into_iter().all(|t| !ctx.profitable(v, t)))
}

/// Outcome of applying one predicate at every applicable position.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConditionSweep {
    pub name: String,
    pub positions: u64,
    pub hypothesis_held: u64,
    /// Positions where the hypothesis held but the conclusion failed.
    pub violations: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_violation: Option<Vec<usize>>,
}

impl ConditionSweep {
    fn new(name: &str) -> Self {
        Self { name: name.into(), positions: 0, hypothesis_held: 0, violations: 0, first_violation: None }
    }

    fn record(&mut self, nodes: Vec<usize>, hyp: bool, concl: impl FnOnce() -> bool) {
        self.positions += 1;
        if hyp {
            self.hypothesis_held += 1;
            if !concl() {
                self.violations += 1;
                self.first_violation.get_or_insert(nodes);
            }
        }
    }
}

/// Apply every condition, lemma and corollary at every applicable position.
pub fn sweep_conditions(profile: &RootedProfile) -> Result<Vec<ConditionSweep>> {
    let mut ctx = SwapContext::new(profile)?;
    let m = profile.node_count();
    let h = ctx.height();
    let mut out = Vec::new();

    let mut s = ConditionSweep::new("condition_1");
    for v in 1..m {
        if ctx.depth(v) < 2 {
            continue;
        }
        let hyp = condition_1(&ctx, v)?;
        s.record(vec![v], hyp, || condition_1_conclusion(&mut ctx, v).unwrap());
    }
    out.push(s);

    let mut s = ConditionSweep::new("condition_2");
    for v in 1..m {
        for j in 0..ctx.depth(v).saturating_sub(2) {
            let hyp = condition_2(&mut ctx, v, j)?;
            s.record(vec![v, j], hyp, || condition_2_conclusion(&mut ctx, v, j).unwrap());
        }
    }
    out.push(s);

    let mut s3 = ConditionSweep::new("condition_3");
    let mut s4 = ConditionSweep::new("condition_4");
    let mut s5 = ConditionSweep::new("condition_5");
    let mut s6 = ConditionSweep::new("condition_6");
    let mut sl = ConditionSweep::new("same_level_swap");
    let mut lh = ConditionSweep::new("heavy_subtree_to_leaf");
    let mut ll = ConditionSweep::new("leaf_to_leaf");
    let mut lt = ConditionSweep::new("light_subtree_to_leaf");
    let mut c1 = ConditionSweep::new("lateral_corollary");
    let mut c2 = ConditionSweep::new("lateral_corollary_extremal");
    for v in 1..m {
        for u in 1..m {
            if u == v {
                continue;
            }
            if !ctx.is_ancestor_or_self(v, u) && !ctx.is_ancestor_or_self(ctx.parent(u).unwrap(), v) {
                let hyp = condition_3(&mut ctx, v, u)?;
                s3.record(vec![v, u], hyp, || condition_3_conclusion(&mut ctx, v, u).unwrap());
                let hyp = condition_4(&mut ctx, v, u)?;
                s4.record(vec![v, u], hyp, || condition_4_conclusion(&mut ctx, v, u).unwrap());
            }
            if ctx.parent(v) == ctx.parent(u) {
                let hyp = condition_5(&ctx, v, u)?;
                s5.record(vec![v, u], hyp, || condition_5_conclusion(&mut ctx, v, u).unwrap());
            } else if ctx.depth(v) == ctx.depth(u) {
                let hyp = same_level_swap(&ctx, v, u)?;
                sl.record(vec![v, u], hyp, || same_level_swap_conclusion(&mut ctx, v, u).unwrap());
            }
            if ctx.depth(u) + 1 == ctx.depth(v) && !ctx.is_ancestor_or_self(u, v) {
                let hyp = condition_6(&ctx, v, u)?;
                s6.record(vec![v, u], hyp, || condition_6_conclusion(&mut ctx, v, u).unwrap());
                let hyp = lateral_corollary(&mut ctx, v, u)?;
                c1.record(vec![v, u], hyp, || lateral_corollary_conclusion(&mut ctx, v, u).unwrap());
                let hyp = lateral_corollary_extremal(&mut ctx, v, u)?;
                c2.record(vec![v, u], hyp, || lateral_corollary_conclusion(&mut ctx, v, u).unwrap());
            }
            if ctx.depth(u) == h && !ctx.is_ancestor_or_self(v, u) {
                let dv = ctx.depth(v);
                if dv + 2 <= h {
                    let hyp = heavy_subtree_to_leaf(&ctx, v, u)?;
                    lh.record(vec![v, u], hyp, || leaf_swap_conclusion(&mut ctx, v, u).unwrap());
                } else if dv + 1 == h {
                    let hyp = light_subtree_to_leaf(&ctx, v, u)?;
                    lt.record(vec![v, u], hyp, || leaf_swap_conclusion(&mut ctx, v, u).unwrap());
                } else {
                    let hyp = leaf_to_leaf(&ctx, v, u)?;
                    ll.record(vec![v, u], hyp, || leaf_swap_conclusion(&mut ctx, v, u).unwrap());
                }
            }
        }
    }
    out.extend([s3, s4, s5, s6, sl, lh, ll, lt, c1, c2]);
    Ok(out)
}
