//! Strategy profiles, subtree statistics and canonical forms of rooted trees.
//!
//! Node `0` is the root; agent `i` lives on node `i + 1`. A profile stores the
//! node each agent's single edge points to. Profiles that are not spanning
//! trees are representable so that the game can price them (agents that
//! cannot reach the root pay an infinite cost).

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One chosen out-edge per agent.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RootedProfile {
    choice: Vec<usize>,
}

#[inline]
pub fn node_of(agent: usize) -> usize {
    agent + 1
}

#[inline]
pub fn agent_of(node: usize) -> Option<usize> {
    node.checked_sub(1)
}

impl RootedProfile {
    /// Validates that every target lies in `0..=n` and no agent points at itself.
    pub fn new(choice: Vec<usize>) -> Result<Self> {
        let n = choice.len();
        if n == 0 {
            return Err(Error::Parse { position: 0, message: "profile needs at least one agent".into() });
        }
        for (i, &c) in choice.iter().enumerate() {
            if c > n {
                return Err(Error::Parse {
                    position: i,
                    message: format!("agent {i} targets node {c}, nodes are 0..={n}"),
                });
            }
            if c == node_of(i) {
                return Err(Error::Parse { position: i, message: format!("agent {i} targets its own node") });
            }
        }
        Ok(Self { choice })
    }

    pub(crate) fn from_parents_unchecked(choice: Vec<usize>) -> Self {
        debug_assert!(Self::new(choice.clone()).is_ok());
        Self { choice }
    }

    /// Every agent connects straight to the root.
    pub fn star(n: usize) -> Self {
        Self { choice: vec![0; n] }
    }

    /// Hamiltonian path ending at the root: agent `i` points at agent `i - 1`.
    pub fn path(n: usize) -> Self {
        Self { choice: (0..n).collect() }
    }

    pub fn n(&self) -> usize {
        self.choice.len()
    }

    pub fn node_count(&self) -> usize {
        self.choice.len() + 1
    }

    pub fn choice(&self) -> &[usize] {
        &self.choice
    }

    pub fn target(&self, agent: usize) -> usize {
        self.choice[agent]
    }

    /// Copy of the profile with one agent's edge moved.
    pub fn with_choice(&self, agent: usize, target: usize) -> Self {
        let mut choice = self.choice.clone();
        choice[agent] = target;
        Self { choice }
    }

    /// Parent node of `node`, `None` for the root.
    pub fn parent(&self, node: usize) -> Option<usize> {
        agent_of(node).map(|a| self.choice[a])
    }

    /// True iff following the chosen edges from every agent reaches the root.
    pub fn is_spanning_tree(&self) -> bool {
        SubtreeStats::of_profile(self).reaches_root.iter().all(|&r| r)
    }

    /// Applies a node relabelling that fixes the root. `perm[v]` is the new
    /// index of node `v`.
    pub fn relabel(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.node_count());
        assert_eq!(perm[0], 0, "relabelling must fix the root");
        let mut choice = vec![0; self.n()];
        for (a, &c) in self.choice.iter().enumerate() {
            choice[perm[node_of(a)] - 1] = perm[c];
        }
        Self { choice }
    }

    /// JSON array of targets, e.g. `[0,1,2]`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.choice).expect("vector of integers serializes")
    }

    /// Parses the JSON array form. Errors carry the element index for range
    /// problems and the character offset for syntax problems.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Vec<serde_json::Value> = serde_json::from_str(text).map_err(|e| Error::Parse {
            position: char_offset(text, e.line(), e.column()),
            message: e.to_string(),
        })?;
        let mut choice = Vec::with_capacity(raw.len());
        for (i, v) in raw.iter().enumerate() {
            let c = v.as_u64().ok_or_else(|| Error::Parse {
                position: i,
                message: format!("element {i} is not a non-negative integer: {v}"),
            })?;
            choice.push(c as usize);
        }
        Self::new(choice)
    }

    /// Graphviz rendering; edges point from agent to chosen node.
    pub fn to_dot(&self, name: &str) -> String {
        let mut out = format!("digraph \"{name}\" {{\n  rankdir=BT;\n");
        out.push_str("  r [label=\"r\", shape=doublecircle, style=filled, fillcolor=lightgray];\n");
        for node in 1..self.node_count() {
            out.push_str(&format!("  v{node} [label=\"{}\", shape=circle];\n", node - 1));
        }
        for (a, &c) in self.choice.iter().enumerate() {
            let head = if c == 0 { "r".to_string() } else { format!("v{c}") };
            out.push_str(&format!("  v{} -> {head};\n", node_of(a)));
        }
        out.push_str("}\n");
        out
    }
}

impl fmt::Display for RootedProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_json())
    }
}

impl Serialize for RootedProfile {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.choice.serialize(s)
    }
}

impl<'de> Deserialize<'de> for RootedProfile {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let choice = Vec::<usize>::deserialize(d)?;
        RootedProfile::new(choice).map_err(serde::de::Error::custom)
    }
}

fn char_offset(text: &str, line: usize, column: usize) -> usize {
    let mut offset = 0;
    for (i, l) in text.split('\n').enumerate() {
        if i + 1 == line {
            return offset + column.saturating_sub(1);
        }
        offset += l.len() + 1;
    }
    offset
}

/// Children lists in compressed form.
#[derive(Clone, Debug)]
pub struct Children {
    offsets: Vec<usize>,
    list: Vec<usize>,
}

impl Children {
    pub fn of(profile: &RootedProfile) -> Self {
        let m = profile.node_count();
        let mut offsets = vec![0; m + 1];
        for &c in profile.choice() {
            offsets[c + 1] += 1;
        }
        for v in 0..m {
            offsets[v + 1] += offsets[v];
        }
        let mut fill = offsets.clone();
        let mut list = vec![0; profile.n()];
        for (a, &c) in profile.choice().iter().enumerate() {
            list[fill[c]] = node_of(a);
            fill[c] += 1;
        }
        Self { offsets, list }
    }

    pub fn of_node(&self, v: usize) -> &[usize] {
        &self.list[self.offsets[v]..self.offsets[v + 1]]
    }
}

/// In-degrees, subtree sizes and depths.
///
/// For non-tree profiles `size` and `depth` are only meaningful on nodes with
/// `reaches_root[v]`; everything else holds zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubtreeStats {
    pub indeg: Vec<usize>,
    pub size: Vec<usize>,
    pub depth: Vec<usize>,
    pub height: usize,
    pub reaches_root: Vec<bool>,
}

impl SubtreeStats {
    /// Statistics of the root component of an arbitrary profile.
    pub fn of_profile(profile: &RootedProfile) -> Self {
        let m = profile.node_count();
        let children = Children::of(profile);
        let mut indeg = vec![0; m];
        for &c in profile.choice() {
            indeg[c] += 1;
        }
        let mut depth = vec![0; m];
        let mut reaches_root = vec![false; m];
        let mut order = Vec::with_capacity(m);
        let mut queue = VecDeque::from([0usize]);
        reaches_root[0] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &c in children.of_node(v) {
                reaches_root[c] = true;
                depth[c] = depth[v] + 1;
                queue.push_back(c);
            }
        }
        let mut size = vec![0; m];
        for &v in order.iter().rev() {
            size[v] += 1;
            if let Some(p) = profile.parent(v) {
                size[p] += size[v];
            }
        }
        let height = order.iter().map(|&v| depth[v]).max().unwrap_or(0);
        Self { indeg, size, depth, height, reaches_root }
    }

    pub fn n(&self) -> usize {
        self.indeg.len() - 1
    }
}

/// Statistics of a spanning tree; fails on the first agent that sits on a cycle.
pub fn compute_stats(profile: &RootedProfile) -> Result<SubtreeStats> {
    let stats = SubtreeStats::of_profile(profile);
    if let Some(node) = stats.reaches_root.iter().position(|&r| !r) {
        return Err(Error::NotATree { agent: node - 1 });
    }
    Ok(stats)
}

/// Edges `(from, to)` from the agent's node to the root, or `None` when the
/// agent's pointer chain never reaches the root.
pub fn path_to_root(profile: &RootedProfile, agent: usize) -> Option<Vec<(usize, usize)>> {
    let mut edges = Vec::new();
    let mut v = node_of(agent);
    while v != 0 {
        if edges.len() > profile.n() {
            return None;
        }
        let next = profile.choice[v - 1];
        edges.push((v, next));
        v = next;
    }
    Some(edges)
}

/// Canonical form of an unlabeled rooted tree: the nested-parenthesis string
/// in which every node's child encodings are sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CanonicalCode(String);

impl CanonicalCode {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn node_count(&self) -> usize {
        self.0.len() / 2
    }

    pub fn parse(code: &str) -> Result<Self> {
        let mut depth = 0usize;
        for (i, ch) in code.chars().enumerate() {
            match ch {
                '(' => depth += 1,
                ')' if depth > 0 => {
                    depth -= 1;
                    if depth == 0 && i + 1 != code.len() {
                        return Err(Error::Parse { position: i + 1, message: "code has more than one root".into() });
                    }
                }
                _ => return Err(Error::Parse { position: i, message: format!("unexpected character {ch:?}") }),
            }
        }
        if depth != 0 || code.len() < 4 {
            return Err(Error::Parse { position: code.len(), message: "unbalanced or agent-free code".into() });
        }
        Ok(Self(code.to_string()))
    }

    /// The profile whose labels follow the code's preorder; this is the
    /// representative labelling of the isomorphism class.
    pub fn to_profile(&self) -> RootedProfile {
        let mut choice = Vec::with_capacity(self.node_count() - 1);
        let mut stack: Vec<usize> = Vec::new();
        let mut next = 0usize;
        for b in self.0.bytes() {
            if b == b'(' {
                if let Some(&parent) = stack.last() {
                    choice.push(parent);
                }
                stack.push(next);
                next += 1;
            } else {
                stack.pop();
            }
        }
        RootedProfile::from_parents_unchecked(choice)
    }
}

impl fmt::Display for CanonicalCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn canonical_code(profile: &RootedProfile) -> Result<CanonicalCode> {
    let stats = compute_stats(profile)?;
    let children = Children::of(profile);
    let m = profile.node_count();
    let mut by_depth: Vec<usize> = (0..m).collect();
    by_depth.sort_by_key(|&v| std::cmp::Reverse(stats.depth[v]));
    let mut codes: Vec<Vec<u8>> = vec![Vec::new(); m];
    for v in by_depth {
        let mut kids: Vec<Vec<u8>> = children.of_node(v).iter().map(|&c| std::mem::take(&mut codes[c])).collect();
        kids.sort_unstable();
        let mut code = Vec::with_capacity(2 * stats.size[v]);
        code.push(b'(');
        for k in kids {
            code.extend_from_slice(&k);
        }
        code.push(b')');
        codes[v] = code;
    }
    let code = std::mem::take(&mut codes[0]);
    Ok(CanonicalCode(String::from_utf8(code).expect("parentheses are ascii")))
}

/// The canonical representative of the profile's isomorphism class.
pub fn canonical_profile(profile: &RootedProfile) -> Result<RootedProfile> {
    Ok(canonical_code(profile)?.to_profile())
}

/// Standalone game on the subtree `T(x)`: `x` becomes the root and its
/// descendants are relabelled in preorder. Returns `None` when `x` is a leaf.
pub fn extract_subtree(profile: &RootedProfile, x: usize) -> Option<RootedProfile> {
    let children = Children::of(profile);
    if children.of_node(x).is_empty() {
        return None;
    }
    let mut label = std::collections::HashMap::new();
    let mut choice = Vec::new();
    let mut stack = vec![x];
    label.insert(x, 0usize);
    while let Some(v) = stack.pop() {
        for &c in children.of_node(v).iter().rev() {
            let id = label.len();
            label.insert(c, id);
            choice.push(label[&v]);
            stack.push(c);
        }
    }
    Some(RootedProfile::from_parents_unchecked(choice))
}
