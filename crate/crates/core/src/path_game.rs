//! Path strategies: every agent picks a whole simple path to the root.
//!
//! An edge `(u, v)` on agent `i`'s path costs `indeg(v) / |U(u, v)|`, where
//! `indeg` counts distinct edges of the union graph and `U(u, v)` are the
//! agents whose paths contain the edge. Once all other paths are fixed, every
//! edge a deviator might use has a fixed positive price, so single-agent
//! deviations are searched over simple paths with a branch-and-bound cut.
//! Costs inside the searches are integers scaled by `lcm(1..=n)`.

use std::collections::BTreeMap;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::cost::{CostValue, Rational};
use crate::enumeration::{levels_to_profile, scan_levels};
use crate::tree_model::{canonical_code, node_of, CanonicalCode, RootedProfile};
use crate::{Error, Result};

/// Largest `n` accepted by the verifiers.
pub const DEFAULT_PATH_CAP: usize = 20;
pub const DEFAULT_PATH_SEARCH_CAP: usize = 18;
/// Expanded search nodes allowed per agent (or per pair).
pub const DEFAULT_SEARCH_BUDGET: u64 = 50_000_000;
/// Hard limit from the `u64` visited mask.
const MAX_AGENTS: usize = 63;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathProfile {
    paths: Vec<Vec<usize>>,
}

impl PathProfile {
    /// `paths[i]` runs from node `i + 1` to the root `0` without repeats.
    pub fn new(paths: Vec<Vec<usize>>) -> Result<Self> {
        let n = paths.len();
        if n == 0 {
            return Err(Error::InvalidNodes("no agents".into()));
        }
        for (i, p) in paths.iter().enumerate() {
            let bad = |msg: &str| Err(Error::InvalidNodes(format!("path of agent {i}: {msg}")));
            if p.first() != Some(&node_of(i)) {
                return bad("does not start at the agent's node");
            }
            if p.last() != Some(&0) || p.len() < 2 {
                return bad("does not end at the root");
            }
            let mut seen = vec![false; n + 1];
            for &v in p {
                if v > n {
                    return bad("node out of range");
                }
                if std::mem::replace(&mut seen[v], true) {
                    return bad("repeats a node");
                }
            }
        }
        Ok(Self { paths })
    }

    /// Every agent takes its unique tree path.
    pub fn from_tree(profile: &RootedProfile) -> Result<Self> {
        if !profile.is_spanning_tree() {
            let agent = (0..profile.n()).find(|&a| crate::tree_model::path_to_root(profile, a).is_none()).unwrap_or(0);
            return Err(Error::NotATree { agent });
        }
        let paths = (0..profile.n())
            .map(|a| {
                let mut p = vec![node_of(a)];
                let mut v = node_of(a);
                while let Some(u) = profile.parent(v) {
                    p.push(u);
                    v = u;
                }
                p
            })
            .collect();
        Ok(Self { paths })
    }

    pub fn n(&self) -> usize {
        self.paths.len()
    }

    pub fn paths(&self) -> &[Vec<usize>] {
        &self.paths
    }

    pub fn path(&self, agent: usize) -> &[usize] {
        &self.paths[agent]
    }

    pub fn with_path(&self, agent: usize, path: Vec<usize>) -> Result<Self> {
        let mut paths = self.paths.clone();
        paths[agent] = path;
        Self::new(paths)
    }

    pub fn induced(&self) -> InducedGraph {
        InducedGraph::of(self)
    }

    /// The spanning tree when the union graph is one and every path follows it.
    pub fn tree_profile(&self) -> Option<RootedProfile> {
        let g = self.induced();
        if !g.is_tree() {
            return None;
        }
        let mut choice = vec![0; self.n()];
        for &(u, v) in g.users.keys() {
            choice[u - 1] = v;
        }
        RootedProfile::new(choice).ok()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            paths: Vec<Vec<usize>>,
        }
        let raw: Raw = serde_json::from_str(text).map_err(|e| Error::Parse { position: e.column(), message: e.to_string() })?;
        Self::new(raw.paths)
    }
}

/// Union of all chosen paths.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InducedGraph {
    users: BTreeMap<(usize, usize), Vec<usize>>,
    indeg: Vec<usize>,
}

impl InducedGraph {
    pub fn of(profile: &PathProfile) -> Self {
        let mut users: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (i, p) in profile.paths.iter().enumerate() {
            for w in p.windows(2) {
                users.entry((w[0], w[1])).or_default().push(i);
            }
        }
        let mut indeg = vec![0; profile.n() + 1];
        for &(_, v) in users.keys() {
            indeg[v] += 1;
        }
        Self { users, indeg }
    }

    pub fn users(&self, u: usize, v: usize) -> &[usize] {
        self.users.get(&(u, v)).map_or(&[], Vec::as_slice)
    }

    pub fn indeg(&self, v: usize) -> usize {
        self.indeg[v]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.users.keys().copied()
    }

    /// Each agent node has exactly one out-edge. Since every node also reaches
    /// the root along its own path, that makes the union a spanning tree.
    pub fn is_tree(&self) -> bool {
        let n = self.indeg.len() - 1;
        let mut out = vec![0; n + 1];
        for &(u, _) in self.users.keys() {
            out[u] += 1;
        }
        out[0] == 0 && out[1..].iter().all(|&d| d == 1)
    }
}

pub fn path_agent_cost(profile: &PathProfile, agent: usize) -> CostValue {
    let g = profile.induced();
    CostValue::Finite(cost_in(&g, profile.path(agent)))
}

pub fn path_costs(profile: &PathProfile) -> Vec<Rational> {
    let g = profile.induced();
    profile.paths.iter().map(|p| cost_in(&g, p)).collect()
}

fn cost_in(g: &InducedGraph, path: &[usize]) -> Rational {
    path.windows(2)
        .map(|w| Rational::new(g.indeg(w[1]) as i64, g.users(w[0], w[1]).len() as i64))
        .sum()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PathDeviation {
    pub agent: usize,
    pub path: Vec<usize>,
    pub old_cost: Rational,
    pub new_cost: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PathNashVerdict {
    pub stable: bool,
    /// Cheapest deviation of the lowest-indexed agent that has one.
    pub witness: Option<PathDeviation>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PairDeviation {
    pub agents: (usize, usize),
    pub paths: (Vec<usize>, Vec<usize>),
    pub old_costs: (Rational, Rational),
    pub new_costs: (Rational, Rational),
}

/// Edge-use counts with some agents' paths removed, in scaled units.
struct Residual {
    m: usize,
    scale: u128,
    /// `inv[k] = scale / k`.
    inv: Vec<u128>,
    cnt: Vec<u32>,
    indeg: Vec<u32>,
    /// Node has an out-edge still used by someone.
    shared_out: Vec<bool>,
}

impl Residual {
    fn new(profile: &PathProfile, without: &[usize]) -> Result<Self> {
        let n = profile.n();
        if n > MAX_AGENTS {
            return Err(Error::ResourceLimit(format!("path search supports at most {MAX_AGENTS} agents, got {n}")));
        }
        let scale = (1..=n as u128).fold(1u128, |l, k| l.lcm(&k));
        let inv = (0..=n as u128).map(|k| if k == 0 { 0 } else { scale / k }).collect();
        let m = n + 1;
        let mut cnt = vec![0u32; m * m];
        for (i, p) in profile.paths.iter().enumerate() {
            if without.contains(&i) {
                continue;
            }
            for w in p.windows(2) {
                cnt[w[0] * m + w[1]] += 1;
            }
        }
        let mut indeg = vec![0u32; m];
        let mut shared_out = vec![false; m];
        for u in 0..m {
            for v in 0..m {
                if cnt[u * m + v] > 0 {
                    indeg[v] += 1;
                    shared_out[u] = true;
                }
            }
        }
        Ok(Self { m, scale, inv, cnt, indeg, shared_out })
    }

    #[inline]
    fn cnt(&self, u: usize, v: usize) -> u32 {
        self.cnt[u * self.m + v]
    }

    fn to_rational(&self, x: u128) -> Rational {
        Rational::new(num_bigint::BigInt::from(x), num_bigint::BigInt::from(self.scale))
    }

    fn scaled(&self, r: &[usize]) -> u128 {
        // Cost of a current path of a removed agent, with that agent added back.
        r.windows(2)
            .map(|w| {
                let c = self.cnt(w[0], w[1]);
                let d = self.indeg[w[1]] + u32::from(c == 0);
                d as u128 * self.inv[c as usize + 1]
            })
            .sum()
    }
}

/// Depth-first search over simple paths from one start node for a single
/// deviator, given a residual graph and per-edge prices.
struct PathSearch<'a, F: Fn(usize, usize) -> u128> {
    m: usize,
    price: F,
    /// Lower bound on the first edge out of a node.
    first_edge_floor: &'a dyn Fn(usize) -> u128,
    best: u128,
    best_path: Option<Vec<usize>>,
    stack: Vec<usize>,
    expanded: u64,
    budget: u64,
    first_only: bool,
    /// Collect every complete path below `best` instead of tightening.
    collect: Option<Vec<(Vec<usize>, u128)>>,
}

impl<F: Fn(usize, usize) -> u128> PathSearch<'_, F> {
    fn run(&mut self, start: usize) -> std::result::Result<(), ()> {
        self.stack.push(start);
        let r = self.dfs(start, 1u64 << start, 0);
        self.stack.pop();
        r
    }

    fn done(&self) -> bool {
        self.first_only && self.best_path.is_some()
    }

    fn dfs(&mut self, u: usize, visited: u64, committed: u128) -> std::result::Result<(), ()> {
        self.expanded += 1;
        if self.expanded > self.budget {
            return Err(());
        }
        for v in 0..self.m {
            if visited & (1 << v) != 0 {
                continue;
            }
            let c = committed + (self.price)(u, v);
            if v == 0 {
                if c < self.best {
                    let mut p = self.stack.clone();
                    p.push(0);
                    if let Some(all) = self.collect.as_mut() {
                        all.push((p, c));
                    } else {
                        self.best = c;
                        self.best_path = Some(p);
                        if self.first_only {
                            return Ok(());
                        }
                    }
                }
                continue;
            }
            if c + (self.first_edge_floor)(v) >= self.best {
                continue;
            }
            self.stack.push(v);
            let r = self.dfs(v, visited | (1 << v), c);
            self.stack.pop();
            r?;
            if self.done() {
                return Ok(());
            }
        }
        Ok(())
    }
}

fn check_cap(profile: &PathProfile, cap: usize) -> Result<()> {
    if profile.n() > cap {
        return Err(Error::ResourceLimit(format!("{} agents exceed the path-game cap {cap}", profile.n())));
    }
    Ok(())
}

/// Search budget and size cap for the path-game verifiers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PathSearchConfig {
    pub cap: usize,
    pub budget: u64,
}

impl Default for PathSearchConfig {
    fn default() -> Self {
        Self { cap: DEFAULT_PATH_CAP, budget: DEFAULT_SEARCH_BUDGET }
    }
}

/// Cheapest strictly improving path for `agent`, or `Ok(None)`.
fn improving_path(profile: &PathProfile, agent: usize, budget: u64, first_only: bool) -> std::result::Result<Option<PathDeviation>, Error> {
    let res = Residual::new(profile, &[agent])?;
    let cur = res.scaled(profile.path(agent));
    let scale = res.scale;
    let floor = |v: usize| if res.shared_out[v] { 0 } else { scale };
    let price = |u: usize, v: usize| {
        let c = res.cnt(u, v);
        (res.indeg[v] + u32::from(c == 0)) as u128 * res.inv[c as usize + 1]
    };
    // Seed with one new edge to `v` followed by `v`'s own path.
    let s = node_of(agent);
    let mut seed: Option<(Vec<usize>, u128)> = None;
    for v in (0..res.m).filter(|&v| v != s) {
        let tail: &[usize] = if v == 0 { &[0] } else { profile.path(v - 1) };
        if tail.contains(&s) {
            continue;
        }
        let c = price(s, v) + tail.windows(2).map(|w| price(w[0], w[1])).sum::<u128>();
        if c < seed.as_ref().map_or(cur, |x| x.1) {
            let mut path = vec![s];
            path.extend_from_slice(tail);
            seed = Some((path, c));
            if first_only {
                break;
            }
        }
    }
    if first_only && seed.is_some() {
        let (path, c) = seed.unwrap();
        return Ok(Some(PathDeviation { agent, path, old_cost: res.to_rational(cur), new_cost: res.to_rational(c) }));
    }
    let (best_path, best) = match seed {
        Some((p, c)) => (Some(p), c),
        None => (None, cur),
    };
    let mut search = PathSearch {
        m: res.m,
        price,
        first_edge_floor: &floor,
        best,
        best_path,
        stack: Vec::new(),
        expanded: 0,
        budget,
        first_only,
        collect: None,
    };
    search
        .run(node_of(agent))
        .map_err(|_| Error::SearchBudgetExceeded { budget, agents_checked: agent })?;
    Ok(search.best_path.map(|path| PathDeviation {
        agent,
        path,
        old_cost: res.to_rational(cur),
        new_cost: res.to_rational(search.best),
    }))
}

pub fn is_path_nash(profile: &PathProfile) -> Result<PathNashVerdict> {
    is_path_nash_with(profile, &PathSearchConfig::default())
}

pub fn is_path_nash_with(profile: &PathProfile, config: &PathSearchConfig) -> Result<PathNashVerdict> {
    check_cap(profile, config.cap)?;
    for agent in 0..profile.n() {
        if let Some(dev) = improving_path(profile, agent, config.budget, false)? {
            return Ok(PathNashVerdict { stable: false, witness: Some(dev) });
        }
    }
    Ok(PathNashVerdict { stable: true, witness: None })
}

/// Existence-only check: costly agents first, stop at any improvement.
fn path_stable_fast(profile: &PathProfile, budget: u64) -> Result<bool> {
    let all = Residual::new(profile, &[])?;
    let costs: Vec<u128> = profile.paths.iter().map(|p| {
        p.windows(2).map(|w| all.indeg[w[1]] as u128 * all.inv[all.cnt(w[0], w[1]) as usize]).sum()
    }).collect();
    let mut order: Vec<usize> = (0..profile.n()).collect();
    order.sort_by(|&a, &b| costs[b].cmp(&costs[a]).then(a.cmp(&b)));
    for agent in order {
        if improving_path(profile, agent, budget, true)?.is_some() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Exact cheapest response of `agent` by Dijkstra over the fixed positive
/// edge prices. Independent of the branch-and-bound search.
pub fn best_path_response(profile: &PathProfile, agent: usize) -> Result<(Vec<usize>, Rational)> {
    let g = profile.induced();
    let m = profile.n() + 1;
    let mut users = vec![0i64; m * m];
    let mut indeg = vec![0i64; m];
    for (u, v) in g.edges() {
        let k = g.users(u, v).iter().filter(|&&i| i != agent).count() as i64;
        users[u * m + v] = k;
        if k > 0 {
            indeg[v] += 1;
        }
    }
    let price = |u: usize, v: usize| {
        let k = users[u * m + v];
        Rational::new(indeg[v] + i64::from(k == 0), k + 1)
    };
    let start = node_of(agent);
    let mut dist: Vec<Option<Rational>> = vec![None; m];
    let mut prev = vec![usize::MAX; m];
    let mut done = vec![false; m];
    dist[start] = Some(Rational::zero());
    loop {
        let Some(u) = (0..m).filter(|&v| !done[v] && dist[v].is_some()).min_by(|&a, &b| dist[a].cmp(&dist[b])) else { break };
        done[u] = true;
        if u == 0 {
            break;
        }
        let du = dist[u].clone().unwrap();
        for v in 0..m {
            if done[v] || v == u {
                continue;
            }
            let nd = &du + &price(u, v);
            if dist[v].as_ref().map_or(true, |d| nd < *d) {
                dist[v] = Some(nd);
                prev[v] = u;
            }
        }
    }
    let mut path = vec![0];
    while *path.last().unwrap() != start {
        path.push(prev[*path.last().unwrap()]);
    }
    path.reverse();
    Ok((path, dist[0].clone().unwrap()))
}

/// Joint deviation of agents `i` and `j` in which both strictly improve.
pub fn pair_coalition_improving(profile: &PathProfile, i: usize, j: usize) -> Result<Option<PairDeviation>> {
    pair_coalition_improving_with(profile, i, j, &PathSearchConfig::default())
}

pub fn pair_coalition_improving_with(profile: &PathProfile, i: usize, j: usize, config: &PathSearchConfig) -> Result<Option<PairDeviation>> {
    check_cap(profile, config.cap)?;
    if i == j || i >= profile.n() || j >= profile.n() {
        return Err(Error::InvalidNodes(format!("agents {i} and {j} do not form a pair")));
    }
    let exceeded = || Error::SearchBudgetExceeded { budget: config.budget, agents_checked: 0 };
    let res = Residual::new(profile, &[i, j])?;
    let g = profile.induced();
    let m = res.m;
    let scale = res.scale;
    let current = |a: usize| -> u128 {
        profile.path(a).windows(2).map(|w| g.indeg(w[1]) as u128 * res.inv[g.users(w[0], w[1]).len()]).sum()
    };
    let (cur_i, cur_j) = (current(i), current(j));

    // Agent i alone: in-degree at least the residual one, at most one more user.
    let half = scale / 2;
    let floor_i = |v: usize| if res.shared_out[v] { 0 } else { half };
    let mut outer = PathSearch {
        m,
        price: |u: usize, v: usize| {
            let c = res.cnt(u, v);
            (res.indeg[v] + u32::from(c == 0)) as u128 * res.inv[c as usize + 2]
        },
        first_edge_floor: &floor_i,
        best: cur_i,
        best_path: None,
        stack: Vec::new(),
        expanded: 0,
        budget: config.budget,
        first_only: false,
        collect: Some(Vec::new()),
    };
    outer.run(node_of(i)).map_err(|_| exceeded())?;
    let mut spent = outer.expanded;
    let candidates = outer.collect.take().unwrap();

    for (pi, _) in candidates {
        let mut on_pi = vec![false; m * m];
        let mut indeg1 = res.indeg.clone();
        for w in pi.windows(2) {
            on_pi[w[0] * m + w[1]] = true;
            if res.cnt(w[0], w[1]) == 0 {
                indeg1[w[1]] += 1;
            }
        }
        let in_e1 = |u: usize, v: usize| res.cnt(u, v) > 0 || on_pi[u * m + v];
        let floor_j = |v: usize| if res.shared_out[v] || pi.contains(&v) && v != 0 { 0 } else { scale };
        let mut inner = PathSearch {
            m,
            price: |u: usize, v: usize| {
                let users = res.cnt(u, v) + u32::from(on_pi[u * m + v]) + 1;
                (indeg1[v] + u32::from(!in_e1(u, v))) as u128 * res.inv[users as usize]
            },
            first_edge_floor: &floor_j,
            best: cur_j,
            best_path: None,
            stack: Vec::new(),
            expanded: 0,
            budget: config.budget.saturating_sub(spent),
            first_only: false,
            collect: Some(Vec::new()),
        };
        inner.run(node_of(j)).map_err(|_| exceeded())?;
        spent += inner.expanded;
        for (pj, cost_j) in inner.collect.take().unwrap() {
            let trial = profile.with_path(i, pi.clone())?.with_path(j, pj.clone())?;
            let costs = path_costs(&trial);
            let new_i = &costs[i];
            if *new_i < res.to_rational(cur_i) {
                debug_assert_eq!(costs[j], res.to_rational(cost_j));
                return Ok(Some(PairDeviation {
                    agents: (i, j),
                    paths: (pi, pj),
                    old_costs: (res.to_rational(cur_i), res.to_rational(cur_j)),
                    new_costs: (new_i.clone(), costs[j].clone()),
                }));
            }
        }
    }
    Ok(None)
}

/// Tree shapes on `n + 1` nodes that are path-stable with tree paths.
pub fn path_equilibrium_search(n: usize) -> Result<Vec<CanonicalCode>> {
    path_equilibrium_search_with(n, DEFAULT_PATH_SEARCH_CAP, DEFAULT_SEARCH_BUDGET)
}

pub fn path_equilibrium_search_with(n: usize, cap: usize, budget: u64) -> Result<Vec<CanonicalCode>> {
    if n > cap {
        return Err(Error::ResourceLimit(format!("path search for n = {n} exceeds cap {cap}")));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let keep = |_: &mut (), seq: &[u8]| {
        let levels: Vec<usize> = seq.iter().map(|&x| x as usize).collect();
        path_stable_fast(&PathProfile::from_tree(&levels_to_profile(&levels))?, budget)
    };
    let (_, hits) = scan_levels(n + 1, || (), keep)?;
    let found: Result<Vec<CanonicalCode>> = hits.iter().map(|l| canonical_code(&levels_to_profile(l))).collect();
    let mut codes = found?;
    codes.sort_by(|a, b| a.as_str().cmp(b.as_str()));
    Ok(codes)
}
