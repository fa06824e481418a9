//! Unlabeled rooted trees and exhaustive equilibrium search.
//!
//! Trees are generated as canonical level sequences (preorder depth lists) in
//! the successor order of Beyer and Hedetniemi, starting from the path and
//! ending at the star. Every unlabeled rooted tree appears exactly once.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::cost::{fairness_ratio, social_cost, Rational};
use crate::equilibrium::tree_kernel;
use crate::kernel::{with_kernel, Engine, FlatTree, Kernel};
use crate::structure_checks::{audit_equilibrium, StructureAudit};
use crate::tree_model::{canonical_code, compute_stats, CanonicalCode, RootedProfile};
use crate::{Error, Result};

pub const DEFAULT_ENUMERATION_CAP: usize = 20;

const CHUNK: usize = 4096;

/// Iterator over the canonical level sequences of all rooted trees on `m`
/// nodes. Level `0` is the root.
#[derive(Clone, Debug)]
pub struct RootedTrees {
    levels: Vec<usize>,
    done: bool,
}

/// All unlabeled rooted trees on `m ≥ 1` nodes.
pub fn enumerate_rooted_trees(m: usize) -> RootedTrees {
    assert!(m >= 1, "a rooted tree has at least one node");
    RootedTrees { levels: (0..m).collect(), done: false }
}

impl RootedTrees {
    /// Advance in place; `false` once the star has been passed.
    fn advance(&mut self) -> bool {
        let l = &mut self.levels;
        let Some(p) = l.iter().rposition(|&x| x > 1) else {
            return false;
        };
        let q = l[..p].iter().rposition(|&x| x == l[p] - 1).expect("a node one level up precedes p");
        let shift = p - q;
        for i in p..l.len() {
            l[i] = l[i - shift];
        }
        true
    }

    /// Fill `buf` with up to `count` sequences back to back; returns how many.
    fn fill(&mut self, buf: &mut Vec<u8>, count: usize) -> usize {
        buf.clear();
        let mut k = 0;
        while k < count && !self.done {
            buf.extend(self.levels.iter().map(|&x| x as u8));
            k += 1;
            self.done = !self.advance();
        }
        k
    }
}

impl Iterator for RootedTrees {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.levels.clone();
        self.done = !self.advance();
        Some(out)
    }
}

/// Profile whose node `k` is the `k`-th node of the level sequence.
pub fn levels_to_profile(levels: &[usize]) -> RootedProfile {
    let mut last = vec![0usize; levels.len() + 1];
    let mut choice = Vec::with_capacity(levels.len().saturating_sub(1));
    for (k, &lvl) in levels.iter().enumerate().skip(1) {
        choice.push(last[lvl - 1]);
        last[lvl] = k;
    }
    RootedProfile::from_parents_unchecked(choice)
}

#[derive(Clone, Debug)]
pub struct EnumerationConfig {
    /// Largest `n` accepted.
    pub cap: usize,
    /// Worker threads; `None` uses the global rayon pool.
    pub jobs: Option<usize>,
    /// Run the structural audit on every equilibrium found.
    pub audit: bool,
}

impl Default for EnumerationConfig {
    fn default() -> Self {
        Self { cap: DEFAULT_ENUMERATION_CAP, jobs: None, audit: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquilibriumEntry {
    pub code: CanonicalCode,
    pub profile: RootedProfile,
    pub social_cost: u128,
    pub fairness_ratio: Rational,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit: Option<StructureAudit>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub n: usize,
    pub trees_scanned: u64,
    /// Sorted by canonical code.
    pub equilibria: Vec<EquilibriumEntry>,
    pub social_costs: Vec<u128>,
    pub best_sc: Option<u128>,
    pub worst_sc: Option<u128>,
    pub fr_values: Vec<Rational>,
    /// Wall-clock time; left out of JSON so reports are reproducible.
    #[serde(skip)]
    pub elapsed: Duration,
}

impl EquilibriumReport {
    pub fn count(&self) -> usize {
        self.equilibria.len()
    }
}

/// Scan every rooted tree on `n + 1` nodes and keep the stable ones.
pub fn find_equilibria(n: usize) -> Result<EquilibriumReport> {
    find_equilibria_with(n, &EnumerationConfig::default())
}

pub fn find_equilibria_with(n: usize, config: &EnumerationConfig) -> Result<EquilibriumReport> {
    if n > config.cap {
        return Err(Error::ResourceLimit(format!("n = {n} exceeds the enumeration cap {}", config.cap)));
    }
    let start = Instant::now();
    let (scanned, stable) = match config.jobs {
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build()
                .map_err(|e| Error::ResourceLimit(e.to_string()))?;
            pool.install(|| scan_stable(n + 1))
        }
        None => scan_stable(n + 1),
    };
    let mut equilibria: Vec<EquilibriumEntry> = stable
        .iter()
        .map(|levels| {
            let raw = levels_to_profile(levels);
            let code = canonical_code(&raw).expect("generated trees are spanning");
            let profile = code.to_profile();
            let stats = compute_stats(&profile).expect("decoded trees are spanning");
            let audit = config.audit.then(|| audit_equilibrium(&profile).expect("decoded trees are spanning"));
            EquilibriumEntry {
                code,
                social_cost: social_cost(&stats),
                fairness_ratio: fairness_ratio(&profile, &stats).unwrap_or_else(Rational::one),
                profile,
                audit,
            }
        })
        .collect();
    equilibria.sort_by(|a, b| a.code.as_str().cmp(b.code.as_str()));
    let social_costs: Vec<u128> = equilibria.iter().map(|e| e.social_cost).collect();
    Ok(EquilibriumReport {
        n,
        trees_scanned: scanned,
        best_sc: social_costs.iter().copied().min(),
        worst_sc: social_costs.iter().copied().max(),
        fr_values: equilibria.iter().map(|e| e.fairness_ratio.clone()).collect(),
        social_costs,
        equilibria,
        elapsed: start.elapsed(),
    })
}

/// Level sequences of every stable tree on `m` nodes, in generation order,
/// plus the number of trees scanned.
fn scan_stable(m: usize) -> (u64, Vec<Vec<usize>>) {
    with_kernel!(tree_kernel(m), k => scan_with(&k, m))
}

fn scan_with<K: Kernel>(k: &K, m: usize) -> (u64, Vec<Vec<usize>>) {
    let init = || (FlatTree::default(), Engine::new(k));
    let keep = |(tree, engine): &mut (FlatTree, Engine<K>), seq: &[u8]| {
        tree.load_levels(seq);
        engine.prepare(tree);
        Ok(engine.is_stable(tree))
    };
    scan_levels(m, init, keep).expect("stability scan cannot fail")
}

/// Stream every level sequence on `m` nodes through `keep` in parallel
/// chunks, keeping memory flat. Hits come back in generation order.
pub(crate) fn scan_levels<S, I, F>(m: usize, init: I, keep: F) -> Result<(u64, Vec<Vec<usize>>)>
where
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, &[u8]) -> Result<bool> + Sync + Send,
{
    let mut gen = enumerate_rooted_trees(m);
    let batch = 4 * rayon::current_num_threads().max(1);
    let mut scanned = 0u64;
    let mut found = Vec::new();
    let mut bufs: Vec<Vec<u8>> = vec![Vec::new(); batch];
    loop {
        let mut filled = 0;
        for buf in bufs.iter_mut() {
            let c = gen.fill(buf, CHUNK);
            if c == 0 {
                break;
            }
            scanned += c as u64;
            filled += 1;
        }
        if filled == 0 {
            break;
        }
        let hits: Result<Vec<Vec<Vec<usize>>>> = bufs[..filled]
            .par_iter()
            .map_init(&init, |state, buf| {
                let mut out = Vec::new();
                for seq in buf.chunks_exact(m) {
                    if keep(state, seq)? {
                        out.push(seq.iter().map(|&x| x as usize).collect());
                    }
                }
                Ok(out)
            })
            .collect();
        found.extend(hits?.into_iter().flatten());
    }
    Ok((scanned, found))
}

/// One row per `n` in `n_min..=n_max`.
pub fn equilibrium_catalogue(n_min: usize, n_max: usize, config: &EnumerationConfig) -> Result<Vec<EquilibriumReport>> {
    (n_min..=n_max).map(|n| find_equilibria_with(n, config)).collect()
}
