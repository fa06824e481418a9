//! Improving moves, best responses, Nash verification and best-response
//! dynamics.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cost::{agent_cost, CostValue, Rational};
use crate::kernel::{with_kernel, Engine, FlatTree, Kernel, KernelChoice};
use crate::tree_model::{node_of, RootedProfile, SubtreeStats};
use crate::{Error, Result};

/// A single-edge retarget together with the deviator's costs before and after.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Deviation {
    pub agent: usize,
    pub new_choice: usize,
    pub old_cost: CostValue,
    pub new_cost: CostValue,
}

impl fmt::Display for Deviation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "agent {} (node {}) -> node {}: {} -> {}",
            self.agent,
            node_of(self.agent),
            self.new_choice,
            self.old_cost,
            self.new_cost
        )
    }
}

/// How deviation costs are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EvalMode {
    /// O(height) update of the affected path only.
    #[default]
    Incremental,
    /// Apply the move and recompute every statistic from scratch.
    FullRecompute,
}

/// Result of [`is_nash`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NashVerdict {
    pub stable: bool,
    pub witness: Option<Deviation>,
}

pub(crate) fn tree_kernel(m: usize) -> KernelChoice {
    KernelChoice::for_size(m, m as u128)
}

/// Spanning tree in flat layout plus the maps back to profile labels.
pub(crate) struct Labeled {
    pub flat: FlatTree,
    pub to_flat: Vec<usize>,
    pub to_orig: Vec<usize>,
}

impl Labeled {
    pub fn new(profile: &RootedProfile) -> Self {
        let (flat, to_flat, to_orig) = FlatTree::from_profile(profile);
        Self { flat, to_flat, to_orig }
    }
}

fn finite<K: Kernel>(k: &K, v: &K::V) -> CostValue {
    CostValue::Finite(k.to_rational(v))
}

fn brute_cost(profile: &RootedProfile, agent: usize) -> CostValue {
    agent_cost(profile, &SubtreeStats::of_profile(profile), agent)
}

fn brute_deviations(profile: &RootedProfile, agent: usize) -> Vec<Deviation> {
    let old = brute_cost(profile, agent);
    (0..profile.node_count())
        .filter(|&t| t != node_of(agent) && t != profile.target(agent))
        .filter_map(|t| {
            let new = brute_cost(&profile.with_choice(agent, t), agent);
            (new < old).then(|| Deviation { agent, new_choice: t, old_cost: old.clone(), new_cost: new })
        })
        .collect()
}

/// All strictly improving single-edge retargets of `agent`, by target index.
pub fn improving_deviations(profile: &RootedProfile, agent: usize) -> Vec<Deviation> {
    improving_deviations_with(profile, agent, EvalMode::Incremental)
}

pub fn improving_deviations_with(profile: &RootedProfile, agent: usize, mode: EvalMode) -> Vec<Deviation> {
    if mode == EvalMode::FullRecompute || !profile.is_spanning_tree() {
        return brute_deviations(profile, agent);
    }
    let lab = Labeled::new(profile);
    with_kernel!(tree_kernel(lab.flat.m()), k => tree_deviations(&k, &lab, agent))
}

fn tree_deviations<K: Kernel>(k: &K, lab: &Labeled, agent: usize) -> Vec<Deviation> {
    let mut e = Engine::new(k);
    e.prepare(&lab.flat);
    let a = lab.to_flat[node_of(agent)];
    let old = finite(k, e.node_cost(a));
    let mut out: Vec<Deviation> = e
        .improving_targets(&lab.flat, a)
        .into_iter()
        .map(|(t, c)| Deviation {
            agent,
            new_choice: lab.to_orig[t],
            old_cost: old.clone(),
            new_cost: finite(k, &c),
        })
        .collect();
    out.sort_by_key(|d| d.new_choice);
    out
}

/// A cost-minimizing target for `agent`: the current one if it attains the
/// minimum, else the smallest minimizing node index.
pub fn best_response(profile: &RootedProfile, agent: usize) -> usize {
    if !profile.is_spanning_tree() {
        let cur = profile.target(agent);
        let mut best = (cur, brute_cost(profile, agent));
        for t in 0..profile.node_count() {
            if t == node_of(agent) || t == cur {
                continue;
            }
            let c = brute_cost(&profile.with_choice(agent, t), agent);
            if c < best.1 || (c == best.1 && best.0 != cur && t < best.0) {
                best = (t, c);
            }
        }
        return best.0;
    }
    let lab = Labeled::new(profile);
    with_kernel!(tree_kernel(lab.flat.m()), k => {
        let mut e = Engine::new(&k);
        e.prepare(&lab.flat);
        let (t, _) = e.best_target(&lab.flat, lab.to_flat[node_of(agent)], |x| lab.to_orig[x]);
        lab.to_orig[t]
    })
}

/// Nash verification. The witness is the lowest-index agent with an
/// improving move, at its lowest-index improving target.
pub fn is_nash(profile: &RootedProfile) -> NashVerdict {
    is_nash_with(profile, EvalMode::Incremental)
}

pub fn is_nash_with(profile: &RootedProfile, mode: EvalMode) -> NashVerdict {
    if mode == EvalMode::Incremental && profile.is_spanning_tree() {
        let lab = Labeled::new(profile);
        return with_kernel!(tree_kernel(lab.flat.m()), k => tree_verdict(&k, &lab));
    }
    for agent in 0..profile.n() {
        if let Some(d) = brute_deviations(profile, agent).into_iter().next() {
            return NashVerdict { stable: false, witness: Some(d) };
        }
    }
    NashVerdict { stable: true, witness: None }
}

fn tree_verdict<K: Kernel>(k: &K, lab: &Labeled) -> NashVerdict {
    let mut e = Engine::new(k);
    e.prepare(&lab.flat);
    for agent in 0..lab.flat.m() - 1 {
        let a = lab.to_flat[node_of(agent)];
        let best = e.improving_targets(&lab.flat, a).into_iter().min_by_key(|(t, _)| lab.to_orig[*t]);
        if let Some((t, c)) = best {
            let witness = Deviation {
                agent,
                new_choice: lab.to_orig[t],
                old_cost: finite(k, e.node_cost(a)),
                new_cost: finite(k, &c),
            };
            return NashVerdict { stable: false, witness: Some(witness) };
        }
    }
    NashVerdict { stable: true, witness: None }
}

/// Fast yes/no stability test with early exit. Non-trees are never stable.
pub fn is_stable(profile: &RootedProfile) -> bool {
    if !profile.is_spanning_tree() {
        return false;
    }
    let lab = Labeled::new(profile);
    with_kernel!(tree_kernel(lab.flat.m()), k => {
        let mut e = Engine::new(&k);
        e.prepare(&lab.flat);
        e.is_stable(&lab.flat)
    })
}

/// Order in which agents are activated by [`run_dynamics`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// Agents `0, 1, …, n−1, 0, …`; an agent without an improving move is skipped.
    RoundRobin,
    /// A uniformly random agent among those with an improving move.
    RandomAgent,
    /// The agent whose best response saves the most; ties to the lowest index.
    MaxImprovement,
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "round-robin" => Ok(Policy::RoundRobin),
            "random-agent" => Ok(Policy::RandomAgent),
            "max-improvement" => Ok(Policy::MaxImprovement),
            other => Err(Error::InvalidPolicy(other.to_string())),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::RoundRobin => "round-robin",
            Policy::RandomAgent => "random-agent",
            Policy::MaxImprovement => "max-improvement",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OutcomeKind {
    Converged,
    CycleDetected,
    StepLimit,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DynamicsOutcome {
    pub kind: OutcomeKind,
    pub final_profile: RootedProfile,
    /// Number of improving moves made.
    pub trajectory_length: usize,
    /// Moves between the two visits of the repeated state.
    pub cycle_length: Option<usize>,
}

pub const DEFAULT_MAX_STEPS: usize = 1_000_000;

/// Best-response dynamics from `start`. Each step moves one agent to its best
/// response, and only strictly improving moves count as steps. The run stops
/// when no agent can improve, when a labeled profile repeats, or after
/// `max_steps` moves.
pub fn run_dynamics(start: &RootedProfile, policy: Policy, seed: u64, max_steps: usize) -> Result<DynamicsOutcome> {
    if let Err(e) = crate::tree_model::compute_stats(start) {
        return Err(e);
    }
    let m = start.node_count();
    with_kernel!(tree_kernel(m), k => Dynamics::new(&k, start, policy, seed).run(max_steps))
}

struct Dynamics<'k, K: Kernel> {
    kernel: &'k K,
    profile: RootedProfile,
    policy: Policy,
    rng: ChaCha8Rng,
    lab: Labeled,
    engine: Engine<'k, K>,
}

impl<'k, K: Kernel> Dynamics<'k, K> {
    fn new(kernel: &'k K, start: &RootedProfile, policy: Policy, seed: u64) -> Self {
        let lab = Labeled::new(start);
        let mut engine = Engine::new(kernel);
        engine.prepare(&lab.flat);
        Self { kernel, profile: start.clone(), policy, rng: ChaCha8Rng::seed_from_u64(seed), lab, engine }
    }

    /// Best response of `agent` if it strictly improves, with the saving.
    fn improvement(&mut self, agent: usize) -> Option<(usize, Rational)> {
        let a = self.lab.to_flat[node_of(agent)];
        let to_orig = &self.lab.to_orig;
        let (t, c) = self.engine.best_target(&self.lab.flat, a, |x| to_orig[x]);
        let cur = self.engine.node_cost(a);
        (c < *cur).then(|| (self.lab.to_orig[t], self.kernel.to_rational(cur) - self.kernel.to_rational(&c)))
    }

    fn apply(&mut self, agent: usize, target: usize) {
        self.profile = self.profile.with_choice(agent, target);
        self.lab = Labeled::new(&self.profile);
        self.engine.prepare(&self.lab.flat);
    }

    fn pick(&mut self, cursor: &mut usize) -> Option<(usize, usize)> {
        let n = self.profile.n();
        match self.policy {
            Policy::RoundRobin => {
                for _ in 0..n {
                    let agent = *cursor;
                    *cursor = (*cursor + 1) % n;
                    if let Some((t, _)) = self.improvement(agent) {
                        return Some((agent, t));
                    }
                }
                None
            }
            Policy::RandomAgent => {
                let movers: Vec<(usize, usize)> =
                    (0..n).filter_map(|a| self.improvement(a).map(|(t, _)| (a, t))).collect();
                movers.choose(&mut self.rng).copied()
            }
            Policy::MaxImprovement => {
                let mut best: Option<(usize, usize, Rational)> = None;
                for a in 0..n {
                    if let Some((t, gain)) = self.improvement(a) {
                        if best.as_ref().map_or(true, |b| gain > b.2) {
                            best = Some((a, t, gain));
                        }
                    }
                }
                best.map(|(a, t, _)| (a, t))
            }
        }
    }

    fn run(mut self, max_steps: usize) -> Result<DynamicsOutcome> {
        let key = |p: &RootedProfile| -> Vec<u32> { p.choice().iter().map(|&c| c as u32).collect() };
        let mut seen: HashMap<Vec<u32>, usize> = HashMap::new();
        seen.insert(key(&self.profile), 0);
        let mut cursor = 0;
        let mut steps = 0;
        loop {
            let Some((agent, target)) = self.pick(&mut cursor) else {
                return Ok(self.outcome(OutcomeKind::Converged, steps, None));
            };
            if steps == max_steps {
                return Ok(self.outcome(OutcomeKind::StepLimit, steps, None));
            }
            self.apply(agent, target);
            steps += 1;
            if let Some(first) = seen.insert(key(&self.profile), steps) {
                return Ok(self.outcome(OutcomeKind::CycleDetected, steps, Some(steps - first)));
            }
        }
    }

    fn outcome(self, kind: OutcomeKind, steps: usize, cycle: Option<usize>) -> DynamicsOutcome {
        DynamicsOutcome { kind, final_profile: self.profile, trajectory_length: steps, cycle_length: cycle }
    }
}

/// Uniform random recursive tree with shuffled labels: agents join in random
/// order and each attaches to the root or to an agent that joined earlier.
pub fn random_spanning_tree(n: usize, seed: u64) -> RootedProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut choice = vec![0; n];
    for (k, &agent) in order.iter().enumerate() {
        let pick = rng.gen_range(0..=k);
        choice[agent] = if pick == 0 { 0 } else { node_of(order[pick - 1]) };
    }
    RootedProfile::from_parents_unchecked(choice)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{red_agent_tree, RED_AGENT, RED_TARGET};

    fn r(p: i64, q: i64) -> CostValue {
        CostValue::Finite(Rational::new(p, q))
    }

    #[test]
    fn red_agent_move() {
        let p = red_agent_tree();
        let devs = improving_deviations(&p, RED_AGENT);
        let d = devs.iter().find(|d| d.new_choice == RED_TARGET).expect("improving move to the target");
        assert_eq!(d.old_cost, r(13, 5));
        assert_eq!(d.new_cost, r(109, 42));
        assert_eq!(best_response(&p, RED_AGENT), RED_TARGET);
    }

    #[test]
    fn red_agent_best_response_is_unique() {
        let p = red_agent_tree();
        let a = RED_AGENT;
        let costs: Vec<(usize, CostValue)> = (0..p.node_count())
            .filter(|&t| t != node_of(a))
            .map(|t| (t, brute_cost(&p.with_choice(a, t), a)))
            .collect();
        let min = costs.iter().map(|c| c.1.clone()).min().unwrap();
        let minimizers: Vec<usize> = costs.iter().filter(|c| c.1 == min).map(|c| c.0).collect();
        assert_eq!(minimizers, vec![RED_TARGET]);
        assert_eq!(min, r(109, 42));
    }

    #[test]
    fn red_agent_tree_is_rejected_with_its_witness() {
        let p = red_agent_tree();
        let v = is_nash(&p);
        assert!(!v.stable);
        let w = v.witness.unwrap();
        let slow = is_nash_with(&p, EvalMode::FullRecompute);
        assert_eq!(slow.witness.as_ref(), Some(&w));
        let first_agent = (0..p.n()).find(|&a| !improving_deviations(&p, a).is_empty()).unwrap();
        assert_eq!(w.agent, first_agent);
    }

    #[test]
    fn two_agent_star_deviation() {
        let p = RootedProfile::star(2);
        for a in 0..2 {
            let devs = improving_deviations(&p, a);
            assert_eq!(devs.len(), 1);
            assert_eq!(devs[0].new_choice, node_of(1 - a));
            assert_eq!(devs[0].old_cost, r(2, 1));
            assert_eq!(devs[0].new_cost, r(3, 2));
        }
    }

    #[test]
    fn small_instances_by_brute_force() {
        assert!(is_nash(&RootedProfile::path(2)).stable);
        assert!(!is_nash(&RootedProfile::star(3)).stable);
        assert!(!is_nash(&RootedProfile::star(2)).stable);
    }

    #[test]
    fn broken_profile_restores_finite_cost() {
        let p = RootedProfile::new(vec![2, 1, 0]).unwrap();
        assert_eq!(brute_cost(&p, 0), CostValue::Infinite);
        let t = best_response(&p, 0);
        assert!(!brute_cost(&p.with_choice(0, t), 0).is_infinite());
        assert!(!improving_deviations(&p, 0).is_empty());
        assert!(!is_nash(&p).stable);
        assert!(!is_stable(&p));
    }

    #[test]
    fn optimal_agent_keeps_choice() {
        let p = RootedProfile::path(2);
        assert_eq!(best_response(&p, 0), 0);
        assert_eq!(best_response(&p, 1), 1);
    }

    #[test]
    fn deviation_costs_reproduce_on_applied_profile() {
        let p = red_agent_tree();
        for a in 0..p.n() {
            for d in improving_deviations(&p, a) {
                assert_eq!(brute_cost(&p.with_choice(a, d.new_choice), a), d.new_cost);
                assert_eq!(brute_cost(&p, a), d.old_cost);
            }
            assert_eq!(improving_deviations(&p, a), improving_deviations_with(&p, a, EvalMode::FullRecompute));
        }
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("round-robin".parse::<Policy>().unwrap(), Policy::RoundRobin);
        assert_eq!("max-improvement".parse::<Policy>().unwrap().to_string(), "max-improvement");
        assert_eq!("sideways".parse::<Policy>(), Err(Error::InvalidPolicy("sideways".into())));
    }

    #[test]
    fn dynamics_rejects_non_tree() {
        let p = RootedProfile::new(vec![2, 1]).unwrap();
        assert!(matches!(run_dynamics(&p, Policy::RoundRobin, 0, 10), Err(Error::NotATree { .. })));
    }

    #[test]
    fn dynamics_from_star_converges_n4() {
        for policy in [Policy::RoundRobin, Policy::RandomAgent, Policy::MaxImprovement] {
            let out = run_dynamics(&RootedProfile::star(4), policy, 7, DEFAULT_MAX_STEPS).unwrap();
            assert_eq!(out.kind, OutcomeKind::Converged, "{policy}");
            assert!(is_nash(&out.final_profile).stable);
            assert!(out.trajectory_length > 0);
        }
    }

    #[test]
    fn dynamics_is_seed_deterministic() {
        let start = random_spanning_tree(10, 3);
        let a = run_dynamics(&start, Policy::RandomAgent, 11, 1000).unwrap();
        let b = run_dynamics(&start, Policy::RandomAgent, 11, 1000).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn step_limit_is_reported() {
        let out = run_dynamics(&RootedProfile::star(6), Policy::RoundRobin, 0, 1).unwrap();
        assert_eq!(out.kind, OutcomeKind::StepLimit);
        assert_eq!(out.trajectory_length, 1);
    }

    #[test]
    fn random_trees_are_spanning() {
        for seed in 0..20 {
            let t = random_spanning_tree(12, seed);
            assert!(t.is_spanning_tree());
        }
    }
}
