//! Exact cost kernels and the incremental deviation evaluator.
//!
//! Trees are handled here in a flat preorder layout: node `0` is the root,
//! every parent precedes its children and the subtree of `k` is the index
//! range `k..k + size[k]`. Costs are exact in every kernel. The scaled kernels
//! multiply every term by `L = lcm(1..=max_den)` so a cost becomes an integer.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::CheckedAdd;

use crate::cost::Rational;
use crate::tree_model::{Children, RootedProfile};

pub(crate) trait Kernel: Sync {
    type V: Clone + Ord + Send + std::fmt::Debug;

    /// Screen comparisons in `f64` first and fall back to `V` near ties.
    const FILTERED: bool = false;

    fn zero(&self) -> Self::V;
    fn term(&self, num: usize, den: usize) -> Self::V;
    fn add(&self, acc: &Self::V, x: &Self::V) -> Self::V;
    fn to_rational(&self, v: &Self::V) -> Rational;

    #[inline]
    fn add_term(&self, acc: &Self::V, num: usize, den: usize) -> Self::V {
        self.add(acc, &self.term(num, den))
    }
}

fn lcm_upto(max_den: usize) -> Option<u128> {
    let mut l: u128 = 1;
    for d in 2..=max_den as u128 {
        l = l.checked_mul(d / l.gcd(&d))?;
    }
    Some(l)
}

macro_rules! scaled_kernel {
    ($name:ident, $t:ty) => {
        pub(crate) struct $name {
            scale: $t,
            inv: Vec<$t>,
        }

        impl $name {
            /// `None` when `lcm(1..=max_den) * max_num_sum` does not fit.
            pub(crate) fn new(max_den: usize, max_num_sum: u128) -> Option<Self> {
                let l = lcm_upto(max_den.max(1))?;
                let top = l.checked_mul(max_num_sum.max(1))?;
                if top > <$t>::MAX as u128 {
                    return None;
                }
                let scale = l as $t;
                let inv = (0..=max_den).map(|d| if d == 0 { 0 } else { scale / d as $t }).collect();
                Some(Self { scale, inv })
            }
        }

        impl Kernel for $name {
            type V = $t;

            #[inline]
            fn zero(&self) -> $t {
                0
            }

            #[inline]
            fn term(&self, num: usize, den: usize) -> $t {
                num as $t * self.inv[den]
            }

            #[inline]
            fn add(&self, acc: &$t, x: &$t) -> $t {
                acc + x
            }

            fn to_rational(&self, v: &$t) -> Rational {
                Rational::new(BigInt::from(*v), BigInt::from(self.scale))
            }
        }
    };
}

scaled_kernel!(Scaled64, u64);
scaled_kernel!(Scaled128, u128);

/// Exact value that stays on `i128` until an operation would overflow.
#[derive(Clone, Debug)]
pub(crate) enum ExactVal {
    Small(Ratio<i128>),
    Big(BigRational),
}

impl ExactVal {
    fn to_big(&self) -> BigRational {
        match self {
            ExactVal::Small(r) => BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom())),
            ExactVal::Big(b) => b.clone(),
        }
    }
}

impl PartialEq for ExactVal {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for ExactVal {}

impl PartialOrd for ExactVal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExactVal {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExactVal::Small(a), ExactVal::Small(b)) => a.cmp(b),
            _ => self.to_big().cmp(&other.to_big()),
        }
    }
}

pub(crate) struct Exact;

impl Kernel for Exact {
    type V = ExactVal;
    const FILTERED: bool = true;

    fn zero(&self) -> ExactVal {
        ExactVal::Small(Ratio::from_integer(0))
    }

    fn term(&self, num: usize, den: usize) -> ExactVal {
        ExactVal::Small(Ratio::new(num as i128, den as i128))
    }

    fn add(&self, acc: &ExactVal, x: &ExactVal) -> ExactVal {
        if let (ExactVal::Small(a), ExactVal::Small(b)) = (acc, x) {
            if let Some(s) = a.checked_add(b) {
                return ExactVal::Small(s);
            }
        }
        ExactVal::Big(acc.to_big() + x.to_big())
    }

    fn to_rational(&self, v: &ExactVal) -> Rational {
        Rational::from(v.to_big())
    }
}

/// Which kernel fits a tree with `m` nodes whose cost numerators along one
/// path sum to at most `max_num_sum`.
pub(crate) enum KernelChoice {
    S64(Scaled64),
    S128(Scaled128),
    Exact(Exact),
}

impl KernelChoice {
    pub(crate) fn for_size(max_den: usize, max_num_sum: u128) -> Self {
        if let Some(k) = Scaled64::new(max_den, max_num_sum) {
            KernelChoice::S64(k)
        } else if let Some(k) = Scaled128::new(max_den, max_num_sum) {
            KernelChoice::S128(k)
        } else {
            KernelChoice::Exact(Exact)
        }
    }
}

/// Run `$body` with `$k` bound to the concrete kernel inside `$choice`.
macro_rules! with_kernel {
    ($choice:expr, $k:ident => $body:expr) => {
        match $choice {
            $crate::kernel::KernelChoice::S64($k) => $body,
            $crate::kernel::KernelChoice::S128($k) => $body,
            $crate::kernel::KernelChoice::Exact($k) => $body,
        }
    };
}
pub(crate) use with_kernel;

/// Spanning tree in preorder layout.
#[derive(Clone, Debug, Default)]
pub(crate) struct FlatTree {
    pub parent: Vec<usize>,
    pub size: Vec<usize>,
    pub indeg: Vec<usize>,
    pub depth: Vec<usize>,
    last_at_level: Vec<usize>,
}

impl FlatTree {
    pub fn m(&self) -> usize {
        self.parent.len()
    }

    /// Rebuild from a preorder level sequence (`levels[0] == 0`).
    pub fn load_levels<T: Copy + Into<usize>>(&mut self, levels: &[T]) {
        let m = levels.len();
        self.parent.clear();
        self.parent.resize(m, usize::MAX);
        self.size.clear();
        self.size.resize(m, 1);
        self.indeg.clear();
        self.indeg.resize(m, 0);
        self.depth.clear();
        self.depth.extend(levels.iter().map(|&x| x.into()));
        self.last_at_level.clear();
        self.last_at_level.resize(m + 1, 0);
        for k in 1..m {
            let lvl = self.depth[k];
            let p = self.last_at_level[lvl - 1];
            self.parent[k] = p;
            self.indeg[p] += 1;
            self.last_at_level[lvl] = k;
        }
        for k in (1..m).rev() {
            let p = self.parent[k];
            self.size[p] += self.size[k];
        }
    }

    /// Preorder layout of a spanning-tree profile, with the node maps
    /// `to_flat[orig]` and `to_orig[flat]`.
    pub fn from_profile(profile: &RootedProfile) -> (Self, Vec<usize>, Vec<usize>) {
        let children = Children::of(profile);
        let m = profile.node_count();
        let mut to_orig = Vec::with_capacity(m);
        let mut levels = Vec::with_capacity(m);
        let mut stack = vec![(0usize, 0usize)];
        while let Some((v, lvl)) = stack.pop() {
            to_orig.push(v);
            levels.push(lvl);
            for &c in children.of_node(v).iter().rev() {
                stack.push((c, lvl + 1));
            }
        }
        let mut to_flat = vec![usize::MAX; m];
        for (k, &v) in to_orig.iter().enumerate() {
            to_flat[v] = k;
        }
        let mut t = FlatTree::default();
        t.load_levels(&levels);
        (t, to_flat, to_orig)
    }
}

/// Incremental evaluator of single-edge retargets on a [`FlatTree`].
///
/// For agent `a` with parent `p` moving to `t`, only nodes on the path from
/// `t` up to the first common ancestor with `p` see a changed subtree size,
/// and only `p` loses an in-edge. Above that ancestor the old per-node cost
/// still applies.
pub(crate) struct Engine<'k, K: Kernel> {
    kernel: &'k K,
    node_cost: Vec<K::V>,
    stamp: Vec<u32>,
    epoch: u32,
    by_depth: Vec<usize>,
    full_recompute: bool,
    approx: Vec<f64>,
    /// Relative error bound of any `f64` path sum in this tree.
    tol: f64,
}

/// Outcome of comparing a deviation against the current cost in `f64`.
enum Screen {
    Worse,
    Better,
    Unsure,
}

impl<'k, K: Kernel> Engine<'k, K> {
    pub fn new(kernel: &'k K) -> Self {
        Self {
            kernel,
            node_cost: Vec::new(),
            stamp: Vec::new(),
            epoch: 0,
            by_depth: Vec::new(),
            full_recompute: false,
            approx: Vec::new(),
            tol: 0.0,
        }
    }

    /// Evaluate every deviation by rebuilding the moved tree from scratch.
    #[cfg(test)]
    pub fn full_recompute(mut self, on: bool) -> Self {
        self.full_recompute = on;
        self
    }

    pub fn prepare(&mut self, t: &FlatTree) {
        let m = t.m();
        let k = self.kernel;
        self.node_cost.clear();
        self.node_cost.reserve(m);
        self.node_cost.push(k.zero());
        for v in 1..m {
            let p = t.parent[v];
            let c = k.add_term(&self.node_cost[p], t.indeg[p], t.size[v]);
            self.node_cost.push(c);
        }
        self.stamp.clear();
        self.stamp.resize(m, 0);
        self.epoch = 0;
        let max_depth = t.depth.iter().copied().max().unwrap_or(0);
        if K::FILTERED {
            // Each term is rounded once and a path sum of at most
            // `max_depth + 1` positive terms adds one rounding per step.
            self.tol = 4.0 * (max_depth as f64 + 2.0) * f64::EPSILON;
            self.approx.clear();
            self.approx.reserve(m);
            self.approx.push(0.0);
            for v in 1..m {
                let p = t.parent[v];
                self.approx.push(self.approx[p] + t.indeg[p] as f64 / t.size[v] as f64);
            }
        }
        let mut count = vec![0usize; max_depth + 2];
        for &d in &t.depth[1..] {
            count[max_depth - d + 1] += 1;
        }
        for i in 1..count.len() {
            count[i] += count[i - 1];
        }
        self.by_depth.clear();
        self.by_depth.resize(m.saturating_sub(1), 0);
        for v in 1..m {
            let slot = &mut count[max_depth - t.depth[v]];
            self.by_depth[*slot] = v;
            *slot += 1;
        }
    }

    pub fn node_cost(&self, v: usize) -> &K::V {
        &self.node_cost[v]
    }

    fn mark_ancestors(&mut self, t: &FlatTree, p: usize) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        let mut u = p;
        loop {
            self.stamp[u] = self.epoch;
            if u == 0 {
                break;
            }
            u = t.parent[u];
        }
    }

    /// Cost of `a` after moving to `target`; `None` if pruned at `bound`.
    /// Requires the ancestors of `a`'s parent to be marked.
    #[inline]
    fn eval(&self, t: &FlatTree, a: usize, target: usize, bound: Option<&K::V>) -> Option<K::V> {
        let k = self.kernel;
        let p = t.parent[a];
        let s = t.size[a];
        let mut acc = k.term(t.indeg[target] + 1, s);
        let mut u = target;
        loop {
            if bound.is_some_and(|b| acc >= *b) {
                return None;
            }
            if self.stamp[u] == self.epoch {
                acc = k.add(&acc, &self.node_cost[u]);
                return match bound {
                    Some(b) if acc >= *b => None,
                    _ => Some(acc),
                };
            }
            let v = t.parent[u];
            let d = t.indeg[v] - usize::from(v == p);
            acc = k.add_term(&acc, d, t.size[u] + s);
            u = v;
        }
    }

    /// `f64` screen of the move of `a` to `target` against `a`'s current
    /// cost. Requires the ancestors of `a`'s parent to be marked.
    #[inline]
    fn screen(&self, t: &FlatTree, a: usize, target: usize) -> Screen {
        let p = t.parent[a];
        let s = t.size[a];
        let cur = self.approx[a];
        let hi = cur * (1.0 + 4.0 * self.tol);
        let mut acc = (t.indeg[target] + 1) as f64 / s as f64;
        let mut u = target;
        loop {
            if acc > hi {
                return Screen::Worse;
            }
            if self.stamp[u] == self.epoch {
                acc += self.approx[u];
                break;
            }
            let v = t.parent[u];
            let d = t.indeg[v] - usize::from(v == p);
            acc += d as f64 / (t.size[u] + s) as f64;
            u = v;
        }
        if acc > hi {
            Screen::Worse
        } else if acc < cur * (1.0 - 4.0 * self.tol) {
            Screen::Better
        } else {
            Screen::Unsure
        }
    }

    fn eval_full(&self, t: &FlatTree, a: usize, target: usize) -> K::V {
        let m = t.m();
        let mut parent = t.parent.clone();
        parent[a] = target;
        let mut indeg = vec![0usize; m];
        for &p in &parent[1..] {
            indeg[p] += 1;
        }
        let mut size = vec![1usize; m];
        for v in 1..m {
            let mut u = parent[v];
            loop {
                size[u] += 1;
                if u == 0 {
                    break;
                }
                u = parent[u];
            }
        }
        let k = self.kernel;
        let mut acc = k.zero();
        let mut u = a;
        while u != 0 {
            let v = parent[u];
            acc = k.add_term(&acc, indeg[v], size[u]);
            u = v;
        }
        acc
    }

    fn in_subtree(t: &FlatTree, a: usize, x: usize) -> bool {
        x >= a && x < a + t.size[a]
    }

    /// Exact post-move cost of `a` at `target`. `None` when the move would
    /// disconnect `a` (target inside its own subtree).
    pub fn deviation_cost(&mut self, t: &FlatTree, a: usize, target: usize) -> Option<K::V> {
        if Self::in_subtree(t, a, target) {
            return None;
        }
        if target == t.parent[a] {
            return Some(self.node_cost[a].clone());
        }
        if self.full_recompute {
            return Some(self.eval_full(t, a, target));
        }
        self.mark_ancestors(t, t.parent[a]);
        self.eval(t, a, target, None)
    }

    /// All strictly improving targets of `a` in ascending flat index.
    pub fn improving_targets(&mut self, t: &FlatTree, a: usize) -> Vec<(usize, K::V)> {
        let p = t.parent[a];
        let cur = self.node_cost[a].clone();
        self.mark_ancestors(t, p);
        let mut out = Vec::new();
        for target in 0..t.m() {
            if target == p || Self::in_subtree(t, a, target) {
                continue;
            }
            let c = if self.full_recompute {
                Some(self.eval_full(t, a, target)).filter(|c| *c < cur)
            } else if K::FILTERED && matches!(self.screen(t, a, target), Screen::Worse) {
                None
            } else {
                self.eval(t, a, target, Some(&cur))
            };
            if let Some(c) = c {
                out.push((target, c));
            }
        }
        out
    }

    fn has_improving(&mut self, t: &FlatTree, a: usize) -> bool {
        let p = t.parent[a];
        let cur = self.node_cost[a].clone();
        self.mark_ancestors(t, p);
        let (lo, hi) = (a, a + t.size[a]);
        (0..lo).chain(hi..t.m()).any(|target| {
            if target == p {
                return false;
            }
            if K::FILTERED {
                match self.screen(t, a, target) {
                    Screen::Worse => return false,
                    Screen::Better => return true,
                    Screen::Unsure => {}
                }
            }
            self.eval(t, a, target, Some(&cur)).is_some()
        })
    }

    /// True iff no agent has an improving move. Deepest agents first, stop at
    /// the first deviator.
    pub fn is_stable(&mut self, t: &FlatTree) -> bool {
        let order = std::mem::take(&mut self.by_depth);
        let stable = if self.full_recompute {
            order.iter().all(|&a| self.improving_targets(t, a).is_empty())
        } else {
            order.iter().all(|&a| !self.has_improving(t, a))
        };
        self.by_depth = order;
        stable
    }

    /// Minimal post-move cost over all targets, ties to the current parent
    /// and then to the smallest index under `rank`.
    pub fn best_target(&mut self, t: &FlatTree, a: usize, rank: impl Fn(usize) -> usize) -> (usize, K::V) {
        let p = t.parent[a];
        let mut best = (p, self.node_cost[a].clone());
        self.mark_ancestors(t, p);
        for target in 0..t.m() {
            if target == p || Self::in_subtree(t, a, target) {
                continue;
            }
            let c = if self.full_recompute { self.eval_full(t, a, target) } else { self.eval(t, a, target, None).expect("unbounded") };
            let better = match c.cmp(&best.1) {
                Ordering::Less => true,
                Ordering::Equal => best.0 != p && rank(target) < rank(best.0),
                Ordering::Greater => false,
            };
            if better {
                best = (target, c);
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{all_costs, CostValue};
    use crate::fixtures::red_agent_tree;
    use crate::tree_model::compute_stats;

    #[test]
    fn scaled_kernels_agree_with_exact() {
        let k64 = Scaled64::new(12, 12).unwrap();
        let k128 = Scaled128::new(12, 12).unwrap();
        let terms = [(3, 5), (2, 2), (1, 1), (7, 11)];
        let mut a = k64.zero();
        let mut b = k128.zero();
        let mut c = Exact.zero();
        for (n, d) in terms {
            a = k64.add_term(&a, n, d);
            b = k128.add_term(&b, n, d);
            c = Exact.add_term(&c, n, d);
        }
        let want = Rational::new(3 * 11 + 55 + 55 + 7 * 5, 55);
        assert_eq!(k64.to_rational(&a), want);
        assert_eq!(k128.to_rational(&b), want);
        assert_eq!(Exact.to_rational(&c), want);
    }

    #[test]
    fn kernel_choice_escalates() {
        assert!(matches!(KernelChoice::for_size(20, 20), KernelChoice::S64(_)));
        assert!(matches!(KernelChoice::for_size(60, 60), KernelChoice::S128(_)));
        assert!(matches!(KernelChoice::for_size(500, 500), KernelChoice::Exact(_)));
    }

    #[test]
    fn exact_overflows_into_bigint() {
        let mut acc = Exact.zero();
        for d in [1_000_003usize, 1_000_033, 1_000_037, 1_000_039, 1_000_081, 1_000_099, 1_000_117] {
            acc = Exact.add_term(&acc, 1, d);
        }
        assert!(matches!(acc, ExactVal::Big(_)));
        let small = Exact.term(1, 2);
        assert!(small > acc);
    }

    #[test]
    fn flat_layout_matches_node_costs() {
        let p = red_agent_tree();
        let stats = compute_stats(&p).unwrap();
        let costs = all_costs(&p, &stats);
        let (t, to_flat, _) = FlatTree::from_profile(&p);
        let k = Scaled64::new(t.m(), t.m() as u128).unwrap();
        let mut e = Engine::new(&k);
        e.prepare(&t);
        for (a, c) in costs.iter().enumerate() {
            let f = to_flat[a + 1];
            assert_eq!(&CostValue::Finite(k.to_rational(e.node_cost(f))), c);
        }
    }

    #[test]
    fn incremental_equals_full_recompute() {
        let p = red_agent_tree();
        let (t, _, _) = FlatTree::from_profile(&p);
        let k = Exact;
        let mut inc = Engine::new(&k);
        inc.prepare(&t);
        let mut full = Engine::new(&k).full_recompute(true);
        full.prepare(&t);
        for a in 1..t.m() {
            for target in 0..t.m() {
                assert_eq!(inc.deviation_cost(&t, a, target), full.deviation_cost(&t, a, target), "a={a} t={target}");
            }
            assert_eq!(inc.improving_targets(&t, a), full.improving_targets(&t, a));
        }
        assert!(!inc.is_stable(&t));
        assert!(!full.is_stable(&t));
    }

    #[test]
    fn filtered_exact_agrees_with_scaled() {
        let exact = Exact;
        let scaled = Scaled64::new(8, 8).unwrap();
        for levels in crate::enumeration::enumerate_rooted_trees(8) {
            let mut t = FlatTree::default();
            t.load_levels(&levels);
            let mut e = Engine::new(&exact);
            e.prepare(&t);
            let mut s = Engine::new(&scaled);
            s.prepare(&t);
            assert_eq!(e.is_stable(&t), s.is_stable(&t), "{levels:?}");
            for a in 1..t.m() {
                let ex: Vec<usize> = e.improving_targets(&t, a).into_iter().map(|x| x.0).collect();
                let sc: Vec<usize> = s.improving_targets(&t, a).into_iter().map(|x| x.0).collect();
                assert_eq!(ex, sc, "{levels:?} a={a}");
            }
        }
    }
}
