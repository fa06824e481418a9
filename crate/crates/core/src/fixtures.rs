//! Hand-built trees used by tests, the acceptance suite and the CLI examples.

use crate::tree_model::RootedProfile;

/// Sixteen agents under a root of in-degree 3: one subtree of six nodes (a
/// branch node over chains of three and two) and two subtrees of five nodes
/// (a branch node over two chains of two). The leaves of the five-node
/// subtrees pay 13/5 and can move below node 6 to pay 109/42.
pub fn red_agent_tree() -> RootedProfile {
    RootedProfile::new(vec![0, 1, 2, 3, 1, 5, 0, 7, 8, 7, 10, 0, 12, 13, 12, 15]).expect("valid profile")
}

/// The red agent of [`red_agent_tree`] and its improving target node.
pub const RED_AGENT: usize = 8;
pub const RED_TARGET: usize = 6;

/// Path-game equilibrium for 16 agents: root of in-degree 2 over a branch
/// node with two chains of four and a branch node with two chains of three.
pub fn path_equilibrium_16() -> RootedProfile {
    RootedProfile::new(vec![0, 1, 2, 3, 4, 1, 6, 7, 8, 0, 10, 11, 12, 10, 14, 15]).expect("valid profile")
}

/// Path-game equilibrium for 18 agents: root of in-degree 2 over two copies
/// of a branch node with two chains of four.
pub fn path_equilibrium_18() -> RootedProfile {
    RootedProfile::new(vec![0, 1, 2, 3, 4, 1, 6, 7, 8, 0, 10, 11, 12, 13, 10, 15, 16, 17]).expect("valid profile")
}
