use rand::seq::IndexedRandom;
use rand::Rng;

use super::tree::{NodePath, PeerGroupTree};

/// Shape parameters for [`random_hierarchy`].
#[derive(Debug, Clone, PartialEq)]
pub struct RandomHierarchy {
    pub top_groups: (usize, usize),
    pub members: (usize, usize),
    /// Chance that a top-level group is split into subgroups.
    pub split_probability: f64,
    /// Chance of each extra link between two members of one group.
    pub chord_probability: f64,
    /// Extra links between sibling groups beyond a spanning tree.
    pub extra_links: usize,
}

impl Default for RandomHierarchy {
    fn default() -> Self {
        RandomHierarchy {
            top_groups: (2, 4),
            members: (2, 4),
            split_probability: 0.3,
            chord_probability: 0.3,
            extra_links: 2,
        }
    }
}

/// A connected hierarchy rooted at `A`, two or three levels deep.
pub fn random_hierarchy<R: Rng + ?Sized>(rng: &mut R, shape: &RandomHierarchy) -> PeerGroupTree {
    let root: NodePath = "A".parse().expect("valid");
    let mut t = PeerGroupTree::new();
    let groups = rng.random_range(shape.top_groups.0..=shape.top_groups.1);
    let mut tops: Vec<Vec<NodePath>> = Vec::new();
    for g in 1..=groups {
        let pg = root.child(g.to_string());
        let mut members = Vec::new();
        if rng.random_bool(shape.split_probability) {
            let subs: Vec<Vec<NodePath>> = (1..=2)
                .map(|s| build_group(rng, &mut t, &pg.child(s.to_string()), shape))
                .collect();
            connect_groups(rng, &mut t, &subs, 1);
            members.extend(subs.into_iter().flatten());
        } else {
            members = build_group(rng, &mut t, &pg, shape);
        }
        tops.push(members);
    }
    connect_groups(rng, &mut t, &tops, shape.extra_links);
    t
}

/// LNs of one lowest-level group, joined in a chain plus random chords.
fn build_group<R: Rng + ?Sized>(
    rng: &mut R,
    t: &mut PeerGroupTree,
    pg: &NodePath,
    shape: &RandomHierarchy,
) -> Vec<NodePath> {
    let n = rng.random_range(shape.members.0..=shape.members.1);
    let lns: Vec<NodePath> = (1..=n).map(|i| pg.child(i.to_string())).collect();
    for ln in &lns {
        t.add_node(ln.clone()).expect("fresh name");
    }
    for w in lns.windows(2) {
        t.add_link(&w[0], &w[1]).expect("known");
    }
    for i in 0..n {
        for j in i + 2..n {
            if rng.random_bool(shape.chord_probability) {
                t.add_link(&lns[i], &lns[j]).expect("known");
            }
        }
    }
    lns
}

/// Random spanning tree over the groups plus `extra` random links.
fn connect_groups<R: Rng + ?Sized>(
    rng: &mut R,
    t: &mut PeerGroupTree,
    groups: &[Vec<NodePath>],
    extra: usize,
) {
    for g in 1..groups.len() {
        let other = rng.random_range(0..g);
        let a = groups[g].choose(rng).expect("non-empty");
        let b = groups[other].choose(rng).expect("non-empty");
        t.add_link(a, b).expect("known");
    }
    if groups.len() < 2 {
        return;
    }
    for _ in 0..extra {
        let g = rng.random_range(0..groups.len());
        let h = (g + rng.random_range(1..groups.len())) % groups.len();
        let a = groups[g].choose(rng).expect("non-empty");
        let b = groups[h].choose(rng).expect("non-empty");
        t.add_link(a, b).expect("known");
    }
}
