use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use super::PnniError;

/// Dotted hierarchical name. A node's peer group is its parent path.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodePath(Vec<String>);

impl NodePath {
    pub fn segments(&self) -> &[String] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn parent(&self) -> Option<NodePath> {
        (self.0.len() > 1).then(|| NodePath(self.0[..self.0.len() - 1].to_vec()))
    }

    /// Whether `self` is `other` or one of its ancestors.
    pub fn encloses(&self, other: &NodePath) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    pub fn child(&self, seg: impl Into<String>) -> NodePath {
        let mut v = self.0.clone();
        v.push(seg.into());
        NodePath(v)
    }

    fn common_prefix(&self, other: &NodePath) -> NodePath {
        NodePath(
            self.0
                .iter()
                .zip(&other.0)
                .take_while(|(a, b)| a == b)
                .map(|(a, _)| a.clone())
                .collect(),
        )
    }
}

impl FromStr for NodePath {
    type Err = PnniError;

    fn from_str(s: &str) -> Result<Self, PnniError> {
        let segs: Vec<String> = s.split('.').map(str::to_string).collect();
        if segs
            .iter()
            .any(|x| x.is_empty() || !x.chars().all(|c| c.is_ascii_alphanumeric()))
        {
            return Err(PnniError::BadName(s.to_string()));
        }
        Ok(NodePath(segs))
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join("."))
    }
}

/// LNs, the peer groups implied by their names, and undirected logical
/// links between LNs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PeerGroupTree {
    nodes: BTreeSet<NodePath>,
    groups: BTreeSet<NodePath>,
    leaders: BTreeMap<NodePath, NodePath>,
    adj: BTreeMap<NodePath, BTreeSet<NodePath>>,
}

impl PeerGroupTree {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a tree from LN names and links written as name pairs.
    pub fn from_names(nodes: &[&str], links: &[(&str, &str)]) -> Result<Self, PnniError> {
        let mut t = PeerGroupTree::new();
        for n in nodes {
            t.add_node(n.parse()?)?;
        }
        for (a, b) in links {
            t.add_link(&a.parse()?, &b.parse()?)?;
        }
        Ok(t)
    }

    pub fn add_node(&mut self, ln: NodePath) -> Result<(), PnniError> {
        if ln.depth() < 2 {
            return Err(PnniError::BadName(ln.to_string()));
        }
        if self.groups.contains(&ln) {
            return Err(PnniError::NodeIsGroup(ln));
        }
        let mut p = ln.parent();
        while let Some(g) = p {
            if self.nodes.contains(&g) {
                return Err(PnniError::NodeIsGroup(g));
            }
            p = g.parent();
            self.groups.insert(g);
        }
        self.adj.entry(ln.clone()).or_default();
        self.nodes.insert(ln);
        Ok(())
    }

    pub fn add_link(&mut self, a: &NodePath, b: &NodePath) -> Result<(), PnniError> {
        for n in [a, b] {
            if !self.nodes.contains(n) {
                return Err(PnniError::UnknownNode(n.clone()));
            }
        }
        if a != b {
            self.adj.get_mut(a).expect("node").insert(b.clone());
            self.adj.get_mut(b).expect("node").insert(a.clone());
        }
        Ok(())
    }

    pub fn contains_node(&self, ln: &NodePath) -> bool {
        self.nodes.contains(ln)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodePath> {
        self.nodes.iter()
    }

    pub fn groups(&self) -> impl Iterator<Item = &NodePath> {
        self.groups.iter()
    }

    pub fn neighbors(&self, ln: &NodePath) -> impl Iterator<Item = &NodePath> {
        self.adj.get(ln).into_iter().flatten()
    }

    pub fn has_link(&self, a: &NodePath, b: &NodePath) -> bool {
        self.adj.get(a).is_some_and(|s| s.contains(b))
    }

    pub fn links(&self) -> impl Iterator<Item = (&NodePath, &NodePath)> {
        self.adj
            .iter()
            .flat_map(|(a, s)| s.iter().filter(move |b| a < *b).map(move |b| (a, b)))
    }

    /// LNs enclosed by `pg`.
    pub fn members<'a>(&'a self, pg: &'a NodePath) -> impl Iterator<Item = &'a NodePath> + 'a {
        self.nodes.iter().filter(move |n| pg.encloses(n))
    }

    /// Lowest-level peer group of an LN.
    pub fn lowest_group(&self, ln: &NodePath) -> Result<NodePath, PnniError> {
        if !self.nodes.contains(ln) {
            return Err(PnniError::UnknownNode(ln.clone()));
        }
        Ok(ln.parent().expect("depth ≥ 2"))
    }

    /// Members of `pg` with a link leaving it.
    pub fn border_nodes(&self, pg: &NodePath) -> Vec<NodePath> {
        self.members(pg)
            .filter(|n| self.neighbors(n).any(|m| !pg.encloses(m)))
            .cloned()
            .collect()
    }

    pub fn set_leader(&mut self, pg: &NodePath, ln: &NodePath) -> Result<(), PnniError> {
        if !self.nodes.contains(ln) || !pg.encloses(ln) {
            return Err(PnniError::UnknownNode(ln.clone()));
        }
        self.leaders.insert(pg.clone(), ln.clone());
        Ok(())
    }

    /// Elected leader of `pg`, defaulting to its smallest member.
    pub fn leader(&self, pg: &NodePath) -> Option<NodePath> {
        self.leaders
            .get(pg)
            .cloned()
            .or_else(|| self.members(pg).next().cloned())
    }

    /// Smallest peer group enclosing both LNs.
    pub fn handoff_scope(&self, old: &NodePath, new: &NodePath) -> Result<NodePath, PnniError> {
        let a = self.lowest_group(old)?;
        let b = self.lowest_group(new)?;
        let c = a.common_prefix(&b);
        if c.depth() == 0 {
            return Err(PnniError::Disjoint {
                a: old.clone(),
                b: new.clone(),
            });
        }
        Ok(c)
    }

    /// Fewest-hop path between two LNs using only LNs inside `scope`.
    pub fn shortest_path(
        &self,
        from: &NodePath,
        to: &NodePath,
        scope: &NodePath,
    ) -> Option<Vec<NodePath>> {
        let mut prev: BTreeMap<NodePath, NodePath> = BTreeMap::new();
        let mut seen = BTreeSet::from([from.clone()]);
        let mut q = VecDeque::from([from.clone()]);
        while let Some(n) = q.pop_front() {
            if n == *to {
                let mut path = vec![n];
                while let Some(p) = prev.get(path.last().expect("non-empty")) {
                    path.push(p.clone());
                }
                path.reverse();
                return Some(path);
            }
            for m in self.neighbors(&n) {
                if scope.encloses(m) && seen.insert(m.clone()) {
                    prev.insert(m.clone(), n.clone());
                    q.push_back(m.clone());
                }
            }
        }
        None
    }
}

/// Handoff scope of two LNs.
pub fn handoff_scope(
    old: &NodePath,
    new: &NodePath,
    tree: &PeerGroupTree,
) -> Result<NodePath, PnniError> {
    tree.handoff_scope(old, new)
}
