use std::fmt;

use thiserror::Error;

use super::interference::links_conflict;
use super::BeamConstraints;
use crate::domain::{Callsign, FrequencyId, GeoPosition, SwitchPositionTable, TopologyLink};

#[derive(Debug, Clone, PartialEq)]
pub struct TopologySolution {
    /// Nodes in callsign order.
    pub nodes: Vec<(Callsign, GeoPosition)>,
    /// Links with `a < b`, in candidate order.
    pub links: Vec<TopologyLink>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Infeasible {
    /// Some ES is beyond `rlink` of every possible chain to the rest.
    Disconnected,
    /// Connectivity is geometrically possible but every connected
    /// labeling reuses a frequency on interfering links.
    FrequencyExhausted,
}

impl fmt::Display for Infeasible {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Infeasible::Disconnected => {
                f.write_str("ES set is disconnected beyond the maximum link distance")
            }
            Infeasible::FrequencyExhausted => {
                f.write_str("no interference-free frequency labeling connects the ESs")
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("topology needs at least one ES")]
    Empty,
    #[error("invalid position for {0}")]
    BadPosition(Callsign),
    #[error("infeasible: {0}")]
    Infeasible(Infeasible),
}

/// Reasons a solution breaks its invariants.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("link {0}-{1} is longer than rlink")]
    TooLong(Callsign, Callsign),
    #[error("link {0}-{1} names an unknown node")]
    UnknownNode(Callsign, Callsign),
    #[error("frequency {0} outside 1..=fmax")]
    Frequency(FrequencyId),
    #[error("links {0}-{1} and {2}-{3} interfere on one frequency")]
    Interference(Callsign, Callsign, Callsign, Callsign),
    #[error("link graph is not connected")]
    NotConnected,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveStats {
    /// Candidate links (pairs within rlink).
    pub candidates: usize,
    /// Labels tried by the search.
    pub steps: u64,
}

impl TopologySolution {
    fn position(&self, c: &Callsign) -> Option<GeoPosition> {
        self.nodes.iter().find(|(n, _)| n == c).map(|(_, p)| *p)
    }

    /// Re-checks every invariant independently of the search.
    pub fn validate(&self, c: &BeamConstraints) -> Result<(), Violation> {
        let mut ends = Vec::with_capacity(self.links.len());
        for l in &self.links {
            let (Some(pa), Some(pb)) = (self.position(&l.a), self.position(&l.b)) else {
                return Err(Violation::UnknownNode(l.a.clone(), l.b.clone()));
            };
            if pa.distance_to(&pb) > c.rlink {
                return Err(Violation::TooLong(l.a.clone(), l.b.clone()));
            }
            if l.frequency.0 < 1 || l.frequency.0 > c.fmax {
                return Err(Violation::Frequency(l.frequency));
            }
            ends.push((pa, pb));
        }
        for i in 0..self.links.len() {
            for j in i + 1..self.links.len() {
                if self.links[i].frequency == self.links[j].frequency
                    && links_conflict(ends[i], ends[j], c)
                {
                    let (x, y) = (&self.links[i], &self.links[j]);
                    return Err(Violation::Interference(
                        x.a.clone(),
                        x.b.clone(),
                        y.a.clone(),
                        y.b.clone(),
                    ));
                }
            }
        }
        let index = |cs: &Callsign| {
            self.nodes
                .iter()
                .position(|(n, _)| n == cs)
                .expect("checked above")
        };
        let pairs: Vec<(usize, usize)> = self
            .links
            .iter()
            .map(|l| (index(&l.a), index(&l.b)))
            .collect();
        if !connected(self.nodes.len(), pairs) {
            return Err(Violation::NotConnected);
        }
        Ok(())
    }

    /// Plain-text dump, one `node` or `link` record per line.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (c, p) in &self.nodes {
            s.push_str(&format!("node {c} {:.3} {:.3}\n", p.x, p.y));
        }
        for l in &self.links {
            s.push_str(&format!("link {} {} {}\n", l.a, l.b, l.frequency));
        }
        s
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra] = rb;
        true
    }
}

fn connected(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> bool {
    if n <= 1 {
        return true;
    }
    let mut uf = UnionFind::new(n);
    let mut comps = n;
    for (a, b) in edges {
        if uf.union(a, b) {
            comps -= 1;
        }
    }
    comps == 1
}

struct Problem {
    n: usize,
    fmax: u8,
    /// Candidate links as node-index pairs.
    cands: Vec<(usize, usize)>,
    conflict: Vec<Vec<bool>>,
}

fn build(
    positions: &SwitchPositionTable,
    c: &BeamConstraints,
) -> Result<(Vec<(Callsign, GeoPosition)>, Problem), TopologyError> {
    if positions.is_empty() {
        return Err(TopologyError::Empty);
    }
    let nodes: Vec<(Callsign, GeoPosition)> = positions
        .iter()
        .map(|(c, e)| (c.clone(), e.position))
        .collect();
    if let Some((c, _)) = nodes.iter().find(|(_, p)| !p.is_finite()) {
        return Err(TopologyError::BadPosition(c.clone()));
    }
    let mut cands = Vec::new();
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            if nodes[i].1.distance_to(&nodes[j].1) <= c.rlink {
                cands.push((i, j));
            }
        }
    }
    let r = cands.len();
    let mut conflict = vec![vec![false; r]; r];
    for x in 0..r {
        for y in x + 1..r {
            let (a, b) = cands[x];
            let (p, q) = cands[y];
            let hit = links_conflict((nodes[a].1, nodes[b].1), (nodes[p].1, nodes[q].1), c);
            conflict[x][y] = hit;
            conflict[y][x] = hit;
        }
    }
    Ok((
        nodes.clone(),
        Problem {
            n: nodes.len(),
            fmax: c.fmax,
            cands,
            conflict,
        },
    ))
}

struct Search<'a> {
    p: &'a Problem,
    target: usize,
    labels: Vec<u8>,
    steps: u64,
}

impl Search<'_> {
    /// Depth-first in lexicographic label order; the first complete
    /// labeling found is therefore the smallest with `target` links.
    fn run(&mut self, i: usize, used: usize) -> bool {
        let r = self.p.cands.len();
        if used > self.target || used + (r - i) < self.target {
            return false;
        }
        if !self.can_still_connect(i) {
            return false;
        }
        if i == r {
            return used == self.target;
        }
        for label in 0..=self.p.fmax {
            self.steps += 1;
            if label > 0 && self.clashes(i, label) {
                continue;
            }
            self.labels[i] = label;
            if self.run(i + 1, used + (label > 0) as usize) {
                return true;
            }
        }
        self.labels[i] = 0;
        false
    }

    fn clashes(&self, i: usize, label: u8) -> bool {
        (0..i).any(|j| self.labels[j] == label && self.p.conflict[i][j])
    }

    // Chosen links so far plus every undecided candidate must connect.
    fn can_still_connect(&self, i: usize) -> bool {
        let chosen = (0..i)
            .filter(|&j| self.labels[j] > 0)
            .map(|j| self.p.cands[j]);
        let open = self.p.cands[i..].iter().copied();
        connected(self.p.n, chosen.chain(open))
    }
}

/// Finds the preferred interference-free connected labeling.
pub fn solve_topology(
    positions: &SwitchPositionTable,
    c: &BeamConstraints,
) -> Result<(TopologySolution, SolveStats), TopologyError> {
    let (nodes, p) = build(positions, c)?;
    let mut stats = SolveStats {
        candidates: p.cands.len(),
        steps: 0,
    };
    if !connected(p.n, p.cands.iter().copied()) {
        return Err(TopologyError::Infeasible(Infeasible::Disconnected));
    }
    for target in p.n - 1..=p.cands.len() {
        let mut s = Search {
            p: &p,
            target,
            labels: vec![0; p.cands.len()],
            steps: 0,
        };
        let found = s.run(0, 0);
        stats.steps += s.steps;
        if found {
            let links = s
                .labels
                .iter()
                .enumerate()
                .filter(|(_, &l)| l > 0)
                .map(|(k, &l)| {
                    let (a, b) = p.cands[k];
                    TopologyLink {
                        a: nodes[a].0.clone(),
                        b: nodes[b].0.clone(),
                        frequency: FrequencyId(l),
                    }
                })
                .collect();
            return Ok((TopologySolution { nodes, links }, stats));
        }
    }
    Err(TopologyError::Infeasible(Infeasible::FrequencyExhausted))
}

/// Shortcut used when full topology search is disabled: a minimum
/// spanning tree over candidate links, each labeled with the lowest
/// frequency that avoids conflicts with earlier tree links (or f1 when
/// none does, so the result may violate interference constraints).
pub fn nearest_neighbor_topology(
    positions: &SwitchPositionTable,
    c: &BeamConstraints,
) -> Result<TopologySolution, TopologyError> {
    let (nodes, p) = build(positions, c)?;
    let mut order: Vec<usize> = (0..p.cands.len()).collect();
    let len = |k: usize| {
        let (a, b) = p.cands[k];
        nodes[a].1.distance_to(&nodes[b].1)
    };
    order.sort_by(|&x, &y| len(x).total_cmp(&len(y)).then(x.cmp(&y)));
    let mut uf = UnionFind::new(p.n);
    let mut chosen: Vec<(usize, u8)> = Vec::new();
    for k in order {
        let (a, b) = p.cands[k];
        if uf.union(a, b) {
            let f = (1..=p.fmax)
                .find(|&f| chosen.iter().all(|&(j, g)| g != f || !p.conflict[k][j]))
                .unwrap_or(1);
            chosen.push((k, f));
        }
    }
    if chosen.len() + 1 < p.n {
        return Err(TopologyError::Infeasible(Infeasible::Disconnected));
    }
    chosen.sort();
    let links = chosen
        .into_iter()
        .map(|(k, f)| {
            let (a, b) = p.cands[k];
            TopologyLink {
                a: nodes[a].0.clone(),
                b: nodes[b].0.clone(),
                frequency: FrequencyId(f),
            }
        })
        .collect();
    Ok(TopologySolution { nodes, links })
}
