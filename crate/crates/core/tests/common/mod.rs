//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::io::Write;

use rdrn::domain::SimTime;
use rdrn::pnni::NodePath;
use rdrn::vnc::{Emit, LpId, MessageId, Model};

/// Writes straight to the process stdout so the line survives output
/// capture.
pub fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "[{verdict}] criterion {criterion:>2} {name}: {detail}");
}

// ---- Time Warp ----------------------------------------------------------

/// Relays a hop counter between three LPs; some hops fan out in two.
/// Every LP records what it saw, in processing order.
#[derive(Debug, Clone)]
pub struct Relay;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Hop {
    pub tag: u8,
    pub left: u8,
}

pub type RelayState = Vec<(u64, Hop)>;

pub const RELAY_LPS: u32 = 3;

fn relay_emits(lp: u32, h: Hop) -> Vec<(u32, u64, Hop)> {
    if h.left == 0 {
        return Vec::new();
    }
    let next = Hop {
        tag: h.tag,
        left: h.left - 1,
    };
    let dst = (lp + 1 + u32::from(h.tag % 2)) % RELAY_LPS;
    let delay = 1 + (u64::from(h.tag) * 3 + u64::from(h.left) * 5) % 7;
    let mut out = vec![(dst, delay, next)];
    if h.tag.is_multiple_of(3) && h.left == 2 {
        out.push((
            (dst + 1) % RELAY_LPS,
            delay + 2,
            Hop {
                tag: h.tag + 1,
                left: 0,
            },
        ));
    }
    out
}

impl Model for Relay {
    type State = RelayState;
    type Payload = Hop;

    fn handle(&self, lp: LpId, now: SimTime, s: &mut RelayState, p: &Hop) -> Vec<Emit<Hop>> {
        s.push((now.as_millis(), *p));
        relay_emits(lp.0, *p)
            .into_iter()
            .map(|(dst, delay, payload)| Emit {
                dst: Some(LpId(dst)),
                delay: SimTime::from_millis(delay),
                payload,
            })
            .collect()
    }
}

/// Sequential execution of the relay workload: one global queue ordered by
/// (receive time, message id). Returns the per-LP records and the number of
/// messages executed.
pub fn sequential_relay(injections: &[(u32, u64, Hop)]) -> (Vec<RelayState>, usize) {
    let mut states = vec![Vec::new(); RELAY_LPS as usize];
    let mut q: BinaryHeap<Reverse<(u64, MessageId, u32, Hop)>> = BinaryHeap::new();
    for (n, (lp, t, h)) in injections.iter().enumerate() {
        q.push(Reverse((*t, MessageId::root(n as u64), *lp, *h)));
    }
    let mut executed = 0;
    while let Some(Reverse((t, id, lp, h))) = q.pop() {
        executed += 1;
        states[lp as usize].push((t, h));
        for (i, (dst, delay, next)) in relay_emits(lp, h).into_iter().enumerate() {
            q.push(Reverse((t + delay, id.child(i as u32), dst, next)));
        }
    }
    (states, executed)
}

// ---- Topology -----------------------------------------------------------

fn bearing(from: (f64, f64), to: (f64, f64)) -> f64 {
    (to.0 - from.0)
        .atan2(to.1 - from.1)
        .to_degrees()
        .rem_euclid(360.0)
}

fn gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Transmitter `tx` aiming at `rx` disturbs a receiver at `victim`.
fn disturbs(tx: (f64, f64), rx: (f64, f64), victim: (f64, f64), imult: f64, twidth: f64) -> bool {
    let d = dist(tx, victim);
    d > 1e-9
        && d <= imult * dist(tx, rx) + 1e-9
        && gap(bearing(tx, rx), bearing(tx, victim)) <= twidth / 2.0 + 1e-9
}

/// Whether two bidirectional links may not share a frequency.
pub fn conflict(
    a: ((f64, f64), (f64, f64)),
    b: ((f64, f64), (f64, f64)),
    imult: f64,
    twidth: f64,
) -> bool {
    let dirs = |l: ((f64, f64), (f64, f64))| [(l.0, l.1), (l.1, l.0)];
    for (t1, r1) in dirs(a) {
        for (t2, r2) in dirs(b) {
            if disturbs(t1, r1, r2, imult, twidth) || disturbs(t2, r2, r1, imult, twidth) {
                return true;
            }
        }
    }
    false
}

pub struct TopologyInstance {
    pub points: Vec<(f64, f64)>,
    pub rlink: f64,
    pub fmax: u8,
    pub imult: f64,
    pub twidth: f64,
}

impl TopologyInstance {
    /// Node pairs within range, in index order.
    pub fn candidates(&self) -> Vec<(usize, usize)> {
        let n = self.points.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| dist(self.points[i], self.points[j]) <= self.rlink)
            .collect()
    }

    /// Exhaustive search over every labeling: the fewest-link connected,
    /// interference-free labeling, ties broken by the smallest label vector.
    pub fn brute_force(&self) -> Option<Vec<u8>> {
        let cands = self.candidates();
        let n = self.points.len();
        let mut best: Option<Vec<u8>> = None;
        let mut labels = vec![0u8; cands.len()];
        loop {
            let links = labels.iter().filter(|l| **l > 0).count();
            let improves = best
                .as_ref()
                .is_none_or(|b| links < b.iter().filter(|l| **l > 0).count());
            if improves && self.valid(&cands, &labels, n) {
                best = Some(labels.clone());
            }
            // next vector in lexicographic order
            let mut k = cands.len();
            loop {
                if k == 0 {
                    return best;
                }
                k -= 1;
                if labels[k] < self.fmax {
                    labels[k] += 1;
                    labels[k + 1..].iter_mut().for_each(|l| *l = 0);
                    break;
                }
            }
        }
    }

    fn valid(&self, cands: &[(usize, usize)], labels: &[u8], n: usize) -> bool {
        let seg = |k: usize| (self.points[cands[k].0], self.points[cands[k].1]);
        for x in 0..cands.len() {
            for y in x + 1..cands.len() {
                if labels[x] > 0
                    && labels[x] == labels[y]
                    && conflict(seg(x), seg(y), self.imult, self.twidth)
                {
                    return false;
                }
            }
        }
        // connectivity by repeated relaxation
        let mut reach = vec![false; n];
        reach[0] = true;
        let mut changed = true;
        while changed {
            changed = false;
            for (k, &(a, b)) in cands.iter().enumerate() {
                if labels[k] > 0 && reach[a] != reach[b] {
                    reach[a] = true;
                    reach[b] = true;
                    changed = true;
                }
            }
        }
        reach.iter().all(|r| *r)
    }
}

// ---- Beams --------------------------------------------------------------

/// Whether `bearings` split into at most `k` groups of at most `cap`, each
/// fitting an arc of `width` degrees. Exhaustive over group assignments.
pub fn beams_feasible(bearings: &[f64], width: f64, k: usize, cap: usize) -> bool {
    let fits = |g: &[f64]| {
        if g.len() <= 1 {
            return true;
        }
        let mut s = g.to_vec();
        s.sort_by(f64::total_cmp);
        let mut widest_gap = 360.0 - (s[s.len() - 1] - s[0]);
        for w in s.windows(2) {
            widest_gap = f64::max(widest_gap, w[1] - w[0]);
        }
        360.0 - widest_gap <= width + 1e-9
    };
    let n = bearings.len();
    if n == 0 {
        return true;
    }
    (0..(k as u64).pow(n as u32)).any(|mut code| {
        let mut groups = vec![Vec::new(); k];
        for b in bearings {
            groups[(code % k as u64) as usize].push(*b);
            code /= k as u64;
        }
        groups.iter().all(|g| g.len() <= cap && fits(g))
    })
}

pub fn within_sector(center: f64, width: f64, b: f64) -> bool {
    gap(center, b) <= width / 2.0 + 1e-9
}

pub fn compass(from: (f64, f64), to: (f64, f64)) -> f64 {
    bearing(from, to)
}

// ---- PNNI ---------------------------------------------------------------

/// Smallest peer group holding both LNs: the longest common prefix of
/// their parent groups.
pub fn scope_oracle(old: &NodePath, new: &NodePath) -> NodePath {
    let a = old.segments();
    let b = new.segments();
    let common: Vec<&str> = a[..a.len() - 1]
        .iter()
        .zip(&b[..b.len() - 1])
        .take_while(|(x, y)| x == y)
        .map(|(x, _)| x.as_str())
        .collect();
    common.join(".").parse().expect("non-empty common prefix")
}

/// Counts of something per key, for compact reporting.
pub fn tally<K: Ord>(items: impl IntoIterator<Item = K>) -> BTreeMap<K, usize> {
    let mut m = BTreeMap::new();
    for k in items {
        *m.entry(k).or_insert(0) += 1;
    }
    m
}
