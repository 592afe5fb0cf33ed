//! Fabricated augmentation operators A0–A5.
//!
//! Vertex-dropping operators (A3, A5) mask vertices instead of deleting
//! them: the vertex keeps its row, loses its incidences and gets a zero
//! feature row, so node-level contrast between two views stays aligned.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hypergraph::{Hypergraph, Incidence};
use crate::math;
use crate::seed;

pub const DEFAULT_RATIO: f64 = 0.2;
pub const DEFAULT_RETAIN: f64 = 0.8;

/// One fabricated augmentation operator and its parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AugmentationSpec {
    /// A0
    Identity,
    /// A1: drop each hyperedge with probability `p`.
    HyperedgeRemoval(f64),
    /// A2: drop each incidence pair with probability `p`.
    IncidenceRemoval(f64),
    /// A3: mask each vertex with probability `p`.
    VertexDrop(f64),
    /// A4: zero each feature entry with probability `p`.
    AttributeMask(f64),
    /// A5: keep the vertices reached by a random walk covering this fraction.
    Subgraph(f64),
}

impl AugmentationSpec {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Identity => "A0",
            Self::HyperedgeRemoval(_) => "A1",
            Self::IncidenceRemoval(_) => "A2",
            Self::VertexDrop(_) => "A3",
            Self::AttributeMask(_) => "A4",
            Self::Subgraph(_) => "A5",
        }
    }

    pub fn ratio(&self) -> Option<f64> {
        match *self {
            Self::Identity => None,
            Self::HyperedgeRemoval(p)
            | Self::IncidenceRemoval(p)
            | Self::VertexDrop(p)
            | Self::AttributeMask(p)
            | Self::Subgraph(p) => Some(p),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Subgraph(r) if !(r > 0.0 && r <= 1.0) => {
                Err(invalid(format!("A5 retain fraction must lie in (0, 1], got {r}")))
            }
            s => match s.ratio() {
                Some(p) if !(0.0..=1.0).contains(&p) => {
                    Err(invalid(format!("{} ratio must lie in [0, 1], got {p}", s.code())))
                }
                _ => Ok(()),
            },
        }
    }

    pub fn apply(&self, h: &Hypergraph, seed: u64) -> Result<Hypergraph> {
        self.validate()?;
        match *self {
            Self::Identity => Ok(a0_identity(h)),
            Self::HyperedgeRemoval(p) => a1_hyperedge_removal(h, p, seed),
            Self::IncidenceRemoval(p) => a2_incidence_removal(h, p, seed),
            Self::VertexDrop(p) => a3_vertex_drop(h, p, seed),
            Self::AttributeMask(p) => a4_attr_mask(h, p, seed),
            Self::Subgraph(r) => a5_subgraph(h, r, seed),
        }
    }
}

impl fmt::Display for AugmentationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.ratio() {
            Some(p) => write!(f, "{}:{}", self.code(), p),
            None => f.write_str(self.code()),
        }
    }
}

impl FromStr for AugmentationSpec {
    type Err = Error;

    /// Parses `"A0"`, `"A2"` (default ratio) or `"A2:0.3"`.
    fn from_str(s: &str) -> Result<Self> {
        let (code, arg) = match s.split_once(':') {
            Some((c, a)) => (c.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let ratio = |default: f64| -> Result<f64> {
            match arg {
                None => Ok(default),
                Some(a) => a.parse::<f64>().map_err(|_| invalid(format!("bad ratio in `{s}`"))),
            }
        };
        let spec = match code.to_ascii_uppercase().as_str() {
            "A0" if arg.is_none() => Self::Identity,
            "A1" => Self::HyperedgeRemoval(ratio(DEFAULT_RATIO)?),
            "A2" => Self::IncidenceRemoval(ratio(DEFAULT_RATIO)?),
            "A3" => Self::VertexDrop(ratio(DEFAULT_RATIO)?),
            "A4" => Self::AttributeMask(ratio(DEFAULT_RATIO)?),
            "A5" => Self::Subgraph(ratio(DEFAULT_RETAIN)?),
            _ => return Err(invalid(format!("unknown augmentation `{s}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl TryFrom<String> for AugmentationSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<AugmentationSpec> for String {
    fn from(s: AugmentationSpec) -> String {
        s.to_string()
    }
}

fn check_ratio(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(format!("augmentation ratio must lie in [0, 1], got {p}")))
    }
}

/// Keeps the incidences selected by `keep`, carrying weights along.
fn filter_incidences(
    h: &Hypergraph,
    mut keep: impl FnMut(usize, &Incidence) -> bool,
) -> (Vec<Incidence>, Option<Vec<f64>>) {
    let mut incs = Vec::new();
    let mut weights = h.incidence_weights().map(|_| Vec::new());
    for (k, inc) in h.incidences().iter().enumerate() {
        if keep(k, inc) {
            incs.push(*inc);
            if let (Some(w), Some(src)) = (weights.as_mut(), h.incidence_weights()) {
                w.push(src[k]);
            }
        }
    }
    (incs, weights)
}

/// Zeroes the feature rows of vertices flagged in `masked` and removes
/// their incidences.
fn mask_vertices(h: &Hypergraph, masked: &[bool]) -> Result<Hypergraph> {
    let (incs, weights) = filter_incidences(h, |_, inc| !masked[inc.vertex]);
    let mut features = h.features().clone();
    let f = h.num_features();
    for (v, _) in masked.iter().enumerate().filter(|(_, m)| **m) {
        features.data_mut()[v * f..(v + 1) * f].iter_mut().for_each(|x| *x = 0.0);
    }
    h.rebuild(incs, weights, features)
}

pub fn a0_identity(h: &Hypergraph) -> Hypergraph {
    h.clone()
}

pub fn a1_hyperedge_removal(h: &Hypergraph, p: f64, seed: u64) -> Result<Hypergraph> {
    check_ratio(p)?;
    let mut rng = seed::plain(seed);
    let removed: Vec<bool> = (0..h.num_hyperedges()).map(|_| rng.random_bool(p)).collect();
    let (incs, weights) = filter_incidences(h, |_, inc| !removed[inc.hyperedge]);
    h.rebuild(incs, weights, h.features().clone())
}

pub fn a2_incidence_removal(h: &Hypergraph, p: f64, seed: u64) -> Result<Hypergraph> {
    check_ratio(p)?;
    let mut rng = seed::plain(seed);
    let removed: Vec<bool> = (0..h.incidences().len()).map(|_| rng.random_bool(p)).collect();
    let (incs, weights) = filter_incidences(h, |k, _| !removed[k]);
    h.rebuild(incs, weights, h.features().clone())
}

pub fn a3_vertex_drop(h: &Hypergraph, p: f64, seed: u64) -> Result<Hypergraph> {
    check_ratio(p)?;
    let mut rng = seed::plain(seed);
    let masked: Vec<bool> = (0..h.num_vertices()).map(|_| rng.random_bool(p)).collect();
    mask_vertices(h, &masked)
}

pub fn a4_attr_mask(h: &Hypergraph, p: f64, seed: u64) -> Result<Hypergraph> {
    check_ratio(p)?;
    let mut rng = seed::plain(seed);
    let mut features = h.features().clone();
    for x in features.data_mut() {
        if rng.random_bool(p) {
            *x = 0.0;
        }
    }
    h.clone().with_features(features)
}

/// Random-walk subgraph on the bipartite view.
///
/// The walk alternates vertex → incident hyperedge → member vertex, both
/// chosen uniformly, until `ceil(retain_frac·|V|)` distinct vertices are
/// visited. Once every vertex of the current connected component has been
/// visited it restarts from a uniformly chosen unvisited vertex.
pub fn a5_subgraph(h: &Hypergraph, retain_frac: f64, seed: u64) -> Result<Hypergraph> {
    if !(retain_frac > 0.0 && retain_frac <= 1.0) {
        return Err(invalid(format!("retain fraction must lie in (0, 1], got {retain_frac}")));
    }
    let n = h.num_vertices();
    let target = (math::ceil(retain_frac * n as f64) as usize).min(n);
    let members = h.hyperedges();
    let mut incident = vec![Vec::new(); n];
    for inc in h.incidences() {
        incident[inc.vertex].push(inc.hyperedge);
    }

    let mut rng = seed::plain(seed);
    let mut visited = vec![false; n];
    let mut count = 0;
    while count < target {
        let unvisited: Vec<usize> = (0..n).filter(|&v| !visited[v]).collect();
        let mut current = unvisited[rng.random_range(0..unvisited.len())];
        let component = component_of(current, &incident, &members);
        let mut remaining = component.iter().filter(|&&v| !visited[v]).count();
        loop {
            if !visited[current] {
                visited[current] = true;
                count += 1;
                remaining -= 1;
            }
            if count >= target || remaining == 0 {
                break;
            }
            let edges = &incident[current];
            let e = edges[rng.random_range(0..edges.len())];
            let m = &members[e];
            current = m[rng.random_range(0..m.len())];
        }
    }
    let masked: Vec<bool> = visited.iter().map(|v| !v).collect();
    mask_vertices(h, &masked)
}

fn component_of(start: usize, incident: &[Vec<usize>], members: &[Vec<usize>]) -> Vec<usize> {
    let mut seen_v = vec![false; incident.len()];
    let mut seen_e = vec![false; members.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::from([start]);
    seen_v[start] = true;
    while let Some(v) = queue.pop_front() {
        out.push(v);
        for &e in &incident[v] {
            if core::mem::replace(&mut seen_e[e], true) {
                continue;
            }
            for &u in &members[e] {
                if !core::mem::replace(&mut seen_v[u], true) {
                    queue.push_back(u);
                }
            }
        }
    }
    out
}
