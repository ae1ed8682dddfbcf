//! Configuration-model sampling of r-regular graphs.
//!
//! A pairing is a uniform perfect matching on the n*r half-edges; half-edge h
//! belongs to vertex h / r. Projecting the pairing to vertex pairs gives a
//! multigraph; rejection until that multigraph is simple yields the uniform
//! distribution over simple r-regular graphs on n labeled vertices.

use rand_chacha::rand_core::RngCore;

use crate::error::{Error, Result};
use crate::graph::RegularGraph;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphConfig {
    pub n: u32,
    pub r: u32,
    pub seed: u64,
    pub max_attempts: u64,
}

impl GraphConfig {
    pub fn new(n: u32, r: u32, seed: u64) -> Self {
        GraphConfig {
            n,
            r,
            seed,
            max_attempts: 1_000_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r < 2 {
            return Err(Error::invalid(format!("degree r={} must be at least 2", self.r)));
        }
        if self.n < self.r + 1 {
            return Err(Error::invalid(format!(
                "n={} too small for a simple {}-regular graph (need n >= r + 1)",
                self.n, self.r
            )));
        }
        check_even_half_edges(self.n, self.r)?;
        if self.max_attempts == 0 {
            return Err(Error::invalid("max_attempts must be positive"));
        }
        Ok(())
    }
}

fn check_even_half_edges(n: u32, r: u32) -> Result<()> {
    if !(n as u64 * r as u64).is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "n*r = {}*{} is odd, no perfect matching on the half-edges exists",
            n, r
        )));
    }
    Ok(())
}

/// A perfect matching on the half-edges 0 .. n*r.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HalfEdgePairing {
    n: u32,
    r: u32,
    /// partner[h] is the half-edge matched with h; an involution without fixed points.
    partner: Vec<u32>,
}

impl HalfEdgePairing {
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn partner(&self, h: u32) -> u32 {
        self.partner[h as usize]
    }

    #[inline]
    pub fn vertex_of(&self, h: u32) -> u32 {
        h / self.r
    }

    /// The matching as (h, partner(h)) pairs with h < partner(h), ascending in h.
    pub fn pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.partner
            .iter()
            .enumerate()
            .filter_map(|(h, &p)| (h < p as usize).then_some((h as u32, p)))
    }

    pub(crate) fn from_partner(n: u32, r: u32, partner: Vec<u32>) -> Self {
        HalfEdgePairing { n, r, partner }
    }
}

/// Samples a uniform pairing. Consumes exactly n*r/2 random words for a given
/// (n, r), so a replayed stream stays aligned.
pub fn sample_pairing(n: u32, r: u32, rng: &mut impl RngCore) -> Result<HalfEdgePairing> {
    check_even_half_edges(n, r)?;
    let total = (n * r) as usize;
    let mut partner = vec![u32::MAX; total];
    let mut pool: Vec<u32> = (0..total as u32).collect();
    let mut len = total;
    while len > 0 {
        // Match the pool's first half-edge with a uniform other; both leave the pool.
        let a = pool[0];
        let j = 1 + rng::uniform_index(rng, len - 1);
        let b = pool[j];
        partner[a as usize] = b;
        partner[b as usize] = a;
        pool.swap(j, len - 1);
        pool.swap(0, len - 2);
        len -= 2;
        pool.truncate(len);
    }
    Ok(HalfEdgePairing::from_partner(n, r, partner))
}

/// Projection of a pairing to vertex pairs, with simplicity diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Multigraph {
    /// All n*r/2 edges as (min, max) vertex pairs, sorted, duplicates kept.
    pub edges: Vec<(u32, u32)>,
    pub self_loops: u64,
    /// Distinct vertex pairs carrying more than one edge.
    pub multi_edges: u64,
}

impl Multigraph {
    pub fn is_simple(&self) -> bool {
        self.self_loops == 0 && self.multi_edges == 0
    }
}

pub fn pairing_to_multigraph(pairing: &HalfEdgePairing) -> Multigraph {
    let mut edges: Vec<(u32, u32)> = pairing
        .pairs()
        .map(|(a, b)| {
            let (u, v) = (pairing.vertex_of(a), pairing.vertex_of(b));
            (u.min(v), u.max(v))
        })
        .collect();
    edges.sort_unstable();
    let self_loops = edges.iter().filter(|(u, v)| u == v).count() as u64;
    let mut multi_edges = 0;
    let mut i = 0;
    while i < edges.len() {
        let mut j = i + 1;
        while j < edges.len() && edges[j] == edges[i] {
            j += 1;
        }
        multi_edges += (j - i > 1) as u64;
        i = j;
    }
    Multigraph {
        edges,
        self_loops,
        multi_edges,
    }
}

#[derive(Debug, Clone)]
pub struct SampledGraph {
    pub graph: RegularGraph,
    /// Pairings drawn until one was simple.
    pub attempts: u64,
}

/// Rejection-samples a uniform simple r-regular graph.
pub fn sample_simple_regular(cfg: &GraphConfig) -> Result<SampledGraph> {
    cfg.validate()?;
    let mut rng = rng::stream(cfg.seed);
    sample_simple_regular_from(cfg, &mut rng)
}

/// As `sample_simple_regular` but drawing from a caller-owned stream.
pub fn sample_simple_regular_from(
    cfg: &GraphConfig,
    rng: &mut impl RngCore,
) -> Result<SampledGraph> {
    cfg.validate()?;
    for attempt in 1..=cfg.max_attempts {
        let pairing = sample_pairing(cfg.n, cfg.r, rng)?;
        if let Some(adj) = simple_adjacency(&pairing) {
            return Ok(SampledGraph {
                graph: RegularGraph::from_sorted_adjacency(cfg.n, cfg.r, cfg.seed, adj),
                attempts: attempt,
            });
        }
    }
    Err(Error::SamplingFailed {
        attempts: cfg.max_attempts,
    })
}

/// Flat sorted adjacency if the pairing is simple, None otherwise.
fn simple_adjacency(pairing: &HalfEdgePairing) -> Option<Vec<u32>> {
    let n = pairing.n() as usize;
    let r = pairing.r() as usize;
    let mut adj = vec![u32::MAX; n * r];
    let mut fill = vec![0u32; n];
    for (a, b) in pairing.pairs() {
        let (u, v) = (pairing.vertex_of(a) as usize, pairing.vertex_of(b) as usize);
        if u == v {
            return None;
        }
        adj[u * r + fill[u] as usize] = v as u32;
        adj[v * r + fill[v] as usize] = u as u32;
        fill[u] += 1;
        fill[v] += 1;
    }
    for v in 0..n {
        let slice = &mut adj[v * r..(v + 1) * r];
        slice.sort_unstable();
        if slice.windows(2).any(|w| w[0] == w[1]) {
            return None;
        }
    }
    Some(adj)
}
