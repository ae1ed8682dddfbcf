//! Neighborhood expansion statistics of vertex subsets.
//!
//! For a subset U of a simple r-regular graph: U*1 is the set of vertices with
//! at least one neighbor in U, U*2 those with at least two distinct neighbors
//! in U (membership in U itself does not matter). U0 holds the members of U
//! with no neighbor inside U, U1 the rest of U. For the vacancy view of a set
//! W: W0 are members of W with at least r-1 neighbors in W, W1 the outside
//! vertices with at least r-1 neighbors in W; a vertex is "blocked" when fewer
//! than two of its neighbors lie outside W, i.e. blocked = |((W^c)*2)^c|.
//!
//! All statistics are computed in O(r |U|) with a reusable counter scratch
//! (blocked needs O(r n) since it scans the complement).

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::RegularGraph;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubsetStats {
    pub m: u64,
    pub star1: u64,
    pub star2: u64,
    /// Vertices outside U with a neighbor in U.
    pub boundary: u64,
    /// Edges with exactly one endpoint in U.
    pub cross_edges: u64,
    /// Members of U with no neighbor in U.
    pub u0: u64,
    /// Members of U with at least one neighbor in U.
    pub u1: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VacancyStats {
    pub m: u64,
    /// Members of W with at least r-1 neighbors in W.
    pub w0: u64,
    /// Non-members with at least r-1 neighbors in W.
    pub w1: u64,
    /// |((W^c)*2)^c|, computed independently from the complement's star sets.
    pub blocked: u64,
    pub beta0: f64,
    pub beta1: f64,
    /// True when W is empty and the beta ratios are conventionally zero.
    pub degenerate: bool,
}

/// Reusable per-vertex neighbor counters.
struct Scratch {
    counts: Vec<u16>,
    in_set: Vec<bool>,
    touched: Vec<u32>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch {
            counts: vec![0; n],
            in_set: vec![false; n],
            touched: Vec::new(),
        }
    }

    /// Marks the subset and counts, for every vertex, its neighbors inside the
    /// subset. Returns an error on out-of-range or duplicate ids.
    fn load(&mut self, g: &RegularGraph, subset: &[u32]) -> Result<()> {
        for &v in subset {
            if v >= g.n() {
                self.reset(subset);
                return Err(Error::invalid(format!(
                    "vertex {v} out of range for n={}",
                    g.n()
                )));
            }
            if self.in_set[v as usize] {
                self.reset(subset);
                return Err(Error::invalid(format!("duplicate vertex {v} in subset")));
            }
            self.in_set[v as usize] = true;
        }
        for &v in subset {
            for &w in g.neighbors(v) {
                if self.counts[w as usize] == 0 {
                    self.touched.push(w);
                }
                self.counts[w as usize] += 1;
            }
        }
        Ok(())
    }

    fn reset(&mut self, subset: &[u32]) {
        for &v in subset {
            if (v as usize) < self.in_set.len() {
                self.in_set[v as usize] = false;
            }
        }
        for v in self.touched.drain(..) {
            self.counts[v as usize] = 0;
        }
    }
}

fn stats_with(g: &RegularGraph, subset: &[u32], scratch: &mut Scratch) -> Result<SubsetStats> {
    scratch.load(g, subset)?;
    let m = subset.len() as u64;
    let (mut star1, mut star2, mut boundary) = (0u64, 0u64, 0u64);
    for &y in &scratch.touched {
        let c = scratch.counts[y as usize];
        star1 += 1;
        star2 += (c >= 2) as u64;
        boundary += !scratch.in_set[y as usize] as u64;
    }
    let mut inner_degree_sum = 0u64;
    let mut u0 = 0u64;
    for &x in subset {
        let c = scratch.counts[x as usize] as u64;
        inner_degree_sum += c;
        u0 += (c == 0) as u64;
    }
    let stats = SubsetStats {
        m,
        star1,
        star2,
        boundary,
        cross_edges: g.r() as u64 * m - inner_degree_sum,
        u0,
        u1: m - u0,
    };
    scratch.reset(subset);
    Ok(stats)
}

pub fn subset_stats(g: &RegularGraph, subset: &[u32]) -> Result<SubsetStats> {
    stats_with(g, subset, &mut Scratch::new(g.n() as usize))
}

/// The vertex sets U*1 and U*2, sorted ascending.
pub fn star_sets(g: &RegularGraph, subset: &[u32]) -> Result<(Vec<u32>, Vec<u32>)> {
    let mut scratch = Scratch::new(g.n() as usize);
    scratch.load(g, subset)?;
    let mut star1: Vec<u32> = scratch.touched.clone();
    star1.sort_unstable();
    let mut star2: Vec<u32> = scratch
        .touched
        .iter()
        .copied()
        .filter(|&y| scratch.counts[y as usize] >= 2)
        .collect();
    star2.sort_unstable();
    scratch.reset(subset);
    Ok((star1, star2))
}

pub fn vacancy_stats(g: &RegularGraph, w: &[u32]) -> Result<VacancyStats> {
    let mut scratch = Scratch::new(g.n() as usize);
    scratch.load(g, w)?;
    let m = w.len() as u64;
    let high = (g.r() - 1) as u16;
    let mut w0 = 0u64;
    let mut w1 = 0u64;
    for &y in &scratch.touched {
        if scratch.counts[y as usize] >= high {
            if scratch.in_set[y as usize] {
                w0 += 1;
            } else {
                w1 += 1;
            }
        }
    }
    let complement: Vec<u32> = (0..g.n()).filter(|&v| !scratch.in_set[v as usize]).collect();
    scratch.reset(w);

    // Independent route: vertices with fewer than two neighbors outside W.
    let (_, comp_star2) = star_sets(g, &complement)?;
    let blocked = g.n() as u64 - comp_star2.len() as u64;
    debug_assert_eq!(blocked, w0 + w1);

    let degenerate = m == 0;
    Ok(VacancyStats {
        m,
        w0,
        w1,
        blocked,
        beta0: if degenerate { 0.0 } else { w0 as f64 / m as f64 },
        beta1: if degenerate { 0.0 } else { w1 as f64 / m as f64 },
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Uniform,
    /// Breadth-first ball around a random center.
    Ball,
    /// Rotates uniform, one ball, union of two balls.
    Mixed,
}

impl std::str::FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(SamplerKind::Uniform),
            "ball" => Ok(SamplerKind::Ball),
            "mixed" => Ok(SamplerKind::Mixed),
            other => Err(Error::invalid(format!(
                "unknown sampler {other:?} (expected uniform|ball|mixed)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AuditConfig {
    pub m: u32,
    pub eta: f64,
    pub samples: u32,
    pub sampler: SamplerKind,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct AuditRow {
    pub sample_id: u32,
    pub stats: SubsetStats,
    pub blocked: u64,
    /// star2 >= (1 + eta) m
    pub ev_e: bool,
    /// star1 <= (r - 1 - eta) m
    pub ev_h: bool,
    /// blocked > (3/(2r - 4) + eta) m
    pub ev_f: bool,
}

#[derive(Debug, Clone)]
pub struct AuditReport {
    pub rows: Vec<AuditRow>,
    pub freq_e: f64,
    pub freq_h: f64,
    pub freq_f: f64,
    pub star2_ratio_max: f64,
    pub star1_ratio_min: f64,
    pub blocked_ratio_max: f64,
}

impl AuditReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "sample_id,m,star1,star2,boundary,cross_edges,u0,u1,blocked,ev_E,ev_H,ev_F\n",
        );
        for row in &self.rows {
            let st = &row.stats;
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                row.sample_id,
                st.m,
                st.star1,
                st.star2,
                st.boundary,
                st.cross_edges,
                st.u0,
                st.u1,
                row.blocked,
                row.ev_e as u8,
                row.ev_h as u8,
                row.ev_f as u8,
            )
            .unwrap();
        }
        s
    }
}

/// Samples subsets with the configured sampler and tallies how often the three
/// expansion events fire at level eta.
pub fn audit_events(g: &RegularGraph, cfg: &AuditConfig) -> Result<AuditReport> {
    if cfg.m == 0 || cfg.m > g.n() {
        return Err(Error::invalid(format!(
            "subset size m={} must be in 1..={}",
            cfg.m,
            g.n()
        )));
    }
    if g.r() < 3 {
        return Err(Error::invalid(
            "blocked-set event threshold 3/(2r-4) needs r >= 3",
        ));
    }
    if !cfg.eta.is_finite() || cfg.eta <= 0.0 {
        return Err(Error::invalid(format!("eta={} must be positive", cfg.eta)));
    }
    if cfg.samples == 0 {
        return Err(Error::invalid("samples must be positive"));
    }

    let r = g.r() as f64;
    let thresh_e = (1.0 + cfg.eta) * cfg.m as f64;
    let thresh_h = (r - 1.0 - cfg.eta) * cfg.m as f64;
    let thresh_f = (3.0 / (2.0 * r - 4.0) + cfg.eta) * cfg.m as f64;

    let mut scratch = Scratch::new(g.n() as usize);
    let mut rows = Vec::with_capacity(cfg.samples as usize);
    for sample_id in 0..cfg.samples {
        let subset = draw_subset(g, cfg, sample_id);
        let stats = stats_with(g, &subset, &mut scratch)?;
        let blocked = vacancy_stats(g, &subset)?.blocked;
        rows.push(AuditRow {
            sample_id,
            stats,
            blocked,
            ev_e: stats.star2 as f64 >= thresh_e,
            ev_h: stats.star1 as f64 <= thresh_h,
            ev_f: blocked as f64 > thresh_f,
        });
    }

    let nf = rows.len() as f64;
    let freq = |f: fn(&AuditRow) -> bool| rows.iter().filter(|r| f(r)).count() as f64 / nf;
    let ratio = |v: u64, m: u64| v as f64 / m as f64;
    Ok(AuditReport {
        freq_e: freq(|r| r.ev_e),
        freq_h: freq(|r| r.ev_h),
        freq_f: freq(|r| r.ev_f),
        star2_ratio_max: rows
            .iter()
            .map(|r| ratio(r.stats.star2, r.stats.m))
            .fold(f64::NEG_INFINITY, f64::max),
        star1_ratio_min: rows
            .iter()
            .map(|r| ratio(r.stats.star1, r.stats.m))
            .fold(f64::INFINITY, f64::min),
        blocked_ratio_max: rows
            .iter()
            .map(|r| ratio(r.blocked, r.stats.m))
            .fold(f64::NEG_INFINITY, f64::max),
        rows,
    })
}

fn draw_subset(g: &RegularGraph, cfg: &AuditConfig, sample_id: u32) -> Vec<u32> {
    let mut rng = rng::stream(rng::child_seed(cfg.seed, &[sample_id as u64]));
    let m = cfg.m as usize;
    match cfg.sampler {
        SamplerKind::Uniform => rng::sample_subset(&mut rng, g.n() as usize, m),
        SamplerKind::Ball => bfs_ball(g, m, &[random_vertex(g, &mut rng)], &mut rng),
        SamplerKind::Mixed => match sample_id % 3 {
            0 => rng::sample_subset(&mut rng, g.n() as usize, m),
            1 => bfs_ball(g, m, &[random_vertex(g, &mut rng)], &mut rng),
            _ => {
                let c1 = random_vertex(g, &mut rng);
                let c2 = random_vertex(g, &mut rng);
                bfs_ball(g, m, &[c1, c2], &mut rng)
            }
        },
    }
}

fn random_vertex(g: &RegularGraph, rng: &mut impl rand_chacha::rand_core::RngCore) -> u32 {
    rng::uniform_index(rng, g.n() as usize) as u32
}

/// First m vertices in breadth-first order from the given centers (duplicated
/// centers collapse). Exhausted components are restarted from a fresh random
/// unvisited vertex, so the result always has exactly m vertices.
fn bfs_ball(
    g: &RegularGraph,
    m: usize,
    centers: &[u32],
    rng: &mut impl rand_chacha::rand_core::RngCore,
) -> Vec<u32> {
    let n = g.n() as usize;
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(m);
    let mut queue = std::collections::VecDeque::new();
    for &c in centers {
        if !visited[c as usize] {
            visited[c as usize] = true;
            queue.push_back(c);
        }
    }
    while order.len() < m {
        let Some(v) = queue.pop_front() else {
            let mut c = random_vertex(g, rng);
            while visited[c as usize] {
                c = (c + 1) % g.n();
            }
            visited[c as usize] = true;
            queue.push_back(c);
            continue;
        };
        order.push(v);
        for &w in g.neighbors(v) {
            if !visited[w as usize] {
                visited[w as usize] = true;
                queue.push_back(w);
            }
        }
    }
    order.sort_unstable();
    order
}
