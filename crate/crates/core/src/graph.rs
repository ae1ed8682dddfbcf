//! Simple r-regular graphs with a flat adjacency layout and a text file format.
//!
//! File format, one graph per file:
//!
//! ```text
//! # regular-graph n=<n> r=<r> seed=<seed>
//! u v
//! ...
//! ```
//!
//! Edges are written once with u < v, sorted lexicographically, so a graph has
//! exactly one on-disk representation.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegularGraph {
    n: u32,
    r: u32,
    /// Neighbors of v at adj[v*r .. (v+1)*r], each slice sorted ascending.
    adj: Vec<u32>,
    /// Seed recorded in the file header; 0 for hand-built graphs.
    seed: u64,
}

impl RegularGraph {
    /// Builds a graph from an undirected edge list. Every vertex must end up
    /// with exactly r distinct neighbors and no self-loops.
    pub fn from_edges(n: u32, r: u32, seed: u64, edges: &[(u32, u32)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("graph needs at least one vertex"));
        }
        let expected = n as u64 * r as u64;
        if !expected.is_multiple_of(2) || edges.len() as u64 != expected / 2 {
            return Err(Error::invalid(format!(
                "{} edges cannot make an {r}-regular graph on {n} vertices",
                edges.len()
            )));
        }
        let mut adj = vec![Vec::with_capacity(r as usize); n as usize];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::invalid(format!("edge ({u}, {v}) out of range")));
            }
            if u == v {
                return Err(Error::invalid(format!("self-loop at vertex {u}")));
            }
            adj[u as usize].push(v);
            adj[v as usize].push(u);
        }
        let mut flat = Vec::with_capacity(expected as usize);
        for (v, mut nbrs) in adj.into_iter().enumerate() {
            if nbrs.len() != r as usize {
                return Err(Error::invalid(format!(
                    "vertex {v} has degree {}, expected {r}",
                    nbrs.len()
                )));
            }
            nbrs.sort_unstable();
            if nbrs.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::invalid(format!("parallel edge at vertex {v}")));
            }
            flat.extend_from_slice(&nbrs);
        }
        Ok(RegularGraph {
            n,
            r,
            adj: flat,
            seed,
        })
    }

    /// Used by the sampler, which guarantees simplicity before construction.
    pub(crate) fn from_sorted_adjacency(n: u32, r: u32, seed: u64, adj: Vec<u32>) -> Self {
        debug_assert_eq!(adj.len(), (n * r) as usize);
        RegularGraph { n, r, adj, seed }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn neighbors(&self, v: u32) -> &[u32] {
        let r = self.r as usize;
        let base = v as usize * r;
        &self.adj[base..base + r]
    }

    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity((self.n * self.r / 2) as usize);
        for v in 0..self.n {
            for &w in self.neighbors(v) {
                if v < w {
                    out.push((v, w));
                }
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# regular-graph n={} r={} seed={}", self.n, self.r, self.seed).unwrap();
        for (u, v) in self.edges() {
            writeln!(s, "{u} {v}").unwrap();
        }
        s
    }

    pub fn write_path(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())
            .map_err(|e| Error::io(format!("writing graph to {}", path.display()), e))
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty file".into()))?;
        let (n, r, seed) = parse_header(header).map_err(|msg| parse_err(1, msg))?;

        let mut edges = Vec::new();
        for (idx, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let (u, v) = match (it.next(), it.next(), it.next()) {
                (Some(u), Some(v), None) => (u, v),
                _ => return Err(parse_err(idx + 1, format!("expected 'u v', got {line:?}"))),
            };
            let u: u32 = u
                .parse()
                .map_err(|_| parse_err(idx + 1, format!("bad vertex id {u:?}")))?;
            let v: u32 = v
                .parse()
                .map_err(|_| parse_err(idx + 1, format!("bad vertex id {v:?}")))?;
            if u >= v {
                return Err(parse_err(idx + 1, format!("edges must have u < v, got {u} {v}")));
            }
            edges.push((u, v));
        }
        Self::from_edges(n, r, seed, &edges).map_err(|e| match e {
            Error::InvalidArgument(msg) => parse_err(1, msg),
            other => other,
        })
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading graph from {}", path.display()), e))?;
        Self::from_text(&text, path)
    }
}

fn parse_header(header: &str) -> std::result::Result<(u32, u32, u64), String> {
    let rest = header
        .strip_prefix("# regular-graph ")
        .ok_or_else(|| format!("header must start with '# regular-graph', got {header:?}"))?;
    let mut n = None;
    let mut r = None;
    let mut seed = None;
    for field in rest.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| format!("bad header field {field:?}"))?;
        match key {
            "n" => n = Some(value.parse().map_err(|_| format!("bad n={value:?}"))?),
            "r" => r = Some(value.parse().map_err(|_| format!("bad r={value:?}"))?),
            "seed" => seed = Some(value.parse().map_err(|_| format!("bad seed={value:?}"))?),
            _ => return Err(format!("unknown header field {key:?}")),
        }
    }
    match (n, r, seed) {
        (Some(n), Some(r), Some(seed)) => Ok((n, r, seed)),
        _ => Err("header must carry n=, r=, seed=".into()),
    }
}

/// Complete graph on four vertices, the unique simple 3-regular graph there.
#[cfg(test)]
pub(crate) fn k4() -> RegularGraph {
    RegularGraph::from_edges(4, 3, 0, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap()
}
