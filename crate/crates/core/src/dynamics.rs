//! Synchronous threshold contact process.
//!
//! At every step each vertex looks at how many of its neighbors are currently
//! occupied. With at least `theta` occupied neighbors it becomes occupied with
//! probability p, independently of everything else (including its own state);
//! otherwise it is vacant. All vertices update simultaneously.

use std::fmt::Write as _;
use std::path::PathBuf;

use rand_chacha::rand_core::RngCore;

use crate::error::{Error, Result};
use crate::graph::RegularGraph;
use crate::isoperimetry;
use crate::rng::{self, CoinField};

/// Occupied-vertex set as a bitset with a cached population count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyState {
    n: u32,
    words: Vec<u64>,
    count: u64,
}

impl OccupancyState {
    pub fn empty(n: u32) -> Self {
        OccupancyState {
            n,
            words: vec![0; (n as usize).div_ceil(64)],
            count: 0,
        }
    }

    pub fn full(n: u32) -> Self {
        let mut s = OccupancyState::empty(n);
        for v in 0..n {
            s.insert(v);
        }
        s
    }

    pub fn from_members(n: u32, members: &[u32]) -> Result<Self> {
        let mut s = OccupancyState::empty(n);
        for &v in members {
            if v >= n {
                return Err(Error::invalid(format!("vertex {v} out of range for n={n}")));
            }
            if s.get(v) {
                return Err(Error::invalid(format!("duplicate vertex {v} in initial set")));
            }
            s.insert(v);
        }
        Ok(s)
    }

    /// Uniform subset of exactly round(density * n) vertices.
    pub fn random_with_density(n: u32, density: f64, rng: &mut impl RngCore) -> Result<Self> {
        if !(0.0..=1.0).contains(&density) {
            return Err(Error::invalid(format!("density {density} outside [0, 1]")));
        }
        let k = (density * n as f64).round() as usize;
        let members = rng::sample_subset(rng, n as usize, k);
        Self::from_members(n, &members)
    }

    #[inline]
    pub fn get(&self, v: u32) -> bool {
        self.words[(v >> 6) as usize] >> (v & 63) & 1 == 1
    }

    #[inline]
    pub fn insert(&mut self, v: u32) {
        let w = &mut self.words[(v >> 6) as usize];
        let bit = 1u64 << (v & 63);
        self.count += (*w & bit == 0) as u64;
        *w |= bit;
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn density(&self) -> f64 {
        self.count as f64 / self.n as f64
    }

    pub fn members(&self) -> Vec<u32> {
        (0..self.n).filter(|&v| self.get(v)).collect()
    }

    pub fn is_subset_of(&self, other: &OccupancyState) -> bool {
        self.n == other.n
            && self
                .words
                .iter()
                .zip(&other.words)
                .all(|(a, b)| a & !b == 0)
    }
}

/// How a run chooses its initial occupied set.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Full,
    /// Uniform subset of round(density * n) vertices.
    Random(f64),
    /// Text file with one vertex id per line ('#' comments allowed).
    File(PathBuf),
}

impl InitSpec {
    pub fn build(&self, n: u32, seed: u64) -> Result<OccupancyState> {
        match self {
            InitSpec::Full => Ok(OccupancyState::full(n)),
            InitSpec::Random(d) => {
                OccupancyState::random_with_density(n, *d, &mut rng::stream(seed))
            }
            InitSpec::File(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::io(format!("reading init set {}", path.display()), e))?;
                let mut members = Vec::new();
                for (idx, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    members.push(line.parse::<u32>().map_err(|_| Error::Parse {
                        path: path.clone(),
                        line: idx + 1,
                        msg: format!("bad vertex id {line:?}"),
                    })?);
                }
                OccupancyState::from_members(n, &members)
            }
        }
    }
}

impl std::str::FromStr for InitSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "full" {
            return Ok(InitSpec::Full);
        }
        if let Some(d) = s.strip_prefix("random:") {
            let d: f64 = d
                .parse()
                .map_err(|_| Error::invalid(format!("bad density in init spec {s:?}")))?;
            if !(0.0..=1.0).contains(&d) {
                return Err(Error::invalid(format!("init density {d} outside [0, 1]")));
            }
            return Ok(InitSpec::Random(d));
        }
        if let Some(p) = s.strip_prefix("file:") {
            return Ok(InitSpec::File(PathBuf::from(p)));
        }
        Err(Error::invalid(format!(
            "bad init spec {s:?} (expected full | random:<density> | file:<path>)"
        )))
    }
}

impl std::fmt::Display for InitSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitSpec::Full => write!(f, "full"),
            InitSpec::Random(d) => write!(f, "random:{d}"),
            InitSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessParams {
    pub p: f64,
    pub theta: u32,
    pub seed: u64,
    pub t_max: u64,
    /// When set, a run stops the first time density drops below this value.
    pub stop_below: Option<f64>,
}

impl ProcessParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::invalid(format!("p={} outside [0, 1]", self.p)));
        }
        if self.theta == 0 {
            return Err(Error::invalid("theta must be at least 1"));
        }
        if let Some(sb) = self.stop_below {
            if !(0.0..=1.0).contains(&sb) {
                return Err(Error::invalid(format!("stop_below={sb} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// One synchronous update. The coin for vertex x at step t is
/// `coins.coin(t, x)`, evaluated only when x has at least theta occupied
/// neighbors, in ascending vertex order.
pub fn step(
    g: &RegularGraph,
    state: &OccupancyState,
    p: f64,
    theta: u32,
    coins: &CoinField,
    t: u64,
) -> OccupancyState {
    debug_assert_eq!(state.n(), g.n());
    let mut next = OccupancyState::empty(g.n());
    for x in 0..g.n() {
        let mut c = 0;
        for &y in g.neighbors(x) {
            if state.get(y) {
                c += 1;
                if c == theta {
                    break;
                }
            }
        }
        if c >= theta && coins.coin(t, x as u64) < p {
            next.insert(x);
        }
    }
    next
}

/// Conditional expectation of the next occupied count: p * |state*2|.
/// Routed through the subset star sets rather than the stepping loop.
pub fn expected_next_count(g: &RegularGraph, state: &OccupancyState, p: f64) -> Result<f64> {
    let (_, star2) = isoperimetry::star_sets(g, &state.members())?;
    Ok(p * star2.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub n: u32,
    /// counts[t] = occupied vertices after t steps; counts[0] is the initial set.
    pub counts: Vec<u64>,
    /// First t with an empty configuration, if reached.
    pub extinction_time: Option<u64>,
    /// First t with density below the stop threshold, if one was set and hit.
    pub first_below: Option<u64>,
    /// Reached t_max with density above the stop threshold (above zero if none).
    pub survived: bool,
}

impl TrajectoryRecord {
    pub fn steps(&self) -> u64 {
        self.counts.len() as u64 - 1
    }

    pub fn density_at(&self, t: u64) -> f64 {
        self.counts[t as usize] as f64 / self.n as f64
    }

    pub fn final_density(&self) -> f64 {
        *self.counts.last().unwrap() as f64 / self.n as f64
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,occupied,density\n");
        for (t, &c) in self.counts.iter().enumerate() {
            writeln!(s, "{t},{c},{}", c as f64 / self.n as f64).unwrap();
        }
        s
    }
}

/// Runs the process from `init` until extinction, the stop threshold, or t_max.
pub fn run(g: &RegularGraph, init: &OccupancyState, params: &ProcessParams) -> Result<TrajectoryRecord> {
    params.validate()?;
    if init.n() != g.n() {
        return Err(Error::invalid(format!(
            "initial state is on {} vertices, graph has {}",
            init.n(),
            g.n()
        )));
    }
    let coins = CoinField::new(params.seed);
    let mut cur = init.clone();
    let mut counts = Vec::with_capacity(params.t_max as usize + 1);
    counts.push(cur.count());
    let mut extinction_time = None;
    let mut first_below = None;

    let below = |c: u64| match params.stop_below {
        Some(sb) => (c as f64 / g.n() as f64) < sb,
        None => false,
    };

    if cur.count() == 0 {
        extinction_time = Some(0);
    } else if below(cur.count()) {
        first_below = Some(0);
    } else {
        for t in 0..params.t_max {
            cur = step(g, &cur, params.p, params.theta, &coins, t);
            counts.push(cur.count());
            if cur.count() == 0 {
                extinction_time = Some(t + 1);
                break;
            }
            if below(cur.count()) {
                first_below = Some(t + 1);
                break;
            }
        }
    }

    let survived = extinction_time.is_none()
        && first_below.is_none()
        && counts.len() as u64 == params.t_max + 1
        && cur.count() > 0;
    Ok(TrajectoryRecord {
        n: g.n(),
        counts,
        extinction_time,
        first_below,
        survived,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauEstimate {
    /// Mean density over the kept suffix; 0 for extinct trajectories.
    pub density: f64,
    pub extinct: bool,
}

/// Mean density over the final (1 - burn_in) fraction of a trajectory.
pub fn plateau_density(record: &TrajectoryRecord, burn_in: f64) -> Result<PlateauEstimate> {
    if !(0.0..1.0).contains(&burn_in) {
        return Err(Error::invalid(format!("burn_in={burn_in} outside [0, 1)")));
    }
    if record.extinction_time.is_some() {
        return Ok(PlateauEstimate {
            density: 0.0,
            extinct: true,
        });
    }
    let len = record.counts.len();
    let start = ((burn_in * len as f64).floor() as usize).min(len - 1);
    let kept = &record.counts[start..];
    let mean = kept.iter().map(|&c| c as f64).sum::<f64>() / (kept.len() as f64 * record.n as f64);
    Ok(PlateauEstimate {
        density: mean,
        extinct: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{sample_simple_regular, GraphConfig};
    use crate::graph::k4;

    fn petersen() -> RegularGraph {
        let mut edges = vec![];
        for i in 0..5u32 {
            edges.push((i, (i + 1) % 5)); // outer cycle
            edges.push((i, i + 5)); // spoke
            edges.push((i + 5, (i + 2) % 5 + 5)); // inner pentagram
        }
        let edges: Vec<_> = edges
            .into_iter()
            .map(|(u, v)| (u.min(v), u.max(v)))
            .collect();
        RegularGraph::from_edges(10, 3, 0, &edges).unwrap()
    }

    #[test]
    fn deterministic_step_on_k4() {
        // With p = 1 only the threshold matters: {0,1} activates exactly {2,3}.
        let g = k4();
        let coins = CoinField::new(0);
        let s0 = OccupancyState::from_members(4, &[0, 1]).unwrap();
        let s1 = step(&g, &s0, 1.0, 2, &coins, 0);
        assert_eq!(s1.members(), vec![2, 3]);
        let s2 = step(&g, &s1, 1.0, 2, &coins, 1);
        assert_eq!(s2.members(), vec![0, 1]);

        // p = 0 empties everything
        let s1 = step(&g, &s0, 0.0, 2, &coins, 0);
        assert_eq!(s1.count(), 0);
    }

    #[test]
    fn threshold_one_with_p_one_is_neighborhood_spread() {
        let g = petersen();
        let coins = CoinField::new(9);
        let s0 = OccupancyState::from_members(10, &[0]).unwrap();
        let s1 = step(&g, &s0, 1.0, 1, &coins, 0);
        assert_eq!(s1.members(), vec![1, 4, 5]);
    }

    #[test]
    fn petersen_outer_cycle_star2_expectation() {
        // Each outer vertex sees two occupied outer neighbors; each inner vertex
        // sees one spoke. So |state*2| = 5 and the conditional mean is 5p.
        let g = petersen();
        let outer = OccupancyState::from_members(10, &[0, 1, 2, 3, 4]).unwrap();
        assert_eq!(expected_next_count(&g, &outer, 1.0).unwrap(), 5.0);
        assert_eq!(expected_next_count(&g, &outer, 0.4).unwrap(), 2.0);
    }

    #[test]
    fn run_is_reproducible_and_extinction_is_recorded() {
        let g = sample_simple_regular(&GraphConfig::new(300, 4, 3)).unwrap().graph;
        let params = ProcessParams {
            p: 0.2,
            theta: 2,
            seed: 42,
            t_max: 500,
            stop_below: None,
        };
        let init = OccupancyState::full(300);
        let a = run(&g, &init, &params).unwrap();
        let b = run(&g, &init, &params).unwrap();
        assert_eq!(a, b);
        let t_ext = a.extinction_time.expect("p=0.2 must die out");
        assert!(t_ext > 0 && t_ext <= 100, "extinction at {t_ext}");
        assert!(!a.survived);
        assert_eq!(a.counts.len() as u64, t_ext + 1);
        assert_eq!(*a.counts.last().unwrap(), 0);

        let c = run(
            &g,
            &init,
            &ProcessParams {
                seed: 43,
                ..params
            },
        )
        .unwrap();
        assert_ne!(a.counts, c.counts, "different seeds should differ");
    }

    #[test]
    fn stop_below_halts_early() {
        let g = sample_simple_regular(&GraphConfig::new(300, 4, 3)).unwrap().graph;
        let params = ProcessParams {
            p: 0.2,
            theta: 2,
            seed: 42,
            t_max: 500,
            stop_below: Some(0.05),
        };
        let rec = run(&g, &OccupancyState::full(300), &params).unwrap();
        let t = rec.first_below.expect("density must dip below 0.05");
        assert!(rec.extinction_time.is_none());
        assert!(!rec.survived);
        assert!(rec.final_density() < 0.05);
        assert_eq!(rec.steps(), t);
    }

    #[test]
    fn supercritical_run_survives_to_t_max() {
        let g = sample_simple_regular(&GraphConfig::new(200, 4, 7)).unwrap().graph;
        let params = ProcessParams {
            p: 0.95,
            theta: 2,
            seed: 1,
            t_max: 300,
            stop_below: Some(0.05),
        };
        let rec = run(&g, &OccupancyState::full(200), &params).unwrap();
        assert!(rec.survived);
        assert_eq!(rec.steps(), 300);
        let plateau = plateau_density(&rec, 0.5).unwrap();
        assert!(!plateau.extinct);
        assert!(plateau.density > 0.85, "plateau {}", plateau.density);
    }

    #[test]
    fn plateau_of_extinct_run_is_zero_and_flagged() {
        let g = k4();
        let params = ProcessParams {
            p: 0.0,
            theta: 2,
            seed: 0,
            t_max: 10,
            stop_below: None,
        };
        let rec = run(&g, &OccupancyState::full(4), &params).unwrap();
        assert_eq!(rec.extinction_time, Some(1));
        let est = plateau_density(&rec, 0.5).unwrap();
        assert!(est.extinct);
        assert_eq!(est.density, 0.0);
    }

    #[test]
    fn coupling_is_monotone_in_p_on_a_shared_seed() {
        let g = sample_simple_regular(&GraphConfig::new(120, 4, 11)).unwrap().graph;
        let coins = CoinField::new(77);
        let mut lo = OccupancyState::full(120);
        let mut hi = OccupancyState::full(120);
        for t in 0..60 {
            lo = step(&g, &lo, 0.5, 2, &coins, t);
            hi = step(&g, &hi, 0.8, 2, &coins, t);
            assert!(lo.is_subset_of(&hi), "violated at t={t}");
        }
    }

    #[test]
    fn init_specs_parse_build_and_round_trip() {
        let full: InitSpec = "full".parse().unwrap();
        assert_eq!(full.build(10, 0).unwrap().count(), 10);
        assert_eq!(full.to_string(), "full");

        let rnd: InitSpec = "random:0.3".parse().unwrap();
        let s = rnd.build(500, 1).unwrap();
        assert_eq!(s.count(), 150);
        assert_eq!(rnd.to_string(), "random:0.3");
        assert_eq!(rnd.build(500, 1).unwrap(), s);

        assert!("random:1.5".parse::<InitSpec>().is_err());
        assert!("bogus".parse::<InitSpec>().is_err());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("init.txt");
        std::fs::write(&path, "# seed vertices\n0\n2\n").unwrap();
        let spec: InitSpec = format!("file:{}", path.display()).parse().unwrap();
        assert_eq!(spec.build(4, 0).unwrap().members(), vec![0, 2]);
        assert!(spec.build(2, 0).is_err(), "vertex 2 out of range for n=2");
    }

    #[test]
    fn state_bookkeeping() {
        let mut s = OccupancyState::empty(70);
        assert_eq!(s.count(), 0);
        s.insert(0);
        s.insert(69);
        s.insert(69);
        assert_eq!(s.count(), 2);
        assert!(s.get(69) && s.get(0) && !s.get(35));
        assert_eq!(s.members(), vec![0, 69]);
        assert!(OccupancyState::from_members(70, &[0, 0]).is_err());
        assert!(OccupancyState::from_members(70, &[70]).is_err());
        assert!(s.is_subset_of(&OccupancyState::full(70)));
        assert!(!OccupancyState::full(70).is_subset_of(&s));
    }
}
