//! Exact small-case oracles by exhaustive pairing enumeration.
//!
//! Counts every perfect matching on the n*r half-edges in a canonical order
//! (lowest unmatched half-edge first, partners ascending) and reduces event
//! counts to exact rationals. Budgets refuse anything beyond ~1e7 pairings;
//! these routines exist to validate the samplers, not to scale.

use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::gen::{pairing_to_multigraph, HalfEdgePairing};

/// Enumeration budget in visited pairings.
pub const PAIRING_BUDGET: u128 = 10_000_000;

/// f(u) = u! / ((u/2)! 2^(u/2)), the number of perfect matchings on u points.
pub fn pairing_count(u: u32) -> Result<u64> {
    if !u.is_multiple_of(2) {
        return Err(Error::invalid(format!("no perfect matchings on {u} points")));
    }
    if u > 20 {
        return Err(Error::invalid(format!(
            "pairing_count({u}) exceeds the supported range (u <= 20)"
        )));
    }
    Ok((1..u as u64).step_by(2).product())
}

fn enumeration_size(n: u32, r: u32) -> Result<u64> {
    let total = n
        .checked_mul(r)
        .ok_or_else(|| Error::invalid("n*r overflows"))?;
    if total % 2 != 0 {
        return Err(Error::invalid(format!(
            "n*r = {total} is odd, nothing to enumerate"
        )));
    }
    let needed: u128 = (1..total as u128).step_by(2).product();
    if needed > PAIRING_BUDGET {
        return Err(Error::BudgetExceeded {
            needed,
            budget: PAIRING_BUDGET,
        });
    }
    Ok(needed as u64)
}

/// Visits every pairing of the n*r half-edges exactly once, in canonical
/// order. The visitor sees the partner involution: partner[h] is matched
/// with h. Returns the number of pairings visited.
pub fn enumerate_pairings(n: u32, r: u32, mut visit: impl FnMut(&[u32])) -> Result<u64> {
    enumeration_size(n, r)?;
    let total = (n * r) as usize;
    let mut partner = vec![u32::MAX; total];
    let mut visited = 0u64;
    recurse(&mut partner, 0, &mut visited, &mut visit);
    Ok(visited)
}

fn recurse(partner: &mut [u32], from: usize, visited: &mut u64, visit: &mut impl FnMut(&[u32])) {
    let mut a = from;
    while a < partner.len() && partner[a] != u32::MAX {
        a += 1;
    }
    if a == partner.len() {
        *visited += 1;
        visit(partner);
        return;
    }
    for b in a + 1..partner.len() {
        if partner[b] == u32::MAX {
            partner[a] = b as u32;
            partner[b] = a as u32;
            recurse(partner, a + 1, visited, visit);
            partner[a] = u32::MAX;
            partner[b] = u32::MAX;
        }
    }
}

/// Exact distribution of the number of matching pairs crossing between the
/// half-edges of vertices [0, m) and the rest. By exchangeability this is the
/// cross-edge count distribution of any m-vertex subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossEdgePmf {
    pub n: u32,
    pub r: u32,
    pub m: u32,
    pub conditioned_simple: bool,
    /// Pairings entering the distribution (all, or only simple ones).
    pub total: u64,
    /// (s, count, probability), ascending in s, zero-count entries omitted.
    pub entries: Vec<(u32, u64, Rational64)>,
}

impl CrossEdgePmf {
    pub fn mass_sum(&self) -> Rational64 {
        self.entries.iter().map(|e| e.2).sum()
    }

    pub fn mean(&self) -> Rational64 {
        self.entries
            .iter()
            .map(|&(s, _, p)| Rational64::from_integer(s as i64) * p)
            .sum()
    }

    pub fn probability_of(&self, s: u32) -> Rational64 {
        self.entries
            .iter()
            .find(|e| e.0 == s)
            .map(|e| e.2)
            .unwrap_or_else(|| Rational64::from_integer(0))
    }
}

pub fn exact_cross_edge_pmf(n: u32, r: u32, m: u32, conditioned_simple: bool) -> Result<CrossEdgePmf> {
    if m > n {
        return Err(Error::invalid(format!("m={m} exceeds n={n}")));
    }
    let cut = (m * r) as usize;
    let mut counts = vec![0u64; cut + 1];
    let mut total = 0u64;
    enumerate_pairings(n, r, |partner| {
        if conditioned_simple && !is_simple(n, r, partner) {
            return;
        }
        total += 1;
        let s = partner[..cut].iter().filter(|&&p| p as usize >= cut).count();
        counts[s] += 1;
    })?;
    if total == 0 {
        return Err(Error::InsufficientData(
            "no pairings satisfied the conditioning".into(),
        ));
    }
    let entries = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(s, &c)| {
            (
                s as u32,
                c,
                Rational64::new(c as i64, total as i64),
            )
        })
        .collect();
    Ok(CrossEdgePmf {
        n,
        r,
        m,
        conditioned_simple,
        total,
        entries,
    })
}

fn is_simple(n: u32, r: u32, partner: &[u32]) -> bool {
    pairing_to_multigraph(&HalfEdgePairing::from_partner(n, r, partner.to_vec())).is_simple()
}

/// Set events whose probability the oracle can evaluate exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// Some m-subset U has |U*2| >= k.
    StarTwoAtLeast,
    /// Some m-subset U has |U*1| <= k.
    StarOneAtMost,
    /// Some m-subset W blocks more than k vertices: |((W^c)*2)^c| > k.
    BlockedExceeds,
}

impl std::str::FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "E" => Ok(EventKind::StarTwoAtLeast),
            "H" => Ok(EventKind::StarOneAtMost),
            "F" => Ok(EventKind::BlockedExceeds),
            other => Err(Error::invalid(format!(
                "unknown event {other:?} (expected E|H|F)"
            ))),
        }
    }
}

impl std::fmt::Display for EventKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EventKind::StarTwoAtLeast => "E",
            EventKind::StarOneAtMost => "H",
            EventKind::BlockedExceeds => "F",
        })
    }
}

/// Exact probability that some m-subset triggers the event at level k.
///
/// Multigraph outcomes enter through their collapsed adjacency: neighbors are
/// distinct vertices joined by at least one edge, self-loops contribute
/// nothing. Conditioned on simplicity the collapse is the identity.
pub fn exact_event_probability(
    n: u32,
    r: u32,
    m: u32,
    k: u32,
    event: EventKind,
    conditioned_simple: bool,
) -> Result<Rational64> {
    if m > n || m == 0 {
        return Err(Error::invalid(format!("m={m} must be in 1..={n}")));
    }
    let pairings = enumeration_size(n, r)? as u128;
    let subsets = binomial(n as u64, m as u64);
    if pairings * subsets > PAIRING_BUDGET {
        return Err(Error::BudgetExceeded {
            needed: pairings * subsets,
            budget: PAIRING_BUDGET,
        });
    }

    let mut hits = 0u64;
    let mut total = 0u64;
    enumerate_pairings(n, r, |partner| {
        let mg = pairing_to_multigraph(&HalfEdgePairing::from_partner(n, r, partner.to_vec()));
        if conditioned_simple && !mg.is_simple() {
            return;
        }
        total += 1;
        let mut adj = vec![vec![]; n as usize];
        for &(u, v) in &mg.edges {
            if u != v && !adj[u as usize].contains(&v) {
                adj[u as usize].push(v);
                adj[v as usize].push(u);
            }
        }
        hits += some_subset_triggers(n, m, k, event, &adj) as u64;
    })?;
    if total == 0 {
        return Err(Error::InsufficientData(
            "no pairings satisfied the conditioning".into(),
        ));
    }
    Ok(Rational64::new(hits as i64, total as i64))
}

fn some_subset_triggers(n: u32, m: u32, k: u32, event: EventKind, adj: &[Vec<u32>]) -> bool {
    let mut subset: Vec<u32> = (0..m).collect();
    loop {
        let in_subset = |v: u32| subset.binary_search(&v).is_ok();
        let count_in = |v: u32| adj[v as usize].iter().filter(|&&w| in_subset(w)).count() as u32;
        let hit = match event {
            EventKind::StarTwoAtLeast => {
                (0..n).filter(|&v| count_in(v) >= 2).count() as u32 >= k
            }
            EventKind::StarOneAtMost => (0..n).filter(|&v| count_in(v) >= 1).count() as u32 <= k,
            EventKind::BlockedExceeds => {
                // blocked = fewer than two distinct neighbors outside the subset
                (0..n)
                    .filter(|&v| (adj[v as usize].len() as u32 - count_in(v)) < 2)
                    .count() as u32
                    > k
            }
        };
        if hit {
            return true;
        }
        if !next_combination(&mut subset, n) {
            return false;
        }
    }
}

fn next_combination(subset: &mut [u32], n: u32) -> bool {
    let m = subset.len();
    let mut i = m;
    while i > 0 {
        i -= 1;
        if subset[i] < n - (m - i) as u32 {
            subset[i] += 1;
            for j in i + 1..m {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut out: u128 = 1;
    for i in 0..k {
        out = out * (n - i) as u128 / (i + 1) as u128;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frac(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    #[test]
    fn matching_counts() {
        assert_eq!(pairing_count(0).unwrap(), 1);
        assert_eq!(pairing_count(2).unwrap(), 1);
        assert_eq!(pairing_count(4).unwrap(), 3);
        assert_eq!(pairing_count(6).unwrap(), 15);
        assert_eq!(pairing_count(10).unwrap(), 945);
        assert_eq!(pairing_count(12).unwrap(), 10395);
        assert_eq!(pairing_count(20).unwrap(), 654_729_075);
        assert!(pairing_count(5).is_err());
        assert!(pairing_count(22).is_err());
    }

    #[test]
    fn enumeration_matches_counts_and_canonical_order() {
        let mut seen = Vec::new();
        let visited = enumerate_pairings(2, 2, |p| seen.push(p.to_vec())).unwrap();
        assert_eq!(visited, 3);
        assert_eq!(
            seen,
            vec![
                vec![1, 0, 3, 2],
                vec![2, 3, 0, 1],
                vec![3, 2, 1, 0],
            ]
        );

        for (n, r) in [(1u32, 2u32), (3, 2), (2, 3), (5, 2), (4, 3), (6, 2)] {
            let mut visited = 0;
            let reported = enumerate_pairings(n, r, |_| visited += 1).unwrap();
            assert_eq!(reported, visited);
            assert_eq!(visited, pairing_count(n * r).unwrap());
        }
    }

    #[test]
    fn enumeration_budget_is_enforced() {
        // f(18) = 34459425 exceeds the 1e7 budget
        let err = enumerate_pairings(6, 3, |_| {}).unwrap_err();
        match err {
            Error::BudgetExceeded { needed, budget } => {
                assert_eq!(needed, 34_459_425);
                assert_eq!(budget, PAIRING_BUDGET);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn two_vertex_cross_edge_distribution() {
        let pmf = exact_cross_edge_pmf(2, 2, 1, false).unwrap();
        assert_eq!(pmf.total, 3);
        assert_eq!(pmf.probability_of(0), frac(1, 3));
        assert_eq!(pmf.probability_of(2), frac(2, 3));
        assert_eq!(pmf.probability_of(1), frac(0, 1));
        assert_eq!(pmf.mass_sum(), frac(1, 1));
        assert_eq!(pmf.mean(), frac(4, 3));
    }

    #[test]
    fn four_vertex_cubic_distribution_all_and_simple() {
        let pmf = exact_cross_edge_pmf(4, 3, 2, false).unwrap();
        assert_eq!(pmf.total, 10395);
        assert_eq!(pmf.probability_of(0), frac(5, 231));
        assert_eq!(pmf.probability_of(2), frac(30, 77));
        assert_eq!(pmf.probability_of(4), frac(40, 77));
        assert_eq!(pmf.probability_of(6), frac(16, 231));
        assert_eq!(pmf.mass_sum(), frac(1, 1));
        assert_eq!(pmf.mean(), frac(36, 11));

        // conditioned on simplicity only K4 remains, where every pair cuts 4 edges
        let pmf = exact_cross_edge_pmf(4, 3, 2, true).unwrap();
        assert_eq!(pmf.total, 1296);
        assert_eq!(pmf.entries, vec![(4, 1296, frac(1, 1))]);

        // and every single vertex cuts its full degree
        let pmf = exact_cross_edge_pmf(4, 3, 1, true).unwrap();
        assert_eq!(pmf.entries, vec![(3, 1296, frac(1, 1))]);
    }

    #[test]
    fn five_vertex_two_regular_distribution() {
        let pmf = exact_cross_edge_pmf(5, 2, 2, false).unwrap();
        assert_eq!(pmf.total, 945);
        assert_eq!(pmf.probability_of(0), frac(1, 21));
        assert_eq!(pmf.probability_of(2), frac(4, 7));
        assert_eq!(pmf.probability_of(4), frac(8, 21));
        assert_eq!(pmf.mean(), frac(8, 3));

        // simple outcomes are the 12 labeled 5-cycles (384 pairings); a fixed
        // pair of vertices is adjacent in half of them
        let pmf = exact_cross_edge_pmf(5, 2, 2, true).unwrap();
        assert_eq!(pmf.total, 384);
        assert_eq!(pmf.probability_of(2), frac(1, 2));
        assert_eq!(pmf.probability_of(4), frac(1, 2));
    }

    #[test]
    fn unconditioned_mean_matches_half_edge_formula() {
        // E[s] = rm * r(n-m) / (rn - 1)
        for (n, r, m) in [(2u32, 2u32, 1u32), (4, 3, 2), (5, 2, 2), (4, 3, 1), (6, 2, 3)] {
            let pmf = exact_cross_edge_pmf(n, r, m, false).unwrap();
            let expected = frac(
                (r * m) as i64 * (r * (n - m)) as i64,
                (r * n - 1) as i64,
            );
            assert_eq!(pmf.mean(), expected, "n={n} r={r} m={m}");
        }
    }

    #[test]
    fn event_probabilities_on_small_cases() {
        use EventKind::*;
        let p = |n, r, m, k, ev, cond| exact_event_probability(n, r, m, k, ev, cond).unwrap();

        // conditioned on simplicity, (4,3) is K4
        assert_eq!(p(4, 3, 4, 4, StarTwoAtLeast, true), frac(1, 1));
        assert_eq!(p(4, 3, 2, 2, StarTwoAtLeast, true), frac(1, 1));
        assert_eq!(p(4, 3, 1, 0, StarOneAtMost, true), frac(0, 1));
        // any K4 triple blocks all 4 vertices
        assert_eq!(p(4, 3, 3, 3, BlockedExceeds, true), frac(1, 1));
        assert_eq!(p(4, 3, 3, 4, BlockedExceeds, true), frac(0, 1));

        // unconditioned probabilities reweight by multigraph outcomes
        assert_eq!(p(4, 3, 2, 2, StarTwoAtLeast, false), frac(24, 77));
        // a singleton is isolated iff both its half-edges self-pair: 1/3 at n=r=2
        assert_eq!(p(2, 2, 1, 0, StarOneAtMost, false), frac(1, 3));
        assert_eq!(p(2, 2, 1, 1, StarTwoAtLeast, false), frac(0, 1));
    }

    #[test]
    fn event_budget_guard_counts_subsets() {
        let err = exact_event_probability(6, 3, 3, 1, EventKind::StarTwoAtLeast, false).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }
}
