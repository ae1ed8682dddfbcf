//! Analytic constants for the extinction and persistence regimes.
//!
//! Everything here is a closed form or a bracketed root. The epsilon
//! thresholds shrink like exp(-K/eta) or exp(-K/eta^2) and underflow f64 for
//! every parameter choice of practical interest, so they are carried as
//! [`LogValue`]s (natural log). Feed the harness its own empirical thresholds;
//! these constants are for reporting and cross-checking, not for driving
//! desk-scale experiments.

use crate::error::{Error, Result};

const LN_2: f64 = std::f64::consts::LN_2;
const LN_10: f64 = std::f64::consts::LN_10;

/// Residual tolerance for root finding and algebraic identities.
pub const ROOT_TOL: f64 = 1e-12;

/// A positive quantity stored as its natural logarithm, so values far below
/// the smallest subnormal stay exact enough to compare and report.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogValue {
    ln: f64,
}

impl LogValue {
    pub fn from_ln(ln: f64) -> Self {
        assert!(!ln.is_nan(), "log-value from NaN");
        LogValue { ln }
    }

    pub fn from_natural(x: f64) -> Self {
        assert!(x > 0.0 && x.is_finite(), "log-value needs a positive finite input, got {x}");
        LogValue { ln: x.ln() }
    }

    pub fn ln(self) -> f64 {
        self.ln
    }

    pub fn log10(self) -> f64 {
        self.ln / LN_10
    }

    /// The value itself; underflows to 0.0 below roughly exp(-745).
    pub fn natural(self) -> f64 {
        self.ln.exp()
    }

    pub fn min(self, other: Self) -> Self {
        LogValue { ln: self.ln.min(other.ln) }
    }
}

impl std::fmt::Display for LogValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.ln.abs() <= 700.0 {
            write!(f, "{:.9e}", self.natural())
        } else {
            write!(f, "10^{:.4}", self.log10())
        }
    }
}

fn check_unit_open(name: &str, x: f64) -> Result<()> {
    if !(x.is_finite() && 0.0 < x && x < 1.0) {
        return Err(Error::invalid(format!("{name} = {x} must lie in (0, 1)")));
    }
    Ok(())
}

fn check_degree(r: u32) -> Result<()> {
    if r < 2 {
        return Err(Error::invalid(format!("degree r = {r} must be at least 2")));
    }
    Ok(())
}

/// x ln x - x + 1; zero only at x = 1, positive elsewhere on (0, inf).
pub fn gamma(x: f64) -> Result<f64> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::invalid(format!("gamma needs x > 0, got {x}")));
    }
    Ok(x * x.ln() - x + 1.0)
}

/// x ln(1/x) on (0, 1]; maximized at x = 1/e with value 1/e.
pub fn phi(x: f64) -> Result<f64> {
    if !(x.is_finite() && 0.0 < x && x <= 1.0) {
        return Err(Error::invalid(format!("phi needs x in (0, 1], got {x}")));
    }
    Ok(-x * x.ln())
}

/// (1-d) ln(1-d) / d on (0, 1); tends to -1 as d -> 0 and to 0 as d -> 1.
pub fn psi(d: f64) -> Result<f64> {
    check_unit_open("psi argument", d)?;
    Ok((1.0 - d) * (-d).ln_1p() / d)
}

/// The decay exponent eta(p): positive solution of (p+eta)(1+eta) = (1+p)/2.
/// Decreasing from (sqrt(3)-1)/2 at p=0 to 0 at p=1.
pub fn eta_of_p(p: f64) -> Result<f64> {
    if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
        return Err(Error::invalid(format!("p = {p} must lie in [0, 1]")));
    }
    Ok(((3.0 + p * p).sqrt() - (1.0 + p)) / 2.0)
}

/// Shape exponent of the sub-horizon survival bound. With
/// q = ln(1+eta)/ln(2/(1+p)) < 1, picks the largest margin b that keeps both
/// b <= eta^2/(16r) and b + (b+1) q < 1, backing off the latter by 1%.
pub fn b_of_p(p: f64, r: u32) -> Result<f64> {
    check_unit_open("p", p)?;
    check_degree(r)?;
    let eta = eta_of_p(p)?;
    let q = eta.ln_1p() / (2.0 / (1.0 + p)).ln();
    let cap_curvature = eta * eta / (16.0 * r as f64);
    let cap_margin = 0.99 * (1.0 - q) / (1.0 + q);
    Ok(cap_curvature.min(cap_margin))
}

/// Extinction-time scale constants: t = C ln n horizons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Horizon {
    /// Sub-horizon: density starts collapsing by c01 ln n.
    pub c01: f64,
    /// Tail horizon: the remnant dies within another c02 ln n.
    pub c02: f64,
    /// Total: c0 = c01 + c02 = 2/ln(2/(1+p)).
    pub c0: f64,
}

pub fn horizon_constants(p: f64, r: u32) -> Result<Horizon> {
    check_unit_open("p", p)?;
    let b = b_of_p(p, r)?;
    let rate = (2.0 / (1.0 + p)).ln();
    Ok(Horizon {
        c01: (1.0 - b) / rate,
        c02: (b + 1.0) / rate,
        c0: 2.0 / rate,
    })
}

/// Unique positive root of e^{-u b} = 1 - (u - eta) b.
///
/// The root sits in (2 eta/u^2, 1/(u-eta)); bisection brackets it there. The
/// upper bracket is inflated by 1e-9 so the endpoint stays strictly positive
/// even when e^{-u/(u-eta)} underflows or rounds below zero.
pub fn beta_root(u: f64, eta: f64) -> Result<f64> {
    if !(u.is_finite() && u > 0.0 && eta.is_finite() && 0.0 < eta && eta < u) {
        return Err(Error::invalid(format!(
            "beta root needs 0 < eta < u, got u = {u}, eta = {eta}"
        )));
    }
    let g = |b: f64| (-u * b).exp() - 1.0 + (u - eta) * b;
    let mut lo = eta / (u * u);
    let mut hi = (1.0 + 1e-9) / (u - eta);
    if g(lo) >= 0.0 {
        // only reachable through rounding noise at sub-1e-8 eta, where the
        // whole bracket already satisfies the residual tolerance
        if g(lo).abs() <= ROOT_TOL {
            return Ok(lo);
        }
        return Err(Error::invalid(format!(
            "no sign change bracketing the beta root at u = {u}, eta = {eta}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    if g(root).abs() > ROOT_TOL {
        return Err(Error::invalid(format!(
            "beta root residual {} exceeds tolerance at u = {u}, eta = {eta}",
            g(root)
        )));
    }
    Ok(root)
}

/// c2(u, eta) = u - eta + eta ln(1/beta(u, eta)), the rate whose maximum over
/// eta is Delta2.
fn c2_rate(u: f64, eta: f64) -> Result<f64> {
    Ok(u - eta - eta * beta_root(u, eta)?.ln())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deltas {
    pub delta1: f64,
    pub delta2: f64,
    /// Maximizer of the c2 rate; interior to (0, r) by construction.
    pub eta_star: f64,
}

/// Delta1 = r(2 + 1/e) + 3/2 closed-form; Delta2 = max of c2(r, .) over
/// (0, r) by a 10^4-point grid refined with golden-section to 1e-9.
pub fn delta_constants(r: u32) -> Result<Deltas> {
    check_degree(r)?;
    let u = r as f64;
    let delta1 = u * (2.0 + std::f64::consts::E.recip()) + 1.5;

    const GRID: usize = 10_000;
    let at = |i: usize| u * i as f64 / (GRID + 1) as f64;
    let mut best = (1, c2_rate(u, at(1))?);
    for i in 2..=GRID {
        let v = c2_rate(u, at(i))?;
        if v > best.1 {
            best = (i, v);
        }
    }
    if best.0 == GRID {
        // c2 -> -inf at the right edge, so the max must be interior
        return Err(Error::invalid(format!(
            "c2 maximizer pinned to the grid edge at r = {r}"
        )));
    }
    let mut a = if best.0 >= 2 { at(best.0 - 1) } else { u * 1e-12 };
    let mut b = at(best.0 + 1);
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = c2_rate(u, x1)?;
    let mut f2 = c2_rate(u, x2)?;
    while b - a > 1e-9 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = c2_rate(u, x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = c2_rate(u, x1)?;
        }
    }
    let eta_star = 0.5 * (a + b);
    Ok(Deltas {
        delta1,
        delta2: c2_rate(u, eta_star)?.max(best.1),
        eta_star,
    })
}

/// The epsilon thresholds derived from one eta. All are at most 1/e; the
/// primed ones are pure exponentials and usually underflow f64.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonCascade {
    /// min{ 1/(1+r+r^2), beta(r, eta/2) }
    pub eps5: LogValue,
    /// exp(-8 r (2 + Delta1 + Delta2) / eta^2)
    pub eps3_prime: LogValue,
    /// min{ 1/e, eps5, eps3' }; increasing in eta
    pub eps3: LogValue,
    /// exp(-8 (2 + Delta1 + Delta2) / eta)
    pub eps4_prime: LogValue,
    /// min{ 1/e, eps5, eps4' }
    pub eps4: LogValue,
}

pub fn epsilon_cascade(eta: f64, r: u32) -> Result<EpsilonCascade> {
    check_degree(r)?;
    let u = r as f64;
    if !(eta.is_finite() && 0.0 < eta && eta < u) {
        return Err(Error::invalid(format!(
            "epsilon cascade needs 0 < eta < r, got eta = {eta}, r = {r}"
        )));
    }
    let deltas = delta_constants(r)?;
    let k = 2.0 + deltas.delta1 + deltas.delta2;
    let inv_e = LogValue::from_ln(-1.0);
    let eps5 = LogValue::from_natural((1.0 / (1.0 + u + u * u)).min(beta_root(u, eta / 2.0)?));
    let eps3_prime = LogValue::from_ln(-8.0 * u * k / (eta * eta));
    let eps4_prime = LogValue::from_ln(-8.0 * k / eta);
    Ok(EpsilonCascade {
        eps5,
        eps3_prime,
        eps3: inv_e.min(eps5).min(eps3_prime),
        eps4_prime,
        eps4: inv_e.min(eps5).min(eps4_prime),
    })
}

/// Density-jump threshold as a function of p: the eps3 cascade evaluated at
/// eta(p). Decreasing and continuous in p.
pub fn eps2_of_p(p: f64, r: u32) -> Result<LogValue> {
    check_unit_open("p", p)?;
    Ok(epsilon_cascade(eta_of_p(p)?, r)?.eps3)
}

/// Constants of the persistence regime at occupation probability p_choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistenceConstants {
    pub p_choice: f64,
    /// eps1 = eps4(eta); the density scale the process never drops below.
    pub eps1: LogValue,
    /// kappa = 3/(2r-4) + eta < 1.
    pub kappa: f64,
    /// Admissibility gap 1 - p_min = (1-kappa) eps1 / (1 - kappa eps1).
    pub one_minus_p_min: LogValue,
    /// p_min rounded to f64; indistinguishable from 1.0 whenever the gap
    /// underflows, which it does for every r >= 4, eta < 1/4.
    pub p_min: f64,
    /// Half the slack between p_choice and p_min.
    pub delta: LogValue,
    /// Persistence rate: survival for exp(c1 n) steps.
    pub c1: LogValue,
}

/// Evaluates the persistence constants, requiring r >= 4, 0 < eta < 1/4 (so
/// kappa < 1) and p_choice above the admissibility threshold p_min. The gap
/// 1 - p_min is of order eps1, far below f64 resolution around 1, so the only
/// representable admissible choice is p_choice = 1.0 exactly.
pub fn persistence_constants(eta: f64, r: u32, p_choice: f64) -> Result<PersistenceConstants> {
    if r < 4 {
        return Err(Error::invalid(format!(
            "persistence constants need r >= 4, got r = {r}"
        )));
    }
    if !(eta.is_finite() && 0.0 < eta && eta < 0.25) {
        return Err(Error::invalid(format!(
            "persistence constants need 0 < eta < 1/4, got eta = {eta}"
        )));
    }
    if !(p_choice.is_finite() && 0.0 < p_choice && p_choice <= 1.0) {
        return Err(Error::invalid(format!(
            "p_choice = {p_choice} must lie in (0, 1]"
        )));
    }
    let eps1 = epsilon_cascade(eta, r)?.eps4;
    let kappa = 3.0 / (2.0 * r as f64 - 4.0) + eta;
    // ln(1 - kappa eps1); the product is at most kappa * exp(-573), so this
    // is 0 to f64 but kept for form
    let ln_one_minus_kap_eps1 = (-kappa * eps1.natural()).ln_1p();
    let ln_gap = (1.0 - kappa).ln() + eps1.ln() - ln_one_minus_kap_eps1;
    let gap = LogValue::from_ln(ln_gap);
    let admissible = p_choice == 1.0 || (1.0 - p_choice).ln() < ln_gap;
    if !admissible {
        return Err(Error::invalid(format!(
            "persistence hypothesis violated: p_choice = {p_choice} is not above \
             the threshold p_min = 1 - 10^{:.4}",
            gap.log10()
        )));
    }
    let slack_ln = if p_choice == 1.0 {
        ln_gap
    } else {
        ln_gap + (-((1.0 - p_choice).ln() - ln_gap).exp()).ln_1p()
    };
    let delta = LogValue::from_ln(slack_ln - LN_2);

    let term1 = eta.ln() + eps1.ln() - 16f64.ln() + (LN_2 - eps1.ln()).ln();
    let s_ln = delta.ln() - p_choice.ln();
    let s = s_ln.exp();
    let ln_gamma = if s > 1e-5 {
        gamma(1.0 - s)?.ln()
    } else {
        // Gamma(1-s) = s^2/2 (1 + s/3 + O(s^2)) for small s
        2.0 * s_ln - LN_2 + (s / 3.0).ln_1p()
    };
    let term2 = ln_gamma + p_choice.ln() + ln_one_minus_kap_eps1;
    let c1 = LogValue::from_ln(term1.min(term2) - LN_2);

    Ok(PersistenceConstants {
        p_choice,
        eps1,
        kappa,
        one_minus_p_min: gap,
        p_min: 1.0 - gap.natural(),
        delta,
        c1,
    })
}

/// exp(m ln(n/m) + m), an upper bound on the number of m-subsets of n items.
pub fn subset_count_bound(n: u64, m: u64) -> Result<LogValue> {
    if m == 0 || m > n {
        return Err(Error::invalid(format!("need 1 <= m <= n, got m = {m}, n = {n}")));
    }
    let (n, m) = (n as f64, m as f64);
    Ok(LogValue::from_ln(m * (n.ln() - m.ln()) + m))
}

/// One row of every constant at a given (r, p), with the eta-side cascade
/// evaluated at eta(p) unless overridden.
#[derive(Debug, Clone)]
pub struct BoundsTable {
    pub r: u32,
    pub p: f64,
    pub eta: f64,
    pub eta_overridden: bool,
    pub b: f64,
    pub horizon: Horizon,
    pub deltas: Deltas,
    /// beta(r, eta)
    pub beta: f64,
    pub cascade: EpsilonCascade,
    /// eps3(eta(p)) regardless of any eta override
    pub eps2: LogValue,
    /// Persistence constants at p_choice = 1, present when r >= 4 and
    /// eta < 1/4.
    pub persistence: Option<PersistenceConstants>,
    pub persistence_note: Option<String>,
}

impl BoundsTable {
    pub fn compute(r: u32, p: f64, eta_override: Option<f64>) -> Result<BoundsTable> {
        let eta = match eta_override {
            Some(e) => e,
            None => eta_of_p(p)?,
        };
        let horizon = horizon_constants(p, r)?;
        let (persistence, persistence_note) = match persistence_constants(eta, r, 1.0) {
            Ok(t) => (Some(t), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Ok(BoundsTable {
            r,
            p,
            eta,
            eta_overridden: eta_override.is_some(),
            b: b_of_p(p, r)?,
            horizon,
            deltas: delta_constants(r)?,
            beta: beta_root(r as f64, eta)?,
            cascade: epsilon_cascade(eta, r)?,
            eps2: eps2_of_p(p, r)?,
            persistence,
            persistence_note,
        })
    }

    fn rows(&self) -> Vec<(String, String, String)> {
        fn plain(v: f64) -> (String, String) {
            let log10 = if v > 0.0 { format!("{:.6}", v.log10()) } else { String::new() };
            (format!("{v:.12e}"), log10)
        }
        fn logged(v: LogValue) -> (String, String) {
            (format!("{:.9e}", v.natural()), format!("{:.6}", v.log10()))
        }
        let mut rows: Vec<(String, String, String)> = Vec::new();
        let mut push = |name: &str, (value, log10): (String, String)| {
            rows.push((name.to_string(), value, log10));
        };
        push("r", (self.r.to_string(), String::new()));
        push("p", plain(self.p));
        push("eta", plain(self.eta));
        push("b", plain(self.b));
        push("c01", plain(self.horizon.c01));
        push("c02", plain(self.horizon.c02));
        push("c0", plain(self.horizon.c0));
        push("delta1", plain(self.deltas.delta1));
        push("delta2", plain(self.deltas.delta2));
        push("beta", plain(self.beta));
        push("eps5", logged(self.cascade.eps5));
        push("eps3_prime", logged(self.cascade.eps3_prime));
        push("eps3", logged(self.cascade.eps3));
        push("eps4_prime", logged(self.cascade.eps4_prime));
        push("eps4", logged(self.cascade.eps4));
        push("eps2", logged(self.eps2));
        if let Some(t) = &self.persistence {
            push("eps1", logged(t.eps1));
            push("kappa", plain(t.kappa));
            push("one_minus_p_threshold", logged(t.one_minus_p_min));
            push("delta_at_p1", logged(t.delta));
            push("c1_at_p1", logged(t.c1));
        }
        rows
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,value,log10\n");
        for (name, value, log10) in self.rows() {
            out.push_str(&format!("{name},{value},{log10}\n"));
        }
        out
    }
}

impl std::fmt::Display for BoundsTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (name, value, log10) in self.rows() {
            if log10.is_empty() {
                writeln!(f, "{name:<24}{value}")?;
            } else {
                writeln!(f, "{name:<24}{value}  (log10 {log10})")?;
            }
        }
        if let Some(note) = &self.persistence_note {
            writeln!(f, "{:<24}{note}", "persistence")?;
        }
        Ok(())
    }
}
