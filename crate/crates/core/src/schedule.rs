//! Forced-exploration times and the deterministic threshold quantities that
//! go with them.
//!
//! The raw grid is `tau_1 = 1`, `tau_k = floor(exp(q k))` for `k >= 2`; for
//! small `q` the first values repeat, so the schedule keeps only distinct ones.

use thiserror::Error;
use twofloat::TwoFloat;

/// Consecutive steps over which a threshold inequality must hold before the
/// scan accepts it.
pub const PERMANENCE_WINDOW: u64 = 10;

/// Hard stop for the threshold scans.
pub const SCAN_LIMIT: u64 = 1_000_000_000;

/// Onset scans step one at a time up to here before switching to bisection.
const LINEAR_SCAN: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("invalid schedule parameter: {0}")]
    InvalidParameter(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("no time found below the scan limit {0}")]
    ScanLimit(u64),
}

/// Distinct forced-sampling times up to `horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcedSchedule {
    q: f64,
    horizon: u64,
    times: Vec<u64>,
}

impl ForcedSchedule {
    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// Strictly increasing, starts at 1.
    pub fn times(&self) -> &[u64] {
        &self.times
    }

    pub fn contains(&self, t: u64) -> bool {
        self.times.binary_search(&t).is_ok()
    }

    /// `N(t)`: number of schedule times `<= t`.
    pub fn count_upto(&self, t: u64) -> usize {
        self.times.partition_point(|&tau| tau <= t)
    }
}

/// Build the deduplicated schedule `{1} ∪ {floor(exp(q k)) : k >= 2}` capped at `horizon`.
pub fn build_schedule(q: f64, horizon: u64) -> Result<ForcedSchedule, ScheduleError> {
    if !(q.is_finite() && q > 0.0) {
        return Err(ScheduleError::InvalidParameter(format!(
            "q must be finite and > 0, got {q}"
        )));
    }
    if horizon == 0 {
        return Err(ScheduleError::InvalidParameter("horizon must be >= 1".into()));
    }
    let mut times = vec![1u64];
    let mut k: u64 = 2;
    loop {
        let exponent = q * k as f64;
        // Stop before exp overflows or passes the horizon.
        if exponent > (horizon as f64 + 1.0).ln() + 1.0 {
            break;
        }
        let tau = floor_exp(q, k);
        if tau > horizon {
            break;
        }
        if tau != *times.last().unwrap() {
            times.push(tau);
        }
        k += 1;
    }
    Ok(ForcedSchedule { q, horizon, times })
}

/// `floor(exp(q k))`, recomputed in double-double precision when the `f64`
/// result sits within one ulp of an integer.
pub fn floor_exp(q: f64, k: u64) -> u64 {
    let value = (q * k as f64).exp();
    let nearest = value.round();
    let ulp = f64::EPSILON * value.abs().max(f64::MIN_POSITIVE);
    if (value - nearest).abs() > ulp {
        return value.floor() as u64;
    }
    let exponent = TwoFloat::new_mul(q, k as f64);
    let precise = exponent.exp();
    let diff = precise - nearest;
    if diff < TwoFloat::from(0.0) {
        nearest as u64 - 1
    } else {
        nearest as u64
    }
}

/// `ln_+(x) = max(ln x, 0)`.
fn ln_plus(x: f64) -> f64 {
    x.ln().max(0.0)
}

/// `nu = 1 + ln_+(2 / (e^q - 1)) / q`: from this index on the raw grid has no repeats.
pub fn nu(q: f64) -> f64 {
    1.0 + ln_plus(2.0 / q.exp_m1()) / q
}

/// `(nu, nu0)` with `nu0 = max(nu, min{t : t >= (2/q) ln(t + 1)})`.
pub fn thresholds(q: f64) -> Result<(f64, f64), ScheduleError> {
    if !(q.is_finite() && q > 0.0) {
        return Err(ScheduleError::InvalidParameter(format!(
            "q must be finite and > 0, got {q}"
        )));
    }
    let nu = nu(q);
    let mut t: u64 = 1;
    while (t as f64) < 2.0 / q * ((t + 1) as f64).ln() {
        t += 1;
        if t > SCAN_LIMIT {
            return Err(ScheduleError::ScanLimit(SCAN_LIMIT));
        }
    }
    Ok((nu, nu.max(t as f64)))
}

/// Upper bound `ln(t + 1) / q` on the schedule count.
pub fn count_upper_bound(q: f64, t: u64) -> f64 {
    ((t + 1) as f64).ln() / q
}

/// Lower bound `ln(t / (nu + 1)) / q - 1` on the schedule count, valid for `t > nu`.
pub fn count_lower_bound(q: f64, t: u64) -> Option<f64> {
    let nu = nu(q);
    if (t as f64) > nu {
        Some((t as f64 / (nu + 1.0)).ln() / q - 1.0)
    } else {
        None
    }
}

/// First `t >= 1` such that `holds(s)` for every `s` in `t..t + PERMANENCE_WINDOW`.
///
/// `holds` must be of the form `ln t >= g(ln t)` with the gap decreasing up to
/// `turn` and increasing after it, so the set where it holds is an initial
/// segment followed by a tail. Past `turn` the tail is located by bisection.
fn first_permanent(mut holds: impl FnMut(u64) -> bool, turn: f64) -> Result<u64, ScheduleError> {
    let turn = if turn.is_finite() && turn >= 1.0 {
        turn.ceil()
    } else {
        1.0
    };
    if turn > SCAN_LIMIT as f64 {
        return if (1..=PERMANENCE_WINDOW).all(&mut holds) {
            Ok(1)
        } else {
            Err(ScheduleError::ScanLimit(SCAN_LIMIT))
        };
    }
    let turn = turn as u64;
    let scan_end = turn.saturating_add(PERMANENCE_WINDOW).min(LINEAR_SCAN);
    let mut start: u64 = 1;
    let mut run: u64 = 0;
    for t in 1..=scan_end {
        if holds(t) {
            if run == 0 {
                start = t;
            }
            run += 1;
            if run == PERMANENCE_WINDOW {
                return Ok(start);
            }
        } else {
            run = 0;
        }
    }
    if scan_end >= turn {
        // Monotone from here on: a run in progress never breaks.
        if run > 0 {
            return Ok(start);
        }
        return first_true_after(holds, scan_end);
    }
    // The initial segment is shorter than the window and the gap keeps
    // shrinking until `turn`, so the answer lies in the monotone tail.
    first_true_after(holds, turn)
}

/// First `t > from` with `holds(t)`, for `holds` monotone on `(from, inf)`.
fn first_true_after(mut holds: impl FnMut(u64) -> bool, from: u64) -> Result<u64, ScheduleError> {
    let mut lo = from;
    let mut hi = from.max(1).saturating_mul(2);
    while !holds(hi) {
        if hi >= SCAN_LIMIT {
            return Err(ScheduleError::ScanLimit(SCAN_LIMIT));
        }
        lo = hi;
        hi = hi.saturating_mul(2).min(SCAN_LIMIT);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Onset time of the nearly-myopic analysis:
/// first `t` with `x0 sqrt(p t) >= 8 sigma sqrt(3 ln t)` holding permanently.
pub fn t0(p: f64, sigma: f64, x0: f64) -> Result<u64, ScheduleError> {
    check_class(p, sigma, x0)?;
    first_permanent(|t| t0_holds(p, sigma, x0, t), std::f64::consts::E)
}

pub fn t0_holds(p: f64, sigma: f64, x0: f64, t: u64) -> bool {
    let t = t as f64;
    x0 * (p * t).sqrt() >= 8.0 * sigma * (3.0 * t.ln()).sqrt()
}

/// Exponent `4 alpha / (alpha - 2)`, tending to 4 as `alpha -> inf`.
fn t_alpha_exponent(alpha: f64) -> f64 {
    if alpha.is_infinite() {
        4.0
    } else {
        4.0 * alpha / (alpha - 2.0)
    }
}

pub fn t_alpha_holds(p: f64, sigma: f64, alpha: f64, t: u64) -> bool {
    let tf = t as f64;
    let base = 8.0 * 3f64.sqrt() * sigma * (tf.ln() / p).sqrt();
    tf >= base.powf(t_alpha_exponent(alpha))
}

/// First `t` with `t >= (8 sqrt(3) sigma sqrt(ln t / p))^(4 alpha / (alpha - 2))`
/// holding permanently; defined for `alpha > 2` (including `alpha = inf`).
pub fn t_alpha(p: f64, sigma: f64, alpha: f64) -> Result<u64, ScheduleError> {
    if !(alpha > 2.0) {
        return Err(ScheduleError::NotApplicable(format!(
            "t_alpha needs alpha > 2, got {alpha}"
        )));
    }
    if !(p > 0.0 && p < 1.0 + 1e-15 && sigma > 0.0) {
        return Err(ScheduleError::InvalidParameter(format!(
            "need p in (0, 1] and sigma > 0, got p={p}, sigma={sigma}"
        )));
    }
    first_permanent(
        |t| t_alpha_holds(p, sigma, alpha, t),
        (0.5 * t_alpha_exponent(alpha)).exp(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OnsetTimes {
    pub t0: u64,
    /// Present only for `alpha > 2`.
    pub t_alpha: Option<u64>,
}

/// `t0` together with `t_alpha` when the latter is defined.
pub fn onset_times(p: f64, sigma: f64, x0: f64, alpha: f64) -> Result<OnsetTimes, ScheduleError> {
    let t0 = t0(p, sigma, x0)?;
    let t_alpha = if alpha > 2.0 {
        Some(t_alpha(p, sigma, alpha)?)
    } else {
        None
    };
    Ok(OnsetTimes { t0, t_alpha })
}

fn check_class(p: f64, sigma: f64, x0: f64) -> Result<(), ScheduleError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(ScheduleError::InvalidParameter(format!(
            "p must lie in (0, 1), got {p}"
        )));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(ScheduleError::InvalidParameter(format!(
            "sigma must be > 0, got {sigma}"
        )));
    }
    if !(x0 > 0.0 && x0 <= 0.5) {
        return Err(ScheduleError::InvalidParameter(format!(
            "x0 must lie in (0, 1/2], got {x0}"
        )));
    }
    Ok(())
}
