//! Closed-form bounds, proof constants, upper envelopes and growth-regime fits.

use std::f64::consts::{E, LN_2, PI};
use std::fmt;

use serde::Serialize;
use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::env::MarginParams;
use crate::schedule::{self, ScheduleError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("condition violated: {0}")]
    ConditionViolated(String),
    #[error("not enough data: {0}")]
    InsufficientData(String),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

fn check_positive(name: &str, v: f64) -> Result<(), AnalysisError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(AnalysisError::OutOfRange(format!(
            "{name} must be finite and >= 0, got {v}"
        )))
    }
}

/// Minimax lower bound on the inferior sampling rate over the margin class:
/// `(1/8) (alpha / 2e)^(alpha/2) C* sigma^alpha n^(1 - alpha/2)`, `alpha` in `(0, 2]`.
pub fn isr_lower_bound(alpha: f64, c_star: f64, sigma: f64, n: f64) -> Result<f64, AnalysisError> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(AnalysisError::OutOfRange(format!(
            "alpha must lie in (0, 2], got {alpha}"
        )));
    }
    check_positive("c_star", c_star)?;
    check_positive("sigma", sigma)?;
    check_positive("n", n)?;
    Ok(0.125 * (alpha / (2.0 * E)).powf(alpha / 2.0) * c_star * sigma.powf(alpha) * n.powf(1.0 - alpha / 2.0))
}

/// `2 max{1/x0, (2 C*)^(1/alpha)}`, the denominator shared by the regret bounds.
fn regret_denominator(alpha: f64, c_star: f64, x0: f64) -> f64 {
    2.0 * (1.0 / x0).max((2.0 * c_star).powf(1.0 / alpha))
}

/// Minimax lower bound on the regret, `alpha` in `(0, 1]`.
pub fn regret_lower_bound(alpha: f64, c_star: f64, sigma: f64, x0: f64, n: f64) -> Result<f64, AnalysisError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(AnalysisError::OutOfRange(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    check_positive("c_star", c_star)?;
    check_positive("sigma", sigma)?;
    check_positive("n", n)?;
    if !(x0 > 0.0) {
        return Err(AnalysisError::OutOfRange(format!("x0 must be > 0, got {x0}")));
    }
    let power = 1.0 + 1.0 / alpha;
    let numerator = 0.125f64.powf(power)
        * (alpha / (2.0 * E)).powf((alpha + 1.0) / 2.0)
        * c_star.powf(power)
        * sigma.powf(alpha + 1.0)
        * n.powf((1.0 - alpha) / 2.0);
    Ok(numerator / regret_denominator(alpha, c_star, x0))
}

/// Regret implied by an inferior sampling rate `s_n` under the margin condition:
/// `s_n^(1 + 1/alpha) n^(-1/alpha) / (2 max{1/x0, (2 C*)^(1/alpha)})`.
/// Negative `s_n` (e.g. a lower confidence limit) is clamped to 0.
pub fn lemma5_floor(s_n: f64, n: f64, alpha: f64, c_star: f64, x0: f64) -> f64 {
    let s = s_n.max(0.0);
    s.powf(1.0 + 1.0 / alpha) * n.powf(-1.0 / alpha) / regret_denominator(alpha, c_star, x0)
}

/// `2 exp(-x^2 tau / (4 sigma^2))`; values above 1 are vacuous but returned as is.
pub fn concentration_bound(x: f64, tau: f64, sigma: f64) -> f64 {
    2.0 * (-x * x * tau / (4.0 * sigma * sigma)).exp()
}

/// `sum_{t >= 2} t^(-s)` for `s > 1`: explicit terms up to 1000 plus an
/// Euler–Maclaurin tail, accurate far below `1e-12`.
fn zeta_tail_from_two(s: f64) -> f64 {
    const N: f64 = 1000.0;
    let head: f64 = (2..=N as u64).map(|t| (t as f64).powf(-s)).sum();
    let tail = N.powf(1.0 - s) / (s - 1.0) - 0.5 * N.powf(-s) + s / 12.0 * N.powf(-s - 1.0);
    head + tail
}

/// `sum_{t >= 2} exp(-a t)`, summed until the geometric tail drops below `1e-13`.
fn exp_series_from_two(a: f64) -> f64 {
    let ratio = (-a).exp();
    let mut term = ratio * ratio;
    let mut total = 0.0;
    while term / (1.0 - ratio) > 1e-13 {
        total += term;
        term *= ratio;
    }
    total
}

/// Constant of the nearly-myopic envelopes:
/// `8 sum t^-2 + 2 sum t^-6 + sum exp(-p^2 t / 32)`, all sums over `t >= 2`.
pub fn k_nearly_myopic(p: f64) -> f64 {
    8.0 * zeta_tail_from_two(2.0) + 2.0 * zeta_tail_from_two(6.0) + exp_series_from_two(p * p / 32.0)
}

/// `(alpha/2)^(alpha/2) / (1 - 2^-alpha) + Gamma(alpha/2) / (2 ln 2)`.
pub fn varkappa(alpha: f64) -> f64 {
    (alpha / 2.0).powf(alpha / 2.0) / (1.0 - 2f64.powf(-alpha)) + gamma(alpha / 2.0) / (2.0 * LN_2)
}

/// Absolute constant of the forced-sampling envelopes for fast margins,
/// `8 / (3 (1 - e^-1))`.
pub fn k2_forced() -> f64 {
    8.0 / (3.0 * (1.0 - (-1.0f64).exp()))
}

/// Class-dependent constant of the forced-sampling envelopes: `1 + nu0` plus
/// the bounds on the under-sampling and large-deviation sums.
pub fn k1_forced(q: f64, sigma: f64, x0: f64, p1: f64) -> Result<f64, AnalysisError> {
    let (nu, nu0) = schedule::thresholds(q)?;
    let under_sampling = 1.0 / (-(p1 * p1) / 64.0).exp_m1().abs()
        + PI * PI / 3.0 * (x0 * x0 / (4.0 * sigma * sigma) * (1.0 + (nu + 1.0).ln() / q)).exp();
    let large_deviation = 2.0 / (-(x0 * x0 * p1) / (8.0 * sigma * sigma)).exp_m1().abs();
    Ok(1.0 + nu0 + under_sampling + large_deviation)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    NearlyMyopic,
    ForcedSampling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    InferiorSampling,
    Regret,
}

/// Growth order of an upper envelope in `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateDescriptor {
    Finite,
    Log,
    LogSquared,
    /// `n^exponent (ln n)^log_power`.
    Power {
        exponent: f64,
        log_power: f64,
    },
}

impl fmt::Display for RateDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateDescriptor::Finite => write!(f, "finite (constant)"),
            RateDescriptor::Log => write!(f, "ln n"),
            RateDescriptor::LogSquared => write!(f, "(ln n)^2"),
            RateDescriptor::Power { exponent, log_power } if *log_power == 0.0 => write!(f, "n^{exponent}"),
            RateDescriptor::Power { exponent, log_power } => write!(f, "n^{exponent} (ln n)^{log_power}"),
        }
    }
}

/// Growth order of the worst-case metric for a policy at margin exponent `alpha`.
pub fn rate_descriptor(policy: PolicyKind, metric: MetricKind, alpha: f64) -> Result<RateDescriptor, AnalysisError> {
    if !(alpha > 0.0) {
        return Err(AnalysisError::OutOfRange(format!("alpha must be > 0, got {alpha}")));
    }
    // Regret behaves like the inferior sampling rate one margin order higher.
    let a = match metric {
        MetricKind::InferiorSampling => alpha,
        MetricKind::Regret => alpha + 1.0,
    };
    Ok(match policy {
        PolicyKind::NearlyMyopic => {
            if a > 2.0 {
                RateDescriptor::Finite
            } else if a == 2.0 {
                RateDescriptor::LogSquared
            } else {
                RateDescriptor::Power {
                    exponent: 1.0 - a / 2.0,
                    log_power: a / 2.0,
                }
            }
        }
        PolicyKind::ForcedSampling => {
            if a >= 2.0 {
                RateDescriptor::Log
            } else {
                RateDescriptor::Power {
                    exponent: 1.0 - a / 2.0,
                    log_power: 0.0,
                }
            }
        }
    })
}

/// Inputs to [`upper_envelope`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeQuery {
    pub policy: PolicyKind,
    pub metric: MetricKind,
    pub n: u64,
    pub sigma: f64,
    pub margin: MarginParams,
    /// Schedule rate, required for the forced-sampling policy.
    pub q: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Envelope {
    pub policy: PolicyKind,
    pub metric: MetricKind,
    pub n: u64,
    pub rate: RateDescriptor,
    pub rate_label: String,
    /// Numeric upper bound when every constant is evaluable; absent when an
    /// onset time lies beyond the scan limit.
    pub value: Option<f64>,
    /// True when the value was assembled from the individual proof summands.
    pub proof_assembled: bool,
}

/// Upper envelope on the worst-case metric of a policy.
///
/// The nearly-myopic envelope assumes the inflation `2 sigma sqrt(3 ln t)`.
/// The regret envelopes need `margin.mu`; without it only the rate is returned.
/// The forced-sampling envelope requires `x0^2 >= 12 q sigma^2` and is only
/// evaluated once `n >= nu0`.
pub fn upper_envelope(query: &EnvelopeQuery) -> Result<Envelope, AnalysisError> {
    let m = &query.margin;
    let alpha = m.alpha;
    let rate = rate_descriptor(query.policy, query.metric, alpha)?;
    if !(query.sigma.is_finite() && query.sigma > 0.0) {
        return Err(AnalysisError::OutOfRange(format!(
            "sigma must be > 0, got {}",
            query.sigma
        )));
    }
    if query.n == 0 {
        return Err(AnalysisError::OutOfRange("n must be >= 1".into()));
    }
    let value = match query.policy {
        PolicyKind::NearlyMyopic => nearly_myopic_value(query)?,
        PolicyKind::ForcedSampling => forced_value(query)?,
    };
    Ok(Envelope {
        policy: query.policy,
        metric: query.metric,
        n: query.n,
        rate,
        rate_label: rate.to_string(),
        value,
        proof_assembled: query.policy == PolicyKind::ForcedSampling && value.is_some(),
    })
}

fn nearly_myopic_value(query: &EnvelopeQuery) -> Result<Option<f64>, AnalysisError> {
    let m = &query.margin;
    let sigma = query.sigma;
    let mu = match (query.metric, m.mu) {
        (MetricKind::Regret, None) => return Ok(None),
        (_, mu) => mu.unwrap_or(0.0),
    };
    let a = match query.metric {
        MetricKind::InferiorSampling => m.alpha,
        MetricKind::Regret => m.alpha + 1.0,
    };
    let t0 = match schedule::t0(m.p, sigma, m.x0) {
        Ok(t) => t.max(2) as f64,
        Err(ScheduleError::ScanLimit(_)) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let k = k_nearly_myopic(m.p);
    let (burn_in, sum) = if a > 2.0 {
        let ta = match schedule::t_alpha(m.p, sigma, a) {
            Ok(t) => t as f64,
            Err(ScheduleError::ScanLimit(_)) => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let tail = if a.is_infinite() {
            0.0
        } else {
            4.0 * m.c_star / (a - 2.0)
        };
        (t0.max(ta), tail)
    } else {
        let base = 8.0 * 3f64.sqrt() * sigma / m.p.sqrt();
        let sum: f64 = (2..=query.n)
            .map(|t| {
                let t = t as f64;
                (base * (t.ln() / t).sqrt()).powf(a)
            })
            .sum();
        (t0, m.c_star * sum)
    };
    Ok(Some(match query.metric {
        MetricKind::InferiorSampling => burn_in + sum + k,
        MetricKind::Regret => mu * (burn_in + k) + sum,
    }))
}

fn forced_value(query: &EnvelopeQuery) -> Result<Option<f64>, AnalysisError> {
    let m = &query.margin;
    let sigma = query.sigma;
    let q = query
        .q
        .ok_or_else(|| AnalysisError::OutOfRange("forced-sampling envelope needs q".into()))?;
    if !(q.is_finite() && q > 0.0) {
        return Err(AnalysisError::OutOfRange(format!("q must be > 0, got {q}")));
    }
    if m.x0 * m.x0 < 12.0 * q * sigma * sigma {
        return Err(AnalysisError::ConditionViolated(format!(
            "need x0^2 >= 12 q sigma^2, but x0^2 = {} and 12 q sigma^2 = {}",
            m.x0 * m.x0,
            12.0 * q * sigma * sigma
        )));
    }
    let (_, nu0) = schedule::thresholds(q)?;
    if (query.n as f64) < nu0 {
        return Ok(None);
    }
    let mu = match (query.metric, m.mu) {
        (MetricKind::Regret, None) => return Ok(None),
        (_, mu) => mu.unwrap_or(0.0),
    };
    let k1 = k1_forced(q, sigma, m.x0, m.p1)?;
    let a = match query.metric {
        MetricKind::InferiorSampling => m.alpha,
        MetricKind::Regret => m.alpha + 1.0,
    };
    let scale = 32.0 * sigma * sigma / (m.x0 * m.x0 * m.p1);
    let forced = ((query.n + 1) as f64).ln() / q;
    let burn_in = 16.0 * a * sigma * sigma / (m.x0 * m.x0 * m.p1);
    let value = if a > 2.0 {
        let near_boundary = if a.is_infinite() {
            0.0
        } else {
            m.c_star * m.x0.powf(a) * (4.0 / (1.0 - 2f64.powf(2.0 - a)) * scale.powf(a / (a - 2.0)) + k2_forced())
        };
        match query.metric {
            MetricKind::InferiorSampling => forced + near_boundary + k1,
            MetricKind::Regret => mu * (forced + k1) + near_boundary,
        }
    } else {
        let per_step = 32.0 * sigma * sigma / m.p1;
        let sum: f64 = (1..=query.n).map(|t| (per_step / t as f64).powf(a / 2.0)).sum();
        let near_boundary = 6.0 * m.c_star * varkappa(a) * sum;
        match query.metric {
            MetricKind::InferiorSampling => near_boundary + forced + burn_in + k1,
            MetricKind::Regret => near_boundary + mu * (forced + burn_in + k1),
        }
    };
    Ok(Some(value))
}

/// Candidate growth models for [`fit_growth`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthModel {
    /// `v = a`.
    Constant,
    /// `v = a + b ln n`.
    Log,
    /// `v = a + b (ln n)^2`.
    LogSquared,
    /// `ln v = a + b ln n`; polylog factors are absorbed into the exponent.
    PowerTimesPolylog,
}

impl GrowthModel {
    fn parameter_count(self) -> usize {
        match self {
            GrowthModel::Constant => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateFit {
    pub model: GrowthModel,
    /// `[a]` for the constant model, `[a, b]` otherwise.
    pub parameters: Vec<f64>,
    pub r_squared: f64,
    pub aic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthFit {
    pub model: GrowthModel,
    pub parameters: Vec<f64>,
    pub r_squared: f64,
    pub selected_by: String,
    pub candidates: Vec<CandidateFit>,
}

impl GrowthFit {
    /// Exponent of `n` for the power model.
    pub fn exponent(&self) -> Option<f64> {
        (self.model == GrowthModel::PowerTimesPolylog).then(|| self.parameters[1])
    }

    pub fn candidate(&self, model: GrowthModel) -> Option<&CandidateFit> {
        self.candidates.iter().find(|c| c.model == model)
    }
}

const SELECTION_RULE: &str =
    "least squares per model; minimum AIC = m ln(RSS/m) + 2k in the value scale (log-axis fits carry the Jacobian 2 sum ln v); ties favour fewer parameters";

/// Relative residual size below which a fit is treated as exact.
const EXACT_FIT_SCALE: f64 = 1e-9;

struct LineFit {
    a: f64,
    b: f64,
    rss: f64,
    tss: f64,
}

fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rss = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let tss = ys.iter().map(|y| (y - my).powi(2)).sum();
    LineFit { a, b, rss, tss }
}

fn r_squared(rss: f64, tss: f64) -> f64 {
    if tss <= 0.0 {
        1.0
    } else {
        (1.0 - rss / tss).clamp(0.0, 1.0)
    }
}

/// Classify the growth of `value` in `n` among constant, `ln n`, `(ln n)^2`
/// and power-law models.
pub fn fit_growth(points: &[(f64, f64)]) -> Result<GrowthFit, AnalysisError> {
    if points.len() < 4 {
        return Err(AnalysisError::InsufficientData(format!(
            "need at least 4 points, got {}",
            points.len()
        )));
    }
    if points
        .iter()
        .any(|&(n, v)| !(n.is_finite() && n >= 1.0) || !v.is_finite())
    {
        return Err(AnalysisError::OutOfRange("n must be >= 1 and values finite".into()));
    }
    let mut ns: Vec<f64> = points.iter().map(|p| p.0).collect();
    ns.sort_by(f64::total_cmp);
    if ns.windows(2).any(|w| w[0] == w[1]) {
        return Err(AnalysisError::InsufficientData("n values must be distinct".into()));
    }

    let values: Vec<f64> = points.iter().map(|p| p.1).collect();
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let tss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    let constant = CandidateFit {
        model: GrowthModel::Constant,
        parameters: vec![mean],
        r_squared: if tss == 0.0 { 1.0 } else { 0.0 },
        aic: f64::NAN,
    };
    if values.iter().all(|&v| v == values[0]) {
        return Ok(GrowthFit {
            model: GrowthModel::Constant,
            parameters: constant.parameters.clone(),
            r_squared: 1.0,
            selected_by: "all values equal".into(),
            candidates: vec![CandidateFit {
                aic: f64::NEG_INFINITY,
                ..constant
            }],
        });
    }

    let rms = (values.iter().map(|v| v * v).sum::<f64>() / m).sqrt();
    let value_floor = m * (EXACT_FIT_SCALE * rms).powi(2);
    let log_floor = m * EXACT_FIT_SCALE.powi(2);
    let aic = |rss: f64, floor: f64, k: usize| m * (rss.max(floor) / m).ln() + 2.0 * k as f64;

    let mut candidates = vec![CandidateFit {
        aic: aic(tss, value_floor, 1),
        ..constant
    }];
    let ln_n: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ln_n_sq: Vec<f64> = ln_n.iter().map(|l| l * l).collect();
    for (model, xs) in [(GrowthModel::Log, &ln_n), (GrowthModel::LogSquared, &ln_n_sq)] {
        let fit = fit_line(xs, &values);
        candidates.push(CandidateFit {
            model,
            parameters: vec![fit.a, fit.b],
            r_squared: r_squared(fit.rss, fit.tss),
            aic: aic(fit.rss, value_floor, 2),
        });
    }
    if values.iter().all(|&v| v > 0.0) {
        let ln_v: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        let fit = fit_line(&ln_n, &ln_v);
        let jacobian = 2.0 * ln_v.iter().sum::<f64>();
        candidates.push(CandidateFit {
            model: GrowthModel::PowerTimesPolylog,
            parameters: vec![fit.a, fit.b],
            r_squared: r_squared(fit.rss, fit.tss),
            aic: aic(fit.rss, log_floor, 2) + jacobian,
        });
    }

    // Strict improvement is required to displace a candidate listed earlier,
    // and candidates are listed by increasing parameter count.
    let best = candidates
        .iter()
        .fold(None::<&CandidateFit>, |best, c| match best {
            Some(b) if !(c.aic < b.aic - 1e-9 * b.aic.abs().max(1.0)) => Some(b),
            _ => Some(c),
        })
        .expect("at least one candidate");
    debug_assert!(best.model.parameter_count() >= 1);
    Ok(GrowthFit {
        model: best.model,
        parameters: best.parameters.clone(),
        r_squared: best.r_squared,
        selected_by: SELECTION_RULE.into(),
        candidates,
    })
}

/// One row of the `bounds` table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRecord {
    pub alpha: f64,
    pub c_star: f64,
    pub sigma: f64,
    pub x0: Option<f64>,
    pub n: f64,
    /// Absent when `alpha` lies outside `(0, 2]`.
    pub isr_lower_bound: Option<f64>,
    /// Absent when `alpha` lies outside `(0, 1]` or `x0` is not given.
    pub regret_lower_bound: Option<f64>,
    pub adversarial_delta: f64,
}

pub fn bound_record(
    alpha: f64,
    c_star: f64,
    sigma: f64,
    x0: Option<f64>,
    n: f64,
) -> Result<BoundRecord, AnalysisError> {
    check_positive("c_star", c_star)?;
    check_positive("sigma", sigma)?;
    check_positive("n", n)?;
    let isr = isr_lower_bound(alpha, c_star, sigma, n).ok();
    let regret = x0.and_then(|x0| regret_lower_bound(alpha, c_star, sigma, x0, n).ok());
    Ok(BoundRecord {
        alpha,
        c_star,
        sigma,
        x0,
        n,
        isr_lower_bound: isr,
        regret_lower_bound: regret,
        adversarial_delta: sigma * (alpha / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn margin(alpha: f64, c_star: f64, x0: f64, p: f64, mu: Option<f64>) -> MarginParams {
        MarginParams {
            alpha,
            c_star,
            x0,
            p,
            p1: p - c_star * x0.powf(alpha),
            mu,
        }
    }

    #[test]
    fn lower_bound_ranges() {
        assert!(isr_lower_bound(2.5, 1.0, 1.0, 10.0).is_err());
        assert!(isr_lower_bound(0.0, 1.0, 1.0, 10.0).is_err());
        assert!(regret_lower_bound(1.5, 1.0, 1.0, 0.5, 10.0).is_err());
        assert_eq!(isr_lower_bound(1.0, 1.0, 0.0, 10.0).unwrap(), 0.0);
        assert_eq!(regret_lower_bound(1.0, 1.0, 0.0, 0.5, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn regret_bound_flat_at_unit_alpha() {
        let a = regret_lower_bound(1.0, 1.3, 0.7, 0.4, 10.0).unwrap();
        let b = regret_lower_bound(1.0, 1.3, 0.7, 0.4, 1e6).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lemma5_examples() {
        assert_eq!(lemma5_floor(0.0, 100.0, 1.0, 1.0, 0.5), 0.0);
        assert_eq!(lemma5_floor(-3.0, 100.0, 1.0, 1.0, 0.5), 0.0);
        assert_relative_eq!(lemma5_floor(100.0, 100.0, 1.0, 1.0, 0.5), 25.0, max_relative = 1e-15);
    }

    #[test]
    fn concentration_vacuous_limit() {
        assert_eq!(concentration_bound(1.0, 0.0, 1.0), 2.0);
    }

    #[test]
    fn k_series_matches_closed_form() {
        for p in [0.1f64, 0.5, 0.9] {
            let zeta2 = PI * PI / 6.0;
            let zeta6 = PI.powi(6) / 945.0;
            let r = (-(p * p) / 32.0).exp();
            let closed = 8.0 * (zeta2 - 1.0) + 2.0 * (zeta6 - 1.0) + r * r / (1.0 - r);
            assert_relative_eq!(k_nearly_myopic(p), closed, max_relative = 1e-11);
        }
    }

    #[test]
    fn varkappa_at_two() {
        // (1)^1 / (3/4) + Gamma(1) / (2 ln 2)
        assert_relative_eq!(varkappa(2.0), 4.0 / 3.0 + 1.0 / (2.0 * LN_2), max_relative = 1e-14);
    }

    #[test]
    fn rate_table() {
        use MetricKind::*;
        use PolicyKind::*;
        assert_eq!(
            rate_descriptor(NearlyMyopic, Regret, 2.0).unwrap(),
            RateDescriptor::Finite
        );
        assert_eq!(
            rate_descriptor(NearlyMyopic, Regret, 1.0).unwrap(),
            RateDescriptor::LogSquared
        );
        assert_eq!(
            rate_descriptor(NearlyMyopic, InferiorSampling, 2.0).unwrap(),
            RateDescriptor::LogSquared
        );
        assert_eq!(
            rate_descriptor(NearlyMyopic, InferiorSampling, 3.0).unwrap(),
            RateDescriptor::Finite
        );
        assert_eq!(
            rate_descriptor(NearlyMyopic, InferiorSampling, 1.0).unwrap(),
            RateDescriptor::Power {
                exponent: 0.5,
                log_power: 0.5
            }
        );
        assert_eq!(
            rate_descriptor(ForcedSampling, InferiorSampling, 1.0).unwrap(),
            RateDescriptor::Power {
                exponent: 0.5,
                log_power: 0.0
            }
        );
        assert_eq!(
            rate_descriptor(ForcedSampling, InferiorSampling, 2.0).unwrap(),
            RateDescriptor::Log
        );
        assert_eq!(
            rate_descriptor(ForcedSampling, Regret, 1.0).unwrap(),
            RateDescriptor::Log
        );
        assert_eq!(
            rate_descriptor(ForcedSampling, Regret, f64::INFINITY).unwrap(),
            RateDescriptor::Log
        );
        assert_eq!(
            rate_descriptor(NearlyMyopic, Regret, f64::INFINITY).unwrap(),
            RateDescriptor::Finite
        );
        assert_eq!(
            rate_descriptor(ForcedSampling, InferiorSampling, 1.0)
                .unwrap()
                .to_string(),
            "n^0.5"
        );
    }

    #[test]
    fn forced_condition_violated() {
        let q = EnvelopeQuery {
            policy: PolicyKind::ForcedSampling,
            metric: MetricKind::Regret,
            n: 1000,
            sigma: 1.0,
            margin: margin(2.0, 1.0, 0.25, 0.5, Some(0.5)),
            q: Some(1.0 / 12.0),
        };
        assert!(matches!(upper_envelope(&q), Err(AnalysisError::ConditionViolated(_))));
    }

    #[test]
    fn forced_envelope_evaluates_and_grows() {
        let base = EnvelopeQuery {
            policy: PolicyKind::ForcedSampling,
            metric: MetricKind::InferiorSampling,
            n: 1000,
            sigma: 0.25,
            margin: margin(1.0, 1.0, 0.25, 0.5, Some(0.5)),
            q: Some(1.0 / 12.0),
        };
        let small = upper_envelope(&base).unwrap();
        let large = upper_envelope(&EnvelopeQuery { n: 100_000, ..base }).unwrap();
        assert!(small.proof_assembled);
        assert!(large.value.unwrap() > small.value.unwrap());
        let early = upper_envelope(&EnvelopeQuery { n: 10, ..base }).unwrap();
        assert_eq!(early.value, None);
        let no_mu = EnvelopeQuery {
            metric: MetricKind::Regret,
            margin: margin(1.0, 1.0, 0.25, 0.5, None),
            ..base
        };
        assert_eq!(upper_envelope(&no_mu).unwrap().value, None);
    }

    #[test]
    fn nearly_myopic_envelope_is_finite_for_fast_margins() {
        let q = EnvelopeQuery {
            policy: PolicyKind::NearlyMyopic,
            metric: MetricKind::Regret,
            n: 1000,
            sigma: 0.01,
            margin: margin(f64::INFINITY, 1.0, 0.25, 0.5, Some(1.0)),
            q: None,
        };
        let a = upper_envelope(&q).unwrap();
        let b = upper_envelope(&EnvelopeQuery { n: 1_000_000, ..q }).unwrap();
        assert_eq!(a.rate, RateDescriptor::Finite);
        assert_eq!(a.value, b.value);
        assert!(a.value.unwrap() > k_nearly_myopic(0.5));
    }

    #[test]
    fn planted_models_recovered() {
        let ns = [250.0, 500.0, 750.0, 1000.0, 2000.0, 2500.0, 3000.0, 4000.0, 5000.0];
        let fit = |f: &dyn Fn(f64) -> f64| fit_growth(&ns.map(|n| (n, f(n)))).unwrap();

        let log = fit(&|n: f64| 3.0 * n.ln());
        assert_eq!(log.model, GrowthModel::Log);
        assert_relative_eq!(log.parameters[1], 3.0, max_relative = 1e-9);
        assert!(log.r_squared > 0.999_999);

        let power = fit(&|n: f64| 2.0 * n.sqrt());
        assert_eq!(power.model, GrowthModel::PowerTimesPolylog);
        assert_relative_eq!(power.exponent().unwrap(), 0.5, max_relative = 1e-9);

        let sq = fit(&|n: f64| 1.0 + 0.5 * n.ln().powi(2));
        assert_eq!(sq.model, GrowthModel::LogSquared);
        assert!(sq.r_squared > 0.999);

        let flat = fit(&|_| 4.0);
        assert_eq!(flat.model, GrowthModel::Constant);
        assert_eq!(flat.r_squared, 1.0);
    }

    #[test]
    fn fit_needs_four_distinct_points() {
        assert!(fit_growth(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]).is_err());
        assert!(fit_growth(&[(1.0, 1.0), (2.0, 2.0), (2.0, 3.0), (4.0, 1.0)]).is_err());
    }

    #[test]
    fn power_model_skipped_for_nonpositive_values() {
        let pts: Vec<(f64, f64)> = [10.0, 20.0, 40.0, 80.0]
            .iter()
            .map(|&n: &f64| (n, n.ln() - 3.0))
            .collect();
        let fit = fit_growth(&pts).unwrap();
        assert!(fit.candidate(GrowthModel::PowerTimesPolylog).is_none());
        assert_eq!(fit.model, GrowthModel::Log);
    }

    #[test]
    fn bound_record_fields() {
        let r = bound_record(2.0, 1.0, 1.0, None, 1000.0).unwrap();
        assert!(r.isr_lower_bound.is_some());
        assert!(r.regret_lower_bound.is_none());
        let r = bound_record(3.0, 1.0, 1.0, Some(0.5), 1000.0).unwrap();
        assert!(r.isr_lower_bound.is_none());
    }
}
