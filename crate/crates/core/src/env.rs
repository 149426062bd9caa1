//! Bandit instances, covariate laws and class-membership certificates.
//!
//! Arm 0 always pays 0. Arm 1 pays `x - theta + eps` with `eps ~ N(0, sigma^2)`.
//! Nothing in this module owns randomness: covariates are produced from a
//! caller-supplied uniform variate by inverse-CDF transform, and noise is
//! passed in by the simulator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest boundary radius handed out by [`margin_params`].
pub const MAX_CERTIFIED_X0: f64 = 0.25;

/// Distance between the adversarial density's support and its residual atoms.
pub const ADVERSARIAL_ATOM_OFFSET: f64 = 1.0;

const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("not certifiable: {0}")]
    NotCertifiable(String),
    #[error("infeasible construction: {0}")]
    InfeasibleConstruction(String),
}

/// Law of the covariate `X`.
///
/// Serialized with a `family` tag so it can be written directly in experiment
/// configs, e.g. `{"family": "uniform", "lo": -1, "hi": 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovariateDistribution {
    /// Uniform on `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
    /// `x_plus` with probability `prob_plus`, otherwise `x_minus`.
    TwoPoint { x_minus: f64, x_plus: f64, prob_plus: f64 },
    /// Density proportional to `|x - center|^(alpha - 1)` on
    /// `[center - half_width, center + half_width]`.
    PowerMargin { alpha: f64, center: f64, half_width: f64 },
    /// Two-hypothesis density used by the minimax lower bound.
    ///
    /// On `[-x0, delta/2]` the density is `c_star * alpha * |x|^(alpha-1) / 2`,
    /// on `[delta/2, delta + x0]` it is `c_star * alpha * |x - delta|^(alpha-1) / 2`.
    /// The remaining mass is split equally between atoms at `atom_left` and
    /// `atom_right`.
    AdversarialMargin {
        alpha: f64,
        c_star: f64,
        x0: f64,
        delta: f64,
        atom_left: f64,
        atom_right: f64,
    },
}

impl CovariateDistribution {
    /// Adversarial density with residual atoms placed one unit outside its
    /// continuous support.
    pub fn adversarial(alpha: f64, c_star: f64, x0: f64, delta: f64) -> Self {
        CovariateDistribution::AdversarialMargin {
            alpha,
            c_star,
            x0,
            delta,
            atom_left: -(x0 + ADVERSARIAL_ATOM_OFFSET),
            atom_right: delta + x0 + ADVERSARIAL_ATOM_OFFSET,
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |msg: String| Err(EnvError::InvalidDistribution(msg));
        match *self {
            CovariateDistribution::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return bad(format!("uniform requires finite lo < hi, got [{lo}, {hi}]"));
                }
            }
            CovariateDistribution::TwoPoint {
                x_minus,
                x_plus,
                prob_plus,
            } => {
                if !(x_minus.is_finite() && x_plus.is_finite() && x_minus < x_plus) {
                    return bad(format!(
                        "two_point requires finite x_minus < x_plus, got {x_minus}, {x_plus}"
                    ));
                }
                if !(prob_plus > 0.0 && prob_plus < 1.0) {
                    return bad(format!("two_point prob_plus must lie in (0, 1), got {prob_plus}"));
                }
            }
            CovariateDistribution::PowerMargin {
                alpha,
                center,
                half_width,
            } => {
                if !(alpha.is_finite() && alpha > 0.0) {
                    return bad(format!("power_margin alpha must be finite and > 0, got {alpha}"));
                }
                if !(center.is_finite() && half_width.is_finite() && half_width > 0.0) {
                    return bad(format!(
                        "power_margin requires finite center and half_width > 0, got {center}, {half_width}"
                    ));
                }
            }
            CovariateDistribution::AdversarialMargin {
                alpha,
                c_star,
                x0,
                delta,
                atom_left,
                atom_right,
            } => {
                if !(alpha.is_finite() && alpha > 0.0) {
                    return bad(format!("adversarial alpha must be finite and > 0, got {alpha}"));
                }
                if !(c_star.is_finite() && c_star > 0.0) {
                    return bad(format!("adversarial c_star must be > 0, got {c_star}"));
                }
                if !(x0 > 0.0 && x0 < 0.5) {
                    return bad(format!("adversarial x0 must lie in (0, 1/2), got {x0}"));
                }
                if !(delta.is_finite() && delta > 0.0) {
                    return bad(format!("adversarial delta must be > 0, got {delta}"));
                }
                let inner = adversarial_inner_mass(alpha, c_star, x0, delta);
                if !(inner < 1.0) {
                    return bad(format!(
                        "adversarial mass c_star*(x0^alpha + (delta/2)^alpha) = {inner} must be < 1"
                    ));
                }
                if !(atom_left < -x0 && atom_right > delta + x0) {
                    return bad(format!(
                        "adversarial atoms must lie outside [{}, {}], got {atom_left}, {atom_right}",
                        -x0,
                        delta + x0
                    ));
                }
                let total = inner + 2.0 * self.atom_mass();
                if (total - 1.0).abs() > MASS_TOLERANCE {
                    return bad(format!("adversarial masses sum to {total}"));
                }
            }
        }
        Ok(())
    }

    /// Mass of each residual atom of the adversarial law; zero for other families.
    pub fn atom_mass(&self) -> f64 {
        match *self {
            CovariateDistribution::AdversarialMargin {
                alpha,
                c_star,
                x0,
                delta,
                ..
            } => 0.5 * (1.0 - adversarial_inner_mass(alpha, c_star, x0, delta)),
            _ => 0.0,
        }
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            CovariateDistribution::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            CovariateDistribution::TwoPoint {
                x_minus,
                x_plus,
                prob_plus,
            } => {
                if x < x_minus {
                    0.0
                } else if x < x_plus {
                    1.0 - prob_plus
                } else {
                    1.0
                }
            }
            CovariateDistribution::PowerMargin {
                alpha,
                center,
                half_width,
            } => {
                let s = ((x - center) / half_width).clamp(-1.0, 1.0);
                if s < 0.0 {
                    0.5 * (1.0 - (-s).powf(alpha))
                } else {
                    0.5 * (1.0 + s.powf(alpha))
                }
            }
            CovariateDistribution::AdversarialMargin {
                alpha,
                c_star,
                x0,
                delta,
                atom_left,
                atom_right,
            } => {
                let atom = self.atom_mass();
                let half_c = 0.5 * c_star;
                let outer = half_c * x0.powf(alpha);
                let inner = half_c * (0.5 * delta).powf(alpha);
                if x < atom_left {
                    0.0
                } else if x < -x0 {
                    atom
                } else if x < 0.0 {
                    atom + half_c * (x0.powf(alpha) - (-x).powf(alpha))
                } else if x < 0.5 * delta {
                    atom + outer + half_c * x.powf(alpha)
                } else if x < delta {
                    atom + outer + 2.0 * inner - half_c * (delta - x).powf(alpha)
                } else if x < delta + x0 {
                    atom + outer + 2.0 * inner + half_c * (x - delta).powf(alpha)
                } else if x < atom_right {
                    1.0 - atom
                } else {
                    1.0
                }
            }
        }
    }

    /// Generalized inverse `inf { x : F(x) >= u }` for `u` in `[0, 1]`.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match *self {
            CovariateDistribution::Uniform { lo, hi } => lo + u * (hi - lo),
            CovariateDistribution::TwoPoint {
                x_minus,
                x_plus,
                prob_plus,
            } => {
                if u <= 1.0 - prob_plus {
                    x_minus
                } else {
                    x_plus
                }
            }
            CovariateDistribution::PowerMargin {
                alpha,
                center,
                half_width,
            } => {
                let inv = 1.0 / alpha;
                if u < 0.5 {
                    center - half_width * (1.0 - 2.0 * u).powf(inv)
                } else {
                    center + half_width * (2.0 * u - 1.0).powf(inv)
                }
            }
            CovariateDistribution::AdversarialMargin {
                alpha,
                c_star,
                x0,
                delta,
                atom_left,
                atom_right,
            } => {
                let inv = 1.0 / alpha;
                let atom = self.atom_mass();
                let half_c = 0.5 * c_star;
                let outer = half_c * x0.powf(alpha);
                let inner = half_c * (0.5 * delta).powf(alpha);
                if u <= atom {
                    return atom_left;
                }
                let v = u - atom;
                if v <= outer {
                    // F(x) = atom + half_c * (x0^a - |x|^a) on [-x0, 0]
                    let r = (x0.powf(alpha) - v / half_c).max(0.0);
                    -r.powf(inv)
                } else if v <= outer + inner {
                    ((v - outer) / half_c).max(0.0).powf(inv)
                } else if v <= outer + 2.0 * inner {
                    let r = ((outer + 2.0 * inner - v) / half_c).max(0.0);
                    delta - r.powf(inv)
                } else if v <= 2.0 * outer + 2.0 * inner {
                    let r = ((v - outer - 2.0 * inner) / half_c).max(0.0);
                    (delta + r.powf(inv)).min(delta + x0)
                } else {
                    atom_right
                }
            }
        }
    }

    /// One draw from a single uniform variate.
    pub fn sample(&self, u: f64) -> f64 {
        self.inverse_cdf(u)
    }

    /// `P(lo <= X <= hi)` over a closed interval.
    pub fn prob_closed(&self, lo: f64, hi: f64) -> f64 {
        if hi < lo {
            return 0.0;
        }
        (self.cdf(hi) - self.cdf_below(lo)).max(0.0)
    }

    /// `P(X >= x)`.
    pub fn upper_tail(&self, x: f64) -> f64 {
        1.0 - self.cdf_below(x)
    }

    /// `P(X < x)`: the left limit of the CDF, which differs from `cdf` only at atoms.
    pub fn cdf_below(&self, x: f64) -> f64 {
        match *self {
            CovariateDistribution::TwoPoint {
                x_minus,
                x_plus,
                prob_plus,
            } => {
                if x <= x_minus {
                    0.0
                } else if x <= x_plus {
                    1.0 - prob_plus
                } else {
                    1.0
                }
            }
            CovariateDistribution::AdversarialMargin {
                atom_left, atom_right, ..
            } => {
                let atom = self.atom_mass();
                if x == atom_left {
                    0.0
                } else if x == atom_right {
                    1.0 - atom
                } else {
                    self.cdf(x)
                }
            }
            _ => self.cdf(x),
        }
    }

    /// `E|X|`-style mean absolute deviation `E|X - theta|`, in closed form.
    pub fn mean_abs_deviation(&self, theta: f64) -> f64 {
        match *self {
            CovariateDistribution::Uniform { lo, hi } => {
                let width = hi - lo;
                if theta <= lo {
                    0.5 * (lo + hi) - theta
                } else if theta >= hi {
                    theta - 0.5 * (lo + hi)
                } else {
                    ((theta - lo).powi(2) + (hi - theta).powi(2)) / (2.0 * width)
                }
            }
            CovariateDistribution::TwoPoint {
                x_minus,
                x_plus,
                prob_plus,
            } => (1.0 - prob_plus) * (x_minus - theta).abs() + prob_plus * (x_plus - theta).abs(),
            CovariateDistribution::PowerMargin {
                alpha,
                center,
                half_width,
            } => {
                // Standardize: X = center + half_width * S with E|S - s| = -s + 2 * int_{-1}^{s} F_S.
                let s = (theta - center) / half_width;
                let a1 = alpha + 1.0;
                let mad = if s <= -1.0 {
                    -s
                } else if s >= 1.0 {
                    s
                } else if s <= 0.0 {
                    let int_f = 0.5 * ((s + 1.0) - (1.0 - (-s).powf(a1)) / a1);
                    -s + 2.0 * int_f
                } else {
                    let int_f = 0.5 * (1.0 - 1.0 / a1) + 0.5 * (s + s.powf(a1) / a1);
                    -s + 2.0 * int_f
                };
                half_width * mad
            }
            CovariateDistribution::AdversarialMargin {
                alpha,
                c_star,
                x0,
                delta,
                atom_left,
                atom_right,
            } => {
                let atom = self.atom_mass();
                let half_c = 0.5 * c_star;
                // Each density piece is a power of the distance to its own centre c,
                // so integrate |x - theta| piecewise in that local coordinate.
                let piece = |c: f64, a: f64, b: f64| -> f64 { power_piece_abs_moment(alpha, half_c, c, a, b, theta) };
                atom * (atom_left - theta).abs()
                    + atom * (atom_right - theta).abs()
                    + piece(0.0, -x0, 0.5 * delta)
                    + piece(delta, 0.5 * delta, delta + x0)
            }
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(
            self,
            CovariateDistribution::Uniform { .. } | CovariateDistribution::PowerMargin { .. }
        )
    }

    /// Standard deviation of `X` where it has a simple closed form.
    pub fn std_dev(&self) -> Option<f64> {
        match *self {
            CovariateDistribution::Uniform { lo, hi } => Some((hi - lo) / 12f64.sqrt()),
            CovariateDistribution::TwoPoint {
                x_minus,
                x_plus,
                prob_plus,
            } => Some((x_plus - x_minus) * (prob_plus * (1.0 - prob_plus)).sqrt()),
            _ => None,
        }
    }
}

fn adversarial_inner_mass(alpha: f64, c_star: f64, x0: f64, delta: f64) -> f64 {
    c_star * (x0.powf(alpha) + (0.5 * delta).powf(alpha))
}

/// `int_a^b |x - theta| * k * alpha * |x - c|^(alpha-1) dx`, split at the kinks
/// `c` and `theta` so each sub-piece is a polynomial-in-power integral.
fn power_piece_abs_moment(alpha: f64, k: f64, c: f64, a: f64, b: f64, theta: f64) -> f64 {
    let mut cuts = vec![a, b];
    for p in [c, theta] {
        if p > a && p < b {
            cuts.push(p);
        }
    }
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let sign_theta = if mid >= theta { 1.0 } else { -1.0 };
        // On [lo, hi] with r = |x - c| monotone: x - theta = (x - c) + (c - theta).
        let dir = if mid >= c { 1.0 } else { -1.0 };
        let r_lo = (lo - c).abs();
        let r_hi = (hi - c).abs();
        let (r_a, r_b) = if r_lo < r_hi { (r_lo, r_hi) } else { (r_hi, r_lo) };
        // int k*alpha*r^(alpha-1) * (dir*r + (c - theta)) dr over [r_a, r_b]
        let m1 = k * alpha / (alpha + 1.0) * (r_b.powf(alpha + 1.0) - r_a.powf(alpha + 1.0));
        let m0 = k * (r_b.powf(alpha) - r_a.powf(alpha));
        total += sign_theta * (dir * m1 + (c - theta) * m0);
    }
    total
}

/// An environment with unknown location `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BanditInstance {
    pub theta: f64,
    pub sigma: f64,
    pub covariate: CovariateDistribution,
}

impl BanditInstance {
    pub fn new(theta: f64, sigma: f64, covariate: CovariateDistribution) -> Result<Self, EnvError> {
        let instance = BanditInstance {
            theta,
            sigma,
            covariate,
        };
        instance.validate()?;
        Ok(instance)
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if !self.theta.is_finite() {
            return Err(EnvError::InvalidInstance(format!(
                "theta must be finite, got {}",
                self.theta
            )));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(EnvError::InvalidInstance(format!(
                "sigma must be > 0, got {}",
                self.sigma
            )));
        }
        self.covariate.validate()
    }

    /// Arm-1 reward `x - theta + eps`. Arm 0 always pays zero.
    pub fn reward_arm1(&self, x: f64, eps: f64) -> f64 {
        x - self.theta + eps
    }

    /// The oracle's arm: 1 iff `x >= theta`.
    pub fn oracle_arm(&self, x: f64) -> bool {
        x >= self.theta
    }
}

/// Margin-class certificate `(alpha, C*, x0, p, p1, mu)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginParams {
    /// Margin exponent; `f64::INFINITY` when no mass sits near the boundary.
    pub alpha: f64,
    pub c_star: f64,
    pub x0: f64,
    pub p: f64,
    pub p1: f64,
    pub mu: Option<f64>,
}

impl MarginParams {
    /// `C* x^alpha` with the `alpha = inf` limit (0 for `x < 1`).
    pub fn margin_bound(&self, x: f64) -> f64 {
        self.c_star * x.powf(self.alpha)
    }
}

/// Closed-form class certificate for a built-in covariate law around `theta`.
///
/// `p` is the upper-tail mass at `theta` (a common lower bound of it for the
/// adversarial pair), and `x0` is the largest radius not above
/// [`MAX_CERTIFIED_X0`] that keeps `p1 = p - C* x0^alpha >= p / 2`.
pub fn margin_params(dist: &CovariateDistribution, theta: f64) -> Result<MarginParams, EnvError> {
    dist.validate().map_err(|e| EnvError::NotCertifiable(e.to_string()))?;
    if !theta.is_finite() {
        return Err(EnvError::NotCertifiable(format!("theta must be finite, got {theta}")));
    }
    let (alpha, c_star, geometric_x0, p) = match *dist {
        CovariateDistribution::Uniform { lo, hi } => {
            if !(theta > lo && theta < hi) {
                return Err(EnvError::NotCertifiable(format!(
                    "theta = {theta} must lie inside ({lo}, {hi})"
                )));
            }
            (1.0, 2.0 / (hi - lo), f64::INFINITY, (hi - theta) / (hi - lo))
        }
        CovariateDistribution::TwoPoint {
            x_minus,
            x_plus,
            prob_plus,
        } => {
            if !(theta > x_minus && theta < x_plus) {
                return Err(EnvError::NotCertifiable(format!(
                    "theta = {theta} must lie strictly between the atoms {x_minus} and {x_plus}"
                )));
            }
            let gap = (theta - x_minus).min(x_plus - theta);
            // The open boundary neighbourhood must exclude both atoms.
            let x0 = if gap > MAX_CERTIFIED_X0 {
                MAX_CERTIFIED_X0
            } else {
                0.5 * gap
            };
            (f64::INFINITY, 1.0, x0, prob_plus)
        }
        CovariateDistribution::PowerMargin {
            alpha,
            center,
            half_width,
        } => {
            if !(theta > center - half_width && theta < center + half_width) {
                return Err(EnvError::NotCertifiable(format!(
                    "theta = {theta} must lie inside the open support ({}, {})",
                    center - half_width,
                    center + half_width
                )));
            }
            let p = dist.upper_tail(theta);
            if theta == center || alpha <= 1.0 {
                // For alpha <= 1 the density peaks at the centre, so the centred
                // window carries the most mass of any window of the same width.
                (alpha, half_width.powf(-alpha), f64::INFINITY, p)
            } else {
                // Off-centre with alpha > 1: density bounded by alpha / (2 h).
                (1.0, alpha / half_width, f64::INFINITY, p)
            }
        }
        CovariateDistribution::AdversarialMargin {
            alpha,
            c_star,
            x0,
            delta,
            ..
        } => {
            let at_zero = theta.abs() <= 1e-12;
            let at_delta = (theta - delta).abs() <= 1e-12 * delta.max(1.0);
            if !(at_zero || at_delta) {
                return Err(EnvError::NotCertifiable(format!(
                    "adversarial law is certified only at theta = 0 or theta = delta = {delta}, got {theta}"
                )));
            }
            // Both hypotheses share one certificate; alpha < 1 needs a doubled
            // constant on the far side of delta/2.
            let c = if alpha >= 1.0 { c_star } else { 2.0 * c_star };
            let p = 0.5 - 0.5 * c_star * (0.5 * delta).powf(alpha);
            (alpha, c, x0, p)
        }
    };
    if !(p > 0.0 && p < 1.0) {
        return Err(EnvError::NotCertifiable(format!(
            "upper-tail mass {p} at theta must lie in (0, 1)"
        )));
    }
    let x0 = if alpha.is_infinite() {
        geometric_x0.min(MAX_CERTIFIED_X0)
    } else {
        let margin_limit = (p / (2.0 * c_star)).powf(1.0 / alpha);
        geometric_x0.min(MAX_CERTIFIED_X0).min(margin_limit)
    };
    let p1 = p - c_star * x0.powf(alpha);
    if !(p1 > 0.0) {
        return Err(EnvError::NotCertifiable(format!("p1 = {p1} must be positive")));
    }
    Ok(MarginParams {
        alpha,
        c_star,
        x0,
        p,
        p1,
        mu: Some(dist.mean_abs_deviation(theta)),
    })
}

/// `sigma * sqrt(alpha / n)`: the separation of the two lower-bound hypotheses.
pub fn adversarial_delta(alpha: f64, sigma: f64, n: u64) -> f64 {
    sigma * (alpha / n as f64).sqrt()
}

/// Two instances at `theta = 0` and `theta = delta*` sharing the adversarial law.
pub fn adversarial_pair(
    alpha: f64,
    c_star: f64,
    x0: f64,
    sigma: f64,
    n: u64,
) -> Result<(BanditInstance, BanditInstance, f64), EnvError> {
    if !(alpha.is_finite() && alpha > 0.0 && c_star > 0.0 && sigma > 0.0 && n >= 1) {
        return Err(EnvError::InfeasibleConstruction(format!(
            "need alpha, c_star, sigma > 0 and n >= 1 (alpha={alpha}, c_star={c_star}, sigma={sigma}, n={n})"
        )));
    }
    if !(x0 > 0.0 && x0 < 0.5) {
        return Err(EnvError::InfeasibleConstruction(format!(
            "x0 must lie in (0, 1/2), got {x0}"
        )));
    }
    let delta = adversarial_delta(alpha, sigma, n);
    let inner = adversarial_inner_mass(alpha, c_star, x0, delta);
    if !(inner < 1.0) {
        return Err(EnvError::InfeasibleConstruction(format!(
            "c_star*(x0^alpha + (delta/2)^alpha) = {inner} >= 1 at delta = {delta}"
        )));
    }
    let covariate = CovariateDistribution::adversarial(alpha, c_star, x0, delta);
    let null =
        BanditInstance::new(0.0, sigma, covariate).map_err(|e| EnvError::InfeasibleConstruction(e.to_string()))?;
    let alt =
        BanditInstance::new(delta, sigma, covariate).map_err(|e| EnvError::InfeasibleConstruction(e.to_string()))?;
    Ok((null, alt, delta))
}
