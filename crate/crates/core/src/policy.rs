//! Estimator of the unknown location and the four decision rules.
//!
//! Every rule decides step `t + 1` from statistics through step `t` plus the
//! freshly observed covariate. Ties at the threshold go to arm 1.

use thiserror::Error;

use crate::schedule::ForcedSchedule;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("theta_hat is undefined before the first arm-1 pull")]
    NoObservations,
    #[error("reward presence does not match the chosen arm (arm {arm}, reward present: {reward_present})")]
    RewardMismatch { arm: u8, reward_present: bool },
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
}

/// Arm index: `Zero` pays nothing, `One` pays `x - theta + eps`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arm {
    Zero,
    One,
}

impl Arm {
    pub fn from_indicator(pull: bool) -> Arm {
        if pull {
            Arm::One
        } else {
            Arm::Zero
        }
    }

    pub fn is_one(self) -> bool {
        self == Arm::One
    }

    pub fn index(self) -> u8 {
        match self {
            Arm::Zero => 0,
            Arm::One => 1,
        }
    }
}

/// Running sufficient statistics of an episode.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PolicyState {
    /// Steps completed.
    pub t: u64,
    /// Arm-1 pulls so far.
    pub pulls: u64,
    /// Sum of `x - y` over arm-1 pulls.
    pub sum_diff: f64,
}

impl PolicyState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Plug-in estimate `sum_diff / pulls`.
    pub fn theta_hat(&self) -> Result<f64, PolicyError> {
        theta_hat(self)
    }
}

pub fn theta_hat(state: &PolicyState) -> Result<f64, PolicyError> {
    if state.pulls == 0 {
        return Err(PolicyError::NoObservations);
    }
    Ok(state.sum_diff / state.pulls as f64)
}

/// Fold one step into the statistics. `y` must be present iff arm 1 was pulled.
pub fn update(state: PolicyState, x: f64, arm: Arm, y: Option<f64>) -> Result<PolicyState, PolicyError> {
    match (arm, y) {
        (Arm::One, Some(y)) => Ok(PolicyState {
            t: state.t + 1,
            pulls: state.pulls + 1,
            sum_diff: state.sum_diff + (x - y),
        }),
        (Arm::Zero, None) => Ok(PolicyState {
            t: state.t + 1,
            ..state
        }),
        (arm, y) => Err(PolicyError::RewardMismatch {
            arm: arm.index(),
            reward_present: y.is_some(),
        }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    /// Knows `theta`: pulls arm 1 iff `x >= theta`.
    Oracle { theta: f64 },
    /// Plug-in threshold at the current estimate.
    Myopic,
    /// Threshold deflated by `c * sqrt(ln t) / sqrt(pulls)`.
    NearlyMyopic { c: f64 },
    /// Arm 1 at every schedule time, plug-in threshold otherwise.
    ForcedSampling { schedule: ForcedSchedule },
}

impl PolicySpec {
    /// Nearly-myopic rule with the inflation used in the regret analysis,
    /// `delta_t = 2 sigma sqrt(3 ln t)`.
    pub fn nearly_myopic_theory(sigma: f64) -> Self {
        PolicySpec::NearlyMyopic {
            c: 2.0 * sigma * 3f64.sqrt(),
        }
    }

    pub fn validate(&self, horizon: u64) -> Result<(), PolicyError> {
        match self {
            PolicySpec::Oracle { theta } if theta.is_nan() => {
                Err(PolicyError::InvalidPolicy("oracle theta is NaN".into()))
            }
            PolicySpec::NearlyMyopic { c } if !(c.is_finite() && *c >= 0.0) => Err(PolicyError::InvalidPolicy(
                format!("nearly_myopic c must be finite and >= 0, got {c}"),
            )),
            PolicySpec::ForcedSampling { schedule } if schedule.horizon() < horizon => {
                Err(PolicyError::InvalidPolicy(format!(
                    "forced schedule covers {} steps but the episode runs {horizon}",
                    schedule.horizon()
                )))
            }
            _ => Ok(()),
        }
    }

    /// Short label used in output tables.
    pub fn label(&self) -> String {
        match self {
            PolicySpec::Oracle { theta } => format!("oracle(theta={theta})"),
            PolicySpec::Myopic => "myopic".to_string(),
            PolicySpec::NearlyMyopic { c } => format!("nearly_myopic(c={c})"),
            PolicySpec::ForcedSampling { schedule } => format!("forced(q={})", schedule.q()),
        }
    }
}

/// Inflation `delta_t = c sqrt(ln t)`.
pub fn inflation(c: f64, t: u64) -> f64 {
    if t <= 1 {
        0.0
    } else {
        c * (t as f64).ln().sqrt()
    }
}

/// Arm for step `state.t + 1` given the covariate `x_next`.
pub fn decide(spec: &PolicySpec, state: &PolicyState, x_next: f64) -> Arm {
    match spec {
        PolicySpec::Oracle { theta } => Arm::from_indicator(x_next >= *theta),
        PolicySpec::Myopic => plug_in(state, x_next, 0.0),
        PolicySpec::NearlyMyopic { c } => {
            if state.pulls == 0 {
                return Arm::One;
            }
            let slack = inflation(*c, state.t) / (state.pulls as f64).sqrt();
            plug_in(state, x_next, slack)
        }
        PolicySpec::ForcedSampling { schedule } => {
            if schedule.contains(state.t + 1) {
                Arm::One
            } else {
                plug_in(state, x_next, 0.0)
            }
        }
    }
}

fn plug_in(state: &PolicyState, x_next: f64, slack: f64) -> Arm {
    match theta_hat(state) {
        Ok(estimate) => Arm::from_indicator(x_next >= estimate - slack),
        // Only reachable before the first pull, which every learning rule forces.
        Err(_) => Arm::One,
    }
}
