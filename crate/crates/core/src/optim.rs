//! SGD, Adam and AdaDelta.
//!
//! An [`Optimizer`] owns the per-parameter state for one set of parameter
//! buffers and updates them in place, elementwise:
//!
//! - SGD: `p -= lr * g`
//! - Adam (bias-corrected): `m = b1 m + (1-b1) g`, `v = b2 v + (1-b2) g²`,
//!   `p -= alpha * m̂ / (sqrt(v̂) + eps)`
//! - AdaDelta: `Eg² = rho Eg² + (1-rho) g²`,
//!   `Δ = -sqrt(EΔ² + eps) / sqrt(Eg² + eps) * g`, `EΔ² = rho EΔ² + (1-rho) Δ²`, `p += Δ`

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
    AdaDelta,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            "adadelta" => Ok(OptimizerKind::AdaDelta),
            _ => Err(Error::UnknownOptimizer(s.to_string())),
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
            OptimizerKind::AdaDelta => "adadelta",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerConfig {
    Sgd { lr: f64 },
    Adam { alpha: f64, beta1: f64, beta2: f64, eps: f64 },
    AdaDelta { rho: f64, eps: f64 },
}

impl OptimizerConfig {
    /// The Chainer defaults.
    pub fn default_for(kind: OptimizerKind) -> Self {
        match kind {
            OptimizerKind::Sgd => OptimizerConfig::Sgd { lr: 0.01 },
            OptimizerKind::Adam => OptimizerConfig::Adam {
                alpha: 0.001,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
            },
            OptimizerKind::AdaDelta => OptimizerConfig::AdaDelta { rho: 0.95, eps: 1e-6 },
        }
    }

    /// Defaults for an optimizer given by name (`sgd`, `adam`, `adadelta`).
    pub fn default_named(name: &str) -> Result<Self> {
        Ok(Self::default_for(name.parse()?))
    }

    pub fn kind(&self) -> OptimizerKind {
        match self {
            OptimizerConfig::Sgd { .. } => OptimizerKind::Sgd,
            OptimizerConfig::Adam { .. } => OptimizerKind::Adam,
            OptimizerConfig::AdaDelta { .. } => OptimizerKind::AdaDelta,
        }
    }

    /// Checks `lr, alpha, eps > 0` and `beta1, beta2, rho ∈ [0, 1)`.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{name} must be a positive finite number, got {v}")))
            }
        };
        let unit = |name: &str, v: f64| {
            if (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{name} must lie in [0, 1), got {v}")))
            }
        };
        match *self {
            OptimizerConfig::Sgd { lr } => positive("lr", lr),
            OptimizerConfig::Adam {
                alpha,
                beta1,
                beta2,
                eps,
            } => {
                positive("alpha", alpha)?;
                unit("beta1", beta1)?;
                unit("beta2", beta2)?;
                positive("eps", eps)
            }
            OptimizerConfig::AdaDelta { rho, eps } => {
                unit("rho", rho)?;
                positive("eps", eps)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Slots {
    Sgd,
    Adam { m: Vec<Vec<f64>>, v: Vec<Vec<f64>> },
    AdaDelta { sq_grad: Vec<Vec<f64>>, sq_update: Vec<Vec<f64>> },
}

/// Optimizer configuration plus the auxiliary state for one parameter set.
///
/// State buffers are allocated on the first [`step`](Optimizer::step) and
/// every later step must present parameters of the same shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    config: OptimizerConfig,
    slots: Option<Slots>,
    steps: u64,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Self {
        Optimizer {
            config,
            slots: None,
            steps: 0,
        }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    /// Number of completed steps (`t` in Adam's bias correction).
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update. Nothing is modified when an error is returned.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::DimensionMismatch {
                context: "optimizer parameter groups",
                expected: params.len(),
                found: grads.len(),
            });
        }
        for (p, g) in params.iter().zip(grads) {
            if p.len() != g.len() {
                return Err(Error::DimensionMismatch {
                    context: "optimizer gradient",
                    expected: p.len(),
                    found: g.len(),
                });
            }
        }
        if !grads.iter().all(|g| g.iter().all(|v| v.is_finite())) {
            return Err(Error::NonFinite("gradient"));
        }

        let shapes: Vec<usize> = params.iter().map(|p| p.len()).collect();
        let slots = self.slots.get_or_insert_with(|| {
            let zeros = || shapes.iter().map(|&n| vec![0.0; n]).collect::<Vec<_>>();
            match self.config {
                OptimizerConfig::Sgd { .. } => Slots::Sgd,
                OptimizerConfig::Adam { .. } => Slots::Adam { m: zeros(), v: zeros() },
                OptimizerConfig::AdaDelta { .. } => Slots::AdaDelta {
                    sq_grad: zeros(),
                    sq_update: zeros(),
                },
            }
        });
        let state_shapes: Option<Vec<usize>> = match slots {
            Slots::Sgd => None,
            Slots::Adam { m, .. } => Some(m.iter().map(Vec::len).collect()),
            Slots::AdaDelta { sq_grad, .. } => Some(sq_grad.iter().map(Vec::len).collect()),
        };
        if let Some(state_shapes) = state_shapes {
            if state_shapes != shapes {
                return Err(Error::InvalidInput(
                    "optimizer state belongs to a different parameter set".into(),
                ));
            }
        }

        self.steps += 1;
        match (self.config, slots) {
            (OptimizerConfig::Sgd { lr }, Slots::Sgd) => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (p, &g) in p.iter_mut().zip(g.iter()) {
                        *p -= lr * g;
                    }
                }
            }
            (
                OptimizerConfig::Adam {
                    alpha,
                    beta1,
                    beta2,
                    eps,
                },
                Slots::Adam { m, v },
            ) => {
                let t = self.steps as i32;
                let correction1 = 1.0 - beta1.powi(t);
                let correction2 = 1.0 - beta2.powi(t);
                for (((p, g), m), v) in params.iter_mut().zip(grads).zip(m).zip(v) {
                    for i in 0..p.len() {
                        let g = g[i];
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                        let m_hat = m[i] / correction1;
                        let v_hat = v[i] / correction2;
                        p[i] -= alpha * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
            (OptimizerConfig::AdaDelta { rho, eps }, Slots::AdaDelta { sq_grad, sq_update }) => {
                for (((p, g), eg), ed) in params.iter_mut().zip(grads).zip(sq_grad).zip(sq_update) {
                    for i in 0..p.len() {
                        let g = g[i];
                        eg[i] = rho * eg[i] + (1.0 - rho) * g * g;
                        let delta = -((ed[i] + eps).sqrt() / (eg[i] + eps).sqrt()) * g;
                        ed[i] = rho * ed[i] + (1.0 - rho) * delta * delta;
                        p[i] += delta;
                    }
                }
            }
            _ => unreachable!("optimizer state kind always follows its config"),
        }
        Ok(())
    }
}
