//! Multiquadric kernel and its first three derivatives in the signed
//! separation s = x - x_j. All stencil weights in this crate are built from
//! these closed forms.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Shape parameter of the multiquadric basis phi(s) = sqrt(C^2 + s^2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    shape_c: f64,
}

impl KernelConfig {
    pub fn new(shape_c: f64) -> Result<Self> {
        if !(shape_c.is_finite() && shape_c > 0.0) {
            return Err(Error::InvalidShape(shape_c));
        }
        Ok(Self { shape_c })
    }

    pub fn shape(&self) -> f64 {
        self.shape_c
    }
}

/// phi(r) = sqrt(C^2 + r^2). Even in r, so callers may pass distances or
/// signed separations interchangeably.
pub fn mq(r: f64, cfg: &KernelConfig) -> f64 {
    let c = cfg.shape_c;
    (c * c + r * r).sqrt()
}

/// d^k/ds^k phi(s) for k in 0..=3, evaluated at the signed separation s.
///
/// k=0: phi, k=1: s/phi, k=2: C^2/phi^3, k=3: -3 C^2 s / phi^5.
pub fn mq_derivative(s: f64, order: usize, cfg: &KernelConfig) -> Result<f64> {
    let c2 = cfg.shape_c * cfg.shape_c;
    let phi = (c2 + s * s).sqrt();
    match order {
        0 => Ok(phi),
        1 => Ok(s / phi),
        2 => Ok(c2 / (phi * phi * phi)),
        3 => {
            let phi5 = phi * phi * phi * phi * phi;
            Ok(-3.0 * c2 * s / phi5)
        }
        _ => Err(Error::UnsupportedDerivativeOrder(order)),
    }
}
