use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    /// `exp(-gamma ||x - z||^2)`
    Gaussian { gamma: f64 },
}

impl Kernel {
    pub fn gaussian(gamma: f64) -> Result<Self> {
        if gamma > 0.0 && gamma.is_finite() {
            Ok(Kernel::Gaussian { gamma })
        } else {
            Err(Error::Input(format!("gaussian gamma must be > 0, got {gamma}")))
        }
    }

    /// Gaussian kernel from a length scale: `gamma = 1 / scale^2`.
    pub fn from_scale(scale: f64) -> Result<Self> {
        Self::gaussian(1.0 / (scale * scale))
    }

    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Gaussian { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scale_mapping() {
        assert_eq!(Kernel::from_scale(2.0).unwrap(), Kernel::Gaussian { gamma: 0.25 });
        assert!(Kernel::gaussian(0.0).is_err());
    }

    proptest! {
        #[test]
        fn gaussian_kernel_bounds(
            a in prop::collection::vec(-5.0f64..5.0, 4),
            b in prop::collection::vec(-5.0f64..5.0, 4),
            gamma in 0.001f64..2.0,
        ) {
            let k = Kernel::gaussian(gamma).unwrap();
            prop_assert_eq!(k.eval(&a, &a), 1.0);
            let v = k.eval(&a, &b);
            prop_assert!(v >= 0.0 && v <= 1.0);
            prop_assert_eq!(v, k.eval(&b, &a));
        }
    }
}
