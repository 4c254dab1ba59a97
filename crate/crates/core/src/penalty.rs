//! Separable non-convex penalties `phi` on `[0, inf)`.
//!
//! Two families are supported, both parameterised by an exponent `0 < q < 1`:
//!
//! * [`PenaltyFamily::Power`]: `phi(z) = z^q`
//! * [`PenaltyFamily::LogPower`]: `phi(z) = ln(1 + z^q)`
//!
//! Both are continuous, non-decreasing with `phi(0) = 0`, and have a
//! derivative that blows up at `0+`, which is what makes the associated
//! thresholding operator jump. Derivatives are only defined for `z > 0`;
//! asking for them at `0` is a domain error rather than a clamp.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyFamily {
    Power,
    LogPower,
}

/// A penalty family together with its exponent `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPenalty", deny_unknown_fields)]
pub struct PenaltySpec {
    family: PenaltyFamily,
    q: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPenalty {
    family: PenaltyFamily,
    q: f64,
}

impl TryFrom<RawPenalty> for PenaltySpec {
    type Error = Error;

    fn try_from(raw: RawPenalty) -> Result<Self> {
        PenaltySpec::new(raw.family, raw.q)
    }
}

impl PenaltySpec {
    pub fn new(family: PenaltyFamily, q: f64) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::domain("penalty exponent q", q, "0 < q < 1"));
        }
        Ok(PenaltySpec { family, q })
    }

    pub fn power(q: f64) -> Result<Self> {
        Self::new(PenaltyFamily::Power, q)
    }

    pub fn log_power(q: f64) -> Result<Self> {
        Self::new(PenaltyFamily::LogPower, q)
    }

    #[inline]
    pub fn family(&self) -> PenaltyFamily {
        self.family
    }

    #[inline]
    pub fn q(&self) -> f64 {
        self.q
    }

    /// `phi(z)` for `z >= 0`.
    pub fn value(&self, z: f64) -> Result<f64> {
        if !(z >= 0.0 && z.is_finite()) {
            return Err(Error::domain("phi", z, "finite z >= 0"));
        }
        Ok(self.value_unchecked(z))
    }

    /// `phi(|z|)` for any finite `z`; used when summing the penalty over a
    /// signed vector.
    #[inline]
    pub(crate) fn value_unchecked(&self, z: f64) -> f64 {
        let s = z.abs().powf(self.q);
        match self.family {
            PenaltyFamily::Power => s,
            PenaltyFamily::LogPower => s.ln_1p(),
        }
    }

    /// `sum_i phi(|x_i|)`.
    pub fn total(&self, x: &[f64]) -> f64 {
        x.iter()
            .filter(|v| **v != 0.0)
            .map(|v| self.value_unchecked(*v))
            .sum()
    }

    fn check_positive(what: &'static str, z: f64) -> Result<()> {
        if z > 0.0 && z.is_finite() {
            Ok(())
        } else {
            Err(Error::domain(what, z, "finite z > 0"))
        }
    }

    /// `phi'(z)` for `z > 0`.
    pub fn deriv1(&self, z: f64) -> Result<f64> {
        Self::check_positive("phi'", z)?;
        Ok(self.deriv1_unchecked(z))
    }

    #[inline]
    pub(crate) fn deriv1_unchecked(&self, z: f64) -> f64 {
        let q = self.q;
        let zq1 = z.powf(q - 1.0);
        match self.family {
            PenaltyFamily::Power => q * zq1,
            PenaltyFamily::LogPower => q * zq1 / (1.0 + z.powf(q)),
        }
    }

    /// `phi''(z)` for `z > 0`; always negative.
    pub fn deriv2(&self, z: f64) -> Result<f64> {
        Self::check_positive("phi''", z)?;
        Ok(self.deriv2_unchecked(z))
    }

    #[inline]
    pub(crate) fn deriv2_unchecked(&self, z: f64) -> f64 {
        let q = self.q;
        let zq2 = z.powf(q - 2.0);
        match self.family {
            PenaltyFamily::Power => q * (q - 1.0) * zq2,
            PenaltyFamily::LogPower => {
                let s = z.powf(q);
                let d = 1.0 + s;
                q * zq2 * ((q - 1.0) - s) / (d * d)
            }
        }
    }

    /// `phi'''(z)` for `z > 0`.
    pub fn deriv3(&self, z: f64) -> Result<f64> {
        Self::check_positive("phi'''", z)?;
        let q = self.q;
        let zq3 = z.powf(q - 3.0);
        Ok(match self.family {
            PenaltyFamily::Power => q * (q - 1.0) * (q - 2.0) * zq3,
            PenaltyFamily::LogPower => {
                let s = z.powf(q);
                let d = 1.0 + s;
                let bracket =
                    (q - 2.0) * (q - 1.0 - s) * d - q * s * d - 2.0 * q * s * (q - 1.0 - s);
                q * zq3 * bracket / (d * d * d)
            }
        })
    }

    /// `psi(z) = 2 (phi(z) - z phi'(z)) / z^2`, strictly decreasing from
    /// `(0, inf)` onto `(0, inf)`.
    pub fn psi(&self, z: f64) -> Result<f64> {
        Self::check_positive("psi", z)?;
        Ok(self.psi_unchecked(z))
    }

    #[inline]
    pub(crate) fn psi_unchecked(&self, z: f64) -> f64 {
        let q = self.q;
        match self.family {
            PenaltyFamily::Power => 2.0 * (1.0 - q) * z.powf(q - 2.0),
            PenaltyFamily::LogPower => {
                2.0 * (self.value_unchecked(z) - z * self.deriv1_unchecked(z)) / (z * z)
            }
        }
    }

    /// The generic `psi` formula evaluated from `phi` and `phi'`, without
    /// the closed form used for the power family.
    pub fn psi_generic(&self, z: f64) -> Result<f64> {
        Self::check_positive("psi", z)?;
        Ok(2.0 * (self.value_unchecked(z) - z * self.deriv1_unchecked(z)) / (z * z))
    }
}
