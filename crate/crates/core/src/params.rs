//! Physical and protocol parameters.
//!
//! [`SystemParams`] is immutable and validated on construction; every other
//! module reads its values through the accessors here. The transmittance `η`
//! used by the gain formulas is always [`SystemParams::total_transmittance`],
//! i.e. fiber loss times detector efficiency.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

/// How Bob routes incoming pulses between the data and monitoring lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Variant {
    /// Fixed beam-splitter of transmittance `t_B`.
    #[default]
    Passive,
    /// Optical switch; `t_B` is the probability of selecting the data line.
    Active,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Passive => "passive",
            Variant::Active => "active",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "passive" => Ok(Variant::Passive),
            "active" => Ok(Variant::Active),
            other => Err(Error::InvalidConfig(format!(
                "unknown variant `{other}` (expected passive|active)"
            ))),
        }
    }
}

pub const DEFAULT_ATTENUATION_DB_PER_KM: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    length_km: f64,
    attenuation_db_per_km: f64,
    dark_count: f64,
    detector_efficiency: f64,
    misalignment: f64,
    ec_efficiency: f64,
    mu: f64,
    t_b: f64,
    variant: Variant,
}

impl SystemParams {
    pub fn builder() -> ParamsBuilder {
        ParamsBuilder::default()
    }

    /// Fiber length in km.
    pub fn length_km(&self) -> f64 {
        self.length_km
    }

    pub fn attenuation_db_per_km(&self) -> f64 {
        self.attenuation_db_per_km
    }

    /// Dark-count probability per detector per gated slot.
    pub fn dark_count(&self) -> f64 {
        self.dark_count
    }

    pub fn detector_efficiency(&self) -> f64 {
        self.detector_efficiency
    }

    pub fn misalignment(&self) -> f64 {
        self.misalignment
    }

    /// Error-correction inefficiency `f ≥ 1`.
    pub fn ec_efficiency(&self) -> f64 {
        self.ec_efficiency
    }

    /// Mean photon number `μ = |α|²` of a non-empty pulse.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Data-line routing coefficient.
    pub fn t_b(&self) -> f64 {
        self.t_b
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// `10^(−α·L/10)`.
    pub fn channel_transmittance(&self) -> f64 {
        channel_transmittance(self.attenuation_db_per_km, self.length_km)
    }

    /// Channel transmittance times detector efficiency.
    pub fn total_transmittance(&self) -> f64 {
        self.channel_transmittance() * self.detector_efficiency
    }

    /// Copy with a different fiber length.
    pub fn with_length(&self, length_km: f64) -> Result<Self> {
        self.to_builder().length_km(length_km).build()
    }

    /// Copy with a different operating point `(μ, t_B)`.
    pub fn with_operating_point(&self, mu: f64, t_b: f64) -> Result<Self> {
        self.to_builder().mu(mu).t_b(t_b).build()
    }

    pub fn to_builder(&self) -> ParamsBuilder {
        ParamsBuilder {
            length_km: self.length_km,
            attenuation_db_per_km: self.attenuation_db_per_km,
            dark_count: self.dark_count,
            detector_efficiency: self.detector_efficiency,
            misalignment: self.misalignment,
            ec_efficiency: self.ec_efficiency,
            mu: self.mu,
            t_b: self.t_b,
            variant: self.variant,
        }
    }
}

fn channel_transmittance(attenuation_db_per_km: f64, length_km: f64) -> f64 {
    10f64.powf(-attenuation_db_per_km * length_km / 10.0)
}

/// Builder for [`SystemParams`]. Defaults are the 50/50 operating point of a
/// zero-length link with `p_d = 1e-8`, `η_d = 0.8`, `f = 1.1`, `e_a = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamsBuilder {
    length_km: f64,
    attenuation_db_per_km: f64,
    dark_count: f64,
    detector_efficiency: f64,
    misalignment: f64,
    ec_efficiency: f64,
    mu: f64,
    t_b: f64,
    variant: Variant,
}

impl Default for ParamsBuilder {
    fn default() -> Self {
        Self {
            length_km: 0.0,
            attenuation_db_per_km: DEFAULT_ATTENUATION_DB_PER_KM,
            dark_count: 1e-8,
            detector_efficiency: 0.8,
            misalignment: 0.0,
            ec_efficiency: 1.1,
            mu: 0.1,
            t_b: 0.5,
            variant: Variant::Passive,
        }
    }
}

impl ParamsBuilder {
    pub fn length_km(mut self, v: f64) -> Self {
        self.length_km = v;
        self
    }

    pub fn attenuation_db_per_km(mut self, v: f64) -> Self {
        self.attenuation_db_per_km = v;
        self
    }

    pub fn dark_count(mut self, v: f64) -> Self {
        self.dark_count = v;
        self
    }

    pub fn detector_efficiency(mut self, v: f64) -> Self {
        self.detector_efficiency = v;
        self
    }

    pub fn misalignment(mut self, v: f64) -> Self {
        self.misalignment = v;
        self
    }

    pub fn ec_efficiency(mut self, v: f64) -> Self {
        self.ec_efficiency = v;
        self
    }

    pub fn mu(mut self, v: f64) -> Self {
        self.mu = v;
        self
    }

    pub fn t_b(mut self, v: f64) -> Self {
        self.t_b = v;
        self
    }

    pub fn variant(mut self, v: Variant) -> Self {
        self.variant = v;
        self
    }

    pub fn build(self) -> Result<SystemParams> {
        let b = self;
        if !(b.length_km.is_finite() && b.length_km >= 0.0) {
            return Err(invalid("L_km", b.length_km, "must be finite and ≥ 0"));
        }
        if !(b.attenuation_db_per_km.is_finite() && b.attenuation_db_per_km >= 0.0) {
            return Err(invalid(
                "atten_db_per_km",
                b.attenuation_db_per_km,
                "must be finite and ≥ 0",
            ));
        }
        if !(0.0..1.0).contains(&b.dark_count) {
            return Err(invalid("p_d", b.dark_count, "must lie in [0, 1)"));
        }
        if !(b.detector_efficiency > 0.0 && b.detector_efficiency <= 1.0) {
            return Err(invalid(
                "eta_d",
                b.detector_efficiency,
                "must lie in (0, 1]",
            ));
        }
        if !(0.0..0.5).contains(&b.misalignment) {
            return Err(invalid("e_a", b.misalignment, "must lie in [0, 0.5)"));
        }
        if !(b.ec_efficiency.is_finite() && b.ec_efficiency >= 1.0) {
            return Err(invalid("f_ec", b.ec_efficiency, "must be finite and ≥ 1"));
        }
        if !(b.mu.is_finite() && b.mu > 0.0) {
            return Err(invalid("mu", b.mu, "must be finite and > 0"));
        }
        if !(b.t_b > 0.0 && b.t_b < 1.0) {
            return Err(invalid("t_B", b.t_b, "must lie in (0, 1)"));
        }
        if channel_transmittance(b.attenuation_db_per_km, b.length_km) <= 0.0 {
            return Err(invalid(
                "L_km",
                b.length_km,
                "channel transmittance underflows to 0",
            ));
        }
        Ok(SystemParams {
            length_km: b.length_km,
            attenuation_db_per_km: b.attenuation_db_per_km,
            dark_count: b.dark_count,
            detector_efficiency: b.detector_efficiency,
            misalignment: b.misalignment,
            ec_efficiency: b.ec_efficiency,
            mu: b.mu,
            t_b: b.t_b,
            variant: b.variant,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn at(length_km: f64, eta_d: f64) -> SystemParams {
        SystemParams::builder()
            .length_km(length_km)
            .detector_efficiency(eta_d)
            .build()
            .unwrap()
    }

    #[test]
    fn channel_transmittance_anchors() {
        assert_eq!(at(0.0, 0.8).channel_transmittance(), 1.0);
        assert_relative_eq!(
            at(50.0, 0.8).channel_transmittance(),
            0.1,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            at(100.0, 0.8).channel_transmittance(),
            0.01,
            max_relative = 1e-14
        );
    }

    #[test]
    fn total_transmittance_anchors() {
        assert_eq!(at(0.0, 1.0).total_transmittance(), 1.0);
        assert_relative_eq!(
            at(50.0, 0.8).total_transmittance(),
            0.08,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            at(100.0, 0.99).total_transmittance(),
            0.0099,
            max_relative = 1e-14
        );
    }

    #[test]
    fn rejects_out_of_range() {
        let b = SystemParams::builder();
        assert!(b.dark_count(1.0).build().is_err());
        assert!(b.dark_count(-1e-9).build().is_err());
        assert!(b.detector_efficiency(0.0).build().is_err());
        assert!(b.detector_efficiency(1.01).build().is_err());
        assert!(b.misalignment(0.5).build().is_err());
        assert!(b.ec_efficiency(0.99).build().is_err());
        assert!(b.mu(0.0).build().is_err());
        assert!(b.mu(f64::NAN).build().is_err());
        assert!(b.t_b(0.0).build().is_err());
        assert!(b.t_b(1.0).build().is_err());
        assert!(b.length_km(-1.0).build().is_err());
        assert!(b.length_km(1e6).build().is_err());
    }

    #[test]
    fn variant_parses() {
        assert_eq!("Passive".parse::<Variant>().unwrap(), Variant::Passive);
        assert_eq!("active".parse::<Variant>().unwrap(), Variant::Active);
        assert!("hybrid".parse::<Variant>().is_err());
    }

    proptest! {
        #[test]
        fn channel_strictly_decreasing(a in 0.0f64..300.0, d in 0.01f64..50.0) {
            prop_assert!(at(a + d, 0.8).channel_transmittance() < at(a, 0.8).channel_transmittance());
        }

        #[test]
        fn detector_efficiency_only_lowers(l in 0.0f64..200.0, eta_d in 0.01f64..=1.0) {
            let p = at(l, eta_d);
            prop_assert!(p.total_transmittance() <= p.channel_transmittance());
            prop_assert_eq!(p.total_transmittance() == p.channel_transmittance(), eta_d == 1.0);
        }
    }
}
