//! Error rates, the phase-error upper bound and key rates.
//!
//! All logarithms are base 2. Rates are per transmitted pulse pair (for the
//! active variant: per pulse pair routed to the data line).

use std::f64::consts::LN_2;

use crate::error::{invalid, Error, Result};
use crate::gains::{DataLineGains, GainSet, MonitorPair, MonitoringGains};
use crate::params::SystemParams;

/// Normalisation factors `N± = 2(1 ± e^{−μ})` of `|0_x⟩` and `|1_x⟩`.
pub fn normalization(mu: f64) -> (f64, f64) {
    let n_plus = 2.0 * (1.0 + (-mu).exp());
    let n_minus = -2.0 * (-mu).exp_m1();
    (n_plus, n_minus)
}

/// Binary Shannon entropy with `h(0) = h(1) = 0`.
pub fn binary_entropy(a: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) {
        return Err(invalid("a", a, "binary entropy needs a probability"));
    }
    Ok(entropy(a))
}

fn entropy(a: f64) -> f64 {
    if a == 0.0 || a == 1.0 {
        return 0.0;
    }
    -a * a.log2() - (1.0 - a) * (1.0 - a).log2()
}

fn check_probability(name: &'static str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(invalid(name, v, "must lie in [0, 1]"))
    }
}

/// Returns `(E_z, Q_z)`.
pub fn bit_error_z(data: &DataLineGains) -> Result<(f64, f64)> {
    let sum = data.sum();
    if sum.is_nan() || sum <= 0.0 {
        return Err(Error::NoDetection);
    }
    Ok((data.wrong() / sum, sum / 2.0))
}

/// Bounds on the monitoring gains of `|0_x⟩` inferred from the decoy
/// sequences. `*_raw` keep the values before clamping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundPair {
    /// Upper bound on `Q_{0x}^{M1}`, clamped to `≤ 1`.
    pub upper: f64,
    /// Lower bound on `Q_{0x}^{M0}`, clamped to `≥ 0`.
    pub lower: f64,
    pub upper_raw: f64,
    pub lower_raw: f64,
}

/// Cauchy-inequality bounds from the `|α⟩|α⟩` and `|0⟩|0⟩` monitoring gains.
pub fn gain_bounds(alpha_alpha: MonitorPair, vacuum: MonitorPair, mu: f64) -> Result<BoundPair> {
    check_probability("Q_aa_M0", alpha_alpha.m0)?;
    check_probability("Q_aa_M1", alpha_alpha.m1)?;
    check_probability("Q_00_M0", vacuum.m0)?;
    check_probability("Q_00_M1", vacuum.m1)?;
    if !(mu.is_finite() && mu > 0.0) {
        return Err(invalid("mu", mu, "must be finite and > 0"));
    }
    let (n_plus, n_minus) = normalization(mu);
    let grow = (mu / 2.0).exp();
    let shrink = (-mu / 2.0).exp();
    let e_mu = mu.exp();

    let (aa1, v1) = (alpha_alpha.m1.sqrt(), vacuum.m1.sqrt());
    let upper_raw = (grow * aa1 + shrink * v1).powi(2) / n_plus
        + n_minus / n_plus * (e_mu * n_minus / 4.0 + e_mu * aa1 + v1);

    let (aa0, v0) = (alpha_alpha.m0.sqrt(), vacuum.m0.sqrt());
    let lower_raw =
        (grow * aa0 - shrink * v0).powi(2) / n_plus - n_minus / n_plus * (e_mu * aa0 + v0);

    Ok(BoundPair {
        upper: upper_raw.min(1.0),
        lower: lower_raw.max(0.0),
        upper_raw,
        lower_raw,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseErrorBound {
    /// `E_p^u` clamped to `[0, 0.5]`.
    pub value: f64,
    /// Value before the final clamp (the leakage bracket is already floored at 0).
    pub raw: f64,
    /// `2(Q_{0z}^{M0}+Q_{1z}^{M0}) − N⁺·lower` before flooring.
    pub bracket_raw: f64,
}

impl PhaseErrorBound {
    /// True when the bound exceeds 1/2 and therefore certifies nothing.
    pub fn is_trivial(&self) -> bool {
        self.raw > 0.5
    }
}

/// Upper bound on the phase-error rate from the observed logic-sequence
/// monitoring gains and the `|0_x⟩` bounds.
pub fn phase_error_upper(
    monitor: &MonitoringGains,
    bounds: &BoundPair,
    mu: f64,
) -> Result<PhaseErrorBound> {
    let denominator = 2.0 * monitor.logic_sum();
    if denominator.is_nan() || denominator <= 0.0 {
        return Err(Error::NoMonitoringDetection);
    }
    let (n_plus, _) = normalization(mu);
    let bracket_raw = 2.0 * monitor.logic_m0() - n_plus * bounds.lower;
    let raw = (n_plus * bounds.upper + bracket_raw.max(0.0)) / denominator;
    Ok(PhaseErrorBound {
        value: raw.clamp(0.0, 0.5),
        raw,
        bracket_raw,
    })
}

/// X-basis bit error rate of the nonclassical protocol, from the `|0_x⟩`
/// gains and the logic-sequence gains, clamped to `[0, 1]`.
pub fn bit_error_x(monitor: &MonitoringGains, mu: f64) -> Result<f64> {
    bit_error_x_unclamped(monitor, mu).map(|e| e.clamp(0.0, 1.0))
}

pub fn bit_error_x_unclamped(monitor: &MonitoringGains, mu: f64) -> Result<f64> {
    let denominator = 2.0 * monitor.logic_sum();
    if denominator.is_nan() || denominator <= 0.0 {
        return Err(Error::NoMonitoringDetection);
    }
    let (n_plus, _) = normalization(mu);
    let x = monitor.zero_x;
    Ok((n_plus * x.m1 + (2.0 * monitor.logic_m0() - n_plus * x.m0)) / denominator)
}

fn key_rate(q_z: f64, phase: f64, e_b: f64, f_ec: f64) -> Result<f64> {
    check_probability("Q_z", q_z)?;
    check_probability("phase error", phase)?;
    check_probability("E_b", e_b)?;
    if !(f_ec.is_finite() && f_ec >= 1.0) {
        return Err(invalid("f_ec", f_ec, "must be finite and ≥ 1"));
    }
    Ok((q_z * (1.0 - entropy(phase) - f_ec * entropy(e_b))).max(0.0))
}

/// `R = max{0, Q_z[1 − h(E_p^u) − f·h(E_b)]}`.
pub fn key_rate_cow(q_z: f64, e_p_u: f64, e_b: f64, f_ec: f64) -> Result<f64> {
    key_rate(q_z, e_p_u, e_b, f_ec)
}

/// `R̃ = max{0, Q_z[1 − h(E_x) − f·h(E_z)]}`.
pub fn key_rate_nonclassical(q_z: f64, e_x: f64, e_z: f64, f_ec: f64) -> Result<f64> {
    key_rate(q_z, e_x, e_z, f_ec)
}

/// Repeaterless capacity `−log2(1−η)`.
pub fn plob_bound(eta_ch: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eta_ch) {
        return Err(invalid("eta_ch", eta_ch, "must lie in [0, 1)"));
    }
    // 1 − η is exact for η ≥ 1/2; below that ln_1p avoids cancellation.
    if eta_ch >= 0.5 {
        Ok(-(1.0 - eta_ch).log2())
    } else {
        Ok(-(-eta_ch).ln_1p() / LN_2)
    }
}

/// Deviation `ε` for which Azuma's inequality fails with probability
/// `2e^{−Kε²/2} = fail_prob` over `rounds = K` rounds.
pub fn azuma_deviation(rounds: u64, fail_prob: f64) -> Result<f64> {
    if rounds == 0 {
        return Err(invalid("K", 0.0, "must be ≥ 1"));
    }
    if !(fail_prob > 0.0 && fail_prob < 2.0) {
        return Err(invalid("fail_prob", fail_prob, "must lie in (0, 2)"));
    }
    Ok((2.0 * (2.0 / fail_prob).ln() / rounds as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRates {
    /// Data-line bit error rate `E_b = E_z`.
    pub e_b: f64,
    /// Phase-error upper bound after clamping.
    pub e_p_u: f64,
    /// X-basis error of the nonclassical protocol.
    pub e_x: f64,
}

/// Everything computed at a single operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub params: SystemParams,
    pub gains: GainSet,
    pub bounds: BoundPair,
    pub phase: PhaseErrorBound,
    pub errors: ErrorRates,
    /// `E_x` before clamping to `[0, 1]`.
    pub e_x_raw: f64,
    pub q_z: f64,
    pub r: f64,
    pub r_tilde: f64,
}

/// Runs the full pipeline: gains, error rates, bounds and both key rates.
pub fn evaluate(params: &SystemParams) -> Result<Evaluation> {
    let gains = GainSet::compute(params);
    let mu = params.mu();
    let f_ec = params.ec_efficiency();

    let (e_b, q_z) = bit_error_z(&gains.data)?;
    let bounds = gain_bounds(gains.monitor.alpha_alpha, gains.monitor.vacuum, mu)?;
    let phase = phase_error_upper(&gains.monitor, &bounds, mu)?;
    let e_x_raw = bit_error_x_unclamped(&gains.monitor, mu)?;
    let e_x = e_x_raw.clamp(0.0, 1.0);

    Ok(Evaluation {
        params: *params,
        gains,
        bounds,
        phase,
        errors: ErrorRates {
            e_b,
            e_p_u: phase.value,
            e_x,
        },
        e_x_raw,
        q_z,
        r: key_rate_cow(q_z, phase.value, e_b, f_ec)?,
        r_tilde: key_rate_nonclassical(q_z, e_x, e_b, f_ec)?,
    })
}

/// One distance's optimised result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub length_km: f64,
    pub eta_ch: f64,
    pub eta_tot: f64,
    pub mu_opt: f64,
    pub tb_opt: f64,
    pub q_z: f64,
    pub errors: ErrorRates,
    /// Pre-clamp phase-error bound.
    pub e_p_u_raw: f64,
    pub r: f64,
    pub r_tilde: f64,
    /// `+∞` at zero length.
    pub r_plob: f64,
    pub flag: crate::optimize::RateFlag,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // Natural-log form of h, kept separate from the implementation.
    fn h_ln(a: f64) -> f64 {
        -(a * a.ln() + (1.0 - a) * (1.0 - a).ln()) / std::f64::consts::LN_2
    }

    #[test]
    fn entropy_anchors() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        // 0.499915958164528 from a 30-digit evaluation.
        assert_relative_eq!(
            binary_entropy(0.11).unwrap(),
            0.499915958164528,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            binary_entropy(0.11).unwrap(),
            h_ln(0.11),
            max_relative = 1e-14
        );
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
        assert!(binary_entropy(f64::NAN).is_err());
    }

    fn data(q: [f64; 4]) -> DataLineGains {
        use crate::gains::SlotPair;
        DataLineGains {
            zero_z: SlotPair { t0: q[0], t1: q[1] },
            one_z: SlotPair { t0: q[2], t1: q[3] },
        }
    }

    #[test]
    fn bit_error_z_cases() {
        assert_eq!(
            bit_error_z(&data([0.1, 0.0, 0.0, 0.1])).unwrap(),
            (0.0, 0.1)
        );
        assert_eq!(bit_error_z(&data([0.2; 4])).unwrap().0, 0.5);
        let (e, q) = bit_error_z(&data([0.09, 0.01, 0.01, 0.09])).unwrap();
        assert_relative_eq!(e, 0.1, max_relative = 1e-15);
        assert_relative_eq!(q, 0.1, max_relative = 1e-15);
        assert_eq!(bit_error_z(&data([0.0; 4])), Err(Error::NoDetection));
    }

    #[test]
    fn upper_bound_without_dark_counts() {
        let b = gain_bounds(MonitorPair::new(0.01, 0.0), MonitorPair::default(), 0.1).unwrap();
        let n_plus = 2.0 * (1.0 + (-0.1f64).exp());
        let n_minus = 2.0 * (1.0 - (-0.1f64).exp());
        assert_relative_eq!(n_plus, 3.80967483607192, max_relative = 1e-14);
        assert_relative_eq!(n_minus, 0.190325163928081, max_relative = 1e-13);
        assert_relative_eq!(
            b.upper,
            n_minus / n_plus * 0.1f64.exp() * n_minus / 4.0,
            max_relative = 1e-13
        );
        assert_relative_eq!(b.upper, 0.002627, max_relative = 2e-4);
    }

    #[test]
    fn lower_bound_clamps_at_zero() {
        // Vacuum gain chosen so the squared Cauchy term cancels.
        let mu: f64 = 0.1;
        let vac = 0.01 * (2.0 * mu).exp();
        let b = gain_bounds(MonitorPair::new(0.01, 0.0), MonitorPair::new(vac, vac), mu).unwrap();
        assert!(b.lower_raw < 0.0);
        assert_eq!(b.lower, 0.0);
    }

    #[test]
    fn gain_bounds_rejects_bad_input() {
        let ok = MonitorPair::new(0.1, 0.1);
        assert!(gain_bounds(MonitorPair::new(1.1, 0.0), ok, 0.1).is_err());
        assert!(gain_bounds(ok, ok, 0.0).is_err());
    }

    fn logic(q: f64) -> MonitoringGains {
        MonitoringGains {
            zero_z: MonitorPair::new(q, q),
            one_z: MonitorPair::new(q, q),
            ..Default::default()
        }
    }

    #[test]
    fn exact_bounds_reduce_phase_error_to_e_x() {
        let mu = 0.2;
        let (n_plus, _) = normalization(mu);
        let mut m = logic(0.01);
        m.zero_x = MonitorPair::new(0.008, 0.0008);
        let bounds = BoundPair {
            upper: m.zero_x.m1,
            lower: m.zero_x.m0,
            upper_raw: m.zero_x.m1,
            lower_raw: m.zero_x.m0,
        };
        assert!(2.0 * m.logic_m0() - n_plus * m.zero_x.m0 >= 0.0);
        let p = phase_error_upper(&m, &bounds, mu).unwrap();
        assert_relative_eq!(p.value, bit_error_x(&m, mu).unwrap(), max_relative = 1e-14);
    }

    #[test]
    fn phase_error_vanishes_when_bounds_are_tight() {
        let mu = 0.2;
        let (n_plus, _) = normalization(mu);
        let m = logic(0.01);
        let lower = 2.0 * m.logic_m0() / n_plus;
        let b = BoundPair {
            upper: 0.0,
            lower,
            upper_raw: 0.0,
            lower_raw: lower,
        };
        assert_eq!(phase_error_upper(&m, &b, mu).unwrap().value, 0.0);
        assert_eq!(
            phase_error_upper(&logic(0.0), &b, mu),
            Err(Error::NoMonitoringDetection)
        );
    }

    #[test]
    fn trivial_phase_bound_is_reported() {
        let m = logic(1e-6);
        let b = BoundPair {
            upper: 0.1,
            lower: 0.0,
            upper_raw: 0.1,
            lower_raw: 0.0,
        };
        let p = phase_error_upper(&m, &b, 0.1).unwrap();
        assert!(p.is_trivial());
        assert_eq!(p.value, 0.5);
    }

    #[test]
    fn bit_error_x_cases() {
        let mu = 0.3;
        let (n_plus, _) = normalization(mu);
        let mut m = logic(0.02);
        m.zero_x = MonitorPair::new(2.0 * m.logic_m0() / n_plus, 0.0);
        assert!(bit_error_x(&m, mu).unwrap().abs() < 1e-16);

        m.zero_x = MonitorPair::new(0.0, 0.01);
        let expected = (n_plus * 0.01 + 2.0 * m.logic_m0()) / (2.0 * m.logic_sum());
        assert_relative_eq!(bit_error_x(&m, mu).unwrap(), expected, max_relative = 1e-15);
    }

    #[test]
    fn key_rate_anchors() {
        assert_eq!(key_rate_cow(0.01, 0.0, 0.0, 1.0).unwrap(), 0.01);
        assert_eq!(key_rate_cow(0.01, 0.5, 0.0, 1.0).unwrap(), 0.0);
        let expected = 0.01 * (1.0 - h_ln(0.05) - 1.1 * h_ln(0.01));
        let r = key_rate_cow(0.01, 0.05, 0.01, 1.1).unwrap();
        assert_relative_eq!(r, expected, max_relative = 1e-13);
        assert_relative_eq!(r, 0.0062473, max_relative = 2e-5);
        assert_eq!(key_rate_nonclassical(0.01, 0.0, 0.0, 1.0).unwrap(), 0.01);
        assert_eq!(key_rate_nonclassical(0.01, 0.05, 0.01, 1.1).unwrap(), r);
        assert!(key_rate_cow(0.01, 0.05, 0.01, 0.9).is_err());
    }

    #[test]
    fn plob_anchors() {
        assert_eq!(plob_bound(0.0).unwrap(), 0.0);
        assert_eq!(plob_bound(0.5).unwrap(), 1.0);
        assert_relative_eq!(plob_bound(0.9).unwrap(), 10f64.log2(), max_relative = 1e-14);
        assert_relative_eq!(
            plob_bound(0.9).unwrap(),
            std::f64::consts::LOG2_10,
            max_relative = 1e-12
        );
        assert!(plob_bound(1.0).is_err());
    }

    #[test]
    fn azuma_anchors() {
        let eps = azuma_deviation(1, 2.0 * (-0.5f64).exp()).unwrap();
        assert_relative_eq!(eps, 1.0, max_relative = 1e-15);
        let eps = azuma_deviation(10_000_000_000, 1e-10).unwrap();
        assert!((eps - 6.888e-5).abs() < 1e-8, "{eps}");
        assert!(azuma_deviation(0, 0.1).is_err());
        assert!(azuma_deviation(10, 0.0).is_err());
        let e1 = azuma_deviation(1000, 1e-6).unwrap();
        let e4 = azuma_deviation(4000, 1e-6).unwrap();
        assert_relative_eq!(e4, e1 / 2.0, max_relative = 1e-15);
    }

    proptest! {
        #[test]
        fn entropy_symmetric(a in 0.0f64..=1.0) {
            let (x, y) = (binary_entropy(a).unwrap(), binary_entropy(1.0 - a).unwrap());
            prop_assert!((x - y).abs() < 1e-12);
        }

        #[test]
        fn entropy_increasing_on_lower_half(a in 0.0f64..0.5, d in 1e-6f64..0.5) {
            let b = (a + d).min(0.5);
            prop_assert!(binary_entropy(b).unwrap() >= binary_entropy(a).unwrap());
        }

        #[test]
        fn entropy_concave(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let mid = binary_entropy((a + b) / 2.0).unwrap();
            let chord = (binary_entropy(a).unwrap() + binary_entropy(b).unwrap()) / 2.0;
            prop_assert!(mid >= chord - 1e-12);
        }

        #[test]
        fn rates_never_negative(q in 0.0f64..=1.0, e in 0.0f64..=1.0, b in 0.0f64..=1.0, f in 1.0f64..3.0) {
            prop_assert!(key_rate_cow(q, e, b, f).unwrap() >= 0.0);
            prop_assert!(key_rate_nonclassical(q, e, b, f).unwrap() >= 0.0);
        }

        #[test]
        fn azuma_monotone(k in 1u64..1_000_000, fail in 1e-12f64..1.0) {
            let base = azuma_deviation(k, fail).unwrap();
            prop_assert!(azuma_deviation(k + 1, fail).unwrap() < base);
            prop_assert!(azuma_deviation(k, fail / 2.0).unwrap() > base);
        }
    }
}
