//! Closed-form click probabilities ("gains").
//!
//! Monitoring-line gains at `e_a = 0` follow the threshold-detector
//! expressions for passive and active basis choice verbatim, including the
//! `c1` to `c5` intermediates. Misalignment is layered on top as port
//! cross-talk ([`apply_misalignment`]) and the data line uses a separate
//! two-slot model ([`data_line_gains`]).
//!
//! Slot labels on the data line are semantic: for the logic sequence `w_z`
//! the slot `T_w` is the correct one, so `Q_{0z}^{T1}` and `Q_{1z}^{T0}` are
//! errors.

use crate::params::{SystemParams, Variant};

/// Probability that a threshold detector with dark-count probability `p_d`
/// clicks when illuminated by a coherent state of mean photon number
/// `lambda`: `1 − (1−p_d)e^{−λ}`.
pub fn click_probability(lambda: f64, p_d: f64) -> f64 {
    -(f64::ln_1p(-p_d) - lambda).exp_m1()
}

/// Gains of one prepared state on the two monitoring detectors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MonitorPair {
    pub m0: f64,
    pub m1: f64,
}

impl MonitorPair {
    pub fn new(m0: f64, m1: f64) -> Self {
        Self { m0, m1 }
    }

    pub fn sum(&self) -> f64 {
        self.m0 + self.m1
    }

    /// Uniform port cross-talk with probability `e_a`.
    pub fn mixed(&self, e_a: f64) -> Self {
        Self {
            m0: (1.0 - e_a) * self.m0 + e_a * self.m1,
            m1: (1.0 - e_a) * self.m1 + e_a * self.m0,
        }
    }
}

/// Gains of one logic sequence in the two data-line time slots.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SlotPair {
    pub t0: f64,
    pub t1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DataLineGains {
    pub zero_z: SlotPair,
    pub one_z: SlotPair,
}

impl DataLineGains {
    pub fn sum(&self) -> f64 {
        self.zero_z.t0 + self.zero_z.t1 + self.one_z.t0 + self.one_z.t1
    }

    /// `Q_{0z}^{T1} + Q_{1z}^{T0}`.
    pub fn wrong(&self) -> f64 {
        self.zero_z.t1 + self.one_z.t0
    }
}

/// Monitoring-line gains of every sequence Alice sends, plus the
/// nonclassical mode `|0_x⟩` used by the prepare-and-measure variant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MonitoringGains {
    pub zero_z: MonitorPair,
    pub one_z: MonitorPair,
    pub alpha_alpha: MonitorPair,
    pub vacuum: MonitorPair,
    pub zero_x: MonitorPair,
}

impl MonitoringGains {
    /// `Q_{0z}^{M0}+Q_{0z}^{M1}+Q_{1z}^{M0}+Q_{1z}^{M1}`.
    pub fn logic_sum(&self) -> f64 {
        self.zero_z.sum() + self.one_z.sum()
    }

    /// `Q_{0z}^{M0}+Q_{1z}^{M0}`.
    pub fn logic_m0(&self) -> f64 {
        self.zero_z.m0 + self.one_z.m0
    }

    fn pairs(&self) -> [&MonitorPair; 5] {
        [
            &self.zero_z,
            &self.one_z,
            &self.alpha_alpha,
            &self.vacuum,
            &self.zero_x,
        ]
    }

    fn map(&self, f: impl Fn(&MonitorPair) -> MonitorPair) -> Self {
        Self {
            zero_z: f(&self.zero_z),
            one_z: f(&self.one_z),
            alpha_alpha: f(&self.alpha_alpha),
            vacuum: f(&self.vacuum),
            zero_x: f(&self.zero_x),
        }
    }
}

/// Every gain needed to evaluate both key-rate formulas at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GainSet {
    pub data: DataLineGains,
    pub monitor: MonitoringGains,
}

impl GainSet {
    /// Data-line gains plus monitoring gains with misalignment applied.
    pub fn compute(params: &SystemParams) -> Self {
        Self {
            data: data_line_gains(params),
            monitor: apply_misalignment(&monitoring_gains_ideal(params), params.misalignment()),
        }
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        let d = &self.data;
        [d.zero_z.t0, d.zero_z.t1, d.one_z.t0, d.one_z.t1]
            .into_iter()
            .chain(self.monitor.pairs().into_iter().flat_map(|p| [p.m0, p.m1]))
    }
}

/// Monitoring gains at zero misalignment.
///
/// `e_a` is ignored; `zero_x` is filled from [`nonclassical_gains_ideal`].
pub fn monitoring_gains_ideal(params: &SystemParams) -> MonitoringGains {
    let p_d = params.dark_count();
    let mu = params.mu();
    let t_b = params.t_b();
    let eta = params.total_transmittance();
    let keep = 1.0 - p_d;

    // c1 is the no-click probability of one monitoring port for a single
    // non-empty pulse; 1 − c1 is evaluated without cancellation.
    let half_port = (1.0 - t_b) * mu * eta / 2.0;
    let c1 = keep * (-half_port).exp();
    let one_minus_c1 = click_probability(half_port, p_d);

    let decoy_mean = 2.0 * mu * (1.0 - t_b) * eta;
    let decoy_click = click_probability(decoy_mean, p_d);
    let decoy_dark = p_d * (-decoy_mean).exp();

    let (logic, aa0, aa1, vac) = match params.variant() {
        Variant::Passive => {
            let c5 = -2.0 * (-2.0 * t_b * mu).exp()
                + 2.0 * (-t_b * mu - t_b * mu * eta).exp()
                + (-2.0 * t_b * mu * eta).exp();
            let keep3 = keep.powi(3);
            (
                keep.powi(2) * (-t_b * mu * eta).exp() * c1 * one_minus_c1,
                keep3 * decoy_click * c5,
                decoy_dark * keep3 * c5,
                p_d * keep3,
            )
        }
        Variant::Active => (
            c1 * one_minus_c1,
            keep * decoy_click,
            decoy_dark * keep,
            p_d * keep,
        ),
    };

    MonitoringGains {
        zero_z: MonitorPair::new(logic, logic),
        one_z: MonitorPair::new(logic, logic),
        alpha_alpha: MonitorPair::new(aa0, aa1),
        vacuum: MonitorPair::new(vac, vac),
        zero_x: nonclassical_gains_ideal(params),
    }
}

/// Monitoring gains `(Q_{0x}^{M0}, Q_{0x}^{M1})` of the nonclassical mode
/// `|0_x⟩ = (|0_z⟩+|1_z⟩)/√N⁺`. The same expressions serve both variants.
pub fn nonclassical_gains_ideal(params: &SystemParams) -> MonitorPair {
    let p_d = params.dark_count();
    let mu = params.mu();
    let t_b = params.t_b();
    let eta = params.total_transmittance();
    let keep = 1.0 - p_d;

    let n_plus = 2.0 * (1.0 + (-mu).exp());
    let half_port = (1.0 - t_b) * mu * eta / 2.0;
    let c1 = keep * (-half_port).exp();
    let one_minus_c1 = click_probability(half_port, p_d);

    let lost = (1.0 - t_b) * mu * (1.0 - eta) / 2.0;
    let c2 = lost.exp() + (-lost).exp();
    // e^{−t_B μ η} − e^{−t_B μ}
    let c3 = -(-t_b * mu * eta).exp() * (-t_b * mu * (1.0 - eta)).exp_m1();
    let routed = (1.0 - t_b) * mu / 2.0;
    // c4 − (1−p_d)c2 = 2cosh(routed) − 2cosh(lost) + p_d·c2, with the cosh
    // difference written as a sinh product to avoid cancellation.
    let c4_minus_c2 = 4.0 * ((routed + lost) / 2.0).sinh() * ((routed - lost) / 2.0).sinh();
    let c4_minus_keep_c2 = c4_minus_c2 + p_d * c2;
    let front = (-(1.0 + t_b) * mu / 2.0).exp();

    let m0 = 2.0 / n_plus * keep.powi(3) * one_minus_c1 * (front * c2 + (-half_port).exp() * c3);
    let m1 = 2.0 / n_plus * keep.powi(2) * c1 * (front * c4_minus_keep_c2 + c3 * one_minus_c1);
    MonitorPair::new(m0, m1)
}

/// Port cross-talk applied to every monitoring pair.
pub fn apply_misalignment(gains: &MonitoringGains, e_a: f64) -> MonitoringGains {
    gains.map(|p| p.mixed(e_a))
}

/// Mean photon number of a non-empty pulse at the data-line detector.
///
/// Passive: the beam-splitter passes a fraction `t_B`. Active: gains are
/// conditioned on the switch selecting the data line, which then receives
/// the whole pulse.
pub fn data_line_mean_photons(params: &SystemParams) -> f64 {
    let arriving = params.mu() * params.total_transmittance();
    match params.variant() {
        Variant::Passive => params.t_b() * arriving,
        Variant::Active => arriving,
    }
}

/// Two-slot arrival-time gains with misalignment leakage into the wrong slot
/// and random assignment of double clicks.
pub fn data_line_gains(params: &SystemParams) -> DataLineGains {
    let p_d = params.dark_count();
    let e_a = params.misalignment();
    let lambda = data_line_mean_photons(params);

    let signal = click_probability(lambda * (1.0 - e_a), p_d);
    let leak = click_probability(lambda * e_a, p_d);
    let both = signal * leak / 2.0;
    let correct = signal * (1.0 - leak) + both;
    let wrong = leak * (1.0 - signal) + both;

    DataLineGains {
        zero_z: SlotPair {
            t0: correct,
            t1: wrong,
        },
        one_z: SlotPair {
            t0: wrong,
            t1: correct,
        },
    }
}
