//! Seeded Monte-Carlo sampler of the detection model.
//!
//! Photon arrivals follow Poisson statistics, detectors are threshold
//! detectors with independent dark counts, and when both detectors of a line
//! fire one of them is reported uniformly at random. Samples are grouped in
//! fixed blocks of [`BLOCK_SIZE`]; block `b` of experiment `d` draws from
//! ChaCha8 stream `(d << 32) | b` seeded by the user seed, so estimates do
//! not depend on the number of worker threads. Per-block click counts are
//! integers and are summed order-independently.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gains::{apply_misalignment, click_probability, monitoring_gains_ideal, DataLineGains};
use crate::params::{SystemParams, Variant};

pub const MIN_SAMPLES: u64 = 10_000;
pub const BLOCK_SIZE: u64 = 1 << 16;

/// Frequency estimate of one gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleEstimate {
    pub gain_name: &'static str,
    pub estimate: f64,
    pub clicks: u64,
    pub n_samples: u64,
    /// Binomial standard error `sqrt(p̂(1−p̂)/n)`.
    pub std_err: f64,
}

impl OracleEstimate {
    fn new(gain_name: &'static str, clicks: u64, n_samples: u64) -> Self {
        let p = clicks as f64 / n_samples as f64;
        Self {
            gain_name,
            estimate: p,
            clicks,
            n_samples,
            std_err: (p * (1.0 - p) / n_samples as f64).sqrt(),
        }
    }
}

/// A threshold detector facing a coherent state.
#[derive(Debug, Clone, Copy)]
struct Detector {
    // P(no photon) = e^{−λ}
    vacuum: f64,
    dark: f64,
}

impl Detector {
    fn new(lambda: f64, p_d: f64) -> Self {
        Self {
            vacuum: (-lambda).exp(),
            dark: p_d,
        }
    }

    fn fires<R: Rng>(&self, rng: &mut R) -> bool {
        let photon = rng.gen::<f64>() >= self.vacuum;
        let dark = rng.gen::<f64>() < self.dark;
        photon || dark
    }
}

/// One threshold-detector trial with mean photon number `lambda`.
pub fn sample_click<R: Rng>(lambda: f64, p_d: f64, rng: &mut R) -> bool {
    Detector::new(lambda, p_d).fires(rng)
}

/// Fires both detectors and squashes a double click to a single outcome.
fn squashed<R: Rng>(a: &Detector, b: &Detector, rng: &mut R) -> (bool, bool) {
    match (a.fires(rng), b.fires(rng)) {
        (true, true) => {
            if rng.gen::<bool>() {
                (true, false)
            } else {
                (false, true)
            }
        }
        other => other,
    }
}

fn check_samples(n: u64) -> Result<()> {
    if n < MIN_SAMPLES {
        Err(Error::InsufficientSamples {
            got: n,
            min: MIN_SAMPLES,
        })
    } else {
        Ok(())
    }
}

fn run_blocks<const N: usize>(
    n_samples: u64,
    seed: u64,
    domain: u32,
    trial: impl Fn(&mut ChaCha8Rng, &mut [u64; N]) + Sync,
) -> [u64; N] {
    let blocks = n_samples.div_ceil(BLOCK_SIZE);
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((domain as u64) << 32) | b);
            let len = BLOCK_SIZE.min(n_samples - b * BLOCK_SIZE);
            let mut counts = [0u64; N];
            for _ in 0..len {
                trial(&mut rng, &mut counts);
            }
            counts
        })
        .reduce(
            || [0u64; N],
            |mut acc, c| {
                acc.iter_mut().zip(c).for_each(|(a, c)| *a += c);
                acc
            },
        )
}

const DATA_NAMES: [&str; 4] = ["Q_0z_T0", "Q_0z_T1", "Q_1z_T0", "Q_1z_T1"];
const MONITOR_NAMES: [&str; 6] = [
    "Q_aa_M0", "Q_aa_M1", "Q_00_M0", "Q_00_M1", "Q_0z_M0", "Q_0z_M1",
];

fn data_estimates(
    params: &SystemParams,
    n: u64,
    seed: u64,
    domain: u32,
) -> Result<Vec<OracleEstimate>> {
    check_samples(n)?;
    let e_a = params.misalignment();
    let p_d = params.dark_count();
    let arriving = params.mu() * params.total_transmittance();
    // The active switch hands the whole pulse to the data line.
    let lambda = match params.variant() {
        Variant::Passive => params.t_b() * arriving,
        Variant::Active => arriving,
    };
    let correct = Detector::new(lambda * (1.0 - e_a), p_d);
    let wrong = Detector::new(lambda * e_a, p_d);

    let counts = run_blocks::<4>(n, seed, domain, |rng, c| {
        // |0_z⟩: correct slot is T0.
        let (t0, t1) = squashed(&correct, &wrong, rng);
        c[0] += t0 as u64;
        c[1] += t1 as u64;
        // |1_z⟩: correct slot is T1.
        let (t1, t0) = squashed(&correct, &wrong, rng);
        c[2] += t0 as u64;
        c[3] += t1 as u64;
    });
    Ok(DATA_NAMES
        .iter()
        .zip(counts)
        .map(|(name, k)| OracleEstimate::new(name, k, n))
        .collect())
}

fn monitoring_estimates(
    params: &SystemParams,
    n: u64,
    seed: u64,
    domain: u32,
) -> Result<Vec<OracleEstimate>> {
    check_samples(n)?;
    let e_a = params.misalignment();
    let p_d = params.dark_count();
    let routed = (1.0 - params.t_b()) * params.mu() * params.total_transmittance();
    let decoy = 2.0 * routed;
    let aa = (
        Detector::new((1.0 - e_a) * decoy, p_d),
        Detector::new(e_a * decoy, p_d),
    );
    let dark_only = Detector::new(0.0, p_d);
    let single = Detector::new(routed / 2.0, p_d);

    let counts = run_blocks::<6>(n, seed, domain, |rng, c| {
        let (m0, m1) = squashed(&aa.0, &aa.1, rng);
        c[0] += m0 as u64;
        c[1] += m1 as u64;
        let (m0, m1) = squashed(&dark_only, &dark_only, rng);
        c[2] += m0 as u64;
        c[3] += m1 as u64;
        let (m0, m1) = squashed(&single, &single, rng);
        c[4] += m0 as u64;
        c[5] += m1 as u64;
    });
    Ok(MONITOR_NAMES
        .iter()
        .zip(counts)
        .map(|(name, k)| OracleEstimate::new(name, k, n))
        .collect())
}

/// Estimates `Q_0z^T0, Q_0z^T1, Q_1z^T0, Q_1z^T1` (in that order).
pub fn estimate_data_gains(
    params: &SystemParams,
    n_samples: u64,
    seed: u64,
) -> Result<Vec<OracleEstimate>> {
    data_estimates(params, n_samples, seed, 0)
}

/// Estimates `Q_αα^M0, Q_αα^M1, Q_00^M0, Q_00^M1, Q_0z^M0, Q_0z^M1` (in that
/// order) under the squashed port model.
pub fn estimate_monitoring_gains(
    params: &SystemParams,
    n_samples: u64,
    seed: u64,
) -> Result<Vec<OracleEstimate>> {
    monitoring_estimates(params, n_samples, seed, 1)
}

/// Closed form of the squashed two-detector model the sampler implements
/// for the monitoring line, in the order of [`estimate_monitoring_gains`].
pub fn squashed_monitoring_gains(params: &SystemParams) -> [f64; 6] {
    let e_a = params.misalignment();
    let p_d = params.dark_count();
    let routed = (1.0 - params.t_b()) * params.mu() * params.total_transmittance();
    let pair = |a: f64, b: f64| (a * (1.0 - b) + a * b / 2.0, b * (1.0 - a) + a * b / 2.0);
    let aa = pair(
        click_probability(2.0 * routed * (1.0 - e_a), p_d),
        click_probability(2.0 * routed * e_a, p_d),
    );
    let vac = pair(p_d, p_d);
    let single = click_probability(routed / 2.0, p_d);
    let logic = pair(single, single);
    [aa.0, aa.1, vac.0, vac.1, logic.0, logic.1]
}

/// Closed-form monitoring gains (with cross-talk) in the order of
/// [`estimate_monitoring_gains`].
fn closed_form_monitoring(params: &SystemParams) -> [f64; 6] {
    let m = apply_misalignment(&monitoring_gains_ideal(params), params.misalignment());
    [
        m.alpha_alpha.m0,
        m.alpha_alpha.m1,
        m.vacuum.m0,
        m.vacuum.m1,
        m.zero_z.m0,
        m.zero_z.m1,
    ]
}

/// Gated comparisons use `|z| ≤ 4`.
pub const Z_THRESHOLD: f64 = 4.0;
/// Below this expected event count the normal approximation is not trusted.
pub const MIN_EXPECTED_EVENTS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Too few expected events for a normal-approximation test.
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub point: String,
    pub analytic: f64,
    pub estimate: OracleEstimate,
    /// `(p̂ − p)/σ` with `σ = sqrt(p(1−p)/n)` taken from the analytic value.
    pub z: f64,
    pub status: CheckStatus,
}

impl Check {
    pub fn new(point: String, analytic: f64, estimate: OracleEstimate) -> Self {
        let n = estimate.n_samples as f64;
        let expected = analytic * n;
        let (z, status) = if analytic == 0.0 {
            if estimate.clicks == 0 {
                (0.0, CheckStatus::Pass)
            } else {
                (f64::INFINITY, CheckStatus::Fail)
            }
        } else if expected < MIN_EXPECTED_EVENTS || n - expected < MIN_EXPECTED_EVENTS {
            (f64::NAN, CheckStatus::Skipped)
        } else {
            let sigma = (analytic * (1.0 - analytic) / n).sqrt();
            let z = (estimate.estimate - analytic) / sigma;
            let status = if z.abs() <= Z_THRESHOLD {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            };
            (z, status)
        };
        Self {
            point,
            analytic,
            estimate,
            z,
            status,
        }
    }
}

/// Oracle estimate divided by the closed-form gain (informational).
#[derive(Debug, Clone, PartialEq)]
pub struct RatioEntry {
    pub point: String,
    pub gain_name: &'static str,
    pub oracle: f64,
    pub closed_form: f64,
    /// `NaN` when the closed form is zero.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub data_checks: Vec<Check>,
    pub monitoring_checks: Vec<Check>,
    pub ratios: Vec<RatioEntry>,
}

impl VerifyReport {
    pub fn checks(&self) -> impl Iterator<Item = &Check> {
        self.data_checks.iter().chain(&self.monitoring_checks)
    }

    pub fn passed(&self) -> bool {
        self.checks().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks().filter(|c| c.status == CheckStatus::Fail)
    }
}

/// Built-in 20-point parameter grid covering both variants, dark counts
/// from 0 to 1e-3, misalignment up to 5 % and lengths up to 100 km.
pub fn verification_grid() -> Vec<(String, SystemParams)> {
    use Variant::{Active, Passive};
    #[rustfmt::skip]
    let rows: [(f64, f64, f64, f64, f64, f64, Variant); 20] = [
        // mu,  t_B,  L_km,  eta_d, p_d,  e_a,  variant
        (0.2,  0.8,  50.0,  0.8,  1e-8, 0.02, Passive),
        (0.1,  0.5,  0.0,   1.0,  0.0,  0.0,  Passive),
        (0.5,  0.3,  10.0,  0.8,  1e-3, 0.0,  Passive),
        (0.05, 0.5,  25.0,  0.9,  1e-4, 0.05, Passive),
        (0.2,  0.2,  100.0, 0.99, 1e-3, 0.01, Passive),
        (1.0,  0.6,  5.0,   0.5,  1e-5, 0.03, Passive),
        (0.3,  0.9,  40.0,  0.8,  1e-6, 0.02, Passive),
        (0.01, 0.4,  0.0,   0.8,  1e-3, 0.05, Passive),
        (0.8,  0.1,  70.0,  0.8,  1e-4, 0.0,  Passive),
        (0.15, 0.7,  15.0,  1.0,  0.0,  0.04, Passive),
        (0.2,  0.5,  50.0,  0.8,  1e-3, 0.02, Active),
        (0.1,  0.3,  0.0,   1.0,  0.0,  0.0,  Active),
        (0.5,  0.8,  20.0,  0.99, 1e-4, 0.01, Active),
        (0.05, 0.6,  30.0,  0.8,  1e-3, 0.05, Active),
        (0.3,  0.2,  80.0,  0.9,  1e-5, 0.03, Active),
        (1.0,  0.5,  60.0,  0.8,  1e-3, 0.0,  Active),
        (0.02, 0.9,  10.0,  0.8,  1e-4, 0.02, Active),
        (0.4,  0.4,  45.0,  0.7,  1e-6, 0.01, Active),
        (0.25, 0.05, 5.0,   0.8,  1e-2, 0.05, Active),
        (0.6,  0.7,  100.0, 0.99, 1e-3, 0.04, Active),
    ];
    rows.iter()
        .map(|&(mu, t_b, l, eta_d, p_d, e_a, variant)| {
            let params = SystemParams::builder()
                .mu(mu)
                .t_b(t_b)
                .length_km(l)
                .detector_efficiency(eta_d)
                .dark_count(p_d)
                .misalignment(e_a)
                .variant(variant)
                .build()
                .expect("built-in grid is valid");
            let label =
                format!("{variant} mu={mu} tB={t_b} L={l} eta_d={eta_d} pd={p_d:e} ea={e_a}");
            (label, params)
        })
        .collect()
}

/// Compares oracle estimates with `analytic_data` (normally
/// [`crate::gains::data_line_gains`]) and with [`squashed_monitoring_gains`]
/// at every grid point, and reports oracle / closed-form ratios.
pub fn verify(
    grid: &[(String, SystemParams)],
    n_samples: u64,
    seed: u64,
    analytic_data: &(dyn Fn(&SystemParams) -> DataLineGains + Sync),
) -> Result<VerifyReport> {
    check_samples(n_samples)?;
    let mut report = VerifyReport::default();
    for (i, (label, params)) in grid.iter().enumerate() {
        let domain = 2 * i as u32 + 2;
        let d = analytic_data(params);
        let expected = [d.zero_z.t0, d.zero_z.t1, d.one_z.t0, d.one_z.t1];
        for (est, analytic) in data_estimates(params, n_samples, seed, domain)?
            .into_iter()
            .zip(expected)
        {
            report
                .data_checks
                .push(Check::new(label.clone(), analytic, est));
        }

        let spec_model = squashed_monitoring_gains(params);
        let closed = closed_form_monitoring(params);
        for ((est, analytic), closed) in monitoring_estimates(params, n_samples, seed, domain + 1)?
            .into_iter()
            .zip(spec_model)
            .zip(closed)
        {
            report.ratios.push(RatioEntry {
                point: label.clone(),
                gain_name: est.gain_name,
                oracle: est.estimate,
                closed_form: closed,
                ratio: if closed == 0.0 {
                    f64::NAN
                } else {
                    est.estimate / closed
                },
            });
            report
                .monitoring_checks
                .push(Check::new(label.clone(), analytic, est));
        }
    }
    Ok(report)
}
