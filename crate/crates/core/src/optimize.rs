//! Key-rate maximisation over `(μ, t_B)` and distance scans.
//!
//! Each distance is optimised by a full grid evaluation (μ log-spaced, t_B
//! linear) followed by `refine_iters` rounds of coordinate-wise
//! golden-section search within one grid step of the incumbent. Ties on the
//! grid go to the smallest μ, then the smallest t_B.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::security::{evaluate, plob_bound, RatePoint};

/// Which key rate the optimiser maximises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Protocol {
    /// The practical COW rate `R` with the phase-error upper bound.
    #[default]
    Cow,
    /// The prepare-and-measure rate `R̃` with the exact X-basis error.
    Nonclassical,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Cow => "cow",
            Protocol::Nonclassical => "nonclassical",
        })
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cow" => Ok(Protocol::Cow),
            "nonclassical" => Ok(Protocol::Nonclassical),
            other => Err(Error::InvalidConfig(format!(
                "unknown protocol `{other}` (expected cow|nonclassical)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateFlag {
    Ok,
    /// Every evaluated operating point gave zero rate.
    NoPositiveRate,
}

impl fmt::Display for RateFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RateFlag::Ok => "ok",
            RateFlag::NoPositiveRate => "no_positive_rate",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub lengths_km: Vec<f64>,
    pub mu_range: (f64, f64),
    pub mu_points: usize,
    pub tb_range: (f64, f64),
    pub tb_points: usize,
    pub refine_iters: usize,
    pub protocol: Protocol,
    /// Pin μ instead of optimising it.
    pub fixed_mu: Option<f64>,
    /// Pin t_B instead of optimising it.
    pub fixed_tb: Option<f64>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            lengths_km: vec![0.0],
            mu_range: (1e-4, 1.0),
            mu_points: 60,
            tb_range: (0.01, 0.99),
            tb_points: 49,
            refine_iters: 3,
            protocol: Protocol::Cow,
            fixed_mu: None,
            fixed_tb: None,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        let (mu_lo, mu_hi) = self.mu_range;
        let (tb_lo, tb_hi) = self.tb_range;
        if !(mu_lo > 0.0 && mu_lo < mu_hi && mu_hi.is_finite()) {
            return bad("mu range must satisfy 0 < lo < hi");
        }
        if !(tb_lo > 0.0 && tb_lo < tb_hi && tb_hi < 1.0) {
            return bad("t_B range must satisfy 0 < lo < hi < 1");
        }
        if self.mu_points < 2 || self.tb_points < 2 {
            return bad("grid sizes must be ≥ 2");
        }
        Ok(())
    }

    fn mu_grid(&self) -> Vec<f64> {
        match self.fixed_mu {
            Some(mu) => vec![mu],
            None => {
                let (lo, hi) = (self.mu_range.0.log10(), self.mu_range.1.log10());
                linspace(lo, hi, self.mu_points)
                    .into_iter()
                    .map(|x| 10f64.powf(x))
                    .collect()
            }
        }
    }

    fn tb_grid(&self) -> Vec<f64> {
        match self.fixed_tb {
            Some(tb) => vec![tb],
            None => linspace(self.tb_range.0, self.tb_range.1, self.tb_points),
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + step * i as f64 })
        .collect()
}

const GOLDEN_ITERS: usize = 48;

/// Maximises `f` on `[a, b]`; returns the best point seen.
fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_ITERS {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

struct Objective<'a> {
    base: &'a SystemParams,
    protocol: Protocol,
}

impl Objective<'_> {
    fn rate(&self, mu: f64, t_b: f64) -> f64 {
        let Ok(p) = self.base.with_operating_point(mu, t_b) else {
            return 0.0;
        };
        match (evaluate(&p), self.protocol) {
            (Ok(e), Protocol::Cow) => e.r,
            (Ok(e), Protocol::Nonclassical) => e.r_tilde,
            (Err(_), _) => 0.0,
        }
    }
}

/// Optimises `(μ, t_B)` at the length carried by `base`.
pub fn optimize_point(base: &SystemParams, config: &ScanConfig) -> Result<RatePoint> {
    config.validate()?;
    let objective = Objective {
        base,
        protocol: config.protocol,
    };
    let mu_grid = config.mu_grid();
    let tb_grid = config.tb_grid();

    let mut best = (mu_grid[0], tb_grid[0]);
    let mut best_rate = objective.rate(best.0, best.1);
    for &mu in &mu_grid {
        for &tb in &tb_grid {
            let r = objective.rate(mu, tb);
            if r > best_rate {
                best = (mu, tb);
                best_rate = r;
            }
        }
    }

    if best_rate > 0.0 {
        let log_step =
            (config.mu_range.1.log10() - config.mu_range.0.log10()) / (config.mu_points - 1) as f64;
        let tb_step = (config.tb_range.1 - config.tb_range.0) / (config.tb_points - 1) as f64;
        let (log_lo, log_hi) = (config.mu_range.0.log10(), config.mu_range.1.log10());

        for _ in 0..config.refine_iters {
            if config.fixed_mu.is_none() {
                let centre = best.0.log10();
                let a = (centre - log_step).max(log_lo);
                let b = (centre + log_step).min(log_hi);
                let (x, r) = golden_section_max(|x| objective.rate(10f64.powf(x), best.1), a, b);
                if r > best_rate {
                    best.0 = 10f64.powf(x);
                    best_rate = r;
                }
            }
            if config.fixed_tb.is_none() {
                let a = (best.1 - tb_step).max(config.tb_range.0);
                let b = (best.1 + tb_step).min(config.tb_range.1);
                let (x, r) = golden_section_max(|t| objective.rate(best.0, t), a, b);
                if r > best_rate {
                    best.1 = x;
                    best_rate = r;
                }
            }
        }
    }

    let params = base.with_operating_point(best.0, best.1)?;
    let eval = evaluate(&params)?;
    let eta_ch = params.channel_transmittance();
    Ok(RatePoint {
        length_km: params.length_km(),
        eta_ch,
        eta_tot: params.total_transmittance(),
        mu_opt: best.0,
        tb_opt: best.1,
        q_z: eval.q_z,
        errors: eval.errors,
        e_p_u_raw: eval.phase.raw,
        r: eval.r,
        r_tilde: eval.r_tilde,
        r_plob: plob_bound(eta_ch).unwrap_or(f64::INFINITY),
        flag: if best_rate > 0.0 {
            RateFlag::Ok
        } else {
            RateFlag::NoPositiveRate
        },
    })
}

/// Optimises every length in `config.lengths_km`; output keeps input order.
pub fn scan(base: &SystemParams, config: &ScanConfig) -> Result<Vec<RatePoint>> {
    config.validate()?;
    config
        .lengths_km
        .par_iter()
        .map(|&l| optimize_point(&base.with_length(l)?, config))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2(e_a: f64) -> SystemParams {
        SystemParams::builder()
            .dark_count(1e-8)
            .detector_efficiency(0.8)
            .ec_efficiency(1.1)
            .misalignment(e_a)
            .build()
            .unwrap()
    }

    #[test]
    fn linspace_hits_both_ends() {
        let v = linspace(0.01, 0.99, 49);
        assert_eq!(v.len(), 49);
        assert_eq!(v[0], 0.01);
        assert_eq!(v[48], 0.99);
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, fx) = golden_section_max(|x| -(x - 0.3).powi(2), 0.0, 1.0);
        assert!((x - 0.3).abs() < 1e-8);
        assert!(fx <= 0.0 && fx > -1e-15);
    }

    #[test]
    fn far_beyond_cutoff_is_flagged() {
        let p = fig2(0.0).with_length(300.0).unwrap();
        let pt = optimize_point(&p, &ScanConfig::default()).unwrap();
        assert_eq!(pt.r, 0.0);
        assert_eq!(pt.flag, RateFlag::NoPositiveRate);
        assert_eq!((pt.mu_opt, pt.tb_opt), (1e-4, 0.01));
    }

    #[test]
    fn fifty_km_scaling() {
        let p = fig2(0.0).with_length(50.0).unwrap();
        let pt = optimize_point(&p, &ScanConfig::default()).unwrap();
        let ratio = pt.r / pt.eta_ch.powi(2);
        assert!((0.0025..=0.01).contains(&ratio), "R/η² = {ratio}");
        assert_eq!(pt.flag, RateFlag::Ok);
    }

    #[test]
    fn optimisation_is_deterministic() {
        let p = fig2(0.02).with_length(35.0).unwrap();
        let cfg = ScanConfig::default();
        assert_eq!(
            optimize_point(&p, &cfg).unwrap(),
            optimize_point(&p, &cfg).unwrap()
        );
    }

    #[test]
    fn optimum_dominates_grid_and_refinement_helps() {
        let p = fig2(0.02).with_length(40.0).unwrap();
        let cfg = ScanConfig::default();
        let unrefined = optimize_point(
            &p,
            &ScanConfig {
                refine_iters: 0,
                ..cfg.clone()
            },
        )
        .unwrap();
        let refined = optimize_point(&p, &cfg).unwrap();
        assert!(refined.r >= unrefined.r);
        let objective = Objective {
            base: &p,
            protocol: Protocol::Cow,
        };
        for mu in cfg.mu_grid() {
            for tb in cfg.tb_grid() {
                assert!(refined.r >= objective.rate(mu, tb));
            }
        }
    }

    #[test]
    fn zero_length_without_errors() {
        let base = fig2(0.0).to_builder().dark_count(0.0).build().unwrap();
        let cfg = ScanConfig {
            lengths_km: vec![0.0],
            ..Default::default()
        };
        let pts = scan(&base, &cfg).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].errors.e_b, 0.0);
        assert_eq!(pts[0].r_plob, f64::INFINITY);
    }

    #[test]
    fn fixed_parameters_are_respected() {
        let p = fig2(0.0).with_length(20.0).unwrap();
        let cfg = ScanConfig {
            fixed_mu: Some(0.01),
            fixed_tb: Some(0.4),
            ..Default::default()
        };
        let pt = optimize_point(&p, &cfg).unwrap();
        assert_eq!((pt.mu_opt, pt.tb_opt), (0.01, 0.4));
    }

    #[test]
    fn invalid_config_rejected() {
        let p = fig2(0.0);
        let cfg = ScanConfig {
            mu_points: 1,
            ..Default::default()
        };
        assert!(matches!(
            optimize_point(&p, &cfg),
            Err(Error::InvalidConfig(_))
        ));
        let cfg = ScanConfig {
            tb_range: (0.5, 0.4),
            ..Default::default()
        };
        assert!(optimize_point(&p, &cfg).is_err());
    }

    #[test]
    fn protocol_parses() {
        assert_eq!("COW".parse::<Protocol>().unwrap(), Protocol::Cow);
        assert_eq!(
            "nonclassical".parse::<Protocol>().unwrap(),
            Protocol::Nonclassical
        );
        assert!("bb84".parse::<Protocol>().is_err());
    }
}
