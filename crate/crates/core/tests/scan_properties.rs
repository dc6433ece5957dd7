use cowqkd::{scan, RateFlag, ScanConfig, SystemParams, Variant};

fn base(p_d: f64, eta_d: f64, e_a: f64, variant: Variant) -> SystemParams {
    SystemParams::builder()
        .dark_count(p_d)
        .detector_efficiency(eta_d)
        .ec_efficiency(1.1)
        .misalignment(e_a)
        .variant(variant)
        .build()
        .unwrap()
}

fn lengths(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step).round() as usize;
    (0..=n).map(|i| start + step * i as f64).collect()
}

fn cutoff(points: &[cowqkd::RatePoint]) -> f64 {
    points
        .iter()
        .filter(|p| p.flag == RateFlag::Ok)
        .map(|p| p.length_km)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn optimised_rate_is_nonincreasing_in_length() {
    let cfg = ScanConfig {
        lengths_km: lengths(0.0, 150.0, 10.0),
        ..Default::default()
    };
    let pts = scan(&base(1e-8, 0.8, 0.02, Variant::Passive), &cfg).unwrap();
    for w in pts.windows(2) {
        assert!(
            w[1].r <= w[0].r + 1e-15,
            "{} km: {} > {}",
            w[1].length_km,
            w[1].r,
            w[0].r
        );
    }
    let ls: Vec<f64> = pts.iter().map(|p| p.length_km).collect();
    assert_eq!(ls, cfg.lengths_km);
}

#[test]
fn misalignment_only_costs_rate() {
    let cfg = ScanConfig {
        lengths_km: lengths(0.0, 120.0, 20.0),
        ..Default::default()
    };
    let clean = scan(&base(1e-8, 0.8, 0.0, Variant::Passive), &cfg).unwrap();
    let noisy = scan(&base(1e-8, 0.8, 0.05, Variant::Passive), &cfg).unwrap();
    for (c, n) in clean.iter().zip(&noisy) {
        assert!(n.r <= c.r, "{} km", c.length_km);
    }
}

#[test]
fn active_basis_choice_reaches_further() {
    let cfg = ScanConfig {
        lengths_km: lengths(60.0, 100.0, 2.0),
        ..Default::default()
    };
    let passive = scan(&base(1e-7, 0.99, 0.01, Variant::Passive), &cfg).unwrap();
    let active = scan(&base(1e-7, 0.99, 0.01, Variant::Active), &cfg).unwrap();
    assert!(
        cutoff(&active) > cutoff(&passive),
        "{} vs {}",
        cutoff(&active),
        cutoff(&passive)
    );
}

#[test]
fn scans_are_reproducible() {
    let cfg = ScanConfig {
        lengths_km: lengths(0.0, 100.0, 25.0),
        ..Default::default()
    };
    let b = base(1e-7, 0.99, 0.01, Variant::Active);
    assert_eq!(scan(&b, &cfg).unwrap(), scan(&b, &cfg).unwrap());
}
