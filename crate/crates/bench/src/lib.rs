//! Shared fixtures for the criterion benchmarks.

use cowqkd::{ScanConfig, SystemParams, Variant};

/// Passive operating point at 50 km with typical detector figures.
pub fn reference_params() -> SystemParams {
    SystemParams::builder()
        .length_km(50.0)
        .dark_count(1e-8)
        .detector_efficiency(0.8)
        .misalignment(0.01)
        .mu(0.05)
        .t_b(0.5)
        .variant(Variant::Passive)
        .build()
        .expect("valid reference parameters")
}

pub fn scan_config(lengths_km: Vec<f64>) -> ScanConfig {
    ScanConfig {
        lengths_km,
        ..Default::default()
    }
}
