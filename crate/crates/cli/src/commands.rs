use std::fs::File;
use std::io::{BufWriter, Write};

use cowqkd::oracle::{self, CheckStatus, MIN_SAMPLES};
use cowqkd::security::{azuma_deviation, evaluate, plob_bound};
use cowqkd::{
    optimize_point, scan as run_scan, DataLineGains, RatePoint, ScanConfig, SystemParams,
};

use crate::config::RunConfig;
use crate::CliError;

pub type AnalyticDataLine = dyn Fn(&SystemParams) -> DataLineGains + Sync;

pub const CSV_HEADER: &str = "L_km,eta_ch,eta_tot,mu_opt,tB_opt,Qz,Eb,Ep_u,R,R_tilde,R_plob,flag";

fn io_err(e: std::io::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// Writes to `--out` when given, otherwise to `stdout`.
fn emit(cfg: &RunConfig, stdout: &mut dyn Write, body: &str) -> Result<(), CliError> {
    match &cfg.out {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| CliError::Io(format!("cannot write `{}`: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            w.write_all(body.as_bytes()).map_err(io_err)?;
            w.flush().map_err(io_err)
        }
        None => stdout.write_all(body.as_bytes()).map_err(io_err),
    }
}

/// Nine significant digits.
fn sig9(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn csv_row(p: &RatePoint) -> String {
    let vals = [
        p.length_km,
        p.eta_ch,
        p.eta_tot,
        p.mu_opt,
        p.tb_opt,
        p.q_z,
        p.errors.e_b,
        p.errors.e_p_u,
        p.r,
        p.r_tilde,
        p.r_plob,
    ];
    let mut row = vals.map(sig9).join(",");
    row.push(',');
    row.push_str(&p.flag.to_string());
    row
}

fn scan_config(cfg: &RunConfig, lengths_km: Vec<f64>) -> ScanConfig {
    ScanConfig {
        lengths_km,
        protocol: cfg.protocol,
        fixed_mu: cfg.mu,
        fixed_tb: cfg.tb,
        ..Default::default()
    }
}

fn core_err(e: cowqkd::Error) -> CliError {
    CliError::Config(e.to_string())
}

pub fn scan(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let base = cfg.params()?;
    let points = run_scan(&base, &scan_config(cfg, cfg.lengths_km.clone())).map_err(core_err)?;
    let mut body = String::from(CSV_HEADER);
    body.push('\n');
    for p in &points {
        body.push_str(&csv_row(p));
        body.push('\n');
    }
    emit(cfg, stdout, &body)
}

/// `key=value` line with a round-trip exact value.
fn kv(out: &mut String, key: &str, v: f64) {
    out.push_str(&format!("{key}={v:e}\n"));
}

pub fn point(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    if cfg.mu.is_none() || cfg.tb.is_none() {
        return Err(CliError::Config("point needs --mu and --tb".into()));
    }
    let params = cfg
        .params()?
        .with_length(cfg.single_length()?)
        .map_err(core_err)?;
    let e = evaluate(&params).map_err(core_err)?;
    let g = &e.gains;
    let mut s = String::new();
    s.push_str(&format!("variant={}\n", params.variant()));
    kv(&mut s, "L_km", params.length_km());
    kv(&mut s, "eta_ch", params.channel_transmittance());
    kv(&mut s, "eta_tot", params.total_transmittance());
    kv(&mut s, "mu", params.mu());
    kv(&mut s, "tB", params.t_b());
    kv(&mut s, "Q_0z_T0", g.data.zero_z.t0);
    kv(&mut s, "Q_0z_T1", g.data.zero_z.t1);
    kv(&mut s, "Q_1z_T0", g.data.one_z.t0);
    kv(&mut s, "Q_1z_T1", g.data.one_z.t1);
    let m = &g.monitor;
    for (name, pair) in [
        ("0z", m.zero_z),
        ("1z", m.one_z),
        ("aa", m.alpha_alpha),
        ("00", m.vacuum),
        ("0x", m.zero_x),
    ] {
        kv(&mut s, &format!("Q_{name}_M0"), pair.m0);
        kv(&mut s, &format!("Q_{name}_M1"), pair.m1);
    }
    kv(&mut s, "Q_0x_M1_upper", e.bounds.upper);
    kv(&mut s, "Q_0x_M1_upper_raw", e.bounds.upper_raw);
    kv(&mut s, "Q_0x_M0_lower", e.bounds.lower);
    kv(&mut s, "Q_0x_M0_lower_raw", e.bounds.lower_raw);
    kv(&mut s, "Qz", e.q_z);
    kv(&mut s, "Eb", e.errors.e_b);
    kv(&mut s, "Ex", e.errors.e_x);
    kv(&mut s, "Ex_raw", e.e_x_raw);
    kv(&mut s, "Ep_u", e.errors.e_p_u);
    kv(&mut s, "Ep_u_raw", e.phase.raw);
    kv(&mut s, "Ep_bracket_raw", e.phase.bracket_raw);
    s.push_str(&format!("bound_trivial={}\n", e.phase.is_trivial()));
    kv(&mut s, "R", e.r);
    kv(&mut s, "R_tilde", e.r_tilde);
    kv(
        &mut s,
        "R_plob",
        plob_bound(params.channel_transmittance()).unwrap_or(f64::INFINITY),
    );
    emit(cfg, stdout, &s)
}

pub fn optimize(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let length = cfg.single_length()?;
    let base = cfg.params()?.with_length(length).map_err(core_err)?;
    let p = optimize_point(&base, &scan_config(cfg, vec![length])).map_err(core_err)?;
    let mut s = String::new();
    s.push_str(&format!(
        "variant={}\nprotocol={}\n",
        base.variant(),
        cfg.protocol
    ));
    kv(&mut s, "L_km", p.length_km);
    kv(&mut s, "eta_ch", p.eta_ch);
    kv(&mut s, "eta_tot", p.eta_tot);
    kv(&mut s, "mu_opt", p.mu_opt);
    kv(&mut s, "tB_opt", p.tb_opt);
    kv(&mut s, "Qz", p.q_z);
    kv(&mut s, "Eb", p.errors.e_b);
    kv(&mut s, "Ex", p.errors.e_x);
    kv(&mut s, "Ep_u", p.errors.e_p_u);
    kv(&mut s, "Ep_u_raw", p.e_p_u_raw);
    kv(&mut s, "R", p.r);
    kv(&mut s, "R_tilde", p.r_tilde);
    kv(&mut s, "R_plob", p.r_plob);
    s.push_str(&format!("flag={}\n", p.flag));
    emit(cfg, stdout, &s)
}

pub fn verify(
    cfg: &RunConfig,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
    analytic: &AnalyticDataLine,
) -> Result<(), CliError> {
    if cfg.samples < MIN_SAMPLES {
        let _ = writeln!(
            stderr,
            "warning: insufficient samples ({} < {MIN_SAMPLES})",
            cfg.samples
        );
        return Err(CliError::Config("insufficient samples".into()));
    }
    let grid = oracle::verification_grid();
    let report = oracle::verify(&grid, cfg.samples, cfg.seed, analytic).map_err(core_err)?;

    let mut s = format!(
        "# oracle verification: {} points, n={}, seed={}\n",
        grid.len(),
        cfg.samples,
        cfg.seed
    );
    s.push_str("status,line,gain,point,analytic,estimate,std_err,z\n");
    let lines = report
        .data_checks
        .iter()
        .map(|c| ("data", c))
        .chain(report.monitoring_checks.iter().map(|c| ("monitoring", c)));
    for (line, c) in lines {
        let status = match c.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped => "SKIP",
        };
        s.push_str(&format!(
            "{status},{line},{},{},{:e},{:e},{:e},{:.3}\n",
            c.estimate.gain_name, c.point, c.analytic, c.estimate.estimate, c.estimate.std_err, c.z
        ));
    }
    s.push_str("# oracle / closed-form monitoring gains (informational)\n");
    s.push_str("ratio,gain,point,oracle,closed_form,ratio\n");
    for r in &report.ratios {
        s.push_str(&format!(
            "RATIO,{},{},{:e},{:e},{:.6}\n",
            r.gain_name, r.point, r.oracle, r.closed_form, r.ratio
        ));
    }
    let total = report.checks().count();
    let skipped = report
        .checks()
        .filter(|c| c.status == CheckStatus::Skipped)
        .count();
    let failed: Vec<_> = report.failures().collect();
    s.push_str(&format!(
        "# summary: {} checks, {} passed, {} skipped, {} failed\n",
        total,
        total - skipped - failed.len(),
        skipped,
        failed.len()
    ));
    emit(cfg, stdout, &s)?;

    if failed.is_empty() {
        Ok(())
    } else {
        let list: Vec<String> = failed
            .iter()
            .map(|c| format!("{} [{}] z={:.2}", c.estimate.gain_name, c.point, c.z))
            .collect();
        Err(CliError::Verification(list.join("; ")))
    }
}

pub fn finite_size(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let rounds = cfg
        .rounds
        .ok_or_else(|| CliError::Config("finite-size needs --k".into()))?;
    let fail = cfg
        .fail
        .ok_or_else(|| CliError::Config("finite-size needs --fail".into()))?;
    let eps = azuma_deviation(rounds, fail).map_err(core_err)?;
    let mut s = format!("K={rounds}\n");
    kv(&mut s, "fail_prob", fail);
    kv(&mut s, "epsilon", eps);
    emit(cfg, stdout, &s)
}
