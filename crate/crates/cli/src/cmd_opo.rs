//! `sqzforge opo`: squeezing spectra, parametric gain, threshold inversion,
//! efficiency budget, projections, and homodyne trace synthesis.

use clap::Args;
use serde_json::json;
use sqzforge_core::cavity::ScanConfig;
use sqzforge_core::opo::{
    budget_total, db, gain_trace, homodyne_trace, noise_power, project_threshold_limit,
    threshold_from_gain, EfficiencyBudget, HomodyneSettings, SqueezerParams,
};
use sqzforge_core::trace::{Trace, XKind};
use sqzforge_core::{Error, Result};

use crate::cfg::RunConfig;
use crate::out::OutDir;

/// Resolves the pump operating point from either `--ratio` or `--pp`.
fn squeezer(eta: f64, fs: f64, ratio: Option<f64>, pp: Option<f64>, pth: Option<f64>) -> Result<SqueezerParams> {
    match (ratio, pp, pth) {
        (Some(r), None, None) => SqueezerParams::new(eta, 1.0, fs, r),
        (None, Some(pp), Some(pth)) => SqueezerParams::new(eta, pth, fs, pp),
        _ => Err(Error::Config(
            "specify the pump as either --ratio, or --pp together with --pth".into(),
        )),
    }
}

#[derive(Args, Debug)]
pub struct SqueezeArgs {
    /// Total detection efficiency.
    #[arg(long)]
    pub eta: f64,
    /// Signal cavity half width at half maximum in MHz.
    #[arg(long, default_value_t = 310.0)]
    pub fs: f64,
    /// Sideband frequency in MHz.
    #[arg(long, default_value_t = 5.0)]
    pub f: f64,
    /// Pump power over threshold (dimensionless).
    #[arg(long)]
    pub ratio: Option<f64>,
    /// On-chip pump power in mW (with --pth).
    #[arg(long)]
    pub pp: Option<f64>,
    /// On-chip threshold power in mW (with --pp).
    #[arg(long)]
    pub pth: Option<f64>,
    /// Also sweep the sideband frequency up to this many MHz into a CSV.
    #[arg(long, default_value_t = 500.0)]
    pub f_max: f64,
}

pub fn squeeze(args: &SqueezeArgs, out_dir: Option<&std::path::Path>, quiet: bool) -> Result<()> {
    let p = squeezer(args.eta, args.fs, args.ratio, args.pp, args.pth)?;
    let np = noise_power(&p, args.f)?;
    if !quiet {
        println!("s_minus_db = {}", np.s_minus_db());
        println!("s_plus_db = {}", np.s_plus_db());
        println!("s_minus_linear = {}", np.s_minus);
        println!("s_plus_linear = {}", np.s_plus);
    }
    if let Some(dir) = out_dir {
        let out = OutDir::create(dir)?;
        let report = json!({
            "eta": p.eta,
            "pump_ratio": p.pump_ratio(),
            "f_bar_s_mhz": p.f_bar_s_mhz,
            "f_mhz": args.f,
            "s_minus_db": np.s_minus_db(),
            "s_plus_db": np.s_plus_db(),
        });
        out.write("squeeze.json", &format!("{}\n", serde_json::to_string_pretty(&report).unwrap()))?;

        let n = 251;
        let mut fx = Vec::with_capacity(n);
        let mut minus_db = Vec::with_capacity(n);
        let mut plus = Vec::with_capacity(n);
        for k in 0..n {
            let f = args.f_max * k as f64 / (n - 1) as f64;
            let np = noise_power(&p, f)?;
            fx.push(f * 1e6);
            minus_db.push(np.s_minus_db());
            plus.push(np.s_plus_db());
        }
        let tm = Trace::new(XKind::FrequencyHz, "s_minus_db", fx.clone(), minus_db)?
            .with_meta("eta", p.eta)
            .with_meta("pump_ratio", p.pump_ratio())
            .with_meta("f_bar_s_mhz", p.f_bar_s_mhz);
        let tp = Trace::new(XKind::FrequencyHz, "s_plus_db", fx, plus)?
            .with_meta("eta", p.eta)
            .with_meta("pump_ratio", p.pump_ratio())
            .with_meta("f_bar_s_mhz", p.f_bar_s_mhz);
        out.write("squeezing_vs_frequency_minus.csv", &tm.to_csv())?;
        out.write("squeezing_vs_frequency_plus.csv", &tp.to_csv())?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct GainArgs {
    /// On-chip pump power in mW.
    #[arg(long)]
    pub pp: f64,
    /// On-chip threshold power in mW.
    #[arg(long)]
    pub pth: f64,
    /// Seed/pump phase-slip rate in ripple cycles per nm.
    #[arg(long, default_value_t = 25.0)]
    pub ripple_per_nm: f64,
}

pub fn gain(cfg: &RunConfig, args: &GainArgs, quiet: bool) -> Result<()> {
    // pump buildup envelope from the configured cavity scan
    let s = crate::cmd_cavity::settings_from(cfg)?;
    let w = s.cavity.linewidth_nm();
    let drag = s.pr.beta_nm_per_mw * s.pr.buildup_norm * args.pp;
    let window = (s.cavity.lambda0_nm - drag - 30.0 * w, s.cavity.lambda0_nm + 20.0 * w);
    let scan = ScanConfig::new(s.scan_speed, args.pp, window);
    let res = sqzforge_core::simulate_scan(&s.cavity, &s.pr, &scan)?;

    let out = OutDir::create(&cfg.out_dir)?;
    let g = gain_trace(&res.buildup, args.pp, args.pth, args.ripple_per_nm, window)?;
    out.write("gain_trace.csv", &g.to_csv())?;
    out.write("pump_buildup.csv", &res.buildup.to_csv())?;
    if !quiet {
        let gmax = g.y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let gmin = g.y.iter().cloned().fold(f64::INFINITY, f64::min);
        println!("gain ripples between {gmin:.3} and {gmax:.3}");
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct ThresholdArgs {
    /// Measured amplification factor (> 1).
    #[arg(long)]
    pub gplus: f64,
    /// Pump power at which the gain was measured, in mW.
    #[arg(long)]
    pub pp: f64,
    /// Measured deamplification factor (0..1), for the consistency check.
    #[arg(long)]
    pub gminus: Option<f64>,
}

pub fn threshold(args: &ThresholdArgs) -> Result<()> {
    let est = threshold_from_gain(args.gplus, args.gminus, args.pp)?;
    println!("p_th_mw = {}", est.p_th_mw);
    if let Some(pm) = est.p_th_from_gminus_mw {
        println!("p_th_from_gminus_mw = {pm}");
        println!("consistency_rel = {}", est.consistency.unwrap());
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct BudgetArgs {
    #[arg(long)]
    pub qe: f64,
    #[arg(long)]
    pub vis2: f64,
    #[arg(long)]
    pub opt: f64,
    #[arg(long)]
    pub esc: f64,
}

pub fn budget(args: &BudgetArgs) -> Result<()> {
    let b = EfficiencyBudget::new(args.qe, args.vis2, args.opt, args.esc)?;
    let eta = budget_total(&b)?;
    println!("eta_total = {eta}");
    println!("eta_total_db = {}", db(eta));
    Ok(())
}

#[derive(Args, Debug)]
pub struct ProjectArgs {
    /// Efficiency chain applied to the threshold-limit squeezing.
    #[arg(long)]
    pub eta: f64,
}

pub fn project(args: &ProjectArgs) -> Result<()> {
    let s = project_threshold_limit(args.eta)?;
    println!("s_minus_limit_linear = {s}");
    println!("s_minus_limit_db = {}", db(s));
    Ok(())
}

#[derive(Args, Debug)]
pub struct HomodyneArgs {
    #[arg(long)]
    pub eta: f64,
    #[arg(long, default_value_t = 310.0)]
    pub fs: f64,
    #[arg(long, default_value_t = 5.0)]
    pub f: f64,
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub pp: Option<f64>,
    #[arg(long)]
    pub pth: Option<f64>,
    /// Local-oscillator phase scan rate in Hz.
    #[arg(long, default_value_t = 0.5)]
    pub lo_rate: f64,
    #[arg(long, default_value_t = 4.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 1e6)]
    pub rbw: f64,
    #[arg(long, default_value_t = 100.0)]
    pub vbw: f64,
}

pub fn homodyne(cfg_out: &std::path::Path, seed: u64, args: &HomodyneArgs, quiet: bool) -> Result<()> {
    let p = squeezer(args.eta, args.fs, args.ratio, args.pp, args.pth)?;
    let settings = HomodyneSettings {
        lo_scan_rate_hz: args.lo_rate,
        duration_s: args.duration,
        rbw_hz: args.rbw,
        vbw_hz: args.vbw,
        seed,
        ..Default::default()
    };
    let t = homodyne_trace(&p, args.f, &settings)?;
    let out = OutDir::create(cfg_out)?;
    out.write("homodyne_trace.csv", &t.to_csv())?;
    if !quiet {
        let lo = t.y.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = t.y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!("homodyne trace spans {lo:.3} .. {hi:.3} dB");
    }
    Ok(())
}
