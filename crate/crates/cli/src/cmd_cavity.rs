//! `sqzforge cavity`: photorefractive scan ladders and resonance summaries.

use sqzforge_core::cavity::{
    asymmetry, dip_center_nm, fit_resonance, linear_regression, lorentzian_transmission,
    CavityParams, Coupling, PhotorefractiveParams, ResonanceModel, ScanConfig,
};
use sqzforge_core::config::SectionReader;
use sqzforge_core::constants::C_NM_PER_S;
use sqzforge_core::{Error, Result};

use crate::cfg::RunConfig;
use crate::out::{fnum, OutDir};

pub struct CavitySettings {
    pub cavity: CavityParams,
    pub coupling: Coupling,
    pub pr: PhotorefractiveParams,
    pub scan_speed: f64,
    pub powers_mw: Vec<f64>,
    pub speeds: Vec<f64>,
    pub speed_power_mw: f64,
}

pub fn settings_from(cfg: &RunConfig) -> Result<CavitySettings> {
    let section = cfg.raw.section("cavity").ok_or_else(|| {
        Error::Config("the cavity command needs a [cavity] section in the config".into())
    })?;
    let mut r = SectionReader::new(section);
    let lambda0 = r.f64_or("lambda0_nm", 775.0)?;
    let coupling = match r.str_or("coupling", "critical").as_str() {
        "under" => Coupling::Under,
        "critical" => Coupling::Critical,
        "over" => Coupling::Over,
        other => {
            return Err(Error::Config(format!(
                "coupling `{other}` must be under, critical or over"
            )))
        }
    };
    let cavity = if r.has("kappa0_hz") || r.has("kappa_e_hz") {
        let k0 = r.f64_req("kappa0_hz")?;
        let ke = r.f64_req("kappa_e_hz")?;
        CavityParams::new(lambda0, k0, ke)?
    } else {
        let q = r.f64_or("q_loaded", 7.1e4)?;
        let fwhm = C_NM_PER_S / lambda0 / q;
        let split = match coupling {
            Coupling::Critical => (fwhm / 2.0, fwhm / 2.0),
            Coupling::Over => (fwhm * 0.25, fwhm * 0.75),
            Coupling::Under => (fwhm * 0.75, fwhm * 0.25),
        };
        CavityParams::new(lambda0, split.0, split.1)?
    };
    let pr = PhotorefractiveParams::new(
        r.f64_or("beta_nm_per_mw", 2.0)?,
        r.f64_or("tau_s", 1.0)?,
        r.f64_or("buildup_norm", 1.0)?,
    )?;
    let scan_speed = r.f64_or("scan_speed_nm_per_s", 0.5)?;
    let powers_mw = r.f64_list_or("powers_mw", &[1.0, 2.0, 3.0, 5.0])?;
    let speeds = r.f64_list_or("speeds_nm_per_s", &[0.1, 1.0, 10.0, 100.0])?;
    let speed_power_mw = r.f64_or("speed_power_mw", 0.9)?;
    r.finish()?;
    Ok(CavitySettings { cavity, coupling, pr, scan_speed, powers_mw, speeds, speed_power_mw })
}

fn drag_window(s: &CavitySettings, power: f64) -> (f64, f64) {
    let w = s.cavity.linewidth_nm();
    // the blue excursion is bounded by the equilibrium shift beta*norm*P
    let drag = s.pr.beta_nm_per_mw * s.pr.buildup_norm * power;
    (s.cavity.lambda0_nm - drag - 30.0 * w, s.cavity.lambda0_nm + 20.0 * w)
}

pub fn run(cfg: &RunConfig, quiet: bool) -> Result<()> {
    let s = settings_from(cfg)?;
    let out = OutDir::create(&cfg.out_dir)?;

    // power ladder at the slow scan speed
    let mut centers = Vec::new();
    let mut asyms = Vec::new();
    let mut first_trace = None;
    for &p in &s.powers_mw {
        let scan = ScanConfig::new(s.scan_speed, p, drag_window(&s, p));
        let res = sqzforge_core::simulate_scan(&s.cavity, &s.pr, &scan)?;
        let trace = decimate(&res.transmission, 4000);
        out.write(&format!("scan_power_{}mW.csv", fnum(p)), &trace.to_csv())?;
        centers.push(dip_center_nm(&trace));
        asyms.push(asymmetry(&trace).unwrap_or(0.0));
        if first_trace.is_none() {
            first_trace = Some(trace);
        }
    }
    let (slope, intercept, r2) = linear_regression(&s.powers_mw, &centers)?;
    let lineshape = if asyms.iter().all(|a| a.abs() < 0.02) { "lorentzian" } else { "sharkfin" };

    let mut summary = String::new();
    summary.push_str(&format!("# scan_speed_nm_per_s={}\n", s.scan_speed));
    summary.push_str(&format!("# slope_nm_per_mw={slope}\n"));
    summary.push_str(&format!("# intercept_nm={intercept}\n"));
    summary.push_str(&format!("# r_squared={r2}\n"));
    summary.push_str(&format!("# lineshape={lineshape}\n"));
    if lineshape == "lorentzian" {
        // static dip: report the fitted linewidth as well
        if let Some(t) = &first_trace {
            if let Ok(fit) = fit_resonance(t, ResonanceModel::Lorentzian, s.coupling) {
                summary.push_str(&format!(
                    "# fitted_kappa_total_hz={}\n# fitted_lambda0_nm={}\n",
                    fit.cavity.kappa_total_hz(),
                    fit.cavity.lambda0_nm
                ));
            }
        }
    }
    summary.push_str("power_mw,dip_center_nm,asymmetry\n");
    for ((p, c), a) in s.powers_mw.iter().zip(centers.iter()).zip(asyms.iter()) {
        summary.push_str(&format!("{p},{c},{a}\n"));
    }
    out.write("summary_power.csv", &summary)?;

    // speed ladder at fixed power
    let mut speed_rows = Vec::new();
    for &v in &s.speeds {
        let scan = ScanConfig::new(v, s.speed_power_mw, drag_window(&s, s.speed_power_mw));
        let res = sqzforge_core::simulate_scan(&s.cavity, &s.pr, &scan)?;
        let trace = decimate(&res.transmission, 4000);
        let dev = trace
            .x
            .iter()
            .zip(trace.y.iter())
            .map(|(lam, y)| {
                let delta = C_NM_PER_S * (1.0 / lam - 1.0 / s.cavity.lambda0_nm);
                (y - lorentzian_transmission(delta, &s.cavity)).abs()
            })
            .fold(0.0_f64, f64::max);
        let a = asymmetry(&trace).unwrap_or(0.0);
        out.write(&format!("scan_speed_{}nmps.csv", fnum(v)), &trace.to_csv())?;
        speed_rows.push((v, a, dev));
    }
    let mut summary = String::new();
    summary.push_str(&format!("# power_mw={}\n", s.speed_power_mw));
    summary.push_str("speed_nm_per_s,asymmetry,max_dev_from_lorentzian\n");
    for (v, a, d) in &speed_rows {
        summary.push_str(&format!("{v},{a},{d}\n"));
    }
    out.write("summary_speed.csv", &summary)?;

    if !quiet {
        println!(
            "power ladder: slope {slope:.4} nm/mW (r2 {r2:.5}, {lineshape}); speed ladder: asymmetry {} -> {}",
            speed_rows.first().map(|r| r.1).unwrap_or(0.0),
            speed_rows.last().map(|r| r.1).unwrap_or(0.0)
        );
    }
    Ok(())
}

/// Keeps output CSVs plot-sized without touching the simulation resolution.
fn decimate(t: &sqzforge_core::Trace, max_points: usize) -> sqzforge_core::Trace {
    if t.len() <= max_points {
        return t.clone();
    }
    let stride = t.len().div_ceil(max_points);
    let xs: Vec<f64> = t.x.iter().step_by(stride).cloned().collect();
    let ys: Vec<f64> = t.y.iter().step_by(stride).cloned().collect();
    let mut out = sqzforge_core::Trace::new(t.x_kind, &t.y_label, xs, ys).unwrap();
    out.meta = t.meta.clone();
    out
}
