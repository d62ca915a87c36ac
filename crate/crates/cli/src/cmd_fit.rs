//! `sqzforge fit`: model fits over measured or synthetic trace CSVs.

use std::path::{Path, PathBuf};

use clap::Args;
use serde_json::json;
use sqzforge_core::cavity::{fit_resonance, Coupling, ResonanceModel};
use sqzforge_core::fit::{fit_squeezing_vs_frequency, fit_squeezing_vs_power, FitResult, SqzFit};
use sqzforge_core::opo::{noise_power, SqueezerParams};
use sqzforge_core::trace::{Trace, XKind};
use sqzforge_core::{Error, Result};

use crate::out::OutDir;

fn load_trace(path: &Path, expect: XKind) -> Result<Trace> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let t = Trace::from_csv(&text)?;
    if t.x_kind != expect {
        return Err(Error::Schema {
            line: 1,
            msg: format!(
                "expected `{}` data in {}, found `{}`",
                expect.column_label(),
                path.display(),
                t.x_kind.column_label()
            ),
        });
    }
    Ok(t)
}

/// `--fix name=value` assignments.
fn parse_fix(fix: &[String]) -> Result<Vec<(String, f64)>> {
    fix.iter()
        .map(|s| {
            let (k, v) = s.split_once('=').ok_or_else(|| {
                Error::Config(format!("--fix needs name=value, got `{s}`"))
            })?;
            let v: f64 = v
                .parse()
                .map_err(|_| Error::Config(format!("--fix value `{v}` is not a number")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn fit_report_json(model: &str, names: &[&str], fit: &FitResult, extra: serde_json::Value) -> String {
    let params: Vec<_> = names
        .iter()
        .zip(fit.params.iter())
        .zip(fit.std_errors.iter())
        .map(|((name, value), err)| json!({"name": name, "value": value, "std_error": err}))
        .collect();
    let report = json!({
        "model": model,
        "converged": fit.converged,
        "reason": format!("{:?}", fit.reason),
        "iterations": fit.iterations,
        "residual_norm": fit.residual_norm,
        "params": params,
        "covariance": fit.covariance,
        "flags": fit.flags,
        "extra": extra,
    });
    format!("{}\n", serde_json::to_string_pretty(&report).unwrap())
}

fn branch_pairs(t: &Trace, to_x: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
    t.x.iter().zip(t.y.iter()).map(|(x, y)| (to_x(*x), *y)).collect()
}

fn require_converged(fit: &SqzFit) -> Result<()> {
    if !fit.result.converged {
        return Err(Error::NonConvergence {
            what: "squeezing fit".into(),
            residual: fit.result.residual_norm,
        });
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct PowerArgs {
    /// Squeezing branch CSV (power_mw vs noise dB).
    #[arg(long)]
    pub minus: PathBuf,
    /// Anti-squeezing branch CSV.
    #[arg(long)]
    pub plus: PathBuf,
    /// Sideband frequency of the dataset in MHz.
    #[arg(long, default_value_t = 5.0)]
    pub f: f64,
    /// Hold parameters, e.g. `--fix fs=310`.
    #[arg(long)]
    pub fix: Vec<String>,
    /// Cavity bandwidth initializer when fs is free.
    #[arg(long, default_value_t = 310.0)]
    pub fs_init: f64,
}

pub fn power(args: &PowerArgs, out_dir: &Path, quiet: bool) -> Result<()> {
    let tm = load_trace(&args.minus, XKind::PowerMw)?;
    let tp = load_trace(&args.plus, XKind::PowerMw)?;
    let fixes = parse_fix(&args.fix)?;
    let mut fs_fixed = None;
    for (k, v) in &fixes {
        match k.as_str() {
            "fs" => fs_fixed = Some(*v),
            other => return Err(Error::Config(format!("unknown fixed parameter `{other}`"))),
        }
    }
    let minus = branch_pairs(&tm, |x| x);
    let plus = branch_pairs(&tp, |x| x);
    let fit = fit_squeezing_vs_power(&minus, &plus, args.f, fs_fixed, args.fs_init)?;
    require_converged(&fit)?;

    let out = OutDir::create(out_dir)?;
    let names: Vec<&str> = if fs_fixed.is_some() {
        vec!["eta", "p_th_mw"]
    } else {
        vec!["eta", "p_th_mw", "f_bar_s_mhz"]
    };
    out.write(
        "fit_report.json",
        &fit_report_json(
            "squeezing_vs_power",
            &names,
            &fit.result,
            json!({"f_mhz": args.f, "f_bar_s_mhz": fit.f_bar_s_mhz}),
        ),
    )?;

    let model = |pp: f64, branch: i32| -> f64 {
        let p = SqueezerParams::new(fit.eta, fit.p_th_mw.unwrap(), fit.f_bar_s_mhz, pp).unwrap();
        let np = noise_power(&p, args.f).unwrap();
        if branch < 0 {
            10.0 * np.s_minus.log10()
        } else {
            10.0 * np.s_plus.log10()
        }
    };
    let mut overlay = String::new();
    overlay.push_str("branch,power_mw,noise_db_data,noise_db_fit\n");
    for (pp, y) in &minus {
        overlay.push_str(&format!("minus,{pp},{y},{}\n", model(*pp, -1)));
    }
    for (pp, y) in &plus {
        overlay.push_str(&format!("plus,{pp},{y},{}\n", model(*pp, 1)));
    }
    out.write("overlay_power.csv", &overlay)?;
    if !quiet {
        println!(
            "eta = {:.4}, p_th_mw = {:.2}{}",
            fit.eta,
            fit.p_th_mw.unwrap(),
            if fs_fixed.is_none() { format!(", f_bar_s_mhz = {:.1}", fit.f_bar_s_mhz) } else { String::new() }
        );
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct FrequencyArgs {
    /// Squeezing branch CSV (frequency_hz vs noise dB).
    #[arg(long)]
    pub minus: PathBuf,
    /// Anti-squeezing branch CSV.
    #[arg(long)]
    pub plus: PathBuf,
    /// Hold parameters, e.g. `--fix fs=310`.
    #[arg(long)]
    pub fix: Vec<String>,
}

pub fn frequency(args: &FrequencyArgs, out_dir: &Path, quiet: bool) -> Result<()> {
    let tm = load_trace(&args.minus, XKind::FrequencyHz)?;
    let tp = load_trace(&args.plus, XKind::FrequencyHz)?;
    let fixes = parse_fix(&args.fix)?;
    let mut fs_fixed = None;
    for (k, v) in &fixes {
        match k.as_str() {
            "fs" => fs_fixed = Some(*v),
            other => return Err(Error::Config(format!("unknown fixed parameter `{other}`"))),
        }
    }
    let minus = branch_pairs(&tm, |hz| hz / 1e6);
    let plus = branch_pairs(&tp, |hz| hz / 1e6);
    let fit = fit_squeezing_vs_frequency(&minus, &plus, fs_fixed)?;
    require_converged(&fit)?;

    let out = OutDir::create(out_dir)?;
    let names: Vec<&str> = if fs_fixed.is_some() {
        vec!["eta", "pump_ratio"]
    } else {
        vec!["eta", "pump_ratio", "f_bar_s_mhz"]
    };
    out.write(
        "fit_report.json",
        &fit_report_json(
            "squeezing_vs_frequency",
            &names,
            &fit.result,
            json!({"f_bar_s_mhz": fit.f_bar_s_mhz}),
        ),
    )?;

    let p = SqueezerParams::new(fit.eta, 1.0, fit.f_bar_s_mhz, fit.pump_ratio.unwrap())?;
    let mut overlay = String::new();
    overlay.push_str("branch,frequency_mhz,noise_db_data,noise_db_fit\n");
    for (f, y) in &minus {
        let np = noise_power(&p, *f)?;
        overlay.push_str(&format!("minus,{f},{y},{}\n", np.s_minus_db()));
    }
    for (f, y) in &plus {
        let np = noise_power(&p, *f)?;
        overlay.push_str(&format!("plus,{f},{y},{}\n", np.s_plus_db()));
    }
    out.write("overlay_frequency.csv", &overlay)?;
    if !quiet {
        println!(
            "eta = {:.4}, pump_ratio = {:.4}, f_bar_s_mhz = {:.1}",
            fit.eta,
            fit.pump_ratio.unwrap(),
            fit.f_bar_s_mhz
        );
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct LineshapeArgs {
    /// Transmission trace CSV (wavelength_nm vs transmission).
    #[arg(long)]
    pub input: PathBuf,
    /// `lorentzian` or `sharkfin`.
    #[arg(long, default_value = "lorentzian")]
    pub model: String,
    /// Coupling-regime hint resolving the kappa swap ambiguity.
    #[arg(long, default_value = "over")]
    pub regime: String,
}

pub fn lineshape(args: &LineshapeArgs, out_dir: &Path, quiet: bool) -> Result<()> {
    let trace = load_trace(&args.input, XKind::WavelengthNm)?;
    let model = match args.model.as_str() {
        "lorentzian" => ResonanceModel::Lorentzian,
        "sharkfin" => ResonanceModel::SharkFin,
        other => return Err(Error::Config(format!("unknown lineshape model `{other}`"))),
    };
    let hint = match args.regime.as_str() {
        "under" => Coupling::Under,
        "critical" => Coupling::Critical,
        "over" => Coupling::Over,
        other => return Err(Error::Config(format!("unknown coupling regime `{other}`"))),
    };
    let fit = fit_resonance(&trace, model, hint)?;

    let out = OutDir::create(out_dir)?;
    let names: Vec<&str> = match model {
        ResonanceModel::Lorentzian => vec!["lambda0_nm", "kappa_sum_hz", "kappa_diff_hz"],
        ResonanceModel::SharkFin => vec!["lambda0_nm", "kappa_sum_hz", "beta_nm_per_mw"],
    };
    let extra = json!({
        "kappa0_hz": fit.cavity.kappa0_hz,
        "kappa_e_hz": fit.cavity.kappa_e_hz,
        "q_loaded": fit.cavity.q_loaded(),
        "escape_efficiency": fit.cavity.escape_efficiency(),
        "beta_nm_per_mw": fit.photorefractive.map(|p| p.beta_nm_per_mw),
    });
    out.write(
        "fit_report.json",
        &fit_report_json(&args.model, &names, &fit.fit, extra),
    )?;

    // overlay with the fitted static lineshape
    let mut overlay = String::new();
    overlay.push_str("wavelength_nm,transmission_data,transmission_fit\n");
    let t = trace.ascending();
    for (lam, y) in t.x.iter().zip(t.y.iter()) {
        let delta = sqzforge_core::constants::C_NM_PER_S * (1.0 / lam - 1.0 / fit.cavity.lambda0_nm);
        let fit_y = sqzforge_core::lorentzian_transmission(delta, &fit.cavity);
        overlay.push_str(&format!("{lam},{y},{fit_y}\n"));
    }
    out.write("overlay_lineshape.csv", &overlay)?;
    if !quiet {
        println!(
            "lambda0_nm = {:.4}, q_loaded = {:.3e}, escape = {:.3}",
            fit.cavity.lambda0_nm,
            fit.cavity.q_loaded(),
            fit.cavity.escape_efficiency()
        );
    }
    Ok(())
}
