//! Fit models: squeezing spectra versus pump power and sideband frequency,
//! and the Lorentzian resonance dip.
//!
//! Branch convention for dual-family data: `-1` squeezing, `+1`
//! anti-squeezing, `0` single-family models.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::constants::C_NM_PER_S;
use crate::fit::engine::{least_squares, FitPoint, FitProblem, FitResult, Jacobian};
use crate::opo::{from_db, infer_eta_x};
use crate::{Error, Result};

pub trait FitModel {
    fn name(&self) -> &'static str;
    fn param_names(&self) -> Vec<&'static str>;
    fn eval(&self, p: &[f64], x: f64, branch: i32) -> f64;
    fn jacobian_row(&self, p: &[f64], x: f64, branch: i32) -> Vec<f64>;
    /// Random interior parameter vector for gradient checks.
    fn sample_params(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;
    /// Random abscissa and branch for gradient checks.
    fn sample_point(&self, rng: &mut ChaCha8Rng) -> (f64, i32);
    /// Relative finite-difference step appropriate for this model's scales.
    fn fd_h_rel(&self) -> f64 {
        1e-6
    }
}

/// All models with analytic Jacobians, for gradient-check sweeps.
pub fn registered_models() -> Vec<Box<dyn FitModel>> {
    vec![
        Box::new(SqueezingVsPower { f_mhz: 5.0, fs_fixed_mhz: Some(310.0) }),
        Box::new(SqueezingVsPower { f_mhz: 40.0, fs_fixed_mhz: None }),
        Box::new(SqueezingVsFrequency),
        Box::new(LorentzianDip),
    ]
}

fn branch_sign(branch: i32) -> Result<f64> {
    match branch {
        -1 => Ok(-1.0),
        1 => Ok(1.0),
        other => Err(Error::Config(format!("squeezing models need branch +-1, got {other}"))),
    }
}

/// `S(eta, x, F)` for one branch plus partials in (eta, x, F).
fn s_branch(eta: f64, x: f64, ff: f64, sign: f64) -> (f64, f64, f64, f64) {
    // sign = +1: D = (1-x)^2 + F, S = 1 + eta 4x/D
    // sign = -1: D = (1+x)^2 + F, S = 1 - eta 4x/D
    let one = 1.0 - sign * x; // (1 -+ x)
    let d = one * one + ff;
    let s = 1.0 + sign * eta * 4.0 * x / d;
    let ds_deta = sign * 4.0 * x / d;
    // dD/dx = -2 sign (1 -+ x)
    let dd_dx = -2.0 * sign * one;
    let ds_dx = sign * eta * (4.0 * d - 4.0 * x * dd_dx) / (d * d);
    let ds_df = -sign * eta * 4.0 * x / (d * d);
    (s, ds_deta, ds_dx, ds_df)
}

/// Squeezing/anti-squeezing versus pump power at fixed sideband frequency.
///
/// Parameters `[eta, p_th_mw]`, plus `f_bar_s_mhz` appended when it is free.
pub struct SqueezingVsPower {
    pub f_mhz: f64,
    /// `Some(fs)` holds the cavity bandwidth fixed; `None` fits it.
    pub fs_fixed_mhz: Option<f64>,
}

impl FitModel for SqueezingVsPower {
    fn name(&self) -> &'static str {
        if self.fs_fixed_mhz.is_some() {
            "squeezing_vs_power"
        } else {
            "squeezing_vs_power_free_fs"
        }
    }

    fn param_names(&self) -> Vec<&'static str> {
        if self.fs_fixed_mhz.is_some() {
            vec!["eta", "p_th_mw"]
        } else {
            vec!["eta", "p_th_mw", "f_bar_s_mhz"]
        }
    }

    fn eval(&self, p: &[f64], pump_mw: f64, branch: i32) -> f64 {
        let sign = branch_sign(branch).expect("branch");
        let (eta, p_th) = (p[0], p[1]);
        let fs = self.fs_fixed_mhz.unwrap_or_else(|| p[2]);
        let ratio = (pump_mw / p_th).clamp(0.0, 1.0 - 1e-12);
        let x = ratio.sqrt();
        let ff = (self.f_mhz / fs).powi(2);
        s_branch(eta, x, ff, sign).0
    }

    fn jacobian_row(&self, p: &[f64], pump_mw: f64, branch: i32) -> Vec<f64> {
        let sign = branch_sign(branch).expect("branch");
        let (eta, p_th) = (p[0], p[1]);
        let fs = self.fs_fixed_mhz.unwrap_or_else(|| p[2]);
        let ratio = (pump_mw / p_th).clamp(0.0, 1.0 - 1e-12);
        let x = ratio.sqrt();
        let ff = (self.f_mhz / fs).powi(2);
        let (_, ds_deta, ds_dx, ds_df) = s_branch(eta, x, ff, sign);
        // x = sqrt(Pp/Pth): dx/dPth = -x/(2 Pth)
        let dx_dpth = -x / (2.0 * p_th);
        let mut row = vec![ds_deta, ds_dx * dx_dpth];
        if self.fs_fixed_mhz.is_none() {
            row.push(ds_df * (-2.0 * ff / fs));
        }
        row
    }

    fn sample_params(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut p = vec![rng.gen_range(0.05..0.95), rng.gen_range(50.0..400.0)];
        if self.fs_fixed_mhz.is_none() {
            p.push(rng.gen_range(100.0..600.0));
        }
        p
    }

    fn sample_point(&self, rng: &mut ChaCha8Rng) -> (f64, i32) {
        (rng.gen_range(0.5..20.0), if rng.gen_bool(0.5) { 1 } else { -1 })
    }
}

/// Squeezing/anti-squeezing versus sideband frequency at fixed pump power.
/// Parameters `[eta, pump_ratio, f_bar_s_mhz]`.
pub struct SqueezingVsFrequency;

impl FitModel for SqueezingVsFrequency {
    fn name(&self) -> &'static str {
        "squeezing_vs_frequency"
    }

    fn param_names(&self) -> Vec<&'static str> {
        vec!["eta", "pump_ratio", "f_bar_s_mhz"]
    }

    fn eval(&self, p: &[f64], f_mhz: f64, branch: i32) -> f64 {
        let sign = branch_sign(branch).expect("branch");
        let (eta, ratio, fs) = (p[0], p[1].max(1e-14), p[2]);
        let x = ratio.sqrt();
        let ff = (f_mhz / fs).powi(2);
        s_branch(eta, x, ff, sign).0
    }

    fn jacobian_row(&self, p: &[f64], f_mhz: f64, branch: i32) -> Vec<f64> {
        let sign = branch_sign(branch).expect("branch");
        let (eta, ratio, fs) = (p[0], p[1].max(1e-14), p[2]);
        let x = ratio.sqrt();
        let ff = (f_mhz / fs).powi(2);
        let (_, ds_deta, ds_dx, ds_df) = s_branch(eta, x, ff, sign);
        vec![ds_deta, ds_dx / (2.0 * x), ds_df * (-2.0 * ff / fs)]
    }

    fn sample_params(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        vec![
            rng.gen_range(0.05..0.95),
            rng.gen_range(0.005..0.5),
            rng.gen_range(100.0..600.0),
        ]
    }

    fn sample_point(&self, rng: &mut ChaCha8Rng) -> (f64, i32) {
        (rng.gen_range(1.0..500.0), if rng.gen_bool(0.5) { 1 } else { -1 })
    }
}

/// Lorentzian transmission dip versus wavelength.
///
/// Parameters `[lambda0_nm, kappa_sum_hz, kappa_diff_hz]`; the transmission is
/// `T = (delta^2 + d^2/4)/(delta^2 + s^2/4)` with
/// `delta = c (1/lambda - 1/lambda0)`. The (kappa0, kappa_e) split is
/// recovered from a coupling-regime hint by the caller.
pub struct LorentzianDip;

impl LorentzianDip {
    fn delta_hz(lambda_nm: f64, lambda0_nm: f64) -> f64 {
        C_NM_PER_S * (1.0 / lambda_nm - 1.0 / lambda0_nm)
    }
}

impl FitModel for LorentzianDip {
    fn name(&self) -> &'static str {
        "lorentzian_dip"
    }

    fn param_names(&self) -> Vec<&'static str> {
        vec!["lambda0_nm", "kappa_sum_hz", "kappa_diff_hz"]
    }

    fn eval(&self, p: &[f64], lambda_nm: f64, _branch: i32) -> f64 {
        let (l0, s, d) = (p[0], p[1], p[2]);
        let delta = Self::delta_hz(lambda_nm, l0);
        (delta * delta + d * d / 4.0) / (delta * delta + s * s / 4.0)
    }

    fn jacobian_row(&self, p: &[f64], lambda_nm: f64, _branch: i32) -> Vec<f64> {
        let (l0, s, d) = (p[0], p[1], p[2]);
        let delta = Self::delta_hz(lambda_nm, l0);
        let num = delta * delta + d * d / 4.0;
        let den = delta * delta + s * s / 4.0;
        let dt_ddelta = delta * (s * s - d * d) / (2.0 * den * den);
        let ddelta_dl0 = C_NM_PER_S / (l0 * l0);
        vec![
            dt_ddelta * ddelta_dl0,
            -num * (s / 2.0) / (den * den),
            (d / 2.0) / den,
        ]
    }

    fn sample_params(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let s = rng.gen_range(1e9..8e9);
        vec![rng.gen_range(774.8..775.2), s, rng.gen_range(0.0..0.9) * s]
    }

    fn sample_point(&self, rng: &mut ChaCha8Rng) -> (f64, i32) {
        (775.0 + rng.gen_range(-0.1..0.1), 0)
    }

    fn fd_h_rel(&self) -> f64 {
        // the resonance wavelength lives on a linewidth scale ~1e-5 of its
        // absolute value, so the step must be much finer than the default
        1e-8
    }
}

/// Named outcome of a squeezing fit.
#[derive(Debug, Clone)]
pub struct SqzFit {
    pub eta: f64,
    /// On-chip threshold (power fits) in mW.
    pub p_th_mw: Option<f64>,
    /// Pump ratio Pp/Pth (frequency fits).
    pub pump_ratio: Option<f64>,
    pub f_bar_s_mhz: f64,
    pub result: FitResult,
}

/// Joint fit of both squeezing branches versus pump power.
///
/// `minus`/`plus` hold `(pump_mw, noise_db)` samples; either side may be
/// empty, which degrades identifiability and is flagged. `fs_fixed_mhz`
/// freezes the cavity bandwidth; `None` frees it.
pub fn fit_squeezing_vs_power(
    minus: &[(f64, f64)],
    plus: &[(f64, f64)],
    f_mhz: f64,
    fs_fixed_mhz: Option<f64>,
    fs_init_mhz: f64,
) -> Result<SqzFit> {
    if minus.is_empty() && plus.is_empty() {
        return Err(Error::Config("no squeezing data provided".into()));
    }
    let mut data = Vec::with_capacity(minus.len() + plus.len());
    let mut flags = Vec::new();
    for (pp, db_val) in minus {
        data.push(FitPoint::with_branch(*pp, from_db(*db_val), -1));
    }
    for (pp, db_val) in plus {
        data.push(FitPoint::with_branch(*pp, from_db(*db_val), 1));
    }
    if minus.is_empty() || plus.is_empty() {
        flags.push("single-branch data: degraded identifiability".to_string());
    }

    let pp_max = data.iter().map(|d| d.x).fold(0.0_f64, f64::max);
    let model = SqueezingVsPower { f_mhz, fs_fixed_mhz };

    // closed-form warm start from the highest-power pair
    let fs0 = fs_fixed_mhz.unwrap_or(fs_init_mhz);
    let (eta0, x0) = warm_start(minus, plus, f_mhz, fs0);
    let p_th0 = (pp_max / (x0 * x0).max(1e-6)).max(pp_max * 1.5);

    let mut initial = vec![eta0, p_th0];
    let mut lower = vec![1e-6, pp_max * (1.0 + 1e-6)];
    let mut upper = vec![1.0, f64::INFINITY];
    if let Some(fs) = fs_fixed_mhz {
        flags.push(format!("f_bar_s held at {fs} MHz"));
    }
    if fs_fixed_mhz.is_none() {
        initial.push(fs0);
        lower.push(1e-3);
        upper.push(f64::INFINITY);
        flags.push("cavity bandwidth fitted from fixed-frequency data: weakly identifiable".to_string());
    }

    let eval = |p: &[f64], x: f64, b: i32| model.eval(p, x, b);
    let jac = |p: &[f64], x: f64, b: i32| model.jacobian_row(p, x, b);
    let problem = FitProblem {
        model: &eval,
        jacobian: Jacobian::Analytic(&jac),
        data: &data,
        initial,
        lower,
        upper,
        scale: None,
        max_iterations: None,
    };
    let mut result = least_squares(&problem)?;
    let excess = [(-1, 1.0), (1, 1.0)]
        .iter()
        .map(|(b, _)| (model.eval(&result.params, pp_max, *b) - 1.0).abs())
        .fold(0.0_f64, f64::max);
    if excess < 1e-6 {
        flags.push("pump ratio ~ 0: efficiency unidentifiable".to_string());
    }
    result.flags.extend(flags);

    Ok(SqzFit {
        eta: result.params[0],
        p_th_mw: Some(result.params[1]),
        pump_ratio: None,
        f_bar_s_mhz: fs_fixed_mhz.unwrap_or_else(|| result.params[2]),
        result,
    })
}

/// Joint fit of both squeezing branches versus sideband frequency.
/// `minus`/`plus` hold `(f_mhz, noise_db)` samples; `fs_fixed_mhz` freezes
/// the cavity bandwidth so only (eta, pump ratio) are fitted.
pub fn fit_squeezing_vs_frequency(
    minus: &[(f64, f64)],
    plus: &[(f64, f64)],
    fs_fixed_mhz: Option<f64>,
) -> Result<SqzFit> {
    if minus.is_empty() && plus.is_empty() {
        return Err(Error::Config("no squeezing data provided".into()));
    }
    let mut data = Vec::with_capacity(minus.len() + plus.len());
    let mut flags = Vec::new();
    for (f, db_val) in minus {
        data.push(FitPoint::with_branch(*f, from_db(*db_val), -1));
    }
    for (f, db_val) in plus {
        data.push(FitPoint::with_branch(*f, from_db(*db_val), 1));
    }
    if minus.is_empty() || plus.is_empty() {
        flags.push("single-branch data: degraded identifiability".to_string());
    }

    // warm start: (eta, x) from the lowest-frequency pair assuming f << fs,
    // then fs from the highest-frequency point
    let f_max = data.iter().map(|d| d.x).fold(0.0_f64, f64::max);
    let (eta0, x0) = warm_start_lowest_f(minus, plus);
    let fs0 = estimate_fs(minus, plus, eta0, x0).unwrap_or(f_max.max(1.0));

    let model = SqueezingVsFrequency;
    let mut result = match fs_fixed_mhz {
        None => {
            let eval = |p: &[f64], x: f64, b: i32| model.eval(p, x, b);
            let jac = |p: &[f64], x: f64, b: i32| model.jacobian_row(p, x, b);
            let problem = FitProblem {
                model: &eval,
                jacobian: Jacobian::Analytic(&jac),
                data: &data,
                initial: vec![eta0, (x0 * x0).clamp(1e-10, 0.9), fs0],
                lower: vec![1e-6, 1e-12, 1e-3],
                upper: vec![1.0, 1.0 - 1e-9, f64::INFINITY],
                scale: None,
                max_iterations: None,
            };
            least_squares(&problem)?
        }
        Some(fs) => {
            // two-parameter variant with the bandwidth held
            let eval = |p: &[f64], x: f64, b: i32| model.eval(&[p[0], p[1], fs], x, b);
            let jac = |p: &[f64], x: f64, b: i32| {
                let row = model.jacobian_row(&[p[0], p[1], fs], x, b);
                vec![row[0], row[1]]
            };
            let problem = FitProblem {
                model: &eval,
                jacobian: Jacobian::Analytic(&jac),
                data: &data,
                initial: vec![eta0, (x0 * x0).clamp(1e-10, 0.9)],
                lower: vec![1e-6, 1e-12],
                upper: vec![1.0, 1.0 - 1e-9],
                scale: None,
                max_iterations: None,
            };
            let mut r = least_squares(&problem)?;
            r.flags.push(format!("f_bar_s held at {fs} MHz"));
            r
        }
    };
    let fs_out = fs_fixed_mhz.unwrap_or_else(|| result.params[2]);
    if fs_fixed_mhz.is_none() && f_max < 0.3 * fs_out {
        flags.push("data span only f << f_bar_s: bandwidth is a lower bound".to_string());
    }
    result.flags.extend(flags);

    Ok(SqzFit {
        eta: result.params[0],
        p_th_mw: None,
        pump_ratio: Some(result.params[1]),
        f_bar_s_mhz: fs_out,
        result,
    })
}

/// (eta0, x0) from the pair at the largest shared abscissa, with a generic
/// fallback when the inversion rejects the noisy pair.
fn warm_start(minus: &[(f64, f64)], plus: &[(f64, f64)], f_mhz: f64, fs_mhz: f64) -> (f64, f64) {
    let best = minus.iter().filter_map(|(pp, mdb)| {
        plus.iter()
            .find(|(pp2, _)| (pp2 - pp).abs() < 1e-9)
            .map(|(_, pdb)| (*pp, *mdb, *pdb))
    });
    if let Some((_, mdb, pdb)) = best.max_by(|a, b| a.0.partial_cmp(&b.0).unwrap()) {
        if let Ok(r) = infer_eta_x(from_db(mdb), from_db(pdb), f_mhz, fs_mhz) {
            if let Some(eta) = r.eta {
                return (eta.clamp(0.01, 1.0), r.x.clamp(1e-3, 0.99));
            }
        }
    }
    (0.2, 0.1)
}

fn warm_start_lowest_f(minus: &[(f64, f64)], plus: &[(f64, f64)]) -> (f64, f64) {
    let best = minus.iter().filter_map(|(f, mdb)| {
        plus.iter()
            .find(|(f2, _)| (f2 - f).abs() < 1e-9)
            .map(|(_, pdb)| (*f, *mdb, *pdb))
    });
    if let Some((_, mdb, pdb)) = best.min_by(|a, b| a.0.partial_cmp(&b.0).unwrap()) {
        // treat f/fs as negligible for the warm start
        if let Ok(r) = infer_eta_x(from_db(mdb), from_db(pdb), 0.0, 1.0) {
            if let Some(eta) = r.eta {
                return (eta.clamp(0.01, 1.0), r.x.clamp(1e-3, 0.99));
            }
        }
    }
    (0.2, 0.1)
}

/// Bandwidth estimate from the highest-frequency anti-squeezing point:
/// solve `S+ - 1 = eta 4x / ((1-x)^2 + (f/fs)^2)` for fs.
fn estimate_fs(minus: &[(f64, f64)], plus: &[(f64, f64)], eta: f64, x: f64) -> Option<f64> {
    let (f, db_val) = plus
        .iter()
        .chain(minus.iter())
        .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())?;
    let s = from_db(*db_val);
    let excess = if s >= 1.0 { s - 1.0 } else { 1.0 - s };
    if excess <= 0.0 {
        return None;
    }
    let ff = eta * 4.0 * x / excess - (1.0 - x) * (1.0 - x);
    if ff > 0.0 {
        Some(f / ff.sqrt())
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::engine::numeric_jacobian;
    use crate::opo::{db, noise_power, SqueezerParams};
    use rand::SeedableRng;

    #[test]
    fn analytic_jacobians_match_finite_differences() {
        // gradient check across every registered model at randomized
        // interior points
        let mut rng = ChaCha8Rng::seed_from_u64(20260808);
        for model in registered_models() {
            for _ in 0..20 {
                let p = model.sample_params(&mut rng);
                let (x, branch) = model.sample_point(&mut rng);
                let data = [FitPoint::with_branch(x, 0.0, branch)];
                let eval = |q: &[f64], xx: f64, bb: i32| model.eval(q, xx, bb);
                let num = numeric_jacobian(&eval, &p, &data, model.fd_h_rel()).unwrap();
                let ana = model.jacobian_row(&p, x, branch);
                let row_max = ana.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
                for (k, (a, n)) in ana.iter().zip(num[0].iter()).enumerate() {
                    if a.abs().max(n.abs()) < 1e-9 * row_max {
                        continue; // negligible entry, FD noise dominates
                    }
                    let scale = a.abs().max(n.abs());
                    assert!(
                        (a - n).abs() / scale < 1e-6,
                        "{} param {k}: analytic {a} vs numeric {n}",
                        model.name()
                    );
                }
            }
        }
    }

    #[test]
    fn noiseless_frequency_fit_recovers_exactly() {
        let p = SqueezerParams::new(0.23, 1.0, 310.0, 0.02).unwrap();
        let freqs = [2.0, 5.0, 20.0, 60.0, 150.0, 325.0, 500.0];
        let mut minus = Vec::new();
        let mut plus = Vec::new();
        for f in freqs {
            let np = noise_power(&p, f).unwrap();
            minus.push((f, db(np.s_minus)));
            plus.push((f, db(np.s_plus)));
        }
        let fit = fit_squeezing_vs_frequency(&minus, &plus, None).unwrap();
        assert!(fit.result.converged);
        assert!((fit.eta - 0.23).abs() < 1e-8, "eta {}", fit.eta);
        assert!((fit.pump_ratio.unwrap() - 0.02).abs() < 1e-8);
        assert!((fit.f_bar_s_mhz - 310.0).abs() < 1e-5);
    }

    #[test]
    fn seeded_noise_frequency_round_trip() {
        use crate::opo::synth_squeezing_vs_frequency;
        let p = SqueezerParams::new(0.23, 1.0, 310.0, 0.02).unwrap();
        let freqs: Vec<f64> = (0..25).map(|i| 5.0 + i as f64 * 20.0).collect();
        let (tm, tp) = synth_squeezing_vs_frequency(&p, &freqs, 0.002, 42).unwrap();
        let minus: Vec<(f64, f64)> =
            tm.x.iter().zip(tm.y.iter()).map(|(x, y)| (x / 1e6, *y)).collect();
        let plus: Vec<(f64, f64)> =
            tp.x.iter().zip(tp.y.iter()).map(|(x, y)| (x / 1e6, *y)).collect();
        let fit = fit_squeezing_vs_frequency(&minus, &plus, None).unwrap();
        assert!(fit.result.converged);
        assert!((fit.eta - 0.23).abs() < 0.03, "eta {}", fit.eta);
        assert!((fit.pump_ratio.unwrap() - 0.02).abs() < 0.01);
        assert!((fit.f_bar_s_mhz - 310.0).abs() < 40.0, "fs {}", fit.f_bar_s_mhz);
    }

    #[test]
    fn seeded_noise_power_round_trip() {
        use crate::opo::synth_squeezing_vs_power;
        let powers: Vec<f64> = (1..=21).map(|i| i as f64 * 2.0).collect();
        let (tm, tp) = synth_squeezing_vs_power(0.20, 200.0, 310.0, 5.0, &powers, 0.002, 7).unwrap();
        let minus: Vec<(f64, f64)> = tm.x.iter().zip(tm.y.iter()).map(|(x, y)| (*x, *y)).collect();
        let plus: Vec<(f64, f64)> = tp.x.iter().zip(tp.y.iter()).map(|(x, y)| (*x, *y)).collect();
        let fit = fit_squeezing_vs_power(&minus, &plus, 5.0, Some(310.0), 310.0).unwrap();
        assert!(fit.result.converged);
        assert!((fit.eta - 0.20).abs() < 0.02, "eta {}", fit.eta);
        let pth = fit.p_th_mw.unwrap();
        assert!((pth - 200.0).abs() / 200.0 < 0.20, "p_th {pth}");
        // LM accepted costs never increase
        for w in fit.result.cost_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }

    #[test]
    fn two_anchor_power_fit_stays_in_reference_band() {
        // anchors at the two measured powers plus model-generated fill
        let mut minus = vec![(4.0, -0.34), (6.9, -0.46)];
        let mut plus = vec![(4.0, 0.55), (6.9, 0.75)];
        for pp in [1.0, 2.0, 3.0, 5.5] {
            let p = SqueezerParams::new(0.2, 200.0, 310.0, pp).unwrap();
            let np = noise_power(&p, 5.0).unwrap();
            minus.push((pp, db(np.s_minus)));
            plus.push((pp, db(np.s_plus)));
        }
        let fit = fit_squeezing_vs_power(&minus, &plus, 5.0, Some(310.0), 310.0).unwrap();
        assert!(fit.result.converged);
        assert!((0.18..=0.26).contains(&fit.eta), "eta {}", fit.eta);
        let pth = fit.p_th_mw.unwrap();
        assert!((120.0..=300.0).contains(&pth), "p_th {pth}");
    }

    #[test]
    fn single_branch_and_degenerate_data_flagged() {
        let p = SqueezerParams::new(0.2, 200.0, 310.0, 6.0).unwrap();
        let np = noise_power(&p, 5.0).unwrap();
        let minus: Vec<(f64, f64)> = (1..=8).map(|i| (i as f64, db(np.s_minus))).collect();
        let fit = fit_squeezing_vs_power(&minus, &[], 5.0, Some(310.0), 310.0).unwrap();
        assert!(fit.result.flags.iter().any(|f| f.contains("single-branch")));

        // all-zero-dB data: pump ratio collapses, efficiency unidentifiable
        let zeros: Vec<(f64, f64)> = (1..=8).map(|i| (i as f64, 0.0)).collect();
        let fit = fit_squeezing_vs_power(&zeros, &zeros, 5.0, Some(310.0), 310.0).unwrap();
        let ratio = 8.0 / fit.p_th_mw.unwrap();
        assert!(
            ratio < 1e-6 || fit.result.flags.iter().any(|f| f.contains("unidentifiable")),
            "ratio {ratio}, flags {:?}",
            fit.result.flags
        );
    }

    #[test]
    fn frequency_fit_lower_bound_flag() {
        // data confined to f << fs cannot pin the bandwidth
        let p = SqueezerParams::new(0.3, 1.0, 400.0, 0.05).unwrap();
        let freqs = [1.0, 2.0, 3.0, 5.0, 8.0];
        let mut minus = Vec::new();
        let mut plus = Vec::new();
        for f in freqs {
            let np = noise_power(&p, f).unwrap();
            minus.push((f, db(np.s_minus)));
            plus.push((f, db(np.s_plus)));
        }
        let fit = fit_squeezing_vs_frequency(&minus, &plus, None).unwrap();
        assert!(
            fit.result.flags.iter().any(|f| f.contains("lower bound")),
            "flags {:?}",
            fit.result.flags
        );
    }
}
