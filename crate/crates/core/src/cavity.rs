//! Static Lorentzian resonance algebra (Q, coupling regime, escape
//! efficiency) and the dynamic photorefractive scan simulator.
//!
//! Decay-rate convention: `kappa0` and `kappa_e` are full-width (FWHM)
//! contributions in ordinary-frequency Hz, so the loaded linewidth is
//! `kappa0 + kappa_e` and `Q = nu0 / (kappa0 + kappa_e)`.

use crate::constants::C_NM_PER_S;
use crate::fit::{least_squares, FitPoint, FitProblem, FitResult, Jacobian, LorentzianDip};
use crate::interp::Pchip;
use crate::trace::{Trace, XKind};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    Under,
    Critical,
    Over,
}

/// Static ring resonance parameters.
#[derive(Debug, Clone, Copy)]
pub struct CavityParams {
    /// Resonance wavelength in nm.
    pub lambda0_nm: f64,
    /// Intrinsic linewidth contribution in Hz.
    pub kappa0_hz: f64,
    /// External (coupling) linewidth contribution in Hz.
    pub kappa_e_hz: f64,
}

impl CavityParams {
    pub fn new(lambda0_nm: f64, kappa0_hz: f64, kappa_e_hz: f64) -> Result<Self> {
        if !(lambda0_nm > 0.0) {
            return Err(Error::Config("resonance wavelength must be positive".into()));
        }
        if !(kappa0_hz > 0.0) || !(kappa_e_hz > 0.0) {
            return Err(Error::Config("decay rates must be positive".into()));
        }
        Ok(Self { lambda0_nm, kappa0_hz, kappa_e_hz })
    }

    /// Splits a fitted (sum, |diff|) linewidth pair using a coupling-regime
    /// hint; the transmission lineshape alone cannot tell kappa0 from
    /// kappa_e.
    pub fn from_sum_diff(lambda0_nm: f64, sum_hz: f64, diff_hz: f64, hint: Coupling) -> Result<Self> {
        let diff = diff_hz.abs().min(sum_hz * (1.0 - 1e-12));
        let (k0, ke) = match hint {
            Coupling::Over => ((sum_hz - diff) / 2.0, (sum_hz + diff) / 2.0),
            Coupling::Under => ((sum_hz + diff) / 2.0, (sum_hz - diff) / 2.0),
            Coupling::Critical => (sum_hz / 2.0, sum_hz / 2.0),
        };
        Self::new(lambda0_nm, k0, ke)
    }

    pub fn kappa_total_hz(&self) -> f64 {
        self.kappa0_hz + self.kappa_e_hz
    }

    pub fn nu0_hz(&self) -> f64 {
        C_NM_PER_S / self.lambda0_nm
    }

    pub fn q_loaded(&self) -> f64 {
        self.nu0_hz() / self.kappa_total_hz()
    }

    pub fn linewidth_nm(&self) -> f64 {
        self.lambda0_nm / self.q_loaded()
    }

    pub fn regime(&self) -> Coupling {
        let (k0, ke) = (self.kappa0_hz, self.kappa_e_hz);
        if (ke - k0).abs() / (ke + k0) < 1e-3 {
            Coupling::Critical
        } else if ke > k0 {
            Coupling::Over
        } else {
            Coupling::Under
        }
    }

    pub fn escape_efficiency(&self) -> f64 {
        self.kappa_e_hz / self.kappa_total_hz()
    }
}

/// Transmitted power fraction past an all-pass ring at detuning `delta_hz`:
/// `T = (delta^2 + (k0 - ke)^2/4) / (delta^2 + (k0 + ke)^2/4)`.
pub fn lorentzian_transmission(detuning_hz: f64, params: &CavityParams) -> f64 {
    let d2 = detuning_hz * detuning_hz;
    let diff = (params.kappa0_hz - params.kappa_e_hz) / 2.0;
    let sum = params.kappa_total_hz() / 2.0;
    (d2 + diff * diff) / (d2 + sum * sum)
}

/// Normalized intracavity buildup factor, peaking at 1 on resonance.
fn buildup_factor(detuning_hz: f64, params: &CavityParams) -> f64 {
    let half = params.kappa_total_hz() / 2.0;
    half * half / (detuning_hz * detuning_hz + half * half)
}

/// Loaded-Q linewidth: `(FWHM in Hz, FWHM in nm)`.
pub fn q_linewidth(q_loaded: f64, lambda0_nm: f64) -> Result<(f64, f64)> {
    if !(q_loaded > 0.0) {
        return Err(Error::Config("Q must be positive".into()));
    }
    Ok((C_NM_PER_S / lambda0_nm / q_loaded, lambda0_nm / q_loaded))
}

pub fn escape_efficiency(params: &CavityParams) -> f64 {
    params.escape_efficiency()
}

/// Photorefractive single-pole relaxation model.
///
/// The resonance shift obeys `d(shift)/dt = -(shift + beta P_circ)/tau` with
/// `P_circ = P_in * buildup_norm * L(detuning)`, producing a blue
/// (negative) equilibrium shift for positive beta.
#[derive(Debug, Clone, Copy)]
pub struct PhotorefractiveParams {
    /// Equilibrium blue-shift coefficient, nm per mW of circulating-power proxy.
    pub beta_nm_per_mw: f64,
    /// Relaxation time in seconds.
    pub tau_s: f64,
    /// Circulating-power normalization (dimensionless).
    pub buildup_norm: f64,
}

impl PhotorefractiveParams {
    pub fn new(beta_nm_per_mw: f64, tau_s: f64, buildup_norm: f64) -> Result<Self> {
        if !(tau_s > 0.0) {
            return Err(Error::Config("relaxation time must be positive".into()));
        }
        if !(beta_nm_per_mw >= 0.0) || !(buildup_norm > 0.0) {
            return Err(Error::Config(
                "blue-shift coefficient must be non-negative and buildup norm positive".into(),
            ));
        }
        Ok(Self { beta_nm_per_mw, tau_s, buildup_norm })
    }

    pub fn frozen() -> Self {
        Self { beta_nm_per_mw: 0.0, tau_s: 1.0, buildup_norm: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanDirection {
    /// Decreasing wavelength; drags a blue-shifting resonance along the
    /// scan, which is what stretches the lineshape into a shark fin.
    Down,
    Up,
}

#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub scan_speed_nm_per_s: f64,
    pub power_mw: f64,
    /// Scanned wavelength window (lo, hi); must contain the resonance.
    pub window_nm: (f64, f64),
    pub direction: ScanDirection,
}

impl ScanConfig {
    pub fn new(scan_speed_nm_per_s: f64, power_mw: f64, window_nm: (f64, f64)) -> Self {
        Self { scan_speed_nm_per_s, power_mw, window_nm, direction: ScanDirection::Down }
    }
}

#[derive(Debug, Clone)]
pub struct ScanOutput {
    /// Transmitted power fraction versus scanned wavelength (ascending).
    pub transmission: Trace,
    /// Normalized intracavity buildup factor versus wavelength (ascending).
    pub buildup: Trace,
}

const MAX_SCAN_STEPS: usize = 40_000_000;

/// Integrates the photorefractive shift through a laser scan and returns the
/// transmitted-power trace.
///
/// Fixed-step RK4; the step obeys both the sampling rule (at most a
/// twentieth of a linewidth of scan motion per step) and the stiffness bound
/// of the shift/buildup feedback loop.
pub fn simulate_scan(
    cavity: &CavityParams,
    pr: &PhotorefractiveParams,
    scan: &ScanConfig,
) -> Result<ScanOutput> {
    if !(scan.scan_speed_nm_per_s > 0.0) {
        return Err(Error::Config("scan speed must be positive".into()));
    }
    if scan.power_mw < 0.0 {
        return Err(Error::Config("input power must be non-negative".into()));
    }
    let (lo, hi) = scan.window_nm;
    if !(lo < hi) || !(cavity.lambda0_nm > lo && cavity.lambda0_nm < hi) {
        return Err(Error::Config(format!(
            "scan window [{lo}, {hi}] nm must contain the resonance at {} nm",
            cavity.lambda0_nm
        )));
    }

    let v = scan.scan_speed_nm_per_s;
    let w_nm = cavity.linewidth_nm();
    let half_w = w_nm / 2.0;
    // sampling bound: <= linewidth/20 of scan motion per step
    let dt_sample = (w_nm / 20.0) / v;
    // stiffness bound: the buildup-feedback rate is at most
    // beta*norm*P * max|dL/dlambda| / tau = beta*norm*P * 0.6495/(half_w tau)
    let drive = pr.beta_nm_per_mw * pr.buildup_norm * scan.power_mw;
    let rate = drive * 0.6495 / (half_w * pr.tau_s) + 1.0 / pr.tau_s;
    let dt_stiff = 1.4 / rate;
    let dt = dt_sample.min(dt_stiff);
    let duration = (hi - lo) / v;
    let n_steps = (duration / dt).ceil() as usize;
    if n_steps > MAX_SCAN_STEPS {
        return Err(Error::Config(format!(
            "scan window too wide at the required step resolution ({n_steps} steps); \
             narrow the window or raise the scan speed"
        )));
    }

    // emit roughly one sample per linewidth/20 of scan motion
    let emit_every = ((dt_sample / dt).round() as usize).max(1);

    let lambda_at = |t: f64| match scan.direction {
        ScanDirection::Down => hi - v * t,
        ScanDirection::Up => lo + v * t,
    };
    let detuning_hz = |lambda_nm: f64, shift_nm: f64| {
        let res = cavity.lambda0_nm + shift_nm;
        C_NM_PER_S * (1.0 / lambda_nm - 1.0 / res)
    };
    let shift_rate = |t: f64, shift: f64| {
        let delta = detuning_hz(lambda_at(t), shift);
        let p_circ = scan.power_mw * pr.buildup_norm * buildup_factor(delta, cavity);
        -(shift + pr.beta_nm_per_mw * p_circ) / pr.tau_s
    };

    let mut shift = 0.0_f64;
    let mut xs = Vec::new();
    let mut ts = Vec::new();
    let mut bs = Vec::new();
    let push = |t: f64, shift: f64, xs: &mut Vec<f64>, ts: &mut Vec<f64>, bs: &mut Vec<f64>| {
        let lam = lambda_at(t);
        let delta = detuning_hz(lam, shift);
        xs.push(lam);
        ts.push(lorentzian_transmission(delta, cavity));
        bs.push(buildup_factor(delta, cavity));
    };
    push(0.0, shift, &mut xs, &mut ts, &mut bs);
    for k in 0..n_steps {
        let t = k as f64 * dt;
        let k1 = shift_rate(t, shift);
        let k2 = shift_rate(t + dt / 2.0, shift + dt / 2.0 * k1);
        let k3 = shift_rate(t + dt / 2.0, shift + dt / 2.0 * k2);
        let k4 = shift_rate(t + dt, shift + dt * k3);
        shift += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (k + 1) % emit_every == 0 || k + 1 == n_steps {
            push((k + 1) as f64 * dt, shift, &mut xs, &mut ts, &mut bs);
        }
    }

    if scan.direction == ScanDirection::Down {
        xs.reverse();
        ts.reverse();
        bs.reverse();
    }
    let dir = match scan.direction {
        ScanDirection::Down => "down",
        ScanDirection::Up => "up",
    };
    let meta = |t: Trace| {
        t.with_meta("scan_speed_nm_per_s", v)
            .with_meta("power_mw", scan.power_mw)
            .with_meta("scan_direction", dir)
            .with_meta("lambda0_nm", cavity.lambda0_nm)
            .with_meta("kappa0_hz", cavity.kappa0_hz)
            .with_meta("kappa_e_hz", cavity.kappa_e_hz)
            .with_meta("beta_nm_per_mw", pr.beta_nm_per_mw)
            .with_meta("tau_s", pr.tau_s)
            .with_meta("buildup_norm", pr.buildup_norm)
    };
    Ok(ScanOutput {
        transmission: meta(Trace::new(XKind::WavelengthNm, "transmission", xs.clone(), ts)?),
        buildup: meta(Trace::new(XKind::WavelengthNm, "buildup", xs, bs)?),
    })
}

/// Scan-trace dip center: the minimum-transmission sample. Half-depth
/// alternatives are rejected as noise-sensitive.
pub fn dip_center_nm(trace: &Trace) -> f64 {
    let t = trace.ascending();
    let (mut best_i, mut best) = (0, f64::INFINITY);
    for (i, y) in t.y.iter().enumerate() {
        if *y < best {
            best = *y;
            best_i = i;
        }
    }
    t.x[best_i]
}

/// Dip asymmetry on the ascending-wavelength axis:
/// `(right half-width - left half-width) / FWHM` at half depth.
pub fn asymmetry(trace: &Trace) -> Result<f64> {
    let t = trace.ascending();
    let base = t.y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut i_min, mut y_min) = (0, f64::INFINITY);
    for (i, y) in t.y.iter().enumerate() {
        if *y < y_min {
            y_min = *y;
            i_min = i;
        }
    }
    let depth = base - y_min;
    if depth <= 1e-9 * base.abs().max(1.0) {
        return Err(Error::NonConvergence { what: "asymmetry of a flat trace".into(), residual: depth });
    }
    let half = y_min + depth / 2.0;
    // walk outward from the minimum to the half-depth crossings
    let mut left = None;
    for i in (0..i_min).rev() {
        if t.y[i] >= half {
            // linear interpolation between i and i+1
            let f = (half - t.y[i]) / (t.y[i + 1] - t.y[i]);
            left = Some(t.x[i] + f * (t.x[i + 1] - t.x[i]));
            break;
        }
    }
    let mut right = None;
    for i in i_min + 1..t.len() {
        if t.y[i] >= half {
            let f = (half - t.y[i - 1]) / (t.y[i] - t.y[i - 1]);
            right = Some(t.x[i - 1] + f * (t.x[i] - t.x[i - 1]));
            break;
        }
    }
    let (Some(l), Some(r)) = (left, right) else {
        return Err(Error::NonConvergence {
            what: "half-depth crossings not inside the trace window".into(),
            residual: depth,
        });
    };
    let x_min = t.x[i_min];
    Ok(((r - x_min) - (x_min - l)) / (r - l))
}

/// Ordinary least-squares line fit: `(slope, intercept, r_squared)`.
pub fn linear_regression(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Config("regression needs at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::Config("regression abscissae are degenerate".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    Ok((slope, my - slope * mx, r2))
}

/// Calibrates the blue-shift coefficient so that the dip-center versus power
/// regression slope matches `target_slope_nm_per_mw` at the given scan speed.
pub fn calibrate_beta(
    cavity: &CavityParams,
    tau_s: f64,
    buildup_norm: f64,
    scan_speed_nm_per_s: f64,
    powers_mw: &[f64],
    target_slope_nm_per_mw: f64,
) -> Result<f64> {
    if powers_mw.len() < 2 {
        return Err(Error::Config("calibration needs at least two powers".into()));
    }
    if !(target_slope_nm_per_mw < 0.0) {
        return Err(Error::Config("target slope must be negative (blue shift)".into()));
    }
    let slope_for = |beta: f64| -> Result<f64> {
        let pr = PhotorefractiveParams::new(beta, tau_s, buildup_norm)?;
        let centers = measured_dip_centers(cavity, &pr, scan_speed_nm_per_s, powers_mw)?;
        let (slope, _, _) = linear_regression(powers_mw, &centers)?;
        Ok(slope)
    };
    // in the dragging regime the release point moves as -beta*norm per mW,
    // so this start lands essentially on target
    let mut beta = target_slope_nm_per_mw.abs() / buildup_norm;
    let mut slope = slope_for(beta)?;
    for _ in 0..6 {
        let rel = (slope - target_slope_nm_per_mw).abs() / target_slope_nm_per_mw.abs();
        if rel < 1e-3 {
            return Ok(beta);
        }
        // secant step using the ideal-drag derivative d(slope)/d(beta) = -norm
        let beta_next = beta + (slope - target_slope_nm_per_mw) / buildup_norm;
        if !(beta_next > 0.0) {
            return Err(Error::NonConvergence {
                what: "photorefractive slope calibration".into(),
                residual: (slope - target_slope_nm_per_mw).abs(),
            });
        }
        beta = beta_next;
        slope = slope_for(beta)?;
    }
    let rel = (slope - target_slope_nm_per_mw).abs() / target_slope_nm_per_mw.abs();
    if rel < 1e-2 {
        Ok(beta)
    } else {
        Err(Error::NonConvergence {
            what: "photorefractive slope calibration".into(),
            residual: rel,
        })
    }
}

/// Simulates the power ladder and extracts the dip centers.
pub fn measured_dip_centers(
    cavity: &CavityParams,
    pr: &PhotorefractiveParams,
    scan_speed_nm_per_s: f64,
    powers_mw: &[f64],
) -> Result<Vec<f64>> {
    let w = cavity.linewidth_nm();
    powers_mw
        .iter()
        .map(|&p| {
            let drag = pr.beta_nm_per_mw * pr.buildup_norm * p + pr.tau_s * scan_speed_nm_per_s;
            let window = (
                cavity.lambda0_nm - drag - 30.0 * w,
                cavity.lambda0_nm + 20.0 * w,
            );
            let scan = ScanConfig::new(scan_speed_nm_per_s, p, window);
            let out = simulate_scan(cavity, pr, &scan)?;
            Ok(dip_center_nm(&out.transmission))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResonanceModel {
    Lorentzian,
    SharkFin,
}

#[derive(Debug, Clone)]
pub struct ResonanceFit {
    pub cavity: CavityParams,
    pub photorefractive: Option<PhotorefractiveParams>,
    pub fit: FitResult,
}

/// Fits a resonance trace.
///
/// The Lorentzian lineshape is invariant under swapping kappa0 and kappa_e,
/// so the caller provides the coupling regime. The shark-fin model fits
/// `(lambda0, kappa_sum, beta)` on top of known scan conditions taken from
/// the trace metadata (`scan_speed_nm_per_s`, `power_mw`, `tau_s`,
/// `buildup_norm`).
pub fn fit_resonance(trace: &Trace, model: ResonanceModel, hint: Coupling) -> Result<ResonanceFit> {
    let t = trace.ascending();
    if t.x_kind != XKind::WavelengthNm {
        return Err(Error::Config("resonance fits need a wavelength-sampled trace".into()));
    }
    let base = t.y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let y_min = t.y.iter().cloned().fold(f64::INFINITY, f64::min);
    if base - y_min <= 1e-6 * base.abs().max(1.0) {
        return Err(Error::NonConvergence {
            what: "resonance fit on a flat trace (no dip)".into(),
            residual: base - y_min,
        });
    }

    match model {
        ResonanceModel::Lorentzian => fit_lorentzian(&t, hint),
        ResonanceModel::SharkFin => fit_sharkfin(&t, hint),
    }
}

fn initial_lineshape_guess(t: &Trace) -> (f64, f64, f64) {
    let lambda0 = dip_center_nm(t);
    let base = t.y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let y_min = t.y.iter().cloned().fold(f64::INFINITY, f64::min);
    let half = y_min + (base - y_min) / 2.0;
    // crude FWHM from half-depth crossings
    let mut left = t.x[0];
    let mut right = *t.x.last().unwrap();
    let i_min = t.y.iter().position(|y| *y == y_min).unwrap();
    for i in (0..i_min).rev() {
        if t.y[i] >= half {
            left = t.x[i];
            break;
        }
    }
    for i in i_min + 1..t.len() {
        if t.y[i] >= half {
            right = t.x[i];
            break;
        }
    }
    let fwhm_nm = (right - left).max(t.x[1] - t.x[0]);
    let sum_hz = C_NM_PER_S * fwhm_nm / (lambda0 * lambda0);
    let diff_hz = sum_hz * (y_min.max(0.0) / base.max(1e-12)).sqrt();
    (lambda0, sum_hz, diff_hz)
}

fn fit_lorentzian(t: &Trace, hint: Coupling) -> Result<ResonanceFit> {
    let (l0, s0, d0) = initial_lineshape_guess(t);
    let data: Vec<FitPoint> = t.x.iter().zip(t.y.iter()).map(|(x, y)| FitPoint::new(*x, *y)).collect();
    let model = LorentzianDip;
    let eval = |p: &[f64], x: f64, b: i32| crate::fit::FitModel::eval(&model, p, x, b);
    let jac = |p: &[f64], x: f64, b: i32| crate::fit::FitModel::jacobian_row(&model, p, x, b);
    let problem = FitProblem {
        model: &eval,
        jacobian: Jacobian::Analytic(&jac),
        data: &data,
        initial: vec![l0, s0, d0],
        lower: vec![t.x[0], s0 * 1e-3, 0.0],
        upper: vec![*t.x.last().unwrap(), s0 * 1e3, s0 * 1e3],
        scale: None,
        max_iterations: None,
    };
    let fit = least_squares(&problem)?;
    if !fit.converged {
        return Err(Error::NonConvergence {
            what: "lorentzian resonance fit".into(),
            residual: fit.residual_norm,
        });
    }
    let cavity = CavityParams::from_sum_diff(fit.params[0], fit.params[1], fit.params[2], hint)?;
    Ok(ResonanceFit { cavity, photorefractive: None, fit })
}

fn meta_f64(t: &Trace, key: &str) -> Result<f64> {
    t.meta_value(key)
        .and_then(|v| v.parse::<f64>().ok())
        .ok_or_else(|| Error::Config(format!("shark-fin fit needs `{key}` in the trace metadata")))
}

/// Initial guesses `(lambda0, kappa_sum, kappa_diff, beta)` for a down-scan
/// shark fin.
///
/// While the resonance is dragged, the transmission is linear in the buildup
/// factor, `T = 1 - L (1 - T_floor)`, and the buildup ramps linearly with
/// the scanned wavelength. Fitting a line to the fin tail therefore gives
/// the rest wavelength (zero-depth intercept) and the drag strength (slope).
/// `drive = P * buildup_norm`, `coast = tau * speed`.
fn sharkfin_guess(t: &Trace, drive: f64, coast: f64) -> (f64, f64, f64, f64) {
    let base = t.y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut i_min, mut y_min) = (0, f64::INFINITY);
    for (i, y) in t.y.iter().enumerate() {
        if *y < y_min {
            y_min = *y;
            i_min = i;
        }
    }
    let lambda_dip = t.x[i_min];
    let depth = base - y_min;
    let t_floor = y_min.clamp(0.0, 1.0);

    // tail samples on the rest-wavelength side of the dip
    let lo = y_min + 0.15 * depth;
    let hi = y_min + 0.85 * depth;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in i_min + 1..t.len() {
        if t.y[i] > lo && t.y[i] < hi {
            xs.push(t.x[i]);
            ys.push(t.y[i]);
        }
    }
    // keep the guess strictly inside the scan window
    let span = t.x.last().unwrap() - t.x[0];
    let x_hi = t.x.last().unwrap() - 0.02 * span;
    let (lambda0, beta) = match linear_regression(&xs, &ys) {
        Ok((slope, intercept, _)) if slope > 0.0 => {
            // the ramp extrapolates to zero depth at lambda0 + tau*speed
            let lambda0 = (base - intercept) / slope - coast;
            // ramp slope = (1 - T_floor)/(beta * drive)
            let beta = ((1.0 - t_floor) / (slope * drive)).max(1e-9);
            (lambda0.clamp(lambda_dip, x_hi), beta)
        }
        _ => {
            let lambda0 = (0.5 * (lambda_dip + t.x.last().unwrap())).clamp(lambda_dip, x_hi);
            let beta = ((lambda0 - lambda_dip + coast) / drive).max(1e-9);
            (lambda0, beta)
        }
    };

    // linewidth from the sharp release edge below the dip, undoing the
    // scan-compression factor coast/(beta*drive)
    let release_level = y_min + 0.8 * depth;
    let mut edge_nm = t.x.get(1).map(|x| x - t.x[0]).unwrap_or(1e-4);
    for i in (0..i_min).rev() {
        if t.y[i] > release_level {
            edge_nm = (lambda_dip - t.x[i]).max(edge_nm);
            break;
        }
    }
    let stretch = (beta * drive / coast.max(1e-12)).max(1.0);
    let fwhm_nm = (edge_nm * stretch).max(edge_nm);
    let sum_hz = (C_NM_PER_S * fwhm_nm / (lambda_dip * lambda_dip)).clamp(1e6, 1e13);
    let diff_hz = sum_hz * t_floor.min(0.999).sqrt();
    (lambda0, sum_hz, diff_hz, beta)
}

fn fit_sharkfin(t: &Trace, hint: Coupling) -> Result<ResonanceFit> {
    let speed = meta_f64(t, "scan_speed_nm_per_s")?;
    let power = meta_f64(t, "power_mw")?;
    let tau = meta_f64(t, "tau_s")?;
    let norm = meta_f64(t, "buildup_norm")?;
    let direction = match t.meta_value("scan_direction") {
        Some("up") => ScanDirection::Up,
        _ => ScanDirection::Down,
    };
    let window = (t.x[0], *t.x.last().unwrap());
    let (l0_guess, s0, d0, beta0_nm) = sharkfin_guess(t, power * norm, tau * speed);
    let diff_frac = (d0 / s0).clamp(0.0, 0.999);

    // one simulation per parameter vector, interpolated over the data grid
    let cache: std::cell::RefCell<Option<(Vec<f64>, Option<Pchip>)>> =
        std::cell::RefCell::new(None);
    let sim_model = move |p: &[f64], x: f64, _b: i32| -> f64 {
        let mut slot = cache.borrow_mut();
        let stale = match &*slot {
            Some((q, _)) => q.as_slice() != p,
            None => true,
        };
        if stale {
            let interp = (|| {
                let (l0, s, beta) = (p[0], p[1], p[2]);
                let cavity = CavityParams::from_sum_diff(l0, s, diff_frac * s, hint).ok()?;
                let pr = PhotorefractiveParams::new(beta.max(0.0), tau, norm).ok()?;
                let mut scan = ScanConfig::new(speed, power, window);
                scan.direction = direction;
                let out = simulate_scan(&cavity, &pr, &scan).ok()?;
                Pchip::new(&out.transmission.x, &out.transmission.y).ok()
            })();
            *slot = Some((p.to_vec(), interp));
        }
        match &*slot {
            Some((_, Some(interp))) => interp.eval(x),
            _ => f64::NAN,
        }
    };

    let data: Vec<FitPoint> = t.x.iter().zip(t.y.iter()).map(|(x, y)| FitPoint::new(*x, *y)).collect();
    // the linewidth guess is the weakest; a coarse line search over it saves
    // many damped iterations later
    let s0 = {
        let cost_at = |s_try: f64| -> f64 {
            data.iter()
                .map(|d| {
                    let y = sim_model(&[l0_guess, s_try, beta0_nm], d.x, 0);
                    if y.is_finite() {
                        (y - d.y) * (y - d.y)
                    } else {
                        f64::INFINITY
                    }
                })
                .sum()
        };
        let mut best = (s0, cost_at(s0));
        for factor in [0.125, 0.25, 0.5, 2.0, 4.0] {
            let trial = s0 * factor;
            let c = cost_at(trial);
            if c < best.1 {
                best = (trial, c);
            }
        }
        best.0
    };

    // the physical parameters span 12 orders of magnitude, which starves
    // the damped steps in the (lambda0, beta) valley; fit in O(1) units
    // (wavelength offset per linewidth, log linewidth, log drag) instead
    let linewidth_nm = l0_guess * l0_guess * s0 / C_NM_PER_S;
    let scaled_model = |q: &[f64], x: f64, b: i32| -> f64 {
        let p = [
            l0_guess + q[0] * linewidth_nm,
            s0 * q[1].exp(),
            beta0_nm * q[2].exp(),
        ];
        sim_model(&p, x, b)
    };
    let span = window.1 - window.0;
    let problem = FitProblem {
        model: &scaled_model,
        jacobian: Jacobian::FiniteDifference { h_rel: 1e-4 },
        data: &data,
        initial: vec![0.0, 0.0, 0.0],
        lower: vec![
            (window.0 + 1e-6 * span - l0_guess) / linewidth_nm,
            (0.05_f64).ln(),
            -9.0,
        ],
        upper: vec![
            (window.1 - 1e-6 * span - l0_guess) / linewidth_nm,
            (20.0_f64).ln(),
            9.0,
        ],
        scale: Some(vec![1.0, 1.0, 1.0]),
        max_iterations: None,
    };
    let mut fit = least_squares(&problem)?;
    if !fit.converged {
        return Err(Error::NonConvergence {
            what: "shark-fin resonance fit".into(),
            residual: fit.residual_norm,
        });
    }
    // back to physical units, propagating the uncertainties
    let lambda0 = l0_guess + fit.params[0] * linewidth_nm;
    let kappa_sum = s0 * fit.params[1].exp();
    let beta = beta0_nm * fit.params[2].exp();
    let jac_diag = [linewidth_nm, kappa_sum, beta];
    for (i, d) in jac_diag.iter().enumerate() {
        fit.std_errors[i] *= d;
        for j in 0..3 {
            fit.covariance[i][j] *= d;
            fit.covariance[j][i] *= d;
        }
    }
    fit.params = vec![lambda0, kappa_sum, beta];
    let cavity = CavityParams::from_sum_diff(lambda0, kappa_sum, diff_frac * kappa_sum, hint)?;
    let pr = PhotorefractiveParams::new(beta, tau, norm)?;
    Ok(ResonanceFit { cavity, photorefractive: Some(pr), fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pump_cavity() -> CavityParams {
        // loaded Q = 7.1e4 at 775 nm, critically coupled
        let fwhm = C_NM_PER_S / 775.0 / 7.1e4;
        CavityParams::new(775.0, fwhm / 2.0, fwhm / 2.0).unwrap()
    }

    #[test]
    fn lorentzian_limits() {
        let c = pump_cavity();
        assert!(lorentzian_transmission(0.0, &c) < 1e-20);
        assert!(lorentzian_transmission(1e15, &c) > 0.999999);
        // kappa_e = 3 kappa0 gives T(0) = 1/4
        let c = CavityParams::new(775.0, 1e9, 3e9).unwrap();
        assert_relative_eq!(lorentzian_transmission(0.0, &c), 0.25, max_relative = 1e-12);
        // symmetric in detuning and under kappa swap
        let swapped = CavityParams::new(775.0, 3e9, 1e9).unwrap();
        for d in [0.0, 1e8, 7.7e8, 4e9] {
            assert_relative_eq!(
                lorentzian_transmission(d, &c),
                lorentzian_transmission(-d, &c),
                max_relative = 1e-12
            );
            assert_relative_eq!(
                lorentzian_transmission(d, &c),
                lorentzian_transmission(d, &swapped),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn q_linewidth_reference_values() {
        let (hz, nm) = q_linewidth(1.5e5, 1550.0).unwrap();
        assert_relative_eq!(hz, 1.29e9, max_relative = 0.01);
        assert_relative_eq!(nm, 0.010333, max_relative = 1e-3);
        let (hz, _) = q_linewidth(7.1e4, 775.0).unwrap();
        assert_relative_eq!(hz, 5.45e9, max_relative = 0.01);
        // Q -> infinity: linewidth -> 0
        let (hz, nm) = q_linewidth(1e18, 1550.0).unwrap();
        assert!(hz < 1.0 && nm < 1e-12);
    }

    #[test]
    fn escape_efficiency_values() {
        let c = CavityParams::new(1550.0, 1e9, 1e9).unwrap();
        assert_eq!(escape_efficiency(&c), 0.5);
        assert_eq!(c.regime(), Coupling::Critical);
        // kappa_e/kappa0 = 11/9 gives the 0.55 escape efficiency
        let c = CavityParams::new(1550.0, 9e8, 1.1e9).unwrap();
        assert_relative_eq!(escape_efficiency(&c), 0.55, max_relative = 1e-12);
        assert_eq!(c.regime(), Coupling::Over);
        let c = CavityParams::new(1550.0, 1e6, 1e12).unwrap();
        assert!(escape_efficiency(&c) > 0.999);
    }

    #[test]
    fn zero_beta_recovers_lorentzian() {
        let c = pump_cavity();
        let pr = PhotorefractiveParams::frozen();
        let w = c.linewidth_nm();
        let scan = ScanConfig::new(0.5, 2.0, (c.lambda0_nm - 20.0 * w, c.lambda0_nm + 20.0 * w));
        let out = simulate_scan(&c, &pr, &scan).unwrap();
        for (lam, y) in out.transmission.x.iter().zip(out.transmission.y.iter()) {
            let delta = C_NM_PER_S * (1.0 / lam - 1.0 / c.lambda0_nm);
            let expect = lorentzian_transmission(delta, &c);
            assert!((y - expect).abs() <= 1e-6 * expect.max(1e-3), "at {lam}: {y} vs {expect}");
            assert!(*y >= 0.0 && *y <= 1.0);
        }
    }

    #[test]
    fn drag_shifts_dip_blue_linearly_in_power() {
        let c = pump_cavity();
        let pr = PhotorefractiveParams::new(2.0, 1.0, 1.0).unwrap();
        let powers = [1.0, 2.0, 3.0, 5.0];
        let centers = measured_dip_centers(&c, &pr, 0.5, &powers).unwrap();
        let (slope, _, r2) = linear_regression(&powers, &centers).unwrap();
        assert!(slope < 0.0, "slope {slope}");
        assert!(r2 > 0.99, "r2 {r2}");
        // release point moves by -beta*norm per mW
        assert_relative_eq!(slope, -2.0, max_relative = 0.05);
    }

    #[test]
    fn asymmetry_grows_with_power_and_fin_stretches_into_scan() {
        let c = pump_cavity();
        let pr = PhotorefractiveParams::new(0.5, 1.0, 1.0).unwrap();
        let w = c.linewidth_nm();
        let mut prev = 0.0;
        for p in [0.5, 1.0, 2.0, 4.0] {
            let drag = pr.beta_nm_per_mw * p + 0.5;
            let scan = ScanConfig::new(0.5, p, (c.lambda0_nm - drag - 20.0 * w, c.lambda0_nm + 20.0 * w));
            let out = simulate_scan(&c, &pr, &scan).unwrap();
            let a = asymmetry(&out.transmission).unwrap();
            assert!(a > prev, "asymmetry {a} did not grow at {p} mW");
            prev = a;
        }
        // the stretched side is the long tail up to lambda0 on the ascending axis
        assert!(prev > 0.3);
    }

    #[test]
    fn fast_scan_recovers_lorentzian_monotonically() {
        let c = pump_cavity();
        let pr = PhotorefractiveParams::new(0.5, 1.0, 1.0).unwrap();
        let w = c.linewidth_nm();
        let window = (c.lambda0_nm - 0.6, c.lambda0_nm + 10.0 * w);
        let mut prev_dev = f64::INFINITY;
        for v in [0.1, 1.0, 10.0, 100.0] {
            let scan = ScanConfig::new(v, 0.9, window);
            let out = simulate_scan(&c, &pr, &scan).unwrap();
            let dev = out
                .transmission
                .x
                .iter()
                .zip(out.transmission.y.iter())
                .map(|(lam, y)| {
                    let delta = C_NM_PER_S * (1.0 / lam - 1.0 / c.lambda0_nm);
                    (y - lorentzian_transmission(delta, &c)).abs()
                })
                .fold(0.0_f64, f64::max);
            assert!(dev < prev_dev, "deviation not monotone at {v} nm/s: {dev} vs {prev_dev}");
            prev_dev = dev;
        }
        assert!(prev_dev < 0.01, "fastest scan deviation {prev_dev}");
    }

    #[test]
    fn beta_calibration_closure() {
        let c = pump_cavity();
        let target = -3.0;
        let beta = calibrate_beta(&c, 1.0, 1.0, 0.5, &[1.0, 2.0, 3.0], target).unwrap();
        let pr = PhotorefractiveParams::new(beta, 1.0, 1.0).unwrap();
        let centers = measured_dip_centers(&c, &pr, 0.5, &[1.0, 2.0, 3.0]).unwrap();
        let (slope, _, _) = linear_regression(&[1.0, 2.0, 3.0], &centers).unwrap();
        assert!((slope - target).abs() / target.abs() < 0.02, "slope {slope}");
    }

    #[test]
    fn lorentzian_fit_round_trip_with_noise() {
        let truth = CavityParams::new(775.0, 2.0e9, 3.5e9).unwrap();
        let w = truth.linewidth_nm();
        let n = 600;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..n)
            .map(|i| truth.lambda0_nm - 12.0 * w + 24.0 * w * i as f64 / (n - 1) as f64)
            .collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|lam| {
                let delta = C_NM_PER_S * (1.0 / lam - 1.0 / truth.lambda0_nm);
                let noise: f64 = rng.gen_range(-1.0..1.0) * 0.01;
                lorentzian_transmission(delta, &truth) * (1.0 + noise)
            })
            .collect();
        let trace = Trace::new(XKind::WavelengthNm, "transmission", xs, ys).unwrap();
        let fit = fit_resonance(&trace, ResonanceModel::Lorentzian, Coupling::Over).unwrap();
        assert!(fit.fit.converged);
        let sum_err = fit.fit.std_errors[1].max(1e3);
        let sum_fit = fit.cavity.kappa_total_hz();
        assert!(
            (sum_fit - truth.kappa_total_hz()).abs() < 3.0 * sum_err.max(0.01 * truth.kappa_total_hz()),
            "kappa sum {sum_fit} vs {} (sigma {sum_err})",
            truth.kappa_total_hz()
        );
        // regime hint resolves the swap ambiguity
        assert!(fit.cavity.kappa_e_hz > fit.cavity.kappa0_hz);
        assert_relative_eq!(fit.cavity.kappa_e_hz, 3.5e9, max_relative = 0.05);
    }

    #[test]
    fn sharkfin_fit_recovers_beta() {
        let truth = pump_cavity();
        let pr = PhotorefractiveParams::new(1.5, 1.0, 1.0).unwrap();
        let w = truth.linewidth_nm();
        let scan = ScanConfig::new(
            0.5,
            1.0,
            (truth.lambda0_nm - 2.0 - 20.0 * w, truth.lambda0_nm + 15.0 * w),
        );
        let out = simulate_scan(&truth, &pr, &scan).unwrap();
        // decimate to a measurement-sized trace, keep metadata
        let stride = (out.transmission.len() / 250).max(1);
        let xs: Vec<f64> = out.transmission.x.iter().step_by(stride).cloned().collect();
        let ys: Vec<f64> = out.transmission.y.iter().step_by(stride).cloned().collect();
        let mut t = Trace::new(XKind::WavelengthNm, "transmission", xs, ys).unwrap();
        t.meta = out.transmission.meta.clone();
        let fit = fit_resonance(&t, ResonanceModel::SharkFin, Coupling::Critical).unwrap();
        let beta = fit.photorefractive.unwrap().beta_nm_per_mw;
        assert!((beta - 1.5).abs() / 1.5 < 0.10, "beta {beta}");
    }

    #[test]
    fn flat_trace_is_nonconvergence() {
        let xs: Vec<f64> = (0..100).map(|i| 775.0 + i as f64 * 0.001).collect();
        let ys = vec![0.5; xs.len()];
        let t = Trace::new(XKind::WavelengthNm, "transmission", xs, ys).unwrap();
        assert!(matches!(
            fit_resonance(&t, ResonanceModel::Lorentzian, Coupling::Over),
            Err(Error::NonConvergence { .. })
        ));
    }

    #[test]
    fn scan_rejects_bad_windows() {
        let c = pump_cavity();
        let pr = PhotorefractiveParams::frozen();
        let scan = ScanConfig::new(0.5, 1.0, (776.0, 777.0));
        assert!(matches!(simulate_scan(&c, &pr, &scan), Err(Error::Config(_))));
        // absurd resolution demand: linewidth/20 steps over a huge window
        let scan = ScanConfig::new(1e-6, 1.0, (700.0, 900.0));
        assert!(matches!(simulate_scan(&c, &pr, &scan), Err(Error::Config(_))));
    }
}
