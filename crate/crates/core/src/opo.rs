//! Below-threshold OPO observables: parametric gain, threshold inversion,
//! squeezing spectra, efficiency budget, loss propagation, and homodyne
//! trace synthesis.
//!
//! Noise powers are linear and relative to shot noise (1.0 = shot noise);
//! dB views are `10 log10` throughout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::trace::{Trace, XKind};
use crate::{Error, Result};

/// dB view of a linear shot-noise-relative power, floored so ideal-limit
/// outputs saturate instead of producing `-inf`.
pub fn db(linear: f64) -> f64 {
    10.0 * linear.max(1e-30).log10()
}

pub fn from_db(db_value: f64) -> f64 {
    10f64.powf(db_value / 10.0)
}

/// Multiplicative efficiency chain of the detection path.
#[derive(Debug, Clone)]
pub struct EfficiencyBudget {
    /// Detector quantum efficiency.
    pub eta_qe: f64,
    /// Homodyne visibility squared.
    pub vis_squared: f64,
    /// Optical path efficiency.
    pub eta_opt: f64,
    /// Cavity escape efficiency.
    pub eta_esc: f64,
    /// Optional named sub-factors of `eta_opt`; when present their product
    /// must reproduce `eta_opt`.
    pub opt_breakdown: Vec<(String, f64)>,
}

impl EfficiencyBudget {
    pub fn new(eta_qe: f64, vis_squared: f64, eta_opt: f64, eta_esc: f64) -> Result<Self> {
        let b = Self { eta_qe, vis_squared, eta_opt, eta_esc, opt_breakdown: Vec::new() };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eta_qe", self.eta_qe),
            ("vis_squared", self.vis_squared),
            ("eta_opt", self.eta_opt),
            ("eta_esc", self.eta_esc),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("efficiency component {name} = {v} outside (0, 1]")));
            }
        }
        if !self.opt_breakdown.is_empty() {
            let mut prod = 1.0;
            for (name, v) in &self.opt_breakdown {
                if !(*v > 0.0 && *v <= 1.0) {
                    return Err(Error::Config(format!(
                        "optical sub-factor {name} = {v} outside (0, 1]"
                    )));
                }
                prod *= v;
            }
            if (prod - self.eta_opt).abs() > 1e-6 {
                return Err(Error::Config(format!(
                    "optical sub-factors multiply to {prod}, inconsistent with eta_opt = {}",
                    self.eta_opt
                )));
            }
        }
        Ok(())
    }
}

/// Total efficiency: product of the four budget components.
pub fn budget_total(budget: &EfficiencyBudget) -> Result<f64> {
    budget.validate()?;
    Ok(budget.eta_qe * budget.vis_squared * budget.eta_opt * budget.eta_esc)
}

/// Below-threshold squeezer operating point.
#[derive(Debug, Clone, Copy)]
pub struct SqueezerParams {
    /// Total detection efficiency.
    pub eta: f64,
    /// On-chip oscillation threshold in mW.
    pub p_th_mw: f64,
    /// Signal-cavity half width at half maximum in MHz.
    pub f_bar_s_mhz: f64,
    /// On-chip pump power in mW.
    pub pump_mw: f64,
}

impl SqueezerParams {
    pub fn new(eta: f64, p_th_mw: f64, f_bar_s_mhz: f64, pump_mw: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::Config(format!("eta = {eta} outside (0, 1]")));
        }
        if !(p_th_mw > 0.0) || !(f_bar_s_mhz > 0.0) || !(pump_mw >= 0.0) {
            return Err(Error::Config(
                "threshold and cavity bandwidth must be positive, pump power non-negative".into(),
            ));
        }
        Ok(Self { eta, p_th_mw, f_bar_s_mhz, pump_mw })
    }

    pub fn pump_ratio(&self) -> f64 {
        self.pump_mw / self.p_th_mw
    }
}

/// Squeezing / anti-squeezing noise powers, linear relative to shot noise.
#[derive(Debug, Clone, Copy)]
pub struct NoisePower {
    pub s_minus: f64,
    pub s_plus: f64,
}

impl NoisePower {
    pub fn s_minus_db(&self) -> f64 {
        db(self.s_minus)
    }

    pub fn s_plus_db(&self) -> f64 {
        db(self.s_plus)
    }
}

/// Core spectrum formula in terms of x = sqrt(Pp/Pth) and ff = (f/f_bar_s)^2:
/// `S+- = 1 +- eta * 4x / ((1 -+ x)^2 + ff)`.
pub(crate) fn s_pm(eta: f64, x: f64, ff: f64) -> NoisePower {
    let n = 4.0 * x;
    NoisePower {
        s_minus: 1.0 - eta * n / ((1.0 + x).powi(2) + ff),
        s_plus: 1.0 + eta * n / ((1.0 - x).powi(2) + ff),
    }
}

/// Squeezing and anti-squeezing noise power at sideband frequency `f_mhz`.
pub fn noise_power(params: &SqueezerParams, f_mhz: f64) -> Result<NoisePower> {
    if params.pump_mw >= params.p_th_mw {
        return Err(Error::Domain(format!(
            "pump power {} mW at/above threshold {} mW",
            params.pump_mw, params.p_th_mw
        )));
    }
    let x = params.pump_ratio().sqrt();
    let ff = (f_mhz / params.f_bar_s_mhz).powi(2);
    Ok(s_pm(params.eta, x, ff))
}

/// On-resonance amplification/deamplification envelopes
/// `G+ = (1-x)^-2`, `G- = (1+x)^-2` with `x = sqrt(Pp/Pth)`.
pub fn gain_envelopes(pump_mw: f64, p_th_mw: f64) -> Result<(f64, f64)> {
    if !(p_th_mw > 0.0) || pump_mw < 0.0 {
        return Err(Error::Config("powers must be non-negative with positive threshold".into()));
    }
    if pump_mw >= p_th_mw {
        return Err(Error::Domain(format!(
            "pump power {pump_mw} mW at/above threshold {p_th_mw} mW"
        )));
    }
    let x = (pump_mw / p_th_mw).sqrt();
    Ok(((1.0 - x).powi(-2), (1.0 + x).powi(-2)))
}

/// Phase-dependent parametric gain, decomposed over the amplified and
/// deamplified quadratures: `G(theta) = G+ cos^2(theta) + G- sin^2(theta)`.
pub fn parametric_gain(pump_mw: f64, p_th_mw: f64, theta_rad: f64) -> Result<f64> {
    let (gp, gm) = gain_envelopes(pump_mw, p_th_mw)?;
    let c = theta_rad.cos();
    let s = theta_rad.sin();
    Ok(gp * c * c + gm * s * s)
}

#[derive(Debug, Clone, Copy)]
pub struct ThresholdEstimate {
    /// From the amplification branch.
    pub p_th_mw: f64,
    /// From the deamplification branch, when provided.
    pub p_th_from_gminus_mw: Option<f64>,
    /// Relative spread between the two estimates.
    pub consistency: Option<f64>,
}

/// Inverts the gain envelopes for the oscillation threshold.
pub fn threshold_from_gain(g_plus: f64, g_minus: Option<f64>, pump_mw: f64) -> Result<ThresholdEstimate> {
    if !(g_plus > 1.0) {
        return Err(Error::Domain(format!("amplification factor {g_plus} must exceed 1")));
    }
    if !(pump_mw > 0.0) {
        return Err(Error::Config("pump power must be positive".into()));
    }
    let x = 1.0 - 1.0 / g_plus.sqrt();
    let p_th = pump_mw / (x * x);
    let mut from_minus = None;
    let mut consistency = None;
    if let Some(gm) = g_minus {
        if !(gm > 0.0 && gm < 1.0) {
            return Err(Error::Domain(format!("deamplification factor {gm} must lie in (0, 1)")));
        }
        let xm = 1.0 / gm.sqrt() - 1.0;
        let p_m = pump_mw / (xm * xm);
        consistency = Some((p_m - p_th).abs() / p_th);
        from_minus = Some(p_m);
    }
    Ok(ThresholdEstimate { p_th_mw: p_th, p_th_from_gminus_mw: from_minus, consistency })
}

/// Beam-splitter loss model: `S_out = eta S_in + (1 - eta)`.
pub fn propagate_loss(s_in: f64, eta: f64) -> f64 {
    eta * s_in + (1.0 - eta)
}

/// Inverts the loss model to infer the on-chip noise power from a measured
/// one: `S_onchip = (S_meas - (1 - eta)) / eta`.
pub fn infer_onchip(s_meas: f64, eta_external: f64) -> Result<f64> {
    if !(eta_external > 0.0 && eta_external <= 1.0) {
        return Err(Error::Config(format!("efficiency {eta_external} outside (0, 1]")));
    }
    if s_meas <= 1.0 - eta_external {
        return Err(Error::Domain(format!(
            "unphysical measurement for stated efficiency: S = {s_meas} <= 1 - eta = {}",
            1.0 - eta_external
        )));
    }
    Ok((s_meas - (1.0 - eta_external)) / eta_external)
}

#[derive(Debug, Clone, Copy)]
pub struct EtaX {
    /// Total efficiency; `None` when the pair is degenerate (no pump).
    pub eta: Option<f64>,
    pub x: f64,
}

/// Solves the noise-power pair for (eta, x).
///
/// With `rho = (S+ - 1)/(1 - S-)` and `F = (f/f_bar_s)^2`, the ratio gives
/// `x^2 - 2x (rho+1)/(rho-1) + 1 + F = 0`, closed form for any `F`.
pub fn infer_eta_x(s_minus: f64, s_plus: f64, f_mhz: f64, f_bar_s_mhz: f64) -> Result<EtaX> {
    if !(f_bar_s_mhz > 0.0) {
        return Err(Error::Config("cavity bandwidth must be positive".into()));
    }
    let ff = (f_mhz / f_bar_s_mhz).powi(2);
    if s_minus == 1.0 && s_plus == 1.0 {
        return Ok(EtaX { eta: None, x: 0.0 });
    }
    if !(s_plus > 1.0 && s_minus < 1.0 && s_minus > 0.0) {
        return Err(Error::Domain(format!(
            "inconsistent noise pair: need S+ > 1 > S- > 0, got S- = {s_minus}, S+ = {s_plus}"
        )));
    }
    let rho = (s_plus - 1.0) / (1.0 - s_minus);
    if rho <= 1.0 {
        return Err(Error::Domain(format!(
            "inconsistent noise pair: anti-squeezing must exceed squeezing in magnitude (ratio {rho})"
        )));
    }
    let b = (rho + 1.0) / (rho - 1.0);
    let disc = b * b - 1.0 - ff;
    if disc < 0.0 {
        return Err(Error::Domain(
            "inconsistent noise pair: no real pump ratio solves the spectrum formula".into(),
        ));
    }
    let x = b - disc.sqrt();
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!("inferred pump ratio x = {x} outside (0, 1)")));
    }
    let eta = (1.0 - s_minus) * ((1.0 + x).powi(2) + ff) / (4.0 * x);
    if !(eta > 0.0 && eta <= 1.0 + 1e-9) {
        return Err(Error::Domain(format!("inferred efficiency {eta} outside (0, 1]")));
    }
    Ok(EtaX { eta: Some(eta.min(1.0)), x })
}

/// Squeezing floor at threshold: the x -> 1 limit of the spectrum formula at
/// f = 0 is `S- -> 1 - eta`.
pub fn project_threshold_limit(eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Config(format!("eta = {eta} outside (0, 1]")));
    }
    Ok(1.0 - eta)
}

/// Spectrum-analyzer settings for the homodyne trace synthesizer.
#[derive(Debug, Clone, Copy)]
pub struct HomodyneSettings {
    /// Local-oscillator phase scan rate in Hz.
    pub lo_scan_rate_hz: f64,
    pub duration_s: f64,
    pub rbw_hz: f64,
    pub vbw_hz: f64,
    /// Raw sample rate before video filtering.
    pub sample_rate_hz: f64,
    pub seed: u64,
}

impl Default for HomodyneSettings {
    fn default() -> Self {
        Self {
            lo_scan_rate_hz: 0.5,
            duration_s: 2.0,
            rbw_hz: 1e6,
            vbw_hz: 100.0,
            sample_rate_hz: 2000.0,
            seed: 1,
        }
    }
}

/// Synthesizes a zero-span homodyne trace (dB relative to shot noise versus
/// time) with a scanned LO phase.
///
/// The ideal noise power is `N(t) = S+ cos^2(theta) + S- sin^2(theta)` with
/// `theta = 2 pi rate t`. Estimator noise is multiplicative white gaussian
/// noise scaled so that after the single-pole video filter the relative
/// standard deviation is `1/sqrt(rbw/vbw)`; deterministic for a fixed seed.
pub fn homodyne_trace(params: &SqueezerParams, f_mhz: f64, settings: &HomodyneSettings) -> Result<Trace> {
    if settings.vbw_hz >= settings.rbw_hz {
        return Err(Error::Config(format!(
            "video bandwidth {} Hz must be below resolution bandwidth {} Hz",
            settings.vbw_hz, settings.rbw_hz
        )));
    }
    if settings.duration_s * settings.lo_scan_rate_hz < 1.0 {
        return Err(Error::Config(
            "duration too short: need at least one full LO fringe (duration * scan rate >= 1)".into(),
        ));
    }
    if !(settings.sample_rate_hz > 4.0 * settings.vbw_hz) {
        return Err(Error::Config("sample rate must exceed 4x the video bandwidth".into()));
    }
    let np = noise_power(params, f_mhz)?;

    let n = (settings.duration_s * settings.sample_rate_hz).round() as usize;
    let dt = 1.0 / settings.sample_rate_hz;
    let sigma_target = (settings.vbw_hz / settings.rbw_hz).sqrt();
    // discrete AR(1) video filter: y += alpha (x - y); white input with
    // per-sample std sigma_in gives output std sigma_in * sqrt(alpha/(2-alpha))
    let alpha = 1.0 - (-2.0 * std::f64::consts::PI * settings.vbw_hz * dt).exp();
    let sigma_in = sigma_target * ((2.0 - alpha) / alpha).sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut filt = 1.0; // start at the shot-noise level
    for k in 0..n {
        let t = k as f64 * dt;
        let theta = 2.0 * std::f64::consts::PI * settings.lo_scan_rate_hz * t;
        let ideal = np.s_plus * theta.cos().powi(2) + np.s_minus * theta.sin().powi(2);
        let g: f64 = gaussian(&mut rng);
        let raw = ideal * (1.0 + sigma_in * g);
        filt += alpha * (raw - filt);
        x.push(t);
        y.push(db(filt.max(1e-12)));
    }
    Ok(Trace::new(XKind::TimeS, "noise_db_rel_shot", x, y)?
        .with_meta("f_mhz", f_mhz)
        .with_meta("lo_scan_rate_hz", settings.lo_scan_rate_hz)
        .with_meta("rbw_hz", settings.rbw_hz)
        .with_meta("vbw_hz", settings.vbw_hz)
        .with_meta("seed", settings.seed))
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    loop {
        let u1: f64 = rng.gen::<f64>();
        let u2: f64 = rng.gen::<f64>();
        if u1 > f64::MIN_POSITIVE {
            return (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        }
    }
}

/// Parametric-gain trace across a scanned pump resonance.
///
/// `G(lambda) = G+(x_loc) cos^2(phi) + G-(x_loc) sin^2(phi)` with the local
/// pump ratio `x_loc = sqrt(Pp buildup(lambda) / Pth)` and the seed/pump
/// phase slip `phi = 2 pi ripple_rate (lambda - lambda_start)`.
pub fn gain_trace(
    buildup: &Trace,
    pump_mw: f64,
    p_th_mw: f64,
    ripple_rate_per_nm: f64,
    window_nm: (f64, f64),
) -> Result<Trace> {
    if buildup.x_kind != XKind::WavelengthNm {
        return Err(Error::Config("buildup trace must be sampled in wavelength".into()));
    }
    let b = buildup.ascending();
    if window_nm.0 < b.x[0] - 1e-12 || window_nm.1 > b.x[b.len() - 1] + 1e-12 {
        return Err(Error::Config(format!(
            "buildup trace [{}, {}] nm does not cover the requested window [{}, {}] nm",
            b.x[0],
            b.x[b.len() - 1],
            window_nm.0,
            window_nm.1
        )));
    }
    let lambda_start = window_nm.0;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (lam, bu) in b.x.iter().zip(b.y.iter()) {
        if *lam < window_nm.0 || *lam > window_nm.1 {
            continue;
        }
        let x_loc_sq = pump_mw * bu.max(0.0) / p_th_mw;
        if x_loc_sq >= 1.0 {
            return Err(Error::Domain(format!(
                "above threshold in scan: local pump ratio {:.3} at {lam} nm",
                x_loc_sq
            )));
        }
        let x_loc = x_loc_sq.sqrt();
        let gp = (1.0 - x_loc).powi(-2);
        let gm = (1.0 + x_loc).powi(-2);
        let phi = 2.0 * std::f64::consts::PI * ripple_rate_per_nm * (lam - lambda_start);
        x.push(*lam);
        y.push(gp * phi.cos().powi(2) + gm * phi.sin().powi(2));
    }
    Ok(Trace::new(XKind::WavelengthNm, "parametric_gain", x, y)?
        .with_meta("pump_mw", pump_mw)
        .with_meta("p_th_mw", p_th_mw)
        .with_meta("ripple_rate_per_nm", ripple_rate_per_nm))
}

/// Synthetic squeezing-vs-frequency dataset with seeded multiplicative noise
/// on the linear noise powers. Returns (squeezing, anti-squeezing) traces in
/// dB relative to shot noise.
pub fn synth_squeezing_vs_frequency(
    params: &SqueezerParams,
    freqs_mhz: &[f64],
    noise_rel_std: f64,
    seed: u64,
) -> Result<(Trace, Trace)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ym = Vec::with_capacity(freqs_mhz.len());
    let mut yp = Vec::with_capacity(freqs_mhz.len());
    for &f in freqs_mhz {
        let np = noise_power(params, f)?;
        let gm: f64 = gaussian(&mut rng);
        let gp: f64 = gaussian(&mut rng);
        ym.push(db(np.s_minus * (1.0 + noise_rel_std * gm)));
        yp.push(db(np.s_plus * (1.0 + noise_rel_std * gp)));
    }
    let label = "noise_db_rel_shot";
    let meta = |t: Trace, branch: &str| {
        t.with_meta("synthetic", "generated from fitted model parameters, not measured data")
            .with_meta("branch", branch)
            .with_meta("eta", params.eta)
            .with_meta("pump_ratio", params.pump_ratio())
            .with_meta("f_bar_s_mhz", params.f_bar_s_mhz)
            .with_meta("noise_rel_std", noise_rel_std)
            .with_meta("seed", seed)
    };
    Ok((
        meta(Trace::new(XKind::FrequencyHz, label, freqs_mhz.iter().map(|f| f * 1e6).collect(), ym)?, "minus"),
        meta(Trace::new(XKind::FrequencyHz, label, freqs_mhz.iter().map(|f| f * 1e6).collect(), yp)?, "plus"),
    ))
}

/// Synthetic squeezing-vs-power dataset at fixed sideband frequency.
pub fn synth_squeezing_vs_power(
    eta: f64,
    p_th_mw: f64,
    f_bar_s_mhz: f64,
    f_mhz: f64,
    powers_mw: &[f64],
    noise_rel_std: f64,
    seed: u64,
) -> Result<(Trace, Trace)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ym = Vec::with_capacity(powers_mw.len());
    let mut yp = Vec::with_capacity(powers_mw.len());
    for &p in powers_mw {
        let params = SqueezerParams::new(eta, p_th_mw, f_bar_s_mhz, p)?;
        let np = noise_power(&params, f_mhz)?;
        let gm: f64 = gaussian(&mut rng);
        let gp: f64 = gaussian(&mut rng);
        ym.push(db(np.s_minus * (1.0 + noise_rel_std * gm)));
        yp.push(db(np.s_plus * (1.0 + noise_rel_std * gp)));
    }
    let label = "noise_db_rel_shot";
    let meta = |t: Trace, branch: &str| {
        t.with_meta("synthetic", "generated from fitted model parameters, not measured data")
            .with_meta("branch", branch)
            .with_meta("eta", eta)
            .with_meta("p_th_mw", p_th_mw)
            .with_meta("f_bar_s_mhz", f_bar_s_mhz)
            .with_meta("f_mhz", f_mhz)
            .with_meta("noise_rel_std", noise_rel_std)
            .with_meta("seed", seed)
    };
    Ok((
        meta(Trace::new(XKind::PowerMw, label, powers_mw.to_vec(), ym)?, "minus"),
        meta(Trace::new(XKind::PowerMw, label, powers_mw.to_vec(), yp)?, "plus"),
    ))
}
