//! Dispersion sweeps, phase-matching width search, pulley-coupler index
//! matching, ring resonance combs, and double-resonance tuning.

use crate::constants::C_UM_PER_S;
use crate::grid::Grid2D;
use crate::interp::Pchip;
use crate::material::{permittivity_tensor, CrossSection, LayerStack, MaterialDb, MIN_MARGIN_UM};
use crate::modesolver::{solve_modes, ModeSelector};
use crate::parallel::run_indexed;
use crate::{Error, Result};

/// Effective-index curve of one (wavelength, mode) pair over a width sweep.
/// `n_eff` entries are `None` where the mode is cut off.
#[derive(Debug, Clone)]
pub struct DispersionCurve {
    pub name: String,
    pub widths_um: Vec<f64>,
    pub n_eff: Vec<Option<f64>>,
}

impl DispersionCurve {
    pub fn new(name: &str, widths_um: Vec<f64>, n_eff: Vec<Option<f64>>) -> Result<Self> {
        if widths_um.len() != n_eff.len() {
            return Err(Error::Config("curve widths and values must have equal length".into()));
        }
        let inc = widths_um.windows(2).all(|w| w[1] > w[0]);
        let dec = widths_um.windows(2).all(|w| w[1] < w[0]);
        if !(inc || dec) {
            return Err(Error::Config("sweep widths must be strictly monotone".into()));
        }
        if n_eff.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Config("curve values must be finite".into()));
        }
        Ok(Self { name: name.to_string(), widths_um, n_eff })
    }

    /// Longest contiguous run of defined values, as (widths, values).
    pub fn defined_run(&self) -> (Vec<f64>, Vec<f64>) {
        let mut best: (usize, usize) = (0, 0);
        let mut start = None;
        for (i, v) in self.n_eff.iter().enumerate() {
            match (v.is_some(), start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    if i - s > best.1 - best.0 {
                        best = (s, i);
                    }
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            if self.n_eff.len() - s > best.1 - best.0 {
                best = (s, self.n_eff.len());
            }
        }
        let widths = self.widths_um[best.0..best.1].to_vec();
        let values = self.n_eff[best.0..best.1].iter().map(|v| v.unwrap()).collect();
        (widths, values)
    }

    /// Ascending copy (sweep direction does not matter downstream).
    fn ascending(&self) -> DispersionCurve {
        if self.widths_um.windows(2).all(|w| w[1] > w[0]) {
            return self.clone();
        }
        let mut c = self.clone();
        c.widths_um.reverse();
        c.n_eff.reverse();
        c
    }
}

/// Default etched-sidewall angle; argon-milled ridge processes land well
/// below vertical, and the phase-matching acceptance band assumes it.
pub const DEFAULT_SIDEWALL_DEG: f64 = 75.0;

/// Shared settings for effective-index sweeps.
#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub grid_h_um: f64,
    pub margin_um: f64,
    /// Modes requested per solve; must reach past the selected mode order.
    pub n_modes: usize,
    pub temperature_k: f64,
    pub sidewall_angle_deg: f64,
    /// Worker-pool bound; `None` uses the available parallelism.
    pub jobs: Option<usize>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            grid_h_um: 0.025,
            margin_um: MIN_MARGIN_UM,
            n_modes: 8,
            temperature_k: crate::material::T_REF_DEFAULT_K,
            sidewall_angle_deg: DEFAULT_SIDEWALL_DEG,
            jobs: None,
        }
    }
}

/// Builds the solver window for one cross-section at the given resolution.
pub fn window_for(xs: &CrossSection, margin_um: f64, h_um: f64) -> Result<Grid2D> {
    let hw = xs.half_width_at(xs.stack.slab_thickness_um());
    Grid2D::window(
        hw + margin_um,
        -margin_um,
        xs.stack.film_thickness_um + margin_um,
        h_um,
    )
}

/// Sweeps the effective index of one selected mode over a list of top
/// widths. Cut-off points are flagged as gaps rather than errors.
pub fn sweep_neff(
    db: &MaterialDb,
    stack: &LayerStack,
    widths_um: &[f64],
    wavelength_um: f64,
    selector: ModeSelector,
    settings: &SweepSettings,
) -> Result<DispersionCurve> {
    if widths_um.len() < 2 {
        return Err(Error::Config("sweep needs at least two widths".into()));
    }
    let results: Vec<Result<Option<f64>>> = run_indexed(settings.jobs, widths_um, |_, &w| {
        let xs = CrossSection::new(w, settings.sidewall_angle_deg, stack.clone())?;
        let grid = window_for(&xs, settings.margin_um, settings.grid_h_um)?;
        let map = permittivity_tensor(db, &xs, wavelength_um, settings.temperature_k, &grid)?;
        let modes = solve_modes(&map, wavelength_um, settings.n_modes, None)?;
        Ok(modes.iter().find(|m| selector.matches(&m.label)).map(|m| m.n_eff))
    });
    let mut n_eff = Vec::with_capacity(widths_um.len());
    for r in results {
        n_eff.push(r?);
    }
    let name = format!(
        "{}{}@{}um",
        match selector.polarization {
            crate::modesolver::Polarization::Te => "TE",
            crate::modesolver::Polarization::Tm => "TM",
        },
        selector.order,
        wavelength_um
    );
    DispersionCurve::new(&name, widths_um.to_vec(), n_eff)
}

#[derive(Debug, Clone)]
pub enum PhasematchResult {
    Crossing {
        width_um: f64,
        /// Residual |n_a - n_b| at the solution.
        delta_n_eff: f64,
    },
    NoCrossing {
        /// Smallest |n_a - n_b| over the shared interval and where it occurs.
        min_delta_n_eff: f64,
        at_width_um: f64,
    },
}

/// Finds the width where two dispersion curves cross, by bisection on the
/// monotone-cubic interpolated difference.
pub fn find_phasematch_width(a: &DispersionCurve, b: &DispersionCurve) -> Result<PhasematchResult> {
    let a = a.ascending();
    let b = b.ascending();
    let (wa, na) = a.defined_run();
    let (wb, nb) = b.defined_run();
    if wa.len() < 2 || wb.len() < 2 {
        return Err(Error::Config("both curves need at least two defined points".into()));
    }
    let lo = wa[0].max(wb[0]);
    let hi = wa[wa.len() - 1].min(wb[wb.len() - 1]);
    if !(hi > lo) {
        return Err(Error::Config("curves do not overlap in width".into()));
    }
    // degenerate identical input
    let shared_a: Vec<f64> = wa.iter().zip(na.iter()).filter(|(w, _)| **w >= lo && **w <= hi).map(|(_, n)| *n).collect();
    let shared_b: Vec<f64> = wb.iter().zip(nb.iter()).filter(|(w, _)| **w >= lo && **w <= hi).map(|(_, n)| *n).collect();
    if shared_a.len() == shared_b.len()
        && wa.len() == wb.len()
        && shared_a.iter().zip(shared_b.iter()).all(|(x, y)| (x - y).abs() < 1e-12)
    {
        return Err(Error::Domain(
            "degenerate input: the two curves are identical, every width is a crossing".into(),
        ));
    }

    let pa = Pchip::new(&wa, &na)?;
    let pb = Pchip::new(&wb, &nb)?;
    let diff = |w: f64| pa.eval(w) - pb.eval(w);

    // locate a sign change on a dense scan of the shared interval
    let samples = 256;
    let mut prev_w = lo;
    let mut prev_d = diff(lo);
    let mut bracket = None;
    let mut best = (prev_d.abs(), lo);
    for k in 1..=samples {
        let w = lo + (hi - lo) * k as f64 / samples as f64;
        let d = diff(w);
        if d.abs() < best.0 {
            best = (d.abs(), w);
        }
        if prev_d == 0.0 || prev_d * d <= 0.0 {
            bracket = Some((prev_w, w));
            break;
        }
        prev_w = w;
        prev_d = d;
    }
    let Some((mut wl, mut wr)) = bracket else {
        return Ok(PhasematchResult::NoCrossing { min_delta_n_eff: best.0, at_width_um: best.1 });
    };
    // bisection well past the |delta n| < 1e-5 contract
    let mut w_mid = 0.5 * (wl + wr);
    for _ in 0..200 {
        w_mid = 0.5 * (wl + wr);
        let d = diff(w_mid);
        if (wr - wl) < 1e-11 || d.abs() < 1e-9 {
            break;
        }
        if d * diff(wl) <= 0.0 {
            wr = w_mid;
        } else {
            wl = w_mid;
        }
    }
    Ok(PhasematchResult::Crossing { width_um: w_mid, delta_n_eff: diff(w_mid).abs() })
}

/// Pulley matching: the bus width where the swept mode reaches a fixed ring
/// effective index.
pub fn find_pulley_match(bus_curve: &DispersionCurve, ring_n_eff: f64) -> Result<PhasematchResult> {
    let bus = bus_curve.ascending();
    let (w, _) = bus.defined_run();
    if w.len() < 2 {
        return Err(Error::Config("bus curve needs at least two defined points".into()));
    }
    let target = DispersionCurve::new(
        "ring_target",
        w.clone(),
        vec![Some(ring_n_eff); w.len()],
    )?;
    find_phasematch_width(&bus, &target)
}

/// Wavelength- and temperature-dependent path effective index for ring
/// resonance calculations.
pub trait IndexModel {
    fn n_eff(&self, wavelength_um: f64, temperature_k: f64) -> Result<f64>;
}

/// Dispersionless index.
pub struct ConstantIndex(pub f64);

impl IndexModel for ConstantIndex {
    fn n_eff(&self, _wavelength_um: f64, _temperature_k: f64) -> Result<f64> {
        Ok(self.0)
    }
}

/// First-order dispersion about a reference wavelength with a linear
/// thermo-optic term.
#[derive(Debug, Clone, Copy)]
pub struct LinearIndex {
    pub n0: f64,
    pub lambda_ref_um: f64,
    /// dn/d(lambda) in 1/um (negative for normal dispersion).
    pub slope_per_um: f64,
    pub dn_dt_per_k: f64,
    pub t_ref_k: f64,
}

impl IndexModel for LinearIndex {
    fn n_eff(&self, wavelength_um: f64, temperature_k: f64) -> Result<f64> {
        Ok(self.n0
            + self.slope_per_um * (wavelength_um - self.lambda_ref_um)
            + self.dn_dt_per_k * (temperature_k - self.t_ref_k))
    }
}

/// Distinct pump/signal dispersion branches split at a boundary wavelength,
/// for double-resonance studies.
pub struct BandIndex {
    pub signal: LinearIndex,
    pub pump: LinearIndex,
    pub split_um: f64,
}

impl IndexModel for BandIndex {
    fn n_eff(&self, wavelength_um: f64, temperature_k: f64) -> Result<f64> {
        if wavelength_um < self.split_um {
            self.pump.n_eff(wavelength_um, temperature_k)
        } else {
            self.signal.n_eff(wavelength_um, temperature_k)
        }
    }
}

/// Ring path geometry; the mode index comes from an [`IndexModel`].
#[derive(Debug, Clone, Copy)]
pub struct RingGeometry {
    pub radius_um: f64,
}

impl RingGeometry {
    pub fn new(radius_um: f64) -> Result<Self> {
        if !(radius_um > 0.0) {
            return Err(Error::Config("ring radius must be positive".into()));
        }
        Ok(Self { radius_um })
    }

    pub fn circumference_um(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.radius_um
    }
}

/// All ring resonances in a wavelength window: each entry solves
/// `m lambda = L n_eff(lambda, T)` self-consistently.
pub fn ring_resonances(
    ring: &RingGeometry,
    model: &dyn IndexModel,
    window_um: (f64, f64),
    temperature_k: f64,
) -> Result<Vec<(u64, f64)>> {
    let (lo, hi) = window_um;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Config("invalid wavelength window".into()));
    }
    let circ = ring.circumference_um();
    // model must cover the window; probing the ends surfaces range errors
    let n_lo = model.n_eff(lo, temperature_k)?;
    let n_hi = model.n_eff(hi, temperature_k)?;
    let m_max = (circ * n_lo / lo).floor() as u64;
    let m_min = (circ * n_hi / hi).ceil() as u64;
    if m_min > m_max {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for m in (m_min..=m_max).rev() {
        // g(lambda) = m lambda - L n(lambda) is increasing in lambda for
        // normal dispersion, so bisection is safe
        let g = |lam: f64| -> Result<f64> { Ok(m as f64 * lam - circ * model.n_eff(lam, temperature_k)?) };
        let (mut a, mut b) = (lo, hi);
        let (ga, gb) = (g(a)?, g(b)?);
        if ga > 0.0 || gb < 0.0 {
            continue;
        }
        for _ in 0..100 {
            let mid = 0.5 * (a + b);
            if g(mid)? <= 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        let lam = 0.5 * (a + b);
        let residual = (lam - circ * model.n_eff(lam, temperature_k)? / m as f64).abs();
        if residual > 1e-6 {
            return Err(Error::NonConvergence {
                what: format!("ring resonance m = {m}"),
                residual,
            });
        }
        out.push((m, lam));
    }
    // ascending m = descending wavelength; emit ascending wavelength
    out.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct DoubleResonance {
    /// Frequency offset of the nearest pump resonance from half the signal
    /// wavelength, in GHz.
    pub detuning_ghz: f64,
    /// Temperature shift that nulls the detuning, when reachable.
    pub delta_t_k: Option<f64>,
}

/// Detuning of the nearest pump resonance from `lambda_signal / 2` and the
/// temperature shift that nulls it within `+-delta_t_max_k`.
pub fn double_resonance_detuning(
    ring: &RingGeometry,
    model: &dyn IndexModel,
    lambda_signal_um: f64,
    temperature_k: f64,
    delta_t_max_k: f64,
) -> Result<DoubleResonance> {
    let circ = ring.circumference_um();
    // signal resonance order at the operating point
    let n_s = model.n_eff(lambda_signal_um, temperature_k)?;
    let m_s = (circ * n_s / lambda_signal_um).round();
    if m_s < 1.0 {
        return Err(Error::Config("signal wavelength supports no resonance".into()));
    }
    let m_s = m_s as u64;

    // the signal resonance wavelength tracks temperature at fixed order
    let signal_res = |t: f64| -> Result<f64> {
        solve_fixed_order(circ, model, m_s, lambda_signal_um, t)
    };
    let lam_s0 = signal_res(temperature_k)?;
    if (lam_s0 - lambda_signal_um).abs() > lambda_signal_um * 1e-3 {
        return Err(Error::Config(format!(
            "no signal resonance at {lambda_signal_um} um (nearest at {lam_s0} um)"
        )));
    }

    let pump_order = |t: f64| -> Result<u64> {
        let lam_p = signal_res(t)? / 2.0;
        let n_p = model.n_eff(lam_p, t)?;
        Ok((circ * n_p / lam_p).round() as u64)
    };
    let detune = |t: f64, m_p: u64| -> Result<f64> {
        let lam_s = signal_res(t)?;
        let lam_p = solve_fixed_order(circ, model, m_p, lam_s / 2.0, t)?;
        Ok((C_UM_PER_S / (lam_s / 2.0) - C_UM_PER_S / lam_p) / 1e9)
    };
    let m_p0 = pump_order(temperature_k)?;
    let d0 = detune(temperature_k, m_p0)?;

    if d0.abs() < 1e-9 {
        return Ok(DoubleResonance { detuning_ghz: d0, delta_t_k: Some(0.0) });
    }
    if !(delta_t_max_k > 0.0) {
        return Ok(DoubleResonance { detuning_ghz: d0, delta_t_k: None });
    }

    // bracket a zero of the detuning over the allowed temperature range,
    // tracking the same pump order
    let f = |dt: f64| detune(temperature_k + dt, m_p0);
    let mut bracket = None;
    let steps = 64;
    let mut prev_dt = -delta_t_max_k;
    let mut prev = f(prev_dt)?;
    for k in 1..=steps {
        let dt = -delta_t_max_k + 2.0 * delta_t_max_k * k as f64 / steps as f64;
        let val = f(dt)?;
        if prev * val <= 0.0 {
            bracket = Some((prev_dt, dt));
            break;
        }
        prev_dt = dt;
        prev = val;
    }
    let Some((mut a, mut b)) = bracket else {
        return Ok(DoubleResonance { detuning_ghz: d0, delta_t_k: None });
    };
    for _ in 0..100 {
        let mid = 0.5 * (a + b);
        if f(a)? * f(mid)? <= 0.0 {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(DoubleResonance { detuning_ghz: d0, delta_t_k: Some(0.5 * (a + b)) })
}

/// Resonance wavelength of a fixed azimuthal order near a starting guess.
fn solve_fixed_order(
    circ_um: f64,
    model: &dyn IndexModel,
    m: u64,
    lambda_guess_um: f64,
    temperature_k: f64,
) -> Result<f64> {
    let mut lam = lambda_guess_um;
    // fixed point with damping, then a bisection fallback
    for _ in 0..200 {
        let n = model.n_eff(lam, temperature_k)?;
        let next = circ_um * n / m as f64;
        if (next - lam).abs() < 1e-12 {
            return Ok(next);
        }
        lam = 0.5 * (lam + next);
    }
    let residual = (lam - circ_um * model.n_eff(lam, temperature_k)? / m as f64).abs();
    if residual > 1e-6 {
        return Err(Error::NonConvergence { what: format!("resonance order {m}"), residual });
    }
    Ok(lam)
}
