//! `sqzforge modes`: effective-index sweeps, phase-matching search, field maps.

use serde::Serialize;
use sqzforge_core::config::SectionReader;
use sqzforge_core::material::{permittivity_tensor, CrossSection};
use sqzforge_core::modesolver::{field_map_csv, solve_modes, ModeSelector, Polarization};
use sqzforge_core::phasematch::{
    find_phasematch_width, sweep_neff, window_for, DispersionCurve, PhasematchResult,
    SweepSettings,
};
use sqzforge_core::{Error, Result};

use crate::cfg::RunConfig;
use crate::out::OutDir;

pub fn parse_selector(s: &str) -> Result<ModeSelector> {
    let lower = s.to_ascii_lowercase();
    let (pol, rest) = if let Some(rest) = lower.strip_prefix("te") {
        (Polarization::Te, rest)
    } else if let Some(rest) = lower.strip_prefix("tm") {
        (Polarization::Tm, rest)
    } else {
        return Err(Error::Config(format!("mode selector `{s}` must look like te0 or tm2")));
    };
    let order: usize = rest
        .parse()
        .map_err(|_| Error::Config(format!("mode selector `{s}` has no numeric order")))?;
    Ok(ModeSelector { polarization: pol, order })
}

fn selector_tag(sel: ModeSelector, wavelength_um: f64) -> String {
    let pol = match sel.polarization {
        Polarization::Te => "te",
        Polarization::Tm => "tm",
    };
    format!("{pol}{}_{:.0}nm", sel.order, wavelength_um * 1000.0)
}

#[derive(Serialize)]
struct PhasematchReport {
    status: &'static str,
    curve_a: String,
    curve_b: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    crossing_width_um: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta_n_eff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_delta_n_eff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    at_width_um: Option<f64>,
}

pub fn run(cfg: &RunConfig, widths_override: Option<Vec<f64>>, quiet: bool) -> Result<()> {
    let section = cfg.raw.section("modes");
    let defaults = [0.85, 0.95, 1.05, 1.15, 1.25];
    let (widths, wl_a, wl_b, sel_a, sel_b, h, n_modes_a, n_modes_b, dump_fields) = match section {
        Some(s) => {
            let mut r = SectionReader::new(s);
            let widths = r.f64_list_or("widths_um", &defaults)?;
            let wl_a = r.f64_or("wavelength_signal_um", 1.55)?;
            let wl_b = r.f64_or("wavelength_pump_um", 0.775)?;
            let sel_a = parse_selector(&r.str_or("signal_mode", "te0"))?;
            let sel_b = parse_selector(&r.str_or("pump_mode", "tm2"))?;
            let h = r.f64_or("grid_h_um", 0.025)?;
            let na = r.usize_or("n_modes_signal", 2)?;
            let nb = r.usize_or("n_modes_pump", 9)?;
            let dump = r.bool_or("dump_fields", true)?;
            r.finish()?;
            (widths, wl_a, wl_b, sel_a, sel_b, h, na, nb, dump)
        }
        None => (defaults.to_vec(), 1.55, 0.775, ModeSelector::TE0, ModeSelector::TM2, 0.025, 2, 9, true),
    };
    let widths = widths_override.unwrap_or(widths);

    let mut settings = SweepSettings::default();
    settings.grid_h_um = h;
    settings.sidewall_angle_deg = cfg.geometry.sidewall_angle_deg;
    settings.jobs = cfg.jobs;

    let out = OutDir::create(&cfg.out_dir)?;

    let single_point = widths.len() == 1;
    let (curve_a, curve_b) = if single_point {
        // degenerate sweep: one row, no crossing search
        let solve_one = |wl: f64, sel: ModeSelector, n_modes: usize| -> Result<DispersionCurve> {
            let xs = CrossSection::new(widths[0], settings.sidewall_angle_deg, cfg.stack.clone())?;
            let grid = window_for(&xs, settings.margin_um, h)?;
            let map = permittivity_tensor(&cfg.materials, &xs, wl, settings.temperature_k, &grid)?;
            let modes = solve_modes(&map, wl, n_modes, None)?;
            let hit = modes.iter().find(|m| sel.matches(&m.label)).map(|m| m.n_eff);
            DispersionCurve::new(
                &selector_tag(sel, wl),
                vec![widths[0], widths[0] + 1e-9],
                vec![hit, hit],
            )
        };
        (solve_one(wl_a, sel_a, n_modes_a)?, solve_one(wl_b, sel_b, n_modes_b)?)
    } else {
        (
            sweep_neff(&cfg.materials, &cfg.stack, &widths, wl_a, sel_a, &settings)?,
            sweep_neff(&cfg.materials, &cfg.stack, &widths, wl_b, sel_b, &settings)?,
        )
    };

    // sweep CSV
    let tag_a = selector_tag(sel_a, wl_a);
    let tag_b = selector_tag(sel_b, wl_b);
    let mut csv = String::new();
    csv.push_str(&format!("# grid_h_um={h}\n# sidewall_angle_deg={}\n", settings.sidewall_angle_deg));
    csv.push_str(&format!("width_um,n_eff_{tag_a},n_eff_{tag_b}\n"));
    for (i, w) in widths.iter().enumerate() {
        let fa = curve_a.n_eff[i].map(|v| v.to_string()).unwrap_or_default();
        let fb = curve_b.n_eff[i].map(|v| v.to_string()).unwrap_or_default();
        csv.push_str(&format!("{w},{fa},{fb}\n"));
    }
    out.write("neff_sweep.csv", &csv)?;

    // crossing report
    let report = if single_point {
        PhasematchReport {
            status: "single_point",
            curve_a: tag_a.clone(),
            curve_b: tag_b.clone(),
            crossing_width_um: None,
            delta_n_eff: None,
            min_delta_n_eff: None,
            at_width_um: None,
        }
    } else {
        match find_phasematch_width(&curve_a, &curve_b)? {
            PhasematchResult::Crossing { width_um, delta_n_eff } => PhasematchReport {
                status: "crossing",
                curve_a: tag_a.clone(),
                curve_b: tag_b.clone(),
                crossing_width_um: Some(width_um),
                delta_n_eff: Some(delta_n_eff),
                min_delta_n_eff: None,
                at_width_um: None,
            },
            PhasematchResult::NoCrossing { min_delta_n_eff, at_width_um } => PhasematchReport {
                status: "no_crossing",
                curve_a: tag_a.clone(),
                curve_b: tag_b.clone(),
                crossing_width_um: None,
                delta_n_eff: None,
                min_delta_n_eff: Some(min_delta_n_eff),
                at_width_um: Some(at_width_um),
            },
        }
    };
    out.write("phasematch.json", &format!("{}\n", serde_json::to_string_pretty(&report).unwrap()))?;

    // field maps at the matched width
    if dump_fields {
        let width = report.crossing_width_um.or(report.at_width_um).unwrap_or(widths[0]);
        for (wl, sel, n_modes, tag) in
            [(wl_a, sel_a, n_modes_a, &tag_a), (wl_b, sel_b, n_modes_b, &tag_b)]
        {
            let xs = CrossSection::new(width, settings.sidewall_angle_deg, cfg.stack.clone())?;
            let grid = window_for(&xs, settings.margin_um, h)?;
            let map = permittivity_tensor(&cfg.materials, &xs, wl, settings.temperature_k, &grid)?;
            let modes = solve_modes(&map, wl, n_modes, None)?;
            if let Some(m) = modes.iter().find(|m| sel.matches(&m.label)) {
                out.write(&format!("fields_{tag}.csv"), &field_map_csv(m))?;
            }
        }
    }

    if !quiet {
        match report.status {
            "crossing" => println!(
                "phase match: width = {} um (|dn| = {:.2e})",
                report.crossing_width_um.unwrap(),
                report.delta_n_eff.unwrap()
            ),
            "no_crossing" => println!(
                "no crossing; min |dn| = {:.3e} at {} um",
                report.min_delta_n_eff.unwrap(),
                report.at_width_um.unwrap()
            ),
            _ => println!("single-point sweep written"),
        }
    }
    Ok(())
}
