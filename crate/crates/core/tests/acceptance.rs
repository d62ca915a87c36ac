//! Acceptance suite: every numbered criterion runs at its pinned tolerance
//! and prints one line with the measured values (visible with
//! `cargo test --test acceptance -- --nocapture`). Criterion 11 (the CLI
//! determinism and exit-code contract) lives in the CLI crate's own
//! acceptance suite.

mod common;

use sqzforge_core::cavity::{
    calibrate_beta, dip_center_nm, linear_regression, lorentzian_transmission,
    measured_dip_centers, CavityParams, PhotorefractiveParams, ScanConfig,
};
use sqzforge_core::constants::C_NM_PER_S;
use sqzforge_core::grid::Grid2D;
use sqzforge_core::material::{
    permittivity_tensor, CrossSection, EpsTensor, LayerStack, MaterialDb, PermittivityMap,
};
use sqzforge_core::modesolver::{refine_convergence, solve_modes, ModeSelector};
use sqzforge_core::opo::{
    budget_total, db, from_db, gain_envelopes, infer_eta_x, infer_onchip, noise_power,
    project_threshold_limit, threshold_from_gain, EfficiencyBudget, SqueezerParams,
};
use sqzforge_core::phasematch::{
    find_phasematch_width, sweep_neff, window_for, PhasematchResult, SweepSettings,
};
use sqzforge_core::{simulate_scan, Error};

#[test]
fn acceptance_01_phase_match_width_and_grid_convergence() {
    let started = std::time::Instant::now();
    let db = MaterialDb::builtin();
    let stack = LayerStack::default();

    // crossing search on the default stack
    let widths = [0.85, 0.95, 1.05, 1.15, 1.25];
    let mut settings = SweepSettings::default();
    settings.grid_h_um = 0.025;
    settings.n_modes = 2;
    let te0 = sweep_neff(&db, &stack, &widths, 1.55, ModeSelector::TE0, &settings).unwrap();
    settings.n_modes = 9;
    let tm2 = sweep_neff(&db, &stack, &widths, 0.775, ModeSelector::TM2, &settings).unwrap();
    let crossing = match find_phasematch_width(&te0, &tm2).unwrap() {
        PhasematchResult::Crossing { width_um, delta_n_eff } => {
            assert!(delta_n_eff < 1e-5);
            width_um
        }
        other => panic!("no phase-matching crossing found: {other:?}"),
    };
    assert!(
        (0.85..=1.20).contains(&crossing),
        "crossing {crossing:.4} um outside [0.85, 1.20] um"
    );

    // grid self-convergence at the device width for both modes
    let mut deltas = Vec::new();
    for (wl, sel, n_modes) in [(1.55, ModeSelector::TE0, 2), (0.775, ModeSelector::TM2, 9)] {
        let build = |h: f64| {
            let xs = CrossSection::new(1.02, settings.sidewall_angle_deg, stack.clone())?;
            let grid = window_for(&xs, settings.margin_um, h)?;
            permittivity_tensor(&db, &xs, wl, settings.temperature_k, &grid)
        };
        let study = refine_convergence(&build, wl, sel, n_modes, &[0.04, 0.02, 0.01]).unwrap();
        let d = (study.points[2].1 - study.points[1].1).abs();
        assert!(d < 5e-4, "|dn_eff(20 nm -> 10 nm)| = {d:.2e} at {wl} um");
        deltas.push(d);
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 600, "criterion 1 runtime {elapsed:?} exceeds 10 min");
    println!(
        "criterion 01 PASS: crossing {crossing:.4} um in [0.85, 1.20]; |dn(20->10nm)| = {:.2e} (TE0@1.55), {:.2e} (TM2@0.775); runtime {elapsed:.0?}",
        deltas[0], deltas[1]
    );
}

#[test]
fn acceptance_02_slab_oracle_and_eigen_residual() {
    let oracle = common::slab_te0_neff(2.2, 1.44, 0.5, 1.55);
    let grid = Grid2D::window(1.5, -1.5, 2.0, 0.01).unwrap();
    let map = PermittivityMap::from_fn(grid, |_, y| {
        if (0.0..0.5).contains(&y) {
            EpsTensor::isotropic(2.2)
        } else {
            EpsTensor::isotropic(1.44)
        }
    })
    .unwrap();
    let modes = solve_modes(&map, 1.55, 3, None).unwrap();
    let err = (modes[0].n_eff - oracle).abs();
    assert!(err < 2e-3, "slab n_eff error {err:.2e} at h = 10 nm");
    for m in &modes {
        assert!(m.residual < 1e-8, "eigen residual {:.2e}", m.residual);
    }
    println!(
        "criterion 02 PASS: slab n_eff {:.6} vs oracle {oracle:.6} (err {err:.1e} < 2e-3); max residual {:.1e} < 1e-8",
        modes[0].n_eff,
        modes.iter().map(|m| m.residual).fold(0.0_f64, f64::max)
    );
}

#[test]
fn acceptance_03_threshold_inversion() {
    let est = threshold_from_gain(3.15, Some(0.5), 10.0).unwrap();
    assert!(
        (est.p_th_mw - 52.5).abs() <= 0.1,
        "P_th {} mW outside 52.5 +- 0.1",
        est.p_th_mw
    );
    let (_, gm) = gain_envelopes(10.0, 52.5).unwrap();
    assert!((gm - 0.484).abs() < 5e-3);
    assert!((gm - 0.5).abs() <= 0.05, "G- {gm} further than 0.05 from the measured 0.5");
    println!(
        "criterion 03 PASS: G+ = 3.15 at 10 mW -> P_th = {:.2} mW (52.5 +- 0.1); predicted G- = {gm:.3} within 0.05 of 0.5",
        est.p_th_mw
    );
}

#[test]
fn acceptance_04_squeezing_anchor_5mhz() {
    let p = SqueezerParams::new(0.23, 1.0, 310.0, 0.02).unwrap();
    let np = noise_power(&p, 5.0).unwrap();
    let (sm, sp) = (np.s_minus_db(), np.s_plus_db());
    assert!((sm - (-0.457)).abs() <= 0.005, "S- {sm:.4} dB outside -0.457 +- 0.005");
    assert!((sp - 0.706).abs() <= 0.005, "S+ {sp:.4} dB outside 0.706 +- 0.005");
    // model-vs-measurement gap, documented rather than hidden
    let gap_minus = (sm - (-0.46)).abs();
    let gap_plus = (sp - 0.75).abs();
    assert!(gap_minus <= 0.1 && gap_plus <= 0.1);
    println!(
        "criterion 04 PASS: S- = {sm:.3} dB (measured -0.46, gap {gap_minus:.3}), S+ = {sp:.3} dB (measured +0.75, gap {gap_plus:.3})"
    );
}

#[test]
fn acceptance_05_squeezing_anchor_325mhz() {
    let p = SqueezerParams::new(0.23, 1.0, 310.0, 0.02).unwrap();
    let np = noise_power(&p, 325.0).unwrap();
    let (sm, sp) = (np.s_minus_db(), np.s_plus_db());
    assert!((sm - (-0.18)).abs() <= 0.1, "S- {sm:.3} dB further than 0.1 from -0.18");
    assert!((sp - 0.25).abs() <= 0.1, "S+ {sp:.3} dB further than 0.1 from +0.25");
    println!("criterion 05 PASS: at 325 MHz S- = {sm:.3} dB (measured -0.18), S+ = {sp:.3} dB (measured +0.25)");
}

#[test]
fn acceptance_06_efficiency_budget() {
    let b = EfficiencyBudget::new(0.85, 0.98, 0.45, 0.55).unwrap();
    let eta = budget_total(&b).unwrap();
    assert!((eta - 0.206).abs() <= 0.001, "budget {eta:.4} outside 0.206 +- 0.001");
    assert!((0.20..=0.24).contains(&eta));
    println!("criterion 06 PASS: 0.85 * 0.98 * 0.45 * 0.55 = {eta:.4} in the fitted range [0.20, 0.24]");
}

#[test]
fn acceptance_07_pair_inversion() {
    let r = infer_eta_x(from_db(-0.46), from_db(0.75), 5.0, 310.0).unwrap();
    let eta = r.eta.unwrap();
    assert!((0.20..=0.26).contains(&eta), "inferred eta {eta:.4} outside [0.20, 0.26]");

    // exact-model round trips
    let mut worst = 0.0_f64;
    for eta_t in [0.1, 0.23, 0.5, 0.9] {
        for ratio in [0.002, 0.02, 0.3] {
            for f in [0.0, 5.0, 325.0] {
                let p = SqueezerParams::new(eta_t, 1.0, 310.0, ratio).unwrap();
                let np = noise_power(&p, f).unwrap();
                let back = infer_eta_x(np.s_minus, np.s_plus, f, 310.0).unwrap();
                worst = worst
                    .max((back.eta.unwrap() - eta_t).abs())
                    .max((back.x - ratio.sqrt()).abs());
            }
        }
    }
    assert!(worst < 1e-10, "round-trip error {worst:.2e}");
    println!(
        "criterion 07 PASS: (-0.46, +0.75) dB -> eta = {eta:.4} in [0.20, 0.26] (reported ~0.24); round-trip exact to {worst:.1e}"
    );
}

#[test]
fn acceptance_08_projections() {
    let s24 = db(project_threshold_limit(0.24).unwrap());
    assert!((s24 - (-1.19)).abs() <= 0.02, "projection {s24:.3} dB outside -1.19 +- 0.02");

    let s55 = db(project_threshold_limit(0.55).unwrap());
    assert!((s55 - (-3.47)).abs() <= 0.02);
    let gap55 = (s55 - (-3.6)).abs();
    assert!(gap55 <= 0.2, "on-chip projection {s55:.3} dB further than 0.2 from -3.6");

    let onchip = db(infer_onchip(from_db(-0.46), 0.375).unwrap());
    assert!((onchip - (-1.36)).abs() <= 0.02);
    let gap_onchip = (onchip - (-1.5)).abs();
    assert!(gap_onchip <= 0.2);
    println!(
        "criterion 08 PASS: limit(0.24) = {s24:.2} dB (reported -1.2); limit(0.55) = {s55:.2} dB, {gap55:.2} dB from the reported -3.6 (discrepancy logged); onchip(-0.46 dB, 0.375) = {onchip:.2} dB, {gap_onchip:.2} dB from the reported -1.5 (discrepancy logged)"
    );
}

#[test]
fn acceptance_09_photorefractive_properties() {
    let fwhm = C_NM_PER_S / 775.0 / 7.1e4;
    let cavity = CavityParams::new(775.0, fwhm / 2.0, fwhm / 2.0).unwrap();
    let w = cavity.linewidth_nm();

    // (a) zero blue-shift coefficient recovers the Lorentzian
    let frozen = PhotorefractiveParams::new(0.0, 1.0, 1.0).unwrap();
    let scan = ScanConfig::new(0.5, 2.0, (775.0 - 20.0 * w, 775.0 + 20.0 * w));
    let out = simulate_scan(&cavity, &frozen, &scan).unwrap();
    let dev_a = out
        .transmission
        .x
        .iter()
        .zip(out.transmission.y.iter())
        .map(|(lam, y)| {
            let delta = C_NM_PER_S * (1.0 / lam - 1.0 / 775.0);
            (y - lorentzian_transmission(delta, &cavity)).abs()
        })
        .fold(0.0_f64, f64::max);
    assert!(dev_a <= 1e-6, "beta = 0 deviation {dev_a:.2e}");

    // (b) fast-scan ladder converges monotonically to the Lorentzian
    let pr_b = PhotorefractiveParams::new(0.5, 1.0, 1.0).unwrap();
    let window = (775.0 - 0.6, 775.0 + 10.0 * w);
    let mut prev = f64::INFINITY;
    let mut dev_fastest = f64::NAN;
    for v in [0.1, 1.0, 10.0, 100.0] {
        let out = simulate_scan(&cavity, &pr_b, &ScanConfig::new(v, 0.9, window)).unwrap();
        let dev = out
            .transmission
            .x
            .iter()
            .zip(out.transmission.y.iter())
            .map(|(lam, y)| {
                let delta = C_NM_PER_S * (1.0 / lam - 1.0 / 775.0);
                (y - lorentzian_transmission(delta, &cavity)).abs()
            })
            .fold(0.0_f64, f64::max);
        assert!(dev < prev, "deviation not monotone in scan speed at {v} nm/s");
        prev = dev;
        dev_fastest = dev;
    }
    assert!(dev_fastest < 0.01, "fastest-scan deviation {dev_fastest:.3}");

    // (c) dip center versus power is linear with a negative slope
    let pr_c = PhotorefractiveParams::new(2.0, 1.0, 1.0).unwrap();
    let powers = [1.0, 2.0, 3.0, 5.0];
    let centers = measured_dip_centers(&cavity, &pr_c, 0.5, &powers).unwrap();
    let (slope_c, _, r2) = linear_regression(&powers, &centers).unwrap();
    assert!(slope_c < 0.0, "slope {slope_c}");
    assert!(r2 > 0.99, "R^2 {r2}");

    // (d) calibration closure at the measured -17.4 nm/mW
    let beta = calibrate_beta(&cavity, 1.0, 1.0, 0.5, &powers, -17.4).unwrap();
    let pr_d = PhotorefractiveParams::new(beta, 1.0, 1.0).unwrap();
    let centers = measured_dip_centers(&cavity, &pr_d, 0.5, &powers).unwrap();
    let (slope_d, _, _) = linear_regression(&powers, &centers).unwrap();
    let closure = (slope_d - (-17.4)).abs() / 17.4;
    assert!(closure < 0.02, "calibration closure {closure:.3}");

    println!(
        "criterion 09 PASS: (a) beta=0 dev {dev_a:.1e} <= 1e-6; (b) fastest-scan dev {dev_fastest:.4} < 1%; (c) slope {slope_c:.3} nm/mW, R^2 = {r2:.4}; (d) beta = {beta:.2} nm/mW reproduces -17.4 nm/mW within {:.2}%", closure * 100.0
    );
}

#[test]
fn acceptance_10_fit_engine() {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use sqzforge_core::fit::{
        fit_squeezing_vs_frequency, fit_squeezing_vs_power, numeric_jacobian, registered_models,
        FitPoint,
    };
    use sqzforge_core::opo::{synth_squeezing_vs_frequency, synth_squeezing_vs_power};

    // analytic-vs-numeric Jacobians on every registered model
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE);
    let mut worst_jac = 0.0_f64;
    for model in registered_models() {
        for _ in 0..20 {
            let p = model.sample_params(&mut rng);
            let (x, branch) = model.sample_point(&mut rng);
            let data = [FitPoint::with_branch(x, 0.0, branch)];
            let eval = |q: &[f64], xx: f64, bb: i32| model.eval(q, xx, bb);
            let num = numeric_jacobian(&eval, &p, &data, model.fd_h_rel()).unwrap();
            let ana = model.jacobian_row(&p, x, branch);
            let row_max = ana.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
            for (a, n) in ana.iter().zip(num[0].iter()) {
                if a.abs().max(n.abs()) < 1e-9 * row_max {
                    continue;
                }
                worst_jac = worst_jac.max((a - n).abs() / a.abs().max(n.abs()));
            }
        }
    }
    assert!(worst_jac < 1e-6, "jacobian relative error {worst_jac:.2e}");

    // seeded-noise round trips at the module-stated bands
    let powers: Vec<f64> = (1..=21).map(|i| i as f64 * 2.0).collect();
    let (tm, tp) = synth_squeezing_vs_power(0.20, 200.0, 310.0, 5.0, &powers, 0.002, 7).unwrap();
    let minus: Vec<(f64, f64)> = tm.x.iter().zip(tm.y.iter()).map(|(x, y)| (*x, *y)).collect();
    let plus: Vec<(f64, f64)> = tp.x.iter().zip(tp.y.iter()).map(|(x, y)| (*x, *y)).collect();
    let pfit = fit_squeezing_vs_power(&minus, &plus, 5.0, Some(310.0), 310.0).unwrap();
    assert!(pfit.result.converged);
    assert!((pfit.eta - 0.20).abs() < 0.02, "eta {}", pfit.eta);
    let pth = pfit.p_th_mw.unwrap();
    assert!((pth - 200.0).abs() / 200.0 < 0.20, "p_th {pth}");

    let p = SqueezerParams::new(0.23, 1.0, 310.0, 0.02).unwrap();
    let freqs: Vec<f64> = (0..25).map(|i| 5.0 + i as f64 * 20.0).collect();
    let (fm, fp) = synth_squeezing_vs_frequency(&p, &freqs, 0.002, 42).unwrap();
    let minus: Vec<(f64, f64)> = fm.x.iter().zip(fm.y.iter()).map(|(x, y)| (x / 1e6, *y)).collect();
    let plus: Vec<(f64, f64)> = fp.x.iter().zip(fp.y.iter()).map(|(x, y)| (x / 1e6, *y)).collect();
    let ffit = fit_squeezing_vs_frequency(&minus, &plus, None).unwrap();
    assert!(ffit.result.converged);
    assert!((ffit.eta - 0.23).abs() < 0.03);
    assert!((ffit.pump_ratio.unwrap() - 0.02).abs() < 0.01);
    assert!((ffit.f_bar_s_mhz - 310.0).abs() < 40.0);

    // LM accepted costs never increase, across every fit run here
    for trace in [&pfit.result.cost_trace, &ffit.result.cost_trace] {
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "cost increased");
        }
    }
    println!(
        "criterion 10 PASS: max jacobian err {worst_jac:.1e} < 1e-6; power fit (eta {:.3}, P_th {:.0} mW); frequency fit (eta {:.3}, ratio {:.4}, fs {:.0} MHz); costs non-increasing",
        pfit.eta, pth, ffit.eta, ffit.pump_ratio.unwrap(), ffit.f_bar_s_mhz
    );
}

#[test]
fn acceptance_extra_dip_center_definition_is_minimum_sample() {
    // documented definition: shark-fin center = minimum-transmission sample
    let fwhm = C_NM_PER_S / 775.0 / 7.1e4;
    let cavity = CavityParams::new(775.0, fwhm / 2.0, fwhm / 2.0).unwrap();
    let pr = PhotorefractiveParams::new(1.0, 1.0, 1.0).unwrap();
    let w = cavity.linewidth_nm();
    let scan = ScanConfig::new(0.5, 2.0, (775.0 - 3.0, 775.0 + 15.0 * w));
    let out = simulate_scan(&cavity, &pr, &scan).unwrap();
    let c = dip_center_nm(&out.transmission);
    let y_at = out
        .transmission
        .x
        .iter()
        .position(|x| *x == c)
        .map(|i| out.transmission.y[i])
        .unwrap();
    assert!(out.transmission.y.iter().all(|y| *y >= y_at));
    // energy sanity over the whole trace
    assert!(out.transmission.y.iter().all(|y| (0.0..=1.0).contains(y)));
    match simulate_scan(
        &cavity,
        &pr,
        &ScanConfig::new(1e-9, 2.0, (770.0, 780.0)),
    ) {
        Err(Error::Config(_)) => {}
        other => panic!("expected step-resolution configuration error, got {other:?}"),
    }
}
