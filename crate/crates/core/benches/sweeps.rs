//! Data-parallel sweep benchmarks: rayon-backed `run_indexed` against the
//! sequential reference path on the two sweep-shaped workloads (mode solves
//! over widths, scan simulations over powers).
//!
//! Run with `cargo bench -p sqzforge-core`; build with
//! `--no-default-features` to measure the fallback where the parallel
//! feature is compiled out entirely.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use sqzforge_core::cavity::{CavityParams, PhotorefractiveParams, ScanConfig};
use sqzforge_core::constants::C_NM_PER_S;
use sqzforge_core::material::{permittivity_tensor, CrossSection, LayerStack, MaterialDb};
use sqzforge_core::modesolver::solve_modes;
use sqzforge_core::parallel::{run_indexed, run_indexed_seq};
use sqzforge_core::phasematch::{window_for, DEFAULT_SIDEWALL_DEG};

fn neff_sweep_point(db: &MaterialDb, stack: &LayerStack, width: f64) -> f64 {
    let xs = CrossSection::new(width, DEFAULT_SIDEWALL_DEG, stack.clone()).unwrap();
    let grid = window_for(&xs, 1.5, 0.08).unwrap();
    let map = permittivity_tensor(db, &xs, 1.55, 293.15, &grid).unwrap();
    solve_modes(&map, 1.55, 1, None).unwrap()[0].n_eff
}

fn bench_neff_sweep(c: &mut Criterion) {
    let db = MaterialDb::builtin();
    let stack = LayerStack::default();
    let widths = [0.9, 1.0, 1.1, 1.2];

    let mut group = c.benchmark_group("neff_sweep");
    group.sample_size(10);
    group.bench_with_input(BenchmarkId::new("parallel", widths.len()), &widths, |b, widths| {
        b.iter(|| run_indexed(None, widths, |_, &w| neff_sweep_point(&db, &stack, w)))
    });
    group.bench_with_input(BenchmarkId::new("sequential", widths.len()), &widths, |b, widths| {
        b.iter(|| run_indexed_seq(widths, |_, &w| neff_sweep_point(&db, &stack, w)))
    });
    group.finish();
}

fn scan_point(cavity: &CavityParams, pr: &PhotorefractiveParams, power: f64) -> f64 {
    let w = cavity.linewidth_nm();
    let drag = pr.beta_nm_per_mw * pr.buildup_norm * power + pr.tau_s * 0.5;
    let scan = ScanConfig::new(
        0.5,
        power,
        (cavity.lambda0_nm - drag - 30.0 * w, cavity.lambda0_nm + 20.0 * w),
    );
    let out = sqzforge_core::simulate_scan(cavity, pr, &scan).unwrap();
    sqzforge_core::dip_center_nm(&out.transmission)
}

fn bench_scan_ladder(c: &mut Criterion) {
    let fwhm = C_NM_PER_S / 775.0 / 7.1e4;
    let cavity = CavityParams::new(775.0, fwhm / 2.0, fwhm / 2.0).unwrap();
    let pr = PhotorefractiveParams::new(2.0, 1.0, 1.0).unwrap();
    let powers = [1.0, 2.0, 3.0, 5.0];

    let mut group = c.benchmark_group("scan_ladder");
    group.sample_size(10);
    group.bench_with_input(BenchmarkId::new("parallel", powers.len()), &powers, |b, powers| {
        b.iter(|| run_indexed(None, powers, |_, &p| scan_point(&cavity, &pr, p)))
    });
    group.bench_with_input(BenchmarkId::new("sequential", powers.len()), &powers, |b, powers| {
        b.iter(|| run_indexed_seq(powers, |_, &p| scan_point(&cavity, &pr, p)))
    });
    group.finish();
}

criterion_group!(benches, bench_neff_sweep, bench_scan_ladder);
criterion_main!(benches);
