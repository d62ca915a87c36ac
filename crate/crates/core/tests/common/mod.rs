//! Shared test oracles, independent of the solver implementation.
#![allow(dead_code)]

/// Fundamental TE effective index of a symmetric slab from the
/// transcendental dispersion relation `u tan u = sqrt(V^2 - u^2)`,
/// solved by bisection.
pub fn slab_te0_neff(n_core: f64, n_clad: f64, thickness_um: f64, wavelength_um: f64) -> f64 {
    let k0 = 2.0 * std::f64::consts::PI / wavelength_um;
    let v = k0 * thickness_um / 2.0 * (n_core * n_core - n_clad * n_clad).sqrt();
    let f = |u: f64| u * u.tan() - (v * v - u * u).sqrt();
    let mut lo = 1e-12;
    let mut hi = v.min(std::f64::consts::FRAC_PI_2 - 1e-12);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let u = 0.5 * (lo + hi);
    let kappa = 2.0 * u / thickness_um;
    (n_core * n_core - (kappa / k0) * (kappa / k0)).sqrt()
}
