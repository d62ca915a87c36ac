//! Full-vector finite-difference eigenmode solver for 2-D waveguide
//! cross-sections with diagonal anisotropic permittivity.

mod eigen;
mod hessenberg;
mod operator;

use std::fmt;
use std::fmt::Write as _;

use crate::material::PermittivityMap;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    Te,
    Tm,
}

/// Mode identity: polarization class and horizontal order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeLabel {
    pub polarization: Polarization,
    pub order: usize,
    /// Set when the TE fraction falls within 0.5 +- 0.05.
    pub hybrid: bool,
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pol = match self.polarization {
            Polarization::Te => "TE",
            Polarization::Tm => "TM",
        };
        write!(f, "{pol}{}", self.order)?;
        if self.hybrid {
            write!(f, "(hybrid)")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeSelector {
    pub polarization: Polarization,
    pub order: usize,
}

impl ModeSelector {
    pub const TE0: ModeSelector = ModeSelector { polarization: Polarization::Te, order: 0 };
    pub const TM0: ModeSelector = ModeSelector { polarization: Polarization::Tm, order: 0 };
    pub const TM2: ModeSelector = ModeSelector { polarization: Polarization::Tm, order: 2 };

    pub fn matches(&self, label: &ModeLabel) -> bool {
        self.polarization == label.polarization && self.order == label.order
    }
}

/// One guided eigenmode on its grid.
///
/// `hx`/`hy` are the transverse magnetic-field maps, power-normalized so
/// that `sum (hx^2 + hy^2) dx dy = 1`. Derived electric fields follow the
/// phase convention in which Hx, Hy and Ez are real while Hz, Ex and Ey are
/// imaginary; the stored values are the imaginary amplitudes.
#[derive(Debug, Clone)]
pub struct ModeSolution {
    pub n_eff: f64,
    pub grid: crate::grid::Grid2D,
    pub hx: Vec<f64>,
    pub hy: Vec<f64>,
    /// Imaginary amplitude of the longitudinal H field.
    pub hz_im: Vec<f64>,
    /// Imaginary amplitude of the horizontal E field (arbitrary overall scale).
    pub ex_im: Vec<f64>,
    /// Imaginary amplitude of the vertical E field (same scale as `ex_im`).
    pub ey_im: Vec<f64>,
    /// Real longitudinal E field (same scale).
    pub ez_re: Vec<f64>,
    /// Fraction of transverse E-field power in the horizontal component.
    pub te_fraction: f64,
    pub horizontal_nodes: usize,
    pub vertical_nodes: usize,
    pub label: ModeLabel,
    /// Relative eigen-residual of the discrete problem.
    pub residual: f64,
    pub(crate) left: Vec<f64>,
    pub(crate) right: Vec<f64>,
}

/// Solves for up to `n_modes` guided modes, sorted by descending effective
/// index. Ties within 1e-9 are ordered by descending TE fraction.
///
/// Returns an empty list (not an error) when no guided mode lies in the
/// bracket; eigensolver failures surface as `NonConvergence`.
pub fn solve_modes(
    map: &PermittivityMap,
    wavelength_um: f64,
    n_modes: usize,
    n_eff_guess: Option<f64>,
) -> Result<Vec<ModeSolution>> {
    if n_modes == 0 {
        return Err(Error::Config("n_modes must be at least 1".into()));
    }
    if !(wavelength_um > 0.0) {
        return Err(Error::Config("wavelength must be positive".into()));
    }
    let n_max = map.max_index();
    let n_min = map.min_index();
    let guess = n_eff_guess.unwrap_or(0.98 * n_max);
    if n_max - n_min > 1e-12 {
        if !(guess > n_min && guess < n_max) {
            return Err(Error::Config(format!(
                "n_eff guess {guess} outside the material index range ({n_min}, {n_max})"
            )));
        }
    } else if !(guess > 0.0 && guess <= n_max * (1.0 + 1e-9)) {
        return Err(Error::Config(format!("n_eff guess {guess} outside (0, {n_max}]")));
    }

    let k0 = 2.0 * std::f64::consts::PI / wavelength_um;
    let a = operator::assemble(map, k0);
    let sigma = (k0 * guess) * (k0 * guess);
    let pairs = eigen::shift_invert_eigs(&a, sigma, n_modes + 2, 1e-9)?;

    let mut modes: Vec<ModeSolution> = Vec::new();
    for pair in pairs {
        if pair.value <= 0.0 {
            continue;
        }
        let n_eff = pair.value.sqrt() / k0;
        if n_eff > n_max * (1.0 + 1e-9) {
            continue;
        }
        if pair.residual > 1e-8 {
            return Err(Error::NonConvergence {
                what: format!("mode at n_eff {n_eff:.6}"),
                residual: pair.residual,
            });
        }
        modes.push(build_mode(map, k0, n_eff, pair));
        if modes.len() == n_modes {
            break;
        }
    }
    modes.sort_by(|a, b| {
        if (a.n_eff - b.n_eff).abs() < 1e-9 {
            b.te_fraction.partial_cmp(&a.te_fraction).unwrap()
        } else {
            b.n_eff.partial_cmp(&a.n_eff).unwrap()
        }
    });
    Ok(modes)
}

fn build_mode(map: &PermittivityMap, k0: f64, n_eff: f64, pair: eigen::EigenPair) -> ModeSolution {
    let g = map.grid.clone();
    let (nx, ny) = (g.nx, g.ny);
    let beta = k0 * n_eff;
    let area = g.cell_area_um2();

    let mut hx = vec![0.0; nx * ny];
    let mut hy = vec![0.0; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let v = (j * nx + i) * 2;
            hx[j * nx + i] = pair.right[v];
            hy[j * nx + i] = pair.right[v + 1];
        }
    }
    // power normalization: sum |H|^2 dx dy = 1
    let power: f64 = hx.iter().chain(hy.iter()).map(|v| v * v).sum::<f64>() * area;
    let scale = 1.0 / power.sqrt();
    for v in hx.iter_mut().chain(hy.iter_mut()) {
        *v *= scale;
    }

    // ghost-mirrored central differences matching the operator's parities
    let at = |f: &[f64], i: isize, j: isize, anti_x: bool, anti_y: bool| -> f64 {
        let (iu, sx) = if i < 0 {
            (0usize, if anti_x { -1.0 } else { 1.0 })
        } else if i as usize >= nx {
            (nx - 1, if anti_x { -1.0 } else { 1.0 })
        } else {
            (i as usize, 1.0)
        };
        let (ju, sy) = if j < 0 {
            (0usize, if anti_y { -1.0 } else { 1.0 })
        } else if j as usize >= ny {
            (ny - 1, if anti_y { -1.0 } else { 1.0 })
        } else {
            (j as usize, 1.0)
        };
        sx * sy * f[ju * nx + iu]
    };
    let dx2 = 2.0 * g.dx_um;
    let dy2 = 2.0 * g.dy_um;

    let mut hz = vec![0.0; nx * ny];
    let mut ex = vec![0.0; nx * ny];
    let mut ey = vec![0.0; nx * ny];
    let mut ez = vec![0.0; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let (fi, fj) = (i as isize, j as isize);
            let dhx_dx = (at(&hx, fi + 1, fj, true, false) - at(&hx, fi - 1, fj, true, false)) / dx2;
            let dhy_dy = (at(&hy, fi, fj + 1, false, true) - at(&hy, fi, fj - 1, false, true)) / dy2;
            hz[j * nx + i] = (dhx_dx + dhy_dy) / beta;
        }
    }
    for j in 0..ny {
        for i in 0..nx {
            let (fi, fj) = (i as isize, j as isize);
            let cell = map.cell(i, j);
            // hz is symmetric across both walls (derived from mixed parities)
            let dhz_dy = (at(&hz, fi, fj + 1, false, false) - at(&hz, fi, fj - 1, false, false)) / dy2;
            let dhz_dx = (at(&hz, fi + 1, fj, false, false) - at(&hz, fi - 1, fj, false, false)) / dx2;
            let dhy_dx = (at(&hy, fi + 1, fj, false, true) - at(&hy, fi - 1, fj, false, true)) / dx2;
            let dhx_dy = (at(&hx, fi, fj + 1, true, false) - at(&hx, fi, fj - 1, true, false)) / dy2;
            let k = j * nx + i;
            ex[k] = (dhz_dy - beta * hy[k]) / cell.xx;
            ey[k] = (beta * hx[k] - dhz_dx) / cell.zz;
            ez[k] = (dhy_dx - dhx_dy) / cell.yy;
        }
    }

    let px: f64 = ex.iter().map(|v| v * v).sum();
    let py: f64 = ey.iter().map(|v| v * v).sum();
    let te_fraction = if px + py > 0.0 { px / (px + py) } else { 0.5 };

    let (h_nodes, v_nodes) = count_nodes(&g, &ex, &ey, te_fraction);
    let hybrid = (te_fraction - 0.5).abs() <= 0.05;
    let label = ModeLabel {
        polarization: if te_fraction > 0.5 { Polarization::Te } else { Polarization::Tm },
        order: h_nodes,
        hybrid,
    };

    ModeSolution {
        n_eff,
        grid: g,
        hx,
        hy,
        hz_im: hz,
        ex_im: ex,
        ey_im: ey,
        ez_re: ez,
        te_fraction,
        horizontal_nodes: h_nodes,
        vertical_nodes: v_nodes,
        label,
        residual: pair.residual,
        left: pair.left,
        right: pair.right,
    }
}

/// Sign changes of the dominant transverse E component along the horizontal
/// line through the intensity centroid (and the vertical line likewise).
fn count_nodes(g: &crate::grid::Grid2D, ex: &[f64], ey: &[f64], te_fraction: f64) -> (usize, usize) {
    let dom: &[f64] = if te_fraction > 0.5 { ex } else { ey };
    let (nx, ny) = (g.nx, g.ny);
    // cut lines through the intensity-projection peaks; a centroid would
    // land on the node line of antisymmetric modes
    let mut row_power = vec![0.0; ny];
    let mut col_power = vec![0.0; nx];
    for j in 0..ny {
        for i in 0..nx {
            let w = dom[j * nx + i] * dom[j * nx + i];
            row_power[j] += w;
            col_power[i] += w;
        }
    }
    let total: f64 = row_power.iter().sum();
    if total <= 0.0 {
        return (0, 0);
    }
    let argmax = |v: &[f64]| {
        v.iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0)
    };
    let ic = argmax(&col_power);
    let jc = argmax(&row_power);

    let row: Vec<f64> = (0..nx).map(|i| dom[jc * nx + i]).collect();
    let col: Vec<f64> = (0..ny).map(|j| dom[j * nx + ic]).collect();
    (sign_changes(&row), sign_changes(&col))
}

fn sign_changes(line: &[f64]) -> usize {
    let max = line.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if max <= 0.0 {
        return 0;
    }
    let floor = 0.02 * max;
    let mut count = 0;
    let mut last = 0.0_f64;
    for v in line {
        if v.abs() < floor {
            continue;
        }
        if last != 0.0 && v.signum() != last.signum() {
            count += 1;
        }
        last = *v;
    }
    count
}

/// Recomputes the mode label from the stored fields.
pub fn classify_mode(mode: &ModeSolution) -> ModeLabel {
    let (h, v) = count_nodes(&mode.grid, &mode.ex_im, &mode.ey_im, mode.te_fraction);
    let _ = v;
    ModeLabel {
        polarization: if mode.te_fraction > 0.5 { Polarization::Te } else { Polarization::Tm },
        order: h,
        hybrid: (mode.te_fraction - 0.5).abs() <= 0.05,
    }
}

/// Discrete mode orthogonality: the left/right (power-orthogonality) inner
/// product normalized so that the self-overlap is 1. Distinct modes of the
/// lossless problem are orthogonal under this product.
pub fn mode_overlap(a: &ModeSolution, b: &ModeSolution) -> f64 {
    let wa_vb: f64 = a.left.iter().zip(b.right.iter()).map(|(x, y)| x * y).sum();
    let wa_va: f64 = a.left.iter().zip(a.right.iter()).map(|(x, y)| x * y).sum();
    let wb_vb: f64 = b.left.iter().zip(b.right.iter()).map(|(x, y)| x * y).sum();
    (wa_vb / (wa_va.abs() * wb_vb.abs()).sqrt()).abs()
}

#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    /// (grid spacing, effective index) per requested resolution.
    pub points: Vec<(f64, f64)>,
    /// Richardson extrapolation from the two finest spacings.
    pub extrapolated: f64,
    /// Apparent convergence order; `None` when it cannot be estimated.
    pub order: Option<f64>,
    /// Cleared when the sequence does not converge monotonically.
    pub monotone: bool,
}

/// Grid-convergence study for one selected mode.
pub fn refine_convergence(
    build: &dyn Fn(f64) -> Result<PermittivityMap>,
    wavelength_um: f64,
    selector: ModeSelector,
    n_modes: usize,
    h_list_um: &[f64],
) -> Result<ConvergenceStudy> {
    if h_list_um.len() < 3 {
        return Err(Error::Config("convergence study needs at least three spacings".into()));
    }
    if h_list_um.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("spacings must be strictly decreasing".into()));
    }
    let mut points = Vec::with_capacity(h_list_um.len());
    for &h in h_list_um {
        let map = build(h)?;
        let modes = solve_modes(&map, wavelength_um, n_modes, None)?;
        let hit = modes.iter().find(|m| selector.matches(&m.label)).ok_or_else(|| {
            Error::Config(format!(
                "selected mode not found at h = {h} um (got {})",
                modes.iter().map(|m| m.label.to_string()).collect::<Vec<_>>().join(", ")
            ))
        })?;
        points.push((h, hit.n_eff));
    }

    let k = points.len();
    let (h1, n1) = points[k - 3];
    let (h2, n2) = points[k - 2];
    let (h3, n3) = points[k - 1];
    let d12 = n2 - n1;
    let d23 = n3 - n2;
    let monotone = d12 * d23 > 0.0 && d23.abs() < d12.abs();
    let order = if d23.abs() > 0.0 && d12 * d23 > 0.0 {
        Some((d12 / d23).abs().ln() / (h1 / h2).ln())
    } else {
        None
    };
    let extrapolated = match order {
        Some(p) => {
            let r = (h2 / h3).powf(p);
            n3 + d23 / (r - 1.0)
        }
        None => n3,
    };
    Ok(ConvergenceStudy { points, extrapolated, order, monotone })
}

/// Field-map CSV for one mode: header
/// `x_um,y_um,hx_re,hx_im,hy_re,hy_im,hz_re,hz_im,ex_re,ex_im,ey_re,ey_im,ez_re,ez_im`,
/// one row per grid cell in row-major order. The phase convention makes Hx,
/// Hy, Ez purely real and Hz, Ex, Ey purely imaginary.
pub fn field_map_csv(mode: &ModeSolution) -> String {
    let g = &mode.grid;
    let mut out = String::new();
    let _ = writeln!(out, "# n_eff={}", mode.n_eff);
    let _ = writeln!(out, "# label={}", mode.label);
    let _ = writeln!(out, "# te_fraction={}", mode.te_fraction);
    let _ = writeln!(
        out,
        "x_um,y_um,hx_re,hx_im,hy_re,hy_im,hz_re,hz_im,ex_re,ex_im,ey_re,ey_im,ez_re,ez_im"
    );
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = j * g.nx + i;
            let _ = writeln!(
                out,
                "{},{},{},0,{},0,0,{},0,{},0,{},{},0",
                g.x(i),
                g.y(j),
                mode.hx[k],
                mode.hy[k],
                mode.hz_im[k],
                mode.ex_im[k],
                mode.ey_im[k],
                mode.ez_re[k]
            );
        }
    }
    out
}
