//! Wavelength- and temperature-dependent refractive indices for the layer
//! stack, ridge cross-section geometry, and anisotropic permittivity maps.
//!
//! The film is a Z-cut uniaxial crystal whose optic axis is the vertical
//! (out-of-plane) direction, so the in-plane index is the ordinary one and
//! the vertical index is the extraordinary one.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::config::{parse_config, RawConfig, SectionReader};
use crate::grid::Grid2D;
use crate::{Error, Result};

/// Default reference temperature for the thermo-optic term (20 C).
pub const T_REF_DEFAULT_K: f64 = 293.15;

/// Minimum clearance between the guiding core and the window walls.
pub const MIN_MARGIN_UM: f64 = 1.5;

const BUILTIN_MATERIALS: &str = include_str!("../data/materials.conf");

/// Sellmeier dispersion model with a linear thermo-optic term.
///
/// `n^2 = 1 + sum_i b_i l^2 / (l^2 - c_i)` with `l` in micrometers, then
/// `n(l, T) = n(l) + (T - t_ref_k) * dn_dt_per_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionModel {
    pub name: String,
    pub sellmeier_b: Vec<f64>,
    pub sellmeier_c: Vec<f64>,
    /// Wavelength validity range in micrometers.
    pub validity_um: (f64, f64),
    pub dn_dt_per_k: f64,
    pub t_ref_k: f64,
}

impl DispersionModel {
    pub fn new(
        name: &str,
        sellmeier_b: Vec<f64>,
        sellmeier_c: Vec<f64>,
        validity_um: (f64, f64),
        dn_dt_per_k: f64,
        t_ref_k: f64,
    ) -> Result<Self> {
        if sellmeier_b.is_empty() || sellmeier_b.len() != sellmeier_c.len() {
            return Err(Error::Config(format!(
                "material '{name}': sellmeier_b and sellmeier_c must be non-empty lists of equal length"
            )));
        }
        if !(validity_um.0 > 0.0 && validity_um.1 > validity_um.0) {
            return Err(Error::Config(format!(
                "material '{name}': invalid validity range {validity_um:?}"
            )));
        }
        if !dn_dt_per_k.is_finite() || !t_ref_k.is_finite() {
            return Err(Error::Config(format!("material '{name}': non-finite thermo-optic data")));
        }
        Ok(Self {
            name: name.to_string(),
            sellmeier_b,
            sellmeier_c,
            validity_um,
            dn_dt_per_k,
            t_ref_k,
        })
    }

    /// Refractive index at `wavelength_um` and absolute temperature `temperature_k`.
    pub fn index(&self, wavelength_um: f64, temperature_k: f64) -> Result<f64> {
        let (lo, hi) = self.validity_um;
        if !(wavelength_um >= lo && wavelength_um <= hi) {
            return Err(Error::OutOfValidity {
                material: self.name.clone(),
                wavelength_um,
                lo_um: lo,
                hi_um: hi,
            });
        }
        let l2 = wavelength_um * wavelength_um;
        let mut nsq = 1.0;
        for (b, c) in self.sellmeier_b.iter().zip(self.sellmeier_c.iter()) {
            nsq += b * l2 / (l2 - c);
        }
        if !(nsq > 1.0) {
            return Err(Error::Domain(format!(
                "material '{}': n^2 = {nsq} not above 1 at {wavelength_um} um",
                self.name
            )));
        }
        Ok(nsq.sqrt() + (temperature_k - self.t_ref_k) * self.dn_dt_per_k)
    }
}

/// Standalone form of the index operation.
pub fn index(material: &DispersionModel, wavelength_um: f64, temperature_k: f64) -> Result<f64> {
    material.index(wavelength_um, temperature_k)
}

#[derive(Debug, Clone)]
pub enum Material {
    Isotropic(DispersionModel),
    /// Negative-uniaxial crystal; `ordinary` applies in-plane, `extraordinary`
    /// along the optic (vertical) axis.
    Uniaxial {
        ordinary: DispersionModel,
        extraordinary: DispersionModel,
    },
}

impl Material {
    /// Index for an isotropic material; uniaxial materials are rejected.
    pub fn isotropic_index(&self, wavelength_um: f64, temperature_k: f64) -> Result<f64> {
        match self {
            Material::Isotropic(m) => m.index(wavelength_um, temperature_k),
            Material::Uniaxial { ordinary, .. } => Err(Error::Config(format!(
                "material '{}' is uniaxial and cannot be used isotropically",
                ordinary.name
            ))),
        }
    }

    /// (ordinary, extraordinary) pair; isotropic materials return equal values.
    pub fn indices(&self, wavelength_um: f64, temperature_k: f64) -> Result<(f64, f64)> {
        match self {
            Material::Isotropic(m) => {
                let n = m.index(wavelength_um, temperature_k)?;
                Ok((n, n))
            }
            Material::Uniaxial { ordinary, extraordinary } => Ok((
                ordinary.index(wavelength_um, temperature_k)?,
                extraordinary.index(wavelength_um, temperature_k)?,
            )),
        }
    }
}

/// Named material collection loaded from a coefficient file.
#[derive(Debug, Clone)]
pub struct MaterialDb {
    materials: BTreeMap<String, Material>,
}

impl MaterialDb {
    /// The coefficient set shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_text(BUILTIN_MATERIALS).expect("builtin material file must parse")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let cfg = parse_config(text)?;
        Self::from_raw(&cfg)
    }

    pub fn from_raw(cfg: &RawConfig) -> Result<Self> {
        // First pass: scalar dispersion models.
        let mut models: BTreeMap<String, DispersionModel> = BTreeMap::new();
        let mut uniaxial: Vec<(String, String, String, usize)> = Vec::new();
        for section in cfg.sections_with_prefix("material.") {
            let id = section.name.trim_start_matches("material.").to_string();
            if id.is_empty() {
                return Err(Error::ConfigAt { line: section.line, msg: "empty material id".into() });
            }
            let mut r = SectionReader::new(section);
            if r.has("uniaxial") {
                let parts = r.str_list_req("uniaxial")?;
                if parts.len() != 2 {
                    return Err(Error::ConfigAt {
                        line: section.line,
                        msg: "uniaxial must list exactly two material ids (ordinary, extraordinary)".into(),
                    });
                }
                uniaxial.push((id, parts[0].clone(), parts[1].clone(), section.line));
                r.finish()?;
                continue;
            }
            let b = r.f64_list_req("sellmeier_b")?;
            let c = r.f64_list_req("sellmeier_c")?;
            let validity = r.pair_req("validity_um")?;
            let dn_dt = r.f64_or("dn_dt_per_k", 0.0)?;
            let t_ref = r.f64_or("t_ref_k", T_REF_DEFAULT_K)?;
            r.finish()?;
            models.insert(id.clone(), DispersionModel::new(&id, b, c, validity, dn_dt, t_ref)?);
        }

        let mut materials: BTreeMap<String, Material> = models
            .iter()
            .map(|(k, v)| (k.clone(), Material::Isotropic(v.clone())))
            .collect();
        for (id, o_id, e_id, line) in uniaxial {
            let o = models.get(&o_id).ok_or_else(|| Error::ConfigAt {
                line,
                msg: format!("uniaxial material '{id}' references unknown material '{o_id}'"),
            })?;
            let e = models.get(&e_id).ok_or_else(|| Error::ConfigAt {
                line,
                msg: format!("uniaxial material '{id}' references unknown material '{e_id}'"),
            })?;
            materials.insert(
                id,
                Material::Uniaxial { ordinary: o.clone(), extraordinary: e.clone() },
            );
        }
        if materials.is_empty() {
            return Err(Error::Config("material file defines no materials".into()));
        }
        Ok(Self { materials })
    }

    pub fn get(&self, id: &str) -> Result<&Material> {
        self.materials
            .get(id)
            .ok_or_else(|| Error::Config(format!("unknown material '{id}'")))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.materials.keys().map(|s| s.as_str())
    }

    /// Serializes back to the coefficient file format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let fmt_list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        for (id, mat) in &self.materials {
            match mat {
                Material::Isotropic(m) => {
                    let _ = writeln!(out, "[material.{id}]");
                    let _ = writeln!(out, "sellmeier_b = {}", fmt_list(&m.sellmeier_b));
                    let _ = writeln!(out, "sellmeier_c = {}", fmt_list(&m.sellmeier_c));
                    let _ = writeln!(out, "validity_um = {}, {}", m.validity_um.0, m.validity_um.1);
                    let _ = writeln!(out, "dn_dt_per_k = {}", m.dn_dt_per_k);
                    let _ = writeln!(out, "t_ref_k = {}", m.t_ref_k);
                }
                Material::Uniaxial { ordinary, extraordinary } => {
                    let _ = writeln!(out, "[material.{id}]");
                    let _ = writeln!(out, "uniaxial = {}, {}", ordinary.name, extraordinary.name);
                }
            }
            let _ = writeln!(out);
        }
        out
    }
}

/// Ridge waveguide layer stack.
///
/// Vertical layout (y = 0 at the film bottom): the substrate oxide box fills
/// `[-box_thickness, 0)`, the film `[0, film_thickness)`, the cladding
/// everything above. Outside the ridge the film is etched down by
/// `etch_depth`, leaving a slab of `film_thickness - etch_depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    pub film_thickness_um: f64,
    pub etch_depth_um: f64,
    pub box_thickness_um: f64,
    pub substrate: String,
    pub film: String,
    pub cladding: String,
}

impl Default for LayerStack {
    fn default() -> Self {
        Self {
            film_thickness_um: 0.5,
            etch_depth_um: 0.40,
            box_thickness_um: 4.7,
            substrate: "silica".into(),
            film: "lithium_niobate".into(),
            cladding: "air".into(),
        }
    }
}

impl LayerStack {
    pub fn validate(&self) -> Result<()> {
        if !(self.etch_depth_um > 0.0 && self.etch_depth_um <= self.film_thickness_um) {
            return Err(Error::Config(format!(
                "etch depth {} um must satisfy 0 < etch <= film thickness {} um",
                self.etch_depth_um, self.film_thickness_um
            )));
        }
        if !(self.box_thickness_um > 0.0) {
            return Err(Error::Config("box thickness must be positive".into()));
        }
        Ok(())
    }

    pub fn slab_thickness_um(&self) -> f64 {
        self.film_thickness_um - self.etch_depth_um
    }

    pub fn from_section(r: &mut SectionReader) -> Result<Self> {
        let d = LayerStack::default();
        let stack = LayerStack {
            film_thickness_um: r.f64_or("film_thickness_um", d.film_thickness_um)?,
            etch_depth_um: r.f64_or("etch_depth_um", d.etch_depth_um)?,
            box_thickness_um: r.f64_or("box_thickness_um", d.box_thickness_um)?,
            substrate: r.str_or("substrate", &d.substrate),
            film: r.str_or("film", &d.film),
            cladding: r.str_or("cladding", &d.cladding),
        };
        stack.validate()?;
        Ok(stack)
    }

    pub fn to_section_text(&self) -> String {
        format!(
            "[stack]\nfilm_thickness_um = {}\netch_depth_um = {}\nbox_thickness_um = {}\nsubstrate = {}\nfilm = {}\ncladding = {}\n",
            self.film_thickness_um,
            self.etch_depth_um,
            self.box_thickness_um,
            self.substrate,
            self.film,
            self.cladding
        )
    }
}

/// Ridge cross-section: the designable object.
///
/// The ridge is centered at x = 0. For sidewall angles below 90 degrees the
/// ridge widens towards its base: `width(y) = top_width + 2 (film_top - y) / tan(angle)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSection {
    pub top_width_um: f64,
    pub sidewall_angle_deg: f64,
    pub stack: LayerStack,
}

impl CrossSection {
    pub fn new(top_width_um: f64, sidewall_angle_deg: f64, stack: LayerStack) -> Result<Self> {
        if !(top_width_um > 0.0) {
            return Err(Error::Config(format!("top width must be positive, got {top_width_um}")));
        }
        if !(60.0..=90.0).contains(&sidewall_angle_deg) {
            return Err(Error::Config(format!(
                "sidewall angle {sidewall_angle_deg} deg outside the supported 60-90 deg range"
            )));
        }
        stack.validate()?;
        Ok(Self { top_width_um, sidewall_angle_deg, stack })
    }

    /// Ridge half-width at height y (only meaningful inside the etch band).
    pub fn half_width_at(&self, y_um: f64) -> f64 {
        let top = self.stack.film_thickness_um;
        if self.sidewall_angle_deg >= 90.0 {
            return self.top_width_um / 2.0;
        }
        let run = (top - y_um).max(0.0) / self.sidewall_angle_deg.to_radians().tan();
        self.top_width_um / 2.0 + run
    }

    pub fn bottom_width_um(&self) -> f64 {
        2.0 * self.half_width_at(self.stack.slab_thickness_um())
    }
}

/// Diagonal relative permittivity of one grid cell.
///
/// Component labels follow the device frame of a Z-cut film: `xx` is the
/// in-plane transverse direction, `yy` the in-plane propagation direction,
/// `zz` the vertical (optic-axis) direction. In the film `xx = yy = n_o^2`
/// and `zz = n_e^2`; isotropic cells have all three equal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsTensor {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
}

impl EpsTensor {
    pub fn isotropic(n: f64) -> Self {
        let e = n * n;
        Self { xx: e, yy: e, zz: e }
    }

    pub fn is_finite_positive(&self) -> bool {
        self.xx.is_finite() && self.yy.is_finite() && self.zz.is_finite()
            && self.xx > 0.0 && self.yy > 0.0 && self.zz > 0.0
    }
}

/// Per-cell diagonal permittivity over a grid.
#[derive(Debug, Clone)]
pub struct PermittivityMap {
    pub grid: Grid2D,
    cells: Vec<EpsTensor>,
}

impl PermittivityMap {
    pub fn from_cells(grid: Grid2D, cells: Vec<EpsTensor>) -> Result<Self> {
        if cells.len() != grid.n_cells() {
            return Err(Error::Config("cell count does not match grid".into()));
        }
        if cells.iter().any(|c| !c.is_finite_positive()) {
            return Err(Error::Config("permittivity components must be positive and finite".into()));
        }
        Ok(Self { grid, cells })
    }

    /// Builds a map by sampling a function of the cell-center coordinates.
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> EpsTensor) -> Result<Self> {
        let mut cells = Vec::with_capacity(grid.n_cells());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                cells.push(f(grid.x(i), grid.y(j)));
            }
        }
        Self::from_cells(grid, cells)
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> EpsTensor {
        self.cells[self.grid.idx(i, j)]
    }

    pub fn cells(&self) -> &[EpsTensor] {
        &self.cells
    }

    /// Largest principal refractive index anywhere on the map.
    pub fn max_index(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| c.xx.max(c.yy).max(c.zz))
            .fold(0.0_f64, f64::max)
            .sqrt()
    }

    /// Smallest principal refractive index anywhere on the map.
    pub fn min_index(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| c.xx.min(c.yy).min(c.zz))
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    /// Number of cells holding a material mixture (interface cells).
    pub fn mixed_cell_count(&self, pure: &[EpsTensor]) -> usize {
        let is_pure = |c: &EpsTensor| {
            pure.iter().any(|p| {
                (c.xx - p.xx).abs() < 1e-12 && (c.yy - p.yy).abs() < 1e-12 && (c.zz - p.zz).abs() < 1e-12
            })
        };
        self.cells.iter().filter(|c| !is_pure(c)).count()
    }
}

/// Samples the stack and ridge geometry onto a grid as per-cell diagonal
/// permittivity tensors, using exact area-weighted averaging in cells cut by
/// material interfaces.
pub fn permittivity_tensor(
    db: &MaterialDb,
    cross_section: &CrossSection,
    wavelength_um: f64,
    temperature_k: f64,
    grid: &Grid2D,
) -> Result<PermittivityMap> {
    cross_section.stack.validate()?;
    let stack = &cross_section.stack;
    let film_top = stack.film_thickness_um;
    let slab_top = stack.slab_thickness_um();

    // Window must contain the core plus the minimum margin on every side,
    // and must not reach below the oxide box.
    let hw_max = cross_section.half_width_at(slab_top);
    if grid.x0_um > -(hw_max + MIN_MARGIN_UM) + 1e-9
        || grid.x_max() < hw_max + MIN_MARGIN_UM - 1e-9
        || grid.y0_um > -MIN_MARGIN_UM + 1e-9
        || grid.y_max() < film_top + MIN_MARGIN_UM - 1e-9
    {
        return Err(Error::Config(format!(
            "grid window too small: need the ridge (half width {hw_max:.3} um) plus {MIN_MARGIN_UM} um margins"
        )));
    }
    if grid.y0_um < -stack.box_thickness_um - 1e-12 {
        return Err(Error::Config(format!(
            "grid window extends below the oxide box (bottom {} um, box depth {} um)",
            grid.y0_um, stack.box_thickness_um
        )));
    }

    let n_sub = db.get(&stack.substrate)?.isotropic_index(wavelength_um, temperature_k)?;
    let n_clad = db.get(&stack.cladding)?.isotropic_index(wavelength_um, temperature_k)?;
    let (n_o, n_e) = db.get(&stack.film)?.indices(wavelength_um, temperature_k)?;

    let eps_sub = EpsTensor::isotropic(n_sub);
    let eps_clad = EpsTensor::isotropic(n_clad);
    let eps_film = EpsTensor { xx: n_o * n_o, yy: n_o * n_o, zz: n_e * n_e };

    let mut cells = Vec::with_capacity(grid.n_cells());
    for j in 0..grid.ny {
        let ya = grid.y0_um + j as f64 * grid.dy_um;
        let yb = ya + grid.dy_um;
        for i in 0..grid.nx {
            let xa = grid.x0_um + i as f64 * grid.dx_um;
            let xb = xa + grid.dx_um;
            let cell_area = (xb - xa) * (yb - ya);

            // substrate fraction: y < 0
            let f_sub = overlap(ya, yb, f64::NEG_INFINITY, 0.0) / (yb - ya);
            // un-etched slab band: 0 <= y < slab_top, full width
            let f_slab = overlap(ya, yb, 0.0, slab_top) / (yb - ya);
            // ridge band: slab_top <= y < film_top, inside the (possibly
            // slanted) walls
            let ridge_area = ridge_band_area(cross_section, xa, xb, ya.max(slab_top), yb.min(film_top));
            let f_ridge = ridge_area.max(0.0) / cell_area;

            let f_film = f_slab + f_ridge;
            let f_clad = (1.0 - f_sub - f_film).max(0.0);

            cells.push(EpsTensor {
                xx: f_sub * eps_sub.xx + f_film * eps_film.xx + f_clad * eps_clad.xx,
                yy: f_sub * eps_sub.yy + f_film * eps_film.yy + f_clad * eps_clad.yy,
                zz: f_sub * eps_sub.zz + f_film * eps_film.zz + f_clad * eps_clad.zz,
            });
        }
    }
    PermittivityMap::from_cells(grid.clone(), cells)
}

fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

/// Area of `[xa, xb] x [ya, yb]` lying inside the ridge walls. The width
/// clip is piecewise linear in y, so splitting at the heights where a wall
/// crosses the cell edges makes the midpoint rule exact per segment.
fn ridge_band_area(xs: &CrossSection, xa: f64, xb: f64, ya: f64, yb: f64) -> f64 {
    if yb <= ya {
        return 0.0;
    }
    let clip_width = |y: f64| -> f64 {
        let hw = xs.half_width_at(y);
        (xb.min(hw) - xa.max(-hw)).max(0.0)
    };
    if xs.sidewall_angle_deg >= 90.0 {
        return clip_width(ya) * (yb - ya);
    }
    // candidate split heights: wall position equals a cell x-edge
    let tan = xs.sidewall_angle_deg.to_radians().tan();
    let top = xs.stack.film_thickness_um;
    let mut ys = vec![ya, yb];
    for edge in [xa.abs(), xb.abs()] {
        // half_width(y) = top_width/2 + (top - y)/tan = edge
        let y = top - (edge - xs.top_width_um / 2.0) * tan;
        if y > ya && y < yb {
            ys.push(y);
        }
    }
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut area = 0.0;
    for w in ys.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        area += clip_width(mid) * (w[1] - w[0]);
    }
    area
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn db() -> MaterialDb {
        MaterialDb::builtin()
    }

    #[test]
    fn silica_index_matches_tabulated_value() {
        // independent tabulated value for fused silica at 1.55 um: 1.4440
        let m = db();
        let Material::Isotropic(silica) = m.get("silica").unwrap() else { panic!() };
        let n = silica.index(1.55, T_REF_DEFAULT_K).unwrap();
        assert!((n - 1.4440).abs() < 0.002, "n = {n}");
    }

    #[test]
    fn lithium_niobate_is_negative_uniaxial() {
        let m = db();
        let (n_o, n_e) = m.get("lithium_niobate").unwrap().indices(0.775, T_REF_DEFAULT_K).unwrap();
        assert!(n_o > n_e, "n_o = {n_o}, n_e = {n_e}");
        // 2.0 < n < 2.5 over [0.6, 1.7] um at 20 C
        for k in 0..50 {
            let wl = 0.6 + 1.1 * k as f64 / 49.0;
            let (no, ne) = m.get("lithium_niobate").unwrap().indices(wl, T_REF_DEFAULT_K).unwrap();
            assert!(no > 2.0 && no < 2.5, "n_o({wl}) = {no}");
            assert!(ne > 2.0 && ne < 2.5, "n_e({wl}) = {ne}");
        }
    }

    #[test]
    fn thermo_optic_term_vanishes_at_reference() {
        let m = db();
        let Material::Isotropic(silica) = m.get("silica").unwrap() else { panic!() };
        let a = silica.index(1.3, silica.t_ref_k).unwrap();
        let mut flat = silica.clone();
        flat.dn_dt_per_k = 0.0;
        let b = flat.index(1.3, 400.0).unwrap();
        assert_eq!(a, b);
        // and the shift is linear in (T - T_ref)
        let c = silica.index(1.3, silica.t_ref_k + 10.0).unwrap();
        assert_relative_eq!(c - a, 10.0 * silica.dn_dt_per_k, max_relative = 1e-12);
    }

    #[test]
    fn out_of_validity_names_material_and_bounds() {
        let m = db();
        let Material::Isotropic(silica) = m.get("silica").unwrap() else { panic!() };
        let err = silica.index(5.0, T_REF_DEFAULT_K).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("silica") && msg.contains("3.71"), "{msg}");
    }

    #[test]
    fn index_curves_decrease_over_nir_band() {
        // normal dispersion for every default stack material on a 50-point sweep
        let m = db();
        for id in ["silica", "ln_o", "ln_e", "air"] {
            let Material::Isotropic(model) = m.get(id).unwrap() else { panic!() };
            let mut prev = f64::INFINITY;
            for k in 0..50 {
                let wl = 0.6 + 1.1 * k as f64 / 49.0;
                let n = model.index(wl, T_REF_DEFAULT_K).unwrap();
                assert!(n < prev, "{id} not decreasing at {wl}");
                prev = n;
            }
        }
    }

    #[test]
    fn material_file_round_trip() {
        let m = db();
        let text = m.to_text();
        let back = MaterialDb::from_text(&text).unwrap();
        for id in m.ids() {
            let (a_o, a_e) = m.get(id).unwrap().indices(1.0, 300.0).unwrap();
            let (b_o, b_e) = back.get(id).unwrap().indices(1.0, 300.0).unwrap();
            assert_eq!(a_o, b_o);
            assert_eq!(a_e, b_e);
        }
    }

    #[test]
    fn stack_config_round_trip() {
        let stack = LayerStack::default();
        let text = stack.to_section_text();
        let cfg = parse_config(&text).unwrap();
        let mut r = SectionReader::new(cfg.section("stack").unwrap());
        let back = LayerStack::from_section(&mut r).unwrap();
        r.finish().unwrap();
        assert_eq!(stack, back);
    }

    #[test]
    fn stack_invariants() {
        let mut s = LayerStack::default();
        s.etch_depth_um = 0.6; // deeper than the film
        assert!(s.validate().is_err());
        s.etch_depth_um = 0.5; // full etch is allowed
        assert!(s.validate().is_ok());
        assert_eq!(s.slab_thickness_um(), 0.0);
    }

    fn device_cross_section() -> CrossSection {
        CrossSection::new(1.02, 90.0, LayerStack::default()).unwrap()
    }

    fn window(h: f64) -> Grid2D {
        Grid2D::window(1.02 / 2.0 + MIN_MARGIN_UM, -MIN_MARGIN_UM, 0.5 + MIN_MARGIN_UM, h).unwrap()
    }

    #[test]
    fn tensor_regions() {
        let xs = device_cross_section();
        let g = window(0.05);
        let map = permittivity_tensor(&db(), &xs, 1.55, T_REF_DEFAULT_K, &g).unwrap();

        // a cell deep in the box is isotropic silica
        let j_box = 0;
        let c = map.cell(g.nx / 2, j_box);
        assert_relative_eq!(c.xx, c.zz, max_relative = 1e-12);
        let n_silica = db().get("silica").unwrap().isotropic_index(1.55, T_REF_DEFAULT_K).unwrap();
        assert_relative_eq!(c.xx, n_silica * n_silica, max_relative = 1e-12);

        // a cell strictly inside the ridge carries the uniaxial film tensor
        let j_core = ((0.25 + MIN_MARGIN_UM) / g.dy_um) as usize;
        let c = map.cell(g.nx / 2, j_core);
        assert!(c.xx > c.zz, "expected n_o > n_e anisotropy, got {c:?}");
        assert_relative_eq!(c.xx, c.yy, max_relative = 1e-12);

        // far outside the ridge at core height: cladding (air)
        let c = map.cell(2, j_core);
        assert_relative_eq!(c.xx, c.zz, max_relative = 1e-12);
        assert!(c.xx < 1.01);
    }

    #[test]
    fn mixed_cell_fraction_halves_with_resolution() {
        // piecewise-constant regions: refining the grid shrinks the mixed
        // (boundary) cell fraction roughly linearly in h
        let xs = CrossSection::new(1.03, 75.0, LayerStack::default()).unwrap();
        let wl = 1.55;
        let m = db();
        let pures: Vec<EpsTensor> = {
            let n_sub = m.get("silica").unwrap().isotropic_index(wl, T_REF_DEFAULT_K).unwrap();
            let n_clad = m.get("air").unwrap().isotropic_index(wl, T_REF_DEFAULT_K).unwrap();
            let (n_o, n_e) = m.get("lithium_niobate").unwrap().indices(wl, T_REF_DEFAULT_K).unwrap();
            vec![
                EpsTensor::isotropic(n_sub),
                EpsTensor::isotropic(n_clad),
                EpsTensor { xx: n_o * n_o, yy: n_o * n_o, zz: n_e * n_e },
            ]
        };
        let frac = |h: f64| {
            let g = Grid2D::window(1.2 + MIN_MARGIN_UM, -MIN_MARGIN_UM, 0.5 + MIN_MARGIN_UM, h).unwrap();
            let map = permittivity_tensor(&m, &xs, wl, T_REF_DEFAULT_K, &g).unwrap();
            map.mixed_cell_count(&pures) as f64 / map.grid.n_cells() as f64
        };
        let f1 = frac(0.04);
        let f2 = frac(0.02);
        assert!(f2 <= 0.6 * f1, "mixed fraction {f1} -> {f2} did not shrink");
    }

    #[test]
    fn grid_too_small_is_config_error() {
        let xs = device_cross_section();
        let g = Grid2D::window(1.0, -0.5, 1.0, 0.05).unwrap();
        assert!(matches!(
            permittivity_tensor(&db(), &xs, 1.55, T_REF_DEFAULT_K, &g),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn sidewall_area_fractions_sum_to_one() {
        let xs = CrossSection::new(1.0, 60.0, LayerStack::default()).unwrap();
        let hw = xs.half_width_at(xs.stack.slab_thickness_um());
        let g = Grid2D::window(hw + MIN_MARGIN_UM, -MIN_MARGIN_UM, 0.5 + MIN_MARGIN_UM, 0.03).unwrap();
        let map = permittivity_tensor(&db(), &xs, 0.775, T_REF_DEFAULT_K, &g).unwrap();
        // every tensor component must sit between the extreme material values
        let n_max = map.max_index();
        let n_min = map.min_index();
        assert!(n_max < 2.5 && n_min >= 1.0);
    }
}
