//! Uniform 2-D grids for cross-section sampling.

use crate::{Error, Result};

/// Uniform rectangular grid over a waveguide cross-section window.
///
/// Nodes sit at cell centers: the i-th node is at `x0 + (i + 1/2) dx`. The
/// window spans `[x0, x0 + nx*dx] x [y0, y0 + ny*dy]` and its edges act as
/// perfect electric conductor walls in the mode solver.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub dx_um: f64,
    pub dy_um: f64,
    pub x0_um: f64,
    pub y0_um: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, dx_um: f64, dy_um: f64, x0_um: f64, y0_um: f64) -> Result<Self> {
        if nx < 16 || ny < 16 {
            return Err(Error::Config(format!(
                "grid must have at least 16 cells per axis, got {nx} x {ny}"
            )));
        }
        if !(dx_um > 0.0) || !(dy_um > 0.0) || !dx_um.is_finite() || !dy_um.is_finite() {
            return Err(Error::Config(format!(
                "grid spacings must be positive and finite, got dx={dx_um}, dy={dy_um}"
            )));
        }
        if !x0_um.is_finite() || !y0_um.is_finite() {
            return Err(Error::Config("grid origin must be finite".into()));
        }
        Ok(Self { nx, ny, dx_um, dy_um, x0_um, y0_um })
    }

    /// Symmetric window `[-half_width, half_width] x [y_lo, y_hi]` with square
    /// spacing `h`, rounded outward to whole cells.
    pub fn window(half_width_um: f64, y_lo_um: f64, y_hi_um: f64, h_um: f64) -> Result<Self> {
        if !(h_um > 0.0) {
            return Err(Error::Config(format!("grid spacing must be positive, got {h_um}")));
        }
        let nx = (2.0 * half_width_um / h_um).ceil().max(1.0) as usize;
        let ny = ((y_hi_um - y_lo_um) / h_um).ceil().max(1.0) as usize;
        let x0 = -(nx as f64) * h_um / 2.0;
        Grid2D::new(nx, ny, h_um, h_um, x0, y_lo_um)
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x0_um + (i as f64 + 0.5) * self.dx_um
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.y0_um + (j as f64 + 0.5) * self.dy_um
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn x_max(&self) -> f64 {
        self.x0_um + self.nx as f64 * self.dx_um
    }

    pub fn y_max(&self) -> f64 {
        self.y0_um + self.ny as f64 * self.dy_um
    }

    pub fn cell_area_um2(&self) -> f64 {
        self.dx_um * self.dy_um
    }
}
