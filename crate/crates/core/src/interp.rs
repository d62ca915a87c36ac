//! Monotone cubic (PCHIP) interpolation.
//!
//! Used for dispersion-curve interpolation where overshoot would create
//! spurious crossings; the Fritsch-Carlson slope limiter keeps the
//! interpolant monotone wherever the data are.

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Config("interpolation arrays must have equal length".into()));
        }
        if x.len() < 2 {
            return Err(Error::Config("interpolation needs at least two points".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("interpolation abscissae must be strictly increasing".into()));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Config("interpolation data must be finite".into()));
        }

        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();

        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] <= 0.0 {
                d[i] = 0.0;
            } else {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        d[0] = endpoint_slope(h[0], if n > 2 { h[1] } else { h[0] }, delta[0], *delta.get(1).unwrap_or(&delta[0]));
        d[n - 1] = endpoint_slope(
            h[n - 2],
            if n > 2 { h[n - 3] } else { h[n - 2] },
            delta[n - 2],
            if n > 2 { delta[n - 3] } else { delta[n - 2] },
        );

        Ok(Self { x: x.to_vec(), y: y.to_vec(), d })
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }

    /// Evaluates the interpolant; the argument is clamped to the knot range.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.x.len();
        let x = x.clamp(self.x[0], self.x[n - 1]);
        // binary search for the interval
        let k = match self.x.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        let h = self.x[k + 1] - self.x[k];
        let t = (x - self.x[k]) / h;
        let (y0, y1) = (self.y[k], self.y[k + 1]);
        let (d0, d1) = (self.d[k], self.d[k + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
    }
}

/// Three-point one-sided endpoint slope with the standard monotonicity clamp.
fn endpoint_slope(h0: f64, h1: f64, delta0: f64, delta1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * delta0 - h0 * delta1) / (h0 + h1);
    if d * delta0 <= 0.0 {
        0.0
    } else if delta0 * delta1 < 0.0 && d.abs() > 3.0 * delta0.abs() {
        3.0 * delta0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_linear_data_exactly() {
        let x: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        let p = Pchip::new(&x, &y).unwrap();
        for i in 0..70 {
            let xv = i as f64 * 0.1;
            assert!((p.eval(xv) - (3.0 * xv - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolant_is_monotone_for_monotone_data() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y = [0.0, 0.1, 0.9, 0.95, 2.0];
        let p = Pchip::new(&x, &y).unwrap();
        let mut prev = p.eval(0.0);
        for i in 1..=400 {
            let v = p.eval(i as f64 * 0.01);
            assert!(v >= prev - 1e-12, "overshoot at {i}");
            prev = v;
        }
        // no excursion beyond the data range
        assert!(prev <= 2.0 + 1e-12);
    }

    #[test]
    fn hits_knots() {
        let x = [0.0, 0.5, 1.7, 2.0];
        let y = [1.0, -2.0, 0.5, 0.4];
        let p = Pchip::new(&x, &y).unwrap();
        for (xv, yv) in x.iter().zip(y.iter()) {
            assert!((p.eval(*xv) - yv).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Pchip::new(&[0.0, 0.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(Pchip::new(&[0.0], &[1.0]).is_err());
        assert!(Pchip::new(&[0.0, 1.0], &[1.0, f64::NAN]).is_err());
    }
}
