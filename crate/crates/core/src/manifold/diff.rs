//! Central finite-difference stencils for mixed partial derivatives.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DiffScheme {
    Central,
    /// Two-step extrapolation `(4·D(h/2) − D(h))/3` on top of the central stencil.
    Richardson,
}

/// Step sizes for numerical differentiation.
///
/// Steps are relative: coordinate `i` uses `h·max(1, |θ_i|)`. Points closer
/// than `margin·max(1, |θ_i|)` to a face of the parameter box are refused so
/// that every stencil stays symmetric and inside the domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiffConfig {
    pub scheme: DiffScheme,
    /// Step for first and second order (metric) stencils.
    pub h2: f64,
    /// Step for third order (connection) stencils.
    pub h3: f64,
    pub margin: f64,
}

impl Default for DiffConfig {
    fn default() -> Self {
        Self {
            scheme: DiffScheme::Central,
            h2: 5e-4,
            h3: 2e-3,
            margin: 5e-3,
        }
    }
}

impl DiffConfig {
    /// Default steps with Richardson extrapolation; recommended for
    /// connections and the duality identity, where central third-order
    /// stencils lose accuracy near the faces of Θ.
    pub fn richardson() -> Self {
        Self {
            scheme: DiffScheme::Richardson,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.h2 > 0.0
            && self.h3 > 0.0
            && self.margin.is_finite()
            && self.h2.max(self.h3) < self.margin;
        if !ok {
            return Err(Error::Config(format!(
                "diff config needs 0 < h2, 0 < h3 and max(h2, h3) < margin; got h2={}, h3={}, margin={}",
                self.h2, self.h3, self.margin
            )));
        }
        Ok(())
    }

    /// Absolute step for a coordinate currently at `x`.
    pub fn step(h: f64, x: f64) -> f64 {
        h * x.abs().max(1.0)
    }

    /// Applies the configured scheme to a stencil evaluated at base step `h`.
    pub fn extrapolate<F>(&self, h: f64, stencil: F) -> Result<f64>
    where
        F: Fn(f64) -> Result<f64>,
    {
        match self.scheme {
            DiffScheme::Central => stencil(h),
            DiffScheme::Richardson => {
                let coarse = stencil(h)?;
                let fine = stencil(0.5 * h)?;
                Ok((4.0 * fine - coarse) / 3.0)
            }
        }
    }
}

fn stencil(order: u32) -> &'static [(f64, f64)] {
    match order {
        1 => &[(-1.0, -0.5), (1.0, 0.5)],
        2 => &[(-1.0, 1.0), (0.0, -2.0), (1.0, 1.0)],
        3 => &[(-2.0, -0.5), (-1.0, 1.0), (1.0, -1.0), (2.0, 0.5)],
        _ => unreachable!("stencil order must be 1, 2 or 3"),
    }
}

/// Mixed partial derivative of `f` at `z` by a tensor product of central
/// stencils.
///
/// `orders` lists `(coordinate, order)` pairs with distinct coordinates and
/// orders in `1..=3`; `steps[c]` is the absolute step used for coordinate `c`.
pub fn mixed_partial<F>(f: &F, z: &[f64], orders: &[(usize, u32)], steps: &[f64]) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    for (n, (c, o)) in orders.iter().enumerate() {
        if !(1..=3).contains(o) {
            return Err(Error::Domain(format!("derivative order {o} not supported")));
        }
        if orders[..n].iter().any(|(c2, _)| c2 == c) {
            return Err(Error::Domain(format!("coordinate {c} listed twice")));
        }
    }
    let mut point = z.to_vec();
    accumulate(f, &mut point, z, orders, steps, 1.0)
}

fn accumulate<F>(
    f: &F,
    point: &mut [f64],
    base: &[f64],
    orders: &[(usize, u32)],
    steps: &[f64],
    weight: f64,
) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    match orders.split_first() {
        None => Ok(weight * f(point)?),
        Some((&(c, order), rest)) => {
            let h = steps[c];
            let scale = h.powi(order as i32);
            let mut total = 0.0;
            for &(offset, w) in stencil(order) {
                if w == 0.0 {
                    continue;
                }
                point[c] = base[c] + offset * h;
                total += accumulate(f, point, base, rest, steps, weight * w / scale)?;
            }
            point[c] = base[c];
            Ok(total)
        }
    }
}
