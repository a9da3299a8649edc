//! Uniform `(t, x)` grids shared by the grid-based stages (one spatial dimension).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub dt: f64,
    pub dx: f64,
}

impl Grid {
    /// `nt` equispaced times on `[t0, t1]` and `nx` points `x_i = (i - nx/2) dx`, so `x = 0` is a node.
    pub fn new(t0: f64, t1: f64, nt: usize, dx: f64, nx: usize) -> Result<Self> {
        if nt < 8 || nx < 8 || !(t1 > t0) || !(dx > 0.0) {
            return Err(Error::InvalidInput(format!(
                "bad grid: t in [{t0}, {t1}], nt={nt}, nx={nx}, dx={dx}"
            )));
        }
        let dt = (t1 - t0) / (nt - 1) as f64;
        let t = (0..nt).map(|i| t0 + i as f64 * dt).collect();
        let x = (0..nx).map(|i| (i as f64 - (nx / 2) as f64) * dx).collect();
        Ok(Self { t, x, dt, dx })
    }

    pub fn nt(&self) -> usize {
        self.t.len()
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn len(&self) -> usize {
        self.nt() * self.nx()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major index of `(t_i, x_j)`.
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.nx() + j
    }

    /// Column of the node `x = 0`.
    pub fn x_origin(&self) -> usize {
        self.nx() / 2
    }

    /// Row whose time is nearest to `t`.
    pub fn nearest_row(&self, t: f64) -> usize {
        (((t - self.t[0]) / self.dt).round().max(0.0) as usize).min(self.nt() - 1)
    }

    /// Spatial period of the grid.
    pub fn box_width(&self) -> f64 {
        self.nx() as f64 * self.dx
    }

    pub fn compatible(&self, other: &Grid) -> Result<()> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
        if self.nt() != other.nt()
            || self.nx() != other.nx()
            || !close(self.dt, other.dt)
            || !close(self.dx, other.dx)
            || !close(self.t[0], other.t[0])
        {
            return Err(Error::IncompatibleDiscretizations {
                detail: format!(
                    "{}x{} vs {}x{}",
                    self.nt(),
                    self.nx(),
                    other.nt(),
                    other.nx()
                ),
            });
        }
        Ok(())
    }
}
