//! Manufactured solution for clamped per-subdomain verification.
//!
//! In each layer, with local coordinates `X = pi x / lx`, `Y = pi (y - y0) / h`,
//! the stream function `psi = sin^2 X sin^2 Y e^-t` gives `u = (d_y psi, -d_x psi)`,
//! together with `p = cos X cos Y e^-t` and `theta = sin X sin Y e^-t`. All
//! of them except `p` vanish on the layer boundary.

use crate::mesh::{GeometrySpec, Point, Region};
use crate::model::Forcing;

/// Constant coefficients the sources are built for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Manufactured {
    pub lx: f64,
    pub hm: f64,
    pub hf: f64,
    pub nu: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub varpi: f64,
    pub xi: f64,
}

struct Local {
    a: f64,
    b: f64,
    e: f64,
    sx: f64,
    cx: f64,
    sy: f64,
    cy: f64,
}

impl Manufactured {
    pub fn new(geom: &GeometrySpec, nu: f64, lambda: f64, kappa: f64, varpi: f64, xi: f64) -> Self {
        Manufactured { lx: geom.width, hm: geom.matrix_height, hf: geom.free_height, nu, lambda, kappa, varpi, xi }
    }

    pub fn region(&self, p: Point) -> Region {
        if p[1] < self.hm {
            Region::Matrix
        } else {
            Region::Free
        }
    }

    fn local(&self, region: Region, p: Point, t: f64) -> Local {
        use std::f64::consts::PI;
        let (y0, h) = match region {
            Region::Matrix => (0.0, self.hm),
            Region::Free => (self.hm, self.hf),
        };
        let a = PI / self.lx;
        let b = PI / h;
        let (sx, cx) = (a * p[0]).sin_cos();
        let (sy, cy) = (b * (p[1] - y0)).sin_cos();
        Local { a, b, e: (-t).exp(), sx, cx, sy, cy }
    }

    pub fn velocity(&self, region: Region, p: Point, t: f64) -> [f64; 2] {
        let l = self.local(region, p, t);
        let s2x = 2.0 * l.sx * l.cx;
        let s2y = 2.0 * l.sy * l.cy;
        [l.b * l.sx * l.sx * s2y * l.e, -l.a * s2x * l.sy * l.sy * l.e]
    }

    /// `[[d_x u1, d_y u1], [d_x u2, d_y u2]]`.
    pub fn velocity_grad(&self, region: Region, p: Point, t: f64) -> [[f64; 2]; 2] {
        let l = self.local(region, p, t);
        let s2x = 2.0 * l.sx * l.cx;
        let s2y = 2.0 * l.sy * l.cy;
        let c2x = l.cx * l.cx - l.sx * l.sx;
        let c2y = l.cy * l.cy - l.sy * l.sy;
        let (a, b, e) = (l.a, l.b, l.e);
        [
            [a * b * s2x * s2y * e, 2.0 * b * b * l.sx * l.sx * c2y * e],
            [-2.0 * a * a * c2x * l.sy * l.sy * e, -a * b * s2x * s2y * e],
        ]
    }

    pub fn velocity_laplacian(&self, region: Region, p: Point, t: f64) -> [f64; 2] {
        let l = self.local(region, p, t);
        let s2x = 2.0 * l.sx * l.cx;
        let s2y = 2.0 * l.sy * l.cy;
        let c2x = l.cx * l.cx - l.sx * l.sx;
        let c2y = l.cy * l.cy - l.sy * l.sy;
        let (a, b, e) = (l.a, l.b, l.e);
        let (a2, b2) = (a * a, b * b);
        [
            b * e * (2.0 * a2 * c2x * s2y - 4.0 * b2 * l.sx * l.sx * s2y),
            a * e * (4.0 * a2 * s2x * l.sy * l.sy - 2.0 * b2 * s2x * c2y),
        ]
    }

    pub fn pressure(&self, region: Region, p: Point, t: f64) -> f64 {
        let l = self.local(region, p, t);
        l.cx * l.cy * l.e
    }

    pub fn pressure_grad(&self, region: Region, p: Point, t: f64) -> [f64; 2] {
        let l = self.local(region, p, t);
        [-l.a * l.sx * l.cy * l.e, -l.b * l.cx * l.sy * l.e]
    }

    pub fn theta(&self, p: Point, t: f64) -> f64 {
        let l = self.local(self.region(p), p, t);
        l.sx * l.sy * l.e
    }

    pub fn theta_grad(&self, p: Point, t: f64) -> [f64; 2] {
        let l = self.local(self.region(p), p, t);
        [l.a * l.cx * l.sy * l.e, l.b * l.sx * l.cy * l.e]
    }

    pub fn theta_laplacian(&self, p: Point, t: f64) -> f64 {
        let l = self.local(self.region(p), p, t);
        -(l.a * l.a + l.b * l.b) * l.sx * l.sy * l.e
    }
}

impl Forcing for Manufactured {
    fn momentum_free(&self, p: Point, t: f64) -> [f64; 2] {
        let r = Region::Free;
        let u = self.velocity(r, p, t);
        let g = self.velocity_grad(r, p, t);
        let lap = self.velocity_laplacian(r, p, t);
        let gp = self.pressure_grad(r, p, t);
        let th = self.theta(p, t);
        let mut f = [0.0; 2];
        for c in 0..2 {
            let conv = u[0] * g[c][0] + u[1] * g[c][1];
            f[c] = -u[c] + conv - self.nu * lap[c] + gp[c];
        }
        f[1] -= th;
        f
    }

    fn momentum_matrix(&self, p: Point, t: f64) -> [f64; 2] {
        let r = Region::Matrix;
        let u = self.velocity(r, p, t);
        let lap = self.velocity_laplacian(r, p, t);
        let gp = self.pressure_grad(r, p, t);
        let th = self.theta(p, t);
        let mut f = [0.0; 2];
        for c in 0..2 {
            f[c] = -self.varpi * u[c] + self.nu / self.kappa * u[c] - self.xi * lap[c] + gp[c];
        }
        f[1] -= th;
        f
    }

    fn heat(&self, p: Point, t: f64) -> f64 {
        let u = self.velocity(self.region(p), p, t);
        let g = self.theta_grad(p, t);
        -self.theta(p, t) + u[0] * g[0] + u[1] * g[1] - self.lambda * self.theta_laplacian(p, t)
    }
}
