//! Special functions and (n-1)-dimensional ball geometry.

use std::f64::consts::PI;

use statrs::function::beta::{beta, beta_reg};
use statrs::function::gamma::ln_gamma;

use crate::quad;

/// Surface measure of the unit sphere `S^k ⊂ R^{k+1}`.
pub fn sphere_area(k: usize) -> f64 {
    (k as f64 + 1.0) * ball_volume(k + 1)
}

/// Volume of the unit ball of `R^m`.
pub fn ball_volume(m: usize) -> f64 {
    match m {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / m as f64 * ball_volume(m - 2),
    }
}

/// `∫_R (t^2 + 1)^{-(n+s)/2} dt`, the zero Fourier mode of the image sum
/// at unit transverse distance.
pub fn far_field_constant(n: usize, s: f64) -> f64 {
    let p = 0.5 * (n as f64 + s);
    (0.5 * PI.ln() + ln_gamma(p - 0.5) - ln_gamma(p)).exp()
}

/// `∫_{R^{m}} (1 + |z|^2)^{-p} dz`.
pub fn transverse_mass(m: usize, p: f64) -> f64 {
    let h = 0.5 * m as f64;
    (h * PI.ln() + ln_gamma(p - h) - ln_gamma(p)).exp()
}

/// `B_x(a, b) / x^a`, accurate for small `x`.
pub(crate) fn incomplete_beta_scaled(a: f64, b: f64, x: f64) -> f64 {
    if x < 1e-8 {
        let t1 = (1.0 - b) * x / (a + 1.0);
        let t2 = (1.0 - b) * (2.0 - b) * x * x / (2.0 * (a + 2.0));
        1.0 / a + t1 + t2
    } else {
        beta_reg(a, b, x) * beta(a, b) / x.powf(a)
    }
}

/// Unregularized incomplete beta function.
pub fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        beta(a, b)
    } else {
        beta_reg(a, b, x) * beta(a, b)
    }
}

/// `∫_{t0}^∞ (t^2 + u^2)^{-p} dt` for `t0 > 0`, `p > 1/2`.
pub fn power_tail(t0: f64, u: f64, p: f64) -> f64 {
    let r2 = t0 * t0 + u * u;
    let x = u * u / r2;
    0.5 * r2.powf(0.5 - p) * incomplete_beta_scaled(p - 0.5, 0.5, x)
}

/// `∫_0^t (τ^2 + u^2)^{-p} dτ` for `u > 0`.
pub fn power_head(t: f64, u: f64, p: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if u >= t {
        quad::legendre(20).integrate(0.0, t, |tau| (tau * tau + u * u).powf(-p))
    } else {
        0.5 * u.powf(1.0 - 2.0 * p) * beta(0.5, p - 0.5) - power_tail(t, u, p)
    }
}

/// Geometry of pairs of concentric-axis balls in `R^m` (`m = n - 1`).
///
/// For balls `B_R` centred at the origin and `B_Q` centred at distance `u`,
/// the "outside" weight is `W(u; R, Q) = |B_R \ B_Q(u)|` and the overlap is
/// `V = |B_R ∩ B_Q(u)|`.
#[derive(Debug, Clone, Copy)]
pub struct BallGeometry {
    pub m: usize,
    ball: f64,
    sphere: f64,
    slab_coef: f64,
    beta_total: f64,
}

impl BallGeometry {
    pub fn new(m: usize) -> Self {
        assert!(m >= 1);
        let mf = m as f64;
        let slab_coef = ball_volume(m - 1) * 0.5;
        let beta_total = beta(0.5, 0.5 * (mf + 1.0));
        Self {
            m,
            ball: ball_volume(m),
            sphere: sphere_area(m - 1),
            slab_coef,
            beta_total,
        }
    }

    pub fn ball_volume(&self, r: f64) -> f64 {
        self.ball * r.powi(self.m as i32)
    }

    pub fn sphere_area(&self, r: f64) -> f64 {
        if self.m == 1 {
            2.0
        } else {
            self.sphere * r.powi(self.m as i32 - 1)
        }
    }

    /// Signed volume of `{y ∈ B_r : 0 <= y_1 <= x}` (odd in `x`).
    pub fn slab(&self, r: f64, x: f64) -> f64 {
        let xc = x.clamp(-r, r);
        match self.m {
            1 => xc,
            2 => xc * (r * r - xc * xc).max(0.0).sqrt() + r * r * (xc / r).asin(),
            m => {
                let z = (xc / r).powi(2);
                let val = if z >= 1.0 {
                    self.beta_total
                } else {
                    beta_reg(0.5, 0.5 * (m as f64 + 1.0), z) * self.beta_total
                };
                xc.signum() * self.slab_coef * r.powi(m as i32) * val
            }
        }
    }

    /// Odd sphere fraction `sign(c) I_{c^2}(1/2, (m-1)/2)`: the sphere cap
    /// `{cos φ >= c}` has relative measure `(1 - h(c)) / 2`.
    fn cap_odd(&self, c: f64) -> f64 {
        let c = c.clamp(-1.0, 1.0);
        match self.m {
            1 => 0.0,
            2 => 2.0 * c.asin() / PI,
            3 => c,
            m => c.signum() * beta_reg(0.5, 0.5 * (m as f64 - 1.0), c * c),
        }
    }

    fn lens_plane(u: f64, r: f64, q: f64) -> f64 {
        (u * u + (r - q) * (r + q)) / (2.0 * u)
    }

    /// `W(u; r, q)`.
    pub fn outside(&self, u: f64, r: f64, q: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        if u >= r + q {
            return self.ball_volume(r);
        }
        if u <= (r - q).abs() {
            return if r <= q {
                0.0
            } else {
                self.ball_volume(r) - self.ball_volume(q)
            };
        }
        let t0 = Self::lens_plane(u, r, q);
        0.5 * (self.ball_volume(r) - self.ball_volume(q)) + self.slab(r, t0) + self.slab(q, u - t0)
    }

    /// `V(u; r, q) = |B_r ∩ B_q(u)|`.
    pub fn overlap(&self, u: f64, r: f64, q: f64) -> f64 {
        if r <= 0.0 || q <= 0.0 || u >= r + q {
            return 0.0;
        }
        if u <= (r - q).abs() {
            return self.ball_volume(r.min(q));
        }
        let t0 = Self::lens_plane(u, r, q);
        0.5 * (self.ball_volume(r) + self.ball_volume(q)) - self.slab(r, t0) - self.slab(q, u - t0)
    }

    /// `∂W/∂r`.
    pub fn outside_dr(&self, u: f64, r: f64, q: f64) -> f64 {
        if u >= r + q {
            return self.sphere_area(r);
        }
        if u <= (r - q).abs() {
            return if r <= q { 0.0 } else { self.sphere_area(r) };
        }
        let c = Self::lens_plane(u, r, q) / r;
        self.sphere_area(r) * 0.5 * (1.0 + self.cap_odd(c))
    }

    /// `∂W/∂q`.
    pub fn outside_dq(&self, u: f64, r: f64, q: f64) -> f64 {
        if u >= r + q {
            return 0.0;
        }
        if u <= (r - q).abs() {
            return if r <= q { 0.0 } else { -self.sphere_area(q) };
        }
        let c = (u - Self::lens_plane(u, r, q)) / q;
        -self.sphere_area(q) * 0.5 * (1.0 - self.cap_odd(c))
    }

    /// `d/dr W(u; r, r)`: both balls grow together.
    pub fn outside_d_equal(&self, u: f64, r: f64) -> f64 {
        if u >= 2.0 * r {
            return self.sphere_area(r);
        }
        self.sphere_area(r) * self.cap_odd(0.5 * u / r)
    }

    /// `∂V/∂r`.
    pub fn overlap_dr(&self, u: f64, r: f64, q: f64) -> f64 {
        self.sphere_area(r) - self.outside_dr(u, r, q)
    }

    /// `∂V/∂q`; by symmetry of `V` in its radii.
    pub fn overlap_dq(&self, u: f64, r: f64, q: f64) -> f64 {
        self.overlap_dr(u, q, r)
    }
}
