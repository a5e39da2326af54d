//! The periodic kernel `K(x) = Σ_k |x + k e1|^{-(n+s)}`, its capped version
//! `h_M = min(M, K)`, and the angular kernel used by the cylindrical
//! reduction.

use statrs::function::beta::{beta, beta_reg};

use crate::quad;
use crate::special::sphere_area;
use crate::{Error, Result};

/// Windows larger than this are refused: the image series converges too
/// slowly for the requested tolerance.
const MAX_WINDOW: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    /// Ambient dimension, `n >= 2`.
    pub n: usize,
    /// Fractional order in `(0, 1)`.
    pub s: f64,
    /// Minimal half-width of the explicitly summed image window.
    pub k_max: usize,
    /// Target bound on the neglected tail of the image series.
    pub tail_tol: f64,
}

impl KernelParams {
    pub fn new(n: usize, s: f64) -> Result<Self> {
        let p = Self {
            n,
            s,
            k_max: 12,
            tail_tol: 1e-10,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_window(mut self, k_max: usize, tail_tol: f64) -> Result<Self> {
        self.k_max = k_max;
        self.tail_tol = tail_tol;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParams(format!("dimension n = {} < 2", self.n)));
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::InvalidParams(format!("order s = {} outside (0, 1)", self.s)));
        }
        if self.k_max < 1 {
            return Err(Error::InvalidParams("k_max must be at least 1".into()));
        }
        if !(self.tail_tol > 0.0) {
            return Err(Error::InvalidParams("tail_tol must be positive".into()));
        }
        Ok(())
    }

    /// Kernel exponent `n + s`.
    pub fn exponent(&self) -> f64 {
        self.n as f64 + self.s
    }

    /// Half exponent `p = (n + s) / 2`.
    pub fn half_exponent(&self) -> f64 {
        0.5 * self.exponent()
    }

    /// Bound on the error of replacing `Σ_{|k| > window} |x + k e1|^{-(n+s)}`
    /// by its midpoint integral, for `|x1| <= 1/2` and `|x'|^2 = rho2`.
    pub fn tail_bound(&self, window: usize, x1: f64, rho2: f64) -> f64 {
        let p = self.half_exponent();
        let b = window as f64 + 0.5 - x1.abs();
        let rho = rho2.sqrt();
        let head = (b * b + rho2).powf(-p - 1.0);
        let rest = 2f64.powf(p + 1.0) * (b + rho).powf(-2.0 * p - 1.0) / (2.0 * p + 1.0);
        2.0 * p * (2.0 * p + 3.0) / 12.0 * (head + rest)
    }

    fn window_for(&self, x1: f64, rho2: f64) -> Result<usize> {
        let mut k = self.k_max;
        while self.tail_bound(k, x1, rho2) > self.tail_tol {
            k *= 2;
            if k > MAX_WINDOW {
                return Err(Error::NonConvergence(format!(
                    "image window above {MAX_WINDOW} needed for tail_tol {:.1e}",
                    self.tail_tol
                )));
            }
        }
        Ok(k)
    }
}

/// `∫_{v0}^∞ (v^2 + rho2)^{-p} dv` for `v0 > 0`, `p > 1/2`.
fn image_tail_integral(v0: f64, rho2: f64, p: f64) -> f64 {
    let w = rho2 / (v0 * v0 + rho2);
    if w < 1e-12 {
        let lead = v0.powf(1.0 - 2.0 * p) / (2.0 * p - 1.0);
        return lead - p * rho2 * v0.powf(-1.0 - 2.0 * p) / (2.0 * p + 1.0);
    }
    let a = p - 0.5;
    0.5 * rho2.powf(-a) * beta(a, 0.5) * beta_reg(a, 0.5, w)
}

/// Kernel value with the bound on the neglected series tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: f64,
    pub tail_bound: f64,
    pub window: usize,
}

fn reduce_period(x1: f64) -> f64 {
    x1 - x1.round()
}

fn transverse_sq(x: &[f64]) -> f64 {
    x[1..].iter().map(|v| v * v).sum()
}

fn check_point(x: &[f64], params: &KernelParams) -> Result<()> {
    params.validate()?;
    if x.len() != params.n {
        return Err(Error::InvalidParams(format!(
            "point has {} coordinates, expected n = {}",
            x.len(),
            params.n
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParams("non-finite coordinate".into()));
    }
    Ok(())
}

/// `K(x)` summed over an adaptive image window, with the remaining images
/// replaced by their midpoint integral; the result is within the returned
/// tail bound of the full series.
pub fn periodic_kernel_bounded(x: &[f64], params: &KernelParams) -> Result<KernelValue> {
    check_point(x, params)?;
    let t = reduce_period(x[0]);
    let rho2 = transverse_sq(x);
    if rho2 == 0.0 && t == 0.0 {
        return Err(Error::SingularPoint);
    }
    let window = params.window_for(t, rho2)?;
    let p = params.half_exponent();
    // far images first so the small terms are not swamped
    let mut acc = 0.0;
    for k in (1..=window).rev() {
        let kf = k as f64;
        acc += ((t + kf).powi(2) + rho2).powf(-p) + ((t - kf).powi(2) + rho2).powf(-p);
    }
    acc += (t * t + rho2).powf(-p);
    let edge = window as f64 + 0.5;
    acc += image_tail_integral(edge + t, rho2, p) + image_tail_integral(edge - t, rho2, p);
    Ok(KernelValue {
        value: acc,
        tail_bound: params.tail_bound(window, t, rho2),
        window,
    })
}

/// `K(x)`; errors at lattice points `x ∈ Z × {0}`.
pub fn periodic_kernel(x: &[f64], params: &KernelParams) -> Result<f64> {
    periodic_kernel_bounded(x, params).map(|v| v.value)
}

/// `h_M(x) = min(M, K(x))`, defined everywhere (equal to `M` on the lattice).
pub fn capped_kernel(x: &[f64], cap: f64, params: &KernelParams) -> Result<f64> {
    check_point(x, params)?;
    if !(cap > 0.0) || !cap.is_finite() {
        return Err(Error::InvalidParams(format!("cap M = {cap} must be positive and finite")));
    }
    let t = reduce_period(x[0]);
    let rho2 = transverse_sq(x);
    if rho2 == 0.0 && t == 0.0 {
        return Ok(cap);
    }
    // the nearest image alone already exceeds the cap
    if (t * t + rho2).powf(-params.half_exponent()) >= cap {
        return Ok(cap);
    }
    Ok(periodic_kernel(x, params)?.min(cap))
}

/// `A(a, ρ, r) = ∫_{S^{n-2}} (a^2 + ρ^2 + r^2 - 2 ρ r ω_2)^{-(n+s)/2} dω`.
pub fn angular_kernel(a: f64, rho: f64, r: f64, params: &KernelParams) -> Result<f64> {
    params.validate()?;
    if a < 0.0 || rho < 0.0 || r < 0.0 {
        return Err(Error::InvalidParams("angular kernel arguments must be nonnegative".into()));
    }
    let base = a * a + (rho - r) * (rho - r);
    if base == 0.0 {
        return Err(Error::SingularConfiguration(format!(
            "a = 0 and rho = r = {rho}"
        )));
    }
    let p = params.half_exponent();
    let n = params.n;
    if n == 2 {
        let plus = a * a + (rho + r) * (rho + r);
        return Ok(base.powf(-p) + plus.powf(-p));
    }
    let cross = 4.0 * rho * r;
    let weight_power = (n - 3) as i32;
    let integrand = |phi: f64| {
        let h = (0.5 * phi).sin();
        phi.sin().powi(weight_power) * (base + cross * h * h).powf(-p)
    };
    // split where the integrand peak (width ~ sqrt(base / ρr)) ends
    let peak = if cross > 0.0 {
        (base / (0.25 * cross)).sqrt().min(std::f64::consts::PI)
    } else {
        std::f64::consts::PI
    };
    let mut total = quad::Estimate::default();
    let mut lo = 0.0;
    let mut hi = peak;
    loop {
        total += quad::adaptive(lo, hi, 0.0, 1e-11, 400, integrand)?;
        if hi >= std::f64::consts::PI {
            break;
        }
        lo = hi;
        hi = (hi * 8.0).min(std::f64::consts::PI);
    }
    Ok(sphere_area(n - 3) * total.value)
}
