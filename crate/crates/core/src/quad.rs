//! One-dimensional quadrature rules.
//!
//! Fixed rules (Gauss-Legendre, Gauss-Jacobi, nested tanh-sinh, Gauss-Kronrod
//! 7/15) are used where the integrand must depend smoothly on parameters,
//! the adaptive Gauss-Kronrod driver where robustness matters more.

use std::collections::BinaryHeap;
use std::sync::OnceLock;

use crate::{Error, Result};

/// A quadrature estimate together with an error estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn new(value: f64, error: f64) -> Self {
        Self { value, error }
    }
}

impl std::ops::Add for Estimate {
    type Output = Estimate;
    fn add(self, rhs: Estimate) -> Estimate {
        Estimate::new(self.value + rhs.value, self.error + rhs.error)
    }
}

impl std::ops::AddAssign for Estimate {
    fn add_assign(&mut self, rhs: Estimate) {
        self.value += rhs.value;
        self.error += rhs.error;
    }
}

impl std::ops::Mul<f64> for Estimate {
    type Output = Estimate;
    fn mul(self, rhs: f64) -> Estimate {
        Estimate::new(self.value * rhs, self.error * rhs.abs())
    }
}

/// Gauss rule on `[-1, 1]` for the weight `(1-x)^alpha (1+x)^beta`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Golub-Welsch construction from the Jacobi three-term recurrence.
    pub fn jacobi(n: usize, alpha: f64, beta: f64) -> Self {
        assert!(n >= 1 && alpha > -1.0 && beta > -1.0);
        let ab = alpha + beta;
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n];
        for (k, d) in diag.iter_mut().enumerate() {
            let kf = k as f64;
            let denom = (2.0 * kf + ab) * (2.0 * kf + ab + 2.0);
            *d = if k == 0 {
                (beta - alpha) / (ab + 2.0)
            } else {
                (beta * beta - alpha * alpha) / denom
            };
        }
        for k in 1..n {
            let kf = k as f64;
            let t = 2.0 * kf + ab;
            let num = 4.0 * kf * (kf + alpha) * (kf + beta) * (kf + ab);
            let den = t * t * (t + 1.0) * (t - 1.0);
            off[k - 1] = (num / den).sqrt();
        }
        let mu0 = ((ab + 1.0) * std::f64::consts::LN_2 + ln_gamma(alpha + 1.0)
            + ln_gamma(beta + 1.0)
            - ln_gamma(ab + 2.0))
        .exp();
        let first = symmetric_tridiagonal_eigen(&mut diag, &mut off);
        let mut pairs: Vec<(f64, f64)> = diag
            .iter()
            .zip(first.iter())
            .map(|(&x, &v)| (x, mu0 * v * v))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn legendre(n: usize) -> Self {
        Self::jacobi(n, 0.0, 0.0)
    }

    /// `∫_a^b f` for a smooth integrand.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// `∫_0^a u^{-s} g(u) du` for a rule built with `beta = -s`, `alpha = 0`.
    pub fn integrate_left_power<F: FnMut(f64) -> f64>(&self, a: f64, s: f64, mut g: F) -> f64 {
        let half = 0.5 * a;
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * g(half * (1.0 + x));
        }
        acc * half.powf(1.0 - s)
    }
}

fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Implicit QL on a symmetric tridiagonal matrix. On return `diag` holds the
/// eigenvalues; the returned vector holds the first component of each
/// normalized eigenvector.
fn symmetric_tridiagonal_eigen(diag: &mut [f64], off: &mut [f64]) -> Vec<f64> {
    let n = diag.len();
    let mut z = vec![vec![0.0; n]; n];
    for (i, row) in z.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    if n > 0 {
        off[n - 1] = 0.0;
    }
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 100, "tridiagonal eigen solver did not converge");
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                for row in z.iter_mut() {
                    let t = row[i + 1];
                    row[i + 1] = s * row[i] + c * t;
                    row[i] = c * row[i] - s * t;
                }
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    z[0].clone()
}

/// Cached Gauss-Legendre rule of the given order.
pub fn legendre(n: usize) -> &'static GaussRule {
    static CACHE: OnceLock<Vec<GaussRule>> = OnceLock::new();
    let rules = CACHE.get_or_init(|| (0..=64).map(|k| GaussRule::legendre(k.max(1))).collect());
    &rules[n]
}

/// Tanh-sinh rule on `[-1, 1]` with a nested half-resolution companion for
/// error estimation. Nodes are stored through their distance to the nearest
/// endpoint so that endpoint singularities are sampled accurately.
#[derive(Debug, Clone)]
pub struct TanhSinh {
    // (distance to nearest endpoint, weight, belongs to the coarse level)
    nodes: Vec<(f64, f64, bool)>,
    centre_weight: f64,
}

impl TanhSinh {
    pub fn new(step: f64) -> Self {
        let half_pi = std::f64::consts::FRAC_PI_2;
        let mut nodes = Vec::new();
        let mut k = 1usize;
        loop {
            let t = k as f64 * step;
            let y = half_pi * t.sinh();
            let e = (-2.0 * y).exp();
            let comp = 2.0 * e / (1.0 + e);
            let cy = y.cosh();
            let w = step * half_pi * t.cosh() / (cy * cy);
            if comp < 1e-300 || w < 1e-300 {
                break;
            }
            nodes.push((comp, w, k % 2 == 0));
            k += 1;
        }
        Self {
            nodes,
            centre_weight: step * half_pi,
        }
    }

    pub fn standard() -> &'static TanhSinh {
        static RULE: OnceLock<TanhSinh> = OnceLock::new();
        RULE.get_or_init(|| TanhSinh::new(1.0 / 8.0))
    }

    /// `∫_a^b f` tolerating integrable algebraic singularities at both ends.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> Estimate {
        let half = 0.5 * (b - a);
        if half == 0.0 {
            return Estimate::default();
        }
        let fc = f(0.5 * (a + b));
        let mut fine = self.centre_weight * fc;
        let mut coarse = 2.0 * self.centre_weight * fc;
        for &(comp, w, in_coarse) in &self.nodes {
            let left = a + half * comp;
            let right = b - half * comp;
            let mut v = 0.0;
            if left > a {
                v += f(left);
            }
            if right < b {
                v += f(right);
            }
            fine += w * v;
            if in_coarse {
                coarse += 2.0 * w * v;
            }
        }
        let fine = fine * half;
        let coarse = coarse * half;
        Estimate::new(fine, nested_error(fine, coarse))
    }
}

/// Error of the fine level given the coarse one, assuming quadratic
/// convergence once the two agree to a few digits.
fn nested_error(fine: f64, coarse: f64) -> f64 {
    let d = (fine - coarse).abs();
    let scale = fine.abs().max(f64::MIN_POSITIVE);
    if d < 1e-3 * scale {
        (10.0 * d * d / scale).max(4.0 * f64::EPSILON * scale)
    } else {
        d
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Single Gauss-Kronrod 7/15 panel.
pub fn gk15<F: FnMut(f64) -> f64>(a: f64, b: f64, mut f: F) -> Estimate {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let v = f(centre - dx) + f(centre + dx);
        kron += WGK[j] * v;
        if j % 2 == 1 {
            gauss += WG[j / 2] * v;
        }
    }
    let kron = kron * half;
    let gauss = gauss * half;
    Estimate::new(kron, nested_error(kron, gauss))
}

#[derive(Debug)]
struct Panel {
    a: f64,
    b: f64,
    est: Estimate,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.est.error == other.est.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.est.error.total_cmp(&other.est.error)
    }
}

/// Globally adaptive Gauss-Kronrod integration.
pub fn adaptive<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
    mut f: F,
) -> Result<Estimate> {
    let first = gk15(a, b, &mut f);
    let mut total = first;
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, est: first });
    while total.error > abs_tol.max(rel_tol * total.value.abs()).max(f64::MIN_POSITIVE) {
        if heap.len() >= max_panels {
            return Err(Error::NonConvergence(format!(
                "adaptive quadrature on [{a}, {b}] stalled at error {:.3e}",
                total.error
            )));
        }
        let worst = heap.pop().expect("heap holds at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        let left = gk15(worst.a, mid, &mut f);
        let right = gk15(mid, worst.b, &mut f);
        total.value += left.value + right.value - worst.est.value;
        total.error += left.error + right.error - worst.est.error;
        heap.push(Panel { a: worst.a, b: mid, est: left });
        heap.push(Panel { a: mid, b: worst.b, est: right });
    }
    // Re-sum to shed accumulated rounding in the running totals.
    let value = heap.iter().map(|p| p.est.value).sum();
    let error = heap.iter().map(|p| p.est.error).sum();
    Ok(Estimate::new(value, error))
}
