//! Slab discretization of the image sums.
//!
//! A profile is piecewise constant on `2m` cells of width `h = 1/(2m)`. For
//! two cells at offset `l` the `x1`-integrals collapse to the tent-weighted
//! kernel `Q(lh, u) = ∫_{-h}^{h} (h - |τ|) ((lh + τ)^2 + u^2)^{-p} dτ`, with
//! `u` the transverse distance and `p = (n + s)/2`. The terms with `|l| >= 2`
//! are smooth in `u` and are tabulated per offset class on Chebyshev panels.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use statrs::function::beta::beta;

use crate::quad;
use crate::special::{
    far_field_constant, incomplete_beta_scaled, power_head, power_tail, sphere_area, BallGeometry,
};

pub(crate) const NODES: usize = 25;

/// Which images of the partner cell interact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum Images {
    /// Every translate by an integer (the periodic kernel).
    Periodic,
    /// Only the cell itself (the free-space kernel).
    Free,
    /// Every translate except the cell itself.
    NonZero,
}

#[derive(Debug, Clone)]
pub(crate) struct Grid {
    pub m_d: usize,
    pub s: f64,
    pub p: f64,
    /// Cells on `[0, 1/2]`; the period holds `2 * half_cells`.
    pub half_cells: usize,
    pub h: f64,
    pub window: usize,
    pub r_max: f64,
    pub geo: BallGeometry,
    pub beta_half: f64,
    pub far: f64,
    pub sphere: f64,
}

fn tent_nodes(l: i64) -> usize {
    match l.unsigned_abs() {
        0..=3 => 10,
        4..=8 => 6,
        _ => 4,
    }
}

impl Grid {
    pub fn new(n: usize, s: f64, half_cells: usize, window: usize, r_max: f64) -> Self {
        let p = 0.5 * (n as f64 + s);
        Self {
            m_d: n - 1,
            s,
            p,
            half_cells,
            h: 0.5 / half_cells as f64,
            window,
            r_max,
            geo: BallGeometry::new(n - 1),
            beta_half: beta(0.5, p - 0.5),
            far: far_field_constant(n, s),
            sphere: sphere_area(n - 2),
        }
    }

    pub fn period(&self) -> i64 {
        2 * self.half_cells as i64
    }

    pub fn psi(&self, t: f64, u: f64) -> f64 {
        (t * t + u * u).powf(-self.p)
    }

    /// `∫_{-h}^{h} (h - |τ|) f(lh + τ) dτ`.
    pub fn tent<F: Fn(f64) -> f64>(&self, l: i64, f: F) -> f64 {
        let rule = quad::legendre(tent_nodes(l));
        let h = self.h;
        let c = l as f64 * h;
        rule.integrate(-h, 0.0, |t| (h + t) * f(c + t)) + rule.integrate(0.0, h, |t| (h - t) * f(c + t))
    }

    fn j_term(&self, u: f64) -> f64 {
        let q = 1.0 - self.p;
        ((self.h * self.h + u * u).powf(q) - u.powf(2.0 * q)) / (2.0 * q)
    }

    fn second_half(&self, u: f64) -> f64 {
        let h = self.h;
        quad::legendre(10).integrate(h, 2.0 * h, |t| (2.0 * h - t) * self.psi(t, u))
    }

    /// `Q(lh, u)` for any offset; closed forms for the singular offsets.
    pub fn q(&self, l: i64, u: f64) -> f64 {
        if l.abs() <= 1 && u <= 2.0 * self.h {
            if l == 0 {
                2.0 * self.h * power_head(self.h, u, self.p) - 2.0 * self.j_term(u)
            } else {
                self.j_term(u) + self.second_half(u)
            }
        } else {
            self.tent(l, |t| self.psi(t, u))
        }
    }

    /// `Q(lh, u) = c1 u^{1-2p} + c2 u^{2-2p} + reg(u)` for `|l| <= 1`, with
    /// `reg` analytic near `u = 0`.
    pub fn q_split(&self, l: i64, u: f64) -> (f64, f64, f64) {
        let h = self.h;
        let q = 1.0 - self.p;
        let shifted = (h * h + u * u).powf(q);
        if l == 0 {
            (
                h * self.beta_half,
                1.0 / q,
                -2.0 * h * power_tail(h, u, self.p) - shifted / q,
            )
        } else {
            (0.0, -0.5 / q, 0.5 * shifted / q + self.second_half(u))
        }
    }

    /// `∫_U^∞ u^{m_d-1} (t^2 + u^2)^{-p} du`.
    pub fn radial_tail(&self, t: f64, big_u: f64) -> f64 {
        let a = 0.5 * (1.0 + self.s);
        let r2 = t * t + big_u * big_u;
        0.5 * r2.powf(-a) * incomplete_beta_scaled(a, 0.5 * self.m_d as f64, t * t / r2)
    }

    /// `∫_{r_max}^∞ u^{m_d-1} Σ_l Q(lh, u) du` over the images of an offset.
    pub fn far_tail(&self, images: Images, d: i64) -> f64 {
        let periodic = self.h * self.h * self.far * self.r_max.powf(-self.s) / self.s;
        let free = self.tent(d, |t| self.radial_tail(t, self.r_max));
        match images {
            Images::Periodic => periodic,
            Images::Free => free,
            Images::NonZero => periodic - free,
        }
    }

    /// Bound on the neglected Fourier modes of the periodic far tail.
    pub fn far_tail_error(&self) -> f64 {
        let periodic = self.h * self.h * self.far * self.r_max.powf(-self.s) / self.s;
        10.0 * periodic * (-2.0 * std::f64::consts::PI * self.r_max).exp()
    }

    /// Offsets `|l| <= 1` among the images of offset `d`.
    pub fn near_offsets(&self, images: Images, d: i64) -> Vec<i64> {
        let period = self.period();
        (-1..=1)
            .filter(|&l| match images {
                Images::Free => l == d,
                Images::Periodic => (d - l).rem_euclid(period) == 0,
                Images::NonZero => l != d && (d - l).rem_euclid(period) == 0,
            })
            .collect()
    }

    /// Table key of offset `d` for the given images.
    pub fn key(&self, images: Images, d: i64) -> usize {
        let period = self.period();
        match images {
            Images::Periodic => {
                let r = d.rem_euclid(period);
                r.min(period - r) as usize
            }
            Images::Free | Images::NonZero => d.unsigned_abs() as usize,
        }
    }

    fn key_count(&self, images: Images) -> usize {
        match images {
            Images::Periodic => self.half_cells + 1,
            Images::Free => 2 * self.half_cells + 1,
            Images::NonZero => 2 * self.half_cells,
        }
    }

    /// Euler-Maclaurin sum of `Q(t, u)` over `t = t0 + 1/2 + k`, `k >= 0`,
    /// with a bound on the first neglected term.
    fn class_tail(&self, t0: f64, u: f64) -> (f64, f64) {
        let p = self.p;
        let h2 = self.h * self.h;
        let h4 = h2 * h2;
        let r = t0 * t0 + u * u;
        let d1 = -2.0 * p * t0 * r.powf(-p - 1.0);
        let d3 = 12.0 * p * (p + 1.0) * t0 * r.powf(-p - 2.0)
            - 8.0 * p * (p + 1.0) * (p + 2.0) * t0.powi(3) * r.powf(-p - 3.0);
        let value = h2 * power_tail(t0, u, p) + d1 * (h2 / 24.0 - h4 / 12.0)
            + d3 * (h4 / 288.0 - 7.0 * h2 / 5760.0 - h4 * h2 / 360.0);
        let rising: f64 = (0..5).map(|k| 2.0 * p + k as f64).product();
        let error = h2 * rising * t0.powf(-2.0 * p - 5.0) * 1e-4;
        (value, error)
    }

    /// Smooth part (`|l| >= 2`) of the image sum for table key `key`.
    fn smooth_sum(&self, images: Images, key: usize, u: f64) -> (f64, f64) {
        let period = self.period();
        let key = key as i64;
        if images == Images::Free {
            let v = if key >= 2 { self.q(key, u) } else { 0.0 };
            return (v, 0.0);
        }
        let base = if key > self.half_cells as i64 { key - period } else { key };
        let skip = if images == Images::NonZero { Some(key) } else { None };
        let k = self.window as i64;
        let mut acc = 0.0;
        for j in (-k..=k).rev() {
            let l = base - period * j;
            if l.abs() <= 1 || Some(l) == skip {
                continue;
            }
            acc += self.q(l, u);
        }
        let c = base as f64 * self.h;
        let (ta, ea) = self.class_tail(k as f64 + 0.5 - c, u);
        let (tb, eb) = self.class_tail(k as f64 + 0.5 + c, u);
        (acc + ta + tb, ea + eb)
    }

    pub fn panel_bounds(&self) -> Vec<f64> {
        let mut b = vec![0.0, 0.5 * self.h, self.h];
        while 2.0 * b[b.len() - 1] < self.r_max {
            let next = 2.0 * b[b.len() - 1];
            b.push(next);
        }
        b.push(self.r_max);
        b
    }
}

fn chebyshev_nodes() -> &'static [f64; NODES] {
    static NODES_CELL: OnceLock<[f64; NODES]> = OnceLock::new();
    NODES_CELL.get_or_init(|| {
        let mut x = [0.0; NODES];
        for (k, v) in x.iter_mut().enumerate() {
            *v = (std::f64::consts::PI * (k as f64 + 0.5) / NODES as f64).cos();
        }
        x
    })
}

/// Coefficients `c_j` with `f = c_0/2 + Σ_{j>=1} c_j T_j`.
fn chebyshev_coefficients(values: &[f64; NODES]) -> [f64; NODES] {
    let mut c = [0.0; NODES];
    let nf = NODES as f64;
    for (j, cj) in c.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (k, v) in values.iter().enumerate() {
            acc += v * (std::f64::consts::PI * j as f64 * (k as f64 + 0.5) / nf).cos();
        }
        *cj = 2.0 * acc / nf;
    }
    c
}

/// Antiderivative on `[-1, 1]` vanishing at `-1`, in plain (unhalved)
/// coefficient form, scaled by the panel half-width.
fn antiderivative(c: &[f64; NODES], half_width: f64) -> [f64; NODES + 1] {
    let at = |j: usize| if j < NODES { c[j] } else { 0.0 };
    let mut a = [0.0; NODES + 1];
    a[1] = 0.5 * (at(0) - at(2));
    for j in 2..=NODES {
        a[j] = (at(j - 1) - at(j + 1)) / (2.0 * j as f64);
    }
    let mut at_minus_one = 0.0;
    for (j, v) in a.iter().enumerate().skip(1) {
        at_minus_one += if j % 2 == 0 { *v } else { -*v };
    }
    a[0] = -at_minus_one;
    for v in a.iter_mut() {
        *v *= half_width;
    }
    a
}

fn clenshaw(c: &[f64], x: f64, halved_first: bool) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &cj in c.iter().skip(1).rev() {
        let b0 = 2.0 * x * b1 - b2 + cj;
        b2 = b1;
        b1 = b0;
    }
    let c0 = if halved_first { 0.5 * c[0] } else { c[0] };
    x * b1 - b2 + c0
}

/// One table key: values of the smooth sum and its radial cumulative integral
/// `C(u) = ∫_0^u t^{m_d-1} S(t) dt`.
#[derive(Debug, Clone)]
pub(crate) struct Series {
    values: Vec<[f64; NODES]>,
    anti: Vec<[f64; NODES + 1]>,
    offset: Vec<f64>,
    /// Bound on the absolute error of any cumulative difference.
    pub error: f64,
}

#[derive(Debug)]
pub(crate) struct Table {
    bounds: Vec<f64>,
    keys: Vec<Series>,
}

impl Table {
    fn build(grid: &Grid, images: Images) -> Self {
        let bounds = grid.panel_bounds();
        let nodes = chebyshev_nodes();
        let keys = (0..grid.key_count(images))
            .map(|key| {
                let mut values = Vec::new();
                let mut anti = Vec::new();
                let mut offset = Vec::new();
                let mut running = 0.0;
                let mut error = 0.0;
                for w in bounds.windows(2) {
                    let (mid, hw) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
                    let mut sv = [0.0; NODES];
                    let mut gv = [0.0; NODES];
                    let mut em = 0.0f64;
                    for k in 0..NODES {
                        let u = mid + hw * nodes[k];
                        let (v, e) = grid.smooth_sum(images, key, u);
                        sv[k] = v;
                        gv[k] = u.powi(grid.m_d as i32 - 1) * v;
                        em = em.max(e * u.powi(grid.m_d as i32 - 1));
                    }
                    let sc = chebyshev_coefficients(&sv);
                    let gc = chebyshev_coefficients(&gv);
                    let ac = antiderivative(&gc, hw);
                    let tail = gc[NODES - 1].abs() + gc[NODES - 2].abs();
                    let floor = 4.0 * f64::EPSILON * gc.iter().map(|c| c.abs()).sum::<f64>();
                    error += 2.0 * hw * (tail + floor + em);
                    offset.push(running);
                    running += clenshaw(&ac, 1.0, false);
                    values.push(sc);
                    anti.push(ac);
                }
                Series {
                    values,
                    anti,
                    offset,
                    error,
                }
            })
            .collect();
        Self { bounds, keys }
    }

    fn locate(&self, u: f64) -> (usize, f64) {
        let last = self.bounds.len() - 2;
        let i = self.bounds.partition_point(|b| *b <= u).saturating_sub(1).min(last);
        let (lo, hi) = (self.bounds[i], self.bounds[i + 1]);
        let x = ((2.0 * u - lo - hi) / (hi - lo)).clamp(-1.0, 1.0);
        (i, x)
    }

    pub fn series(&self, key: usize) -> &Series {
        &self.keys[key]
    }

    /// Smooth sum at `u <= r_max`.
    pub fn value(&self, key: usize, u: f64) -> f64 {
        let (i, x) = self.locate(u);
        clenshaw(&self.keys[key].values[i], x, true)
    }

    /// `∫_0^u t^{m_d-1} S(t) dt` for `u <= r_max`.
    pub fn cumulative(&self, key: usize, u: f64) -> f64 {
        let (i, x) = self.locate(u);
        let s = &self.keys[key];
        s.offset[i] + clenshaw(&s.anti[i], x, false)
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct TableKey {
    n: usize,
    s: u64,
    half_cells: usize,
    window: usize,
    r_max: u64,
    images: Images,
}

const CACHE_LIMIT: usize = 64;

/// Table for the grid, built once per parameter set and shared.
pub(crate) fn table(grid: &Grid, images: Images) -> Arc<Table> {
    static CACHE: OnceLock<Mutex<HashMap<TableKey, Arc<Table>>>> = OnceLock::new();
    let key = TableKey {
        n: grid.m_d + 1,
        s: grid.s.to_bits(),
        half_cells: grid.half_cells,
        window: grid.window,
        r_max: grid.r_max.to_bits(),
        images,
    };
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("table cache poisoned").get(&key) {
        return Arc::clone(t);
    }
    let built = Arc::new(Table::build(grid, images));
    let mut guard = cache.lock().expect("table cache poisoned");
    if guard.len() >= CACHE_LIMIT {
        guard.clear();
    }
    Arc::clone(guard.entry(key).or_insert(built))
}
