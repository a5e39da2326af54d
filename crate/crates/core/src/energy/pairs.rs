//! Radial integrals for pairs of slab cells.
//!
//! For cells with radii `r`, `q` at offset `d`, the transverse integrals
//! reduce to `∫_0^∞ u^{m_d-1} w(u; r, q) T_d(u) du`, where `w` is a lens
//! weight (the part of one ball outside, or inside, the other ball shifted by
//! `u`) and `T_d` sums the tent kernels over the interacting images.

use std::cell::Cell;
use std::sync::Arc;

use super::images::{table, Grid, Images, Table};
use crate::quad::{self, Estimate, GaussRule, TanhSinh};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Weight {
    /// `|B_r \ B_q(u)|`.
    Outside,
    /// `|B_r ∩ B_q(u)|`.
    Overlap,
    /// `∂/∂r` of [`Weight::Outside`].
    OutsideDr,
    /// `∂/∂q` of [`Weight::Outside`].
    OutsideDq,
    /// `d/dr` of [`Weight::Outside`] with `q = r`.
    OutsideDEqual,
}

const JACOBI_ORDERS: (usize, usize) = (20, 14);

pub(crate) struct Engine {
    pub grid: Grid,
    images: Images,
    table: Arc<Table>,
    rel_tol: f64,
    max_subdivisions: usize,
    used: Cell<usize>,
    jacobi: (GaussRule, GaussRule),
}

impl Engine {
    pub fn new(grid: Grid, images: Images, rel_tol: f64, max_subdivisions: usize) -> Self {
        let table = table(&grid, images);
        let jacobi = (
            GaussRule::jacobi(JACOBI_ORDERS.0, 0.0, -grid.s),
            GaussRule::jacobi(JACOBI_ORDERS.1, 0.0, -grid.s),
        );
        Self {
            grid,
            images,
            table,
            rel_tol,
            max_subdivisions,
            used: Cell::new(0),
            jacobi,
        }
    }

    /// Number of quadrature pieces evaluated so far.
    pub fn pieces(&self) -> usize {
        self.used.get()
    }

    fn weight(&self, kind: Weight, u: f64, r: f64, q: f64) -> f64 {
        let geo = &self.grid.geo;
        match kind {
            Weight::Outside => geo.outside(u, r, q),
            Weight::Overlap => geo.overlap(u, r, q),
            Weight::OutsideDr => geo.outside_dr(u, r, q),
            Weight::OutsideDq => geo.outside_dq(u, r, q),
            Weight::OutsideDEqual => geo.outside_d_equal(u, r),
        }
    }

    fn vanishes(&self, kind: Weight, r: f64, q: f64) -> bool {
        let thin = self.grid.m_d >= 2;
        match kind {
            Weight::Outside => r <= 0.0,
            Weight::Overlap => r <= 0.0 || q <= 0.0,
            Weight::OutsideDr | Weight::OutsideDEqual => thin && r <= 0.0,
            Weight::OutsideDq => r <= 0.0 || (thin && q <= 0.0),
        }
    }

    fn count(&self) -> Result<()> {
        let used = self.used.get() + 1;
        self.used.set(used);
        if used > self.max_subdivisions {
            return Err(Error::NonConvergence(format!(
                "quadrature used more than {} pieces",
                self.max_subdivisions
            )));
        }
        Ok(())
    }

    /// Integrates a piece to `max(abs_tol, rel_tol · |value|)`; `kinks` flags
    /// endpoints where the weight has an algebraic kink.
    fn piece<F: Fn(f64) -> f64>(
        &self,
        lo: f64,
        hi: f64,
        kinks: (bool, bool),
        f: &F,
        abs_tol: f64,
        depth: usize,
    ) -> Result<Estimate> {
        self.count()?;
        if hi - lo <= 1e-6 * self.grid.h {
            return Ok(TanhSinh::standard().integrate(lo, hi, f));
        }
        // tolerance relative to ∫|f| so that cancelling pieces terminate
        let abs_tol = if depth == 0 {
            self.rel_tol * quad::gk15(lo, hi, |x| f(x).abs()).value
        } else {
            abs_tol
        };
        if !kinks.0 && !kinks.1 {
            // an integrand dominated by rounding keeps its own error estimate
            return Ok(quad::adaptive(lo, hi, abs_tol, self.rel_tol, 200, f)
                .unwrap_or_else(|_| TanhSinh::standard().integrate(lo, hi, f)));
        }
        let est = TanhSinh::standard().integrate(lo, hi, f);
        let tol = abs_tol.max(self.rel_tol * est.value.abs());
        if est.error <= tol || est.error < 1e-300 {
            return Ok(est);
        }
        if depth > 40 {
            return Err(Error::NonConvergence(format!("piece [{lo:e}, {hi:e}] did not resolve")));
        }
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * tol;
        Ok(self.piece(lo, mid, (kinks.0, false), f, half, depth + 1)?
            + self.piece(mid, hi, (false, kinks.1), f, half, depth + 1)?)
    }

    /// `∫_0^∞ u^{m_d-1} w(u; r, q) T_d(u) du`.
    pub fn pair(&self, r: f64, q: f64, d: i64, kind: Weight) -> Result<Estimate> {
        if self.vanishes(kind, r, q) {
            return Ok(Estimate::default());
        }
        let g = &self.grid;
        let (a, b) = ((r - q).abs(), r + q);
        let near = g.near_offsets(self.images, d);
        let key = g.key(self.images, d);
        let power = g.m_d as i32 - 1;
        let w_far = self.weight(kind, 2.0 * b + 1.0, r, q);
        let mut total = Estimate::default();
        if w_far != 0.0 {
            total += Estimate::new(g.far_tail(self.images, d), g.far_tail_error()) * w_far;
        }
        let series_error = self.table.series(key).error;
        if near.is_empty() {
            let w_inner = if a > 0.0 { self.weight(kind, 0.5 * a, r, q) } else { 0.0 };
            if w_inner != 0.0 {
                let c = self.table.cumulative(key, a);
                total += Estimate::new(c, series_error) * w_inner;
            }
            if w_far != 0.0 {
                let c = self.table.cumulative(key, g.r_max) - self.table.cumulative(key, b);
                total += Estimate::new(c, series_error) * w_far;
            }
            let f = |u: f64| u.powi(power) * self.weight(kind, u, r, q) * self.table.value(key, u);
            let mut pts = vec![a];
            pts.extend(self.table.bounds().iter().copied().filter(|&x| x > a && x < b));
            pts.push(b);
            for (k, w) in pts.windows(2).enumerate() {
                if w[1] > w[0] {
                    total += self.piece(w[0], w[1], (k == 0 && a > 0.0, k + 2 == pts.len()), &f, 0.0, 0)?;
                }
            }
            return Ok(total);
        }

        // pairs with singular images: integrate all of [0, r_max]
        let mut pts: Vec<f64> = self.table.bounds().to_vec();
        for x in [a, b] {
            if x > 0.0 && x < g.r_max {
                pts.push(x);
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let first = pts[1];
        let mut grade = 2.0 * first;
        while grade < 0.5 * g.h {
            pts.push(grade);
            grade *= 2.0;
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();

        let full = |u: f64| {
            let t: f64 = near.iter().map(|&l| g.q(l, u)).sum::<f64>() + self.table.value(key, u);
            u.powi(power) * self.weight(kind, u, r, q) * t
        };
        let w_inner = if a > 0.0 { self.weight(kind, 0.5 * a, r, q) } else { f64::NAN };
        for (k, w) in pts.windows(2).enumerate() {
            let (lo, hi) = (w[0], w[1]);
            if hi <= a && w_inner == 0.0 {
                continue;
            }
            if k == 0 {
                total += self.first_piece(hi, r, q, kind, &near, key)?;
                continue;
            }
            let at = |x: f64| x > 0.0 && (x == a || x == b);
            total += self.piece(lo, hi, (at(lo), at(hi)), &full, 0.0, 0)?;
        }
        Ok(total)
    }

    /// `[0, x1]` with `x1 <= h/2` and the weight smooth there: the singular
    /// powers of the near kernels are integrated against a Jacobi weight.
    fn first_piece(&self, x1: f64, r: f64, q: f64, kind: Weight, near: &[i64], key: usize) -> Result<Estimate> {
        self.count()?;
        let g = &self.grid;
        let power = g.m_d as i32 - 1;
        let (c1, c2) = near.iter().fold((0.0, 0.0), |acc, &l| {
            let (a1, a2, _) = g.q_split(l, x1);
            (acc.0 + a1, acc.1 + a2)
        });
        if c1 != 0.0 && self.weight(kind, 0.0, r, q) != 0.0 {
            return Err(Error::SingularConfiguration(
                "coincident cells with a weight that does not vanish at zero distance".into(),
            ));
        }
        let singular = |u: f64| self.weight(kind, u, r, q) * (c1 / u + c2);
        let regular = |u: f64| {
            let reg: f64 = near.iter().map(|&l| g.q_split(l, u).2).sum();
            u.powi(power) * self.weight(kind, u, r, q) * (reg + self.table.value(key, u))
        };
        let s = g.s;
        let sing_hi = self.jacobi.0.integrate_left_power(x1, s, singular);
        let sing_lo = self.jacobi.1.integrate_left_power(x1, s, singular);
        let reg_hi = quad::legendre(JACOBI_ORDERS.0).integrate(0.0, x1, regular);
        let reg_lo = quad::legendre(JACOBI_ORDERS.1).integrate(0.0, x1, regular);
        let value = sing_hi + reg_hi;
        let error = (sing_hi - sing_lo).abs() + (reg_hi - reg_lo).abs() + 4.0 * f64::EPSILON * value.abs();
        Ok(Estimate::new(value, error))
    }
}
