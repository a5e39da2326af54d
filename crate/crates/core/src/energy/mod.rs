//! Energies of profile sets: the periodic perimeter `P_S`, the free
//! fractional perimeter `Per_s`, the image interaction, the cross-boundary
//! term `Π_S`, a lower-bound integral, and Monte Carlo and voxel oracles.

pub(crate) mod images;
mod mc;
pub(crate) mod pairs;
mod voxel;

use std::fmt;

use images::{Grid, Images};
use pairs::{Engine, Weight};

use crate::kernel::KernelParams;
use crate::quad::{Estimate, TanhSinh};
use crate::shapes::Profile;
use crate::special::{transverse_mass, BallGeometry};
use crate::{Error, Result};

pub use mc::{energy_mc, McConfig};
pub use voxel::{energy_voxel, voxel_tolerance, VoxelOptions};

/// How an energy value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Quadrature,
    MonteCarlo,
    Voxel,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Quadrature => "quadrature",
            Method::MonteCarlo => "monte-carlo",
            Method::Voxel => "voxel",
        })
    }
}

/// An energy estimate with its error bound or standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyValue {
    pub value: f64,
    pub error: f64,
    pub method: Method,
    /// Quadrature pieces, Monte Carlo samples or voxel cells.
    pub count: u64,
}

impl EnergyValue {
    pub fn quadrature(est: Estimate, count: usize) -> Self {
        Self {
            value: est.value,
            error: est.error,
            method: Method::Quadrature,
            count: count as u64,
        }
    }

    pub fn zero(method: Method) -> Self {
        Self {
            value: 0.0,
            error: 0.0,
            method,
            count: 0,
        }
    }

    pub const CSV_HEADER: &'static str = "value,error,method,count";

    pub fn csv_row(&self) -> String {
        format!("{:.16e},{:.16e},{},{}", self.value, self.error, self.method, self.count)
    }
}

/// Controls for the deterministic quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub rel_tol: f64,
    /// Truncation radius of the transverse integral; `None` picks
    /// `max(4 max f, 4)`.
    pub r_max: Option<f64>,
    pub max_subdivisions: usize,
    pub kernel: KernelParams,
}

impl QuadConfig {
    pub fn new(kernel: KernelParams) -> Self {
        Self {
            rel_tol: 1e-6,
            r_max: None,
            max_subdivisions: 5_000_000,
            kernel,
        }
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::InvalidParams(format!("rel_tol = {} outside (0, 1)", self.rel_tol)));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::InvalidParams("max_subdivisions must be positive".into()));
        }
        if let Some(r) = self.r_max {
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::InvalidParams(format!("r_max = {r} must be positive")));
            }
        }
        Ok(())
    }

    pub fn effective_r_max(&self, max_f: f64) -> Result<f64> {
        match self.r_max {
            Some(r) if r < 4.0 * max_f => Err(Error::InvalidParams(format!(
                "r_max = {r} is below 4 max f = {}",
                4.0 * max_f
            ))),
            Some(r) => Ok(r),
            None => Ok((4.0 * max_f).max(4.0)),
        }
    }

    fn window(&self) -> usize {
        self.kernel.k_max.max(8)
    }
}

fn check_dims(n: usize, cfg: &QuadConfig) -> Result<()> {
    cfg.validate()?;
    if n != cfg.kernel.n {
        return Err(Error::InvalidParams(format!(
            "profile dimension {n} differs from kernel dimension {}",
            cfg.kernel.n
        )));
    }
    Ok(())
}

fn engine(n: usize, half_cells: usize, max_f: f64, images: Images, cfg: &QuadConfig) -> Result<Engine> {
    check_dims(n, cfg)?;
    let r_max = cfg.effective_r_max(max_f)?;
    let grid = Grid::new(n, cfg.kernel.s, half_cells, cfg.window(), r_max);
    Ok(Engine::new(grid, images, cfg.rel_tol, cfg.max_subdivisions))
}

fn full_period(values: &[f64]) -> Vec<f64> {
    values.iter().rev().chain(values.iter()).copied().collect()
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(0.0, f64::max)
}

/// Mirror-symmetric double sum over cell pairs with the given images and
/// weight.
fn symmetric_sum(eng: &Engine, radii: &[f64], weight: Weight) -> Result<Estimate> {
    let m = radii.len() / 2;
    let mut total = Estimate::default();
    for i in m..2 * m {
        for (j, &rj) in radii.iter().enumerate() {
            total += eng.pair(radii[i], rj, i as i64 - j as i64, weight)?;
        }
    }
    Ok(total * (2.0 * eng.grid.sphere))
}

/// `P_S` for radii on all `2m` cells of the period, without assuming mirror
/// symmetry.
#[cfg(test)]
pub(crate) fn periodic_energy_cells(n: usize, radii: &[f64], cfg: &QuadConfig) -> Result<EnergyValue> {
    if radii.len() % 2 == 1 {
        return Err(Error::InvalidParams("need an even number of cells".into()));
    }
    if max_of(radii) == 0.0 {
        check_dims(n, cfg)?;
        return Ok(EnergyValue::zero(Method::Quadrature));
    }
    let eng = engine(n, radii.len() / 2, max_of(radii), Images::Periodic, cfg)?;
    let mut total = Estimate::default();
    for (i, &ri) in radii.iter().enumerate() {
        for (j, &rj) in radii.iter().enumerate() {
            total += eng.pair(ri, rj, i as i64 - j as i64, Weight::Outside)?;
        }
    }
    Ok(EnergyValue::quadrature(total * eng.grid.sphere, eng.pieces()))
}

/// `P_S` for half-period radii that need not be monotone.
pub(crate) fn periodic_energy_values(n: usize, values: &[f64], cfg: &QuadConfig) -> Result<EnergyValue> {
    if max_of(values) == 0.0 {
        check_dims(n, cfg)?;
        return Ok(EnergyValue::zero(Method::Quadrature));
    }
    let eng = engine(n, values.len(), max_of(values), Images::Periodic, cfg)?;
    let est = symmetric_sum(&eng, &full_period(values), Weight::Outside)?;
    Ok(EnergyValue::quadrature(est, eng.pieces()))
}

/// `P_S(F) = ∫_{F∩S} ∫_{S\F} K(x - y) dy dx` for the profile set `F`.
pub fn energy_profile(p: &Profile, cfg: &QuadConfig) -> Result<EnergyValue> {
    periodic_energy_values(p.n(), p.values(), cfg)
}

/// Derivative of the discrete `P_S` with respect to each profile value.
pub(crate) fn periodic_gradient_values(n: usize, values: &[f64], cfg: &QuadConfig) -> Result<Vec<f64>> {
    let m = values.len();
    if max_of(values) == 0.0 {
        check_dims(n, cfg)?;
        return Ok(vec![0.0; m]);
    }
    let eng = engine(n, m, max_of(values), Images::Periodic, cfg)?;
    let radii = full_period(values);
    let mut grad = Vec::with_capacity(m);
    for k in 0..m {
        let qi = m + k;
        let rq = radii[qi];
        if n == 2 && rq == 0.0 {
            grad.push(f64::INFINITY);
            continue;
        }
        let mut acc = eng.pair(rq, rq, 0, Weight::OutsideDEqual)?;
        for (j, &rj) in radii.iter().enumerate() {
            if j == qi {
                continue;
            }
            let d = qi as i64 - j as i64;
            acc += eng.pair(rq, rj, d, Weight::OutsideDr)?;
            acc += eng.pair(rj, rq, -d, Weight::OutsideDq)?;
        }
        grad.push(2.0 * eng.grid.sphere * acc.value);
    }
    Ok(grad)
}

/// Interaction of the cells with the complement outside the slab, in closed
/// form.
fn outside_slab_term(n: usize, radii: &[f64], s: f64) -> f64 {
    let geo = BallGeometry::new(n - 1);
    let c = transverse_mass(n - 1, 0.5 * (n as f64 + s));
    let h = 1.0 / radii.len() as f64;
    let e = 1.0 - s;
    radii
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let (x0, x1) = (-0.5 + i as f64 * h, -0.5 + (i + 1) as f64 * h);
            let right = (0.5 - x0).powf(e) - (0.5 - x1).max(0.0).powf(e);
            let left = (0.5 + x1).powf(e) - (0.5 + x0).max(0.0).powf(e);
            geo.ball_volume(r) * c * (right + left) / (s * e)
        })
        .sum()
}

/// `Per_s(F) = ∫_F ∫_{R^n \ F} |x - y|^{-(n+s)}` for the set `F ∩ S`.
pub fn frac_perimeter(p: &Profile, cfg: &QuadConfig) -> Result<EnergyValue> {
    if p.is_empty_set() {
        check_dims(p.n(), cfg)?;
        return Ok(EnergyValue::zero(Method::Quadrature));
    }
    let eng = engine(p.n(), p.m(), p.max_value(), Images::Free, cfg)?;
    let radii = p.full_period();
    let inside = symmetric_sum(&eng, &radii, Weight::Outside)?;
    let outside = outside_slab_term(p.n(), &radii, cfg.kernel.s);
    let est = inside + Estimate::new(outside, 4.0 * f64::EPSILON * outside);
    Ok(EnergyValue::quadrature(est, eng.pieces()))
}

/// `Per_s` of the ball of radius `radius` in `R^n`, via the exact scaling
/// `Per_s(B_r) = r^{n-s} Per_s(B_1)` and a one-dimensional lens integral.
pub fn frac_perimeter_ball(radius: f64, cfg: &QuadConfig) -> Result<EnergyValue> {
    cfg.validate()?;
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParams(format!("ball radius {radius} must be positive")));
    }
    let n = cfg.kernel.n;
    let s = cfg.kernel.s;
    let geo = BallGeometry::new(n);
    // Per_s(B_1) = |S^{n-1}| [∫_0^2 W(ρ; 1, 1) ρ^{-1-s} dρ + |B_1| 2^{-s} / s]
    let f = |rho: f64| {
        // the integrand is O(rho^{-s}) at the origin
        if rho > 1e-150 {
            geo.outside(rho, 1.0, 1.0) * rho.powf(-1.0 - s)
        } else {
            0.0
        }
    };
    let ts = TanhSinh::standard();
    let near = ts.integrate(0.0, 1.0, f) + ts.integrate(1.0, 2.0, f);
    let far = geo.ball_volume(1.0) * 2f64.powf(-s) / s;
    let unit = (near + Estimate::new(far, 0.0)) * geo.sphere_area(1.0);
    Ok(EnergyValue::quadrature(unit * radius.powf(n as f64 - s), 2))
}

/// `(Per_s(F) - P_S(F), Σ_{k≠0} ∫_F ∫_F |x - y + k e1|^{-(n+s)})`.
pub fn interaction_decomposition(p: &Profile, cfg: &QuadConfig) -> Result<(EnergyValue, EnergyValue)> {
    if p.is_empty_set() {
        check_dims(p.n(), cfg)?;
        let z = EnergyValue::zero(Method::Quadrature);
        return Ok((z, z));
    }
    let per = frac_perimeter(p, cfg)?;
    let ps = energy_profile(p, cfg)?;
    let lhs = EnergyValue {
        value: per.value - ps.value,
        error: per.error + ps.error,
        method: Method::Quadrature,
        count: per.count + ps.count,
    };
    let eng = engine(p.n(), p.m(), p.max_value(), Images::NonZero, cfg)?;
    let est = symmetric_sum(&eng, &p.full_period(), Weight::Overlap)?;
    Ok((lhs, EnergyValue::quadrature(est, eng.pieces())))
}

/// `Π_S(F) = ∫_{F̃} ∫_{F̂} |x - y|^{-(n+s)}` with `F̃ = F ∩ {x1 ∈ [1/4, 1/2]}`
/// and `F̂ = (F + e1) ∩ {x1 ∈ [1/2, 3/4]}`.
pub fn pi_term(p: &Profile, cfg: &QuadConfig) -> Result<EnergyValue> {
    check_dims(p.n(), cfg)?;
    let p = if p.m() % 2 == 1 { p.refine(2) } else { p.clone() };
    let m = p.m();
    let radii = p.full_period();
    if radii[3 * m / 2..].iter().all(|r| *r == 0.0) {
        return Ok(EnergyValue::zero(Method::Quadrature));
    }
    let eng = engine(p.n(), m, p.max_value(), Images::Free, cfg)?;
    let mut total = Estimate::default();
    for i in 3 * m / 2..2 * m {
        for j in 0..m / 2 {
            let l = i as i64 - j as i64 - 2 * m as i64;
            total += eng.pair(radii[i], radii[j], l, Weight::Overlap)?;
        }
    }
    Ok(EnergyValue::quadrature(total * eng.grid.sphere, eng.pieces()))
}

/// Value of the lower-bound integral and the status of its hypotheses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBound {
    pub value: f64,
    /// `f >= 4` on `[0, eps_star)`.
    pub large_core: bool,
    /// `f(x1) >= 2 f(y1)` for `x1 <= eps_star <= alpha_star <= y1`.
    pub ratio: bool,
}

/// `J = ∫_0^{ε*} f^{n-1}(x1) (1/s) [(α* - x1)^{-s} - (1/2 - x1)^{-s}] dx1`,
/// integrated exactly over each profile cell.
pub fn lower_bound_integral(p: &Profile, eps_star: f64, alpha_star: f64, s: f64) -> Result<LowerBound> {
    if !(0.0 <= eps_star && eps_star <= alpha_star && alpha_star <= 0.5) {
        return Err(Error::InvalidParams(format!(
            "need 0 <= eps_star <= alpha_star <= 1/2, got {eps_star}, {alpha_star}"
        )));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidParams(format!("order s = {s} outside (0, 1)")));
    }
    let h = p.cell_width();
    let e = 1.0 - s;
    let power = (p.n() - 1) as i32;
    let mut value = 0.0;
    let mut core_min = f64::INFINITY;
    for (k, &f) in p.values().iter().enumerate() {
        let x0 = k as f64 * h;
        if x0 >= eps_star {
            break;
        }
        let x1 = ((k + 1) as f64 * h).min(eps_star);
        core_min = core_min.min(f);
        let near = (alpha_star - x0).powf(e) - (alpha_star - x1).max(0.0).powf(e);
        let far = (0.5 - x0).powf(e) - (0.5 - x1).powf(e);
        value += f.powi(power) * (near - far) / (s * e);
    }
    let tail_max = if alpha_star < 0.5 { p.value_at(alpha_star) } else { 0.0 };
    let large_core = eps_star == 0.0 || core_min >= 4.0;
    let ratio = eps_star == 0.0 || core_min >= 2.0 * tail_max;
    Ok(LowerBound { value, large_core, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cfg(n: usize, s: f64) -> QuadConfig {
        QuadConfig::new(KernelParams::new(n, s).unwrap())
    }

    #[test]
    fn empty_set_has_zero_energies() {
        let p = Profile::constant(3, 8, 0.0).unwrap();
        let c = cfg(3, 0.5);
        assert_eq!(energy_profile(&p, &c).unwrap().value, 0.0);
        assert_eq!(frac_perimeter(&p, &c).unwrap().value, 0.0);
        let (l, r) = interaction_decomposition(&p, &c).unwrap();
        assert_eq!((l.value, r.value), (0.0, 0.0));
    }

    #[test]
    fn ball_perimeter_scales_exactly() {
        let c = cfg(3, 0.5);
        let unit: Vec<f64> = [0.1, 0.2, 0.4]
            .iter()
            .map(|&r| frac_perimeter_ball(r, &c).unwrap().value / r.powf(2.5))
            .collect();
        assert!((unit[0] - unit[2]).abs() < 2e-6 * unit[0]);
    }

    /// Per_s(B_1) in n = 2 by direct quadrature of the disc-disc interaction
    /// `∫_{B} ∫_{B^c}` written with polar coordinates around each x.
    #[test]
    fn ball_perimeter_matches_polar_oracle_in_the_plane() {
        let s = 0.5;
        let c = cfg(2, s);
        let v = frac_perimeter_ball(1.0, &c).unwrap().value;
        // for x at distance d from the boundary, ∫_{B^c} |x-y|^{-2-s} dy
        //   = ∫_0^{2π} ρ_*(θ)^{-s} / s dθ with ρ_* the exit distance, written
        //   without cancellation as (1 - t^2) / (t cos θ + sqrt(1 - t^2 sin^2 θ))
        let inner = |d: f64| {
            let t = 1.0 - d;
            let g = |th: f64| {
                let (c, root) = (t * th.cos(), (1.0 - t * t * th.sin().powi(2)).sqrt());
                let rho = if c >= 0.0 { d * (2.0 - d) / (c + root) } else { root - c };
                2.0 * rho.powf(-s) / s
            };
            // the exit distance drops from ~2 to ~sqrt(2d) across θ = π/2
            let half = 0.5 * PI;
            let mut pts = vec![0.0, half, PI];
            let mut w = d.sqrt();
            while w < half {
                pts.extend([half - w, half + w]);
                w *= 4.0;
            }
            pts.sort_by(f64::total_cmp);
            let mut sum = 0.0;
            for p in pts.windows(2) {
                sum += TanhSinh::standard().integrate(p[0], p[1], g).value;
            }
            sum
        };
        let oracle = TanhSinh::standard().integrate(0.0, 1.0, |d| {
            if d > 1e-150 {
                2.0 * PI * (1.0 - d) * inner(d)
            } else {
                0.0
            }
        });
        assert!((v - oracle.value).abs() < 1e-6 * v, "{v} vs {}", oracle.value);
    }

    #[test]
    fn lower_bound_examples() {
        let p = Profile::constant(3, 16, 5.0).unwrap();
        let s = 0.5;
        assert_eq!(lower_bound_integral(&p, 0.0, 0.25, s).unwrap().value, 0.0);
        let lb = lower_bound_integral(&p, 0.25, 0.25, s).unwrap();
        let closed = 25.0 / (s * (1.0 - s)) * (2.0 * 0.25f64.powf(0.5) - 0.5f64.powf(0.5));
        assert!((lb.value - closed).abs() < 1e-13 * closed);
        // dense midpoint quadrature of the same integral
        let nodes = 1_000_000;
        let dx = 0.25 / nodes as f64;
        let dense: f64 = (0..nodes)
            .map(|k| {
                let x = (k as f64 + 0.5) * dx;
                25.0 / s * ((0.25 - x).powf(-s) - (0.5 - x).powf(-s)) * dx
            })
            .sum();
        assert!((dense - closed).abs() < 2e-3 * closed);
        assert!(lb.large_core && !lb.ratio);
        assert!(lower_bound_integral(&p, 0.3, 0.2, s).is_err());
    }

    #[test]
    fn outside_slab_term_matches_quadrature() {
        let n = 3;
        let s = 0.4;
        let radii = vec![0.1, 0.2, 0.3, 0.3, 0.2, 0.1];
        let closed = outside_slab_term(n, &radii, s);
        let c = transverse_mass(2, 0.5 * (n as f64 + s));
        let h = 1.0 / 6.0;
        let mut direct = 0.0;
        for (i, r) in radii.iter().enumerate() {
            let x0 = -0.5 + i as f64 * h;
            let f = |x: f64| ((0.5 - x).powf(-s) + (0.5 + x).powf(-s)) / s;
            direct += PI * r * r * c * TanhSinh::standard().integrate(x0, x0 + h, f).value;
        }
        assert!((closed - direct).abs() < 1e-9 * closed);
    }

    fn rel_close(a: &EnergyValue, b: &EnergyValue, rel: f64) -> bool {
        (a.value - b.value).abs() <= rel * a.value.abs().max(b.value.abs()) + a.error + b.error
    }

    #[test]
    fn translation_and_reflection_in_the_period_preserve_energy() {
        let c = cfg(3, 0.5);
        let p = Profile::random(3, 8, 4, 0.3).unwrap();
        let base = energy_profile(&p, &c).unwrap();
        let mut radii = p.full_period();
        let direct = periodic_energy_cells(3, &radii, &c).unwrap();
        assert!(rel_close(&base, &direct, 2.0 * c.rel_tol));
        for shift in [1, 5, 11] {
            radii.rotate_left(shift);
            let moved = periodic_energy_cells(3, &radii, &c).unwrap();
            assert!(rel_close(&base, &moved, 2.0 * c.rel_tol), "{base:?} vs {moved:?}");
            radii.reverse();
            let flipped = periodic_energy_cells(3, &radii, &c).unwrap();
            assert!(rel_close(&base, &flipped, 2.0 * c.rel_tol));
        }
    }

    #[test]
    fn decomposition_sides_agree() {
        for (n, s, p) in [
            (3, 0.5, Profile::constant(3, 8, 0.25).unwrap()),
            (2, 0.3, Profile::random(2, 8, 9, 0.4).unwrap()),
            (3, 0.8, Profile::ball(3, 8, 0.3).unwrap()),
        ] {
            let (lhs, rhs) = interaction_decomposition(&p, &cfg(n, s)).unwrap();
            assert!(rhs.value > 0.0);
            let tol = 3.0 * (lhs.error + rhs.error) + 1e-6 * rhs.value;
            assert!((lhs.value - rhs.value).abs() <= tol, "{lhs:?} vs {rhs:?}");
        }
    }

    #[test]
    fn periodic_perimeter_is_below_free_perimeter() {
        for seed in 0..4 {
            let p = Profile::random(3, 6, seed, 0.35).unwrap();
            let c = cfg(3, 0.4);
            let ps = energy_profile(&p, &c).unwrap();
            let per = frac_perimeter(&p, &c).unwrap();
            assert!(ps.value <= per.value + ps.error + per.error);
        }
    }

    #[test]
    fn free_perimeter_of_stepped_balls_approaches_the_ball() {
        let c = cfg(3, 0.3);
        let exact = frac_perimeter_ball(0.3, &c).unwrap().value;
        let errs: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&m| (frac_perimeter(&Profile::ball(3, m, 0.3).unwrap(), &c).unwrap().value - exact).abs())
            .collect();
        assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
        assert!(errs[2] < 0.05 * exact);
    }

    #[test]
    fn pi_term_examples() {
        let c = cfg(3, 0.5);
        let mut v = vec![0.3; 8];
        v[4..].fill(0.0);
        assert_eq!(pi_term(&Profile::new(3, v).unwrap(), &c).unwrap().value, 0.0);
        let ratios: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&r| pi_term(&Profile::constant(3, 8, r).unwrap(), &c).unwrap().value / r.powf(2.5))
            .collect();
        let (lo, hi) = ratios.iter().fold((f64::MAX, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        assert!(lo > 0.0 && hi < 3.0 * lo, "{ratios:?}");
    }

    #[test]
    fn pi_term_is_reflection_symmetric() {
        let c = cfg(2, 0.6);
        let p = Profile::random(2, 8, 3, 0.4).unwrap();
        let value = pi_term(&p, &c).unwrap();
        // F ∩ {x1 ∈ [-1/2, -1/4]} against (F - e1) ∩ {x1 ∈ [-3/4, -1/2]}
        let radii = p.full_period();
        let m = p.m();
        let eng = engine(2, m, p.max_value(), Images::Free, &c).unwrap();
        let mut total = Estimate::default();
        for i in 0..m / 2 {
            for j in 3 * m / 2..2 * m {
                let l = i as i64 - j as i64 + 2 * m as i64;
                total += eng.pair(radii[i], radii[j], l, Weight::Overlap).unwrap();
            }
        }
        let mirrored = total.value * eng.grid.sphere;
        assert!((value.value - mirrored).abs() <= 2.0 * c.rel_tol * mirrored + value.error);
    }

    #[test]
    fn gradient_matches_central_differences() {
        for (n, s) in [(2, 0.4), (3, 0.7)] {
            let c = cfg(n, s).with_rel_tol(1e-9);
            let values = Profile::smooth_random(n, 6, 5, 0.3).unwrap().values().to_vec();
            let grad = periodic_gradient_values(n, &values, &c).unwrap();
            for k in 0..values.len() {
                let step = 1e-5;
                let mut up = values.clone();
                let mut down = values.clone();
                up[k] += step;
                down[k] -= step;
                let fd = (periodic_energy_values(n, &up, &c).unwrap().value
                    - periodic_energy_values(n, &down, &c).unwrap().value)
                    / (2.0 * step);
                assert!((grad[k] - fd).abs() < 1e-4 * grad[k].abs().max(1.0), "n={n} k={k}: {} vs {fd}", grad[k]);
            }
        }
    }
}
