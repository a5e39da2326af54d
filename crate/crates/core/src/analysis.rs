//! Experiments that confront minimizers and energies with quantitative
//! statements: density and deficit trends in the volume, the `s → 1` limit,
//! rearrangement monotonicity, the decomposition identity with its two
//! inequalities, and far-field decay of the kernel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::energy::{
    energy_profile, energy_voxel, frac_perimeter, interaction_decomposition, pi_term, voxel_tolerance, QuadConfig,
    VoxelOptions,
};
use crate::kernel::{periodic_kernel, KernelParams};
use crate::minimize::{minimize, MinimizeConfig, MinimizeResult};
use crate::shapes::{fraenkel_deficit, rearrange_slices, volume, Profile, VoxelSet};
use crate::special::{ball_volume, far_field_constant, sphere_area};
use crate::{Error, Result};

/// A named scalar with the grid it was computed on.
#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub name: String,
    pub value: f64,
    /// Residual per grid point, empty when the fit has none.
    pub residuals: Vec<f64>,
}

/// Outcome of one acceptance rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Tabulated measurements of one experiment. Every value column `c` is
/// followed by its error column `c_error`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub name: String,
    /// Statement exercised, written as the CSV header comment.
    pub statement: String,
    /// Name of the grid variable, the first column.
    pub grid_name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub fits: Vec<Fit>,
    pub checks: Vec<Check>,
}

impl ExperimentReport {
    fn new(name: &str, statement: &str, grid_name: &str, measured: &[&str]) -> Self {
        let mut columns = vec![grid_name.to_string()];
        for m in measured {
            columns.push(m.to_string());
            columns.push(format!("{m}_error"));
        }
        Self {
            name: name.into(),
            statement: statement.into(),
            grid_name: grid_name.into(),
            columns,
            rows: Vec::new(),
            fits: Vec::new(),
            checks: Vec::new(),
        }
    }

    fn push_row(&mut self, grid: f64, measured: &[(f64, f64)]) {
        let mut row = vec![grid];
        for &(v, e) in measured {
            row.push(v);
            row.push(e);
        }
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail,
        });
    }

    fn fit(&mut self, name: &str, value: f64, residuals: Vec<f64>) {
        self.fits.push(Fit {
            name: name.into(),
            value,
            residuals,
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn find_check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn find_fit(&self, name: &str) -> Option<&Fit> {
        self.fits.iter().find(|f| f.name == name)
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn nonincreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

/// Runs `f` over `items` on up to `threads` workers, keeping input order.
fn par_map<T: Sync, R: Send>(items: &[T], threads: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if items.is_empty() {
        return Vec::new();
    }
    let threads = threads.clamp(1, items.len());
    let chunk = items.len().div_ceil(threads);
    let f = &f;
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

fn check_mu_list(mu_list: &[f64]) -> Result<()> {
    if mu_list.is_empty() {
        return Err(Error::InvalidParams("empty volume list".into()));
    }
    if let Some(mu) = mu_list.iter().find(|mu| !(**mu > 0.0 && **mu <= 0.1)) {
        return Err(Error::InvalidParams(format!("volume {mu} outside (0, 0.1]")));
    }
    if !mu_list.windows(2).all(|w| w[1] < w[0]) {
        return Err(Error::InvalidParams("volume list must be strictly decreasing".into()));
    }
    Ok(())
}

/// Optimizer settings for a sweep over volumes. The grid is refined as the
/// volume shrinks so that the equal-volume ball keeps the same number of
/// cells: `m(mu) = round(m_ref (mu_ref / mu)^{1/n})`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Template; its `mu` and `m` are replaced per grid point.
    pub minimize: MinimizeConfig,
    pub m_ref: usize,
    pub mu_ref: f64,
}

impl SweepConfig {
    pub fn new(quad: QuadConfig) -> Self {
        let mut minimize = MinimizeConfig::new(1e-2, quad);
        minimize.max_iters = 400;
        Self {
            minimize,
            m_ref: 48,
            mu_ref: 1e-2,
        }
    }

    pub fn grid_size(&self, mu: f64) -> usize {
        let n = self.minimize.quad.kernel.n as f64;
        ((self.m_ref as f64) * (self.mu_ref / mu).powf(1.0 / n)).round().max(8.0) as usize
    }

    pub fn at(&self, mu: f64) -> MinimizeConfig {
        MinimizeConfig {
            mu,
            m: self.grid_size(mu),
            ..self.minimize.clone()
        }
    }
}

/// Minimizers for every volume in `mu_list`, in order.
pub fn mu_sweep(mu_list: &[f64], cfg: &SweepConfig) -> Result<Vec<MinimizeResult>> {
    check_mu_list(mu_list)?;
    mu_list.iter().map(|&mu| minimize(&cfg.at(mu))).collect()
}

/// `|F ∩ {|x1| >= a}| / |F|` for the profile set, exact per cell.
pub fn mass_fraction_beyond(p: &Profile, a: f64) -> Result<f64> {
    let total = volume(p);
    if total <= 0.0 {
        return Err(Error::ZeroVolume);
    }
    let h = p.cell_width();
    let m_d = (p.n() - 1) as i32;
    let tail: f64 = p
        .values()
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let lo = (i as f64 * h).max(a);
            let hi = (i + 1) as f64 * h;
            (hi - lo).max(0.0) * f.powi(m_d)
        })
        .sum();
    Ok(2.0 * ball_volume(p.n() - 1) * tail / total)
}

/// `f(a)` with the jump between the neighbouring cells as its uncertainty.
fn value_with_jump(p: &Profile, a: f64) -> (f64, f64) {
    let h = p.cell_width();
    let v = p.value_at(a);
    let lo = p.value_at((a - 0.5 * h).max(0.0));
    let hi = p.value_at((a + 0.5 * h).min(0.5));
    (v, (lo - hi).abs())
}

/// Density bound at `x1 = 1/4`: `f(1/4) / mu^{1/(n-1)}` and the mass
/// fraction in `{|x1| >= 1/4}` along decreasing volumes.
pub fn density_bound_experiment(mu_list: &[f64], cfg: &SweepConfig) -> Result<ExperimentReport> {
    let runs = mu_sweep(mu_list, cfg)?;
    density_bound_report(mu_list, &runs, &cfg.minimize.quad.kernel)
}

/// Density report from precomputed minimizers.
pub fn density_bound_report(
    mu_list: &[f64],
    runs: &[MinimizeResult],
    kernel: &KernelParams,
) -> Result<ExperimentReport> {
    check_mu_list(mu_list)?;
    if runs.len() != mu_list.len() {
        return Err(Error::InvalidParams("one minimizer per volume required".into()));
    }
    let (n, s) = (kernel.n, kernel.s);
    let mut r = ExperimentReport::new(
        "density",
        "f(1/4)/mu^{1/(n-1)} <= C mu^{s/(n^2(n-1))} and |F ∩ {|x1| >= 1/4}| / |F| <= delta",
        "mu",
        &["scaled_density", "mass_fraction", "energy"],
    );
    let mut q = Vec::new();
    let mut frac = Vec::new();
    for (&mu, run) in mu_list.iter().zip(runs) {
        let p = &run.profile;
        let scale = mu.powf(1.0 / (n - 1) as f64);
        let (f, jump) = value_with_jump(p, 0.25);
        let fr = mass_fraction_beyond(p, 0.25)?;
        let h = p.cell_width();
        let m_d = (n - 1) as i32;
        let cell = 2.0 * ball_volume(n - 1) * h * p.value_at(0.25 - 0.5 * h).powi(m_d) / volume(p);
        r.push_row(
            mu,
            &[(f / scale, jump / scale), (fr, cell), (run.energy.value, run.energy.error)],
        );
        q.push(f / scale);
        frac.push(fr);
    }
    let target = 0.5 * s / (n * n * (n - 1)) as f64;
    let slope = match log_log_slope(mu_list, &q) {
        Some(v) => v,
        // a density that vanishes on the small-volume end decays faster
        // than any power
        None if q.last() == Some(&0.0) => f64::INFINITY,
        None => f64::NAN,
    };
    r.fit("slope", slope, Vec::new());
    r.fit("slope_target", target, Vec::new());
    r.check(
        "mass_fraction_decreasing",
        nonincreasing(&frac),
        format!("mass fractions {frac:?}"),
    );
    r.check(
        "mass_fraction_delta",
        frac.last() <= frac.first(),
        format!("smallest volume {:?}, largest {:?}", frac.last(), frac.first()),
    );
    r.check("density_nonincreasing", nonincreasing(&q), format!("scaled densities {q:?}"));
    r.check(
        "slope_bound",
        slope >= target,
        format!("slope {slope} against 0.5 s/(n^2(n-1)) = {target}"),
    );
    Ok(r)
}

/// `(n^2 - s^2) / (2 n^2 (n - 1))`.
pub fn deficit_exponent(n: usize, s: f64) -> f64 {
    let n2 = (n * n) as f64;
    (n2 - s * s) / (2.0 * n2 * (n - 1) as f64)
}

/// Fraenkel deficit of the minimizers against `C mu^e` with the exponent
/// fixed.
pub fn deficit_scaling_experiment(mu_list: &[f64], cfg: &SweepConfig) -> Result<ExperimentReport> {
    let runs = mu_sweep(mu_list, cfg)?;
    deficit_scaling_report(mu_list, &runs, &cfg.minimize.quad.kernel)
}

/// Deficit report from precomputed minimizers.
pub fn deficit_scaling_report(
    mu_list: &[f64],
    runs: &[MinimizeResult],
    kernel: &KernelParams,
) -> Result<ExperimentReport> {
    check_mu_list(mu_list)?;
    if runs.len() != mu_list.len() {
        return Err(Error::InvalidParams("one minimizer per volume required".into()));
    }
    let e = deficit_exponent(kernel.n, kernel.s);
    let mut r = ExperimentReport::new(
        "deficit",
        "Def(F) <= C mu^{(n^2-s^2)/(2n^2(n-1))}",
        "mu",
        &["deficit", "energy"],
    );
    let mut defs = Vec::new();
    for (&mu, run) in mu_list.iter().zip(runs) {
        let d = fraenkel_deficit(&run.profile)?;
        // staircase floor of a sampled ball
        let floor = 4.0 / run.profile.m() as f64;
        r.push_row(mu, &[(d, floor), (run.energy.value, run.energy.error)]);
        defs.push(d);
    }
    let basis: Vec<f64> = mu_list.iter().map(|mu| mu.powf(e)).collect();
    let c_fit = defs.iter().zip(&basis).map(|(d, b)| d / b).fold(0.0, f64::max);
    let residuals: Vec<f64> = defs.iter().zip(&basis).map(|(d, b)| d - c_fit * b).collect();
    let c_ls = defs.iter().zip(&basis).map(|(d, b)| d * b).sum::<f64>() / basis.iter().map(|b| b * b).sum::<f64>();
    let ls_residuals = defs.iter().zip(&basis).map(|(d, b)| d - c_ls * b).collect();
    r.fit("exponent", e, Vec::new());
    r.fit("c_fit", c_fit, residuals.clone());
    r.fit("c_least_squares", c_ls, ls_residuals);
    r.check("deficit_nonincreasing", nonincreasing(&defs), format!("deficits {defs:?}"));
    r.check(
        "c_fit_finite",
        c_fit.is_finite(),
        format!("C = {c_fit} at exponent {e}"),
    );
    r.check(
        "residuals_one_signed",
        residuals.iter().all(|v| *v <= 0.0),
        format!("residuals {residuals:?}"),
    );
    Ok(r)
}

/// Area of `∂F ∩ {|x1| < 1/2}` by the surface-of-revolution formula
/// `|S^{n-2}| ∫ f^{n-2} sqrt(1 + f'^2) dx1`, with `f'` from centred
/// differences of the node values.
pub fn lateral_area(p: &Profile) -> f64 {
    let v = p.full_period();
    let k = v.len();
    let h = p.cell_width();
    let m_d = (p.n() - 2) as i32;
    let sum: f64 = (0..k)
        .map(|i| {
            let prev = v[(i + k - 1) % k];
            let next = v[(i + 1) % k];
            let slope = (next - prev) / (2.0 * h);
            v[i].powi(m_d) * (1.0 + slope * slope).sqrt()
        })
        .sum();
    sphere_area(p.n() - 2) * sum * h
}

/// `(1 - s) P_S(F)` against `v_{n-1}` times the lateral area along `s_list`,
/// and with a reference profile the ratio `P_S(F) / P_S(G)` against the
/// area ratio.
pub fn s_limit_experiment(
    p: &Profile,
    reference: Option<&Profile>,
    s_list: &[f64],
    cfg: &QuadConfig,
) -> Result<ExperimentReport> {
    if s_list.is_empty() || !s_list.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::InvalidParams("s list must be nonempty and increasing".into()));
    }
    let n = p.n();
    let area = lateral_area(p);
    let ref_area = reference.map(lateral_area);
    let mut r = ExperimentReport::new(
        "s_limit",
        "lim (1-s)/omega_{n-1} P_S(F) = H^{n-1}(dF ∩ {|x1| < 1/2}) as s -> 1",
        "s",
        &["scaled_energy", "ratio", "shape_ratio"],
    );
    let omega = ball_volume(n - 1);
    let points = par_map(s_list, 1, |&s| -> Result<_> {
        let kernel = KernelParams { s, ..cfg.kernel };
        let q = QuadConfig { kernel, ..*cfg };
        let e = energy_profile(p, &q)?;
        let e_ref = reference.map(|g| energy_profile(g, &q)).transpose()?;
        Ok((s, e, e_ref))
    });
    let mut dev = Vec::new();
    let mut shape_dev = Vec::new();
    for point in points {
        let (s, e, e_ref) = point?;
        let scaled = (1.0 - s) * e.value;
        let (ratio, ratio_err) = if area > 0.0 {
            (scaled / (omega * area), (1.0 - s) * e.error / (omega * area))
        } else {
            (f64::NAN, f64::NAN)
        };
        let (shape, shape_err) = match (e_ref, ref_area) {
            (Some(g), Some(_)) if g.value > 0.0 => {
                let v = e.value / g.value;
                (v, v * (e.error / e.value.max(f64::MIN_POSITIVE) + g.error / g.value))
            }
            _ => (f64::NAN, f64::NAN),
        };
        r.push_row(s, &[(scaled, (1.0 - s) * e.error), (ratio, ratio_err), (shape, shape_err)]);
        dev.push((ratio - 1.0).abs());
        if let Some(a) = ref_area {
            shape_dev.push((shape - area / a).abs() / (area / a));
        }
    }
    r.fit("lateral_area", area, Vec::new());
    if area > 0.0 {
        r.check(
            "ratio_approaches_one",
            dev.windows(2).all(|w| w[1] < w[0]),
            format!("distances to 1: {dev:?}"),
        );
    }
    if let Some(a) = ref_area {
        let target = area / a;
        r.fit("area_ratio", target, shape_dev.clone());
        r.check(
            "shape_ratio_approaches_area_ratio",
            shape_dev.windows(2).all(|w| w[1] < w[0]),
            format!("relative deviations {shape_dev:?}"),
        );
        let last = *shape_dev.last().expect("nonempty s list");
        r.check(
            "shape_ratio_within_10_percent",
            last <= 0.1,
            format!("deviation {last} at s = {}", s_list[s_list.len() - 1]),
        );
    }
    Ok(r)
}

/// Settings of the rearrangement experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RearrangeConfig {
    pub trials: usize,
    pub cap: f64,
    /// Cells along `x1`.
    pub m1: usize,
    /// Cells along each transverse axis.
    pub mt: usize,
    /// Side of the transverse box.
    pub side: f64,
    pub kernel: KernelParams,
    pub seed: u64,
    pub threads: usize,
}

impl RearrangeConfig {
    pub fn new(kernel: KernelParams) -> Self {
        Self {
            trials: 50,
            cap: 1e3,
            m1: 32,
            mt: 32,
            side: 1.0,
            kernel,
            seed: 0,
            threads: 1,
        }
    }
}

/// Union of one to four seeded boxes and balls inside the period.
pub fn random_voxel_set(cfg: &RearrangeConfig, trial: usize) -> Result<VoxelSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(trial as u64);
    let n = cfg.kernel.n;
    let half = 0.5 * cfg.side;
    let count = rng.gen_range(1..=4);
    let shapes: Vec<(bool, Vec<f64>, Vec<f64>)> = (0..count)
        .map(|_| {
            let is_ball = rng.gen::<bool>();
            let mut center = vec![rng.gen_range(-0.5..0.5)];
            let mut size = vec![rng.gen_range(0.05..0.3)];
            for _ in 1..n {
                center.push(rng.gen_range(-0.6 * half..0.6 * half));
                size.push(rng.gen_range(0.05..0.3) * half);
            }
            (is_ball, center, size)
        })
        .collect();
    VoxelSet::from_membership(n, cfg.m1, cfg.mt, cfg.side, |x| {
        shapes.iter().any(|(is_ball, c, size)| {
            let d = |k: usize| {
                let t = x[k] - c[k];
                if k == 0 {
                    t - t.round()
                } else {
                    t
                }
            };
            if *is_ball {
                (0..x.len()).map(|k| (d(k) / size[0]).powi(2)).sum::<f64>() <= 1.0
            } else {
                (0..x.len()).all(|k| d(k).abs() <= size[k])
            }
        })
    })
}

/// Capped voxel energy before and after the slice-wise rearrangement, with
/// violations counted beyond twice the discretization tolerance.
pub fn rearrangement_experiment(cfg: &RearrangeConfig) -> Result<ExperimentReport> {
    if cfg.trials == 0 {
        return Err(Error::InvalidParams("need at least one trial".into()));
    }
    let trials: Vec<usize> = (0..cfg.trials).collect();
    let results = par_map(&trials, cfg.threads, |&t| -> Result<_> {
        let v = random_voxel_set(cfg, t)?;
        let star = rearrange_slices(&v);
        let opts = VoxelOptions::default();
        let before = energy_voxel(&v, cfg.cap, &cfg.kernel, opts)?;
        let after = energy_voxel(&star, cfg.cap, &cfg.kernel, opts)?;
        Ok((before.value, after.value, voxel_tolerance(&v, cfg.cap)))
    });
    let mut r = ExperimentReport::new(
        "rearrangement",
        "P_S(F*) <= P_S(F) for the slice-wise symmetric-decreasing rearrangement",
        "trial",
        &["energy", "rearranged_energy", "margin"],
    );
    let mut violations = 0usize;
    for (t, res) in results.into_iter().enumerate() {
        let (before, after, tol) = res?;
        let margin = before - after;
        if margin < -2.0 * tol {
            violations += 1;
        }
        r.push_row(t as f64, &[(before, tol), (after, tol), (margin, 2.0 * tol)]);
    }
    r.fit("violations", violations as f64, Vec::new());
    r.check(
        "no_violations",
        violations == 0,
        format!("{violations} of {} trials beyond tolerance", cfg.trials),
    );
    Ok(r)
}

/// Identity, inequalities and cross-boundary scaling on a list of profiles,
/// plus `Π_S` of the cylinders of radii `cylinder_radii`.
pub fn comparison_experiment(
    profiles: &[Profile],
    cylinder_radii: &[f64],
    cfg: &QuadConfig,
) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new(
        "comparison",
        "P_S <= Per_s, Per_s - P_S = sum over nonzero images, Per_s <= P_S + C(|F|^2 + Pi_S), Pi_S(C_r) <= C r^{n-s}",
        "index",
        &["periodic", "free", "identity_gap", "margin", "constant", "pi_scaled"],
    );
    let mut gaps_ok = true;
    let mut rel_gap = 0.0f64;
    let mut margins_ok = true;
    let mut c_fit = 0.0f64;
    for (i, p) in profiles.iter().enumerate() {
        let ps = energy_profile(p, cfg)?;
        let per = frac_perimeter(p, cfg)?;
        let (lhs, rhs) = interaction_decomposition(p, cfg)?;
        let pi = pi_term(p, cfg)?;
        let gap = lhs.value - rhs.value;
        let gap_err = lhs.error + rhs.error;
        gaps_ok &= gap.abs() <= gap_err;
        if rhs.value.abs() > 0.0 {
            rel_gap = rel_gap.max(gap.abs() / rhs.value.abs());
        }
        let margin = per.value - ps.value;
        let margin_err = per.error + ps.error;
        margins_ok &= margin >= -margin_err;
        let denom = volume(p).powi(2) + pi.value;
        let c = if denom > 0.0 { margin / denom } else { 0.0 };
        c_fit = c_fit.max(c);
        let c_err = if denom > 0.0 { margin_err / denom } else { 0.0 };
        r.push_row(
            i as f64,
            &[
                (ps.value, ps.error),
                (per.value, per.error),
                (gap, gap_err),
                (margin, margin_err),
                (c, c_err),
                (f64::NAN, f64::NAN),
            ],
        );
    }
    let (n, s) = (cfg.kernel.n, cfg.kernel.s);
    let mut scaled = Vec::new();
    for (k, &radius) in cylinder_radii.iter().enumerate() {
        let p = Profile::constant(n, 32, radius)?;
        let pi = pi_term(&p, cfg)?;
        let norm = radius.powf(n as f64 - s);
        scaled.push(pi.value / norm);
        let nan = (f64::NAN, f64::NAN);
        r.push_row(
            (profiles.len() + k) as f64,
            &[nan, nan, nan, nan, nan, (pi.value / norm, pi.error / norm)],
        );
    }
    r.fit("inequality_constant", c_fit, Vec::new());
    r.fit("identity_relative_gap", rel_gap, Vec::new());
    if !profiles.is_empty() {
        r.check("identity_within_error", gaps_ok, format!("max relative gap {rel_gap}"));
        r.check("periodic_below_free", margins_ok, "margins Per_s - P_S".into());
        r.check(
            "upper_inequality_constant_finite",
            c_fit.is_finite(),
            format!("C = {c_fit}"),
        );
    }
    if !scaled.is_empty() {
        let hi = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
        r.fit("pi_scaling_spread", hi / lo, scaled.clone());
        r.check(
            "pi_scaling_within_factor_3",
            lo > 0.0 && hi / lo <= 3.0,
            format!("Pi_S / r^(n-s) = {scaled:?}"),
        );
    }
    Ok(r)
}

/// `K(x) |x'|^{n+s-1}` on a log grid of `|x'| ∈ [1, 100]` for
/// `x1 ∈ {0, 1/4, 1/2}`, against four times the constant fitted on
/// `|x'| ∈ [50, 100]`.
pub fn decay_experiment(params: &KernelParams, points: usize) -> Result<ExperimentReport> {
    if points < 2 {
        return Err(Error::InvalidParams("need at least two grid points".into()));
    }
    let (n, s) = (params.n, params.s);
    let mut r = ExperimentReport::new(
        "decay",
        "K(x) <= C |x'|^{1-n-s} for |x'| >= 1",
        "transverse_distance",
        &["scaled_kernel_0", "scaled_kernel_quarter", "scaled_kernel_half"],
    );
    let radii: Vec<f64> = (0..points)
        .map(|i| 100f64.powf(i as f64 / (points - 1) as f64))
        .collect();
    let mut far = Vec::new();
    let mut all = Vec::new();
    for &rho in &radii {
        let mut row = Vec::new();
        for x1 in [0.0, 0.25, 0.5] {
            let mut x = vec![0.0; n];
            x[0] = x1;
            x[1] = rho;
            let k = periodic_kernel(&x, params)?;
            let w = rho.powf(n as f64 + s - 1.0);
            row.push((k * w, params.tail_tol * w));
            all.push(k * w);
            if rho >= 50.0 {
                far.push(k * w);
            }
        }
        r.push_row(rho, &row);
    }
    if far.is_empty() {
        return Err(Error::InvalidParams("grid has no points in [50, 100]".into()));
    }
    let fitted = far.iter().sum::<f64>() / far.len() as f64;
    let bound = 4.0 * fitted;
    let violations = all.iter().filter(|v| **v > bound).count();
    r.fit("far_field_constant", fitted, far.iter().map(|v| v - fitted).collect());
    r.fit("zero_mode_constant", far_field_constant(n, s), Vec::new());
    r.check(
        "bounded_by_four_fitted",
        violations == 0,
        format!("{violations} grid values above {bound}"),
    );
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(n: usize, s: f64) -> QuadConfig {
        QuadConfig::new(KernelParams::new(n, s).unwrap())
    }

    #[test]
    fn deficit_exponent_value() {
        assert!((deficit_exponent(3, 0.5) - 8.75 / 36.0).abs() < 1e-15);
    }

    #[test]
    fn log_log_slope_recovers_power() {
        let x = [1.0, 0.5, 0.25, 0.125];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(0.7)).collect();
        assert!((log_log_slope(&x, &y).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(log_log_slope(&x, &[0.0; 4]), None);
    }

    #[test]
    fn mass_fraction_of_cylinder_is_half() {
        let p = Profile::constant(3, 16, 0.2).unwrap();
        assert!((mass_fraction_beyond(&p, 0.25).unwrap() - 0.5).abs() < 1e-14);
        let q = Profile::constant(3, 15, 0.2).unwrap();
        assert!((mass_fraction_beyond(&q, 0.25).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn lateral_area_of_cylinder_and_empty_set() {
        let p = Profile::constant(3, 20, 0.1).unwrap();
        assert!((lateral_area(&p) - 2.0 * std::f64::consts::PI * 0.1).abs() < 1e-13);
        let z = Profile::constant(3, 20, 0.0).unwrap();
        assert_eq!(lateral_area(&z), 0.0);
    }

    #[test]
    fn empty_profile_has_zero_scaled_energy() {
        let z = Profile::constant(3, 8, 0.0).unwrap();
        let r = s_limit_experiment(&z, None, &[0.8, 0.9], &quad(3, 0.5)).unwrap();
        assert_eq!(r.column("scaled_energy").unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn rearranged_set_is_a_fixed_point() {
        let cfg = RearrangeConfig {
            m1: 8,
            mt: 8,
            ..RearrangeConfig::new(KernelParams::new(3, 0.5).unwrap())
        };
        let v = rearrange_slices(&random_voxel_set(&cfg, 3).unwrap());
        let again = rearrange_slices(&v);
        let e = |w: &VoxelSet| energy_voxel(w, cfg.cap, &cfg.kernel, VoxelOptions::default()).unwrap().value;
        assert_eq!(e(&v), e(&again));
    }

    #[test]
    fn random_sets_are_seeded() {
        let cfg = RearrangeConfig {
            m1: 8,
            mt: 8,
            ..RearrangeConfig::new(KernelParams::new(3, 0.5).unwrap())
        };
        assert_eq!(random_voxel_set(&cfg, 1).unwrap(), random_voxel_set(&cfg, 1).unwrap());
        assert!((0..6).any(|t| random_voxel_set(&cfg, t).unwrap() != random_voxel_set(&cfg, 1).unwrap()));
    }

    #[test]
    fn small_rearrangement_run_has_no_violations() {
        let cfg = RearrangeConfig {
            trials: 3,
            m1: 8,
            mt: 8,
            ..RearrangeConfig::new(KernelParams::new(3, 0.5).unwrap())
        };
        let r = rearrangement_experiment(&cfg).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
        assert_eq!(r.rows.len(), 3);
    }

    #[test]
    fn decay_is_bounded() {
        let r = decay_experiment(&KernelParams::new(3, 0.5).unwrap(), 25).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
        let c = r.find_fit("far_field_constant").unwrap().value;
        let beta = r.find_fit("zero_mode_constant").unwrap().value;
        assert!((c / beta - 1.0).abs() < 1e-2);
    }

    #[test]
    fn density_report_on_synthetic_runs() {
        let q = quad(3, 0.5);
        let mus = [1e-2, 5e-3];
        let runs: Vec<MinimizeResult> = mus
            .iter()
            .map(|&mu| {
                let p = crate::shapes::rescale_to_volume(&Profile::constant(3, 16, 0.1).unwrap(), mu).unwrap();
                MinimizeResult {
                    energy: energy_profile(&p, &q).unwrap(),
                    profile: p,
                    energy_trace: Vec::new(),
                    volume_residual: 0.0,
                    gradient_norm: 0.0,
                    converged: true,
                    restart_index: 0,
                    restart_energies: vec![0.0],
                }
            })
            .collect();
        let r = density_bound_report(&mus, &runs, &q.kernel).unwrap();
        // cylinders keep half their mass beyond 1/4 and f(1/4) / mu^{1/2} fixed
        for v in r.column("mass_fraction").unwrap() {
            assert!((v - 0.5).abs() < 1e-12);
        }
        assert!(r.find_check("mass_fraction_decreasing").unwrap().passed);
        assert!(r.column("scaled_density").unwrap().iter().all(|v| *v >= 0.0));
        assert!(!r.find_check("slope_bound").unwrap().passed);
        let d = deficit_scaling_report(&mus, &runs, &q.kernel).unwrap();
        assert!(d.find_check("residuals_one_signed").unwrap().passed);
    }

    #[test]
    fn invalid_volume_lists_are_rejected() {
        let q = quad(3, 0.5);
        let cfg = SweepConfig::new(q);
        assert!(mu_sweep(&[1e-2, 2e-2], &cfg).is_err());
        assert!(mu_sweep(&[0.5], &cfg).is_err());
        assert!(mu_sweep(&[], &cfg).is_err());
        assert_eq!(cfg.grid_size(1e-2), 48);
        assert_eq!(cfg.grid_size(1.25e-3), 96);
    }
}
