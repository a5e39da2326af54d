//! Volume-constrained minimization of `P_S` over monotone profiles.
//!
//! Each iterate takes a gradient step, projects onto the nonincreasing
//! nonnegative cone and rescales to the target volume. Step lengths are
//! chosen by backtracking from a Barzilai-Borwein trial step, with a
//! sufficient-decrease test on the composite step.

use std::fmt;

use log::{debug, warn};

use crate::energy::{periodic_energy_values, periodic_gradient_values, EnergyValue, QuadConfig};
use crate::shapes::{rescale_to_volume, volume, Profile};
use crate::special::ball_volume;
use crate::{Error, Result};

/// Euclidean projection onto `{v_0 >= v_1 >= ... >= 0}` by pool adjacent
/// violators followed by clipping at zero.
pub fn project_monotone(values: &[f64]) -> Vec<f64> {
    // blocks of (sum, count), kept nonincreasing in mean
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s1, c1) = blocks[blocks.len() - 1];
            let (s0, c0) = blocks[blocks.len() - 2];
            if s0 / c0 as f64 >= s1 / c1 as f64 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().expect("two blocks present") = (s0 + s1, c0 + c1);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(s, c)| std::iter::repeat((s / c as f64).max(0.0)).take(c))
        .collect()
}

/// Derivative of the discrete `P_S` with respect to each profile value.
///
/// For `n = 2` a zero value has an infinite one-sided derivative, reported
/// as `+∞`.
pub fn energy_gradient(p: &Profile, cfg: &QuadConfig) -> Result<Vec<f64>> {
    periodic_gradient_values(p.n(), p.values(), cfg)
}

/// Central differences of the energy with step `step`; one-sided where a
/// value is closer to zero than the step.
pub fn finite_difference_gradient(p: &Profile, cfg: &QuadConfig, step: f64) -> Result<Vec<f64>> {
    let n = p.n();
    let base = p.values();
    let energy = |v: &[f64]| periodic_energy_values(n, v, cfg).map(|e| e.value);
    let mut grad = Vec::with_capacity(base.len());
    let mut work = base.to_vec();
    for k in 0..base.len() {
        let lo = (base[k] - step).max(0.0);
        let hi = base[k] + step;
        work[k] = hi;
        let up = energy(&work)?;
        work[k] = lo;
        let down = energy(&work)?;
        work[k] = base[k];
        grad.push((up - down) / (hi - lo));
    }
    Ok(grad)
}

/// Finite-difference check of [`energy_gradient`].
#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub rel_errors: Vec<f64>,
    pub max_rel_error: f64,
}

/// Compares the analytic gradient with central differences of step
/// `step_fraction · max f`.
pub fn gradient_fd_check(p: &Profile, cfg: &QuadConfig, step_fraction: f64) -> Result<FdReport> {
    let analytic = energy_gradient(p, cfg)?;
    if p.is_empty_set() {
        let zeros = vec![0.0; p.m()];
        return Ok(FdReport {
            analytic,
            numeric: zeros.clone(),
            rel_errors: zeros,
            max_rel_error: 0.0,
        });
    }
    let numeric = finite_difference_gradient(p, cfg, step_fraction * p.max_value())?;
    let rel_errors: Vec<f64> = analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &b)| {
            let scale = a.abs().max(b.abs());
            if scale == 0.0 {
                0.0
            } else {
                (a - b).abs() / scale
            }
        })
        .collect();
    let max_rel_error = rel_errors.iter().copied().fold(0.0, f64::max);
    Ok(FdReport {
        analytic,
        numeric,
        rel_errors,
        max_rel_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMode {
    Analytic,
    FiniteDifference,
}

impl fmt::Display for GradientMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Analytic => "analytic",
            Self::FiniteDifference => "finite-difference",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRule {
    /// First trial step, as the largest change relative to `max f`.
    pub initial: f64,
    pub backtrack: f64,
    pub armijo: f64,
}

impl Default for StepRule {
    fn default() -> Self {
        Self {
            initial: 0.2,
            backtrack: 0.5,
            armijo: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeConfig {
    pub mu: f64,
    pub m: usize,
    pub max_iters: usize,
    pub step: StepRule,
    pub gradient: GradientMode,
    /// Restart 0 starts from a ball, 1 from a cylinder, later ones from
    /// random monotone profiles.
    pub restarts: usize,
    pub seed: u64,
    /// Stop when the energy drops by less than `stop_rel_tol · energy` over
    /// five iterations.
    pub stop_rel_tol: f64,
    /// Stop when the projected gradient norm falls below this value.
    pub grad_tol: f64,
    pub threads: usize,
    pub quad: QuadConfig,
}

impl MinimizeConfig {
    pub fn new(mu: f64, quad: QuadConfig) -> Self {
        Self {
            mu,
            m: 32,
            max_iters: 200,
            step: StepRule::default(),
            gradient: GradientMode::Analytic,
            restarts: 3,
            seed: 0,
            stop_rel_tol: 1e-7,
            grad_tol: 1e-9,
            threads: 1,
            quad,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.quad.validate()?;
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return bad(format!("volume {} must be positive", self.mu));
        }
        if self.m < 8 {
            return bad(format!("grid size {} below 8", self.m));
        }
        if self.restarts < 1 {
            return bad("need at least one restart".into());
        }
        let s = &self.step;
        if !(s.initial > 0.0) || !(s.backtrack > 0.0 && s.backtrack < 1.0) || !(s.armijo > 0.0 && s.armijo < 1.0) {
            return bad(format!("invalid step rule {s:?}"));
        }
        if !(self.stop_rel_tol >= 0.0) || !(self.grad_tol >= 0.0) {
            return bad("stopping tolerances must be nonnegative".into());
        }
        Ok(())
    }

    fn n(&self) -> usize {
        self.quad.kernel.n
    }
}

/// One optimizer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub energy: f64,
    pub volume_residual: f64,
    pub grad_norm: f64,
}

impl TraceRow {
    pub const CSV_HEADER: &'static str = "iter,energy,volume_residual,grad_norm";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.16e},{:.16e},{:.16e}",
            self.iter, self.energy, self.volume_residual, self.grad_norm
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeResult {
    pub profile: Profile,
    pub energy: EnergyValue,
    pub energy_trace: Vec<TraceRow>,
    pub volume_residual: f64,
    pub gradient_norm: f64,
    pub converged: bool,
    pub restart_index: usize,
    /// Final energy of every restart, in restart order.
    pub restart_energies: Vec<f64>,
}

/// Starting profile of the given restart, rescaled to volume `mu`.
pub fn initial_profile(cfg: &MinimizeConfig, restart: usize) -> Result<Profile> {
    let (n, m) = (cfg.n(), cfg.m);
    let raw = match restart {
        0 => Profile::ball(n, m, (cfg.mu / ball_volume(n)).powf(1.0 / n as f64).min(0.5))?,
        1 => Profile::constant(n, m, 0.25)?,
        k => Profile::random(n, m, cfg.seed.wrapping_add(k as u64), 0.25)?,
    };
    let raw = if raw.is_empty_set() {
        Profile::constant(n, m, 0.25)?
    } else {
        raw
    };
    rescale_to_volume(&raw, cfg.mu)
}

fn residual(p: &Profile, mu: f64) -> f64 {
    (volume(p) - mu).abs() / mu
}

fn gradient(values: &[f64], cfg: &MinimizeConfig) -> Result<Vec<f64>> {
    let p = Profile::new(cfg.n(), values.to_vec())?;
    let mut g = match cfg.gradient {
        GradientMode::Analytic => energy_gradient(&p, &cfg.quad)?,
        GradientMode::FiniteDifference => finite_difference_gradient(&p, &cfg.quad, 1e-4 * p.max_value())?,
    };
    // a zero radius with an infinite one-sided derivative stays at zero
    for (gi, &v) in g.iter_mut().zip(values) {
        if !gi.is_finite() && v == 0.0 {
            *gi = 0.0;
        }
    }
    Ok(g)
}

/// Projection onto the feasible set: monotone cone, then volume rescaling.
fn retract(values: &[f64], cfg: &MinimizeConfig) -> Option<Profile> {
    let projected = project_monotone(values);
    let p = Profile::new(cfg.n(), projected).ok()?;
    rescale_to_volume(&p, cfg.mu).ok()
}

struct Run {
    profile: Profile,
    energy: EnergyValue,
    trace: Vec<TraceRow>,
    grad_norm: f64,
    converged: bool,
}

fn run(cfg: &MinimizeConfig, restart: usize) -> Result<Run> {
    let n = cfg.n();
    let mut p = initial_profile(cfg, restart)?;
    let mut energy = periodic_energy_values(n, p.values(), &cfg.quad)?;
    let mut trace = vec![TraceRow {
        iter: 0,
        energy: energy.value,
        volume_residual: residual(&p, cfg.mu),
        grad_norm: f64::NAN,
    }];
    let mut scale = cfg.step.initial;
    let mut grad_norm = f64::INFINITY;
    let mut converged = false;
    let mut previous: Option<(Vec<f64>, Vec<f64>)> = None;
    for iter in 1..=cfg.max_iters {
        let g = gradient(p.values(), cfg)?;
        let g_max = g.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if g_max == 0.0 {
            grad_norm = 0.0;
            converged = true;
            break;
        }
        let cap = cfg.step.initial * p.max_value() / g_max;
        // Barzilai-Borwein trial step from the last accepted move
        let bb = previous.as_ref().and_then(|(x0, g0)| {
            let (mut ss, mut sy) = (0.0, 0.0);
            for k in 0..g.len() {
                let (sk, yk) = (p.values()[k] - x0[k], g[k] - g0[k]);
                ss += sk * sk;
                sy += sk * yk;
            }
            (sy > 0.0).then(|| ss / sy)
        });
        let mut alpha = bb.unwrap_or(scale * p.max_value() / g_max).min(cap);
        let mut accepted = None;
        while alpha * g_max > 1e-14 * p.max_value() {
            let trial: Vec<f64> = p.values().iter().zip(&g).map(|(v, gi)| v - alpha * gi).collect();
            if let Some(q) = retract(&trial, cfg) {
                let moved: f64 = q.values().iter().zip(p.values()).map(|(a, b)| (a - b).powi(2)).sum();
                let e = periodic_energy_values(n, q.values(), &cfg.quad)?;
                if e.value <= energy.value - cfg.step.armijo * moved / alpha {
                    accepted = Some((q, e, moved.sqrt() / alpha, alpha));
                    break;
                }
            }
            alpha *= cfg.step.backtrack;
        }
        let Some((q, e, norm, used)) = accepted else {
            debug!("restart {restart}: line search stalled at iteration {iter}");
            converged = true;
            break;
        };
        scale = (used * g_max / p.max_value() / cfg.step.backtrack).min(cfg.step.initial);
        previous = Some((p.values().to_vec(), g));
        p = q;
        energy = e;
        grad_norm = norm;
        trace.push(TraceRow {
            iter,
            energy: energy.value,
            volume_residual: residual(&p, cfg.mu),
            grad_norm,
        });
        if grad_norm < cfg.grad_tol {
            converged = true;
            break;
        }
        if trace.len() > 5 {
            let before = trace[trace.len() - 6].energy;
            if before - energy.value < cfg.stop_rel_tol * energy.value {
                converged = true;
                break;
            }
        }
    }
    Ok(Run {
        profile: p,
        energy,
        trace,
        grad_norm,
        converged,
    })
}

/// Minimizes `P_S` over monotone profiles of volume `mu`, returning the best
/// of the restarts.
pub fn minimize(cfg: &MinimizeConfig) -> Result<MinimizeResult> {
    cfg.validate()?;
    let threads = cfg.threads.clamp(1, cfg.restarts);
    let mut runs: Vec<Option<Result<Run>>> = (0..cfg.restarts).map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunk = cfg.restarts.div_ceil(threads);
        for (t, out) in runs.chunks_mut(chunk).enumerate() {
            scope.spawn(move || {
                for (k, slot) in out.iter_mut().enumerate() {
                    *slot = Some(run(cfg, t * chunk + k));
                }
            });
        }
    });
    let runs: Vec<Run> = runs
        .into_iter()
        .map(|r| r.expect("every restart ran"))
        .collect::<Result<_>>()?;
    let restart_energies: Vec<f64> = runs.iter().map(|r| r.energy.value).collect();
    let canonical = &restart_energies[..restart_energies.len().min(3)];
    let lo = canonical.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = canonical.iter().copied().fold(0.0, f64::max);
    if hi > 1.01 * lo {
        warn!("restart energies differ by more than 1%: {canonical:?}");
    }
    let best = (0..runs.len())
        .min_by(|&a, &b| restart_energies[a].total_cmp(&restart_energies[b]))
        .expect("at least one restart");
    let run = runs.into_iter().nth(best).expect("best index in range");
    Ok(MinimizeResult {
        volume_residual: residual(&run.profile, cfg.mu),
        profile: run.profile,
        energy: run.energy,
        energy_trace: run.trace,
        gradient_norm: run.grad_norm,
        converged: run.converged,
        restart_index: best,
        restart_energies,
    })
}
