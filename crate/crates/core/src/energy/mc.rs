//! Monte Carlo estimate of `P_S` for sets given by a membership predicate.
//!
//! Points `x` are drawn uniformly in a bounding cylinder of the period and
//! displacements `z` from the power-law density `∝ |z|^{-(n+s)}` on
//! `|z| >= ε`; the hit indicator `1[x ∈ E, x + z ∉ E_per]` is scaled by the
//! mass of that density. The ball `|z| < ε` is restored from the hit rate in
//! the innermost shells, which grows linearly with `|z|` for a boundary
//! that is flat at scale `ε`. When the two shells disagree beyond their noise
//! and the implied bias exceeds the standard error, `ε` shrinks eightfold and
//! the estimate is redrawn.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{EnergyValue, Method};
use crate::kernel::KernelParams;
use crate::special::{ball_volume, sphere_area};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub samples: u64,
    pub batches: usize,
    pub seed: u64,
    /// Near-zone radius as a fraction of the bounding radius.
    pub near_fraction: f64,
    pub threads: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            samples: 4_000_000,
            batches: 128,
            seed: 0,
            near_fraction: 1e-3,
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Batch {
    draws: u64,
    inside: u64,
    hits: u64,
    shell_hits: [u64; 2],
    shell_radius: [f64; 2],
}

fn unit_vector(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    loop {
        let mut norm = 0.0;
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
            norm += *v * *v;
        }
        if norm > 1e-300 {
            let inv = norm.sqrt().recip();
            out.iter_mut().for_each(|v| *v *= inv);
            return;
        }
    }
}

fn run_batch(
    index: usize,
    draws: u64,
    n: usize,
    s: f64,
    bound: f64,
    eps: f64,
    seed: u64,
    membership: &(dyn Fn(&[f64]) -> bool + Sync),
) -> Batch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let m_d = n - 1;
    let mut b = Batch {
        draws,
        ..Batch::default()
    };
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut dir_t = vec![0.0; m_d];
    let mut dir = vec![0.0; n];
    for _ in 0..draws {
        x[0] = rng.gen::<f64>() - 0.5;
        unit_vector(&mut rng, &mut dir_t);
        let rad = bound * rng.gen::<f64>().powf(1.0 / m_d as f64);
        for k in 0..m_d {
            x[k + 1] = rad * dir_t[k];
        }
        if !membership(&x) {
            continue;
        }
        b.inside += 1;
        unit_vector(&mut rng, &mut dir);
        let rho = eps * (1.0 - rng.gen::<f64>()).powf(-1.0 / s);
        for k in 0..n {
            y[k] = x[k] + rho * dir[k];
        }
        y[0] -= y[0].round();
        let hit = !membership(&y);
        b.hits += hit as u64;
        let shell = if rho < 2.0 * eps {
            Some(0)
        } else if rho < 4.0 * eps {
            Some(1)
        } else {
            None
        };
        if let Some(k) = shell {
            b.shell_hits[k] += hit as u64;
            b.shell_radius[k] += rho;
        }
    }
    b
}

/// Monte Carlo estimate of `∫_{E∩S} ∫_{S\E} K(x - y) dy dx` for the set `E`
/// with `E ∩ S ⊂ {|x'| <= bound_radius}`.
pub fn energy_mc(
    membership: &(dyn Fn(&[f64]) -> bool + Sync),
    bound_radius: f64,
    kernel: &KernelParams,
    cfg: &McConfig,
) -> Result<EnergyValue> {
    kernel.validate()?;
    if !(bound_radius > 0.0) || !bound_radius.is_finite() {
        return Err(Error::InvalidParams(format!("bound radius {bound_radius} must be positive")));
    }
    if cfg.batches < 2 || cfg.samples < cfg.batches as u64 {
        return Err(Error::InvalidParams("need at least two batches and one sample per batch".into()));
    }
    if !(cfg.near_fraction > 0.0 && cfg.near_fraction < 1.0) {
        return Err(Error::InvalidParams(format!("near_fraction {} outside (0, 1)", cfg.near_fraction)));
    }
    let mut eps = cfg.near_fraction * bound_radius;
    loop {
        match estimate(membership, bound_radius, kernel, cfg, eps)? {
            Outcome::Done(v) => return Ok(v),
            Outcome::Empty => {
                return Ok(EnergyValue {
                    count: cfg.samples,
                    ..EnergyValue::zero(Method::MonteCarlo)
                })
            }
            Outcome::Biased { bias, stderr } => {
                if eps / bound_radius < MIN_NEAR_FRACTION {
                    return Err(Error::CapBiasDominant { bias, stderr });
                }
                log::debug!("near-zone bias {bias:.3e} > stderr {stderr:.3e}; shrinking radius {eps:.3e}");
                eps /= 8.0;
            }
        }
    }
}

enum Outcome {
    Done(EnergyValue),
    Empty,
    Biased { bias: f64, stderr: f64 },
}

/// Smallest near-zone radius, relative to the bounding radius, tried before
/// giving up on the linear near-zone model.
const MIN_NEAR_FRACTION: f64 = 1e-7;

fn estimate(
    membership: &(dyn Fn(&[f64]) -> bool + Sync),
    bound_radius: f64,
    kernel: &KernelParams,
    cfg: &McConfig,
    eps: f64,
) -> Result<Outcome> {
    let (n, s) = (kernel.n, kernel.s);
    let per = cfg.samples / cfg.batches as u64;
    let extra = cfg.samples % cfg.batches as u64;
    let draws = |i: usize| per + u64::from((i as u64) < extra);
    let threads = cfg.threads.clamp(1, cfg.batches);
    let mut batches = vec![Batch::default(); cfg.batches];
    std::thread::scope(|scope| {
        let chunk = cfg.batches.div_ceil(threads);
        for (t, out) in batches.chunks_mut(chunk).enumerate() {
            scope.spawn(move || {
                for (k, slot) in out.iter_mut().enumerate() {
                    let i = t * chunk + k;
                    *slot = run_batch(i, draws(i), n, s, bound_radius, eps, cfg.seed, membership);
                }
            });
        }
    });

    if batches.iter().all(|b| b.inside == 0) {
        return Ok(Outcome::Empty);
    }
    let cylinder = ball_volume(n - 1) * bound_radius.powi(n as i32 - 1);
    let mass = sphere_area(n - 1) * eps.powf(-s) / s;
    let near_scale = sphere_area(n - 1) * eps.powf(1.0 - s) / (1.0 - s);
    let rate = |hits: u64, radius: f64| if radius > 0.0 { hits as f64 / radius } else { 0.0 };
    let totals: Vec<f64> = batches
        .iter()
        .map(|b| {
            let main = cylinder * mass * b.hits as f64 / b.draws as f64;
            let kappa = rate(b.shell_hits[0] + b.shell_hits[1], b.shell_radius[0] + b.shell_radius[1]);
            let volume = cylinder * b.inside as f64 / b.draws as f64;
            main + volume * near_scale * kappa
        })
        .collect();
    let count = totals.len() as f64;
    let mean = totals.iter().sum::<f64>() / count;
    let var = totals.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (count - 1.0);
    let stderr = (var / count).sqrt();

    // linear-in-radius hit rate on each shell, with its Poisson deviation
    let shell = |k: usize| {
        let hits: u64 = batches.iter().map(|b| b.shell_hits[k]).sum();
        let radius: f64 = batches.iter().map(|b| b.shell_radius[k]).sum();
        (rate(hits, radius), rate(1, radius) * (hits as f64).sqrt())
    };
    let ((inner, inner_dev), (outer, outer_dev)) = (shell(0), shell(1));
    let inside: u64 = batches.iter().map(|b| b.inside).sum();
    let volume = cylinder * inside as f64 / cfg.samples as f64;
    let kappa = rate(
        batches.iter().map(|b| b.shell_hits[0] + b.shell_hits[1]).sum(),
        batches.iter().map(|b| b.shell_radius[0] + b.shell_radius[1]).sum(),
    );
    let correction = volume * near_scale * kappa;
    let (bias, significant) = if kappa > 0.0 {
        let gap = (outer - inner).abs();
        let noise = inner_dev.hypot(outer_dev);
        (correction * gap / kappa, gap > 3.0 * noise)
    } else {
        (0.0, false)
    };
    if significant && bias > stderr {
        return Ok(Outcome::Biased { bias, stderr });
    }
    Ok(Outcome::Done(EnergyValue {
        value: mean,
        error: stderr + bias,
        method: Method::MonteCarlo,
        count: cfg.samples,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::transverse_mass;

    fn small() -> McConfig {
        McConfig {
            samples: 200_000,
            batches: 8,
            seed: 11,
            near_fraction: 1e-3,
            threads: 2,
        }
    }

    #[test]
    fn empty_set_is_exactly_zero() {
        let k = KernelParams::new(3, 0.5).unwrap();
        let v = energy_mc(&|_: &[f64]| false, 0.3, &k, &small()).unwrap();
        assert_eq!((v.value, v.error), (0.0, 0.0));
    }

    #[test]
    fn same_seed_is_bit_identical_across_thread_counts() {
        let k = KernelParams::new(3, 0.5).unwrap();
        let ball = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>() <= 0.04;
        let a = energy_mc(&ball, 0.2, &k, &small()).unwrap();
        let b = energy_mc(&ball, 0.2, &k, &McConfig { threads: 1, ..small() }).unwrap();
        assert_eq!(a, b);
        let c = energy_mc(&ball, 0.2, &k, &McConfig { seed: 12, ..small() }).unwrap();
        assert_ne!(a.value, c.value);
    }

    #[test]
    fn transverse_strip_matches_closed_form() {
        let (a, s) = (0.3, 0.3);
        let k = KernelParams::new(2, s).unwrap();
        let cfg = McConfig {
            samples: 1_000_000,
            ..small()
        };
        let strip = |x: &[f64]| x[1].abs() <= a;
        let v = energy_mc(&strip, a, &k, &cfg).unwrap();
        let exact = 2.0 * transverse_mass(1, 1.0 + 0.5 * s) * (2.0 * a).powf(1.0 - s) / (s * (1.0 - s));
        assert!((v.value - exact).abs() < 4.0 * v.error, "{} vs {exact} ± {}", v.value, v.error);
        assert!(v.error < 0.02 * exact);
    }

    #[test]
    fn coarse_near_zone_is_refined() {
        // the strip half-width is ε / 2, so the shell hit rates are far from linear
        let (w, s) = (0.005, 0.8);
        let k = KernelParams::new(2, s).unwrap();
        let cfg = McConfig {
            samples: 1_000_000,
            near_fraction: 0.2,
            ..small()
        };
        let strip = |x: &[f64]| x[1].abs() <= w;
        let v = energy_mc(&strip, 10.0 * w, &k, &cfg).unwrap();
        let exact = 2.0 * transverse_mass(1, 1.0 + 0.5 * s) * (2.0 * w).powf(1.0 - s) / (s * (1.0 - s));
        assert!((v.value - exact).abs() < 4.0 * v.error, "{} vs {exact} ± {}", v.value, v.error);
        assert!(v.error < 0.05 * exact);
    }
}
