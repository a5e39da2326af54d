//! Acceptance suite: runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails.
//!
//! Usage: cargo test --release --test acceptance

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use fracperim::analysis::{
    comparison_experiment, decay_experiment, deficit_scaling_report, density_bound_report, mu_sweep,
    rearrangement_experiment, s_limit_experiment, RearrangeConfig, SweepConfig,
};
use fracperim::cli;
use fracperim::energy::{energy_mc, energy_profile, McConfig, QuadConfig};
use fracperim::kernel::KernelParams;
use fracperim::minimize::{gradient_fd_check, project_monotone};
use fracperim::shapes::Profile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn quad(n: usize, s: f64) -> QuadConfig {
    QuadConfig::new(KernelParams::new(n, s).expect("valid kernel"))
}

fn random_profiles(n: usize, count: u64, first_seed: u64) -> Vec<Profile> {
    (first_seed..first_seed + count)
        .map(|k| Profile::random(n, 16, k, 0.25).expect("valid profile"))
        .collect()
}

fn oracle_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    let mut cases = 0;
    for n in [2, 3] {
        let mut shapes = vec![
            ("cylinder", Profile::constant(n, 32, 0.25).unwrap()),
            ("ball", Profile::ball(n, 32, 0.2).unwrap()),
        ];
        shapes.extend(random_profiles(n, 10, 0).into_iter().map(|p| ("random", p)));
        for s in [0.3, 0.5, 0.8] {
            let q = quad(n, s);
            for (k, (name, p)) in shapes.iter().enumerate() {
                cases += 1;
                let exact = energy_profile(p, &q).expect("quadrature");
                let cfg = McConfig {
                    seed: 1000 + cases as u64,
                    ..McConfig::default()
                };
                let mc = match energy_mc(&|x: &[f64]| p.contains(x), p.max_value(), &q.kernel, &cfg) {
                    Ok(v) => v,
                    Err(e) => {
                        failures.push(format!("n={n} s={s} {name}#{k}: {e}"));
                        continue;
                    }
                };
                let sigma = (exact.value - mc.value).abs() / (exact.error + mc.error);
                worst = worst.max(sigma);
                if sigma > 3.0 {
                    failures.push(format!("n={n} s={s} {name}#{k}: {sigma:.2} error bars"));
                }
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!("{cases} cases, worst {worst:.2} combined error bars {failures:?}"),
    )
}

fn identity() -> Outcome {
    let q = quad(3, 0.5).with_rel_tol(1e-4);
    let mut profiles = random_profiles(3, 3, 50);
    profiles.push(Profile::constant(3, 16, 0.2).unwrap());
    profiles.push(Profile::ball(3, 16, 0.3).unwrap());
    let r = comparison_experiment(&profiles, &[], &q).expect("comparison");
    let within = r.find_check("identity_within_error").unwrap();
    let gap = r.find_fit("identity_relative_gap").unwrap().value;
    outcome(within.passed && gap <= 1e-3, format!("relative gap {gap:.3e}, {}", within.detail))
}

fn periodic_below_free() -> Outcome {
    let r = comparison_experiment(&random_profiles(3, 20, 100), &[], &quad(3, 0.5)).expect("comparison");
    let margins = r.column("margin").unwrap();
    let min = margins.iter().copied().fold(f64::INFINITY, f64::min);
    let c = r.find_check("periodic_below_free").unwrap();
    outcome(c.passed, format!("20 profiles, smallest margin {min:.6e}"))
}

fn kernel_decay() -> Outcome {
    let mut violations = Vec::new();
    for n in [2, 3] {
        for s in [0.3, 0.5, 0.8] {
            let r = decay_experiment(&KernelParams::new(n, s).unwrap(), 41).expect("decay");
            if !r.passed() {
                violations.push(format!("n={n} s={s}: {}", r.checks[0].detail));
            }
        }
    }
    outcome(violations.is_empty(), format!("6 kernels, violations {violations:?}"))
}

fn pi_scaling() -> Outcome {
    let r = comparison_experiment(&[], &[0.2, 0.1, 0.05], &quad(3, 0.5)).expect("comparison");
    let c = r.find_check("pi_scaling_within_factor_3").unwrap();
    let spread = r.find_fit("pi_scaling_spread").unwrap().value;
    outcome(c.passed, format!("max/min {spread:.4}, {}", c.detail))
}

fn gradient() -> Outcome {
    let p = Profile::smooth_random(3, 32, 5, 0.25).unwrap();
    let r = gradient_fd_check(&p, &quad(3, 0.5).with_rel_tol(1e-10), 1e-4).expect("gradient check");
    outcome(r.max_rel_error <= 1e-3, format!("max relative error {:.3e}", r.max_rel_error))
}

fn rearrangement() -> Outcome {
    let cfg = RearrangeConfig::new(KernelParams::new(3, 0.5).unwrap());
    let start = Instant::now();
    let r = rearrangement_experiment(&cfg).expect("rearrangement");
    let secs = start.elapsed().as_secs_f64();
    let c = r.find_check("no_violations").unwrap();
    outcome(c.passed && secs < 300.0, format!("{}, {secs:.0} s", c.detail))
}

fn volume_trends(mus: &[f64]) -> (Outcome, Outcome) {
    let q = quad(3, 0.5);
    let runs = mu_sweep(mus, &SweepConfig::new(q)).expect("optimizer sweep");
    let d = density_bound_report(mus, &runs, &q.kernel).unwrap();
    let density = outcome(
        ["mass_fraction_decreasing", "density_nonincreasing", "slope_bound"]
            .iter()
            .all(|c| d.find_check(c).unwrap().passed),
        format!(
            "mass fractions {:?}, scaled f(1/4) {:?}, slope {} vs {:.4}",
            d.column("mass_fraction").unwrap(),
            d.column("scaled_density").unwrap(),
            d.find_fit("slope").unwrap().value,
            d.find_fit("slope_target").unwrap().value
        ),
    );
    let f = deficit_scaling_report(mus, &runs, &q.kernel).unwrap();
    let deficit = outcome(
        f.passed(),
        format!(
            "deficits {:?}, C {:.4}, failed {:?}",
            f.column("deficit").unwrap(),
            f.find_fit("c_fit").unwrap().value,
            f.checks.iter().filter(|c| !c.passed).map(|c| &c.name).collect::<Vec<_>>()
        ),
    );
    (density, deficit)
}

fn s_limit() -> Outcome {
    let a = Profile::constant(3, 32, 0.1).unwrap();
    let b = Profile::constant(3, 32, 0.2).unwrap();
    let r = s_limit_experiment(&a, Some(&b), &[0.8, 0.9, 0.95, 0.99], &quad(3, 0.5)).expect("s limit");
    let mono = r.find_check("shape_ratio_approaches_area_ratio").unwrap();
    let close = r.find_check("shape_ratio_within_10_percent").unwrap();
    outcome(mono.passed && close.passed, mono.detail.clone())
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .map(|entries| {
            entries
                .map(|e| e.unwrap().path())
                .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
                .collect()
        })
        .unwrap_or_default()
}

fn determinism() -> Outcome {
    let commands: &[&[&str]] = &[
        &["energy", "--profile", "cyl:0.25", "--n", "3", "--s", "0.5"],
        &["energy", "--profile", "ball:0.2", "--method", "mc", "--samples", "200000", "--seed", "3"],
        &["perimeter", "--profile", "ball:0.2"],
        &["decompose", "--profile", "rand:4:12"],
        &["pi-term", "--profile", "cyl:0.1"],
        &["minimize", "--mu", "1e-3", "--n", "3", "--s", "0.5", "--seed", "7"],
        &["rearrange", "--trial", "2", "--grid", "16", "--seed", "9"],
        &["kernel-probe", "--x", "0.3,2,0", "--cap", "1"],
        &["experiment", "density", "--mu", "1e-2,5e-3", "--m-ref", "12", "--max-iters", "20"],
        &["experiment", "deficit", "--mu", "1e-2,5e-3", "--m-ref", "12", "--max-iters", "20"],
        &["experiment", "s-limit", "--s-list", "0.8,0.9"],
        &["experiment", "rearrange", "--trials", "2", "--grid", "8"],
        &["experiment", "comparison", "--grid", "8"],
        &["experiment", "decay", "--points", "9"],
    ];
    let root = tempfile::tempdir().unwrap();
    let mut differing = Vec::new();
    for (k, args) in commands.iter().enumerate() {
        let mut trees = Vec::new();
        let mut codes = Vec::new();
        for rep in 0..2 {
            let dir = root.path().join(format!("{k}-{rep}"));
            let mut argv = vec!["fracperim".to_string(), "--out".into(), dir.display().to_string()];
            argv.extend(args.iter().map(|a| a.to_string()));
            codes.push(cli::run(&argv));
            trees.push(read_tree(&dir));
        }
        let ok = codes[0] == codes[1] && codes[0] != cli::EXIT_INVALID && !trees[0].is_empty() && trees[0] == trees[1];
        if !ok {
            differing.push(format!("{} (exit {:?})", args.join(" "), codes));
        }
    }
    outcome(
        differing.is_empty(),
        format!("{} commands, differing {differing:?}", commands.len()),
    )
}

/// Projection by enumerating contiguous block partitions with a zero tail:
/// the minimizer is the closest feasible candidate.
fn brute_force_projection(v: &[f64]) -> Vec<f64> {
    let m = v.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for zero_from in 0..=m {
        let head = &v[..zero_from];
        let cuts = zero_from.saturating_sub(1);
        for mask in 0u32..(1 << cuts) {
            let mut cand = vec![0.0; m];
            let mut start = 0;
            for end in 1..=zero_from {
                if end == zero_from || mask & (1 << (end - 1)) != 0 {
                    let mean = head[start..end].iter().sum::<f64>() / (end - start) as f64;
                    cand[start..end].iter_mut().for_each(|c| *c = mean);
                    start = end;
                }
            }
            if cand.windows(2).any(|w| w[1] > w[0]) || cand.iter().any(|c| *c < 0.0) {
                continue;
            }
            let dist: f64 = cand.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum();
            if best.as_ref().is_none_or(|(d, _)| dist < *d) {
                best = Some((dist, cand));
            }
        }
    }
    best.expect("the zero vector is feasible").1
}

fn projection() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let v: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..2.0)).collect();
        let fast = project_monotone(&v);
        let slow = brute_force_projection(&v);
        let err = fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(err);
    }
    outcome(worst <= 1e-9, format!("100 trials, max deviation {worst:.3e}"))
}

fn report(index: usize, name: &str, run: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let o = run();
    let verdict = if o.passed { "PASS" } else { "FAIL" };
    println!(
        "criterion {index:>2} {verdict} {name} [{:.0} s] {}",
        start.elapsed().as_secs_f64(),
        o.detail
    );
    o.passed
}

fn main() {
    let mut passed = Vec::new();
    passed.push(report(1, "oracle equivalence", oracle_equivalence));
    passed.push(report(2, "decomposition identity", identity));
    passed.push(report(3, "periodic perimeter below free perimeter", periodic_below_free));
    passed.push(report(4, "far-field kernel decay", kernel_decay));
    passed.push(report(5, "cross-boundary term scaling", pi_scaling));
    passed.push(report(6, "gradient check", gradient));
    passed.push(report(7, "rearrangement monotonicity", rearrangement));
    let (density, deficit) = volume_trends(&[1e-2, 5e-3, 2.5e-3, 1.25e-3]);
    passed.push(report(8, "density trend in the volume", || density));
    passed.push(report(9, "deficit trend in the volume", || deficit));
    passed.push(report(10, "s -> 1 shape ratio", s_limit));
    passed.push(report(11, "CLI determinism", determinism));
    passed.push(report(12, "monotone projection oracle", projection));
    let failed = passed.iter().filter(|p| !**p).count();
    println!("{} of {} criteria passed", passed.len() - failed, passed.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
