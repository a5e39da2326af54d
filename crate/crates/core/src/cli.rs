//! Command-line front end. Every command parses its configuration, calls the
//! library and writes a key-value record, CSV tables and plot data to the
//! output directory.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{
    comparison_experiment, decay_experiment, deficit_scaling_report, density_bound_report, mu_sweep,
    rearrangement_experiment, s_limit_experiment, ExperimentReport, RearrangeConfig, SweepConfig,
};
use crate::energy::{
    energy_mc, energy_profile, energy_voxel, frac_perimeter, frac_perimeter_ball, interaction_decomposition,
    pi_term, voxel_tolerance, EnergyValue, McConfig, QuadConfig, VoxelOptions,
};
use crate::io::{csv, fmt_real, parse_profile, profile_csv, report_csv, report_record, write_file, Record};
use crate::kernel::{capped_kernel, periodic_kernel_bounded, KernelParams};
use crate::minimize::{minimize, GradientMode, MinimizeConfig, TraceRow};
use crate::shapes::{rearrange_slices, volume, Profile};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;

/// Default volume grid of the density and deficit experiments.
pub const DEFAULT_MU_GRID: [f64; 4] = [1e-2, 5e-3, 2.5e-3, 1.25e-3];

#[derive(Parser, Debug, Clone, PartialEq)]
#[command(name = "fracperim", version, about = "Periodic nonlocal perimeter of sets of revolution")]
pub struct RunConfig {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every command.
#[derive(Args, Debug, Clone, PartialEq)]
pub struct Common {
    /// Ambient dimension.
    #[arg(long, global = true, default_value_t = 3)]
    pub n: usize,
    /// Fractional order in (0, 1).
    #[arg(long, global = true, default_value_t = 0.5)]
    pub s: f64,
    /// Minimal half-width of the summed image window.
    #[arg(long, global = true, default_value_t = 12)]
    pub k_max: usize,
    /// Bound on the neglected image tail.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub tail_tol: f64,
    /// Relative tolerance of the quadrature.
    #[arg(long, global = true, default_value_t = 1e-6)]
    pub rel_tol: f64,
    /// Transverse truncation radius; default max(4 max f, 4).
    #[arg(long, global = true)]
    pub r_max: Option<f64>,
    /// Cells on [0, 1/2] for profiles, or per axis for voxel sets.
    #[arg(long, global = true, default_value_t = 32)]
    pub grid: usize,
    /// Target volume, or a comma-separated decreasing list for experiments.
    #[arg(long, global = true, value_delimiter = ',')]
    pub mu: Vec<f64>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Log verbosity on stderr; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Subcommand, Debug, Clone, PartialEq)]
pub enum Command {
    /// Periodic perimeter P_S of a profile set.
    Energy {
        /// Profile literal: cyl:R, ball:R, file:PATH or rand:SEED:M.
        #[arg(long)]
        profile: String,
        #[arg(long, value_enum, default_value_t = EnergyMethod::Quadrature)]
        method: EnergyMethod,
        /// Monte Carlo samples.
        #[arg(long, default_value_t = 4_000_000)]
        samples: u64,
    },
    /// Free fractional perimeter Per_s of a profile set.
    Perimeter {
        #[arg(long)]
        profile: String,
    },
    /// Per_s - P_S against the sum over nonzero images.
    Decompose {
        #[arg(long)]
        profile: String,
    },
    /// Cross-boundary interaction term.
    PiTerm {
        #[arg(long)]
        profile: String,
    },
    /// Volume-constrained minimization of P_S.
    Minimize {
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
        #[arg(long, default_value_t = 3)]
        restarts: usize,
        #[arg(long, value_enum, default_value_t = GradientChoice::Analytic)]
        gradient: GradientChoice,
    },
    /// Scripted experiments.
    Experiment {
        #[command(subcommand)]
        kind: Experiment,
    },
    /// Capped voxel energy of a random set before and after slice-wise
    /// rearrangement.
    Rearrange {
        /// Index of the seeded random set.
        #[arg(long, default_value_t = 0)]
        trial: usize,
        /// Kernel cap.
        #[arg(long, default_value_t = 1e3)]
        cap: f64,
    },
    /// Periodic kernel at a point and along a transverse ray through it.
    KernelProbe {
        /// Point coordinates, comma-separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
        /// Kernel cap.
        #[arg(long)]
        cap: Option<f64>,
        /// Points of the transverse scan on [1, 100].
        #[arg(long, default_value_t = 41)]
        points: usize,
    },
}

#[derive(Subcommand, Debug, Clone, PartialEq)]
pub enum Experiment {
    /// Density at x1 = 1/4 along decreasing volumes.
    Density(SweepArgs),
    /// Fraenkel deficit along decreasing volumes.
    Deficit(SweepArgs),
    /// (1 - s) P_S against the lateral area as s -> 1.
    SLimit {
        #[arg(long, default_value = "cyl:0.1")]
        profile: String,
        /// Second profile for the shape-ratio test.
        #[arg(long, default_value = "cyl:0.2")]
        reference: Option<String>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.8, 0.9, 0.95, 0.99])]
        s_list: Vec<f64>,
    },
    /// Rearrangement monotonicity on random voxel sets.
    Rearrange {
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 1e3)]
        cap: f64,
    },
    /// Identity, inequalities and cross-boundary scaling.
    Comparison {
        /// Profile literals; default five random profiles.
        #[arg(long)]
        profile: Vec<String>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.1, 0.05])]
        radii: Vec<f64>,
    },
    /// Far-field decay of the periodic kernel.
    Decay {
        #[arg(long, default_value_t = 41)]
        points: usize,
    },
}

#[derive(Args, Debug, Clone, PartialEq)]
pub struct SweepArgs {
    /// Cells at the reference volume.
    #[arg(long, default_value_t = 48)]
    pub m_ref: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub mu_ref: f64,
    #[arg(long, default_value_t = 400)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 3)]
    pub restarts: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyMethod {
    Quadrature,
    Mc,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientChoice {
    Analytic,
    Fd,
}

impl Common {
    pub fn kernel(&self) -> Result<KernelParams> {
        KernelParams::new(self.n, self.s)?.with_window(self.k_max, self.tail_tol)
    }

    pub fn quad(&self) -> Result<QuadConfig> {
        let q = QuadConfig {
            r_max: self.r_max,
            ..QuadConfig::new(self.kernel()?).with_rel_tol(self.rel_tol)
        };
        q.validate()?;
        Ok(q)
    }

    pub fn profile(&self, literal: &str) -> Result<Profile> {
        parse_profile(literal, self.n, self.grid)
    }

    fn single_mu(&self) -> Result<f64> {
        match self.mu.as_slice() {
            [mu] => Ok(*mu),
            _ => Err(Error::InvalidParams("minimize needs exactly one --mu".into())),
        }
    }

    fn mu_grid(&self) -> Vec<f64> {
        if self.mu.is_empty() {
            DEFAULT_MU_GRID.to_vec()
        } else {
            self.mu.clone()
        }
    }

    fn mc(&self, samples: u64) -> McConfig {
        McConfig {
            samples,
            seed: self.seed,
            threads: self.threads.max(1),
            ..McConfig::default()
        }
    }
}

impl SweepArgs {
    pub fn sweep(&self, common: &Common) -> Result<SweepConfig> {
        let mut cfg = SweepConfig::new(common.quad()?);
        cfg.m_ref = self.m_ref;
        cfg.mu_ref = self.mu_ref;
        cfg.minimize.max_iters = self.max_iters;
        cfg.minimize.restarts = self.restarts;
        cfg.minimize.seed = common.seed;
        cfg.minimize.threads = common.threads.max(1);
        Ok(cfg)
    }
}

impl RunConfig {
    /// Optimizer settings of the `minimize` command.
    pub fn minimize_config(&self) -> Result<MinimizeConfig> {
        let Command::Minimize {
            max_iters,
            restarts,
            gradient,
        } = &self.command
        else {
            return Err(Error::InvalidParams("not a minimize command".into()));
        };
        let c = &self.common;
        let mut cfg = MinimizeConfig::new(c.single_mu()?, c.quad()?);
        cfg.m = c.grid;
        cfg.max_iters = *max_iters;
        cfg.restarts = *restarts;
        cfg.gradient = match gradient {
            GradientChoice::Analytic => GradientMode::Analytic,
            GradientChoice::Fd => GradientMode::FiniteDifference,
        };
        cfg.seed = c.seed;
        cfg.threads = c.threads.max(1);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Settings of the rearrangement experiment and command.
    pub fn rearrange_config(&self, trials: usize) -> Result<RearrangeConfig> {
        let c = &self.common;
        Ok(RearrangeConfig {
            trials,
            m1: c.grid,
            mt: c.grid,
            seed: c.seed,
            threads: c.threads.max(1),
            ..RearrangeConfig::new(c.kernel()?)
        })
    }

    /// Command line that parses back to this configuration.
    pub fn to_args(&self) -> Vec<String> {
        let c = &self.common;
        let mut a = vec!["fracperim".to_string()];
        let mut flag = |name: &str, value: String| {
            a.push(format!("--{name}"));
            a.push(value);
        };
        flag("n", c.n.to_string());
        flag("s", c.s.to_string());
        flag("k-max", c.k_max.to_string());
        flag("tail-tol", c.tail_tol.to_string());
        flag("rel-tol", c.rel_tol.to_string());
        if let Some(r) = c.r_max {
            flag("r-max", r.to_string());
        }
        flag("grid", c.grid.to_string());
        if !c.mu.is_empty() {
            flag("mu", join(&c.mu));
        }
        flag("seed", c.seed.to_string());
        flag("threads", c.threads.to_string());
        flag("out", c.out.display().to_string());
        if c.verbose > 0 {
            a.push(format!("-{}", "v".repeat(c.verbose as usize)));
        }
        let mut cmd: Vec<String> = Vec::new();
        let mut push = |parts: &[&str]| cmd.extend(parts.iter().map(|p| p.to_string()));
        match &self.command {
            Command::Energy {
                profile,
                method,
                samples,
            } => push(&[
                "energy",
                "--profile",
                profile,
                "--method",
                value_name(*method).as_str(),
                "--samples",
                &samples.to_string(),
            ]),
            Command::Perimeter { profile } => push(&["perimeter", "--profile", profile]),
            Command::Decompose { profile } => push(&["decompose", "--profile", profile]),
            Command::PiTerm { profile } => push(&["pi-term", "--profile", profile]),
            Command::Minimize {
                max_iters,
                restarts,
                gradient,
            } => push(&[
                "minimize",
                "--max-iters",
                &max_iters.to_string(),
                "--restarts",
                &restarts.to_string(),
                "--gradient",
                value_name(*gradient).as_str(),
            ]),
            Command::Rearrange { trial, cap } => {
                push(&["rearrange", "--trial", &trial.to_string(), "--cap", &cap.to_string()])
            }
            Command::KernelProbe { x, cap, points } => {
                push(&["kernel-probe", "--x", &join(x), "--points", &points.to_string()]);
                if let Some(m) = cap {
                    push(&["--cap", &m.to_string()]);
                }
            }
            Command::Experiment { kind } => {
                push(&["experiment"]);
                match kind {
                    Experiment::Density(sw) | Experiment::Deficit(sw) => {
                        let name = if matches!(kind, Experiment::Density(_)) { "density" } else { "deficit" };
                        push(&[
                            name,
                            "--m-ref",
                            &sw.m_ref.to_string(),
                            "--mu-ref",
                            &sw.mu_ref.to_string(),
                            "--max-iters",
                            &sw.max_iters.to_string(),
                            "--restarts",
                            &sw.restarts.to_string(),
                        ]);
                    }
                    Experiment::SLimit {
                        profile,
                        reference,
                        s_list,
                    } => {
                        push(&["s-limit", "--profile", profile, "--s-list", &join(s_list)]);
                        if let Some(r) = reference {
                            push(&["--reference", r]);
                        }
                    }
                    Experiment::Rearrange { trials, cap } => {
                        push(&["rearrange", "--trials", &trials.to_string(), "--cap", &cap.to_string()])
                    }
                    Experiment::Comparison { profile, radii } => {
                        push(&["comparison", "--radii", &join(radii)]);
                        for p in profile {
                            push(&["--profile", p]);
                        }
                    }
                    Experiment::Decay { points } => push(&["decay", "--points", &points.to_string()]),
                }
            }
        }
        a.extend(cmd);
        a
    }

    /// Stable key-value rendering of the configuration.
    pub fn record(&self) -> Record {
        let args = self.to_args();
        let mut kept = Vec::new();
        let mut it = args[1..].iter();
        while let Some(a) = it.next() {
            // the output location is not part of the run
            if a == "--out" {
                it.next();
            } else {
                kept.push(a.as_str());
            }
        }
        let mut r = Record::new();
        r.text("command", kept.join(" "));
        r
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn value_name<T: ValueEnum>(v: T) -> String {
    v.to_possible_value().expect("no skipped variants").get_name().to_string()
}

fn energy_record(r: &mut Record, prefix: &str, e: &EnergyValue) {
    r.real(&format!("{prefix}.value"), e.value)
        .real(&format!("{prefix}.error"), e.error)
        .text(&format!("{prefix}.method"), e.method)
        .text(&format!("{prefix}.count"), e.count);
}

/// Writes `record.txt` plus extra files; returns the summary line.
struct Output<'a> {
    dir: &'a Path,
}

impl Output<'_> {
    fn write(&self, name: &str, contents: &str) -> Result<()> {
        write_file(self.dir, name, contents)
    }
}

fn report_files(out: &Output, r: &ExperimentReport) -> Result<String> {
    out.write(&format!("{}.csv", r.name), &report_csv(r))?;
    out.write(&format!("{}.txt", r.name), &report_record(r).render())?;
    let failed: Vec<&str> = r.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    Ok(if failed.is_empty() {
        format!("{}: all {} checks passed", r.name, r.checks.len())
    } else {
        format!("{}: failed {}", r.name, failed.join(", "))
    })
}

/// Executes the parsed command. Returns the summary line and whether the
/// run converged.
pub fn execute(cfg: &RunConfig) -> Result<(String, bool)> {
    let c = &cfg.common;
    let out = Output { dir: &c.out };
    out.write("config.txt", &cfg.record().render())?;
    let mut rec = Record::new();
    let mut converged = true;
    let summary = match &cfg.command {
        Command::Energy {
            profile,
            method,
            samples,
        } => {
            let p = c.profile(profile)?;
            let e = match method {
                EnergyMethod::Quadrature => energy_profile(&p, &c.quad()?)?,
                EnergyMethod::Mc => {
                    let bound = p.max_value().max(f64::MIN_POSITIVE);
                    energy_mc(&|x: &[f64]| p.contains(x), bound, &c.kernel()?, &c.mc(*samples))?
                }
            };
            rec.text("profile", profile).real("volume", volume(&p));
            energy_record(&mut rec, "energy", &e);
            out.write("profile.csv", &profile_csv(&p))?;
            format!("energy {} ± {}", fmt_real(e.value), fmt_real(e.error))
        }
        Command::Perimeter { profile } => {
            let p = c.profile(profile)?;
            let q = c.quad()?;
            let e = frac_perimeter(&p, &q)?;
            rec.text("profile", profile);
            energy_record(&mut rec, "perimeter", &e);
            if let Some(r) = profile.strip_prefix("ball:") {
                let radius: f64 = r.parse().map_err(|_| Error::Parse(format!("radius `{r}`")))?;
                energy_record(&mut rec, "ball_perimeter", &frac_perimeter_ball(radius, &q)?);
            }
            out.write("profile.csv", &profile_csv(&p))?;
            format!("perimeter {} ± {}", fmt_real(e.value), fmt_real(e.error))
        }
        Command::Decompose { profile } => {
            let p = c.profile(profile)?;
            let (lhs, rhs) = interaction_decomposition(&p, &c.quad()?)?;
            rec.text("profile", profile);
            energy_record(&mut rec, "difference", &lhs);
            energy_record(&mut rec, "image_sum", &rhs);
            rec.real("gap", lhs.value - rhs.value);
            format!("decompose gap {}", fmt_real(lhs.value - rhs.value))
        }
        Command::PiTerm { profile } => {
            let p = c.profile(profile)?;
            let e = pi_term(&p, &c.quad()?)?;
            rec.text("profile", profile);
            energy_record(&mut rec, "pi_term", &e);
            format!("pi-term {} ± {}", fmt_real(e.value), fmt_real(e.error))
        }
        Command::Minimize { .. } => {
            let mcfg = cfg.minimize_config()?;
            let res = minimize(&mcfg)?;
            converged = res.converged;
            rec.real("mu", mcfg.mu)
                .text("m", mcfg.m)
                .text("gradient", mcfg.gradient)
                .text("converged", res.converged)
                .text("iterations", res.energy_trace.len())
                .text("restart_index", res.restart_index)
                .reals("restart_energies", &res.restart_energies)
                .real("volume_residual", res.volume_residual)
                .real("gradient_norm", res.gradient_norm);
            energy_record(&mut rec, "energy", &res.energy);
            rec.reals("profile", res.profile.values());
            out.write("profile.csv", &profile_csv(&res.profile))?;
            let trace: Vec<Vec<f64>> = res
                .energy_trace
                .iter()
                .map(|t| vec![t.iter as f64, t.energy, t.volume_residual, t.grad_norm])
                .collect();
            let cols: Vec<&str> = TraceRow::CSV_HEADER.split(',').collect();
            out.write("trace.csv", &csv(&cols, &trace))?;
            format!("minimize energy {} converged {}", fmt_real(res.energy.value), res.converged)
        }
        Command::Rearrange { trial, cap } => {
            let rc = cfg.rearrange_config(trial + 1)?;
            let v = crate::analysis::random_voxel_set(&rc, *trial)?;
            let star = rearrange_slices(&v);
            let opts = VoxelOptions::default();
            let before = energy_voxel(&v, *cap, &rc.kernel, opts)?;
            let after = energy_voxel(&star, *cap, &rc.kernel, opts)?;
            let tol = voxel_tolerance(&v, *cap);
            energy_record(&mut rec, "energy", &before);
            energy_record(&mut rec, "rearranged_energy", &after);
            rec.real("tolerance", tol).real("volume", v.volume());
            let rows: Vec<Vec<f64>> = v
                .slice_counts()
                .iter()
                .enumerate()
                .map(|(i, k)| vec![-0.5 + (i as f64 + 0.5) / v.m1() as f64, *k as f64 * v.cell_volume()])
                .collect();
            out.write("slices.csv", &csv(&["x1", "area"], &rows))?;
            format!("rearrange {} -> {}", fmt_real(before.value), fmt_real(after.value))
        }
        Command::KernelProbe { x, cap, points } => {
            let k = c.kernel()?;
            if x.len() != c.n {
                return Err(Error::InvalidParams(format!("point has {} coordinates, need {}", x.len(), c.n)));
            }
            let v = periodic_kernel_bounded(x, &k)?;
            rec.reals("x", x).real("value", v.value).real("tail_bound", v.tail_bound).text("window", v.window);
            if let Some(m) = cap {
                rec.real("capped", capped_kernel(x, *m, &k)?);
            }
            let r = decay_experiment(&k, *points)?;
            out.write("decay.csv", &report_csv(&r))?;
            format!("kernel {}", fmt_real(v.value))
        }
        Command::Experiment { kind } => match kind {
            Experiment::Density(sw) | Experiment::Deficit(sw) => {
                let mus = c.mu_grid();
                let sweep = sw.sweep(c)?;
                let runs = mu_sweep(&mus, &sweep)?;
                converged = runs.iter().all(|r| r.converged);
                let kernel = sweep.minimize.quad.kernel;
                let report = if matches!(kind, Experiment::Density(_)) {
                    density_bound_report(&mus, &runs, &kernel)?
                } else {
                    deficit_scaling_report(&mus, &runs, &kernel)?
                };
                for (mu, run) in mus.iter().zip(&runs) {
                    out.write(&format!("profile_mu_{mu}.csv"), &profile_csv(&run.profile))?;
                }
                rec.reals("mu", &mus);
                report_files(&out, &report)?
            }
            Experiment::SLimit {
                profile,
                reference,
                s_list,
            } => {
                let p = c.profile(profile)?;
                let g = reference.as_deref().map(|r| c.profile(r)).transpose()?;
                let report = s_limit_experiment(&p, g.as_ref(), s_list, &c.quad()?)?;
                report_files(&out, &report)?
            }
            Experiment::Rearrange { trials, cap } => {
                let rc = RearrangeConfig {
                    cap: *cap,
                    ..cfg.rearrange_config(*trials)?
                };
                report_files(&out, &rearrangement_experiment(&rc)?)?
            }
            Experiment::Comparison { profile, radii } => {
                let literals: Vec<String> = if profile.is_empty() {
                    (0..5).map(|k| format!("rand:{}:{}", c.seed + k, c.grid)).collect()
                } else {
                    profile.clone()
                };
                let profiles = literals.iter().map(|l| c.profile(l)).collect::<Result<Vec<_>>>()?;
                rec.text("profiles", literals.join(" "));
                report_files(&out, &comparison_experiment(&profiles, radii, &c.quad()?)?)?
            }
            Experiment::Decay { points } => report_files(&out, &decay_experiment(&c.kernel()?, *points)?)?,
        },
    };
    rec.text("summary", &summary);
    out.write("record.txt", &rec.render())?;
    Ok((summary, converged))
}

/// Parses `argv`, runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(argv) {
        Ok(cfg) => cfg,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let level = match cfg.common.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    match execute(&cfg) {
        Ok((summary, converged)) => {
            println!("{summary}");
            if converged {
                EXIT_OK
            } else {
                eprintln!("warning: optimizer stopped before convergence");
                EXIT_NONCONVERGENCE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                EXIT_NONCONVERGENCE
            } else {
                EXIT_INVALID
            }
        }
    }
}
