//! Command-line front end: configure models, run simulations, estimate
//! moments, emit tables, and produce verdict reports.
//!
//! Exit codes: 0 decided, 2 usage/config error, 3 inconclusive verdict.

use crate::config::{load_config, RunConfig};
use crate::correlation::{
    discreteness_verdict, point_process_verdict, recover_rho, VerdictConfig, VerdictOutcome,
};
use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, OffDiagonalBox, Window};
use crate::moments::{csv_rows, xi_sequence, MomentSource};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "momentcone",
    about = "Simulate random discrete measures, estimate their moment measures, and decide discreteness from moments",
    version
)]
struct Cli {
    /// JSON run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config entry by dotted path, e.g. --set model.rate=2.0
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw seeded samples of the configured model and write them with a
    /// manifest
    Simulate {
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the moment tables M_{i_1..i_n}(Δ) and write them as CSV
    Moments {
        /// sample file from `simulate`; omit for analytic moments
        #[arg(long)]
        samples: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the discreteness / point-process verdict and write the JSON
    /// evidence report
    Verdict {
        /// sample file from `simulate`; omit for the analytic verdict
        #[arg(long)]
        samples: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover the correlation measure of the lifted point process on the
    /// configured window
    RecoverRho {
        #[arg(long)]
        samples: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// order of the correlation measure
        #[arg(long, default_value_t = 1)]
        order: usize,
    },
    /// Run the built-in oracle and property checks
    Selftest,
}

#[derive(Serialize, Deserialize)]
struct SampleFile {
    manifest: Manifest,
    samples: Vec<DiscreteMeasure>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    model: crate::models::MeasureModel,
    window: Window,
    seed: u64,
    samples: usize,
    trunc_eps: f64,
    config_hash: String,
}

/// Entry point used by the binary; returns the process exit code.
pub fn run_cli() -> i32 {
    init_threads();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn init_threads() {
    if let Ok(v) = std::env::var("MOMENTCONE_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
}

fn require_config(cli_config: &Option<PathBuf>, overrides: &[String]) -> Result<RunConfig> {
    let path = cli_config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required for this command".into()))?;
    load_config(path, overrides)
}

fn dispatch(cli: Cli) -> Result<i32> {
    match &cli.command {
        Command::Simulate { out } => {
            let cfg = require_config(&cli.config, &cli.overrides)?;
            cmd_simulate(&cfg, out)?;
            Ok(0)
        }
        Command::Moments { samples, out } => {
            let cfg = require_config(&cli.config, &cli.overrides)?;
            cmd_moments(&cfg, samples.as_deref(), out)?;
            Ok(0)
        }
        Command::Verdict { samples, out } => {
            let cfg = require_config(&cli.config, &cli.overrides)?;
            let outcome = cmd_verdict(&cfg, samples.as_deref(), out)?;
            Ok(match outcome {
                VerdictOutcome::Inconclusive => 3,
                _ => 0,
            })
        }
        Command::RecoverRho { samples, out, order } => {
            let cfg = require_config(&cli.config, &cli.overrides)?;
            cmd_recover_rho(&cfg, samples.as_deref(), out, *order)?;
            Ok(0)
        }
        Command::Selftest => Ok(cmd_selftest()),
    }
}

fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let window = cfg.effective_window();
    let samples: Vec<DiscreteMeasure> = (0..cfg.samples)
        .map(|i| crate::models::sample(&cfg.model, &window, cfg.seed, i as u64, cfg.trunc_eps))
        .collect::<Result<_>>()?;
    let file = SampleFile {
        manifest: Manifest {
            model: cfg.model.clone(),
            window,
            seed: cfg.seed,
            samples: cfg.samples,
            trunc_eps: cfg.trunc_eps,
            config_hash: cfg.hash(),
        },
        samples,
    };
    write_json(out, &file)
}

fn load_samples(path: &Path) -> Result<SampleFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let file: SampleFile = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("sample file {}: {e}", path.display())))?;
    if file.samples.is_empty() {
        return Err(Error::Config("sample file contains no samples".into()));
    }
    Ok(file)
}

fn source_from(cfg: &RunConfig, samples: Option<&Path>) -> Result<(MomentSource, Window)> {
    match samples {
        Some(path) => {
            let file = load_samples(path)?;
            let window = file.manifest.window.clone();
            Ok((MomentSource::empirical(file.samples, window.clone())?, window))
        }
        None => Ok((MomentSource::analytic(cfg.model.clone()), cfg.effective_window())),
    }
}

fn cmd_moments(cfg: &RunConfig, samples: Option<&Path>, out: &Path) -> Result<()> {
    let (source, window) = source_from(cfg, samples)?;
    let mut rows = vec!["n,powers,delta_id,value,stderr".to_string()];
    // the order-0 moment is 1 exactly for every source
    rows.push("0,,M0,1,0".to_string());
    let ladder: Vec<Window> = (1..=cfg.ladder_levels)
        .map(|l| Window::centered_cube(l as f64, cfg.dim()))
        .filter(|w| window.contains_window(w))
        .collect();
    let windows: Vec<(String, Window)> = if ladder.is_empty() {
        vec![("W".to_string(), window.clone())]
    } else {
        ladder
            .into_iter()
            .enumerate()
            .map(|(i, w)| (format!("L{}", i + 1), w))
            .collect()
    };
    for n in 1..=cfg.n_max {
        let degree = cfg.degree_cap.saturating_sub(n as u32);
        for (id, w) in &windows {
            let delta = OffDiagonalBox::power(w, n);
            let seq = xi_sequence(&source, &delta, degree)?;
            rows.extend(csv_rows(&seq, id));
        }
    }
    let mut f = std::fs::File::create(out)?;
    for row in rows {
        // CSV contract: `.` decimal, `,` separator, LF line endings
        f.write_all(row.as_bytes())?;
        f.write_all(b"\n")?;
    }
    Ok(())
}

fn cmd_verdict(cfg: &RunConfig, samples: Option<&Path>, out: &Path) -> Result<VerdictOutcome> {
    let (source, window) = source_from(cfg, samples)?;
    // the default centered-cube ladder when no window is configured;
    // otherwise a nested ladder scaled inside the configured window
    let base = if cfg.window.is_some() {
        VerdictConfig::scaled_to_window(&window, cfg.ladder_levels)
    } else {
        VerdictConfig::default_for_dim(cfg.dim(), cfg.ladder_levels)
    };
    let vcfg = VerdictConfig {
        n_max: cfg.n_max,
        degree_cap: if source.is_empirical() {
            cfg.degree_cap
        } else {
            crate::moments::MAX_DEGREE_CAP
        },
        tolerances: cfg.tolerances.clone(),
        ..base
    }
    .clamped_to(&window);
    if vcfg.ladder.is_empty() {
        return Err(Error::Config(
            "no ladder window fits inside the sampling window; enlarge the window".into(),
        ));
    }
    let verdict = point_process_verdict(&source, &vcfg)?;
    #[derive(Serialize)]
    struct VerdictFile<'a> {
        outcome: VerdictOutcome,
        seed: u64,
        sample_count: usize,
        config_hash: String,
        verdict: &'a crate::correlation::Verdict,
    }
    write_json(
        out,
        &VerdictFile {
            outcome: verdict.outcome,
            seed: cfg.seed,
            sample_count: source.sample_count(),
            config_hash: cfg.hash(),
            verdict: &verdict,
        },
    )?;
    println!("verdict: {:?}", verdict.outcome);
    Ok(verdict.outcome)
}

fn cmd_recover_rho(cfg: &RunConfig, samples: Option<&Path>, out: &Path, order: usize) -> Result<()> {
    let (source, window) = source_from(cfg, samples)?;
    let rho = recover_rho(&source, order, &window, cfg.degree_cap, cfg.cells_per_axis)?;
    #[derive(Serialize)]
    struct RhoFile {
        n: usize,
        cells: Vec<Window>,
        cell_quadratures: Vec<crate::momentproblem::QuadratureMeasure>,
        atom_count: usize,
        xi_total_mass: f64,
    }
    let xi_total = rho.xi_box_mass(&vec![(window.clone(), 0.0, f64::INFINITY); order]);
    write_json(
        out,
        &RhoFile {
            n: rho.n,
            cells: rho.cells.clone(),
            cell_quadratures: rho.cell_quadratures.clone(),
            atom_count: rho.atomic.tuples.len(),
            xi_total_mass: xi_total,
        },
    )
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn cmd_selftest() -> i32 {
    let mut failures = 0;
    let mut check = |name: &str, ok: bool| {
        println!("selftest {name}: {}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    // partition counts against the Bell recurrence
    let bell_ok = (1..=8usize).all(|n| {
        crate::combinatorics::enumerate_partitions(n)
            .map(|p| num_bigint::BigUint::from(p.len()) == crate::combinatorics::bell_number(n))
            .unwrap_or(false)
    });
    check("partition counts (Bell, n ≤ 8)", bell_ok);

    // pairing counts against the closed form
    let pair_ok = (1..=4usize).all(|m| {
        (1..=4usize).all(|n| {
            let all = crate::combinatorics::enumerate_pairings(m, n).unwrap();
            (0..=m.min(n)).all(|k| {
                let f = crate::combinatorics::factorial_u64;
                let expect = f(m as u64) * f(n as u64)
                    / (f((m - k) as u64) * f((n - k) as u64) * f(k as u64));
                all.iter().filter(|p| p.len() == k).count() as u64 == expect
            })
        })
    });
    check("pairing counts (m, n ≤ 4)", pair_ok);

    // quadrature moment reproduction on random atomic measures
    let mut quad_ok = true;
    for trial in 0..20u64 {
        let mut rng_state = trial.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
        let mut next = || {
            rng_state = rng_state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (rng_state >> 11) as f64 / (1u64 << 53) as f64
        };
        let k = 2 + (trial % 3) as usize;
        let nodes: Vec<f64> = (0..k).map(|j| 0.2 + j as f64 + next()).collect();
        let weights: Vec<f64> = (0..k).map(|_| 0.1 + next()).collect();
        let r: Vec<f64> = (0..(2 * k + 1) as i32)
            .map(|i| nodes.iter().zip(&weights).map(|(t, w)| w * t.powi(i)).sum())
            .collect();
        match crate::momentproblem::quadrature_from_moments(&r) {
            Ok(q) => {
                for (i, ri) in r.iter().enumerate().take(r.len() - 1) {
                    if (q.moment(i as u32) - ri).abs() > 1e-9 * ri.abs().max(1.0) {
                        quad_ok = false;
                    }
                }
            }
            Err(_) => quad_ok = false,
        }
    }
    check("quadrature moment reproduction (20 random measures)", quad_ok);

    // exponential-integral inversion round trip
    let e1_ok = [1e-4, 0.3, 2.0, 9.0].iter().all(|&t| {
        let y = crate::special::exp_integral_e1(t);
        (crate::special::inverse_exp_integral_e1(y, 1e-6) - t).abs() < 1e-9 * t.max(1.0)
    });
    check("exponential integral inversion", e1_ok);

    // analytic gamma moments: rising factorial
    let src = MomentSource::analytic(crate::models::MeasureModel::Gamma { rate: 1.0 });
    let w = Window::interval(0.0, 1.0);
    let gamma_ok = (1..=5usize).all(|n| {
        let expect: f64 = (0..n).map(|k| 1.0 + k as f64).product();
        src.full_moment(n, &w)
            .map(|m| (m.value - expect).abs() < 1e-10 * expect)
            .unwrap_or(false)
    });
    check("gamma full moments (n ≤ 5)", gamma_ok);

    // verdict smoke: gamma Discrete, diffuse NotDiscrete, Poisson PP
    let vcfg = VerdictConfig {
        ladder: vec![Window::centered_cube(1.0, 1)],
        shrink_ladder: (0..=2).map(|j| Window::centered_cube(2.0f64.powi(-j), 1)).collect(),
        extra_deltas: vec![],
        n_max: 2,
        degree_cap: crate::moments::MAX_DEGREE_CAP,
        tolerances: Default::default(),
    };
    let verdict_ok = discreteness_verdict(
        &MomentSource::analytic(crate::models::MeasureModel::Gamma { rate: 1.0 }),
        &vcfg,
    )
    .map(|v| v.outcome == VerdictOutcome::Discrete)
    .unwrap_or(false)
        && discreteness_verdict(
            &MomentSource::analytic(crate::models::MeasureModel::DeterministicDiffuse {
                density: 1.0,
            }),
            &vcfg,
        )
        .map(|v| v.outcome == VerdictOutcome::NotDiscrete)
        .unwrap_or(false)
        && point_process_verdict(
            &MomentSource::analytic(crate::models::MeasureModel::PoissonPp { rate: 1.0 }),
            &vcfg,
        )
        .map(|v| v.outcome == VerdictOutcome::PointProcess)
        .unwrap_or(false);
    check("verdict smoke (gamma / diffuse / poisson)", verdict_ok);

    if failures == 0 {
        println!("selftest: all checks passed");
        0
    } else {
        println!("selftest: {failures} check(s) FAILED");
        1
    }
}
