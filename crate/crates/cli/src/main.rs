use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use sqd_core::chem::{hf_configuration, parse_fcidump, SystemSpec};
use sqd_core::engine::{
    scaling_benchmark, synthetic_problem, write_scaling_csv, DistributedOperator, EngineOptions, ScalingOptions,
};
use sqd_core::lucj::{apply_noise, lucj_state, sample_counts, LucjParameters, NoiseModel, DEFAULT_STATE_CAP};
use sqd_core::orchestrator::{
    extrapolate_zero_variance, read_variance_points, report_run, resume_closed_loop, run_closed_loop, thread_cap,
    PartitionConfig, RunConfig, THREADS_ENV,
};
use sqd_core::sci::{
    energy_variance, solve, solve_with, DavidsonOptions, SubspaceBasis, SubspaceHamiltonian, DEFAULT_VARIANCE_CAP,
};

#[derive(Parser)]
#[command(name = "sqd", version, about = "Closed-loop sample-based quantum diagonalization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Run the two-population closed loop described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Continue the run stored in this directory from its checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Lowest eigenpair of the Hamiltonian projected on a fixed basis.
    Diagonalize {
        #[arg(long)]
        fcidump: PathBuf,
        /// One bitstring per line: 2·n_orb characters for a determinant
        /// (α then β) or n_orb characters for a half shared by every
        /// sector with a matching electron count.
        #[arg(long)]
        basis: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long, default_value_t = 10)]
        max_iter: usize,
        #[arg(long)]
        wall_clock_ms: Option<u64>,
        /// Distributed engine layout `B_alpha,B_beta,T,M`.
        #[arg(long, value_delimiter = ',')]
        partition: Option<Vec<usize>>,
        #[arg(long, value_enum, default_value = "on")]
        balance: Switch,
        /// Also compute the energy variance of the solution.
        #[arg(long)]
        variance: bool,
        /// Write the JSON report here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample a LUCJ circuit from the Hartree-Fock reference.
    Sample {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        shots: u64,
        /// Independent bit-flip probability per measured bit.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Electron counts come from this FCIDUMP ...
        #[arg(long, conflicts_with = "electrons")]
        fcidump: Option<PathBuf>,
        /// ... or are given directly as `N_ALPHA,N_BETA`.
        #[arg(long, value_delimiter = ',')]
        electrons: Option<Vec<usize>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Counts file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time the distributed Hamiltonian application across rank counts.
    BenchScaling {
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        ranks: Vec<usize>,
        #[arg(long, value_enum, default_value = "on")]
        balance: Switch,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        repetitions: usize,
        /// Layouts timed per rank count.
        #[arg(long, default_value_t = 1)]
        plans: usize,
        /// Directory for `scaling_d<dim>.csv`.
        #[arg(long, default_value = "sqd-scaling")]
        out: PathBuf,
    },
    /// Zero-variance intercept of E against ΔE.
    Extrapolate {
        #[arg(long)]
        points: PathBuf,
    },
    /// Regenerate traces, timeline and report.json for a run directory.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn cmd_run(config: &Path, resume: Option<&Path>) -> Result<()> {
    let cfg = RunConfig::load(config).with_context(|| format!("loading {}", config.display()))?;
    let summary = match resume {
        Some(dir) => resume_closed_loop(&cfg, dir)?,
        None => run_closed_loop(&cfg)?,
    };
    print_json(&serde_json::to_value(&summary)?)
}

#[allow(clippy::too_many_arguments)]
fn cmd_diagonalize(
    fcidump: &Path,
    basis: &Path,
    opts: DavidsonOptions,
    partition: Option<Vec<usize>>,
    balance: bool,
    variance: bool,
    out: Option<&Path>,
) -> Result<()> {
    let (ints, spec) = parse_fcidump(fcidump)?;
    let file = File::open(basis).with_context(|| format!("opening {}", basis.display()))?;
    let basis = Arc::new(SubspaceBasis::read_text(BufReader::new(file), spec)?);
    let ints = Arc::new(ints);
    let ham = SubspaceHamiltonian::new(basis.clone(), ints.clone())?;
    let (report, psi, layout) = match partition {
        Some(f) => {
            if f.len() != 4 {
                bail!("--partition takes B_alpha,B_beta,T,M, got {} values", f.len());
            }
            let mut cfg = PartitionConfig {
                b_alpha: f[0],
                b_beta: f[1],
                t: f[2],
                m: f[3],
                balance,
            };
            if let Some(cap) = thread_cap() {
                cfg = cfg.capped(cap);
            }
            let plan = cfg.plan(basis.dim_alpha(), basis.dim_beta())?;
            let layout = [plan.b_alpha, plan.b_beta, plan.t, plan.m];
            let op = DistributedOperator::new(&ham, plan, EngineOptions { balance, ..Default::default() })?;
            let (r, v) = solve_with(&ham, &op, &opts, None)?;
            (r, v, Some(layout))
        }
        None => {
            let (r, v) = solve(&ham, &opts, None)?;
            (r, v, None)
        }
    };
    let variance = if variance {
        Some(energy_variance(&psi, &ints, DEFAULT_VARIANCE_CAP)?)
    } else {
        None
    };
    let value = json!({
        "energy": report.energy,
        "residual_norm": report.residual_norm,
        "iterations": report.iterations,
        "converged": report.converged,
        "termination": report.termination,
        "elapsed_ms": report.elapsed_ms,
        "dim_alpha": basis.dim_alpha(),
        "dim_beta": basis.dim_beta(),
        "dimension": basis.dim(),
        "partition": layout,
        "variance": variance,
    });
    if let Some(path) = out {
        std::fs::write(path, serde_json::to_string_pretty(&value)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    print_json(&value)
}

#[allow(clippy::too_many_arguments)]
fn cmd_sample(
    params: &Path,
    shots: u64,
    noise: f64,
    fcidump: Option<&Path>,
    electrons: Option<Vec<usize>>,
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    let params = LucjParameters::read(params)?;
    let spec = match (fcidump, electrons) {
        (Some(f), _) => {
            let (_, spec) = parse_fcidump(f)?;
            if spec.n_orb != params.n_orb {
                bail!("parameters have {} orbitals, FCIDUMP has {}", params.n_orb, spec.n_orb);
            }
            spec
        }
        (None, Some(e)) if e.len() != 2 => bail!("--electrons takes N_ALPHA,N_BETA"),
        (None, Some(e)) => SystemSpec::new(params.n_orb, e[0], e[1])?,
        (None, None) => bail!("pass --fcidump or --electrons to fix the electron counts"),
    };
    let noise = NoiseModel::new(noise)?;
    let state = lucj_state(&params, spec, hf_configuration(&spec), DEFAULT_STATE_CAP)?;
    let ideal = sample_counts(&state, shots, seed)?;
    // same stream split as the closed loop's simulated sampler
    let batch = apply_noise(&ideal, noise, seed ^ 0x6e01_5e00_0000_0000);
    log::info!("{} shots, {} distinct bitstrings", batch.shots, batch.unique());
    match out {
        Some(path) => {
            let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(f);
            batch.write_text(&mut w)?;
            w.flush()?;
        }
        None => batch.write_text(std::io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_bench_scaling(
    dims: &[usize],
    ranks: Vec<usize>,
    balance: bool,
    seed: u64,
    repetitions: usize,
    plans: usize,
    out: &Path,
) -> Result<()> {
    let mut ranks = ranks;
    if let Some(cap) = thread_cap() {
        let dropped: Vec<usize> = ranks.iter().copied().filter(|&r| r > cap).collect();
        if !dropped.is_empty() {
            log::warn!("{THREADS_ENV}={cap} drops rank counts {dropped:?}");
        }
        ranks.retain(|&r| r <= cap);
    }
    if ranks.is_empty() {
        bail!("no rank counts left to time");
    }
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let opts = ScalingOptions {
        rank_counts: ranks,
        plans_per_count: plans.max(1),
        repetitions: repetitions.max(1),
        engine: EngineOptions { balance, ..Default::default() },
    };
    let mut results = Vec::new();
    for &dim in dims {
        let (ham, psi) = synthetic_problem(dim, seed)?;
        let records = scaling_benchmark(&ham, &psi, &opts)?;
        for r in records.iter().filter(|r| r.error.is_some()) {
            log::warn!("dim {dim}, {} ranks: {}", r.rank_count, r.error.as_deref().unwrap_or(""));
        }
        let path = out.join(format!("scaling_d{dim}.csv"));
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(f);
        write_scaling_csv(&records, &mut w)?;
        w.flush()?;
        results.push(json!({
            "dim": ham.basis().dim(),
            "csv": path,
            "records": records,
        }));
    }
    print_json(&json!(results))
}

fn cmd_extrapolate(points: &Path) -> Result<()> {
    let f = File::open(points).with_context(|| format!("opening {}", points.display()))?;
    let pts = read_variance_points(BufReader::new(f))?;
    let fit = extrapolate_zero_variance(&pts)?;
    print_json(&serde_json::to_value(fit)?)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Some(n) = thread_cap() {
        if !sqd_core::par::init_threads(n) {
            log::debug!("thread pool left as is");
        }
    }
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, resume } => cmd_run(&config, resume.as_deref()),
        Command::Diagonalize {
            fcidump,
            basis,
            tol,
            max_iter,
            wall_clock_ms,
            partition,
            balance,
            variance,
            out,
        } => {
            let opts = DavidsonOptions {
                tol,
                max_iter,
                wall_clock: wall_clock_ms.map(Duration::from_millis),
                max_subspace: None,
            };
            cmd_diagonalize(
                &fcidump,
                &basis,
                opts,
                partition,
                matches!(balance, Switch::On),
                variance,
                out.as_deref(),
            )
        }
        Command::Sample {
            params,
            shots,
            noise,
            fcidump,
            electrons,
            seed,
            out,
        } => cmd_sample(&params, shots, noise, fcidump.as_deref(), electrons, seed, out.as_deref()),
        Command::BenchScaling {
            dims,
            ranks,
            balance,
            seed,
            repetitions,
            plans,
            out,
        } => cmd_bench_scaling(
            &dims,
            ranks,
            matches!(balance, Switch::On),
            seed,
            repetitions,
            plans,
            &out,
        ),
        Command::Extrapolate { points } => cmd_extrapolate(&points),
        Command::Report { run } => print_json(&serde_json::to_value(report_run(&run)?)?),
    }
}
