use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use atlas_core::dynamics::{run, TrajectoryRecorder};
use atlas_core::fd::{fd_advance_to, fd_init_with, fd_profile, FdConfig, FdScheme, DEFAULT_DXI};
use atlas_core::measure::{density_estimate, rescale, DensityProfile};
use atlas_core::model::{sample_ppp_half_line, DriftSpec};
use atlas_core::rng::ParticleStreams;
use atlas_core::stefan::solve_kappa;
use atlas_lab::config::{resolve_output_dir, ExperimentConfig, ExperimentTag, Overrides, OUT_DIR_ENV};
use atlas_lab::experiments::run_experiment;
use atlas_lab::io::{self, Metadata, ProfileMeta};
use atlas_lab::report::{self, ReportFormat, Verdict};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "atlas",
    version,
    about = "Atlas particle system simulations and limit checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one replica and write its trajectory, final state and rescaled profile.
    Simulate(SimulateArgs),
    /// Closed-form front coefficient and limiting density.
    Stefan(StefanArgs),
    /// Finite-difference solution of the free boundary problem.
    FdSolve(FdArgs),
    /// Run a verification experiment and write its report.
    Verify(VerifyArgs),
    /// Convert a JSON report to another format.
    Report(ReportArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML config; flags below override its values.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated sample times.
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Disable far-field blocking.
    #[arg(long)]
    no_far_field: bool,
    /// Output directory.
    #[arg(long, short, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            lambda: self.lambda,
            n: self.n,
            dt: self.dt,
            b: self.b,
            replicas: self.replicas,
            seed: self.seed,
            times: self.times.clone(),
            tolerance: self.tolerance,
            far_field: self.no_far_field.then_some(false),
        }
    }

    fn resolve(&self, tag: Option<ExperimentTag>) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let cfg = ExperimentConfig::load(path)?;
                if let Some(tag) = tag.filter(|t| *t != cfg.experiment) {
                    bail!("{} configures `{}`, not `{tag}`", path.display(), cfg.experiment);
                }
                cfg
            }
            None => ExperimentConfig::preset(tag.unwrap_or(ExperimentTag::LeftmostScaling)),
        };
        self.overrides().apply(&mut cfg)?;
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        resolve_output_dir(self.out.as_deref(), None, cfg.output_dir.as_deref())
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Initial configuration (`.csv` or `.json`); Poisson(lambda) otherwise.
    #[arg(long)]
    initial: Option<PathBuf>,
    /// Write the sampled initial configuration here.
    #[arg(long)]
    save_initial: Option<PathBuf>,
    /// Horizon; defaults to the last sample time.
    #[arg(long)]
    horizon: Option<f64>,
    /// 1-based ranks to record besides the leftmost.
    #[arg(long, value_delimiter = ',', default_value = "2,10,100")]
    ranks: Vec<usize>,
    /// Zero drift on every rank.
    #[arg(long)]
    harris: bool,
}

#[derive(Args)]
struct StefanArgs {
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Write the limiting density on `[y(t), y(t) + width]` to this CSV.
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long, default_value_t = 8.0)]
    width: f64,
    #[arg(long, default_value_t = 0.05)]
    bin_width: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Explicit,
    Cn,
}

#[derive(Args)]
struct FdArgs {
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = DEFAULT_DXI)]
    dxi: f64,
    #[arg(long, value_enum, default_value = "explicit")]
    scheme: SchemeArg,
    /// Write the density profile to this CSV.
    #[arg(long)]
    profile: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    experiment: ExperimentTag,
    #[command(flatten)]
    config: ConfigArgs,
    /// Report formats to write; all three by default.
    #[arg(long, value_delimiter = ',')]
    format: Vec<ReportFormat>,
    /// Print the resolved config as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// JSON report written by `verify`.
    input: PathBuf,
    #[arg(long, default_value = "md")]
    format: ReportFormat,
    /// Output file; stdout otherwise.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Stefan(a) => stefan(a),
        Command::FdSolve(a) => fd_solve(a),
        Command::Verify(a) => verify(a),
        Command::Report(a) => convert_report(a),
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn simulate(a: SimulateArgs) -> anyhow::Result<ExitCode> {
    let cfg = a.config.resolve(None)?;
    let out = a.config.out_dir(&cfg);
    let hash = &cfg.hash()[..12];
    let mut state = match &a.initial {
        Some(path) => io::load_initial(path)?,
        None => sample_ppp_half_line(cfg.lambda, cfg.n, cfg.seed)?,
    };
    if let Some(path) = &a.save_initial {
        io::save_initial(&state, path)?;
    }
    let horizon = a
        .horizon
        .unwrap_or_else(|| cfg.analysis.times.last().copied().unwrap_or(1.0));
    let times: Vec<f64> = cfg.analysis.times.iter().copied().filter(|&t| t <= horizon).collect();
    let ranks: Vec<usize> = a
        .ranks
        .iter()
        .filter(|&&k| k >= 2 && k <= state.len())
        .map(|k| k - 1)
        .collect();
    let drift = if a.harris {
        DriftSpec::harris()
    } else {
        DriftSpec::atlas(1.0)
    };
    let mut recorder = TrajectoryRecorder::new(times)?.tracking_ranks(ranks.clone());
    let mut streams = ParticleStreams::new(cfg.seed, state.len());
    let summary = run(
        &mut state,
        &drift,
        &cfg.step_config()?,
        horizon,
        &mut recorder,
        &mut streams,
    )?;

    let meta = Metadata::default()
        .with("config_hash", cfg.hash())
        .with("lambda", cfg.lambda)
        .with("n", state.len())
        .with("dt", cfg.dt)
        .with("seed", cfg.seed)
        .with("drift", if a.harris { "harris" } else { "atlas" });
    let traj = out.join(format!("trajectory-{hash}.csv"));
    io::write_trajectory_csv(recorder.snapshots(), &ranks, &meta, create(&traj)?)?;
    let dump = out.join(format!("state-{hash}.bin"));
    io::save_state_dump(&state, &dump)?;
    let profile = out.join(format!("profile-{hash}.csv"));
    let pm = ProfileMeta {
        b: cfg.b,
        t: horizon * cfg.b * cfg.b,
        seed: cfg.seed,
        n: state.len(),
    };
    let measure = rescale(&state, cfg.b)?;
    io::save_profile(&density_estimate(&measure, cfg.analysis.bin_width)?, &pm, &profile)?;

    println!("t = {horizon}, steps = {}, swaps = {}", summary.steps, summary.swaps);
    println!(
        "Y1 = {:.6}, Y1/sqrt(t) = {:.6}",
        state.leftmost(),
        state.leftmost() / horizon.sqrt()
    );
    println!(
        "far-field blocks = {}, contacts = {}",
        summary.blocks, summary.far_field_contacts
    );
    for p in [&traj, &dump, &profile] {
        println!("wrote {}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn stefan(a: StefanArgs) -> anyhow::Result<ExitCode> {
    let sol = solve_kappa(a.lambda)?;
    let [r1, r2, r3] = sol.algebraic_residuals();
    println!("lambda = {}", sol.lambda);
    println!("kappa = {:.15}", sol.kappa);
    println!("c1 = {:.15}", sol.c1);
    println!("c2 = {:.15}", sol.c2);
    println!("y(t) = {:.15}", sol.y_star(a.t));
    println!("residuals = {r1:.3e} {r2:.3e} {r3:.3e}");
    if let Some(path) = a.profile {
        let lo = sol.y_star(a.t);
        let bins = (a.width / a.bin_width).ceil() as usize;
        let bin_edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * a.bin_width).collect();
        let mass = |x: f64| sol.integrated_profile(a.t, x);
        let bin_density = bin_edges
            .windows(2)
            .map(|e| Ok((mass(e[1])? - mass(e[0])?) / (e[1] - e[0])))
            .collect::<atlas_core::Result<Vec<_>>>()?;
        let pm = ProfileMeta {
            b: 0.0,
            t: a.t,
            seed: 0,
            n: 0,
        };
        io::save_profile(&DensityProfile { bin_edges, bin_density }, &pm, &path)?;
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn fd_solve(a: FdArgs) -> anyhow::Result<ExitCode> {
    let mut cfg = FdConfig::new(a.dxi);
    cfg.scheme = match a.scheme {
        SchemeArg::Explicit => FdScheme::Explicit,
        SchemeArg::Cn => FdScheme::CrankNicolson,
    };
    let mut s = fd_init_with(a.lambda, &cfg)?;
    fd_advance_to(&mut s, a.t)?;
    let exact = solve_kappa(a.lambda)?.y_star(a.t);
    println!("t = {}, dt = {}, nodes = {}", s.t, s.dt, s.nodes());
    println!(
        "front = {:.6}, closed form = {:.6}, relative error = {:.3e}",
        s.y,
        exact,
        (s.y - exact).abs() / exact.abs()
    );
    if let Some(path) = a.profile {
        let pm = ProfileMeta {
            b: 0.0,
            t: s.t,
            seed: 0,
            n: s.nodes(),
        };
        io::save_profile(&fd_profile(&s), &pm, &path)?;
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(a: VerifyArgs) -> anyhow::Result<ExitCode> {
    let cfg = a.config.resolve(Some(a.experiment))?;
    if a.print_config {
        print!("{}", cfg.to_toml_string()?);
        return Ok(ExitCode::SUCCESS);
    }
    let out = a.config.out_dir(&cfg);
    let report = run_experiment(&cfg)?.stamped_now();
    let formats = if a.format.is_empty() {
        ReportFormat::ALL.to_vec()
    } else {
        a.format
    };
    for r in &report.records {
        println!("{:<8} {} = {:.6}", r.verdict.as_str(), r.claim, r.statistic);
    }
    for f in formats {
        println!("wrote {}", report::emit_report(&report, f, &out)?.display());
    }
    let invalid = report.records.iter().any(|r| r.verdict == Verdict::Invalid);
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else if invalid {
        ExitCode::from(3)
    } else {
        ExitCode::FAILURE
    })
}

fn convert_report(a: ReportArgs) -> anyhow::Result<ExitCode> {
    let file = File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?;
    let rep = report::read_json(std::io::BufReader::new(file))?;
    match a.out {
        Some(path) => {
            let mut w = create(&path)?;
            report::write(&rep, a.format, &mut w)?;
            w.flush()?;
        }
        None => report::write(&rep, a.format, std::io::stdout().lock())?,
    }
    Ok(ExitCode::SUCCESS)
}
