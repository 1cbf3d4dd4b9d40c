use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hdmn::model::format::read_model;
use hdmn::propagate::PropagationOptions;
use hdmn_cli::evidence::{beliefs_json, read_evidence, write_beliefs_csv};
use hdmn_cli::*;
use hdmn_transport::{load_trajectory, save_trajectory, score_predictions, Variant};

#[derive(Parser)]
#[command(name = "hdmn", version, about = "Filtering in hybrid dynamic mixed networks")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Use this single seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for experiment cells.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trajectory per scenario and seed.
    Simulate,
    /// Filter a trajectory (with --config) or a model file with evidence.
    Filter {
        /// Trajectory CSV written by `simulate`.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long, default_value = "model1")]
        variant: Variant,
        /// exact | ijgp-s:I | rbpf:I,W,N
        #[arg(long, default_value = "ijgp-s:1")]
        algorithm: Algorithm,
        /// Model file in the hdmn/1 text format.
        #[arg(long, conflicts_with = "trajectory")]
        model: Option<PathBuf>,
        /// Evidence CSV for --model.
        #[arg(long, requires = "model")]
        evidence: Option<PathBuf>,
    },
    /// Score predictions written by `filter` against their trajectory.
    Score {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
    },
    /// Run every configured cell and report the metrics.
    Experiment,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seeds = vec![s];
    }
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Simulate => simulate(cli),
        Command::Filter { trajectory, variant, algorithm, model, evidence } => match (model, trajectory) {
            (Some(m), _) => filter_model(cli, m, evidence.as_deref(), *algorithm),
            (None, Some(t)) => filter_trajectory(cli, t, *variant, *algorithm),
            (None, None) => Err(CliError::Config("filter needs --trajectory or --model".into())),
        },
        Command::Score { trajectory, predictions } => score(cli, trajectory, predictions),
        Command::Experiment => experiment(cli),
    }
}

fn simulate(cli: &Cli) -> Result<ExitCode> {
    let cfg = config(cli)?;
    let out = cli.out.clone().or_else(|| cfg.output_dir().map(PathBuf::from)).unwrap_or_else(|| ".".into());
    for sc in &cfg.scenarios {
        for &seed in &cfg.seeds {
            let (_, traj) = sc.instantiate(Variant::Model1, seed)?;
            let path = out.join(format!("{}-{seed}.csv", sc.name));
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.into(), e))?;
            }
            save_trajectory(&traj, &path)?;
            println!("{}", path.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn filter_trajectory(cli: &Cli, path: &std::path::Path, variant: Variant, alg: Algorithm) -> Result<ExitCode> {
    let cfg = config(cli)?;
    let traj = load_trajectory(path)?;
    let model = model_for(&cfg, &traj, variant)?;
    let p = predict(&model, &traj, alg, cfg.propagation.into())?;
    let body = match cli.format {
        Format::Json => p.to_json(),
        Format::Csv | Format::Table => {
            let mut s = String::from(if cli.format == Format::Csv { "tick,goal\n" } else { "tick  goal\n" });
            for (t, g) in p.goals.iter().enumerate() {
                s.push_str(&if cli.format == Format::Csv { format!("{t},{g}\n") } else { format!("{t:>4}  {g}\n") });
            }
            s
        }
    };
    print!("{body}");
    if let Some(dir) = &cli.out {
        write_text(&dir.join("predictions.json"), &p.to_json())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn filter_model(cli: &Cli, path: &std::path::Path, evidence: Option<&std::path::Path>, alg: Algorithm) -> Result<ExitCode> {
    let dmn = read_model::<f64>(path)?;
    let evidence = match evidence {
        Some(e) => {
            let f = std::fs::File::open(e).map_err(|err| CliError::Io(e.into(), err))?;
            read_evidence(&dmn, f)?
        }
        None => return Err(CliError::Config("--model needs --evidence".into())),
    };
    let prop = match &cli.config {
        Some(_) => config(cli)?.propagation.into(),
        None => PropagationOptions::default(),
    };
    let beliefs = match alg {
        Algorithm::Exact => hdmn::exact::exact_filter(&dmn, &evidence)?,
        Algorithm::IjgpS { i } => hdmn::ijgp::ijgp_s_filter(&dmn, &evidence, i, &prop)?,
        Algorithm::Rbpf { i, w, n } => {
            let mut o = hdmn::RbpfOptions64::new(i, w, n, cli.seed.unwrap_or(0));
            o.propagation = prop;
            hdmn::rbpf::rbpf_filter(&dmn, &evidence, &o)?.beliefs
        }
    };
    let body = match cli.format {
        Format::Json => beliefs_json(&dmn, &beliefs),
        Format::Csv | Format::Table => {
            let mut buf = Vec::new();
            write_beliefs_csv(&dmn, &beliefs, &mut buf)?;
            String::from_utf8(buf).expect("utf-8")
        }
    };
    print!("{body}");
    if let Some(dir) = &cli.out {
        write_text(&dir.join("beliefs.json"), &beliefs_json(&dmn, &beliefs))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn score(cli: &Cli, trajectory: &std::path::Path, predictions: &std::path::Path) -> Result<ExitCode> {
    let traj = load_trajectory(trajectory)?;
    let p = Predictions::from_json(&read_text(predictions)?)?;
    if p.goals.len() != traj.len() {
        return Err(CliError::Format(format!("{} predicted goals for {} ticks", p.goals.len(), traj.len())));
    }
    let s = score_predictions(&traj, &p.goals, &p.routes);
    let body = match cli.format {
        Format::Json => format!(
            "{}\n",
            serde_json::json!({
                "trips": s.trips,
                "correct": s.correct,
                "goal_accuracy": s.goal_accuracy,
                "route_fp": s.route_fp,
                "route_fn": s.route_fn,
            })
        ),
        Format::Csv => format!(
            "trips,correct,goal_accuracy,route_fp,route_fn\n{},{},{},{},{}\n",
            s.trips, s.correct, s.goal_accuracy, s.route_fp, s.route_fn
        ),
        Format::Table => format!(
            "trips {}  correct {}  accuracy {:.2}  FP {}  FN {}\n",
            s.trips, s.correct, s.goal_accuracy, s.route_fp, s.route_fn
        ),
    };
    print!("{body}");
    Ok(ExitCode::SUCCESS)
}

fn experiment(cli: &Cli) -> Result<ExitCode> {
    let cfg = config(cli)?;
    let grid = cells(&cfg);
    log::info!("{} cells on {} workers", grid.len(), cli.workers);
    let outcomes = run_cells(&cfg, &grid, cli.workers)?;
    let times: Vec<f64> = outcomes.iter().map(|o| o.wall_s).collect();
    let report = Report::new(&outcomes, cfg.metrics());
    match cli.format {
        Format::Table => print!("{}", report.to_table(&times)),
        Format::Csv => print!("{}", report.to_csv()),
        Format::Json => print!("{}", report.to_json()),
    }
    if let Some(dir) = cli.out.as_deref().or(cfg.output_dir()) {
        report.write_dir(dir, &times)?;
    }
    if report.failed() > 0 {
        eprintln!("{} of {} cells FAILED", report.failed(), grid.len());
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}
