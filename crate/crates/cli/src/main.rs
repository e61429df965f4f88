use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use softran::experiments::{
    cmd_figure, result_rows, write_decision_trace, write_result_table, write_run_json,
    FigureOverrides, Preset,
};
use softran::validate::cmd_validate;
use softran::{run_episode, run_sweep_grid, Error, Learner, ScenarioConfig, Scheme, SweepSpec};

#[derive(Parser, Debug)]
#[command(name = "softran", version, about = "Centralized/distributed OFDMA allocation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Key-value config file applied on top of the base configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Figure preset: overhead, rate or toc.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<Preset>,

    /// Number of seeds; seeds 1..=N are run.
    #[arg(long, global = true, value_name = "N")]
    seeds: Option<usize>,

    /// Evaluation slots per run.
    #[arg(long, global = true, value_name = "N")]
    slots: Option<usize>,

    /// Comma-separated schemes.
    #[arg(long, global = true, value_name = "NAME", value_delimiter = ',')]
    scheme: Vec<Scheme>,

    /// Comma-separated learners.
    #[arg(long, global = true, value_name = "NAME", value_delimiter = ',')]
    learner: Vec<Learner>,

    /// Comma-separated user counts for sweeps.
    #[arg(long, global = true, value_name = "N", value_delimiter = ',')]
    users: Vec<usize>,

    #[arg(long, global = true, value_name = "DIR", default_value = "results")]
    out: PathBuf,

    /// Sweep worker threads; defaults to every core.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    /// Start from the full-size scenario instead of the desk-scale one.
    #[arg(long, global = true)]
    paper_scale: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a preset sweep and write its result table and plot data.
    Figure,
    /// Run single episodes and write per-slot traces.
    Run,
    /// Run a scheme x learner x users x seeds grid.
    Sweep,
    /// Run the fast invariant suite.
    Validate,
    /// Print the effective configuration.
    Config,
}

enum Failure {
    Config(String),
    Runtime(String),
    Validation,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) | Error::ConfigParse { .. } | Error::UnknownKey { .. } => {
                Failure::Config(e.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl Cli {
    fn base_config(&self) -> Result<ScenarioConfig, Failure> {
        let mut config = match self.preset {
            Some(_) => Preset::base_config(self.paper_scale),
            None if self.paper_scale => ScenarioConfig::default(),
            None => ScenarioConfig::desk(),
        };
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            config = ScenarioConfig::parse_over(config, &text)?;
        }
        config.apply_env(std::env::vars())?;
        if let Some(n) = self.slots {
            config.slots = n;
        }
        if let Some(&s) = self.scheme.first() {
            config.scheme = s;
        }
        if let Some(&l) = self.learner.first() {
            config.learner = l;
        }
        config.validate()?;
        Ok(config)
    }

    fn seed_list(&self) -> Vec<u64> {
        (1..=self.seeds.unwrap_or(1) as u64).collect()
    }

    fn non_empty<T: Clone>(given: &[T], fallback: T) -> Vec<T> {
        if given.is_empty() {
            vec![fallback]
        } else {
            given.to_vec()
        }
    }
}

fn create_out(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))
}

fn figure(cli: &Cli) -> Result<(), Failure> {
    let preset = cli
        .preset
        .ok_or_else(|| Failure::Config("figure needs --preset".into()))?;
    let config = cli.base_config()?;
    let overrides = FigureOverrides {
        seeds: cli.seeds,
        slots: cli.slots,
        schemes: (!cli.scheme.is_empty()).then(|| cli.scheme.clone()),
        learners: (!cli.learner.is_empty()).then(|| cli.learner.clone()),
        user_counts: (!cli.users.is_empty()).then(|| cli.users.clone()),
        workers: cli.workers,
        paper_scale: cli.paper_scale,
    };
    let out = cmd_figure(preset, &config, &overrides, &cli.out)?;
    println!("wrote {}", out.table.display());
    println!("wrote {}", out.plot.display());
    report_failures(out.sweep.failures())
}

fn report_failures<'a>(
    failures: impl Iterator<Item = (&'a softran::SweepCell, &'a str)>,
) -> Result<(), Failure> {
    let mut n = 0;
    for (cell, err) in failures {
        eprintln!(
            "run failed: {} {} users={} seed={}: {err}",
            cell.scheme, cell.learner, cell.user_count, cell.seed
        );
        n += 1;
    }
    if n > 0 {
        Err(Failure::Runtime(format!("{n} runs failed")))
    } else {
        Ok(())
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let mut config = cli.base_config()?;
    if let Some(&u) = cli.users.first() {
        config.n_users = u;
    }
    create_out(&cli.out)?;
    let mut runs = Vec::new();
    for seed in cli.seed_list() {
        config.seed = seed;
        let run = run_episode(&config, seed)?;
        let a = &run.aggregates;
        println!(
            "seed {seed}: rate {:.4e} toc {:.4e} centralized share {:.2}",
            a.mean_rate, a.mean_toc, a.cnt_fraction
        );
        let trace = cli.out.join(format!("trace_seed{seed}.csv"));
        write_decision_trace(&run, File::create(&trace).map_err(Error::from)?)?;
        write_run_json(&run, cli.out.join(format!("run_seed{seed}.json")))?;
        runs.push(run);
    }
    let rows: Vec<_> = runs.iter().map(softran::experiments::ResultRow::from_run).collect();
    let table = cli.out.join("run_results.csv");
    write_result_table(&rows, File::create(&table).map_err(Error::from)?)?;
    println!("wrote {}", table.display());
    Ok(())
}

fn sweep(cli: &Cli) -> Result<(), Failure> {
    let config = cli.base_config()?;
    let spec = SweepSpec {
        user_counts: Cli::non_empty(&cli.users, config.n_users),
        schemes: Cli::non_empty(&cli.scheme, config.scheme),
        learners: Cli::non_empty(&cli.learner, config.learner),
        seeds: cli.seed_list(),
        workers: cli.workers,
    };
    let result = run_sweep_grid(&config, &spec)?;
    create_out(&cli.out)?;
    let table = cli.out.join("sweep_results.csv");
    write_result_table(&result_rows(&result), File::create(&table).map_err(Error::from)?)?;
    println!("wrote {}", table.display());
    report_failures(result.failures())
}

fn validate() -> Result<(), Failure> {
    let report = cmd_validate();
    println!("{report}");
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Validation)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Figure => figure(&cli),
        Command::Run => run(&cli),
        Command::Sweep => sweep(&cli),
        Command::Validate => validate(),
        Command::Config => cli.base_config().map(|c| print!("{}", c.to_kv_string())),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Validation) => ExitCode::from(3),
    }
}
