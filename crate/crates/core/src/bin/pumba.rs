use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use pumba::constraints::CountSupport;
use pumba::experiments::config::{Design, ExperimentConfig, TableFormat};
use pumba::experiments::harness::mechanism_for;
use pumba::experiments::{emit_table, preset, run_experiment};
use pumba::mechanisms::release;
use pumba::models::{model_for_task, CountyPublic, CountyTable, RawData};
use pumba::pumba::{pumba_draws, pumba_meancov, DEFAULT_DRAWS};
use pumba::{PrivateRelease, Result, RngHandle};

#[derive(Parser)]
#[command(name = "pumba", version, about = "Inference on privatized summary statistics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Task {
    BoundedMean,
    LinregSsp,
    CountyLinear,
    CountyLogistic,
}

impl From<Task> for Design {
    fn from(t: Task) -> Design {
        match t {
            Task::BoundedMean => Design::BoundedMean,
            Task::LinregSsp => Design::LinregSsp,
            Task::CountyLinear => Design::CountyLinear,
            Task::CountyLogistic => Design::CountyLogistic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Support {
    Discrete,
    Continuous,
}

impl From<Support> for CountSupport {
    fn from(s: Support) -> CountSupport {
        match s {
            Support::Discrete => CountSupport::Discrete,
            Support::Continuous => CountSupport::Continuous,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Draws,
    MeanCov,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Markdown,
}

impl From<Format> for TableFormat {
    fn from(f: Format) -> TableFormat {
        match f {
            Format::Csv => TableFormat::Csv,
            Format::Markdown => TableFormat::Markdown,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compute the task's statistic from a raw CSV and add calibrated noise.
    Privatize {
        #[arg(long, value_enum)]
        task: Task,
        /// Bounded mean: one column `t`. Regression: columns `x,y`. County
        /// tasks: the full county table.
        #[arg(long)]
        input: PathBuf,
        /// Privacy budget; give two values for the bounded mean split.
        #[arg(long, num_args = 1.., required = true)]
        epsilon: Vec<f64>,
        /// Joint sensitivity of one county's counts.
        #[arg(long, default_value_t = 8f64.sqrt())]
        sensitivity: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Posterior summary for a release.
    Analyze {
        #[arg(long)]
        release: PathBuf,
        #[arg(long, value_enum, default_value = "draws")]
        mode: Mode,
        /// Public county table (county tasks only).
        #[arg(long)]
        public: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "continuous")]
        support: Support,
        #[arg(long, default_value_t = DEFAULT_DRAWS)]
        draws: usize,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the experiment described by a TOML file.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a named preset: table1, table2, table3 or table5.
    ReplicatePaper {
        preset: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn write_out(text: &str, output: Option<&PathBuf>) -> Result<()> {
    match output {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn read_raw(design: Design, input: &PathBuf) -> Result<RawData> {
    if design.is_county() {
        return Ok(RawData::Counties(CountyTable::read_csv_path(input)?));
    }
    let mut reader = csv::Reader::from_path(input)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| pumba::Error::Config(format!("input needs a '{name}' column")))
    };
    let mut rows = Vec::new();
    for rec in reader.records() {
        rows.push(rec?);
    }
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| pumba::Error::Config(format!("not a number: '{s}'")))
    };
    if design == Design::BoundedMean {
        let j = col("t")?;
        Ok(RawData::Scalars(rows.iter().map(|r| parse(&r[j])).collect::<Result<_>>()?))
    } else {
        let (jx, jy) = (col("x")?, col("y")?);
        Ok(RawData::Pairs(
            rows.iter()
                .map(|r| Ok((parse(&r[jx])?, parse(&r[jy])?)))
                .collect::<Result<_>>()?,
        ))
    }
}

fn run_table(mut cfg: ExperimentConfig, seed: Option<u64>, replicates: Option<usize>, format: Option<Format>, output: Option<PathBuf>) -> Result<()> {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(b) = replicates {
        cfg.replicates = b;
    }
    if let Some(f) = format {
        cfg.format = f.into();
    }
    let output = output.or(cfg.output.clone());
    let table = run_experiment(&cfg)?;
    write_out(&emit_table(&table, cfg.format)?, output.as_ref())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Privatize {
            task,
            input,
            epsilon,
            sensitivity,
            seed,
            output,
        } => {
            let design: Design = task.into();
            let raw = read_raw(design, &input)?;
            let public = match &raw {
                RawData::Counties(t) => Some(t.public()),
                _ => None,
            };
            let model = model_for_task(design.task_id(), public, CountSupport::Continuous)?;
            let t = model.statistic(&raw)?;
            let mut cfg = ExperimentConfig {
                design,
                ..Default::default()
            };
            cfg.privacy.epsilon = epsilon;
            cfg.county.sensitivity = sensitivity;
            let (noise, budget) = mechanism_for(&cfg, model.k())?;
            let rel = release(&mut RngHandle::new(seed, 0), &t, &noise, &budget)?;
            write_out(&(rel.to_json()? + "\n"), output.as_ref())
        }
        Command::Analyze {
            release,
            mode,
            public,
            support,
            draws,
            level,
            seed,
            output,
        } => {
            let rel = PrivateRelease::from_json(&std::fs::read_to_string(release)?)?;
            let public = public.map(CountyPublic::read_csv_path).transpose()?;
            let model = model_for_task(&rel.task_id, public, support.into())?;
            let mut rng = RngHandle::new(seed, 0);
            let summary = match mode {
                Mode::Draws => pumba_draws(&mut rng, &rel, model.as_ref(), draws, level)?,
                Mode::MeanCov => pumba_meancov(&mut rng, &rel, model.as_ref(), draws, level)?,
            };
            write_out(&(serde_json::to_string_pretty(&summary)? + "\n"), output.as_ref())
        }
        Command::Simulate {
            config,
            seed,
            replicates,
            format,
            output,
        } => run_table(ExperimentConfig::from_path(config)?, seed, replicates, format, output),
        Command::ReplicatePaper {
            preset: name,
            seed,
            replicates,
            format,
            output,
        } => run_table(preset(&name)?, seed, replicates, format, output),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
