use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ifc_swipt::census::{self, Scale};
use ifc_swipt::experiment::{self, ExperimentConfig, Preset};
use ifc_swipt::ChannelSet;

/// Rate-energy tradeoff experiments for the two-user MIMO interference
/// channel with wireless power transfer.
#[derive(Debug, Parser)]
#[command(name = "ifc-swipt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment and write CSV curves plus summary.json.
    ///
    /// Exit code 0 on success, 2 when some sweep points could not be solved,
    /// 1 on error.
    Run {
        /// Start from an embedded preset (fig2..fig8, table1).
        #[arg(long)]
        preset: Option<String>,
        /// TOML config file layered over the preset.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override one config key, e.g. `--set seeds=[1,2,3]`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        /// Print the resolved config and exit without computing.
        #[arg(long)]
        print_config: bool,
    },
    /// Print the TOML of an embedded preset.
    ShowPreset { name: String },
    /// Check saved channel files and print their digests.
    ValidateChannels {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Run the verification censuses and print one line per criterion.
    OracleSuite {
        /// A tenth of the sample sizes.
        #[arg(long)]
        quick: bool,
        /// Comma-separated criterion ids; all when omitted.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u8>,
    },
}

fn run(
    preset: Option<String>,
    config: Option<PathBuf>,
    mut overrides: Vec<String>,
    output: Option<PathBuf>,
    workers: Option<usize>,
    print_config: bool,
) -> ifc_swipt::Result<ExitCode> {
    let preset = preset.map(|p| p.parse::<Preset>()).transpose()?;
    if let Some(dir) = output {
        overrides.push(format!(
            "output_dir={}",
            toml::Value::String(dir.to_string_lossy().into_owned())
        ));
    }
    if let Some(n) = workers {
        overrides.push(format!("workers={n}"));
    }
    let cfg = ExperimentConfig::resolve(preset, config.as_deref(), &overrides)?;
    if print_config {
        print!("{}", cfg.to_toml());
        return Ok(ExitCode::SUCCESS);
    }
    let manifest = experiment::run_experiment(&cfg)?;
    println!(
        "{} tasks, {} artifacts, {} gap points, {:.1}s -> {}",
        manifest.tasks.len(),
        manifest.artifacts.len(),
        manifest.gap_points,
        manifest.wall_seconds,
        cfg.output_dir.join("summary.json").display()
    );
    for o in &manifest.single_mode_orderings {
        println!(
            "{} vs {}: energy larger {:.1}%, rate larger {:.1}%, both {:.1}% of {} seeds",
            o.larger,
            o.smaller,
            100.0 * o.energy_larger,
            100.0 * o.rate_larger,
            100.0 * o.both_larger,
            o.pairs
        );
    }
    Ok(ExitCode::from(manifest.status.exit_code() as u8))
}

fn validate_channels(files: &[PathBuf]) -> ExitCode {
    let mut ok = true;
    for path in files {
        match ChannelSet::load(path) {
            Ok(cs) => println!("{}: {}x{} sha256 {}", path.display(), cs.m_r(), cs.m_t(), cs.digest()),
            Err(e) => {
                ok = false;
                eprintln!("{}: {e}", path.display());
            }
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn oracle_suite(quick: bool, criteria: &[u8]) -> ifc_swipt::Result<ExitCode> {
    let scale = if quick { Scale::Quick } else { Scale::Full };
    let ids: Vec<u8> = if criteria.is_empty() {
        census::CRITERIA.iter().map(|(id, _)| *id).collect()
    } else {
        criteria.to_vec()
    };
    let mut all = true;
    for id in ids {
        let result = census::run_criterion(id, scale)?;
        all &= result.passed;
        println!("{result}");
    }
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            preset,
            config,
            overrides,
            output,
            workers,
            print_config,
        } => run(preset, config, overrides, output, workers, print_config),
        Command::ShowPreset { name } => name.parse::<Preset>().map(|p| {
            print!("{}", p.toml());
            ExitCode::SUCCESS
        }),
        Command::ValidateChannels { files } => Ok(validate_channels(&files)),
        Command::OracleSuite { quick, criteria } => oracle_suite(quick, &criteria),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::FAILURE
    })
}
