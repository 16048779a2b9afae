use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wptopt::bench::{load_config, run_scenario, Scenario, ScenarioConfig, SweepResult};
use wptopt::harvester::{fit_poly2, read_samples_csv};
use wptopt::Error;

/// Optimal multisine waveforms for wireless power transfer.
#[derive(Parser)]
#[command(name = "wptopt", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a JSON config file.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run a named scenario with its default parameters.
    Bench {
        #[arg(long)]
        scenario: String,
        /// Config file whose keys override the scenario defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        realizations: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Fit a second-order polynomial to `p_in_w,p_out_w` samples.
    Fit {
        #[arg(long)]
        data: PathBuf,
    },
}

const EXIT_FLAGGED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Dimension(_) => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::from(EXIT_FLAGGED),
    }
}

fn run_and_write(cfg: &ScenarioConfig, out: &Path) -> Result<SweepResult, Error> {
    let res = run_scenario(cfg)?;
    res.write_csv(out)?;
    Ok(res)
}

fn report(res: &SweepResult, out: &Path) -> ExitCode {
    eprintln!(
        "{}: {} rows written to {} in {:.2?}",
        res.scenario,
        res.rows.len(),
        out.display(),
        res.wall_time
    );
    if res.flagged.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("{} runs flagged, see flagged.csv", res.flagged.len());
        ExitCode::from(EXIT_FLAGGED)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Solve { config, seed, out } => {
            let mut cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            match run_and_write(&cfg, &out) {
                Ok(res) => report(&res, &out),
                Err(e) => fail(&e),
            }
        }
        Command::Bench { scenario, config, realizations, seed, out } => {
            let sc: Scenario = match scenario.parse() {
                Ok(s) => s,
                Err(e) => return fail(&e),
            };
            let mut cfg = match config {
                Some(path) => match load_config(&path) {
                    Ok(mut c) if c.scenario == sc => {
                        c.scenario = sc;
                        c
                    }
                    Ok(c) => {
                        return fail(&Error::Config(format!(
                            "scenario: config names {} but --scenario is {sc}",
                            c.scenario
                        )))
                    }
                    Err(e) => return fail(&e),
                },
                None => ScenarioConfig::defaults(sc),
            };
            if let Some(r) = realizations {
                cfg.realizations = r;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Err(e) = cfg.validate() {
                return fail(&e);
            }
            match run_and_write(&cfg, &out) {
                Ok(res) => report(&res, &out),
                Err(e) => fail(&e),
            }
        }
        Command::Fit { data } => {
            let fit = File::open(&data)
                .map_err(|e| Error::Config(format!("{}: {e}", data.display())))
                .and_then(read_samples_csv)
                .and_then(|s| fit_poly2(&s));
            match fit {
                Ok(f) => {
                    println!("coef,value,std_error");
                    for (name, v, se) in [
                        ("beta1", f.beta1, f.std_errors[0]),
                        ("beta2", f.beta2, f.std_errors[1]),
                        ("beta3", f.beta3, f.std_errors[2]),
                    ] {
                        println!("{name},{v:e},{se:e}");
                    }
                    println!("residual_ss,{:e},", f.residual_ss);
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
    }
}
