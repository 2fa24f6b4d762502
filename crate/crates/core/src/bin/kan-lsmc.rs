use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kan_lsmc::experiment::{
    cmd_delta, cmd_emit_fit, cmd_price, cmd_simulate, exit_code, reproduce_table1, reproduce_table2, write_atomic,
    write_json, ExperimentConfig, Overrides, Preset,
};
use kan_lsmc::regressor::ModelKind;
use kan_lsmc::{Error, Result};

#[derive(Parser)]
#[command(
    name = "kan-lsmc",
    version,
    about = "Least-squares Monte Carlo pricing with KAN, polynomial, and MLP regressors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price the configured contract and write the result and fitted curves.
    Price(Common),
    /// Pathwise delta through the first-date model.
    Delta {
        #[command(flatten)]
        common: Common,
        /// Use the closed-form European value as the first-date model.
        #[arg(long)]
        oracle_f: bool,
    },
    /// Run every model of a table and compare with the target values.
    Reproduce {
        #[command(flatten)]
        common: Common,
        /// Comma-separated models; defaults to the table's rows.
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
        /// Exit with status 4 when a tolerance band is missed.
        #[arg(long)]
        check: bool,
    },
    /// Write fitted continuation curves, one CSV per model and date.
    EmitFit {
        #[command(flatten)]
        common: Common,
        /// Comma-separated models; defaults to weighted_laguerre,hermite,kan,mlp.
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
        /// Comma-separated exercise dates; defaults to the config's dump dates.
        #[arg(long, value_delimiter = ',')]
        dates: Vec<usize>,
    },
    /// Simulate the configured paths and write them as CSV.
    Simulate(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in configuration: table1, table2, or euro-delta.
    #[arg(long)]
    preset: Option<String>,
    /// weighted_laguerre, hermite, laguerre, laguerre_cross, kan, or mlp.
    #[arg(long)]
    model: Option<String>,
    /// Seed for both the paths and the network initialization.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of shared paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Output directory; overrides $KAN_LSMC_OUT and the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trading days per year for daily-step markets: 250 or 252.
    #[arg(long)]
    basis_days: Option<u32>,
    /// Regress on in-the-money paths only.
    #[arg(long)]
    itm_only: bool,
}

impl Common {
    fn configs(&self, default: Preset) -> Result<Vec<ExperimentConfig>> {
        let mut cfgs = match (&self.config, &self.preset) {
            (Some(_), Some(_)) => return Err(Error::Config("pass either --config or --preset, not both".into())),
            (Some(path), None) => vec![ExperimentConfig::load(path)?],
            (None, Some(name)) => Preset::parse(name)?.configs(),
            (None, None) => default.configs(),
        };
        let overrides = Overrides {
            model: self.model.as_deref().map(ModelKind::parse).transpose()?,
            seed: self.seed,
            paths: self.paths,
            basis_days: self.basis_days,
            itm_only: self.itm_only,
            out: self.out.clone(),
        };
        for cfg in &mut cfgs {
            cfg.apply(&overrides)?;
        }
        Ok(cfgs)
    }
}

fn parse_models(names: &[String], default: &[ModelKind]) -> Result<Vec<ModelKind>> {
    if names.is_empty() {
        return Ok(default.to_vec());
    }
    names.iter().map(|n| ModelKind::parse(n)).collect()
}

fn prepare_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir)?;
    let text = cfg.to_toml_string()?;
    write_atomic(&dir.join("config.toml"), |p| Ok(std::fs::write(p, &text)?))?;
    Ok(dir)
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Price(common) => {
            for cfg in common.configs(Preset::Table1)? {
                let dir = prepare_dir(&cfg)?;
                let (report, dump) = cmd_price(&cfg)?;
                write_json(&dir.join("price.json"), &report)?;
                for date in cfg.resolved_dump_dates()? {
                    let part = kan_lsmc::lsmc::FitCurveDump {
                        rows: dump.rows.iter().filter(|r| r.date == date).cloned().collect(),
                    };
                    write_atomic(&dir.join(format!("fit_{}_t{date}.csv", cfg.model.name())), |p| part.write_csv(p))?;
                }
                let r = &report.result;
                print!(
                    "{}: {} price {:.6} (se {:.6}, {} paths)",
                    cfg.name,
                    cfg.model.name(),
                    r.price,
                    r.std_error,
                    r.n_paths
                );
                if let Some(eu) = &report.eurasian {
                    print!(", eurasian {:.6} (se {:.6})", eu.price, eu.std_error);
                }
                if let Some(bs) = report.closed_form_price {
                    print!(", closed-form european {bs:.6}");
                }
                println!();
            }
            Ok(0)
        }
        Command::Delta { common, oracle_f } => {
            for cfg in common.configs(Preset::Table1)? {
                let dir = prepare_dir(&cfg)?;
                let report = cmd_delta(&cfg, oracle_f)?;
                write_json(&dir.join("delta.json"), &report)?;
                let d = &report.delta;
                print!(
                    "{}: {} delta {:.6} (se {:.6}, {} paths, intrinsic branch {:.2}%)",
                    cfg.name,
                    report.model,
                    d.delta,
                    d.std_error,
                    d.n_paths,
                    100.0 * d.exercise_fraction
                );
                if let Some(c) = report.closed_form_delta {
                    print!(", closed-form {c:.6}");
                }
                if let Some(s) = report.stated_delta {
                    print!(", stated {s}");
                }
                println!();
            }
            Ok(0)
        }
        Command::Reproduce { common, models, check } => {
            let preset = common.preset.as_deref().map(Preset::parse).transpose()?.unwrap_or(Preset::Table1);
            let cfgs = common.configs(preset)?;
            let table = match preset {
                Preset::Table1 => {
                    let default = [ModelKind::WeightedLaguerre, ModelKind::Hermite, ModelKind::Mlp, ModelKind::Kan];
                    reproduce_table1(&cfgs[0], &parse_models(&models, &default)?)?
                }
                Preset::Table2 => {
                    let default = [ModelKind::LaguerreCross, ModelKind::Mlp, ModelKind::Kan];
                    reproduce_table2(&cfgs, &parse_models(&models, &default)?)?
                }
                Preset::EuroDelta => return Err(Error::Config("reproduce takes --preset table1 or table2".into())),
            };
            let dir = prepare_dir(&cfgs[0])?;
            write_json(&dir.join("reproduce.json"), &serde_json::json!({ "configs": cfgs, "table": table }))?;
            print!("{}", table.render());
            Ok(if check && !table.breaches.is_empty() { 4 } else { 0 })
        }
        Command::EmitFit { common, models, dates } => {
            let default = [ModelKind::WeightedLaguerre, ModelKind::Hermite, ModelKind::Kan, ModelKind::Mlp];
            let models = parse_models(&models, &default)?;
            for cfg in common.configs(Preset::Table1)? {
                let dir = prepare_dir(&cfg)?;
                let dates = if dates.is_empty() { cfg.resolved_dump_dates()? } else { dates.clone() };
                for f in cmd_emit_fit(&cfg, &models, &dates, &dir)? {
                    println!("{}", f.display());
                }
            }
            Ok(0)
        }
        Command::Simulate(common) => {
            for cfg in common.configs(Preset::Table1)? {
                let dir = prepare_dir(&cfg)?;
                let file = dir.join("paths.csv");
                cmd_simulate(&cfg, &file)?;
                println!("{}", file.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
