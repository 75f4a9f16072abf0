use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use peb_harness::axis::axis_sweep;
use peb_harness::cdf::{cdf, CdfError, Field};
use peb_harness::config::{load_config, ConfigError, Direction, SweepConfig};
use peb_harness::output::{metadata, sink, write_axis, write_cdf, write_records};
use peb_harness::sweep::{grid_sweep, summarize};
use peb_harness::validate::{run_all, sector_center_direction};

#[derive(Parser)]
#[command(
    name = "peb",
    version,
    about = "Position and orientation error bounds over a mmWave sector"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file, `-` or nothing for stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_parser = ["ul", "dl"])]
    direction: Option<String>,
    /// One of los, los+r, los+s, los+c, nlos.
    #[arg(long, global = true)]
    scenario: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Per-location bounds over the sector grid.
    Grid,
    /// Empirical CDF of one record column.
    Cdf {
        #[arg(long, default_value = "peb")]
        field: String,
    },
    /// 90% quantiles along the configured sweep axis, both directions.
    Sweep,
    /// RX/TX factor magnitudes against array size.
    Factors {
        /// Angular separation in degrees, applied to azimuth and elevation.
        #[arg(long, default_value_t = 10.0)]
        separation: f64,
        #[arg(long, value_delimiter = ',', default_value = "4,9,16,25,36,49,64,81,100,121,144")]
        sizes: Vec<usize>,
    },
    /// Runs the numbered checks and prints one line per check.
    Validate,
}

enum Failure {
    Config(ConfigError),
    AllSingular(String),
    Io(std::io::Error),
    Checks(usize),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

fn resolve(c: &Common) -> Result<SweepConfig, ConfigError> {
    let mut cfg = match &c.config {
        Some(p) => load_config(p)?,
        None => SweepConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(d) = &c.direction {
        cfg.direction = d.parse::<Direction>().map_err(|e| ConfigError::Invalid {
            key: "direction".into(),
            message: e.to_string(),
        })?;
    }
    if let Some(s) = &c.scenario {
        cfg.scenario = s.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = resolve(&cli.common)?;
    let out = cli.common.out.as_deref();
    match cli.command {
        Command::Grid => {
            let records = grid_sweep(&cfg)?;
            let s = summarize(&records);
            let meta = metadata(
                &cfg,
                &[("points", s.total.to_string()), ("flagged", s.flagged.to_string())],
            );
            write_records(sink(out)?, &meta, &records)?;
            if s.finite == 0 {
                return Err(Failure::AllSingular(format!("all {} grid points are flagged", s.total)));
            }
        }
        Command::Cdf { field } => {
            let field: Field = field.parse().map_err(|m: String| ConfigError::Invalid {
                key: "field".into(),
                message: m,
            })?;
            let records = grid_sweep(&cfg)?;
            let series = match cdf(&records, field) {
                Ok(s) => s,
                Err(CdfError::AllInfinite { infinite }) => {
                    return Err(Failure::AllSingular(format!("all {infinite} grid points are flagged")))
                }
                Err(e) => return Err(Failure::AllSingular(e.to_string())),
            };
            let meta = metadata(
                &cfg,
                &[
                    ("field", field.label().to_string()),
                    ("infinite", series.infinite_count().to_string()),
                ],
            );
            write_cdf(sink(out)?, &meta, &series)?;
        }
        Command::Sweep => {
            let table = axis_sweep(&cfg)?;
            let mut extra = vec![("axis", table.axis.label().to_string())];
            if let Some(s) = table.slopes {
                extra.push((
                    "slopes",
                    format!(
                        "speb_ul={} speb_dl={} soeb_ul={} soeb_dl={}",
                        s.speb_ul, s.speb_dl, s.soeb_ul, s.soeb_dl
                    ),
                ));
            }
            write_axis(sink(out)?, &metadata(&cfg, &extra), &table)?;
            if table
                .rows
                .iter()
                .all(|r| r.peb90_ul.is_infinite() && r.peb90_dl.is_infinite())
            {
                return Err(Failure::AllSingular("no finite quantile along the axis".into()));
            }
        }
        Command::Factors { separation, sizes } => {
            let base = sector_center_direction(&cfg);
            let beams =
                mmwave_peb::signal::downlink_beam_grid(&cfg.sector.sector(), cfg.system.n_beams).map_err(|e| {
                    ConfigError::Invalid {
                        key: "system.n_beams".into(),
                        message: e.to_string(),
                    }
                })?;
            let rows = mmwave_peb::fim::factor_scan(
                base,
                separation.to_radians(),
                &sizes,
                cfg.system.spacing_wavelengths,
                cfg.system.wavelength(),
                &beams,
            )
            .map_err(|e| ConfigError::Invalid {
                key: "sizes".into(),
                message: e.to_string(),
            })?;
            let mut w = sink(out)?;
            let meta = metadata(&cfg, &[("separation_deg", separation.to_string())]);
            for line in &meta {
                writeln!(w, "{line}")?;
            }
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(["n", "rx_db", "tx_db"])
                .map_err(std::io::Error::from)?;
            for r in rows {
                csv.write_record([r.n.to_string(), r.rx_db.to_string(), r.tx_db.to_string()])
                    .map_err(std::io::Error::from)?;
            }
            csv.flush()?;
        }
        Command::Validate => {
            let checks = run_all(&cfg);
            let mut w = sink(out)?;
            for c in &checks {
                writeln!(w, "{c}")?;
            }
            w.flush()?;
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(Failure::Checks(failed));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("peb: configuration error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::AllSingular(m)) => {
            eprintln!("peb: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Io(e)) => {
            eprintln!("peb: {e}");
            ExitCode::FAILURE
        }
        Err(Failure::Checks(n)) => {
            eprintln!("peb: {n} check(s) failed");
            ExitCode::FAILURE
        }
    }
}
