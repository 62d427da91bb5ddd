//! `nsipd`: simulate plane-wave RF datasets, run the power Doppler pipeline,
//! sweep DC offsets, and recompute metrics on stored images.
//!
//! All behaviour is driven by a `key = value` config file (see the bundled
//! `configs/demo.cfg` and the guide's CLI chapter). Every subcommand is
//! deterministic: identical inputs produce identical output bytes.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nsi_pd::config::CliConfig;
use nsi_pd::io::{export_image, read_image, read_rf, read_sensitivity, write_rf, write_sensitivity};
use nsi_pd::metrics::{MetricValue, MetricsReport};
use nsi_pd::pipeline::{dc_sweep, evaluate_metrics, run_pipeline, SweepRow};
use nsi_pd::sim::{simulate_dataset, simulate_sensitivity_measurement, RfDataset, SensitivityProfile};
use nsi_pd::Error;

#[derive(Parser)]
#[command(
    name = "nsipd",
    about = "Null subtraction imaging power Doppler toolkit",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a plane-wave RF dataset from the configured scene.
    Simulate {
        /// Configuration file (key = value lines).
        #[arg(long)]
        config: PathBuf,
        /// Output RF dataset path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate the element sensitivity measurement and write the CSV.
    Sense {
        #[arg(long)]
        config: PathBuf,
        /// Output sensitivity CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the processing chain on an RF dataset and export images + metrics.
    Process {
        #[arg(long)]
        config: PathBuf,
        /// Input RF dataset.
        #[arg(long)]
        rf: PathBuf,
        /// Sensitivity CSV (required when the config enables esc).
        #[arg(long)]
        sens: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        outdir: PathBuf,
    },
    /// Sweep the DC offset with sensitivity correction on and off.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        rf: PathBuf,
        /// Sensitivity CSV; without it the measurement is simulated from the
        /// config's element gains.
        #[arg(long)]
        sens: Option<PathBuf>,
        /// Comma-separated DC offsets (defaults to the config's dc_values).
        #[arg(long)]
        dc: Option<String>,
        #[arg(long)]
        outdir: PathBuf,
    },
    /// Recompute metrics on a stored image.
    Metrics {
        /// Image base path (the export wrote base.f64 and base.txt).
        #[arg(long)]
        image: PathBuf,
        /// Config file holding the metric regions and profile line.
        #[arg(long)]
        regions: PathBuf,
    },
}

fn metric_cell(value: &MetricValue, scale: f64) -> String {
    match value {
        MetricValue::Value(v) => format!("{}", v * scale),
        MetricValue::Undefined(_) => "undefined".to_string(),
    }
}

fn metrics_csv_row(variant: &str, esc: bool, dc_offset: f64, report: &MetricsReport) -> String {
    format!(
        "{variant},{esc},{dc_offset},{},{},{}",
        metric_cell(&report.fwhm, 1e6),
        metric_cell(&report.snr_db, 1.0),
        metric_cell(&report.cnr_db, 1.0),
    )
}

const METRICS_HEADER: &str = "variant,esc,dc_offset,fwhm_um,snr_db,cnr_db";

fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "nsi,{},{},{},{},{}\n",
            row.esc,
            row.dc_offset,
            metric_cell(&row.fwhm, 1e6),
            metric_cell(&row.snr_db, 1.0),
            metric_cell(&row.cnr_db, 1.0),
        ));
    }
    out
}

fn load_sensitivity(
    sens: &Option<PathBuf>,
    config: &CliConfig,
    dataset: &RfDataset,
) -> Result<SensitivityProfile, Error> {
    match sens {
        Some(path) => read_sensitivity(path),
        None => {
            let gains = config.element_gains()?;
            simulate_sensitivity_measurement(&dataset.geometry, &gains, &config.pulse()?)
        }
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Simulate { config, out } => {
            let cfg = CliConfig::from_path(&config)?;
            let dataset = simulate_dataset(
                &cfg.scene()?,
                &cfg.geometry()?,
                &cfg.angles()?,
                &cfg.pulse()?,
                cfg.n_frames()?,
                cfg.frame_rate()?,
                cfg.n_samples()?,
            )?;
            write_rf(&out, &dataset)?;
            println!(
                "wrote {} ({} frames x {} angles x {} channels x {} samples)",
                out.display(),
                dataset.n_frames,
                dataset.n_angles(),
                dataset.n_channels(),
                dataset.n_samples
            );
        }
        Command::Sense { config, out } => {
            let cfg = CliConfig::from_path(&config)?;
            let profile = simulate_sensitivity_measurement(
                &cfg.geometry()?,
                &cfg.element_gains()?,
                &cfg.pulse()?,
            )?;
            write_sensitivity(&out, &profile)?;
            println!("wrote {} ({} elements)", out.display(), profile.len());
        }
        Command::Process {
            config,
            rf,
            sens,
            outdir,
        } => {
            let cfg = CliConfig::from_path(&config)?;
            let dataset = read_rf(&rf)?;
            let pipeline_config = cfg.pipeline_config()?;
            let sensitivity = if pipeline_config.esc {
                Some(match &sens {
                    Some(path) => read_sensitivity(path)?,
                    None => {
                        return Err(Error::InvalidParameter(
                            "config enables esc; pass --sens".into(),
                        ))
                    }
                })
            } else if let Some(path) = &sens {
                Some(read_sensitivity(path)?)
            } else {
                None
            };
            std::fs::create_dir_all(&outdir)?;
            let results = run_pipeline(&dataset, sensitivity.as_ref(), &pipeline_config)?;
            let dr = cfg.dynamic_range_db()?;
            let mut csv = String::from(METRICS_HEADER);
            csv.push('\n');
            for (variant, (image, report)) in &results {
                export_image(image, &outdir.join(variant.name()), dr)?;
                csv.push_str(&metrics_csv_row(
                    variant.name(),
                    image.provenance.esc,
                    image.provenance.dc_offset,
                    report,
                ));
                csv.push('\n');
            }
            std::fs::write(outdir.join("metrics.csv"), csv)?;
            println!(
                "wrote {} image(s) and metrics.csv to {}",
                results.len(),
                outdir.display()
            );
        }
        Command::Sweep {
            config,
            rf,
            sens,
            dc,
            outdir,
        } => {
            let cfg = CliConfig::from_path(&config)?;
            let dataset = read_rf(&rf)?;
            let dc_values = match dc {
                Some(list) => list
                    .split(',')
                    .map(|tok| {
                        tok.trim().parse::<f64>().map_err(|_| {
                            Error::InvalidParameter(format!("bad dc value '{tok}'"))
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?,
                None => cfg.dc_values()?,
            };
            let sensitivity = load_sensitivity(&sens, &cfg, &dataset)?;
            let rows = dc_sweep(&dataset, &sensitivity, &cfg.pipeline_config()?, &dc_values)?;
            std::fs::create_dir_all(&outdir)?;
            let path = outdir.join("sweep.csv");
            std::fs::write(&path, sweep_csv(&rows))?;
            println!("wrote {} ({} rows)", path.display(), rows.len());
        }
        Command::Metrics { image, regions } => {
            let cfg = CliConfig::from_path(&regions)?;
            let (pd, _dr) = read_image(&image)?;
            let report = evaluate_metrics(&pd, &cfg.metrics_spec()?);
            println!("{METRICS_HEADER}");
            println!(
                "{}",
                metrics_csv_row(
                    pd.provenance.variant.name(),
                    pd.provenance.esc,
                    pd.provenance.dc_offset,
                    &report
                )
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
