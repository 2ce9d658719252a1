use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hotfield::dataio::{
    read_directions, read_field_file, read_signal_file, read_sites, write_field_file,
    write_sites, write_uncertainty,
};
use hotfield::harness::{self, Method};
use hotfield::inference::{Hyper, McmcConfig};
use hotfield::stfit::{fit_record, GradientScheme};
use hotfield::{Error, Order};

#[derive(Parser)]
#[command(name = "hotfield", version, about = "Higher-order tensor field interpolation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Tdp,
    Direct,
    Logeuclid,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Tdp => Method::Tdp,
            MethodArg::Direct => Method::Direct,
            MethodArg::Logeuclid => Method::LogEuclid,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic field from the process prior on the unit grid
    Generate {
        #[arg(long)]
        order: usize,
        #[arg(long)]
        nx: usize,
        #[arg(long)]
        ny: usize,
        #[arg(long, default_value_t = 0.1)]
        theta: f64,
        #[arg(long, default_value_t = 1.0)]
        c2: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Keep the even-index nodes of a grid
    Downsample {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the removed nodes inside the kept grid as a site list
        #[arg(long)]
        heldout: Option<PathBuf>,
    },
    /// Predict tensors at target sites from a training grid
    Interpolate {
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long)]
        train: PathBuf,
        /// Site list (`x y` per line) or a field file whose nodes are used
        #[arg(long)]
        targets: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5000)]
        iters: usize,
        #[arg(long, default_value_t = 1000)]
        burnin: usize,
        #[arg(long, default_value_t = 10)]
        thin: usize,
        #[arg(long, default_value_t = 0.01)]
        sigma2: f64,
        #[arg(long, default_value_t = 1.0)]
        c2: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Frobenius error of a prediction against ground truth
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Fit tensors from diffusion-weighted signals
    Fit {
        #[arg(long)]
        signals: PathBuf,
        #[arg(long)]
        dirs: PathBuf,
        #[arg(long)]
        order: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export in-plane polar glyph samples
    Glyphs {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".unc");
    PathBuf::from(name)
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Generate {
            order,
            nx,
            ny,
            theta,
            c2,
            seed,
            out,
        } => {
            let field = harness::generate_synthetic(Order::new(order)?, nx, ny, theta, c2, seed)?;
            write_field_file(&out, &field)
        }
        Command::Downsample {
            input,
            out,
            heldout,
        } => {
            let field = read_field_file(&input)?;
            let train = harness::downsample_by_two(&field)?;
            write_field_file(&out, &train)?;
            if let Some(path) = heldout {
                write_sites(&path, &harness::heldout_sites(&field, &train))?;
            }
            Ok(())
        }
        Command::Interpolate {
            method,
            train,
            targets,
            out,
            iters,
            burnin,
            thin,
            sigma2,
            c2,
            seed,
        } => {
            let train = read_field_file(&train)?;
            let targets = read_sites(&targets)?;
            let cfg = McmcConfig {
                n_iters: iters,
                burn_in: burnin,
                thin,
                seed,
                ..Default::default()
            };
            let hyper = Hyper {
                sigma2,
                c2,
                ..Default::default()
            };
            let result = harness::interpolate(&train, &targets, method.into(), &cfg, &hyper)?;
            log::info!("interpolation took {:.3}s", result.elapsed_secs);
            write_field_file(&out, &result.field)?;
            if let Some(unc) = &result.uncertainty {
                write_uncertainty(&sidecar(&out), result.field.sites(), unc)?;
            }
            if let Some(chain) = &result.chain {
                log::info!(
                    "{} samples, theta median {:.4}, acceptance theta {:.3} core {:.3}",
                    chain.n_samples,
                    chain.theta_median,
                    chain.accept_theta,
                    chain.accept_core
                );
            }
            Ok(())
        }
        Command::Evaluate {
            pred,
            truth,
            report,
        } => {
            let pred = read_field_file(&pred)?;
            let truth = read_field_file(&truth)?;
            let r = harness::evaluate(&pred, &truth)?;
            println!("{}", r.summary());
            for (name, secs) in &r.timings {
                log::info!("{name}: {secs:.3}s");
            }
            write_text(&report, &r.to_text())
        }
        Command::Fit {
            signals,
            dirs,
            order,
            out,
        } => {
            let (header, record) = read_signal_file(&signals)?;
            if header.order != order {
                return Err(Error::InvalidConfig(format!(
                    "signal file declares order {}, --order is {order}",
                    header.order
                )));
            }
            let directions = read_directions(&dirs)?;
            if directions.len() != header.n_directions {
                return Err(Error::InvalidConfig(format!(
                    "signal file declares {} directions, directions file has {}",
                    header.n_directions,
                    directions.len()
                )));
            }
            let scheme = GradientScheme::new(directions, header.b, header.s0)?;
            let field = fit_record(&record, &scheme, Order::new(order)?)?;
            write_field_file(&out, &field)
        }
        Command::Glyphs {
            input,
            samples,
            out,
        } => {
            let field = read_field_file(&input)?;
            write_text(&out, &harness::glyph_export(&field, samples)?)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
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
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
