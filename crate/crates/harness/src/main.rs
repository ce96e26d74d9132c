use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use langevin_lab::config::ExperimentConfig;
use langevin_lab::experiments::bounds::{evaluate, report_table, reports_json, BoundInputs};
use langevin_lab::record::default_out_root;
use langevin_lab::LabError;
use manifold_langevin::bounds::DomainPolicy;
use manifold_langevin::geometry::{build_mesh, kato_constant, ManifoldKind, ParamManifold};

#[derive(Parser)]
#[command(name = "langevin-lab", version, about = "Run manifold Langevin experiments and evaluate bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output root; defaults to $LANGEVIN_LAB_OUT or ./runs.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Evaluate the diameter and log-Sobolev bounds.
    Bounds {
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 2.0)]
        k: f64,
        #[arg(long = "dim", default_value_t = 2)]
        intrinsic_dim: usize,
        #[arg(long, default_value_t = 4.0)]
        kappa: f64,
        #[arg(long, default_value_t = 0.0)]
        l: f64,
        #[arg(long, default_value_t = 0.0)]
        b: f64,
        #[arg(long)]
        diameter: Option<f64>,
        /// Evaluate outside the stated regimes and record the crossings.
        #[arg(long)]
        allow_out_of_regime: bool,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Kato constant of a named manifold at radius R.
    Kato {
        #[arg(value_enum)]
        manifold: NamedManifold,
        radius: f64,
        #[arg(long, default_value_t = 48)]
        resolution: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum NamedManifold {
    Circle,
    Sphere,
    Torus,
    PhaseTorus,
}

impl NamedManifold {
    fn build(self) -> Result<ParamManifold, LabError> {
        let kind = match self {
            NamedManifold::Circle => ManifoldKind::Circle { radius: 1.0 },
            NamedManifold::Sphere => ManifoldKind::Sphere { dim: 2, radius: 1.0 },
            NamedManifold::Torus => ManifoldKind::EmbeddedTorus { minor: 0.5, major: 1.5 },
            NamedManifold::PhaseTorus => ManifoldKind::PhaseTorus {
                amplitudes: [1.0, 0.5],
                frequencies: [1, 3],
                length: 32,
                phases: [0.0, 0.0],
            },
        };
        let ambient = match self {
            NamedManifold::Circle => 2,
            NamedManifold::PhaseTorus => 32,
            _ => 3,
        };
        ParamManifold::new(kind, ambient).map_err(LabError::invalid)
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), LabError> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let root = out.unwrap_or_else(default_out_root);
            let record = langevin_lab::run(&cfg, &root)?;
            println!("{}", record.dir.display());
            println!("{}", serde_json::to_string_pretty(&record.summary).expect("summary serialises"));
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            println!("ok: {}", cfg.experiment.name());
            Ok(())
        }
        Command::Bounds { sigma, k, intrinsic_dim, kappa, l, b, diameter, allow_out_of_regime, format } => {
            let inputs = BoundInputs { sigma, k, dim: intrinsic_dim, kappa, l, b, diameter };
            let policy = if allow_out_of_regime { DomainPolicy::Override } else { DomainPolicy::Enforce };
            let reports = evaluate(&inputs, policy);
            match format {
                Format::Csv => report_table(&reports).write_csv(std::io::stdout().lock())?,
                Format::Json => println!("{}", serde_json::to_string_pretty(&reports_json(&reports)).expect("json")),
            }
            if let Some((_, Err(e))) = reports.iter().find(|(_, r)| r.is_err()) {
                return Err(LabError::Validation(e.clone()));
            }
            Ok(())
        }
        Command::Kato { manifold, radius, resolution } => {
            let m = manifold.build()?;
            let mesh = build_mesh(&m, resolution)?;
            let kappa = kato_constant(&mesh, &m, radius)?;
            println!("{kappa}");
            Ok(())
        }
    }
}
