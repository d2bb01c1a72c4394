use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

use agglomer::corpus::CorpusFormat;
use agglomer::pipeline::{ProximityChoice, SuiteName};
use agglomer::specialization::ExpectationModel;
use agglomer::workflow::{self, LayoutChoice, MarginKind, Slice, WorkflowError};

#[derive(Parser)]
#[command(name = "agglomer", version, about = "Specialization, relatedness and entry/exit models from biographic data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Bin,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the input tables and write a corpus file.
    Ingest {
        #[arg(long)]
        biographies: PathBuf,
        #[arg(long)]
        taxonomy: PathBuf,
        #[arg(long)]
        regions: PathBuf,
        #[arg(long)]
        population: Option<PathBuf>,
        /// Fill missing region codes from coordinates.
        #[arg(long)]
        geocode_nearest: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "bin")]
        out_format: OutFormat,
    },
    /// Entropy and effective number of birth and death places per century.
    Entropy {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Counts, expectations, ratios and binary specialization of one slice.
    Specialize {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "naive")]
        expectation: ExpectationModel,
        #[arg(long, default_value = "births")]
        role: Slice,
        #[arg(long)]
        century: u8,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Proximity between activities and relatedness densities.
    Relate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "births")]
        role: Slice,
        #[arg(long)]
        century: u8,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        densities: PathBuf,
        #[arg(long)]
        exclude_self: bool,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long, default_value = "none")]
        layout: LayoutChoice,
    },
    /// Inverse-distance spatial lags of births specialization and density.
    Spatial {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        century: u8,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a model specification to a panel.
    Fit {
        #[arg(long)]
        panel: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the entry/exit regression panel.
    Panel {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "naive")]
        expectation: ExpectationModel,
        #[arg(long, default_value = "separate")]
        proximity: ProximityChoice,
        #[arg(long)]
        exclude_self: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a named family of models.
    Suite {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        name: SuiteName,
        #[arg(long, default_value = "naive")]
        expectation: ExpectationModel,
        #[arg(long, default_value = "separate")]
        proximity: ProximityChoice,
        #[arg(long)]
        out: PathBuf,
    },
    /// Average marginal effect of a variable in a saved fit.
    Margins {
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        panel: PathBuf,
        #[arg(long)]
        var: String,
        #[arg(long)]
        kind: MarginKind,
    },
}

fn run(cli: Cli) -> Result<(), WorkflowError> {
    match cli.command {
        Command::Ingest {
            biographies,
            taxonomy,
            regions,
            population,
            geocode_nearest,
            out,
            out_format,
        } => {
            let report = workflow::ingest(&workflow::IngestArgs {
                biographies,
                taxonomy,
                regions,
                population,
                geocode_nearest,
                out,
                format: match out_format {
                    OutFormat::Bin => CorpusFormat::Binary,
                    OutFormat::Json => CorpusFormat::Json,
                },
            })?;
            workflow::print_json(&report, std::io::stderr())
        }
        Command::Entropy { corpus, out } => workflow::entropy(&corpus, &out),
        Command::Specialize {
            corpus,
            expectation,
            role,
            century,
            out,
            svg,
        } => workflow::specialize(&workflow::SpecializeArgs {
            corpus,
            expectation,
            slice: role,
            century,
            out,
            svg,
        }),
        Command::Relate {
            corpus,
            role,
            century,
            out,
            densities,
            exclude_self,
            svg,
            layout,
        } => workflow::relate(&workflow::RelateArgs {
            corpus,
            slice: role,
            century,
            out,
            densities,
            exclude_self,
            svg,
            layout,
        }),
        Command::Spatial { corpus, century, out } => workflow::spatial(&corpus, century, &out),
        Command::Fit { panel, spec, out } => workflow::fit_model(&panel, &spec, &out).map(|_| ()),
        Command::Panel {
            corpus,
            expectation,
            proximity,
            exclude_self,
            out,
        } => {
            let panel = workflow::panel(&workflow::PanelArgs {
                corpus,
                expectation,
                proximity,
                exclude_self,
                out,
            })?;
            workflow::print_json(&panel.report, std::io::stderr())
        }
        Command::Suite {
            corpus,
            name,
            expectation,
            proximity,
            out,
        } => workflow::suite(&workflow::SuiteArgs {
            corpus,
            name,
            expectation,
            proximity,
            out,
        })
        .map(|_| ()),
        Command::Margins { fit, panel, var, kind } => {
            let effect = workflow::margins(&fit, &panel, &var, kind)?;
            workflow::print_json(&effect, std::io::stdout())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
