//! File-to-file operations behind the command-line subcommands.

use serde::Serialize;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

use crate::concentration::concentration_series;
use crate::corpus::{
    read_biographies, read_corpus, read_population, read_regions, read_taxonomy, tabulate_counts, write_corpus,
    Century, Corpus, CorpusError, CorpusFormat, IngestOptions, IngestReport, PopulationTable, Role,
};
use crate::econometrics::{
    average_marginal_effects, counterfactual_count_ame, fit, AmeKind, CountDelta, EconometricsError, FitOptions,
    FitResult, MarginalEffect, RegressionSpec,
};
use crate::frame::{format_number, FrameError};
use crate::pipeline::{
    compute_measures, panel_from_measures, run_suite, write_report, Measures, Panel, PanelOptions, PipelineError,
    ProximityChoice, RoleMeasures, SuiteName,
};
use crate::relatedness::DensityOptions;
use crate::specialization::ExpectationModel;
use crate::svg::{heatmap_svg, network_svg, NetworkLayout, NetworkOptions};

#[derive(Debug, Error)]
pub enum WorkflowError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Econometrics(#[from] EconometricsError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("no {role} data survives the sparse filter in century {century}")]
    NoSlice { century: u8, role: String },
    #[error("{0}")]
    Invalid(String),
}

impl WorkflowError {
    /// Process exit status: 3 for estimation failures, 2 for bad input, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        let estimation = |e: &EconometricsError| e.is_convergence_failure();
        match self {
            WorkflowError::Econometrics(e) | WorkflowError::Pipeline(PipelineError::Econometrics(e)) if estimation(e) => 3,
            WorkflowError::Io(_) | WorkflowError::Pipeline(PipelineError::Io(_)) => 1,
            WorkflowError::Corpus(CorpusError::Io(_)) | WorkflowError::Frame(FrameError::Io(_)) => 1,
            _ => 2,
        }
    }
}

type Result<T> = std::result::Result<T, WorkflowError>;

/// A role's matrix or the pooled births and deaths matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slice {
    Role(Role),
    Joint,
}

impl FromStr for Slice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s == "joint" {
            Ok(Slice::Joint)
        } else {
            s.parse().map(Slice::Role)
        }
    }
}

impl fmt::Display for Slice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slice::Role(r) => r.fmt(f),
            Slice::Joint => f.write_str("joint"),
        }
    }
}

fn century(t: u8) -> Result<Century> {
    Ok(Century::new(t)?)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| WorkflowError::Io(std::io::Error::other(format!("{}: {e}", path.display()))))
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv_writer(path)?;
    let io = |e: csv::Error| WorkflowError::Io(std::io::Error::other(e.to_string()));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value).map_err(|source| WorkflowError::Json {
        path: path.display().to_string(),
        source,
    })?;
    std::fs::write(path, json + "\n")?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|source| WorkflowError::Json {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone)]
pub struct IngestArgs {
    pub biographies: PathBuf,
    pub taxonomy: PathBuf,
    pub regions: PathBuf,
    pub population: Option<PathBuf>,
    pub geocode_nearest: bool,
    pub out: PathBuf,
    pub format: CorpusFormat,
}

/// Reads the four input tables and writes the validated corpus.
pub fn ingest(args: &IngestArgs) -> Result<IngestReport> {
    let population = match &args.population {
        Some(p) => read_population(p)?,
        None => PopulationTable::default(),
    };
    let corpus = Corpus::build(
        read_biographies(&args.biographies)?,
        read_taxonomy(&args.taxonomy)?,
        read_regions(&args.regions)?,
        population,
        IngestOptions {
            geocode_nearest: args.geocode_nearest,
        },
    )?;
    write_corpus(&corpus, &args.out, args.format)?;
    Ok(corpus.report)
}

/// `century,H_births,E_births,H_deaths,E_deaths`, blank where a century is empty.
pub fn entropy(corpus: &Path, out: &Path) -> Result<()> {
    let n = tabulate_counts(&read_corpus(corpus)?)?;
    let opt = |x: Option<f64>| x.map(format_number).unwrap_or_default();
    write_rows(
        out,
        &["century", "H_births", "E_births", "H_deaths", "E_deaths"],
        concentration_series(&n)
            .into_iter()
            .map(|r| [r.century.to_string(), opt(r.h_births), opt(r.e_births), opt(r.h_deaths), opt(r.e_deaths)]),
    )
}

fn measures(corpus: &Corpus, expectation: ExpectationModel, density: DensityOptions, spatial: bool) -> Result<Measures> {
    Ok(compute_measures(
        corpus,
        PanelOptions {
            expectation,
            proximity: ProximityChoice::Separate,
            spatial,
            density,
        },
    )?)
}

fn slice_of(m: &Measures, t: Century, slice: Slice) -> Result<&RoleMeasures> {
    let c = m.centuries.get(&t);
    let found = match slice {
        Slice::Role(role) => c.and_then(|c| c.roles.get(&role)),
        Slice::Joint => c.and_then(|c| c.joint.as_ref()),
    };
    found.ok_or_else(|| WorkflowError::NoSlice {
        century: t.get(),
        role: slice.to_string(),
    })
}

#[derive(Debug, Clone)]
pub struct SpecializeArgs {
    pub corpus: PathBuf,
    pub expectation: ExpectationModel,
    pub slice: Slice,
    pub century: u8,
    pub out: PathBuf,
    pub svg: Option<PathBuf>,
}

/// Long table `region,occupation,N,Nhat,R,M` over the filtered cells.
pub fn specialize(args: &SpecializeArgs) -> Result<()> {
    let corpus = read_corpus(&args.corpus)?;
    let t = century(args.century)?;
    let m = measures(&corpus, args.expectation, DensityOptions::default(), false)?;
    let rm = slice_of(&m, t, args.slice)?;
    let regions = rm.index.region_codes(&m.tensor);
    let occupations = rm.index.occupation_codes(&m.tensor);
    let set = &rm.set;
    let mut rows = Vec::with_capacity(regions.len() * occupations.len());
    for (a, region) in regions.iter().enumerate() {
        for (b, occ) in occupations.iter().enumerate() {
            rows.push([
                (*region).to_owned(),
                (*occ).to_owned(),
                format_number(set.n[(a, b)]),
                format_number(set.nhat[(a, b)]),
                format_number(set.r[(a, b)]),
                set.m.get(a, b).to_string(),
            ]);
        }
    }
    write_rows(&args.out, &["region", "occupation", "N", "Nhat", "R", "M"], rows)?;
    if let Some(svg) = &args.svg {
        let title = format!("{} specialization, century {}", args.slice, t);
        std::fs::write(svg, heatmap_svg(&set.m, &regions, &occupations, &title))?;
    }
    Ok(())
}

/// Node placement for the proximity network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LayoutChoice {
    #[default]
    None,
    /// Each activity at the count-weighted mean centroid of its regions.
    Geographic,
}

impl FromStr for LayoutChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "none" => Ok(LayoutChoice::None),
            "geographic" => Ok(LayoutChoice::Geographic),
            other => Err(format!("unknown layout {other:?}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RelateArgs {
    pub corpus: PathBuf,
    pub slice: Slice,
    pub century: u8,
    pub out: PathBuf,
    pub densities: PathBuf,
    pub exclude_self: bool,
    pub svg: Option<PathBuf>,
    pub layout: LayoutChoice,
}

/// Proximities as `occupation_a,occupation_b,phi` and densities as
/// `region,occupation,omega,isolated,self_term`.
pub fn relate(args: &RelateArgs) -> Result<()> {
    let corpus = read_corpus(&args.corpus)?;
    let t = century(args.century)?;
    let density = DensityOptions {
        exclude_self: args.exclude_self,
    };
    let m = measures(&corpus, ExpectationModel::Naive, density, false)?;
    let rm = slice_of(&m, t, args.slice)?;
    let regions = rm.index.region_codes(&m.tensor);
    let occupations = rm.index.occupation_codes(&m.tensor);

    let mut phi_rows = Vec::new();
    for (a, oa) in occupations.iter().enumerate() {
        for (b, ob) in occupations.iter().enumerate() {
            phi_rows.push([(*oa).to_owned(), (*ob).to_owned(), format_number(rm.phi[(a, b)])]);
        }
    }
    write_rows(&args.out, &["occupation_a", "occupation_b", "phi"], phi_rows)?;

    let self_term = if args.exclude_self { "excluded" } else { "included" };
    let mut omega_rows = Vec::new();
    for (a, region) in regions.iter().enumerate() {
        for (b, occ) in occupations.iter().enumerate() {
            omega_rows.push([
                (*region).to_owned(),
                (*occ).to_owned(),
                format_number(rm.densities.omega[(a, b)]),
                u8::from(rm.densities.isolated[b]).to_string(),
                self_term.to_owned(),
            ]);
        }
    }
    write_rows(
        &args.densities,
        &["region", "occupation", "omega", "isolated", "self_term"],
        omega_rows,
    )?;

    if let Some(svg) = &args.svg {
        let counts: Vec<f64> = rm.set.n.sum_axis(ndarray::Axis(0)).to_vec();
        let layout = match args.layout {
            LayoutChoice::None => NetworkLayout::Circle,
            LayoutChoice::Geographic => {
                let centroids: Vec<(f64, f64)> = regions
                    .iter()
                    .map(|c| {
                        let r = corpus.regions.get(c).expect("tensor regions come from the registry");
                        (r.centroid_lat, r.centroid_lon)
                    })
                    .collect();
                NetworkLayout::Geographic(
                    (0..occupations.len())
                        .map(|b| {
                            let w = rm.set.n.column(b);
                            let total = w.sum();
                            if total <= 0.0 {
                                return (f64::NAN, f64::NAN);
                            }
                            let lat = w.iter().zip(&centroids).map(|(w, c)| w * c.0).sum::<f64>() / total;
                            let lon = w.iter().zip(&centroids).map(|(w, c)| w * c.1).sum::<f64>() / total;
                            (lat, lon)
                        })
                        .collect(),
                )
            }
        };
        let options = NetworkOptions {
            layout,
            title: format!("{} proximity, century {}", args.slice, t),
            ..Default::default()
        };
        std::fs::write(svg, network_svg(&rm.phi, &occupations, &counts, &options))?;
    }
    Ok(())
}

/// `region,occupation,rho_M,rho_omega` over the births cells of century `t`.
pub fn spatial(corpus: &Path, t: u8, out: &Path) -> Result<()> {
    let corpus = read_corpus(corpus)?;
    let t = century(t)?;
    let m = measures(&corpus, ExpectationModel::Naive, DensityOptions::default(), true)?;
    let rm = slice_of(&m, t, Slice::Role(Role::Births))?;
    let lags = m.centuries[&t]
        .spatial
        .as_ref()
        .expect("spatial lags requested for every century with births");
    let regions = rm.index.region_codes(&m.tensor);
    let occupations = rm.index.occupation_codes(&m.tensor);
    let mut rows = Vec::new();
    for (a, region) in regions.iter().enumerate() {
        for (b, occ) in occupations.iter().enumerate() {
            rows.push([
                (*region).to_owned(),
                (*occ).to_owned(),
                format_number(lags.rho_m[(a, b)]),
                format_number(lags.rho_omega[(a, b)]),
            ]);
        }
    }
    write_rows(out, &["region", "occupation", "rho_M", "rho_omega"], rows)
}

/// Fits the model in `spec` (JSON) to a panel CSV and writes the result as JSON.
pub fn fit_model(panel: &Path, spec: &Path, out: &Path) -> Result<FitResult> {
    let frame = Panel::read_frame(panel)?;
    let spec: RegressionSpec = read_json(spec)?;
    let result = fit(&frame, &spec, &FitOptions::default())?;
    write_json(out, &result)?;
    Ok(result)
}

#[derive(Debug, Clone)]
pub struct PanelArgs {
    pub corpus: PathBuf,
    pub expectation: ExpectationModel,
    pub proximity: ProximityChoice,
    pub exclude_self: bool,
    pub out: PathBuf,
}

pub fn panel(args: &PanelArgs) -> Result<Panel> {
    let corpus = read_corpus(&args.corpus)?;
    let options = PanelOptions {
        expectation: args.expectation,
        proximity: args.proximity,
        spatial: true,
        density: DensityOptions {
            exclude_self: args.exclude_self,
        },
    };
    let measures = compute_measures(&corpus, options)?;
    let panel = panel_from_measures(&corpus, &measures)?;
    panel.write_csv(&args.out)?;
    Ok(panel)
}

#[derive(Debug, Clone)]
pub struct SuiteArgs {
    pub corpus: PathBuf,
    pub name: SuiteName,
    pub expectation: ExpectationModel,
    pub proximity: ProximityChoice,
    pub out: PathBuf,
}

/// Runs a suite and writes `report.json` and `coefficients.csv` into `out`.
pub fn suite(args: &SuiteArgs) -> Result<crate::pipeline::SuiteReport> {
    let corpus = read_corpus(&args.corpus)?;
    let options = PanelOptions {
        expectation: args.expectation,
        proximity: args.proximity,
        ..Default::default()
    };
    let report = run_suite(&corpus, args.name, options)?;
    write_report(&report, &args.out)?;
    Ok(report)
}

/// A marginal-effect kind or a raw-count change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginKind {
    Effect(AmeKind),
    Count(CountDelta),
}

impl FromStr for MarginKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        s.parse()
            .map(MarginKind::Effect)
            .or_else(|_| s.parse().map(MarginKind::Count))
            .map_err(|_| format!("unknown margin kind {s:?}; expected binary01, unit, sd_increase, +1 or +1%"))
    }
}

/// Average marginal effect of `var` for a fit saved by [`fit_model`],
/// evaluated on the panel it was estimated from.
pub fn margins(fit_path: &Path, panel: &Path, var: &str, kind: MarginKind) -> Result<MarginalEffect> {
    let result: FitResult = read_json(fit_path)?;
    let frame = Panel::read_frame(panel)?;
    Ok(match kind {
        MarginKind::Effect(k) => average_marginal_effects(&result, &frame, var, k)?,
        MarginKind::Count(d) => counterfactual_count_ame(&result, &frame, var, d)?,
    })
}

/// Pretty JSON with a trailing newline.
pub fn print_json<T: Serialize, W: Write>(value: &T, mut out: W) -> Result<()> {
    let json = serde_json::to_string_pretty(value).map_err(|source| WorkflowError::Json {
        path: "<stdout>".into(),
        source,
    })?;
    writeln!(out, "{json}")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let conv = EconometricsError::NonConvergence {
            iterations: 5,
            gradient_norm: 1.0,
        };
        assert_eq!(WorkflowError::Econometrics(conv).exit_code(), 3);
        assert_eq!(WorkflowError::Invalid("x".into()).exit_code(), 2);
        assert_eq!(WorkflowError::Pipeline(PipelineError::UnknownSuite("x".into())).exit_code(), 2);
        assert_eq!(WorkflowError::Io(std::io::Error::other("disk")).exit_code(), 1);
    }

    #[test]
    fn parse_choices() {
        assert_eq!("joint".parse::<Slice>().unwrap(), Slice::Joint);
        assert_eq!("immi".parse::<Slice>().unwrap(), Slice::Role(Role::Immigrants));
        assert!("nobody".parse::<Slice>().is_err());
        assert_eq!("+1%".parse::<MarginKind>().unwrap(), MarginKind::Count(CountDelta::PlusOnePercent));
        assert_eq!("binary01".parse::<MarginKind>().unwrap(), MarginKind::Effect(AmeKind::Binary01));
        assert_eq!("geographic".parse::<LayoutChoice>().unwrap(), LayoutChoice::Geographic);
    }
}
