//! Named ladders of model specifications run on one panel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::measures::{compute_measures, Measures};
use super::panel::{panel_from_measures, ColumnKind, Panel, PanelReport};
use super::subset::{subset, CitySize, PanelFilter};
use super::{PanelOptions, PipelineError};
use crate::corpus::{Corpus, Role};
use crate::econometrics::{
    average_marginal_effects, counterfactual_count_ame, factor_operand, fit, AmeKind, CountDelta,
    CovariateSpec, Family, FitOptions, FitResult, MarginalEffect, RegressionSpec,
};
use crate::specialization::ExpectationModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteName {
    /// Main entry and exit models with the most restrictive fixed effects.
    Table1,
    /// Entries under four lighter fixed-effect structures.
    EntriesLadder,
    ExitsLadder,
    /// Ratios replaced by their asinh-transformed count components.
    Decomposed,
    /// Spatial lags with century-specific slopes.
    SpatialCentury,
    /// Outcome centuries up to the 19th.
    PreModern,
    /// 20th-century outcomes only.
    Twentieth,
    /// Entries and exits as first and last births.
    FirstLast,
    /// Products of relatedness densities.
    Interactions,
    /// One model per aggregated occupation group.
    Categories,
    /// Regions below and above the century's median population.
    CitySize,
    /// The count models behind model-based expectations.
    Expectations,
}

impl SuiteName {
    pub const ALL: [SuiteName; 12] = [
        SuiteName::Table1,
        SuiteName::EntriesLadder,
        SuiteName::ExitsLadder,
        SuiteName::Decomposed,
        SuiteName::SpatialCentury,
        SuiteName::PreModern,
        SuiteName::Twentieth,
        SuiteName::FirstLast,
        SuiteName::Interactions,
        SuiteName::Categories,
        SuiteName::CitySize,
        SuiteName::Expectations,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::Table1 => "table1",
            SuiteName::EntriesLadder => "entries-ladder",
            SuiteName::ExitsLadder => "exits-ladder",
            SuiteName::Decomposed => "decomposed",
            SuiteName::SpatialCentury => "spatial-century",
            SuiteName::PreModern => "pre-modern",
            SuiteName::Twentieth => "twentieth",
            SuiteName::FirstLast => "first-last",
            SuiteName::Interactions => "interactions",
            SuiteName::Categories => "categories",
            SuiteName::CitySize => "city-size",
            SuiteName::Expectations => "expectations",
        }
    }
}

impl fmt::Display for SuiteName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SuiteName {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SuiteName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| PipelineError::UnknownSuite(s.into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmeRequest {
    Effect { variable: String, kind: AmeKind },
    Count { variable: String, delta: CountDelta },
}

/// One column of a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnJob {
    pub column: usize,
    pub label: String,
    pub filter: PanelFilter,
    pub spec: RegressionSpec,
    /// Allows outcome-century margins among the regressors.
    pub outcome_margins: bool,
    pub marginal_effects: Vec<AmeRequest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ColumnOutcome {
    Fitted {
        fit: Box<FitResult>,
        marginal_effects: Vec<MarginalEffect>,
        /// Requested effects that could not be computed.
        marginal_errors: Vec<String>,
    },
    Failed {
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnReport {
    pub column: usize,
    pub label: String,
    pub outcome: String,
    pub filter: PanelFilter,
    #[serde(flatten)]
    pub result: ColumnOutcome,
}

impl ColumnReport {
    pub fn fit(&self) -> Option<&FitResult> {
        match &self.result {
            ColumnOutcome::Fitted { fit, .. } => Some(fit),
            ColumnOutcome::Failed { .. } => None,
        }
    }

    pub fn marginal_effect(&self, variable: &str, contrast: &str) -> Option<&MarginalEffect> {
        match &self.result {
            ColumnOutcome::Fitted { marginal_effects, .. } => marginal_effects
                .iter()
                .find(|m| m.variable == variable && m.contrast == contrast),
            ColumnOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: SuiteName,
    pub options: PanelOptions,
    pub panel: PanelReport,
    pub columns: Vec<ColumnReport>,
}

impl SuiteReport {
    pub fn column(&self, column: usize) -> Option<&ColumnReport> {
        self.columns.iter().find(|c| c.column == column)
    }
}

const MAIN_FE: [&[&str]; 2] = [&["broad_category", "region", "century"], &["category", "century"]];
const CLUSTERS: [&str; 2] = ["region", "century"];
const TABLE_CONTROLS: [&str; 4] = ["ubiquity", "rho_M", "rho_omega", "R_births"];
const OMEGAS: [&str; 3] = ["omega_immi", "omega_emi", "omega_births"];

/// Fixed-effect ladder shared by the robustness suites; region-level
/// controls are only identified in the first three rungs.
const LADDER: [(&str, &[&[&str]]); 5] = [
    ("period", &[&["century"]]),
    ("period, region", &[&["century"], &["region"]]),
    ("period, region, category", &[&["century"], &["region"], &["category"]]),
    ("period-region, category", &[&["region", "century"], &["category"]]),
    (
        "broad category-region-period, category-period",
        &[&["broad_category", "region", "century"], &["category", "century"]],
    ),
];

fn spec_with(outcome: &str, covariates: &[&str], fe: &[&[&str]], clusters: &[&str]) -> RegressionSpec {
    let mut s = RegressionSpec::new(Family::Logistic, outcome).covariates(covariates.iter().copied());
    for f in fe {
        s = s.fixed_effect(f);
    }
    s.clusters(clusters)
}

fn effect(variable: &str, kind: AmeKind) -> AmeRequest {
    AmeRequest::Effect {
        variable: variable.into(),
        kind,
    }
}

fn default_effects(spec: &RegressionSpec) -> Vec<AmeRequest> {
    let has = |c: &str| spec.covariates.iter().any(|v| v.col == c);
    let mut out = Vec::new();
    if has("M_immi") {
        out.push(effect("M_immi", AmeKind::Binary01));
    }
    if has("omega_immi") {
        out.push(effect("omega_immi", AmeKind::SdIncrease));
    }
    out
}

struct Jobs(Vec<ColumnJob>);

impl Jobs {
    fn push(&mut self, label: String, filter: PanelFilter, spec: RegressionSpec) {
        let marginal_effects = default_effects(&spec);
        self.0.push(ColumnJob {
            column: self.0.len() + 1,
            label,
            filter,
            spec,
            outcome_margins: false,
            marginal_effects,
        });
    }
}

/// Covariates of a main-table column: the migrant matrices plus the chosen
/// densities and controls.
fn table_covariates(variant: usize, controls: &[&'static str]) -> Vec<&'static str> {
    let mut v = Vec::new();
    if variant > 0 {
        v.extend(["M_immi", "M_emi"]);
        match variant {
            2..=4 => v.push(OMEGAS[variant - 2]),
            5 => v.extend(OMEGAS),
            _ => {}
        }
    }
    v.extend(controls);
    v
}

fn variant_label(variant: usize) -> &'static str {
    ["controls", "M", "M + omega_immi", "M + omega_emi", "M + omega_births", "M + all omega"][variant]
}

fn full_covariates(region_controls: bool) -> Vec<&'static str> {
    let mut v = vec!["M_immi", "M_emi", "omega_immi", "omega_emi", "omega_births"];
    if region_controls {
        v.push("diversity");
    }
    v.extend(["ubiquity", "rho_M", "rho_omega", "R_births"]);
    if region_controls {
        v.push("log_pop");
    }
    v
}

fn decomposed_covariates(region_terms: bool) -> Vec<CovariateSpec> {
    let mut v = Vec::new();
    for role in ["immi", "emi"] {
        v.push(CovariateSpec::asinh(&format!("N_{role}")));
        if region_terms {
            v.push(CovariateSpec::asinh(&format!("N_{role}_region")));
        }
        v.push(CovariateSpec::asinh(&format!("N_{role}_occupation")));
    }
    if region_terms {
        v.push(CovariateSpec::asinh("N_births_region"));
    }
    v.push(CovariateSpec::asinh("N_births_occupation"));
    v.extend(OMEGAS.iter().map(|c| CovariateSpec::identity(c)));
    if region_terms {
        v.push(CovariateSpec::identity("diversity"));
    }
    v.extend(["ubiquity", "rho_M", "rho_omega"].map(CovariateSpec::identity));
    if region_terms {
        v.push(CovariateSpec::identity("log_pop"));
    }
    v
}

/// Column definitions of a suite.
pub fn suite_jobs(name: SuiteName) -> Vec<ColumnJob> {
    let mut jobs = Jobs(Vec::new());
    let all = PanelFilter::All;
    match name {
        SuiteName::Table1 => {
            for outcome in ["Entry", "Exit"] {
                for variant in 1..=5 {
                    let cov = table_covariates(variant, &TABLE_CONTROLS);
                    jobs.push(
                        format!("{outcome}: {}", variant_label(variant)),
                        all.clone(),
                        spec_with(outcome, &cov, &MAIN_FE, &CLUSTERS),
                    );
                }
            }
        }
        SuiteName::EntriesLadder | SuiteName::ExitsLadder => {
            let outcome = if name == SuiteName::EntriesLadder { "Entry" } else { "Exit" };
            let structures: [(&str, &[&[&str]]); 4] = [
                ("period-region, category", &[&["region", "century"], &["category"]]),
                ("period, region, category", &[&["century"], &["region"], &["category"]]),
                ("period, region", &[&["century"], &["region"]]),
                ("period", &[&["century"]]),
            ];
            for (i, (fe_label, fe)) in structures.into_iter().enumerate() {
                let mut controls = TABLE_CONTROLS.to_vec();
                if i > 0 {
                    controls.extend(["diversity", "log_pop"]);
                }
                for variant in 0..=5 {
                    let cov = table_covariates(variant, &controls);
                    jobs.push(
                        format!("{fe_label}: {}", variant_label(variant)),
                        all.clone(),
                        spec_with(outcome, &cov, fe, &CLUSTERS),
                    );
                }
            }
        }
        SuiteName::Decomposed => {
            for outcome in ["Entry", "Exit", "Entry2", "Exit2"] {
                for (rung, (fe_label, fe)) in LADDER.into_iter().enumerate() {
                    let mut spec = spec_with(outcome, &[], fe, &CLUSTERS);
                    spec.covariates = decomposed_covariates(rung < 3);
                    let mut marginal_effects = default_effects(&spec);
                    if rung == 3 {
                        for delta in [CountDelta::PlusOne, CountDelta::PlusOnePercent] {
                            marginal_effects.push(AmeRequest::Count {
                                variable: "N_immi".into(),
                                delta,
                            });
                        }
                    }
                    jobs.0.push(ColumnJob {
                        column: jobs.0.len() + 1,
                        label: format!("{outcome}: {fe_label}"),
                        filter: all.clone(),
                        spec,
                        outcome_margins: true,
                        marginal_effects,
                    });
                }
            }
        }
        SuiteName::SpatialCentury => {
            for outcome in ["Entry", "Exit"] {
                let cov: Vec<&str> = table_covariates(5, &["ubiquity", "R_births"]);
                let spec = spec_with(outcome, &cov, &MAIN_FE, &CLUSTERS)
                    .interaction("rho_M", "C(century)")
                    .interaction("rho_omega", "C(century)");
                jobs.push(format!("{outcome}: century-specific spatial lags"), all.clone(), spec);
            }
        }
        SuiteName::PreModern | SuiteName::FirstLast => {
            let (outcomes, filter) = if name == SuiteName::PreModern {
                (["Entry", "Exit"], PanelFilter::Centuries { from: 11, to: 19 })
            } else {
                (["Entry2", "Exit2"], all.clone())
            };
            for outcome in outcomes {
                for (rung, (fe_label, fe)) in LADDER.into_iter().enumerate() {
                    let cov = full_covariates(rung < 3);
                    jobs.push(
                        format!("{outcome}: {fe_label}"),
                        filter.clone(),
                        spec_with(outcome, &cov, fe, &CLUSTERS),
                    );
                }
            }
        }
        SuiteName::Twentieth => {
            let structures: [(&str, &[&[&str]]); 4] = [
                ("none", &[]),
                ("region", &[&["region"]]),
                ("region, category", &[&["region"], &["category"]]),
                ("region-broad category, category", &[&["region", "broad_category"], &["category"]]),
            ];
            for outcome in ["Entry", "Exit"] {
                for (i, (fe_label, fe)) in structures.into_iter().enumerate() {
                    let cov = full_covariates(i == 0);
                    jobs.push(
                        format!("{outcome}: {fe_label}"),
                        PanelFilter::Centuries { from: 20, to: 20 },
                        spec_with(outcome, &cov, fe, &["region"]),
                    );
                }
            }
        }
        SuiteName::Interactions => {
            let structures: [(&str, &[&[&str]]); 3] = [
                ("period, region, category", &[&["century"], &["region"], &["category"]]),
                ("period-region, category", &[&["region", "century"], &["category"]]),
                ("broad category-region-period, category-period", &MAIN_FE),
            ];
            let pairs = [
                ("omega_immi", "omega_emi"),
                ("omega_immi", "omega_births"),
                ("omega_emi", "omega_births"),
            ];
            for (fe_label, fe) in structures {
                for (a, b) in pairs {
                    let cov = table_covariates(5, &TABLE_CONTROLS);
                    jobs.push(
                        format!("{fe_label}: {a} x {b}"),
                        all.clone(),
                        spec_with("Entry", &cov, fe, &CLUSTERS).interaction(a, b),
                    );
                }
            }
        }
        SuiteName::Categories => {
            let groups = [
                "Arts",
                "Humanities",
                "Sciences",
                "Business & Technology",
                "Sports",
                "Public Figures & Institutions",
            ];
            for outcome in ["Entry", "Exit"] {
                for g in groups {
                    let cov = full_covariates(true);
                    jobs.push(
                        format!("{outcome}: {g}"),
                        PanelFilter::Groups(vec![g.into()]),
                        spec_with(outcome, &cov, &[&["century"], &["region"], &["category"]], &CLUSTERS),
                    );
                }
            }
        }
        SuiteName::CitySize => {
            for outcome in ["Entry", "Exit"] {
                for size in [CitySize::Small, CitySize::Large] {
                    let cov = table_covariates(5, &TABLE_CONTROLS);
                    jobs.push(
                        format!("{outcome}: {} cities", if size == CitySize::Small { "small" } else { "large" }),
                        PanelFilter::CitySize(size),
                        spec_with(outcome, &cov, &MAIN_FE, &CLUSTERS),
                    );
                }
            }
        }
        SuiteName::Expectations => {}
    }
    jobs.0
}

/// Every regressor must be dated before the outcome.
fn check_dating(panel: &Panel, job: &ColumnJob) -> Result<(), PipelineError> {
    let spec = &job.spec;
    let columns = spec
        .covariates
        .iter()
        .map(|c| c.col.as_str())
        .chain(spec.interactions.iter().flatten().map(|o| factor_operand(o).unwrap_or(o)));
    for col in columns {
        let allowed = match panel.kind(col) {
            Some(ColumnKind::Lagged | ColumnKind::PeriodStart) => true,
            Some(ColumnKind::OutcomeMargin) => job.outcome_margins,
            Some(ColumnKind::Key) => spec.interactions.iter().flatten().any(|o| factor_operand(o) == Some(col)),
            Some(ColumnKind::Outcome) => false,
            None => true,
        };
        if !allowed {
            return Err(PipelineError::Leakage { column: col.into() });
        }
    }
    Ok(())
}

fn run_job(panel: &Panel, job: &ColumnJob) -> ColumnReport {
    let result = (|| -> Result<ColumnOutcome, PipelineError> {
        check_dating(panel, job)?;
        let sub = subset(panel, &job.filter)?;
        let f = fit(&sub.frame, &job.spec, &FitOptions::default())?;
        let mut marginal_effects = Vec::new();
        let mut marginal_errors = Vec::new();
        for req in &job.marginal_effects {
            let r = match req {
                AmeRequest::Effect { variable, kind } => average_marginal_effects(&f, &sub.frame, variable, *kind),
                AmeRequest::Count { variable, delta } => counterfactual_count_ame(&f, &sub.frame, variable, *delta),
            };
            match r {
                Ok(m) => marginal_effects.push(m),
                Err(e) => marginal_errors.push(format!("{req:?}: {e}")),
            }
        }
        Ok(ColumnOutcome::Fitted {
            fit: Box::new(f),
            marginal_effects,
            marginal_errors,
        })
    })();
    ColumnReport {
        column: job.column,
        label: job.label.clone(),
        outcome: job.spec.response.clone(),
        filter: job.filter.clone(),
        result: result.unwrap_or_else(|e| ColumnOutcome::Failed { error: e.to_string() }),
    }
}

/// Runs a suite's columns on an assembled panel.
pub fn run_suite_on(name: SuiteName, panel: &Panel, measures: &Measures) -> SuiteReport {
    let columns = if name == SuiteName::Expectations {
        [Role::Immigrants, Role::Emigrants, Role::Births]
            .into_iter()
            .enumerate()
            .map(|(i, role)| {
                let result = match measures.expectation_fit(role) {
                    Some(f) => ColumnOutcome::Fitted {
                        fit: Box::new(f.clone()),
                        marginal_effects: vec![],
                        marginal_errors: vec![],
                    },
                    None => ColumnOutcome::Failed {
                        error: measures
                            .expectation_failures
                            .iter()
                            .find(|(r, _)| *r == role)
                            .map_or_else(|| "count model not estimated".to_string(), |(_, e)| e.clone()),
                    },
                };
                ColumnReport {
                    column: i + 1,
                    label: format!("expected {role}"),
                    outcome: format!("N_{role}"),
                    filter: PanelFilter::All,
                    result,
                }
            })
            .collect()
    } else {
        suite_jobs(name).par_iter().map(|job| run_job(panel, job)).collect()
    };
    SuiteReport {
        suite: name,
        options: measures.options,
        panel: panel.report.clone(),
        columns,
    }
}

/// Builds the panel and runs a suite; the count-model suite always uses
/// model-based expectations.
pub fn run_suite(corpus: &Corpus, name: SuiteName, mut options: PanelOptions) -> Result<SuiteReport, PipelineError> {
    if name == SuiteName::Expectations {
        options.expectation = ExpectationModel::NegBin;
    }
    let measures = compute_measures(corpus, options)?;
    let panel = panel_from_measures(corpus, &measures)?;
    Ok(run_suite_on(name, &panel, &measures))
}

fn opt(x: Option<f64>) -> String {
    x.map(crate::frame::format_number).unwrap_or_default()
}

/// Writes `report.json` and a flat `coefficients.csv` into `dir`.
pub fn write_report(report: &SuiteReport, dir: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(report)?;
    std::fs::write(dir.join("report.json"), json + "\n")?;
    let path = dir.join("coefficients.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| std::io::Error::other(e.to_string()))?;
    let io = |e: csv::Error| std::io::Error::other(e.to_string());
    w.write_record([
        "suite", "column", "label", "outcome", "term", "estimate", "std_error", "p_value", "stars", "n",
    ])
    .map_err(io)?;
    for c in &report.columns {
        let Some(f) = c.fit() else {
            continue;
        };
        for coef in &f.coefficients {
            w.write_record([
                report.suite.as_str(),
                &c.column.to_string(),
                &c.label,
                &c.outcome,
                &coef.name,
                &opt(coef.estimate),
                &opt(coef.std_error),
                &opt(coef.p_value),
                &coef.stars,
                &f.n_used.to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::synth::{synthetic_corpus, SynthConfig};
    use crate::pipeline::{compute_measures, panel_from_measures};

    fn small() -> (Corpus, PanelOptions) {
        let cfg = SynthConfig {
            regions: 12,
            occupations: 10,
            births_per_century: 800,
            first_century: 16,
            ..Default::default()
        };
        (synthetic_corpus(&cfg, 5).unwrap(), PanelOptions::default())
    }

    #[test]
    fn no_suite_uses_outcome_dated_regressors() {
        let (corpus, options) = small();
        let measures = compute_measures(&corpus, options).unwrap();
        let panel = panel_from_measures(&corpus, &measures).unwrap();
        for name in SuiteName::ALL {
            for job in suite_jobs(name) {
                check_dating(&panel, &job).unwrap_or_else(|e| panic!("{name} column {}: {e}", job.column));
            }
        }
    }

    #[test]
    fn outcome_margins_rejected_outside_decomposition() {
        let (corpus, options) = small();
        let panel = crate::pipeline::assemble_panel(&corpus, options).unwrap();
        let mut job = suite_jobs(SuiteName::Decomposed).remove(0);
        assert!(check_dating(&panel, &job).is_ok());
        job.outcome_margins = false;
        assert!(matches!(check_dating(&panel, &job), Err(PipelineError::Leakage { .. })));
        job.spec = spec_with("Entry", &["Exit"], &[], &[]);
        let report = run_job(&panel, &job);
        assert!(matches!(&report.result, ColumnOutcome::Failed { error } if error.contains("Exit")));
    }

    #[test]
    fn suite_names_round_trip() {
        for name in SuiteName::ALL {
            assert_eq!(name.as_str().parse::<SuiteName>().unwrap(), name);
        }
        assert!(matches!("table9".parse::<SuiteName>(), Err(PipelineError::UnknownSuite(_))));
    }

    #[test]
    fn reports_are_byte_identical_across_runs() {
        let (corpus, options) = small();
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        for d in &dirs {
            let report = run_suite(&corpus, SuiteName::Table1, options).unwrap();
            write_report(&report, d.path()).unwrap();
        }
        for file in ["report.json", "coefficients.csv"] {
            let a = std::fs::read(dirs[0].path().join(file)).unwrap();
            let b = std::fs::read(dirs[1].path().join(file)).unwrap();
            assert!(!a.is_empty());
            assert_eq!(a, b, "{file}");
        }
    }
}
