//! One row per region, occupation and century transition.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use super::labels::{label_entries_exits, label_first_last};
use super::measures::{compute_measures, Measures, RoleMeasures};
use super::{PanelOptions, PipelineError};
use crate::corpus::{Corpus, Role, FIRST_CENTURY};
use crate::frame::{Frame, FrameError};

/// When a column is measured relative to the outcome century `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    /// Identifiers and fixed-effect keys.
    Key,
    /// Dated `t`; the dependent variables.
    Outcome,
    /// Dated `t - 1`.
    Lagged,
    /// Measured at the start of century `t`, before any outcome births.
    PeriodStart,
    /// Margins of the outcome slice, dated `t`; only for decomposed models.
    OutcomeMargin,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnInfo {
    pub name: String,
    pub kind: ColumnKind,
}

pub const TEXT_COLUMNS: [&str; 5] = ["region", "occupation", "category", "broad_category", "group"];

const SCHEMA: &[(&str, ColumnKind)] = &[
    ("century", ColumnKind::Key),
    ("Entry", ColumnKind::Outcome),
    ("Exit", ColumnKind::Outcome),
    ("Entry2", ColumnKind::Outcome),
    ("Exit2", ColumnKind::Outcome),
    ("M_births", ColumnKind::Lagged),
    ("R_births", ColumnKind::Lagged),
    ("M_immi", ColumnKind::Lagged),
    ("M_emi", ColumnKind::Lagged),
    ("omega_immi", ColumnKind::Lagged),
    ("omega_emi", ColumnKind::Lagged),
    ("omega_births", ColumnKind::Lagged),
    ("ubiquity", ColumnKind::Lagged),
    ("diversity", ColumnKind::Lagged),
    ("rho_M", ColumnKind::Lagged),
    ("rho_omega", ColumnKind::Lagged),
    ("N_births", ColumnKind::Lagged),
    ("N_immi", ColumnKind::Lagged),
    ("N_immi_region", ColumnKind::Lagged),
    ("N_immi_occupation", ColumnKind::Lagged),
    ("N_emi", ColumnKind::Lagged),
    ("N_emi_region", ColumnKind::Lagged),
    ("N_emi_occupation", ColumnKind::Lagged),
    ("pop", ColumnKind::PeriodStart),
    ("log_pop", ColumnKind::PeriodStart),
    ("N_births_region", ColumnKind::OutcomeMargin),
    ("N_births_occupation", ColumnKind::OutcomeMargin),
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PanelReport {
    pub rows: usize,
    pub rows_per_century: BTreeMap<u8, usize>,
    pub entry_at_risk: usize,
    pub exit_at_risk: usize,
    pub entry_mean: Option<f64>,
    pub exit_mean: Option<f64>,
    pub rows_missing_population: usize,
    /// Centuries with births data whose preceding century has none.
    pub centuries_without_predecessor: Vec<u8>,
    pub expectation: String,
    pub proximity: String,
    pub density_exclude_self: bool,
    pub spatial: bool,
    pub expectation_failures: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub frame: Frame,
    pub columns: Vec<ColumnInfo>,
    pub report: PanelReport,
}

impl Panel {
    pub fn kind(&self, name: &str) -> Option<ColumnKind> {
        self.columns.iter().find(|c| c.name == name).map(|c| c.kind)
    }

    pub fn nrows(&self) -> usize {
        self.frame.nrows()
    }

    pub fn take(&self, rows: &[usize]) -> Panel {
        let frame = self.frame.take(rows);
        let mut report = self.report.clone();
        summarize(&frame, &mut report);
        Panel {
            frame,
            columns: self.columns.clone(),
            report,
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), FrameError> {
        self.frame.to_csv_path(path)
    }

    /// Reads a panel written by [`Panel::write_csv`] as a plain frame.
    pub fn read_frame(path: &Path) -> Result<Frame, FrameError> {
        Frame::read_csv(path, &TEXT_COLUMNS)
    }
}

/// Six aggregated occupation groups.
pub fn six_group(category: &str, broad_category: &str) -> String {
    let b = broad_category.to_ascii_lowercase();
    let c = category.to_ascii_lowercase();
    let group = match b.as_str() {
        "arts" => "Arts",
        "humanities" => "Humanities",
        "science & technology" | "science and technology" => {
            if c == "engineering" || c == "invention" {
                "Business & Technology"
            } else {
                "Sciences"
            }
        }
        "business & law" | "business and law" => "Business & Technology",
        "sports" => "Sports",
        "institutions" | "public figure" | "exploration" => "Public Figures & Institutions",
        _ => return broad_category.to_owned(),
    };
    group.to_owned()
}

struct Columns {
    pos: HashMap<&'static str, usize>,
    values: Vec<Vec<f64>>,
}

impl Columns {
    fn new() -> Self {
        Columns {
            pos: SCHEMA.iter().enumerate().map(|(i, (n, _))| (*n, i)).collect(),
            values: vec![Vec::new(); SCHEMA.len()],
        }
    }

    fn put(&mut self, name: &str, v: f64) {
        self.values[self.pos[name]].push(v);
    }
}

fn cell(m: Option<&RoleMeasures>, i: usize, k: usize) -> Option<(usize, usize)> {
    let m = m?;
    Some((m.index.position_of_region(i)?, m.index.position_of_occupation(k)?))
}

fn summarize(frame: &Frame, report: &mut PanelReport) {
    let mean_defined = |name: &str| -> (usize, Option<f64>) {
        let v: Vec<f64> = frame
            .num(name)
            .map(|c| c.iter().copied().filter(|x| !x.is_nan()).collect())
            .unwrap_or_default();
        let m = (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        (v.len(), m)
    };
    (report.entry_at_risk, report.entry_mean) = mean_defined("Entry");
    (report.exit_at_risk, report.exit_mean) = mean_defined("Exit");
    report.rows = frame.nrows();
    report.rows_per_century.clear();
    if let Some(c) = frame.num("century") {
        for &t in c {
            *report.rows_per_century.entry(t as u8).or_default() += 1;
        }
    }
    report.rows_missing_population = frame
        .num("pop")
        .map_or(0, |p| p.iter().filter(|x| x.is_nan()).count());
}

/// Panel from precomputed measures.
pub fn panel_from_measures(corpus: &Corpus, measures: &Measures) -> Result<Panel, PipelineError> {
    let n = &measures.tensor;
    let mut cols = Columns::new();
    let mut region = Vec::new();
    let mut occupation = Vec::new();
    let mut category = Vec::new();
    let mut broad = Vec::new();
    let mut group = Vec::new();
    let mut orphans = Vec::new();
    let mut transitions = 0usize;

    for (&t, cur_c) in &measures.centuries {
        let Some(cur) = cur_c.roles.get(&Role::Births) else {
            continue;
        };
        let prev_c = t.previous().and_then(|p| measures.centuries.get(&p));
        let Some(prev) = prev_c.and_then(|c| c.roles.get(&Role::Births)) else {
            orphans.push(t.get());
            continue;
        };
        let prev_c = prev_c.expect("checked above");
        let p = prev_c.century;
        transitions += 1;
        let immi = prev_c.roles.get(&Role::Immigrants);
        let emi = prev_c.roles.get(&Role::Emigrants);
        let immi_region = n.region_totals(p, Role::Immigrants);
        let immi_occ = n.occupation_totals(p, Role::Immigrants);
        let emi_region = n.region_totals(p, Role::Emigrants);
        let emi_occ = n.occupation_totals(p, Role::Emigrants);
        let births_region = n.region_totals(t, Role::Births);
        let births_occ = n.occupation_totals(t, Role::Births);

        let mut cells = Vec::new();
        for (a0, &i) in prev.index.regions.iter().enumerate() {
            let Some(a1) = cur.index.position_of_region(i) else {
                continue;
            };
            for (b0, &k) in prev.index.occupations.iter().enumerate() {
                if let Some(b1) = cur.index.position_of_occupation(k) {
                    cells.push((i, k, a0, b0, a1, b1));
                }
            }
        }
        let m_prev: Vec<u8> = cells.iter().map(|c| prev.set.m.get(c.2, c.3)).collect();
        let m_cur: Vec<u8> = cells.iter().map(|c| cur.set.m.get(c.4, c.5)).collect();
        let n_prev: Vec<f64> = cells.iter().map(|c| f64::from(n.get(c.0, c.1, p, Role::Births))).collect();
        let n_cur: Vec<f64> = cells.iter().map(|c| f64::from(n.get(c.0, c.1, t, Role::Births))).collect();
        let labels = label_entries_exits(&m_prev, &m_cur);
        let labels2 = label_first_last(&n_prev, &n_cur);

        for (r, &(i, k, a0, b0, _, _)) in cells.iter().enumerate() {
            let code = &n.regions()[i];
            let occ = &n.occupations()[k];
            let class = corpus.class_of(occ);
            let cat = class.map_or(String::new(), |c| c.category.clone());
            let br = class.map_or(String::new(), |c| c.broad_category.clone());
            group.push(six_group(&cat, &br));
            category.push(cat);
            broad.push(br);
            region.push(code.clone());
            occupation.push(occ.clone());

            cols.put("century", f64::from(t.get()));
            cols.put("Entry", labels.entry[r]);
            cols.put("Exit", labels.exit[r]);
            cols.put("Entry2", labels2.entry[r]);
            cols.put("Exit2", labels2.exit[r]);
            cols.put("M_births", f64::from(m_prev[r]));
            cols.put("R_births", prev.set.r[(a0, b0)]);
            cols.put("omega_births", prev.densities.omega[(a0, b0)]);
            cols.put("ubiquity", prev.set.m.ubiquity()[b0] as f64);
            cols.put("diversity", prev.set.m.diversity()[a0] as f64);
            match cell(immi, i, k) {
                Some(c) => {
                    let m = immi.expect("cell found");
                    cols.put("M_immi", f64::from(m.set.m.get(c.0, c.1)));
                    cols.put("omega_immi", m.densities.omega[c]);
                }
                None => {
                    cols.put("M_immi", f64::NAN);
                    cols.put("omega_immi", f64::NAN);
                }
            }
            match cell(emi, i, k) {
                Some(c) => {
                    let m = emi.expect("cell found");
                    cols.put("M_emi", f64::from(m.set.m.get(c.0, c.1)));
                    cols.put("omega_emi", m.densities.omega[c]);
                }
                None => {
                    cols.put("M_emi", f64::NAN);
                    cols.put("omega_emi", f64::NAN);
                }
            }
            match &prev_c.spatial {
                Some(s) => {
                    cols.put("rho_M", s.rho_m[(a0, b0)]);
                    cols.put("rho_omega", s.rho_omega[(a0, b0)]);
                }
                None => {
                    cols.put("rho_M", f64::NAN);
                    cols.put("rho_omega", f64::NAN);
                }
            }
            cols.put("N_births", n_prev[r]);
            cols.put("N_immi", f64::from(n.get(i, k, p, Role::Immigrants)));
            cols.put("N_immi_region", immi_region[i] as f64);
            cols.put("N_immi_occupation", immi_occ[k] as f64);
            cols.put("N_emi", f64::from(n.get(i, k, p, Role::Emigrants)));
            cols.put("N_emi_region", emi_region[i] as f64);
            cols.put("N_emi_occupation", emi_occ[k] as f64);
            let pop = corpus.population.get(code, t).unwrap_or(f64::NAN);
            cols.put("pop", pop);
            cols.put("log_pop", if pop > 0.0 { pop.ln() } else { f64::NAN });
            cols.put("N_births_region", births_region[i] as f64);
            cols.put("N_births_occupation", births_occ[k] as f64);
        }
    }

    if transitions == 0 {
        let century = orphans.last().copied().unwrap_or(FIRST_CENTURY);
        return Err(PipelineError::MissingAdjacentCentury { century });
    }

    let mut frame = Frame::new();
    frame.push_text("region", region)?;
    frame.push_text("occupation", occupation)?;
    frame.push_text("category", category)?;
    frame.push_text("broad_category", broad)?;
    frame.push_text("group", group)?;
    let mut columns: Vec<ColumnInfo> = TEXT_COLUMNS
        .iter()
        .map(|n| ColumnInfo {
            name: (*n).into(),
            kind: ColumnKind::Key,
        })
        .collect();
    for ((name, kind), values) in SCHEMA.iter().zip(cols.values) {
        frame.push_num(name, values)?;
        columns.push(ColumnInfo {
            name: (*name).into(),
            kind: *kind,
        });
    }

    let o = measures.options;
    let mut report = PanelReport {
        centuries_without_predecessor: orphans,
        expectation: o.expectation.to_string(),
        proximity: o.proximity.to_string(),
        density_exclude_self: o.density.exclude_self,
        spatial: o.spatial,
        expectation_failures: measures
            .expectation_failures
            .iter()
            .map(|(r, e)| format!("{r}: {e}"))
            .collect(),
        ..Default::default()
    };
    summarize(&frame, &mut report);
    Ok(Panel {
        frame,
        columns,
        report,
    })
}

/// Builds the regression panel: cells surviving the births filter at both
/// `t - 1` and `t`, with lagged regressors and transition outcomes.
pub fn assemble_panel(corpus: &Corpus, options: PanelOptions) -> Result<Panel, PipelineError> {
    let measures = compute_measures(corpus, options)?;
    panel_from_measures(corpus, &measures)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::testkit;
    use std::collections::BTreeSet;

    type Slice = BTreeMap<(&'static str, &'static str), f64>;

    const CELLS: [(&str, &str, u8, u32); 21] = [
        ("A", "x", 18, 8),
        ("A", "y", 18, 2),
        ("A", "z", 18, 3),
        ("A", "w", 18, 6),
        ("B", "x", 18, 2),
        ("B", "y", 18, 7),
        ("B", "z", 18, 4),
        ("C", "x", 18, 3),
        ("C", "y", 18, 3),
        ("C", "z", 18, 6),
        ("A", "x", 19, 3),
        ("A", "y", 19, 8),
        ("A", "z", 19, 2),
        ("B", "x", 19, 6),
        ("B", "y", 19, 2),
        ("B", "z", 19, 5),
        ("C", "x", 19, 4),
        ("C", "y", 19, 4),
        ("C", "z", 19, 4),
        ("D", "x", 19, 1),
        ("D", "w", 19, 1),
    ];

    fn slice(t: u8) -> Slice {
        let mut s = Slice::new();
        for &(r, o, c, n) in &CELLS {
            if c == t {
                *s.entry((r, o)).or_default() += f64::from(n);
            }
        }
        s
    }

    /// Surviving regions and occupations, then revealed advantage on the
    /// retained submatrix.
    fn hand_rca(s: &Slice, cutoff: f64) -> BTreeMap<(&'static str, &'static str), f64> {
        let mut rt: BTreeMap<&str, f64> = BTreeMap::new();
        let mut ot: BTreeMap<&str, f64> = BTreeMap::new();
        for (&(r, o), &n) in s {
            *rt.entry(r).or_default() += n;
            *ot.entry(o).or_default() += n;
        }
        let keep_r: BTreeSet<&str> = rt.iter().filter(|(_, &v)| v > cutoff).map(|(k, _)| *k).collect();
        let keep_o: BTreeSet<&str> = ot.iter().filter(|(_, &v)| v > cutoff).map(|(k, _)| *k).collect();
        let get = |r: &str, o: &str| s.iter().find(|((a, b), _)| *a == r && *b == o).map_or(0.0, |(_, v)| *v);
        let total: f64 = keep_r.iter().flat_map(|r| keep_o.iter().map(move |o| (*r, *o))).map(|(r, o)| get(r, o)).sum();
        let mut out = BTreeMap::new();
        for &r in &keep_r {
            let nr: f64 = keep_o.iter().map(|o| get(r, o)).sum();
            for &o in &keep_o {
                let no: f64 = keep_r.iter().map(|rr| get(rr, o)).sum();
                out.insert((r, o), (get(r, o) / nr) / (no / total));
            }
        }
        out
    }

    fn toy() -> Corpus {
        testkit::corpus(&CELLS, &[("A", 19, 1000.0), ("B", 19, 5000.0)])
    }

    #[test]
    fn toy_panel_matches_hand_computed_transitions() {
        let panel = assemble_panel(&toy(), PanelOptions::default()).unwrap();
        let prev = hand_rca(&slice(18), 5.0);
        let cur = hand_rca(&slice(19), 5.0);
        let f = &panel.frame;
        let (region, occ) = (f.text("region").unwrap(), f.text("occupation").unwrap());
        let expected: BTreeSet<(&str, &str)> = prev.keys().filter(|k| cur.contains_key(*k)).copied().collect();
        let got: BTreeSet<(&str, &str)> = (0..f.nrows()).map(|r| (region[r].as_str(), occ[r].as_str())).collect();
        assert_eq!(got, expected);
        assert_eq!(expected.len(), 9);

        let col = |n: &str| f.num(n).unwrap();
        let n18 = slice(18);
        for r in 0..f.nrows() {
            let key = (region[r].as_str(), occ[r].as_str());
            let (rp, rc) = (prev[&key], cur[&key]);
            let (mp, mc) = (f64::from(u8::from(rp >= 1.0)), f64::from(u8::from(rc >= 1.0)));
            assert_eq!(col("century")[r], 19.0);
            assert!((col("R_births")[r] - rp).abs() < 1e-12, "{key:?}");
            assert_eq!(col("M_births")[r], mp);
            assert_eq!(col("N_births")[r], n18.get(&key).copied().unwrap_or(0.0));
            let (entry, exit) = (col("Entry")[r], col("Exit")[r]);
            if mp == 0.0 {
                assert_eq!(entry, mc, "{key:?}");
                assert!(exit.is_nan());
            } else {
                assert_eq!(exit, 1.0 - mc, "{key:?}");
                assert!(entry.is_nan());
            }
            assert!(col("M_immi")[r].is_nan(), "no migrants, no immigrant matrix");
        }
        let pop = col("pop");
        let at = |reg: &str| (0..f.nrows()).find(|&r| region[r] == reg).unwrap();
        assert_eq!(pop[at("A")], 1000.0);
        assert!((col("log_pop")[at("B")] - 5000f64.ln()).abs() < 1e-12);
        assert!(pop[at("C")].is_nan());
        assert_eq!(panel.report.rows_missing_population, 3);
        assert_eq!(panel.report.entry_at_risk + panel.report.exit_at_risk, 9);
    }

    #[test]
    fn century_after_a_gap_contributes_no_rows() {
        let mut cells = Vec::new();
        for t in [16u8, 17, 19] {
            for (r, o) in [("A", "x"), ("A", "y"), ("B", "x"), ("B", "y")] {
                cells.push((r, o, t, if (r == "A") == (o == "x") { 9 } else { 4 }));
            }
        }
        let panel = assemble_panel(&testkit::corpus(&cells, &[]), PanelOptions::default()).unwrap();
        assert_eq!(panel.report.rows_per_century.keys().copied().collect::<Vec<_>>(), vec![17]);
        assert_eq!(panel.report.centuries_without_predecessor, vec![16, 19]);
        assert_eq!(panel.nrows(), 4);
    }

    #[test]
    fn single_century_cannot_be_labelled() {
        let cells = [("A", "x", 18, 9), ("A", "y", 18, 4), ("B", "x", 18, 4), ("B", "y", 18, 9)];
        let err = assemble_panel(&testkit::corpus(&cells, &[]), PanelOptions::default()).unwrap_err();
        assert!(matches!(err, PipelineError::MissingAdjacentCentury { century: 18 }), "{err}");
    }

    #[test]
    fn column_kinds_cover_every_numeric_column() {
        let panel = assemble_panel(&toy(), PanelOptions::default()).unwrap();
        for name in panel.frame.names() {
            assert!(panel.kind(name).is_some(), "{name}");
        }
        assert_eq!(panel.kind("Entry"), Some(ColumnKind::Outcome));
        assert_eq!(panel.kind("N_births_region"), Some(ColumnKind::OutcomeMargin));
    }

    #[test]
    fn six_groups() {
        assert_eq!(six_group("Engineering", "Science & Technology"), "Business & Technology");
        assert_eq!(six_group("Physics", "Science & Technology"), "Sciences");
        assert_eq!(six_group("Law", "Business & Law"), "Business & Technology");
        assert_eq!(six_group("Explorers", "Exploration"), "Public Figures & Institutions");
        assert_eq!(six_group("Music", "Arts"), "Arts");
        assert_eq!(six_group("Other", "Mystery"), "Mystery");
    }
}
