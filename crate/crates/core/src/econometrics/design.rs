use ndarray::Array2;
use std::collections::{BTreeMap, BTreeSet};

use super::spec::{factor_operand, Family, RegressionSpec, Transform};
use super::EconometricsError;
use crate::frame::{Column, Frame};

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Covariate { col: String, transform: Transform },
    Level { col: String, level: String },
}

/// A product of operands; the intercept has none.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub name: String,
    pub operands: Vec<Operand>,
}

pub const INTERCEPT: &str = "(Intercept)";

impl Term {
    pub fn intercept() -> Self {
        Term {
            name: INTERCEPT.into(),
            operands: vec![],
        }
    }

    pub fn is_intercept(&self) -> bool {
        self.operands.is_empty()
    }

    /// Whether any covariate operand reads `col`.
    pub fn uses(&self, col: &str) -> bool {
        self.operands
            .iter()
            .any(|o| matches!(o, Operand::Covariate { col: c, .. } if c == col))
    }

    /// Value at `row`, with `col` optionally replaced by a raw value; NaN when missing.
    pub fn evaluate(&self, frame: &Frame, row: usize, replace: Option<(&str, f64)>) -> f64 {
        let mut v = 1.0;
        for o in &self.operands {
            v *= match o {
                Operand::Covariate { col, transform } => {
                    let raw = match replace {
                        Some((c, x)) if c == col => x,
                        _ => frame.num(col).map_or(f64::NAN, |c| c[row]),
                    };
                    transform.apply(raw)
                }
                Operand::Level { col, level } => match frame.column(col).and_then(|c| c.level(row)) {
                    Some(l) => f64::from(u8::from(&l == level)),
                    None => f64::NAN,
                },
            };
        }
        v
    }
}

/// An interacted fixed-effect factor restricted to the estimation rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FeFactor {
    pub name: String,
    pub columns: Vec<String>,
    /// Sorted; the first is the reference level.
    pub levels: Vec<String>,
    pub codes: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterDim {
    pub name: String,
    pub ids: Vec<u32>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub spec: RegressionSpec,
    pub terms: Vec<Term>,
    pub x: Array2<f64>,
    pub y: Vec<f64>,
    pub fe: Vec<FeFactor>,
    pub clusters: Vec<ClusterDim>,
    /// Positions of the estimation rows in the input frame.
    pub rows: Vec<usize>,
    pub n_input: usize,
    pub n_dropped_missing: usize,
    pub n_dropped_separation: usize,
}

impl Design {
    pub fn n(&self) -> usize {
        self.y.len()
    }
}

fn fe_name(cols: &[String]) -> String {
    cols.join(":")
}

fn level_key(frame: &Frame, cols: &[String], row: usize) -> Option<String> {
    let parts: Option<Vec<String>> = cols
        .iter()
        .map(|c| frame.column(c).and_then(|col| col.level(row)))
        .collect();
    parts.map(|p| p.join("|"))
}

fn require<'a>(frame: &'a Frame, col: &str) -> Result<&'a Column, EconometricsError> {
    frame
        .column(col)
        .ok_or_else(|| EconometricsError::UnknownColumn(col.into()))
}

fn require_num<'a>(frame: &'a Frame, col: &str) -> Result<&'a [f64], EconometricsError> {
    require(frame, col)?;
    frame
        .num(col)
        .ok_or_else(|| EconometricsError::NonNumeric(col.into()))
}

/// Response validity per family.
fn check_response(family: Family, y: f64) -> bool {
    match family {
        Family::Logistic => y == 0.0 || y == 1.0,
        Family::Negbin => y >= 0.0 && y.fract() == 0.0,
        Family::Gaussian => y.is_finite(),
    }
}

/// Expands the spec into a design on the complete-case rows; under the
/// logistic family, rows in fixed-effect cells with a constant outcome are
/// dropped until no such cell remains.
pub fn build_design(frame: &Frame, spec: &RegressionSpec) -> Result<Design, EconometricsError> {
    if spec.covariates.iter().any(|c| c.col == spec.response) {
        return Err(EconometricsError::InvalidSpec(format!(
            "response {:?} is also a covariate",
            spec.response
        )));
    }
    let y_col = require_num(frame, &spec.response)?;
    for c in &spec.covariates {
        require_num(frame, &c.col)?;
    }
    for cols in spec.fixed_effects.iter() {
        if cols.is_empty() {
            return Err(EconometricsError::InvalidSpec("empty fixed-effect tuple".into()));
        }
        for c in cols {
            require(frame, c)?;
        }
    }
    for c in &spec.clusters {
        require(frame, c)?;
    }

    // operand lists of the interactions, factor operands still unexpanded
    enum Raw<'s> {
        Cov(&'s str, Transform),
        Factor(&'s str),
    }
    let mut raw_interactions: Vec<Vec<Raw>> = Vec::new();
    for inter in &spec.interactions {
        if inter.len() < 2 {
            return Err(EconometricsError::InvalidSpec(format!(
                "interaction {inter:?} needs at least two operands"
            )));
        }
        let mut ops = Vec::new();
        for name in inter {
            if let Some(f) = factor_operand(name) {
                require(frame, f)?;
                ops.push(Raw::Factor(f));
            } else {
                require_num(frame, name)?;
                let t = spec
                    .covariates
                    .iter()
                    .find(|c| &c.col == name)
                    .map_or(Transform::Identity, |c| c.transform);
                ops.push(Raw::Cov(name, t));
            }
        }
        raw_interactions.push(ops);
    }

    let n_input = frame.nrows();
    let complete = |r: usize| -> bool {
        if y_col[r].is_nan() {
            return false;
        }
        let cov_ok = spec
            .covariates
            .iter()
            .all(|c| !c.transform.apply(frame.num(&c.col).unwrap()[r]).is_nan());
        let inter_ok = raw_interactions.iter().flatten().all(|o| match o {
            Raw::Cov(c, t) => !t.apply(frame.num(c).unwrap()[r]).is_nan(),
            Raw::Factor(f) => !frame.column(f).unwrap().is_missing(r),
        });
        let fe_ok = spec
            .fixed_effects
            .iter()
            .flatten()
            .chain(spec.clusters.iter())
            .all(|c| !frame.column(c).unwrap().is_missing(r));
        cov_ok && inter_ok && fe_ok
    };
    let mut rows: Vec<usize> = (0..n_input).filter(|&r| complete(r)).collect();
    let n_dropped_missing = n_input - rows.len();

    for &r in &rows {
        if !check_response(spec.family, y_col[r]) {
            return Err(EconometricsError::InvalidResponse(format!(
                "{} = {} at row {r} is not valid for the {} family",
                spec.response, y_col[r], spec.family
            )));
        }
    }

    let before_sep = rows.len();
    if spec.family == Family::Logistic && !spec.fixed_effects.is_empty() {
        rows = drop_separated(frame, &spec.fixed_effects, y_col, rows);
    }
    let n_dropped_separation = before_sep - rows.len();
    if rows.len() < 2 {
        return Err(EconometricsError::TooFewRows(rows.len()));
    }

    let mut terms = vec![Term::intercept()];
    for c in &spec.covariates {
        terms.push(Term {
            name: c.transform.label(&c.col),
            operands: vec![Operand::Covariate {
                col: c.col.clone(),
                transform: c.transform,
            }],
        });
    }
    for ops in &raw_interactions {
        // cartesian product over the levels of factor operands
        let mut expanded: Vec<Vec<Operand>> = vec![vec![]];
        for o in ops {
            let choices: Vec<Operand> = match o {
                Raw::Cov(c, t) => vec![Operand::Covariate {
                    col: c.to_string(),
                    transform: *t,
                }],
                Raw::Factor(f) => {
                    let col = frame.column(f).unwrap();
                    let levels: BTreeSet<String> =
                        rows.iter().filter_map(|&r| col.level(r)).collect();
                    levels
                        .into_iter()
                        .map(|level| Operand::Level {
                            col: f.to_string(),
                            level,
                        })
                        .collect()
                }
            };
            expanded = expanded
                .into_iter()
                .flat_map(|prefix| {
                    choices.iter().map(move |c| {
                        let mut p = prefix.clone();
                        p.push(c.clone());
                        p
                    })
                })
                .collect();
        }
        for operands in expanded {
            let name = operands
                .iter()
                .map(|o| match o {
                    Operand::Covariate { col, transform } => transform.label(col),
                    Operand::Level { col, level } => format!("{col}={level}"),
                })
                .collect::<Vec<_>>()
                .join(":");
            terms.push(Term { name, operands });
        }
    }

    let n = rows.len();
    let mut x = Array2::zeros((n, terms.len()));
    for (a, &r) in rows.iter().enumerate() {
        for (j, t) in terms.iter().enumerate() {
            x[(a, j)] = t.evaluate(frame, r, None);
        }
    }
    let y: Vec<f64> = rows.iter().map(|&r| y_col[r]).collect();

    let fe = spec
        .fixed_effects
        .iter()
        .map(|cols| {
            let keys: Vec<String> = rows
                .iter()
                .map(|&r| level_key(frame, cols, r).expect("complete case"))
                .collect();
            let (levels, codes) = encode(&keys);
            FeFactor {
                name: fe_name(cols),
                columns: cols.clone(),
                levels,
                codes,
            }
        })
        .collect();

    let clusters = spec
        .clusters
        .iter()
        .map(|c| {
            let col = frame.column(c).unwrap();
            let keys: Vec<String> = rows.iter().map(|&r| col.level(r).unwrap()).collect();
            let (levels, ids) = encode(&keys);
            ClusterDim {
                name: c.clone(),
                ids,
                count: levels.len(),
            }
        })
        .collect();

    Ok(Design {
        spec: spec.clone(),
        terms,
        x,
        y,
        fe,
        clusters,
        rows,
        n_input,
        n_dropped_missing,
        n_dropped_separation,
    })
}

/// Sorted distinct keys and each row's position among them.
fn encode(keys: &[String]) -> (Vec<String>, Vec<u32>) {
    let levels: Vec<String> = keys.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let index: BTreeMap<&str, u32> = levels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i as u32))
        .collect();
    let codes = keys.iter().map(|k| index[k.as_str()]).collect();
    (levels, codes)
}

/// Iterated removal of rows in constant-outcome cells of any factor.
pub(crate) fn drop_separated(
    frame: &Frame,
    factors: &[Vec<String>],
    y: &[f64],
    mut rows: Vec<usize>,
) -> Vec<usize> {
    let keys: Vec<Vec<String>> = factors
        .iter()
        .map(|cols| {
            (0..frame.nrows())
                .map(|r| level_key(frame, cols, r).unwrap_or_default())
                .collect()
        })
        .collect();
    loop {
        let before = rows.len();
        for fk in &keys {
            // (sum, count) per cell
            let mut cells: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
            for &r in &rows {
                let e = cells.entry(fk[r].as_str()).or_default();
                e.0 += y[r];
                e.1 += 1;
            }
            rows.retain(|&r| {
                let (s, c) = cells[fk[r].as_str()];
                s > 0.0 && s < c as f64
            });
        }
        if rows.len() == before {
            return rows;
        }
    }
}
