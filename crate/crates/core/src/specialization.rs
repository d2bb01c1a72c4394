//! Expected counts, ratio matrices and binary specialization.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SpecializationError {
    #[error("count matrix has zero total")]
    DegenerateMatrix,
    #[error("expected count is zero at ({row}, {col}) while the observed count is {observed}")]
    InconsistentExpectation { row: usize, col: usize, observed: f64 },
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch(Vec<usize>, Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ExpectationModel {
    #[default]
    Naive,
    /// Fitted values of a negative-binomial count model.
    NegBin,
}

impl FromStr for ExpectationModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "naive" => Ok(ExpectationModel::Naive),
            "negbin" => Ok(ExpectationModel::NegBin),
            other => Err(format!("unknown expectation model {other:?}")),
        }
    }
}

impl fmt::Display for ExpectationModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExpectationModel::Naive => "naive",
            ExpectationModel::NegBin => "negbin",
        })
    }
}

/// Bins-and-balls expectation `r_i * c_k / T`.
pub fn expected_naive(n: &Array2<f64>) -> Result<Array2<f64>, SpecializationError> {
    let total = n.sum();
    if total <= 0.0 {
        return Err(SpecializationError::DegenerateMatrix);
    }
    let rows = n.sum_axis(ndarray::Axis(1));
    let cols = n.sum_axis(ndarray::Axis(0));
    // integer margins make the product exact, so only the division rounds
    Ok(Array2::from_shape_fn(n.dim(), |(i, k)| rows[i] * cols[k] / total))
}

pub fn rca_ratio(n: &Array2<f64>, nhat: &Array2<f64>) -> Result<Array2<f64>, SpecializationError> {
    if n.dim() != nhat.dim() {
        return Err(SpecializationError::ShapeMismatch(
            n.shape().to_vec(),
            nhat.shape().to_vec(),
        ));
    }
    let mut r = Array2::zeros(n.dim());
    for ((i, k), &obs) in n.indexed_iter() {
        let exp = nhat[(i, k)];
        r[(i, k)] = if exp > 0.0 {
            obs / exp
        } else if obs == 0.0 {
            0.0
        } else {
            return Err(SpecializationError::InconsistentExpectation {
                row: i,
                col: k,
                observed: obs,
            });
        };
    }
    Ok(r)
}

/// Combined births and deaths ratio over a common index.
pub fn joint_ratio(
    births: &Array2<f64>,
    deaths: &Array2<f64>,
) -> Result<Array2<f64>, SpecializationError> {
    if births.dim() != deaths.dim() {
        return Err(SpecializationError::ShapeMismatch(
            births.shape().to_vec(),
            deaths.shape().to_vec(),
        ));
    }
    let expected = |m: &Array2<f64>| match expected_naive(m) {
        Err(SpecializationError::DegenerateMatrix) => Ok(Array2::zeros(m.dim())),
        other => other,
    };
    let nhat = expected(births)? + expected(deaths)?;
    let n = births + deaths;
    if n.sum() <= 0.0 {
        return Err(SpecializationError::DegenerateMatrix);
    }
    rca_ratio(&n, &nhat)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecializationMatrix {
    m: Array2<u8>,
    diversity: Vec<usize>,
    ubiquity: Vec<usize>,
}

impl SpecializationMatrix {
    pub fn from_binary(m: Array2<u8>) -> Self {
        let diversity = m.rows().into_iter().map(|r| r.iter().filter(|&&v| v == 1).count()).collect();
        let ubiquity = m
            .columns()
            .into_iter()
            .map(|c| c.iter().filter(|&&v| v == 1).count())
            .collect();
        SpecializationMatrix {
            m,
            diversity,
            ubiquity,
        }
    }

    pub fn values(&self) -> &Array2<u8> {
        &self.m
    }

    pub fn get(&self, i: usize, k: usize) -> u8 {
        self.m[(i, k)]
    }

    pub fn diversity(&self) -> &[usize] {
        &self.diversity
    }

    pub fn ubiquity(&self) -> &[usize] {
        &self.ubiquity
    }

    pub fn dim(&self) -> (usize, usize) {
        self.m.dim()
    }
}

/// `M = 1` iff `R >= 1`.
pub fn binarize(r: &Array2<f64>) -> SpecializationMatrix {
    SpecializationMatrix::from_binary(r.mapv(|v| u8::from(v >= 1.0)))
}

/// Region and activity orders for display: descending diversity and ubiquity,
/// ties broken by code.
pub fn nested_sort<S: AsRef<str>>(
    m: &SpecializationMatrix,
    region_codes: &[S],
    activity_codes: &[S],
) -> (Vec<usize>, Vec<usize>) {
    let order = |margin: &[usize], codes: &[S]| {
        let mut idx: Vec<usize> = (0..margin.len()).collect();
        idx.sort_by(|&a, &b| match margin[b].cmp(&margin[a]) {
            Ordering::Equal => codes[a].as_ref().cmp(codes[b].as_ref()),
            o => o,
        });
        idx
    };
    (
        order(m.diversity(), region_codes),
        order(m.ubiquity(), activity_codes),
    )
}

/// Observed counts, expectations, ratios and binary matrix of one slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecializationSet {
    pub n: Array2<f64>,
    pub nhat: Array2<f64>,
    pub r: Array2<f64>,
    pub m: SpecializationMatrix,
}

impl SpecializationSet {
    pub fn naive(n: Array2<f64>) -> Result<Self, SpecializationError> {
        let nhat = expected_naive(&n)?;
        Self::with_expectation(n, nhat)
    }

    pub fn with_expectation(n: Array2<f64>, nhat: Array2<f64>) -> Result<Self, SpecializationError> {
        let r = rca_ratio(&n, &nhat)?;
        let m = binarize(&r);
        Ok(SpecializationSet { n, nhat, r, m })
    }

    /// Joint births and deaths set; `n` and `nhat` hold the summed counts.
    pub fn joint(births: &Array2<f64>, deaths: &Array2<f64>) -> Result<Self, SpecializationError> {
        let r = joint_ratio(births, deaths)?;
        let expected = |m: &Array2<f64>| expected_naive(m).unwrap_or_else(|_| Array2::zeros(m.dim()));
        let nhat = expected(births) + expected(deaths);
        let m = binarize(&r);
        Ok(SpecializationSet {
            n: births + deaths,
            nhat,
            r,
            m,
        })
    }
}

/// `Σ N̂ R / Σ N̂`, equal to one under naive expectations.
pub fn weighted_mean_ratio(nhat: &Array2<f64>, r: &Array2<f64>) -> f64 {
    let mut num = 0.0;
    Zip::from(nhat).and(r).for_each(|&e, &v| num += e * v);
    num / nhat.sum()
}
