use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Logistic,
    Negbin,
    Gaussian,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Logistic => "logistic",
            Family::Negbin => "negbin",
            Family::Gaussian => "gaussian",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    #[default]
    Identity,
    Asinh,
    /// Natural log; non-positive inputs become missing.
    Log,
}

impl Transform {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Asinh => x.asinh(),
            Transform::Log if x > 0.0 => x.ln(),
            Transform::Log => f64::NAN,
        }
    }

    pub fn label(self, col: &str) -> String {
        match self {
            Transform::Identity => col.to_owned(),
            Transform::Asinh => format!("asinh({col})"),
            Transform::Log => format!("log({col})"),
        }
    }
}

impl FromStr for Transform {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(Transform::Identity),
            "asinh" => Ok(Transform::Asinh),
            "log" => Ok(Transform::Log),
            other => Err(format!("unknown transform {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CovariateSpec {
    pub col: String,
    #[serde(default)]
    pub transform: Transform,
}

impl CovariateSpec {
    pub fn identity(col: &str) -> Self {
        CovariateSpec {
            col: col.into(),
            transform: Transform::Identity,
        }
    }

    pub fn asinh(col: &str) -> Self {
        CovariateSpec {
            col: col.into(),
            transform: Transform::Asinh,
        }
    }

    pub fn log(col: &str) -> Self {
        CovariateSpec {
            col: col.into(),
            transform: Transform::Log,
        }
    }
}

/// Declarative model description.
///
/// Interaction operands name either a covariate column (using that
/// covariate's transform when it is also listed in `covariates`) or
/// `C(column)`, which expands into one indicator per level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegressionSpec {
    pub family: Family,
    pub response: String,
    #[serde(default)]
    pub covariates: Vec<CovariateSpec>,
    #[serde(default)]
    pub interactions: Vec<Vec<String>>,
    #[serde(default)]
    pub fixed_effects: Vec<Vec<String>>,
    #[serde(default)]
    pub clusters: Vec<String>,
}

impl RegressionSpec {
    pub fn new(family: Family, response: &str) -> Self {
        RegressionSpec {
            family,
            response: response.into(),
            covariates: vec![],
            interactions: vec![],
            fixed_effects: vec![],
            clusters: vec![],
        }
    }

    pub fn covariate(mut self, c: CovariateSpec) -> Self {
        self.covariates.push(c);
        self
    }

    pub fn covariates<'a>(mut self, cols: impl IntoIterator<Item = &'a str>) -> Self {
        self.covariates
            .extend(cols.into_iter().map(CovariateSpec::identity));
        self
    }

    pub fn interaction(mut self, a: &str, b: &str) -> Self {
        self.interactions.push(vec![a.into(), b.into()]);
        self
    }

    pub fn fixed_effect(mut self, factors: &[&str]) -> Self {
        self.fixed_effects
            .push(factors.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn clusters(mut self, cols: &[&str]) -> Self {
        self.clusters = cols.iter().map(|s| s.to_string()).collect();
        self
    }
}

/// `C(name)` -> `Some(name)`.
pub(crate) fn factor_operand(s: &str) -> Option<&str> {
    s.strip_prefix("C(").and_then(|r| r.strip_suffix(')'))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let j = r#"{"family":"logistic","response":"Entry",
            "covariates":[{"col":"M_immi","transform":"identity"},{"col":"N_immi","transform":"asinh"}],
            "interactions":[["omega_immi","omega_births"]],
            "fixed_effects":[["broad_category","region","century"],["category","century"]],
            "clusters":["region","century"]}"#;
        let s: RegressionSpec = serde_json::from_str(j).unwrap();
        assert_eq!(s.covariates[1].transform, Transform::Asinh);
        assert_eq!(s.fixed_effects[0].len(), 3);
        let back: RegressionSpec = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn transforms() {
        assert_eq!(Transform::Asinh.apply(0.0), 0.0);
        assert!(Transform::Log.apply(0.0).is_nan());
        assert_eq!(factor_operand("C(century)"), Some("century"));
        assert_eq!(factor_operand("century"), None);
    }
}
