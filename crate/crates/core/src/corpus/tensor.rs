use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::{Century, Corpus, CorpusError, MobilityRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Births,
    Deaths,
    Immigrants,
    Emigrants,
    /// Born and died in the same region.
    Locals,
}

impl Role {
    pub const ALL: [Role; 5] = [
        Role::Births,
        Role::Deaths,
        Role::Immigrants,
        Role::Emigrants,
        Role::Locals,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Births => "births",
            Role::Deaths => "deaths",
            Role::Immigrants => "immi",
            Role::Emigrants => "emi",
            Role::Locals => "locals",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "births" => Ok(Role::Births),
            "deaths" => Ok(Role::Deaths),
            "immi" | "immigrants" => Ok(Role::Immigrants),
            "emi" | "emigrants" => Ok(Role::Emigrants),
            "locals" => Ok(Role::Locals),
            other => Err(format!("unknown role {other:?}")),
        }
    }
}

/// Counts N[i, k, t, role] over every registry region and taxonomy occupation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountTensor {
    regions: Vec<String>,
    occupations: Vec<String>,
    counts: Vec<u32>,
}

impl CountTensor {
    pub fn zeros(regions: Vec<String>, occupations: Vec<String>) -> Self {
        let n = 10 * Role::ALL.len() * regions.len() * occupations.len();
        CountTensor {
            regions,
            occupations,
            counts: vec![0; n],
        }
    }

    fn offset(&self, i: usize, k: usize, t: Century, role: Role) -> usize {
        ((t.offset() * Role::ALL.len() + role.index()) * self.regions.len() + i)
            * self.occupations.len()
            + k
    }

    pub fn regions(&self) -> &[String] {
        &self.regions
    }

    pub fn occupations(&self) -> &[String] {
        &self.occupations
    }

    pub fn region_index(&self, code: &str) -> Option<usize> {
        self.regions.binary_search_by(|r| r.as_str().cmp(code)).ok()
    }

    pub fn occupation_index(&self, code: &str) -> Option<usize> {
        self.occupations
            .binary_search_by(|o| o.as_str().cmp(code))
            .ok()
    }

    pub fn get(&self, i: usize, k: usize, t: Century, role: Role) -> u32 {
        self.counts[self.offset(i, k, t, role)]
    }

    pub fn increment(&mut self, i: usize, k: usize, t: Century, role: Role) {
        let o = self.offset(i, k, t, role);
        self.counts[o] += 1;
    }

    /// Full regions x occupations slice.
    pub fn slice(&self, t: Century, role: Role) -> Array2<u32> {
        let (nr, nk) = (self.regions.len(), self.occupations.len());
        let start = self.offset(0, 0, t, role);
        Array2::from_shape_vec((nr, nk), self.counts[start..start + nr * nk].to_vec())
            .expect("slice shape")
    }

    pub fn total(&self, t: Century, role: Role) -> u64 {
        let (nr, nk) = (self.regions.len(), self.occupations.len());
        let start = self.offset(0, 0, t, role);
        self.counts[start..start + nr * nk]
            .iter()
            .map(|&c| c as u64)
            .sum()
    }

    /// Per-region totals over occupations, unfiltered.
    pub fn region_totals(&self, t: Century, role: Role) -> Vec<u64> {
        let s = self.slice(t, role);
        s.rows()
            .into_iter()
            .map(|r| r.iter().map(|&c| c as u64).sum())
            .collect()
    }

    pub fn occupation_totals(&self, t: Century, role: Role) -> Vec<u64> {
        let s = self.slice(t, role);
        s.columns()
            .into_iter()
            .map(|c| c.iter().map(|&v| v as u64).sum())
            .collect()
    }

    /// Sub-matrix on a filtered index, as floats.
    pub fn submatrix(&self, idx: &FilteredIndex) -> Array2<f64> {
        self.submatrix_for(idx, idx.role)
    }

    /// Counts of `role` on the regions and occupations kept by `idx`.
    pub fn submatrix_for(&self, idx: &FilteredIndex, role: Role) -> Array2<f64> {
        Array2::from_shape_fn((idx.regions.len(), idx.occupations.len()), |(a, b)| {
            self.get(idx.regions[a], idx.occupations[b], idx.century, role) as f64
        })
    }
}

pub fn tabulate_counts(corpus: &Corpus) -> Result<CountTensor, CorpusError> {
    let records = corpus.mobility()?;
    Ok(tabulate_records(
        corpus.regions.codes(),
        corpus.taxonomy.occupations(),
        &records,
    ))
}

pub(crate) fn tabulate_records(
    regions: Vec<String>,
    occupations: Vec<String>,
    records: &[MobilityRecord],
) -> CountTensor {
    let mut n = CountTensor::zeros(regions, occupations);
    for m in records {
        let Some(k) = n.occupation_index(&m.occupation) else {
            continue;
        };
        let t = m.century;
        let birth = m.birth_region.as_deref().and_then(|c| n.region_index(c));
        let death = m.death_region.as_deref().and_then(|c| n.region_index(c));
        if let Some(i) = birth {
            n.increment(i, k, t, Role::Births);
        }
        if let Some(i) = death {
            n.increment(i, k, t, Role::Deaths);
        }
        if m.is_migrant {
            if let (Some(b), Some(d)) = (birth, death) {
                n.increment(b, k, t, Role::Emigrants);
                n.increment(d, k, t, Role::Immigrants);
            }
        } else if let (Some(b), Some(_)) = (birth, death) {
            n.increment(b, k, t, Role::Locals);
        }
    }
    n
}

/// Regions and occupations of one (century, role) slice that survive the
/// sparse-cell filter, as positions into the tensor's sorted axes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilteredIndex {
    pub century: Century,
    pub role: Role,
    pub regions: Vec<usize>,
    pub occupations: Vec<usize>,
}

impl FilteredIndex {
    pub fn region_codes<'a>(&'a self, n: &'a CountTensor) -> Vec<&'a str> {
        self.regions.iter().map(|&i| n.regions()[i].as_str()).collect()
    }

    pub fn occupation_codes<'a>(&'a self, n: &'a CountTensor) -> Vec<&'a str> {
        self.occupations
            .iter()
            .map(|&k| n.occupations()[k].as_str())
            .collect()
    }

    /// Keeps only regions and occupations present in both indices.
    pub fn intersect(&self, other: &FilteredIndex) -> FilteredIndex {
        let keep = |a: &[usize], b: &[usize]| -> Vec<usize> {
            a.iter().copied().filter(|x| b.binary_search(x).is_ok()).collect()
        };
        FilteredIndex {
            century: self.century,
            role: self.role,
            regions: keep(&self.regions, &other.regions),
            occupations: keep(&self.occupations, &other.occupations),
        }
    }

    pub fn position_of_region(&self, i: usize) -> Option<usize> {
        self.regions.binary_search(&i).ok()
    }

    pub fn position_of_occupation(&self, k: usize) -> Option<usize> {
        self.occupations.binary_search(&k).ok()
    }
}

/// Drops regions and occupations whose margin is at or below the century's
/// cutoff. Margins are computed once on the full slice.
pub fn filter_sparse(n: &CountTensor, t: Century, role: Role) -> Result<FilteredIndex, CorpusError> {
    let cutoff = t.sparse_cutoff();
    let regions: Vec<usize> = n
        .region_totals(t, role)
        .into_iter()
        .enumerate()
        .filter(|&(_, s)| s > cutoff)
        .map(|(i, _)| i)
        .collect();
    let occupations: Vec<usize> = n
        .occupation_totals(t, role)
        .into_iter()
        .enumerate()
        .filter(|&(_, s)| s > cutoff)
        .map(|(k, _)| k)
        .collect();
    if regions.is_empty() || occupations.is_empty() {
        return Err(CorpusError::EmptyAfterFilter {
            century: t.get(),
            role,
        });
    }
    Ok(FilteredIndex {
        century: t,
        role,
        regions,
        occupations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{classify_mobility, Biography};
    use proptest::prelude::*;

    fn bio(id: usize, occ: &str, year: i32, br: Option<&str>, dr: Option<&str>) -> Biography {
        Biography {
            id: id.to_string(),
            occupation: occ.into(),
            birth_year: year,
            birth_region: br.map(Into::into),
            death_year: None,
            death_region: dr.map(Into::into),
        }
    }

    fn axes() -> (Vec<String>, Vec<String>) {
        (
            vec!["BER".into(), "LON".into(), "PAR".into()],
            vec!["math".into(), "paint".into()],
        )
    }

    #[test]
    fn two_mathematicians_in_paris() {
        let (r, o) = axes();
        let recs: Vec<_> = [
            bio(1, "math", 1850, Some("PAR"), Some("PAR")),
            bio(2, "math", 1860, Some("PAR"), Some("LON")),
        ]
        .iter()
        .map(|b| classify_mobility(b).unwrap())
        .collect();
        let n = tabulate_records(r, o, &recs);
        let t = Century::new(19).unwrap();
        let (par, lon, math) = (2, 1, 0);
        assert_eq!(n.get(par, math, t, Role::Births), 2);
        assert_eq!(n.get(par, math, t, Role::Emigrants), 1);
        assert_eq!(n.get(lon, math, t, Role::Immigrants), 1);
        assert_eq!(n.get(par, math, t, Role::Locals), 1);
        assert_eq!(n.get(par, math, t, Role::Deaths), 1);
    }

    fn tensor_with_region_sum(sum: u32, century: u8) -> CountTensor {
        let (r, o) = axes();
        let mut n = CountTensor::zeros(r, o);
        let t = Century::new(century).unwrap();
        for _ in 0..sum {
            n.increment(0, 0, t, Role::Births);
        }
        // a well-populated second region keeps the result non-empty
        for _ in 0..10 {
            n.increment(1, 0, t, Role::Births);
        }
        n
    }

    #[test]
    fn cutoff_boundaries() {
        let t17 = Century::new(17).unwrap();
        let t13 = Century::new(13).unwrap();
        let f = filter_sparse(&tensor_with_region_sum(5, 17), t17, Role::Births).unwrap();
        assert_eq!(f.regions, vec![1]);
        let f = filter_sparse(&tensor_with_region_sum(6, 17), t17, Role::Births).unwrap();
        assert_eq!(f.regions, vec![0, 1]);
        let f = filter_sparse(&tensor_with_region_sum(4, 13), t13, Role::Births).unwrap();
        assert_eq!(f.regions, vec![0, 1]);
        assert_eq!(f.occupations, vec![0]);
    }

    #[test]
    fn empty_filter_is_an_error() {
        let (r, o) = axes();
        let n = CountTensor::zeros(r, o);
        assert!(matches!(
            filter_sparse(&n, Century::new(18).unwrap(), Role::Deaths),
            Err(CorpusError::EmptyAfterFilter { .. })
        ));
    }

    fn arb_records() -> impl Strategy<Value = Vec<MobilityRecord>> {
        let region = prop::option::weighted(0.85, prop::sample::select(vec!["BER", "LON", "PAR"]));
        prop::collection::vec(
            (
                prop::sample::select(vec!["math", "paint"]),
                1000i32..2000,
                region.clone(),
                region,
            ),
            0..200,
        )
        .prop_map(|rows| {
            rows.into_iter()
                .enumerate()
                .filter(|(_, (_, _, b, d))| b.is_some() || d.is_some())
                .map(|(id, (o, y, b, d))| classify_mobility(&bio(id, o, y, b, d)).unwrap())
                .collect()
        })
    }

    proptest! {
        #[test]
        fn immigrants_equal_emigrants_and_births_recount(recs in arb_records()) {
            let (r, o) = axes();
            let n = tabulate_records(r, o, &recs);
            for t in Century::all() {
                prop_assert_eq!(n.total(t, Role::Immigrants), n.total(t, Role::Emigrants));
                let born = recs.iter().filter(|m| m.century == t && m.birth_region.is_some()).count();
                prop_assert_eq!(n.total(t, Role::Births), born as u64);
                let died = recs.iter().filter(|m| m.century == t && m.death_region.is_some()).count();
                prop_assert_eq!(n.total(t, Role::Deaths), died as u64);
            }
        }

        #[test]
        fn one_pass_filter_uses_full_margins(recs in arb_records()) {
            let (r, o) = axes();
            let n = tabulate_records(r, o, &recs);
            for t in Century::all() {
                if let Ok(f) = filter_sparse(&n, t, Role::Births) {
                    let rows = n.region_totals(t, Role::Births);
                    for (i, s) in rows.iter().enumerate() {
                        prop_assert_eq!(f.regions.contains(&i), *s > t.sparse_cutoff());
                    }
                }
            }
        }
    }
}
