//! Biography ingestion: validation, century assignment, mobility roles,
//! count tabulation and sparse-cell filtering.
//!
//! A person born in region A and deceased in region B (A != B) counts as a
//! birth and an emigrant in A and as a death and an immigrant in B, all in
//! the century of birth.

mod century;
mod io;
mod tensor;

pub use century::{assign_century, Century, FIRST_CENTURY, LAST_CENTURY};
pub use io::{
    read_biographies, read_corpus, read_population, read_regions, read_taxonomy, write_corpus, write_input_tables,
    CorpusFormat,
};
pub use tensor::{filter_sparse, tabulate_counts, CountTensor, FilteredIndex, Role};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

use crate::spatial::haversine_coords_km;

/// Occupation removed from every analysis.
pub const COMPANION: &str = "companion";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("birth year {0} outside the studied millennium 1000..=1999")]
    YearOutOfRange(i32),
    #[error("century {0} outside 11..=20")]
    CenturyOutOfRange(i64),
    #[error("biography {0}: neither birth nor death region is known")]
    MissingRegion(String),
    #[error("biography {id}: unknown occupation {occupation:?}")]
    UnknownOccupation { id: String, occupation: String },
    #[error("biography {id}: unknown region code {region:?}")]
    UnknownRegion { id: String, region: String },
    #[error("biography {id}: death year {death} precedes birth year {birth}")]
    InvalidLifespan { id: String, birth: i32, death: i32 },
    #[error("duplicate biography id {0}")]
    DuplicateId(String),
    #[error("taxonomy: category {category:?} listed under both {first:?} and {second:?}")]
    InconsistentTaxonomy {
        category: String,
        first: String,
        second: String,
    },
    #[error("taxonomy: occupation {0:?} listed twice")]
    DuplicateOccupation(String),
    #[error("region {code:?}: {reason}")]
    InvalidRegion { code: String, reason: String },
    #[error("population for {region:?} in century {century} is negative")]
    NegativePopulation { region: String, century: u8 },
    #[error("century {century}, role {role}: no region or occupation survives the sparse-cell filter")]
    EmptyAfterFilter { century: u8, role: Role },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}, record {record}: {message}")]
    Parse {
        path: String,
        record: u64,
        message: String,
    },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("corpus decoding failed: {0}")]
    Decode(String),
}

/// One famous individual after validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Biography {
    pub id: String,
    pub occupation: String,
    pub birth_year: i32,
    pub birth_region: Option<String>,
    pub death_year: Option<i32>,
    pub death_region: Option<String>,
}

/// A biography row as read from disk, before validation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawBiography {
    pub id: String,
    pub occupation: String,
    pub birth_year: Option<i32>,
    pub birth_region: Option<String>,
    pub death_year: Option<i32>,
    pub death_region: Option<String>,
    #[serde(default)]
    pub birth_lat: Option<f64>,
    #[serde(default)]
    pub birth_lon: Option<f64>,
    #[serde(default)]
    pub death_lat: Option<f64>,
    #[serde(default)]
    pub death_lon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupationClass {
    pub category: String,
    pub broad_category: String,
}

/// Occupation -> (category, broad category).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Taxonomy {
    entries: BTreeMap<String, OccupationClass>,
}

impl Taxonomy {
    pub fn from_rows<I>(rows: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = (String, String, String)>,
    {
        let mut entries = BTreeMap::new();
        let mut broad_of: BTreeMap<String, String> = BTreeMap::new();
        for (occupation, category, broad_category) in rows {
            if let Some(prev) = broad_of.get(&category) {
                if prev != &broad_category {
                    return Err(CorpusError::InconsistentTaxonomy {
                        category,
                        first: prev.clone(),
                        second: broad_category,
                    });
                }
            } else {
                broad_of.insert(category.clone(), broad_category.clone());
            }
            let class = OccupationClass {
                category,
                broad_category,
            };
            if entries.insert(occupation.clone(), class).is_some() {
                return Err(CorpusError::DuplicateOccupation(occupation));
            }
        }
        Ok(Taxonomy { entries })
    }

    pub fn get(&self, occupation: &str) -> Option<&OccupationClass> {
        self.entries.get(occupation)
    }

    pub fn contains(&self, occupation: &str) -> bool {
        self.entries.contains_key(occupation)
    }

    /// Occupations in code order, companions excluded.
    pub fn occupations(&self) -> Vec<String> {
        self.entries
            .keys()
            .filter(|o| !is_companion(o))
            .cloned()
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &OccupationClass)> {
        self.entries.iter()
    }
}

pub fn is_companion(occupation: &str) -> bool {
    occupation.eq_ignore_ascii_case(COMPANION)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub region_code: String,
    pub name: String,
    pub country: String,
    pub centroid_lat: f64,
    pub centroid_lon: f64,
}

/// Region records sorted by code, codes unique.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionRegistry {
    records: Vec<RegionRecord>,
}

impl RegionRegistry {
    pub fn new(mut records: Vec<RegionRecord>) -> Result<Self, CorpusError> {
        records.sort_by(|a, b| a.region_code.cmp(&b.region_code));
        for w in records.windows(2) {
            if w[0].region_code == w[1].region_code {
                return Err(CorpusError::InvalidRegion {
                    code: w[0].region_code.clone(),
                    reason: "duplicate region code".into(),
                });
            }
        }
        for r in &records {
            let bad = !(r.centroid_lat.abs() <= 90.0 && r.centroid_lon.abs() <= 180.0);
            if bad {
                return Err(CorpusError::InvalidRegion {
                    code: r.region_code.clone(),
                    reason: format!(
                        "centroid ({}, {}) outside valid coordinates",
                        r.centroid_lat, r.centroid_lon
                    ),
                });
            }
        }
        Ok(RegionRegistry { records })
    }

    pub fn records(&self) -> &[RegionRecord] {
        &self.records
    }

    pub fn get(&self, code: &str) -> Option<&RegionRecord> {
        self.records
            .binary_search_by(|r| r.region_code.as_str().cmp(code))
            .ok()
            .map(|i| &self.records[i])
    }

    pub fn contains(&self, code: &str) -> bool {
        self.get(code).is_some()
    }

    pub fn codes(&self) -> Vec<String> {
        self.records.iter().map(|r| r.region_code.clone()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }
}

/// Nearest region centroid by great-circle distance; ties go to the smallest code.
pub fn nearest_centroid_geocode(lat: f64, lon: f64, registry: &RegionRegistry) -> Option<&str> {
    let mut best: Option<(f64, &RegionRecord)> = None;
    // records are sorted by code, so a strict comparison keeps the smallest code on ties
    for r in registry.records() {
        let d = haversine_coords_km(lat, lon, r.centroid_lat, r.centroid_lon);
        match best {
            Some((bd, _)) if d >= bd => {}
            _ => best = Some((d, r)),
        }
    }
    best.map(|(_, r)| r.region_code.as_str())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationRecord {
    pub region_code: String,
    pub century: u8,
    pub population: f64,
}

/// Population at the start of each century, by region.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PopulationTable {
    records: Vec<PopulationRecord>,
}

impl PopulationTable {
    pub fn new(mut records: Vec<PopulationRecord>) -> Result<Self, CorpusError> {
        for r in &records {
            Century::new(r.century)?;
            if r.population.is_nan() || r.population < 0.0 {
                return Err(CorpusError::NegativePopulation {
                    region: r.region_code.clone(),
                    century: r.century,
                });
            }
        }
        records.sort_by(|a, b| {
            (a.region_code.as_str(), a.century).cmp(&(b.region_code.as_str(), b.century))
        });
        records.dedup_by(|a, b| a.region_code == b.region_code && a.century == b.century);
        Ok(PopulationTable { records })
    }

    pub fn get(&self, region: &str, century: Century) -> Option<f64> {
        self.records
            .binary_search_by(|r| (r.region_code.as_str(), r.century).cmp(&(region, century.get())))
            .ok()
            .map(|i| self.records[i].population)
    }

    pub fn records(&self) -> &[PopulationRecord] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Role flags of one individual; both migration flags encode the same move.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MobilityRecord {
    pub id: String,
    pub occupation: String,
    pub century: Century,
    pub birth_region: Option<String>,
    pub death_region: Option<String>,
    pub is_migrant: bool,
}

impl MobilityRecord {
    pub fn is_local_birthplace(&self) -> bool {
        self.birth_region.is_some()
    }

    /// Region receiving this person as an immigrant.
    pub fn immigrant_at(&self) -> Option<&str> {
        if self.is_migrant {
            self.death_region.as_deref()
        } else {
            None
        }
    }

    /// Region losing this person as an emigrant.
    pub fn emigrant_from(&self) -> Option<&str> {
        if self.is_migrant {
            self.birth_region.as_deref()
        } else {
            None
        }
    }

    /// Born and died in the same region.
    pub fn strict_local_in(&self) -> Option<&str> {
        match (&self.birth_region, &self.death_region) {
            (Some(b), Some(d)) if b == d => Some(b.as_str()),
            _ => None,
        }
    }
}

pub fn classify_mobility(b: &Biography) -> Result<MobilityRecord, CorpusError> {
    if b.birth_region.is_none() && b.death_region.is_none() {
        return Err(CorpusError::MissingRegion(b.id.clone()));
    }
    let century = assign_century(b.birth_year)?;
    let is_migrant = matches!(
        (&b.birth_region, &b.death_region),
        (Some(x), Some(y)) if x != y
    );
    Ok(MobilityRecord {
        id: b.id.clone(),
        occupation: b.occupation.clone(),
        century,
        birth_region: b.birth_region.clone(),
        death_region: b.death_region.clone(),
        is_migrant,
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IngestOptions {
    /// Fill missing region codes from coordinates with the nearest centroid.
    pub geocode_nearest: bool,
}

/// What ingestion kept, dropped and repaired.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub kept: usize,
    pub dropped_companion: usize,
    pub dropped_missing_birth_year: usize,
    pub dropped_year_out_of_range: usize,
    pub dropped_no_region: usize,
    pub geocoded_regions: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub biographies: Vec<Biography>,
    pub taxonomy: Taxonomy,
    pub regions: RegionRegistry,
    pub population: PopulationTable,
    pub report: IngestReport,
}

impl Corpus {
    pub fn build(
        raw: Vec<RawBiography>,
        taxonomy: Taxonomy,
        regions: RegionRegistry,
        population: PopulationTable,
        options: IngestOptions,
    ) -> Result<Self, CorpusError> {
        let mut report = IngestReport {
            rows_read: raw.len(),
            ..Default::default()
        };
        let mut seen = BTreeSet::new();
        let mut biographies = Vec::with_capacity(raw.len());
        for mut r in raw {
            if !seen.insert(r.id.clone()) {
                return Err(CorpusError::DuplicateId(r.id));
            }
            if is_companion(&r.occupation) {
                log::warn!("dropping biography {} with occupation companion", r.id);
                report.dropped_companion += 1;
                continue;
            }
            if !taxonomy.contains(&r.occupation) {
                return Err(CorpusError::UnknownOccupation {
                    id: r.id,
                    occupation: r.occupation,
                });
            }
            let Some(birth_year) = r.birth_year else {
                report.dropped_missing_birth_year += 1;
                continue;
            };
            if assign_century(birth_year).is_err() {
                report.dropped_year_out_of_range += 1;
                continue;
            }
            if let Some(death) = r.death_year {
                if death < birth_year {
                    return Err(CorpusError::InvalidLifespan {
                        id: r.id,
                        birth: birth_year,
                        death,
                    });
                }
            }
            if options.geocode_nearest {
                if r.birth_region.is_none() {
                    if let (Some(lat), Some(lon)) = (r.birth_lat, r.birth_lon) {
                        r.birth_region =
                            nearest_centroid_geocode(lat, lon, &regions).map(str::to_owned);
                        report.geocoded_regions += r.birth_region.is_some() as usize;
                    }
                }
                if r.death_region.is_none() {
                    if let (Some(lat), Some(lon)) = (r.death_lat, r.death_lon) {
                        r.death_region =
                            nearest_centroid_geocode(lat, lon, &regions).map(str::to_owned);
                        report.geocoded_regions += r.death_region.is_some() as usize;
                    }
                }
            }
            if r.birth_region.is_none() && r.death_region.is_none() {
                report.dropped_no_region += 1;
                continue;
            }
            for region in [&r.birth_region, &r.death_region].into_iter().flatten() {
                if !regions.contains(region) {
                    return Err(CorpusError::UnknownRegion {
                        id: r.id.clone(),
                        region: region.clone(),
                    });
                }
            }
            biographies.push(Biography {
                id: r.id,
                occupation: r.occupation,
                birth_year,
                birth_region: r.birth_region,
                death_year: r.death_year,
                death_region: r.death_region,
            });
        }
        biographies.sort_by(|a, b| a.id.cmp(&b.id));
        report.kept = biographies.len();
        Ok(Corpus {
            biographies,
            taxonomy,
            regions,
            population,
            report,
        })
    }

    pub fn mobility(&self) -> Result<Vec<MobilityRecord>, CorpusError> {
        self.biographies.iter().map(classify_mobility).collect()
    }

    pub fn class_of(&self, occupation: &str) -> Option<&OccupationClass> {
        self.taxonomy.get(occupation)
    }
}
