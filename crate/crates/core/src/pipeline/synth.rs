//! Synthetic corpora with persistent regional specializations and
//! distance-decaying migration, and planted entry outcomes.

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, Normal};
use std::collections::BTreeMap;

use super::panel::Panel;
use super::PipelineError;
use crate::corpus::{
    Century, Corpus, IngestOptions, PopulationRecord, PopulationTable, RawBiography, RegionRecord,
    RegionRegistry, Taxonomy,
};
use crate::econometrics::sigmoid;
use crate::spatial::haversine_km;

const BROAD: [&str; 4] = ["Arts", "Humanities", "Science & Technology", "Institutions"];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub regions: usize,
    pub occupations: usize,
    pub categories: usize,
    /// At most four.
    pub broad_categories: usize,
    pub births_per_century: usize,
    pub migration_rate: f64,
    /// Persistence of the region-occupation propensity between centuries.
    pub persistence: f64,
    pub innovation_sd: f64,
    /// Kilometres at which destination attraction halves.
    pub distance_scale_km: f64,
    pub first_century: u8,
    pub last_century: u8,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            regions: 40,
            occupations: 40,
            categories: 8,
            broad_categories: 2,
            births_per_century: 6000,
            migration_rate: 0.35,
            persistence: 0.8,
            innovation_sd: 0.5,
            distance_scale_km: 300.0,
            first_century: 11,
            last_century: 20,
        }
    }
}

/// A corpus drawn from `config`; identical seeds give identical corpora.
pub fn synthetic_corpus(config: &SynthConfig, seed: u64) -> Result<Corpus, PipelineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");

    let regions: Vec<RegionRecord> = (0..config.regions)
        .map(|i| RegionRecord {
            region_code: format!("R{i:03}"),
            name: format!("Region {i}"),
            country: format!("C{}", i % 5),
            centroid_lat: rng.gen_range(36.0..60.0),
            centroid_lon: rng.gen_range(-9.0..30.0),
        })
        .collect();
    let occupations: Vec<String> = (0..config.occupations).map(|k| format!("occ{k:03}")).collect();
    let n_broad = config.broad_categories.clamp(1, BROAD.len());
    let taxonomy = Taxonomy::from_rows(occupations.iter().enumerate().map(|(k, o)| {
        let c = k % config.categories.max(1);
        (o.clone(), format!("category {c}"), BROAD[c % n_broad].to_owned())
    }))?;

    let size: Vec<f64> = (0..config.regions).map(|_| 0.7 * unit.sample(&mut rng)).collect();
    let reach: Vec<f64> = (0..config.occupations).map(|_| 0.5 * unit.sample(&mut rng)).collect();
    let mut u: Vec<f64> = (0..config.regions * config.occupations)
        .map(|_| unit.sample(&mut rng))
        .collect();
    let attract = |u: &[f64], j: usize, k: usize| (size[j] + u[j * config.occupations + k]).exp();
    let decay: Vec<Vec<f64>> = regions
        .iter()
        .map(|a| {
            regions
                .iter()
                .map(|b| 1.0 / (1.0 + haversine_km(a, b) / config.distance_scale_km))
                .collect()
        })
        .collect();

    let pop_noise = LogNormal::new(0.0, 0.8).expect("valid lognormal");
    let mut population = Vec::new();
    let mut raw = Vec::new();
    for t in config.first_century..=config.last_century {
        let century = Century::new(t)?;
        if t > config.first_century {
            for v in u.iter_mut() {
                *v = config.persistence * *v + config.innovation_sd * unit.sample(&mut rng);
            }
        }
        for (i, r) in regions.iter().enumerate() {
            let base = 20_000.0 * (1.0 + f64::from(t - config.first_century)) * (size[i]).exp();
            population.push(PopulationRecord {
                region_code: r.region_code.clone(),
                century: century.get(),
                population: (base * pop_noise.sample(&mut rng)).round(),
            });
        }
        let weights: Vec<f64> = (0..config.regions * config.occupations)
            .map(|c| (size[c / config.occupations] + reach[c % config.occupations] + u[c]).exp())
            .collect();
        let cells = WeightedIndex::new(&weights).expect("positive weights");
        for _ in 0..config.births_per_century {
            let c = cells.sample(&mut rng);
            let (i, k) = (c / config.occupations, c % config.occupations);
            let death = if rng.gen_bool(config.migration_rate) {
                let w: Vec<f64> = (0..config.regions)
                    .map(|j| if j == i { 0.0 } else { attract(&u, j, k) * decay[i][j] })
                    .collect();
                WeightedIndex::new(&w).map_or(i, |d| d.sample(&mut rng))
            } else {
                i
            };
            let birth_year = (i32::from(t) - 1) * 100 + rng.gen_range(0..100);
            raw.push(RawBiography {
                id: format!("p{:07}", raw.len()),
                occupation: occupations[k].clone(),
                birth_year: Some(birth_year),
                birth_region: Some(regions[i].region_code.clone()),
                death_year: Some(birth_year + rng.gen_range(30..90)),
                death_region: Some(regions[death].region_code.clone()),
                ..Default::default()
            });
        }
    }
    Ok(Corpus::build(
        raw,
        taxonomy,
        RegionRegistry::new(regions)?,
        PopulationTable::new(population)?,
        IngestOptions::default(),
    )?)
}

/// Rows where `outcome` is defined and every column in `required` is present.
pub fn complete_rows(panel: &Panel, outcome: &str, required: &[&str]) -> Vec<usize> {
    let f = &panel.frame;
    let Some(y) = f.num(outcome) else {
        return vec![];
    };
    let cols: Vec<&[f64]> = required.iter().filter_map(|c| f.num(c)).collect();
    (0..f.nrows())
        .filter(|&r| !y[r].is_nan() && cols.iter().all(|c| !c[r].is_nan()))
        .collect()
}

/// Replaces `outcome` on the complete rows by draws from a logit with slope
/// `beta` on `variable`, intercept `intercept` and normal effects for every
/// broad category-region-century and category-century cell. Other rows
/// become missing.
pub fn plant_outcome(
    panel: &Panel,
    outcome: &str,
    variable: &str,
    intercept: f64,
    beta: f64,
    required: &[&str],
    seed: u64,
) -> Result<Panel, PipelineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = &panel.frame;
    let rows = complete_rows(panel, outcome, required);
    let x = f.num(variable).expect("variable is a panel column");
    let text = |c: &str| f.text(c).expect("key column");
    let (broad, region, category) = (text("broad_category"), text("region"), text("category"));
    let century = f.num("century").expect("century column");
    let cell_a = Normal::new(0.0, 0.5).expect("valid normal");
    let cell_b = Normal::new(0.0, 0.3).expect("valid normal");
    let mut a: BTreeMap<(String, String, u8), f64> = BTreeMap::new();
    let mut b: BTreeMap<(String, u8), f64> = BTreeMap::new();
    for &r in &rows {
        a.entry((broad[r].clone(), region[r].clone(), century[r] as u8)).or_insert(0.0);
        b.entry((category[r].clone(), century[r] as u8)).or_insert(0.0);
    }
    a.values_mut().for_each(|v| *v = cell_a.sample(&mut rng));
    b.values_mut().for_each(|v| *v = cell_b.sample(&mut rng));
    let mut y = vec![f64::NAN; f.nrows()];
    for &r in &rows {
        let t = century[r] as u8;
        let eta = intercept
            + beta * x[r]
            + a[&(broad[r].clone(), region[r].clone(), t)]
            + b[&(category[r].clone(), t)];
        y[r] = f64::from(u8::from(rng.gen_bool(sigmoid(eta))));
    }
    let mut out = panel.clone();
    out.frame.set_num(outcome, y)?;
    Ok(out)
}

/// Shuffles the defined values of `outcome` among its defined rows.
pub fn permute_outcome(panel: &Panel, outcome: &str, seed: u64) -> Result<Panel, PipelineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = panel.frame.num(outcome).expect("outcome is a panel column");
    let rows: Vec<usize> = (0..y.len()).filter(|&r| !y[r].is_nan()).collect();
    let mut values: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
    values.shuffle(&mut rng);
    let mut z = y.to_vec();
    for (&r, v) in rows.iter().zip(values) {
        z[r] = v;
    }
    let mut out = panel.clone();
    out.frame.set_num(outcome, z)?;
    Ok(out)
}
