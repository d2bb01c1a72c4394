use crate::corpus::{
    Corpus, IngestOptions, PopulationRecord, PopulationTable, RawBiography, RegionRecord, RegionRegistry, Taxonomy,
};

/// Non-migrants: `(region, occupation, century, count)`; regions sit on a
/// line of latitude two degrees apart.
pub fn corpus(cells: &[(&str, &str, u8, u32)], population: &[(&str, u8, f64)]) -> Corpus {
    let mut regions: Vec<&str> = cells.iter().map(|c| c.0).collect();
    regions.sort_unstable();
    regions.dedup();
    let mut occupations: Vec<&str> = cells.iter().map(|c| c.1).collect();
    occupations.sort_unstable();
    occupations.dedup();
    let registry = RegionRegistry::new(
        regions
            .iter()
            .enumerate()
            .map(|(i, r)| RegionRecord {
                region_code: (*r).into(),
                name: (*r).into(),
                country: "X".into(),
                centroid_lat: 45.0,
                centroid_lon: 2.0 * i as f64,
            })
            .collect(),
    )
    .unwrap();
    let taxonomy = Taxonomy::from_rows(
        occupations
            .iter()
            .map(|o| ((*o).to_string(), format!("cat {o}"), "Arts".to_string())),
    )
    .unwrap();
    let mut raw = Vec::new();
    for &(r, o, t, count) in cells {
        for _ in 0..count {
            let year = (i32::from(t) - 1) * 100 + 10;
            raw.push(RawBiography {
                id: format!("p{}", raw.len()),
                occupation: o.into(),
                birth_year: Some(year),
                birth_region: Some(r.into()),
                death_year: Some(year + 60),
                death_region: Some(r.into()),
                ..Default::default()
            });
        }
    }
    let pop = PopulationTable::new(
        population
            .iter()
            .map(|&(r, t, p)| PopulationRecord {
                region_code: r.into(),
                century: t,
                population: p,
            })
            .collect(),
    )
    .unwrap();
    Corpus::build(raw, taxonomy, registry, pop, IngestOptions::default()).unwrap()
}
