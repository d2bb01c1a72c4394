use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{
    Corpus, CorpusError, PopulationRecord, PopulationTable, RawBiography, RegionRecord,
    RegionRegistry, Taxonomy,
};

const MAGIC: &[u8; 9] = b"AGGLOMER1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorpusFormat {
    #[default]
    Binary,
    Json,
}

fn csv_error(path: &Path, source: csv::Error) -> CorpusError {
    CorpusError::Csv {
        path: path.display().to_string(),
        source,
    }
}

fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    reader
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| csv_error(path, e))
}

#[derive(Deserialize)]
struct BiographyRow {
    id: String,
    occupation: String,
    birth_year: Option<String>,
    birth_region: Option<String>,
    death_year: Option<String>,
    death_region: Option<String>,
    #[serde(default)]
    birth_lat: Option<f64>,
    #[serde(default)]
    birth_lon: Option<f64>,
    #[serde(default)]
    death_lat: Option<f64>,
    #[serde(default)]
    death_lon: Option<f64>,
}

/// Accepts `1750` as well as `1750.0`, the latter common in exported tables.
fn parse_year(s: &str) -> Option<i32> {
    s.parse::<i32>().ok().or_else(|| {
        let f = s.parse::<f64>().ok()?;
        (f.fract() == 0.0 && f.abs() < 1e6).then_some(f as i32)
    })
}

fn non_empty(s: Option<String>) -> Option<String> {
    s.filter(|v| !v.is_empty())
}

pub fn read_biographies(path: &Path) -> Result<Vec<RawBiography>, CorpusError> {
    let rows: Vec<BiographyRow> = read_rows(path)?;
    rows.into_iter()
        .enumerate()
        .map(|(n, r)| {
            let year = |v: Option<String>, field: &str| -> Result<Option<i32>, CorpusError> {
                match non_empty(v) {
                    None => Ok(None),
                    Some(s) => parse_year(&s).map(Some).ok_or_else(|| CorpusError::Parse {
                        path: path.display().to_string(),
                        record: n as u64 + 1,
                        message: format!("{field} {s:?} is not a year"),
                    }),
                }
            };
            Ok(RawBiography {
                birth_year: year(r.birth_year, "birth_year")?,
                death_year: year(r.death_year, "death_year")?,
                id: r.id,
                occupation: r.occupation,
                birth_region: non_empty(r.birth_region),
                death_region: non_empty(r.death_region),
                birth_lat: r.birth_lat,
                birth_lon: r.birth_lon,
                death_lat: r.death_lat,
                death_lon: r.death_lon,
            })
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct TaxonomyRow {
    occupation: String,
    category: String,
    broad_category: String,
}

pub fn read_taxonomy(path: &Path) -> Result<Taxonomy, CorpusError> {
    let rows: Vec<TaxonomyRow> = read_rows(path)?;
    Taxonomy::from_rows(
        rows.into_iter()
            .map(|r| (r.occupation, r.category, r.broad_category)),
    )
}

pub fn read_regions(path: &Path) -> Result<RegionRegistry, CorpusError> {
    RegionRegistry::new(read_rows::<RegionRecord>(path)?)
}

pub fn read_population(path: &Path) -> Result<PopulationTable, CorpusError> {
    PopulationTable::new(read_rows::<PopulationRecord>(path)?)
}

pub fn write_corpus(corpus: &Corpus, path: &Path, format: CorpusFormat) -> Result<(), CorpusError> {
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        CorpusFormat::Binary => {
            w.write_all(MAGIC)?;
            bincode::serialize_into(&mut w, corpus)
                .map_err(|e| CorpusError::Decode(e.to_string()))?;
        }
        CorpusFormat::Json => {
            serde_json::to_writer_pretty(&mut w, corpus)
                .map_err(|e| CorpusError::Decode(e.to_string()))?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads either serialization; the binary form is recognised by its header.
pub fn read_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if let Some(payload) = bytes.strip_prefix(MAGIC.as_slice()) {
        bincode::deserialize(payload).map_err(|e| CorpusError::Decode(e.to_string()))
    } else {
        serde_json::from_slice(&bytes).map_err(|e| CorpusError::Decode(e.to_string()))
    }
}

/// Writes `biographies.csv`, `taxonomy.csv`, `regions.csv` and
/// `population.csv` into `dir`, in the layout [`read_biographies`] and its
/// siblings accept.
pub fn write_input_tables(corpus: &Corpus, dir: &Path) -> Result<(), CorpusError> {
    std::fs::create_dir_all(dir)?;
    fn table<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), CorpusError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        for r in rows {
            w.serialize(r).map_err(|e| csv_error(path, e))?;
        }
        w.flush()?;
        Ok(())
    }
    table(&dir.join("biographies.csv"), &corpus.biographies)?;
    table(
        &dir.join("taxonomy.csv"),
        corpus.taxonomy.iter().map(|(o, c)| TaxonomyRow {
            occupation: o.clone(),
            category: c.category.clone(),
            broad_category: c.broad_category.clone(),
        }),
    )?;
    table(&dir.join("regions.csv"), corpus.regions.records())?;
    table(&dir.join("population.csv"), corpus.population.records())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::IngestOptions;

    #[test]
    fn years_accept_float_notation() {
        assert_eq!(parse_year("1750"), Some(1750));
        assert_eq!(parse_year("1750.0"), Some(1750));
        assert_eq!(parse_year("1750.5"), None);
        assert_eq!(parse_year("abc"), None);
    }

    #[test]
    fn round_trip_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let bios = dir.path().join("b.csv");
        std::fs::write(
            &bios,
            "id,occupation,birth_year,birth_region,death_year,death_region\n\
             1,math,1750,A,1810,B\n2,math,,A,,\n3,math,1500,A,,\n",
        )
        .unwrap();
        let tax = dir.path().join("t.csv");
        std::fs::write(&tax, "occupation,category,broad_category\nmath,Math,Science\n").unwrap();
        let reg = dir.path().join("r.csv");
        std::fs::write(
            &reg,
            "region_code,name,country,centroid_lat,centroid_lon\nA,a,X,1.0,2.0\nB,b,X,3.0,4.0\n",
        )
        .unwrap();
        let raw = read_biographies(&bios).unwrap();
        assert_eq!(raw[1].birth_year, None);
        assert_eq!(raw[2].death_region, None);
        let corpus = Corpus::build(
            raw,
            read_taxonomy(&tax).unwrap(),
            read_regions(&reg).unwrap(),
            PopulationTable::default(),
            IngestOptions::default(),
        )
        .unwrap();
        assert_eq!(corpus.report.kept, 2);
        for (name, fmt) in [("c.bin", CorpusFormat::Binary), ("c.json", CorpusFormat::Json)] {
            let p = dir.path().join(name);
            write_corpus(&corpus, &p, fmt).unwrap();
            assert_eq!(read_corpus(&p).unwrap(), corpus);
        }
        let tables = dir.path().join("tables");
        write_input_tables(&corpus, &tables).unwrap();
        let again = Corpus::build(
            read_biographies(&tables.join("biographies.csv")).unwrap(),
            read_taxonomy(&tables.join("taxonomy.csv")).unwrap(),
            read_regions(&tables.join("regions.csv")).unwrap(),
            read_population(&tables.join("population.csv")).unwrap(),
            IngestOptions::default(),
        )
        .unwrap();
        assert_eq!(again.biographies, corpus.biographies);
        assert_eq!(again.regions, corpus.regions);
    }
}
