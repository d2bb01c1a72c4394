//! Reading the four input tables into a validated corpus and classifying
//! every biography by mobility.
//!
//! ```text
//! cargo run --example ingest_corpus
//! ```

use agglomer::corpus::{
    read_biographies, read_corpus, read_regions, read_taxonomy, tabulate_counts, write_corpus, Century, Corpus,
    CorpusFormat, IngestOptions, PopulationTable, Role,
};

const BIOGRAPHIES: &str = "\
id,occupation,birth_year,birth_region,death_year,death_region,birth_lat,birth_lon
1,painter,1606,NL32,1669,NL32,,
2,painter,1599,BE21,1641,UKI3,,
3,composer,1685,DEG0,1750,DED5,,
4,composer,1685,DE30,1759,UKI3,,
5,physicist,1642,,1727,UKI3,52.8,-0.6
6,companion,1620,NL32,1680,NL32,,
7,physicist,,ITI1,1642,ITI4,,
8,painter,1480,ITI1,1520,ITI4,,
";

const TAXONOMY: &str = "\
occupation,category,broad_category
painter,Fine Arts,Arts
composer,Music,Arts
physicist,Natural Sciences,Science & Technology
";

const REGIONS: &str = "\
region_code,name,country,centroid_lat,centroid_lon
BE21,Antwerpen,BE,51.22,4.40
DE30,Berlin,DE,52.52,13.40
DED5,Leipzig,DE,51.34,12.37
DEG0,Thueringen,DE,50.90,11.03
ITI1,Toscana,IT,43.77,11.25
ITI4,Lazio,IT,41.90,12.50
NL32,Noord-Holland,NL,52.37,4.90
UKF3,Lincolnshire,UK,53.10,-0.20
UKI3,Inner London,UK,51.51,-0.13
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("agglomer-ingest-example");
    std::fs::create_dir_all(&dir)?;
    for (name, text) in [("biographies.csv", BIOGRAPHIES), ("taxonomy.csv", TAXONOMY), ("regions.csv", REGIONS)] {
        std::fs::write(dir.join(name), text)?;
    }

    // Newton has coordinates but no region code; the nearest centroid is
    // used only because it is asked for.
    let corpus = Corpus::build(
        read_biographies(&dir.join("biographies.csv"))?,
        read_taxonomy(&dir.join("taxonomy.csv"))?,
        read_regions(&dir.join("regions.csv"))?,
        PopulationTable::default(),
        IngestOptions { geocode_nearest: true },
    )?;
    println!("{:#?}", corpus.report);

    for m in corpus.mobility()? {
        println!(
            "{:>2} century {}  migrant={:<5} immigrant at {:<5} emigrant from {:<5} local in {}",
            m.id,
            m.century,
            m.is_migrant,
            m.immigrant_at().unwrap_or("-"),
            m.emigrant_from().unwrap_or("-"),
            m.strict_local_in().unwrap_or("-"),
        );
    }

    let n = tabulate_counts(&corpus)?;
    let t17 = Century::new(17)?;
    for role in Role::ALL {
        println!("17th century {role:>7}: {} individuals", n.total(t17, role));
    }

    let path = dir.join("corpus.bin");
    write_corpus(&corpus, &path, CorpusFormat::Binary)?;
    assert_eq!(read_corpus(&path)?, corpus);
    println!("round-tripped through {}", path.display());
    Ok(())
}
