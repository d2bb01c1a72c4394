use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use super::panel::Panel;
use super::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CitySize {
    /// Population at or below the century median.
    Small,
    Large,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PanelFilter {
    All,
    /// Outcome centuries, inclusive.
    Centuries { from: u8, to: u8 },
    BroadCategories(Vec<String>),
    Groups(Vec<String>),
    /// Split at the median population of the regions in each century;
    /// rows without population belong to neither half.
    CitySize(CitySize),
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

/// Per-century median population over the distinct regions present.
pub fn century_medians(panel: &Panel) -> BTreeMap<u8, f64> {
    let f = &panel.frame;
    let (Some(t), Some(pop), Some(region)) = (f.num("century"), f.num("pop"), f.text("region")) else {
        return BTreeMap::new();
    };
    let mut seen: BTreeMap<u8, BTreeMap<&str, f64>> = BTreeMap::new();
    for r in 0..f.nrows() {
        if !pop[r].is_nan() {
            seen.entry(t[r] as u8).or_default().insert(region[r].as_str(), pop[r]);
        }
    }
    seen.into_iter()
        .filter_map(|(t, regions)| median(regions.into_values().collect()).map(|m| (t, m)))
        .collect()
}

pub fn subset(panel: &Panel, filter: &PanelFilter) -> Result<Panel, PipelineError> {
    let f = &panel.frame;
    let text = |name: &str| f.text(name).unwrap_or(&[]);
    let keep: Vec<usize> = match filter {
        PanelFilter::All => (0..f.nrows()).collect(),
        PanelFilter::Centuries { from, to } => {
            let t = f.num("century").unwrap_or(&[]);
            (0..t.len())
                .filter(|&r| (f64::from(*from)..=f64::from(*to)).contains(&t[r]))
                .collect()
        }
        PanelFilter::BroadCategories(set) | PanelFilter::Groups(set) => {
            let col = if matches!(filter, PanelFilter::Groups(_)) { "group" } else { "broad_category" };
            let set: BTreeSet<&str> = set.iter().map(String::as_str).collect();
            let v = text(col);
            (0..v.len()).filter(|&r| set.contains(v[r].as_str())).collect()
        }
        PanelFilter::CitySize(size) => {
            let medians = century_medians(panel);
            let t = f.num("century").unwrap_or(&[]);
            let pop = f.num("pop").unwrap_or(&[]);
            (0..pop.len())
                .filter(|&r| {
                    let Some(&m) = medians.get(&(t[r] as u8)) else {
                        return false;
                    };
                    !pop[r].is_nan()
                        && match size {
                            CitySize::Small => pop[r] <= m,
                            CitySize::Large => pop[r] > m,
                        }
                })
                .collect()
        }
    };
    if keep.is_empty() {
        return Err(PipelineError::EmptySubset(format!("{filter:?}")));
    }
    Ok(panel.take(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::synth::{synthetic_corpus, SynthConfig};
    use crate::pipeline::{assemble_panel, PanelOptions};

    fn panel() -> Panel {
        let cfg = SynthConfig {
            regions: 12,
            occupations: 10,
            births_per_century: 800,
            ..Default::default()
        };
        assemble_panel(&synthetic_corpus(&cfg, 3).unwrap(), PanelOptions::default()).unwrap()
    }

    #[test]
    fn all_is_identity() {
        let p = panel();
        let csv = |f: &crate::frame::Frame| {
            let mut out = Vec::new();
            f.write_csv(&mut out).unwrap();
            out
        };
        assert_eq!(csv(&subset(&p, &PanelFilter::All).unwrap().frame), csv(&p.frame));
    }

    #[test]
    fn century_window_is_inclusive() {
        let p = panel();
        let s = subset(&p, &PanelFilter::Centuries { from: 11, to: 19 }).unwrap();
        let t = s.frame.num("century").unwrap();
        assert!(t.iter().all(|&c| (11.0..=19.0).contains(&c)));
        let twentieth = p.frame.num("century").unwrap().iter().filter(|&&c| c == 20.0).count();
        assert!(twentieth > 0);
        assert_eq!(s.nrows() + twentieth, p.nrows());
        assert_eq!(s.report.rows, s.nrows());
    }

    #[test]
    fn city_halves_split_at_the_median() {
        let p = panel();
        let medians = century_medians(&p);
        let small = subset(&p, &PanelFilter::CitySize(CitySize::Small)).unwrap();
        let large = subset(&p, &PanelFilter::CitySize(CitySize::Large)).unwrap();
        for (half, small_half) in [(&small, true), (&large, false)] {
            let (t, pop) = (half.frame.num("century").unwrap(), half.frame.num("pop").unwrap());
            for r in 0..half.nrows() {
                let m = medians[&(t[r] as u8)];
                assert_eq!(pop[r] <= m, small_half);
            }
        }
        let with_pop = p.frame.num("pop").unwrap().iter().filter(|x| !x.is_nan()).count();
        assert_eq!(small.nrows() + large.nrows(), with_pop);
    }

    #[test]
    fn unmatched_filter_is_an_error() {
        let err = subset(&panel(), &PanelFilter::Groups(vec!["Sports".into()])).unwrap_err();
        assert!(matches!(err, PipelineError::EmptySubset(_)));
    }

    #[test]
    fn median_of_even_count_averages() {
        assert_eq!(median(vec![4.0, 1.0, 3.0, 2.0]), Some(2.5));
        assert_eq!(median(vec![]), None);
    }
}
