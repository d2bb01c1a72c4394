/// Transition outcomes of a set of cells; NaN where the cell is not at risk.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Labels {
    pub entry: Vec<f64>,
    pub exit: Vec<f64>,
}

/// Entry is defined where `M_{t-1} = 0` and exit where `M_{t-1} = 1`.
pub fn label_entries_exits(prev: &[u8], cur: &[u8]) -> Labels {
    assert_eq!(prev.len(), cur.len());
    let mut labels = Labels::default();
    for (&a, &b) in prev.iter().zip(cur) {
        let (entry, exit) = if a == 0 {
            (f64::from(b), f64::NAN)
        } else {
            (f64::NAN, f64::from(u8::from(b == 0)))
        };
        labels.entry.push(entry);
        labels.exit.push(exit);
    }
    labels
}

/// First and last births: entry where `N_{t-1} = 0`, exit where `N_{t-1} > 0`.
pub fn label_first_last(prev: &[f64], cur: &[f64]) -> Labels {
    assert_eq!(prev.len(), cur.len());
    let mut labels = Labels::default();
    for (&a, &b) in prev.iter().zip(cur) {
        let (entry, exit) = if a == 0.0 {
            (f64::from(u8::from(b > 0.0)), f64::NAN)
        } else {
            (f64::NAN, f64::from(u8::from(b == 0.0)))
        };
        labels.entry.push(entry);
        labels.exit.push(exit);
    }
    labels
}
