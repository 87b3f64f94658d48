use std::collections::BTreeMap;

use serde::Serialize;

use crate::time::Micros;

/// Boxplot numbers for one metric group, in microseconds.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SummaryStats {
    pub count: usize,
    pub min: Option<Micros>,
    pub p25: Option<Micros>,
    pub p50: Option<Micros>,
    pub p75: Option<Micros>,
    pub max: Option<Micros>,
    /// Most extreme samples within 1.5 IQR of the quartiles.
    pub whisker_low: Option<Micros>,
    pub whisker_high: Option<Micros>,
    /// Samples of this group lost to incomplete trees.
    pub dropped: usize,
}

/// Nearest-rank quantile of sorted data: the value at rank ceil(q n).
pub fn quantile(sorted: &[Micros], q: f64) -> Option<Micros> {
    if sorted.is_empty() {
        return None;
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Some(sorted[rank - 1])
}

pub fn summarize(values: &[Micros]) -> SummaryStats {
    let mut v = values.to_vec();
    v.sort_unstable();
    if v.is_empty() {
        return SummaryStats::default();
    }
    let (p25, p75) = (quantile(&v, 0.25).unwrap(), quantile(&v, 0.75).unwrap());
    let reach = 1.5 * (p75 - p25) as f64;
    let lo = p25 as f64 - reach;
    let hi = p75 as f64 + reach;
    SummaryStats {
        count: v.len(),
        min: v.first().copied(),
        p25: Some(p25),
        p50: quantile(&v, 0.5),
        p75: Some(p75),
        max: v.last().copied(),
        whisker_low: v.iter().copied().find(|&x| x as f64 >= lo),
        whisker_high: v.iter().rev().copied().find(|&x| x as f64 <= hi),
        dropped: 0,
    }
}

/// Samples grouped by metric name, summarized in name order.
#[derive(Debug, Clone, Default)]
pub struct Groups {
    samples: BTreeMap<String, Vec<Micros>>,
    dropped: BTreeMap<String, usize>,
}

impl Groups {
    pub fn push(&mut self, group: impl Into<String>, value: Micros) {
        self.samples.entry(group.into()).or_default().push(value);
    }

    pub fn touch(&mut self, group: impl Into<String>) {
        self.samples.entry(group.into()).or_default();
    }

    pub fn drop_sample(&mut self, group: impl Into<String>) {
        *self.dropped.entry(group.into()).or_default() += 1;
    }

    pub fn samples(&self, group: &str) -> &[Micros] {
        self.samples.get(group).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn summarize(&self) -> BTreeMap<String, SummaryStats> {
        let mut out: BTreeMap<String, SummaryStats> =
            self.samples.iter().map(|(k, v)| (k.clone(), summarize(v))).collect();
        for (k, n) in &self.dropped {
            out.entry(k.clone()).or_default().dropped = *n;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn five_values() {
        let s = summarize(&[5, 1, 4, 2, 3]);
        assert_eq!((s.p25, s.p50, s.p75), (Some(2), Some(3), Some(4)));
        assert_eq!((s.whisker_low, s.whisker_high), (Some(1), Some(5)));
    }

    #[test]
    fn empty() {
        let s = summarize(&[]);
        assert_eq!(s.count, 0);
        assert!(s.p50.is_none() && s.min.is_none() && s.whisker_high.is_none());
    }

    #[test]
    fn outlier_outside_whisker() {
        let s = summarize(&[10, 11, 12, 13, 14, 15, 16, 17, 1000]);
        assert_eq!(s.max, Some(1000));
        assert_eq!(s.whisker_high, Some(17));
    }

    proptest! {
        #[test]
        fn monotone(v in proptest::collection::vec(-1_000_000i64..1_000_000, 1..200)) {
            let s = summarize(&v);
            let chain = [s.min, s.whisker_low, s.p25, s.p50, s.p75, s.whisker_high, s.max];
            let chain: Vec<_> = chain.iter().map(|x| x.unwrap()).collect();
            prop_assert!(chain.windows(2).all(|w| w[0] <= w[1]), "{:?}", chain);
        }
    }
}
