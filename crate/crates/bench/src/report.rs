use std::fmt::Write as _;
use std::time::Duration;

use crate::cli::{Alloc, ExperimentArgs, QueryKind, Switch};

pub const CSV_HEADER: &str =
    "m,n,kind,alloc,sort,threads,seed,build_ms,query_ms,rate_qps,min_cnt,mean_cnt,max_cnt,fallback";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CountStats {
    pub min: usize,
    pub mean: f64,
    pub max: usize,
}

impl CountStats {
    pub fn from_offsets(offsets: &[usize]) -> Self {
        let counts = offsets.windows(2).map(|w| w[1] - w[0]);
        let queries = offsets.len().saturating_sub(1);
        let (min, max, sum) = counts.fold((usize::MAX, 0, 0usize), |(lo, hi, s), c| (lo.min(c), hi.max(c), s + c));
        if queries == 0 {
            return CountStats {
                min: 0,
                mean: 0.0,
                max: 0,
            };
        }
        CountStats {
            min,
            mean: sum as f64 / queries as f64,
            max,
        }
    }
}

/// Wall times of one phase across the timed repetitions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PhaseTimes(pub Vec<Duration>);

impl PhaseTimes {
    pub fn median(&self) -> Duration {
        let mut v = self.0.clone();
        v.sort();
        match v.len() {
            0 => Duration::ZERO,
            n if n % 2 == 1 => v[n / 2],
            n => (v[n / 2 - 1] + v[n / 2]) / 2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub config: ExperimentArgs,
    pub n: usize,
    pub radius: f32,
    pub threads: usize,
    pub generate: Duration,
    pub build: PhaseTimes,
    pub query: PhaseTimes,
    pub counts: CountStats,
    pub fallback: bool,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

impl BenchReport {
    pub fn rate_qps(&self) -> f64 {
        let secs = self.query.median().as_secs_f64();
        if secs > 0.0 {
            self.n as f64 / secs
        } else {
            f64::INFINITY
        }
    }

    pub fn csv_row(&self) -> String {
        let c = &self.config;
        let kind = match c.kind {
            QueryKind::Knn => "knn",
            QueryKind::Spatial => "spatial",
        };
        let alloc = match c.alloc {
            Alloc::OnePass => "1p",
            Alloc::TwoPass => "2p",
        };
        let sort = match c.sort_queries {
            Switch::On => "on",
            Switch::Off => "off",
        };
        format!(
            "{},{},{kind},{alloc},{sort},{},{},{:.3},{:.3},{:.1},{},{:.3},{},{}",
            c.m,
            self.n,
            self.threads,
            c.seed,
            ms(self.build.median()),
            ms(self.query.median()),
            self.rate_qps(),
            self.counts.min,
            self.counts.mean,
            self.counts.max,
            self.fallback,
        )
    }

    pub fn pretty(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        let _ = writeln!(s, "source      {} (m = {})", c.source, c.m);
        let _ = writeln!(s, "target      {} (n = {})", c.target, self.n);
        let _ = match c.kind {
            QueryKind::Knn => writeln!(s, "query       knn, k = {}", c.k),
            QueryKind::Spatial => writeln!(s, "query       spatial, r = {:.4}, alloc {:?}", self.radius, c.alloc),
        };
        let _ = writeln!(s, "threads     {}   seed {}   reps {}", self.threads, c.seed, c.reps);
        let _ = writeln!(s, "generate    {:>10.3} ms", ms(self.generate));
        let _ = writeln!(s, "build       {:>10.3} ms (median)", ms(self.build.median()));
        let _ = writeln!(s, "query       {:>10.3} ms (median)", ms(self.query.median()));
        let _ = writeln!(s, "rate        {:>10.1} queries/s", self.rate_qps());
        let _ = writeln!(
            s,
            "results     min {} / mean {:.3} / max {}",
            self.counts.min, self.counts.mean, self.counts.max
        );
        if c.alloc == Alloc::OnePass && c.kind == QueryKind::Spatial {
            let _ = writeln!(s, "fallback    {}", self.fallback);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_and_median() {
        let st = CountStats::from_offsets(&[0, 2, 2, 5]);
        assert_eq!((st.min, st.max), (0, 3));
        assert!((st.mean - 5.0 / 3.0).abs() < 1e-12);
        assert_eq!(CountStats::from_offsets(&[0]).mean, 0.0);

        let t = |v: &[u64]| PhaseTimes(v.iter().map(|&x| Duration::from_millis(x)).collect());
        assert_eq!(t(&[5, 1, 3]).median(), Duration::from_millis(3));
        assert_eq!(t(&[4, 1, 3, 2]).median(), Duration::from_micros(2500));
        assert_eq!(t(&[7]).median(), Duration::from_millis(7));
    }
}
