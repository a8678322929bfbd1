//! Many episodes from one configuration.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use super::{conclude, initial_table, simulate, EpisodeResult, MemoryMode, SimConfig, SimError};
use crate::fsm::Statechart;

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalStats {
    pub episodes: u64,
    pub survival_fraction: f64,
    pub mean_lifetime: f64,
    /// Shannon entropy in bits of all choices made, pooled over episodes.
    pub behavioral_entropy: f64,
    pub results: Vec<EpisodeResult>,
}

impl SurvivalStats {
    pub fn from_results(results: Vec<EpisodeResult>) -> Self {
        let n = results.len() as f64;
        let (survived, lifetime) = results.iter().fold((0u64, 0u64), |(s, l), r| {
            (s + u64::from(r.outcome.survived()), l + r.lifetime)
        });
        let mut pooled: BTreeMap<(String, String), u64> = BTreeMap::new();
        for r in &results {
            for (k, c) in &r.choices_made {
                *pooled.entry(k.clone()).or_default() += c;
            }
        }
        Self {
            episodes: results.len() as u64,
            survival_fraction: if n > 0.0 { survived as f64 / n } else { 0.0 },
            mean_lifetime: if n > 0.0 { lifetime as f64 / n } else { 0.0 },
            behavioral_entropy: behavioral_entropy(pooled.values().copied()),
            results,
        }
    }

    /// Survival fraction over episodes `range` (0-based, half open).
    pub fn survival_between(&self, range: std::ops::Range<usize>) -> f64 {
        let slice = &self.results[range];
        if slice.is_empty() {
            return 0.0;
        }
        slice.iter().filter(|r| r.outcome.survived()).count() as f64 / slice.len() as f64
    }
}

/// Shannon entropy (bits) of a histogram.
pub fn behavioral_entropy(counts: impl IntoIterator<Item = u64>) -> f64 {
    let counts: Vec<u64> = counts.into_iter().filter(|&c| c > 0).collect();
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let h: f64 = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.log2()
        })
        .sum();
    h.max(0.0)
}

/// Runs `episodes` episodes; episode `i` (0-based) uses seed `cfg.seed + i`.
///
/// Nonvolatile memory carries the weight table from each episode into the
/// next and persists it after every episode. Volatile episodes are
/// independent and run in parallel.
pub fn run_monte_carlo(cfg: &SimConfig, episodes: u64) -> Result<SurvivalStats, SimError> {
    cfg.validate()?;
    if episodes == 0 {
        return Err(SimError::Config("episodes must be at least 1".into()));
    }
    let chart = Arc::new(Statechart::from_scenario(&cfg.scenario)?);
    let results = match cfg.memory_mode {
        MemoryMode::Nonvolatile => {
            let mut table = initial_table(cfg)?;
            let mut out = Vec::with_capacity(episodes as usize);
            for i in 0..episodes {
                let (mut r, _) = simulate(cfg, &chart, cfg.seed.wrapping_add(i), table, false)?;
                conclude(cfg, &mut r)?;
                table = r.final_weights.clone();
                out.push(r);
            }
            out
        }
        MemoryMode::Volatile => {
            let table = initial_table(cfg)?;
            (0..episodes)
                .into_par_iter()
                .map(|i| {
                    let (mut r, _) =
                        simulate(cfg, &chart, cfg.seed.wrapping_add(i), table.clone(), false)?;
                    conclude(cfg, &mut r)?;
                    Ok(r)
                })
                .collect::<Result<Vec<_>, SimError>>()?
        }
    };
    Ok(SurvivalStats::from_results(results))
}

pub fn stats_to_csv(stats: &SurvivalStats) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["episode", "outcome", "lifetime", "recharges_station", "recharges_wireless"])
        .expect("in-memory write");
    for (i, r) in stats.results.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            r.outcome.as_str().to_owned(),
            r.lifetime.to_string(),
            r.recharges_station.to_string(),
            r.recharges_wireless.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

pub fn write_stats(stats: &SurvivalStats, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, stats_to_csv(stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_of_simple_histograms() {
        assert_eq!(behavioral_entropy([7]), 0.0);
        assert_eq!(behavioral_entropy([]), 0.0);
        assert!((behavioral_entropy([5, 5]) - 1.0).abs() < 1e-12);
        assert!((behavioral_entropy([1, 1, 1, 1]) - 2.0).abs() < 1e-12);
        assert_eq!(behavioral_entropy([3, 0]), 0.0);
    }
}
