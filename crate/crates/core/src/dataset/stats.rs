use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::types::{Dataset, Platform, ScenarioType, Split};

/// Counts per scenario, platform and split. Every category is present, with
/// zero when unused.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StatsReport {
    pub total: usize,
    pub scenarios: BTreeMap<ScenarioType, usize>,
    pub platforms: BTreeMap<Platform, usize>,
    pub splits: BTreeMap<Split, usize>,
}

impl StatsReport {
    pub fn untrustworthy(&self) -> usize {
        self.total - self.normal()
    }

    pub fn normal(&self) -> usize {
        self.scenarios[&ScenarioType::Normal]
    }

    /// `(untrustworthy, normal)` counts.
    pub fn ratio(&self) -> (usize, usize) {
        (self.untrustworthy(), self.normal())
    }
}

pub fn dataset_stats(ds: &Dataset) -> StatsReport {
    let mut scenarios: BTreeMap<_, _> = ScenarioType::ALL.iter().map(|s| (*s, 0)).collect();
    let mut platforms: BTreeMap<_, _> = Platform::ALL.iter().map(|p| (*p, 0)).collect();
    let mut splits: BTreeMap<_, _> = [(Split::Train, 0), (Split::Test, 0)].into_iter().collect();
    for inst in ds {
        *scenarios.get_mut(&inst.scenario).expect("all scenarios seeded") += 1;
        *platforms.get_mut(&inst.platform).expect("all platforms seeded") += 1;
        *splits.get_mut(&inst.split).expect("all splits seeded") += 1;
    }
    StatsReport { total: ds.len(), scenarios, platforms, splits }
}

fn share(part: usize, total: usize) -> String {
    if total == 0 {
        "—".to_string()
    } else {
        format!("{:.2}%", 100.0 * part as f64 / total as f64)
    }
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "instances: {}", self.total)?;
        writeln!(f, "scenarios:")?;
        for (s, n) in &self.scenarios {
            writeln!(f, "  {:<20} {:>6}  {}", s.label(), n, share(*n, self.total))?;
        }
        writeln!(f, "platforms:")?;
        for (p, n) in &self.platforms {
            writeln!(f, "  {:<20} {:>6}  {}", p.label(), n, share(*n, self.total))?;
        }
        writeln!(f, "splits:")?;
        for (s, n) in &self.splits {
            writeln!(f, "  {:<20} {:>6}  {}", s.label(), n, share(*n, self.total))?;
        }
        let (u, n) = self.ratio();
        write!(f, "untrustworthy:normal = {u}:{n}")
    }
}
