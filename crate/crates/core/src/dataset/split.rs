use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::types::{Dataset, ScenarioType, Split};
use crate::error::InvalidValue;

/// Seeded random partition into train and test. The train side gets
/// `floor(n * train_fraction)` instances; both sides keep the original
/// relative order and have their `split` labels rewritten.
pub fn split_dataset(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset), InvalidValue> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(InvalidValue::new(format!("train fraction must lie in (0, 1), got {train_fraction}")));
    }
    let n = ds.len();
    // The epsilon absorbs binary error in decimal fractions such as 0.57 * 100.
    let n_train = ((n as f64) * train_fraction + 1e-9).floor() as usize;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_train = vec![false; n];
    for &i in &order[..n_train] {
        is_train[i] = true;
    }

    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(n - n_train);
    for (inst, to_train) in ds.instances.iter().zip(is_train) {
        let mut inst = inst.clone();
        if to_train {
            inst.split = Split::Train;
            train.push(inst);
        } else {
            inst.split = Split::Test;
            test.push(inst);
        }
    }
    Ok((Dataset::new(train, ds.root.clone()), Dataset::new(test, ds.root.clone())))
}

/// Which instances a scenario filter applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterScope {
    TrainOnly,
    All,
}

impl std::str::FromStr for FilterScope {
    type Err = InvalidValue;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train-only" => Ok(FilterScope::TrainOnly),
            "all" => Ok(FilterScope::All),
            other => Err(InvalidValue::new(format!("unknown scope `{other}` (expected train-only or all)"))),
        }
    }
}

/// Splits `ds` into the instances that survive removing `scenario` within
/// `scope`, and the removed ones. Both keep the original order.
pub fn partition_scenario(ds: &Dataset, scenario: ScenarioType, scope: FilterScope) -> (Dataset, Dataset) {
    let in_scope = |split: Split| scope == FilterScope::All || split == Split::Train;
    let (removed, kept): (Vec<_>, Vec<_>) = ds
        .instances
        .iter()
        .cloned()
        .partition(|inst| inst.scenario == scenario && in_scope(inst.split));
    (Dataset::new(kept, ds.root.clone()), Dataset::new(removed, ds.root.clone()))
}

pub fn filter_out_scenario(ds: &Dataset, scenario: ScenarioType, scope: FilterScope) -> Dataset {
    partition_scenario(ds, scenario, scope).0
}
