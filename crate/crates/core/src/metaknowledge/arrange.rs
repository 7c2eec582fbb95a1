use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{decouple, PrepError, TrainingSample};
use crate::dataset::{Instance, ScenarioType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arrangement {
    /// Each instance's scenario sample immediately followed by its action
    /// sample.
    Interleaved,
    /// A fresh seeded permutation of all samples in every epoch.
    Shuffled,
    /// Per epoch: every scenario sample, then every action sample.
    Rotating,
    /// All epochs of scenario samples, then all epochs of action samples.
    Phased,
}

impl Arrangement {
    pub const ALL: [Arrangement; 4] =
        [Arrangement::Interleaved, Arrangement::Shuffled, Arrangement::Rotating, Arrangement::Phased];

    pub fn label(self) -> &'static str {
        match self {
            Arrangement::Interleaved => "interleaved",
            Arrangement::Shuffled => "shuffled",
            Arrangement::Rotating => "rotating",
            Arrangement::Phased => "phased",
        }
    }
}

impl fmt::Display for Arrangement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Ordered samples for a whole training run, epochs included.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub samples: Vec<TrainingSample>,
    pub arrangement: Arrangement,
    pub epochs: u32,
    pub seed: u64,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

pub fn build_training_set(
    instances: &[Instance],
    arrangement: Arrangement,
    epochs: u32,
    seed: u64,
) -> Result<TrainingSet, PrepError> {
    if instances.is_empty() {
        return Err(PrepError::EmptyInput);
    }
    if epochs == 0 {
        return Err(PrepError::ZeroEpochs);
    }
    let (scenario, action): (Vec<_>, Vec<_>) = instances.iter().map(decouple).unzip();
    let epochs_usize = epochs as usize;
    let mut samples = Vec::with_capacity(2 * instances.len() * epochs_usize);

    match arrangement {
        Arrangement::Interleaved => {
            for _ in 0..epochs {
                for (d1, d2) in scenario.iter().zip(&action) {
                    samples.push(d1.clone());
                    samples.push(d2.clone());
                }
            }
        }
        Arrangement::Shuffled => {
            let pool: Vec<_> = scenario.iter().chain(&action).collect();
            for epoch in 0..epochs {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(epoch as u64);
                let mut order = pool.clone();
                order.shuffle(&mut rng);
                samples.extend(order.into_iter().cloned());
            }
        }
        Arrangement::Rotating => {
            for _ in 0..epochs {
                samples.extend(scenario.iter().cloned());
                samples.extend(action.iter().cloned());
            }
        }
        Arrangement::Phased => {
            for _ in 0..epochs {
                samples.extend(scenario.iter().cloned());
            }
            for _ in 0..epochs {
                samples.extend(action.iter().cloned());
            }
        }
    }
    Ok(TrainingSet { samples, arrangement, epochs, seed })
}

/// Training sets for continuation training: the first stage excludes every
/// instance of `held_out`, the second stage holds only those instances.
pub fn two_stage_sets(
    instances: &[Instance],
    held_out: ScenarioType,
    arrangement: Arrangement,
    epochs: u32,
    seed: u64,
) -> Result<(TrainingSet, TrainingSet), PrepError> {
    let (later, first): (Vec<Instance>, Vec<Instance>) =
        instances.iter().cloned().partition(|inst| inst.scenario == held_out);
    Ok((
        build_training_set(&first, arrangement, epochs, seed)?,
        build_training_set(&later, arrangement, epochs, seed)?,
    ))
}
