use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tsgrid::{PairSource, SplitAssignment};

/// Pair indices of each split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub runs: SplitAssignment,
}

/// Partitions run ids 80/10/10, each split getting at least one run.
pub fn split_runs(run_ids: &[u64], seed: u64) -> Result<SplitAssignment> {
    let mut runs = run_ids.to_vec();
    runs.sort_unstable();
    runs.dedup();
    let n = runs.len();
    if n < 3 {
        return Err(Error::Invalid(format!("splitting needs at least 3 runs, found {n}")));
    }
    runs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let held = ((n as f64 * 0.1).round() as usize).max(1);
    let mut test = runs.split_off(n - held);
    let mut validation = runs.split_off(n - 2 * held);
    let mut train = runs;
    for v in [&mut train, &mut validation, &mut test] {
        v.sort_unstable();
    }
    Ok(SplitAssignment {
        seed,
        train,
        validation,
        test,
    })
}

/// Maps a run-level assignment onto pair indices.
pub fn apply_assignment(dataset: &dyn PairSource, runs: &SplitAssignment) -> Result<DatasetSplit> {
    let mut split = DatasetSplit {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        runs: runs.clone(),
    };
    for i in 0..dataset.len() {
        let run = dataset.meta(i).run_id;
        let dest = if runs.train.binary_search(&run).is_ok() {
            &mut split.train
        } else if runs.validation.binary_search(&run).is_ok() {
            &mut split.validation
        } else if runs.test.binary_search(&run).is_ok() {
            &mut split.test
        } else {
            return Err(Error::Invalid(format!("run {run} missing from split assignment")));
        };
        dest.push(i);
    }
    Ok(split)
}

pub fn split_dataset(dataset: &dyn PairSource, seed: u64) -> Result<DatasetSplit> {
    if dataset.is_empty() {
        return Err(Error::Invalid("cannot split an empty dataset".into()));
    }
    let runs: Vec<u64> = (0..dataset.len()).map(|i| dataset.meta(i).run_id).collect();
    apply_assignment(dataset, &split_runs(&runs, seed)?)
}

/// Keeps at most `per_run` randomly chosen pairs of every run in each split.
pub fn subsample_per_run(split: &DatasetSplit, dataset: &dyn PairSource, per_run: usize, seed: u64) -> DatasetSplit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut thin = |indices: &[usize]| {
        let mut by_run: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for &i in indices {
            by_run.entry(dataset.meta(i).run_id).or_default().push(i);
        }
        let mut kept = Vec::new();
        for pairs in by_run.values() {
            kept.extend(pairs.choose_multiple(&mut rng, per_run.min(pairs.len())).copied());
        }
        kept.sort_unstable();
        kept
    };
    DatasetSplit {
        train: thin(&split.train),
        validation: thin(&split.validation),
        test: thin(&split.test),
        runs: split.runs.clone(),
    }
}
