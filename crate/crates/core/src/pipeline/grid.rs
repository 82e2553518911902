use rayon::prelude::*;

use super::eval::evaluate;
use super::features::PreparedData;
use crate::error::{Error, Result};
use crate::label::NUM_CLASSES;
use crate::mlp::{init_weights, train, TrainConfig};

pub const DEFAULT_RATE_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
pub const DEFAULT_HIDDEN_GRID: [usize; 5] = [5, 10, 15, 20, 25];

#[derive(Clone, PartialEq, Debug)]
pub struct GridCell {
    pub hidden: usize,
    pub rate: f64,
    /// Pooled held-out accuracy, percent.
    pub accuracy_percent: f64,
    pub epochs_run: usize,
    pub final_mse: f64,
    pub seed: u64,
}

#[derive(Clone, PartialEq, Debug)]
pub struct GridResult {
    /// Hidden-major, rates in the order given.
    pub cells: Vec<GridCell>,
    pub best: usize,
}

impl GridResult {
    pub fn best_cell(&self) -> &GridCell {
        &self.cells[self.best]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("hidden,rate,accuracy_percent\n");
        for c in &self.cells {
            s.push_str(&format!(
                "{},{},{:.4}\n",
                c.hidden, c.rate, c.accuracy_percent
            ));
        }
        s
    }
}

/// Seed of cell `(hidden_index, rate_index)`. Cell `(0, 0)` uses the base
/// seed itself, so a one-cell grid reproduces a plain training run.
pub fn cell_seed(base: u64, hidden_index: usize, rate_index: usize) -> u64 {
    base ^ (hidden_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (rate_index as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
}

/// Trains one network per `(hidden, rate)` cell on the prepared training
/// split and scores it on the test split. Cells run on up to `jobs`
/// threads; results do not depend on the thread count.
pub fn grid_search(
    data: &PreparedData,
    rates: &[f64],
    hidden: &[usize],
    max_epochs: usize,
    target_error: f64,
    seed: u64,
    jobs: usize,
) -> Result<GridResult> {
    if rates.is_empty() || hidden.is_empty() {
        return Err(Error::InvalidArgument(
            "grid needs at least one rate and one hidden size".into(),
        ));
    }
    if data.test.is_empty() {
        return Err(Error::InvalidArgument(
            "grid search needs a held-out test set".into(),
        ));
    }
    if hidden.contains(&0) {
        return Err(Error::InvalidArgument(
            "hidden layer size must be positive".into(),
        ));
    }
    let specs: Vec<(usize, usize)> = (0..hidden.len())
        .flat_map(|h| (0..rates.len()).map(move |r| (h, r)))
        .collect();
    for &rate in rates {
        TrainConfig {
            learning_rate: rate,
            max_epochs,
            target_error,
            seed,
        }
        .validate()?;
    }
    let targets = data.train.targets();
    let run = |&(hi, ri): &(usize, usize)| -> Result<GridCell> {
        let cfg = TrainConfig {
            learning_rate: rates[ri],
            max_epochs,
            target_error,
            seed: cell_seed(seed, hi, ri),
        };
        let topology = [data.extractor.output_dim(), hidden[hi], NUM_CLASSES];
        let mut mlp = init_weights(&topology, cfg.seed)?;
        let report = train(&mut mlp, &data.train.features, &targets, &cfg)?;
        let eval = evaluate(&mlp, &data.test)?;
        Ok(GridCell {
            hidden: hidden[hi],
            rate: rates[ri],
            accuracy_percent: eval.pooled,
            epochs_run: report.epochs_run,
            final_mse: report.final_mse,
            seed: cfg.seed,
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let cells = pool.install(|| specs.par_iter().map(run).collect::<Result<Vec<_>>>())?;
    let mut best = 0;
    for (i, c) in cells.iter().enumerate() {
        if c.accuracy_percent > cells[best].accuracy_percent {
            best = i;
        }
    }
    Ok(GridResult { cells, best })
}
