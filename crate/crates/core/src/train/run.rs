use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Adam, Dataset, Model, PreparedExample, Split, TrainConfig};
use crate::autodiff::{load_checkpoint_file, save_checkpoint, Tape, Tensor};
use crate::{Error, Result};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const RESULT_FILE: &str = "result.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    /// Earliest epoch (1-based) with the lowest validation error.
    pub best_epoch: usize,
    pub valid_error: f64,
    /// Test error of the parameters from `best_epoch`.
    pub test_error: f64,
}

/// What gets written next to the checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config: TrainConfig,
    pub result: RunResult,
}

impl ResultRecord {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Fraction of `examples` answered wrongly.
pub fn error_rate(model: &Model, examples: &[PreparedExample]) -> Result<f64> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    let mut wrong = 0usize;
    for ex in examples {
        if !model.predict(ex)? {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / examples.len() as f64)
}

/// Builds a fresh model for `cfg` over `ds`, initialized from `cfg.seed`.
pub fn build_model(cfg: &TrainConfig, ds: &Dataset) -> Result<Model> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Model::new(cfg, &ds.registry, ds.vocab.len(), &ds.candidates, &mut rng)
}

/// Trains one model. With `out_dir`, the best-validation parameters are
/// saved there as a checkpoint along with a result record.
pub fn train(cfg: &TrainConfig, ds: &Dataset, out_dir: Option<&Path>) -> Result<RunResult> {
    let (result, _) = train_model(cfg, ds, out_dir)?;
    Ok(result)
}

/// Like [`train`] but also returns the model holding the best parameters.
pub fn train_model(cfg: &TrainConfig, ds: &Dataset, out_dir: Option<&Path>) -> Result<(RunResult, Model)> {
    cfg.validate()?;
    let mut model = build_model(cfg, ds)?;
    let mut adam = Adam::new(&model.store, cfg.lr);
    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    order_rng.set_stream(7);
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }

    let mut order: Vec<usize> = (0..ds.train.len()).collect();
    let mut epochs = Vec::new();
    let mut best: Option<(usize, f64, Vec<Tensor>)> = None;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut order_rng);
        let mut total = 0.0;
        for &i in &order {
            let ex = &ds.train[i];
            let mut tape = Tape::new();
            let f = model.forward(&mut tape, ex)?;
            let Some(loss) = f.loss else { continue };
            let value = tape.value(loss).item();
            if !value.is_finite() {
                let param_norms = model.store.value_norms();
                log::error!("non-finite loss {value} at training example {}", ex.id);
                for (name, norm) in &param_norms {
                    log::error!("  |{name}| = {norm}");
                }
                return Err(Error::NonFinite {
                    example: ex.id,
                    param_norms,
                });
            }
            total += value;
            tape.backward(loss, &mut model.store)?;
            model.store.clip_grad_norm(cfg.clip);
            adam.step(&mut model.store);
            model.store.zero_grads();
        }
        let train_loss = total / ds.train.len().max(1) as f64;
        let valid_error = error_rate(&model, &ds.valid)?;
        log::info!("seed {} epoch {epoch}: loss {train_loss:.4} valid error {valid_error:.4}", cfg.seed);
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            valid_error,
        });
        if best.as_ref().is_none_or(|(_, b, _)| valid_error < *b) {
            let snapshot = model.store.iter().map(|p| p.value.clone()).collect();
            best = Some((epoch, valid_error, snapshot));
            if let Some(dir) = out_dir {
                save_checkpoint(&dir.join(CHECKPOINT_FILE), &model.store)?;
            }
        }
        let (best_epoch, best_error, _) = best.as_ref().expect("set above");
        // a perfect validation score can never be beaten, so waiting out
        // the patience window would not change the selected parameters
        if *best_error == 0.0 || epoch - best_epoch >= cfg.patience {
            break;
        }
    }

    let (best_epoch, valid_error, snapshot) = best.expect("at least one epoch");
    for (p, v) in model.store.iter_mut().zip(snapshot) {
        p.value = v;
    }
    let test_error = error_rate(&model, &ds.test)?;
    let result = RunResult {
        seed: cfg.seed,
        epochs,
        best_epoch,
        valid_error,
        test_error,
    };
    if let Some(dir) = out_dir {
        ResultRecord {
            config: cfg.clone(),
            result: result.clone(),
        }
        .write(&dir.join(RESULT_FILE))?;
    }
    Ok((result, model))
}

/// Loads a checkpoint into a model shaped by `cfg` and returns the error
/// rate on `split`.
pub fn evaluate(cfg: &TrainConfig, ds: &Dataset, checkpoint: &Path, split: Split) -> Result<f64> {
    let model = load_model(cfg, ds, checkpoint)?;
    error_rate(&model, ds.split(split))
}

pub fn load_model(cfg: &TrainConfig, ds: &Dataset, checkpoint: &Path) -> Result<Model> {
    let mut model = build_model(cfg, ds)?;
    load_checkpoint_file(checkpoint, &mut model.store)?;
    Ok(model)
}

/// All runs of a multi-seed sweep and the one selected by validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiSeedResult {
    pub runs: Vec<RunResult>,
    pub selected: usize,
}

impl MultiSeedResult {
    pub fn best(&self) -> &RunResult {
        &self.runs[self.selected]
    }
}

/// Index of the run with the lowest validation error; ties go to the
/// lowest seed. Test errors are never consulted.
pub fn select_run(runs: &[RunResult]) -> Option<usize> {
    (0..runs.len()).min_by(|&a, &b| {
        runs[a]
            .valid_error
            .total_cmp(&runs[b].valid_error)
            .then(runs[a].seed.cmp(&runs[b].seed))
    })
}

/// Trains with seeds `cfg.seed .. cfg.seed + k`. Each run writes into
/// `out_dir/seed-<s>` when a directory is given.
pub fn multi_seed(cfg: &TrainConfig, ds: &Dataset, k: usize, out_dir: Option<&Path>) -> Result<MultiSeedResult> {
    if k == 0 {
        return Err(Error::Config("need at least one seed".into()));
    }
    let mut runs = Vec::with_capacity(k);
    for s in 0..k as u64 {
        let run_cfg = TrainConfig {
            seed: cfg.seed + s,
            ..cfg.clone()
        };
        let dir: Option<PathBuf> = out_dir.map(|d| d.join(format!("seed-{}", run_cfg.seed)));
        let r = train(&run_cfg, ds, dir.as_deref())?;
        log::info!(
            "seed {}: best epoch {} valid {:.4} test {:.4}",
            r.seed,
            r.best_epoch,
            r.valid_error,
            r.test_error
        );
        runs.push(r);
    }
    let selected = select_run(&runs).expect("k >= 1");
    Ok(MultiSeedResult { runs, selected })
}
