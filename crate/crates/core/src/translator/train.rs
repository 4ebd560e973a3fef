use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::checkpoint::save_checkpoint;
use super::model::{visit_params_mut, Model};
use super::token::{TokenSeq, PAD};
use super::TranslatorError;
use crate::autograd::Tape;
use crate::optics::BucketSequence;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub shuffle: bool,
    /// Stop once the epoch loss drops below this value.
    pub early_stop_loss: Option<f64>,
    /// Write a checkpoint every n completed epochs into `checkpoint_dir`.
    pub checkpoint_every: Option<usize>,
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            epochs: 100,
            shuffle: true,
            early_stop_loss: None,
            checkpoint_every: None,
            checkpoint_dir: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Mean masked cross-entropy per epoch, weighted by real positions.
    pub epoch_losses: Vec<f64>,
    pub steps: u64,
    pub stopped_early: bool,
}

/// Minimizes masked cross-entropy over (bucket sequence, token sequence)
/// pairs with teacher forcing. Fully deterministic for a given model seed;
/// epoch shuffles are derived from (seed, epoch), so training can resume
/// from a checkpoint and reproduce an uninterrupted run exactly.
pub fn train<S: Scalar>(
    model: &mut Model<S>,
    dataset: &[(BucketSequence<S>, TokenSeq)],
    cfg: &TrainConfig,
) -> Result<TrainReport, TranslatorError> {
    if dataset.is_empty() {
        return Err(TranslatorError::EmptyDataset);
    }
    if cfg.batch_size == 0 {
        return Err(TranslatorError::InvalidConfig("batch_size must be >= 1".into()));
    }
    let src_len = dataset[0].0.len();
    for (buckets, tokens) in dataset {
        if buckets.len() != src_len {
            return Err(TranslatorError::MixedSourceLengths(src_len, buckets.len()));
        }
        if tokens.n_pixels() != model.config.n_pixels() {
            return Err(TranslatorError::InvalidTokenSequence(format!(
                "token sequence built for {} pixels, model expects {}",
                tokens.n_pixels(),
                model.config.n_pixels()
            )));
        }
        if tokens.len() > model.config.max_tgt_len() {
            return Err(TranslatorError::TargetTooLong {
                len: tokens.len(),
                max: model.config.max_tgt_len(),
            });
        }
    }
    if src_len > model.config.max_src_len {
        return Err(TranslatorError::SourceTooLong {
            len: src_len,
            max: model.config.max_src_len,
        });
    }

    let mut report =
        TrainReport { epoch_losses: Vec::with_capacity(cfg.epochs), steps: 0, stopped_early: false };

    for _ in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        if cfg.shuffle {
            let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed(model.seed, model.epoch));
            order.shuffle(&mut rng);
        }

        let mut loss_sum = 0.0f64;
        let mut position_count = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let (loss_value, positions) = train_step(model, dataset, batch)?;
            report.steps += 1;
            loss_sum += loss_value * positions as f64;
            position_count += positions;
        }

        let epoch_loss = loss_sum / position_count as f64;
        report.epoch_losses.push(epoch_loss);
        model.epoch += 1;

        if let (Some(every), Some(dir)) = (cfg.checkpoint_every, cfg.checkpoint_dir.as_ref()) {
            if every > 0 && model.epoch % every == 0 {
                std::fs::create_dir_all(dir)?;
                let path = dir.join(format!("ckpt_epoch{:04}.gtc", model.epoch));
                save_checkpoint(model, &path)?;
            }
        }
        if let Some(threshold) = cfg.early_stop_loss {
            if epoch_loss < threshold {
                report.stopped_early = true;
                break;
            }
        }
    }
    Ok(report)
}

/// One optimizer step over a batch of dataset indices. Returns the masked
/// mean cross-entropy and the number of real target positions it averaged.
///
/// Each sample runs at its own sequence length; because PAD targets are
/// ignored and the decoder is causal, this equals the batch-padded loss
/// exactly while skipping the dead positions.
fn train_step<S: Scalar>(
    model: &mut Model<S>,
    dataset: &[(BucketSequence<S>, TokenSeq)],
    batch: &[usize],
) -> Result<(f64, usize), TranslatorError> {
    let mut tape = Tape::new();
    let (bound, bound_ids) = model.bind_with_ids(&mut tape, true)?;

    // per-sample mean CE, recombined into the exact batch mean over all
    // real positions: sum_i ce_i * count_i / total
    let mut sample_losses = Vec::with_capacity(batch.len());
    let mut total_positions = 0usize;
    for &idx in batch {
        let row = dataset[idx].1.tokens();
        let logits =
            model.forward_with_bound(&mut tape, &bound, &dataset[idx].0.values, row)?;
        let targets = &row[1..];
        let ce = tape.cross_entropy_masked(logits, targets, PAD)?;
        let count = targets.iter().filter(|&&t| t != PAD).count();
        sample_losses.push((ce, count));
        total_positions += count;
    }
    let total = S::from_f64c(total_positions as f64);
    let mut loss = None;
    for (ce, count) in sample_losses {
        let weighted = tape.scale(ce, S::from_f64c(count as f64) / total)?;
        loss = Some(match loss {
            None => weighted,
            Some(acc) => tape.add(acc, weighted)?,
        });
    }
    let loss = loss.expect("batch is nonempty");
    let loss_value = tape.data(loss)[0].to_f64().unwrap();
    tape.backward(loss)?;

    let grads: Vec<Vec<S>> = bound_ids
        .ids
        .iter()
        .map(|&id| {
            tape.grad(id)
                .map(|g| g.to_vec())
                .unwrap_or_else(|| vec![S::zero(); tape.data(id).len()])
        })
        .collect();
    drop(tape);

    let mut param_refs: Vec<&mut [S]> = visit_params_mut(&mut model.params)
        .into_iter()
        .map(|v| v.as_mut_slice())
        .collect();
    let grad_refs: Vec<&[S]> = grads.iter().map(|g| g.as_slice()).collect();
    model.adam.step(&mut param_refs, &grad_refs)?;

    Ok((loss_value, total_positions))
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    let mut z = seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
