use std::collections::BTreeMap;

use super::data::Example;
use super::TrainError;
use crate::nnet::{adam_step, AdamState, Tape, Tensor};
use crate::real::Real;
use crate::text2mel::{LossWeights, Ssrn, Text2Mel};

/// Named loss values of one optimisation step, averaged over the batch with
/// per-example weights proportional to frame count.
pub type LossValues = BTreeMap<String, f64>;

fn accumulate<T: Real>(acc: &mut [Option<Tensor<T>>], grads: Vec<Option<Tensor<T>>>, weight: T) {
    for (slot, g) in acc.iter_mut().zip(grads) {
        let Some(mut g) = g else { continue };
        g.data_mut().iter_mut().for_each(|v| *v *= weight);
        match slot {
            Some(a) => a.add_assign(&g),
            None => *slot = Some(g),
        }
    }
}

fn frame_weights<T: Real, E>(batch: &[E], frames: impl Fn(&E) -> usize) -> Vec<T> {
    let total: usize = batch.iter().map(&frames).sum();
    batch.iter().map(|e| T::from_usize_lossy(frames(e)) / T::from_usize_lossy(total.max(1))).collect()
}

fn check_loss(values: &LossValues) -> Result<(), TrainError> {
    match values.iter().find(|(_, v)| !v.is_finite()) {
        Some((name, _)) => Err(TrainError::NonFiniteLoss(name.clone())),
        None => Ok(()),
    }
}

/// Teacher-forced losses without an update.
pub fn t2m_losses<T: Real>(model: &Text2Mel<T>, batch: &[&Example<T>], w: &LossWeights) -> Result<LossValues, TrainError> {
    let weights: Vec<T> = frame_weights(batch, |e| e.frames());
    let mut values = LossValues::new();
    for (ex, &wt) in batch.iter().zip(&weights) {
        let mut tape = Tape::new();
        let (loss, _) = model.loss(&mut tape, &ex.ids, &ex.mel, w)?;
        for (name, var) in [("total", loss.total), ("l1", loss.l1), ("bd", loss.binary_divergence), ("guided", loss.guided_attention)] {
            *values.entry(name.to_string()).or_default() += (tape.scalar(var) * wt).to_f64_lossy();
        }
    }
    Ok(values)
}

/// One Adam step of the acoustic model on `batch`; returns the pre-update losses.
pub fn t2m_step<T: Real>(
    model: &mut Text2Mel<T>,
    adam: &mut AdamState<T>,
    batch: &[&Example<T>],
    w: &LossWeights,
) -> Result<LossValues, TrainError> {
    let weights: Vec<T> = frame_weights(batch, |e| e.frames());
    let mut acc = vec![None; model.store.len()];
    let mut values = LossValues::new();
    for (ex, &wt) in batch.iter().zip(&weights) {
        let mut tape = Tape::new();
        let (loss, _) = model.loss(&mut tape, &ex.ids, &ex.mel, w)?;
        for (name, var) in [("total", loss.total), ("l1", loss.l1), ("bd", loss.binary_divergence), ("guided", loss.guided_attention)] {
            *values.entry(name.to_string()).or_default() += (tape.scalar(var) * wt).to_f64_lossy();
        }
        let grads = tape.backward(loss.total)?.for_params(model.store.len());
        accumulate(&mut acc, grads, wt);
    }
    check_loss(&values)?;
    adam_step(&mut model.store, &acc, adam)?;
    Ok(values)
}

pub fn ssrn_losses<T: Real>(model: &Ssrn<T>, batch: &[&Example<T>]) -> Result<LossValues, TrainError> {
    let weights: Vec<T> = frame_weights(batch, |e| e.frames());
    let mut values = LossValues::new();
    for (ex, &wt) in batch.iter().zip(&weights) {
        let mut tape = Tape::new();
        let loss = model.loss(&mut tape, &ex.mel, &ex.mag)?;
        for (name, var) in [("total", loss.total), ("l1", loss.l1), ("bd", loss.binary_divergence)] {
            *values.entry(name.to_string()).or_default() += (tape.scalar(var) * wt).to_f64_lossy();
        }
    }
    Ok(values)
}

pub fn ssrn_step<T: Real>(model: &mut Ssrn<T>, adam: &mut AdamState<T>, batch: &[&Example<T>]) -> Result<LossValues, TrainError> {
    let weights: Vec<T> = frame_weights(batch, |e| e.frames());
    let mut acc = vec![None; model.store.len()];
    let mut values = LossValues::new();
    for (ex, &wt) in batch.iter().zip(&weights) {
        let mut tape = Tape::new();
        let loss = model.loss(&mut tape, &ex.mel, &ex.mag)?;
        for (name, var) in [("total", loss.total), ("l1", loss.l1), ("bd", loss.binary_divergence)] {
            *values.entry(name.to_string()).or_default() += (tape.scalar(var) * wt).to_f64_lossy();
        }
        let grads = tape.backward(loss.total)?.for_params(model.store.len());
        accumulate(&mut acc, grads, wt);
    }
    check_loss(&values)?;
    adam_step(&mut model.store, &acc, adam)?;
    Ok(values)
}
