//! Skipgram training with negative sampling over decomposed input vectors.
//!
//! `loss` and `gradient` are the reference definitions of the objective on
//! explicit batches; `train` is the SGD driver that walks (center, context)
//! pairs inside the window, samples negatives from the unigram^noise
//! distribution, and applies the same per-pair updates in place.
//!
//! Two execution modes:
//! - single-threaded (`threads == 1`): bit-reproducible for a fixed seed;
//! - hogwild (`threads > 1`): workers share the parameter tables through
//!   relaxed atomic loads/stores without synchronization. Lost updates are
//!   tolerated during training; invariant checks always run in mode one.

use super::model::{EmbeddingModel, ModelKind};
use crate::corpus::EncodedCorpus;
use crate::error::{Error, Result};
use crate::rng::{self, tags};
use crate::vecmath::{dot, log_sigmoid, sigmoid};
use rand::seq::SliceRandom;
use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicU64, Ordering::Relaxed};

/// One skipgram observation: a center token in its (bin, source) context, a
/// context token, and the sampled negatives.
#[derive(Debug, Clone)]
pub struct TrainingPair {
    pub center: u32,
    pub bin: u16,
    pub source: Option<u16>,
    pub context: u32,
    pub negatives: Vec<u32>,
}

/// Which parameter tables SGD may update; frozen tables still contribute to
/// the composed vectors. Null-model replicates retrain residuals only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FreezeMask {
    pub base: bool,
    pub output: bool,
    pub temporal: bool,
    pub source: bool,
}

impl FreezeMask {
    pub fn none() -> Self {
        FreezeMask {
            base: false,
            output: false,
            temporal: false,
            source: false,
        }
    }

    /// Freeze everything except the source residuals.
    pub fn source_only() -> Self {
        FreezeMask {
            base: true,
            output: true,
            temporal: true,
            source: false,
        }
    }

    /// Freeze the base and output tables; retrain both residual tables.
    pub fn residuals_only() -> Self {
        FreezeMask {
            base: true,
            output: true,
            temporal: false,
            source: false,
        }
    }
}

/// Summary of one training run.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub pairs_processed: u64,
    /// Mean sampled per-pair loss (data term plus the l2 term of the touched
    /// residuals) over the final epoch.
    pub final_loss: f64,
    pub epochs: usize,
}

// ---------------------------------------------------------------------------
// Reference objective on explicit batches
// ---------------------------------------------------------------------------

/// Mean negative-sampling loss over the batch plus the l2 penalty of every
/// residual cell the batch touches (each distinct cell counted once).
pub fn loss(model: &EmbeddingModel, batch: &[TrainingPair], l2_lambda: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Config("loss of an empty batch".into()));
    }
    let mut data = 0.0;
    let mut touched_t: BTreeSet<(u32, u16)> = BTreeSet::new();
    let mut touched_s: BTreeSet<(u32, u16, u16)> = BTreeSet::new();
    let mut u = vec![0.0; model.dims];
    for pair in batch {
        model.compose_into(pair.center, pair.bin, pair.source, &mut u)?;
        let x = dot(model.output(pair.context), &u);
        data -= log_sigmoid(x);
        for &n in &pair.negatives {
            data -= log_sigmoid(-dot(model.output(n), &u));
        }
        touched_t.insert((pair.center, pair.bin));
        if let Some(s) = pair.source {
            touched_s.insert((pair.center, pair.bin, s));
        }
    }
    let mut reg = 0.0;
    for &(w, t) in &touched_t {
        if let Some(r) = model.temporal_residual(w, t) {
            reg += dot(r, r);
        }
    }
    for &(w, t, s) in &touched_s {
        if let Some(q) = model.source_residual(w, t, s) {
            reg += dot(q, q);
        }
    }
    Ok(data / batch.len() as f64 + l2_lambda * reg)
}

/// Gradient of [`loss`] with respect to every parameter the batch touches.
#[derive(Debug, Default, Clone)]
pub struct SparseGradient {
    pub base: BTreeMap<u32, Vec<f64>>,
    pub output: BTreeMap<u32, Vec<f64>>,
    pub temporal: BTreeMap<(u32, u16), Vec<f64>>,
    pub source: BTreeMap<(u32, u16, u16), Vec<f64>>,
}

pub fn gradient(
    model: &EmbeddingModel,
    batch: &[TrainingPair],
    l2_lambda: f64,
) -> Result<SparseGradient> {
    if batch.is_empty() {
        return Err(Error::Config("gradient of an empty batch".into()));
    }
    let d = model.dims;
    let inv_b = 1.0 / batch.len() as f64;
    let mut grad = SparseGradient::default();
    let mut u = vec![0.0; d];
    let mut g_u = vec![0.0; d];
    for pair in batch {
        model.compose_into(pair.center, pair.bin, pair.source, &mut u)?;
        g_u.fill(0.0);
        let mut accumulate_target = |target: u32, label: f64, g_u: &mut [f64]| {
            let b = model.output(target);
            let g = (sigmoid(dot(b, &u)) - label) * inv_b;
            for (gi, bi) in g_u.iter_mut().zip(b) {
                *gi += g * bi;
            }
            let slot = grad
                .output
                .entry(target)
                .or_insert_with(|| vec![0.0; d]);
            for (si, ui) in slot.iter_mut().zip(&u) {
                *si += g * ui;
            }
        };
        accumulate_target(pair.context, 1.0, &mut g_u);
        for &n in &pair.negatives {
            accumulate_target(n, 0.0, &mut g_u);
        }

        // The same upstream gradient flows to the base vector and to every
        // residual present in the composition.
        let base = grad
            .base
            .entry(pair.center)
            .or_insert_with(|| vec![0.0; d]);
        for (bi, gi) in base.iter_mut().zip(&g_u) {
            *bi += gi;
        }
        if model.temporal_residual(pair.center, pair.bin).is_some() {
            let slot = grad
                .temporal
                .entry((pair.center, pair.bin))
                .or_insert_with(|| vec![0.0; d]);
            for (si, gi) in slot.iter_mut().zip(&g_u) {
                *si += gi;
            }
        }
        if let Some(s) = pair.source {
            if model.source_residual(pair.center, pair.bin, s).is_some() {
                let slot = grad
                    .source
                    .entry((pair.center, pair.bin, s))
                    .or_insert_with(|| vec![0.0; d]);
                for (si, gi) in slot.iter_mut().zip(&g_u) {
                    *si += gi;
                }
            }
        }
    }

    // Each distinct touched residual cell contributes its penalty term once.
    for ((w, t), slot) in grad.temporal.iter_mut() {
        let r = model.temporal_residual(*w, *t).unwrap();
        for (si, ri) in slot.iter_mut().zip(r) {
            *si += 2.0 * l2_lambda * ri;
        }
    }
    for ((w, t, s), slot) in grad.source.iter_mut() {
        let q = model.source_residual(*w, *t, *s).unwrap();
        for (si, qi) in slot.iter_mut().zip(q) {
            *si += 2.0 * l2_lambda * qi;
        }
    }
    Ok(grad)
}

// ---------------------------------------------------------------------------
// Negative sampling
// ---------------------------------------------------------------------------

/// Alias-method sampler over the unigram distribution raised to the noise
/// exponent. Construction is deterministic.
pub struct NoiseTable {
    accept: Vec<f64>,
    alias: Vec<u32>,
}

impl NoiseTable {
    pub fn new(counts: &[u64], exponent: f64) -> Self {
        let n = counts.len();
        assert!(n > 0, "noise table over empty vocabulary");
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(exponent)).collect();
        let total: f64 = weights.iter().sum();
        let scale = n as f64 / if total > 0.0 { total } else { 1.0 };
        let mut accept: Vec<f64> = weights.iter().map(|w| w * scale).collect();
        let mut alias: Vec<u32> = (0..n as u32).collect();
        let mut small: Vec<u32> = Vec::new();
        let mut large: Vec<u32> = Vec::new();
        for (i, &p) in accept.iter().enumerate() {
            if p < 1.0 {
                small.push(i as u32);
            } else {
                large.push(i as u32);
            }
        }
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            alias[s as usize] = l;
            accept[l as usize] -= 1.0 - accept[s as usize];
            if accept[l as usize] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        NoiseTable { accept, alias }
    }

    #[inline]
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> u32 {
        let bits = rng.next_u64();
        let n = self.accept.len();
        let idx = ((bits >> 32) as usize) % n;
        let frac = (bits & 0xffff_ffff) as f64 / 4_294_967_296.0;
        if frac < self.accept[idx] {
            idx as u32
        } else {
            self.alias[idx]
        }
    }

    /// Sample a negative, avoiding the positive context when possible.
    #[inline]
    fn sample_negative(&self, rng: &mut ChaCha8Rng, positive: u32) -> u32 {
        for _ in 0..8 {
            let s = self.sample(rng);
            if s != positive {
                return s;
            }
        }
        self.sample(rng)
    }
}

// ---------------------------------------------------------------------------
// SGD driver
// ---------------------------------------------------------------------------

/// Shared view of the parameter tables as relaxed atomics.
///
/// Both execution modes run on this view: relaxed load/store compiles to
/// plain moves, and in hogwild mode it makes the unsynchronized sharing
/// well-defined (the contract tolerates lost updates and torn vectors at the
/// value level, never undefined behavior).
struct View<'a> {
    dims: usize,
    base: &'a [AtomicU64],
    output: &'a [AtomicU64],
    temporal: &'a [AtomicU64],
    source: &'a [AtomicU64],
}

/// Reinterpret an f64 slice as atomics. `AtomicU64` has u64 size/alignment,
/// which matches f64 on every supported target.
fn as_atomics(xs: &[f64]) -> &[AtomicU64] {
    unsafe { std::slice::from_raw_parts(xs.as_ptr() as *const AtomicU64, xs.len()) }
}

#[inline(always)]
fn load(s: &[AtomicU64], i: usize) -> f64 {
    f64::from_bits(s[i].load(Relaxed))
}

#[inline(always)]
fn store(s: &[AtomicU64], i: usize, v: f64) {
    s[i].store(v.to_bits(), Relaxed)
}

struct Scratch {
    u: Vec<f64>,
    g_u: Vec<f64>,
    b: Vec<f64>,
}

impl Scratch {
    fn new(dims: usize) -> Self {
        Scratch {
            u: vec![0.0; dims],
            g_u: vec![0.0; dims],
            b: vec![0.0; dims],
        }
    }
}

struct PairOutcome {
    /// Sampled loss, when requested: data term + l2 of touched residuals.
    loss: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn sgd_pair(
    view: &View,
    base_off: usize,
    t_off: Option<usize>,
    q_off: Option<usize>,
    context: u32,
    negatives_rng: &mut ChaCha8Rng,
    noise: &NoiseTable,
    n_negatives: usize,
    lr: f64,
    l2_lambda: f64,
    freeze: FreezeMask,
    scratch: &mut Scratch,
    want_loss: bool,
) -> PairOutcome {
    let d = view.dims;

    for i in 0..d {
        scratch.u[i] = load(view.base, base_off + i);
    }
    if let Some(off) = t_off {
        for i in 0..d {
            scratch.u[i] += load(view.temporal, off + i);
        }
    }
    if let Some(off) = q_off {
        for i in 0..d {
            scratch.u[i] += load(view.source, off + i);
        }
    }
    scratch.g_u.fill(0.0);

    let mut pair_loss = 0.0;
    let mut one_target = |target: u32, label: f64, scratch: &mut Scratch, pair_loss: &mut f64| {
        let off = target as usize * d;
        for i in 0..d {
            scratch.b[i] = load(view.output, off + i);
        }
        let x = dot(&scratch.b, &scratch.u);
        if want_loss {
            *pair_loss -= if label == 1.0 {
                log_sigmoid(x)
            } else {
                log_sigmoid(-x)
            };
        }
        let g = sigmoid(x) - label;
        for i in 0..d {
            scratch.g_u[i] += g * scratch.b[i];
        }
        if !freeze.output {
            let step = lr * g;
            for i in 0..d {
                store(view.output, off + i, scratch.b[i] - step * scratch.u[i]);
            }
        }
    };

    one_target(context, 1.0, scratch, &mut pair_loss);
    for _ in 0..n_negatives {
        let n = noise.sample_negative(negatives_rng, context);
        one_target(n, 0.0, scratch, &mut pair_loss);
    }

    if !freeze.base {
        for i in 0..d {
            let v = load(view.base, base_off + i);
            store(view.base, base_off + i, v - lr * scratch.g_u[i]);
        }
    }
    let decay = 2.0 * l2_lambda;
    if let Some(off) = t_off {
        if want_loss {
            for i in 0..d {
                let r = load(view.temporal, off + i);
                pair_loss += l2_lambda * r * r;
            }
        }
        if !freeze.temporal {
            for i in 0..d {
                let r = load(view.temporal, off + i);
                store(view.temporal, off + i, r - lr * (scratch.g_u[i] + decay * r));
            }
        }
    }
    if let Some(off) = q_off {
        if want_loss {
            for i in 0..d {
                let q = load(view.source, off + i);
                pair_loss += l2_lambda * q * q;
            }
        }
        if !freeze.source {
            for i in 0..d {
                let q = load(view.source, off + i);
                store(view.source, off + i, q - lr * (scratch.g_u[i] + decay * q));
            }
        }
    }

    PairOutcome {
        loss: want_loss.then_some(pair_loss),
    }
}

/// Loss is sampled every `LOSS_STRIDE` pairs to keep reporting cheap.
const LOSS_STRIDE: u64 = 64;

fn window_pairs(len: usize, window: usize) -> u64 {
    let mut total = 0u64;
    for j in 0..len {
        total += (j.min(window) + (len - 1 - j).min(window)) as u64;
    }
    total
}

/// Train `model` on `corpus` using the hyperparameters recorded in the
/// model. `threads == 1` is the deterministic mode.
pub fn train(
    corpus: &EncodedCorpus,
    model: &mut EmbeddingModel,
    threads: usize,
    freeze: FreezeMask,
) -> Result<TrainReport> {
    model.check_matches(
        corpus.vocab.content_hash(),
        corpus.n_bins(),
        corpus.n_sources(),
    )?;
    let hyper = model.hyper.clone();
    hyper.validate()?;
    let threads = threads.max(1);

    let counts: Vec<u64> = (0..corpus.vocab.len() as u32)
        .map(|w| corpus.vocab.total(w))
        .collect();
    let noise = NoiseTable::new(&counts, hyper.noise_exponent);

    let per_doc_pairs: Vec<u64> = corpus
        .docs
        .iter()
        .map(|doc| window_pairs(doc.tokens.len(), hyper.window))
        .collect();
    let total_pairs: u64 = per_doc_pairs.iter().sum::<u64>() * hyper.epochs as u64;
    if total_pairs == 0 {
        return Ok(TrainReport {
            pairs_processed: 0,
            final_loss: 0.0,
            epochs: hyper.epochs,
        });
    }

    let with_source = model.kind == ModelKind::SourceConditional;
    let view = View {
        dims: model.dims,
        base: as_atomics(&model.base),
        output: as_atomics(&model.output),
        temporal: as_atomics(&model.temporal),
        source: as_atomics(&model.source_res),
    };
    let processed = AtomicU64::new(0);
    let loss_sum = AtomicU64::new(0f64.to_bits());
    let loss_n = AtomicU64::new(0);

    let lr_at = |done: u64| -> f64 {
        let frac = done as f64 / total_pairs as f64;
        (hyper.learning_rate * (1.0 - frac)).max(hyper.learning_rate_floor)
    };

    let run_chunk = |doc_ids: &[usize], mut neg_rng: ChaCha8Rng, epoch: usize, exact_lr: bool| {
        let dims = view.dims;
        let mut scratch = Scratch::new(dims);
        let t_stride = model.n_bins as usize;
        let s_stride = model.n_sources as usize;
        let track_loss = epoch + 1 == hyper.epochs;
        let mut local_done = 0u64;
        let mut chunk_loss = 0.0;
        let mut chunk_loss_n = 0u64;
        for &di in doc_ids {
            let doc = &corpus.docs[di];
            let n = doc.tokens.len();
            let doc_lr = if exact_lr {
                0.0 // unused; recomputed per pair below
            } else {
                lr_at(processed.load(Relaxed))
            };
            for j in 0..n {
                let center = doc.tokens[j];
                let base_off = center as usize * dims;
                let t_off = model
                    .temporal_slot(center, doc.bin)
                    .map(|slot| slot * dims);
                let q_off = if with_source {
                    model
                        .source_slot(center, doc.bin, doc.source)
                        .map(|slot| slot * dims)
                } else {
                    None
                };
                let lo = j.saturating_sub(hyper.window);
                let hi = (j + hyper.window).min(n - 1);
                for k in lo..=hi {
                    if k == j {
                        continue;
                    }
                    let lr = if exact_lr {
                        lr_at(processed.load(Relaxed) + local_done)
                    } else {
                        doc_lr
                    };
                    let want_loss = track_loss
                        && (processed.load(Relaxed) + local_done) % LOSS_STRIDE == 0;
                    let outcome = sgd_pair(
                        &view,
                        base_off,
                        t_off,
                        q_off,
                        doc.tokens[k],
                        &mut neg_rng,
                        &noise,
                        hyper.negatives,
                        lr,
                        hyper.l2_lambda,
                        freeze,
                        &mut scratch,
                        want_loss,
                    );
                    if let Some(l) = outcome.loss {
                        chunk_loss += l;
                        chunk_loss_n += 1;
                    }
                    local_done += 1;
                }
            }
            if !exact_lr {
                // Hogwild mode advances the shared counter per document.
                processed.fetch_add(window_pairs(n, hyper.window), Relaxed);
                local_done = 0;
            }
        }
        if exact_lr {
            processed.fetch_add(local_done, Relaxed);
        }
        if chunk_loss_n > 0 {
            // f64 accumulation via compare-and-swap; contention is per chunk.
            let mut cur = loss_sum.load(Relaxed);
            loop {
                let next = (f64::from_bits(cur) + chunk_loss).to_bits();
                match loss_sum.compare_exchange(cur, next, Relaxed, Relaxed) {
                    Ok(_) => break,
                    Err(seen) => cur = seen,
                }
            }
            loss_n.fetch_add(chunk_loss_n, Relaxed);
        }
    };

    for epoch in 0..hyper.epochs {
        let mut order: Vec<usize> = (0..corpus.docs.len()).collect();
        let mut shuffle_rng = rng::stream(hyper.seed, rng::mix(tags::EPOCH_SHUFFLE, epoch as u64));
        order.shuffle(&mut shuffle_rng);

        if threads == 1 {
            let neg_rng = rng::stream(hyper.seed, rng::mix(tags::NEGATIVES, epoch as u64));
            run_chunk(&order, neg_rng, epoch, true);
        } else {
            let chunk_size = order.len().div_ceil(threads);
            std::thread::scope(|scope| {
                for (worker, chunk) in order.chunks(chunk_size).enumerate() {
                    let neg_rng = rng::stream(
                        hyper.seed,
                        rng::mix(tags::NEGATIVES, (epoch * 8192 + worker) as u64),
                    );
                    let run = &run_chunk;
                    scope.spawn(move || run(chunk, neg_rng, epoch, false));
                }
            });
        }

        if !model.all_finite() {
            return Err(Error::Diverged(format!(
                "non-finite parameter after epoch {epoch}; reduce the learning rate"
            )));
        }
    }

    let n = loss_n.load(Relaxed);
    Ok(TrainReport {
        pairs_processed: total_pairs,
        final_loss: if n > 0 {
            f64::from_bits(loss_sum.load(Relaxed)) / n as f64
        } else {
            0.0
        },
        epochs: hyper.epochs,
    })
}
