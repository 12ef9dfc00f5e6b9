//! The decomposed embedding model.
//!
//! Input vectors decompose additively: a time- and source-invariant base,
//! plus a per-bin temporal residual, plus (in the source-conditional variant)
//! a per-(bin, source) residual. Output vectors are global. Residual slots
//! exist only for `(word, bin)` / `(word, bin, source)` cells with at least
//! one training occurrence; absent cells are structurally zero, which is what
//! makes a source that never publishes in a bin fall back to the global
//! vector for that bin.

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::rng::{self, tags};
use crate::vecmath::cosine;
use rand::Rng;

pub const SLOT_NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Temporal,
    SourceConditional,
}

impl ModelKind {
    pub fn as_u8(self) -> u8 {
        match self {
            ModelKind::Temporal => 0,
            ModelKind::SourceConditional => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(ModelKind::Temporal),
            1 => Some(ModelKind::SourceConditional),
            _ => None,
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::Temporal => write!(f, "temporal"),
            ModelKind::SourceConditional => write!(f, "source-conditional"),
        }
    }
}

/// Training hyperparameters; defaults follow the published configuration
/// where one is stated and common skipgram practice otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub dims: usize,
    pub window: usize,
    pub l2_lambda: f64,
    pub negatives: usize,
    pub noise_exponent: f64,
    pub learning_rate: f64,
    pub learning_rate_floor: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            dims: 100,
            window: 5,
            l2_lambda: 1e-4,
            negatives: 5,
            noise_exponent: 0.75,
            learning_rate: 0.025,
            learning_rate_floor: 1e-4,
            epochs: 5,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.dims == 0 {
            return Err(Error::Config("dims must be positive".into()));
        }
        if self.window == 0 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        if self.l2_lambda < 0.0 || !self.l2_lambda.is_finite() {
            return Err(Error::Config("l2_lambda must be nonnegative".into()));
        }
        if self.negatives == 0 {
            return Err(Error::Config("negatives must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Which residual cells may hold nonzero values.
#[derive(Debug, Clone)]
pub struct Occupancy {
    pub vocab_len: usize,
    pub n_bins: u16,
    pub n_sources: u16,
    /// `(word, bin)` cells with nonzero count, `w * T + t` -> occupied.
    pub temporal: Vec<bool>,
    /// `(word, bin, source)` cells, `w * T * S + t * S + s` -> occupied.
    pub source: Vec<bool>,
}

impl Occupancy {
    /// Occupancy derived from corpus counts: exactly the cells that will be
    /// touched by training.
    pub fn from_vocabulary(vocab: &Vocabulary) -> Self {
        let v = vocab.len();
        let t_n = vocab.n_bins as usize;
        let s_n = vocab.n_sources as usize;
        let mut temporal = vec![false; v * t_n];
        let mut source = vec![false; v * t_n * s_n];
        for w in 0..v as u32 {
            for t in 0..t_n as u16 {
                let mut any = false;
                for s in 0..s_n as u16 {
                    if vocab.cell_count(w, s, t) > 0 {
                        any = true;
                        source[w as usize * t_n * s_n + t as usize * s_n + s as usize] = true;
                    }
                }
                if any {
                    temporal[w as usize * t_n + t as usize] = true;
                }
            }
        }
        Occupancy {
            vocab_len: v,
            n_bins: t_n as u16,
            n_sources: s_n as u16,
            temporal,
            source,
        }
    }

    /// Every cell occupied; used by toy models in tests.
    pub fn dense(vocab_len: usize, n_bins: u16, n_sources: u16) -> Self {
        Occupancy {
            vocab_len,
            n_bins,
            n_sources,
            temporal: vec![true; vocab_len * n_bins as usize],
            source: vec![true; vocab_len * n_bins as usize * n_sources as usize],
        }
    }
}

/// Decomposed skipgram embedding tables.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub kind: ModelKind,
    pub dims: usize,
    pub n_bins: u16,
    pub n_sources: u16,
    pub vocab_len: usize,
    pub vocab_hash: [u8; 32],
    pub hyper: Hyperparams,
    pub(crate) base: Vec<f64>,
    pub(crate) output: Vec<f64>,
    /// `(w, t)` -> slot in `temporal`, or `SLOT_NONE`.
    pub(crate) temporal_index: Vec<u32>,
    pub(crate) temporal: Vec<f64>,
    /// `(w, t, s)` -> slot in `source_res`; empty for temporal models.
    pub(crate) source_index: Vec<u32>,
    pub(crate) source_res: Vec<f64>,
}

impl EmbeddingModel {
    /// Initialize a model: base and output tables uniform in
    /// `[-0.5/dims, +0.5/dims]` from the seed, residuals exactly zero.
    pub fn init(
        kind: ModelKind,
        hyper: &Hyperparams,
        occupancy: &Occupancy,
        vocab_hash: [u8; 32],
    ) -> Result<Self> {
        hyper.validate()?;
        let dims = hyper.dims;
        let v = occupancy.vocab_len;
        if v == 0 {
            return Err(Error::EmptyVocabulary);
        }

        let mut rng = rng::stream(hyper.seed, tags::INIT);
        let half = 0.5 / dims as f64;
        let mut fill = |n: usize| -> Vec<f64> {
            (0..n * dims).map(|_| rng.gen_range(-half..=half)).collect()
        };
        let base = fill(v);
        let output = fill(v);

        let mut temporal_index = vec![SLOT_NONE; v * occupancy.n_bins as usize];
        let mut n_slots = 0u32;
        for (i, &occ) in occupancy.temporal.iter().enumerate() {
            if occ {
                temporal_index[i] = n_slots;
                n_slots += 1;
            }
        }
        let temporal = vec![0.0; n_slots as usize * dims];

        let (source_index, source_res) = match kind {
            ModelKind::Temporal => (Vec::new(), Vec::new()),
            ModelKind::SourceConditional => {
                let mut index = vec![SLOT_NONE; v * occupancy.n_bins as usize * occupancy.n_sources as usize];
                let mut n = 0u32;
                for (i, &occ) in occupancy.source.iter().enumerate() {
                    if occ {
                        index[i] = n;
                        n += 1;
                    }
                }
                (index, vec![0.0; n as usize * dims])
            }
        };

        Ok(EmbeddingModel {
            kind,
            dims,
            n_bins: occupancy.n_bins,
            n_sources: occupancy.n_sources,
            vocab_len: v,
            vocab_hash,
            hyper: hyper.clone(),
            base,
            output,
            temporal_index,
            temporal,
            source_index,
            source_res,
        })
    }

    pub fn base(&self, w: u32) -> &[f64] {
        &self.base[w as usize * self.dims..(w as usize + 1) * self.dims]
    }

    pub fn output(&self, w: u32) -> &[f64] {
        &self.output[w as usize * self.dims..(w as usize + 1) * self.dims]
    }

    pub(crate) fn temporal_slot(&self, w: u32, t: u16) -> Option<usize> {
        let idx = self.temporal_index[w as usize * self.n_bins as usize + t as usize];
        (idx != SLOT_NONE).then_some(idx as usize)
    }

    pub(crate) fn source_slot(&self, w: u32, t: u16, s: u16) -> Option<usize> {
        if self.source_index.is_empty() {
            return None;
        }
        let stride = self.n_bins as usize * self.n_sources as usize;
        let idx = self.source_index
            [w as usize * stride + t as usize * self.n_sources as usize + s as usize];
        (idx != SLOT_NONE).then_some(idx as usize)
    }

    /// Temporal residual for `(w, t)`; `None` when the cell is structurally
    /// zero.
    pub fn temporal_residual(&self, w: u32, t: u16) -> Option<&[f64]> {
        self.temporal_slot(w, t)
            .map(|slot| &self.temporal[slot * self.dims..(slot + 1) * self.dims])
    }

    /// Source residual for `(w, t, s)`; `None` when structurally zero.
    pub fn source_residual(&self, w: u32, t: u16, s: u16) -> Option<&[f64]> {
        self.source_slot(w, t, s)
            .map(|slot| &self.source_res[slot * self.dims..(slot + 1) * self.dims])
    }

    /// Compose the input vector for `(w, t[, s])` into `out`.
    ///
    /// Temporal models reject a source argument. For source-conditional
    /// models without `s` the result is the bin-level vector (base plus
    /// temporal residual), i.e. the global average at time `t`.
    pub fn compose_into(&self, w: u32, t: u16, s: Option<u16>, out: &mut [f64]) -> Result<()> {
        debug_assert_eq!(out.len(), self.dims);
        if w as usize >= self.vocab_len || t >= self.n_bins {
            return Err(Error::ModelMismatch(format!(
                "compose out of range: word {w}, bin {t}"
            )));
        }
        if self.kind == ModelKind::Temporal && s.is_some() {
            return Err(Error::ModelMismatch(
                "source given to a temporal model".into(),
            ));
        }
        if let Some(s) = s {
            if s >= self.n_sources {
                return Err(Error::ModelMismatch(format!("source {s} out of range")));
            }
        }
        out.copy_from_slice(self.base(w));
        if let Some(r) = self.temporal_residual(w, t) {
            for (o, x) in out.iter_mut().zip(r) {
                *o += x;
            }
        }
        if let Some(s) = s {
            if let Some(q) = self.source_residual(w, t, s) {
                for (o, x) in out.iter_mut().zip(q) {
                    *o += x;
                }
            }
        }
        Ok(())
    }

    pub fn compose(&self, w: u32, t: u16, s: Option<u16>) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dims];
        self.compose_into(w, t, s, &mut out)?;
        Ok(out)
    }

    /// Top-`k` vocabulary words by cosine similarity to `(w, t)`, excluding
    /// `w` itself; ties break toward the smaller index.
    pub fn nearest_neighbors(&self, w: u32, t: u16, k: usize) -> Result<Vec<(u32, f64)>> {
        let query = self.compose(w, t, None)?;
        let mut buf = vec![0.0; self.dims];
        let mut scored: Vec<(u32, f64)> = Vec::with_capacity(self.vocab_len - 1);
        for v in 0..self.vocab_len as u32 {
            if v == w {
                continue;
            }
            self.compose_into(v, t, None, &mut buf)?;
            scored.push((v, cosine(&query, &buf)));
        }
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(scored)
    }

    /// Squared Euclidean norm of all residual tables; the quantity the l2
    /// penalty shrinks.
    pub fn residual_norm_sq(&self) -> f64 {
        let t: f64 = self.temporal.iter().map(|x| x * x).sum();
        let s: f64 = self.source_res.iter().map(|x| x * x).sum();
        t + s
    }

    /// Zero the temporal residual table.
    pub fn reset_temporal(&mut self) {
        self.temporal.fill(0.0);
    }

    /// Zero the source residual table, optionally replacing its occupancy
    /// (slots must match a corpus before retraining on it).
    pub fn reset_source(&mut self, occupancy: Option<&Occupancy>) {
        match occupancy {
            None => self.source_res.fill(0.0),
            Some(occ) => {
                assert_eq!(occ.vocab_len, self.vocab_len);
                assert_eq!(occ.n_bins, self.n_bins);
                assert_eq!(occ.n_sources, self.n_sources);
                let mut index = vec![SLOT_NONE; occ.source.len()];
                let mut n = 0u32;
                for (i, &o) in occ.source.iter().enumerate() {
                    if o {
                        index[i] = n;
                        n += 1;
                    }
                }
                self.source_index = index;
                self.source_res = vec![0.0; n as usize * self.dims];
            }
        }
    }

    /// True when every parameter is finite.
    pub fn all_finite(&self) -> bool {
        self.base.iter().all(|x| x.is_finite())
            && self.output.iter().all(|x| x.is_finite())
            && self.temporal.iter().all(|x| x.is_finite())
            && self.source_res.iter().all(|x| x.is_finite())
    }

    /// Reject use against a corpus the model was not trained for.
    pub fn check_matches(&self, vocab_hash: [u8; 32], n_bins: u16, n_sources: u16) -> Result<()> {
        if self.vocab_hash != vocab_hash {
            return Err(Error::ModelMismatch(
                "vocabulary hash differs from the corpus".into(),
            ));
        }
        if self.n_bins != n_bins || self.n_sources != n_sources {
            return Err(Error::ModelMismatch(format!(
                "model shape ({} bins, {} sources) differs from corpus ({n_bins} bins, {n_sources} sources)",
                self.n_bins, self.n_sources
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_hyper(dims: usize, seed: u64) -> Hyperparams {
        Hyperparams {
            dims,
            seed,
            ..Hyperparams::default()
        }
    }

    fn toy_model(kind: ModelKind, seed: u64) -> EmbeddingModel {
        let occ = Occupancy::dense(5, 3, 2);
        EmbeddingModel::init(kind, &toy_hyper(4, seed), &occ, [0; 32]).unwrap()
    }

    #[test]
    fn residuals_start_exactly_zero() {
        let m = toy_model(ModelKind::SourceConditional, 1);
        assert!(m.temporal.iter().all(|&x| x == 0.0));
        assert!(m.source_res.iter().all(|&x| x == 0.0));
        assert_eq!(m.residual_norm_sq(), 0.0);
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let a = toy_model(ModelKind::SourceConditional, 7);
        let b = toy_model(ModelKind::SourceConditional, 7);
        assert_eq!(a, b);
        let c = toy_model(ModelKind::SourceConditional, 8);
        assert_ne!(a, c);
    }

    #[test]
    fn init_respects_range() {
        let m = toy_model(ModelKind::Temporal, 3);
        let half = 0.5 / 4.0;
        assert!(m.base.iter().chain(&m.output).all(|&x| (-half..=half).contains(&x)));
    }

    #[test]
    fn compose_adds_components() {
        let mut m = toy_model(ModelKind::SourceConditional, 1);
        let w = 2u32;
        m.base[w as usize * 4..][..4].copy_from_slice(&[1.0, 0.0, 0.5, -1.0]);
        let slot = m.temporal_slot(w, 1).unwrap();
        m.temporal[slot * 4..][..4].copy_from_slice(&[0.0, 1.0, 0.25, 1.0]);
        let qslot = m.source_slot(w, 1, 0).unwrap();
        m.source_res[qslot * 4..][..4].copy_from_slice(&[1.0, 1.0, 0.25, 2.0]);

        assert_eq!(m.compose(w, 1, None).unwrap(), vec![1.0, 1.0, 0.75, 0.0]);
        assert_eq!(m.compose(w, 1, Some(0)).unwrap(), vec![2.0, 2.0, 1.0, 2.0]);
        // An unoccupied-source fallback equals the bin-level vector.
        assert_eq!(
            m.compose(w, 0, Some(1)).unwrap(),
            m.compose(w, 0, None).unwrap()
        );
    }

    #[test]
    fn zero_residuals_compose_to_base() {
        let m = toy_model(ModelKind::SourceConditional, 5);
        for w in 0..5u32 {
            assert_eq!(m.compose(w, 2, Some(1)).unwrap(), m.base(w));
        }
    }

    #[test]
    fn temporal_model_rejects_source_argument() {
        let m = toy_model(ModelKind::Temporal, 1);
        assert!(matches!(
            m.compose(0, 0, Some(0)),
            Err(Error::ModelMismatch(_))
        ));
    }

    #[test]
    fn sparse_occupancy_gives_structural_zeros() {
        let mut occ = Occupancy::dense(3, 2, 2);
        occ.temporal[0 * 2 + 1] = false; // word 0, bin 1
        occ.source[0] = false; // word 0, bin 0, source 0
        let m = EmbeddingModel::init(
            ModelKind::SourceConditional,
            &toy_hyper(4, 2),
            &occ,
            [0; 32],
        )
        .unwrap();
        assert!(m.temporal_residual(0, 1).is_none());
        assert!(m.source_residual(0, 0, 0).is_none());
        assert!(m.source_residual(0, 0, 1).is_some());
    }

    #[test]
    fn nearest_neighbors_identical_vector_ranks_first() {
        let mut m = toy_model(ModelKind::Temporal, 1);
        let target = [0.3, -0.2, 0.9, 0.1];
        m.base[1 * 4..][..4].copy_from_slice(&target);
        m.base[3 * 4..][..4].copy_from_slice(&target);
        let nn = m.nearest_neighbors(1, 0, 2).unwrap();
        assert_eq!(nn[0].0, 3);
        assert!((nn[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nearest_neighbors_orthogonal_ties_break_by_index() {
        let occ = Occupancy::dense(4, 1, 1);
        let mut m =
            EmbeddingModel::init(ModelKind::Temporal, &toy_hyper(4, 1), &occ, [0; 32]).unwrap();
        m.base.fill(0.0);
        for w in 0..4usize {
            m.base[w * 4 + w] = 1.0;
        }
        let nn = m.nearest_neighbors(0, 0, 3).unwrap();
        assert_eq!(nn.iter().map(|&(w, _)| w).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert!(nn.iter().all(|&(_, c)| c == 0.0));
    }

    #[test]
    fn nearest_neighbors_matches_exhaustive_sort() {
        let m = toy_model(ModelKind::Temporal, 11);
        let query = m.compose(2, 1, None).unwrap();
        let mut oracle: Vec<(u32, f64)> = (0..5u32)
            .filter(|&v| v != 2)
            .map(|v| (v, cosine(&query, &m.compose(v, 1, None).unwrap())))
            .collect();
        oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        oracle.truncate(3);
        assert_eq!(m.nearest_neighbors(2, 1, 3).unwrap(), oracle);
    }
}
