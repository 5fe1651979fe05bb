//! Embedding → bidirectional LSTM → optional ReLU dense → softmax classifier
//! with hand-written backpropagation through time.
//!
//! All parameters live in one flat `Vec<f64>`; [`Layout`] maps each tensor
//! to a range of it. The embedding table comes first so that gradients can
//! keep it sparse.

use std::collections::BTreeMap;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Squashing function applied to the LSTM candidate and to the cell output.
/// Gates always use the logistic sigmoid.
#[derive(Default, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellActivation {
    Sigmoid,
    #[default]
    Tanh,
}

impl CellActivation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            CellActivation::Sigmoid => sigmoid(x),
            CellActivation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's output `y`.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            CellActivation::Sigmoid => y * (1.0 - y),
            CellActivation::Tanh => 1.0 - y * y,
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    BinaryCrossEntropy,
    CategoricalCrossEntropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceClassifierConfig {
    pub vocab_size: usize,
    pub sequence_length: usize,
    pub embedding_dim: usize,
    /// Units per direction; the layer output is twice this.
    pub recurrent_units: usize,
    pub dense_units: Option<usize>,
    pub output_classes: usize,
    pub cell_activation: CellActivation,
}

impl SequenceClassifierConfig {
    /// First-stage binary classifier: 30-step input, 30-dim embedding,
    /// 30 recurrent units, 30 ReLU dense units, 2-way softmax.
    pub fn first_stage(vocab_size: usize) -> Self {
        SequenceClassifierConfig {
            vocab_size,
            sequence_length: crate::vectorizer::SEQUENCE_LENGTH,
            embedding_dim: 30,
            recurrent_units: 30,
            dense_units: Some(30),
            output_classes: 2,
            cell_activation: CellActivation::Tanh,
        }
    }

    /// Second-stage stacked-ensemble member: 100 recurrent units, no dense
    /// layer, 3-way softmax.
    pub fn second_stage(vocab_size: usize, sequence_length: usize) -> Self {
        SequenceClassifierConfig {
            vocab_size,
            sequence_length,
            embedding_dim: 30,
            recurrent_units: 100,
            dense_units: None,
            output_classes: 3,
            cell_activation: CellActivation::Tanh,
        }
    }

    pub fn loss(&self) -> Loss {
        if self.output_classes == 2 {
            Loss::BinaryCrossEntropy
        } else {
            Loss::CategoricalCrossEntropy
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("vocab_size", self.vocab_size),
            ("sequence_length", self.sequence_length),
            ("embedding_dim", self.embedding_dim),
            ("recurrent_units", self.recurrent_units),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name}: must be positive")));
            }
        }
        if self.dense_units == Some(0) {
            return Err(Error::Config("dense_units: must be positive when present".into()));
        }
        if !(2..=3).contains(&self.output_classes) {
            return Err(Error::Config(format!(
                "output_classes: must be 2 or 3, got {}",
                self.output_classes
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct LstmLayout {
    w: Range<usize>,
    u: Range<usize>,
    b: Range<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct Layout {
    emb: Range<usize>,
    lstm: [LstmLayout; 2],
    dense: Option<(Range<usize>, Range<usize>)>,
    out_w: Range<usize>,
    out_b: Range<usize>,
    total: usize,
}

impl Layout {
    fn new(c: &SequenceClassifierConfig) -> Self {
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let (e, h) = (c.embedding_dim, c.recurrent_units);
        let emb = take(c.vocab_size * e);
        let mut dir = || LstmLayout {
            w: take(4 * h * e),
            u: take(4 * h * h),
            b: take(4 * h),
        };
        let lstm = [dir(), dir()];
        let dense = c.dense_units.map(|d| (take(d * 2 * h), take(d)));
        let head_in = c.dense_units.unwrap_or(2 * h);
        let out_w = take(c.output_classes * head_in);
        let out_b = take(c.output_classes);
        Layout {
            emb,
            lstm,
            dense,
            out_w,
            out_b,
            total: at,
        }
    }
}

/// Gradient of the summed loss. Embedding rows are kept sparse; everything
/// after the embedding table is dense and indexed from the end of it.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub(crate) embedding: BTreeMap<u32, Vec<f64>>,
    pub(crate) dense: Vec<f64>,
}

impl Gradients {
    fn zeros(layout: &Layout) -> Self {
        Gradients {
            embedding: BTreeMap::new(),
            dense: vec![0.0; layout.total - layout.emb.len()],
        }
    }

    pub(crate) fn add(&mut self, other: &Gradients) {
        for (a, b) in self.dense.iter_mut().zip(&other.dense) {
            *a += b;
        }
        for (tok, row) in &other.embedding {
            match self.embedding.get_mut(tok) {
                Some(acc) => acc.iter_mut().zip(row).for_each(|(a, b)| *a += b),
                None => {
                    self.embedding.insert(*tok, row.clone());
                }
            }
        }
    }

    /// Expands to a vector aligned with [`SequenceClassifier::params`].
    pub fn to_flat(&self, model: &SequenceClassifier) -> Vec<f64> {
        let e = model.config.embedding_dim;
        let mut flat = vec![0.0; model.layout.total];
        for (&tok, row) in &self.embedding {
            let start = tok as usize * e;
            flat[start..start + e].copy_from_slice(row);
        }
        flat[model.layout.emb.len()..].copy_from_slice(&self.dense);
        flat
    }
}

struct DirectionCache {
    tokens: Vec<u32>,
    /// Post-activation gates per step, `[i | f | g | o]` blocks of `h`.
    gates: Vec<f64>,
    cell: Vec<f64>,
    cell_act: Vec<f64>,
    hidden: Vec<f64>,
}

struct ForwardCache {
    dirs: [DirectionCache; 2],
    concat: Vec<f64>,
    dense_out: Vec<f64>,
    probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ClassifierRepr", into = "ClassifierRepr")]
pub struct SequenceClassifier {
    config: SequenceClassifierConfig,
    params: Vec<f64>,
    layout: Layout,
}

#[derive(Serialize, Deserialize)]
struct ClassifierRepr {
    config: SequenceClassifierConfig,
    params: Vec<f64>,
}

impl TryFrom<ClassifierRepr> for SequenceClassifier {
    type Error = Error;

    fn try_from(r: ClassifierRepr) -> Result<Self> {
        SequenceClassifier::from_params(r.config, r.params)
    }
}

impl From<SequenceClassifier> for ClassifierRepr {
    fn from(m: SequenceClassifier) -> Self {
        ClassifierRepr {
            config: m.config,
            params: m.params,
        }
    }
}

impl PartialEq for Layout {
    fn eq(&self, other: &Self) -> bool {
        self.total == other.total
    }
}

impl SequenceClassifier {
    /// Seeded initialization: embeddings uniform in [-0.05, 0.05], recurrent
    /// and dense weights uniform in ±sqrt(3 / fan_in), biases zero.
    pub fn new(config: SequenceClassifierConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        let mut params = vec![0.0; layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |r: &Range<usize>, limit: f64| {
            for p in &mut params[r.clone()] {
                *p = rng.random_range(-limit..=limit);
            }
        };
        let (e, h) = (config.embedding_dim as f64, config.recurrent_units as f64);
        fill(&layout.emb, 0.05);
        for dir in &layout.lstm {
            fill(&dir.w, (3.0 / e).sqrt());
            fill(&dir.u, (3.0 / h).sqrt());
        }
        if let Some((w, _)) = &layout.dense {
            fill(w, (3.0 / (2.0 * h)).sqrt());
        }
        let head_in = config.dense_units.unwrap_or(2 * config.recurrent_units) as f64;
        fill(&layout.out_w, (3.0 / head_in).sqrt());
        Ok(SequenceClassifier {
            config,
            params,
            layout,
        })
    }

    /// Rebuilds a classifier from a config and a flat parameter vector.
    pub fn from_params(config: SequenceClassifierConfig, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        if params.len() != layout.total {
            return Err(Error::Input(format!(
                "parameter vector has {} values, configuration needs {}",
                params.len(),
                layout.total
            )));
        }
        Ok(SequenceClassifier {
            config,
            params,
            layout,
        })
    }

    pub fn config(&self) -> &SequenceClassifierConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn check_input(&self, tokens: &[u32]) -> Result<()> {
        if tokens.len() != self.config.sequence_length {
            return Err(Error::Input(format!(
                "sequence has {} elements, model expects {}",
                tokens.len(),
                self.config.sequence_length
            )));
        }
        if let Some(&bad) = tokens.iter().find(|&&t| t as usize >= self.config.vocab_size) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                vocab_size: self.config.vocab_size,
            });
        }
        Ok(())
    }

    /// Class probabilities for one encoded sequence.
    pub fn forward(&self, tokens: &[u32]) -> Result<Vec<f64>> {
        self.check_input(tokens)?;
        Ok(self.run_forward(tokens).probs)
    }

    /// Loss for one sequence and its gold class index.
    pub fn loss(&self, tokens: &[u32], target: usize) -> Result<f64> {
        self.check_input(tokens)?;
        self.check_target(target)?;
        Ok(self.loss_from_probs(&self.run_forward(tokens).probs, target))
    }

    /// Probabilities and loss from a single forward pass.
    pub fn forward_loss(&self, tokens: &[u32], target: usize) -> Result<(Vec<f64>, f64)> {
        self.check_input(tokens)?;
        self.check_target(target)?;
        let probs = self.run_forward(tokens).probs;
        let loss = self.loss_from_probs(&probs, target);
        Ok((probs, loss))
    }

    fn check_target(&self, target: usize) -> Result<()> {
        if target >= self.config.output_classes {
            return Err(Error::Input(format!(
                "target class {target} out of range for {} outputs",
                self.config.output_classes
            )));
        }
        Ok(())
    }

    fn loss_from_probs(&self, probs: &[f64], target: usize) -> f64 {
        match self.config.loss() {
            // Mean of per-unit binary cross-entropies. With a two-way softmax
            // both units contribute -ln p[target], so this equals the
            // categorical loss and shares its gradient.
            Loss::BinaryCrossEntropy => {
                let k = probs.len() as f64;
                probs
                    .iter()
                    .enumerate()
                    .map(|(j, &p)| if j == target { -p.ln() } else { -(1.0 - p).ln() })
                    .sum::<f64>()
                    / k
            }
            Loss::CategoricalCrossEntropy => -probs[target].ln(),
        }
    }

    /// Loss and gradient for one sample, accumulated into `grads`.
    pub(crate) fn accumulate_gradient(&self, tokens: &[u32], target: usize, grads: &mut Gradients) -> (f64, Vec<f64>) {
        let cache = self.run_forward(tokens);
        let loss = self.loss_from_probs(&cache.probs, target);
        self.backward(&cache, target, grads);
        (loss, cache.probs)
    }

    pub(crate) fn zero_gradients(&self) -> Gradients {
        Gradients::zeros(&self.layout)
    }

    /// Loss and dense gradient over all parameters for one sample.
    pub fn gradient(&self, tokens: &[u32], target: usize) -> Result<(f64, Vec<f64>)> {
        self.check_input(tokens)?;
        self.check_target(target)?;
        let mut g = self.zero_gradients();
        let (loss, _) = self.accumulate_gradient(tokens, target, &mut g);
        Ok((loss, g.to_flat(self)))
    }

    /// Plain gradient-descent step: `params -= rate * grads / scale`.
    pub(crate) fn apply_gradients(&mut self, grads: &Gradients, rate: f64, scale: f64) {
        let step = rate / scale;
        let e = self.config.embedding_dim;
        for (&tok, row) in &grads.embedding {
            let start = tok as usize * e;
            for (p, g) in self.params[start..start + e].iter_mut().zip(row) {
                *p -= step * g;
            }
        }
        let offset = self.layout.emb.len();
        for (p, g) in self.params[offset..].iter_mut().zip(&grads.dense) {
            *p -= step * g;
        }
    }

    fn run_forward(&self, tokens: &[u32]) -> ForwardCache {
        let c = &self.config;
        let h = c.recurrent_units;
        let forward_dir = self.run_direction(0, tokens.iter().copied());
        let backward_dir = self.run_direction(1, tokens.iter().rev().copied());

        let t = tokens.len();
        let mut concat = Vec::with_capacity(2 * h);
        concat.extend_from_slice(&forward_dir.hidden[(t - 1) * h..t * h]);
        concat.extend_from_slice(&backward_dir.hidden[(t - 1) * h..t * h]);

        let dense_out = match &self.layout.dense {
            Some((w, b)) => {
                let mut out = self.params[b.clone()].to_vec();
                matvec_add(&mut out, &self.params[w.clone()], &concat);
                out.iter_mut().for_each(|v| *v = v.max(0.0));
                out
            }
            None => Vec::new(),
        };
        let head_in = if self.layout.dense.is_some() { &dense_out } else { &concat };
        let mut logits = self.params[self.layout.out_b.clone()].to_vec();
        matvec_add(&mut logits, &self.params[self.layout.out_w.clone()], head_in);
        let probs = softmax(&logits);

        ForwardCache {
            dirs: [forward_dir, backward_dir],
            concat,
            dense_out,
            probs,
        }
    }

    fn run_direction(&self, d: usize, tokens: impl Iterator<Item = u32>) -> DirectionCache {
        let c = &self.config;
        let (e, h) = (c.embedding_dim, c.recurrent_units);
        let lay = &self.layout.lstm[d];
        let (w, u, b) = (&self.params[lay.w.clone()], &self.params[lay.u.clone()], &self.params[lay.b.clone()]);
        let tokens: Vec<u32> = tokens.collect();
        let t = tokens.len();
        let mut cache = DirectionCache {
            gates: vec![0.0; t * 4 * h],
            cell: vec![0.0; t * h],
            cell_act: vec![0.0; t * h],
            hidden: vec![0.0; t * h],
            tokens,
        };
        let zeros = vec![0.0; h];
        let mut z = vec![0.0; 4 * h];
        for s in 0..t {
            let tok = cache.tokens[s] as usize;
            let x = &self.params[tok * e..(tok + 1) * e];
            z.copy_from_slice(b);
            matvec_add(&mut z, w, x);
            let (h_prev, c_prev) = if s == 0 {
                (&zeros[..], &zeros[..])
            } else {
                (&cache.hidden[(s - 1) * h..s * h], &cache.cell[(s - 1) * h..s * h])
            };
            matvec_add(&mut z, u, h_prev);

            let gates = &mut cache.gates[s * 4 * h..(s + 1) * 4 * h];
            for k in 0..h {
                gates[k] = sigmoid(z[k]);
                gates[h + k] = sigmoid(z[h + k]);
                gates[2 * h + k] = c.cell_activation.apply(z[2 * h + k]);
                gates[3 * h + k] = sigmoid(z[3 * h + k]);
            }
            let mut cell = vec![0.0; h];
            for k in 0..h {
                cell[k] = gates[h + k] * c_prev[k] + gates[k] * gates[2 * h + k];
            }
            for k in 0..h {
                let a = c.cell_activation.apply(cell[k]);
                cache.cell_act[s * h + k] = a;
                cache.hidden[s * h + k] = gates[3 * h + k] * a;
            }
            cache.cell[s * h..(s + 1) * h].copy_from_slice(&cell);
        }
        cache
    }

    fn backward(&self, cache: &ForwardCache, target: usize, grads: &mut Gradients) {
        let c = &self.config;
        let h = c.recurrent_units;
        let base = self.layout.emb.len();
        let shift = |r: &Range<usize>| r.start - base..r.end - base;

        let mut dlogits = cache.probs.clone();
        dlogits[target] -= 1.0;

        let head_in = if self.layout.dense.is_some() { &cache.dense_out } else { &cache.concat };
        outer_add(&mut grads.dense[shift(&self.layout.out_w)], &dlogits, head_in);
        add_into(&mut grads.dense[shift(&self.layout.out_b)], &dlogits);
        let mut dhead = vec![0.0; head_in.len()];
        matvec_t_add(&mut dhead, &self.params[self.layout.out_w.clone()], &dlogits);

        let dconcat = match &self.layout.dense {
            Some((w, b)) => {
                for (dv, &out) in dhead.iter_mut().zip(&cache.dense_out) {
                    if out <= 0.0 {
                        *dv = 0.0;
                    }
                }
                outer_add(&mut grads.dense[shift(w)], &dhead, &cache.concat);
                add_into(&mut grads.dense[shift(b)], &dhead);
                let mut dc = vec![0.0; 2 * h];
                matvec_t_add(&mut dc, &self.params[w.clone()], &dhead);
                dc
            }
            None => dhead,
        };

        for d in 0..2 {
            self.backward_direction(d, &cache.dirs[d], &dconcat[d * h..(d + 1) * h], grads);
        }
    }

    fn backward_direction(&self, d: usize, cache: &DirectionCache, dh_last: &[f64], grads: &mut Gradients) {
        let c = &self.config;
        let (e, h) = (c.embedding_dim, c.recurrent_units);
        let lay = &self.layout.lstm[d];
        let base = self.layout.emb.len();
        let (w, u) = (&self.params[lay.w.clone()], &self.params[lay.u.clone()]);
        let t = cache.tokens.len();

        let mut dh = dh_last.to_vec();
        let mut dc = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];
        let zeros = vec![0.0; h];

        let (gw, rest) = grads.dense[lay.w.start - base..].split_at_mut(lay.w.len());
        let (gu, rest) = rest.split_at_mut(lay.u.len());
        let gb = &mut rest[..lay.b.len()];

        for s in (0..t).rev() {
            let gates = &cache.gates[s * 4 * h..(s + 1) * 4 * h];
            let c_prev = if s == 0 { &zeros[..] } else { &cache.cell[(s - 1) * h..s * h] };
            let h_prev = if s == 0 { &zeros[..] } else { &cache.hidden[(s - 1) * h..s * h] };
            for k in 0..h {
                let (i, f, g, o) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
                let a = cache.cell_act[s * h + k];
                let d_o = dh[k] * a;
                dc[k] += dh[k] * o * c.cell_activation.derivative_from_output(a);
                let d_i = dc[k] * g;
                let d_g = dc[k] * i;
                let d_f = dc[k] * c_prev[k];
                dz[k] = d_i * i * (1.0 - i);
                dz[h + k] = d_f * f * (1.0 - f);
                dz[2 * h + k] = d_g * c.cell_activation.derivative_from_output(g);
                dz[3 * h + k] = d_o * o * (1.0 - o);
                dc[k] *= f;
            }

            let tok = cache.tokens[s];
            let x = &self.params[tok as usize * e..(tok as usize + 1) * e];
            outer_add(gw, &dz, x);
            outer_add(gu, &dz, h_prev);
            add_into(gb, &dz);

            let row = grads.embedding.entry(tok).or_insert_with(|| vec![0.0; e]);
            matvec_t_add(row, w, &dz);

            let mut dh_prev = vec![0.0; h];
            matvec_t_add(&mut dh_prev, u, &dz);
            dh = dh_prev;
        }
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|v| v / sum).collect()
}

/// `out += mat · x` for a row-major `mat` of shape `out.len() × x.len()`.
#[inline]
fn matvec_add(out: &mut [f64], mat: &[f64], x: &[f64]) {
    let cols = x.len();
    for (o, row) in out.iter_mut().zip(mat.chunks_exact(cols)) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out += matᵀ · v` for a row-major `mat` of shape `v.len() × out.len()`.
#[inline]
fn matvec_t_add(out: &mut [f64], mat: &[f64], v: &[f64]) {
    let cols = out.len();
    for (&vr, row) in v.iter().zip(mat.chunks_exact(cols)) {
        if vr == 0.0 {
            continue;
        }
        for (o, a) in out.iter_mut().zip(row) {
            *o += vr * a;
        }
    }
}

/// `grad += a ⊗ b`, row-major with `a.len()` rows.
#[inline]
fn outer_add(grad: &mut [f64], a: &[f64], b: &[f64]) {
    let cols = b.len();
    for (&ar, row) in a.iter().zip(grad.chunks_exact_mut(cols)) {
        if ar == 0.0 {
            continue;
        }
        for (g, bv) in row.iter_mut().zip(b) {
            *g += ar * bv;
        }
    }
}

#[inline]
fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}
