use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::token::{detokenize, TokenSeq};
use super::TranslatorError;
use crate::autograd::{AdamConfig, AdamState, Tape, TensorId};
use crate::data::Image;
use crate::optics::BucketSequence;
use crate::scalar::Scalar;

/// Architecture of the translation network. `n_pixels = width * height` is
/// the output vocabulary driver; `max_src_len` is the bucket count K the
/// model is built for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub n_enc_layers: usize,
    pub n_dec_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub width: usize,
    pub height: usize,
    pub max_src_len: usize,
}

impl ModelConfig {
    /// The reference architecture: 6+6 layers, 512-wide embeddings, 8 heads.
    pub fn reference(width: usize, height: usize, max_src_len: usize) -> Self {
        Self {
            n_enc_layers: 6,
            n_dec_layers: 6,
            d_model: 512,
            n_heads: 8,
            d_ff: 2048,
            width,
            height,
            max_src_len,
        }
    }

    /// A small configuration that trains in minutes on a CPU.
    pub fn desk(width: usize, height: usize, max_src_len: usize) -> Self {
        Self {
            n_enc_layers: 2,
            n_dec_layers: 2,
            d_model: 128,
            n_heads: 8,
            d_ff: 512,
            width,
            height,
            max_src_len,
        }
    }

    pub fn n_pixels(&self) -> usize {
        self.width * self.height
    }

    /// PAD + N pixel ids + BOS + EOS.
    pub fn vocab(&self) -> usize {
        self.n_pixels() + 3
    }

    /// BOS + every pixel lit + EOS.
    pub fn max_tgt_len(&self) -> usize {
        self.n_pixels() + 2
    }

    pub fn validate(&self) -> Result<(), TranslatorError> {
        if self.n_enc_layers == 0
            || self.n_dec_layers == 0
            || self.d_model == 0
            || self.n_heads == 0
            || self.d_ff == 0
            || self.width == 0
            || self.height == 0
            || self.max_src_len == 0
        {
            return Err(TranslatorError::InvalidConfig(
                "all dimensions must be at least 1".into(),
            ));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(TranslatorError::InvalidConfig(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        Ok(())
    }
}

pub(crate) struct LnParams<S> {
    pub gain: Vec<S>,
    pub bias: Vec<S>,
}

pub(crate) struct AttnParams<S> {
    pub wq: Vec<S>,
    pub bq: Vec<S>,
    pub wk: Vec<S>,
    pub bk: Vec<S>,
    pub wv: Vec<S>,
    pub bv: Vec<S>,
    pub wo: Vec<S>,
    pub bo: Vec<S>,
}

pub(crate) struct FfParams<S> {
    pub w1: Vec<S>,
    pub b1: Vec<S>,
    pub w2: Vec<S>,
    pub b2: Vec<S>,
}

pub(crate) struct EncLayerParams<S> {
    pub ln1: LnParams<S>,
    pub attn: AttnParams<S>,
    pub ln2: LnParams<S>,
    pub ff: FfParams<S>,
}

pub(crate) struct DecLayerParams<S> {
    pub ln1: LnParams<S>,
    pub self_attn: AttnParams<S>,
    pub ln2: LnParams<S>,
    pub cross_attn: AttnParams<S>,
    pub ln3: LnParams<S>,
    pub ff: FfParams<S>,
}

/// Every learned tensor of the network.
pub(crate) struct Params<S> {
    pub src_w: Vec<S>, // [1, d]
    pub src_b: Vec<S>, // [d]
    pub enc_layers: Vec<EncLayerParams<S>>,
    pub enc_ln: LnParams<S>,
    pub dec_layers: Vec<DecLayerParams<S>>,
    pub dec_ln: LnParams<S>,
    pub tgt_embed: Vec<S>, // [V, d]
    pub out_w: Vec<S>,     // [d, V]
    pub out_b: Vec<S>,     // [V]
}

impl<S: Scalar> Params<S> {
    fn init(config: &ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        let d = config.d_model;
        let v = config.vocab();
        let ff = config.d_ff;
        let xavier = |rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize| -> Vec<S> {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..fan_in * fan_out)
                .map(|_| S::from_f64c((rng.gen::<f64>() * 2.0 - 1.0) * bound))
                .collect()
        };
        let ln = || LnParams { gain: vec![S::one(); d], bias: vec![S::zero(); d] };
        let attn = |rng: &mut ChaCha8Rng| AttnParams {
            wq: xavier(rng, d, d),
            bq: vec![S::zero(); d],
            wk: xavier(rng, d, d),
            bk: vec![S::zero(); d],
            wv: xavier(rng, d, d),
            bv: vec![S::zero(); d],
            wo: xavier(rng, d, d),
            bo: vec![S::zero(); d],
        };
        let ffp = |rng: &mut ChaCha8Rng| FfParams {
            w1: xavier(rng, d, ff),
            b1: vec![S::zero(); ff],
            w2: xavier(rng, ff, d),
            b2: vec![S::zero(); d],
        };
        Params {
            src_w: xavier(rng, 1, d),
            src_b: vec![S::zero(); d],
            enc_layers: (0..config.n_enc_layers)
                .map(|_| EncLayerParams { ln1: ln(), attn: attn(rng), ln2: ln(), ff: ffp(rng) })
                .collect(),
            enc_ln: ln(),
            dec_layers: (0..config.n_dec_layers)
                .map(|_| DecLayerParams {
                    ln1: ln(),
                    self_attn: attn(rng),
                    ln2: ln(),
                    cross_attn: attn(rng),
                    ln3: ln(),
                    ff: ffp(rng),
                })
                .collect(),
            dec_ln: ln(),
            tgt_embed: xavier(rng, v, d),
            out_w: xavier(rng, d, v),
            out_b: vec![S::zero(); v],
        }
    }
}

/// Enumeration of the parameter tensors in a fixed order, shared by the
/// optimizer, checkpointing, and gradient extraction.
pub(crate) fn visit_params<'a, S: Scalar, T, F>(
    config: &ModelConfig,
    params: &'a Params<S>,
    mut f: F,
) -> Vec<T>
where
    F: FnMut(String, Vec<usize>, &'a [S]) -> T,
{
    let d = config.d_model;
    let v = config.vocab();
    let ff = config.d_ff;
    let mut out = Vec::new();
    out.push(f("src_w".into(), vec![1, d], &params.src_w));
    out.push(f("src_b".into(), vec![d], &params.src_b));
    let ln = |out: &mut Vec<T>, f: &mut F, name: String, p: &'a LnParams<S>| {
        out.push(f(format!("{}.gain", name), vec![d], &p.gain));
        out.push(f(format!("{}.bias", name), vec![d], &p.bias));
    };
    let attn = |out: &mut Vec<T>, f: &mut F, name: String, p: &'a AttnParams<S>| {
        out.push(f(format!("{}.wq", name), vec![d, d], &p.wq));
        out.push(f(format!("{}.bq", name), vec![d], &p.bq));
        out.push(f(format!("{}.wk", name), vec![d, d], &p.wk));
        out.push(f(format!("{}.bk", name), vec![d], &p.bk));
        out.push(f(format!("{}.wv", name), vec![d, d], &p.wv));
        out.push(f(format!("{}.bv", name), vec![d], &p.bv));
        out.push(f(format!("{}.wo", name), vec![d, d], &p.wo));
        out.push(f(format!("{}.bo", name), vec![d], &p.bo));
    };
    let ffn = |out: &mut Vec<T>, f: &mut F, name: String, p: &'a FfParams<S>| {
        out.push(f(format!("{}.w1", name), vec![d, ff], &p.w1));
        out.push(f(format!("{}.b1", name), vec![ff], &p.b1));
        out.push(f(format!("{}.w2", name), vec![ff, d], &p.w2));
        out.push(f(format!("{}.b2", name), vec![d], &p.b2));
    };
    for (i, layer) in params.enc_layers.iter().enumerate() {
        ln(&mut out, &mut f, format!("enc{}.ln1", i), &layer.ln1);
        attn(&mut out, &mut f, format!("enc{}.attn", i), &layer.attn);
        ln(&mut out, &mut f, format!("enc{}.ln2", i), &layer.ln2);
        ffn(&mut out, &mut f, format!("enc{}.ff", i), &layer.ff);
    }
    ln(&mut out, &mut f, "enc_ln".into(), &params.enc_ln);
    for (i, layer) in params.dec_layers.iter().enumerate() {
        ln(&mut out, &mut f, format!("dec{}.ln1", i), &layer.ln1);
        attn(&mut out, &mut f, format!("dec{}.self", i), &layer.self_attn);
        ln(&mut out, &mut f, format!("dec{}.ln2", i), &layer.ln2);
        attn(&mut out, &mut f, format!("dec{}.cross", i), &layer.cross_attn);
        ln(&mut out, &mut f, format!("dec{}.ln3", i), &layer.ln3);
        ffn(&mut out, &mut f, format!("dec{}.ff", i), &layer.ff);
    }
    ln(&mut out, &mut f, "dec_ln".into(), &params.dec_ln);
    out.push(f("tgt_embed".into(), vec![v, d], &params.tgt_embed));
    out.push(f("out_w".into(), vec![d, v], &params.out_w));
    out.push(f("out_b".into(), vec![v], &params.out_b));
    out
}

/// Mutable twin of [`visit_params`], same order.
pub(crate) fn visit_params_mut<S: Scalar>(params: &mut Params<S>) -> Vec<&mut Vec<S>> {
    fn ln<'a, S>(out: &mut Vec<&'a mut Vec<S>>, p: &'a mut LnParams<S>) {
        out.push(&mut p.gain);
        out.push(&mut p.bias);
    }
    fn attn<'a, S>(out: &mut Vec<&'a mut Vec<S>>, p: &'a mut AttnParams<S>) {
        out.push(&mut p.wq);
        out.push(&mut p.bq);
        out.push(&mut p.wk);
        out.push(&mut p.bk);
        out.push(&mut p.wv);
        out.push(&mut p.bv);
        out.push(&mut p.wo);
        out.push(&mut p.bo);
    }
    fn ffn<'a, S>(out: &mut Vec<&'a mut Vec<S>>, p: &'a mut FfParams<S>) {
        out.push(&mut p.w1);
        out.push(&mut p.b1);
        out.push(&mut p.w2);
        out.push(&mut p.b2);
    }
    let Params {
        src_w,
        src_b,
        enc_layers,
        enc_ln,
        dec_layers,
        dec_ln,
        tgt_embed,
        out_w,
        out_b,
    } = params;
    let mut out: Vec<&mut Vec<S>> = Vec::new();
    out.push(src_w);
    out.push(src_b);
    for layer in enc_layers.iter_mut() {
        ln(&mut out, &mut layer.ln1);
        attn(&mut out, &mut layer.attn);
        ln(&mut out, &mut layer.ln2);
        ffn(&mut out, &mut layer.ff);
    }
    ln(&mut out, enc_ln);
    for layer in dec_layers.iter_mut() {
        ln(&mut out, &mut layer.ln1);
        attn(&mut out, &mut layer.self_attn);
        ln(&mut out, &mut layer.ln2);
        attn(&mut out, &mut layer.cross_attn);
        ln(&mut out, &mut layer.ln3);
        ffn(&mut out, &mut layer.ff);
    }
    ln(&mut out, dec_ln);
    out.push(tgt_embed);
    out.push(out_w);
    out.push(out_b);
    out
}

/// Parameter tensors bound onto a tape for one forward/backward pass.
pub(crate) struct Bound {
    pub ids: Vec<TensorId>,
}

struct BoundLn {
    gain: TensorId,
    bias: TensorId,
}

struct BoundAttn {
    wq: TensorId,
    bq: TensorId,
    wk: TensorId,
    bk: TensorId,
    wv: TensorId,
    bv: TensorId,
    wo: TensorId,
    bo: TensorId,
}

struct BoundFf {
    w1: TensorId,
    b1: TensorId,
    w2: TensorId,
    b2: TensorId,
}

struct BoundEnc {
    ln1: BoundLn,
    attn: BoundAttn,
    ln2: BoundLn,
    ff: BoundFf,
}

struct BoundDec {
    ln1: BoundLn,
    self_attn: BoundAttn,
    ln2: BoundLn,
    cross_attn: BoundAttn,
    ln3: BoundLn,
    ff: BoundFf,
}

pub(crate) struct BoundModel {
    src_w: TensorId,
    src_b: TensorId,
    enc: Vec<BoundEnc>,
    enc_ln: BoundLn,
    dec: Vec<BoundDec>,
    dec_ln: BoundLn,
    tgt_embed: TensorId,
    out_w: TensorId,
    out_b: TensorId,
}

/// The translation network plus its optimizer state; the complete
/// checkpointable training state.
pub struct Model<S: Scalar> {
    pub config: ModelConfig,
    pub(crate) params: Params<S>,
    pub adam: AdamState<S>,
    /// Number of completed training epochs.
    pub epoch: usize,
    pub seed: u64,
    pos: Vec<S>, // [max(max_src_len, max_tgt_len), d] sinusoidal table
}

impl<S: Scalar> Model<S> {
    pub fn new(
        config: ModelConfig,
        adam_cfg: AdamConfig<S>,
        seed: u64,
    ) -> Result<Self, TranslatorError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = Params::init(&config, &mut rng);
        let sizes = visit_params(&config, &params, |_, _, data| data.len());
        let adam = AdamState::new(&sizes, adam_cfg);
        let pos = sinusoidal_table(&config);
        Ok(Self { config, params, adam, epoch: 0, seed, pos })
    }

    pub fn n_parameters(&self) -> usize {
        visit_params(&self.config, &self.params, |_, _, d| d.len())
            .into_iter()
            .sum()
    }

    /// Copies every parameter tensor onto the tape in visit order.
    fn bind(&self, tape: &mut Tape<S>, requires_grad: bool) -> Result<BoundModel, TranslatorError> {
        Ok(self.bind_with_ids(tape, requires_grad)?.0)
    }

    /// Tensor ids of the bound parameters, in visit order.
    pub(crate) fn bind_with_ids(
        &self,
        tape: &mut Tape<S>,
        requires_grad: bool,
    ) -> Result<(BoundModel, Bound), TranslatorError> {
        let ids_info = visit_params(&self.config, &self.params, |_, shape, data| {
            (shape, data.to_vec())
        });
        let mut ids = Vec::with_capacity(ids_info.len());
        for (shape, data) in ids_info {
            ids.push(tape.leaf(&shape, data, requires_grad)?);
        }
        Ok((self.assemble_bound(&ids), Bound { ids }))
    }

    fn assemble_bound(&self, ids: &[TensorId]) -> BoundModel {
        let mut it = ids.iter().copied();
        let mut next = || it.next().expect("visit order covers all ids");
        let ln = |next: &mut dyn FnMut() -> TensorId| BoundLn { gain: next(), bias: next() };
        let attn = |next: &mut dyn FnMut() -> TensorId| BoundAttn {
            wq: next(),
            bq: next(),
            wk: next(),
            bk: next(),
            wv: next(),
            bv: next(),
            wo: next(),
            bo: next(),
        };
        let ff = |next: &mut dyn FnMut() -> TensorId| BoundFf {
            w1: next(),
            b1: next(),
            w2: next(),
            b2: next(),
        };
        let src_w = next();
        let src_b = next();
        let enc = (0..self.config.n_enc_layers)
            .map(|_| BoundEnc {
                ln1: ln(&mut next),
                attn: attn(&mut next),
                ln2: ln(&mut next),
                ff: ff(&mut next),
            })
            .collect();
        let enc_ln = ln(&mut next);
        let dec = (0..self.config.n_dec_layers)
            .map(|_| BoundDec {
                ln1: ln(&mut next),
                self_attn: attn(&mut next),
                ln2: ln(&mut next),
                cross_attn: attn(&mut next),
                ln3: ln(&mut next),
                ff: ff(&mut next),
            })
            .collect();
        let dec_ln = ln(&mut next);
        let tgt_embed = next();
        let out_w = next();
        let out_b = next();
        BoundModel { src_w, src_b, enc, enc_ln, dec, dec_ln, tgt_embed, out_w, out_b }
    }

    fn attention(
        &self,
        tape: &mut Tape<S>,
        q_in: TensorId,
        kv_in: TensorId,
        p: &BoundAttn,
        mask: Option<&[bool]>,
    ) -> Result<TensorId, TranslatorError> {
        let d = self.config.d_model;
        let heads = self.config.n_heads;
        let dh = d / heads;
        let scale = S::from_f64c(1.0 / (dh as f64).sqrt());
        let q = tape.affine(q_in, p.wq, p.bq)?;
        let k = tape.affine(kv_in, p.wk, p.bk)?;
        let v = tape.affine(kv_in, p.wv, p.bv)?;
        let mut outputs = Vec::with_capacity(heads);
        for h in 0..heads {
            let qh = tape.col_slice(q, h * dh, dh)?;
            let kh = tape.col_slice(k, h * dh, dh)?;
            let vh = tape.col_slice(v, h * dh, dh)?;
            let kt = tape.transpose(kh)?;
            let scores = tape.matmul(qh, kt)?;
            let scaled = tape.scale(scores, scale)?;
            let gated = match mask {
                Some(m) => tape.masked_fill(scaled, m)?,
                None => scaled,
            };
            let weights = tape.softmax(gated)?;
            outputs.push(tape.matmul(weights, vh)?);
        }
        let merged = tape.concat_cols(&outputs)?;
        Ok(tape.affine(merged, p.wo, p.bo)?)
    }

    fn feed_forward(
        &self,
        tape: &mut Tape<S>,
        x: TensorId,
        p: &BoundFf,
    ) -> Result<TensorId, TranslatorError> {
        let h = tape.affine(x, p.w1, p.b1)?;
        let a = tape.relu(h)?;
        Ok(tape.affine(a, p.w2, p.b2)?)
    }

    fn positions(&self, tape: &mut Tape<S>, len: usize) -> Result<TensorId, TranslatorError> {
        let d = self.config.d_model;
        Ok(tape.leaf(&[len, d], self.pos[..len * d].to_vec(), false)?)
    }

    /// Embeds each normalized bucket reading with a learned affine map plus
    /// the sinusoidal position, then runs the self-attention stack.
    fn encode_on(
        &self,
        tape: &mut Tape<S>,
        bound: &BoundModel,
        buckets: &[S],
    ) -> Result<TensorId, TranslatorError> {
        let k = buckets.len();
        if k > self.config.max_src_len {
            return Err(TranslatorError::SourceTooLong {
                len: k,
                max: self.config.max_src_len,
            });
        }
        let src = tape.leaf(&[k, 1], buckets.to_vec(), false)?;
        let emb = tape.affine(src, bound.src_w, bound.src_b)?;
        let pos = self.positions(tape, k)?;
        let mut x = tape.add(emb, pos)?;
        for layer in &bound.enc {
            let normed = tape.layer_norm(x, layer.ln1.gain, layer.ln1.bias)?;
            let attended = self.attention(tape, normed, normed, &layer.attn, None)?;
            x = tape.add(x, attended)?;
            let normed = tape.layer_norm(x, layer.ln2.gain, layer.ln2.bias)?;
            let ff = self.feed_forward(tape, normed, &layer.ff)?;
            x = tape.add(x, ff)?;
        }
        Ok(tape.layer_norm(x, bound.enc_ln.gain, bound.enc_ln.bias)?)
    }

    /// Causal self-attention over the token prefix, cross-attention into the
    /// encoder memory, and the output projection to vocabulary logits.
    fn decode_on(
        &self,
        tape: &mut Tape<S>,
        bound: &BoundModel,
        memory: TensorId,
        tokens: &[usize],
    ) -> Result<TensorId, TranslatorError> {
        let t_len = tokens.len();
        if t_len > self.config.max_tgt_len() {
            return Err(TranslatorError::TargetTooLong {
                len: t_len,
                max: self.config.max_tgt_len(),
            });
        }
        let emb = tape.embedding_rows(bound.tgt_embed, tokens)?;
        let pos = self.positions(tape, t_len)?;
        let mut y = tape.add(emb, pos)?;
        let causal: Vec<bool> = (0..t_len * t_len)
            .map(|i| i % t_len > i / t_len)
            .collect();
        for layer in &bound.dec {
            let normed = tape.layer_norm(y, layer.ln1.gain, layer.ln1.bias)?;
            let self_att =
                self.attention(tape, normed, normed, &layer.self_attn, Some(&causal))?;
            y = tape.add(y, self_att)?;
            let normed = tape.layer_norm(y, layer.ln2.gain, layer.ln2.bias)?;
            let cross = self.attention(tape, normed, memory, &layer.cross_attn, None)?;
            y = tape.add(y, cross)?;
            let normed = tape.layer_norm(y, layer.ln3.gain, layer.ln3.bias)?;
            let ff = self.feed_forward(tape, normed, &layer.ff)?;
            y = tape.add(y, ff)?;
        }
        let final_norm = tape.layer_norm(y, bound.dec_ln.gain, bound.dec_ln.bias)?;
        Ok(tape.affine(final_norm, bound.out_w, bound.out_b)?)
    }

    /// Teacher-forced forward pass: the decoder consumes `target[..len-1]`
    /// and the logits at row t score the prediction of `target[t+1]`.
    /// Returns the logits id; the tape retains the whole graph.
    pub fn forward_on(
        &self,
        tape: &mut Tape<S>,
        buckets: &[S],
        target_tokens: &[usize],
    ) -> Result<TensorId, TranslatorError> {
        let (bound, _) = self.bind_with_ids(tape, false)?;
        self.forward_with_bound(tape, &bound, buckets, target_tokens)
    }

    pub(crate) fn forward_with_bound(
        &self,
        tape: &mut Tape<S>,
        bound: &BoundModel,
        buckets: &[S],
        target_tokens: &[usize],
    ) -> Result<TensorId, TranslatorError> {
        if target_tokens.first() != Some(&TokenSeq::bos(self.config.n_pixels())) {
            return Err(TranslatorError::InvalidTokenSequence(
                "teacher-forcing target must begin with BOS".into(),
            ));
        }
        let memory = self.encode_on(tape, bound, buckets)?;
        let input = &target_tokens[..target_tokens.len() - 1];
        self.decode_on(tape, bound, memory, input)
    }

    /// Convenience single-sample forward returning raw logit values.
    pub fn forward(
        &self,
        buckets: &BucketSequence<S>,
        target: &TokenSeq,
    ) -> Result<Vec<S>, TranslatorError> {
        let mut tape = Tape::new();
        let logits = self.forward_on(&mut tape, &buckets.values, target.tokens())?;
        Ok(tape.data(logits).to_vec())
    }

    /// Teacher-forced masked cross-entropy of one sample.
    pub fn loss(
        &self,
        buckets: &[S],
        target: &TokenSeq,
    ) -> Result<S, TranslatorError> {
        let mut tape = Tape::new();
        let logits = self.forward_on(&mut tape, buckets, target.tokens())?;
        let ce = tape.cross_entropy_masked(logits, &target.tokens()[1..], super::token::PAD)?;
        Ok(tape.data(ce)[0])
    }

    /// The same loss together with its gradient with respect to every
    /// parameter, flattened in the order of [`Model::flatten_params`].
    /// Exists for verification harnesses (finite-difference checks).
    pub fn loss_and_param_grads(
        &self,
        buckets: &[S],
        target: &TokenSeq,
    ) -> Result<(S, Vec<S>), TranslatorError> {
        let mut tape = Tape::new();
        let (bound, ids) = self.bind_with_ids(&mut tape, true)?;
        let logits = self.forward_with_bound(&mut tape, &bound, buckets, target.tokens())?;
        let ce = tape.cross_entropy_masked(logits, &target.tokens()[1..], super::token::PAD)?;
        let loss = tape.data(ce)[0];
        tape.backward(ce)?;
        let mut grads = Vec::new();
        for id in ids.ids {
            match tape.grad(id) {
                Some(g) => grads.extend_from_slice(g),
                None => grads.extend(std::iter::repeat(S::zero()).take(tape.data(id).len())),
            }
        }
        Ok((loss, grads))
    }

    /// Every parameter tensor concatenated in a fixed order.
    pub fn flatten_params(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.n_parameters());
        visit_params(&self.config, &self.params, |_, _, data| {
            out.extend_from_slice(data);
        });
        out
    }

    /// Overwrites every parameter from a flat vector laid out as
    /// [`Model::flatten_params`] produces.
    pub fn load_flat_params(&mut self, flat: &[S]) -> Result<(), TranslatorError> {
        if flat.len() != self.n_parameters() {
            return Err(TranslatorError::InvalidConfig(format!(
                "{} values for {} parameters",
                flat.len(),
                self.n_parameters()
            )));
        }
        let mut offset = 0;
        for slot in visit_params_mut(&mut self.params) {
            let len = slot.len();
            slot.copy_from_slice(&flat[offset..offset + len]);
            offset += len;
        }
        Ok(())
    }

    /// Greedy autoregressive translation of a bucket sequence into a binary
    /// image: argmax token per step, halting at EOS or the length cap.
    pub fn translate(
        &self,
        buckets: &BucketSequence<S>,
    ) -> Result<Image<S>, TranslatorError> {
        if buckets.len() != self.config.max_src_len {
            return Err(TranslatorError::SourceLengthMismatch {
                len: buckets.len(),
                expected: self.config.max_src_len,
            });
        }
        let n = self.config.n_pixels();
        let bos = TokenSeq::bos(n);
        let eos = TokenSeq::eos(n);

        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false)?;
        let memory = self.encode_on(&mut tape, &bound, &buckets.values)?;

        let mut tokens = vec![bos];
        while tokens.len() < self.config.max_tgt_len() {
            let logits = self.decode_on(&mut tape, &bound, memory, &tokens)?;
            let v = self.config.vocab();
            let rows = tape.data(logits);
            let last = &rows[rows.len() - v..];
            let next = argmax(last);
            if next == eos {
                break;
            }
            tokens.push(next);
        }
        detokenize(&tokens[1..], self.config.width, self.config.height)
    }
}

fn argmax<S: Scalar>(row: &[S]) -> usize {
    let mut best = 0;
    let mut best_v = S::neg_infinity();
    for (i, &v) in row.iter().enumerate() {
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    best
}

/// Interleaved sin/cos positional table covering both source and target
/// lengths.
fn sinusoidal_table<S: Scalar>(config: &ModelConfig) -> Vec<S> {
    let len = config.max_src_len.max(config.max_tgt_len());
    let d = config.d_model;
    let mut table = Vec::with_capacity(len * d);
    for t in 0..len {
        for j in 0..d {
            let pair = (j / 2) as f64;
            let rate = 10_000f64.powf(2.0 * pair / d as f64);
            let angle = t as f64 / rate;
            table.push(S::from_f64c(if j % 2 == 0 { angle.sin() } else { angle.cos() }));
        }
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            n_enc_layers: 1,
            n_dec_layers: 1,
            d_model: 16,
            n_heads: 4,
            d_ff: 32,
            width: 4,
            height: 4,
            max_src_len: 6,
        }
    }

    fn tiny_model() -> Model<f64> {
        Model::new(tiny_config(), AdamConfig::default(), 42).unwrap()
    }

    #[test]
    fn config_validation() {
        let mut cfg = tiny_config();
        cfg.d_model = 15;
        assert!(cfg.validate().is_err());
        let mut cfg = tiny_config();
        cfg.n_heads = 0;
        assert!(cfg.validate().is_err());
        assert!(tiny_config().validate().is_ok());
        assert_eq!(tiny_config().vocab(), 19);
        assert_eq!(tiny_config().max_tgt_len(), 18);
    }

    #[test]
    fn forward_shapes_and_determinism() {
        let model = tiny_model();
        let buckets = BucketSequence::new(vec![0.1, 0.9, 0.4, 0.0, 1.0, 0.2]);
        let target = TokenSeq::from_tokens(vec![17, 1, 5, 18], 16).unwrap();
        let a = model.forward(&buckets, &target).unwrap();
        let b = model.forward(&buckets, &target).unwrap();
        assert_eq!(a.len(), 3 * 19); // (len-1) rows of vocab logits
        assert_eq!(a, b);
    }

    #[test]
    fn causal_mask_blocks_future_tokens() {
        let model = tiny_model();
        let buckets: Vec<f64> = vec![0.3, 0.7, 0.2, 0.9, 0.5, 0.1];
        let base = {
            let mut tape = Tape::new();
            let id = model.forward_on(&mut tape, &buckets, &[17, 1, 5, 9, 18]).unwrap();
            tape.data(id).to_vec()
        };
        // perturb token at position 3 (value 9 -> 12): logits at rows 0..3
        // must be bit-identical, row 3 may change
        let perturbed = {
            let mut tape = Tape::new();
            let id = model.forward_on(&mut tape, &buckets, &[17, 1, 5, 12, 18]).unwrap();
            tape.data(id).to_vec()
        };
        let v = 19;
        assert_eq!(&base[..3 * v], &perturbed[..3 * v]);
        assert_ne!(&base[3 * v..], &perturbed[3 * v..]);
    }

    #[test]
    fn permuted_source_changes_logits() {
        let model = tiny_model();
        let a = model
            .forward(
                &BucketSequence::new(vec![0.9, 0.1, 0.4, 0.6, 0.2, 0.8]),
                &TokenSeq::from_tokens(vec![17, 2, 18], 16).unwrap(),
            )
            .unwrap();
        let b = model
            .forward(
                &BucketSequence::new(vec![0.1, 0.9, 0.4, 0.6, 0.2, 0.8]),
                &TokenSeq::from_tokens(vec![17, 2, 18], 16).unwrap(),
            )
            .unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn zero_output_projection_gives_uniform_softmax() {
        let mut model = tiny_model();
        for v in model.params.out_w.iter_mut() {
            *v = 0.0;
        }
        for v in model.params.out_b.iter_mut() {
            *v = 0.0;
        }
        let buckets = BucketSequence::new(vec![0.5; 6]);
        let target = TokenSeq::from_tokens(vec![17, 3, 18], 16).unwrap();
        let logits = model.forward(&buckets, &target).unwrap();
        let v = 19;
        for row in logits.chunks_exact(v) {
            let max = row.iter().cloned().fold(f64::MIN, f64::max);
            let z: f64 = row.iter().map(|&x| (x - max).exp()).sum();
            for &x in row {
                let p = (x - max).exp() / z;
                assert!((p - 1.0 / v as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn source_too_long_is_rejected() {
        let model = tiny_model();
        let buckets = BucketSequence::new(vec![0.1; 7]);
        let target = TokenSeq::from_tokens(vec![17, 18], 16).unwrap();
        assert!(matches!(
            model.forward(&buckets, &target),
            Err(TranslatorError::SourceTooLong { len: 7, max: 6 })
        ));
    }

    #[test]
    fn translate_checks_source_length() {
        let model = tiny_model();
        let buckets = BucketSequence::new(vec![0.1; 5]);
        assert!(matches!(
            model.translate(&buckets),
            Err(TranslatorError::SourceLengthMismatch { len: 5, expected: 6 })
        ));
    }

    #[test]
    fn translate_emits_valid_binary_image() {
        let model = tiny_model();
        let buckets = BucketSequence::new(vec![0.8, 0.2, 0.5, 0.9, 0.1, 0.6]);
        let img = model.translate(&buckets).unwrap();
        assert!(img.is_binary());
        assert_eq!(img.width(), 4);
        assert_eq!(img.height(), 4);
    }

    #[test]
    fn eos_biased_model_translates_to_all_zero() {
        let mut model = tiny_model();
        // rig the output bias so EOS dominates immediately
        let eos = TokenSeq::eos(16);
        for v in model.params.out_b.iter_mut() {
            *v = 0.0;
        }
        model.params.out_b[eos] = 100.0;
        let buckets = BucketSequence::new(vec![0.5, 0.4, 0.3, 0.2, 0.1, 0.0]);
        let img = model.translate(&buckets).unwrap();
        assert!(img.pixels().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn attention_rows_are_probability_distributions() {
        let model = tiny_model();
        let mut tape = Tape::new();
        let bound = model.bind(&mut tape, false).unwrap();
        let x = tape
            .leaf(&[5, 16], (0..80).map(|i| (i as f64 * 0.37).sin()).collect(), false)
            .unwrap();
        let normed = tape
            .layer_norm(x, bound.enc[0].ln1.gain, bound.enc[0].ln1.bias)
            .unwrap();
        let _ = model
            .attention(&mut tape, normed, normed, &bound.enc[0].attn, None)
            .unwrap();
        // the four softmax nodes created above are the attention weights
        let mut checked = 0;
        for i in 0..tape.len() {
            let id = TensorId(i);
            let shape = tape.shape(id).to_vec();
            if shape == vec![5, 5] {
                let data = tape.data(id);
                if data.iter().all(|&v| v >= 0.0) {
                    for row in data.chunks_exact(5) {
                        let s: f64 = row.iter().sum();
                        assert!((s - 1.0).abs() < 1e-12);
                    }
                    checked += 1;
                }
            }
        }
        assert_eq!(checked, 4, "expected one weight matrix per head");
    }

    #[test]
    fn parameter_count_is_consistent() {
        let model = tiny_model();
        let d = 16;
        let v = 19;
        let ff = 32;
        let attn = 4 * (d * d + d);
        let ln = 2 * d;
        let enc = 2 * ln + attn + (d * ff + ff + ff * d + d);
        let dec = 3 * ln + 2 * attn + (d * ff + ff + ff * d + d);
        let expected =
            (d + d) + enc + ln + dec + ln + v * d + d * v + v;
        assert_eq!(model.n_parameters(), expected);
    }
}
