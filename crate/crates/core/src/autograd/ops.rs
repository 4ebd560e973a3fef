use super::tape::{Tape, TensorId};
use super::AutogradError;
use crate::linalg::{matmul_acc, matmul_at_acc, matmul_bt_acc, transpose};
use crate::scalar::Scalar;

const LAYER_NORM_EPS: f64 = 1e-5;

pub(crate) enum Op<S: Scalar> {
    Leaf,
    Matmul(TensorId, TensorId),
    Add(TensorId, TensorId),
    Mul(TensorId, TensorId),
    Scale(TensorId, S),
    Transpose(TensorId),
    Reshape(TensorId),
    ConcatCols(Vec<TensorId>),
    ColSlice { src: TensorId, start: usize, len: usize },
    EmbeddingRows { table: TensorId, ids: Vec<usize> },
    MaskedFill { src: TensorId, mask: Vec<bool> },
    Softmax(TensorId),
    LayerNorm { x: TensorId, gain: TensorId, bias: TensorId },
    Relu(TensorId),
    Affine { x: TensorId, w: TensorId, b: TensorId },
    Sum(TensorId),
    CrossEntropyMasked {
        logits: TensorId,
        probs: Vec<S>,
        targets: Vec<usize>,
        active: Vec<bool>,
        count: usize,
    },
}

fn rank2(shape: &[usize], op: &'static str) -> Result<(usize, usize), AutogradError> {
    if shape.len() != 2 {
        return Err(AutogradError::ShapeMismatch {
            op,
            detail: format!("expected a rank-2 tensor, got shape {:?}", shape),
        });
    }
    Ok((shape[0], shape[1]))
}

impl<S: Scalar> Tape<S> {
    fn propagate(&self, ids: &[TensorId]) -> bool {
        ids.iter().any(|&id| self.nodes[id.0].requires_grad)
    }

    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, AutogradError> {
        self.check(a)?;
        self.check(b)?;
        let (m, k) = rank2(self.shape(a), "matmul")?;
        let (k2, n) = rank2(self.shape(b), "matmul")?;
        if k != k2 {
            return Err(AutogradError::ShapeMismatch {
                op: "matmul",
                detail: format!("inner dims {} vs {}", k, k2),
            });
        }
        let mut out = vec![S::zero(); m * n];
        matmul_acc(self.data(a), self.data(b), &mut out, m, k, n);
        let rg = self.propagate(&[a, b]);
        Ok(self.push(vec![m, n], out, rg, Op::Matmul(a, b)))
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, AutogradError> {
        self.check(a)?;
        self.check(b)?;
        if self.shape(a) != self.shape(b) {
            return Err(AutogradError::ShapeMismatch {
                op: "add",
                detail: format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            });
        }
        let out = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(&x, &y)| x + y)
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.propagate(&[a, b]);
        Ok(self.push(shape, out, rg, Op::Add(a, b)))
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, AutogradError> {
        self.check(a)?;
        self.check(b)?;
        if self.shape(a) != self.shape(b) {
            return Err(AutogradError::ShapeMismatch {
                op: "mul",
                detail: format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            });
        }
        let out = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(&x, &y)| x * y)
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.propagate(&[a, b]);
        Ok(self.push(shape, out, rg, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, x: TensorId, factor: S) -> Result<TensorId, AutogradError> {
        self.check(x)?;
        let out = self.data(x).iter().map(|&v| v * factor).collect();
        let shape = self.shape(x).to_vec();
        let rg = self.propagate(&[x]);
        Ok(self.push(shape, out, rg, Op::Scale(x, factor)))
    }

    pub fn transpose(&mut self, x: TensorId) -> Result<TensorId, AutogradError> {
        self.check(x)?;
        let (m, n) = rank2(self.shape(x), "transpose")?;
        let out = transpose(self.data(x), m, n);
        let rg = self.propagate(&[x]);
        Ok(self.push(vec![n, m], out, rg, Op::Transpose(x)))
    }

    pub fn reshape(&mut self, x: TensorId, shape: &[usize]) -> Result<TensorId, AutogradError> {
        self.check(x)?;
        let numel: usize = shape.iter().product();
        if numel != self.data(x).len() {
            return Err(AutogradError::ShapeMismatch {
                op: "reshape",
                detail: format!(
                    "cannot reshape {:?} into {:?}",
                    self.shape(x),
                    shape
                ),
            });
        }
        let out = self.data(x).to_vec();
        let rg = self.propagate(&[x]);
        Ok(self.push(shape.to_vec(), out, rg, Op::Reshape(x)))
    }

    /// Concatenates rank-2 tensors along the last axis.
    pub fn concat_cols(&mut self, parts: &[TensorId]) -> Result<TensorId, AutogradError> {
        if parts.is_empty() {
            return Err(AutogradError::InvalidParameter("concat of zero tensors".into()));
        }
        let mut rows = None;
        let mut total_cols = 0;
        for &p in parts {
            self.check(p)?;
            let (m, n) = rank2(self.shape(p), "concat")?;
            match rows {
                None => rows = Some(m),
                Some(r) if r != m => {
                    return Err(AutogradError::ShapeMismatch {
                        op: "concat",
                        detail: format!("row counts differ: {} vs {}", r, m),
                    })
                }
                _ => {}
            }
            total_cols += n;
        }
        let rows = rows.unwrap();
        let mut out = vec![S::zero(); rows * total_cols];
        let mut offset = 0;
        for &p in parts {
            let n = self.shape(p)[1];
            let data = self.data(p);
            for r in 0..rows {
                out[r * total_cols + offset..r * total_cols + offset + n]
                    .copy_from_slice(&data[r * n..(r + 1) * n]);
            }
            offset += n;
        }
        let rg = self.propagate(parts);
        Ok(self.push(vec![rows, total_cols], out, rg, Op::ConcatCols(parts.to_vec())))
    }

    /// Extracts columns `[start, start+len)` of a rank-2 tensor.
    pub fn col_slice(
        &mut self,
        x: TensorId,
        start: usize,
        len: usize,
    ) -> Result<TensorId, AutogradError> {
        self.check(x)?;
        let (m, n) = rank2(self.shape(x), "col_slice")?;
        if start + len > n {
            return Err(AutogradError::ShapeMismatch {
                op: "col_slice",
                detail: format!("columns {}..{} out of {}", start, start + len, n),
            });
        }
        let data = self.data(x);
        let mut out = Vec::with_capacity(m * len);
        for r in 0..m {
            out.extend_from_slice(&data[r * n + start..r * n + start + len]);
        }
        let rg = self.propagate(&[x]);
        Ok(self.push(vec![m, len], out, rg, Op::ColSlice { src: x, start, len }))
    }

    /// Gathers rows of an embedding table: output row t = table[ids[t]].
    pub fn embedding_rows(
        &mut self,
        table: TensorId,
        ids: &[usize],
    ) -> Result<TensorId, AutogradError> {
        self.check(table)?;
        let (v, d) = rank2(self.shape(table), "embedding")?;
        for &id in ids {
            if id >= v {
                return Err(AutogradError::ShapeMismatch {
                    op: "embedding",
                    detail: format!("row {} out of table height {}", id, v),
                });
            }
        }
        let data = self.data(table);
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            out.extend_from_slice(&data[id * d..(id + 1) * d]);
        }
        let rg = self.propagate(&[table]);
        Ok(self.push(
            vec![ids.len(), d],
            out,
            rg,
            Op::EmbeddingRows { table, ids: ids.to_vec() },
        ))
    }

    /// Replaces masked entries with `-inf` (probability 0 after softmax).
    pub fn masked_fill(
        &mut self,
        x: TensorId,
        mask: &[bool],
    ) -> Result<TensorId, AutogradError> {
        self.check(x)?;
        if mask.len() != self.data(x).len() {
            return Err(AutogradError::ShapeMismatch {
                op: "masked_fill",
                detail: format!(
                    "mask of {} entries for tensor of {}",
                    mask.len(),
                    self.data(x).len()
                ),
            });
        }
        let out = self
            .data(x)
            .iter()
            .zip(mask)
            .map(|(&v, &m)| if m { S::neg_infinity() } else { v })
            .collect();
        let shape = self.shape(x).to_vec();
        let rg = self.propagate(&[x]);
        Ok(self.push(shape, out, rg, Op::MaskedFill { src: x, mask: mask.to_vec() }))
    }

    /// Row-wise softmax over the last axis, numerically stabilized.
    pub fn softmax(&mut self, x: TensorId) -> Result<TensorId, AutogradError> {
        self.check(x)?;
        let shape = self.shape(x).to_vec();
        let cols = *shape.last().ok_or(AutogradError::ShapeMismatch {
            op: "softmax",
            detail: "scalar input".into(),
        })?;
        let mut out = self.data(x).to_vec();
        for row in out.chunks_exact_mut(cols) {
            let max = row.iter().fold(S::neg_infinity(), |m, &v| m.max(v));
            let mut total = S::zero();
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            for v in row.iter_mut() {
                *v = *v / total;
            }
        }
        let rg = self.propagate(&[x]);
        Ok(self.push(shape, out, rg, Op::Softmax(x)))
    }

    /// Layer normalization over the last axis with learned gain and bias.
    pub fn layer_norm(
        &mut self,
        x: TensorId,
        gain: TensorId,
        bias: TensorId,
    ) -> Result<TensorId, AutogradError> {
        self.check(x)?;
        self.check(gain)?;
        self.check(bias)?;
        let shape = self.shape(x).to_vec();
        let d = *shape.last().ok_or(AutogradError::ShapeMismatch {
            op: "layer_norm",
            detail: "scalar input".into(),
        })?;
        if self.data(gain).len() != d || self.data(bias).len() != d {
            return Err(AutogradError::ShapeMismatch {
                op: "layer_norm",
                detail: format!(
                    "gain/bias of {}/{} for last axis {}",
                    self.data(gain).len(),
                    self.data(bias).len(),
                    d
                ),
            });
        }
        let eps = S::from_f64c(LAYER_NORM_EPS);
        let df = S::from_f64c(d as f64);
        let mut out = Vec::with_capacity(self.data(x).len());
        {
            let xs = self.data(x);
            let g = self.data(gain);
            let b = self.data(bias);
            for row in xs.chunks_exact(d) {
                let mean = row.iter().copied().sum::<S>() / df;
                let var = row
                    .iter()
                    .map(|&v| {
                        let c = v - mean;
                        c * c
                    })
                    .sum::<S>()
                    / df;
                let inv = S::one() / (var + eps).sqrt();
                for (j, &v) in row.iter().enumerate() {
                    out.push((v - mean) * inv * g[j] + b[j]);
                }
            }
        }
        let rg = self.propagate(&[x, gain, bias]);
        Ok(self.push(shape, out, rg, Op::LayerNorm { x, gain, bias }))
    }

    pub fn relu(&mut self, x: TensorId) -> Result<TensorId, AutogradError> {
        self.check(x)?;
        let out = self.data(x).iter().map(|&v| v.max(S::zero())).collect();
        let shape = self.shape(x).to_vec();
        let rg = self.propagate(&[x]);
        Ok(self.push(shape, out, rg, Op::Relu(x)))
    }

    /// `x (m x k) * w (k x n) + b (n)`, the linear layer.
    pub fn affine(
        &mut self,
        x: TensorId,
        w: TensorId,
        b: TensorId,
    ) -> Result<TensorId, AutogradError> {
        self.check(x)?;
        self.check(w)?;
        self.check(b)?;
        let (m, k) = rank2(self.shape(x), "affine")?;
        let (k2, n) = rank2(self.shape(w), "affine")?;
        if k != k2 || self.data(b).len() != n {
            return Err(AutogradError::ShapeMismatch {
                op: "affine",
                detail: format!(
                    "x {:?}, w {:?}, b {:?}",
                    self.shape(x),
                    self.shape(w),
                    self.shape(b)
                ),
            });
        }
        let mut out = vec![S::zero(); m * n];
        matmul_acc(self.data(x), self.data(w), &mut out, m, k, n);
        {
            let bias = self.data(b);
            for row in out.chunks_exact_mut(n) {
                for (o, &bv) in row.iter_mut().zip(bias) {
                    *o += bv;
                }
            }
        }
        let rg = self.propagate(&[x, w, b]);
        Ok(self.push(vec![m, n], out, rg, Op::Affine { x, w, b }))
    }

    /// Sum of all entries, as a `[1]` scalar.
    pub fn sum(&mut self, x: TensorId) -> Result<TensorId, AutogradError> {
        self.check(x)?;
        let total = self.data(x).iter().copied().sum();
        let rg = self.propagate(&[x]);
        Ok(self.push(vec![1], vec![total], rg, Op::Sum(x)))
    }

    /// Mean over non-ignored positions of `-log softmax(logits)[target]`.
    /// Positions whose target equals `ignore_id` contribute neither loss nor
    /// gradient.
    pub fn cross_entropy_masked(
        &mut self,
        logits: TensorId,
        targets: &[usize],
        ignore_id: usize,
    ) -> Result<TensorId, AutogradError> {
        self.check(logits)?;
        let (t, v) = rank2(self.shape(logits), "cross_entropy")?;
        if targets.len() != t {
            return Err(AutogradError::ShapeMismatch {
                op: "cross_entropy",
                detail: format!("{} targets for {} rows", targets.len(), t),
            });
        }
        for &tgt in targets {
            if tgt >= v {
                return Err(AutogradError::TargetOutOfRange { target: tgt, vocab: v });
            }
        }
        let active: Vec<bool> = targets.iter().map(|&tgt| tgt != ignore_id).collect();
        let count = active.iter().filter(|&&a| a).count();
        if count == 0 {
            return Err(AutogradError::AllPositionsIgnored);
        }

        let mut probs = self.data(logits).to_vec();
        let mut loss = S::zero();
        for (row, (&tgt, &is_active)) in
            probs.chunks_exact_mut(v).zip(targets.iter().zip(&active))
        {
            let max = row.iter().fold(S::neg_infinity(), |m, &x| m.max(x));
            let mut total = S::zero();
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                total += *x;
            }
            for x in row.iter_mut() {
                *x = *x / total;
            }
            if is_active {
                loss -= row[tgt].max(S::from_f64c(1e-300)).ln();
            }
        }
        loss = loss / S::from_f64c(count as f64);
        let rg = self.propagate(&[logits]);
        Ok(self.push(
            vec![1],
            vec![loss],
            rg,
            Op::CrossEntropyMasked {
                logits,
                probs,
                targets: targets.to_vec(),
                active,
                count,
            },
        ))
    }
}

/// Applies node `i`'s local backward rule, scattering `grad_out` into its
/// inputs.
pub(crate) fn backward_step<S: Scalar>(tape: &mut Tape<S>, i: usize, grad_out: &[S]) {
    let wants = |tape: &Tape<S>, id: TensorId| tape.nodes[id.0].requires_grad;

    // Collect (target, contribution) first, then accumulate, so reads of
    // sibling node data never alias the mutable gradient buffers.
    let mut pending: Vec<(TensorId, Vec<S>)> = Vec::new();

    match &tape.nodes[i].op {
        Op::Leaf => {}
        Op::Matmul(a, b) => {
            let (a, b) = (*a, *b);
            let m = tape.nodes[a.0].shape[0];
            let k = tape.nodes[a.0].shape[1];
            let n = tape.nodes[b.0].shape[1];
            if wants(tape, a) {
                let mut da = vec![S::zero(); m * k];
                matmul_bt_acc(grad_out, &tape.nodes[b.0].data, &mut da, m, n, k);
                pending.push((a, da));
            }
            if wants(tape, b) {
                let mut db = vec![S::zero(); k * n];
                matmul_at_acc(&tape.nodes[a.0].data, grad_out, &mut db, k, m, n);
                pending.push((b, db));
            }
        }
        Op::Add(a, b) => {
            pending.push((*a, grad_out.to_vec()));
            pending.push((*b, grad_out.to_vec()));
        }
        Op::Mul(a, b) => {
            let (a, b) = (*a, *b);
            if wants(tape, a) {
                let da = grad_out
                    .iter()
                    .zip(&tape.nodes[b.0].data)
                    .map(|(&g, &y)| g * y)
                    .collect();
                pending.push((a, da));
            }
            if wants(tape, b) {
                let db = grad_out
                    .iter()
                    .zip(&tape.nodes[a.0].data)
                    .map(|(&g, &x)| g * x)
                    .collect();
                pending.push((b, db));
            }
        }
        Op::Scale(x, factor) => {
            let f = *factor;
            pending.push((*x, grad_out.iter().map(|&g| g * f).collect()));
        }
        Op::Transpose(x) => {
            let x = *x;
            let (n, m) = (tape.nodes[i].shape[0], tape.nodes[i].shape[1]);
            pending.push((x, transpose(grad_out, n, m)));
        }
        Op::Reshape(x) => {
            pending.push((*x, grad_out.to_vec()));
        }
        Op::ConcatCols(parts) => {
            let parts = parts.clone();
            let rows = tape.nodes[i].shape[0];
            let total_cols = tape.nodes[i].shape[1];
            let mut offset = 0;
            for p in parts {
                let n = tape.nodes[p.0].shape[1];
                if wants(tape, p) {
                    let mut dp = Vec::with_capacity(rows * n);
                    for r in 0..rows {
                        dp.extend_from_slice(
                            &grad_out[r * total_cols + offset..r * total_cols + offset + n],
                        );
                    }
                    pending.push((p, dp));
                }
                offset += n;
            }
        }
        Op::ColSlice { src, start, len } => {
            let (src, start, len) = (*src, *start, *len);
            if wants(tape, src) {
                let (m, n) = (tape.nodes[src.0].shape[0], tape.nodes[src.0].shape[1]);
                let mut ds = vec![S::zero(); m * n];
                for r in 0..m {
                    ds[r * n + start..r * n + start + len]
                        .copy_from_slice(&grad_out[r * len..(r + 1) * len]);
                }
                pending.push((src, ds));
            }
        }
        Op::EmbeddingRows { table, ids } => {
            let table = *table;
            if wants(tape, table) {
                let ids = ids.clone();
                let (v, d) = (tape.nodes[table.0].shape[0], tape.nodes[table.0].shape[1]);
                let mut dt = vec![S::zero(); v * d];
                for (t, &id) in ids.iter().enumerate() {
                    let src = &grad_out[t * d..(t + 1) * d];
                    let dst = &mut dt[id * d..(id + 1) * d];
                    for (o, &g) in dst.iter_mut().zip(src) {
                        *o += g;
                    }
                }
                pending.push((table, dt));
            }
        }
        Op::MaskedFill { src, mask } => {
            let src = *src;
            if wants(tape, src) {
                let ds = grad_out
                    .iter()
                    .zip(mask)
                    .map(|(&g, &m)| if m { S::zero() } else { g })
                    .collect();
                pending.push((src, ds));
            }
        }
        Op::Softmax(x) => {
            let x = *x;
            if wants(tape, x) {
                let cols = *tape.nodes[i].shape.last().unwrap();
                let y = &tape.nodes[i].data;
                let mut dx = vec![S::zero(); y.len()];
                for ((dx_row, y_row), g_row) in dx
                    .chunks_exact_mut(cols)
                    .zip(y.chunks_exact(cols))
                    .zip(grad_out.chunks_exact(cols))
                {
                    let dot: S = g_row.iter().zip(y_row).map(|(&g, &yv)| g * yv).sum();
                    for ((d, &yv), &g) in dx_row.iter_mut().zip(y_row).zip(g_row) {
                        *d = yv * (g - dot);
                    }
                }
                pending.push((x, dx));
            }
        }
        Op::LayerNorm { x, gain, bias } => {
            let (x, gain, bias) = (*x, *gain, *bias);
            let d = *tape.nodes[i].shape.last().unwrap();
            let df = S::from_f64c(d as f64);
            let eps = S::from_f64c(LAYER_NORM_EPS);
            let xs = &tape.nodes[x.0].data;
            let g = &tape.nodes[gain.0].data;
            let mut dx = vec![S::zero(); xs.len()];
            let mut dg = vec![S::zero(); d];
            let mut db = vec![S::zero(); d];
            for ((x_row, dx_row), dy_row) in xs
                .chunks_exact(d)
                .zip(dx.chunks_exact_mut(d))
                .zip(grad_out.chunks_exact(d))
            {
                let mean = x_row.iter().copied().sum::<S>() / df;
                let var = x_row
                    .iter()
                    .map(|&v| {
                        let c = v - mean;
                        c * c
                    })
                    .sum::<S>()
                    / df;
                let inv = S::one() / (var + eps).sqrt();
                // dxhat_j = dy_j * gain_j
                let mut sum_dxhat = S::zero();
                let mut sum_dxhat_xhat = S::zero();
                for j in 0..d {
                    let xhat = (x_row[j] - mean) * inv;
                    let dxhat = dy_row[j] * g[j];
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * xhat;
                    dg[j] += dy_row[j] * xhat;
                    db[j] += dy_row[j];
                }
                for j in 0..d {
                    let xhat = (x_row[j] - mean) * inv;
                    let dxhat = dy_row[j] * g[j];
                    dx_row[j] =
                        inv * (dxhat - sum_dxhat / df - xhat * sum_dxhat_xhat / df);
                }
            }
            if wants(tape, x) {
                pending.push((x, dx));
            }
            if wants(tape, gain) {
                pending.push((gain, dg));
            }
            if wants(tape, bias) {
                pending.push((bias, db));
            }
        }
        Op::Relu(x) => {
            let x = *x;
            if wants(tape, x) {
                let dx = grad_out
                    .iter()
                    .zip(&tape.nodes[x.0].data)
                    .map(|(&g, &v)| if v > S::zero() { g } else { S::zero() })
                    .collect();
                pending.push((x, dx));
            }
        }
        Op::Affine { x, w, b } => {
            let (x, w, b) = (*x, *w, *b);
            let m = tape.nodes[x.0].shape[0];
            let k = tape.nodes[x.0].shape[1];
            let n = tape.nodes[w.0].shape[1];
            if wants(tape, x) {
                let mut dx = vec![S::zero(); m * k];
                matmul_bt_acc(grad_out, &tape.nodes[w.0].data, &mut dx, m, n, k);
                pending.push((x, dx));
            }
            if wants(tape, w) {
                let mut dw = vec![S::zero(); k * n];
                matmul_at_acc(&tape.nodes[x.0].data, grad_out, &mut dw, k, m, n);
                pending.push((w, dw));
            }
            if wants(tape, b) {
                let mut db = vec![S::zero(); n];
                for row in grad_out.chunks_exact(n) {
                    for (o, &g) in db.iter_mut().zip(row) {
                        *o += g;
                    }
                }
                pending.push((b, db));
            }
        }
        Op::Sum(x) => {
            let x = *x;
            if wants(tape, x) {
                let g = grad_out[0];
                pending.push((x, vec![g; tape.nodes[x.0].data.len()]));
            }
        }
        Op::CrossEntropyMasked { logits, probs, targets, active, count } => {
            let logits = *logits;
            if wants(tape, logits) {
                let v = tape.nodes[logits.0].shape[1];
                let scale = grad_out[0] / S::from_f64c(*count as f64);
                let mut dl = vec![S::zero(); probs.len()];
                for (t, (&tgt, &is_active)) in targets.iter().zip(active).enumerate() {
                    if !is_active {
                        continue;
                    }
                    let p_row = &probs[t * v..(t + 1) * v];
                    let d_row = &mut dl[t * v..(t + 1) * v];
                    for (j, (d, &p)) in d_row.iter_mut().zip(p_row).enumerate() {
                        let indicator = if j == tgt { S::one() } else { S::zero() };
                        *d = scale * (p - indicator);
                    }
                }
                pending.push((logits, dl));
            }
        }
    }

    for (target, values) in pending {
        tape.accumulate(target, &values);
    }
}
