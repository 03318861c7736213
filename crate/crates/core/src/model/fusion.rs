//! The three fusion heads with hand-written backward passes.

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, Axis};
use rand::Rng;

use super::encoder::EncoderOutput;
use super::ops::{add_bias, bias, column_sums, masked_max, masked_mean, masked_softmax_rows, softmax_rows_backward, xavier};
use super::ModelError;

/// `[text.pooled ; image.pooled]`.
pub fn fuse_concat(text: &EncoderOutput, image: &EncoderOutput) -> Array1<f64> {
    concatenate(Axis(0), &[text.pooled.view(), image.pooled.view()]).expect("1-d concat")
}

/// Cross-modal multi-head attention: text queries over image keys/values.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossAttentionParams {
    pub num_heads: usize,
    pub wq: Array2<f64>,
    pub bq: Array2<f64>,
    pub wk: Array2<f64>,
    pub bk: Array2<f64>,
    pub wv: Array2<f64>,
    pub bv: Array2<f64>,
    pub wo: Array2<f64>,
    pub bo: Array2<f64>,
}

impl CrossAttentionParams {
    pub fn init<R: Rng>(text_dim: usize, image_dim: usize, common_dim: usize, num_heads: usize, rng: &mut R) -> Self {
        CrossAttentionParams {
            num_heads,
            wq: xavier(text_dim, common_dim, rng),
            bq: bias(common_dim),
            wk: xavier(image_dim, common_dim, rng),
            bk: bias(common_dim),
            wv: xavier(image_dim, common_dim, rng),
            bv: bias(common_dim),
            wo: xavier(common_dim, common_dim, rng),
            bo: bias(common_dim),
        }
    }

    pub fn common_dim(&self) -> usize {
        self.wq.ncols()
    }

    pub(crate) fn tensors(&self) -> Vec<(&'static str, &Array2<f64>)> {
        vec![
            ("wq", &self.wq),
            ("bq", &self.bq),
            ("wk", &self.wk),
            ("bk", &self.bk),
            ("wv", &self.wv),
            ("bv", &self.bv),
            ("wo", &self.wo),
            ("bo", &self.bo),
        ]
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        vec![
            &mut self.wq,
            &mut self.bq,
            &mut self.wk,
            &mut self.bk,
            &mut self.wv,
            &mut self.bv,
            &mut self.wo,
            &mut self.bo,
        ]
    }
}

/// Projections and the shared composition layer of semantic-similarity fusion.
#[derive(Clone, Debug, PartialEq)]
pub struct SemanticSimilarityParams {
    pub pt: Array2<f64>,
    pub bpt: Array2<f64>,
    pub pv: Array2<f64>,
    pub bpv: Array2<f64>,
    /// `4·common_dim × common_dim`, applied to both modalities.
    pub wf: Array2<f64>,
    pub bf: Array2<f64>,
}

impl SemanticSimilarityParams {
    pub fn init<R: Rng>(text_dim: usize, image_dim: usize, common_dim: usize, rng: &mut R) -> Self {
        SemanticSimilarityParams {
            pt: xavier(text_dim, common_dim, rng),
            bpt: bias(common_dim),
            pv: xavier(image_dim, common_dim, rng),
            bpv: bias(common_dim),
            wf: xavier(4 * common_dim, common_dim, rng),
            bf: bias(common_dim),
        }
    }

    pub fn common_dim(&self) -> usize {
        self.pt.ncols()
    }

    pub(crate) fn tensors(&self) -> Vec<(&'static str, &Array2<f64>)> {
        vec![
            ("pt", &self.pt),
            ("bpt", &self.bpt),
            ("pv", &self.pv),
            ("bpv", &self.bpv),
            ("wf", &self.wf),
            ("bf", &self.bf),
        ]
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        vec![
            &mut self.pt,
            &mut self.bpt,
            &mut self.pv,
            &mut self.bpv,
            &mut self.wf,
            &mut self.bf,
        ]
    }
}

/// One attention distribution per query row, over keys where `key_mask` is true.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionMap {
    pub label: String,
    pub weights: Array2<f64>,
    pub key_mask: Vec<bool>,
}

/// Forward intermediates kept for inspection and for the backward pass.
#[derive(Clone, Debug)]
pub struct FusionTrace {
    pub fused: Array1<f64>,
    pub attention: Vec<AttentionMap>,
    /// `x − x̃` blocks of the semantic-similarity enhancement (text, image).
    pub difference: Option<(Array2<f64>, Array2<f64>)>,
    cache: Cache,
}

#[derive(Clone, Debug)]
enum Cache {
    Concat,
    Cross {
        q: Array2<f64>,
        k: Array2<f64>,
        v: Array2<f64>,
        heads: Array2<f64>,
    },
    Semantic(Box<SemanticCache>),
}

#[derive(Clone, Debug)]
struct SemanticCache {
    tp: Array2<f64>,
    vp: Array2<f64>,
    a: Array2<f64>,
    bt: Array2<f64>,
    v_att: Array2<f64>,
    t_att: Array2<f64>,
    mt: Array2<f64>,
    mv: Array2<f64>,
    zt: Array2<f64>,
    zv: Array2<f64>,
    arg_t: Vec<usize>,
    arg_v: Vec<usize>,
}

fn check_width(out: &EncoderOutput, expected: usize, what: &str) -> Result<(), ModelError> {
    if out.hidden_dim() != expected {
        return Err(ModelError::InvalidInput(format!(
            "{what} hidden dim {} does not match parameters ({expected})",
            out.hidden_dim()
        )));
    }
    Ok(())
}

fn require_unmasked(mask: &[bool], what: &str) -> Result<(), ModelError> {
    if mask.iter().any(|&m| m) {
        Ok(())
    } else {
        Err(ModelError::Domain(format!("all {what} tokens are masked")))
    }
}

pub fn fuse_cross_attention(
    text: &EncoderOutput,
    image: &EncoderOutput,
    params: &CrossAttentionParams,
) -> Result<Array1<f64>, ModelError> {
    Ok(cross_attention_trace(text, image, params)?.fused)
}

pub fn cross_attention_trace(
    text: &EncoderOutput,
    image: &EncoderOutput,
    p: &CrossAttentionParams,
) -> Result<FusionTrace, ModelError> {
    check_width(text, p.wq.nrows(), "text")?;
    check_width(image, p.wk.nrows(), "image")?;
    require_unmasked(&image.mask, "image")?;
    require_unmasked(&text.mask, "text")?;
    let c = p.common_dim();
    if p.num_heads == 0 || c % p.num_heads != 0 {
        return Err(ModelError::Config(format!("common_dim {c} not divisible by {} heads", p.num_heads)));
    }
    let dh = c / p.num_heads;
    let scale = (dh as f64).sqrt();

    let q = add_bias(text.sequence.dot(&p.wq), &p.bq);
    let k = add_bias(image.sequence.dot(&p.wk), &p.bk);
    let v = add_bias(image.sequence.dot(&p.wv), &p.bv);
    let mut heads = Array2::zeros((text.len(), c));
    let mut attention = Vec::with_capacity(p.num_heads);
    for h in 0..p.num_heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let scores = q.slice(cols).dot(&k.slice(cols).t()) / scale;
        let a = masked_softmax_rows(scores.view(), &image.mask);
        heads.slice_mut(cols).assign(&a.dot(&v.slice(cols)));
        attention.push(AttentionMap {
            label: format!("head{h}"),
            weights: a,
            key_mask: image.mask.clone(),
        });
    }
    let o = add_bias(heads.dot(&p.wo), &p.bo);
    let pooled = masked_mean(&o, &text.mask);
    let fused = concatenate(Axis(0), &[pooled.view(), text.pooled.view()]).expect("1-d concat");
    Ok(FusionTrace {
        fused,
        attention,
        difference: None,
        cache: Cache::Cross { q, k, v, heads },
    })
}

pub fn fuse_semantic_similarity(
    text: &EncoderOutput,
    image: &EncoderOutput,
    params: &SemanticSimilarityParams,
) -> Result<Array1<f64>, ModelError> {
    Ok(semantic_similarity_trace(text, image, params)?.fused)
}

fn enhance(x: &Array2<f64>, aligned: &Array2<f64>) -> Array2<f64> {
    let diff = x - aligned;
    let prod = x * aligned;
    concatenate(Axis(1), &[x.view(), aligned.view(), diff.view(), prod.view()]).expect("same rows")
}

pub fn semantic_similarity_trace(
    text: &EncoderOutput,
    image: &EncoderOutput,
    p: &SemanticSimilarityParams,
) -> Result<FusionTrace, ModelError> {
    check_width(text, p.pt.nrows(), "text")?;
    check_width(image, p.pv.nrows(), "image")?;
    require_unmasked(&image.mask, "image")?;
    require_unmasked(&text.mask, "text")?;
    let c = p.common_dim();

    let tp = add_bias(text.sequence.dot(&p.pt), &p.bpt);
    let vp = add_bias(image.sequence.dot(&p.pv), &p.bpv);
    let e = tp.dot(&vp.t());
    let a = masked_softmax_rows(e.view(), &image.mask);
    let bt = masked_softmax_rows(e.t(), &text.mask);
    let v_att = a.dot(&vp);
    let t_att = bt.dot(&tp);
    let mt = enhance(&tp, &v_att);
    let mv = enhance(&vp, &t_att);
    let zt = add_bias(mt.dot(&p.wf), &p.bf);
    let zv = add_bias(mv.dot(&p.wf), &p.bf);
    let ct = zt.mapv(|z| z.max(0.0));
    let cv = zv.mapv(|z| z.max(0.0));
    let (max_t, arg_t) = masked_max(&ct, &text.mask);
    let (max_v, arg_v) = masked_max(&cv, &image.mask);
    let mean_t = masked_mean(&ct, &text.mask);
    let mean_v = masked_mean(&cv, &image.mask);
    let fused = concatenate(Axis(0), &[mean_t.view(), max_t.view(), mean_v.view(), max_v.view()]).expect("1-d concat");
    debug_assert_eq!(fused.len(), 4 * c);

    let difference = Some((
        mt.slice(s![.., 2 * c..3 * c]).to_owned(),
        mv.slice(s![.., 2 * c..3 * c]).to_owned(),
    ));
    let attention = vec![
        AttentionMap {
            label: "text-to-image".into(),
            weights: a.clone(),
            key_mask: image.mask.clone(),
        },
        AttentionMap {
            label: "image-to-text".into(),
            weights: bt.clone(),
            key_mask: text.mask.clone(),
        },
    ];
    Ok(FusionTrace {
        fused,
        attention,
        difference,
        cache: Cache::Semantic(Box::new(SemanticCache {
            tp,
            vp,
            a,
            bt,
            v_att,
            t_att,
            mt,
            mv,
            zt,
            zv,
            arg_t,
            arg_v,
        })),
    })
}

/// Gradient of a masked mean-pool, as a full matrix.
fn mean_pool_backward(d: ArrayView1<f64>, mask: &[bool]) -> Array2<f64> {
    let n = mask.iter().filter(|&&m| m).count() as f64;
    let mut out = Array2::zeros((mask.len(), d.len()));
    for (mut row, &m) in out.outer_iter_mut().zip(mask) {
        if m {
            row.assign(&(&d / n));
        }
    }
    out
}

pub(crate) fn cross_attention_backward(
    text: &EncoderOutput,
    image: &EncoderOutput,
    p: &CrossAttentionParams,
    trace: &FusionTrace,
    d_fused: ArrayView1<f64>,
) -> CrossAttentionParams {
    let Cache::Cross { q, k, v, heads } = &trace.cache else {
        panic!("cross-attention backward needs a cross-attention trace");
    };
    let c = p.common_dim();
    let dh = c / p.num_heads;
    let scale = (dh as f64).sqrt();

    let d_o = mean_pool_backward(d_fused.slice(s![..c]), &text.mask);
    let d_wo = heads.t().dot(&d_o);
    let d_bo = column_sums(&d_o);
    let d_heads = d_o.dot(&p.wo.t());

    let mut d_q = Array2::zeros(q.raw_dim());
    let mut d_k = Array2::zeros(k.raw_dim());
    let mut d_v = Array2::zeros(v.raw_dim());
    for (h, map) in trace.attention.iter().enumerate() {
        let cols = s![.., h * dh..(h + 1) * dh];
        let a = &map.weights;
        let dh_h = d_heads.slice(cols);
        let d_a = dh_h.dot(&v.slice(cols).t());
        d_v.slice_mut(cols).assign(&a.t().dot(&dh_h));
        let d_s = softmax_rows_backward(a, &d_a) / scale;
        d_q.slice_mut(cols).assign(&d_s.dot(&k.slice(cols)));
        d_k.slice_mut(cols).assign(&d_s.t().dot(&q.slice(cols)));
    }
    CrossAttentionParams {
        num_heads: p.num_heads,
        wq: text.sequence.t().dot(&d_q),
        bq: column_sums(&d_q),
        wk: image.sequence.t().dot(&d_k),
        bk: column_sums(&d_k),
        wv: image.sequence.t().dot(&d_v),
        bv: column_sums(&d_v),
        wo: d_wo,
        bo: d_bo,
    }
}

fn pool_backward(d_mean: ArrayView1<f64>, d_max: ArrayView1<f64>, arg: &[usize], mask: &[bool]) -> Array2<f64> {
    let mut out = mean_pool_backward(d_mean, mask);
    for (j, &i) in arg.iter().enumerate() {
        out[[i, j]] += d_max[j];
    }
    out
}

pub(crate) fn semantic_similarity_backward(
    text: &EncoderOutput,
    image: &EncoderOutput,
    p: &SemanticSimilarityParams,
    trace: &FusionTrace,
    d_fused: ArrayView1<f64>,
) -> SemanticSimilarityParams {
    let Cache::Semantic(cache) = &trace.cache else {
        panic!("semantic-similarity backward needs a semantic-similarity trace");
    };
    let SemanticCache {
        tp,
        vp,
        a,
        bt,
        v_att,
        t_att,
        mt,
        mv,
        zt,
        zv,
        arg_t,
        arg_v,
    } = cache.as_ref();
    let c = p.common_dim();
    let block = |k: usize| d_fused.slice(s![k * c..(k + 1) * c]);

    let relu_grad = |d: Array2<f64>, z: &Array2<f64>| {
        let mut d = d;
        d.zip_mut_with(z, |g, &z| {
            if z <= 0.0 {
                *g = 0.0;
            }
        });
        d
    };
    let d_zt = relu_grad(pool_backward(block(0), block(1), arg_t, &text.mask), zt);
    let d_zv = relu_grad(pool_backward(block(2), block(3), arg_v, &image.mask), zv);
    let d_wf = mt.t().dot(&d_zt) + mv.t().dot(&d_zv);
    let d_bf = column_sums(&d_zt) + column_sums(&d_zv);
    let d_mt = d_zt.dot(&p.wf.t());
    let d_mv = d_zv.dot(&p.wf.t());

    // [x ; x̃ ; x−x̃ ; x⊙x̃] → (dx, dx̃)
    let split = |d: &Array2<f64>, x: &Array2<f64>, aligned: &Array2<f64>| {
        let b = |k: usize| d.slice(s![.., k * c..(k + 1) * c]).to_owned();
        let (d1, d2, d3, d4) = (b(0), b(1), b(2), b(3));
        let dx = &d1 + &d3 + &(&d4 * aligned);
        let d_aligned = &d2 - &d3 + &(&d4 * x);
        (dx, d_aligned)
    };
    let (mut d_tp, d_vatt) = split(&d_mt, tp, v_att);
    let (mut d_vp, d_tatt) = split(&d_mv, vp, t_att);

    let d_a = d_vatt.dot(&vp.t());
    d_vp += &a.t().dot(&d_vatt);
    let d_bt = d_tatt.dot(&tp.t());
    d_tp += &bt.t().dot(&d_tatt);

    let d_e = softmax_rows_backward(a, &d_a) + softmax_rows_backward(bt, &d_bt).t();
    d_tp += &d_e.dot(vp);
    d_vp += &d_e.t().dot(tp);

    SemanticSimilarityParams {
        pt: text.sequence.t().dot(&d_tp),
        bpt: column_sums(&d_tp),
        pv: image.sequence.t().dot(&d_vp),
        bpv: column_sums(&d_vp),
        wf: d_wf,
        bf: d_bf,
    }
}

pub(crate) fn concat_trace(text: &EncoderOutput, image: &EncoderOutput) -> FusionTrace {
    FusionTrace {
        fused: fuse_concat(text, image),
        attention: Vec::new(),
        difference: None,
        cache: Cache::Concat,
    }
}
