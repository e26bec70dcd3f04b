//! Value-level tensor operations and the gradient rules the tape uses.
//!
//! Every function here is pure: inputs are borrowed and a fresh tensor is
//! returned. The `*_backward` functions map an upstream gradient to input
//! gradients.

use super::kernels::{gemm_nn, gemm_nt, gemm_tn};
use super::{numel, split_at_axis, strides, Real, Tensor};
use crate::error::{Error, Result};

/// Right-aligned broadcast of two shapes, or `None` if they do not conform.
pub fn broadcast_shapes(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i + a.len() >= rank { a[i + a.len() - rank] } else { 1 };
        let db = if i + b.len() >= rank { b[i + b.len() - rank] } else { 1 };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// Strides of `shape` right-aligned to `out`, zero on broadcast axes.
fn broadcast_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let own = strides(shape);
    let offset = out.len() - shape.len();
    (0..out.len())
        .map(|i| {
            if i < offset || shape[i - offset] == 1 {
                0
            } else {
                own[i - offset]
            }
        })
        .collect()
}

/// Visits every element of `out` in row-major order together with the
/// matching offsets of two broadcast operands.
fn for_each_pair(out: &[usize], sa: &[usize], sb: &[usize], mut f: impl FnMut(usize, usize, usize)) {
    let rank = out.len();
    if rank == 0 {
        f(0, 0, 0);
        return;
    }
    let inner = out[rank - 1];
    let (ia, ib) = (sa[rank - 1], sb[rank - 1]);
    let outer = numel(&out[..rank - 1]);
    let mut idx = vec![0usize; rank - 1];
    let (mut oa, mut ob) = (0usize, 0usize);
    for o in 0..outer {
        for j in 0..inner {
            f(o * inner + j, oa + j * ia, ob + j * ib);
        }
        for d in (0..rank - 1).rev() {
            idx[d] += 1;
            oa += sa[d];
            ob += sb[d];
            if idx[d] < out[d] {
                break;
            }
            oa -= sa[d] * out[d];
            ob -= sb[d] * out[d];
            idx[d] = 0;
        }
    }
}

fn zip_broadcast<T: Real>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
    if a.shape() == b.shape() {
        let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
        return Ok(Tensor::from_parts(a.shape().to_vec(), data));
    }
    let shape = broadcast_shapes(a.shape(), b.shape()).ok_or_else(|| Error::shape(op, a.shape(), b.shape()))?;
    let (sa, sb) = (
        broadcast_strides(a.shape(), &shape),
        broadcast_strides(b.shape(), &shape),
    );
    let mut data = vec![T::zero(); numel(&shape)];
    let (da, db) = (a.data(), b.data());
    for_each_pair(&shape, &sa, &sb, |o, ia, ib| data[o] = f(da[ia], db[ib]));
    Ok(Tensor::from_parts(shape, data))
}

pub fn add<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    zip_broadcast("add", a, b, |x, y| x + y)
}

pub fn sub<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    zip_broadcast("sub", a, b, |x, y| x - y)
}

pub fn mul<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    zip_broadcast("mul", a, b, |x, y| x * y)
}

/// Sums a gradient of a broadcast result back down to `shape`.
pub fn reduce_to_shape<T: Real>(grad: &Tensor<T>, shape: &[usize]) -> Tensor<T> {
    if grad.shape() == shape {
        return grad.clone();
    }
    let target = broadcast_strides(shape, grad.shape());
    let zero = vec![0; grad.rank()];
    let mut data = vec![T::zero(); numel(shape)];
    let g = grad.data();
    for_each_pair(grad.shape(), &target, &zero, |o, t, _| data[t] += g[o]);
    Tensor::from_parts(shape.to_vec(), data)
}

/// Index plan for a broadcast batched matrix product.
struct MatmulPlan {
    m: usize,
    k: usize,
    n: usize,
    out_shape: Vec<usize>,
    /// For each output matrix, the matrix index into `a` and `b`.
    pairs: Vec<(usize, usize)>,
}

impl MatmulPlan {
    fn new(a: &[usize], b: &[usize]) -> Result<Self> {
        if a.len() < 2 || b.len() < 2 {
            return Err(Error::shape("batched_matmul", a, b));
        }
        let (ab, am) = a.split_at(a.len() - 2);
        let (bb, bm) = b.split_at(b.len() - 2);
        let (m, k, k2, n) = (am[0], am[1], bm[0], bm[1]);
        if k != k2 {
            return Err(Error::shape("batched_matmul", a, b));
        }
        let batch = broadcast_shapes(ab, bb).ok_or_else(|| Error::shape("batched_matmul", a, b))?;
        let (sa, sb) = (broadcast_strides(ab, &batch), broadcast_strides(bb, &batch));
        let mut pairs = Vec::with_capacity(numel(&batch));
        for_each_pair(&batch, &sa, &sb, |_, ia, ib| pairs.push((ia, ib)));
        let mut out_shape = batch;
        out_shape.extend([m, n]);
        Ok(Self {
            m,
            k,
            n,
            out_shape,
            pairs,
        })
    }
}

/// `out[..., i, j] = Σ_t a[..., i, t] · b[..., t, j]` with broadcast leading axes.
pub fn batched_matmul<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let plan = MatmulPlan::new(a.shape(), b.shape())?;
    let (m, k, n) = (plan.m, plan.k, plan.n);
    let mut out = vec![T::zero(); numel(&plan.out_shape)];
    for (o, &(ia, ib)) in plan.pairs.iter().enumerate() {
        gemm_nn(
            &a.data()[ia * m * k..(ia + 1) * m * k],
            &b.data()[ib * k * n..(ib + 1) * k * n],
            &mut out[o * m * n..(o + 1) * m * n],
            m,
            k,
            n,
        );
    }
    Ok(Tensor::from_parts(plan.out_shape, out))
}

/// Gradients of one matmul operand each, `None` when not requested.
pub type OperandGrads<T> = (Option<Tensor<T>>, Option<Tensor<T>>);

/// Gradients of [`batched_matmul`]: `dA = dOut·Bᵀ`, `dB = Aᵀ·dOut`, each
/// summed over the axes along which that operand was broadcast.
pub fn batched_matmul_backward<T: Real>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    grad: &Tensor<T>,
    need_a: bool,
    need_b: bool,
) -> Result<OperandGrads<T>> {
    let plan = MatmulPlan::new(a.shape(), b.shape())?;
    if grad.shape() != plan.out_shape {
        return Err(Error::shape("batched_matmul_backward", grad.shape(), &plan.out_shape));
    }
    let (m, k, n) = (plan.m, plan.k, plan.n);
    let g = grad.data();
    let da = need_a.then(|| {
        let mut da = vec![T::zero(); a.len()];
        for (o, &(ia, ib)) in plan.pairs.iter().enumerate() {
            gemm_nt(
                &g[o * m * n..(o + 1) * m * n],
                &b.data()[ib * k * n..(ib + 1) * k * n],
                &mut da[ia * m * k..(ia + 1) * m * k],
                m,
                n,
                k,
            );
        }
        Tensor::from_parts(a.shape().to_vec(), da)
    });
    let db = need_b.then(|| {
        let mut db = vec![T::zero(); b.len()];
        for (o, &(ia, ib)) in plan.pairs.iter().enumerate() {
            gemm_tn(
                &a.data()[ia * m * k..(ia + 1) * m * k],
                &g[o * m * n..(o + 1) * m * n],
                &mut db[ib * k * n..(ib + 1) * k * n],
                k,
                m,
                n,
            );
        }
        Tensor::from_parts(b.shape().to_vec(), db)
    });
    Ok((da, db))
}

/// Swaps the last two axes.
pub fn transpose_last<T: Real>(a: &Tensor<T>) -> Result<Tensor<T>> {
    let r = a.rank();
    if r < 2 {
        return Err(Error::InvalidShape {
            shape: a.shape().to_vec(),
            reason: "transpose needs rank >= 2".into(),
        });
    }
    let (rows, cols) = (a.shape()[r - 2], a.shape()[r - 1]);
    let mut shape = a.shape().to_vec();
    shape.swap(r - 2, r - 1);
    let mut out = vec![T::zero(); a.len()];
    let block = rows * cols;
    for (src, dst) in a.data().chunks_exact(block).zip(out.chunks_exact_mut(block)) {
        for i in 0..rows {
            for j in 0..cols {
                dst[j * rows + i] = src[i * cols + j];
            }
        }
    }
    Ok(Tensor::from_parts(shape, out))
}

#[inline]
pub fn leaky_relu_scalar<T: Real>(x: T, alpha: T) -> T {
    if x >= T::zero() {
        x
    } else {
        alpha * x
    }
}

/// Derivative of leaky ReLU; the kink at 0 takes the nonnegative branch.
#[inline]
pub fn leaky_relu_grad_scalar<T: Real>(x: T, alpha: T) -> T {
    if x >= T::zero() {
        T::one()
    } else {
        alpha
    }
}

#[inline]
pub fn sigmoid_scalar<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn leaky_relu<T: Real>(a: &Tensor<T>, alpha: T) -> Tensor<T> {
    a.map(|x| leaky_relu_scalar(x, alpha))
}

pub fn sigmoid<T: Real>(a: &Tensor<T>) -> Tensor<T> {
    a.map(sigmoid_scalar)
}

/// Softmax along the last axis with max subtraction.
pub fn softmax_last<T: Real>(a: &Tensor<T>) -> Result<Tensor<T>> {
    let c = *a.shape().last().ok_or_else(|| Error::InvalidShape {
        shape: vec![],
        reason: "softmax needs rank >= 1".into(),
    })?;
    let mut out = a.data().to_vec();
    for row in out.chunks_exact_mut(c) {
        let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        let mut total = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v = *v / total;
        }
    }
    Ok(Tensor::from_parts(a.shape().to_vec(), out))
}

/// Gradient of softmax given its output `y` and upstream gradient `g`.
pub fn softmax_last_backward<T: Real>(y: &Tensor<T>, g: &Tensor<T>) -> Tensor<T> {
    let c = *y.shape().last().expect("softmax output has rank >= 1");
    let mut out = vec![T::zero(); y.len()];
    for ((yr, gr), or) in y
        .data()
        .chunks_exact(c)
        .zip(g.data().chunks_exact(c))
        .zip(out.chunks_exact_mut(c))
    {
        let inner: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
        for ((o, &yi), &gi) in or.iter_mut().zip(yr).zip(gr) {
            *o = yi * (gi - inner);
        }
    }
    Tensor::from_parts(y.shape().to_vec(), out)
}

fn check_axis(shape: &[usize], axis: usize) -> Result<()> {
    if axis >= shape.len() {
        return Err(Error::Axis {
            axis,
            rank: shape.len(),
        });
    }
    Ok(())
}

fn without_axis(shape: &[usize], axis: usize) -> Vec<usize> {
    let mut s = shape.to_vec();
    s.remove(axis);
    s
}

/// Arithmetic mean along `axis`; the axis is removed from the result.
pub fn mean_axis<T: Real>(a: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
    check_axis(a.shape(), axis)?;
    let (outer, extent, inner) = split_at_axis(a.shape(), axis);
    let scale = T::one() / T::of(extent as f64);
    let mut out = vec![T::zero(); outer * inner];
    let d = a.data();
    for o in 0..outer {
        let dst = &mut out[o * inner..(o + 1) * inner];
        for e in 0..extent {
            let src = &d[(o * extent + e) * inner..(o * extent + e + 1) * inner];
            for (x, &y) in dst.iter_mut().zip(src) {
                *x += y;
            }
        }
        for x in dst.iter_mut() {
            *x *= scale;
        }
    }
    Ok(Tensor::from_parts(without_axis(a.shape(), axis), out))
}

/// Spreads `g` (shape without `axis`) evenly back over `axis` of `shape`.
pub fn mean_axis_backward<T: Real>(g: &Tensor<T>, shape: &[usize], axis: usize) -> Tensor<T> {
    let (outer, extent, inner) = split_at_axis(shape, axis);
    let scale = T::one() / T::of(extent as f64);
    let mut out = vec![T::zero(); numel(shape)];
    for o in 0..outer {
        let src = &g.data()[o * inner..(o + 1) * inner];
        for e in 0..extent {
            let dst = &mut out[(o * extent + e) * inner..(o * extent + e + 1) * inner];
            for (x, &y) in dst.iter_mut().zip(src) {
                *x = y * scale;
            }
        }
    }
    Tensor::from_parts(shape.to_vec(), out)
}

pub fn sum_all<T: Real>(a: &Tensor<T>) -> Tensor<T> {
    Tensor::scalar(a.data().iter().copied().sum())
}

/// Slice `[start, start + len)` along `axis`, keeping the axis.
pub fn narrow<T: Real>(a: &Tensor<T>, axis: usize, start: usize, len: usize) -> Result<Tensor<T>> {
    check_axis(a.shape(), axis)?;
    let (outer, extent, inner) = split_at_axis(a.shape(), axis);
    if len == 0 || start + len > extent {
        return Err(Error::Validation(format!(
            "narrow [{start}, {}) out of range for extent {extent}",
            start + len
        )));
    }
    let mut out = Vec::with_capacity(outer * len * inner);
    for o in 0..outer {
        let base = (o * extent + start) * inner;
        out.extend_from_slice(&a.data()[base..base + len * inner]);
    }
    let mut shape = a.shape().to_vec();
    shape[axis] = len;
    Ok(Tensor::from_parts(shape, out))
}

/// Embeds `g` into zeros of `shape` at `[start, start + g.extent)` along `axis`.
pub fn narrow_backward<T: Real>(g: &Tensor<T>, shape: &[usize], axis: usize, start: usize) -> Tensor<T> {
    let (outer, extent, inner) = split_at_axis(shape, axis);
    let len = g.shape()[axis];
    let mut out = vec![T::zero(); numel(shape)];
    for o in 0..outer {
        let base = (o * extent + start) * inner;
        out[base..base + len * inner].copy_from_slice(&g.data()[o * len * inner..(o + 1) * len * inner]);
    }
    Tensor::from_parts(shape.to_vec(), out)
}

/// Zero-pads `axis` at the end up to `new_len`.
pub fn pad_axis<T: Real>(a: &Tensor<T>, axis: usize, new_len: usize) -> Result<Tensor<T>> {
    check_axis(a.shape(), axis)?;
    if new_len < a.shape()[axis] {
        return Err(Error::Validation(format!(
            "cannot pad extent {} down to {new_len}",
            a.shape()[axis]
        )));
    }
    let mut shape = a.shape().to_vec();
    shape[axis] = new_len;
    Ok(narrow_backward(a, &shape, axis, 0))
}

/// Index `index` along `axis`; the axis is removed.
pub fn select<T: Real>(a: &Tensor<T>, axis: usize, index: usize) -> Result<Tensor<T>> {
    let t = narrow(a, axis, index, 1)?;
    Ok(Tensor::from_parts(without_axis(a.shape(), axis), t.into_data()))
}

pub fn select_backward<T: Real>(g: &Tensor<T>, shape: &[usize], axis: usize, index: usize) -> Tensor<T> {
    let mut kept = shape.to_vec();
    kept[axis] = 1;
    let g = Tensor::from_parts(kept, g.data().to_vec());
    narrow_backward(&g, shape, axis, index)
}

/// Stacks equally shaped tensors along a new axis inserted at `axis`.
pub fn stack<T: Real>(items: &[&Tensor<T>], axis: usize) -> Result<Tensor<T>> {
    let first = items
        .first()
        .ok_or_else(|| Error::Validation("stack of zero tensors".into()))?;
    let base = first.shape();
    if axis > base.len() {
        return Err(Error::Axis {
            axis,
            rank: base.len() + 1,
        });
    }
    for t in items {
        if t.shape() != base {
            return Err(Error::shape("stack", base, t.shape()));
        }
    }
    let outer = numel(&base[..axis]);
    let inner = numel(&base[axis..]);
    let mut out = Vec::with_capacity(outer * items.len() * inner);
    for o in 0..outer {
        for t in items {
            out.extend_from_slice(&t.data()[o * inner..(o + 1) * inner]);
        }
    }
    let mut shape = base.to_vec();
    shape.insert(axis, items.len());
    Ok(Tensor::from_parts(shape, out))
}

/// Output spatial extent of a valid (unpadded) convolution.
pub fn conv_output_extent(input: usize, kernel: usize, stride: usize) -> Option<usize> {
    if kernel == 0 || stride == 0 || kernel > input {
        return None;
    }
    Some((input - kernel) / stride + 1)
}

struct ConvDims {
    n: usize,
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    k: usize,
    oh: usize,
    ow: usize,
}

fn conv_dims(x: &[usize], kernel: &[usize], bias: &[usize], stride: usize) -> Result<ConvDims> {
    if x.len() != 4 || kernel.len() != 4 {
        return Err(Error::shape("conv2d", x, kernel));
    }
    let (n, cin, h, w) = (x[0], x[1], x[2], x[3]);
    let (cout, kc, kh, kw) = (kernel[0], kernel[1], kernel[2], kernel[3]);
    if kc != cin || kh != kw || bias != [cout] {
        return Err(Error::shape("conv2d", x, kernel));
    }
    let (Some(oh), Some(ow)) = (conv_output_extent(h, kh, stride), conv_output_extent(w, kw, stride)) else {
        return Err(Error::shape("conv2d", x, kernel));
    };
    Ok(ConvDims {
        n,
        cin,
        h,
        w,
        cout,
        k: kh,
        oh,
        ow,
    })
}

/// Valid cross-correlation: `(N,C_in,H,W) ⋆ (C_out,C_in,K,K) + bias → (N,C_out,H',W')`.
pub fn conv2d<T: Real>(x: &Tensor<T>, kernel: &Tensor<T>, bias: &Tensor<T>, stride: usize) -> Result<Tensor<T>> {
    let d = conv_dims(x.shape(), kernel.shape(), bias.shape(), stride)?;
    let (xs, ks, bs) = (x.data(), kernel.data(), bias.data());
    let mut out = vec![T::zero(); d.n * d.cout * d.oh * d.ow];
    for n in 0..d.n {
        for o in 0..d.cout {
            let dst = &mut out[(n * d.cout + o) * d.oh * d.ow..(n * d.cout + o + 1) * d.oh * d.ow];
            dst.fill(bs[o]);
            for c in 0..d.cin {
                let img = &xs[(n * d.cin + c) * d.h * d.w..(n * d.cin + c + 1) * d.h * d.w];
                let ker = &ks[(o * d.cin + c) * d.k * d.k..(o * d.cin + c + 1) * d.k * d.k];
                for ky in 0..d.k {
                    for kx in 0..d.k {
                        let kv = ker[ky * d.k + kx];
                        for oy in 0..d.oh {
                            let row = &img[(oy * stride + ky) * d.w..];
                            for ox in 0..d.ow {
                                dst[oy * d.ow + ox] += kv * row[ox * stride + kx];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(Tensor::from_parts(vec![d.n, d.cout, d.oh, d.ow], out))
}

/// Input, kernel and bias gradients of [`conv2d`].
pub fn conv2d_backward<T: Real>(
    x: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    grad: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let d = conv_dims(x.shape(), kernel.shape(), bias.shape(), stride)?;
    if grad.shape() != [d.n, d.cout, d.oh, d.ow] {
        return Err(Error::shape(
            "conv2d_backward",
            grad.shape(),
            &[d.n, d.cout, d.oh, d.ow],
        ));
    }
    let (xs, ks, gs) = (x.data(), kernel.data(), grad.data());
    let mut dx = vec![T::zero(); x.len()];
    let mut dk = vec![T::zero(); kernel.len()];
    let mut db = vec![T::zero(); d.cout];
    for n in 0..d.n {
        for o in 0..d.cout {
            let g = &gs[(n * d.cout + o) * d.oh * d.ow..(n * d.cout + o + 1) * d.oh * d.ow];
            db[o] += g.iter().copied().sum::<T>();
            for c in 0..d.cin {
                let img_off = (n * d.cin + c) * d.h * d.w;
                let ker_off = (o * d.cin + c) * d.k * d.k;
                for ky in 0..d.k {
                    for kx in 0..d.k {
                        let kv = ks[ker_off + ky * d.k + kx];
                        let mut acc = T::zero();
                        for oy in 0..d.oh {
                            for ox in 0..d.ow {
                                let gv = g[oy * d.ow + ox];
                                let xi = img_off + (oy * stride + ky) * d.w + ox * stride + kx;
                                acc += gv * xs[xi];
                                dx[xi] += gv * kv;
                            }
                        }
                        dk[ker_off + ky * d.k + kx] += acc;
                    }
                }
            }
        }
    }
    Ok((
        Tensor::from_parts(x.shape().to_vec(), dx),
        Tensor::from_parts(kernel.shape().to_vec(), dk),
        Tensor::from_parts(bias.shape().to_vec(), db),
    ))
}

fn check_binary_targets<T: Real>(logits: &Tensor<T>, target: &Tensor<T>) -> Result<()> {
    if logits.shape() != target.shape() {
        return Err(Error::shape("bce_with_logits", logits.shape(), target.shape()));
    }
    if let Some(bad) = target.data().iter().find(|&&t| t != T::zero() && t != T::one()) {
        return Err(Error::Validation(format!("binary target must be 0 or 1, got {bad}")));
    }
    Ok(())
}

/// Mean binary cross-entropy on logits: `max(z,0) − z·t + ln(1 + e^{−|z|})`.
pub fn bce_with_logits<T: Real>(logits: &Tensor<T>, target: &Tensor<T>) -> Result<T> {
    check_binary_targets(logits, target)?;
    let total: T = logits
        .data()
        .iter()
        .zip(target.data())
        .map(|(&z, &t)| z.max(T::zero()) - z * t + (-z.abs()).exp().ln_1p())
        .sum();
    Ok(total / T::of(logits.len() as f64))
}

pub fn bce_with_logits_backward<T: Real>(logits: &Tensor<T>, target: &Tensor<T>, g: T) -> Tensor<T> {
    let scale = g / T::of(logits.len() as f64);
    let data = logits
        .data()
        .iter()
        .zip(target.data())
        .map(|(&z, &t)| (sigmoid_scalar(z) - t) * scale)
        .collect();
    Tensor::from_parts(logits.shape().to_vec(), data)
}

fn check_labels<T: Real>(logits: &Tensor<T>, labels: &[usize]) -> Result<(usize, usize)> {
    let &[n, c] = logits.shape() else {
        return Err(Error::InvalidShape {
            shape: logits.shape().to_vec(),
            reason: "cross entropy expects (N, C) logits".into(),
        });
    };
    if labels.len() != n {
        return Err(Error::shape("cross_entropy", logits.shape(), &[labels.len()]));
    }
    if let Some(bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::Validation(format!("label {bad} out of range for {c} classes")));
    }
    Ok((n, c))
}

/// Mean over rows of `−log softmax(logits)[label]`.
pub fn cross_entropy<T: Real>(logits: &Tensor<T>, labels: &[usize]) -> Result<T> {
    let (n, c) = check_labels(logits, labels)?;
    let mut total = T::zero();
    for (row, &label) in logits.data().chunks_exact(c).zip(labels) {
        let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        let lse = row.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
        total += lse - row[label];
    }
    Ok(total / T::of(n as f64))
}

pub fn cross_entropy_backward<T: Real>(logits: &Tensor<T>, labels: &[usize], g: T) -> Result<Tensor<T>> {
    let (n, c) = check_labels(logits, labels)?;
    let mut probs = softmax_last(logits)?;
    let scale = g / T::of(n as f64);
    for (row, &label) in probs.data_mut().chunks_exact_mut(c).zip(labels) {
        row[label] -= T::one();
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    Ok(probs)
}
