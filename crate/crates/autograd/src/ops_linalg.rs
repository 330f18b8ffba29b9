//! Matrix multiply, convolution, normalization, softmax and multi-head
//! attention. The heavy ops parallelize over fixed-size chunks so results
//! do not depend on thread count.

use crate::element::{el, Element};
use crate::tape::{Tape, Var};
use ndarray::{s, Array1, Array2, Array3, Array4, ArrayD, ArrayView2, ArrayView3, Axis, Ix1, Ix2, Ix4};
use rayon::prelude::*;

const PAR_FLOP_THRESHOLD: usize = 1 << 21;

/// Row-parallel matrix multiply. Deterministic: output blocks are disjoint.
pub fn pmm<E: Element>(a: ArrayView2<'_, E>, b: ArrayView2<'_, E>) -> Array2<E> {
    let (m, k) = a.dim();
    let (k2, n) = b.dim();
    assert_eq!(k, k2, "matmul inner dimension mismatch");
    if m * k * n < PAR_FLOP_THRESHOLD || rayon::current_num_threads() <= 1 {
        return a.dot(&b);
    }
    let chunk = m.div_ceil(rayon::current_num_threads() * 2).max(16);
    let mut out = Array2::<E>::zeros((m, n));
    out.axis_chunks_iter_mut(Axis(0), chunk)
        .into_par_iter()
        .zip(a.axis_chunks_iter(Axis(0), chunk).into_par_iter())
        .for_each(|(mut oc, ac)| oc.assign(&ac.dot(&b)));
    out
}

fn to2<E: Element>(a: &ArrayD<E>) -> ArrayView2<'_, E> {
    a.view().into_dimensionality::<Ix2>().expect("expected 2-d node")
}

impl<E: Element> Tape<E> {
    /// `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&self, a: Var, b: Var) -> Var {
        let y = self.with_value(a, |av| {
            self.with_value(b, |bv| pmm(to2(av), to2(bv)).into_dyn())
        });
        let rg = self.rg(&[a, b]);
        self.push(
            y,
            rg,
            Some(Box::new(move |g, _out, values, sink| {
                let g2 = to2(g);
                let av = to2(&values[a.id]);
                let bv = to2(&values[b.id]);
                sink(a.id, pmm(g2, bv.t()).into_dyn());
                sink(b.id, pmm(av.t().as_standard_layout().view(), g2).into_dyn());
            })),
        )
    }

    /// `x @ w + bias` for 2-d `x`.
    pub fn linear(&self, x: Var, w: Var, b: Var) -> Var {
        let xw = self.matmul(x, w);
        self.add_row(xw, b)
    }

    /// NCHW convolution via im2col. `x: [n, c, h, w]`, `w: [o, c, kh, kw]`,
    /// `bias: [o]`.
    pub fn conv2d(&self, x: Var, w: Var, bias: Var, stride: usize, pad: usize) -> Var {
        let (y, dims) = self.with_value(x, |xv| {
            self.with_value(w, |wv| {
                self.with_value(bias, |bv| {
                    let x4 = xv.view().into_dimensionality::<Ix4>().expect("conv input must be 4-d");
                    let w4 = wv.view().into_dimensionality::<Ix4>().expect("conv weight must be 4-d");
                    let b1 = bv.view().into_dimensionality::<Ix1>().expect("conv bias must be 1-d");
                    let (n, c, h, wd) = x4.dim();
                    let (o, cw, kh, kw) = w4.dim();
                    assert_eq!(c, cw, "conv channel mismatch");
                    assert_eq!(b1.len(), o, "conv bias size mismatch");
                    let oh = (h + 2 * pad - kh) / stride + 1;
                    let ow = (wd + 2 * pad - kw) / stride + 1;
                    let wmat = w4.to_shape((o, c * kh * kw)).unwrap().to_owned();

                    let mut out = Array4::<E>::zeros((n, o, oh, ow));
                    let imgs: Vec<ArrayView3<'_, E>> =
                        x4.outer_iter().collect();
                    let results: Vec<Array2<E>> = imgs
                        .par_iter()
                        .map(|img| {
                            let cols = im2col(img, kh, kw, stride, pad, oh, ow);
                            let mut om = wmat.dot(&cols);
                            for (mut row, &b) in om.rows_mut().into_iter().zip(b1.iter()) {
                                row.mapv_inplace(|v| v + b);
                            }
                            om
                        })
                        .collect();
                    for (i, om) in results.into_iter().enumerate() {
                        out.slice_mut(s![i, .., .., ..])
                            .assign(&om.into_shape_with_order((o, oh, ow)).unwrap());
                    }
                    (out.into_dyn(), (n, c, h, wd, o, kh, kw, oh, ow))
                })
            })
        });
        let rg = self.rg(&[x, w, bias]);
        self.push(
            y,
            rg,
            Some(Box::new(move |g, _out, values, sink| {
                let (n, c, h, wd, o, kh, kw, oh, ow) = dims;
                let g4 = g.view().into_dimensionality::<Ix4>().unwrap();
                let x4 = values[x.id].view().into_dimensionality::<Ix4>().unwrap();
                let wmat = values[w.id]
                    .view()
                    .into_dimensionality::<Ix4>()
                    .unwrap()
                    .to_shape((o, c * kh * kw))
                    .unwrap()
                    .to_owned();

                struct Partial<E> {
                    dw: Array2<E>,
                    db: Array1<E>,
                    dx: Vec<(usize, Array3<E>)>,
                }
                let chunk = n.div_ceil(rayon::current_num_threads().max(1)).max(1);
                let ranges: Vec<(usize, usize)> = (0..n)
                    .step_by(chunk)
                    .map(|st| (st, (st + chunk).min(n)))
                    .collect();
                let partials: Vec<Partial<E>> = ranges
                    .par_iter()
                    .map(|&(st, en)| {
                        let mut dw = Array2::<E>::zeros((o, c * kh * kw));
                        let mut db = Array1::<E>::zeros(o);
                        let mut dx = Vec::with_capacity(en - st);
                        for i in st..en {
                            let img = x4.index_axis(Axis(0), i);
                            let cols = im2col(&img, kh, kw, stride, pad, oh, ow);
                            let gm = g4
                                .index_axis(Axis(0), i)
                                .to_shape((o, oh * ow))
                                .unwrap()
                                .to_owned();
                            dw = dw + gm.dot(&cols.t());
                            db = db + gm.sum_axis(Axis(1));
                            let dcols = wmat.t().dot(&gm);
                            dx.push((i, col2im(&dcols, c, h, wd, kh, kw, stride, pad, oh, ow)));
                        }
                        Partial { dw, db, dx }
                    })
                    .collect();

                let mut dw = Array2::<E>::zeros((o, c * kh * kw));
                let mut db = Array1::<E>::zeros(o);
                let mut dx = Array4::<E>::zeros((n, c, h, wd));
                for p in partials {
                    dw += &p.dw;
                    db += &p.db;
                    for (i, di) in p.dx {
                        dx.slice_mut(s![i, .., .., ..]).assign(&di);
                    }
                }
                sink(
                    w.id,
                    dw.into_shape_with_order((o, c, kh, kw)).unwrap().into_dyn(),
                );
                sink(bias.id, db.into_dyn());
                sink(x.id, dx.into_dyn());
            })),
        )
    }

    /// Row-wise layer normalization with affine parameters.
    pub fn layer_norm(&self, x: Var, gamma: Var, beta: Var, eps: E) -> Var {
        let y = self.with_value(x, |xv| {
            self.with_value(gamma, |gv| {
                self.with_value(beta, |bv| {
                    let x2 = to2(xv);
                    let g1 = gv.view().into_dimensionality::<Ix1>().unwrap();
                    let b1 = bv.view().into_dimensionality::<Ix1>().unwrap();
                    let d = x2.ncols();
                    assert_eq!(g1.len(), d);
                    assert_eq!(b1.len(), d);
                    let mut out = Array2::<E>::zeros(x2.raw_dim());
                    let inv_d = E::one() / el::<E>(d as f64);
                    for (row, mut orow) in x2.rows().into_iter().zip(out.rows_mut()) {
                        let mu = row.sum() * inv_d;
                        let var = row.fold(E::zero(), |acc, &v| acc + (v - mu) * (v - mu)) * inv_d;
                        let sinv = E::one() / (var + eps).sqrt();
                        for j in 0..d {
                            orow[j] = (row[j] - mu) * sinv * g1[j] + b1[j];
                        }
                    }
                    out.into_dyn()
                })
            })
        });
        let rg = self.rg(&[x, gamma, beta]);
        self.push(
            y,
            rg,
            Some(Box::new(move |g, _out, values, sink| {
                let g2 = to2(g);
                let x2 = to2(&values[x.id]);
                let gam = values[gamma.id].view().into_dimensionality::<Ix1>().unwrap();
                let d = x2.ncols();
                let inv_d = E::one() / el::<E>(d as f64);
                let mut dx = Array2::<E>::zeros(x2.raw_dim());
                let mut dgamma = Array1::<E>::zeros(d);
                let mut dbeta = Array1::<E>::zeros(d);
                for ((xrow, grow), mut drow) in
                    x2.rows().into_iter().zip(g2.rows()).zip(dx.rows_mut())
                {
                    let mu = xrow.sum() * inv_d;
                    let var =
                        xrow.fold(E::zero(), |acc, &v| acc + (v - mu) * (v - mu)) * inv_d;
                    let sinv = E::one() / (var + eps).sqrt();
                    let mut mean_h = E::zero();
                    let mut mean_hx = E::zero();
                    for j in 0..d {
                        let xh = (xrow[j] - mu) * sinv;
                        let h = grow[j] * gam[j];
                        mean_h += h;
                        mean_hx += h * xh;
                        dgamma[j] += grow[j] * xh;
                        dbeta[j] += grow[j];
                    }
                    mean_h *= inv_d;
                    mean_hx *= inv_d;
                    for j in 0..d {
                        let xh = (xrow[j] - mu) * sinv;
                        let h = grow[j] * gam[j];
                        drow[j] = sinv * (h - mean_h - xh * mean_hx);
                    }
                }
                sink(gamma.id, dgamma.into_dyn());
                sink(beta.id, dbeta.into_dyn());
                sink(x.id, dx.into_dyn());
            })),
        )
    }

    /// Row-wise softmax of a 2-d node.
    pub fn softmax_rows(&self, x: Var) -> Var {
        let y = self.with_value(x, |xv| {
            let mut out = to2(xv).to_owned();
            for mut row in out.rows_mut() {
                softmax_in_place(row.as_slice_mut().unwrap());
            }
            out.into_dyn()
        });
        let rg = self.rg(&[x]);
        self.push(
            y,
            rg,
            Some(Box::new(move |g, out, values, sink| {
                // dx = y * (g - rowsum(g * y))
                let g2 = to2(g);
                let y2 = to2(&values[out]);
                let mut dx = g2.to_owned();
                for (mut drow, yrow) in dx.rows_mut().into_iter().zip(y2.rows()) {
                    let dot = drow
                        .iter()
                        .zip(yrow.iter())
                        .fold(E::zero(), |acc, (&a, &b)| acc + a * b);
                    for (de, &ye) in drow.iter_mut().zip(yrow.iter()) {
                        *de = ye * (*de - dot);
                    }
                }
                sink(x.id, dx.into_dyn());
            })),
        )
    }

    /// Row-wise log-softmax of a 2-d node.
    pub fn log_softmax_rows(&self, x: Var) -> Var {
        let y = self.with_value(x, |xv| {
            let mut out = to2(xv).to_owned();
            for mut row in out.rows_mut() {
                let slice = row.as_slice_mut().unwrap();
                let max = slice.iter().cloned().fold(E::neg_infinity(), E::max);
                let mut lse = E::zero();
                for v in slice.iter() {
                    lse += (*v - max).exp();
                }
                let lse = lse.ln() + max;
                for v in slice.iter_mut() {
                    *v = *v - lse;
                }
            }
            out.into_dyn()
        });
        let rg = self.rg(&[x]);
        self.push(
            y,
            rg,
            Some(Box::new(move |g, out, values, sink| {
                // dx = g - exp(y) * rowsum(g)
                let g2 = to2(g);
                let y2 = to2(&values[out]);
                let mut dx = g2.to_owned();
                for (mut drow, yrow) in dx.rows_mut().into_iter().zip(y2.rows()) {
                    let gsum = drow.iter().fold(E::zero(), |acc, &a| acc + a);
                    for (de, &ye) in drow.iter_mut().zip(yrow.iter()) {
                        *de = *de - ye.exp() * gsum;
                    }
                }
                sink(x.id, dx.into_dyn());
            })),
        )
    }

    /// Block-diagonal multi-head self/cross attention.
    ///
    /// `q`, `k`, `v` are `[n, d]`; `segments` gives contiguous block sizes
    /// summing to `n`; attention is computed independently per block and
    /// head with scale `1/sqrt(d/heads)`.
    pub fn attention(&self, q: Var, k: Var, v: Var, heads: usize, segments: std::rc::Rc<Vec<usize>>) -> Var {
        let (y, probs) = self.with_value(q, |qv| {
            self.with_value(k, |kv| {
                self.with_value(v, |vv| {
                    attention_forward(to2(qv), to2(kv), to2(vv), heads, &segments)
                })
            })
        });
        let rg = self.rg(&[q, k, v]);
        let segs = segments.clone();
        self.push(
            y.into_dyn(),
            rg,
            Some(Box::new(move |g, _out, values, sink| {
                let (dq, dk, dv) = attention_backward(
                    to2(g),
                    to2(&values[q.id]),
                    to2(&values[k.id]),
                    to2(&values[v.id]),
                    heads,
                    &segs,
                    &probs,
                );
                sink(q.id, dq.into_dyn());
                sink(k.id, dk.into_dyn());
                sink(v.id, dv.into_dyn());
            })),
        )
    }
}

fn softmax_in_place<E: Element>(row: &mut [E]) {
    let max = row.iter().cloned().fold(E::neg_infinity(), E::max);
    let mut sum = E::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    let inv = E::one() / sum;
    for v in row.iter_mut() {
        *v *= inv;
    }
}

fn im2col<E: Element>(
    img: &ArrayView3<'_, E>,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
) -> Array2<E> {
    let (c, h, w) = img.dim();
    let mut cols = Array2::<E>::zeros((c * kh * kw, oh * ow));
    for ci in 0..c {
        for ky in 0..kh {
            for kx in 0..kw {
                let r = (ci * kh + ky) * kw + kx;
                let mut row = cols.row_mut(r);
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for ox in 0..ow {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        row[oy * ow + ox] = img[(ci, iy as usize, ix as usize)];
                    }
                }
            }
        }
    }
    cols
}

#[allow(clippy::too_many_arguments)]
fn col2im<E: Element>(
    dcols: &Array2<E>,
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
) -> Array3<E> {
    let mut img = Array3::<E>::zeros((c, h, w));
    for ci in 0..c {
        for ky in 0..kh {
            for kx in 0..kw {
                let r = (ci * kh + ky) * kw + kx;
                let row = dcols.row(r);
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for ox in 0..ow {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        img[(ci, iy as usize, ix as usize)] += row[oy * ow + ox];
                    }
                }
            }
        }
    }
    img
}

type HeadProbs<E> = Vec<Vec<Array2<E>>>;

fn attention_forward<E: Element>(
    q: ArrayView2<'_, E>,
    k: ArrayView2<'_, E>,
    v: ArrayView2<'_, E>,
    heads: usize,
    segments: &[usize],
) -> (Array2<E>, HeadProbs<E>) {
    let (n, d) = q.dim();
    assert_eq!(k.dim(), (n, d), "attention k shape mismatch");
    assert_eq!(v.dim(), (n, d), "attention v shape mismatch");
    assert_eq!(d % heads, 0, "width must divide heads");
    assert_eq!(segments.iter().sum::<usize>(), n, "segments must cover rows");
    let dh = d / heads;
    let scale = el::<E>(1.0 / (dh as f64).sqrt());

    let mut starts = Vec::with_capacity(segments.len());
    let mut acc = 0;
    for &sgl in segments {
        starts.push(acc);
        acc += sgl;
    }

    let per_seg: Vec<(Array2<E>, Vec<Array2<E>>)> = segments
        .par_iter()
        .enumerate()
        .map(|(si, &sl)| {
            let st = starts[si];
            let mut out = Array2::<E>::zeros((sl, d));
            let mut probs = Vec::with_capacity(heads);
            for hj in 0..heads {
                let cols = hj * dh..(hj + 1) * dh;
                let qh = q.slice(s![st..st + sl, cols.clone()]);
                let kh_ = k.slice(s![st..st + sl, cols.clone()]);
                let vh = v.slice(s![st..st + sl, cols.clone()]);
                let mut scores = qh.dot(&kh_.t());
                scores.mapv_inplace(|x| x * scale);
                for mut row in scores.rows_mut() {
                    softmax_in_place(row.as_slice_mut().unwrap());
                }
                let oh = scores.dot(&vh);
                out.slice_mut(s![.., cols]).assign(&oh);
                probs.push(scores);
            }
            (out, probs)
        })
        .collect();

    let mut out = Array2::<E>::zeros((n, d));
    let mut probs = Vec::with_capacity(segments.len());
    for (si, (block, p)) in per_seg.into_iter().enumerate() {
        out.slice_mut(s![starts[si]..starts[si] + segments[si], ..])
            .assign(&block);
        probs.push(p);
    }
    (out, probs)
}

#[allow(clippy::too_many_arguments)]
fn attention_backward<E: Element>(
    g: ArrayView2<'_, E>,
    q: ArrayView2<'_, E>,
    k: ArrayView2<'_, E>,
    v: ArrayView2<'_, E>,
    heads: usize,
    segments: &[usize],
    probs: &HeadProbs<E>,
) -> (Array2<E>, Array2<E>, Array2<E>) {
    let (n, d) = q.dim();
    let dh = d / heads;
    let scale = el::<E>(1.0 / (dh as f64).sqrt());
    let mut starts = Vec::with_capacity(segments.len());
    let mut acc = 0;
    for &sgl in segments {
        starts.push(acc);
        acc += sgl;
    }

    let per_seg: Vec<(Array2<E>, Array2<E>, Array2<E>)> = segments
        .par_iter()
        .enumerate()
        .map(|(si, &sl)| {
            let st = starts[si];
            let mut dq = Array2::<E>::zeros((sl, d));
            let mut dk = Array2::<E>::zeros((sl, d));
            let mut dv = Array2::<E>::zeros((sl, d));
            for hj in 0..heads {
                let cols = hj * dh..(hj + 1) * dh;
                let qh = q.slice(s![st..st + sl, cols.clone()]);
                let kh_ = k.slice(s![st..st + sl, cols.clone()]);
                let vh = v.slice(s![st..st + sl, cols.clone()]);
                let gh = g.slice(s![st..st + sl, cols.clone()]);
                let p = &probs[si][hj];
                // dV = P^T G
                dv.slice_mut(s![.., cols.clone()]).assign(&p.t().dot(&gh));
                // dP = G V^T ; dS = P * (dP - rowsum(dP * P))
                let dp = gh.dot(&vh.t());
                let mut ds = dp.clone();
                for (mut dsrow, prow) in ds.rows_mut().into_iter().zip(p.rows()) {
                    let dot = dsrow
                        .iter()
                        .zip(prow.iter())
                        .fold(E::zero(), |acc, (&a, &b)| acc + a * b);
                    for (dse, &pe) in dsrow.iter_mut().zip(prow.iter()) {
                        *dse = pe * (*dse - dot);
                    }
                }
                ds.mapv_inplace(|x| x * scale);
                dq.slice_mut(s![.., cols.clone()]).assign(&ds.dot(&kh_));
                dk.slice_mut(s![.., cols]).assign(&ds.t().dot(&qh));
            }
            (dq, dk, dv)
        })
        .collect();

    let mut dq = Array2::<E>::zeros((n, d));
    let mut dk = Array2::<E>::zeros((n, d));
    let mut dv = Array2::<E>::zeros((n, d));
    for (si, (bq, bk, bv)) in per_seg.into_iter().enumerate() {
        let r = starts[si]..starts[si] + segments[si];
        dq.slice_mut(s![r.clone(), ..]).assign(&bq);
        dk.slice_mut(s![r.clone(), ..]).assign(&bk);
        dv.slice_mut(s![r, ..]).assign(&bv);
    }
    (dq, dk, dv)
}
