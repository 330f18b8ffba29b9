//! Shape manipulation: reshape, concatenation, slicing, gather/scatter,
//! row broadcasts and indexed row tables.

use crate::element::{el, Element};
use crate::tape::{Tape, Var};
use ndarray::{s, Array1, Array2, ArrayD, Axis, Ix1, Ix2, IxDyn};
use std::rc::Rc;

fn to2<E: Element>(a: &ArrayD<E>) -> ndarray::ArrayView2<'_, E> {
    a.view().into_dimensionality::<Ix2>().expect("expected 2-d node")
}

impl<E: Element> Tape<E> {
    /// Reshape preserving element order. Total length must match.
    pub fn reshape(&self, x: Var, shape: &[usize]) -> Var {
        let xv = self.value(x);
        let old = xv.shape().to_vec();
        assert_eq!(
            xv.len(),
            shape.iter().product::<usize>(),
            "reshape length mismatch"
        );
        let data: Vec<E> = xv.as_standard_layout().iter().cloned().collect();
        let y = ArrayD::from_shape_vec(IxDyn(shape), data).unwrap();
        let rg = self.rg(&[x]);
        self.push(
            y,
            rg,
            Some(Box::new(move |g, _out, _values, sink| {
                let data: Vec<E> = g.as_standard_layout().iter().cloned().collect();
                sink(x.id, ArrayD::from_shape_vec(IxDyn(&old), data).unwrap());
            })),
        )
    }

    /// Concatenate 2-d nodes along rows (axis 0).
    pub fn concat_rows(&self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let views: Vec<ArrayD<E>> = parts.iter().map(|&p| self.value(p)).collect();
        let cols = views[0].shape()[1];
        let mut offsets = Vec::with_capacity(parts.len());
        let mut total = 0usize;
        for v in &views {
            assert_eq!(v.ndim(), 2);
            assert_eq!(v.shape()[1], cols, "concat_rows column mismatch");
            offsets.push(total);
            total += v.shape()[0];
        }
        let mut out = Array2::<E>::zeros((total, cols));
        for (v, &off) in views.iter().zip(&offsets) {
            out.slice_mut(s![off..off + v.shape()[0], ..]).assign(&to2(v));
        }
        let rg = self.rg(parts);
        let parts: Vec<Var> = parts.to_vec();
        let rows: Vec<usize> = views.iter().map(|v| v.shape()[0]).collect();
        self.push(
            out.into_dyn(),
            rg,
            Some(Box::new(move |g, _out, _values, sink| {
                let g2 = to2(g);
                for ((p, &off), &r) in parts.iter().zip(&offsets).zip(&rows) {
                    sink(p.id, g2.slice(s![off..off + r, ..]).to_owned().into_dyn());
                }
            })),
        )
    }

    /// Concatenate 2-d nodes along columns (axis 1).
    pub fn concat_cols(&self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let views: Vec<ArrayD<E>> = parts.iter().map(|&p| self.value(p)).collect();
        let rows = views[0].shape()[0];
        let mut offsets = Vec::with_capacity(parts.len());
        let mut total = 0usize;
        for v in &views {
            assert_eq!(v.ndim(), 2);
            assert_eq!(v.shape()[0], rows, "concat_cols row mismatch");
            offsets.push(total);
            total += v.shape()[1];
        }
        let mut out = Array2::<E>::zeros((rows, total));
        for (v, &off) in views.iter().zip(&offsets) {
            out.slice_mut(s![.., off..off + v.shape()[1]]).assign(&to2(v));
        }
        let rg = self.rg(parts);
        let parts: Vec<Var> = parts.to_vec();
        let cols: Vec<usize> = views.iter().map(|v| v.shape()[1]).collect();
        self.push(
            out.into_dyn(),
            rg,
            Some(Box::new(move |g, _out, _values, sink| {
                let g2 = to2(g);
                for ((p, &off), &c) in parts.iter().zip(&offsets).zip(&cols) {
                    sink(p.id, g2.slice(s![.., off..off + c]).to_owned().into_dyn());
                }
            })),
        )
    }

    /// Rows `[start, end)` of a 2-d node.
    pub fn slice_rows(&self, x: Var, start: usize, end: usize) -> Var {
        let (y, n, cols) = self.with_value(x, |xv| {
            let x2 = to2(xv);
            (
                x2.slice(s![start..end, ..]).to_owned().into_dyn(),
                x2.nrows(),
                x2.ncols(),
            )
        });
        let rg = self.rg(&[x]);
        self.push(
            y,
            rg,
            Some(Box::new(move |g, _out, _values, sink| {
                let mut dx = Array2::<E>::zeros((n, cols));
                dx.slice_mut(s![start..end, ..]).assign(&to2(g));
                sink(x.id, dx.into_dyn());
            })),
        )
    }

    /// Columns `[start, end)` of a 2-d node.
    pub fn slice_cols(&self, x: Var, start: usize, end: usize) -> Var {
        let (y, n, cols) = self.with_value(x, |xv| {
            let x2 = to2(xv);
            (
                x2.slice(s![.., start..end]).to_owned().into_dyn(),
                x2.nrows(),
                x2.ncols(),
            )
        });
        let rg = self.rg(&[x]);
        self.push(
            y,
            rg,
            Some(Box::new(move |g, _out, _values, sink| {
                let mut dx = Array2::<E>::zeros((n, cols));
                dx.slice_mut(s![.., start..end]).assign(&to2(g));
                sink(x.id, dx.into_dyn());
            })),
        )
    }

    /// Select rows of a 2-d node by index (duplicates allowed).
    pub fn gather_rows(&self, x: Var, idx: Rc<Vec<usize>>) -> Var {
        let (y, n, cols) = self.with_value(x, |xv| {
            let x2 = to2(xv);
            let mut out = Array2::<E>::zeros((idx.len(), x2.ncols()));
            for (i, &r) in idx.iter().enumerate() {
                out.row_mut(i).assign(&x2.row(r));
            }
            (out.into_dyn(), x2.nrows(), x2.ncols())
        });
        let rg = self.rg(&[x]);
        self.push(
            y,
            rg,
            Some(Box::new(move |g, _out, _values, sink| {
                let g2 = to2(g);
                let mut dx = Array2::<E>::zeros((n, cols));
                for (i, &r) in idx.iter().enumerate() {
                    let mut row = dx.row_mut(r);
                    row += &g2.row(i);
                }
                sink(x.id, dx.into_dyn());
            })),
        )
    }

    /// Place rows of `x` into an `n_out`-row zero matrix at `idx`
    /// (indices must be unique).
    pub fn scatter_rows(&self, x: Var, idx: Rc<Vec<usize>>, n_out: usize) -> Var {
        let y = self.with_value(x, |xv| {
            let x2 = to2(xv);
            assert_eq!(x2.nrows(), idx.len());
            let mut out = Array2::<E>::zeros((n_out, x2.ncols()));
            for (i, &r) in idx.iter().enumerate() {
                out.row_mut(r).assign(&x2.row(i));
            }
            out.into_dyn()
        });
        let rg = self.rg(&[x]);
        self.push(
            y,
            rg,
            Some(Box::new(move |g, _out, _values, sink| {
                let g2 = to2(g);
                let mut dx = Array2::<E>::zeros((idx.len(), g2.ncols()));
                for (i, &r) in idx.iter().enumerate() {
                    dx.row_mut(i).assign(&g2.row(r));
                }
                sink(x.id, dx.into_dyn());
            })),
        )
    }

    /// Repeat a length-`d` vector into `n` rows.
    pub fn broadcast_row(&self, x: Var, n: usize) -> Var {
        let y = self.with_value(x, |xv| {
            let x1 = xv.view().into_dimensionality::<Ix1>().expect("expected 1-d node");
            let mut out = Array2::<E>::zeros((n, x1.len()));
            for mut row in out.rows_mut() {
                row.assign(&x1);
            }
            out.into_dyn()
        });
        let rg = self.rg(&[x]);
        self.push(
            y,
            rg,
            Some(Box::new(move |g, _out, _values, sink| {
                let g2 = to2(g);
                let dx = g2.sum_axis(Axis(0));
                sink(x.id, dx.into_dyn());
            })),
        )
    }

    /// `[n, d] + [d]` broadcast add.
    pub fn add_row(&self, x: Var, b: Var) -> Var {
        let y = self.with_value(x, |xv| {
            self.with_value(b, |bv| {
                let x2 = to2(xv);
                let b1 = bv.view().into_dimensionality::<Ix1>().expect("bias must be 1-d");
                assert_eq!(x2.ncols(), b1.len(), "add_row width mismatch");
                (&x2 + &b1).into_dyn()
            })
        });
        let rg = self.rg(&[x, b]);
        self.push(
            y,
            rg,
            Some(Box::new(move |g, _out, _values, sink| {
                let g2 = to2(g);
                sink(b.id, g2.sum_axis(Axis(0)).into_dyn());
                sink(x.id, g.clone());
            })),
        )
    }

    /// `out[i] = x[i] + table[ids[i]]` where `table` is `[k, d]`.
    pub fn add_indexed_rows(&self, x: Var, table: Var, ids: Rc<Vec<usize>>) -> Var {
        let (y, k) = self.with_value(x, |xv| {
            self.with_value(table, |tv| {
                let x2 = to2(xv);
                let t2 = to2(tv);
                assert_eq!(x2.nrows(), ids.len(), "add_indexed_rows id count mismatch");
                assert_eq!(x2.ncols(), t2.ncols(), "add_indexed_rows width mismatch");
                let mut out = x2.to_owned();
                for (i, &id) in ids.iter().enumerate() {
                    let mut row = out.row_mut(i);
                    row += &t2.row(id);
                }
                (out.into_dyn(), t2.nrows())
            })
        });
        let rg = self.rg(&[x, table]);
        self.push(
            y,
            rg,
            Some(Box::new(move |g, _out, _values, sink| {
                let g2 = to2(g);
                let mut dt = Array2::<E>::zeros((k, g2.ncols()));
                for (i, &id) in ids.iter().enumerate() {
                    let mut row = dt.row_mut(id);
                    row += &g2.row(i);
                }
                sink(table.id, dt.into_dyn());
                sink(x.id, g.clone());
            })),
        )
    }

    /// Scale each row of a 2-d node by a fixed (non-differentiated) weight.
    pub fn scale_rows(&self, x: Var, w: Rc<Vec<E>>) -> Var {
        let y = self.with_value(x, |xv| {
            let x2 = to2(xv);
            assert_eq!(x2.nrows(), w.len(), "scale_rows weight count mismatch");
            let mut out = x2.to_owned();
            for (i, mut row) in out.rows_mut().into_iter().enumerate() {
                row.mapv_inplace(|v| v * w[i]);
            }
            out.into_dyn()
        });
        let rg = self.rg(&[x]);
        self.push(
            y,
            rg,
            Some(Box::new(move |g, _out, _values, sink| {
                let g2 = to2(g);
                let mut dx = g2.to_owned();
                for (i, mut row) in dx.rows_mut().into_iter().enumerate() {
                    row.mapv_inplace(|v| v * w[i]);
                }
                sink(x.id, dx.into_dyn());
            })),
        )
    }

    /// Sum over the last axis of a 2-d node: `[n, d] -> [n]`.
    pub fn sum_rows(&self, x: Var) -> Var {
        let (y, cols) = self.with_value(x, |xv| {
            let x2 = to2(xv);
            (x2.sum_axis(Axis(1)).into_dyn(), x2.ncols())
        });
        let rg = self.rg(&[x]);
        self.push(
            y,
            rg,
            Some(Box::new(move |g, _out, _values, sink| {
                let g1 = g.view().into_dimensionality::<Ix1>().unwrap();
                let mut dx = Array2::<E>::zeros((g1.len(), cols));
                for (i, mut row) in dx.rows_mut().into_iter().enumerate() {
                    row.fill(g1[i]);
                }
                sink(x.id, dx.into_dyn());
            })),
        )
    }

    /// Mean over the last axis of a 2-d node: `[n, d] -> [n]`.
    pub fn mean_rows(&self, x: Var) -> Var {
        let d = self.shape(x)[1];
        let s = self.sum_rows(x);
        self.mul_scalar(s, E::one() / el::<E>(d as f64))
    }

    /// Mean over rows of a 2-d node: `[n, d] -> [d]`.
    pub fn mean_over_rows(&self, x: Var) -> Var {
        let (y, n) = self.with_value(x, |xv| {
            let x2 = to2(xv);
            let n = x2.nrows();
            (
                (x2.sum_axis(Axis(0)) / el::<E>(n as f64)).into_dyn(),
                n,
            )
        });
        let rg = self.rg(&[x]);
        self.push(
            y,
            rg,
            Some(Box::new(move |g, _out, _values, sink| {
                let g1 = g.view().into_dimensionality::<Ix1>().unwrap();
                let scale = E::one() / el::<E>(n as f64);
                let mut dx = Array2::<E>::zeros((n, g1.len()));
                for mut row in dx.rows_mut() {
                    row.assign(&g1);
                    row.mapv_inplace(|v| v * scale);
                }
                sink(x.id, dx.into_dyn());
            })),
        )
    }

    /// Builds a 1-d constant node.
    pub fn const_vec(&self, v: Vec<E>) -> Var {
        self.constant(Array1::from_vec(v).into_dyn())
    }
}
