//! Finite-difference validation of every tape operation, in f64.

use mvmwm_autograd::{Tape, Var};
use ndarray::{Array2, ArrayD, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::rc::Rc;

fn randa(rng: &mut ChaCha8Rng, shape: &[usize]) -> ArrayD<f64> {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    ArrayD::from_shape_vec(IxDyn(shape), data).unwrap()
}

/// Builds `out = build(tape, leaves)`, reduces it to a scalar with a fixed
/// random weighting, and compares analytic gradients of every input against
/// central finite differences.
fn check_op(seed: u64, inputs: &[ArrayD<f64>], build: impl Fn(&Tape<f64>, &[Var]) -> Var) {
    let eval = |ins: &[ArrayD<f64>]| -> f64 {
        let tape = Tape::<f64>::new();
        let vars: Vec<Var> = ins.iter().map(|a| tape.leaf(a.clone())).collect();
        let out = build(&tape, &vars);
        let mut wrng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let w = tape.constant(randa(&mut wrng, &tape.shape(out)));
        let weighted = tape.mul(out, w);
        tape.scalar_value(tape.sum_all(weighted))
    };

    // analytic
    let tape = Tape::<f64>::new();
    let vars: Vec<Var> = inputs.iter().map(|a| tape.leaf(a.clone())).collect();
    let out = build(&tape, &vars);
    let mut wrng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let w = tape.constant(randa(&mut wrng, &tape.shape(out)));
    let weighted = tape.mul(out, w);
    let loss = tape.sum_all(weighted);
    let mut grads = tape.backward(loss);

    let mut work: Vec<ArrayD<f64>> = inputs.to_vec();
    for (vi, var) in vars.iter().enumerate() {
        let g = grads
            .take(*var)
            .unwrap_or_else(|| ArrayD::zeros(inputs[vi].raw_dim()));
        let n = inputs[vi].len();
        for j in 0..n {
            let x0 = work[vi].as_slice().unwrap()[j];
            let h = 1e-6 * x0.abs().max(1.0);
            work[vi].as_slice_mut().unwrap()[j] = x0 + h;
            let fp = eval(&work);
            work[vi].as_slice_mut().unwrap()[j] = x0 - h;
            let fm = eval(&work);
            work[vi].as_slice_mut().unwrap()[j] = x0;
            let numeric = (fp - fm) / (2.0 * h);
            let analytic = g.as_slice().unwrap()[j];
            let denom = analytic.abs().max(numeric.abs()).max(1.0);
            assert!(
                (analytic - numeric).abs() / denom < 1e-6,
                "input {vi} index {j}: analytic {analytic} vs numeric {numeric}"
            );
        }
    }
}

#[test]
fn pointwise_binary_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = randa(&mut rng, &[3, 4]);
    let b = randa(&mut rng, &[3, 4]).mapv(|x| x + 2.5); // keep divisor away from 0
    check_op(1, &[a.clone(), b.clone()], |t, v| t.add(v[0], v[1]));
    check_op(2, &[a.clone(), b.clone()], |t, v| t.sub(v[0], v[1]));
    check_op(3, &[a.clone(), b.clone()], |t, v| t.mul(v[0], v[1]));
    check_op(4, &[a, b], |t, v| t.div(v[0], v[1]));
}

#[test]
fn pointwise_unary_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = randa(&mut rng, &[2, 5]);
    let pos = x.mapv(|v| v.abs() + 0.5);
    check_op(10, &[x.clone()], |t, v| t.neg(v[0]));
    check_op(11, &[x.clone()], |t, v| t.add_scalar(v[0], 0.7));
    check_op(12, &[x.clone()], |t, v| t.mul_scalar(v[0], -1.3));
    check_op(13, &[x.clone()], |t, v| t.exp(v[0]));
    check_op(14, &[pos.clone()], |t, v| t.ln(v[0]));
    check_op(15, &[pos], |t, v| t.sqrt(v[0]));
    check_op(16, &[x.clone()], |t, v| t.square(v[0]));
    check_op(17, &[x.clone()], |t, v| t.tanh(v[0]));
    check_op(18, &[x.clone()], |t, v| t.sigmoid(v[0]));
    check_op(19, &[x.clone()], |t, v| t.softplus(v[0]));
    check_op(20, &[x.clone()], |t, v| t.gelu(v[0]));
    // keep away from the kink so FD is valid
    let shifted = x.mapv(|v| if v.abs() < 0.05 { v + 0.2 } else { v });
    check_op(21, &[shifted], |t, v| t.max_scalar(v[0], 0.0));
}

#[test]
fn reductions() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = randa(&mut rng, &[4, 3]);
    check_op(30, &[x.clone()], |t, v| t.sum_all(v[0]));
    check_op(31, &[x.clone()], |t, v| t.mean_all(v[0]));
    check_op(32, &[x.clone()], |t, v| t.sum_rows(v[0]));
    check_op(33, &[x.clone()], |t, v| t.mean_rows(v[0]));
    check_op(34, &[x], |t, v| t.mean_over_rows(v[0]));
}

#[test]
fn shape_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = randa(&mut rng, &[4, 6]);
    let y = randa(&mut rng, &[2, 6]);
    let z = randa(&mut rng, &[4, 2]);
    check_op(40, &[x.clone()], |t, v| t.reshape(v[0], &[2, 12]));
    check_op(41, &[x.clone(), y], |t, v| t.concat_rows(&[v[0], v[1]]));
    check_op(42, &[x.clone(), z], |t, v| t.concat_cols(&[v[0], v[1]]));
    check_op(43, &[x.clone()], |t, v| t.slice_rows(v[0], 1, 3));
    check_op(44, &[x.clone()], |t, v| t.slice_cols(v[0], 2, 5));
    check_op(45, &[x.clone()], |t, v| {
        t.gather_rows(v[0], Rc::new(vec![0, 2, 2, 3]))
    });
    check_op(46, &[x.clone()], |t, v| {
        t.scatter_rows(v[0], Rc::new(vec![5, 1, 7, 0]), 9)
    });
    let b = randa(&mut rng, &[6]);
    check_op(47, &[b.clone()], |t, v| t.broadcast_row(v[0], 5));
    check_op(48, &[x.clone(), b], |t, v| t.add_row(v[0], v[1]));
    let table = randa(&mut rng, &[3, 6]);
    check_op(49, &[x.clone(), table], |t, v| {
        t.add_indexed_rows(v[0], v[1], Rc::new(vec![2, 0, 0, 1]))
    });
    check_op(50, &[x], |t, v| {
        t.scale_rows(v[0], Rc::new(vec![0.5, -1.0, 2.0, 0.0]))
    });
}

#[test]
fn matmul_and_norms() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = randa(&mut rng, &[3, 4]);
    let b = randa(&mut rng, &[4, 5]);
    check_op(60, &[a.clone(), b], |t, v| t.matmul(v[0], v[1]));

    let x = randa(&mut rng, &[4, 6]);
    let gamma = randa(&mut rng, &[6]).mapv(|v| v + 1.5);
    let beta = randa(&mut rng, &[6]);
    check_op(61, &[x.clone(), gamma, beta], |t, v| {
        t.layer_norm(v[0], v[1], v[2], 1e-5)
    });
    check_op(62, &[x.clone()], |t, v| t.softmax_rows(v[0]));
    check_op(63, &[x], |t, v| t.log_softmax_rows(v[0]));
}

#[test]
fn conv2d_gradient_and_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = randa(&mut rng, &[2, 3, 6, 6]);
    let w = randa(&mut rng, &[4, 3, 4, 4]);
    let b = randa(&mut rng, &[4]);
    check_op(70, &[x.clone(), w.clone(), b.clone()], |t, v| {
        t.conv2d(v[0], v[1], v[2], 2, 1)
    });

    // value check against a naive direct convolution
    let tape = Tape::<f64>::new();
    let xv = tape.constant(x.clone());
    let wv = tape.constant(w.clone());
    let bv = tape.constant(b.clone());
    let out = tape.value(tape.conv2d(xv, wv, bv, 2, 1));
    let (stride, pad) = (2usize, 1usize);
    let (oh, ow) = (3usize, 3usize);
    for n in 0..2 {
        for o in 0..4 {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b[[o]];
                    for c in 0..3 {
                        for ky in 0..4 {
                            for kx in 0..4 {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if iy >= 0 && iy < 6 && ix >= 0 && ix < 6 {
                                    acc += x[[n, c, iy as usize, ix as usize]]
                                        * w[[o, c, ky, kx]];
                                }
                            }
                        }
                    }
                    let got = out[[n, o, oy, ox]];
                    assert!((got - acc).abs() < 1e-10, "conv mismatch at {n},{o},{oy},{ox}");
                }
            }
        }
    }
}

#[test]
fn attention_gradient_and_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let q = randa(&mut rng, &[7, 8]);
    let k = randa(&mut rng, &[7, 8]);
    let v = randa(&mut rng, &[7, 8]);
    let segs = Rc::new(vec![3usize, 4]);
    {
        let segs = segs.clone();
        check_op(80, &[q.clone(), k.clone(), v.clone()], move |t, vars| {
            t.attention(vars[0], vars[1], vars[2], 2, segs.clone())
        });
    }

    // single-head value check against an explicit softmax(QK^T/sqrt(d))V
    let tape = Tape::<f64>::new();
    let qv = tape.constant(q.clone());
    let kv = tape.constant(k.clone());
    let vv = tape.constant(v.clone());
    let out = tape.value(tape.attention(qv, kv, vv, 1, Rc::new(vec![7])));
    let q2 = q.into_dimensionality::<ndarray::Ix2>().unwrap();
    let k2 = k.into_dimensionality::<ndarray::Ix2>().unwrap();
    let v2 = v.into_dimensionality::<ndarray::Ix2>().unwrap();
    let mut scores = q2.dot(&k2.t());
    scores.mapv_inplace(|x| x / (8.0f64).sqrt());
    let mut probs = Array2::<f64>::zeros((7, 7));
    for (i, row) in scores.rows().into_iter().enumerate() {
        let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|&s| (s - mx).exp()).collect();
        let sum: f64 = exps.iter().sum();
        for (j, e) in exps.iter().enumerate() {
            probs[[i, j]] = e / sum;
        }
    }
    let reference = probs.dot(&v2);
    for i in 0..7 {
        for j in 0..8 {
            assert!((out[[i, j]] - reference[[i, j]]).abs() < 1e-10);
        }
    }
}

#[test]
fn stop_grad_blocks_and_straight_through_passes() {
    let tape = Tape::<f64>::new();
    let x = tape.leaf(ArrayD::from_elem(IxDyn(&[2, 2]), 1.5));
    let sg = tape.stop_grad(x);
    let y = tape.mul(sg, x); // only the direct x path carries gradient
    let loss = tape.sum_all(y);
    let mut grads = tape.backward(loss);
    let gx = grads.take(x).unwrap();
    for &g in gx.iter() {
        assert_eq!(g, 1.5, "stop_grad must block its branch");
    }

    let tape = Tape::<f64>::new();
    let probs = tape.leaf(ArrayD::from_shape_vec(IxDyn(&[1, 3]), vec![0.2, 0.5, 0.3]).unwrap());
    let onehot = ArrayD::from_shape_vec(IxDyn(&[1, 3]), vec![0.0, 1.0, 0.0]).unwrap();
    let st = tape.straight_through(probs, onehot.clone());
    assert_eq!(tape.value(st), onehot, "forward must be the one-hot sample");
    let wsum = tape.mul(st, tape.constant(ArrayD::from_shape_vec(IxDyn(&[1, 3]), vec![3.0, 5.0, 7.0]).unwrap()));
    let loss = tape.sum_all(wsum);
    let mut grads = tape.backward(loss);
    let gp = grads.take(probs).unwrap();
    assert_eq!(gp.as_slice().unwrap(), &[3.0, 5.0, 7.0], "backward must pass through to probs");
}

#[test]
fn backward_accumulates_shared_nodes() {
    let tape = Tape::<f64>::new();
    let x = tape.leaf(ArrayD::from_elem(IxDyn(&[2]), 2.0));
    let y = tape.add(x, x); // dy/dx = 2
    let z = tape.mul(y, x); // z = 2x^2, dz/dx = 4x = 8
    let loss = tape.sum_all(z);
    let mut grads = tape.backward(loss);
    let gx = grads.take(x).unwrap();
    for &g in gx.iter() {
        assert!((g - 8.0).abs() < 1e-12);
    }
}
