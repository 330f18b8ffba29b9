//! Elementwise operations and full reductions.

use crate::element::{el, Element};
use crate::tape::{Tape, Var};
use ndarray::{ArrayD, IxDyn, Zip};

impl<E: Element> Tape<E> {
    fn unary(&self, x: Var, f: impl Fn(E) -> E, df: impl Fn(E) -> E + 'static) -> Var {
        let y = self.with_value(x, |xv| xv.mapv(&f));
        let rg = self.rg(&[x]);
        self.push(
            y,
            rg,
            Some(Box::new(move |g, _out, values, sink| {
                let xv = &values[x.id];
                let mut dx = g.clone();
                // df receives (input, grad slot is multiplied in place)
                Zip::from(&mut dx).and(xv).for_each(|d, &xe| *d *= df(xe));
                sink(x.id, dx);
            })),
        )
    }

    /// Elementwise binary op on same-shape arrays with custom partials.
    fn binary(
        &self,
        a: Var,
        b: Var,
        f: impl Fn(E, E) -> E,
        dfa: impl Fn(E, E) -> E + 'static,
        dfb: impl Fn(E, E) -> E + 'static,
    ) -> Var {
        let y = self.with_value(a, |av| {
            self.with_value(b, |bv| {
                assert_eq!(av.shape(), bv.shape(), "binary op shape mismatch");
                let mut out = av.clone();
                Zip::from(&mut out).and(bv).for_each(|o, &be| *o = f(*o, be));
                out
            })
        });
        let rg = self.rg(&[a, b]);
        self.push(
            y,
            rg,
            Some(Box::new(move |g, _out, values, sink| {
                let av = &values[a.id];
                let bv = &values[b.id];
                let mut da = g.clone();
                Zip::from(&mut da)
                    .and(av)
                    .and(bv)
                    .for_each(|d, &ae, &be| *d *= dfa(ae, be));
                sink(a.id, da);
                let mut db = g.clone();
                Zip::from(&mut db)
                    .and(av)
                    .and(bv)
                    .for_each(|d, &ae, &be| *d *= dfb(ae, be));
                sink(b.id, db);
            })),
        )
    }

    pub fn add(&self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x + y, |_, _| E::one(), |_, _| E::one())
    }

    pub fn sub(&self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x - y, |_, _| E::one(), |_, _| -E::one())
    }

    pub fn mul(&self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x * y, |_, y| y, |x, _| x)
    }

    pub fn div(&self, a: Var, b: Var) -> Var {
        self.binary(
            a,
            b,
            |x, y| x / y,
            |_, y| E::one() / y,
            |x, y| -x / (y * y),
        )
    }

    pub fn neg(&self, x: Var) -> Var {
        self.unary(x, |v| -v, |_| -E::one())
    }

    pub fn add_scalar(&self, x: Var, c: E) -> Var {
        self.unary(x, move |v| v + c, |_| E::one())
    }

    pub fn mul_scalar(&self, x: Var, c: E) -> Var {
        self.unary(x, move |v| v * c, move |_| c)
    }

    pub fn exp(&self, x: Var) -> Var {
        self.unary(x, |v| v.exp(), |xe| xe.exp())
    }

    pub fn ln(&self, x: Var) -> Var {
        self.unary(x, |v| v.ln(), |xe| E::one() / xe)
    }

    pub fn sqrt(&self, x: Var) -> Var {
        self.unary(
            x,
            |v| v.sqrt(),
            |xe| el::<E>(0.5) / xe.sqrt(),
        )
    }

    pub fn square(&self, x: Var) -> Var {
        self.unary(x, |v| v * v, |xe| el::<E>(2.0) * xe)
    }

    pub fn tanh(&self, x: Var) -> Var {
        self.unary(x, |v| v.tanh(), |xe| {
            let t = xe.tanh();
            E::one() - t * t
        })
    }

    pub fn sigmoid(&self, x: Var) -> Var {
        self.unary(x, |v| sigmoid_scalar(v), |xe| {
            let s = sigmoid_scalar(xe);
            s * (E::one() - s)
        })
    }

    pub fn softplus(&self, x: Var) -> Var {
        self.unary(x, |v| softplus_scalar(v), |xe| sigmoid_scalar(xe))
    }

    /// GELU with the tanh approximation.
    pub fn gelu(&self, x: Var) -> Var {
        self.unary(x, |v| gelu_scalar(v), |xe| gelu_grad_scalar(xe))
    }

    /// `max(x, c)` with subgradient 0 on the clamped side (including at the
    /// kink).
    pub fn max_scalar(&self, x: Var, c: E) -> Var {
        self.unary(
            x,
            move |v| if v > c { v } else { c },
            move |xe| if xe > c { E::one() } else { E::zero() },
        )
    }

    pub fn relu(&self, x: Var) -> Var {
        self.max_scalar(x, E::zero())
    }

    /// Detach: forwards the value, blocks the gradient.
    pub fn stop_grad(&self, x: Var) -> Var {
        let v = self.value(x);
        self.constant(v)
    }

    /// Forward value `onehot`, backward identity into `probs`
    /// (straight-through estimator).
    pub fn straight_through(&self, probs: Var, onehot: ArrayD<E>) -> Var {
        self.with_value(probs, |p| {
            assert_eq!(p.shape(), onehot.shape(), "straight_through shape mismatch")
        });
        let rg = self.rg(&[probs]);
        self.push(
            onehot,
            rg,
            Some(Box::new(move |g, _out, _values, sink| {
                sink(probs.id, g.clone());
            })),
        )
    }

    pub fn sum_all(&self, x: Var) -> Var {
        let s = self.with_value(x, |xv| xv.sum());
        let rg = self.rg(&[x]);
        self.push(
            ArrayD::from_elem(IxDyn(&[1]), s),
            rg,
            Some(Box::new(move |g, _out, values, sink| {
                let ge = g[[0]];
                sink(x.id, ArrayD::from_elem(values[x.id].raw_dim(), ge));
            })),
        )
    }

    pub fn mean_all(&self, x: Var) -> Var {
        let (s, n) = self.with_value(x, |xv| (xv.sum(), xv.len()));
        let inv = E::one() / el::<E>(n as f64);
        let rg = self.rg(&[x]);
        self.push(
            ArrayD::from_elem(IxDyn(&[1]), s * inv),
            rg,
            Some(Box::new(move |g, _out, values, sink| {
                let ge = g[[0]] * inv;
                sink(x.id, ArrayD::from_elem(values[x.id].raw_dim(), ge));
            })),
        )
    }
}

pub(crate) fn sigmoid_scalar<E: Element>(x: E) -> E {
    if x >= E::zero() {
        E::one() / (E::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (E::one() + e)
    }
}

pub(crate) fn softplus_scalar<E: Element>(x: E) -> E {
    // max(x, 0) + ln(1 + exp(-|x|)), stable for large |x|
    let m = if x > E::zero() { x } else { E::zero() };
    m + (E::one() + (-x.abs()).exp()).ln()
}

fn gelu_scalar<E: Element>(x: E) -> E {
    let c = el::<E>(0.797_884_560_802_865_4); // sqrt(2/pi)
    let k = el::<E>(0.044715);
    let half = el::<E>(0.5);
    half * x * (E::one() + (c * (x + k * x * x * x)).tanh())
}

fn gelu_grad_scalar<E: Element>(x: E) -> E {
    let c = el::<E>(0.797_884_560_802_865_4);
    let k = el::<E>(0.044715);
    let half = el::<E>(0.5);
    let three = el::<E>(3.0);
    let u = c * (x + k * x * x * x);
    let t = u.tanh();
    let sech2 = E::one() - t * t;
    half * (E::one() + t) + half * x * sech2 * c * (E::one() + three * k * x * x)
}
