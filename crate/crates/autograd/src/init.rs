//! Seeded weight initializers.

use crate::element::{el, Element};
use ndarray::{ArrayD, IxDyn};
use rand::Rng;

pub fn zeros<E: Element>(shape: &[usize]) -> ArrayD<E> {
    ArrayD::zeros(IxDyn(shape))
}

pub fn full<E: Element>(shape: &[usize], value: f64) -> ArrayD<E> {
    ArrayD::from_elem(IxDyn(shape), el::<E>(value))
}

/// Uniform(-limit, limit).
pub fn uniform<E: Element>(rng: &mut impl Rng, shape: &[usize], limit: f64) -> ArrayD<E> {
    let n: usize = shape.iter().product();
    let data: Vec<E> = (0..n)
        .map(|_| el::<E>(rng.random_range(-limit..limit)))
        .collect();
    ArrayD::from_shape_vec(IxDyn(shape), data).unwrap()
}

/// Xavier/Glorot uniform for a `[fan_in, fan_out]` matrix.
pub fn xavier_uniform<E: Element>(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> ArrayD<E> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    uniform(rng, &[fan_in, fan_out], limit)
}

/// Normal(0, std) truncated at two standard deviations.
pub fn trunc_normal<E: Element>(rng: &mut impl Rng, shape: &[usize], std: f64) -> ArrayD<E> {
    let n: usize = shape.iter().product();
    let data: Vec<E> = (0..n).map(|_| el::<E>(sample_trunc(rng, std))).collect();
    ArrayD::from_shape_vec(IxDyn(shape), data).unwrap()
}

fn sample_trunc(rng: &mut impl Rng, std: f64) -> f64 {
    loop {
        // Box-Muller; rejection keeps |x| <= 2 std
        let u1: f64 = rng.random::<f64>().max(1e-12);
        let u2: f64 = rng.random();
        let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        if z.abs() <= 2.0 {
            return z * std;
        }
    }
}

/// Kaiming-style uniform for conv kernels `[out, in, kh, kw]`.
pub fn conv_uniform<E: Element>(rng: &mut impl Rng, shape: &[usize]) -> ArrayD<E> {
    assert_eq!(shape.len(), 4);
    let fan_in = shape[1] * shape[2] * shape[3];
    let limit = (1.0 / fan_in as f64).sqrt();
    uniform(rng, shape, limit)
}
