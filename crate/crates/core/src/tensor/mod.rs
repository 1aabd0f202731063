//! Dense tensors and the reverse-mode tape.
//!
//! Values are immutable once produced by an op; gradients are computed by
//! a single reverse sweep over a [`Tape`]. Storage is `f32` in the training
//! path; every routine is generic over [`Element`] so verification tests can
//! run the identical code in `f64`.

pub mod conv;
pub mod gradcheck;
pub mod svd;
pub mod tape;

pub use gradcheck::{grad_check, GradCheckReport};
pub use tape::{Gradients, Tape, Var};

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use std::fmt;

/// Scalar element type of a tensor. Implemented for `f32` and `f64`.
pub trait Element:
    num_traits::Float
    + num_traits::NumAssign
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + fmt::Debug
    + fmt::Display
    + Default
    + Send
    + Sync
    + 'static
{
    const DTYPE_NAME: &'static str;

    fn from_f64(x: f64) -> Self {
        num_traits::NumCast::from(x).expect("finite scalar conversion")
    }

    fn to_f64_val(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("finite scalar conversion")
    }

    /// Cube root of machine epsilon; the central-difference step scale.
    fn fd_step() -> f64;
}

impl Element for f32 {
    const DTYPE_NAME: &'static str = "f32";
    fn fd_step() -> f64 {
        (f32::EPSILON as f64).cbrt()
    }
}

impl Element for f64 {
    const DTYPE_NAME: &'static str = "f64";
    fn fd_step() -> f64 {
        f64::EPSILON.cbrt()
    }
}

/// Dense n-dimensional array with an optional gradient slot.
#[derive(Clone, Debug, Default)]
pub struct Tensor<E: Element> {
    shape: Vec<usize>,
    data: Vec<E>,
    grad: Option<Vec<E>>,
}

impl<E: Element> PartialEq for Tensor<E> {
    /// Value equality: shape and data; the gradient slot is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape && self.data == other.data
    }
}

impl<E: Element> Tensor<E> {
    pub fn new(shape: Vec<usize>, data: Vec<E>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::dim(format!("zero-sized dimension in {shape:?}")));
        }
        if data.len() != expect {
            return Err(Error::dim(format!(
                "data length {} does not match shape {:?} (= {} elements)",
                data.len(),
                shape,
                expect
            )));
        }
        Ok(Tensor {
            shape,
            data,
            grad: None,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![E::zero(); n],
            grad: None,
        }
    }

    pub fn full(shape: &[usize], value: E) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
            grad: None,
        }
    }

    pub fn scalar(value: E) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![value],
            grad: None,
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> E) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: (0..n).map(&mut f).collect(),
            grad: None,
        }
    }

    /// Standard-normal samples, drawn in index order.
    pub fn randn(shape: &[usize], rng: &mut impl Rng) -> Self {
        Self::from_fn(shape, |_| {
            let x: f64 = rng.sample(StandardNormal);
            E::from_f64(x)
        })
    }

    /// Uniform samples in `[lo, hi)`.
    pub fn rand_uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut impl Rng) -> Self {
        Self::from_fn(shape, |_| E::from_f64(rng.random_range(lo..hi)))
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[E] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [E] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<E> {
        self.data
    }

    pub fn grad(&self) -> Option<&[E]> {
        self.grad.as_deref()
    }

    pub fn set_grad(&mut self, grad: Vec<E>) -> Result<()> {
        if grad.len() != self.data.len() {
            return Err(Error::dim(format!(
                "gradient length {} does not match tensor length {}",
                grad.len(),
                self.data.len()
            )));
        }
        self.grad = Some(grad);
        Ok(())
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    /// Scalar value of a single-element tensor.
    pub fn item(&self) -> E {
        assert_eq!(self.data.len(), 1, "item() on non-scalar tensor");
        self.data[0]
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor<E>> {
        let expect: usize = shape.iter().product();
        if expect != self.data.len() {
            return Err(Error::dim(format!(
                "cannot reshape {:?} ({} elements) to {:?}",
                self.shape,
                self.data.len(),
                shape
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data: self.data.clone(),
            grad: None,
        })
    }

    pub fn map(&self, f: impl Fn(E) -> E) -> Tensor<E> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
            grad: None,
        }
    }

    pub fn zip_map(&self, other: &Tensor<E>, f: impl Fn(E, E) -> E) -> Result<Tensor<E>> {
        if self.shape != other.shape {
            return Err(Error::dim(format!(
                "shape mismatch {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            grad: None,
        })
    }

    pub fn add(&self, other: &Tensor<E>) -> Result<Tensor<E>> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor<E>) -> Result<Tensor<E>> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor<E>) -> Result<Tensor<E>> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Tensor<E> {
        let s = E::from_f64(s);
        self.map(|x| x * s)
    }

    pub fn add_scalar(&self, s: f64) -> Tensor<E> {
        let s = E::from_f64(s);
        self.map(|x| x + s)
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Tensor<E> {
        let (lo, hi) = (E::from_f64(lo), E::from_f64(hi));
        self.map(|x| {
            if x < lo {
                lo
            } else if x > hi {
                hi
            } else {
                x
            }
        })
    }

    /// Sum of all elements, accumulated in f64.
    pub fn sum_f64(&self) -> f64 {
        self.data.iter().map(|x| x.to_f64_val()).sum()
    }

    pub fn mean_f64(&self) -> f64 {
        self.sum_f64() / self.data.len() as f64
    }

    /// Euclidean norm over all elements, accumulated in f64.
    pub fn norm_f64(&self) -> f64 {
        self.data
            .iter()
            .map(|x| {
                let v = x.to_f64_val();
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn cast<F: Element>(&self) -> Tensor<F> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| F::from_f64(x.to_f64_val())).collect(),
            grad: None,
        }
    }

    /// Flat index for a `[H, W, C]` tensor.
    #[inline]
    pub fn idx3(&self, y: usize, x: usize, c: usize) -> usize {
        debug_assert_eq!(self.shape.len(), 3);
        (y * self.shape[1] + x) * self.shape[2] + c
    }

    #[inline]
    pub fn at3(&self, y: usize, x: usize, c: usize) -> E {
        self.data[self.idx3(y, x, c)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_length_mismatch() {
        let r = Tensor::new(vec![2, 2], vec![1.0f32, 2.0, 3.0]);
        assert!(matches!(r, Err(Error::Dim(_))));
    }

    #[test]
    fn reshape_preserves_data() {
        let t = Tensor::new(vec![2, 3], (0..6).map(|i| i as f32).collect()).unwrap();
        let r = t.reshape(&[3, 2]).unwrap();
        assert_eq!(r.shape(), &[3, 2]);
        assert_eq!(r.data(), t.data());
        assert!(t.reshape(&[4, 2]).is_err());
    }

    #[test]
    fn equality_ignores_grad() {
        let mut a = Tensor::new(vec![2], vec![1.0f32, 2.0]).unwrap();
        let b = a.clone();
        a.set_grad(vec![0.5, 0.5]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn randn_is_deterministic_in_seed() {
        use rand::SeedableRng;
        let mut r1 = rand_chacha::ChaCha12Rng::seed_from_u64(9);
        let mut r2 = rand_chacha::ChaCha12Rng::seed_from_u64(9);
        let a = Tensor::<f32>::randn(&[8], &mut r1);
        let b = Tensor::<f32>::randn(&[8], &mut r2);
        assert_eq!(a, b);
    }
}
