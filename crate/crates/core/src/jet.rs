use crate::Real;

/// Value, gradient and (row-major, symmetric) Hessian of a scalar function at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet<T> {
    pub value: T,
    pub grad: Vec<T>,
    pub hess: Vec<T>,
}

impl<T: Real> Jet<T> {
    pub fn constant(value: T, dim: usize) -> Self {
        Jet {
            value,
            grad: vec![T::zero(); dim],
            hess: vec![T::zero(); dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    #[inline]
    pub fn h(&self, i: usize, j: usize) -> T {
        self.hess[i * self.dim() + j]
    }

    pub fn laplacian(&self) -> T {
        (0..self.dim()).map(|i| self.h(i, i)).sum()
    }

    /// Jet of `g ∘ self` for a scalar `g` with derivatives `(g, g', g'')` at `self.value`.
    pub fn compose(&self, g: T, dg: T, d2g: T) -> Self {
        let d = self.dim();
        let grad = self.grad.iter().map(|&v| dg * v).collect();
        let mut hess = vec![T::zero(); d * d];
        for i in 0..d {
            for j in 0..d {
                hess[i * d + j] = dg * self.h(i, j) + d2g * self.grad[i] * self.grad[j];
            }
        }
        Jet { value: g, grad, hess }
    }

    pub fn scale(mut self, c: T) -> Self {
        self.value *= c;
        self.grad.iter_mut().for_each(|v| *v *= c);
        self.hess.iter_mut().for_each(|v| *v *= c);
        self
    }

    pub fn add(mut self, other: &Self) -> Self {
        self.value += other.value;
        self.grad.iter_mut().zip(&other.grad).for_each(|(a, b)| *a += *b);
        self.hess.iter_mut().zip(&other.hess).for_each(|(a, b)| *a += *b);
        self
    }

    pub fn mul(&self, other: &Self) -> Self {
        let d = self.dim();
        let grad = (0..d)
            .map(|i| self.grad[i] * other.value + self.value * other.grad[i])
            .collect();
        let mut hess = vec![T::zero(); d * d];
        for i in 0..d {
            for j in 0..d {
                hess[i * d + j] = self.h(i, j) * other.value
                    + self.value * other.h(i, j)
                    + self.grad[i] * other.grad[j]
                    + self.grad[j] * other.grad[i];
            }
        }
        Jet {
            value: self.value * other.value,
            grad,
            hess,
        }
    }
}
