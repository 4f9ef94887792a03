//! Axis-aligned boxes used for search domains, quadrature regions, and
//! design generation.

use crate::scalar::Real;

/// A non-degenerate axis-aligned box `[lo_1, hi_1] x ... x [lo_d, hi_d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rect<R> {
    lo: Vec<R>,
    hi: Vec<R>,
}

impl<R: Real> Rect<R> {
    /// Builds a box, panicking on empty, mismatched, non-finite, or inverted
    /// bounds.
    pub fn new(lo: Vec<R>, hi: Vec<R>) -> Self {
        assert!(!lo.is_empty(), "Rect: empty bounds");
        assert_eq!(lo.len(), hi.len(), "Rect: lo/hi dimension mismatch");
        for (a, b) in lo.iter().zip(&hi) {
            assert!(a.is_finite() && b.is_finite(), "Rect: non-finite bound");
            assert!(a < b, "Rect: lo must be strictly below hi");
        }
        Rect { lo, hi }
    }

    /// The unit interval/box of the given dimension.
    pub fn unit(dim: usize) -> Self {
        Rect::new(vec![R::zero(); dim], vec![R::one(); dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[R] {
        &self.lo
    }

    pub fn hi(&self) -> &[R] {
        &self.hi
    }

    pub fn contains(&self, x: &[R]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (a, b))| v >= a && v <= b)
    }

    /// Componentwise projection of `x` onto the box.
    pub fn clamp(&self, x: &[R]) -> Vec<R> {
        assert_eq!(x.len(), self.dim(), "Rect::clamp dimension mismatch");
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (a, b))| {
                if *v < *a {
                    *a
                } else if *v > *b {
                    *b
                } else {
                    *v
                }
            })
            .collect()
    }

    /// Shrinks the box toward its centre by `frac` of each half-width per
    /// side (`frac = 0.01` trims 1% off each end).
    pub fn shrink(&self, frac: R) -> Self {
        let lo = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| *a + (*b - *a) * frac)
            .collect();
        let hi = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| *b - (*b - *a) * frac)
            .collect();
        Rect::new(lo, hi)
    }
}
