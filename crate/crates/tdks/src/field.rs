//! Complex-valued fields on a spatial grid.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Result, TdksError};
use crate::grid::{same_grid, SpatialGrid};

/// A single complex field (one orbital or one adjoint component).
#[derive(Clone)]
pub struct ComplexField {
    grid: Arc<SpatialGrid>,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: Arc<SpatialGrid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![Complex64::default(); n],
        }
    }

    pub fn from_values(grid: Arc<SpatialGrid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(TdksError::GridMismatch(format!(
                "field has {} values, grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Sample `f(x)` at every grid point.
    pub fn from_fn(grid: Arc<SpatialGrid>, mut f: impl FnMut(&[f64]) -> Complex64) -> Self {
        let dim = grid.dim();
        let values = (0..grid.len())
            .map(|idx| {
                let xy = grid.coords(idx);
                f(&xy[..dim])
            })
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<SpatialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// Physical inner product h^dim·Σ conj(self)·other, conjugate-linear in self.
    pub fn inner(&self, other: &ComplexField) -> Result<Complex64> {
        self.check_same_grid(other)?;
        let sum: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(sum * self.grid.cell_volume())
    }

    /// Physical squared norm h^dim·Σ|ψ|².
    pub fn norm_sq(&self) -> f64 {
        let sum: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        sum * self.grid.cell_volume()
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn scale(&mut self, factor: Complex64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    /// self += factor · other
    pub fn axpy(&mut self, factor: Complex64, other: &ComplexField) -> Result<()> {
        self.check_same_grid(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += factor * b;
        }
        Ok(())
    }

    /// Normalize to h^dim·‖ψ‖² = 1.
    pub fn normalize(&mut self) {
        let n = self.norm_sq().sqrt();
        if n > 0.0 {
            self.scale(Complex64::new(1.0 / n, 0.0));
        }
    }

    /// Multiply pointwise by e^{-i·scale·V(x)} for a real field V.
    pub fn apply_potential_phase(&mut self, potential: &[f64], scale: f64) {
        for (v, &p) in self.values.iter_mut().zip(potential) {
            *v *= Complex64::cis(-scale * p);
        }
    }

    /// Multiply pointwise by e^{-scale·V(x)} (imaginary-time damping).
    pub fn apply_potential_decay(&mut self, potential: &[f64], scale: f64) {
        for (v, &p) in self.values.iter_mut().zip(potential) {
            *v *= (-scale * p).exp();
        }
    }

    pub fn check_same_grid(&self, other: &ComplexField) -> Result<()> {
        if !same_grid(&self.grid, &other.grid) {
            return Err(TdksError::GridMismatch(
                "fields live on different grids".into(),
            ));
        }
        Ok(())
    }
}

/// Average of two fields on the same grid, (a + b)/2.
pub fn midpoint(a: &ComplexField, b: &ComplexField) -> Result<ComplexField> {
    a.check_same_grid(b)?;
    let values = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x + y) * 0.5)
        .collect();
    ComplexField::from_values(a.grid.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn inner_product_is_conjugate_linear_in_first_slot() {
        let grid = make_grid(1, 4.0, 8).unwrap();
        let f = ComplexField::from_fn(grid.clone(), |x| Complex64::new(x[0], 1.0));
        let g = ComplexField::from_fn(grid.clone(), |x| Complex64::new(1.0, -x[0]));
        let ab = f.inner(&g).unwrap();
        let ba = g.inner(&f).unwrap();
        assert!((ab - ba.conj()).norm() < 1e-14);
    }

    #[test]
    fn normalize_sets_physical_norm() {
        let grid = make_grid(2, 5.0, 8).unwrap();
        let mut f = ComplexField::from_fn(grid, |x| Complex64::new(1.0 + x[0], x[1]));
        f.normalize();
        assert!((f.norm_sq() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let g1 = make_grid(1, 4.0, 8).unwrap();
        let g2 = make_grid(1, 4.0, 16).unwrap();
        let f1 = ComplexField::zeros(g1);
        let f2 = ComplexField::zeros(g2);
        assert!(f1.inner(&f2).is_err());
    }
}
