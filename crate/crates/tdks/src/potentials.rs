//! Density and every potential term of the Kohn-Sham Hamiltonian:
//! confinement, control shape, Hartree, cutoff LDA exchange, and the
//! parametric correlation fit, together with the density derivatives the
//! adjoint equation needs.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Result, TdksError};
use crate::grid::{same_grid, HartreeKernel, SpatialGrid};
use crate::propagation::Orbitals;

/// Particle density ρ(x) = Σ_j |ψ_j(x)|².
#[derive(Clone)]
pub struct Density {
    grid: Arc<SpatialGrid>,
    values: Vec<f64>,
}

impl Density {
    pub fn from_values(grid: Arc<SpatialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(TdksError::GridMismatch(
                "density length does not match grid".into(),
            ));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<SpatialGrid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn grid(&self) -> &Arc<SpatialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Total particle number h^dim·Σρ.
    pub fn total(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn max_abs_diff(&self, other: &Density) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Density centroid ⟨x⟩ = h^dim·Σ x·ρ / N in box coordinates.
    pub fn centroid(&self) -> [f64; 2] {
        let mut sum = [0.0; 2];
        for (idx, &rho) in self.values.iter().enumerate() {
            let xy = self.grid.coords(idx);
            sum[0] += xy[0] * rho;
            sum[1] += xy[1] * rho;
        }
        let total = self.total();
        let w = self.grid.cell_volume();
        [sum[0] * w / total, sum[1] * w / total]
    }
}

/// ρ = Σ_j |ψ_j|² from a set of orbitals on a shared grid.
pub fn density(orbitals: &Orbitals) -> Result<Density> {
    let grid = orbitals.grid().clone();
    let mut values = vec![0.0; grid.len()];
    for orbital in orbitals.fields() {
        if !same_grid(orbital.grid(), &grid) {
            return Err(TdksError::GridMismatch(
                "orbitals live on different grids".into(),
            ));
        }
        for (v, psi) in values.iter_mut().zip(orbital.values()) {
            *v += psi.norm_sqr();
        }
    }
    Density::from_values(grid, values)
}

/// V_H(ρ) = h^dim-scaled circular convolution of ρ with the truncated
/// Coulomb kernel, evaluated through the kernel's Fourier coefficients.
/// The imaginary residue of the back transform is discarded.
pub fn hartree(rho: &Density, kernel: &HartreeKernel) -> Result<Vec<f64>> {
    if !same_grid(rho.grid(), kernel.grid()) {
        return Err(TdksError::GridMismatch(
            "density and Hartree kernel grids differ".into(),
        ));
    }
    Ok(hartree_of_real_field(rho.values(), kernel))
}

/// Convolve an arbitrary real field with the Coulomb kernel. The adjoint
/// source uses this with the field 2·Σ_j Re(ψ_j·conj(λ_j)).
pub fn hartree_of_real_field(field: &[f64], kernel: &HartreeKernel) -> Vec<f64> {
    let grid = kernel.grid();
    let mut buf: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    grid.forward_inplace(&mut buf);
    for (b, c) in buf.iter_mut().zip(kernel.fourier_coefficients()) {
        *b *= c;
    }
    grid.inverse_inplace(&mut buf);
    buf.into_iter().map(|v| v.re).collect()
}

/// Parameters of the cutoff LDA exchange potential.
///
/// Below the cutoff density R the potential is α_n·ρ^{1/n}; on (R, 2R) it
/// follows the quartic blend p(ρ); above 2R it is the constant α_n·p(2R).
/// The blend matches value, first, and second derivative at both seams.
#[derive(Clone, Copy, Debug)]
pub struct ExchangeParams {
    n: u32,
    cutoff: f64,
    alpha: f64,
}

pub const DEFAULT_EXCHANGE_CUTOFF: f64 = 1e6;

impl ExchangeParams {
    /// α₂ = -√(8/π) in 2D, α₃ = -(3/π)^{1/3} in 3D.
    pub fn for_dim(n: u32) -> Result<Self> {
        let alpha = match n {
            2 => -(8.0 / std::f64::consts::PI).sqrt(),
            3 => -(3.0 / std::f64::consts::PI).cbrt(),
            _ => {
                return Err(TdksError::InvalidArgument(format!(
                    "exchange potential is defined for n in {{2, 3}}, got {n}"
                )))
            }
        };
        Ok(Self {
            n,
            cutoff: DEFAULT_EXCHANGE_CUTOFF,
            alpha,
        })
    }

    pub fn with_cutoff(mut self, cutoff: f64) -> Result<Self> {
        if !(cutoff > 0.0) {
            return Err(TdksError::InvalidArgument(format!(
                "exchange cutoff must be positive, got {cutoff}"
            )));
        }
        self.cutoff = cutoff;
        Ok(self)
    }

    pub fn dimension(&self) -> u32 {
        self.n
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The quartic blend p(ρ) used on (R, 2R).
    pub fn blend(&self, rho: f64) -> f64 {
        let n = self.n as f64;
        let r = self.cutoff;
        let inv_n = 1.0 / n;
        let a4 = (n + 1.0) * r.powf(inv_n - 4.0) / (4.0 * n * n);
        let a3 = -(4.0 * n + 5.0) * r.powf(inv_n - 3.0) / (3.0 * n * n);
        let a2 = 2.0 * (n + 2.0) * r.powf(inv_n - 2.0) / (n * n);
        let a1 = -4.0 * r.powf(inv_n - 1.0) / (n * n);
        let a0 = (12.0 * n * n - 11.0 * n + 17.0) * r.powf(inv_n) / (12.0 * n * n);
        (((a4 * rho + a3) * rho + a2) * rho + a1) * rho + a0
    }

    pub fn blend_derivative(&self, rho: f64) -> f64 {
        let n = self.n as f64;
        let r = self.cutoff;
        let inv_n = 1.0 / n;
        let a4 = (n + 1.0) * r.powf(inv_n - 4.0) / (4.0 * n * n);
        let a3 = -(4.0 * n + 5.0) * r.powf(inv_n - 3.0) / (3.0 * n * n);
        let a2 = 2.0 * (n + 2.0) * r.powf(inv_n - 2.0) / (n * n);
        let a1 = -4.0 * r.powf(inv_n - 1.0) / (n * n);
        ((4.0 * a4 * rho + 3.0 * a3) * rho + 2.0 * a2) * rho + a1
    }

    pub fn blend_second_derivative(&self, rho: f64) -> f64 {
        let n = self.n as f64;
        let r = self.cutoff;
        let inv_n = 1.0 / n;
        let a4 = (n + 1.0) * r.powf(inv_n - 4.0) / (4.0 * n * n);
        let a3 = -(4.0 * n + 5.0) * r.powf(inv_n - 3.0) / (3.0 * n * n);
        let a2 = 2.0 * (n + 2.0) * r.powf(inv_n - 2.0) / (n * n);
        (12.0 * a4 * rho + 6.0 * a3) * rho + 2.0 * a2
    }

    /// V_x(ρ) and its density derivative at a single point.
    ///
    /// The derivative at ρ = 0 is reported as 0: the true one-sided limit
    /// diverges, but every use multiplies it by quantities that vanish at
    /// least linearly in ρ, and the product limit is 0.
    pub fn value_and_derivative(&self, rho: f64) -> (f64, f64) {
        let n = self.n as f64;
        let r = self.cutoff;
        if rho <= r {
            if rho == 0.0 {
                return (0.0, 0.0);
            }
            let root = rho.powf(1.0 / n);
            (self.alpha * root, self.alpha * root / (n * rho))
        } else if rho < 2.0 * r {
            (
                self.alpha * self.blend(rho),
                self.alpha * self.blend_derivative(rho),
            )
        } else {
            (self.alpha * self.blend(2.0 * r), 0.0)
        }
    }
}

/// Evaluate the cutoff exchange potential and its density derivative.
pub fn exchange(rho: &Density, params: &ExchangeParams) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut v = vec![0.0; rho.values().len()];
    let mut dv = vec![0.0; rho.values().len()];
    for (i, &r) in rho.values().iter().enumerate() {
        if r < 0.0 {
            return Err(TdksError::InvalidArgument(format!(
                "negative density entry {r} at index {i}"
            )));
        }
        let (vi, dvi) = params.value_and_derivative(r);
        v[i] = vi;
        dv[i] = dvi;
    }
    Ok((v, dv))
}

/// Smooth monotone correlation fit V_c(ρ) = -s·ρ/(ρ + c₀).
///
/// Honors the limits V_c(0) = 0 and V_c(∞) = -s with the saturation value
/// s = 0.1925 by default; alternative coefficients can be loaded from
/// config.
#[derive(Clone, Copy, Debug)]
pub struct CorrelationFit {
    saturation: f64,
    scale: f64,
}

impl Default for CorrelationFit {
    fn default() -> Self {
        Self {
            saturation: 0.1925,
            scale: 1.0,
        }
    }
}

impl CorrelationFit {
    pub fn new(saturation: f64, scale: f64) -> Result<Self> {
        if !(saturation >= 0.0) || !(scale > 0.0) {
            return Err(TdksError::InvalidArgument(format!(
                "correlation fit requires saturation >= 0 and scale > 0, got {saturation}, {scale}"
            )));
        }
        Ok(Self { saturation, scale })
    }

    pub fn value_and_derivative(&self, rho: f64) -> (f64, f64) {
        let denom = rho + self.scale;
        (
            -self.saturation * rho / denom,
            -self.saturation * self.scale / (denom * denom),
        )
    }
}

pub fn correlation(rho: &Density, fit: &CorrelationFit) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; rho.values().len()];
    let mut dv = vec![0.0; rho.values().len()];
    for (i, &r) in rho.values().iter().enumerate() {
        let (vi, dvi) = fit.value_and_derivative(r.max(0.0));
        v[i] = vi;
        dv[i] = dvi;
    }
    (v, dv)
}

/// Confinement presets, expressed in coordinates centered at L/2 per axis.
#[derive(Clone, Debug)]
pub enum PotentialPreset {
    /// 50·(x₁² + x₂²), the quantum-dot trap of the tracking experiment.
    Harmonic50,
    /// x₁⁴/64 - x₁²/4 + x₁³/32 + x₂²/2, the asymmetric double well.
    DoubleWell,
    /// κ·|x|² with configurable stiffness.
    Harmonic { kappa: f64 },
    /// Base preset shifted by a constant (gauge experiments).
    Offset { base: Box<PotentialPreset>, shift: f64 },
}

impl PotentialPreset {
    pub fn evaluate(&self, x_centered: &[f64]) -> f64 {
        match self {
            PotentialPreset::Harmonic50 => 50.0 * x_centered.iter().map(|&x| x * x).sum::<f64>(),
            PotentialPreset::DoubleWell => {
                let x1 = x_centered[0];
                let x2 = x_centered.get(1).copied().unwrap_or(0.0);
                x1.powi(4) / 64.0 - x1 * x1 / 4.0 + x1.powi(3) / 32.0 + x2 * x2 / 2.0
            }
            PotentialPreset::Harmonic { kappa } => {
                kappa * x_centered.iter().map(|&x| x * x).sum::<f64>()
            }
            PotentialPreset::Offset { base, shift } => base.evaluate(x_centered) + shift,
        }
    }

    /// Sample V₀ on a grid.
    pub fn field(&self, grid: &SpatialGrid) -> Vec<f64> {
        let c = grid.center();
        grid.sample_real(|x| {
            let xc: Vec<f64> = x.iter().map(|&xi| xi - c).collect();
            self.evaluate(&xc)
        })
    }
}

/// Spatial shape V_u of the bilinear control term u(t)·V_u(x).
#[derive(Clone, Debug)]
pub enum ControlShape {
    /// Centered |x|², the gate-voltage control of the tracking experiment.
    Quadratic,
    /// Dipole control p·x in centered coordinates.
    Dipole { px: f64, py: f64 },
}

impl ControlShape {
    pub fn field(&self, grid: &SpatialGrid) -> Vec<f64> {
        let c = grid.center();
        match self {
            ControlShape::Quadratic => {
                grid.sample_real(|x| x.iter().map(|&xi| (xi - c) * (xi - c)).sum())
            }
            ControlShape::Dipole { px, py } => grid.sample_real(|x| {
                let mut v = px * (x[0] - c);
                if x.len() > 1 {
                    v += py * (x[1] - c);
                }
                v
            }),
        }
    }
}

/// All evaluated potential terms at one instant, plus ∂V_xc/∂ρ.
///
/// `dvxc_drho` holds only the local exchange-correlation derivative; the
/// nonlocal Hartree coupling of the adjoint equation is handled by a
/// separate convolution.
pub struct PotentialStack {
    pub v0: Arc<Vec<f64>>,
    pub vu: Arc<Vec<f64>>,
    pub v_hartree: Vec<f64>,
    pub v_x: Vec<f64>,
    pub v_c: Vec<f64>,
    pub dvxc_drho: Vec<f64>,
}

impl PotentialStack {
    /// Total real potential V₀ + u·V_u + V_H + V_x + V_c.
    pub fn total(&self, u_value: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.v0.len()];
        for i in 0..out.len() {
            out[i] =
                self.v0[i] + u_value * self.vu[i] + self.v_hartree[i] + self.v_x[i] + self.v_c[i];
        }
        out
    }
}

/// The Kohn-Sham potential model for one problem: confinement and control
/// shape sampled on the grid, plus the density-dependent terms. With
/// `kernel`, `exchange`, and `correlation` all absent the model describes
/// non-interacting particles.
pub struct KohnSham {
    grid: Arc<SpatialGrid>,
    v0: Arc<Vec<f64>>,
    vu: Arc<Vec<f64>>,
    kernel: Option<HartreeKernel>,
    exchange: Option<ExchangeParams>,
    correlation: Option<CorrelationFit>,
}

impl KohnSham {
    pub fn new(
        grid: Arc<SpatialGrid>,
        preset: &PotentialPreset,
        control: &ControlShape,
        kernel: Option<HartreeKernel>,
        exchange: Option<ExchangeParams>,
        correlation: Option<CorrelationFit>,
    ) -> Result<Self> {
        if let Some(k) = &kernel {
            if !same_grid(k.grid(), &grid) {
                return Err(TdksError::GridMismatch(
                    "Hartree kernel grid does not match problem grid".into(),
                ));
            }
        }
        let v0 = Arc::new(preset.field(&grid));
        let vu = Arc::new(control.field(&grid));
        Ok(Self {
            grid,
            v0,
            vu,
            kernel,
            exchange,
            correlation,
        })
    }

    pub fn grid(&self) -> &Arc<SpatialGrid> {
        &self.grid
    }

    pub fn v0(&self) -> &Arc<Vec<f64>> {
        &self.v0
    }

    pub fn vu(&self) -> &Arc<Vec<f64>> {
        &self.vu
    }

    pub fn kernel(&self) -> Option<&HartreeKernel> {
        self.kernel.as_ref()
    }

    pub fn is_interacting(&self) -> bool {
        self.kernel.is_some() || self.exchange.is_some() || self.correlation.is_some()
    }

    /// Evaluate the full stack at the given density.
    pub fn assemble_stack(&self, rho: &Density) -> Result<PotentialStack> {
        if !same_grid(rho.grid(), &self.grid) {
            return Err(TdksError::GridMismatch(
                "density grid does not match model grid".into(),
            ));
        }
        let n = self.grid.len();
        let v_hartree = match &self.kernel {
            Some(kernel) => hartree(rho, kernel)?,
            None => vec![0.0; n],
        };
        let (v_x, dvx) = match &self.exchange {
            Some(params) => exchange(rho, params)?,
            None => (vec![0.0; n], vec![0.0; n]),
        };
        let (v_c, dvc) = match &self.correlation {
            Some(fit) => correlation(rho, fit),
            None => (vec![0.0; n], vec![0.0; n]),
        };
        let dvxc_drho = dvx.iter().zip(&dvc).map(|(a, b)| a + b).collect();
        Ok(PotentialStack {
            v0: self.v0.clone(),
            vu: self.vu.clone(),
            v_hartree,
            v_x,
            v_c,
            dvxc_drho,
        })
    }
}
