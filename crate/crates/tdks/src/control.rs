//! Control-signal calculus in the discrete H¹(0, T) space: inner products,
//! cost-functional evaluation, the Riesz-representative two-point boundary
//! solve, and assembly of the reduced gradient ∇Ĵ = ν·u + μ.

use crate::error::{Result, TdksError};
use crate::potentials::{density, Density};
use crate::propagation::{TimeGrid, Trajectory};

/// Real scalar control u(t) sampled at the nodes of a time grid.
#[derive(Clone, Debug)]
pub struct ControlSignal {
    tgrid: TimeGrid,
    values: Vec<f64>,
}

impl ControlSignal {
    pub fn zeros(tgrid: TimeGrid) -> Self {
        Self {
            values: vec![0.0; tgrid.len()],
            tgrid,
        }
    }

    pub fn from_values(tgrid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != tgrid.len() {
            return Err(TdksError::TimeGridMismatch(format!(
                "control has {} samples, time grid has {} nodes",
                values.len(),
                tgrid.len()
            )));
        }
        Ok(Self { tgrid, values })
    }

    pub fn from_fn(tgrid: TimeGrid, mut f: impl FnMut(f64) -> f64) -> Self {
        let values = (0..tgrid.len()).map(|k| f(tgrid.node(k))).collect();
        Self { tgrid, values }
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.tgrid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    /// self += factor · other
    pub fn axpy(&mut self, factor: f64, other: &ControlSignal) -> Result<()> {
        self.check_same_grid(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += factor * b;
        }
        Ok(())
    }

    /// u + α·d as a new signal.
    pub fn step(&self, alpha: f64, direction: &ControlSignal) -> Result<ControlSignal> {
        let mut out = self.clone();
        out.axpy(alpha, direction)?;
        Ok(out)
    }

    pub fn check_same_grid(&self, other: &ControlSignal) -> Result<()> {
        if self.tgrid != other.tgrid {
            return Err(TdksError::TimeGridMismatch(
                "control signals live on different time grids".into(),
            ));
        }
        Ok(())
    }
}

/// Discrete H¹ geometry on a time grid with the weighted product
/// ∫(u'v' + a·u·v) dt; derivatives are centered differences (one-sided at
/// the endpoints) and the quadrature is trapezoidal.
#[derive(Clone, Copy, Debug)]
pub struct H1 {
    tgrid: TimeGrid,
    weight_a: f64,
}

impl H1 {
    pub fn new(tgrid: TimeGrid, weight_a: f64) -> Result<Self> {
        if !(weight_a > 0.0) {
            return Err(TdksError::InvalidArgument(format!(
                "H1 weight a must be positive, got {weight_a}"
            )));
        }
        Ok(Self { tgrid, weight_a })
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.tgrid
    }

    pub fn weight_a(&self) -> f64 {
        self.weight_a
    }

    fn derivative(&self, u: &[f64]) -> Vec<f64> {
        let dt = self.tgrid.dt();
        let n = u.len();
        let mut d = vec![0.0; n];
        d[0] = (u[1] - u[0]) / dt;
        d[n - 1] = (u[n - 1] - u[n - 2]) / dt;
        for k in 1..n - 1 {
            d[k] = (u[k + 1] - u[k - 1]) / (2.0 * dt);
        }
        d
    }

    /// ⟨u, v⟩_{H¹} with trapezoidal quadrature.
    pub fn inner(&self, u: &ControlSignal, v: &ControlSignal) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        let du = self.derivative(u.values());
        let dv = self.derivative(v.values());
        let dt = self.tgrid.dt();
        let n = u.values().len();
        let mut total = 0.0;
        for k in 0..n {
            let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
            total += w * dt * (du[k] * dv[k] + self.weight_a * u.values()[k] * v.values()[k]);
        }
        Ok(total)
    }

    pub fn norm(&self, u: &ControlSignal) -> Result<f64> {
        Ok(self.inner(u, u)?.sqrt())
    }

    /// Discrete L²(0, T) pairing (trapezoidal), used for the coupling series.
    pub fn l2_inner(&self, u: &ControlSignal, v: &ControlSignal) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        let dt = self.tgrid.dt();
        let n = u.values().len();
        let mut total = 0.0;
        for k in 0..n {
            let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
            total += w * dt * u.values()[k] * v.values()[k];
        }
        Ok(total)
    }

    /// Solve (-d²/dt² + a)μ = f with μ(0) = μ(T) = 0 by the three-point
    /// stencil; Thomas elimination of the tridiagonal system.
    pub fn riesz(&self, f: &ControlSignal) -> Result<ControlSignal> {
        self.check(f)?;
        let n = f.values().len();
        let mut mu = vec![0.0; n];
        let interior = n - 2;
        if interior == 0 {
            return ControlSignal::from_values(self.tgrid, mu);
        }
        let dt = self.tgrid.dt();
        let inv_dt2 = 1.0 / (dt * dt);
        let diag_val = 2.0 * inv_dt2 + self.weight_a;
        let off = -inv_dt2;

        let mut diag = vec![diag_val; interior];
        let mut rhs: Vec<f64> = f.values()[1..n - 1].to_vec();
        for i in 1..interior {
            let m = off / diag[i - 1];
            diag[i] -= m * off;
            rhs[i] -= m * rhs[i - 1];
            debug_assert!(diag[i] > 0.0, "tridiagonal system must stay positive definite");
        }
        mu[n - 2] = rhs[interior - 1] / diag[interior - 1];
        for i in (0..interior - 1).rev() {
            mu[i + 1] = (rhs[i] - off * mu[i + 2]) / diag[i];
        }
        ControlSignal::from_values(self.tgrid, mu)
    }

    fn check(&self, u: &ControlSignal) -> Result<()> {
        if u.time_grid() != &self.tgrid {
            return Err(TdksError::TimeGridMismatch(
                "signal does not match the H1 space's time grid".into(),
            ));
        }
        Ok(())
    }
}

/// Weights of the three cost terms.
#[derive(Clone, Copy, Debug)]
pub struct CostWeights {
    pub beta: f64,
    pub eta: f64,
    pub nu: f64,
    pub h1_weight_a: f64,
}

impl CostWeights {
    pub fn new(beta: f64, eta: f64, nu: f64, h1_weight_a: f64) -> Result<Self> {
        if beta < 0.0 || eta < 0.0 {
            return Err(TdksError::Config(format!(
                "weights must satisfy beta >= 0 and eta >= 0, got beta = {beta}, eta = {eta}"
            )));
        }
        if !(beta + eta > 0.0) {
            return Err(TdksError::Config(format!(
                "weights must satisfy beta+eta>0, got beta = {beta}, eta = {eta}"
            )));
        }
        if !(nu > 0.0) {
            return Err(TdksError::Config(format!(
                "regularization weight must satisfy nu > 0, got {nu}"
            )));
        }
        if !(h1_weight_a > 0.0) {
            return Err(TdksError::Config(format!(
                "H1 weight must satisfy a > 0, got {h1_weight_a}"
            )));
        }
        Ok(Self {
            beta,
            eta,
            nu,
            h1_weight_a,
        })
    }
}

/// Tracking target ρ_d(·, t) per node and terminal region indicator χ_A.
pub struct TargetSpec {
    pub rho_d: Option<Vec<Density>>,
    pub chi_a: Option<Vec<f64>>,
}

impl TargetSpec {
    pub fn none() -> Self {
        Self {
            rho_d: None,
            chi_a: None,
        }
    }
}

/// Per-term cost breakdown; `total` is J_β + J_η + J_ν.
#[derive(Clone, Copy, Debug, Default)]
pub struct CostBreakdown {
    pub j_beta: f64,
    pub j_eta: f64,
    pub j_nu: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.j_beta + self.j_eta + self.j_nu
    }
}

/// J_β from a density snapshot at one node: (β/2)·h^dim·Σ(ρ - ρ_d)².
pub fn tracking_misfit(rho: &Density, rho_d: &Density) -> f64 {
    let w = rho.grid().cell_volume();
    rho.values()
        .iter()
        .zip(rho_d.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        * w
}

/// (η/2)-weighted region mass of the final density, ∫χ_A·ρ(·, T).
pub fn region_mass(rho: &Density, chi_a: &[f64]) -> f64 {
    let w = rho.grid().cell_volume();
    rho.values()
        .iter()
        .zip(chi_a)
        .map(|(r, c)| r * c)
        .sum::<f64>()
        * w
}

/// Evaluate the full cost functional on a completed forward trajectory.
pub fn evaluate_cost(
    psi_traj: &Trajectory,
    u: &ControlSignal,
    weights: &CostWeights,
    targets: &TargetSpec,
) -> Result<CostBreakdown> {
    let tgrid = psi_traj.time_grid();
    if u.time_grid() != tgrid {
        return Err(TdksError::TimeGridMismatch(
            "control and trajectory time grids differ".into(),
        ));
    }
    let h1 = H1::new(*tgrid, weights.h1_weight_a)?;
    let mut j_beta = 0.0;
    if weights.beta > 0.0 {
        let rho_d = targets.rho_d.as_ref().ok_or_else(|| {
            TdksError::InvalidArgument("beta > 0 requires a target density trajectory".into())
        })?;
        if rho_d.len() != tgrid.len() {
            return Err(TdksError::TimeGridMismatch(
                "target density trajectory length mismatch".into(),
            ));
        }
        let dt = tgrid.dt();
        for k in 0..tgrid.len() {
            let w = if k == 0 || k == tgrid.len() - 1 { 0.5 } else { 1.0 };
            let rho = density(psi_traj.snapshot(k))?;
            j_beta += w * dt * tracking_misfit(&rho, &rho_d[k]);
        }
        j_beta *= weights.beta / 2.0;
    }
    let mut j_eta = 0.0;
    if weights.eta > 0.0 {
        let chi = targets.chi_a.as_ref().ok_or_else(|| {
            TdksError::InvalidArgument("eta > 0 requires a region indicator".into())
        })?;
        let rho_final = density(psi_traj.final_state())?;
        j_eta = weights.eta / 2.0 * region_mass(&rho_final, chi);
    }
    let j_nu = weights.nu / 2.0 * h1.inner(u, u)?;
    Ok(CostBreakdown {
        j_beta,
        j_eta,
        j_nu,
    })
}

/// The L² coupling series f(t_k) = -Re Σ_m ⟨λ_m(t_k), V_u·ψ_m(t_k)⟩.
pub fn control_coupling_series(
    psi_traj: &Trajectory,
    lambda_traj: &Trajectory,
    vu: &[f64],
) -> Result<ControlSignal> {
    let tgrid = psi_traj.time_grid();
    if lambda_traj.time_grid() != tgrid {
        return Err(TdksError::TimeGridMismatch(
            "state and adjoint trajectories disagree in time".into(),
        ));
    }
    let grid = psi_traj.snapshot(0).grid().clone();
    let w = grid.cell_volume();
    let mut values = vec![0.0; tgrid.len()];
    for k in 0..tgrid.len() {
        let psi = psi_traj.snapshot(k);
        let lam = lambda_traj.snapshot(k);
        if psi.count() != lam.count() {
            return Err(TdksError::GridMismatch(
                "state and adjoint particle counts differ".into(),
            ));
        }
        let mut sum = 0.0;
        for (pm, lm) in psi.fields().iter().zip(lam.fields()) {
            for ((pv, lv), &vui) in pm.values().iter().zip(lm.values()).zip(vu) {
                sum += (lv.conj() * vui * pv).re;
            }
        }
        values[k] = -w * sum;
    }
    ControlSignal::from_values(*tgrid, values)
}

/// ∇Ĵ = ν·u + μ with μ the H¹-Riesz representative of the coupling series.
pub fn reduced_gradient(
    u: &ControlSignal,
    psi_traj: &Trajectory,
    lambda_traj: &Trajectory,
    vu: &[f64],
    weights: &CostWeights,
) -> Result<(ControlSignal, ControlSignal)> {
    let h1 = H1::new(*u.time_grid(), weights.h1_weight_a)?;
    let f = control_coupling_series(psi_traj, lambda_traj, vu)?;
    let mu = h1.riesz(&f)?;
    let mut grad = u.clone();
    grad.scale(weights.nu);
    grad.axpy(1.0, &mu)?;
    Ok((grad, f))
}
