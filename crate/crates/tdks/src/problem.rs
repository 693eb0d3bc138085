//! The reduced optimal-control problem: evaluating Ĵ(u) means solving the
//! forward TDKS system; evaluating ∇Ĵ(u) additionally solves the adjoint
//! system backward and assembles ν·u + μ.

use crate::control::{
    evaluate_cost, reduced_gradient, region_mass, tracking_misfit, ControlSignal, CostBreakdown,
    CostWeights, TargetSpec, H1,
};
use crate::error::{Result, TdksError};
use crate::optim::Objective;
use crate::potentials::{density, KohnSham};
use crate::propagation::{
    solve_adjoint, solve_forward, solve_forward_observed, AdjointSetup, Orbitals, TimeGrid,
    Trajectory,
};

/// A fully specified control problem over one grid, model, horizon, and
/// initial state.
pub struct TdksProblem {
    model: KohnSham,
    tgrid: TimeGrid,
    weights: CostWeights,
    targets: TargetSpec,
    psi0: Orbitals,
    h1: H1,
}

impl TdksProblem {
    pub fn new(
        model: KohnSham,
        tgrid: TimeGrid,
        weights: CostWeights,
        targets: TargetSpec,
        psi0: Orbitals,
    ) -> Result<Self> {
        if weights.beta > 0.0 {
            match &targets.rho_d {
                None => {
                    return Err(TdksError::InvalidArgument(
                        "beta > 0 requires a target density trajectory".into(),
                    ))
                }
                Some(seq) if seq.len() != tgrid.len() => {
                    return Err(TdksError::TimeGridMismatch(
                        "target density trajectory does not match the time grid".into(),
                    ))
                }
                _ => {}
            }
        }
        if weights.eta > 0.0 && targets.chi_a.is_none() {
            return Err(TdksError::InvalidArgument(
                "eta > 0 requires a region indicator".into(),
            ));
        }
        if let Some(chi) = &targets.chi_a {
            if chi.len() != model.grid().len() {
                return Err(TdksError::GridMismatch(
                    "region indicator does not match the grid".into(),
                ));
            }
        }
        let h1 = H1::new(tgrid, weights.h1_weight_a)?;
        Ok(Self {
            model,
            tgrid,
            weights,
            targets,
            psi0,
            h1,
        })
    }

    pub fn model(&self) -> &KohnSham {
        &self.model
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.tgrid
    }

    pub fn weights(&self) -> &CostWeights {
        &self.weights
    }

    pub fn targets(&self) -> &TargetSpec {
        &self.targets
    }

    pub fn initial_state(&self) -> &Orbitals {
        &self.psi0
    }

    pub fn zero_control(&self) -> ControlSignal {
        ControlSignal::zeros(self.tgrid)
    }

    /// Forward solve with full trajectory storage.
    pub fn solve_forward(&self, u: &ControlSignal) -> Result<Trajectory> {
        solve_forward(&self.psi0, u, &self.tgrid, &self.model)
    }

    /// Cost and gradient from one forward and one adjoint solve, plus the
    /// raw coupling series f(t) for diagnostics.
    pub fn cost_and_gradient(
        &self,
        u: &ControlSignal,
    ) -> Result<(CostBreakdown, ControlSignal, ControlSignal)> {
        let psi_traj = self.solve_forward(u)?;
        let breakdown = evaluate_cost(&psi_traj, u, &self.weights, &self.targets)?;
        let setup = AdjointSetup {
            model: &self.model,
            beta: self.weights.beta,
            eta: self.weights.eta,
            chi_a: self.targets.chi_a.as_deref(),
            rho_d: self.targets.rho_d.as_deref(),
        };
        let lambda_traj = solve_adjoint(&psi_traj, u, &setup)?;
        let (grad, coupling) =
            reduced_gradient(u, &psi_traj, &lambda_traj, self.model.vu(), &self.weights)?;
        Ok((breakdown, grad, coupling))
    }

    /// Terminal region mass ∫χ_A·ρ(·, T) for a given control.
    pub fn final_region_mass(&self, u: &ControlSignal) -> Result<Option<f64>> {
        let chi = match &self.targets.chi_a {
            Some(chi) => chi,
            None => return Ok(None),
        };
        let final_state = solve_forward_observed(&self.psi0, u, &self.tgrid, &self.model, |_, _| {})?;
        let rho = density(&final_state)?;
        Ok(Some(region_mass(&rho, chi)))
    }
}

impl Objective for TdksProblem {
    fn h1(&self) -> &H1 {
        &self.h1
    }

    fn evaluate(&self, u: &ControlSignal) -> Result<CostBreakdown> {
        let dt = self.tgrid.dt();
        let last = self.tgrid.len() - 1;
        let beta = self.weights.beta;
        let rho_d = self.targets.rho_d.as_deref();
        let mut j_beta = 0.0;
        let final_state =
            solve_forward_observed(&self.psi0, u, &self.tgrid, &self.model, |k, psi| {
                if beta > 0.0 {
                    let rho = density(psi).expect("snapshot grid matches problem grid");
                    let w = if k == 0 || k == last { 0.5 } else { 1.0 };
                    j_beta += w * dt * tracking_misfit(&rho, &rho_d.unwrap()[k]);
                }
            })?;
        j_beta *= beta / 2.0;
        let mut j_eta = 0.0;
        if self.weights.eta > 0.0 {
            let chi = self.targets.chi_a.as_ref().unwrap();
            let rho_final = density(&final_state)?;
            j_eta = self.weights.eta / 2.0 * region_mass(&rho_final, chi);
        }
        let j_nu = self.weights.nu / 2.0 * self.h1.inner(u, u)?;
        Ok(CostBreakdown {
            j_beta,
            j_eta,
            j_nu,
        })
    }

    fn evaluate_with_gradient(&self, u: &ControlSignal) -> Result<(CostBreakdown, ControlSignal)> {
        let (breakdown, grad, _) = self.cost_and_gradient(u)?;
        Ok((breakdown, grad))
    }
}
