//! Nonlinear conjugate gradient minimization of the reduced cost with
//! Hager-Zhang directions and a strong-Wolfe interpolating line search.
//! Every inner product is taken in the discrete H¹ control space so the
//! geometry matches the H¹ Riesz gradient.

use crate::control::{ControlSignal, CostBreakdown, H1};
use crate::error::{Result, TdksError};

/// Anything the optimizer can minimize: a cost with an H¹ gradient.
pub trait Objective {
    fn h1(&self) -> &H1;
    /// Cost only (one forward solve for the TDKS problem).
    fn evaluate(&self, u: &ControlSignal) -> Result<CostBreakdown>;
    /// Cost and H¹ gradient (forward plus adjoint solve).
    fn evaluate_with_gradient(&self, u: &ControlSignal)
        -> Result<(CostBreakdown, ControlSignal)>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DirectionMethod {
    HagerZhang,
    SteepestDescent,
}

#[derive(Clone, Copy, Debug)]
pub enum InitialStep {
    /// First trial 1, then scaled by the previous decrease, 2(J_k - J_{k-1})/⟨g,d⟩.
    Auto,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    /// Stop when ‖∇Ĵ‖_{H¹} falls below this.
    pub tolerance: f64,
    pub c1: f64,
    pub c2: f64,
    pub ls_max_trials: usize,
    /// Lower-bound parameter of the Hager-Zhang truncation (0.01 in the scheme).
    pub hz_eta: f64,
    pub initial_step: InitialStep,
    pub direction: DirectionMethod,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 5e-7,
            c1: 1e-4,
            c2: 0.1,
            ls_max_trials: 25,
            hz_eta: 0.01,
            initial_step: InitialStep::Auto,
            direction: DirectionMethod::HagerZhang,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(TdksError::Config(format!(
                "Wolfe constants must satisfy 0 < c1 < c2 < 1, got c1 = {}, c2 = {}",
                self.c1, self.c2
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(TdksError::Config("tolerance must be positive".into()));
        }
        if self.ls_max_trials == 0 {
            return Err(TdksError::Config("ls_max_trials must be at least 1".into()));
        }
        Ok(())
    }
}

/// One line of the per-iteration log.
#[derive(Clone, Copy, Debug)]
pub struct IterationRecord {
    pub iter: usize,
    pub breakdown: CostBreakdown,
    pub grad_norm: f64,
    pub alpha: f64,
    pub ls_evals: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptStatus {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

impl OptStatus {
    /// Token written to the machine-readable status file.
    pub fn token(&self) -> &'static str {
        match self {
            OptStatus::Converged => "converged",
            OptStatus::MaxIterations => "max_iter",
            OptStatus::LineSearchFailed => "line_search_failed",
        }
    }
}

pub struct MinimizeOutcome {
    pub control: ControlSignal,
    pub status: OptStatus,
    pub breakdown: CostBreakdown,
    pub gradient_norm: f64,
    pub records: Vec<IterationRecord>,
}

/// The Hager-Zhang direction update with the descent-guarding truncation:
/// with y = g₊ - g and the previous direction d,
///
/// ```text
/// β_HZ = ⟨y - 2d·⟨y,y⟩/⟨d,y⟩, g₊⟩ / ⟨d,y⟩
/// β⁺   = max(β_HZ, -1/(‖d‖·min(hz_eta, ‖g‖)))
/// d₊   = -g₊ + β⁺·d
/// ```
///
/// Falls back to steepest descent when ⟨d, y⟩ degenerates or the update
/// fails to produce a descent direction.
pub fn hager_zhang_direction(
    h1: &H1,
    grad_new: &ControlSignal,
    grad_old: &ControlSignal,
    dir_old: &ControlSignal,
    hz_eta: f64,
) -> Result<ControlSignal> {
    let mut y = grad_new.clone();
    y.axpy(-1.0, grad_old)?;
    let dy = h1.inner(dir_old, &y)?;
    let mut direction = grad_new.clone();
    direction.scale(-1.0);
    if dy.abs() < f64::MIN_POSITIVE.sqrt() {
        return Ok(direction);
    }
    let yy = h1.inner(&y, &y)?;
    let yg = h1.inner(&y, grad_new)?;
    let dg = h1.inner(dir_old, grad_new)?;
    let beta_hz = (yg - 2.0 * dg * yy / dy) / dy;
    let d_norm = h1.norm(dir_old)?;
    let g_norm = h1.norm(grad_old)?;
    let floor = -1.0 / (d_norm * hz_eta.min(g_norm));
    let beta = beta_hz.max(floor);
    direction.axpy(beta, dir_old)?;
    if h1.inner(&direction, grad_new)? >= 0.0 {
        // restart: guaranteed descent
        direction = grad_new.clone();
        direction.scale(-1.0);
    }
    Ok(direction)
}

struct LineSearchPoint {
    alpha: f64,
    breakdown: CostBreakdown,
    grad: ControlSignal,
    dphi: f64,
}

pub struct LineSearchResult {
    pub alpha: f64,
    pub breakdown: CostBreakdown,
    pub grad: ControlSignal,
    pub evals: usize,
}

/// Strong-Wolfe line search: bracketing with step doubling, then zoom with
/// cubic interpolation. Requires a descent direction; on trial exhaustion
/// the best sufficient-decrease point found is returned.
pub fn wolfe_line_search<O: Objective>(
    objective: &O,
    u: &ControlSignal,
    direction: &ControlSignal,
    j0: f64,
    dphi0: f64,
    alpha_init: f64,
    config: &OptimizerConfig,
) -> Result<LineSearchResult> {
    if !(dphi0 < 0.0) {
        return Err(TdksError::LineSearchFailed(format!(
            "not a descent direction: ⟨g, d⟩ = {dphi0:.3e}"
        )));
    }
    let h1 = objective.h1();
    let c1 = config.c1;
    let c2 = config.c2;
    let mut evals = 0usize;
    let mut probe = |alpha: f64| -> Result<LineSearchPoint> {
        let trial = u.step(alpha, direction)?;
        let (breakdown, grad) = objective.evaluate_with_gradient(&trial)?;
        evals += 1;
        let dphi = h1.inner(&grad, direction)?;
        Ok(LineSearchPoint {
            alpha,
            breakdown,
            grad,
            dphi,
        })
    };
    let armijo = |alpha: f64, phi: f64| phi <= j0 + c1 * alpha * dphi0;
    let wolfe = |dphi: f64| dphi.abs() <= -c2 * dphi0;

    let mut best_armijo: Option<LineSearchPoint> = None;
    let consider =
        |best: &mut Option<LineSearchPoint>, p: &LineSearchPoint| {
            if armijo(p.alpha, p.breakdown.total())
                && best
                    .as_ref()
                    .map(|b| p.breakdown.total() < b.breakdown.total())
                    .unwrap_or(true)
            {
                *best = Some(LineSearchPoint {
                    alpha: p.alpha,
                    breakdown: p.breakdown,
                    grad: p.grad.clone(),
                    dphi: p.dphi,
                });
            }
        };

    // bracketing phase
    let mut prev_alpha = 0.0;
    let mut prev_phi = j0;
    let mut prev_dphi = dphi0;
    let mut prev_grad: Option<ControlSignal> = None;
    let mut alpha = alpha_init.max(f64::MIN_POSITIVE);
    let mut bracket: Option<(f64, f64, f64, f64, f64, f64)> = None;
    let mut trials = 0usize;
    while trials < config.ls_max_trials {
        trials += 1;
        let p = probe(alpha)?;
        consider(&mut best_armijo, &p);
        let phi = p.breakdown.total();
        if !armijo(alpha, phi) || (trials > 1 && phi >= prev_phi) {
            bracket = Some((prev_alpha, prev_phi, prev_dphi, alpha, phi, p.dphi));
            break;
        }
        if wolfe(p.dphi) {
            return Ok(LineSearchResult {
                alpha: p.alpha,
                breakdown: p.breakdown,
                grad: p.grad,
                evals,
            });
        }
        if p.dphi >= 0.0 {
            bracket = Some((alpha, phi, p.dphi, prev_alpha, prev_phi, prev_dphi));
            break;
        }
        prev_alpha = alpha;
        prev_phi = phi;
        prev_dphi = p.dphi;
        prev_grad = Some(p.grad);
        alpha *= 2.0;
    }
    let _ = prev_grad;

    // zoom phase
    if let Some((mut lo_a, mut lo_phi, mut lo_dphi, mut hi_a, mut hi_phi, mut hi_dphi)) = bracket
    {
        while trials < config.ls_max_trials {
            trials += 1;
            let mut candidate = cubic_minimizer(lo_a, lo_phi, lo_dphi, hi_a, hi_phi, hi_dphi);
            let (left, right) = if lo_a < hi_a { (lo_a, hi_a) } else { (hi_a, lo_a) };
            let width = right - left;
            if !candidate.is_finite()
                || candidate <= left + 0.01 * width
                || candidate >= right - 0.01 * width
            {
                candidate = 0.5 * (left + right);
            }
            if width < 1e-12 * right.max(1.0) {
                break;
            }
            let p = probe(candidate)?;
            consider(&mut best_armijo, &p);
            let phi = p.breakdown.total();
            if !armijo(candidate, phi) || phi >= lo_phi {
                hi_a = candidate;
                hi_phi = phi;
                hi_dphi = p.dphi;
            } else {
                if wolfe(p.dphi) {
                    return Ok(LineSearchResult {
                        alpha: p.alpha,
                        breakdown: p.breakdown,
                        grad: p.grad,
                        evals,
                    });
                }
                if p.dphi * (hi_a - lo_a) >= 0.0 {
                    hi_a = lo_a;
                    hi_phi = lo_phi;
                    hi_dphi = lo_dphi;
                }
                lo_a = candidate;
                lo_phi = phi;
                lo_dphi = p.dphi;
            }
        }
    }

    match best_armijo {
        Some(p) => Ok(LineSearchResult {
            alpha: p.alpha,
            breakdown: p.breakdown,
            grad: p.grad,
            evals,
        }),
        None => Err(TdksError::LineSearchFailed(format!(
            "no sufficient-decrease step found in {} trials from J = {j0:.6e}",
            trials
        ))),
    }
}

/// Minimizer of the cubic interpolant through (a, fa, ga) and (b, fb, gb).
fn cubic_minimizer(a: f64, fa: f64, ga: f64, b: f64, fb: f64, gb: f64) -> f64 {
    let d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    let d2_sq = d1 * d1 - ga * gb;
    if d2_sq >= 0.0 {
        let d2 = d2_sq.sqrt() * (b - a).signum();
        b - (b - a) * (gb + d2 - d1) / (gb - ga + 2.0 * d2)
    } else {
        f64::NAN
    }
}

/// Minimize the reduced cost from `u0` following Algorithm "TDDFT
/// optimization with NCG": gradient, tolerance check, Hager-Zhang
/// direction, strong-Wolfe step, update.
pub fn minimize<O: Objective>(
    objective: &O,
    u0: &ControlSignal,
    config: &OptimizerConfig,
) -> Result<MinimizeOutcome> {
    config.validate()?;
    let h1 = objective.h1();
    let (mut breakdown, mut grad) = objective.evaluate_with_gradient(u0)?;
    let mut u = u0.clone();
    let mut grad_norm = h1.norm(&grad)?;
    let mut records = vec![IterationRecord {
        iter: 0,
        breakdown,
        grad_norm,
        alpha: 0.0,
        ls_evals: 1,
    }];
    let mut prev_grad: Option<ControlSignal> = None;
    let mut prev_dir: Option<ControlSignal> = None;
    let mut prev_decrease: Option<f64> = None;

    for iter in 1..=config.max_iterations {
        if grad_norm < config.tolerance {
            return Ok(MinimizeOutcome {
                control: u,
                status: OptStatus::Converged,
                breakdown,
                gradient_norm: grad_norm,
                records,
            });
        }
        let direction = match (config.direction, &prev_grad, &prev_dir) {
            (DirectionMethod::HagerZhang, Some(g_old), Some(d_old)) => {
                hager_zhang_direction(h1, &grad, g_old, d_old, config.hz_eta)?
            }
            _ => {
                let mut d = grad.clone();
                d.scale(-1.0);
                d
            }
        };
        let dphi0 = h1.inner(&grad, &direction)?;
        let alpha_init = match config.initial_step {
            InitialStep::Fixed(v) => v,
            InitialStep::Auto => match prev_decrease {
                Some(dec) if dec > 0.0 && dphi0 < 0.0 => {
                    let guess = -2.0 * dec / dphi0;
                    if guess.is_finite() {
                        guess.clamp(1e-10, 1e10)
                    } else {
                        1.0
                    }
                }
                _ => 1.0,
            },
        };
        let ls = match wolfe_line_search(
            objective,
            &u,
            &direction,
            breakdown.total(),
            dphi0,
            alpha_init,
            config,
        ) {
            Ok(ls) => ls,
            Err(TdksError::LineSearchFailed(detail)) => {
                records.push(IterationRecord {
                    iter,
                    breakdown,
                    grad_norm,
                    alpha: 0.0,
                    ls_evals: 0,
                });
                let _ = detail;
                return Ok(MinimizeOutcome {
                    control: u,
                    status: OptStatus::LineSearchFailed,
                    breakdown,
                    gradient_norm: grad_norm,
                    records,
                });
            }
            Err(e) => return Err(e),
        };
        debug_assert!(
            ls.breakdown.total() <= breakdown.total() + config.c1 * ls.alpha * dphi0.abs(),
            "accepted step must satisfy sufficient decrease"
        );
        prev_decrease = Some(breakdown.total() - ls.breakdown.total());
        u = u.step(ls.alpha, &direction)?;
        prev_grad = Some(grad);
        prev_dir = Some(direction);
        breakdown = ls.breakdown;
        grad = ls.grad;
        grad_norm = h1.norm(&grad)?;
        records.push(IterationRecord {
            iter,
            breakdown,
            grad_norm,
            alpha: ls.alpha,
            ls_evals: ls.evals,
        });
    }

    let status = if grad_norm < config.tolerance {
        OptStatus::Converged
    } else {
        OptStatus::MaxIterations
    };
    Ok(MinimizeOutcome {
        control: u,
        status,
        breakdown,
        gradient_norm: grad_norm,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagation::TimeGrid;
    use std::cell::Cell;

    /// Quadratic model in the H¹ geometry: Ĵ(u) = ½·Σ_i m_i·⟨u - u*, e_i⟩²
    /// over an H¹-orthonormal basis {e_i}; its H¹ gradient is
    /// Σ_i m_i⟨u - u*, e_i⟩·e_i. CG terminates finitely on it.
    struct QuadraticModel {
        h1: H1,
        basis: Vec<ControlSignal>,
        masses: Vec<f64>,
        target: ControlSignal,
        evals: Cell<usize>,
    }

    impl QuadraticModel {
        fn new(tgrid: TimeGrid, masses: Vec<f64>) -> Self {
            let h1 = H1::new(tgrid, 1.0).unwrap();
            // endpoint-pinned hat-like seeds, H¹-orthonormalized
            let mut basis: Vec<ControlSignal> = Vec::new();
            for (i, _) in masses.iter().enumerate() {
                let mut v = ControlSignal::from_fn(tgrid, |t| {
                    ((i as f64 + 1.0) * std::f64::consts::PI * t / tgrid.horizon()).sin()
                });
                for b in &basis {
                    let proj = h1.inner(b, &v).unwrap();
                    v.axpy(-proj, b).unwrap();
                }
                let n = h1.norm(&v).unwrap();
                v.scale(1.0 / n);
                basis.push(v);
            }
            let mut target = ControlSignal::zeros(tgrid);
            for (i, b) in basis.iter().enumerate() {
                target.axpy(0.9 + 0.4 * i as f64, b).unwrap();
            }
            Self {
                h1,
                basis,
                masses,
                target,
                evals: Cell::new(0),
            }
        }

        fn residual(&self, u: &ControlSignal) -> ControlSignal {
            let mut r = u.clone();
            r.axpy(-1.0, &self.target).unwrap();
            r
        }
    }

    impl Objective for QuadraticModel {
        fn h1(&self) -> &H1 {
            &self.h1
        }

        fn evaluate(&self, u: &ControlSignal) -> Result<CostBreakdown> {
            self.evals.set(self.evals.get() + 1);
            let r = self.residual(u);
            let mut j = 0.0;
            for (b, m) in self.basis.iter().zip(&self.masses) {
                let c = self.h1.inner(&r, b)?;
                j += 0.5 * m * c * c;
            }
            Ok(CostBreakdown {
                j_beta: j,
                j_eta: 0.0,
                j_nu: 0.0,
            })
        }

        fn evaluate_with_gradient(
            &self,
            u: &ControlSignal,
        ) -> Result<(CostBreakdown, ControlSignal)> {
            let bd = self.evaluate(u)?;
            let r = self.residual(u);
            let mut grad = ControlSignal::zeros(*self.h1.time_grid());
            for (b, m) in self.basis.iter().zip(&self.masses) {
                let c = self.h1.inner(&r, b)?;
                grad.axpy(m * c, b)?;
            }
            Ok((bd, grad))
        }
    }

    #[test]
    fn first_direction_is_steepest_descent() {
        let tgrid = TimeGrid::new(1.0, 8).unwrap();
        let model = QuadraticModel::new(tgrid, vec![1.0, 2.0, 5.0]);
        let u0 = ControlSignal::zeros(tgrid);
        let cfg = OptimizerConfig {
            max_iterations: 1,
            ..Default::default()
        };
        let out = minimize(&model, &u0, &cfg).unwrap();
        // after one iteration of exact line search along -g the new gradient
        // is H¹-orthogonal to the old one
        let (_, g0) = model.evaluate_with_gradient(&u0).unwrap();
        let (_, g1) = model.evaluate_with_gradient(&out.control).unwrap();
        let cross = model.h1.inner(&g0, &g1).unwrap();
        let scale = model.h1.norm(&g0).unwrap() * model.h1.norm(&g1).unwrap();
        assert!(cross.abs() < 1e-6 * scale.max(1e-30), "not a -g step: {cross:.3e}");
    }

    #[test]
    fn conjugate_gradient_terminates_finitely_on_quadratics() {
        let tgrid = TimeGrid::new(1.0, 16).unwrap();
        let model = QuadraticModel::new(tgrid, vec![1.0, 3.5, 9.0]);
        let u0 = ControlSignal::zeros(tgrid);
        let cfg = OptimizerConfig {
            max_iterations: 4,
            tolerance: 1e-10,
            ..Default::default()
        };
        let out = minimize(&model, &u0, &cfg).unwrap();
        assert_eq!(out.status, OptStatus::Converged, "records: {:?}", out.records);
        assert!(
            out.records.len() <= 5,
            "3-dof quadratic should finish in <= 4 iterations"
        );
        assert!(out.gradient_norm < 1e-10);
    }

    #[test]
    fn steepest_descent_mode_also_converges_on_quadratics() {
        let tgrid = TimeGrid::new(1.0, 16).unwrap();
        let model = QuadraticModel::new(tgrid, vec![1.0, 3.0, 8.0]);
        let u0 = ControlSignal::zeros(tgrid);
        let cfg = OptimizerConfig {
            max_iterations: 300,
            tolerance: 1e-8,
            direction: DirectionMethod::SteepestDescent,
            ..Default::default()
        };
        let out = minimize(&model, &u0, &cfg).unwrap();
        assert_eq!(out.status, OptStatus::Converged);
        // monotone descent along the way
        for pair in out.records.windows(2) {
            assert!(pair[1].breakdown.total() <= pair[0].breakdown.total() + 1e-15);
        }
    }

    #[test]
    fn converged_start_returns_immediately() {
        let tgrid = TimeGrid::new(1.0, 8).unwrap();
        let model = QuadraticModel::new(tgrid, vec![2.0]);
        let cfg = OptimizerConfig::default();
        let out = minimize(&model, &model.target, &cfg).unwrap();
        assert_eq!(out.status, OptStatus::Converged);
        assert_eq!(out.records.len(), 1, "no iterations expected");
    }

    #[test]
    fn line_search_recovers_quadratic_minimizer_by_interpolation() {
        let tgrid = TimeGrid::new(1.0, 8).unwrap();
        for alpha_star in [0.25, 3.0] {
            let model = QuadraticModel::new(tgrid, vec![1.0]);
            // J(u) = ½·⟨u - c·e, e⟩² along e: φ(α) = ½(α - c)² from u = 0
            let d = model.basis[0].clone();
            let mut target_model = model;
            target_model.target = {
                let mut t = ControlSignal::zeros(tgrid);
                t.axpy(alpha_star, &target_model.basis[0]).unwrap();
                t
            };
            let u0 = ControlSignal::zeros(tgrid);
            let (bd, g) = target_model.evaluate_with_gradient(&u0).unwrap();
            let dphi0 = target_model.h1.inner(&g, &d).unwrap();
            let cfg = OptimizerConfig::default();
            let ls =
                wolfe_line_search(&target_model, &u0, &d, bd.total(), dphi0, 1.0, &cfg).unwrap();
            assert!(
                ls.alpha >= 0.5 * alpha_star && ls.alpha <= 1.5 * alpha_star,
                "line search step {} for minimizer {alpha_star}",
                ls.alpha
            );
            // Armijo holds for the accepted step
            assert!(ls.breakdown.total() <= bd.total() + cfg.c1 * ls.alpha * dphi0);
        }
    }

    #[test]
    fn ascent_directions_are_rejected_without_evaluation() {
        let tgrid = TimeGrid::new(1.0, 8).unwrap();
        let model = QuadraticModel::new(tgrid, vec![1.0, 2.0]);
        let u0 = ControlSignal::zeros(tgrid);
        let (bd, g) = model.evaluate_with_gradient(&u0).unwrap();
        let before = model.evals.get();
        let err = wolfe_line_search(
            &model,
            &u0,
            &g, // ascent: d = +g
            bd.total(),
            model.h1.inner(&g, &g).unwrap(),
            1.0,
            &OptimizerConfig::default(),
        );
        assert!(matches!(err, Err(TdksError::LineSearchFailed(_))));
        assert_eq!(model.evals.get(), before, "no evaluation may happen");
    }

    #[test]
    fn degenerate_curvature_restarts_to_steepest_descent() {
        let tgrid = TimeGrid::new(1.0, 8).unwrap();
        let h1 = H1::new(tgrid, 1.0).unwrap();
        let g = ControlSignal::from_fn(tgrid, |t| (std::f64::consts::PI * t).sin());
        // y = g_new - g_old = 0 forces ⟨d, y⟩ = 0
        let d = ControlSignal::from_fn(tgrid, |t| t * (1.0 - t));
        let dir = hager_zhang_direction(&h1, &g, &g, &d, 0.01).unwrap();
        let mut minus_g = g.clone();
        minus_g.scale(-1.0);
        for (a, b) in dir.values().iter().zip(minus_g.values()) {
            assert_eq!(a, b, "restart must return -g");
        }
    }

    #[test]
    fn accepted_directions_always_descend() {
        let tgrid = TimeGrid::new(1.0, 16).unwrap();
        let model = QuadraticModel::new(tgrid, vec![1.0, 4.0, 16.0]);
        let u0 = ControlSignal::from_fn(tgrid, |t| 0.3 * (2.0 * std::f64::consts::PI * t).sin());
        let cfg = OptimizerConfig {
            max_iterations: 10,
            tolerance: 1e-12,
            ..Default::default()
        };
        let out = minimize(&model, &u0, &cfg).unwrap();
        for pair in out.records.windows(2) {
            assert!(
                pair[1].breakdown.total() <= pair[0].breakdown.total(),
                "cost history must be non-increasing"
            );
        }
    }
}
