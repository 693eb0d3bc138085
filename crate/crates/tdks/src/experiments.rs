//! Experiment presets and runners: the tracking and double-well control
//! experiments, the convergence study, the finite-difference gradient
//! check, and the ν sweep. Each runner writes its resolved configuration,
//! a machine-readable status, and CSV/binary outputs into the given
//! directory.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, ExperimentKind, TargetRegion};
use crate::control::{ControlSignal, CostBreakdown, TargetSpec, H1};
use crate::error::{Result, TdksError};
use crate::field::ComplexField;
use crate::grid::{build_hartree_kernel, make_grid, SpatialGrid};
use crate::io;
use crate::optim::{minimize, Objective, OptStatus};
use crate::potentials::{density, CorrelationFit, Density, ExchangeParams, KohnSham, PotentialPreset};
use crate::problem::TdksProblem;
use crate::propagation::{
    ground_state, solve_forward_observed, GroundStateParams, Orbitals, TimeGrid,
};

pub fn build_grid(cfg: &ExperimentConfig) -> Result<Arc<SpatialGrid>> {
    make_grid(cfg.grid_dim, cfg.grid_extent, cfg.grid_points)
}

fn preset_with_offset(cfg: &ExperimentConfig) -> PotentialPreset {
    if cfg.potential_offset == 0.0 {
        cfg.preset.clone()
    } else {
        PotentialPreset::Offset {
            base: Box::new(cfg.preset.clone()),
            shift: cfg.potential_offset,
        }
    }
}

pub fn build_model(cfg: &ExperimentConfig, grid: &Arc<SpatialGrid>) -> Result<KohnSham> {
    let (kernel, exchange, correlation) = if cfg.interacting {
        (
            Some(build_hartree_kernel(grid)),
            Some(ExchangeParams::for_dim(2)?.with_cutoff(cfg.exchange_cutoff)?),
            Some(CorrelationFit::new(
                cfg.correlation_saturation,
                cfg.correlation_scale,
            )?),
        )
    } else {
        (None, None, None)
    };
    KohnSham::new(
        grid.clone(),
        &preset_with_offset(cfg),
        &cfg.control,
        kernel,
        exchange,
        correlation,
    )
}

pub fn ground_state_params(cfg: &ExperimentConfig) -> GroundStateParams {
    GroundStateParams {
        dtau: cfg.gs_dtau,
        tol: cfg.gs_tol,
        max_steps: cfg.gs_max_steps,
    }
}

/// χ_A sampled sharply on the grid (1 inside A, 0 outside).
pub fn region_indicator(region: TargetRegion, grid: &SpatialGrid) -> Option<Vec<f64>> {
    let c = grid.center();
    match region {
        TargetRegion::None => None,
        TargetRegion::All => Some(vec![1.0; grid.len()]),
        TargetRegion::LeftHalf => {
            Some(grid.sample_real(|x| if x[0] - c < 0.0 { 1.0 } else { 0.0 }))
        }
    }
}

/// The tracking forcing u_d(t) = A·sin²(πt/T); endpoint-pinned.
pub fn forcing_signal(cfg: &ExperimentConfig, tgrid: TimeGrid) -> ControlSignal {
    let amplitude = cfg.tracking_amplitude;
    let horizon = tgrid.horizon();
    ControlSignal::from_fn(tgrid, |t| amplitude * (PI * t / horizon).sin().powi(2))
}

/// Run the forward system under a forcing and keep the density at every
/// node: the synthetic target trajectory ρ_d.
pub fn synthesize_target(
    model: &KohnSham,
    psi0: &Orbitals,
    u_d: &ControlSignal,
    tgrid: &TimeGrid,
) -> Result<Vec<Density>> {
    let mut targets = Vec::with_capacity(tgrid.len());
    solve_forward_observed(psi0, u_d, tgrid, model, |_, psi| {
        targets.push(density(psi).expect("snapshot grid matches model grid"));
    })?;
    Ok(targets)
}

/// Assemble the full control problem for an experiment config. For the
/// tracking experiment (β > 0) the target trajectory is synthesized from
/// the forcing; the forcing is returned alongside.
pub fn build_problem(cfg: &ExperimentConfig) -> Result<(TdksProblem, Option<ControlSignal>)> {
    let grid = build_grid(cfg)?;
    let model = build_model(cfg, &grid)?;
    let tgrid = TimeGrid::new(cfg.time_horizon, cfg.time_steps)?;
    let weights = cfg.weights()?;
    let psi0 = ground_state(&model, cfg.particles, &ground_state_params(cfg))?;
    let chi_a = region_indicator(cfg.target_region, &grid);
    if weights.eta > 0.0 && chi_a.is_none() {
        return Err(TdksError::Config(
            "eta > 0 requires target.region to be set".into(),
        ));
    }
    let (rho_d, u_d) = if weights.beta > 0.0 {
        let u_d = forcing_signal(cfg, tgrid);
        let rho_d = synthesize_target(&model, &psi0, &u_d, &tgrid)?;
        (Some(rho_d), Some(u_d))
    } else {
        (None, None)
    };
    let targets = TargetSpec { rho_d, chi_a };
    let problem = TdksProblem::new(model, tgrid, weights, targets, psi0)?;
    Ok((problem, u_d))
}

/// Outcome of one optimization run plus the metrics the experiments report.
pub struct RunSummary {
    pub status: OptStatus,
    pub initial_cost: f64,
    pub final_cost: CostBreakdown,
    pub gradient_norm: f64,
    pub iterations: usize,
    /// ∫χ_A ρ(·, T) under the optimized control, when a region is set.
    pub final_region_mass: Option<f64>,
    /// Discrete L²(0,T) distance between the recovered control and the
    /// forcing that produced the target (tracking only).
    pub control_target_l2: Option<f64>,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn write_echo_and_status(dir: &Path, cfg: &ExperimentConfig, status: Option<OptStatus>) -> Result<()> {
    std::fs::write(dir.join("resolved_config.cfg"), cfg.echo())?;
    if let Some(s) = status {
        std::fs::write(dir.join("status.txt"), format!("{}\n", s.token()))?;
    }
    Ok(())
}

/// Re-propagate under a control, writing observables and density
/// snapshots (at the configured stride) alongside.
fn export_trajectory_outputs(
    dir: &Path,
    cfg: &ExperimentConfig,
    problem: &TdksProblem,
    u: &ControlSignal,
) -> Result<()> {
    let tgrid = *problem.time_grid();
    let grid = problem.model().grid().clone();
    let chi = problem.targets().chi_a.clone();
    let mut observables = io::ObservablesWriter::create(
        &dir.join("observables.csv"),
        problem.initial_state().count(),
        grid.dim(),
        chi,
    )?;
    let stride = cfg.snapshot_stride;
    let mut io_error: Option<TdksError> = None;
    solve_forward_observed(
        problem.initial_state(),
        u,
        &tgrid,
        problem.model(),
        |k, psi| {
            if io_error.is_some() {
                return;
            }
            if let Err(e) = observables.record(tgrid.node(k), psi) {
                io_error = Some(e);
                return;
            }
            if stride > 0 && k % stride == 0 {
                let rho = density(psi).expect("snapshot grid matches model grid");
                if let Err(e) = io::write_density(&dir.join(format!("density_{k:06}.field")), &rho)
                {
                    io_error = Some(e);
                }
            }
        },
    )?;
    if let Some(e) = io_error {
        return Err(e);
    }
    observables.finish()
}

fn optimize_and_export(
    dir: &Path,
    cfg: &ExperimentConfig,
    problem: &TdksProblem,
    u_d: Option<&ControlSignal>,
) -> Result<RunSummary> {
    ensure_dir(dir)?;
    write_echo_and_status(dir, cfg, None)?;
    let u0 = problem.zero_control();
    let initial_cost = problem.evaluate(&u0)?.total();
    let outcome = minimize(problem, &u0, &cfg.optimizer_config())?;
    io::write_iteration_log(&dir.join("iterations.csv"), &outcome.records)?;

    let (_, grad, coupling) = problem.cost_and_gradient(&outcome.control)?;
    io::write_control_series(&dir.join("control.csv"), &outcome.control, &grad, &coupling)?;
    let control_target_l2 = match u_d {
        Some(u_d) => {
            io::write_control_vs_target(&dir.join("control_vs_target.csv"), &outcome.control, u_d)?;
            let h1 = H1::new(*problem.time_grid(), 1.0)?;
            let mut diff = outcome.control.clone();
            diff.axpy(-1.0, u_d)?;
            Some(h1.l2_inner(&diff, &diff)?.sqrt())
        }
        None => None,
    };
    export_trajectory_outputs(dir, cfg, problem, &outcome.control)?;
    let final_region_mass = problem.final_region_mass(&outcome.control)?;
    write_echo_and_status(dir, cfg, Some(outcome.status))?;

    let summary = RunSummary {
        status: outcome.status,
        initial_cost,
        final_cost: outcome.breakdown,
        gradient_norm: outcome.gradient_norm,
        iterations: outcome.records.last().map(|r| r.iter).unwrap_or(0),
        final_region_mass,
        control_target_l2,
    };
    let mut report = String::new();
    report.push_str(&format!("status: {}\n", summary.status.token()));
    report.push_str(&format!("initial_cost: {:.12e}\n", summary.initial_cost));
    report.push_str(&format!("final_cost: {:.12e}\n", summary.final_cost.total()));
    report.push_str(&format!("final_j_beta: {:.12e}\n", summary.final_cost.j_beta));
    report.push_str(&format!("final_j_eta: {:.12e}\n", summary.final_cost.j_eta));
    report.push_str(&format!("final_j_nu: {:.12e}\n", summary.final_cost.j_nu));
    report.push_str(&format!("gradient_norm: {:.12e}\n", summary.gradient_norm));
    report.push_str(&format!("iterations: {}\n", summary.iterations));
    if let Some(m) = summary.final_region_mass {
        report.push_str(&format!("final_region_mass: {:.12e}\n", m));
    }
    if let Some(d) = summary.control_target_l2 {
        report.push_str(&format!("control_target_l2: {:.12e}\n", d));
    }
    std::fs::write(dir.join("summary.txt"), report)?;
    Ok(summary)
}

/// First §6 experiment: track the density produced by a prescribed
/// oscillation of the harmonic confinement, starting from u₀ = 0.
pub fn run_tracking_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary> {
    let (problem, u_d) = build_problem(cfg)?;
    optimize_and_export(out_dir, cfg, &problem, u_d.as_ref())
}

/// Second §6 experiment: drive the double-well ground state out of the
/// left half-space with a dipole control.
pub fn run_doublewell_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary> {
    let (problem, _) = build_problem(cfg)?;
    optimize_and_export(out_dir, cfg, &problem, None)
}

/// ν sweep: independent optimizations from u₀ = 0 for every ν in the
/// config, each in its own subdirectory, plus a summary CSV.
pub fn run_sweep_nu(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<(f64, RunSummary)>> {
    ensure_dir(out_dir)?;
    let mut rows = Vec::new();
    for &nu in &cfg.sweep_nus {
        let mut sub_cfg = cfg.clone();
        sub_cfg.nu = nu;
        let dir = out_dir.join(format!("nu_{nu:e}"));
        let (problem, u_d) = build_problem(&sub_cfg)?;
        let summary = optimize_and_export(&dir, &sub_cfg, &problem, u_d.as_ref())?;
        rows.push((nu, summary));
    }
    let mut csv = String::from("nu,J0,J_final,J_beta,J_eta,J_nu,grad_norm,iterations,status,u_minus_ud_l2\n");
    for (nu, s) in &rows {
        csv.push_str(&format!(
            "{:e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{},{}\n",
            nu,
            s.initial_cost,
            s.final_cost.total(),
            s.final_cost.j_beta,
            s.final_cost.j_eta,
            s.final_cost.j_nu,
            s.gradient_norm,
            s.iterations,
            s.status.token(),
            s.control_target_l2
                .map(|d| format!("{d:.12e}"))
                .unwrap_or_else(|| "".into()),
        ));
    }
    std::fs::write(out_dir.join("sweep.csv"), csv)?;
    Ok(rows)
}

/// Coherent states of two non-interacting particles in the harmonic trap:
/// displaced copies of the trap's Gaussian ground orbital.
pub fn coherent_pair(grid: &Arc<SpatialGrid>, stiffness: f64, displacement: f64) -> Orbitals {
    let sigma_sq = 1.0 / stiffness.sqrt();
    let c = grid.center();
    let make = |dx: f64| {
        let mut f = ComplexField::from_fn(grid.clone(), |x| {
            let x1 = x[0] - c - dx;
            let x2 = if x.len() > 1 { x[1] - c } else { 0.0 };
            Complex64::new((-(x1 * x1 + x2 * x2) / (2.0 * sigma_sq)).exp(), 0.0)
        });
        f.normalize();
        f
    };
    Orbitals::new(vec![make(displacement), make(-displacement)]).unwrap()
}

/// Y-norm of the difference between a solution sampled at shared nodes and
/// a reference: sqrt(Σ_k w_k·Δt·Σ_m h^dim·Σ_x |ψ - ψ_ref|²). The reference
/// may live on a finer mesh whose points contain the coarse points.
fn sampled_y_norm_error(
    solution: &[Orbitals],
    reference: &[Orbitals],
    sample_dt: f64,
) -> Result<f64> {
    if solution.len() != reference.len() {
        return Err(TdksError::TimeGridMismatch(
            "sampled solution and reference disagree in node count".into(),
        ));
    }
    let coarse = solution[0].grid().clone();
    let fine = reference[0].grid().clone();
    let m_coarse = coarse.points_per_axis();
    let m_fine = fine.points_per_axis();
    if m_fine % m_coarse != 0 {
        return Err(TdksError::GridMismatch(format!(
            "reference mesh {m_fine} must be a multiple of {m_coarse}"
        )));
    }
    let ratio = m_fine / m_coarse;
    let dim = coarse.dim();
    let w = coarse.cell_volume();
    let n = solution.len();
    let mut total = 0.0;
    for (k, (snap, ref_snap)) in solution.iter().zip(reference).enumerate() {
        let weight = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        let mut spatial = 0.0;
        for (f, rf) in snap.fields().iter().zip(ref_snap.fields()) {
            match dim {
                1 => {
                    for ix in 0..m_coarse {
                        let d = f.values()[ix] - rf.values()[ix * ratio];
                        spatial += d.norm_sqr();
                    }
                }
                2 => {
                    for ix in 0..m_coarse {
                        for iy in 0..m_coarse {
                            let d = f.values()[ix * m_coarse + iy]
                                - rf.values()[(ix * ratio) * m_fine + iy * ratio];
                            spatial += d.norm_sqr();
                        }
                    }
                }
                _ => unreachable!(),
            }
        }
        total += weight * sample_dt * spatial * w;
    }
    Ok(total.sqrt())
}

/// Propagate and keep snapshots at every node k that is a multiple of
/// `stride`.
fn sampled_solve(
    psi0: &Orbitals,
    tgrid: &TimeGrid,
    model: &KohnSham,
    stride: usize,
) -> Result<Vec<Orbitals>> {
    let u = ControlSignal::zeros(*tgrid);
    let mut samples = Vec::new();
    solve_forward_observed(psi0, &u, tgrid, model, |k, psi| {
        if k % stride == 0 {
            samples.push(psi.clone());
        }
    })?;
    Ok(samples)
}

pub struct ConvergenceReport {
    /// (dt, Y-norm error) over the halving ladder.
    pub temporal: Vec<(f64, f64)>,
    /// Least-squares slope of log error against log dt.
    pub temporal_slope: f64,
    /// (points per axis, Y-norm error) at fixed dt.
    pub spatial: Vec<(usize, f64)>,
}

fn cached_reference(
    cache_dir: &Path,
    key: &str,
    compute: impl FnOnce() -> Result<Vec<Orbitals>>,
) -> Result<Vec<Orbitals>> {
    ensure_dir(cache_dir)?;
    let path = cache_dir.join(format!("ref_{:016x}.snaps", io::fnv1a(key)));
    if path.exists() {
        match io::read_snapshots(&path) {
            Ok(snaps) => return Ok(snaps),
            Err(_) => {
                // stale or corrupt cache entry; recompute below
                let _ = std::fs::remove_file(&path);
            }
        }
    }
    let snaps = compute()?;
    io::write_snapshots(&path, &snaps)?;
    Ok(snaps)
}

/// Reproduce the accuracy study: the temporal halving ladder against a
/// dt/`reference_refinement` reference at fixed mesh, and the mesh-doubling
/// ladder against a fine-mesh reference at fixed dt. Reference solutions
/// are cached on disk, keyed by the relevant configuration.
pub fn run_convergence_study(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ConvergenceReport> {
    if cfg.convergence.rungs < 3 {
        return Err(TdksError::Config(format!(
            "temporal ladder needs at least 3 rungs to fit a slope, got {}",
            cfg.convergence.rungs
        )));
    }
    ensure_dir(out_dir)?;
    write_echo_and_status(out_dir, cfg, None)?;
    let cache_dir = out_dir.join("cache");
    let horizon = cfg.time_horizon;
    let stiffness = match cfg.preset {
        PotentialPreset::Harmonic { kappa } => kappa,
        _ => 50.0,
    };

    // temporal ladder at fixed mesh
    let grid = build_grid(cfg)?;
    let model = build_model(cfg, &grid)?;
    let psi0 = coherent_pair(&grid, stiffness, cfg.convergence.displacement);
    let base_steps = cfg.convergence.base_steps;
    let ref_steps = base_steps * cfg.convergence.reference_refinement;
    let temporal_key = format!(
        "temporal dim={} L={} M={} T={} Kref={} disp={} interacting={} stiffness={}",
        cfg.grid_dim,
        cfg.grid_extent,
        cfg.grid_points,
        horizon,
        ref_steps,
        cfg.convergence.displacement,
        cfg.interacting,
        stiffness,
    );
    let reference = cached_reference(&cache_dir, &temporal_key, || {
        let tgrid = TimeGrid::new(horizon, ref_steps)?;
        sampled_solve(&psi0, &tgrid, &model, cfg.convergence.reference_refinement)
    })?;
    let sample_dt = horizon / base_steps as f64;
    let mut temporal = Vec::new();
    for rung in 0..cfg.convergence.rungs {
        let steps = base_steps << rung;
        let tgrid = TimeGrid::new(horizon, steps)?;
        let samples = sampled_solve(&psi0, &tgrid, &model, 1 << rung)?;
        let err = sampled_y_norm_error(&samples, &reference, sample_dt)?;
        temporal.push((tgrid.dt(), err));
    }
    let temporal_slope = fit_log_slope(&temporal);
    io::write_convergence_table(&out_dir.join("temporal.csv"), ("dt", "error"), &temporal)?;

    // spatial ladder at fixed dt
    let spatial_steps = cfg.convergence.spatial_steps;
    let spatial_tgrid = TimeGrid::new(horizon, spatial_steps)?;
    let sample_stride = (spatial_steps / 20).max(1);
    // keep the endpoint: require divisibility
    let sample_stride = {
        let mut s = sample_stride;
        while spatial_steps % s != 0 {
            s -= 1;
        }
        s
    };
    let m_ref = cfg.convergence.spatial_reference_points;
    let spatial_key = format!(
        "spatial dim={} L={} Mref={} T={} K={} stride={} disp={} interacting={} stiffness={}",
        cfg.grid_dim,
        cfg.grid_extent,
        m_ref,
        horizon,
        spatial_steps,
        sample_stride,
        cfg.convergence.displacement,
        cfg.interacting,
        stiffness,
    );
    let fine_reference = cached_reference(&cache_dir, &spatial_key, || {
        let fine_grid = make_grid(cfg.grid_dim, cfg.grid_extent, m_ref)?;
        let fine_model = build_model(cfg, &fine_grid)?;
        let fine_psi0 = coherent_pair(&fine_grid, stiffness, cfg.convergence.displacement);
        sampled_solve(&fine_psi0, &spatial_tgrid, &fine_model, sample_stride)
    })?;
    let spatial_sample_dt = horizon / (spatial_steps / sample_stride) as f64;
    let mut spatial = Vec::new();
    for &m in &cfg.convergence.spatial_points {
        let coarse_grid = make_grid(cfg.grid_dim, cfg.grid_extent, m)?;
        let coarse_model = build_model(cfg, &coarse_grid)?;
        let coarse_psi0 = coherent_pair(&coarse_grid, stiffness, cfg.convergence.displacement);
        let samples = sampled_solve(&coarse_psi0, &spatial_tgrid, &coarse_model, sample_stride)?;
        let err = sampled_y_norm_error(&samples, &fine_reference, spatial_sample_dt)?;
        spatial.push((m, err));
    }
    let spatial_rows: Vec<(f64, f64)> = spatial.iter().map(|&(m, e)| (m as f64, e)).collect();
    io::write_convergence_table(&out_dir.join("spatial.csv"), ("M", "error"), &spatial_rows)?;

    let mut report = String::new();
    report.push_str(&format!("temporal_slope: {temporal_slope:.4}\n"));
    for (dt, err) in &temporal {
        report.push_str(&format!("temporal dt={dt:.6e} error={err:.6e}\n"));
    }
    for (m, err) in &spatial {
        report.push_str(&format!("spatial M={m} error={err:.6e}\n"));
    }
    std::fs::write(out_dir.join("report.txt"), report)?;

    Ok(ConvergenceReport {
        temporal,
        temporal_slope,
        spatial,
    })
}

fn fit_log_slope(rows: &[(f64, f64)]) -> f64 {
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(_, e)| *e > 0.0)
        .map(|&(x, e)| (x.ln(), e.ln()))
        .collect();
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

pub struct GradcheckRow {
    pub objective: &'static str,
    pub trial: usize,
    pub adjoint_pairing: f64,
    pub finite_difference: f64,
    pub rel_err: f64,
}

pub struct GradcheckReport {
    pub rows: Vec<GradcheckRow>,
    pub max_rel_err: f64,
}

/// Smooth random endpoint-pinned perturbation: a low-order sine series
/// with seeded coefficients.
pub fn random_pinned_perturbation(tgrid: TimeGrid, seed: u64) -> ControlSignal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
    let horizon = tgrid.horizon();
    ControlSignal::from_fn(tgrid, |t| {
        coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c * ((j as f64 + 1.0) * PI * t / horizon).sin())
            .sum()
    })
}

/// Compare ⟨∇Ĵ, δu⟩_{H¹} against central finite differences of Ĵ for
/// `trials` random perturbations, for the (β=1, η=0) and (β=0, η=1)
/// objectives separately. This is the decisive oracle for every sign
/// convention in the adjoint assembly.
pub fn run_gradcheck(cfg: &ExperimentConfig, trials: usize, eps: f64) -> Result<GradcheckReport> {
    let mut rows = Vec::new();
    let mut max_rel: f64 = 0.0;
    for (label, beta, eta) in [("beta", 1.0, 0.0), ("eta", 0.0, 1.0)] {
        let mut sub_cfg = cfg.clone();
        sub_cfg.beta = beta;
        sub_cfg.eta = eta;
        if eta > 0.0 && sub_cfg.target_region == TargetRegion::None {
            sub_cfg.target_region = TargetRegion::LeftHalf;
        }
        let (problem, _) = build_problem(&sub_cfg)?;
        let tgrid = *problem.time_grid();
        let horizon = tgrid.horizon();
        let u_base = ControlSignal::from_fn(tgrid, |t| 0.5 * (PI * t / horizon).sin());
        let (_, grad) = problem.evaluate_with_gradient(&u_base)?;
        let h1 = problem.h1();
        for trial in 0..trials {
            let delta = random_pinned_perturbation(tgrid, 2024 + trial as u64);
            let pairing = h1.inner(&grad, &delta)?;
            let plus = problem.evaluate(&u_base.step(eps, &delta)?)?.total();
            let minus = problem.evaluate(&u_base.step(-eps, &delta)?)?.total();
            let fd = (plus - minus) / (2.0 * eps);
            let rel = (pairing - fd).abs() / pairing.abs().max(f64::MIN_POSITIVE);
            max_rel = max_rel.max(rel);
            rows.push(GradcheckRow {
                objective: label,
                trial,
                adjoint_pairing: pairing,
                finite_difference: fd,
                rel_err: rel,
            });
        }
    }
    Ok(GradcheckReport {
        rows,
        max_rel_err: max_rel,
    })
}

pub fn write_gradcheck_report(report: &GradcheckReport, out: &Path) -> Result<()> {
    ensure_dir(out)?;
    let mut csv = String::from("objective,trial,adjoint,fd,rel_err\n");
    for r in &report.rows {
        csv.push_str(&format!(
            "{},{},{:.12e},{:.12e},{:.12e}\n",
            r.objective, r.trial, r.adjoint_pairing, r.finite_difference, r.rel_err
        ));
    }
    std::fs::write(out.join("gradcheck.csv"), csv)?;
    Ok(())
}

/// Output directory fallback: `<experiment>_out` under the working
/// directory.
pub fn default_out_dir(cfg: &ExperimentConfig) -> PathBuf {
    PathBuf::from(format!("{}_out", match cfg.experiment {
        ExperimentKind::Tracking => "tracking",
        ExperimentKind::DoubleWell => "doublewell",
        ExperimentKind::Convergence => "convergence",
        ExperimentKind::Custom => "custom",
    }))
}
