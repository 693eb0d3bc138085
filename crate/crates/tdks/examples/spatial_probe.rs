use std::sync::Arc;
use tdks::grid::{make_grid, build_hartree_kernel, SpatialGrid};
use tdks::potentials::*;
use tdks::propagation::*;
use tdks::control::ControlSignal;
use tdks::experiments::coherent_pair;
use num_complex::Complex64;

fn model_with(grid: &Arc<SpatialGrid>, hartree: bool, x: bool, c: bool) -> KohnSham {
    KohnSham::new(
        grid.clone(),
        &PotentialPreset::Harmonic50,
        &ControlShape::Quadratic,
        if hartree { Some(build_hartree_kernel(grid)) } else { None },
        if x { Some(ExchangeParams::for_dim(2).unwrap()) } else { None },
        if c { Some(CorrelationFit::default()) } else { None },
    ).unwrap()
}

fn run(m: usize, hartree: bool, x: bool, c: bool, steps: usize) -> Vec<Orbitals> {
    let grid = make_grid(2, 7.0, m).unwrap();
    let model = model_with(&grid, hartree, x, c);
    let psi0 = coherent_pair(&grid, 50.0, 0.5);
    let tgrid = TimeGrid::new(0.1, steps).unwrap();
    let u = ControlSignal::zeros(tgrid);
    let stride = steps / 10;
    let mut snaps = Vec::new();
    solve_forward_observed(&psi0, &u, &tgrid, &model, |k, p| { if k % stride == 0 { snaps.push(p.clone()); } }).unwrap();
    snaps
}

fn err(sol: &[Orbitals], refr: &[Orbitals], dt: f64) -> f64 {
    let mc = sol[0].grid().points_per_axis();
    let mf = refr[0].grid().points_per_axis();
    let r = mf / mc;
    let w = sol[0].grid().cell_volume();
    let n = sol.len();
    let mut total = 0.0;
    for (k, (s, f)) in sol.iter().zip(refr).enumerate() {
        let wt = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        let mut sp = 0.0;
        for (a, b) in s.fields().iter().zip(f.fields()) {
            for ix in 0..mc { for iy in 0..mc {
                let d: Complex64 = a.values()[ix * mc + iy] - b.values()[(ix * r) * mf + iy * r];
                sp += d.norm_sqr();
            }}
        }
        total += wt * dt * sp * w;
    }
    total.sqrt()
}

fn main() {
    let steps = 2000; // dt = 5e-5; isolation probe only
    for (label, h, x, c) in [("none", false, false, false), ("hartree", true, false, false), ("exchange", false, true, false), ("corr", false, false, true), ("full", true, true, true)] {
        let refr = run(128, h, x, c, steps);
        let mut prev: Option<f64> = None;
        print!("{label:9}");
        for m in [16usize, 32, 64] {
            let e = err(&run(m, h, x, c, steps), &refr, 0.01);
            if let Some(p) = prev { print!(" M={m}: {e:.3e} (x{:.0})", p / e); } else { print!(" M={m}: {e:.3e}", ); }
            prev = Some(e);
        }
        println!();
    }
}
