use tdks::config::ExperimentConfig;
use tdks::experiments::{build_problem, forcing_signal};
use tdks::optim::Objective;
use tdks::propagation::TimeGrid;

fn main() {
    for (t, a, m) in [(1.0f64, 10.0f64, 32usize), (2.0, 10.0, 32), (3.0, 10.0, 32), (3.0, 20.0, 32), (4.0, 10.0, 32), (3.0, 10.0, 48)] {
        let steps = (t / 2e-3) as usize;
        let text = format!(
            "experiment = tracking\ngrid.points = {m}\ntime.horizon = {t}\ntime.steps = {steps}\n\
             tracking.amplitude = {a}\nweights.nu = 1e-5\ngroundstate.tol = 1e-10\n"
        );
        let cfg = ExperimentConfig::parse(&text, &[]).unwrap();
        let t0 = std::time::Instant::now();
        let (problem, u_d) = build_problem(&cfg).unwrap();
        let u_d = u_d.unwrap();
        let j0 = problem.evaluate(&problem.zero_control()).unwrap();
        let jud = problem.evaluate(&u_d).unwrap();
        let _ = forcing_signal(&cfg, TimeGrid::new(t, steps).unwrap());
        println!(
            "T={t} A={a} M={m}: J0={:.4e} J(u_d)={:.4e} (beta {:.2e}, nu {:.2e}) ratio={:.0} ({:.1}s)",
            j0.total(), jud.total(), jud.j_beta, jud.j_nu, j0.total() / jud.total(), t0.elapsed().as_secs_f64()
        );
    }
}
