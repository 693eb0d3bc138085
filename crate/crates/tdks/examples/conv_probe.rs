use tdks::config::ExperimentConfig;
use tdks::experiments::run_convergence_study;

fn main() {
    let cfg = ExperimentConfig::parse("experiment = convergence\n", &[]).unwrap();
    let t0 = std::time::Instant::now();
    let out = std::path::PathBuf::from("/tmp/conv_probe_out");
    match run_convergence_study(&cfg, &out) {
        Ok(rep) => {
            println!("temporal slope: {:.4} ({:.1}s)", rep.temporal_slope, t0.elapsed().as_secs_f64());
            for (dt, e) in &rep.temporal { println!("  dt={dt:.4e} err={e:.6e}"); }
            for w in rep.spatial.windows(2) {
                println!("  M={} err={:.6e} | M={} err={:.6e} ratio={:.1}",
                    w[0].0, w[0].1, w[1].0, w[1].1, w[0].1 / w[1].1);
            }
            if let Some(last) = rep.spatial.last() { println!("  M={} err={:.6e}", last.0, last.1); }
        }
        Err(e) => println!("FAILED: {e}"),
    }
}
