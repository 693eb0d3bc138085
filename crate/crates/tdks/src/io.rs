//! File formats: the TDKSFIELD binary snapshot format, CSV writers, and
//! the internal cache container for reference trajectories.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::control::ControlSignal;
use crate::error::{Result, TdksError};
use crate::field::ComplexField;
use crate::grid::{make_grid, SpatialGrid};
use crate::optim::IterationRecord;
use crate::potentials::{density, Density};
use crate::propagation::Orbitals;

/// Write a field as "TDKSFIELD v1 dim=<d> M=<m> L=<l>\n" followed by
/// little-endian f64 (re, im) pairs in row-major order.
pub fn write_field(path: &Path, field: &ComplexField) -> Result<()> {
    let grid = field.grid();
    let mut w = BufWriter::new(File::create(path)?);
    write!(
        w,
        "TDKSFIELD v1 dim={} M={} L={}\n",
        grid.dim(),
        grid.points_per_axis(),
        grid.extent()
    )?;
    for v in field.values() {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Densities are real; they are stored with zero imaginary parts.
pub fn write_density(path: &Path, rho: &Density) -> Result<()> {
    let values: Vec<Complex64> = rho
        .values()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    let field = ComplexField::from_values(rho.grid().clone(), values)?;
    write_field(path, &field)
}

pub fn read_field(path: &Path) -> Result<ComplexField> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        r.read_exact(&mut byte)?;
        if byte[0] == b'\n' {
            break;
        }
        header.push(byte[0]);
        if header.len() > 256 {
            return Err(TdksError::Format("TDKSFIELD header too long".into()));
        }
    }
    let header = String::from_utf8(header)
        .map_err(|_| TdksError::Format("TDKSFIELD header is not UTF-8".into()))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("TDKSFIELD") || parts.next() != Some("v1") {
        return Err(TdksError::Format(format!(
            "not a TDKSFIELD v1 header: {header:?}"
        )));
    }
    let mut dim = None;
    let mut m = None;
    let mut l = None;
    for item in parts {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| TdksError::Format(format!("bad header item {item:?}")))?;
        match key {
            "dim" => dim = Some(value.parse::<usize>().map_err(bad_header)?),
            "M" => m = Some(value.parse::<usize>().map_err(bad_header)?),
            "L" => l = Some(value.parse::<f64>().map_err(bad_header)?),
            _ => return Err(TdksError::Format(format!("unknown header key {key:?}"))),
        }
    }
    let (dim, m, l) = match (dim, m, l) {
        (Some(d), Some(m), Some(l)) => (d, m, l),
        _ => return Err(TdksError::Format("incomplete TDKSFIELD header".into())),
    };
    let grid = make_grid(dim, l, m)?;
    read_field_values(&mut r, grid)
}

fn read_field_values(r: &mut impl Read, grid: Arc<SpatialGrid>) -> Result<ComplexField> {
    let mut values = Vec::with_capacity(grid.len());
    let mut buf = [0u8; 16];
    for _ in 0..grid.len() {
        r.read_exact(&mut buf)?;
        let re = f64::from_le_bytes(buf[0..8].try_into().unwrap());
        let im = f64::from_le_bytes(buf[8..16].try_into().unwrap());
        values.push(Complex64::new(re, im));
    }
    ComplexField::from_values(grid, values)
}

fn bad_header<E: std::fmt::Display>(e: E) -> TdksError {
    TdksError::Format(format!("bad TDKSFIELD header value: {e}"))
}

/// Iteration log CSV with the header
/// `iter,J,J_beta,J_eta,J_nu,grad_norm,alpha,ls_evals`.
pub fn write_iteration_log(path: &Path, records: &[IterationRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "iter,J,J_beta,J_eta,J_nu,grad_norm,alpha,ls_evals")?;
    for r in records {
        writeln!(
            w,
            "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{}",
            r.iter,
            r.breakdown.total(),
            r.breakdown.j_beta,
            r.breakdown.j_eta,
            r.breakdown.j_nu,
            r.grad_norm,
            r.alpha,
            r.ls_evals
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Control series CSV `t,u,grad,f`.
pub fn write_control_series(
    path: &Path,
    u: &ControlSignal,
    grad: &ControlSignal,
    coupling: &ControlSignal,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,u,grad,f")?;
    let tgrid = u.time_grid();
    for k in 0..tgrid.len() {
        writeln!(
            w,
            "{:.12e},{:.12e},{:.12e},{:.12e}",
            tgrid.node(k),
            u.values()[k],
            grad.values()[k],
            coupling.values()[k]
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Recovered control against the forcing that produced the target, `t,u,u_d`.
pub fn write_control_vs_target(path: &Path, u: &ControlSignal, u_d: &ControlSignal) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,u,u_d")?;
    let tgrid = u.time_grid();
    for k in 0..tgrid.len() {
        writeln!(
            w,
            "{:.12e},{:.12e},{:.12e}",
            tgrid.node(k),
            u.values()[k],
            u_d.values()[k]
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Observables time series: per-orbital norms, density centroid, and the
/// mass inside the region A when one is defined.
pub struct ObservablesWriter {
    w: BufWriter<File>,
    chi_a: Option<Vec<f64>>,
}

impl ObservablesWriter {
    pub fn create(path: &Path, n_orbitals: usize, dim: usize, chi_a: Option<Vec<f64>>) -> Result<Self> {
        let mut w = BufWriter::new(File::create(path)?);
        let mut header = String::from("t");
        for j in 1..=n_orbitals {
            header.push_str(&format!(",norm_{j}"));
        }
        header.push_str(",centroid_x1");
        if dim > 1 {
            header.push_str(",centroid_x2");
        }
        if chi_a.is_some() {
            header.push_str(",rho_A");
        }
        writeln!(w, "{header}")?;
        Ok(Self { w, chi_a })
    }

    pub fn record(&mut self, t: f64, psi: &Orbitals) -> Result<()> {
        let rho = density(psi)?;
        let mut line = format!("{t:.12e}");
        for f in psi.fields() {
            line.push_str(&format!(",{:.12e}", f.norm_sq().sqrt()));
        }
        let centroid = rho.centroid();
        line.push_str(&format!(",{:.12e}", centroid[0]));
        if psi.grid().dim() > 1 {
            line.push_str(&format!(",{:.12e}", centroid[1]));
        }
        if let Some(chi) = &self.chi_a {
            line.push_str(&format!(",{:.12e}", crate::control::region_mass(&rho, chi)));
        }
        writeln!(self.w, "{line}")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

/// Two-column convergence table.
pub fn write_convergence_table(path: &Path, header: (&str, &str), rows: &[(f64, f64)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{},{}", header.0, header.1)?;
    for (a, b) in rows {
        writeln!(w, "{a:.12e},{b:.12e}")?;
    }
    w.flush()?;
    Ok(())
}

/// FNV-1a hash of a string; keys the on-disk reference cache.
pub fn fnv1a(text: &str) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for byte in text.as_bytes() {
        hash ^= *byte as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Cache container for sampled reference trajectories: a header line
/// followed by the raw (re, im) pairs of every snapshot's orbitals.
pub fn write_snapshots(path: &Path, snapshots: &[Orbitals]) -> Result<()> {
    if snapshots.is_empty() {
        return Err(TdksError::InvalidArgument("no snapshots to write".into()));
    }
    let grid = snapshots[0].grid();
    let n_orb = snapshots[0].count();
    let mut w = BufWriter::new(File::create(path)?);
    write!(
        w,
        "TDKSSNAPS v1 dim={} M={} L={} orbitals={} nodes={}\n",
        grid.dim(),
        grid.points_per_axis(),
        grid.extent(),
        n_orb,
        snapshots.len()
    )?;
    for snap in snapshots {
        for f in snap.fields() {
            for v in f.values() {
                w.write_all(&v.re.to_le_bytes())?;
                w.write_all(&v.im.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshots(path: &Path) -> Result<Vec<Orbitals>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        r.read_exact(&mut byte)?;
        if byte[0] == b'\n' {
            break;
        }
        header.push(byte[0]);
        if header.len() > 256 {
            return Err(TdksError::Format("TDKSSNAPS header too long".into()));
        }
    }
    let header = String::from_utf8(header)
        .map_err(|_| TdksError::Format("TDKSSNAPS header is not UTF-8".into()))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("TDKSSNAPS") || parts.next() != Some("v1") {
        return Err(TdksError::Format(format!(
            "not a TDKSSNAPS v1 header: {header:?}"
        )));
    }
    let mut fields = std::collections::BTreeMap::new();
    for item in parts {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| TdksError::Format(format!("bad header item {item:?}")))?;
        fields.insert(key.to_string(), value.to_string());
    }
    let get = |k: &str| {
        fields
            .get(k)
            .ok_or_else(|| TdksError::Format(format!("missing header key {k:?}")))
    };
    let dim: usize = get("dim")?.parse().map_err(bad_header)?;
    let m: usize = get("M")?.parse().map_err(bad_header)?;
    let l: f64 = get("L")?.parse().map_err(bad_header)?;
    let n_orb: usize = get("orbitals")?.parse().map_err(bad_header)?;
    let nodes: usize = get("nodes")?.parse().map_err(bad_header)?;
    let grid = make_grid(dim, l, m)?;
    let mut snapshots = Vec::with_capacity(nodes);
    for _ in 0..nodes {
        let mut orbital_fields = Vec::with_capacity(n_orb);
        for _ in 0..n_orb {
            orbital_fields.push(read_field_values(&mut r, grid.clone())?);
        }
        snapshots.push(Orbitals::new(orbital_fields)?);
    }
    Ok(snapshots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::propagation::TimeGrid;

    #[test]
    fn field_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = make_grid(2, 7.0, 8).unwrap();
        let f = ComplexField::from_fn(grid, |x| Complex64::new(x[0] - 0.5 * x[1], x[1] * x[0]));
        let path = dir.path().join("field.bin");
        write_field(&path, &f).unwrap();
        let g = read_field(&path).unwrap();
        assert_eq!(g.grid().dim(), 2);
        assert_eq!(g.grid().points_per_axis(), 8);
        assert_eq!(g.grid().extent(), 7.0);
        for (a, b) in f.values().iter().zip(g.values()) {
            assert_eq!(a, b, "binary format must be exact");
        }
    }

    #[test]
    fn snapshots_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = make_grid(1, 4.0, 8).unwrap();
        let snaps: Vec<Orbitals> = (0..3)
            .map(|k| {
                Orbitals::new(vec![ComplexField::from_fn(grid.clone(), |x| {
                    Complex64::new(x[0] + k as f64, -x[0])
                })])
                .unwrap()
            })
            .collect();
        let path = dir.path().join("snaps.bin");
        write_snapshots(&path, &snaps).unwrap();
        let loaded = read_snapshots(&path).unwrap();
        assert_eq!(loaded.len(), 3);
        for (a, b) in snaps.iter().zip(&loaded) {
            for (fa, fb) in a.fields().iter().zip(b.fields()) {
                for (x, y) in fa.values().iter().zip(fb.values()) {
                    assert_eq!(x, y);
                }
            }
        }
    }

    #[test]
    fn control_series_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let tgrid = TimeGrid::new(1.0, 4).unwrap();
        let u = ControlSignal::from_fn(tgrid, |t| t);
        let g = ControlSignal::from_fn(tgrid, |t| 2.0 * t);
        let f = ControlSignal::from_fn(tgrid, |t| -t);
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        write_control_series(&p1, &u, &g, &f).unwrap();
        write_control_series(&p2, &u, &g, &f).unwrap();
        let a = std::fs::read(&p1).unwrap();
        let b = std::fs::read(&p2).unwrap();
        assert_eq!(a, b);
        assert!(String::from_utf8(a).unwrap().starts_with("t,u,grad,f\n"));
    }

    #[test]
    fn fnv_hash_is_stable() {
        assert_eq!(fnv1a(""), 0xcbf29ce484222325);
        assert_eq!(fnv1a("a"), 0xaf63dc4c8601ec8c);
        assert_ne!(fnv1a("config1"), fnv1a("config2"));
    }
}
