//! CSV series and VTK field snapshots.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{invalid, Result};
use crate::fem::FeSpace;
use crate::stepper::RunReport;

/// Primitive fields `u = (v + w) / 2`, `B = (v - w) / (2 sqrt(s))` from
/// Elsasser coefficients; with `s = 0` the magnetic field is not recoverable
/// and is reported as zero.
pub fn primitive_fields(v: &[f64], w: &[f64], s: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if v.len() != w.len() {
        return Err(invalid("v and w differ in length"));
    }
    if s == 0.0 {
        return Ok((v.iter().zip(w).map(|(a, b)| 0.5 * (a + b)).collect(), vec![0.0; v.len()]));
    }
    crate::ensemble::primitive_from_elsasser(v, w, s)
}

/// Legacy VTK file with the velocity, the magnetic field, the speed and
/// `|B|` at the mesh vertices (the first P2 nodes).
pub fn write_fields_vtk(path: impl AsRef<Path>, space: &FeSpace, u: &[f64], b: &[f64]) -> Result<()> {
    let n = space.num_nodes();
    if u.len() != 2 * n || b.len() != 2 * n {
        return Err(invalid("field length does not match the velocity space"));
    }
    let mesh = space.mesh();
    let nv = mesh.num_vertices();
    let mut out = String::new();
    mesh.write_vtk_geometry(&mut out);
    let _ = writeln!(out, "POINT_DATA {nv}");
    for (name, f) in [("velocity", u), ("magnetic_field", b)] {
        let _ = writeln!(out, "VECTORS {name} double");
        for i in 0..nv {
            let _ = writeln!(out, "{:.10e} {:.10e} 0", f[i], f[n + i]);
        }
    }
    for (name, f) in [("speed", u), ("magnetic_strength", b)] {
        let _ = writeln!(out, "SCALARS {name} double 1");
        let _ = writeln!(out, "LOOKUP_TABLE default");
        for i in 0..nv {
            let _ = writeln!(out, "{:.10e}", f[i].hypot(f[n + i]));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// `step,time,energy,max_divergence` per recorded level.
pub fn energy_csv(report: &RunReport) -> String {
    let mut out = String::from("step,time,energy,max_divergence\n");
    for (n, ((t, e), d)) in report.times.iter().zip(&report.energy).zip(&report.divergence).enumerate() {
        let _ = writeln!(out, "{n},{t:.10e},{e:.16e},{d:.6e}");
    }
    out
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_square, Rect, SideMarkers};
    use std::sync::Arc;

    #[test]
    fn vtk_has_point_data_for_every_vertex() {
        let mesh = Arc::new(build_structured_square(2, Rect::UNIT, SideMarkers::All).unwrap());
        let space = FeSpace::vector_p2(mesh.clone());
        let n = space.num_nodes();
        let u: Vec<f64> = (0..2 * n).map(|i| i as f64).collect();
        let b = vec![0.0; 2 * n];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.vtk");
        write_fields_vtk(&path, &space, &u, &b).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.contains(&format!("POINT_DATA {}", mesh.num_vertices())));
        assert_eq!(text.matches("VECTORS").count(), 2);
        assert_eq!(text.matches("SCALARS").count(), 2);
        assert!(write_fields_vtk(dir.path().join("g.vtk"), &space, &u[1..], &b).is_err());
    }

    #[test]
    fn zero_coupling_keeps_velocity() {
        let (u, b) = primitive_fields(&[1.0, 3.0], &[1.0, 3.0], 0.0).unwrap();
        assert_eq!(u, vec![1.0, 3.0]);
        assert_eq!(b, vec![0.0, 0.0]);
        let (u, b) = primitive_fields(&[3.0], &[1.0], 1.0).unwrap();
        assert_eq!((u[0], b[0]), (2.0, 1.0));
    }

    #[test]
    fn energy_series_rows() {
        let r = RunReport { times: vec![0.0, 0.1], energy: vec![2.0, 1.0], divergence: vec![0.0, 1e-13], ..Default::default() };
        assert_eq!(energy_csv(&r).lines().count(), 3);
    }
}
