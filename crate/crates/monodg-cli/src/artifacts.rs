//! Artifact writing: the documented output-directory layout with probe and
//! norm CSVs, field snapshots (legacy ASCII VTK plus a flat CSV), and run
//! metadata.
//!
//! Layout under the output directory:
//!   config.resolved.toml   annotated resolved configuration
//!   metadata.toml          config hash, versions, mesh and solver facts
//!   probes/<name>.csv      t,u[,<state columns>] per probe
//!   norms.csv              t,l2,dg,l4,energy_sq (when energy tracking is on)
//!   snapshots/step_NNNNNN.{vtk,csv}

use monodg::analysis::ProbeTrace;
use monodg::dgspace::DgSpace;
use monodg::ionic::IonicModel;
use monodg::solver::{EnergySample, Snapshot};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

pub struct ArtifactWriter {
    root: PathBuf,
}

impl ArtifactWriter {
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(ArtifactWriter { root: root.into() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_text(&self, name: &str, text: &str) -> io::Result<()> {
        fs::write(self.root.join(name), text)
    }

    pub fn write_probes(&self, traces: &[ProbeTrace], model: &dyn IonicModel) -> io::Result<()> {
        if traces.is_empty() {
            return Ok(());
        }
        let dir = self.root.join("probes");
        fs::create_dir_all(&dir)?;
        for trace in traces {
            let mut s = String::new();
            let mut header = String::from("t,u");
            for k in 0..model.n_state() {
                let _ = write!(header, ",{}", model.state_name(k));
            }
            let _ = writeln!(s, "{header}");
            for (i, t) in trace.times.iter().enumerate() {
                let _ = write!(s, "{t},{}", trace.u[i]);
                for states in &trace.states {
                    let _ = write!(s, ",{}", states[i]);
                }
                let _ = writeln!(s);
            }
            fs::write(dir.join(format!("{}.csv", trace.name)), s)?;
        }
        Ok(())
    }

    pub fn write_norms(&self, samples: &[EnergySample]) -> io::Result<()> {
        if samples.is_empty() {
            return Ok(());
        }
        let mut s = String::from("t,l2,dg,l4,energy_sq\n");
        for e in samples {
            let _ = writeln!(s, "{},{},{},{},{}", e.t, e.l2, e.dg, e.l4, e.energy_sq);
        }
        self.write_text("norms.csv", &s)
    }

    pub fn write_snapshots(&self, space: &DgSpace, snapshots: &[Snapshot]) -> io::Result<()> {
        if snapshots.is_empty() {
            return Ok(());
        }
        let dir = self.root.join("snapshots");
        fs::create_dir_all(&dir)?;
        for snap in snapshots {
            let stem = format!("step_{:06}", snap.step);
            fs::write(dir.join(format!("{stem}.vtk")), field_vtk(space, snap))?;
            fs::write(dir.join(format!("{stem}.csv")), field_csv(space, snap))?;
        }
        Ok(())
    }
}

/// Legacy ASCII VTK polydata. Every element contributes its own copy of its
/// vertices so the discontinuous per-element values survive intact; viewers
/// show the inter-element jumps instead of smearing them.
pub fn field_vtk(space: &DgSpace, snap: &Snapshot) -> String {
    let mesh = &space.mesh;
    let n_points: usize = (0..mesh.n_elements())
        .map(|e| mesh.elements[e].vertices.len())
        .sum();
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "transmembrane potential u at t = {}", snap.t);
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET POLYDATA");
    let _ = writeln!(s, "POINTS {n_points} double");
    for e in 0..mesh.n_elements() {
        for p in mesh.element_points(e) {
            let _ = writeln!(s, "{} {} 0.0", p.x, p.y);
        }
    }
    let size: usize = (0..mesh.n_elements())
        .map(|e| mesh.elements[e].vertices.len() + 1)
        .sum();
    let _ = writeln!(s, "POLYGONS {} {size}", mesh.n_elements());
    let mut base = 0usize;
    for e in 0..mesh.n_elements() {
        let nv = mesh.elements[e].vertices.len();
        let _ = write!(s, "{nv}");
        for k in 0..nv {
            let _ = write!(s, " {}", base + k);
        }
        let _ = writeln!(s);
        base += nv;
    }
    let _ = writeln!(s, "POINT_DATA {n_points}");
    let _ = writeln!(s, "SCALARS u double 1");
    let _ = writeln!(s, "LOOKUP_TABLE default");
    for e in 0..mesh.n_elements() {
        for p in mesh.element_points(e) {
            let _ = writeln!(s, "{}", space.evaluate_at(&snap.u, e, p));
        }
    }
    s
}

/// Flat CSV twin of the VTK snapshot for headless diffing.
pub fn field_csv(space: &DgSpace, snap: &Snapshot) -> String {
    let mesh = &space.mesh;
    let mut s = String::from("element,region,x,y,u\n");
    for e in 0..mesh.n_elements() {
        let region = &mesh.region_of(e).name;
        for p in mesh.element_points(e) {
            let _ = writeln!(
                s,
                "{e},{region},{},{},{}",
                p.x,
                p.y,
                space.evaluate_at(&snap.u, e, p)
            );
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use monodg::mesh::{PolyMesh, RegionTag};
    use monodg::solver::Snapshot;

    fn square_space() -> DgSpace {
        let vertices = vec![
            monodg::geometry::Vec2::new(0.0, 0.0),
            monodg::geometry::Vec2::new(1.0, 0.0),
            monodg::geometry::Vec2::new(1.0, 1.0),
            monodg::geometry::Vec2::new(0.0, 1.0),
        ];
        let mesh = PolyMesh::from_indexed(
            vertices,
            vec![vec![0, 1, 2, 3]],
            vec![RegionTag::isotropic("bulk", 1.0).unwrap()],
            vec![0],
        )
        .unwrap();
        DgSpace::build(mesh, 1).unwrap()
    }

    #[test]
    fn vtk_header_and_counts_are_wellformed() {
        let space = square_space();
        let u = space.project(|p: monodg::geometry::Vec2| p.x);
        let snap = Snapshot {
            step: 3,
            t: 0.5,
            u,
        };
        let text = field_vtk(&space, &snap);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert_eq!(lines[2], "ASCII");
        assert_eq!(lines[3], "DATASET POLYDATA");
        assert_eq!(lines[4], "POINTS 4 double");
        assert!(text.contains("POLYGONS 1 5"));
        assert!(text.contains("POINT_DATA 4"));
        // u = x at the four corners: 0, 1, 1, 0 in vertex order.
        let tail: Vec<&str> = text.lines().rev().take(4).collect();
        let mut got: Vec<f64> = tail.iter().map(|v| v.parse().unwrap()).collect();
        got.reverse();
        for (g, want) in got.iter().zip([0.0, 1.0, 1.0, 0.0]) {
            assert!((g - want).abs() < 1e-12, "{got:?}");
        }
    }

    #[test]
    fn snapshot_csv_has_stable_schema() {
        let space = square_space();
        let u = space.project(&|_| -67.0);
        let snap = Snapshot { step: 0, t: 0.0, u };
        let text = field_csv(&space, &snap);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "element,region,x,y,u");
        let first = lines.next().unwrap();
        assert!(first.starts_with("0,bulk,"), "{first}");
        assert_eq!(text.lines().count(), 5);
    }
}
