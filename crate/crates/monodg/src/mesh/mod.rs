//! Polygonal meshes: elements with counterclockwise vertex loops, faces with
//! plus/minus incidence, and named regions carrying anisotropic
//! conductivities. Meshes are immutable after construction and safe to share
//! across threads.

mod io;
mod voronoi;

pub use io::{export_mesh, import_mesh, parse_mesh, write_mesh_string};
pub use voronoi::{
    clipped_voronoi_cells, element_count_for_target_h, generate_voronoi_mesh, lloyd_energy,
    voronoi_mesh_from_seeds,
};

use crate::geometry::{
    polygon_centroid, polygon_diameter, polygon_signed_area, Rect, SymTensor2, Vec2,
};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("face ({v0}, {v1}) is shared by {count} elements; meshes must be manifold")]
    NonManifoldFace { v0: usize, v1: usize, count: usize },
    #[error("element {element}: {message}")]
    InvalidElement { element: usize, message: String },
    #[error("region '{name}': {message}")]
    InvalidRegion { name: String, message: String },
    #[error("could not draw {n} distinct seed points after {retries} attempts")]
    DegenerateSeeds { n: usize, retries: usize },
}

/// A named material region: conductivity `sigma_along` in the fiber
/// direction, `sigma_across` orthogonal to it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionTag {
    pub name: String,
    pub sigma_along: f64,
    pub sigma_across: f64,
    pub direction: Vec2,
}

impl RegionTag {
    pub fn new(
        name: impl Into<String>,
        sigma_along: f64,
        sigma_across: f64,
        direction: Vec2,
    ) -> Result<Self, MeshError> {
        let name = name.into();
        if !(sigma_along > 0.0) || !(sigma_across > 0.0) {
            return Err(MeshError::InvalidRegion {
                name,
                message: format!(
                    "conductivities must be positive (got {sigma_along}, {sigma_across})"
                ),
            });
        }
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(MeshError::InvalidRegion {
                name,
                message: "region names must be non-empty and whitespace-free".into(),
            });
        }
        let n = direction.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(MeshError::InvalidRegion {
                name,
                message: "anisotropy direction must be a nonzero vector".into(),
            });
        }
        Ok(RegionTag {
            name,
            sigma_along,
            sigma_across,
            direction: direction / n,
        })
    }

    pub fn isotropic(name: impl Into<String>, sigma: f64) -> Result<Self, MeshError> {
        Self::new(name, sigma, sigma, Vec2::new(1.0, 0.0))
    }

    /// The conductivity tensor `sigma_along d d^T + sigma_across (I - d d^T)`.
    pub fn conductivity(&self) -> SymTensor2 {
        SymTensor2::from_direction(self.sigma_along, self.sigma_across, self.direction)
    }
}

#[derive(Clone, Debug)]
pub struct Element {
    /// Counterclockwise vertex loop.
    pub vertices: Vec<usize>,
    pub centroid: Vec2,
    pub area: f64,
    /// Largest pairwise vertex distance h_K.
    pub diameter: f64,
    pub bbox: Rect,
}

#[derive(Clone, Debug)]
pub struct Face {
    pub v0: usize,
    pub v1: usize,
    pub length: f64,
    /// Unit normal pointing out of the plus element.
    pub normal: Vec2,
    pub plus: usize,
    /// Absent on boundary faces.
    pub minus: Option<usize>,
}

impl Face {
    pub fn is_interior(&self) -> bool {
        self.minus.is_some()
    }
}

#[derive(Clone, Debug)]
pub struct PolyMesh {
    pub vertices: Vec<Vec2>,
    pub elements: Vec<Element>,
    pub faces: Vec<Face>,
    pub regions: Vec<RegionTag>,
    /// Region table index per element.
    pub element_region: Vec<usize>,
}

/// Shape-regularity statistics: per-element area/diameter² ratios, the worst
/// face-length/diameter ratio, and validity of the centroid-fan
/// sub-triangulation that the quadrature relies on.
#[derive(Clone, Debug)]
pub struct RegularityReport {
    pub min_area_ratio: f64,
    pub max_area_ratio: f64,
    pub min_face_ratio: f64,
    pub fan_valid: bool,
    /// Elements with |K|/h_K² below the threshold.
    pub flagged: Vec<usize>,
}

/// A centroid predicate paired with the tag it assigns.
pub struct RegionRule {
    pub tag: RegionTag,
    pub contains: Box<dyn Fn(Vec2) -> bool + Send + Sync>,
}

impl RegionRule {
    pub fn rectangle(tag: RegionTag, rect: Rect) -> Self {
        RegionRule {
            tag,
            contains: Box::new(move |p| rect.contains(p)),
        }
    }
}

impl PolyMesh {
    /// Build a mesh from per-element coordinate polygons, welding vertices
    /// that coincide within `weld_tol`. All elements get region 0, which must
    /// be retagged afterwards if the mesh is heterogeneous.
    pub fn from_polygons(
        polygons: &[Vec<Vec2>],
        default_region: RegionTag,
        weld_tol: f64,
    ) -> Result<Self, MeshError> {
        let mut vertices: Vec<Vec2> = Vec::new();
        // Spatial hash on the weld grid; each bucket holds vertex indices.
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        let inv = 1.0 / weld_tol.max(1e-300);
        let key_of = |p: Vec2| ((p.x * inv).round() as i64, (p.y * inv).round() as i64);
        let mut indexed: Vec<Vec<usize>> = Vec::with_capacity(polygons.len());
        for poly in polygons {
            let mut loop_idx = Vec::with_capacity(poly.len());
            for &p in poly {
                let (kx, ky) = key_of(p);
                let mut found = None;
                'search: for dx in -1..=1 {
                    for dy in -1..=1 {
                        if let Some(cands) = buckets.get(&(kx + dx, ky + dy)) {
                            for &vi in cands {
                                if vertices[vi].dist(p) <= weld_tol {
                                    found = Some(vi);
                                    break 'search;
                                }
                            }
                        }
                    }
                }
                let vi = found.unwrap_or_else(|| {
                    vertices.push(p);
                    buckets.entry((kx, ky)).or_default().push(vertices.len() - 1);
                    vertices.len() - 1
                });
                // Welding can collapse consecutive vertices; skip duplicates.
                if loop_idx.last() != Some(&vi) {
                    loop_idx.push(vi);
                }
            }
            if loop_idx.len() > 1 && loop_idx.first() == loop_idx.last() {
                loop_idx.pop();
            }
            indexed.push(loop_idx);
        }
        let n = indexed.len();
        Self::from_indexed(vertices, indexed, vec![default_region], vec![0; n])
    }

    /// Build a mesh from shared vertices and per-element index loops.
    /// Enforces counterclockwise orientation, validates the centroid fan,
    /// and constructs the face list.
    pub fn from_indexed(
        vertices: Vec<Vec2>,
        element_loops: Vec<Vec<usize>>,
        regions: Vec<RegionTag>,
        element_region: Vec<usize>,
    ) -> Result<Self, MeshError> {
        assert_eq!(element_loops.len(), element_region.len());
        let mut elements = Vec::with_capacity(element_loops.len());
        for (ei, mut loop_idx) in element_loops.into_iter().enumerate() {
            if loop_idx.len() < 3 {
                return Err(MeshError::InvalidElement {
                    element: ei,
                    message: format!("only {} distinct vertices", loop_idx.len()),
                });
            }
            for &vi in &loop_idx {
                if vi >= vertices.len() {
                    return Err(MeshError::InvalidElement {
                        element: ei,
                        message: format!(
                            "vertex index {vi} out of range (mesh has {})",
                            vertices.len()
                        ),
                    });
                }
            }
            let pts: Vec<Vec2> = loop_idx.iter().map(|&i| vertices[i]).collect();
            let signed = polygon_signed_area(&pts);
            if signed.abs() < 1e-300 {
                return Err(MeshError::InvalidElement {
                    element: ei,
                    message: "zero area".into(),
                });
            }
            if signed < 0.0 {
                loop_idx.reverse();
            }
            let pts: Vec<Vec2> = loop_idx.iter().map(|&i| vertices[i]).collect();
            let area = polygon_signed_area(&pts);
            let centroid = polygon_centroid(&pts);
            // Star-shapedness with respect to the centroid: every fan
            // triangle must have positive area, or the quadrature breaks.
            let m = pts.len();
            for i in 0..m {
                let a = pts[i];
                let b = pts[(i + 1) % m];
                if (a - centroid).cross(b - centroid) <= 0.0 {
                    return Err(MeshError::InvalidElement {
                        element: ei,
                        message: format!(
                            "not star-shaped with respect to its centroid (fan triangle {i} degenerate)"
                        ),
                    });
                }
            }
            let mut bbox = Rect::new(f64::MAX, f64::MAX, f64::MIN, f64::MIN);
            for &p in &pts {
                bbox.x0 = bbox.x0.min(p.x);
                bbox.y0 = bbox.y0.min(p.y);
                bbox.x1 = bbox.x1.max(p.x);
                bbox.y1 = bbox.y1.max(p.y);
            }
            elements.push(Element {
                vertices: loop_idx,
                centroid,
                area,
                diameter: polygon_diameter(&pts),
                bbox,
            });
        }
        for &ri in &element_region {
            assert!(ri < regions.len(), "region index out of range");
        }
        let faces = build_faces(&vertices, &elements)?;
        Ok(PolyMesh {
            vertices,
            elements,
            faces,
            regions,
            element_region,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// Largest element diameter, the global mesh size h.
    pub fn max_diameter(&self) -> f64 {
        self.elements.iter().map(|e| e.diameter).fold(0.0, f64::max)
    }

    pub fn total_area(&self) -> f64 {
        self.elements.iter().map(|e| e.area).sum()
    }

    pub fn region_of(&self, element: usize) -> &RegionTag {
        &self.regions[self.element_region[element]]
    }

    /// Conductivity tensor of an element's region.
    pub fn conductivity_of(&self, element: usize) -> SymTensor2 {
        self.region_of(element).conductivity()
    }

    pub fn n_interior_faces(&self) -> usize {
        self.faces.iter().filter(|f| f.is_interior()).count()
    }

    /// Coordinates of an element's vertex loop.
    pub fn element_points(&self, element: usize) -> Vec<Vec2> {
        self.elements[element]
            .vertices
            .iter()
            .map(|&i| self.vertices[i])
            .collect()
    }

    /// Index of the element whose polygon contains `p`, if any. Linear scan;
    /// intended for probes and initial conditions, not inner loops.
    pub fn locate(&self, p: Vec2) -> Option<usize> {
        for (ei, el) in self.elements.iter().enumerate() {
            if el.bbox.contains(p) {
                let pts = self.element_points(ei);
                if crate::geometry::point_in_polygon(p, &pts) {
                    return Some(ei);
                }
            }
        }
        None
    }

    /// Reassign element regions by centroid predicates, first match wins,
    /// `default` for the rest. Replaces the region table.
    pub fn tag_regions(&mut self, rules: &[RegionRule], default: RegionTag) {
        let mut regions: Vec<RegionTag> = rules.iter().map(|r| r.tag.clone()).collect();
        regions.push(default);
        let default_idx = regions.len() - 1;
        self.element_region = self
            .elements
            .iter()
            .map(|el| {
                rules
                    .iter()
                    .position(|r| (r.contains)(el.centroid))
                    .unwrap_or(default_idx)
            })
            .collect();
        self.regions = regions;
    }

    /// Shape-regularity statistics; elements with |K|/h_K² below `threshold`
    /// are flagged.
    pub fn check_regularity(&self, threshold: f64) -> RegularityReport {
        let mut min_area_ratio = f64::MAX;
        let mut max_area_ratio: f64 = 0.0;
        let mut flagged = Vec::new();
        let mut fan_valid = true;
        for (ei, el) in self.elements.iter().enumerate() {
            let ratio = el.area / (el.diameter * el.diameter);
            min_area_ratio = min_area_ratio.min(ratio);
            max_area_ratio = max_area_ratio.max(ratio);
            if ratio < threshold {
                flagged.push(ei);
            }
            let pts = self.element_points(ei);
            let m = pts.len();
            for i in 0..m {
                if (pts[i] - el.centroid).cross(pts[(i + 1) % m] - el.centroid) <= 0.0 {
                    fan_valid = false;
                }
            }
        }
        let mut min_face_ratio = f64::MAX;
        for f in &self.faces {
            min_face_ratio = min_face_ratio.min(f.length / self.elements[f.plus].diameter);
            if let Some(minus) = f.minus {
                min_face_ratio =
                    min_face_ratio.min(f.length / self.elements[minus].diameter);
            }
        }
        RegularityReport {
            min_area_ratio,
            max_area_ratio,
            min_face_ratio,
            fan_valid,
            flagged,
        }
    }
}

/// Pair up element edges into faces. The plus side is the lower-indexed
/// incident element; its traversal direction defines the outward normal.
fn build_faces(vertices: &[Vec2], elements: &[Element]) -> Result<Vec<Face>, MeshError> {
    // Edge key (min, max) → (element, a, b) incidences in traversal order.
    let mut edge_map: HashMap<(usize, usize), Vec<(usize, usize, usize)>> = HashMap::new();
    for (ei, el) in elements.iter().enumerate() {
        let m = el.vertices.len();
        for i in 0..m {
            let a = el.vertices[i];
            let b = el.vertices[(i + 1) % m];
            let key = (a.min(b), a.max(b));
            edge_map.entry(key).or_default().push((ei, a, b));
        }
    }
    // Deterministic face order: sort keys.
    let mut keys: Vec<(usize, usize)> = edge_map.keys().copied().collect();
    keys.sort_unstable();
    let mut faces = Vec::with_capacity(keys.len());
    for key in keys {
        let incident = &edge_map[&key];
        if incident.len() > 2 {
            return Err(MeshError::NonManifoldFace {
                v0: key.0,
                v1: key.1,
                count: incident.len(),
            });
        }
        let (plus, a, b) = incident
            .iter()
            .copied()
            .min_by_key(|&(ei, _, _)| ei)
            .expect("edge map entries are non-empty");
        let minus = incident
            .iter()
            .find(|&&(ei, _, _)| ei != plus)
            .map(|&(ei, _, _)| ei);
        let d = vertices[b] - vertices[a];
        let length = d.norm();
        // Outward normal of a CCW loop: rotate the edge direction -90°.
        let normal = Vec2::new(d.y, -d.x) / length;
        faces.push(Face {
            v0: a,
            v1: b,
            length,
            normal,
            plus,
            minus,
        });
    }
    Ok(faces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_triangles() -> PolyMesh {
        // Unit square split along the diagonal (0,0)-(1,1).
        let vertices = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let loops = vec![vec![0, 1, 2], vec![0, 2, 3]];
        let region = RegionTag::isotropic("bulk", 1.0).unwrap();
        PolyMesh::from_indexed(vertices, loops, vec![region], vec![0, 0]).unwrap()
    }

    #[test]
    fn two_triangle_connectivity() {
        let mesh = two_triangles();
        assert_eq!(mesh.n_elements(), 2);
        assert_eq!(mesh.faces.len(), 5);
        assert_eq!(mesh.n_interior_faces(), 1);
        assert_relative_eq!(mesh.total_area(), 1.0);
        let interior = mesh.faces.iter().find(|f| f.is_interior()).unwrap();
        // Endpoints keep the plus element's traversal order (2 -> 0).
        assert_eq!((interior.v0, interior.v1), (2, 0));
        assert_eq!(interior.plus, 0);
        assert_eq!(interior.minus, Some(1));
        // Outward from element 0 (lower-right triangle): points up-left.
        assert!(interior.normal.x < 0.0 && interior.normal.y > 0.0);
        assert_relative_eq!(interior.normal.norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let vertices = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let region = RegionTag::isotropic("bulk", 1.0).unwrap();
        let mesh =
            PolyMesh::from_indexed(vertices, vec![vec![3, 2, 1, 0]], vec![region], vec![0])
                .unwrap();
        assert!(mesh.elements[0].area > 0.0);
        assert_relative_eq!(mesh.elements[0].area, 1.0);
        assert_relative_eq!(mesh.elements[0].diameter, 2.0_f64.sqrt());
    }

    #[test]
    fn nonmanifold_edge_rejected() {
        let vertices = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.5, 1.0),
            Vec2::new(0.5, -1.0),
            Vec2::new(1.5, 1.0),
        ];
        // Three triangles all sharing edge (0, 1).
        let loops = vec![vec![0, 1, 2], vec![0, 3, 1], vec![0, 1, 4]];
        let region = RegionTag::isotropic("bulk", 1.0).unwrap();
        let err = PolyMesh::from_indexed(vertices, loops, vec![region], vec![0, 0, 0])
            .unwrap_err();
        match err {
            MeshError::NonManifoldFace { v0, v1, count } => {
                assert_eq!((v0, v1, count), (0, 1, 3));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn welding_merges_shared_edges() {
        let sq = |x0: f64, y0: f64| {
            vec![
                Vec2::new(x0, y0),
                Vec2::new(x0 + 1.0, y0),
                Vec2::new(x0 + 1.0, y0 + 1.0),
                Vec2::new(x0, y0 + 1.0),
            ]
        };
        let polys = vec![sq(0.0, 0.0), sq(1.0 + 1e-12, 0.0)];
        let region = RegionTag::isotropic("bulk", 1.0).unwrap();
        let mesh = PolyMesh::from_polygons(&polys, region, 1e-9).unwrap();
        assert_eq!(mesh.vertices.len(), 6);
        assert_eq!(mesh.n_interior_faces(), 1);
        assert_relative_eq!(mesh.total_area(), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn interior_normals_are_antisymmetric() {
        let mesh = two_triangles();
        for f in mesh.faces.iter().filter(|f| f.is_interior()) {
            let minus = f.minus.unwrap();
            // Recompute the outward normal from the minus side's traversal:
            // it walks the shared edge in the opposite direction, so its
            // outward normal is the exact negation.
            let el = &mesh.elements[minus];
            let m = el.vertices.len();
            let mut found = false;
            for i in 0..m {
                let a = el.vertices[i];
                let b = el.vertices[(i + 1) % m];
                if (a, b) == (f.v1, f.v0) {
                    let d = mesh.vertices[b] - mesh.vertices[a];
                    let n_minus = Vec2::new(d.y, -d.x) / d.norm();
                    assert_eq!(n_minus.x, -f.normal.x);
                    assert_eq!(n_minus.y, -f.normal.y);
                    found = true;
                }
            }
            assert!(found, "minus element does not traverse the face backwards");
        }
    }

    #[test]
    fn region_tagging_first_match_wins() {
        let mut mesh = two_triangles();
        let band = RegionTag::isotropic("band", 2.0).unwrap();
        let default = RegionTag::isotropic("rest", 1.0).unwrap();
        // Element 0 centroid (2/3, 1/3); element 1 centroid (1/3, 2/3).
        mesh.tag_regions(
            &[RegionRule::rectangle(band, Rect::new(0.0, 0.0, 1.0, 0.5))],
            default,
        );
        assert_eq!(mesh.region_of(0).name, "band");
        assert_eq!(mesh.region_of(1).name, "rest");
    }

    #[test]
    fn regularity_of_unit_square() {
        let vertices = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let region = RegionTag::isotropic("bulk", 1.0).unwrap();
        let mesh =
            PolyMesh::from_indexed(vertices, vec![vec![0, 1, 2, 3]], vec![region], vec![0])
                .unwrap();
        let report = mesh.check_regularity(0.05);
        assert_relative_eq!(report.min_area_ratio, 0.5, epsilon = 1e-15);
        assert_relative_eq!(report.max_area_ratio, 0.5, epsilon = 1e-15);
        assert_relative_eq!(report.min_face_ratio, 1.0 / 2.0_f64.sqrt(), epsilon = 1e-15);
        assert!(report.fan_valid);
        assert!(report.flagged.is_empty());
    }

    #[test]
    fn sliver_is_flagged() {
        let vertices = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(100.0, 0.0),
            Vec2::new(100.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let region = RegionTag::isotropic("bulk", 1.0).unwrap();
        let mesh =
            PolyMesh::from_indexed(vertices, vec![vec![0, 1, 2, 3]], vec![region], vec![0])
                .unwrap();
        let report = mesh.check_regularity(0.01);
        assert_eq!(report.flagged, vec![0]);
    }

    #[test]
    fn nonconvex_but_star_shaped_is_accepted() {
        // Arrowhead star-shaped about its centroid.
        let vertices = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.9),
            Vec2::new(4.0, 0.0),
            Vec2::new(2.0, 3.0),
        ];
        let region = RegionTag::isotropic("bulk", 1.0).unwrap();
        let mesh =
            PolyMesh::from_indexed(vertices, vec![vec![0, 1, 2, 3]], vec![region], vec![0]);
        assert!(mesh.is_ok());
    }

    #[test]
    fn strongly_nonconvex_fan_rejected() {
        // Deep notch: centroid falls outside the kernel.
        let vertices = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(4.0, 0.0),
            Vec2::new(4.0, 4.0),
            Vec2::new(0.2, 0.1),
            Vec2::new(0.0, 4.0),
        ];
        let region = RegionTag::isotropic("bulk", 1.0).unwrap();
        let err = PolyMesh::from_indexed(
            vertices,
            vec![vec![0, 1, 2, 3, 4]],
            vec![region],
            vec![0],
        )
        .unwrap_err();
        assert!(matches!(err, MeshError::InvalidElement { .. }));
    }

    #[test]
    fn missing_vertex_reference_rejected() {
        let vertices = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)];
        let region = RegionTag::isotropic("bulk", 1.0).unwrap();
        let err = PolyMesh::from_indexed(vertices, vec![vec![0, 1, 7]], vec![region], vec![0])
            .unwrap_err();
        assert!(matches!(err, MeshError::InvalidElement { element: 0, .. }));
    }

    #[test]
    fn locate_finds_containing_element() {
        let mesh = two_triangles();
        assert_eq!(mesh.locate(Vec2::new(0.7, 0.2)), Some(0));
        assert_eq!(mesh.locate(Vec2::new(0.2, 0.7)), Some(1));
        assert_eq!(mesh.locate(Vec2::new(2.0, 2.0)), None);
    }

    #[test]
    fn region_validation() {
        assert!(RegionTag::new("ok", 1.0, 2.0, Vec2::new(0.0, 5.0)).is_ok());
        assert!(RegionTag::new("bad sigma", 0.0, 1.0, Vec2::new(1.0, 0.0)).is_err());
        assert!(RegionTag::new("", 1.0, 1.0, Vec2::new(1.0, 0.0)).is_err());
        assert!(RegionTag::new("zerodir", 1.0, 1.0, Vec2::ZERO).is_err());
        let tag = RegionTag::new("wm", 2.0, 0.5, Vec2::new(0.0, 3.0)).unwrap();
        assert_relative_eq!(tag.direction.norm(), 1.0);
        assert_relative_eq!(tag.conductivity().yy, 2.0);
    }
}
