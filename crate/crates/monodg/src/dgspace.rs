//! Broken polynomial spaces on polygonal meshes. Each element carries a
//! total-degree-p modal basis built from bounding-box-scaled monomials and
//! orthonormalized against the element mass inner product, so the global
//! mass matrix is the identity up to roundoff. Volume rules come from a
//! centroid fan of triangles, face rules from Gauss segments; basis values
//! and gradients are cached at every quadrature point.

use crate::geometry::Vec2;
use crate::mesh::PolyMesh;
use crate::quadrature::{map_to_triangle, segment_rule, triangle_rule, Rule2d};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("polynomial degree must be at least 1 (got {0})")]
    DegreeTooLow(usize),
    #[error("quadrature order {requested} not supported (needs {min}..={max}); raise the degree-dependent default instead")]
    QuadratureOrder {
        requested: usize,
        min: usize,
        max: usize,
    },
}

/// Per-element basis and cached quadrature tables.
struct ElementBasis {
    /// Bounding-box center and half-extents defining the scaled coordinates.
    center: Vec2,
    half: Vec2,
    /// Row i holds the monomial expansion of basis function i (row-major
    /// n_loc × n_loc, lower triangular).
    coeff: Vec<f64>,
    /// Physical volume quadrature.
    quad: Rule2d,
    /// Basis values at volume quadrature points, layout [i * n_q + q].
    values: Vec<f64>,
    /// Basis gradients at volume quadrature points, same layout.
    grads: Vec<Vec2>,
}

/// Basis traces on one face: values/gradients of the plus (and minus, if
/// interior) element's basis at the face quadrature points.
pub struct FaceTraces {
    pub points: Vec<Vec2>,
    pub weights: Vec<f64>,
    /// Layout [i * n_q + q].
    pub plus_values: Vec<f64>,
    pub plus_grads: Vec<Vec2>,
    /// Empty on boundary faces.
    pub minus_values: Vec<f64>,
    pub minus_grads: Vec<Vec2>,
}

pub struct DgSpace {
    pub mesh: PolyMesh,
    pub degree: usize,
    pub quad_order: usize,
    n_loc: usize,
    elements: Vec<ElementBasis>,
    faces: Vec<FaceTraces>,
    /// Largest deviation of any local Gram matrix from the identity.
    pub ortho_residual: f64,
}

/// Monomial exponent pairs of total degree ≤ p, graded ordering.
fn monomial_exponents(p: usize) -> Vec<(u32, u32)> {
    let mut out = Vec::with_capacity((p + 1) * (p + 2) / 2);
    for d in 0..=p as u32 {
        for a in (0..=d).rev() {
            out.push((a, d - a));
        }
    }
    out
}

impl DgSpace {
    /// Build the degree-p space with the default quadrature order 2p + 2
    /// (exact for mass integrands with margin for nonlinear reaction terms).
    pub fn build(mesh: PolyMesh, degree: usize) -> Result<Self, SpaceError> {
        Self::with_quadrature(mesh, degree, 2 * degree + 2)
    }

    pub fn with_quadrature(
        mesh: PolyMesh,
        degree: usize,
        quad_order: usize,
    ) -> Result<Self, SpaceError> {
        if degree < 1 {
            return Err(SpaceError::DegreeTooLow(degree));
        }
        let (min_order, max_order) = (2 * degree, 60);
        if quad_order < min_order || quad_order > max_order {
            return Err(SpaceError::QuadratureOrder {
                requested: quad_order,
                min: min_order,
                max: max_order,
            });
        }
        let n_loc = (degree + 1) * (degree + 2) / 2;
        let exps = monomial_exponents(degree);
        let ref_rule = triangle_rule(quad_order);

        let elements: Vec<ElementBasis> = (0..mesh.n_elements())
            .into_par_iter()
            .map(|ei| build_element_basis(&mesh, ei, &exps, &ref_rule))
            .collect();

        let ortho_residual = elements
            .par_iter()
            .map(|el| gram_residual(el, n_loc))
            .reduce(|| 0.0, f64::max);

        let n_face_q = degree + 2;
        let faces: Vec<FaceTraces> = (0..mesh.faces.len())
            .into_par_iter()
            .map(|fi| {
                let face = &mesh.faces[fi];
                let rule = segment_rule(
                    mesh.vertices[face.v0],
                    mesh.vertices[face.v1],
                    n_face_q,
                );
                let nq = rule.points.len();
                let plus = &elements[face.plus];
                let mut plus_values = vec![0.0; n_loc * nq];
                let mut plus_grads = vec![Vec2::ZERO; n_loc * nq];
                tabulate(plus, &exps, &rule.points, &mut plus_values, &mut plus_grads);
                let (minus_values, minus_grads) = if let Some(mi) = face.minus {
                    let minus = &elements[mi];
                    let mut mv = vec![0.0; n_loc * nq];
                    let mut mg = vec![Vec2::ZERO; n_loc * nq];
                    tabulate(minus, &exps, &rule.points, &mut mv, &mut mg);
                    (mv, mg)
                } else {
                    (Vec::new(), Vec::new())
                };
                FaceTraces {
                    points: rule.points,
                    weights: rule.weights,
                    plus_values,
                    plus_grads,
                    minus_values,
                    minus_grads,
                }
            })
            .collect();

        Ok(DgSpace {
            mesh,
            degree,
            quad_order,
            n_loc,
            elements,
            faces,
            ortho_residual,
        })
    }

    pub fn n_local(&self) -> usize {
        self.n_loc
    }

    pub fn n_dofs(&self) -> usize {
        self.n_loc * self.mesh.n_elements()
    }

    /// Global DOF range of an element's coefficients.
    pub fn dof_range(&self, element: usize) -> std::ops::Range<usize> {
        element * self.n_loc..(element + 1) * self.n_loc
    }

    pub fn element_quad(&self, element: usize) -> (&[Vec2], &[f64]) {
        let q = &self.elements[element].quad;
        (&q.points, &q.weights)
    }

    /// Basis values at the element's volume quadrature points, [i * n_q + q].
    pub fn basis_values(&self, element: usize) -> &[f64] {
        &self.elements[element].values
    }

    /// Basis gradients at the element's volume quadrature points.
    pub fn basis_grads(&self, element: usize) -> &[Vec2] {
        &self.elements[element].grads
    }

    pub fn face_traces(&self, face: usize) -> &FaceTraces {
        &self.faces[face]
    }

    /// Evaluate a coefficient field at an arbitrary point of an element
    /// (used by probes; quadrature-point evaluation has cached tables).
    pub fn evaluate_at(&self, coeffs: &[f64], element: usize, point: Vec2) -> f64 {
        self.evaluate_local(&coeffs[self.dof_range(element)], element, point)
    }

    /// Field values at the element's volume quadrature points.
    pub fn values_on_quad(&self, coeffs: &[f64], element: usize, out: &mut [f64]) {
        let el = &self.elements[element];
        let nq = el.quad.points.len();
        let local = &coeffs[self.dof_range(element)];
        out[..nq].fill(0.0);
        for (i, &c) in local.iter().enumerate() {
            let vals = &el.values[i * nq..(i + 1) * nq];
            for (o, v) in out[..nq].iter_mut().zip(vals) {
                *o += c * v;
            }
        }
    }

    /// Same as `values_on_quad` for a local coefficient slice (length
    /// n_local) instead of a global vector.
    pub fn values_on_quad_local(&self, local: &[f64], element: usize, out: &mut [f64]) {
        let el = &self.elements[element];
        let nq = el.quad.points.len();
        out[..nq].fill(0.0);
        for (i, &c) in local.iter().enumerate() {
            let vals = &el.values[i * nq..(i + 1) * nq];
            for (o, v) in out[..nq].iter_mut().zip(vals) {
                *o += c * v;
            }
        }
    }

    /// Project quadrature-point values of one element back onto its local
    /// basis (the L² projection restricted to the element).
    pub fn project_quad_values_local(&self, element: usize, quad_values: &[f64], local: &mut [f64]) {
        let el = &self.elements[element];
        let nq = el.quad.points.len();
        for (i, c) in local.iter_mut().enumerate() {
            let vals = &el.values[i * nq..(i + 1) * nq];
            *c = vals
                .iter()
                .zip(&el.quad.weights)
                .zip(quad_values)
                .map(|((&v, &w), &fv)| w * v * fv)
                .sum();
        }
    }

    /// Evaluate a local coefficient slice at an arbitrary point.
    pub fn evaluate_local(&self, local: &[f64], element: usize, point: Vec2) -> f64 {
        let el = &self.elements[element];
        let exps = monomial_exponents(self.degree);
        let xi = (point.x - el.center.x) / el.half.x;
        let eta = (point.y - el.center.y) / el.half.y;
        let monos: Vec<f64> = exps
            .iter()
            .map(|&(a, b)| xi.powi(a as i32) * eta.powi(b as i32))
            .collect();
        let mut value = 0.0;
        for (i, &c) in local.iter().enumerate() {
            let row = &el.coeff[i * self.n_loc..(i + 1) * self.n_loc];
            let phi: f64 = row.iter().zip(&monos).map(|(r, m)| r * m).sum();
            value += c * phi;
        }
        value
    }

    /// Field gradient at the element's volume quadrature points.
    pub fn gradients_on_quad(&self, coeffs: &[f64], element: usize, out: &mut [Vec2]) {
        let el = &self.elements[element];
        let nq = el.quad.points.len();
        let local = &coeffs[self.dof_range(element)];
        out[..nq].fill(Vec2::ZERO);
        for (i, &c) in local.iter().enumerate() {
            let grads = &el.grads[i * nq..(i + 1) * nq];
            for (o, g) in out[..nq].iter_mut().zip(grads) {
                *o = *o + *g * c;
            }
        }
    }

    /// Element-wise L² projection. With the orthonormal basis the
    /// coefficients are plain moments against the basis functions.
    pub fn project(&self, f: impl Fn(Vec2) -> f64 + Sync) -> Vec<f64> {
        let mut coeffs = vec![0.0; self.n_dofs()];
        let n_loc = self.n_loc;
        coeffs
            .par_chunks_mut(n_loc)
            .enumerate()
            .for_each(|(ei, local)| {
                let el = &self.elements[ei];
                let nq = el.quad.points.len();
                let fvals: Vec<f64> = el.quad.points.iter().map(|&p| f(p)).collect();
                for (i, c) in local.iter_mut().enumerate() {
                    let vals = &el.values[i * nq..(i + 1) * nq];
                    *c = vals
                        .iter()
                        .zip(&el.quad.weights)
                        .zip(&fvals)
                        .map(|((&v, &w), &fv)| w * v * fv)
                        .sum();
                }
            });
        coeffs
    }

    /// ∫_Ω v² over the broken space.
    pub fn l2_norm_sq(&self, coeffs: &[f64]) -> f64 {
        self.integrate_field(coeffs, |v| v * v)
    }

    pub fn l2_norm(&self, coeffs: &[f64]) -> f64 {
        self.l2_norm_sq(coeffs).sqrt()
    }

    /// ∫_Ω v⁴ (the L⁴ norm to the fourth power).
    pub fn l4_norm_pow4(&self, coeffs: &[f64]) -> f64 {
        self.integrate_field(coeffs, |v| v * v * v * v)
    }

    pub fn l4_norm(&self, coeffs: &[f64]) -> f64 {
        self.l4_norm_pow4(coeffs).powf(0.25)
    }

    fn integrate_field(&self, coeffs: &[f64], pointwise: impl Fn(f64) -> f64 + Sync) -> f64 {
        // Per-element contributions are collected and summed in element
        // order so the result is bitwise reproducible across runs.
        let parts: Vec<f64> = (0..self.mesh.n_elements())
            .into_par_iter()
            .map(|ei| {
                let el = &self.elements[ei];
                let nq = el.quad.points.len();
                let mut vals = vec![0.0; nq];
                self.values_on_quad(coeffs, ei, &mut vals);
                vals.iter()
                    .zip(&el.quad.weights)
                    .map(|(&v, &w)| w * pointwise(v))
                    .sum::<f64>()
            })
            .collect();
        parts.iter().sum()
    }

    /// ∫_Ω (v - f)² against an arbitrary function, using the space's rules.
    pub fn l2_error_sq(&self, coeffs: &[f64], exact: impl Fn(Vec2) -> f64 + Sync) -> f64 {
        let parts: Vec<f64> = (0..self.mesh.n_elements())
            .into_par_iter()
            .map(|ei| {
                let el = &self.elements[ei];
                let nq = el.quad.points.len();
                let mut vals = vec![0.0; nq];
                self.values_on_quad(coeffs, ei, &mut vals);
                el.quad
                    .points
                    .iter()
                    .zip(&el.quad.weights)
                    .zip(&vals)
                    .map(|((&p, &w), &v)| {
                        let e = v - exact(p);
                        w * e * e
                    })
                    .sum::<f64>()
            })
            .collect();
        parts.iter().sum()
    }

    /// One-pass error integrals against an exact solution with known
    /// gradient: (∫e², ∫|∇e|², ∫e⁴) with e = v − exact.
    pub fn error_integrals(
        &self,
        coeffs: &[f64],
        exact: impl Fn(Vec2) -> f64 + Sync,
        exact_grad: impl Fn(Vec2) -> Vec2 + Sync,
    ) -> (f64, f64, f64) {
        let parts: Vec<(f64, f64, f64)> = (0..self.mesh.n_elements())
            .into_par_iter()
            .map(|ei| {
                let el = &self.elements[ei];
                let nq = el.quad.points.len();
                let mut vals = vec![0.0; nq];
                let mut grads = vec![Vec2::ZERO; nq];
                self.values_on_quad(coeffs, ei, &mut vals);
                self.gradients_on_quad(coeffs, ei, &mut grads);
                let (mut l2, mut h1, mut l4) = (0.0, 0.0, 0.0);
                for q in 0..nq {
                    let p = el.quad.points[q];
                    let w = el.quad.weights[q];
                    let e = vals[q] - exact(p);
                    let ge = grads[q] - exact_grad(p);
                    l2 += w * e * e;
                    h1 += w * ge.norm_sq();
                    l4 += w * e * e * e * e;
                }
                (l2, h1, l4)
            })
            .collect();
        parts.iter().fold((0.0, 0.0, 0.0), |a, b| {
            (a.0 + b.0, a.1 + b.1, a.2 + b.2)
        })
    }

    /// Same integrals for a plain function (no coefficient field):
    /// (∫f², ∫|∇f|², ∫f⁴) by quadrature.
    pub fn function_integrals(
        &self,
        f: impl Fn(Vec2) -> f64 + Sync,
        f_grad: impl Fn(Vec2) -> Vec2 + Sync,
    ) -> (f64, f64, f64) {
        let parts: Vec<(f64, f64, f64)> = (0..self.mesh.n_elements())
            .into_par_iter()
            .map(|ei| {
                let el = &self.elements[ei];
                let (mut l2, mut h1, mut l4) = (0.0, 0.0, 0.0);
                for (q, &p) in el.quad.points.iter().enumerate() {
                    let w = el.quad.weights[q];
                    let v = f(p);
                    l2 += w * v * v;
                    h1 += w * f_grad(p).norm_sq();
                    l4 += w * v * v * v * v;
                }
                (l2, h1, l4)
            })
            .collect();
        parts.iter().fold((0.0, 0.0, 0.0), |a, b| {
            (a.0 + b.0, a.1 + b.1, a.2 + b.2)
        })
    }

    /// Field integrals for a coefficient field: (∫v², ∫|∇v|², ∫v⁴).
    pub fn field_integrals(&self, coeffs: &[f64]) -> (f64, f64, f64) {
        let parts: Vec<(f64, f64, f64)> = (0..self.mesh.n_elements())
            .into_par_iter()
            .map(|ei| {
                let el = &self.elements[ei];
                let nq = el.quad.points.len();
                let mut vals = vec![0.0; nq];
                let mut grads = vec![Vec2::ZERO; nq];
                self.values_on_quad(coeffs, ei, &mut vals);
                self.gradients_on_quad(coeffs, ei, &mut grads);
                let (mut l2, mut h1, mut l4) = (0.0, 0.0, 0.0);
                for q in 0..nq {
                    let w = el.quad.weights[q];
                    let v = vals[q];
                    l2 += w * v * v;
                    h1 += w * grads[q].norm_sq();
                    l4 += w * v * v * v * v;
                }
                (l2, h1, l4)
            })
            .collect();
        parts.iter().fold((0.0, 0.0, 0.0), |a, b| {
            (a.0 + b.0, a.1 + b.1, a.2 + b.2)
        })
    }

    /// Broken H¹ seminorm squared: ∑_K ∫_K |∇v|².
    pub fn h1_seminorm_sq(&self, coeffs: &[f64]) -> f64 {
        let parts: Vec<f64> = (0..self.mesh.n_elements())
            .into_par_iter()
            .map(|ei| {
                let el = &self.elements[ei];
                let nq = el.quad.points.len();
                let mut grads = vec![Vec2::ZERO; nq];
                self.gradients_on_quad(coeffs, ei, &mut grads);
                grads
                    .iter()
                    .zip(&el.quad.weights)
                    .map(|(g, &w)| w * g.norm_sq())
                    .sum::<f64>()
            })
            .collect();
        parts.iter().sum()
    }

    /// Extremes of the field over all volume and face quadrature points.
    pub fn field_min_max(&self, coeffs: &[f64]) -> (f64, f64) {
        let parts: Vec<(f64, f64)> = (0..self.mesh.n_elements())
            .into_par_iter()
            .map(|ei| {
                let el = &self.elements[ei];
                let nq = el.quad.points.len();
                let mut vals = vec![0.0; nq];
                self.values_on_quad(coeffs, ei, &mut vals);
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for &v in &vals {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                (lo, hi)
            })
            .collect();
        let (mut lo, mut hi) = parts
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |a, b| {
                (a.0.min(b.0), a.1.max(b.1))
            });
        // Face points catch extremes sitting on element boundaries.
        let face_parts: Vec<(f64, f64)> = (0..self.mesh.faces.len())
            .into_par_iter()
            .map(|fi| {
                let f = &self.mesh.faces[fi];
                let traces = &self.faces[fi];
                let nq = traces.points.len();
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                let plus_local = &coeffs[self.dof_range(f.plus)];
                for q in 0..nq {
                    let mut v = 0.0;
                    for (i, &c) in plus_local.iter().enumerate() {
                        v += c * traces.plus_values[i * nq + q];
                    }
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                if let Some(mi) = f.minus {
                    let minus_local = &coeffs[self.dof_range(mi)];
                    for q in 0..nq {
                        let mut v = 0.0;
                        for (i, &c) in minus_local.iter().enumerate() {
                            v += c * traces.minus_values[i * nq + q];
                        }
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
                (lo, hi)
            })
            .collect();
        for (l, h) in face_parts {
            lo = lo.min(l);
            hi = hi.max(h);
        }
        (lo, hi)
    }

    /// Jump of the field across one interior face at its quadrature points.
    pub fn face_jumps(&self, coeffs: &[f64], face: usize, out: &mut [f64]) {
        let f = &self.mesh.faces[face];
        let traces = &self.faces[face];
        let nq = traces.points.len();
        let plus_local = &coeffs[self.dof_range(f.plus)];
        out[..nq].fill(0.0);
        for (i, &c) in plus_local.iter().enumerate() {
            let vals = &traces.plus_values[i * nq..(i + 1) * nq];
            for (o, v) in out[..nq].iter_mut().zip(vals) {
                *o += c * v;
            }
        }
        if let Some(mi) = f.minus {
            let minus_local = &coeffs[self.dof_range(mi)];
            for (i, &c) in minus_local.iter().enumerate() {
                let vals = &traces.minus_values[i * nq..(i + 1) * nq];
                for (o, v) in out[..nq].iter_mut().zip(vals) {
                    *o -= c * v;
                }
            }
        }
    }

    /// ∑_F η_F ∫_F [[v]]² over interior faces, with per-face weights
    /// (typically the interior-penalty coefficients).
    pub fn jump_norm_sq(&self, coeffs: &[f64], face_weights: &[f64]) -> f64 {
        assert_eq!(face_weights.len(), self.mesh.faces.len());
        let parts: Vec<f64> = (0..self.mesh.faces.len())
            .into_par_iter()
            .map(|fi| {
                if !self.mesh.faces[fi].is_interior() {
                    return 0.0;
                }
                let traces = &self.faces[fi];
                let nq = traces.points.len();
                let mut jumps = vec![0.0; nq];
                self.face_jumps(coeffs, fi, &mut jumps);
                let integral: f64 = jumps
                    .iter()
                    .zip(&traces.weights)
                    .map(|(&j, &w)| w * j * j)
                    .sum();
                face_weights[fi] * integral
            })
            .collect();
        parts.iter().sum()
    }

    /// DG norm squared: broken H¹ seminorm plus the weighted jump term.
    pub fn dg_norm_sq(&self, coeffs: &[f64], face_weights: &[f64]) -> f64 {
        self.h1_seminorm_sq(coeffs) + self.jump_norm_sq(coeffs, face_weights)
    }
}

fn build_element_basis(
    mesh: &PolyMesh,
    ei: usize,
    exps: &[(u32, u32)],
    ref_rule: &Rule2d,
) -> ElementBasis {
    let el = &mesh.elements[ei];
    let center = Vec2::new(
        0.5 * (el.bbox.x0 + el.bbox.x1),
        0.5 * (el.bbox.y0 + el.bbox.y1),
    );
    let half = Vec2::new(
        0.5 * (el.bbox.x1 - el.bbox.x0),
        0.5 * (el.bbox.y1 - el.bbox.y0),
    );
    // Fan the polygon around its centroid and splice the mapped rules.
    let pts = mesh.element_points(ei);
    let m = pts.len();
    let mut quad = Rule2d::default();
    for i in 0..m {
        let tri = map_to_triangle(ref_rule, el.centroid, pts[i], pts[(i + 1) % m]);
        quad.points.extend(tri.points);
        quad.weights.extend(tri.weights);
    }
    let n_loc = exps.len();
    let nq = quad.points.len();

    // Monomial values/gradients at quadrature points, [k * nq + q].
    let mut mono_vals = vec![0.0; n_loc * nq];
    let mut mono_grads = vec![Vec2::ZERO; n_loc * nq];
    for (q, &p) in quad.points.iter().enumerate() {
        let xi = (p.x - center.x) / half.x;
        let eta = (p.y - center.y) / half.y;
        for (k, &(a, b)) in exps.iter().enumerate() {
            let (a, b) = (a as i32, b as i32);
            mono_vals[k * nq + q] = xi.powi(a) * eta.powi(b);
            let dx = if a == 0 {
                0.0
            } else {
                a as f64 * xi.powi(a - 1) * eta.powi(b) / half.x
            };
            let dy = if b == 0 {
                0.0
            } else {
                b as f64 * xi.powi(a) * eta.powi(b - 1) / half.y
            };
            mono_grads[k * nq + q] = Vec2::new(dx, dy);
        }
    }

    // Modified Gram-Schmidt in the quadrature inner product, with one
    // re-orthogonalization sweep; rows of `coeff` track the monomial
    // expansion of each orthonormal function.
    let mut vecs = mono_vals.clone(); // working copies, [k * nq + q]
    let mut coeff = vec![0.0; n_loc * n_loc];
    for k in 0..n_loc {
        coeff[k * n_loc + k] = 1.0;
    }
    let dot = |u: &[f64], v: &[f64], w: &[f64]| -> f64 {
        u.iter()
            .zip(v)
            .zip(w)
            .map(|((&a, &b), &wq)| wq * a * b)
            .sum()
    };
    for k in 0..n_loc {
        for _pass in 0..2 {
            for j in 0..k {
                let (head, tail) = vecs.split_at_mut(k * nq);
                let vj = &head[j * nq..(j + 1) * nq];
                let vk = &mut tail[..nq];
                let r = dot(vj, vk, &quad.weights);
                for (x, y) in vk.iter_mut().zip(vj) {
                    *x -= r * y;
                }
                let (chead, ctail) = coeff.split_at_mut(k * n_loc);
                let cj = &chead[j * n_loc..(j + 1) * n_loc];
                let ck = &mut ctail[..n_loc];
                for (x, y) in ck.iter_mut().zip(cj) {
                    *x -= r * y;
                }
            }
        }
        let vk = &vecs[k * nq..(k + 1) * nq];
        let norm = dot(vk, vk, &quad.weights).sqrt();
        for x in &mut vecs[k * nq..(k + 1) * nq] {
            *x /= norm;
        }
        for x in &mut coeff[k * n_loc..(k + 1) * n_loc] {
            *x /= norm;
        }
    }

    // Cache orthonormal basis values and gradients.
    let values = vecs;
    let mut grads = vec![Vec2::ZERO; n_loc * nq];
    for i in 0..n_loc {
        for q in 0..nq {
            let mut g = Vec2::ZERO;
            for k in 0..n_loc {
                let c = coeff[i * n_loc + k];
                if c != 0.0 {
                    g = g + mono_grads[k * nq + q] * c;
                }
            }
            grads[i * nq + q] = g;
        }
    }

    ElementBasis {
        center,
        half,
        coeff,
        quad,
        values,
        grads,
    }
}

/// Evaluate an element's orthonormal basis (values and gradients) at
/// arbitrary physical points.
fn tabulate(
    el: &ElementBasis,
    exps: &[(u32, u32)],
    points: &[Vec2],
    values: &mut [f64],
    grads: &mut [Vec2],
) {
    let n_loc = exps.len();
    let nq = points.len();
    for (q, &p) in points.iter().enumerate() {
        let xi = (p.x - el.center.x) / el.half.x;
        let eta = (p.y - el.center.y) / el.half.y;
        for i in 0..n_loc {
            let mut v = 0.0;
            let mut g = Vec2::ZERO;
            for (k, &(a, b)) in exps.iter().enumerate() {
                let c = el.coeff[i * n_loc + k];
                if c == 0.0 {
                    continue;
                }
                let (a, b) = (a as i32, b as i32);
                v += c * xi.powi(a) * eta.powi(b);
                let dx = if a == 0 {
                    0.0
                } else {
                    a as f64 * xi.powi(a - 1) * eta.powi(b) / el.half.x
                };
                let dy = if b == 0 {
                    0.0
                } else {
                    b as f64 * xi.powi(a) * eta.powi(b - 1) / el.half.y
                };
                g = g + Vec2::new(dx, dy) * c;
            }
            values[i * nq + q] = v;
            grads[i * nq + q] = g;
        }
    }
}

/// Largest deviation of the local Gram matrix from the identity.
fn gram_residual(el: &ElementBasis, n_loc: usize) -> f64 {
    let nq = el.quad.points.len();
    let mut worst: f64 = 0.0;
    for i in 0..n_loc {
        for j in i..n_loc {
            let vi = &el.values[i * nq..(i + 1) * nq];
            let vj = &el.values[j * nq..(j + 1) * nq];
            let g: f64 = vi
                .iter()
                .zip(vj)
                .zip(&el.quad.weights)
                .map(|((&a, &b), &w)| w * a * b)
                .sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g - target).abs());
        }
    }
    worst
}
