//! Assembly of the interior-penalty DG operators on a built space: the
//! (block-diagonal) mass matrix, the SIP stiffness matrix with per-region
//! anisotropic conductivity, load vectors, and the factored left-hand-side
//! operator of the semi-implicit time stepper. Homogeneous Neumann walls:
//! boundary faces contribute nothing to the stiffness matrix.

use crate::dgspace::DgSpace;
use crate::geometry::Vec2;
use crate::linalg::{CsrMatrix, LinalgError, SpdSolver};
use rayon::prelude::*;

/// Membrane surface-to-volume ratio and capacitance per unit area. The
/// solver is unit-agnostic; these presets pin the two supported systems.
#[derive(Debug, Clone, Copy)]
pub struct PhysicalParams {
    pub chi_m: f64,
    pub c_m: f64,
}

impl PhysicalParams {
    /// Millimeter / millisecond system: χ_m = 140 mm⁻¹, C_m = 0.01 µF/mm².
    pub fn millimeter() -> Self {
        PhysicalParams {
            chi_m: 140.0,
            c_m: 0.01,
        }
    }

    /// Centimeter / millisecond system: χ_m = 1400 cm⁻¹, C_m = 1 µF/cm².
    /// Same physics as the millimeter preset, rescaled.
    pub fn centimeter() -> Self {
        PhysicalParams {
            chi_m: 1400.0,
            c_m: 1.0,
        }
    }

    /// χ_m · C_m, the coefficient of the time-derivative term.
    pub fn chi_c(&self) -> f64 {
        self.chi_m * self.c_m
    }
}

/// Interior-penalty strength. The per-face coefficient is
/// η₀ · mean(Σ_K) · p² / h_harm with the arithmetic mean of the two
/// neighbors' largest conductivity eigenvalues and the harmonic mean of
/// their diameters.
#[derive(Debug, Clone, Copy)]
pub struct PenaltyParams {
    pub eta0: f64,
}

impl Default for PenaltyParams {
    fn default() -> Self {
        // 10 is the smallest value the coercivity sweep accepts with
        // margin on every test mesh.
        PenaltyParams { eta0: 10.0 }
    }
}

/// Per-face penalty coefficients; boundary faces get 0 (they carry no
/// penalty and no consistency terms under Neumann walls).
pub fn face_penalties(space: &DgSpace, penalty: &PenaltyParams) -> Vec<f64> {
    let mesh = &space.mesh;
    let p_sq = (space.degree * space.degree) as f64;
    mesh.faces
        .iter()
        .map(|face| match face.minus {
            Some(minus) => {
                let s_plus = mesh.conductivity_of(face.plus).largest_eigenvalue();
                let s_minus = mesh.conductivity_of(minus).largest_eigenvalue();
                let h_plus = mesh.elements[face.plus].diameter;
                let h_minus = mesh.elements[minus].diameter;
                let h_harm = 2.0 * h_plus * h_minus / (h_plus + h_minus);
                penalty.eta0 * 0.5 * (s_plus + s_minus) * p_sq / h_harm
            }
            None => 0.0,
        })
        .collect()
}

/// Element adjacency through shared faces (used for fill-reducing
/// orderings and sparsity checks).
pub fn element_adjacency(space: &DgSpace) -> Vec<Vec<usize>> {
    let mesh = &space.mesh;
    let mut adj = vec![Vec::new(); mesh.n_elements()];
    for face in &mesh.faces {
        if let Some(minus) = face.minus {
            adj[face.plus].push(minus);
            adj[minus].push(face.plus);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    adj
}

/// Mass matrix (φ_i, φ_j): block diagonal, and the identity up to
/// orthonormalization roundoff.
pub fn assemble_mass(space: &DgSpace) -> CsrMatrix {
    let n_loc = space.n_local();
    let blocks: Vec<Vec<f64>> = (0..space.mesh.n_elements())
        .into_par_iter()
        .map(|ei| {
            let (_, w) = space.element_quad(ei);
            let nq = w.len();
            let vals = space.basis_values(ei);
            let mut block = vec![0.0; n_loc * n_loc];
            for i in 0..n_loc {
                for j in i..n_loc {
                    let mut s = 0.0;
                    for q in 0..nq {
                        s += w[q] * vals[i * nq + q] * vals[j * nq + q];
                    }
                    block[i * n_loc + j] = s;
                    block[j * n_loc + i] = s;
                }
            }
            block
        })
        .collect();
    let mut triplets = Vec::with_capacity(space.n_dofs() * n_loc);
    for (ei, block) in blocks.iter().enumerate() {
        let base = (ei * n_loc) as u32;
        for i in 0..n_loc {
            for j in 0..n_loc {
                triplets.push((base + i as u32, base + j as u32, block[i * n_loc + j]));
            }
        }
    }
    CsrMatrix::from_triplets(space.n_dofs(), triplets)
}

/// SIP stiffness matrix: volume diffusion plus symmetric interior-penalty
/// face terms. Boundary faces are skipped entirely.
pub fn assemble_stiffness(space: &DgSpace, penalty: &PenaltyParams) -> CsrMatrix {
    let mesh = &space.mesh;
    let n_loc = space.n_local();
    let eta = face_penalties(space, penalty);

    // Volume blocks: ∫_K Σ∇φ_j · ∇φ_i.
    let volume: Vec<Vec<f64>> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|ei| {
            let sigma = mesh.conductivity_of(ei);
            let (_, w) = space.element_quad(ei);
            let nq = w.len();
            let grads = space.basis_grads(ei);
            let mut block = vec![0.0; n_loc * n_loc];
            for i in 0..n_loc {
                for j in i..n_loc {
                    let mut s = 0.0;
                    for q in 0..nq {
                        s += w[q] * sigma.apply(grads[j * nq + q]).dot(grads[i * nq + q]);
                    }
                    block[i * n_loc + j] = s;
                    block[j * n_loc + i] = s;
                }
            }
            block
        })
        .collect();

    // Face blocks (interior only): for sides a, b ∈ {plus, minus} with
    // jump signs s_a, s_b and outward-of-plus normal n,
    //   η s_a s_b φ_i φ_j − s_a φ_i (½ Σ_b ∇φ_j·n) − s_b φ_j (½ Σ_a ∇φ_i·n).
    struct FaceBlocks {
        plus: usize,
        minus: usize,
        blocks: [Vec<f64>; 4], // (p,p), (p,m), (m,p), (m,m)
    }
    let faces: Vec<Option<FaceBlocks>> = (0..mesh.faces.len())
        .into_par_iter()
        .map(|fi| {
            let face = &mesh.faces[fi];
            let minus = face.minus?;
            let traces = space.face_traces(fi);
            let nq = traces.weights.len();
            let n = face.normal;
            let sig_p = mesh.conductivity_of(face.plus);
            let sig_m = mesh.conductivity_of(minus);
            let mut blocks: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n_loc * n_loc]);
            let sides = [
                (&traces.plus_values, &traces.plus_grads, sig_p, 1.0),
                (&traces.minus_values, &traces.minus_grads, sig_m, -1.0),
            ];
            for (a, &(va, ga, siga, sa)) in sides.iter().enumerate() {
                for (b, &(vb, gb, sigb, sb)) in sides.iter().enumerate() {
                    let block = &mut blocks[a * 2 + b];
                    for i in 0..n_loc {
                        for j in 0..n_loc {
                            let mut s = 0.0;
                            for q in 0..nq {
                                let w = traces.weights[q];
                                let phi_i = va[i * nq + q];
                                let phi_j = vb[j * nq + q];
                                let flux_j = 0.5 * sigb.apply(gb[j * nq + q]).dot(n);
                                let flux_i = 0.5 * siga.apply(ga[i * nq + q]).dot(n);
                                s += w
                                    * (eta[fi] * sa * sb * phi_i * phi_j
                                        - sa * phi_i * flux_j
                                        - sb * phi_j * flux_i);
                            }
                            block[i * n_loc + j] += s;
                        }
                    }
                }
            }
            Some(FaceBlocks {
                plus: face.plus,
                minus,
                blocks,
            })
        })
        .collect();

    let mut triplets = Vec::new();
    for (ei, block) in volume.iter().enumerate() {
        let base = (ei * n_loc) as u32;
        for i in 0..n_loc {
            for j in 0..n_loc {
                triplets.push((base + i as u32, base + j as u32, block[i * n_loc + j]));
            }
        }
    }
    for fb in faces.iter().flatten() {
        let bases = [(fb.plus * n_loc) as u32, (fb.minus * n_loc) as u32];
        for a in 0..2 {
            for b in 0..2 {
                let block = &fb.blocks[a * 2 + b];
                for i in 0..n_loc {
                    for j in 0..n_loc {
                        triplets.push((bases[a] + i as u32, bases[b] + j as u32, block[i * n_loc + j]));
                    }
                }
            }
        }
    }
    CsrMatrix::from_triplets(space.n_dofs(), triplets)
}

/// Load vector (f, φ_i) for a pointwise function.
pub fn assemble_load(space: &DgSpace, f: impl Fn(Vec2) -> f64 + Sync) -> Vec<f64> {
    let n_loc = space.n_local();
    let mut b = vec![0.0; space.n_dofs()];
    b.par_chunks_mut(n_loc).enumerate().for_each(|(ei, local)| {
        let (pts, w) = space.element_quad(ei);
        let nq = pts.len();
        let vals = space.basis_values(ei);
        let fvals: Vec<f64> = pts.iter().map(|&p| f(p)).collect();
        for (i, bi) in local.iter_mut().enumerate() {
            let mut s = 0.0;
            for q in 0..nq {
                s += w[q] * vals[i * nq + q] * fvals[q];
            }
            *bi = s;
        }
    });
    b
}

/// Load vector from values already held at the volume quadrature points
/// (flat layout with per-element offsets).
pub fn assemble_load_from_quad(space: &DgSpace, quad_values: &[f64], offsets: &[usize]) -> Vec<f64> {
    let n_loc = space.n_local();
    let mut b = vec![0.0; space.n_dofs()];
    b.par_chunks_mut(n_loc).enumerate().for_each(|(ei, local)| {
        let (_, w) = space.element_quad(ei);
        let nq = w.len();
        let vals = space.basis_values(ei);
        let fvals = &quad_values[offsets[ei]..offsets[ei + 1]];
        for (i, bi) in local.iter_mut().enumerate() {
            let mut s = 0.0;
            for q in 0..nq {
                s += w[q] * vals[i * nq + q] * fvals[q];
            }
            *bi = s;
        }
    });
    b
}

/// Boundary flux load ∮_∂Ω g(x, n) φ_i ds (used by the stationary patch
/// test, where g is the exact conormal flux Σ∇u·n).
pub fn assemble_boundary_flux(space: &DgSpace, g: impl Fn(Vec2, Vec2) -> f64) -> Vec<f64> {
    let n_loc = space.n_local();
    let mut b = vec![0.0; space.n_dofs()];
    for (fi, face) in space.mesh.faces.iter().enumerate() {
        if face.is_interior() {
            continue;
        }
        let traces = space.face_traces(fi);
        let nq = traces.weights.len();
        let base = face.plus * n_loc;
        for q in 0..nq {
            let gv = g(traces.points[q], face.normal) * traces.weights[q];
            for i in 0..n_loc {
                b[base + i] += gv * traces.plus_values[i * nq + q];
            }
        }
    }
    b
}

/// Assembled operators of the semi-implicit step plus the factored
/// left-hand side χ_m C_m M + (Δt/2) A; the explicit companion
/// χ_m C_m M − (Δt/2) A is kept for the right-hand side.
pub struct SystemMatrices {
    pub mass: CsrMatrix,
    pub stiffness: CsrMatrix,
    pub face_eta: Vec<f64>,
    pub rhs_matrix: CsrMatrix,
    pub lhs: SpdSolver,
    pub physical: PhysicalParams,
    pub dt: f64,
}

impl SystemMatrices {
    pub fn build(
        space: &DgSpace,
        physical: PhysicalParams,
        penalty: PenaltyParams,
        dt: f64,
        force_iterative: bool,
    ) -> Result<Self, LinalgError> {
        assert!(physical.chi_m > 0.0 && physical.c_m > 0.0);
        assert!(dt > 0.0);
        let mass = assemble_mass(space);
        let stiffness = assemble_stiffness(space, &penalty);
        let face_eta = face_penalties(space, &penalty);
        let chi_c = physical.chi_c();
        let lhs_csr = mass.linear_combination(chi_c, &stiffness, 0.5 * dt);
        let rhs_matrix = mass.linear_combination(chi_c, &stiffness, -0.5 * dt);
        let adj = element_adjacency(space);
        let lhs = SpdSolver::new(lhs_csr, space.n_local(), &adj, force_iterative)?;
        Ok(SystemMatrices {
            mass,
            stiffness,
            face_eta,
            rhs_matrix,
            lhs,
            physical,
            dt,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;
    use crate::mesh::{generate_voronoi_mesh, PolyMesh, RegionTag};
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn anisotropic_mesh(n: usize, seed: u64) -> PolyMesh {
        let mut mesh = generate_voronoi_mesh(Rect::new(-1.0, -1.0, 1.0, 1.0), n, 20, seed).unwrap();
        let tag = RegionTag::new("tissue", 2.0, 0.5, Vec2::new(1.0, 0.0)).unwrap();
        mesh.regions = vec![tag];
        mesh
    }

    fn two_unit_squares() -> PolyMesh {
        let vertices = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let tag = RegionTag::isotropic("bulk", 1.0).unwrap();
        PolyMesh::from_indexed(
            vertices,
            vec![vec![0, 1, 4, 5], vec![1, 2, 3, 4]],
            vec![tag],
            vec![0, 0],
        )
        .unwrap()
    }

    #[test]
    fn mass_is_identity_to_tolerance() {
        let space = DgSpace::build(anisotropic_mesh(50, 1), 3).unwrap();
        let mass = assemble_mass(&space);
        let n = space.n_dofs();
        let mut worst = 0.0f64;
        for i in 0..n {
            for k in mass.row_ptr[i]..mass.row_ptr[i + 1] {
                let target = if mass.col_idx[k] == i { 1.0 } else { 0.0 };
                worst = worst.max((mass.values[k] - target).abs());
            }
        }
        assert!(worst < 1e-10, "mass deviates from identity by {worst}");
    }

    #[test]
    fn constant_function_mass_energy_is_domain_area() {
        let space = DgSpace::build(anisotropic_mesh(60, 2), 2).unwrap();
        let mass = assemble_mass(&space);
        let ones = space.project(|_| 1.0);
        let m_ones = mass.matvec_alloc(&ones);
        let energy: f64 = ones.iter().zip(&m_ones).map(|(a, b)| a * b).sum();
        assert_relative_eq!(energy, 4.0, max_relative = 1e-11);
    }

    #[test]
    fn face_penalty_two_unit_squares_golden() {
        // σ = 1 both sides, p = 2, element diameters √2:
        // η = 10 · 1 · 4 / √2 = 20√2.
        let space = DgSpace::build(two_unit_squares(), 2).unwrap();
        let eta = face_penalties(&space, &PenaltyParams::default());
        let interior: Vec<f64> = space
            .mesh
            .faces
            .iter()
            .zip(&eta)
            .filter(|(f, _)| f.is_interior())
            .map(|(_, &e)| e)
            .collect();
        assert_eq!(interior.len(), 1);
        assert_relative_eq!(interior[0], 28.284271247461902, max_relative = 1e-14);
        // Boundary faces carry no penalty.
        for (f, &e) in space.mesh.faces.iter().zip(&eta) {
            if !f.is_interior() {
                assert_eq!(e, 0.0);
            }
        }
    }

    #[test]
    fn conductivity_largest_eigenvalues_match_region_tables() {
        let grey = RegionTag::isotropic("grey", 0.0735).unwrap();
        let white =
            RegionTag::new("white", 0.0557, 0.0139, Vec2::new(0.6, 0.8)).unwrap();
        assert_relative_eq!(
            grey.conductivity().largest_eigenvalue(),
            0.0735,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            white.conductivity().largest_eigenvalue(),
            0.0557,
            max_relative = 1e-12
        );
    }

    #[test]
    fn stiffness_is_symmetric() {
        let space = DgSpace::build(anisotropic_mesh(40, 3), 3).unwrap();
        let a = assemble_stiffness(&space, &PenaltyParams::default());
        assert!(a.max_relative_asymmetry() <= 1e-12);
    }

    #[test]
    fn constants_span_the_kernel() {
        let space = DgSpace::build(anisotropic_mesh(45, 4), 2).unwrap();
        let a = assemble_stiffness(&space, &PenaltyParams::default());
        let ones = space.project(|_| 1.0);
        let r = a.matvec_alloc(&ones);
        let scale = a.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let worst = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst / scale < 1e-10, "A·1 residual {worst} (scale {scale})");
    }

    #[test]
    fn coercivity_on_random_vectors() {
        let space = DgSpace::build(anisotropic_mesh(40, 5), 2).unwrap();
        let a = assemble_stiffness(&space, &PenaltyParams::default());
        let scale = a.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = space.n_dofs();
        for _ in 0..1000 {
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let av = a.matvec_alloc(&v);
            let quad: f64 = v.iter().zip(&av).map(|(a, b)| a * b).sum();
            let vv: f64 = v.iter().map(|x| x * x).sum();
            assert!(
                quad >= -1e-12 * scale * vv,
                "negative energy {quad} for ‖v‖² = {vv}"
            );
        }
    }

    #[test]
    fn directional_stiffness_energy_is_exact() {
        // For the continuous fields x and y on Σ = diag(2, 0.5):
        // ∫ Σ∇u·∇u = σ_axis · |Ω|, jumps vanish.
        let space = DgSpace::build(anisotropic_mesh(35, 6), 2).unwrap();
        let a = assemble_stiffness(&space, &PenaltyParams::default());
        let area = space.mesh.total_area();
        for (field, expected) in [
            (space.project(|p: Vec2| p.x), 2.0 * area),
            (space.project(|p: Vec2| p.y), 0.5 * area),
        ] {
            let av = a.matvec_alloc(&field);
            let energy: f64 = field.iter().zip(&av).map(|(a, b)| a * b).sum();
            assert_relative_eq!(energy, expected, max_relative = 1e-10);
        }
    }

    #[test]
    fn patch_test_reproduces_linear_solution() {
        // u_ex = 0.3 + 2x − y on a uniform anisotropic region: the SIP
        // operator applied to its projection must equal the boundary-flux
        // load exactly, and the Crank-Nicolson lhs solve must return the
        // projection itself.
        let space = DgSpace::build(anisotropic_mesh(55, 7), 2).unwrap();
        let grad = Vec2::new(2.0, -1.0);
        let sigma = space.mesh.conductivity_of(0);
        let u_exact = space.project(|p| 0.3 + 2.0 * p.x - p.y);
        let a = assemble_stiffness(&space, &PenaltyParams::default());
        let flux = assemble_boundary_flux(&space, |_, n| sigma.apply(grad).dot(n));
        let au = a.matvec_alloc(&u_exact);
        let scale = a.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..space.n_dofs() {
            assert!(
                (au[i] - flux[i]).abs() < 1e-10 * scale.max(1.0),
                "residual {} at dof {i}",
                au[i] - flux[i]
            );
        }
        let physical = PhysicalParams::millimeter();
        let system =
            SystemMatrices::build(&space, physical, PenaltyParams::default(), 1e-3, false)
                .unwrap();
        let m_u = system.mass.matvec_alloc(&u_exact);
        let rhs: Vec<f64> = (0..space.n_dofs())
            .map(|i| physical.chi_c() * m_u[i] + 0.5 * system.dt * flux[i])
            .collect();
        let mut u = vec![0.0; space.n_dofs()];
        system.lhs.solve(&rhs, &mut u).unwrap();
        for i in 0..space.n_dofs() {
            assert!(
                (u[i] - u_exact[i]).abs() < 1e-10,
                "dof {i}: {} vs {}",
                u[i],
                u_exact[i]
            );
        }
    }

    #[test]
    fn sparsity_couples_only_face_neighbors() {
        let space = DgSpace::build(anisotropic_mesh(30, 8), 1).unwrap();
        let a = assemble_stiffness(&space, &PenaltyParams::default());
        let adj = element_adjacency(&space);
        let n_loc = space.n_local();
        for i in 0..space.n_dofs() {
            let ei = i / n_loc;
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let ej = a.col_idx[k] / n_loc;
                assert!(
                    ei == ej || adj[ei].contains(&ej),
                    "unexpected coupling between elements {ei} and {ej}"
                );
            }
        }
    }

    #[test]
    fn single_element_has_volume_terms_only() {
        let vertices = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let tag = RegionTag::isotropic("bulk", 1.5).unwrap();
        let mesh = PolyMesh::from_indexed(vertices, vec![vec![0, 1, 2, 3]], vec![tag], vec![0])
            .unwrap();
        let space = DgSpace::build(mesh, 2).unwrap();
        let a = assemble_stiffness(&space, &PenaltyParams::default());
        let ones = space.project(|_| 1.0);
        let r = a.matvec_alloc(&ones);
        assert!(r.iter().all(|v| v.abs() < 1e-12));
        // With no interior faces the matrix is one volume block.
        assert_eq!(a.n, space.n_local());
    }

    #[test]
    fn load_vector_basics() {
        let space = DgSpace::build(anisotropic_mesh(20, 9), 2).unwrap();
        let zero = assemble_load(&space, |_| 0.0);
        assert!(zero.iter().all(|&v| v == 0.0));
        // (1, φ_i) equals the constant-mode coefficient √|K| and zero for
        // the higher modes (orthogonality to constants).
        let b = assemble_load(&space, |_| 1.0);
        let n_loc = space.n_local();
        for ei in 0..space.mesh.n_elements() {
            let area = space.mesh.elements[ei].area;
            assert_relative_eq!(b[ei * n_loc], area.sqrt(), max_relative = 1e-10);
            for l in 1..n_loc {
                assert!(b[ei * n_loc + l].abs() < 1e-10);
            }
        }
        // Quadrature-value path agrees with the functional path.
        let offsets = quad_offsets(&space);
        let mut flat = vec![0.0; *offsets.last().unwrap()];
        for ei in 0..space.mesh.n_elements() {
            let (pts, _) = space.element_quad(ei);
            for (q, &p) in pts.iter().enumerate() {
                flat[offsets[ei] + q] = p.x + 0.5 * p.y;
            }
        }
        let via_quad = assemble_load_from_quad(&space, &flat, &offsets);
        let via_fn = assemble_load(&space, |p| p.x + 0.5 * p.y);
        for (a, b) in via_quad.iter().zip(&via_fn) {
            assert_relative_eq!(a, b, epsilon = 1e-14, max_relative = 1e-13);
        }
    }

    fn quad_offsets(space: &DgSpace) -> Vec<usize> {
        let mut offsets = vec![0usize];
        for ei in 0..space.mesh.n_elements() {
            let (pts, _) = space.element_quad(ei);
            offsets.push(offsets.last().unwrap() + pts.len());
        }
        offsets
    }

    #[test]
    fn lhs_solver_paths_agree() {
        let space = DgSpace::build(anisotropic_mesh(25, 10), 2).unwrap();
        let physical = PhysicalParams::millimeter();
        let target = space.project(|p| p.x * p.y - 0.2 * p.x);
        for force_iterative in [false, true] {
            let system = SystemMatrices::build(
                &space,
                physical,
                PenaltyParams::default(),
                1e-2,
                force_iterative,
            )
            .unwrap();
            assert_eq!(system.lhs.is_direct(), !force_iterative);
            let m_t = system.mass.matvec_alloc(&target);
            let a_t = system.stiffness.matvec_alloc(&target);
            let rhs: Vec<f64> = (0..space.n_dofs())
                .map(|i| physical.chi_c() * m_t[i] + 0.5 * system.dt * a_t[i])
                .collect();
            let mut u = vec![0.0; space.n_dofs()];
            system.lhs.solve(&rhs, &mut u).unwrap();
            for i in 0..space.n_dofs() {
                assert_relative_eq!(u[i], target[i], epsilon = 1e-8, max_relative = 1e-7);
            }
        }
    }
}
