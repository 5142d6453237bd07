//! Sparse linear algebra sized for block-structured DG systems: CSR storage
//! assembled from triplets, a profile (skyline) Cholesky factorization under
//! reverse Cuthill-McKee ordering for moderate problems, and block-Jacobi
//! preconditioned conjugate gradients as the large-problem fallback. All
//! operations are bitwise deterministic: reductions run in fixed order.

use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot:.3e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("PCG stalled after {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("diagonal block {block} is not positive definite")]
    SingularBlock { block: usize },
}

/// Square sparse matrix in compressed sparse row form.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from (row, col, value) triplets; duplicates are summed in
    /// insertion order so assembly stays reproducible.
    pub fn from_triplets(n: usize, mut triplets: Vec<(u32, u32, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut last = None;
        for &(r, c, v) in &triplets {
            debug_assert!((r as usize) < n && (c as usize) < n);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c as usize);
                values.push(v);
                row_ptr[r as usize + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        });
    }

    pub fn matvec_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match row.binary_search(&j) {
            Ok(k) => self.values[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    /// α·self + β·other, requiring identical dimensions (patterns may differ).
    pub fn linear_combination(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        assert_eq!(self.n, other.n);
        let mut triplets =
            Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                triplets.push((i as u32, self.col_idx[k] as u32, alpha * self.values[k]));
            }
            for k in other.row_ptr[i]..other.row_ptr[i + 1] {
                triplets.push((i as u32, other.col_idx[k] as u32, beta * other.values[k]));
            }
        }
        CsrMatrix::from_triplets(self.n, triplets)
    }

    /// max |A_ij − A_ji| over the stored pattern, scaled by max |A_ij|.
    pub fn max_relative_asymmetry(&self) -> f64 {
        let scale = self
            .values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                if j > i {
                    worst = worst.max((self.values[k] - self.get(j, i)).abs());
                }
            }
        }
        worst / scale
    }

    /// ASCII triplet dump: one `row col value` line per stored entry,
    /// row-major, full round-trip precision.
    pub fn write_triplets<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# sparse matrix {} x {} ({} entries)", self.n, self.n, self.nnz())?;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                writeln!(w, "{} {} {}", i, self.col_idx[k], self.values[k])?;
            }
        }
        Ok(())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.col_idx[k])] += self.values[k];
            }
        }
        m
    }
}

/// Reverse Cuthill-McKee ordering of an undirected graph given as adjacency
/// lists; disconnected components are handled by restarting from the
/// lowest-degree unvisited vertex.
pub fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let degree: Vec<usize> = adj.iter().map(|a| a.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = std::collections::VecDeque::new();
    loop {
        let start = match (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| (degree[v], v))
        {
            Some(v) => v,
            None => break,
        };
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&u| !visited[u]).collect();
            nbrs.sort_by_key(|&u| (degree[u], u));
            for u in nbrs {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

/// Profile (skyline) Cholesky factorization L·Lᵀ of a permuted SPD matrix.
/// Rows store the contiguous span from their first nonzero column to the
/// diagonal; fill-in stays inside the profile.
pub struct SkylineCholesky {
    n: usize,
    /// perm[k] = original index of permuted row k.
    perm: Vec<usize>,
    start: Vec<usize>,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineCholesky {
    pub fn factor(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self, LinalgError> {
        let n = a.n;
        assert_eq!(perm.len(), n);
        let mut inv = vec![0usize; n];
        for (k, &p) in perm.iter().enumerate() {
            inv[p] = k;
        }
        // Profile start per permuted row.
        let mut start = vec![0usize; n];
        for (k, s) in start.iter_mut().enumerate() {
            *s = k;
        }
        for i in 0..n {
            let pi = inv[i];
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let pj = inv[a.col_idx[k]];
                if pj < pi {
                    start[pi] = start[pi].min(pj);
                } else if pi < pj {
                    start[pj] = start[pj].min(pi);
                }
            }
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + (i - start[i] + 1);
        }
        let mut data = vec![0.0; offsets[n]];
        for i in 0..n {
            let pi = inv[i];
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let pj = inv[a.col_idx[k]];
                if pj <= pi {
                    data[offsets[pi] + (pj - start[pi])] += a.values[k];
                }
            }
        }
        // In-place factorization, row by row.
        for i in 0..n {
            let si = start[i];
            for j in si..i {
                let sj = start[j];
                let lo = si.max(sj);
                let mut s = data[offsets[i] + (j - si)];
                for k in lo..j {
                    s -= data[offsets[i] + (k - si)] * data[offsets[j] + (k - sj)];
                }
                data[offsets[i] + (j - si)] = s / data[offsets[j] + (j - sj)];
            }
            let mut d = data[offsets[i] + (i - si)];
            for k in si..i {
                let l = data[offsets[i] + (k - si)];
                d -= l * l;
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(LinalgError::NotPositiveDefinite { row: perm[i], pivot: d });
            }
            data[offsets[i] + (i - si)] = d.sqrt();
        }
        Ok(SkylineCholesky {
            n,
            perm,
            start,
            offsets,
            data,
        })
    }

    pub fn solve(&self, b: &[f64], x: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for k in 0..self.n {
            y[k] = b[self.perm[k]];
        }
        // Forward substitution L y = b.
        for i in 0..self.n {
            let si = self.start[i];
            let mut s = y[i];
            for k in si..i {
                s -= self.data[self.offsets[i] + (k - si)] * y[k];
            }
            y[i] = s / self.data[self.offsets[i] + (i - si)];
        }
        // Backward substitution Lᵀ x = y (column sweeps over the profile).
        for i in (0..self.n).rev() {
            let si = self.start[i];
            let xi = y[i] / self.data[self.offsets[i] + (i - si)];
            y[i] = xi;
            for k in si..i {
                y[k] -= self.data[self.offsets[i] + (k - si)] * xi;
            }
        }
        for k in 0..self.n {
            x[self.perm[k]] = y[k];
        }
    }

    /// Stored profile entries (memory diagnostic).
    pub fn profile_len(&self) -> usize {
        self.data.len()
    }
}

/// Block-Jacobi preconditioner: dense Cholesky of each diagonal block.
pub struct BlockJacobi {
    block: usize,
    factors: Vec<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
}

impl BlockJacobi {
    pub fn from_csr(a: &CsrMatrix, block: usize) -> Result<Self, LinalgError> {
        assert!(block > 0 && a.n % block == 0);
        let n_blocks = a.n / block;
        let factors = (0..n_blocks)
            .map(|b| {
                let base = b * block;
                let mut m = DMatrix::zeros(block, block);
                for li in 0..block {
                    let i = base + li;
                    for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                        let j = a.col_idx[k];
                        if (base..base + block).contains(&j) {
                            m[(li, j - base)] += a.values[k];
                        }
                    }
                }
                nalgebra::Cholesky::new(m).ok_or(LinalgError::SingularBlock { block: b })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BlockJacobi { block, factors })
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let block = self.block;
        z.par_chunks_mut(block)
            .zip(r.par_chunks(block))
            .zip(&self.factors)
            .for_each(|((zb, rb), f)| {
                let mut v = nalgebra::DVector::from_column_slice(rb);
                f.solve_mut(&mut v);
                zb.copy_from_slice(v.as_slice());
            });
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Sequential on purpose: keeps reductions bitwise reproducible.
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradients to a relative residual tolerance.
/// Returns the iteration count.
pub fn pcg(
    a: &CsrMatrix,
    precond: &BlockJacobi,
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<usize, LinalgError> {
    let n = a.n;
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.fill(0.0);
        return Ok(0);
    }
    let mut r = vec![0.0; n];
    a.matvec(x, &mut r);
    for (ri, (&bi, _)) in r.iter_mut().zip(b.iter().zip(0..)) {
        *ri = bi - *ri;
    }
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        let res = dot(&r, &r).sqrt() / b_norm;
        if res <= rel_tol {
            return Ok(it);
        }
        a.matvec(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        precond.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = dot(&r, &r).sqrt() / b_norm;
    if res <= rel_tol {
        Ok(max_iter)
    } else {
        Err(LinalgError::NoConvergence {
            iterations: max_iter,
            residual: res,
        })
    }
}

/// Factorized SPD operator: direct profile Cholesky below the size
/// threshold, block-Jacobi PCG above it.
pub enum SpdSolver {
    Direct(SkylineCholesky),
    Iterative {
        a: CsrMatrix,
        precond: BlockJacobi,
        rel_tol: f64,
    },
}

/// Direct factorization is preferred up to this many unknowns; beyond it
/// the profile memory grows too fast and PCG takes over.
pub const DIRECT_DOF_LIMIT: usize = 20_000;

/// Relative residual tolerance of the iterative fallback.
pub const PCG_REL_TOL: f64 = 1e-10;

const PCG_MAX_ITER: usize = 10_000;

impl SpdSolver {
    /// `block` is the element-local size (used both for the preconditioner
    /// and to map `elem_adj` to DOF indices for the fill-reducing ordering).
    pub fn new(
        a: CsrMatrix,
        block: usize,
        elem_adj: &[Vec<usize>],
        force_iterative: bool,
    ) -> Result<Self, LinalgError> {
        if force_iterative || a.n > DIRECT_DOF_LIMIT {
            let precond = BlockJacobi::from_csr(&a, block)?;
            Ok(SpdSolver::Iterative {
                a,
                precond,
                rel_tol: PCG_REL_TOL,
            })
        } else {
            let elem_order = reverse_cuthill_mckee(elem_adj);
            let mut perm = Vec::with_capacity(a.n);
            for &e in &elem_order {
                for l in 0..block {
                    perm.push(e * block + l);
                }
            }
            Ok(SpdSolver::Direct(SkylineCholesky::factor(&a, perm)?))
        }
    }

    /// Solve into `x`; returns PCG iterations (0 for the direct path).
    pub fn solve(&self, b: &[f64], x: &mut [f64]) -> Result<usize, LinalgError> {
        match self {
            SpdSolver::Direct(chol) => {
                chol.solve(b, x);
                Ok(0)
            }
            SpdSolver::Iterative { a, precond, rel_tol } => {
                pcg(a, precond, b, x, *rel_tol, PCG_MAX_ITER)
            }
        }
    }

    pub fn is_direct(&self) -> bool {
        matches!(self, SpdSolver::Direct(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> (CsrMatrix, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let dense = &b * b.transpose() + DMatrix::identity(n, n) * n as f64;
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in 0..n {
                triplets.push((i as u32, j as u32, dense[(i, j)]));
            }
        }
        (CsrMatrix::from_triplets(n, triplets), dense)
    }

    #[test]
    fn triplets_sum_duplicates_in_order() {
        let a = CsrMatrix::from_triplets(
            2,
            vec![(0, 1, 1.0), (0, 0, 2.0), (0, 1, 0.5), (1, 1, 3.0)],
        );
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 1), 1.5);
        assert_eq!(a.get(0, 0), 2.0);
        assert_eq!(a.get(1, 0), 0.0);
    }

    #[test]
    fn matvec_matches_dense() {
        let (a, dense) = random_spd(17, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<f64> = (0..17).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = a.matvec_alloc(&x);
        let yd = &dense * nalgebra::DVector::from_column_slice(&x);
        for i in 0..17 {
            assert_relative_eq!(y[i], yd[i], max_relative = 1e-13);
        }
    }

    #[test]
    fn skyline_solves_against_dense_oracle() {
        for seed in [1u64, 2, 3] {
            let n = 40;
            let (a, dense) = random_spd(n, seed);
            let chol = SkylineCholesky::factor(&a, (0..n).collect()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 10);
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut x = vec![0.0; n];
            chol.solve(&b, &mut x);
            let xd = dense
                .clone()
                .cholesky()
                .unwrap()
                .solve(&nalgebra::DVector::from_column_slice(&b));
            for i in 0..n {
                assert_relative_eq!(x[i], xd[i], epsilon = 1e-10, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn skyline_rejects_indefinite() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 1, -1.0)]);
        assert!(matches!(
            SkylineCholesky::factor(&a, vec![0, 1]),
            Err(LinalgError::NotPositiveDefinite { row: 1, .. })
        ));
    }

    #[test]
    fn rcm_shrinks_bandwidth_on_shuffled_path() {
        // Path graph of 60 vertices under a random relabeling: RCM must
        // recover a near-unit bandwidth.
        let n = 60;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut label: Vec<usize> = (0..n).collect();
        label.shuffle(&mut rng);
        let mut adj = vec![Vec::new(); n];
        for i in 0..n - 1 {
            adj[label[i]].push(label[i + 1]);
            adj[label[i + 1]].push(label[i]);
        }
        let order = reverse_cuthill_mckee(&adj);
        let mut pos = vec![0usize; n];
        for (k, &v) in order.iter().enumerate() {
            pos[v] = k;
        }
        let bw = (0..n - 1)
            .map(|i| pos[label[i]].abs_diff(pos[label[i + 1]]))
            .max()
            .unwrap();
        assert_eq!(bw, 1);
    }

    #[test]
    fn pcg_matches_dense_oracle() {
        let n = 48;
        let (a, dense) = random_spd(n, 11);
        let precond = BlockJacobi::from_csr(&a, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut x = vec![0.0; n];
        let iters = pcg(&a, &precond, &b, &mut x, 1e-12, 500).unwrap();
        assert!(iters > 0);
        let xd = dense
            .clone()
            .cholesky()
            .unwrap()
            .solve(&nalgebra::DVector::from_column_slice(&b));
        for i in 0..n {
            assert_relative_eq!(x[i], xd[i], epsilon = 1e-9, max_relative = 1e-8);
        }
    }

    #[test]
    fn pcg_zero_rhs_returns_zero() {
        let (a, _) = random_spd(12, 5);
        let precond = BlockJacobi::from_csr(&a, 3).unwrap();
        let b = vec![0.0; 12];
        let mut x = vec![1.0; 12];
        let iters = pcg(&a, &precond, &b, &mut x, 1e-10, 100).unwrap();
        assert_eq!(iters, 0);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn spd_solver_picks_direct_then_iterative() {
        let (a, _) = random_spd(20, 21);
        let adj: Vec<Vec<usize>> = (0..5)
            .map(|i| {
                let mut v = Vec::new();
                if i > 0 {
                    v.push(i - 1);
                }
                if i < 4 {
                    v.push(i + 1);
                }
                v
            })
            .collect();
        let direct = SpdSolver::new(a.clone(), 4, &adj, false).unwrap();
        assert!(direct.is_direct());
        let iterative = SpdSolver::new(a.clone(), 4, &adj, true).unwrap();
        assert!(!iterative.is_direct());
        let b: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut xd = vec![0.0; 20];
        let mut xi = vec![0.0; 20];
        direct.solve(&b, &mut xd).unwrap();
        iterative.solve(&b, &mut xi).unwrap();
        for i in 0..20 {
            assert_relative_eq!(xd[i], xi[i], epsilon = 1e-9, max_relative = 1e-8);
        }
    }

    #[test]
    fn asymmetry_detects_perturbation() {
        let (mut a, _) = random_spd(10, 31);
        assert!(a.max_relative_asymmetry() < 1e-14);
        let k = a.row_ptr[2]; // first entry of row 2, column index < 2 or = 2
        a.values[k] += 0.5;
        assert!(a.max_relative_asymmetry() > 1e-3);
    }

    #[test]
    fn triplet_dump_round_trips() {
        let a = CsrMatrix::from_triplets(
            3,
            vec![(0, 0, 1.5), (1, 2, -0.125), (2, 1, 2.0 / 3.0)],
        );
        let mut buf = Vec::new();
        a.write_triplets(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut entries = Vec::new();
        for line in text.lines().filter(|l| !l.starts_with('#')) {
            let mut parts = line.split_whitespace();
            let r: u32 = parts.next().unwrap().parse().unwrap();
            let c: u32 = parts.next().unwrap().parse().unwrap();
            let v: f64 = parts.next().unwrap().parse().unwrap();
            entries.push((r, c, v));
        }
        let b = CsrMatrix::from_triplets(3, entries);
        assert_eq!(a.col_idx, b.col_idx);
        // Shortest-roundtrip float formatting makes the dump lossless.
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn linear_combination_merges_patterns() {
        let m = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 1, 1.0)]);
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0)]);
        let c = m.linear_combination(3.0, &a, 0.5);
        assert_eq!(c.get(0, 0), 4.0);
        assert_eq!(c.get(0, 1), 0.5);
        assert_eq!(c.get(1, 1), 3.0);
    }
}
