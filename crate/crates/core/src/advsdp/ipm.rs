//! Dense primal-dual interior-point solver for block-diagonal SDPs.
//!
//! Primal:  minimize <C, X>  subject to  <A_i, X> = b_i,  X PSD
//! Dual:    maximize b'y     subject to  sum_i y_i A_i + Z = C,  Z PSD
//!
//! `X`, `Z` and every `A_i` share one block-diagonal structure. Nonnegative
//! scalar variables are modeled as 1x1 blocks. The search direction is HKM
//! (`dX = sigma mu Z^-1 - X - X dZ Z^-1`, symmetrized) with Mehrotra
//! predictor-corrector centering.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

/// One nonzero `(block, row, col, value)` of a symmetric block matrix. Both
/// triangles are listed explicitly for off-diagonal entries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Entry {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Sparse symmetric block matrix used for constraint and cost matrices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseSym {
    pub entries: Vec<Entry>,
}

impl SparseSym {
    /// Add `value` at `(row, col)` and its mirror.
    pub fn add_sym(&mut self, block: usize, row: usize, col: usize, value: f64) {
        self.entries.push(Entry {
            block,
            row,
            col,
            value,
        });
        if row != col {
            self.entries.push(Entry {
                block,
                row: col,
                col: row,
                value,
            });
        }
    }

    fn dot(&self, m: &BlockMatrix) -> f64 {
        self.entries
            .iter()
            .map(|e| e.value * m.blocks[e.block][(e.row, e.col)])
            .sum()
    }

    fn add_scaled_to(&self, scale: f64, m: &mut BlockMatrix) {
        for e in &self.entries {
            m.blocks[e.block][(e.row, e.col)] += scale * e.value;
        }
    }
}

/// Dense block-diagonal symmetric matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMatrix {
    pub blocks: Vec<DMatrix<f64>>,
}

impl BlockMatrix {
    pub fn zeros(sizes: &[usize]) -> Self {
        Self {
            blocks: sizes.iter().map(|&s| DMatrix::zeros(s, s)).collect(),
        }
    }

    pub fn scaled_identity(sizes: &[usize], scale: f64) -> Self {
        Self {
            blocks: sizes
                .iter()
                .map(|&s| DMatrix::identity(s, s) * scale)
                .collect(),
        }
    }

    fn from_sparse(sizes: &[usize], s: &SparseSym) -> Self {
        let mut m = Self::zeros(sizes);
        s.add_scaled_to(1.0, &mut m);
        m
    }

    fn inner(&self, other: &BlockMatrix) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.dot(b))
            .sum()
    }

    fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    fn axpy(&mut self, alpha: f64, other: &BlockMatrix) {
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            *a += b * alpha;
        }
    }

    fn zip_map(
        &self,
        other: &BlockMatrix,
        f: impl Fn(&DMatrix<f64>, &DMatrix<f64>) -> DMatrix<f64>,
    ) -> Self {
        Self {
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| f(a, b))
                .collect(),
        }
    }

    fn symmetrize(&mut self) {
        for b in &mut self.blocks {
            let t = b.transpose();
            *b += t;
            *b *= 0.5;
        }
    }
}

#[derive(Clone, Debug)]
pub struct SdpProblem {
    pub block_sizes: Vec<usize>,
    pub cost: SparseSym,
    pub constraints: Vec<SparseSym>,
    pub rhs: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IpmOptions {
    pub max_iter: usize,
    /// Relative tolerance on primal residual, dual residual and gap.
    pub tol: f64,
}

impl Default for IpmOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-12,
        }
    }
}

#[derive(Clone, Debug)]
pub struct IpmSolution {
    pub x: BlockMatrix,
    pub y: DVector<f64>,
    pub z: BlockMatrix,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub relative_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Residuals {
    dual: BlockMatrix,
    primal_rel: f64,
    dual_rel: f64,
    pobj: f64,
    dobj: f64,
    gap_rel: f64,
}

impl SdpProblem {
    /// `<A_i, M>`; for nonsymmetric `M` this equals `<A_i, sym(M)>`.
    fn apply(&self, m: &BlockMatrix) -> DVector<f64> {
        DVector::from_iterator(
            self.constraints.len(),
            self.constraints.iter().map(|a| a.dot(m)),
        )
    }

    fn adjoint(&self, y: &DVector<f64>) -> BlockMatrix {
        let mut m = BlockMatrix::zeros(&self.block_sizes);
        for (a, &yi) in self.constraints.iter().zip(y.iter()) {
            a.add_scaled_to(yi, &mut m);
        }
        m
    }

    fn residuals(
        &self,
        x: &BlockMatrix,
        y: &DVector<f64>,
        z: &BlockMatrix,
        c: &BlockMatrix,
    ) -> Residuals {
        let b = DVector::from_column_slice(&self.rhs);
        let primal = &b - self.apply(x);
        let mut dual = c.clone();
        dual.axpy(-1.0, z);
        dual.axpy(-1.0, &self.adjoint(y));
        let pobj = c.inner(x);
        let dobj = b.dot(y);
        Residuals {
            primal_rel: primal.norm() / (1.0 + b.norm()),
            dual_rel: dual.norm() / (1.0 + c.norm()),
            gap_rel: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
            dual,
            pobj,
            dobj,
        }
    }

    /// Schur complement `M_ij = tr(A_i X A_j Z^-1)`.
    fn schur(&self, x: &BlockMatrix, zinv: &BlockMatrix) -> DMatrix<f64> {
        let k = self.constraints.len();
        let mut per_block: Vec<Vec<(usize, Entry)>> = vec![Vec::new(); self.block_sizes.len()];
        for (i, a) in self.constraints.iter().enumerate() {
            for e in &a.entries {
                per_block[e.block].push((i, *e));
            }
        }
        let mut m = DMatrix::zeros(k, k);
        for (blk, entries) in per_block.iter().enumerate() {
            let xb = &x.blocks[blk];
            let gb = &zinv.blocks[blk];
            for &(i, p) in entries {
                for &(j, q) in entries {
                    if j < i {
                        continue;
                    }
                    m[(i, j)] += p.value * q.value * xb[(p.col, q.row)] * gb[(q.col, p.row)];
                }
            }
        }
        for i in 0..k {
            for j in 0..i {
                m[(i, j)] = m[(j, i)];
            }
        }
        m
    }

    pub fn solve(&self, opts: &IpmOptions) -> IpmSolution {
        let sizes = &self.block_sizes;
        let c = BlockMatrix::from_sparse(sizes, &self.cost);
        let dim: usize = sizes.iter().sum();
        let b_norm = self.rhs.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let scale = 10.0 * (1.0 + b_norm).max((dim as f64).sqrt());
        let mut x = BlockMatrix::scaled_identity(sizes, scale);
        let mut z = BlockMatrix::scaled_identity(sizes, scale);
        let mut y = DVector::zeros(self.constraints.len());

        let mut iterations = 0;
        let mut converged = false;
        let mut best: Option<(f64, BlockMatrix, DVector<f64>, BlockMatrix)> = None;

        loop {
            let res = self.residuals(&x, &y, &z, &c);
            let merit = res.primal_rel.max(res.dual_rel).max(res.gap_rel);
            if best.as_ref().is_none_or(|(m, ..)| merit < *m) {
                best = Some((merit, x.clone(), y.clone(), z.clone()));
            }
            if merit < opts.tol {
                converged = true;
                break;
            }
            if iterations >= opts.max_iter {
                break;
            }
            iterations += 1;

            let mu = x.inner(&z) / dim as f64;
            let Some(zinv) = inverse_blocks(&z) else {
                break;
            };
            let schur = self.schur(&x, &zinv);
            let Some(factor) = SchurFactor::new(schur) else {
                break;
            };

            let b = DVector::from_column_slice(&self.rhs);
            let x_rd_zinv = mul3(&x, &res.dual, &zinv);
            let base_rhs = &b + self.apply(&x_rd_zinv);

            // Predictor.
            let (dx_a, dz_a, _) =
                self.direction(&factor, &base_rhs, &res.dual, &x, &zinv, 0.0, None);
            let alpha_p = max_step(&x, &dx_a);
            let alpha_d = max_step(&z, &dz_a);
            let mut x_a = x.clone();
            x_a.axpy(alpha_p, &dx_a);
            let mut z_a = z.clone();
            z_a.axpy(alpha_d, &dz_a);
            let mu_aff = x_a.inner(&z_a) / dim as f64;
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

            // Corrector.
            let (dx, dz, dy) = self.direction(
                &factor,
                &base_rhs,
                &res.dual,
                &x,
                &zinv,
                sigma * mu,
                Some((&dx_a, &dz_a)),
            );
            let step_frac = if merit < 1e-6 { 0.995 } else { 0.98 };
            let ap = (step_frac * max_step(&x, &dx)).min(1.0);
            let ad = (step_frac * max_step(&z, &dz)).min(1.0);
            x.axpy(ap, &dx);
            z.axpy(ad, &dz);
            y.axpy(ad, &dy, 1.0);
            x.symmetrize();
            z.symmetrize();
        }

        let (_, bx, by, bz) = best.expect("at least one iterate evaluated");
        let res = self.residuals(&bx, &by, &bz, &c);
        IpmSolution {
            primal_objective: res.pobj,
            dual_objective: res.dobj,
            primal_residual: res.primal_rel,
            dual_residual: res.dual_rel,
            relative_gap: res.gap_rel,
            x: bx,
            y: by,
            z: bz,
            iterations,
            converged,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        factor: &SchurFactor,
        base_rhs: &DVector<f64>,
        rd: &BlockMatrix,
        x: &BlockMatrix,
        zinv: &BlockMatrix,
        sigma_mu: f64,
        second_order: Option<(&BlockMatrix, &BlockMatrix)>,
    ) -> (BlockMatrix, BlockMatrix, DVector<f64>) {
        let mut rhs = base_rhs.clone();
        if sigma_mu != 0.0 {
            rhs -= self.apply(zinv) * sigma_mu;
        }
        let correction = second_order.map(|(dxa, dza)| mul3(dxa, dza, zinv));
        if let Some(corr) = &correction {
            rhs += self.apply(corr);
        }
        let dy = factor.solve(&rhs);
        let mut dz = rd.clone();
        dz.axpy(-1.0, &self.adjoint(&dy));
        // dX = sigma mu Z^-1 - X - X dZ Z^-1 - dXa dZa Z^-1
        let mut dx = mul3(x, &dz, zinv);
        for blk in &mut dx.blocks {
            *blk *= -1.0;
        }
        dx.axpy(-1.0, x);
        if sigma_mu != 0.0 {
            dx.axpy(sigma_mu, zinv);
        }
        if let Some(corr) = &correction {
            dx.axpy(-1.0, corr);
        }
        dx.symmetrize();
        (dx, dz, dy)
    }
}

enum SchurFactor {
    Chol(Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl SchurFactor {
    fn new(m: DMatrix<f64>) -> Option<Self> {
        match Cholesky::new(m.clone()) {
            Some(c) => Some(SchurFactor::Chol(c)),
            None => {
                let lu = m.lu();
                lu.is_invertible().then_some(SchurFactor::Lu(lu))
            }
        }
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match self {
            SchurFactor::Chol(c) => c.solve(rhs),
            SchurFactor::Lu(lu) => lu.solve(rhs).expect("checked invertible"),
        }
    }
}

fn mul3(a: &BlockMatrix, b: &BlockMatrix, c: &BlockMatrix) -> BlockMatrix {
    let ab = a.zip_map(b, |p, q| p * q);
    ab.zip_map(c, |p, q| p * q)
}

fn inverse_blocks(m: &BlockMatrix) -> Option<BlockMatrix> {
    let blocks = m
        .blocks
        .iter()
        .map(|b| {
            let mut inv = Cholesky::new(b.clone())?.inverse();
            let t = inv.transpose();
            inv += t;
            inv *= 0.5;
            Some(inv)
        })
        .collect::<Option<Vec<_>>>()?;
    Some(BlockMatrix { blocks })
}

/// Largest `alpha` with `M + alpha dM` PSD (capped at a large value).
fn max_step(m: &BlockMatrix, dm: &BlockMatrix) -> f64 {
    let mut alpha = f64::INFINITY;
    for (b, db) in m.blocks.iter().zip(&dm.blocks) {
        let min_eig = if b.nrows() == 1 {
            db[(0, 0)] / b[(0, 0)]
        } else {
            let Some(chol) = Cholesky::new(b.clone()) else {
                return 0.0;
            };
            let l = chol.l();
            let Some(linv) = l.clone().try_inverse() else {
                return 0.0;
            };
            let mut s = &linv * db * linv.transpose();
            let t = s.transpose();
            s += t;
            s *= 0.5;
            SymmetricEigen::new(s).eigenvalues.min()
        };
        if min_eig < 0.0 {
            alpha = alpha.min(-1.0 / min_eig);
        }
    }
    alpha.min(1e6)
}
