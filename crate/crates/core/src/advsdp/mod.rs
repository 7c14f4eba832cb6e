//! The dual general-adversary SDP and its primal certificates.
//!
//! For `f: D -> {0,1}` the dual program asks for real vectors `v_{xj}`
//! (`x` in `D`, `j` in `1..=n`) with
//!
//! ```text
//! sum_{j : x_j != y_j} <v_{xj}, v_{yj}> = 1   for all (x, y) in F_0 x F_1
//! ```
//!
//! minimizing `W = max_x sum_j |v_{xj}|^2`. Only inner products between
//! vectors with the same `j` enter, so the Gram matrix may be taken block
//! diagonal in `j`; the solver works with one `|D| x |D|` PSD block per input
//! bit and recovers the vectors by factoring each block.

pub mod ipm;
pub mod library;

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::boolfn::{Bits, BooleanFunction};
use crate::error::{Error, Result};
use crate::io;
use ipm::{IpmOptions, SdpProblem, SparseSym};

/// Relative eigenvalue cutoff used when reading a rank off a Gram matrix.
pub const RANK_THRESHOLD: f64 = 1e-9;
/// Default tolerance on negative Gram eigenvalues before clamping fails.
pub const PSD_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Required bound on the worst equality-constraint residual.
    pub tol_feas: f64,
    /// Required relative duality gap against the extracted certificate.
    pub tol_obj: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_feas: 1e-8,
            tol_obj: 1e-4,
            max_iter: 100,
        }
    }
}

/// Witness vectors for one boolean function.
#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution {
    n: usize,
    m: usize,
    domain: Vec<Bits>,
    /// Row-major: `(position * n + j) * m .. + m` holds `v_{x, j+1}`.
    data: Vec<f64>,
    w: f64,
}

#[derive(Serialize, Deserialize)]
struct DualFile {
    n: usize,
    m: usize,
    #[serde(rename = "W")]
    w: f64,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl DualSolution {
    /// Build from vectors indexed `[position][j]`, computing `W` as the
    /// largest per-input squared norm.
    pub fn from_vectors(f: &BooleanFunction, vectors: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let n = f.n();
        if vectors.len() != f.len() || vectors.iter().any(|row| row.len() != n) {
            return Err(Error::Dimension {
                module: "advsdp",
                message: format!("expected {} x {} witness vectors", f.len(), n),
            });
        }
        let m = vectors
            .first()
            .and_then(|row| row.first())
            .map_or(0, Vec::len);
        if vectors.iter().flatten().any(|v| v.len() != m) {
            return Err(Error::Dimension {
                module: "advsdp",
                message: format!("all witness vectors must have length {m}"),
            });
        }
        let data = vectors.into_iter().flatten().flatten().collect();
        let mut sol = Self {
            n,
            m,
            domain: f.domain().to_vec(),
            data,
            w: 0.0,
        };
        sol.w = sol.max_norm_sum();
        Ok(sol)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Witness dimension.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Objective value `W`.
    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn domain(&self) -> &[Bits] {
        &self.domain
    }

    /// `v_{x, j+1}` for the input at domain position `pos`.
    pub fn vector(&self, pos: usize, j: usize) -> &[f64] {
        let start = (pos * self.n + j) * self.m;
        &self.data[start..start + self.m]
    }

    fn vector_mut(&mut self, pos: usize, j: usize) -> &mut [f64] {
        let start = (pos * self.n + j) * self.m;
        &mut self.data[start..start + self.m]
    }

    /// `sum_j |v_{xj}|^2` for the input at `pos`.
    pub fn norm_sum(&self, pos: usize) -> f64 {
        (0..self.n)
            .map(|j| self.vector(pos, j).iter().map(|a| a * a).sum::<f64>())
            .sum()
    }

    fn max_norm_sum(&self) -> f64 {
        (0..self.domain.len())
            .map(|p| self.norm_sum(p))
            .fold(0.0, f64::max)
    }

    fn pair_value(&self, xp: usize, yp: usize) -> f64 {
        let (x, y) = (&self.domain[xp], &self.domain[yp]);
        x.differing(y)
            .map(|j| dot(self.vector(xp, j), self.vector(yp, j)))
            .sum()
    }

    /// Worst `|sum_{j: x_j != y_j} <v_xj, v_yj> - 1|` over `F_0 x F_1`.
    pub fn feasibility_residual(&self, f: &BooleanFunction) -> f64 {
        let (zeros, ones) = positions(f);
        let mut worst: f64 = 0.0;
        for &xp in &zeros {
            for &yp in &ones {
                worst = worst.max((self.pair_value(xp, yp) - 1.0).abs());
            }
        }
        worst
    }

    /// Full Gram matrix over index `(position, j)`.
    pub fn gram(&self) -> GramMatrix {
        let size = self.domain.len() * self.n;
        let mut m = DMatrix::zeros(size, size);
        for a in 0..size {
            for b in a..size {
                let v = dot(
                    self.vector(a / self.n, a % self.n),
                    self.vector(b / self.n, b % self.n),
                );
                m[(a, b)] = v;
                m[(b, a)] = v;
            }
        }
        GramMatrix {
            n: self.n,
            domain: self.domain.clone(),
            matrix: m,
        }
    }

    /// Scale `F_0` vectors by `s` and `F_1` vectors by `1/s`.
    pub fn scaled(&self, f: &BooleanFunction, s: f64) -> Self {
        let mut out = self.clone();
        for pos in 0..self.domain.len() {
            let factor = if f.value_at(pos) { 1.0 / s } else { s };
            for j in 0..self.n {
                out.vector_mut(pos, j).iter_mut().for_each(|a| *a *= factor);
            }
        }
        out.w = out.max_norm_sum();
        out
    }

    /// Apply the scaling `s` that minimizes `W`; never increases it.
    pub fn rebalanced(&self, f: &BooleanFunction) -> Self {
        let (zeros, ones) = positions(f);
        let t0 = zeros.iter().map(|&p| self.norm_sum(p)).fold(0.0, f64::max);
        let t1 = ones.iter().map(|&p| self.norm_sum(p)).fold(0.0, f64::max);
        if t0 <= 0.0 || t1 <= 0.0 {
            return self.clone();
        }
        let candidate = self.scaled(f, (t1 / t0).sqrt().sqrt());
        if candidate.w <= self.w {
            candidate
        } else {
            self.clone()
        }
    }

    pub fn to_json_string(&self) -> String {
        io::to_json_string(&self.to_file())
    }

    fn to_file(&self) -> DualFile {
        let mut vectors = BTreeMap::new();
        for (pos, x) in self.domain.iter().enumerate() {
            for j in 0..self.n {
                vectors.insert(format!("{x},{}", j + 1), self.vector(pos, j).to_vec());
            }
        }
        DualFile {
            n: self.n,
            m: self.m,
            w: self.w,
            vectors,
        }
    }

    /// Parse a dual file against the function it was solved for.
    pub fn from_json_str(text: &str, f: &BooleanFunction) -> Result<Self> {
        let file: DualFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            module: "advsdp",
            message: e.to_string(),
        })?;
        if file.n != f.n() {
            return Err(Error::Dimension {
                module: "advsdp",
                message: format!("dual has n = {}, function has n = {}", file.n, f.n()),
            });
        }
        let expected = f.len() * f.n();
        if file.vectors.len() != expected {
            return Err(Error::Dimension {
                module: "advsdp",
                message: format!(
                    "dual has {} vectors, expected {expected}",
                    file.vectors.len()
                ),
            });
        }
        let mut rows = Vec::with_capacity(f.len());
        for x in f.domain() {
            let mut row = Vec::with_capacity(f.n());
            for j in 1..=f.n() {
                let key = format!("{x},{j}");
                let v = file.vectors.get(&key).ok_or_else(|| Error::Dimension {
                    module: "advsdp",
                    message: format!("missing vector {key}"),
                })?;
                if v.len() != file.m {
                    return Err(Error::Dimension {
                        module: "advsdp",
                        message: format!(
                            "vector {key} has length {}, expected m = {}",
                            v.len(),
                            file.m
                        ),
                    });
                }
                row.push(v.clone());
            }
            rows.push(row);
        }
        let mut sol = Self::from_vectors(f, rows)?;
        sol.m = file.m;
        if file.w < sol.w * (1.0 - 1e-12) {
            return Err(Error::Dimension {
                module: "advsdp",
                message: format!(
                    "stated W = {} is below max_x sum_j |v_xj|^2 = {}",
                    file.w, sol.w
                ),
            });
        }
        sol.w = file.w;
        Ok(sol)
    }

    pub fn load(path: &Path, f: &BooleanFunction) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text, f)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, &self.to_file())
    }
}

/// Gram matrix indexed by `(position, j)` as `position * n + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    pub n: usize,
    pub domain: Vec<Bits>,
    pub matrix: DMatrix<f64>,
}

/// Factor a Gram matrix into vectors, clamping eigenvalues in
/// `[-psd_tol, 0)` and dropping those below `RANK_THRESHOLD * max`.
pub fn extract_vectors(
    gram: &GramMatrix,
    f: &BooleanFunction,
    psd_tol: f64,
) -> Result<DualSolution> {
    let size = gram.domain.len() * gram.n;
    if gram.matrix.nrows() != size || gram.matrix.ncols() != size {
        return Err(Error::Dimension {
            module: "advsdp",
            message: format!("Gram matrix must be {size} x {size}"),
        });
    }
    let factors = factor_psd(&gram.matrix, psd_tol)?;
    let m = factors.ncols();
    let rows = (0..gram.domain.len())
        .map(|p| {
            (0..gram.n)
                .map(|j| factors.row(p * gram.n + j).iter().copied().collect())
                .collect()
        })
        .collect();
    let mut sol = DualSolution::from_vectors(f, rows)?;
    sol.m = m;
    Ok(sol)
}

/// Returns `V` with `V V^T ~= M`, one column per retained eigenvalue.
fn factor_psd(m: &DMatrix<f64>, psd_tol: f64) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(symmetrized(m));
    let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let min = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min < -psd_tol * max.max(1.0) {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
            tolerance: psd_tol * max.max(1.0),
        });
    }
    let mut order: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&k| eig.eigenvalues[k] > RANK_THRESHOLD * max)
        .collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut v = DMatrix::zeros(m.nrows(), order.len());
    for (col, &k) in order.iter().enumerate() {
        let mut s = eig.eigenvalues[k].sqrt();
        // Fix the sign so the largest-magnitude entry is positive.
        let column = eig.eigenvectors.column(k);
        if column[column.iamax()] < 0.0 {
            s = -s;
        }
        v.set_column(col, &(column * s));
    }
    Ok(v)
}

/// Output of [`solve_dual`].
#[derive(Clone, Debug)]
pub struct DualSolve {
    pub solution: DualSolution,
    /// Primal adversary matrix recovered from the solver's dual multipliers.
    pub certificate: Option<PrimalCertificate>,
    pub stats: SolveStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub ipm_converged: bool,
    pub ipm_primal_residual: f64,
    pub ipm_dual_residual: f64,
    pub ipm_relative_gap: f64,
    pub feasibility_residual: f64,
    pub certificate_value: f64,
    pub relative_duality_gap: f64,
    /// Feasibility and the certified gap both within tolerance.
    pub certified: bool,
}

fn positions(f: &BooleanFunction) -> (Vec<usize>, Vec<usize>) {
    (0..f.len()).partition(|&p| !f.value_at(p))
}

fn require_nonconstant(
    f: &BooleanFunction,
    module: &'static str,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let (zeros, ones) = positions(f);
    if zeros.is_empty() || ones.is_empty() {
        return Err(Error::Degenerate {
            module,
            message: "F_0 and F_1 must both be nonempty".into(),
        });
    }
    Ok((zeros, ones))
}

/// Solve the dual adversary SDP for `f`.
pub fn solve_dual(f: &BooleanFunction, opts: &SolverOptions) -> Result<DualSolve> {
    let (zeros, ones) = require_nonconstant(f, "advsdp")?;
    let n = f.n();
    let size = f.len();
    let domain = f.domain();

    // Blocks 0..n: one Gram block per bit. Then a 1x1 slack block per input
    // and a final 1x1 block holding W.
    let mut block_sizes = vec![size; n];
    block_sizes.extend(std::iter::repeat_n(1, size + 1));
    let w_block = n + size;

    let mut constraints = Vec::new();
    let mut rhs = Vec::new();
    let mut pairs = Vec::new();
    for &xp in &zeros {
        for &yp in &ones {
            let mut a = SparseSym::default();
            for j in domain[xp].differing(&domain[yp]) {
                a.add_sym(j, xp, yp, 0.5);
            }
            constraints.push(a);
            rhs.push(1.0);
            pairs.push((xp, yp));
        }
    }
    for p in 0..size {
        let mut a = SparseSym::default();
        for j in 0..n {
            a.add_sym(j, p, p, 1.0);
        }
        a.add_sym(n + p, 0, 0, 1.0);
        a.add_sym(w_block, 0, 0, -1.0);
        constraints.push(a);
        rhs.push(0.0);
    }
    let mut cost = SparseSym::default();
    cost.add_sym(w_block, 0, 0, 1.0);

    let problem = SdpProblem {
        block_sizes,
        cost,
        constraints,
        rhs,
    };
    let ipm = problem.solve(&IpmOptions {
        max_iter: opts.max_iter,
        ..IpmOptions::default()
    });

    // Factor each bit's block separately and pad to a common length.
    let factors = ipm.x.blocks[..n]
        .iter()
        .map(|b| factor_psd(b, PSD_TOLERANCE))
        .collect::<Result<Vec<_>>>()?;
    let m = factors.iter().map(|v| v.ncols()).max().unwrap_or(0).max(1);
    let rows = (0..size)
        .map(|p| {
            factors
                .iter()
                .map(|v| {
                    let mut row: Vec<f64> = v.row(p).iter().copied().collect();
                    row.resize(m, 0.0);
                    row
                })
                .collect()
        })
        .collect();
    let mut solution = DualSolution::from_vectors(f, rows)?;
    polish_feasibility(&mut solution, &pairs, 4);
    let solution = solution.rebalanced(f);
    let feasibility_residual = solution.feasibility_residual(f);

    let multipliers: Vec<f64> = ipm.y.iter().copied().collect();
    let certificate = certificate_from_multipliers(
        f,
        &pairs,
        &multipliers[..pairs.len()],
        &multipliers[pairs.len()..],
    );
    let certificate_value = certificate.as_ref().map_or(0.0, |c| c.value);
    let relative_duality_gap = (solution.w() - certificate_value) / solution.w().max(1.0);

    let stats = SolveStats {
        iterations: ipm.iterations,
        ipm_converged: ipm.converged,
        ipm_primal_residual: ipm.primal_residual,
        ipm_dual_residual: ipm.dual_residual,
        ipm_relative_gap: ipm.relative_gap,
        feasibility_residual,
        certificate_value,
        relative_duality_gap,
        certified: feasibility_residual <= opts.tol_feas && relative_duality_gap <= opts.tol_obj,
    };
    if feasibility_residual > opts.tol_feas && !ipm.converged {
        return Err(Error::NoConvergence {
            iterations: ipm.iterations,
            primal_residual: ipm.primal_residual,
            dual_residual: ipm.dual_residual,
            gap: ipm.relative_gap,
        });
    }
    Ok(DualSolve {
        solution,
        certificate,
        stats,
    })
}

/// Gauss-Newton steps on the pair constraints, taking the least-norm update
/// each time. Quadratically removes the residual left by rank truncation.
fn polish_feasibility(sol: &mut DualSolution, pairs: &[(usize, usize)], steps: usize) {
    let diffs: Vec<Vec<usize>> = pairs
        .iter()
        .map(|&(x, y)| sol.domain[x].differing(&sol.domain[y]).collect())
        .collect();
    let k = pairs.len();
    for _ in 0..steps {
        let r = DVector::from_iterator(k, pairs.iter().map(|&(x, y)| sol.pair_value(x, y) - 1.0));
        if r.amax() < 1e-15 {
            break;
        }
        let mut g = DMatrix::zeros(k, k);
        for p in 0..k {
            for q in p..k {
                let (xp, yp) = pairs[p];
                let (xq, yq) = pairs[q];
                if xp != xq && yp != yq {
                    continue;
                }
                let mut v = 0.0;
                for &j in diffs[p].iter().filter(|j| diffs[q].contains(j)) {
                    if xp == xq {
                        v += dot(sol.vector(yp, j), sol.vector(yq, j));
                    }
                    if yp == yq {
                        v += dot(sol.vector(xp, j), sol.vector(xq, j));
                    }
                }
                g[(p, q)] = v;
                g[(q, p)] = v;
            }
        }
        let ridge = 1e-14 * g.trace().max(1.0) / k as f64;
        for i in 0..k {
            g[(i, i)] += ridge;
        }
        let Some(chol) = Cholesky::new(g) else { break };
        let lambda = chol.solve(&r);
        let mut delta = vec![0.0; sol.data.len()];
        for (p, &(x, y)) in pairs.iter().enumerate() {
            for &j in &diffs[p] {
                let (vx, vy) = (sol.vector(x, j), sol.vector(y, j));
                let xs = (x * sol.n + j) * sol.m;
                let ys = (y * sol.n + j) * sol.m;
                for t in 0..sol.m {
                    delta[xs + t] -= lambda[p] * vy[t];
                    delta[ys + t] -= lambda[p] * vx[t];
                }
            }
        }
        for (a, d) in sol.data.iter_mut().zip(delta) {
            *a += d;
        }
    }
    sol.w = sol.max_norm_sum();
}

/// A symmetric adversary matrix over `D` (domain order) and its ratio value.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimalCertificate {
    pub gamma: DMatrix<f64>,
    pub norm: f64,
    pub max_bit_norm: f64,
    /// `|Gamma| / max_j |Gamma o Delta_j|`; infinite if the denominator vanishes.
    pub value: f64,
}

/// Evaluate `|Gamma| / max_j |Gamma o Delta_j|` with spectral norms.
pub fn evaluate_primal(f: &BooleanFunction, gamma: &DMatrix<f64>) -> Result<PrimalCertificate> {
    let size = f.len();
    if gamma.nrows() != size || gamma.ncols() != size {
        return Err(Error::InvalidCertificate(format!(
            "Gamma must be {size} x {size}"
        )));
    }
    let scale = gamma.amax().max(1.0);
    for a in 0..size {
        for b in 0..size {
            if (gamma[(a, b)] - gamma[(b, a)]).abs() > 1e-12 * scale {
                return Err(Error::InvalidCertificate(format!(
                    "not symmetric at ({a}, {b})"
                )));
            }
            if f.value_at(a) == f.value_at(b) && gamma[(a, b)] != 0.0 {
                return Err(Error::InvalidCertificate(format!(
                    "nonzero entry between {} and {} which share a value",
                    f.domain()[a],
                    f.domain()[b]
                )));
            }
        }
    }
    let norm = spectral_norm(gamma);
    let max_bit_norm = (0..f.n())
        .map(|j| {
            let masked = DMatrix::from_fn(size, size, |a, b| {
                if f.domain()[a].bit(j) != f.domain()[b].bit(j) {
                    gamma[(a, b)]
                } else {
                    0.0
                }
            });
            spectral_norm(&masked)
        })
        .fold(0.0, f64::max);
    let value = if norm == 0.0 {
        0.0
    } else if max_bit_norm == 0.0 {
        return Err(Error::InvalidCertificate(
            "unbounded: every Gamma o Delta_j vanishes while Gamma does not".into(),
        ));
    } else {
        norm / max_bit_norm
    };
    Ok(PrimalCertificate {
        gamma: gamma.clone(),
        norm,
        max_bit_norm,
        value,
    })
}

/// `W - value`; weak duality makes this nonnegative up to round-off.
pub fn duality_gap(dual: &DualSolution, certificate: &PrimalCertificate) -> f64 {
    dual.w() - certificate.value
}

/// `Gamma[x, y] = y_xy / (2 sqrt(d_x d_y))` from pair multipliers `y_xy` and
/// trace multipliers `-d_x`.
fn certificate_from_multipliers(
    f: &BooleanFunction,
    pairs: &[(usize, usize)],
    pair_mult: &[f64],
    trace_mult: &[f64],
) -> Option<PrimalCertificate> {
    let d: Vec<f64> = trace_mult.iter().map(|&t| (-t).max(0.0)).collect();
    let dmax = d.iter().copied().fold(0.0, f64::max);
    if dmax <= 0.0 {
        return None;
    }
    let mut gamma = DMatrix::zeros(f.len(), f.len());
    for (&(x, y), &mult) in pairs.iter().zip(pair_mult) {
        if d[x] <= 1e-10 * dmax || d[y] <= 1e-10 * dmax {
            continue;
        }
        let g = mult / (2.0 * (d[x] * d[y]).sqrt());
        gamma[(x, y)] = g;
        gamma[(y, x)] = g;
    }
    evaluate_primal(f, &gamma).ok()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn symmetrized(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(symmetrized(m))
        .eigenvalues
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
}
