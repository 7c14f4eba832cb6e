//! The weighted bipartite graph built from a dual solution, its kernel
//! projector, and the per-input reflections.
//!
//! Vertex order is `F_0` (domain order), then the distinguished vertex `0`,
//! then `I = [n] x {0,1} x [m]` in lexicographic `(j, b, k)` order.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::advsdp::{spectral_norm, DualSolution};
use crate::boolfn::{Bits, BooleanFunction};
use crate::error::{Error, Result};

/// Default scale of the `|t>` weights: `t_x = kappa / sqrt(W)`.
pub const DEFAULT_KAPPA: f64 = 1.0 / 3.0;
/// Eigenvalues with `|rho| <= KERNEL_THRESHOLD * |A_G|` count as zero.
pub const KERNEL_THRESHOLD: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Vertex {
    /// An input `x` with `f(x) = 0`.
    Input(Bits),
    Zero,
    /// `(j, b, k)` with `j`, `k` 1-based.
    Item {
        j: usize,
        b: bool,
        k: usize,
    },
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Vertex::Input(x) => write!(f, "x={x}"),
            Vertex::Zero => f.write_str("0"),
            Vertex::Item { j, b, k } => write!(f, "({j},{},{k})", u8::from(*b)),
        }
    }
}

/// Bijection between vertex labels and matrix indices.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexIndex {
    zeros: Vec<Bits>,
    n: usize,
    m: usize,
}

impl VertexIndex {
    pub fn new(zeros: Vec<Bits>, n: usize, m: usize) -> Self {
        Self { zeros, n, m }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.zeros.len() + 1 + self.items()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `|I| = 2 n m`.
    pub fn items(&self) -> usize {
        2 * self.n * self.m
    }

    pub fn num_zeros(&self) -> usize {
        self.zeros.len()
    }

    pub fn zero(&self) -> usize {
        self.zeros.len()
    }

    /// Offset of `(j, b, k)` inside `I`, all 0-based.
    pub fn item_offset(&self, j: usize, b: bool, k: usize) -> usize {
        (2 * j + usize::from(b)) * self.m + k
    }

    /// Global index of `(j, b, k)`, all 0-based.
    pub fn item(&self, j: usize, b: bool, k: usize) -> usize {
        self.zeros.len() + 1 + self.item_offset(j, b, k)
    }

    pub fn label(&self, index: usize) -> Vertex {
        let f0 = self.zeros.len();
        if index < f0 {
            Vertex::Input(self.zeros[index].clone())
        } else if index == f0 {
            Vertex::Zero
        } else {
            let off = index - f0 - 1;
            let k = off % self.m;
            let jb = off / self.m;
            Vertex::Item {
                j: jb / 2 + 1,
                b: jb % 2 == 1,
                k: k + 1,
            }
        }
    }

    pub fn labels(&self) -> Vec<Vertex> {
        (0..self.len()).map(|i| self.label(i)).collect()
    }
}

/// The graph `G` with biadjacency `(t | A)` and kernel projector `Delta`.
#[derive(Clone, Debug)]
pub struct AdversaryGraph {
    pub function: BooleanFunction,
    pub index: VertexIndex,
    pub w: f64,
    pub kappa: f64,
    /// Domain positions of the `F_0` inputs, in vertex order.
    pub zero_positions: Vec<usize>,
    pub t: DVector<f64>,
    /// `F_0 x I`.
    pub a: DMatrix<f64>,
    /// `F_0 x ({0} u I)`.
    pub biadjacency: DMatrix<f64>,
    pub adjacency: DMatrix<f64>,
    pub delta: DMatrix<f64>,
    pub kernel_dim: usize,
    /// Smallest `|rho|` outside the kernel (infinite if none).
    pub kernel_gap: f64,
    /// Largest `|rho|` counted as zero.
    pub kernel_noise: f64,
}

/// Symmetric embedding `[[0, B], [B^T, 0]]` of a biadjacency matrix.
pub fn bipartite_adjacency(b: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = b.shape();
    let mut a = DMatrix::zeros(r + c, r + c);
    a.view_mut((0, r), (r, c)).copy_from(b);
    a.view_mut((r, 0), (c, r)).copy_from(&b.transpose());
    a
}

/// Kernel projector of a symmetric matrix, with diagnostic gaps.
fn kernel_projector(a: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, usize, f64, f64) {
    let eig = SymmetricEigen::new(a.clone());
    let scale = eig.eigenvalues.amax();
    let cut = rel_tol * scale;
    let size = a.nrows();
    let mut delta = DMatrix::zeros(size, size);
    let mut dim = 0;
    let mut gap = f64::INFINITY;
    let mut noise: f64 = 0.0;
    for (k, &rho) in eig.eigenvalues.iter().enumerate() {
        if rho.abs() <= cut {
            let u = eig.eigenvectors.column(k);
            delta += u * u.transpose();
            dim += 1;
            noise = noise.max(rho.abs());
        } else {
            gap = gap.min(rho.abs());
        }
    }
    (delta, dim, gap, noise)
}

impl AdversaryGraph {
    /// Assemble `G` from `f` and a dual solution, with `t_x = kappa / sqrt(W)`.
    pub fn build(
        f: &BooleanFunction,
        d: &DualSolution,
        kappa: f64,
        kernel_tol: f64,
    ) -> Result<Self> {
        let (zeros, ones) = f.partition();
        if zeros.is_empty() || ones.is_empty() {
            return Err(Error::Degenerate {
                module: "graphrefl",
                message: "graph construction needs F_0 and F_1 both nonempty".into(),
            });
        }
        if d.n() != f.n() || d.domain() != f.domain() {
            return Err(Error::Dimension {
                module: "graphrefl",
                message: "dual solution was built for a different function".into(),
            });
        }
        let (n, m, w) = (f.n(), d.m(), d.w());
        let index = VertexIndex::new(zeros, n, m);
        let zero_positions: Vec<usize> = (0..f.len()).filter(|&p| !f.value_at(p)).collect();
        let f0 = zero_positions.len();

        let t = DVector::from_element(f0, kappa / w.sqrt());
        let mut a = DMatrix::zeros(f0, index.items());
        for (row, &pos) in zero_positions.iter().enumerate() {
            let x = &f.domain()[pos];
            for j in 0..n {
                let v = d.vector(pos, j);
                for k in 0..m {
                    a[(row, index.item_offset(j, !x.bit(j), k))] = v[k];
                }
            }
        }
        let mut biadjacency = DMatrix::zeros(f0, 1 + index.items());
        biadjacency.set_column(0, &t);
        biadjacency
            .view_mut((0, 1), (f0, index.items()))
            .copy_from(&a);
        let adjacency = bipartite_adjacency(&biadjacency);
        let (delta, kernel_dim, kernel_gap, kernel_noise) =
            kernel_projector(&adjacency, kernel_tol);
        Ok(Self {
            function: f.clone(),
            index,
            w,
            kappa,
            zero_positions,
            t,
            a,
            biadjacency,
            adjacency,
            delta,
            kernel_dim,
            kernel_gap,
            kernel_noise,
        })
    }

    pub fn dimension(&self) -> usize {
        self.index.len()
    }

    /// Unit vector on the vertex `0`.
    pub fn zero_vector(&self) -> DVector<f64> {
        let mut e = DVector::zeros(self.dimension());
        e[self.index.zero()] = 1.0;
        e
    }

    /// `|Delta |0>|^2`.
    pub fn zero_kernel_mass(&self) -> f64 {
        (&self.delta * self.zero_vector()).norm_squared()
    }

    /// Diagonal of `Pi_x`: zero exactly on the vertices `(j, not x_j, k)`.
    pub fn input_projector(&self, x: &Bits) -> DVector<f64> {
        let mut pi = DVector::from_element(self.dimension(), 1.0);
        for j in 0..self.index.n {
            for k in 0..self.index.m {
                pi[self.index.item(j, !x.bit(j), k)] = 0.0;
            }
        }
        pi
    }

    /// Diagonal of `PiBar(x)` over `I`.
    pub fn complement_projector(&self, x: &Bits) -> DVector<f64> {
        let mut p = DVector::zeros(self.index.items());
        for j in 0..self.index.n {
            for k in 0..self.index.m {
                p[self.index.item_offset(j, !x.bit(j), k)] = 1.0;
            }
        }
        p
    }

    pub fn input_operators(&self, x: &Bits) -> Result<InputOperators> {
        let value = self
            .function
            .value(x)
            .ok_or_else(|| Error::NotInDomain(x.to_string()))?;
        let pi = self.input_projector(x);
        let unitary = two_reflections(&pi, &self.delta);
        let pi_bar = self.complement_projector(x);
        let (f0, items) = (self.index.num_zeros(), self.index.items());

        // B_G(x) = [[t, A], [0, PiBar]] : (F_0 u I) x ({0} u I)
        let mut b_gx = DMatrix::zeros(f0 + items, 1 + items);
        b_gx.view_mut((0, 0), (f0, 1 + items))
            .copy_from(&self.biadjacency);
        // B_G'(x) = [[A], [PiBar]] : (F_0 u I) x I
        let mut b_gpx = DMatrix::zeros(f0 + items, items);
        b_gpx.view_mut((0, 0), (f0, items)).copy_from(&self.a);
        for i in 0..items {
            b_gx[(f0 + i, 1 + i)] = pi_bar[i];
            b_gpx[(f0 + i, i)] = pi_bar[i];
        }
        Ok(InputOperators {
            x: x.clone(),
            value,
            pi,
            unitary,
            pi_bar,
            b_gx,
            b_gpx,
        })
    }

    /// Graph dump: labels and nonzero biadjacency weights.
    pub fn dump(&self) -> GraphDump {
        let labels: Vec<String> = self
            .index
            .labels()
            .iter()
            .map(ToString::to_string)
            .collect();
        let mut edges = Vec::new();
        for r in 0..self.biadjacency.nrows() {
            for c in 0..self.biadjacency.ncols() {
                let wgt = self.biadjacency[(r, c)];
                if wgt != 0.0 {
                    edges.push(EdgeRecord {
                        row: labels[r].clone(),
                        col: labels[self.index.zero() + c].clone(),
                        weight: wgt,
                    });
                }
            }
        }
        GraphDump {
            n: self.index.n,
            m: self.index.m,
            w: self.w,
            kappa: self.kappa,
            vertices: labels,
            biadjacency: edges,
            kernel_dim: self.kernel_dim,
            kernel_gap: if self.kernel_gap.is_finite() {
                Some(self.kernel_gap)
            } else {
                None
            },
            kernel_noise: self.kernel_noise,
        }
    }

    /// Checks `A_G Delta = 0`, `Delta^2 = Delta = Delta^T` and
    /// `rank Delta = dim ker A_G`; returns the worst residual.
    pub fn kernel_residual(&self) -> f64 {
        let ad = (&self.adjacency * &self.delta).amax();
        let idem = (&self.delta * &self.delta - &self.delta).amax();
        let sym = (&self.delta - self.delta.transpose()).amax();
        let rank = (self.delta.trace() - self.kernel_dim as f64).abs();
        ad.max(idem).max(sym).max(rank)
    }

    /// `|A_G| <= |t| + |A|`.
    pub fn norm_bound_holds(&self) -> bool {
        spectral_norm(&self.adjacency)
            <= self.t.norm() + self.a.clone().svd(false, false).singular_values.max() + 1e-12
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub row: String,
    pub col: String,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDump {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "W")]
    pub w: f64,
    pub kappa: f64,
    pub vertices: Vec<String>,
    pub biadjacency: Vec<EdgeRecord>,
    pub kernel_dim: usize,
    pub kernel_gap: Option<f64>,
    pub kernel_noise: f64,
}

/// `(2 Pi - 1)(2 Delta - 1)` for a diagonal `Pi`.
pub fn two_reflections(pi_diag: &DVector<f64>, delta: &DMatrix<f64>) -> DMatrix<f64> {
    let size = delta.nrows();
    let mut refl_delta = delta * 2.0;
    for i in 0..size {
        refl_delta[(i, i)] -= 1.0;
    }
    let mut u = refl_delta;
    for (i, mut row) in u.row_iter_mut().enumerate() {
        row *= 2.0 * pi_diag[i] - 1.0;
    }
    u
}

/// Everything that depends on the input `x`.
#[derive(Clone, Debug)]
pub struct InputOperators {
    pub x: Bits,
    pub value: bool,
    /// Diagonal of `Pi_x`.
    pub pi: DVector<f64>,
    /// `U_x = (2 Pi_x - 1)(2 Delta - 1)`.
    pub unitary: DMatrix<f64>,
    /// Diagonal of `PiBar(x)` over `I`.
    pub pi_bar: DVector<f64>,
    pub b_gx: DMatrix<f64>,
    pub b_gpx: DMatrix<f64>,
}

impl InputOperators {
    pub fn pi_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.pi)
    }

    /// `|U^T U - 1|_max`.
    pub fn orthogonality_residual(&self) -> f64 {
        let size = self.unitary.nrows();
        (self.unitary.transpose() * &self.unitary - DMatrix::identity(size, size)).amax()
    }

    /// Adjacency of `G(x)`; row vertices `F_0 u I` come first, then the
    /// column vertices `{0} u I`.
    pub fn adjacency_gx(&self) -> DMatrix<f64> {
        bipartite_adjacency(&self.b_gx)
    }

    /// Index of the vertex `0` inside [`Self::adjacency_gx`].
    pub fn zero_in_gx(&self) -> usize {
        self.b_gx.nrows()
    }

    /// `G` sits inside `G(x)`, and `A_G(x) Delta` equals `(1 - Pi_x) Delta`
    /// up to a relabeling of vertices. Since relabeling is an isometry this
    /// compares Gram matrices: `(A E Delta)^T (A E Delta)` against
    /// `Delta (1 - Pi_x) Delta`, with `E` the embedding of `G` into `G(x)`.
    pub fn embedding_residual(&self, g: &AdversaryGraph) -> f64 {
        let f0 = g.index.num_zeros();
        let items = g.index.items();
        let rows = f0 + items;
        let dim = g.dimension();
        let mut embed = DMatrix::zeros(rows + 1 + items, dim);
        for i in 0..f0 {
            embed[(i, i)] = 1.0;
        }
        for c in 0..1 + items {
            embed[(rows + c, f0 + c)] = 1.0;
        }
        let lhs = self.adjacency_gx() * embed * &g.delta;
        let removed = self.pi.map(|p| 1.0 - p);
        let rhs = DMatrix::from_diagonal(&removed) * &g.delta;
        (lhs.transpose() * &lhs - rhs.transpose() * &rhs).amax()
    }
}

/// The query reflection on the `I` block should be one call to the bit
/// oracle `O_x |j, a> = |j, a xor x_j>` between fixed, input-independent
/// pieces: prepare the oracle target `a` in `|->`, query, and apply `Z` to
/// the `b` register. That gives the phase `(-1)^{b xor x_j}`, which is `-1`
/// exactly on the vertices `(j, not x_j, k)`.
pub fn query_oracle_check(g: &AdversaryGraph, x: &Bits) -> Result<bool> {
    g.function
        .value(x)
        .ok_or_else(|| Error::NotInDomain(x.to_string()))?;
    Ok(oracle_factorization_matches(g, x, &g.input_projector(x)))
}

/// [`query_oracle_check`] against an explicitly supplied `Pi` diagonal.
pub fn oracle_factorization_matches(g: &AdversaryGraph, x: &Bits, pi: &DVector<f64>) -> bool {
    let n = g.index.n;
    let m = g.index.m;
    // O_x on C^{[n]} (x) C^2_a, basis |j, a> -> row 2j + a.
    let mut oracle = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        for a in 0..2usize {
            let out = a ^ usize::from(x.bit(j));
            oracle[(2 * j + out, 2 * j + a)] = 1.0;
        }
    }
    // Sandwich with |-> on the target: (1 (x) <-|) O_x (1 (x) |->).
    let minus = [
        std::f64::consts::FRAC_1_SQRT_2,
        -std::f64::consts::FRAC_1_SQRT_2,
    ];
    let mut phase = DMatrix::zeros(n, n);
    for j in 0..n {
        for jj in 0..n {
            let mut acc = 0.0;
            for a in 0..2 {
                for aa in 0..2 {
                    acc += minus[a] * oracle[(2 * j + a, 2 * jj + aa)] * minus[aa];
                }
            }
            phase[(j, jj)] = acc;
        }
    }
    // Z on b, identity on k.
    let mut ok = true;
    let items_start = g.index.zero() + 1;
    for j in 0..n {
        for b in [false, true] {
            let z = if b { -1.0 } else { 1.0 };
            for k in 0..m {
                let predicted = z * phase[(j, j)];
                let idx = g.index.item(j, b, k);
                let actual = 2.0 * pi[idx] - 1.0;
                ok &= (predicted - actual).abs() <= 1e-12;
            }
        }
        for jj in 0..n {
            if jj != j {
                ok &= phase[(j, jj)].abs() <= 1e-12;
            }
        }
    }
    // Outside I the query reflection must be the identity.
    ok && (0..items_start).all(|i| (pi[i] - 1.0).abs() <= 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::advsdp::library;

    fn ident_graph() -> AdversaryGraph {
        let cert = library::or(1);
        AdversaryGraph::build(&cert.function, &cert.dual, DEFAULT_KAPPA, KERNEL_THRESHOLD).unwrap()
    }

    fn bits(s: &str) -> Bits {
        s.parse().unwrap()
    }

    #[test]
    fn identity_graph_by_substitution() {
        let g = ident_graph();
        assert_eq!(g.dimension(), 4);
        assert_eq!(
            g.index.labels(),
            vec![
                Vertex::Input(bits("0")),
                Vertex::Zero,
                Vertex::Item {
                    j: 1,
                    b: false,
                    k: 1
                },
                Vertex::Item {
                    j: 1,
                    b: true,
                    k: 1
                },
            ]
        );
        assert!((g.t[0] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(g.a.as_slice(), &[0.0, 1.0]);
        let row: Vec<f64> = g.biadjacency.row(0).iter().copied().collect();
        assert!((row[0] - 1.0 / 3.0).abs() < 1e-15 && row[1] == 0.0 && row[2] == 1.0);
        assert_eq!(g.kernel_dim, 2);
        assert!((g.delta.trace() - 2.0).abs() < 1e-12);
        assert!(g.kernel_residual() < 1e-10);
        assert!(g.norm_bound_holds());
    }

    #[test]
    fn spectrum_of_adjacency_is_symmetric() {
        for cert in [library::or(3), library::majority3(), library::parity(3)] {
            let g =
                AdversaryGraph::build(&cert.function, &cert.dual, DEFAULT_KAPPA, KERNEL_THRESHOLD)
                    .unwrap();
            let mut eig: Vec<f64> = SymmetricEigen::new(g.adjacency.clone())
                .eigenvalues
                .iter()
                .copied()
                .collect();
            eig.sort_by(f64::total_cmp);
            let k = eig.len();
            for i in 0..k {
                assert!((eig[i] + eig[k - 1 - i]).abs() < 1e-10);
            }
            assert!(g.kernel_residual() < 1e-10);
            assert!(g.norm_bound_holds());
            // B_G reproduces t and A blockwise.
            assert_eq!(g.biadjacency.column(0).clone_owned(), g.t);
            assert_eq!(g.biadjacency.columns(1, g.index.items()).clone_owned(), g.a);
        }
    }

    #[test]
    fn input_operators_for_identity() {
        let g = ident_graph();
        let ops = g.input_operators(&bits("1")).unwrap();
        // x = 1 removes (1, 0, 1).
        assert_eq!(ops.pi.as_slice(), &[1.0, 1.0, 0.0, 1.0]);
        assert!(ops.orthogonality_residual() < 1e-10);
        assert_eq!(ops.pi_bar.as_slice(), &[1.0, 0.0]);
        let refl_pi = DMatrix::from_diagonal(&ops.pi.map(|p| 2.0 * p - 1.0));
        let refl_delta = &g.delta * 2.0 - DMatrix::identity(4, 4);
        assert!((&refl_pi * &refl_pi - DMatrix::identity(4, 4)).amax() < 1e-10);
        assert!((&refl_delta * &refl_delta - DMatrix::identity(4, 4)).amax() < 1e-10);
        assert!((&refl_pi * &refl_delta - &ops.unitary).amax() < 1e-14);
        assert!(matches!(
            g.input_operators(&bits("11")),
            Err(Error::NotInDomain(_))
        ));
    }

    #[test]
    fn identity_projector_gives_pure_kernel_reflection() {
        let g = ident_graph();
        let u = two_reflections(&DVector::from_element(4, 1.0), &g.delta);
        let expected = &g.delta * 2.0 - DMatrix::identity(4, 4);
        assert!((u - expected).amax() < 1e-15);
    }

    #[test]
    fn biadjacency_of_gx_and_gpx_stack_correctly() {
        let cert = library::or(2);
        let g = AdversaryGraph::build(&cert.function, &cert.dual, DEFAULT_KAPPA, KERNEL_THRESHOLD)
            .unwrap();
        let ops = g.input_operators(&bits("01")).unwrap();
        let (f0, items) = (g.index.num_zeros(), g.index.items());
        assert_eq!(ops.b_gx.shape(), (f0 + items, 1 + items));
        assert_eq!(ops.b_gpx.shape(), (f0 + items, items));
        assert_eq!(ops.b_gx.rows(0, f0).clone_owned(), g.biadjacency);
        assert_eq!(
            ops.b_gpx.columns(0, items).clone_owned(),
            ops.b_gx.columns(1, items).clone_owned()
        );
        for x in cert.function.domain() {
            let ops = g.input_operators(x).unwrap();
            assert!(ops.embedding_residual(&g) < 1e-10);
        }
    }

    #[test]
    fn oracle_factorization() {
        let g = ident_graph();
        assert!(query_oracle_check(&g, &bits("0")).unwrap());
        assert!(query_oracle_check(&g, &bits("1")).unwrap());
        let mut pi = g.input_projector(&bits("1"));
        let last = pi.len() - 1;
        pi[last] = 1.0 - pi[last];
        assert!(!oracle_factorization_matches(&g, &bits("1"), &pi));

        let cert = library::majority3();
        let g = AdversaryGraph::build(&cert.function, &cert.dual, DEFAULT_KAPPA, KERNEL_THRESHOLD)
            .unwrap();
        for x in cert.function.domain() {
            assert!(query_oracle_check(&g, x).unwrap());
        }
    }

    #[test]
    fn constant_function_is_degenerate() {
        let f = BooleanFunction::constant(1, false);
        let d = library::or(1).dual;
        assert!(matches!(
            AdversaryGraph::build(&f, &d, DEFAULT_KAPPA, KERNEL_THRESHOLD),
            Err(Error::Degenerate { .. })
        ));
    }

    #[test]
    fn dump_lists_labels_and_edges() {
        let dump = ident_graph().dump();
        assert_eq!(dump.vertices, vec!["x=0", "0", "(1,0,1)", "(1,1,1)"]);
        assert_eq!(dump.biadjacency.len(), 2);
        assert_eq!(dump.biadjacency[1].col, "(1,1,1)");
    }
}
