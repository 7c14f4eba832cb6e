//! Spectrum of a product of two reflections, witness vectors, and the
//! three spectral gap checks on `|0>`.
//!
//! For projectors `Pi` and `Delta`, `U = (2 Pi - 1)(2 Delta - 1)` splits into
//! invariant blocks of dimension one or two. A two-dimensional block is
//! spanned by a unit `v` in `range(Delta)` and `v_perp` in `range(1 - Delta)`,
//! with `|Pi v|^2 = cos^2(theta / 2)`, and `U` rotates it by `theta`.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::advsdp::DualSolution;
use crate::boolfn::Bits;
use crate::error::{Error, Result};
use crate::graphrefl::{bipartite_adjacency, AdversaryGraph, InputOperators, KERNEL_THRESHOLD};

/// Absolute slack on every measured-vs-bound comparison.
pub const COMPARE_SLACK: f64 = 1e-12;
/// A block with `|(1 - Delta) Pi v|` below this is one-dimensional.
pub const BLOCK_TOLERANCE: f64 = 1e-11;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    /// In `range(Pi) ∩ range(Delta)`; eigenvalue `+1`.
    BothFixed,
    /// In `range(Delta)`, annihilated by `Pi`; eigenvalue `-1`.
    DeltaOnly,
    /// In `range(Pi)`, annihilated by `Delta`; eigenvalue `-1`.
    PiOnly,
    /// Annihilated by both; eigenvalue `+1`.
    Neither,
    /// Two-dimensional rotation by `theta`.
    Rotation,
}

#[derive(Clone, Debug)]
pub struct JordanBlock {
    pub kind: BlockKind,
    /// `theta` in `(0, pi)` for rotations, `0` or `pi` otherwise.
    pub theta: f64,
    pub v: DVector<f64>,
    pub v_perp: Option<DVector<f64>>,
    /// `<v|ref>` and `<v_perp|ref>`; the second is zero for one-dimensional blocks.
    pub overlap: (f64, f64),
}

impl JordanBlock {
    fn one_dim(kind: BlockKind, v: DVector<f64>) -> Self {
        let theta = match kind {
            BlockKind::BothFixed | BlockKind::Neither => 0.0,
            _ => std::f64::consts::PI,
        };
        Self {
            kind,
            theta,
            v,
            v_perp: None,
            overlap: (0.0, 0.0),
        }
    }

    pub fn dim(&self) -> usize {
        if self.v_perp.is_some() {
            2
        } else {
            1
        }
    }
}

/// One eigenvector of `U`: phase in `(-pi, pi]` and `|<beta|ref>|^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseWeight {
    pub phase: f64,
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub struct ReflectionSpectrum {
    pub blocks: Vec<JordanBlock>,
    pub eigen: Vec<PhaseWeight>,
    /// Worst distance of a complement eigenvalue of `Pi` from `{0, 1}`.
    pub classification_residual: f64,
}

fn check_projector(name: &'static str, p: &DMatrix<f64>) -> Result<()> {
    let residual = (p * p - p).amax().max((p - p.transpose()).amax());
    if residual > 1e-8 {
        return Err(Error::NotProjector { name, residual });
    }
    Ok(())
}

/// Orthonormal basis of the eigenvalue-one space of a projector.
fn range_basis(p: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(p.clone());
    let cols: Vec<DVector<f64>> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > 0.5)
        .map(|(k, _)| eig.eigenvectors.column(k).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(p.nrows(), 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Jordan decomposition of `U = (2 Pi - 1)(2 Delta - 1)` with the overlaps
/// of every eigenvector with `reference`.
pub fn jordan_decompose(
    pi: &DMatrix<f64>,
    delta: &DMatrix<f64>,
    reference: &DVector<f64>,
) -> Result<ReflectionSpectrum> {
    let size = pi.nrows();
    if pi.shape() != (size, size) || delta.shape() != (size, size) || reference.len() != size {
        return Err(Error::Dimension {
            module: "spectral",
            message: format!(
                "Pi {:?}, Delta {:?}, reference {}",
                pi.shape(),
                delta.shape(),
                reference.len()
            ),
        });
    }
    check_projector("Pi", pi)?;
    check_projector("Delta", delta)?;
    let identity = DMatrix::<f64>::identity(size, size);
    let delta_perp = &identity - delta;

    let mut blocks = Vec::new();
    let q = range_basis(delta);
    let mut perp_used = DMatrix::zeros(size, size);
    if q.ncols() > 0 {
        let k = q.transpose() * pi * &q;
        let eig = SymmetricEigen::new(k);
        for col in 0..q.ncols() {
            let v = &q * eig.eigenvectors.column(col);
            let pv = pi * &v;
            let out = &delta_perp * &pv;
            // |Pi v|^2 = cos^2(theta/2), |(1 - Delta) Pi v| = cos(theta/2) sin(theta/2).
            let (r, s) = (pv.norm_squared(), out.norm());
            if s <= BLOCK_TOLERANCE {
                let kind = if r >= 0.5 {
                    BlockKind::BothFixed
                } else {
                    BlockKind::DeltaOnly
                };
                blocks.push(JordanBlock::one_dim(kind, v));
            } else {
                let v_perp = out / s;
                perp_used += &v_perp * v_perp.transpose();
                blocks.push(JordanBlock {
                    kind: BlockKind::Rotation,
                    theta: 2.0 * s.atan2(r),
                    v,
                    v_perp: Some(v_perp),
                    overlap: (0.0, 0.0),
                });
            }
        }
    }

    let rest = range_basis(&(&delta_perp - &perp_used));
    let mut classification_residual: f64 = 0.0;
    if rest.ncols() > 0 {
        let k = rest.transpose() * pi * &rest;
        let eig = SymmetricEigen::new(k);
        for col in 0..rest.ncols() {
            let lambda = eig.eigenvalues[col];
            let v = &rest * eig.eigenvectors.column(col);
            let kind = if lambda > 0.5 {
                BlockKind::PiOnly
            } else {
                BlockKind::Neither
            };
            classification_residual = classification_residual.max(lambda.min(1.0 - lambda).abs());
            blocks.push(JordanBlock::one_dim(kind, v));
        }
    }

    let mut eigen = Vec::with_capacity(size);
    for b in &mut blocks {
        let a = b.v.dot(reference);
        match &b.v_perp {
            None => {
                b.overlap = (a, 0.0);
                eigen.push(PhaseWeight {
                    phase: b.theta,
                    weight: a * a,
                });
            }
            Some(vp) => {
                let bb = vp.dot(reference);
                b.overlap = (a, bb);
                let half = 0.5 * (a * a + bb * bb);
                eigen.push(PhaseWeight {
                    phase: b.theta,
                    weight: half,
                });
                eigen.push(PhaseWeight {
                    phase: -b.theta,
                    weight: half,
                });
            }
        }
    }
    Ok(ReflectionSpectrum {
        blocks,
        eigen,
        classification_residual,
    })
}

impl ReflectionSpectrum {
    /// Total dimension covered by the blocks.
    pub fn dimension(&self) -> usize {
        self.blocks.iter().map(JordanBlock::dim).sum()
    }

    /// `U` rebuilt from its blocks.
    pub fn reconstruct(&self, size: usize) -> DMatrix<f64> {
        let mut u = DMatrix::zeros(size, size);
        for b in &self.blocks {
            match &b.v_perp {
                None => u += &b.v * b.v.transpose() * b.theta.cos(),
                Some(vp) => {
                    let (c, s) = (b.theta.cos(), b.theta.sin());
                    u += (&b.v * b.v.transpose() + vp * vp.transpose()) * c;
                    u += (vp * b.v.transpose() - &b.v * vp.transpose()) * s;
                }
            }
        }
        u
    }

    /// Reference mass on eigenvectors with `|phase| <= theta`.
    pub fn window_mass(&self, theta: f64) -> f64 {
        self.eigen
            .iter()
            .filter(|e| e.phase.abs() <= theta)
            .map(|e| e.weight)
            .sum()
    }

    /// Reference mass on the eigenvalue-one space.
    pub fn fixed_mass(&self) -> f64 {
        self.blocks
            .iter()
            .filter(|b| matches!(b.kind, BlockKind::BothFixed | BlockKind::Neither))
            .map(|b| b.overlap.0 * b.overlap.0)
            .sum()
    }

    /// Structural checks of the decomposition against the operators.
    pub fn check(
        &self,
        pi: &DMatrix<f64>,
        delta: &DMatrix<f64>,
        u: &DMatrix<f64>,
        reference: &DVector<f64>,
    ) -> JordanCheck {
        let size = u.nrows();
        let reconstruction = (self.reconstruct(size) - u).amax();
        let mut block_residual: f64 = 0.0;
        let mut pairing_residual: f64 = 0.0;
        for b in &self.blocks {
            let pv = (pi * &b.v).norm_squared();
            let expected = match b.kind {
                BlockKind::PiOnly => 1.0,
                BlockKind::Neither => 0.0,
                _ => (b.theta / 2.0).cos().powi(2),
            };
            block_residual = block_residual.max((pv - expected).abs());
            if let Some(vp) = &b.v_perp {
                let in_delta = (delta * &b.v - &b.v).amax();
                let out_delta = (delta * vp).amax();
                block_residual = block_residual.max(in_delta).max(out_delta);
                // <ref|beta> = e^{-i theta} <ref|beta'> for the pair of
                // eigenvectors (v -+ i v_perp)/sqrt2 swapped by 2 Delta - 1.
                let a = b.v.dot(reference);
                let c = vp.dot(reference);
                let plus = Complex::new(a, -c);
                let minus = Complex::new(a, c);
                let rot = Complex::from_polar(1.0, -b.theta);
                pairing_residual = pairing_residual.max((plus - rot * minus).norm());
            }
        }
        let weight_sum: f64 = self.eigen.iter().map(|e| e.weight).sum();
        JordanCheck {
            reconstruction,
            block_residual,
            pairing_residual,
            weight_error: (weight_sum - reference.norm_squared()).abs(),
            dimension_ok: self.dimension() == size,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JordanCheck {
    pub reconstruction: f64,
    pub block_residual: f64,
    pub pairing_residual: f64,
    pub weight_error: f64,
    pub dimension_ok: bool,
}

impl JordanCheck {
    pub fn passes(&self) -> bool {
        self.dimension_ok
            && self.reconstruction <= 1e-10
            && self.block_residual <= 1e-9
            && self.pairing_residual <= 1e-9
            && self.weight_error <= 1e-9
    }
}

/// A witness vector and its overlap with the reference direction.
#[derive(Clone, Debug)]
pub struct Witness {
    pub x: Bits,
    pub psi: DVector<f64>,
    pub overlap: f64,
    pub bound: f64,
    /// `|B psi|` (positive) or `|B^T psi|` (negative).
    pub residual: f64,
}

impl Witness {
    pub fn holds(&self) -> bool {
        self.residual <= 1e-8 && self.overlap >= self.bound - COMPARE_SLACK
    }
}

fn require_value(g: &AdversaryGraph, x: &Bits, expected: bool) -> Result<()> {
    match g.function.value(x) {
        None => Err(Error::NotInDomain(x.to_string())),
        Some(v) if v != expected => Err(Error::Precondition(format!(
            "f({x}) = {} but the check needs f(x) = {}",
            u8::from(v),
            u8::from(expected)
        ))),
        Some(_) => Ok(()),
    }
}

/// For `f(x) = 1`: `psi = -(sqrt(W)/kappa) |0> + sum_j |j, x_j> (x) v_xj`
/// over the columns `{0} u I` of `B_G(x)`; it lies in the kernel of `B_G(x)`.
pub fn witness_positive(g: &AdversaryGraph, d: &DualSolution, x: &Bits) -> Result<Witness> {
    require_value(g, x, true)?;
    let ops = g.input_operators(x)?;
    let pos = g.function.position(x).expect("checked");
    let items = g.index.items();
    let mut psi = DVector::zeros(1 + items);
    psi[0] = -g.w.sqrt() / g.kappa;
    for j in 0..g.index.n() {
        let v = d.vector(pos, j);
        for (k, &vk) in v.iter().enumerate() {
            psi[1 + g.index.item_offset(j, x.bit(j), k)] = vk;
        }
    }
    let residual = (&ops.b_gx * &psi).norm();
    Ok(Witness {
        x: x.clone(),
        overlap: psi[0] * psi[0] / psi.norm_squared(),
        bound: 1.0 / (1.0 + g.kappa * g.kappa),
        psi,
        residual,
    })
}

/// For `f(x) = 0`: `psi = -|x> + sum_j |j, not x_j> (x) v_xj` over the rows
/// `F_0 u I` of `B_G'(x)`; it lies in the kernel of `B_G'(x)^T`.
pub fn witness_negative(g: &AdversaryGraph, d: &DualSolution, x: &Bits) -> Result<Witness> {
    require_value(g, x, false)?;
    let ops = g.input_operators(x)?;
    let pos = g.function.position(x).expect("checked");
    let row = g
        .zero_positions
        .iter()
        .position(|&p| p == pos)
        .expect("x in F_0");
    let f0 = g.index.num_zeros();
    let mut psi = DVector::zeros(f0 + g.index.items());
    psi[row] = -1.0;
    for j in 0..g.index.n() {
        let v = d.vector(pos, j);
        for (k, &vk) in v.iter().enumerate() {
            psi[f0 + g.index.item_offset(j, !x.bit(j), k)] = vk;
        }
    }
    let residual = (ops.b_gpx.transpose() * &psi).norm();
    let t = padded_t(g);
    let overlap = t.dot(&psi).powi(2) / psi.norm_squared();
    Ok(Witness {
        x: x.clone(),
        psi,
        overlap,
        bound: g.kappa * g.kappa / (g.w * (g.w + 1.0)),
        residual,
    })
}

/// `|t>` over the rows `F_0 u I` of `B_G'(x)`.
pub fn padded_t(g: &AdversaryGraph) -> DVector<f64> {
    let f0 = g.index.num_zeros();
    let mut t = DVector::zeros(f0 + g.index.items());
    t.rows_mut(0, f0).copy_from(&g.t);
    t
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    /// Grid value (`gamma`, `c` or `Theta`).
    pub parameter: f64,
    pub measured: f64,
    pub bound: f64,
    /// `measured >= bound` is required instead of `measured <= bound`.
    #[serde(default)]
    pub lower_bound: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub check: String,
    pub x: Option<String>,
    pub delta: Option<f64>,
    pub rows: Vec<GapRow>,
    pub pass: bool,
}

impl GapReport {
    fn new(check: &str, x: Option<&Bits>, delta: Option<f64>, rows: Vec<GapRow>) -> Self {
        let pass = rows.iter().all(|r| r.pass);
        Self {
            check: check.into(),
            x: x.map(ToString::to_string),
            delta,
            rows,
            pass,
        }
    }

    /// Largest violation margin: `measured - bound` for upper bounds,
    /// `bound - measured` for lower bounds.
    pub fn worst_margin(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| {
                if r.lower_bound {
                    r.bound - r.measured
                } else {
                    r.measured - r.bound
                }
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Re-evaluate upper-bound rows with a different comparison slack.
    pub fn rejudge(&mut self, slack: f64) {
        for r in self.rows.iter_mut().filter(|r| !r.lower_bound) {
            r.pass = r.measured <= r.bound + slack;
        }
        self.pass = self.rows.iter().all(|r| r.pass);
    }
}

fn row(parameter: f64, measured: f64, bound: f64) -> GapRow {
    GapRow {
        parameter,
        measured,
        bound,
        lower_bound: false,
        pass: measured <= bound + COMPARE_SLACK,
    }
}

/// Squared weight of coordinate `index` on eigenvectors of the symmetric
/// `a` with `|rho| <= window`, for every window. Eigenvalues within the
/// kernel threshold of zero count as zero.
fn windowed_masses(a: &DMatrix<f64>, index: usize, windows: &[f64]) -> Vec<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let noise = KERNEL_THRESHOLD * eig.eigenvalues.amax();
    let pairs: Vec<(f64, f64)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(k, &rho)| {
            let abs = if rho.abs() <= noise { 0.0 } else { rho.abs() };
            (abs, eig.eigenvectors[(index, k)].powi(2))
        })
        .collect();
    windows
        .iter()
        .map(|&w| pairs.iter().filter(|(r, _)| *r <= w).map(|(_, m)| m).sum())
        .collect()
}

/// Bipartite gap: for `B_G'` of shape `T x U`, a `psi` over `T` with
/// `B_G'^T psi = 0` and `delta = |<t|psi>|^2 / |psi|^2 > 0`, the graph with
/// biadjacency `(t | B_G')` puts at most `8 gamma^2 / delta` of `|0>` on
/// eigenvalues `|rho| <= gamma`.
pub fn verify_bipartite_gap(
    b_gprime: &DMatrix<f64>,
    t: &DVector<f64>,
    psi: &DVector<f64>,
    gamma_grid: &[f64],
) -> Result<GapReport> {
    let rows_t = b_gprime.nrows();
    if t.len() != rows_t || psi.len() != rows_t {
        return Err(Error::Dimension {
            module: "spectral",
            message: format!(
                "B is {:?}, t has {}, psi has {}",
                b_gprime.shape(),
                t.len(),
                psi.len()
            ),
        });
    }
    let kernel = (b_gprime.transpose() * psi).norm();
    let scale = b_gprime.amax().max(1.0) * psi.norm();
    if kernel > 1e-8 * scale {
        return Err(Error::Precondition(format!("B^T psi has norm {kernel:e}")));
    }
    let delta = t.dot(psi).powi(2) / psi.norm_squared();
    if !(delta > 0.0) {
        return Err(Error::Precondition(
            "delta = |<t|psi>|^2 / |psi|^2 must be positive".into(),
        ));
    }
    let mut b = DMatrix::zeros(rows_t, 1 + b_gprime.ncols());
    b.set_column(0, t);
    b.columns_mut(1, b_gprime.ncols()).copy_from(b_gprime);
    let masses = windowed_masses(&bipartite_adjacency(&b), rows_t, gamma_grid);
    let rows = gamma_grid
        .iter()
        .zip(masses)
        .map(|(&g, m)| row(g, m, 8.0 * g * g / delta))
        .collect();
    Ok(GapReport::new("bipartite-gap", None, Some(delta), rows))
}

/// Effective gap on `G(x)` for `f(x) = 0`: mass of `|0>` on `|rho| <= c / W`
/// is at most `8 (c/W)^2 / delta` with `delta = kappa^2 / (W (W + 1))`, which
/// is `72 (1 + 1/W) c^2` at `kappa = 1/3`.
pub fn verify_effective_gap(g: &AdversaryGraph, x: &Bits, c_grid: &[f64]) -> Result<GapReport> {
    require_value(g, x, false)?;
    let ops = g.input_operators(x)?;
    let w = g.w;
    let delta = g.kappa * g.kappa / (w * (w + 1.0));
    let windows: Vec<f64> = c_grid.iter().map(|c| c / w).collect();
    let masses = windowed_masses(&ops.adjacency_gx(), ops.zero_in_gx(), &windows);
    let rows = c_grid
        .iter()
        .zip(masses)
        .map(|(&c, m)| row(c, m, 8.0 * (c / w).powi(2) / delta))
        .collect();
    Ok(GapReport::new("effective-gap", Some(x), Some(delta), rows))
}

/// Phase gap of `U_x` on `|0>`. For `f(x) = 1` the eigenvalue-one space
/// holds at least `1 / (1 + kappa^2)` of the mass; for `f(x) = 0` the mass
/// on `|theta| <= Theta` is at most `(2 sqrt(6 Theta W) + Theta / 2)^2`.
pub fn verify_phase_gap(
    ops: &InputOperators,
    spectrum: &ReflectionSpectrum,
    theta_grid: &[f64],
    w: f64,
    kappa: f64,
) -> GapReport {
    if ops.value {
        let mass = spectrum.fixed_mass();
        let bound = 1.0 / (1.0 + kappa * kappa);
        let r = GapRow {
            parameter: 0.0,
            measured: mass,
            bound,
            lower_bound: true,
            pass: mass >= bound - 1e-9,
        };
        return GapReport::new("phase-gap", Some(&ops.x), None, vec![r]);
    }
    let rows = theta_grid
        .iter()
        .map(|&th| {
            let bound = (2.0 * (6.0 * th * w).sqrt() + th / 2.0).powi(2);
            row(th, spectrum.window_mass(th), bound)
        })
        .collect();
    GapReport::new("phase-gap", Some(&ops.x), None, rows)
}

/// Jordan decomposition of `U_x` with overlaps against `|0>`.
pub fn input_spectrum(g: &AdversaryGraph, ops: &InputOperators) -> Result<ReflectionSpectrum> {
    jordan_decompose(&ops.pi_matrix(), &g.delta, &g.zero_vector())
}

/// `n` points spaced logarithmically on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// `{0}` followed by 50 log-spaced points on `[1e-4, 1]`.
pub fn default_gamma_grid() -> Vec<f64> {
    let mut g = vec![0.0];
    g.extend(log_grid(1e-4, 1.0, 50));
    g
}

pub fn default_c_grid() -> Vec<f64> {
    linear_grid(0.0, 1.0, 21)
}

pub fn default_theta_grid() -> Vec<f64> {
    log_grid(1e-4, 1.0, 50)
}
