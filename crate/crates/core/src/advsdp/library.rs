//! Closed-form optimal pairs (adversary matrix, witness vectors) for small
//! standard functions. Both sides evaluate to the same value, which pins the
//! SDP optimum without running the solver.

use nalgebra::DMatrix;

use super::DualSolution;
use crate::boolfn::{Bits, BooleanFunction};

#[derive(Clone, Debug)]
pub struct BuiltinCertificate {
    pub name: String,
    pub function: BooleanFunction,
    /// Adversary matrix in domain order.
    pub gamma: DMatrix<f64>,
    pub dual: DualSolution,
    /// The common optimum.
    pub value: f64,
}

fn gamma_from_pairs(
    f: &BooleanFunction,
    pairs: impl IntoIterator<Item = (Bits, Bits)>,
) -> DMatrix<f64> {
    let mut gamma = DMatrix::zeros(f.len(), f.len());
    for (x, y) in pairs {
        let (a, b) = (f.position(&x).unwrap(), f.position(&y).unwrap());
        gamma[(a, b)] = 1.0;
        gamma[(b, a)] = 1.0;
    }
    gamma
}

/// OR_n: `W = sqrt(n)`. Scalar witnesses `n^{-1/4}` on `0^n` and
/// `n^{1/4} / |y|` on the one-positions of each `y` in `F_1`.
pub fn or(n: usize) -> BuiltinCertificate {
    let f = BooleanFunction::or(n);
    let root = (n as f64).powf(0.25);
    let rows = f
        .domain()
        .iter()
        .map(|x| {
            let w = x.weight();
            (0..n)
                .map(|j| {
                    let v = if w == 0 {
                        1.0 / root
                    } else if x.bit(j) {
                        root / w as f64
                    } else {
                        0.0
                    };
                    vec![v]
                })
                .collect()
        })
        .collect();
    let zero = Bits::new(vec![false; n]);
    let gamma = gamma_from_pairs(&f, (0..n).map(|j| (zero.clone(), zero.flip(j))));
    BuiltinCertificate {
        name: format!("OR_{n}"),
        dual: DualSolution::from_vectors(&f, rows).expect("well-formed"),
        function: f,
        gamma,
        value: (n as f64).sqrt(),
    }
}

/// AND_n: the OR_n construction with the roles of 0 and 1 exchanged.
pub fn and(n: usize) -> BuiltinCertificate {
    let f = BooleanFunction::and(n);
    let root = (n as f64).powf(0.25);
    let rows = f
        .domain()
        .iter()
        .map(|x| {
            let zeros = n - x.weight();
            (0..n)
                .map(|j| {
                    let v = if zeros == 0 {
                        1.0 / root
                    } else if !x.bit(j) {
                        root / zeros as f64
                    } else {
                        0.0
                    };
                    vec![v]
                })
                .collect()
        })
        .collect();
    let one = Bits::new(vec![true; n]);
    let gamma = gamma_from_pairs(&f, (0..n).map(|j| (one.clone(), one.flip(j))));
    BuiltinCertificate {
        name: format!("AND_{n}"),
        dual: DualSolution::from_vectors(&f, rows).expect("well-formed"),
        function: f,
        gamma,
        value: (n as f64).sqrt(),
    }
}

/// PARITY_n for `n <= 4`: `W = n`.
///
/// Adversary matrix: the hypercube adjacency. Witnesses: for bit `j`,
/// `<v_xj, v_yj> = h(|(x xor y) without j|)` with `h(0) = 1`, `h(2) = 1/3` and
/// zero otherwise. That kernel is positive semidefinite on `{0,1}^{n-1}` for
/// `n <= 4`; the vectors are its square-root Fourier features, of length
/// `2^{n-1}`.
pub fn parity(n: usize) -> BuiltinCertificate {
    assert!((1..=4).contains(&n), "closed form covers 1 <= n <= 4");
    let f = BooleanFunction::parity(n);
    let rest = n - 1;
    let kernel = |w: usize| match w {
        0 => 1.0,
        2 => 1.0 / 3.0,
        _ => 0.0,
    };
    let sign = |a: usize, b: usize| {
        if (a & b).count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    };
    let spectrum: Vec<f64> = (0..1usize << rest)
        .map(|s| {
            let total: f64 = (0..1usize << rest)
                .map(|z| kernel(z.count_ones() as usize) * sign(s, z))
                .sum();
            (total / (1usize << rest) as f64).max(0.0)
        })
        .collect();
    let rows = f
        .domain()
        .iter()
        .map(|x| {
            (0..n)
                .map(|j| {
                    let others = (0..n)
                        .filter(|&k| k != j)
                        .fold(0usize, |acc, k| (acc << 1) | usize::from(x.bit(k)));
                    spectrum
                        .iter()
                        .enumerate()
                        .map(|(s, &c)| c.sqrt() * sign(s, others))
                        .collect()
                })
                .collect()
        })
        .collect();
    let gamma = gamma_from_pairs(
        &f,
        f.domain()
            .iter()
            .filter(|x| x.weight() % 2 == 0)
            .flat_map(|x| (0..n).map(move |j| (x.clone(), x.flip(j))))
            .collect::<Vec<_>>(),
    );
    BuiltinCertificate {
        name: format!("PARITY_{n}"),
        dual: DualSolution::from_vectors(&f, rows).expect("well-formed"),
        function: f,
        gamma,
        value: n as f64,
    }
}

/// MAJ_3: `W = 2`.
///
/// Adversary matrix: the 6-cycle joining weight-1 and weight-2 strings at
/// distance one. Witnesses for bit `j` live in the plane spanned by two unit
/// vectors `u_k`, `u_l` at 60 degrees (one per other bit): `v_xj = u_k` when
/// the other two bits differ and `x_k = 1`, `0` when `x_j` disagrees with
/// both others, and `(u_k + u_l) / 3` on `000` and `111`.
pub fn majority3() -> BuiltinCertificate {
    let f = BooleanFunction::majority(3);
    let first = [1.0, 0.0];
    let second = [0.5, 3f64.sqrt() / 2.0];
    let rows = f
        .domain()
        .iter()
        .map(|x| {
            (0..3)
                .map(|j| {
                    let others: Vec<usize> = (0..3).filter(|&k| k != j).collect();
                    let (k, l) = (others[0], others[1]);
                    if x.bit(k) != x.bit(l) {
                        if x.bit(k) {
                            first.to_vec()
                        } else {
                            second.to_vec()
                        }
                    } else if x.bit(j) != x.bit(k) {
                        vec![0.0, 0.0]
                    } else {
                        vec![(first[0] + second[0]) / 3.0, (first[1] + second[1]) / 3.0]
                    }
                })
                .collect()
        })
        .collect();
    let pairs: Vec<(Bits, Bits)> = f
        .domain()
        .iter()
        .filter(|x| x.weight() == 1)
        .flat_map(|x| {
            (0..3)
                .filter(|&j| !x.bit(j))
                .map(move |j| (x.clone(), x.flip(j)))
        })
        .collect();
    let gamma = gamma_from_pairs(&f, pairs);
    BuiltinCertificate {
        name: "MAJ_3".into(),
        dual: DualSolution::from_vectors(&f, rows).expect("well-formed"),
        function: f,
        gamma,
        value: 2.0,
    }
}

/// Every closed form in the library.
pub fn all() -> Vec<BuiltinCertificate> {
    let mut out = Vec::new();
    for n in 1..=4 {
        out.push(or(n));
        out.push(and(n));
        out.push(parity(n));
    }
    out.push(majority3());
    out
}

/// Look up a closed form by name (`OR_3`, `PARITY_2`, `MAJ_3`, ...).
pub fn by_name(name: &str) -> Option<BuiltinCertificate> {
    all()
        .into_iter()
        .find(|c| c.name.eq_ignore_ascii_case(name))
}
