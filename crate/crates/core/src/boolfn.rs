//! Partial boolean functions given by explicit truth tables.
//!
//! Bitstrings are big-endian text: the leftmost character is bit `x_1`, so
//! position `j` (1-based) in the text is input index `j`.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

/// Default cap on `n * m` for [`BooleanFunction::compose`].
pub const DEFAULT_COMPOSE_CAP: usize = 12;

/// A fixed-length string of bits, `x_1 x_2 ... x_n`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bits(Vec<bool>);

impl Bits {
    pub fn new(bits: Vec<bool>) -> Self {
        Bits(bits)
    }

    /// The `len`-bit string whose binary value (x_1 most significant) is `value`.
    pub fn from_index(value: usize, len: usize) -> Self {
        Bits(
            (0..len)
                .map(|j| (value >> (len - 1 - j)) & 1 == 1)
                .collect(),
        )
    }

    /// All `len`-bit strings in increasing binary order.
    pub fn all(len: usize) -> impl Iterator<Item = Bits> {
        (0..1usize << len).map(move |v| Bits::from_index(v, len))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Bit at 0-based position `j` (that is, `x_{j+1}`).
    pub fn bit(&self, j: usize) -> bool {
        self.0[j]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// 0-based positions where `self` and `other` differ.
    pub fn differing<'a>(&'a self, other: &'a Bits) -> impl Iterator<Item = usize> + 'a {
        self.0
            .iter()
            .zip(&other.0)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(j, _)| j)
    }

    pub fn flip(&self, j: usize) -> Bits {
        let mut bits = self.0.clone();
        bits[j] = !bits[j];
        Bits(bits)
    }

    pub fn slice(&self, start: usize, len: usize) -> Bits {
        Bits(self.0[start..start + len].to_vec())
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits({self})")
    }
}

impl FromStr for Bits {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse {
                    module: "boolfn",
                    message: format!("invalid character {other:?} in bitstring {s:?}"),
                }),
            })
            .collect::<Result<Vec<_>>>()
            .map(Bits)
    }
}

/// A partial function `D -> {0,1}` with `D` a subset of `{0,1}^n`.
///
/// Domain order is significant: it fixes the order of `F_0` and `F_1` and of
/// every matrix index derived from them downstream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BooleanFunction {
    n: usize,
    domain: Vec<Bits>,
    values: Vec<bool>,
    index: HashMap<Bits, usize>,
}

#[derive(Serialize, Deserialize)]
struct TruthTableFile {
    n: usize,
    entries: Vec<TruthTableEntry>,
}

#[derive(Serialize, Deserialize)]
struct TruthTableEntry {
    x: String,
    f: i64,
}

impl BooleanFunction {
    /// Build from `(x, f(x))` pairs, validating lengths and uniqueness.
    pub fn new(n: usize, entries: impl IntoIterator<Item = (Bits, bool)>) -> Result<Self> {
        let mut domain = Vec::new();
        let mut values = Vec::new();
        let mut index = HashMap::new();
        for (x, v) in entries {
            if x.len() != n {
                return Err(Error::Validation(format!(
                    "entry {x} has {} bits, expected {n}",
                    x.len()
                )));
            }
            if index.contains_key(&x) {
                return Err(Error::Validation(format!("duplicate entry {x}")));
            }
            index.insert(x.clone(), domain.len());
            domain.push(x);
            values.push(v);
        }
        Ok(Self {
            n,
            domain,
            values,
            index,
        })
    }

    /// The total function on `{0,1}^n` given by `rule`.
    pub fn from_fn(n: usize, rule: impl Fn(&Bits) -> bool) -> Self {
        let entries = Bits::all(n).map(|x| {
            let v = rule(&x);
            (x, v)
        });
        Self::new(n, entries).expect("enumerated cube has no duplicates")
    }

    pub fn identity() -> Self {
        Self::from_fn(1, |x| x.bit(0))
    }

    pub fn or(n: usize) -> Self {
        Self::from_fn(n, |x| x.weight() > 0)
    }

    pub fn and(n: usize) -> Self {
        Self::from_fn(n, |x| x.weight() == n)
    }

    pub fn parity(n: usize) -> Self {
        Self::from_fn(n, |x| x.weight() % 2 == 1)
    }

    pub fn majority(n: usize) -> Self {
        Self::from_fn(n, |x| 2 * x.weight() > n)
    }

    pub fn constant(n: usize, value: bool) -> Self {
        Self::from_fn(n, |_| value)
    }

    /// Standard functions by name: `IDENT_1`, `OR_n`, `AND_n`, `PARITY_n`,
    /// `MAJ_n` (odd `n`), with `1 <= n <= 16`.
    pub fn builtin(name: &str) -> Result<Self> {
        let upper = name.to_ascii_uppercase();
        if upper == "IDENT_1" || upper == "IDENT" {
            return Ok(Self::identity());
        }
        let (family, n) = upper
            .rsplit_once('_')
            .and_then(|(fam, n)| n.parse::<usize>().ok().map(|n| (fam.to_string(), n)))
            .ok_or_else(|| Error::Validation(format!("unknown builtin function {name:?}")))?;
        if !(1..=16).contains(&n) {
            return Err(Error::Validation(format!(
                "builtin arity must be in 1..=16, got {n}"
            )));
        }
        match family.as_str() {
            "OR" => Ok(Self::or(n)),
            "AND" => Ok(Self::and(n)),
            "PARITY" => Ok(Self::parity(n)),
            "MAJ" if n % 2 == 1 => Ok(Self::majority(n)),
            _ => Err(Error::Validation(format!(
                "unknown builtin function {name:?}"
            ))),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn domain(&self) -> &[Bits] {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.domain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domain.is_empty()
    }

    /// `f(x)`, or `None` outside the domain.
    pub fn value(&self, x: &Bits) -> Option<bool> {
        self.index.get(x).map(|&i| self.values[i])
    }

    /// Position of `x` in domain order.
    pub fn position(&self, x: &Bits) -> Option<usize> {
        self.index.get(x).copied()
    }

    pub fn value_at(&self, position: usize) -> bool {
        self.values[position]
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Bits, bool)> {
        self.domain.iter().zip(self.values.iter().copied())
    }

    pub fn is_total(&self) -> bool {
        self.n < usize::BITS as usize && self.domain.len() == 1usize << self.n
    }

    /// `(F_0, F_1)` in domain order.
    pub fn partition(&self) -> (Vec<Bits>, Vec<Bits>) {
        let mut zeros = Vec::new();
        let mut ones = Vec::new();
        for (x, v) in self.entries() {
            if v {
                ones.push(x.clone());
            } else {
                zeros.push(x.clone());
            }
        }
        (zeros, ones)
    }

    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|&v| v) || self.values.iter().all(|&v| !v)
    }

    /// Block composition: bit block `i` of the `n*m`-bit input is fed to `g`
    /// and the `n` results to `self`.
    pub fn compose(&self, g: &BooleanFunction, cap: usize) -> Result<BooleanFunction> {
        let (n, m) = (self.n, g.n);
        let total = n
            .checked_mul(m)
            .ok_or_else(|| Error::Compose("n*m overflows".into()))?;
        if total > cap {
            return Err(Error::Compose(format!(
                "composed input length {total} exceeds cap {cap}"
            )));
        }
        if !self.is_total() || !g.is_total() {
            return Err(Error::Compose(
                "composition requires total functions on both sides".into(),
            ));
        }
        Ok(Self::from_fn(total, |x| {
            let inner: Vec<bool> = (0..n)
                .map(|i| g.value(&x.slice(i * m, m)).expect("g is total"))
                .collect();
            self.value(&Bits::new(inner)).expect("f is total")
        }))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: TruthTableFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            module: "boolfn",
            message: e.to_string(),
        })?;
        let entries = file
            .entries
            .into_iter()
            .map(|e| {
                let x: Bits = e.x.parse()?;
                let v = match e.f {
                    0 => false,
                    1 => true,
                    other => {
                        return Err(Error::Validation(format!(
                            "value {other} of entry {x} is not 0 or 1"
                        )))
                    }
                };
                Ok((x, v))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(file.n, entries)
    }

    pub fn to_json_string(&self) -> String {
        io::to_json_string(&self.to_file())
    }

    fn to_file(&self) -> TruthTableFile {
        TruthTableFile {
            n: self.n,
            entries: self
                .entries()
                .map(|(x, v)| TruthTableEntry {
                    x: x.to_string(),
                    f: i64::from(v),
                })
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, &self.to_file())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bits(s: &str) -> Bits {
        s.parse().unwrap()
    }

    #[test]
    fn loads_identity_and_or() {
        let ident = BooleanFunction::from_json_str(
            r#"{"n":1,"entries":[{"x":"0","f":0},{"x":"1","f":1}]}"#,
        )
        .unwrap();
        assert_eq!(ident, BooleanFunction::identity());
        assert_eq!(ident.partition(), (vec![bits("0")], vec![bits("1")]));

        let or2 = BooleanFunction::from_json_str(
            r#"{"n":2,"entries":[{"x":"00","f":0},{"x":"01","f":1},{"x":"10","f":1},{"x":"11","f":1}]}"#,
        )
        .unwrap();
        assert_eq!(or2, BooleanFunction::or(2));
        let (f0, f1) = or2.partition();
        assert_eq!(f0, vec![bits("00")]);
        assert_eq!(f1, vec![bits("01"), bits("10"), bits("11")]);
    }

    #[test]
    fn rejects_malformed_tables() {
        let dup = BooleanFunction::from_json_str(
            r#"{"n":2,"entries":[{"x":"01","f":1},{"x":"01","f":1}]}"#,
        );
        assert!(matches!(dup, Err(Error::Validation(_))), "{dup:?}");
        let short = BooleanFunction::from_json_str(r#"{"n":2,"entries":[{"x":"0","f":1}]}"#);
        assert!(matches!(short, Err(Error::Validation(_))));
        let bad_value = BooleanFunction::from_json_str(r#"{"n":1,"entries":[{"x":"0","f":2}]}"#);
        assert!(matches!(bad_value, Err(Error::Validation(_))));
        let bad_char = BooleanFunction::from_json_str(r#"{"n":1,"entries":[{"x":"a","f":0}]}"#);
        assert!(matches!(bad_char, Err(Error::Parse { .. })));
        let not_json = BooleanFunction::from_json_str("{");
        assert!(matches!(not_json, Err(Error::Parse { .. })));
    }

    #[test]
    fn partial_domain_order_is_preserved() {
        let f = BooleanFunction::from_json_str(
            r#"{"n":3,"entries":[{"x":"110","f":1},{"x":"000","f":0},{"x":"011","f":0}]}"#,
        )
        .unwrap();
        assert!(!f.is_total());
        let (f0, f1) = f.partition();
        assert_eq!(f0, vec![bits("000"), bits("011")]);
        assert_eq!(f1, vec![bits("110")]);
    }

    #[test]
    fn builtins_by_name() {
        assert_eq!(
            BooleanFunction::builtin("IDENT_1").unwrap(),
            BooleanFunction::identity()
        );
        assert_eq!(
            BooleanFunction::builtin("or_3").unwrap(),
            BooleanFunction::or(3)
        );
        assert_eq!(
            BooleanFunction::builtin("MAJ_3").unwrap(),
            BooleanFunction::majority(3)
        );
        for bad in ["MAJ_2", "XOR_2", "OR_0", "OR_x", "OR"] {
            assert!(
                matches!(BooleanFunction::builtin(bad), Err(Error::Validation(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn constant_function_partitions_to_one_side() {
        let f = BooleanFunction::constant(1, true);
        let (f0, f1) = f.partition();
        assert!(f0.is_empty());
        assert_eq!(f1, vec![bits("0"), bits("1")]);
        assert!(f.is_constant());
    }

    #[test]
    fn composition_examples() {
        let or2 = BooleanFunction::or(2);
        assert_eq!(or2.compose(&or2, 12).unwrap(), BooleanFunction::or(4));
        let g = BooleanFunction::majority(3);
        assert_eq!(BooleanFunction::identity().compose(&g, 12).unwrap(), g);

        // Brute force over all 16 inputs: parity of the two block parities.
        let p = BooleanFunction::parity(2)
            .compose(&BooleanFunction::parity(2), 12)
            .unwrap();
        for v in 0..16usize {
            let x = Bits::from_index(v, 4);
            let b1 = x.bit(0) ^ x.bit(1);
            let b2 = x.bit(2) ^ x.bit(3);
            assert_eq!(p.value(&x), Some(b1 ^ b2));
        }
        assert_eq!(p, BooleanFunction::parity(4));
    }

    #[test]
    fn composition_guards() {
        let or3 = BooleanFunction::or(3);
        assert!(matches!(or3.compose(&or3, 8), Err(Error::Compose(_))));
        let partial = BooleanFunction::new(1, [(bits("0"), false)]).unwrap();
        assert!(matches!(partial.compose(&or3, 12), Err(Error::Compose(_))));
        assert!(matches!(or3.compose(&partial, 12), Err(Error::Compose(_))));
    }

    fn arb_total(max_n: usize) -> impl Strategy<Value = BooleanFunction> {
        (1..=max_n).prop_flat_map(|n| {
            prop::collection::vec(any::<bool>(), 1 << n).prop_map(move |vals| {
                BooleanFunction::from_fn(n, |x| {
                    let idx = x
                        .as_slice()
                        .iter()
                        .fold(0usize, |acc, &b| (acc << 1) | usize::from(b));
                    vals[idx]
                })
            })
        })
    }

    proptest! {
        #[test]
        fn compose_matches_two_level_evaluation(f in arb_total(3), g in arb_total(4)) {
            prop_assume!(f.n() * g.n() <= 12);
            let h = f.compose(&g, 12).unwrap();
            let m = g.n();
            for (x, v) in h.entries() {
                let inner: Vec<bool> = (0..f.n())
                    .map(|i| g.value(&x.slice(i * m, m)).unwrap())
                    .collect();
                prop_assert_eq!(f.value(&Bits::new(inner)), Some(v));
            }
        }

        #[test]
        fn json_round_trip(f in arb_total(4)) {
            let back = BooleanFunction::from_json_str(&f.to_json_string()).unwrap();
            prop_assert_eq!(back, f);
        }
    }
}
