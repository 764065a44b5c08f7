//! Coxeter systems given by arbitrary Coxeter matrices.
//!
//! Group elements are stored as ShortLex-minimal reduced words (generator
//! order = index order). Descents are decided in the geometric
//! representation: `ℓ(xs) < ℓ(x)` iff `x(α_s)` is a negative root. The
//! representation is defined over `Q(2cos(π/N))` and every sign is certified
//! exactly, so the same code path serves finite, affine and hyperbolic
//! groups, including `m = ∞`.
//!
//! Heavy computations work on an [`ElementTable`]: all elements up to some
//! length, indexed in (length, ShortLex) order, with left/right
//! multiplication by generators and Bruhat ideals precomputed.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{NumberField, Scalar};

/// Hard cap on the number of elements any enumeration may produce.
pub const ELEMENT_CAP: usize = 250_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CoxeterError {
    #[error("invalid Coxeter matrix: {0}")]
    BadMatrix(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("generator index {index} out of range for rank {rank}")]
    IndexOutOfRange { index: usize, rank: usize },
    #[error("cannot parse word `{0}`")]
    BadWord(String),
    #[error("element cap of {0} exceeded; the group is probably infinite, pass a length bound")]
    CapExceeded(usize),
    #[error("the matrix has an infinite entry; enumeration needs a length bound")]
    NeedsBound,
    #[error("element {0} lies outside the element table")]
    OutsideTable(String),
}

/// Symmetric matrix of orders `m_st`; `None` encodes `∞`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CoxeterMatrix {
    m: Vec<Vec<Option<u32>>>,
}

impl CoxeterMatrix {
    pub fn new(m: Vec<Vec<Option<u32>>>) -> Result<CoxeterMatrix, CoxeterError> {
        let n = m.len();
        if n == 0 {
            return Err(CoxeterError::BadMatrix("rank must be positive".into()));
        }
        if n > 250 {
            return Err(CoxeterError::BadMatrix("rank too large".into()));
        }
        for (i, row) in m.iter().enumerate() {
            if row.len() != n {
                return Err(CoxeterError::BadMatrix(format!("row {i} has length {}, expected {n}", row.len())));
            }
            if row[i] != Some(1) {
                return Err(CoxeterError::BadMatrix(format!("diagonal entry ({i},{i}) must be 1")));
            }
            for (j, &e) in row.iter().enumerate() {
                if i != j {
                    if e != m[j][i] {
                        return Err(CoxeterError::BadMatrix(format!("not symmetric at ({i},{j})")));
                    }
                    if matches!(e, Some(k) if k < 2) {
                        return Err(CoxeterError::BadMatrix(format!("off-diagonal entry ({i},{j}) must be >= 2")));
                    }
                }
            }
        }
        Ok(CoxeterMatrix { m })
    }

    /// Convenience constructor; `0` stands for `∞`.
    pub fn from_ints(rows: &[&[u32]]) -> Result<CoxeterMatrix, CoxeterError> {
        CoxeterMatrix::new(rows.iter().map(|r| r.iter().map(|&e| (e != 0).then_some(e)).collect()).collect())
    }

    /// Linear diagram with the given bond labels between consecutive nodes.
    pub fn linear(bonds: &[u32]) -> CoxeterMatrix {
        let n = bonds.len() + 1;
        let mut m = vec![vec![Some(2); n]; n];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = Some(1);
        }
        for (i, &b) in bonds.iter().enumerate() {
            m[i][i + 1] = Some(b);
            m[i + 1][i] = Some(b);
        }
        CoxeterMatrix::new(m).expect("linear diagrams are valid")
    }

    /// Named presets: `A<n>`, `B<n>`, `H3`, `H4`, `I2:<m>` (also `I2(<m>)`,
    /// `I2:inf`), and `A1~` for the infinite dihedral group.
    pub fn preset(name: &str) -> Result<CoxeterMatrix, CoxeterError> {
        let unknown = || CoxeterError::UnknownPreset(name.to_string());
        let s = name.trim();
        if let Some(rest) = s.strip_prefix("I2") {
            let m = rest.trim_start_matches([':', '(']).trim_end_matches(')');
            let m = match m {
                "inf" | "∞" => 0,
                _ => m.parse::<u32>().map_err(|_| unknown())?,
            };
            if m != 0 && m < 2 {
                return Err(unknown());
            }
            return CoxeterMatrix::from_ints(&[&[1, m], &[m, 1]]);
        }
        if s == "A1~" {
            return CoxeterMatrix::from_ints(&[&[1, 0], &[0, 1]]);
        }
        let (kind, n) = s.split_at(1);
        let n: usize = n.parse().map_err(|_| unknown())?;
        match (kind, n) {
            ("A", 1..) => Ok(CoxeterMatrix::linear(&vec![3; n - 1])),
            ("B", 2..) => {
                let mut bonds = vec![3; n - 1];
                bonds[0] = 4;
                Ok(CoxeterMatrix::linear(&bonds))
            }
            ("H", 3) => Ok(CoxeterMatrix::linear(&[5, 3])),
            ("H", 4) => Ok(CoxeterMatrix::linear(&[5, 3, 3])),
            _ => Err(unknown()),
        }
    }

    pub fn rank(&self) -> usize {
        self.m.len()
    }

    /// `m_st`, `None` for `∞`.
    pub fn get(&self, s: usize, t: usize) -> Option<u32> {
        self.m[s][t]
    }

    pub fn has_infinite_entry(&self) -> bool {
        self.m.iter().flatten().any(Option::is_none)
    }

    /// Conductor `N` of the field `Q(2cos(π/N))` holding every `2cos(π/m_st)`:
    /// the lcm of all finite entries other than 2 and 3 (and 1 if none).
    pub fn conductor(&self) -> u32 {
        let mut n = 1u64;
        for &e in self.m.iter().flatten().flatten() {
            if e > 3 {
                n = num_integer::lcm(n, e as u64);
            }
        }
        u32::try_from(n).expect("conductor overflow")
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<Vec<serde_json::Value>> = self
            .m
            .iter()
            .map(|r| r.iter().map(|e| e.map_or(serde_json::Value::from("inf"), serde_json::Value::from)).collect())
            .collect();
        serde_json::json!({"version": 1, "rank": self.rank(), "m": rows})
    }

    /// Accepts `{"version":1,"rank":n,"m":[[...]]}` where `∞` may be written
    /// as `"inf"`, `null` or `0`.
    pub fn from_json(v: &serde_json::Value) -> Result<CoxeterMatrix, CoxeterError> {
        let bad = |msg: &str| CoxeterError::BadMatrix(msg.to_string());
        if let Some(ver) = v.get("version") {
            if ver.as_u64() != Some(1) {
                return Err(bad("unsupported version"));
            }
        }
        let rows = v.get("m").and_then(|m| m.as_array()).ok_or_else(|| bad("missing `m`"))?;
        let mut m = Vec::new();
        for row in rows {
            let row = row.as_array().ok_or_else(|| bad("rows must be arrays"))?;
            let mut out = Vec::new();
            for e in row {
                out.push(match e {
                    serde_json::Value::Null => None,
                    serde_json::Value::String(s) if s == "inf" || s == "∞" => None,
                    serde_json::Value::Number(n) => match n.as_u64() {
                        Some(0) => None,
                        Some(k) => Some(u32::try_from(k).map_err(|_| bad("entry too large"))?),
                        None => return Err(bad("entries must be nonnegative integers")),
                    },
                    _ => return Err(bad("bad entry")),
                });
            }
            m.push(out);
        }
        let cm = CoxeterMatrix::new(m)?;
        if let Some(r) = v.get("rank") {
            if r.as_u64() != Some(cm.rank() as u64) {
                return Err(bad("`rank` disagrees with `m`"));
            }
        }
        Ok(cm)
    }
}

impl Serialize for CoxeterMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for CoxeterMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<CoxeterMatrix, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        CoxeterMatrix::from_json(&v).map_err(serde::de::Error::custom)
    }
}

/// A group element as its ShortLex normal form. Ordered by length, then
/// lexicographically, which is the order used by every enumeration.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct CoxElt {
    word: Vec<u8>,
}

impl CoxElt {
    pub fn identity() -> CoxElt {
        CoxElt::default()
    }

    pub fn word(&self) -> &[u8] {
        &self.word
    }

    pub fn length(&self) -> usize {
        self.word.len()
    }

    pub fn is_identity(&self) -> bool {
        self.word.is_empty()
    }

    /// Text form: 1-based generator digits, `e` for the identity. Ranks
    /// above 9 use comma-separated indices.
    pub fn to_text(&self, rank: usize) -> String {
        if self.word.is_empty() {
            return "e".into();
        }
        if rank <= 9 {
            self.word.iter().map(|&s| char::from(b'1' + s)).collect()
        } else {
            self.word.iter().map(|&s| (s as usize + 1).to_string()).collect::<Vec<_>>().join(",")
        }
    }
}

impl Ord for CoxElt {
    fn cmp(&self, other: &CoxElt) -> Ordering {
        self.word.len().cmp(&other.word.len()).then_with(|| self.word.cmp(&other.word))
    }
}

impl PartialOrd for CoxElt {
    fn partial_cmp(&self, other: &CoxElt) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for CoxElt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text(0))
    }
}

impl fmt::Debug for CoxElt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CoxElt({self})")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

/// A Coxeter system with its geometric representation.
#[derive(Clone, Debug)]
pub struct CoxeterSystem {
    matrix: CoxeterMatrix,
    field: &'static NumberField,
    /// `cartan[s][t] = -2cos(π/m_st)`, so `s(α_t) = α_t - cartan[s][t] α_s`.
    cartan: Vec<Vec<Scalar>>,
}

impl PartialEq for CoxeterSystem {
    fn eq(&self, other: &CoxeterSystem) -> bool {
        self.matrix == other.matrix
    }
}
impl Eq for CoxeterSystem {}

impl CoxeterSystem {
    pub fn new(matrix: CoxeterMatrix) -> CoxeterSystem {
        let field = NumberField::get(matrix.conductor().max(3));
        let n = matrix.rank();
        let cartan = (0..n)
            .map(|s| {
                (0..n)
                    .map(|t| match matrix.get(s, t) {
                        None => field.int(-2),
                        Some(m) => -field.two_cos_pi_over(m),
                    })
                    .collect()
            })
            .collect();
        CoxeterSystem { matrix, field, cartan }
    }

    pub fn preset(name: &str) -> Result<CoxeterSystem, CoxeterError> {
        Ok(CoxeterSystem::new(CoxeterMatrix::preset(name)?))
    }

    pub fn matrix(&self) -> &CoxeterMatrix {
        &self.matrix
    }

    pub fn rank(&self) -> usize {
        self.matrix.rank()
    }

    pub fn field(&self) -> &'static NumberField {
        self.field
    }

    /// `-2cos(π/m_st)`.
    pub fn cartan(&self, s: usize, t: usize) -> &Scalar {
        &self.cartan[s][t]
    }

    pub fn generator(&self, s: usize) -> CoxElt {
        assert!(s < self.rank());
        CoxElt { word: vec![s as u8] }
    }

    pub fn generators(&self) -> Vec<CoxElt> {
        (0..self.rank()).map(|s| self.generator(s)).collect()
    }

    /// Validate generator indices of a word.
    pub fn check(&self, word: &[u8]) -> Result<(), CoxeterError> {
        match word.iter().find(|&&s| s as usize >= self.rank()) {
            Some(&s) => Err(CoxeterError::IndexOutOfRange { index: s as usize, rank: self.rank() }),
            None => Ok(()),
        }
    }

    /// Apply `word` (rightmost letter first) to a vector in root coordinates.
    fn act(&self, word: &[u8], v: &mut [Scalar]) {
        for &s in word.iter().rev() {
            let s = s as usize;
            // s(v) = v - <v, α_s^∨> α_s with <α_t, α_s^∨> = cartan[s][t]
            let mut pair = self.field.zero();
            for (t, c) in v.iter().enumerate() {
                if !c.is_zero() {
                    pair = &pair + &(c * &self.cartan[s][t]);
                }
            }
            if !pair.is_zero() {
                v[s] = &v[s] - &pair;
            }
        }
    }

    fn root_image(&self, word: &[u8], s: usize) -> Vec<Scalar> {
        let mut v = vec![self.field.zero(); self.rank()];
        v[s] = self.field.one();
        self.act(word, &mut v);
        v
    }

    fn is_negative_root(v: &[Scalar]) -> bool {
        v.iter().find(|c| !c.is_zero()).is_some_and(|c| c.signum() < 0)
    }

    /// `ℓ(ws) < ℓ(w)` for the element represented by any word `w`.
    pub fn word_has_right_descent(&self, word: &[u8], s: usize) -> bool {
        CoxeterSystem::is_negative_root(&self.root_image(word, s))
    }

    /// `ℓ(sw) < ℓ(w)`.
    pub fn word_has_left_descent(&self, word: &[u8], s: usize) -> bool {
        let rev: Vec<u8> = word.iter().rev().copied().collect();
        self.word_has_right_descent(&rev, s)
    }

    /// ShortLex-minimal reduced word for the element represented by `word`:
    /// repeatedly strip the smallest left descent.
    pub fn normal_form(&self, word: &[u8]) -> Result<CoxElt, CoxeterError> {
        self.check(word)?;
        let mut rest = word.to_vec();
        let mut out = Vec::new();
        'peel: loop {
            for s in 0..self.rank() {
                if self.word_has_left_descent(&rest, s) {
                    out.push(s as u8);
                    rest.insert(0, s as u8);
                    continue 'peel;
                }
            }
            break;
        }
        Ok(CoxElt { word: out })
    }

    /// Parse a word in text form (`e`, `121`, or `1,2,1`) and normalize it.
    pub fn parse(&self, text: &str) -> Result<CoxElt, CoxeterError> {
        let word = parse_word(text)?;
        self.normal_form(&word)
    }

    pub fn multiply(&self, x: &CoxElt, y: &CoxElt) -> CoxElt {
        let mut w = x.word.clone();
        w.extend_from_slice(&y.word);
        self.normal_form(&w).expect("elements of this system")
    }

    pub fn inverse(&self, x: &CoxElt) -> CoxElt {
        let w: Vec<u8> = x.word.iter().rev().copied().collect();
        self.normal_form(&w).expect("elements of this system")
    }

    pub fn has_descent(&self, x: &CoxElt, s: usize, side: Side) -> bool {
        match side {
            Side::Right => self.word_has_right_descent(&x.word, s),
            Side::Left => self.word_has_left_descent(&x.word, s),
        }
    }

    pub fn descents(&self, x: &CoxElt, side: Side) -> Vec<usize> {
        (0..self.rank()).filter(|&s| self.has_descent(x, s, side)).collect()
    }

    /// Bruhat order via the lifting property: for a right descent `s` of `y`,
    /// `x ≤ y` iff `min(x, xs) ≤ ys`.
    pub fn bruhat_leq(&self, x: &CoxElt, y: &CoxElt) -> bool {
        if x.length() > y.length() {
            return false;
        }
        if x.length() == y.length() {
            return x == y;
        }
        let s = *y.word.last().unwrap() as usize;
        let ys = CoxElt { word: y.word[..y.word.len() - 1].to_vec() };
        let x = if self.has_descent(x, s, Side::Right) {
            self.multiply(x, &self.generator(s))
        } else {
            x.clone()
        };
        self.bruhat_leq(&x, &ys)
    }

    /// Faithful key: the image of the fundamental coweight sum under `x`,
    /// i.e. the values `ρ^∨(x^{-1} α_t)`.
    fn key(&self, word: &[u8]) -> Vec<Scalar> {
        let rev: Vec<u8> = word.iter().rev().copied().collect();
        (0..self.rank())
            .map(|t| self.root_image(&rev, t).iter().fold(self.field.zero(), |a, c| &a + c))
            .collect()
    }

    /// All elements of length at most `max_length` (the whole group when
    /// `None`), in (length, ShortLex) order.
    pub fn enumerate(&self, max_length: Option<usize>) -> Result<Vec<CoxElt>, CoxeterError> {
        Ok(self.element_table(max_length)?.elems)
    }

    /// The longest element, for finite groups.
    pub fn longest_element(&self) -> Result<CoxElt, CoxeterError> {
        let t = self.element_table(None)?;
        Ok(t.elems.last().unwrap().clone())
    }

    /// Build the element table by breadth-first closure. Processing each
    /// layer in ShortLex order and generators in increasing order means the
    /// first word found for a new element is its ShortLex normal form.
    pub fn element_table(&self, max_length: Option<usize>) -> Result<ElementTable, CoxeterError> {
        if max_length.is_none() && self.matrix.has_infinite_entry() {
            return Err(CoxeterError::NeedsBound);
        }
        let n = self.rank();
        let mut elems = vec![CoxElt::identity()];
        let mut keys: HashMap<Vec<Scalar>, u32> = HashMap::new();
        keys.insert(self.key(&[]), 0);
        let mut rmul: Vec<Vec<Option<u32>>> = vec![vec![None; n]];
        let mut layer_start = 0;
        let mut length = 0;
        let mut complete = true;
        loop {
            let layer_end = elems.len();
            if layer_start == layer_end {
                break;
            }
            for i in layer_start..layer_end {
                for s in 0..n {
                    if rmul[i][s].is_some() {
                        continue;
                    }
                    if self.word_has_right_descent(&elems[i].word, s) {
                        let mut w = elems[i].word.clone();
                        w.push(s as u8);
                        let j = keys[&self.key(&w)];
                        rmul[i][s] = Some(j);
                        rmul[j as usize][s] = Some(i as u32);
                        continue;
                    }
                    if max_length.is_some_and(|m| length >= m) {
                        complete = false;
                        continue;
                    }
                    let mut w = elems[i].word.clone();
                    w.push(s as u8);
                    let key = self.key(&w);
                    let j = match keys.get(&key) {
                        Some(&j) => j,
                        None => {
                            if elems.len() >= ELEMENT_CAP {
                                return Err(CoxeterError::CapExceeded(ELEMENT_CAP));
                            }
                            let j = elems.len() as u32;
                            keys.insert(key, j);
                            elems.push(CoxElt { word: w });
                            rmul.push(vec![None; n]);
                            j
                        }
                    };
                    rmul[i][s] = Some(j);
                    rmul[j as usize][s] = Some(i as u32);
                }
            }
            layer_start = layer_end;
            length += 1;
        }
        ElementTable::build(self.clone(), elems, rmul, complete)
    }
}

/// Parse `e`, empty, `121` or `1,2,1` into 0-based generator indices.
pub fn parse_word(text: &str) -> Result<Vec<u8>, CoxeterError> {
    let t = text.trim();
    let bad = || CoxeterError::BadWord(text.to_string());
    if t.is_empty() || t == "e" {
        return Ok(Vec::new());
    }
    let parts: Vec<&str> = if t.contains(',') || t.contains(' ') {
        t.split([',', ' ']).filter(|p| !p.is_empty()).collect()
    } else {
        t.split("").filter(|p| !p.is_empty()).collect()
    };
    parts
        .into_iter()
        .map(|p| match p.parse::<usize>() {
            Ok(k) if (1..=255).contains(&k) => Ok((k - 1) as u8),
            _ => Err(bad()),
        })
        .collect()
}

/// All elements up to a length bound with indexed multiplication data.
///
/// Indices follow (length, ShortLex) order, so index 0 is the identity and
/// `i < j` whenever `ℓ(x_i) < ℓ(x_j)`.
#[derive(Debug)]
pub struct ElementTable {
    system: CoxeterSystem,
    elems: Vec<CoxElt>,
    index: HashMap<Vec<u8>, u32>,
    lengths: Vec<u16>,
    rmul: Vec<Vec<Option<u32>>>,
    lmul: Vec<Vec<Option<u32>>>,
    inverse: Vec<u32>,
    complete: bool,
    bruhat: OnceLock<Vec<BitSet>>,
}

impl ElementTable {
    fn build(
        system: CoxeterSystem,
        elems: Vec<CoxElt>,
        rmul: Vec<Vec<Option<u32>>>,
        complete: bool,
    ) -> Result<ElementTable, CoxeterError> {
        let index: HashMap<Vec<u8>, u32> = elems.iter().enumerate().map(|(i, e)| (e.word.clone(), i as u32)).collect();
        let lengths = elems.iter().map(|e| e.length() as u16).collect();
        // inverse by walking reversed words through rmul
        let walk = |word: &mut dyn Iterator<Item = u8>| -> Option<u32> {
            let mut cur = 0u32;
            for s in word {
                cur = rmul[cur as usize][s as usize]?;
            }
            Some(cur)
        };
        let inverse: Vec<u32> = elems
            .iter()
            .map(|e| walk(&mut e.word.iter().rev().copied()).expect("inverses have equal length"))
            .collect();
        let n = system.rank();
        let lmul = (0..elems.len())
            .map(|i| {
                (0..n)
                    .map(|s| {
                        // s·x = (x^{-1}·s)^{-1}
                        rmul[inverse[i] as usize][s].map(|j| inverse[j as usize])
                    })
                    .collect()
            })
            .collect();
        Ok(ElementTable { system, elems, index, lengths, rmul, lmul, inverse, complete, bruhat: OnceLock::new() })
    }

    pub fn system(&self) -> &CoxeterSystem {
        &self.system
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    /// True when the table is the whole (finite) group.
    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn elements(&self) -> &[CoxElt] {
        &self.elems
    }

    pub fn elem(&self, i: usize) -> &CoxElt {
        &self.elems[i]
    }

    pub fn index_of(&self, x: &CoxElt) -> Option<usize> {
        self.index.get(&x.word).map(|&i| i as usize)
    }

    pub fn require(&self, x: &CoxElt) -> Result<usize, CoxeterError> {
        self.index_of(x).ok_or_else(|| CoxeterError::OutsideTable(x.to_text(self.system.rank())))
    }

    /// Normalize a word that is known to represent a table element.
    pub fn index_of_word(&self, word: &[u8]) -> Option<usize> {
        let mut cur = 0u32;
        for &s in word {
            cur = *self.rmul.get(cur as usize)?.get(s as usize)?.as_ref()?;
        }
        Some(cur as usize)
    }

    pub fn parse(&self, text: &str) -> Result<usize, CoxeterError> {
        let w = parse_word(text)?;
        self.system.check(&w)?;
        match self.index_of_word(&w) {
            Some(i) => Ok(i),
            None => Err(CoxeterError::OutsideTable(text.to_string())),
        }
    }

    pub fn length(&self, i: usize) -> usize {
        self.lengths[i] as usize
    }

    pub fn max_length(&self) -> usize {
        *self.lengths.last().unwrap() as usize
    }

    /// `x_i · s`, if it lies in the table.
    pub fn rmul(&self, i: usize, s: usize) -> Option<usize> {
        self.rmul[i][s].map(|j| j as usize)
    }

    /// `s · x_i`, if it lies in the table.
    pub fn lmul(&self, i: usize, s: usize) -> Option<usize> {
        self.lmul[i][s].map(|j| j as usize)
    }

    pub fn inverse(&self, i: usize) -> usize {
        self.inverse[i] as usize
    }

    pub fn has_right_descent(&self, i: usize, s: usize) -> bool {
        self.rmul(i, s).is_some_and(|j| self.lengths[j] < self.lengths[i])
    }

    pub fn has_left_descent(&self, i: usize, s: usize) -> bool {
        self.lmul(i, s).is_some_and(|j| self.lengths[j] < self.lengths[i])
    }

    pub fn right_descents(&self, i: usize) -> Vec<usize> {
        (0..self.system.rank()).filter(|&s| self.has_right_descent(i, s)).collect()
    }

    pub fn left_descents(&self, i: usize) -> Vec<usize> {
        (0..self.system.rank()).filter(|&s| self.has_left_descent(i, s)).collect()
    }

    /// Product `x_i · x_j` if every intermediate lies in the table.
    pub fn mul(&self, i: usize, j: usize) -> Option<usize> {
        let mut cur = i;
        for &s in &self.elems[j].word {
            cur = self.rmul(cur, s as usize)?;
        }
        Some(cur)
    }

    fn bruhat_sets(&self) -> &[BitSet] {
        self.bruhat.get_or_init(|| {
            // below(y) = below(ys) ∪ below(ys)·s for the last letter s of y
            let n = self.len();
            let mut sets: Vec<BitSet> = Vec::with_capacity(n);
            for y in 0..n {
                let mut b = BitSet::new(n);
                b.insert(y);
                if let Some(&s) = self.elems[y].word.last() {
                    let ys = self.rmul(y, s as usize).unwrap();
                    let prev = sets[ys].clone();
                    for x in prev.iter() {
                        b.insert(x);
                        if let Some(xs) = self.rmul(x, s as usize) {
                            b.insert(xs);
                        }
                    }
                }
                sets.push(b);
            }
            sets
        })
    }

    /// `x_i ≤ x_j` in Bruhat order.
    pub fn bruhat_leq(&self, i: usize, j: usize) -> bool {
        self.lengths[i] <= self.lengths[j] && self.bruhat_sets()[j].contains(i)
    }

    /// Indices of all `x ≤ x_j`, increasing.
    pub fn bruhat_below(&self, j: usize) -> Vec<usize> {
        self.bruhat_sets()[j].iter().collect()
    }

    pub fn text(&self, i: usize) -> String {
        self.elems[i].to_text(self.system.rank())
    }
}

/// Minimal fixed-size bit set.
#[derive(Clone, Debug)]
pub struct BitSet {
    words: Vec<u64>,
}

impl BitSet {
    pub fn new(n: usize) -> BitSet {
        BitSet { words: vec![0; n.div_ceil(64)] }
    }

    pub fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            (0..64).filter(move |b| w >> b & 1 == 1).map(move |b| k * 64 + b)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::{HashSet, VecDeque};

    fn sys(name: &str) -> CoxeterSystem {
        CoxeterSystem::preset(name).unwrap()
    }

    fn nf(w: &CoxeterSystem, s: &str) -> CoxElt {
        w.parse(s).unwrap()
    }

    /// Brute-force rewriting oracle: BFS over words reachable by braid moves
    /// and deletions of `ss`, returning the ShortLex-least word found.
    fn rewrite_oracle(m: &CoxeterMatrix, word: &[u8]) -> Vec<u8> {
        let mut seen: HashSet<Vec<u8>> = HashSet::new();
        let mut queue = VecDeque::from([word.to_vec()]);
        seen.insert(word.to_vec());
        let mut best = word.to_vec();
        while let Some(w) = queue.pop_front() {
            if (w.len(), &w) < (best.len(), &best) {
                best = w.clone();
            }
            let mut next = Vec::new();
            for i in 0..w.len().saturating_sub(1) {
                if w[i] == w[i + 1] {
                    let mut v = w.clone();
                    v.drain(i..i + 2);
                    next.push(v);
                }
            }
            for i in 0..w.len().saturating_sub(1) {
                let (s, t) = (w[i], w[i + 1]);
                if s == t {
                    continue;
                }
                let Some(k) = m.get(s as usize, t as usize) else { continue };
                let k = k as usize;
                if i + k > w.len() {
                    continue;
                }
                if (0..k).all(|p| w[i + p] == if p % 2 == 0 { s } else { t }) {
                    let mut v = w.clone();
                    for p in 0..k {
                        v[i + p] = if p % 2 == 0 { t } else { s };
                    }
                    next.push(v);
                }
            }
            for v in next {
                if seen.insert(v.clone()) {
                    queue.push_back(v);
                }
            }
        }
        best
    }

    /// Closure oracle: group order by BFS on words with the rewriting oracle.
    fn closure_order(m: &CoxeterMatrix) -> usize {
        let mut seen: HashSet<Vec<u8>> = HashSet::from([Vec::new()]);
        let mut queue = VecDeque::from([Vec::new()]);
        while let Some(w) = queue.pop_front() {
            for s in 0..m.rank() as u8 {
                let mut v: Vec<u8> = w.clone();
                v.push(s);
                let v = rewrite_oracle(m, &v);
                if seen.insert(v.clone()) {
                    queue.push_back(v);
                }
            }
        }
        seen.len()
    }

    #[test]
    fn normal_form_examples() {
        let a2 = sys("A2");
        assert!(nf(&a2, "11").is_identity());
        assert_eq!(nf(&a2, "121"), nf(&a2, "212"));
        assert_eq!(nf(&a2, "212").to_text(2), "121");
        let i5 = sys("I2:5");
        assert_eq!(nf(&i5, "12121"), nf(&i5, "21212"));
        assert_eq!(nf(&i5, "12121").length(), 5);
        assert!(matches!(a2.parse("13"), Err(CoxeterError::IndexOutOfRange { index: 2, rank: 2 })));
    }

    #[test]
    fn multiply_examples() {
        let a2 = sys("A2");
        let x = nf(&a2, "12");
        assert_eq!(a2.multiply(&x, &CoxElt::identity()), x);
        assert_eq!(a2.multiply(&nf(&a2, "1"), &nf(&a2, "2")).length(), 2);
        let p = a2.multiply(&nf(&a2, "12"), &nf(&a2, "21"));
        assert_eq!(p.word(), rewrite_oracle(a2.matrix(), &[0, 1, 1, 0]).as_slice());
        assert!(p.is_identity());
    }

    #[test]
    fn descent_examples() {
        let a2 = sys("A2");
        assert!(a2.descents(&CoxElt::identity(), Side::Right).is_empty());
        assert_eq!(a2.descents(&nf(&a2, "121"), Side::Right), vec![0, 1]);
        assert_eq!(a2.descents(&nf(&a2, "12"), Side::Right), vec![1]);
        assert_eq!(a2.descents(&nf(&a2, "12"), Side::Left), vec![0]);
    }

    #[test]
    fn group_orders_match_closure_oracle() {
        for (name, order) in [("A3", 24), ("H3", 120), ("I2:7", 14), ("B3", 48)] {
            let w = sys(name);
            let n = w.enumerate(None).unwrap().len();
            assert_eq!(n, order, "{name}");
            if name != "H3" {
                assert_eq!(closure_order(w.matrix()), order, "{name}");
            }
        }
    }

    #[test]
    fn enumeration_is_sorted_and_normal() {
        let w = sys("B3");
        let elems = w.enumerate(None).unwrap();
        assert!(elems.windows(2).all(|p| p[0] < p[1]));
        for e in &elems {
            assert_eq!(e.word(), rewrite_oracle(w.matrix(), e.word()).as_slice());
        }
    }

    #[test]
    fn infinite_groups_need_bounds() {
        let w = sys("I2:inf");
        assert_eq!(w.enumerate(None), Err(CoxeterError::NeedsBound));
        let e = w.enumerate(Some(4)).unwrap();
        assert_eq!(e.len(), 1 + 2 * 4);
        let t = w.element_table(Some(4)).unwrap();
        assert!(!t.is_complete());
        let affine = CoxeterSystem::new(CoxeterMatrix::from_ints(&[&[1, 3, 3], &[3, 1, 3], &[3, 3, 1]]).unwrap());
        // affine A2: 1, 3, 6, 12, 18, ... elements by length; 3n new per length n>=1... check first layers
        let e = affine.enumerate(Some(3)).unwrap();
        let by_len: Vec<usize> = (0..=3).map(|l| e.iter().filter(|x| x.length() == l).count()).collect();
        assert_eq!(by_len, vec![1, 3, 6, 9]);
    }

    #[test]
    fn bruhat_examples() {
        let a2 = sys("A2");
        let st = nf(&a2, "12");
        assert!(a2.bruhat_leq(&CoxElt::identity(), &st));
        assert!(a2.bruhat_leq(&nf(&a2, "1"), &st));
        assert!(a2.bruhat_leq(&nf(&a2, "2"), &st));
        assert!(!a2.bruhat_leq(&st, &nf(&a2, "21")));
    }

    /// Subword oracle: x ≤ y iff x is the product of some subword of y.
    fn subword_leq(w: &CoxeterSystem, x: &CoxElt, y: &CoxElt) -> bool {
        let n = y.length();
        (0u32..1 << n).any(|mask| {
            let sub: Vec<u8> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| y.word()[i]).collect();
            w.normal_form(&sub).unwrap() == *x
        })
    }

    #[test]
    fn table_bruhat_matches_subword_oracle() {
        for name in ["A3", "I2:5"] {
            let w = sys(name);
            let t = w.element_table(None).unwrap();
            for i in 0..t.len() {
                for j in 0..t.len() {
                    assert_eq!(t.bruhat_leq(i, j), subword_leq(&w, t.elem(i), t.elem(j)), "{name} {i} {j}");
                }
            }
        }
    }

    #[test]
    fn table_multiplication_agrees_with_words() {
        let w = sys("H3");
        let t = w.element_table(None).unwrap();
        assert_eq!(t.len(), 120);
        assert_eq!(t.max_length(), 15);
        for i in (0..t.len()).step_by(7) {
            let inv = t.inverse(i);
            assert_eq!(t.mul(i, inv), Some(0));
            for s in 0..3 {
                let j = t.lmul(i, s).unwrap();
                assert_eq!(t.elem(j), &w.multiply(&w.generator(s), t.elem(i)));
            }
        }
    }

    #[test]
    fn matrix_json_roundtrip() {
        let m = CoxeterMatrix::preset("I2:inf").unwrap();
        let j = m.to_json();
        assert_eq!(j["m"][0][1], "inf");
        assert_eq!(CoxeterMatrix::from_json(&j).unwrap(), m);
        let h3 = CoxeterMatrix::preset("H3").unwrap();
        let text = serde_json::to_string(&h3).unwrap();
        assert_eq!(text, r#"{"m":[[1,5,2],[5,1,3],[2,3,1]],"rank":3,"version":1}"#);
        let back: CoxeterMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(back, h3);
        assert!(CoxeterMatrix::from_ints(&[&[1, 1], &[1, 1]]).is_err());
        assert!(CoxeterMatrix::from_ints(&[&[1, 3], &[4, 1]]).is_err());
        assert!(CoxeterMatrix::preset("Z9").is_err());
    }

    fn arb_word(rank: u8, len: usize) -> impl Strategy<Value = Vec<u8>> {
        prop::collection::vec(0..rank, 0..len)
    }

    /// Apply one random braid or nil move (inserting `ss`) to a word.
    fn perturb(m: &CoxeterMatrix, w: &[u8], pos: usize, s: u8, t: u8) -> Vec<u8> {
        let mut v = w.to_vec();
        let pos = pos % (v.len() + 1);
        if s == t {
            v.splice(pos..pos, [s, s]);
            return v;
        }
        let k = m.get(s as usize, t as usize).unwrap() as usize;
        let a: Vec<u8> = (0..k).map(|p| if p % 2 == 0 { s } else { t }).collect();
        let b: Vec<u8> = (0..k).map(|p| if p % 2 == 0 { t } else { s }).collect();
        if let Some(i) = v.windows(k).position(|win| win == a.as_slice()) {
            v.splice(i..i + k, b);
        } else {
            v.splice(pos..pos, [s, s]);
        }
        v
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn normal_form_is_invariant(w in arb_word(3, 10), moves in prop::collection::vec((0usize..20, 0u8..3, 0u8..3), 0..4)) {
            let b3 = sys("B3");
            let base = b3.normal_form(&w).unwrap();
            let mut cur = w.clone();
            for (p, s, t) in moves {
                cur = perturb(b3.matrix(), &cur, p, s, t);
            }
            prop_assert_eq!(b3.normal_form(&cur).unwrap(), base.clone());
            prop_assert_eq!(b3.normal_form(base.word()).unwrap(), base);
        }

        #[test]
        fn lengths_change_by_one(w in arb_word(3, 10), s in 0usize..3) {
            let h3 = sys("H3");
            let x = h3.normal_form(&w).unwrap();
            let xs = h3.multiply(&x, &h3.generator(s));
            prop_assert_eq!((xs.length() as i64 - x.length() as i64).abs(), 1);
        }

        #[test]
        fn group_laws(a in arb_word(3, 8), b in arb_word(3, 8), c in arb_word(3, 8)) {
            let w = CoxeterSystem::new(CoxeterMatrix::from_ints(&[&[1, 4, 0], &[4, 1, 3], &[0, 3, 1]]).unwrap());
            let (x, y, z) = (w.normal_form(&a).unwrap(), w.normal_form(&b).unwrap(), w.normal_form(&c).unwrap());
            prop_assert_eq!(w.multiply(&w.multiply(&x, &y), &z), w.multiply(&x, &w.multiply(&y, &z)));
            prop_assert!(w.multiply(&x, &w.inverse(&x)).is_identity());
            let rev: Vec<u8> = x.word().iter().rev().copied().collect();
            prop_assert_eq!(w.inverse(&x), w.normal_form(&rev).unwrap());
        }

        #[test]
        fn bruhat_is_a_partial_order(a in arb_word(3, 7), b in arb_word(3, 7)) {
            let w = sys("A3");
            let (x, y) = (w.normal_form(&a).unwrap(), w.normal_form(&b).unwrap());
            let (xy, yx) = (w.bruhat_leq(&x, &y), w.bruhat_leq(&y, &x));
            if xy && yx { prop_assert_eq!(x.clone(), y.clone()); }
            if xy { prop_assert!(x.length() <= y.length()); }
        }
    }
}
