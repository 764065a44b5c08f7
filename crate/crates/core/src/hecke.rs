//! The Hecke algebra, its Kazhdan–Lusztig basis and structure constants.
//!
//! Conventions: `H_s² = (v⁻¹ − v)H_s + H_e`, `C_s = H_s + vH_e` (written
//! `\underline{H}_s` elsewhere), and `C_x = Σ h_{y,x} H_y` with
//! `h_{y,x} ∈ vZ[v]` for `y < x`. All elements are indexed by an
//! [`ElementTable`]; products leaving the table are reported as errors.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::coxeter::{CoxElt, CoxeterError, CoxeterMatrix, CoxeterSystem, ElementTable};
use crate::exact::Int;
use crate::laurent::LaurentPoly;

#[derive(Debug, Error)]
pub enum HeckeError {
    #[error(transparent)]
    Coxeter(#[from] CoxeterError),
    #[error("product leaves the element table (lengths up to {0}); raise the length bound")]
    Truncated(usize),
    #[error("KL cache was computed for a different Coxeter matrix")]
    MatrixMismatch,
    #[error("bad KL cache: {0}")]
    BadCache(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// A finitely supported combination `Σ p_x · b_x` over table indices. The
/// basis `b` (standard or KL) is implied by context.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HeckeElt {
    terms: BTreeMap<u32, LaurentPoly>,
}

impl HeckeElt {
    pub fn zero() -> HeckeElt {
        HeckeElt::default()
    }

    pub fn basis(x: usize) -> HeckeElt {
        HeckeElt::term(x, LaurentPoly::one())
    }

    pub fn term(x: usize, p: LaurentPoly) -> HeckeElt {
        let mut e = HeckeElt::zero();
        e.add_term(x, &p);
        e
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, x: usize) -> LaurentPoly {
        self.terms.get(&(x as u32)).cloned().unwrap_or_default()
    }

    /// Nonzero terms by increasing index.
    pub fn terms(&self) -> impl Iterator<Item = (usize, &LaurentPoly)> {
        self.terms.iter().map(|(&x, p)| (x as usize, p))
    }

    pub fn support_len(&self) -> usize {
        self.terms.len()
    }

    pub fn add_term(&mut self, x: usize, p: &LaurentPoly) {
        self.add_scaled_term(x, p, &Int::ONE, 0);
    }

    /// `self += k v^e p · b_x`.
    pub fn add_scaled_term(&mut self, x: usize, p: &LaurentPoly, k: &Int, e: i32) {
        if p.is_zero() || k.is_zero() {
            return;
        }
        let slot = self.terms.entry(x as u32).or_default();
        slot.add_scaled(p, k, e);
        if slot.is_zero() {
            self.terms.remove(&(x as u32));
        }
    }

    pub fn add_assign(&mut self, other: &HeckeElt) {
        for (x, p) in other.terms() {
            self.add_term(x, p);
        }
    }

    pub fn sub_scaled(&mut self, other: &HeckeElt, p: &LaurentPoly) {
        for (x, q) in other.terms() {
            let t = -&(q * p);
            self.add_term(x, &t);
        }
    }

    pub fn scale(&self, p: &LaurentPoly) -> HeckeElt {
        let mut out = HeckeElt::zero();
        for (x, q) in self.terms() {
            out.add_term(x, &(q * p));
        }
        out
    }

    /// Render as `Σ p · b_x` with element words from `table`.
    pub fn to_map(&self, table: &ElementTable) -> BTreeMap<CoxElt, LaurentPoly> {
        self.terms().map(|(x, p)| (table.elem(x).clone(), p.clone())).collect()
    }
}

/// Multiply a standard-basis element on the right by `H_s`.
pub fn std_mul_s(table: &ElementTable, a: &HeckeElt, s: usize) -> Result<HeckeElt, HeckeError> {
    let trunc = || HeckeError::Truncated(table.max_length());
    let mut out = HeckeElt::zero();
    let q = LaurentPoly::from_terms([(-1, 1), (1, -1)]);
    for (x, p) in a.terms() {
        let xs = table.rmul(x, s).ok_or_else(trunc)?;
        out.add_term(xs, p);
        if table.length(xs) < table.length(x) {
            out.add_term(x, &(p * &q));
        }
    }
    Ok(out)
}

/// Product in the standard basis.
pub fn std_mul(table: &ElementTable, a: &HeckeElt, b: &HeckeElt) -> Result<HeckeElt, HeckeError> {
    let mut out = HeckeElt::zero();
    for (y, q) in b.terms() {
        let mut part = a.scale(q);
        for &s in table.elem(y).word() {
            part = std_mul_s(table, &part, s as usize)?;
        }
        out.add_assign(&part);
    }
    Ok(out)
}

/// Bar involution on the standard basis: `bar(H_x) = H_{x⁻¹}⁻¹`, using
/// `H_s⁻¹ = H_s + (v − v⁻¹)`.
pub fn std_bar(table: &ElementTable, a: &HeckeElt) -> Result<HeckeElt, HeckeError> {
    let mut out = HeckeElt::zero();
    let shift = LaurentPoly::from_terms([(1, 1), (-1, -1)]);
    for (x, p) in a.terms() {
        let mut part = HeckeElt::term(0, p.bar());
        for &s in table.elem(x).word() {
            let mut next = std_mul_s(table, &part, s as usize)?;
            next.add_assign(&part.scale(&shift));
            part = next;
        }
        out.add_assign(&part);
    }
    Ok(out)
}

/// Kazhdan–Lusztig polynomials `h_{y,x}` for every element of a table,
/// plus the W-graph data (`μ(y,x)`, the coefficient of `v` in `h_{y,x}`).
#[derive(Debug)]
pub struct KLTable {
    table: Arc<ElementTable>,
    /// `rows[x]`: `(y, h_{y,x})` for all `y ≤ x` with nonzero polynomial,
    /// sorted by `y`.
    rows: Vec<Vec<(u32, LaurentPoly)>>,
    /// `mu_below[x]`: `(y, μ(y,x))` for `y < x` with nonzero `μ`.
    mu_below: Vec<Vec<(u32, i64)>>,
}

pub const CACHE_VERSION: u64 = 1;

impl KLTable {
    /// Compute all rows by the standard induction `C_x = C_{xs}C_s − Σ μ(z,xs) C_z`.
    pub fn new(table: Arc<ElementTable>) -> KLTable {
        let n = table.len();
        let mut kl = KLTable { table, rows: Vec::with_capacity(n), mu_below: Vec::with_capacity(n) };
        for x in 0..n {
            let row = if x == 0 { vec![(0, LaurentPoly::one())] } else { kl.compute_row(x) };
            kl.push_row(row);
        }
        kl
    }

    pub fn for_system(system: &CoxeterSystem, max_length: Option<usize>) -> Result<KLTable, HeckeError> {
        Ok(KLTable::new(Arc::new(system.element_table(max_length)?)))
    }

    fn push_row(&mut self, row: Vec<(u32, LaurentPoly)>) {
        let x = self.rows.len();
        let lx = self.table.length(x) as i32;
        let mu: Vec<(u32, i64)> = row
            .iter()
            .filter(|(y, _)| (*y as usize) != x)
            .filter(|(y, _)| (lx - self.table.length(*y as usize) as i32) % 2 == 1)
            .map(|(y, h)| (*y, h.coeff_i64(1)))
            .filter(|&(_, m)| m != 0)
            .collect();
        self.rows.push(row);
        self.mu_below.push(mu);
    }

    fn compute_row(&self, x: usize) -> Vec<(u32, LaurentPoly)> {
        let t = &self.table;
        let s = *t.elem(x).word().last().unwrap() as usize;
        let xs = t.rmul(x, s).unwrap();
        // C_{xs} C_s in the standard basis
        let mut acc: HashMap<u32, LaurentPoly> = HashMap::new();
        for (y, h) in &self.rows[xs] {
            let y = *y as usize;
            let ys = t.rmul(y, s).expect("Bruhat ideal closed under s");
            let up = t.length(ys) > t.length(y);
            acc.entry(ys as u32).or_default().add_scaled(h, &Int::ONE, 0);
            acc.entry(y as u32).or_default().add_scaled(h, &Int::ONE, if up { 1 } else { -1 });
        }
        for &(z, m) in &self.mu_below[xs] {
            let z = z as usize;
            if !t.has_right_descent(z, s) {
                continue;
            }
            for (y, h) in &self.rows[z] {
                acc.entry(*y).or_default().add_scaled(h, &Int::from(-m), 0);
            }
        }
        let mut row: Vec<(u32, LaurentPoly)> = acc.into_iter().filter(|(_, p)| !p.is_zero()).collect();
        row.sort_by_key(|(y, _)| *y);
        row
    }

    pub fn table(&self) -> &Arc<ElementTable> {
        &self.table
    }

    pub fn system(&self) -> &CoxeterSystem {
        self.table.system()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `h_{y,x}`.
    pub fn h(&self, y: usize, x: usize) -> LaurentPoly {
        let row = &self.rows[x];
        match row.binary_search_by_key(&(y as u32), |(k, _)| *k) {
            Ok(i) => row[i].1.clone(),
            Err(_) => LaurentPoly::zero(),
        }
    }

    /// Classical KL polynomial `P_{y,x}(q) = v^{ℓ(x)−ℓ(y)} h_{y,x}` at `q = v^{-2}`,
    /// returned as coefficients of `q^0, q^1, ...`.
    pub fn classical_p(&self, y: usize, x: usize) -> Vec<Int> {
        let h = self.h(y, x);
        let d = self.table.length(x) as i32 - self.table.length(y) as i32;
        if h.is_zero() {
            return Vec::new();
        }
        let mut p: Vec<Int> = (0..=d / 2).map(|k| h.coeff(d - 2 * k)).collect();
        while p.last().is_some_and(Int::is_zero) {
            p.pop();
        }
        p
    }

    /// `μ(y,x)` for `y < x` (0 otherwise).
    pub fn mu_coefficient(&self, y: usize, x: usize) -> i64 {
        self.mu_below[x].iter().find(|(k, _)| *k as usize == y).map_or(0, |(_, m)| *m)
    }

    /// W-graph edges below `x`.
    pub fn mu_edges(&self, x: usize) -> &[(u32, i64)] {
        &self.mu_below[x]
    }

    /// `C_x` in the standard basis.
    pub fn kl_basis(&self, x: usize) -> HeckeElt {
        let mut e = HeckeElt::zero();
        for (y, h) in &self.rows[x] {
            e.add_term(*y as usize, h);
        }
        e
    }

    /// Right multiplication by `C_s` of an element given in the KL basis.
    pub fn kl_mul_s(&self, a: &HeckeElt, s: usize) -> Result<HeckeElt, HeckeError> {
        let t = &self.table;
        let mut out = HeckeElt::zero();
        let q2 = LaurentPoly::from_terms([(-1, 1), (1, 1)]);
        for (z, p) in a.terms() {
            let zs = t.rmul(z, s).ok_or(HeckeError::Truncated(t.max_length()))?;
            if t.length(zs) < t.length(z) {
                out.add_term(z, &(p * &q2));
                continue;
            }
            if zs >= self.rows.len() {
                return Err(HeckeError::Truncated(t.max_length()));
            }
            out.add_term(zs, p);
            for &(w, m) in &self.mu_below[z] {
                if t.has_right_descent(w as usize, s) {
                    out.add_scaled_term(w as usize, p, &Int::from(m), 0);
                }
            }
        }
        Ok(out)
    }

    /// Right multiplication by `C_y`, both sides in the KL basis.
    pub fn kl_mul(&self, a: &HeckeElt, y: usize) -> Result<HeckeElt, HeckeError> {
        let mut memo: HashMap<usize, HeckeElt> = HashMap::new();
        self.kl_mul_memo(a, y, &mut memo)
    }

    fn kl_mul_memo(&self, a: &HeckeElt, y: usize, memo: &mut HashMap<usize, HeckeElt>) -> Result<HeckeElt, HeckeError> {
        if let Some(r) = memo.get(&y) {
            return Ok(r.clone());
        }
        let t = &self.table;
        let r = if y == 0 {
            a.clone()
        } else {
            // C_y = C_{ys} C_s − Σ_{z<ys, zs<z} μ(z,ys) C_z
            let s = *t.elem(y).word().last().unwrap() as usize;
            let ys = t.rmul(y, s).unwrap();
            let mut r = self.kl_mul_s(&self.kl_mul_memo(a, ys, memo)?, s)?;
            for &(z, m) in &self.mu_below[ys] {
                if t.has_right_descent(z as usize, s) {
                    let pz = self.kl_mul_memo(a, z as usize, memo)?;
                    for (w, p) in pz.terms() {
                        r.add_scaled_term(w, p, &Int::from(-m), 0);
                    }
                }
            }
            r
        };
        memo.insert(y, r.clone());
        Ok(r)
    }

    /// Structure constants: `C_x C_y = Σ_z μ_{x,y}^z C_z`.
    pub fn mu(&self, x: usize, y: usize) -> Result<BTreeMap<usize, LaurentPoly>, HeckeError> {
        let p = self.kl_mul(&HeckeElt::basis(x), y)?;
        Ok(p.terms().map(|(z, q)| (z, q.clone())).collect())
    }

    /// `C_x C_y` for every `y` in the table (where defined), sharing the
    /// recursion. Entry `y` is `None` when the product leaves the table.
    pub fn products_row(&self, x: usize) -> Vec<Option<HeckeElt>> {
        let n = self.len();
        let mut memo: HashMap<usize, HeckeElt> = HashMap::new();
        let a = HeckeElt::basis(x);
        (0..n).map(|y| self.kl_mul_memo(&a, y, &mut memo).ok()).collect()
    }

    /// `dim H_z^i(B_x B_y)` = coefficient of `v^{-i}` in `μ_{x,y}^z`.
    pub fn graded_multiplicities(&self, x: usize, y: usize) -> Result<BTreeMap<usize, BTreeMap<i32, Int>>, HeckeError> {
        Ok(self
            .mu(x, y)?
            .into_iter()
            .map(|(z, p)| (z, p.terms().map(|(e, c)| (-e, c.clone())).collect()))
            .collect())
    }

    /// Check `h_{y,x} ∈ Z≥0[v]` and `μ_{x,y}^z ∈ Z≥0[v±]` over a scope.
    pub fn verify_positivity(&self, scope: &Scope) -> PositivityReport {
        let n = self.len();
        let mut report = PositivityReport::default();
        let elems: Vec<usize> = match scope {
            Scope::All => (0..n).collect(),
            Scope::Elements(v) => v.clone(),
            Scope::Pairs(p) => p.iter().flat_map(|&(x, y)| [x, y]).collect(),
        };
        for &x in &elems {
            for (y, h) in &self.rows[x] {
                report.kl_checked += 1;
                if !h.is_nonnegative() || (*y as usize != x && !h.is_zero() && h.min_degree() < Some(1)) {
                    report.violations.push(Violation::new("kl", self, x, *y as usize, None, h));
                }
            }
        }
        let pairs: Vec<(usize, usize)> = match scope {
            Scope::All => (0..n).flat_map(|x| (0..n).map(move |y| (x, y))).collect(),
            Scope::Elements(v) => v.iter().flat_map(|&x| v.iter().map(move |&y| (x, y))).collect(),
            Scope::Pairs(p) => p.clone(),
        };
        let mut by_x: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (x, y) in pairs {
            by_x.entry(x).or_default().push(y);
        }
        let results: Vec<(usize, Vec<Violation>)> = by_x
            .into_par_iter()
            .map(|(x, ys)| {
                let mut memo = HashMap::new();
                let a = HeckeElt::basis(x);
                let mut bad = Vec::new();
                let mut count = 0;
                for y in ys {
                    let Ok(p) = self.kl_mul_memo(&a, y, &mut memo) else { continue };
                    count += 1;
                    for (z, q) in p.terms() {
                        if !q.is_nonnegative() {
                            bad.push(Violation::new("mu", self, x, y, Some(z), q));
                        }
                    }
                }
                (count, bad)
            })
            .collect();
        for (count, bad) in results {
            report.products_checked += count;
            report.violations.extend(bad);
        }
        report
    }

    /// Serialize to the cache format
    /// `{"version":1,"coxeter":{...},"rows":{"<x>":{"<y>":"<h>"}}}`.
    pub fn to_cache_json(&self) -> serde_json::Value {
        let rank = self.system().rank();
        let mut rows = serde_json::Map::new();
        for (x, row) in self.rows.iter().enumerate() {
            let mut r = serde_json::Map::new();
            for (y, h) in row {
                r.insert(self.table.elem(*y as usize).to_text(rank), h.to_string().into());
            }
            rows.insert(self.table.elem(x).to_text(rank), r.into());
        }
        serde_json::json!({
            "version": CACHE_VERSION,
            "coxeter": self.system().matrix().to_json(),
            "max_length": self.table.max_length(),
            "complete": self.table.is_complete(),
            "rows": rows,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), HeckeError> {
        std::fs::write(path, serde_json::to_string(&self.to_cache_json()).map_err(|e| HeckeError::BadCache(e.to_string()))?)?;
        Ok(())
    }

    /// Rebuild from cache JSON, refusing a different Coxeter matrix.
    pub fn from_cache_json(v: &serde_json::Value, expected: &CoxeterMatrix) -> Result<KLTable, HeckeError> {
        let bad = |m: &str| HeckeError::BadCache(m.to_string());
        if v.get("version").and_then(|x| x.as_u64()) != Some(CACHE_VERSION) {
            return Err(bad("unsupported version"));
        }
        let matrix = CoxeterMatrix::from_json(v.get("coxeter").ok_or_else(|| bad("missing coxeter"))?)
            .map_err(|e| HeckeError::BadCache(e.to_string()))?;
        if &matrix != expected {
            return Err(HeckeError::MatrixMismatch);
        }
        let rows = v.get("rows").and_then(|r| r.as_object()).ok_or_else(|| bad("missing rows"))?;
        let complete = v.get("complete").and_then(|c| c.as_bool()).unwrap_or(false);
        let max_len = match v.get("max_length").and_then(|m| m.as_u64()) {
            Some(m) => m as usize,
            None => rows.keys().map(|k| crate::coxeter::parse_word(k).map(|w| w.len()).unwrap_or(0)).max().unwrap_or(0),
        };
        let system = CoxeterSystem::new(matrix);
        let table = Arc::new(system.element_table(if complete { None } else { Some(max_len) })?);
        if rows.len() != table.len() {
            return Err(bad("row count does not match the element table"));
        }
        let mut kl = KLTable { table: table.clone(), rows: Vec::new(), mu_below: Vec::new() };
        for x in 0..table.len() {
            let r = rows.get(&table.text(x)).and_then(|r| r.as_object()).ok_or_else(|| bad("missing row"))?;
            let mut row = Vec::new();
            for (yw, h) in r {
                let y = table.parse(yw).map_err(|e| HeckeError::BadCache(e.to_string()))?;
                let h: LaurentPoly = h.as_str().ok_or_else(|| bad("polynomials are strings"))?.parse().map_err(|e: crate::laurent::LaurentError| HeckeError::BadCache(e.to_string()))?;
                row.push((y as u32, h));
            }
            row.sort_by_key(|(y, _)| *y);
            kl.push_row(row);
        }
        Ok(kl)
    }

    pub fn load(path: &std::path::Path, expected: &CoxeterMatrix) -> Result<KLTable, HeckeError> {
        let text = std::fs::read_to_string(path)?;
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| HeckeError::BadCache(e.to_string()))?;
        KLTable::from_cache_json(&v, expected)
    }
}

#[derive(Clone, Debug)]
pub enum Scope {
    All,
    Elements(Vec<usize>),
    Pairs(Vec<(usize, usize)>),
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct Violation {
    pub kind: &'static str,
    pub x: String,
    pub y: String,
    pub z: Option<String>,
    pub value: String,
}

impl Violation {
    fn new(kind: &'static str, kl: &KLTable, x: usize, y: usize, z: Option<usize>, p: &LaurentPoly) -> Violation {
        let t = kl.table();
        Violation { kind, x: t.text(x), y: t.text(y), z: z.map(|z| t.text(z)), value: p.to_string() }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct PositivityReport {
    pub kl_checked: usize,
    pub products_checked: usize,
    pub violations: Vec<Violation>,
}

impl PositivityReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}
