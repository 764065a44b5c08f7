//! Right-free models of Soergel bimodules and their Soergel modules.
//!
//! A [`FreeBimodule`] is a graded bimodule that is free as a right
//! `R`-module on a homogeneous basis `b_i`, described by the left action
//! `x_t·b_j = Σ_i b_i·A_t[i][j]` and the Gram matrix of its invariant form.
//! Its Soergel module `B ⊗_R ℝ` (right action killed) is a [`SoergelModule`]:
//! the same basis with the constant parts of those matrices. By Soergel's
//! Hom formula the degree-zero endomorphisms of `B` and of `B ⊗_R ℝ` agree,
//! so decompositions can be computed on the scalar side.

use std::collections::{BTreeMap, HashMap};

use crate::exact::{Mat, NumberField, Scalar};
use crate::realization::{exp, PolyElt, Realization};

/// Dense matrix of polynomials.
#[derive(Clone, PartialEq, Eq)]
pub struct PolyMat {
    field: &'static NumberField,
    rows: usize,
    cols: usize,
    data: Vec<PolyElt>,
}

impl std::fmt::Debug for PolyMat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self.get(i, j).to_string()).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl PolyMat {
    pub fn zeros(field: &'static NumberField, rows: usize, cols: usize) -> PolyMat {
        PolyMat { field, rows, cols, data: vec![PolyElt::zero(field); rows * cols] }
    }

    pub fn identity(field: &'static NumberField, n: usize) -> PolyMat {
        PolyMat::from_scalar(&Mat::identity(field, n))
    }

    pub fn from_scalar(m: &Mat) -> PolyMat {
        let mut out = PolyMat::zeros(m.field(), m.rows(), m.cols());
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                out.data[i * m.cols() + j] = PolyElt::constant(m[(i, j)].clone());
            }
        }
        out
    }

    pub fn field(&self) -> &'static NumberField {
        self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &PolyElt {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: PolyElt) {
        self.data[i * self.cols + j] = p;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(PolyElt::is_zero)
    }

    pub fn constant_part(&self) -> Mat {
        Mat::from_fn(self.field, self.rows, self.cols, |i, j| self.get(i, j).constant_term())
    }

    pub fn transpose(&self) -> PolyMat {
        let mut out = PolyMat::zeros(self.field, self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).clone());
            }
        }
        out
    }

    pub fn add(&self, other: &PolyMat) -> PolyMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        PolyMat { field: self.field, rows: self.rows, cols: self.cols, data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &PolyMat) -> PolyMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        PolyMat { field: self.field, rows: self.rows, cols: self.cols, data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect() }
    }

    pub fn scale(&self, c: &Scalar) -> PolyMat {
        PolyMat { field: self.field, rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a.scale(c)).collect() }
    }

    pub fn mul(&self, other: &PolyMat) -> PolyMat {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = PolyMat::zeros(self.field, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if b.is_zero() {
                        continue;
                    }
                    let idx = i * other.cols + j;
                    out.data[idx] = &out.data[idx] + &(a * b);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[PolyElt]) -> Vec<PolyElt> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut acc = PolyElt::zero(self.field);
                for (k, x) in v.iter().enumerate() {
                    let a = self.get(i, k);
                    if !a.is_zero() && !x.is_zero() {
                        acc = &acc + &(a * x);
                    }
                }
                acc
            })
            .collect()
    }

    pub fn select(&self, rows: &[usize], cols: &[usize]) -> PolyMat {
        let mut out = PolyMat::zeros(self.field, rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                out.set(a, b, self.get(i, j).clone());
            }
        }
        out
    }

    pub fn col(&self, j: usize) -> Vec<PolyElt> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn from_cols(field: &'static NumberField, rows: usize, cols: &[Vec<PolyElt>]) -> PolyMat {
        let mut out = PolyMat::zeros(field, rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for (i, p) in c.iter().enumerate() {
                out.set(i, j, p.clone());
            }
        }
        out
    }

    /// Inverse of a matrix whose non-constant part is nilpotent after
    /// multiplying by the inverse of its constant part, as happens for
    /// degree-preserving maps and Gram matrices between graded free modules.
    pub fn graded_inverse(&self) -> Option<PolyMat> {
        assert_eq!(self.rows, self.cols);
        let c0 = self.constant_part();
        let c0_inv = c0.inverse()?;
        let c0_inv_p = PolyMat::from_scalar(&c0_inv);
        let rest = self.sub(&PolyMat::from_scalar(&c0));
        let n = c0_inv_p.mul(&rest);
        let minus_one = self.field.int(-1);
        let mut sum = PolyMat::identity(self.field, self.rows);
        let mut term = sum.clone();
        for _ in 0..=4 * self.rows + 64 {
            term = n.mul(&term).scale(&minus_one);
            if term.is_zero() {
                return Some(sum.mul(&c0_inv_p));
            }
            sum = sum.add(&term);
        }
        None
    }
}

/// Incremental row echelon basis used to select independent vectors.
#[derive(Clone, Debug, Default)]
pub struct Echelon {
    rows: Vec<(usize, Vec<Scalar>)>,
}

impl Echelon {
    pub fn reduce(&self, v: &[Scalar]) -> Vec<Scalar> {
        let mut v = v.to_vec();
        for (p, row) in &self.rows {
            if v[*p].is_zero() {
                continue;
            }
            let f = v[*p].clone();
            for (x, r) in v.iter_mut().zip(row) {
                if !r.is_zero() {
                    *x = &*x - &(&f * r);
                }
            }
        }
        v
    }

    /// Insert `v`; returns false when it is already in the span.
    pub fn insert(&mut self, v: &[Scalar]) -> bool {
        let v = self.reduce(v);
        let Some(p) = v.iter().position(|x| !x.is_zero()) else {
            return false;
        };
        let inv = v[p].inv();
        let v: Vec<Scalar> = v.iter().map(|x| x * &inv).collect();
        for (_, row) in self.rows.iter_mut() {
            if !row[p].is_zero() {
                let f = row[p].clone();
                for (x, r) in row.iter_mut().zip(&v) {
                    if !r.is_zero() {
                        *x = &*x - &(&f * r);
                    }
                }
            }
        }
        self.rows.push((p, v));
        true
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// How a witness basis vector arises: a module generator, or `x_t` times an
/// earlier witness.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    Gen(usize),
    Mul(usize, usize),
}

/// A basis of a graded left `R`-module built from generators by multiplying
/// with variables, degree by degree.
#[derive(Clone, Debug)]
pub struct WitnessBasis {
    pub origins: Vec<Origin>,
    pub degrees: Vec<i32>,
    /// Coordinates in the module's own basis (columns).
    pub vectors: Vec<Vec<Scalar>>,
}

impl WitnessBasis {
    pub fn build(field: &'static NumberField, degrees: &[i32], action: &[Mat]) -> WitnessBasis {
        let n = degrees.len();
        let mut levels: Vec<i32> = degrees.to_vec();
        levels.sort_unstable();
        levels.dedup();
        let mut out = WitnessBasis { origins: Vec::new(), degrees: Vec::new(), vectors: Vec::new() };
        for &k in &levels {
            let mut ech = Echelon::default();
            let below: Vec<usize> = (0..out.origins.len()).filter(|&i| out.degrees[i] == k - 2).collect();
            for &p in &below {
                for (t, a) in action.iter().enumerate() {
                    let v = a.mul_vec(&out.vectors[p]);
                    if ech.insert(&v) {
                        out.origins.push(Origin::Mul(t, p));
                        out.degrees.push(k);
                        out.vectors.push(v);
                    }
                }
            }
            for j in (0..n).filter(|&j| degrees[j] == k) {
                let mut v = vec![field.zero(); n];
                v[j] = field.one();
                if ech.insert(&v) {
                    out.origins.push(Origin::Gen(j));
                    out.degrees.push(k);
                    out.vectors.push(v);
                }
            }
        }
        debug_assert_eq!(out.origins.len(), n);
        out
    }

    pub fn generators(&self) -> Vec<usize> {
        (0..self.origins.len()).filter(|&i| matches!(self.origins[i], Origin::Gen(_))).collect()
    }
}

/// Evaluates polynomials at a tuple of commuting scalar matrices.
pub struct MatEval<'a> {
    mats: &'a [Mat],
    cache: HashMap<u64, Mat>,
}

impl<'a> MatEval<'a> {
    pub fn new(mats: &'a [Mat]) -> MatEval<'a> {
        MatEval { mats, cache: HashMap::new() }
    }

    fn monomial(&mut self, m: u64) -> Mat {
        if let Some(v) = self.cache.get(&m) {
            return v.clone();
        }
        let n = self.mats[0].rows();
        let f = self.mats[0].field();
        let out = match (0..self.mats.len()).find(|&i| exp(m, i) > 0) {
            None => Mat::identity(f, n),
            Some(i) => {
                let rest = self.monomial(m - (1u64 << (8 * i)));
                self.mats[i].mul(&rest)
            }
        };
        self.cache.insert(m, out.clone());
        out
    }

    pub fn eval(&mut self, p: &PolyElt) -> Mat {
        let n = self.mats[0].rows();
        let mut acc = Mat::zeros(p.field(), n, n);
        for (m, c) in p.raw_terms() {
            acc = acc.add(&self.monomial(*m).scale(c));
        }
        acc
    }
}

/// A graded bimodule, free as a right `R`-module, with an invariant form.
#[derive(Clone, Debug)]
pub struct FreeBimodule {
    field: &'static NumberField,
    degrees: Vec<i32>,
    /// `x_t·b_j = Σ_i b_i·action[t][i][j]`.
    action: Vec<PolyMat>,
    /// `gram[i][j] = ⟨b_i, b_j⟩`.
    gram: PolyMat,
}

impl FreeBimodule {
    pub fn new(degrees: Vec<i32>, action: Vec<PolyMat>, gram: PolyMat) -> FreeBimodule {
        FreeBimodule { field: gram.field(), degrees, action, gram }
    }

    /// `R` itself.
    pub fn unit(r: &Realization) -> FreeBimodule {
        let f = r.field();
        let action = (0..r.rank())
            .map(|t| {
                let mut m = PolyMat::zeros(f, 1, 1);
                m.set(0, 0, r.var(t));
                m
            })
            .collect();
        FreeBimodule { field: f, degrees: vec![0], action, gram: PolyMat::identity(f, 1) }
    }

    /// `self ⊗_R B_s` on the basis `b_i ⊗ ρ^ε ⊗ 1` (index `2i + ε`).
    pub fn tensor_s(&self, r: &Realization, s: usize) -> FreeBimodule {
        let n = self.rank();
        let rho = r.rho();
        let f = self.field;
        let degrees = (0..2 * n).map(|k| self.degrees[k / 2] + if k % 2 == 1 { 1 } else { -1 }).collect();
        let action = self
            .action
            .iter()
            .map(|a| {
                let mut out = PolyMat::zeros(f, 2 * n, 2 * n);
                for i in 0..n {
                    for k in 0..n {
                        let p = a.get(k, i);
                        if p.is_zero() {
                            continue;
                        }
                        for eps in 0..2 {
                            let q = if eps == 1 { p * &rho } else { p.clone() };
                            let (x, y) = r.split_rs(s, &q);
                            out.set(2 * k, 2 * i + eps, x);
                            out.set(2 * k + 1, 2 * i + eps, y);
                        }
                    }
                }
                out
            })
            .collect();
        let rho2 = &rho * &rho;
        let mut gram = PolyMat::zeros(f, 2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let g = self.gram.get(i, j);
                if g.is_zero() {
                    continue;
                }
                for (e1, e2) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    let q = match e1 + e2 {
                        0 => g.clone(),
                        1 => g * &rho,
                        _ => g * &rho2,
                    };
                    gram.set(2 * i + e1, 2 * j + e2, r.demazure(s, &q));
                }
            }
        }
        FreeBimodule { field: f, degrees, action, gram }
    }

    /// `BS(w)` on the right ε-basis `ρ^{ε_1} ⊗ ⋯ ⊗ ρ^{ε_d} ⊗ 1`; the index
    /// has `ε_1` as its most significant bit.
    pub fn bott_samelson(r: &Realization, word: &[u8]) -> FreeBimodule {
        word.iter().fold(FreeBimodule::unit(r), |acc, &s| acc.tensor_s(r, s as usize))
    }

    pub fn field(&self) -> &'static NumberField {
        self.field
    }

    pub fn rank(&self) -> usize {
        self.degrees.len()
    }

    pub fn degrees(&self) -> &[i32] {
        &self.degrees
    }

    pub fn action(&self, t: usize) -> &PolyMat {
        &self.action[t]
    }

    pub fn actions(&self) -> &[PolyMat] {
        &self.action
    }

    pub fn gram(&self) -> &PolyMat {
        &self.gram
    }

    /// Left multiplication by `f` as a matrix.
    pub fn left_mul_matrix(&self, f: &PolyElt) -> PolyMat {
        let n = self.rank();
        let mut cache: HashMap<u64, PolyMat> = HashMap::new();
        cache.insert(0, PolyMat::identity(self.field, n));
        let mut acc = PolyMat::zeros(self.field, n, n);
        for (m, c) in f.raw_terms() {
            let mm = self.monomial_matrix(*m, &mut cache);
            acc = acc.add(&mm.scale(c));
        }
        acc
    }

    fn monomial_matrix(&self, m: u64, cache: &mut HashMap<u64, PolyMat>) -> PolyMat {
        if let Some(v) = cache.get(&m) {
            return v.clone();
        }
        let i = (0..self.action.len()).find(|&i| exp(m, i) > 0).expect("nonconstant monomial");
        let rest = self.monomial_matrix(m - (1u64 << (8 * i)), cache);
        let out = self.action[i].mul(&rest);
        cache.insert(m, out.clone());
        out
    }

    /// The Soergel module `B ⊗_R ℝ`.
    pub fn soergel_module(&self) -> SoergelModule {
        SoergelModule {
            field: self.field,
            degrees: self.degrees.clone(),
            action: self.action.iter().map(PolyMat::constant_part).collect(),
            form: self.gram.constant_part(),
            gaps: Vec::new(),
        }
    }

    /// `self ⊗_R M` for a Soergel module `M`; the new gap operator
    /// (multiplication by ρ between `self` and `M`) is prepended to `M`'s.
    pub fn tensor_module(&self, r: &Realization, m: &SoergelModule) -> SoergelModule {
        let (n, k) = (self.rank(), m.dim());
        let f = self.field;
        let mut ev = MatEval::new(&m.action);
        let mut block_cache: HashMap<PolyElt, Mat> = HashMap::new();
        let mut eval = |p: &PolyElt, ev: &mut MatEval| -> Mat {
            if let Some(v) = block_cache.get(p) {
                return v.clone();
            }
            let v = ev.eval(p);
            block_cache.insert(p.clone(), v.clone());
            v
        };
        let degrees = (0..n * k).map(|idx| self.degrees[idx / k] + m.degrees[idx % k]).collect();
        let mut action = Vec::new();
        for a in &self.action {
            let mut out = Mat::zeros(f, n * k, n * k);
            for i in 0..n {
                for j in 0..n {
                    let p = a.get(i, j);
                    if p.is_zero() {
                        continue;
                    }
                    let blk = eval(p, &mut ev);
                    put_block(&mut out, i * k, j * k, &blk);
                }
            }
            action.push(out);
        }
        let mut form = Mat::zeros(f, n * k, n * k);
        for i in 0..n {
            for j in 0..n {
                let p = self.gram.get(i, j);
                if p.is_zero() {
                    continue;
                }
                let blk = eval(p, &mut ev).transpose().mul(&m.form);
                put_block(&mut form, i * k, j * k, &blk);
            }
        }
        let rho_m = eval(&r.rho(), &mut ev);
        let mut gaps = vec![block_diag(f, n, &rho_m)];
        gaps.extend(m.gaps.iter().map(|g| block_diag(f, n, g)));
        SoergelModule { field: f, degrees, action, form, gaps }
    }

    /// Basis of the degree-`d` bimodule maps `self → target` (each a matrix
    /// with `Φ(b_j) = Σ_i c_i·Φ[i][j]`).
    pub fn hom(&self, target: &FreeBimodule, d: i32) -> Vec<PolyMat> {
        let f = self.field;
        let (ns, nt) = (self.rank(), target.rank());
        let nvars = self.action.len();
        let reduced = self.soergel_module();
        let wb = WitnessBasis::build(f, &self.degrees, &reduced.action);
        // lift witnesses to the bimodule
        let mut lifts: Vec<Vec<PolyElt>> = Vec::with_capacity(ns);
        for o in &wb.origins {
            let v = match *o {
                Origin::Gen(j) => {
                    let mut v = vec![PolyElt::zero(f); ns];
                    v[j] = PolyElt::one(f);
                    v
                }
                Origin::Mul(t, p) => self.action[t].mul_vec(&lifts[p]),
            };
            lifts.push(v);
        }
        let tmat = PolyMat::from_cols(f, ns, &lifts);
        let tinv = tmat.graded_inverse().expect("witness lifts form a basis");
        // unknowns: Φ(generator) coefficients
        let mut unknowns: Vec<(usize, usize, u64)> = Vec::new();
        for (w, o) in wb.origins.iter().enumerate() {
            if let Origin::Gen(_) = o {
                let want = wb.degrees[w] + d;
                for i in 0..nt {
                    let gap = want - target.degrees[i];
                    if gap < 0 || gap % 2 != 0 {
                        continue;
                    }
                    for m in PolyElt::monomials(nvars, (gap / 2) as u32) {
                        unknowns.push((w, i, m));
                    }
                }
            }
        }
        if unknowns.is_empty() {
            return Vec::new();
        }
        // Φ_u(lift w) for each unknown
        let images: Vec<Vec<Vec<PolyElt>>> = unknowns
            .iter()
            .map(|&(gw, i, m)| {
                let mut imgs: Vec<Vec<PolyElt>> = Vec::with_capacity(ns);
                for (w, o) in wb.origins.iter().enumerate() {
                    let v = match *o {
                        Origin::Gen(_) => {
                            let mut v = vec![PolyElt::zero(f); nt];
                            if w == gw {
                                v[i] = PolyElt::monomial(f.one(), m);
                            }
                            v
                        }
                        Origin::Mul(t, p) => target.action[t].mul_vec(&imgs[p]),
                    };
                    imgs.push(v);
                }
                imgs
            })
            .collect();
        // constraints: Φ(x_t·w_k) = x_t·Φ(w_k)
        let mut eqs: BTreeMap<(usize, usize, usize, u64), Vec<(usize, Scalar)>> = BTreeMap::new();
        let produced: std::collections::HashSet<(usize, usize)> =
            wb.origins.iter().filter_map(|o| if let Origin::Mul(t, p) = o { Some((*t, *p)) } else { None }).collect();
        for k in 0..ns {
            for t in 0..nvars {
                if produced.contains(&(t, k)) {
                    continue;
                }
                let c = tinv.mul_vec(&self.action[t].mul_vec(&lifts[k]));
                for (u, imgs) in images.iter().enumerate() {
                    let mut res = target.action[t].mul_vec(&imgs[k]);
                    for v in res.iter_mut() {
                        *v = -&*v;
                    }
                    for (l, cl) in c.iter().enumerate() {
                        if cl.is_zero() {
                            continue;
                        }
                        for (i, x) in imgs[l].iter().enumerate() {
                            if !x.is_zero() {
                                res[i] = &res[i] + &(x * cl);
                            }
                        }
                    }
                    for (i, p) in res.iter().enumerate() {
                        for (m, a) in p.raw_terms() {
                            eqs.entry((k, t, i, *m)).or_default().push((u, a.clone()));
                        }
                    }
                }
            }
        }
        let nu = unknowns.len();
        let mut sys = Mat::zeros(f, eqs.len().max(1), nu);
        for (row, (_, entries)) in eqs.iter().enumerate() {
            for (u, a) in entries {
                sys[(row, *u)] = &sys[(row, *u)] + a;
            }
        }
        sys.kernel()
            .into_iter()
            .map(|x| {
                let cols: Vec<Vec<PolyElt>> = (0..ns)
                    .map(|l| {
                        let mut v = vec![PolyElt::zero(f); nt];
                        for (u, xu) in x.iter().enumerate() {
                            if xu.is_zero() {
                                continue;
                            }
                            for (i, p) in images[u][l].iter().enumerate() {
                                if !p.is_zero() {
                                    v[i].add_scaled(p, xu);
                                }
                            }
                        }
                        v
                    })
                    .collect();
                PolyMat::from_cols(f, nt, &cols).mul(&tinv)
            })
            .collect()
    }

    /// Check that `phi: self → target` commutes with the left action.
    pub fn is_bimodule_map(&self, target: &FreeBimodule, phi: &PolyMat) -> bool {
        (0..self.action.len()).all(|t| phi.mul(&self.action[t]) == target.action[t].mul(phi))
    }

    /// The adjoint `φ^*: target → self` with `⟨φ^*c, b⟩ = ⟨c, φb⟩`.
    pub fn adjoint(&self, target: &FreeBimodule, phi: &PolyMat) -> PolyMat {
        let ginv = self.gram.graded_inverse().expect("invariant form is non-degenerate");
        ginv.mul(&phi.transpose()).mul(&target.gram)
    }

    /// The summand cut out by a degree-zero idempotent `e`, with its basis
    /// taken from columns of `e`. Returns the model with the embedding
    /// (`self`-coordinates of the new basis) and projection.
    pub fn image(&self, e: &PolyMat) -> (FreeBimodule, PolyMat, PolyMat) {
        let e0 = e.constant_part();
        let cols = e0.clone().rref();
        let p = e.select(&(0..self.rank()).collect::<Vec<_>>(), &cols);
        let rows = p.constant_part().transpose().rref();
        let square_inv = p.select(&rows, &(0..cols.len()).collect::<Vec<_>>()).graded_inverse().expect("summand basis");
        let proj = square_inv.mul(&e.select(&rows, &(0..self.rank()).collect::<Vec<_>>()));
        let action = self.action.iter().map(|a| proj.mul(&a.select(&(0..self.rank()).collect::<Vec<_>>(), &cols))).collect();
        let gram = p.transpose().mul(&self.gram).mul(&p);
        let degrees = cols.iter().map(|&c| self.degrees[c]).collect();
        (FreeBimodule { field: self.field, degrees, action, gram }, p, proj)
    }
}

fn put_block(out: &mut Mat, r0: usize, c0: usize, blk: &Mat) {
    for i in 0..blk.rows() {
        for j in 0..blk.cols() {
            let v = &blk[(i, j)];
            if !v.is_zero() {
                out[(r0 + i, c0 + j)] = &out[(r0 + i, c0 + j)] + v;
            }
        }
    }
}

fn block_diag(f: &'static NumberField, copies: usize, blk: &Mat) -> Mat {
    let k = blk.rows();
    let mut out = Mat::zeros(f, copies * k, copies * k);
    for c in 0..copies {
        put_block(&mut out, c * k, c * k, blk);
    }
    out
}

/// A graded left `R`-module given by scalar action matrices on a
/// homogeneous basis, with a symmetric form pairing degree `k` with `−k`
/// and the gap operators of the product it came from.
#[derive(Clone, Debug)]
pub struct SoergelModule {
    field: &'static NumberField,
    degrees: Vec<i32>,
    action: Vec<Mat>,
    form: Mat,
    gaps: Vec<Mat>,
}

impl SoergelModule {
    pub fn field(&self) -> &'static NumberField {
        self.field
    }

    pub fn dim(&self) -> usize {
        self.degrees.len()
    }

    pub fn degrees(&self) -> &[i32] {
        &self.degrees
    }

    pub fn action(&self, t: usize) -> &Mat {
        &self.action[t]
    }

    pub fn actions(&self) -> &[Mat] {
        &self.action
    }

    pub fn form(&self) -> &Mat {
        &self.form
    }

    /// Multiplication by ρ in each internal gap, left to right.
    pub fn gaps(&self) -> &[Mat] {
        &self.gaps
    }

    /// Left multiplication by a polynomial.
    pub fn left_mul_matrix(&self, p: &PolyElt) -> Mat {
        MatEval::new(&self.action).eval(p)
    }

    /// Basis of the degree-`d` module maps `self → target`
    /// (`Φ` sends degree `j` to degree `j + d`).
    pub fn hom(&self, target: &SoergelModule, d: i32) -> Vec<Mat> {
        let f = self.field;
        let (ns, nt) = (self.dim(), target.dim());
        let wb = WitnessBasis::build(f, &self.degrees, &self.action);
        let wmat = Mat::from_cols(f, ns, &wb.vectors);
        let winv = wmat.inverse().expect("witness basis");
        let mut unknowns: Vec<(usize, usize)> = Vec::new();
        for (w, o) in wb.origins.iter().enumerate() {
            if let Origin::Gen(_) = o {
                for i in 0..nt {
                    if target.degrees[i] == wb.degrees[w] + d {
                        unknowns.push((w, i));
                    }
                }
            }
        }
        if unknowns.is_empty() {
            return Vec::new();
        }
        let images: Vec<Vec<Vec<Scalar>>> = unknowns
            .iter()
            .map(|&(gw, i)| {
                let mut imgs: Vec<Vec<Scalar>> = Vec::with_capacity(ns);
                for (w, o) in wb.origins.iter().enumerate() {
                    let v = match *o {
                        Origin::Gen(_) => {
                            let mut v = vec![f.zero(); nt];
                            if w == gw {
                                v[i] = f.one();
                            }
                            v
                        }
                        Origin::Mul(t, p) => target.action[t].mul_vec(&imgs[p]),
                    };
                    imgs.push(v);
                }
                imgs
            })
            .collect();
        let produced: std::collections::HashSet<(usize, usize)> =
            wb.origins.iter().filter_map(|o| if let Origin::Mul(t, p) = o { Some((*t, *p)) } else { None }).collect();
        let mut rows: Vec<Vec<Scalar>> = Vec::new();
        for k in 0..ns {
            for t in 0..self.action.len() {
                if produced.contains(&(t, k)) {
                    continue;
                }
                let c = winv.mul_vec(&self.action[t].mul_vec(&wb.vectors[k]));
                let mut block = vec![vec![f.zero(); unknowns.len()]; nt];
                for (u, imgs) in images.iter().enumerate() {
                    let lhs = target.action[t].mul_vec(&imgs[k]);
                    for i in 0..nt {
                        let mut v = -&lhs[i];
                        for (l, cl) in c.iter().enumerate() {
                            if !cl.is_zero() && !imgs[l][i].is_zero() {
                                v = &v + &(cl * &imgs[l][i]);
                            }
                        }
                        block[i][u] = v;
                    }
                }
                rows.extend(block.into_iter().filter(|r| r.iter().any(|x| !x.is_zero())));
            }
        }
        let nu = unknowns.len();
        let sys = if rows.is_empty() { Mat::zeros(f, 1, nu) } else { Mat::from_rows(f, rows) };
        sys.kernel()
            .into_iter()
            .map(|x| {
                let cols: Vec<Vec<Scalar>> = (0..ns)
                    .map(|l| {
                        let mut v = vec![f.zero(); nt];
                        for (u, xu) in x.iter().enumerate() {
                            if xu.is_zero() {
                                continue;
                            }
                            for i in 0..nt {
                                if !images[u][l][i].is_zero() {
                                    v[i] = &v[i] + &(xu * &images[u][l][i]);
                                }
                            }
                        }
                        v
                    })
                    .collect();
                Mat::from_cols(f, nt, &cols).mul(&winv)
            })
            .collect()
    }

    pub fn is_module_map(&self, target: &SoergelModule, phi: &Mat) -> bool {
        (0..self.action.len()).all(|t| phi.mul(&self.action[t]) == target.action[t].mul(phi))
    }

    /// The adjoint `φ^*: target → self` with `⟨φ^*c, b⟩ = ⟨c, φb⟩`.
    pub fn adjoint(&self, target: &SoergelModule, phi: &Mat) -> Mat {
        let finv = self.form.inverse().expect("form is non-degenerate");
        finv.mul(&phi.transpose()).mul(&target.form)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bimodule::{intersection_form, BSElt, BSWord};
    use crate::coxeter::CoxeterSystem;

    fn real(name: &str) -> Realization {
        Realization::new(&CoxeterSystem::preset(name).unwrap()).unwrap()
    }

    fn letters(w: &str) -> Vec<u8> {
        w.bytes().map(|b| b - b'1').collect()
    }

    fn mask_of(idx: usize, d: usize) -> u32 {
        (0..d).filter(|k| idx >> (d - 1 - k) & 1 == 1).map(|k| 1u32 << k).sum()
    }

    #[test]
    fn model_matches_straightening() {
        for (name, w) in [("A2", "121"), ("B2", "1212"), ("A3", "2132"), ("I2:5", "11")] {
            let r = real(name);
            let word = BSWord::parse(w, r.rank()).unwrap();
            let d = word.len();
            let m = FreeBimodule::bott_samelson(&r, &letters(w));
            let basis: Vec<BSElt> = (0..m.rank()).map(|i| BSElt::right_basis(&r, &word, mask_of(i, d))).collect();
            for j in 0..m.rank() {
                for t in 0..r.rank() {
                    let lhs = basis[j].left_mul(&r.var(t));
                    let mut rhs = BSElt::zero(&word);
                    for i in 0..m.rank() {
                        rhs = rhs.add(&basis[i].right_mul(&r, m.action(t).get(i, j)));
                    }
                    assert_eq!(lhs, rhs, "{name} {w} x{} b{j}", t + 1);
                }
                for i in 0..m.rank() {
                    assert_eq!(&intersection_form(&r, &basis[i], &basis[j]).unwrap(), m.gram().get(i, j));
                }
            }
        }
    }

    #[test]
    fn graded_inverse_of_gram() {
        let r = real("B2");
        let m = FreeBimodule::bott_samelson(&r, &letters("1212"));
        let inv = m.gram().graded_inverse().unwrap();
        assert_eq!(m.gram().mul(&inv), PolyMat::identity(r.field(), m.rank()));
    }

    #[test]
    fn module_of_product_is_tensor_of_models() {
        let r = real("A2");
        let left = FreeBimodule::bott_samelson(&r, &letters("12"));
        let right = FreeBimodule::bott_samelson(&r, &letters("21")).soergel_module();
        let direct = FreeBimodule::bott_samelson(&r, &letters("1221")).soergel_module();
        let prod = left.tensor_module(&r, &right);
        assert_eq!(prod.degrees(), direct.degrees());
        assert_eq!(prod.form(), direct.form());
        for t in 0..2 {
            assert_eq!(prod.action(t), direct.action(t));
        }
        assert_eq!(prod.gaps().len(), 1);
    }

    fn hom_dims(r: &Realization, a: &str, b: &str, ds: std::ops::RangeInclusive<i32>) -> Vec<usize> {
        let (s, t) = (FreeBimodule::bott_samelson(r, &letters(a)), FreeBimodule::bott_samelson(r, &letters(b)));
        ds.map(|d| {
            let h = s.hom(&t, d);
            for phi in &h {
                assert!(s.is_bimodule_map(&t, phi));
            }
            h.len()
        })
        .collect()
    }

    #[test]
    fn low_degree_homs() {
        let r = real("A2");
        assert_eq!(hom_dims(&r, "11", "1", -3..=-1), vec![0, 0, 1]);
        assert_eq!(hom_dims(&r, "1212", "12", 0..=0), vec![2]);
        assert_eq!(hom_dims(&r, "12", "21", -2..=0), vec![0, 0, 0]);
    }

    #[test]
    fn bimodule_homs_are_free_over_scalar_homs() {
        // grdim Hom(B, B') = grdim Hom(B ⊗ ℝ, B' ⊗ ℝ) · grdim R
        let r = real("A2");
        let ring = |k: i32| if k < 0 || k % 2 != 0 { 0 } else { (k / 2 + 1) as usize };
        for (a, b) in [("11", "1"), ("12", "12"), ("121", "1")] {
            let (s, t) = (FreeBimodule::bott_samelson(&r, &letters(a)), FreeBimodule::bott_samelson(&r, &letters(b)));
            let (vs, vt) = (s.soergel_module(), t.soergel_module());
            let lo = -((a.len() + b.len()) as i32);
            for d in lo..=lo + 4 {
                let expect: usize = (lo..=d).map(|e| vs.hom(&vt, e).len() * ring(d - e)).sum();
                assert_eq!(s.hom(&t, d).len(), expect, "{a} -> {b} degree {d}");
            }
        }
    }

    #[test]
    fn adjoint_and_image() {
        let r = real("A2");
        let (bs, b) = (FreeBimodule::bott_samelson(&r, &letters("11")), FreeBimodule::bott_samelson(&r, &letters("1")));
        // the adjoint keeps the degree, so pair the lowest maps of degree ±1
        let low = b.hom(&bs, -1);
        assert_eq!(low.len(), 1);
        let psi = b.adjoint(&bs, &low[0]);
        assert!(bs.is_bimodule_map(&b, &psi));
        assert_eq!(b.gram().mul(&psi), low[0].transpose().mul(bs.gram()));
        let phi = b.hom(&bs, 1).into_iter().find(|phi| !psi.mul(phi).is_zero()).unwrap();
        let k = psi.mul(&phi).constant_part()[(0, 0)].clone();
        assert!(!k.is_zero());
        assert_eq!(psi.mul(&phi), PolyMat::identity(r.field(), 2).scale(&k));
        let e = phi.mul(&psi).scale(&k.inv());
        assert_eq!(e.mul(&e), e);
        let (img, p, proj) = bs.image(&e);
        assert_eq!(img.rank(), 2);
        for t in 0..2 {
            assert_eq!(bs.action(t).mul(&p), p.mul(img.action(t)));
        }
        assert_eq!(proj.mul(&p), PolyMat::identity(r.field(), 2));
    }

    #[test]
    fn scalar_adjoint_is_module_map() {
        let r = real("B2");
        let s = FreeBimodule::bott_samelson(&r, &letters("212")).soergel_module();
        let t = FreeBimodule::bott_samelson(&r, &letters("2")).soergel_module();
        for d in -3..=3 {
            for phi in s.hom(&t, d) {
                assert!(s.is_module_map(&t, &phi));
                assert!(t.is_module_map(&s, &s.adjoint(&t, &phi)));
            }
        }
    }
}
