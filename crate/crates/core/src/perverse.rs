//! Decomposition of products of indecomposable Soergel bimodules, their
//! multiplicity spaces, and the hard Lefschetz / Hodge–Riemann checks.
//!
//! Indecomposables `B_x` are built once as right-free models by splitting
//! `B_{xs} B_s`. Products are only ever needed through their Soergel modules
//! `B_{x_1} ⋯ B_{x_m} ⊗_R ℝ`, where degree-zero maps already see the whole
//! decomposition; summands are peeled with projectors that are self-adjoint
//! for the intersection form, so the form restricts to every summand.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::bimodule::free::{FreeBimodule, PolyMat, SoergelModule};
use crate::bimodule::BSWord;
use crate::coxeter::CoxeterError;
use crate::exact::{Mat, NumberField, Scalar};
use crate::hecke::{HeckeElt, HeckeError, KLTable};
use crate::realization::{Realization, RealizationError};

/// Largest total word length of a product handled by the pipeline.
pub const PRODUCT_LENGTH_CAP: usize = 12;

#[derive(Debug, Error)]
pub enum PerverseError {
    #[error(transparent)]
    Hecke(#[from] HeckeError),
    #[error(transparent)]
    Coxeter(#[from] CoxeterError),
    #[error(transparent)]
    Realization(#[from] RealizationError),
    #[error("total length {len} exceeds the cap {cap}")]
    Cap { len: usize, cap: usize },
    #[error("could not split off B_{z}({shift}): no map with invertible pairing")]
    Peel { z: String, shift: i32 },
    #[error("degree-zero endomorphism of B_{0} is not a scalar")]
    NonScalar(String),
    #[error("decomposition misses {0} dimensions of the product")]
    Incomplete(usize),
    #[error("reference pairs disagree for B_{0}")]
    ReferenceMismatch(String),
    #[error("need at least one factor")]
    NoFactors,
    #[error("{expected} Lefschetz scalars needed, got {got}")]
    ScalarCount { expected: usize, got: usize },
}

/// A model of an indecomposable `B_x` and its Soergel module.
#[derive(Clone, Debug)]
pub struct Indecomposable {
    pub x: usize,
    pub bimodule: FreeBimodule,
    pub module: SoergelModule,
    /// Basis index of the generator, the unique element of degree `−ℓ(x)`.
    pub generator: usize,
}

/// Models of indecomposable bimodules, built on demand and then shared.
pub struct ModelCache<'a> {
    realization: Realization,
    kl: &'a KLTable,
    models: Vec<Option<Indecomposable>>,
}

impl<'a> ModelCache<'a> {
    pub fn new(kl: &'a KLTable) -> Result<ModelCache<'a>, PerverseError> {
        let realization = Realization::new(kl.system())?;
        Ok(ModelCache { realization, kl, models: vec![None; kl.len()] })
    }

    pub fn realization(&self) -> &Realization {
        &self.realization
    }

    pub fn kl(&self) -> &'a KLTable {
        self.kl
    }

    pub fn field(&self) -> &'static NumberField {
        self.realization.field()
    }

    pub fn is_built(&self, x: usize) -> bool {
        self.models[x].is_some()
    }

    /// The model of `B_x`; panics unless [`ModelCache::ensure`] ran first.
    pub fn get(&self, x: usize) -> &Indecomposable {
        self.models[x].as_ref().expect("model not built; call ensure first")
    }

    /// Build `B_x` and everything it depends on.
    pub fn ensure(&mut self, x: usize) -> Result<&Indecomposable, PerverseError> {
        if self.models[x].is_none() {
            let m = self.build(x)?;
            self.models[x] = Some(m);
        }
        Ok(self.models[x].as_ref().unwrap())
    }

    fn build(&mut self, x: usize) -> Result<Indecomposable, PerverseError> {
        let table = self.kl.table().clone();
        let r = &self.realization;
        let bimodule = if x == 0 {
            FreeBimodule::unit(r)
        } else {
            let s = *table.elem(x).word().last().unwrap() as usize;
            let xs = table.rmul(x, s).expect("descent");
            let lower: Vec<(usize, i64)> = self
                .kl
                .mu_edges(xs)
                .iter()
                .map(|&(z, m)| (z as usize, m))
                .filter(|&(z, _)| table.has_right_descent(z, s))
                .collect();
            for &(z, _) in &lower {
                self.ensure(z)?;
            }
            self.ensure(xs)?;
            let r = &self.realization;
            let mut n = self.get(xs).bimodule.tensor_s(r, s);
            for (z, mult) in lower {
                let bz = &self.get(z).bimodule;
                n = split_off(bz, &n, mult as usize).ok_or_else(|| PerverseError::Peel {
                    z: table.elem(z).to_text(r.rank()),
                    shift: 0,
                })?;
            }
            n
        };
        let module = bimodule.soergel_module();
        let lx = table.length(x) as i32;
        let generator = bimodule.degrees().iter().position(|&d| d == -lx).expect("generator degree");
        Ok(Indecomposable { x, bimodule, module, generator })
    }
}

/// The scalar `c` with `m = c·id`, if `m` is one.
fn scalar_of(m: &Mat) -> Option<Scalar> {
    let c = if m.rows() == 0 { return None } else { m[(0, 0)].clone() };
    (m == &Mat::identity(m.field(), m.rows()).scale(&c)).then_some(c)
}

fn scalar_of_poly(m: &PolyMat) -> Option<Scalar> {
    let c0 = m.constant_part();
    (PolyMat::from_scalar(&c0) == *m).then_some(()).and_then(|_| scalar_of(&c0))
}

/// Orthogonal vectors with nonzero self-pairing spanning a complement of the
/// radical of the symmetric form `k` (a Gram–Schmidt over any field of
/// characteristic zero).
fn orthogonal_basis(k: &Mat) -> Vec<(Vec<Scalar>, Scalar)> {
    let f = k.field();
    let n = k.rows();
    let pair = |a: &[Scalar], b: &[Scalar]| -> Scalar {
        let kb = k.mul_vec(b);
        a.iter().zip(&kb).fold(f.zero(), |acc, (x, y)| &acc + &(x * y))
    };
    let mut pool: Vec<Vec<Scalar>> = (0..n)
        .map(|i| {
            let mut v = vec![f.zero(); n];
            v[i] = f.one();
            v
        })
        .collect();
    let mut out = Vec::new();
    loop {
        let mut pick = pool.iter().position(|v| !pair(v, v).is_zero()).map(|i| pool.remove(i));
        if pick.is_none() {
            'outer: for i in 0..pool.len() {
                for j in i + 1..pool.len() {
                    let s: Vec<Scalar> = pool[i].iter().zip(&pool[j]).map(|(a, b)| a + b).collect();
                    if !pair(&s, &s).is_zero() {
                        pool.remove(j);
                        pick = Some(s);
                        break 'outer;
                    }
                }
            }
        }
        let Some(v) = pick else { break };
        let q = pair(&v, &v);
        let qinv = q.inv();
        for w in pool.iter_mut() {
            let c = &pair(&v, w) * &qinv;
            if !c.is_zero() {
                for (a, b) in w.iter_mut().zip(&v) {
                    *a = &*a - &(&c * b);
                }
            }
        }
        out.push((v, q));
    }
    out
}

/// Split `mult` copies of the indecomposable `bz` off `n` (all in degree
/// zero) and return a model of the orthogonal complement.
fn split_off(bz: &FreeBimodule, n: &FreeBimodule, mult: usize) -> Option<FreeBimodule> {
    let f = n.field();
    let phis = bz.hom(n, 0);
    let psis: Vec<PolyMat> = phis.iter().map(|p| bz.adjoint(n, p)).collect();
    let k = Mat::from_fn(f, phis.len(), phis.len(), |i, j| scalar_of_poly(&psis[i].mul(&phis[j])).expect("Hom-vanishing"));
    let basis = orthogonal_basis(&k);
    if basis.len() != mult {
        return None;
    }
    let mut pi = PolyMat::zeros(f, n.rank(), n.rank());
    for (v, q) in basis {
        let mut phi = PolyMat::zeros(f, n.rank(), bz.rank());
        let mut psi = PolyMat::zeros(f, bz.rank(), n.rank());
        for (i, c) in v.iter().enumerate() {
            if !c.is_zero() {
                phi = phi.add(&phis[i].scale(c));
                psi = psi.add(&psis[i].scale(c));
            }
        }
        pi = pi.add(&phi.mul(&psi).scale(&q.inv()));
    }
    let e = PolyMat::identity(f, n.rank()).sub(&pi);
    Some(n.image(&e).0)
}

/// `C_{x_1} ⋯ C_{x_m} = Σ_z μ^z C_z`, as `z → (v-exponent → coefficient)`.
pub fn expected_multiplicities(kl: &KLTable, factors: &[usize]) -> Result<BTreeMap<usize, BTreeMap<i32, usize>>, PerverseError> {
    let (first, rest) = factors.split_first().ok_or(PerverseError::NoFactors)?;
    let mut acc = HeckeElt::basis(*first);
    for &y in rest {
        acc = kl.kl_mul(&acc, y)?;
    }
    Ok(acc
        .terms()
        .map(|(z, p)| (z, p.terms().map(|(e, c)| (e, c.to_i64().expect("small multiplicity") as usize)).collect()))
        .collect())
}

/// One summand `B_z(shift)` of a product, given by maps on Soergel modules:
/// `incl: V(B_z) → V` of degree `−shift` and `proj: V → V(B_z)` of degree
/// `shift`.
#[derive(Clone, Debug)]
pub struct Summand {
    pub z: usize,
    pub shift: i32,
    pub incl: Mat,
    pub proj: Mat,
}

impl Summand {
    /// Perverse degree `i` of the summand: it contributes to `H^i` with `i = −shift`.
    pub fn perverse_degree(&self) -> i32 {
        -self.shift
    }
}

/// A complete decomposition of `V(B_{x_1} ⋯ B_{x_m})`.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub factors: Vec<usize>,
    pub module: SoergelModule,
    pub summands: Vec<Summand>,
}

impl<'a> ModelCache<'a> {
    /// Build every model a product computation needs.
    pub fn prepare(&mut self, factors: &[usize]) -> Result<BTreeMap<usize, BTreeMap<i32, usize>>, PerverseError> {
        let len: usize = factors.iter().map(|&x| self.kl.table().length(x)).sum();
        if len > PRODUCT_LENGTH_CAP {
            return Err(PerverseError::Cap { len, cap: PRODUCT_LENGTH_CAP });
        }
        let expected = expected_multiplicities(self.kl, factors)?;
        for &x in factors.iter().chain(expected.keys()) {
            self.ensure(x)?;
        }
        Ok(expected)
    }

    /// `V(B_{x_1} ⋯ B_{x_m})` with its form and the gap operators.
    pub fn product_module(&self, factors: &[usize]) -> Result<SoergelModule, PerverseError> {
        let (last, init) = factors.split_last().ok_or(PerverseError::NoFactors)?;
        let mut m = self.get(*last).module.clone();
        for &x in init.iter().rev() {
            m = self.get(x).bimodule.tensor_module(&self.realization, &m);
        }
        Ok(m)
    }

    fn name(&self, z: usize) -> String {
        self.kl.table().elem(z).to_text(self.realization.rank())
    }

    /// Split the product into indecomposable summands by peeling, largest
    /// `z` first, each time inside the orthogonal complement of what was
    /// already split off.
    pub fn decompose(&mut self, factors: &[usize]) -> Result<Decomposition, PerverseError> {
        let expected = self.prepare(factors)?;
        let this = &*self;
        let module = this.product_module(factors)?;
        let f = this.field();
        let n = module.dim();
        let mut rest = Mat::identity(f, n);
        let mut summands = Vec::new();
        let table = this.kl.table();
        let mut order: Vec<usize> = expected.keys().copied().collect();
        order.sort_by_key(|&z| (std::cmp::Reverse(table.length(z)), z));
        for z in order {
            let vz = &this.get(z).module;
            let scalar = |m: &Mat| scalar_of(m).ok_or_else(|| PerverseError::NonScalar(this.name(z)));
            let adj = |phi: &Mat| vz.adjoint(&module, phi);
            let peel_err = |shift: i32| PerverseError::Peel { z: this.name(z), shift };
            for (&k, &count) in expected[&z].range(0..) {
                if count == 0 {
                    continue;
                }
                if k == 0 {
                    let phis: Vec<Mat> = vz.hom(&module, 0).iter().map(|p| rest.mul(p)).collect();
                    let kmat = gram_of(f, &phis, &phis, &adj, &scalar)?;
                    let basis = orthogonal_basis(&kmat);
                    if basis.len() != count {
                        return Err(peel_err(0));
                    }
                    for (v, q) in basis {
                        let phi = combine(f, &phis, &v, n, vz.dim());
                        let proj = adj(&phi).scale(&q.inv());
                        rest = rest.sub(&phi.mul(&proj));
                        summands.push(Summand { z, shift: 0, incl: phi, proj });
                    }
                    continue;
                }
                if expected[&z].get(&-k) != Some(&count) {
                    return Err(peel_err(k));
                }
                let lows: Vec<Mat> = vz.hom(&module, -k).iter().map(|p| rest.mul(p)).collect();
                let highs: Vec<Mat> = vz.hom(&module, k).iter().map(|p| rest.mul(p)).collect();
                let kmat = gram_of(f, &lows, &highs, &adj, &scalar)?;
                let cols = kmat.clone().rref();
                let rows = kmat.transpose().rref();
                if cols.len() != count || rows.len() != count {
                    return Err(peel_err(k));
                }
                let inv = kmat.select(&rows, &cols).inverse().expect("pivot block");
                let low: Vec<Mat> = rows.iter().map(|&i| lows[i].clone()).collect();
                let high: Vec<Mat> = (0..count)
                    .map(|b| {
                        let v: Vec<Scalar> = (0..count).map(|j| inv[(j, b)].clone()).collect();
                        let picked: Vec<Mat> = cols.iter().map(|&j| highs[j].clone()).collect();
                        combine(f, &picked, &v, n, vz.dim())
                    })
                    .collect();
                let half = f.int(2).inv();
                let high_adj: Vec<Mat> = high.iter().map(|h| adj(h)).collect();
                let corrected: Vec<Mat> = (0..count)
                    .map(|b| {
                        let mut out = high[b].clone();
                        for a in 0..count {
                            let alpha = high_adj[a].mul(&high[b]).scale(&half);
                            out = out.sub(&low[a].mul(&alpha));
                        }
                        out
                    })
                    .collect();
                for a in 0..count {
                    let up = Summand { z, shift: k, incl: low[a].clone(), proj: adj(&corrected[a]) };
                    let down = Summand { z, shift: -k, incl: corrected[a].clone(), proj: adj(&low[a]) };
                    rest = rest.sub(&up.incl.mul(&up.proj)).sub(&down.incl.mul(&down.proj));
                    summands.push(up);
                    summands.push(down);
                }
            }
        }
        if !rest.is_zero() {
            return Err(PerverseError::Incomplete(rest.rank()));
        }
        Ok(Decomposition { factors: factors.to_vec(), module, summands })
    }
}

/// `K[i][j] = scalar(a_i^* b_j)`.
fn gram_of(
    f: &'static NumberField,
    a: &[Mat],
    b: &[Mat],
    adj: &dyn Fn(&Mat) -> Mat,
    scalar: &dyn Fn(&Mat) -> Result<Scalar, PerverseError>,
) -> Result<Mat, PerverseError> {
    let adjs: Vec<Mat> = a.iter().map(adj).collect();
    let mut k = Mat::zeros(f, a.len(), b.len());
    for (i, ai) in adjs.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            k[(i, j)] = scalar(&ai.mul(bj))?;
        }
    }
    Ok(k)
}

fn combine(f: &'static NumberField, maps: &[Mat], coeffs: &[Scalar], rows: usize, cols: usize) -> Mat {
    let mut out = Mat::zeros(f, rows, cols);
    for (m, c) in maps.iter().zip(coeffs) {
        if !c.is_zero() {
            out = out.add(&m.scale(c));
        }
    }
    out
}

impl Decomposition {
    /// `proj_a ∘ incl_b = δ_ab` and `Σ incl_a ∘ proj_a = id`.
    pub fn is_complete(&self) -> bool {
        let f = self.module.field();
        let n = self.module.dim();
        let mut total = Mat::zeros(f, n, n);
        for (a, sa) in self.summands.iter().enumerate() {
            total = total.add(&sa.incl.mul(&sa.proj));
            for (b, sb) in self.summands.iter().enumerate() {
                let m = sa.proj.mul(&sb.incl);
                let ok = if a == b { m == Mat::identity(f, m.rows()) } else { m.is_zero() };
                if !ok {
                    return false;
                }
            }
        }
        total == Mat::identity(f, n)
    }

    /// `z → (perverse degree i → dim H^i_z)`.
    pub fn multiplicities(&self) -> BTreeMap<usize, BTreeMap<i32, usize>> {
        let mut out: BTreeMap<usize, BTreeMap<i32, usize>> = BTreeMap::new();
        for s in &self.summands {
            *out.entry(s.z).or_default().entry(s.perverse_degree()).or_insert(0) += 1;
        }
        out
    }
}

/// Multiplicity spaces `H^•_z` of one `z` with the induced Lefschetz maps
/// and pairings, in the basis given by the summands.
#[derive(Clone, Debug)]
pub struct MultiplicitySpace {
    pub z: usize,
    /// Summand indices spanning `H^i`.
    pub spaces: BTreeMap<i32, Vec<usize>>,
    /// `H^i → H^{i+2}`, rows indexed by `H^{i+2}`.
    pub lefschetz: BTreeMap<i32, Mat>,
    /// `H^i × H^{−i} → ℝ`.
    pub pairing: BTreeMap<i32, Mat>,
}

impl MultiplicitySpace {
    pub fn dim(&self, i: i32) -> usize {
        self.spaces.get(&i).map_or(0, Vec::len)
    }

    /// `L^d: H^{−d} → H^d`.
    pub fn lefschetz_power(&self, f: &'static NumberField, from: i32, d: usize) -> Mat {
        let mut out = Mat::identity(f, self.dim(from));
        for step in 0..d as i32 {
            let i = from + 2 * step;
            let l = self.lefschetz.get(&i).cloned().unwrap_or_else(|| Mat::zeros(f, self.dim(i + 2), self.dim(i)));
            out = l.mul(&out);
        }
        out
    }
}

impl Decomposition {
    /// Matrices of an operator `op` (degree 2, commuting with the left
    /// action) on the multiplicity spaces: entry `(b, a)` is the scalar of
    /// `proj_b ∘ op ∘ incl_a` for `a ∈ H^i`, `b ∈ H^{i+2}`.
    pub fn induced(&self, op: &Mat) -> Result<BTreeMap<usize, BTreeMap<i32, Mat>>, PerverseError> {
        let f = self.module.field();
        let mut out = BTreeMap::new();
        for (z, spaces) in self.spaces() {
            let mut per = BTreeMap::new();
            for (&i, src) in &spaces {
                let Some(dst) = spaces.get(&(i + 2)) else { continue };
                let mut m = Mat::zeros(f, dst.len(), src.len());
                for (a, &sa) in src.iter().enumerate() {
                    let moved = op.mul(&self.summands[sa].incl);
                    for (b, &sb) in dst.iter().enumerate() {
                        let e = self.summands[sb].proj.mul(&moved);
                        m[(b, a)] = scalar_of(&e).ok_or_else(|| PerverseError::NonScalar(format!("{z}")))?;
                    }
                }
                per.insert(i, m);
            }
            out.insert(z, per);
        }
        Ok(out)
    }

    fn spaces(&self) -> BTreeMap<usize, BTreeMap<i32, Vec<usize>>> {
        let mut out: BTreeMap<usize, BTreeMap<i32, Vec<usize>>> = BTreeMap::new();
        for (idx, s) in self.summands.iter().enumerate() {
            out.entry(s.z).or_default().entry(s.perverse_degree()).or_default().push(idx);
        }
        out
    }

    /// The Lefschetz operator `Σ a_j·ρ` in the internal gaps.
    pub fn lefschetz_operator(&self, a: &[Scalar]) -> Result<Mat, PerverseError> {
        let gaps = self.module.gaps();
        if gaps.len() != a.len() {
            return Err(PerverseError::ScalarCount { expected: gaps.len(), got: a.len() });
        }
        let f = self.module.field();
        let n = self.module.dim();
        Ok(gaps.iter().zip(a).fold(Mat::zeros(f, n, n), |acc, (g, c)| acc.add(&g.scale(c))))
    }
}

impl<'a> ModelCache<'a> {
    /// Reference pairs `(u, u′)` in `V(B_z)` with `⟨u, u′⟩ ≠ 0`: powers of
    /// `ρ` applied to the generator.
    fn reference_pairs(&self, z: usize) -> Vec<(Vec<Scalar>, Vec<Scalar>)> {
        let m = self.get(z);
        let f = self.field();
        let l = self.kl.table().length(z) as u32;
        let rho = m.module.left_mul_matrix(&self.realization.rho());
        let mut gen = vec![f.zero(); m.module.dim()];
        gen[m.generator] = f.one();
        let power = |k: u32| (0..k).fold(gen.clone(), |v, _| rho.mul_vec(&v));
        vec![(gen.clone(), power(l)), (power(l.div_ceil(2)), power(l / 2))]
    }

    /// Multiplicity spaces of a decomposition with the maps induced by the
    /// Lefschetz operator `Σ a_j ρ` and the pairings, read off from the
    /// intersection form through two reference pairs.
    pub fn multiplicity_data(&self, d: &Decomposition, a: &[Scalar]) -> Result<Vec<MultiplicitySpace>, PerverseError> {
        let f = self.field();
        let op = d.lefschetz_operator(a)?;
        let mut lefschetz = d.induced(&op)?;
        let form = d.module.form();
        let pair = |u: &[Scalar], w: &[Scalar], g: &Mat| -> Scalar {
            let gw = g.mul_vec(w);
            u.iter().zip(&gw).fold(f.zero(), |acc, (x, y)| &acc + &(x * y))
        };
        let mut out = Vec::new();
        for (z, spaces) in d.spaces() {
            let fz = self.get(z).module.form();
            let refs = self.reference_pairs(z);
            let mut pairing = BTreeMap::new();
            for (&i, src) in &spaces {
                let Some(dst) = spaces.get(&-i) else { continue };
                let mut k = Mat::zeros(f, src.len(), dst.len());
                for (a, &sa) in src.iter().enumerate() {
                    for (b, &sb) in dst.iter().enumerate() {
                        let mut vals = refs.iter().map(|(u, w)| {
                            let base = pair(u, w, fz);
                            let (iu, iw) = (d.summands[sa].incl.mul_vec(u), d.summands[sb].incl.mul_vec(w));
                            &pair(&iu, &iw, form) * &base.inv()
                        });
                        let first = vals.next().unwrap();
                        if vals.any(|v| v != first) {
                            return Err(PerverseError::ReferenceMismatch(self.name(z)));
                        }
                        k[(a, b)] = first;
                    }
                }
                pairing.insert(i, k);
            }
            out.push(MultiplicitySpace { z, lefschetz: lefschetz.remove(&z).unwrap_or_default(), spaces, pairing });
        }
        Ok(out)
    }
}

/// One `(z, d)` line of a hard Lefschetz check.
#[derive(Clone, Debug, Serialize)]
pub struct LefschetzEntry {
    pub z: String,
    pub d: usize,
    pub dim: usize,
    pub rank: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LefschetzReport {
    pub x: String,
    pub y: String,
    pub a: Vec<String>,
    pub results: Vec<LefschetzEntry>,
}

impl LefschetzReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }
}

/// One `(z, d)` line of a Hodge–Riemann check.
#[derive(Clone, Debug, Serialize)]
pub struct SignatureEntry {
    pub z: String,
    pub d: usize,
    /// Rank of `L^d: H^{−d} → H^d`.
    pub rank: usize,
    /// Signature of the Lefschetz form on `H^{−d}`.
    pub signature: i64,
    pub primitive_dim: usize,
    pub primitive_signature: i64,
    pub epsilon: i64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SignatureReport {
    pub x: String,
    pub y: String,
    pub a: Vec<String>,
    pub results: Vec<SignatureEntry>,
}

impl SignatureReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }
}

/// Per-`(z, d)` data shared by the two checks.
struct LefschetzData {
    z: usize,
    d: usize,
    dim: usize,
    dim_high: usize,
    rank: usize,
    form: Mat,
    primitive: Mat,
}

/// `L^d: H^{−d} → H^d` is square and invertible.
fn square(e: &LefschetzData) -> bool {
    e.dim == e.dim_high && e.rank == e.dim
}

impl<'a> ModelCache<'a> {
    fn lefschetz_data(&mut self, factors: &[usize], a: &[Scalar]) -> Result<Vec<LefschetzData>, PerverseError> {
        let d = self.decompose(factors)?;
        self.lefschetz_data_for(&d, a)
    }

    fn lefschetz_data_for(&self, d: &Decomposition, a: &[Scalar]) -> Result<Vec<LefschetzData>, PerverseError> {
        let f = self.field();
        let mut out = Vec::new();
        for ms in self.multiplicity_data(d, a)? {
            let top = ms.spaces.keys().map(|i| i.unsigned_abs() as usize).max().unwrap_or(0);
            for deg in 0..=top {
                let low = -(deg as i32);
                let dim = ms.dim(low);
                if dim == 0 && ms.dim(-low) == 0 {
                    continue;
                }
                let ld = ms.lefschetz_power(f, low, deg);
                let rank = ld.rank();
                let form = match ms.pairing.get(&low) {
                    Some(k) => k.mul(&ld),
                    None => Mat::zeros(f, dim, dim),
                };
                let kernel = ms.lefschetz_power(f, low, deg + 1).kernel();
                let primitive = if kernel.is_empty() {
                    Mat::zeros(f, 0, 0)
                } else {
                    let basis = Mat::from_cols(f, dim, &kernel);
                    basis.transpose().mul(&form).mul(&basis)
                };
                out.push(LefschetzData { z: ms.z, d: deg, dim, dim_high: ms.dim(-low), rank, form, primitive });
            }
        }
        Ok(out)
    }

    fn factor_names(&self, factors: &[usize]) -> Vec<String> {
        factors.iter().map(|&x| self.name(x)).collect()
    }

    /// Relative hard Lefschetz for `B_{x_1} ⋯ B_{x_m}`: every `L^d: H^{−d}_z → H^d_z`
    /// is square and invertible.
    pub fn check_rhl(&mut self, factors: &[usize], a: &[Scalar]) -> Result<LefschetzReport, PerverseError> {
        let data = self.lefschetz_data(factors, a)?;
        let names = self.factor_names(factors);
        let results = data
            .iter()
            .map(|e| LefschetzEntry { z: self.name(e.z), d: e.d, dim: e.dim, rank: e.rank, pass: square(e) })
            .collect();
        Ok(LefschetzReport { x: names[0].clone(), y: names[1..].join(","), a: a.iter().map(|c| c.to_string()).collect(), results })
    }


    /// Relative Hodge–Riemann: the Lefschetz form `(u, w) ↦ ⟨u, L^d w⟩` on
    /// the primitive part of `H^{−d}_z` is `(−1)^ε`-definite with
    /// `ε = (Σℓ(x_i) − ℓ(z) − d)/2`.
    pub fn check_rhr(&mut self, factors: &[usize], a: &[Scalar]) -> Result<SignatureReport, PerverseError> {
        let data = self.lefschetz_data(factors, a)?;
        let table = self.kl.table().clone();
        let total: i64 = factors.iter().map(|&x| table.length(x) as i64).sum();
        let names = self.factor_names(factors);
        let results = data
            .iter()
            .map(|e| {
                let twice = total - table.length(e.z) as i64 - e.d as i64;
                let epsilon = twice.div_euclid(2);
                let pdim = e.primitive.rows();
                let (pos, neg, zero) = if pdim == 0 { (0, 0, 0) } else { e.primitive.inertia() };
                let definite = zero == 0 && if epsilon % 2 == 0 { neg == 0 } else { pos == 0 };
                let signature = if e.dim == 0 || !e.form.is_symmetric() { 0 } else { e.form.signature() };
                SignatureEntry {
                    z: self.name(e.z),
                    d: e.d,
                    rank: e.rank,
                    signature,
                    primitive_dim: pdim,
                    primitive_signature: pos as i64 - neg as i64,
                    epsilon,
                    pass: twice % 2 == 0 && square(e) && e.form.is_symmetric() && definite,
                }
            })
            .collect();
        Ok(SignatureReport { x: names[0].clone(), y: names[1..].join(","), a: a.iter().map(|c| c.to_string()).collect(), results })
    }
}

impl<'a> ModelCache<'a> {
    /// Hodge–Riemann check for an `m`-fold product; `a` has one scalar per
    /// gap between factors. For `m = 2` this is [`ModelCache::check_rhr`].
    pub fn check_rhr_multi(&mut self, factors: &[usize], a: &[Scalar]) -> Result<SignatureReport, PerverseError> {
        if factors.len() != a.len() + 1 {
            return Err(PerverseError::ScalarCount { expected: factors.len().saturating_sub(1), got: a.len() });
        }
        self.check_rhr(factors, a)
    }

    /// Signatures of the Lefschetz forms along the straight path of scalars
    /// from `start` to `end`, sampled at `samples` evenly spaced points.
    pub fn conservation_scan(&mut self, factors: &[usize], start: &[Scalar], end: &[Scalar], samples: usize) -> Result<ConservationReport, PerverseError> {
        let d = self.decompose(factors)?;
        let f = self.field();
        let steps = samples.max(2) - 1;
        let mut out = Vec::new();
        for k in 0..=steps {
            let t = &f.int(k as i64) * &f.int(steps as i64).inv();
            let a: Vec<Scalar> = start.iter().zip(end).map(|(p, q)| p + &(&t * &(q - p))).collect();
            let data = self.lefschetz_data_for(&d, &a)?;
            let degenerate = data.iter().any(|e| !square(e));
            let signatures = data
                .iter()
                .filter(|e| e.dim > 0 && e.form.is_symmetric())
                .map(|e| (format!("{}@{}", self.name(e.z), e.d), e.form.signature()))
                .collect();
            out.push(ConservationSample { t: t.to_string(), a: a.iter().map(|c| c.to_string()).collect(), degenerate, signatures });
        }
        let constant = out.windows(2).all(|w| w[0].signatures == w[1].signatures);
        Ok(ConservationReport { factors: self.factor_names(factors), samples: out, constant })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConservationSample {
    pub t: String,
    pub a: Vec<String>,
    /// Some `L^d` failed to be an isomorphism at this point.
    pub degenerate: bool,
    /// `"z@d"` → signature of the Lefschetz form on `H^{−d}_z`.
    pub signatures: BTreeMap<String, i64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConservationReport {
    pub factors: Vec<String>,
    pub samples: Vec<ConservationSample>,
    pub constant: bool,
}

impl ConservationReport {
    pub fn passed(&self) -> bool {
        self.constant && self.samples.iter().all(|s| !s.degenerate)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockSignatureReport {
    pub n: usize,
    /// Signature of `[[R, R], [R, 0]]`.
    pub two_block: i64,
    /// Signature of `[[R, R, 0], [R, 0, 0], [0, 0, Q]]`.
    pub three_block: i64,
    pub q_signature: i64,
    pub pass: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BlockSignatureError {
    #[error("R is singular")]
    Singular,
    #[error("R and Q must be symmetric")]
    NotSymmetric,
}

/// The Gram matrix `[[R, R], [R, 0]]` of a Lefschetz form glued from two
/// copies of an invertible symmetric `R` has signature zero, so appending a
/// block `Q` leaves the signature of `Q` unchanged.
pub fn block_signature_check(r: &Mat, q: &Mat) -> Result<BlockSignatureReport, BlockSignatureError> {
    if !r.is_symmetric() || !q.is_symmetric() {
        return Err(BlockSignatureError::NotSymmetric);
    }
    if r.determinant().is_zero() {
        return Err(BlockSignatureError::Singular);
    }
    let f = r.field();
    let (n, m) = (r.rows(), q.rows());
    let (zn, znm, zmn) = (Mat::zeros(f, n, n), Mat::zeros(f, n, m), Mat::zeros(f, m, n));
    let two = Mat::block(f, &[vec![r, r], vec![r, &zn]]);
    let three = Mat::block(f, &[vec![r, r, &znm], vec![r, &zn, &znm], vec![&zmn, &zmn, q]]);
    let (two_block, three_block, q_signature) = (two.signature(), three.signature(), q.signature());
    Ok(BlockSignatureReport { n, two_block, three_block, q_signature, pass: two_block == 0 && three_block == q_signature })
}

/// A basis of degree-`d` bimodule maps between two Bott–Samelson bimodules,
/// as matrices on their right ε-bases.
#[derive(Clone, Debug)]
pub struct HomSpace {
    pub source: BSWord,
    pub target: BSWord,
    pub degree: i32,
    pub maps: Vec<PolyMat>,
}

impl HomSpace {
    pub fn dim(&self) -> usize {
        self.maps.len()
    }
}

pub fn graded_hom(r: &Realization, source: &BSWord, target: &BSWord, d: i32) -> HomSpace {
    let (a, b) = (FreeBimodule::bott_samelson(r, source.letters()), FreeBimodule::bott_samelson(r, target.letters()));
    HomSpace { source: source.clone(), target: target.clone(), degree: d, maps: a.hom(&b, d) }
}

/// Graded rank `Σ_i v^{deg b_i}` of a model, as exponent → count.
pub fn graded_rank(degrees: &[i32]) -> BTreeMap<i32, usize> {
    let mut out = BTreeMap::new();
    for &d in degrees {
        *out.entry(d).or_insert(0) += 1;
    }
    out
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::coxeter::CoxeterSystem;

    fn kl(name: &str) -> KLTable {
        KLTable::for_system(&CoxeterSystem::preset(name).unwrap(), None).unwrap()
    }

    #[test]
    fn models_have_kl_graded_rank() {
        for name in ["A2", "B2", "I2:5", "I2:6", "A3"] {
            let kl = kl(name);
            let mut cache = ModelCache::new(&kl).unwrap();
            let t = kl.table().clone();
            for x in 0..kl.len() {
                let m = cache.ensure(x).unwrap().clone();
                let mut expect: BTreeMap<i32, usize> = BTreeMap::new();
                for y in 0..kl.len() {
                    for (e, c) in kl.h(y, x).terms() {
                        *expect.entry(e - t.length(y) as i32).or_insert(0) += c.to_i64().unwrap() as usize;
                    }
                }
                assert_eq!(graded_rank(m.bimodule.degrees()), expect, "{name} x={}", t.elem(x).to_text(2));
                assert!(m.module.form().is_symmetric());
            }
        }
    }

    #[test]
    fn models_are_indecomposable() {
        let kl = kl("I2:5");
        let mut cache = ModelCache::new(&kl).unwrap();
        for x in 0..kl.len() {
            let b = cache.ensure(x).unwrap().bimodule.clone();
            assert_eq!(b.hom(&b, 0).len(), 1);
            assert_eq!(b.hom(&b, -2).len(), 0);
        }
    }

    fn idx(kl: &KLTable, w: &str) -> usize {
        kl.table().parse(w).unwrap()
    }

    #[test]
    fn decompose_small_products() {
        let kl = kl("A2");
        let mut cache = ModelCache::new(&kl).unwrap();
        let (s, t) = (idx(&kl, "1"), idx(&kl, "2"));
        let d = cache.decompose(&[s, s]).unwrap();
        assert!(d.is_complete());
        assert_eq!(d.multiplicities(), BTreeMap::from([(s, BTreeMap::from([(-1, 1), (1, 1)]))]));
        let d = cache.decompose(&[s, t, s, t]).unwrap();
        assert!(d.is_complete());
        let expect = BTreeMap::from([(idx(&kl, "121"), BTreeMap::from([(-1, 1), (1, 1)])), (idx(&kl, "12"), BTreeMap::from([(0, 1)]))]);
        assert_eq!(d.multiplicities(), expect);
        let d = cache.decompose(&[s]).unwrap();
        assert_eq!(d.summands.len(), 1);
        assert_eq!(d.summands[0].shift, 0);
    }

    #[test]
    fn dihedral_pairs_match_characters() {
        for m in [3, 4, 5] {
            let kl = kl(&format!("I2:{m}"));
            let mut cache = ModelCache::new(&kl).unwrap();
            for x in 0..kl.len() {
                for y in 0..kl.len() {
                    let d = cache.decompose(&[x, y]).unwrap();
                    assert!(d.is_complete());
                    let want: BTreeMap<usize, BTreeMap<i32, usize>> = kl
                        .graded_multiplicities(x, y)
                        .unwrap()
                        .into_iter()
                        .map(|(z, m)| (z, m.into_iter().map(|(i, c)| (i, c.to_i64().unwrap() as usize)).collect()))
                        .collect();
                    assert_eq!(d.multiplicities(), want);
                }
            }
        }
    }

    fn ones(n: usize, f: &'static NumberField) -> Vec<Scalar> {
        vec![f.one(); n]
    }

    #[test]
    fn rhr_for_s_times_s() {
        let kl = kl("A2");
        let mut cache = ModelCache::new(&kl).unwrap();
        let s = idx(&kl, "1");
        let f = cache.field();
        let rep = cache.check_rhr(&[s, s], &ones(1, f)).unwrap();
        assert!(rep.passed(), "{rep:?}");
        let line = rep.results.iter().find(|e| e.d == 1).unwrap();
        assert_eq!((line.rank, line.epsilon, line.primitive_signature), (1, 0, 1));
    }

    #[test]
    fn dihedral_rhl_and_rhr() {
        for m in [3, 4] {
            let kl = kl(&format!("I2:{m}"));
            let mut cache = ModelCache::new(&kl).unwrap();
            let f = cache.field();
            for x in 0..kl.len() {
                for y in 0..kl.len() {
                    let rhl = cache.check_rhl(&[x, y], &ones(1, f)).unwrap();
                    assert!(rhl.passed(), "{rhl:?}");
                    let rhr = cache.check_rhr(&[x, y], &ones(1, f)).unwrap();
                    assert!(rhr.passed(), "{rhr:?}");
                }
            }
        }
    }

    #[test]
    fn lowest_degree_homs() {
        let kl = kl("A2");
        let cache = ModelCache::new(&kl).unwrap();
        let r = cache.realization();
        let w = |t: &str| BSWord::parse(t, 2).unwrap();
        assert_eq!(graded_hom(r, &w("11"), &w("1"), -1).dim(), 1);
        for d in -4..=-2 {
            assert_eq!(graded_hom(r, &w("11"), &w("1"), d).dim(), 0);
        }
        assert_eq!(graded_hom(r, &w("1212"), &w("12"), 0).dim(), 2);
    }

    #[test]
    fn left_rho_acts_by_zero() {
        let kl = kl("B2");
        let mut cache = ModelCache::new(&kl).unwrap();
        let (x, y) = (idx(&kl, "121"), idx(&kl, "12"));
        let d = cache.decompose(&[x, y]).unwrap();
        let rho = d.module.left_mul_matrix(&cache.realization().rho());
        for per in d.induced(&rho).unwrap().values() {
            assert!(per.values().all(Mat::is_zero));
        }
        let gap = d.induced(&d.module.gaps()[0]).unwrap();
        assert!(gap.values().flat_map(|m| m.values()).any(|m| !m.is_zero()));
    }

    #[test]
    fn pairings_are_nondegenerate_and_orthogonal() {
        let kl = kl("A2");
        let mut cache = ModelCache::new(&kl).unwrap();
        let f = cache.field();
        let (st, ts) = (idx(&kl, "12"), idx(&kl, "21"));
        let d = cache.decompose(&[st, ts]).unwrap();
        let data = cache.multiplicity_data(&d, &[f.one()]).unwrap();
        let s = idx(&kl, "1");
        let hs = data.iter().find(|m| m.z == s).unwrap();
        assert_eq!((hs.dim(-1), hs.dim(1)), (1, 1));
        for ms in &data {
            for k in ms.pairing.values() {
                assert!(!k.determinant().is_zero());
            }
        }
        // summands of different z are orthogonal for the form
        let form = d.module.form();
        for a in &d.summands {
            for b in &d.summands {
                if a.z != b.z {
                    assert!(a.incl.transpose().mul(form).mul(&b.incl).is_zero());
                }
            }
        }
    }

    #[test]
    fn block_signature_examples() {
        let f = NumberField::rationals();
        let one = Mat::identity(f, 1);
        let rep = block_signature_check(&one, &Mat::zeros(f, 0, 0)).unwrap();
        assert_eq!((rep.two_block, rep.pass), (0, true));
        let r = Mat::from_rows(f, vec![vec![f.one(), f.zero()], vec![f.zero(), f.int(-1)]]);
        let q = Mat::from_rows(f, vec![vec![f.int(2)]]);
        let rep = block_signature_check(&r, &q).unwrap();
        assert_eq!((rep.two_block, rep.three_block, rep.pass), (0, 1, true));
        assert_eq!(block_signature_check(&Mat::zeros(f, 1, 1), &q).unwrap_err(), BlockSignatureError::Singular);
    }

    #[test]
    fn signatures_are_conserved_along_a_path() {
        let kl = kl("A2");
        let mut cache = ModelCache::new(&kl).unwrap();
        let f = cache.field();
        let (s, t) = (idx(&kl, "1"), idx(&kl, "2"));
        let (st, ts) = (idx(&kl, "12"), idx(&kl, "21"));
        let rep = cache.conservation_scan(&[st, s, ts], &[f.one(), f.one()], &[f.one(), f.int(10)], 4).unwrap();
        assert!(rep.passed(), "{rep:?}");
        let flat = cache.conservation_scan(&[s, t], &[f.one()], &[f.one()], 3).unwrap();
        assert!(flat.passed());
    }

    #[test]
    fn triple_products() {
        let kl = kl("A1");
        let mut cache = ModelCache::new(&kl).unwrap();
        let f = cache.field();
        let s = idx(&kl, "1");
        let rep = cache.check_rhr_multi(&[s, s, s], &[f.one(), f.int(2)]).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert!(cache.check_rhr_multi(&[s, s], &[]).is_err());
        let single = cache.check_rhr_multi(&[s], &[]).unwrap();
        assert!(single.passed());
    }
}
