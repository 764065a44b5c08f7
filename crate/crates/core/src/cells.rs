//! Kazhdan–Lusztig cells, Lusztig's a-function, γ-constants and the J-ring
//! of a finite Coxeter group.
//!
//! Everything here is read off the full table of structure constants
//! `μ_{x,y}^z`: the preorders come from product supports, `a(z)` is the
//! largest `v`-degree of any `μ_{x,y}^z`, and `γ_{x,y}^z` is the coefficient
//! of `v^{a(z)}`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::coxeter::{BitSet, ElementTable};
use crate::exact::Int;
use crate::hecke::{HeckeElt, KLTable};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CellError {
    #[error("cells need a finite, fully enumerated group")]
    Infinite,
    #[error("left cell {cell:?} has {count} candidate distinguished involutions")]
    Distinguished { cell: Vec<String>, count: usize },
}

/// `C_x C_y` for all pairs of a finite group.
pub struct ProductTable {
    n: usize,
    products: Vec<Vec<HeckeElt>>,
}

impl ProductTable {
    pub fn compute(kl: &KLTable) -> Result<ProductTable, CellError> {
        if !kl.table().is_complete() {
            return Err(CellError::Infinite);
        }
        let n = kl.len();
        let products: Vec<Vec<HeckeElt>> = (0..n)
            .into_par_iter()
            .map(|x| kl.products_row(x).into_iter().map(|p| p.expect("complete table")).collect())
            .collect();
        Ok(ProductTable { n, products })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn product(&self, x: usize, y: usize) -> &HeckeElt {
        &self.products[x][y]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum CellSide {
    Left,
    Right,
    TwoSided,
}

/// Cells for one side, with the induced order on cells.
#[derive(Clone, Debug)]
pub struct Cells {
    /// Cells as sorted element index lists, ordered by their smallest member.
    pub cells: Vec<Vec<usize>>,
    /// `cell_of[x]` indexes `cells`.
    pub cell_of: Vec<usize>,
    /// `below[c]`: all cells `c'` with `c' ≤ c`.
    pub below: Vec<BTreeSet<usize>>,
}

impl Cells {
    fn from_preorder(reach: &[BitSet]) -> Cells {
        // reach[x] = {z : z ≤ x}
        let n = reach.len();
        let mut cell_of = vec![usize::MAX; n];
        let mut cells: Vec<Vec<usize>> = Vec::new();
        for x in 0..n {
            if cell_of[x] != usize::MAX {
                continue;
            }
            let members: Vec<usize> = (x..n).filter(|&y| reach[x].contains(y) && reach[y].contains(x)).collect();
            for &m in &members {
                cell_of[m] = cells.len();
            }
            cells.push(members);
        }
        let below = cells
            .iter()
            .map(|c| reach[c[0]].iter().map(|z| cell_of[z]).collect())
            .collect();
        Cells { cells, cell_of, below }
    }

    pub fn same_cell(&self, x: usize, y: usize) -> bool {
        self.cell_of[x] == self.cell_of[y]
    }

    /// `cell(x) ≤ cell(y)`.
    pub fn leq(&self, x: usize, y: usize) -> bool {
        self.below[self.cell_of[y]].contains(&self.cell_of[x])
    }
}

#[derive(Clone, Debug)]
pub struct CellPartition {
    pub left: Cells,
    pub right: Cells,
    pub two_sided: Cells,
}

impl CellPartition {
    pub fn side(&self, side: CellSide) -> &Cells {
        match side {
            CellSide::Left => &self.left,
            CellSide::Right => &self.right,
            CellSide::TwoSided => &self.two_sided,
        }
    }
}

fn closure(n: usize, edges: &[Vec<usize>]) -> Vec<BitSet> {
    // edges[x]: direct predecessors z ≤ x; BFS from each x
    (0..n)
        .map(|x| {
            let mut seen = BitSet::new(n);
            seen.insert(x);
            let mut stack = vec![x];
            while let Some(y) = stack.pop() {
                for &z in &edges[y] {
                    if !seen.contains(z) {
                        seen.insert(z);
                        stack.push(z);
                    }
                }
            }
            seen
        })
        .collect()
}

/// Preorders from supports: `z ≤_L y` when `C_z` occurs in some `C_w C_y`,
/// `z ≤_R x` when it occurs in some `C_x C_w`, and `≤_LR` is generated by both.
pub fn compute_cells(products: &ProductTable) -> CellPartition {
    let n = products.len();
    let mut left: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let mut right: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for x in 0..n {
        for y in 0..n {
            for (z, _) in products.product(x, y).terms() {
                left[y].insert(z);
                right[x].insert(z);
            }
        }
    }
    let left: Vec<Vec<usize>> = left.into_iter().map(|s| s.into_iter().collect()).collect();
    let right: Vec<Vec<usize>> = right.into_iter().map(|s| s.into_iter().collect()).collect();
    let both: Vec<Vec<usize>> = (0..n).map(|x| left[x].iter().chain(&right[x]).copied().collect()).collect();
    CellPartition {
        left: Cells::from_preorder(&closure(n, &left)),
        right: Cells::from_preorder(&closure(n, &right)),
        two_sided: Cells::from_preorder(&closure(n, &both)),
    }
}

/// `a(z) = max_{x,y} deg_v μ_{x,y}^z`.
pub fn a_function(products: &ProductTable) -> Vec<u32> {
    let n = products.len();
    let mut a = vec![0i32; n];
    for x in 0..n {
        for y in 0..n {
            for (z, p) in products.product(x, y).terms() {
                a[z] = a[z].max(p.max_degree().unwrap());
            }
        }
    }
    a.into_iter().map(|d| d.max(0) as u32).collect()
}

/// Sparse γ-constants `γ_{x,y}^z` = coefficient of `v^{a(z)}` in `μ_{x,y}^z`.
#[derive(Clone, Debug)]
pub struct GammaTable {
    n: usize,
    a: Vec<u32>,
    entries: HashMap<(u32, u32), Vec<(u32, Int)>>,
}

impl GammaTable {
    pub fn compute(products: &ProductTable, a: &[u32]) -> GammaTable {
        let n = products.len();
        let mut entries = HashMap::new();
        for x in 0..n {
            for y in 0..n {
                let row: Vec<(u32, Int)> = products
                    .product(x, y)
                    .terms()
                    .map(|(z, p)| (z as u32, p.coeff(a[z] as i32)))
                    .filter(|(_, c)| !c.is_zero())
                    .collect();
                if !row.is_empty() {
                    entries.insert((x as u32, y as u32), row);
                }
            }
        }
        GammaTable { n, a: a.to_vec(), entries }
    }

    pub fn a(&self, z: usize) -> u32 {
        self.a[z]
    }

    pub fn gamma(&self, x: usize, y: usize, z: usize) -> Int {
        self.entries
            .get(&(x as u32, y as u32))
            .and_then(|r| r.iter().find(|(w, _)| *w as usize == z))
            .map_or(Int::ZERO, |(_, c)| c.clone())
    }

    /// `j_x j_y = Σ γ_{x,y}^z j_z`.
    pub fn jmul(&self, x: usize, y: usize) -> &[(u32, Int)] {
        self.entries.get(&(x as u32, y as u32)).map_or(&[], |r| r.as_slice())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// For each left cell, the unique `d` with `γ_{x⁻¹,x}^d = 1` for all `x` in it.
pub fn distinguished_involutions(
    table: &ElementTable,
    gamma: &GammaTable,
    cells: &CellPartition,
) -> Result<Vec<usize>, CellError> {
    let mut out = Vec::new();
    for cell in &cells.left.cells {
        let candidates: Vec<usize> = cell
            .iter()
            .copied()
            .filter(|&d| cell.iter().all(|&x| gamma.gamma(table.inverse(x), x, d) == Int::ONE))
            .collect();
        if candidates.len() != 1 {
            return Err(CellError::Distinguished {
                cell: cell.iter().map(|&x| table.text(x)).collect(),
                count: candidates.len(),
            });
        }
        out.push(candidates[0]);
    }
    out.sort_unstable();
    Ok(out)
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct CheckResult {
    pub check: String,
    pub scope: String,
    pub status: Status,
    pub witness: Option<String>,
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

impl CheckResult {
    fn new(check: &str, scope: &str, witness: Option<String>) -> CheckResult {
        let status = if witness.is_none() { Status::Pass } else { Status::Fail };
        CheckResult { check: check.into(), scope: scope.into(), status, witness }
    }
}

type JVec = BTreeMap<u32, Int>;

fn jvec_mul_left(gamma: &GammaTable, a: &JVec, z: usize) -> JVec {
    let mut out = JVec::new();
    for (w, c) in a {
        for (u, g) in gamma.jmul(*w as usize, z) {
            *out.entry(*u).or_default() += &(c * g);
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

fn jvec_mul_right(gamma: &GammaTable, x: usize, a: &JVec) -> JVec {
    let mut out = JVec::new();
    for (w, c) in a {
        for (u, g) in gamma.jmul(x, *w as usize) {
            *out.entry(*u).or_default() += &(c * g);
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

fn to_jvec(row: &[(u32, Int)]) -> JVec {
    row.iter().cloned().collect()
}

/// Decategorified rigidity checks of the J-ring, cell by cell, plus the
/// a-function invariants.
pub fn jring_verify(
    table: &ElementTable,
    products: &ProductTable,
    gamma: &GammaTable,
    cells: &CellPartition,
    distinguished: &[usize],
) -> Vec<CheckResult> {
    let name = |x: usize| table.text(x);
    let n = table.len();
    let mut out = Vec::new();

    let mut w = None;
    for c in &cells.two_sided.cells {
        if let Some(&x) = c.iter().find(|&&x| gamma.a(x) != gamma.a(c[0])) {
            w = Some(format!("a({}) != a({})", name(x), name(c[0])));
            break;
        }
    }
    out.push(CheckResult::new("a_constant_on_cells", "all two-sided cells", w));

    let mut w = None;
    let mut attained = vec![false; n];
    'deg: for x in 0..n {
        for y in 0..n {
            for (z, p) in products.product(x, y).terms() {
                let d = p.max_degree().unwrap();
                if d > gamma.a(z) as i32 {
                    w = Some(format!("deg mu_{{{},{}}}^{} = {d} > a", name(x), name(y), name(z)));
                    break 'deg;
                }
                if d == gamma.a(z) as i32 {
                    attained[z] = true;
                }
            }
        }
    }
    if w.is_none() {
        if let Some(z) = attained.iter().position(|&t| !t) {
            w = Some(format!("a({}) not attained", name(z)));
        }
    }
    out.push(CheckResult::new("degree_bound", "all triples", w));

    let mut w = None;
    'g: for x in 0..n {
        for y in 0..n {
            for (z, _) in gamma.jmul(x, y) {
                let z = *z as usize;
                let c = &cells.two_sided;
                if !(c.same_cell(x, y) && c.same_cell(y, z)) {
                    w = Some(format!("gamma_{{{},{}}}^{} != 0 across cells", name(x), name(y), name(z)));
                    break 'g;
                }
            }
        }
    }
    out.push(CheckResult::new("gamma_cell_support", "all triples", w));

    let per_cell: Vec<Vec<CheckResult>> = cells
        .two_sided
        .cells
        .par_iter()
        .map(|cell| {
            let scope = format!("cell of {} (size {})", name(cell[0]), cell.len());
            let mut res = Vec::new();

            let mut w = None;
            'assoc: for &x in cell {
                for &y in cell {
                    let xy = to_jvec(gamma.jmul(x, y));
                    for &z in cell {
                        let lhs = jvec_mul_left(gamma, &xy, z);
                        let rhs = jvec_mul_right(gamma, x, &to_jvec(gamma.jmul(y, z)));
                        if lhs != rhs {
                            w = Some(format!("(j_{} j_{}) j_{}", name(x), name(y), name(z)));
                            break 'assoc;
                        }
                    }
                }
            }
            res.push(CheckResult::new("associativity", &scope, w));

            let unit: JVec = distinguished
                .iter()
                .filter(|&&d| cells.two_sided.same_cell(d, cell[0]))
                .map(|&d| (d as u32, Int::ONE))
                .collect();
            let mut w = None;
            for &x in cell {
                let jx: JVec = [(x as u32, Int::ONE)].into_iter().collect();
                if jvec_mul_left(gamma, &unit, x) != jx || jvec_mul_right(gamma, x, &unit) != jx {
                    w = Some(format!("unit fails on j_{}", name(x)));
                    break;
                }
            }
            res.push(CheckResult::new("unit", &scope, w));

            let gt = |x: usize, y: usize, z: usize| gamma.gamma(x, y, table.inverse(z));
            let mut wc = None;
            let mut wi = None;
            'cyc: for &x in cell {
                for &y in cell {
                    for &z in cell {
                        let g = gt(x, y, z);
                        if wc.is_none() && g != gt(y, z, x) {
                            wc = Some(format!("({}, {}, {})", name(x), name(y), name(z)));
                        }
                        if wi.is_none() && g != gt(table.inverse(y), table.inverse(x), table.inverse(z)) {
                            wi = Some(format!("({}, {}, {})", name(x), name(y), name(z)));
                        }
                        if wc.is_some() && wi.is_some() {
                            break 'cyc;
                        }
                    }
                }
            }
            res.push(CheckResult::new("cyclicity", &scope, wc));
            res.push(CheckResult::new("inversion_symmetry", &scope, wi));
            res
        })
        .collect();
    out.extend(per_cell.into_iter().flatten());

    let mut w = None;
    for &d in distinguished {
        if table.inverse(d) != d {
            w = Some(format!("{} is not an involution", name(d)));
        }
    }
    out.push(CheckResult::new("distinguished_are_involutions", "all left cells", w));
    out
}

/// Everything the cell layer computes for one finite group.
pub struct CellData {
    pub products: ProductTable,
    pub cells: CellPartition,
    pub a: Vec<u32>,
    pub gamma: GammaTable,
}

impl CellData {
    pub fn compute(kl: &KLTable) -> Result<CellData, CellError> {
        let products = ProductTable::compute(kl)?;
        let cells = compute_cells(&products);
        let a = a_function(&products);
        let gamma = GammaTable::compute(&products, &a);
        Ok(CellData { products, cells, a, gamma })
    }

    /// CSV with header `element,length,a`.
    pub fn a_function_csv(&self, table: &ElementTable) -> String {
        let mut s = String::from("element,length,a\n");
        for x in 0..table.len() {
            s += &format!("{},{},{}\n", table.text(x), table.length(x), self.a[x]);
        }
        s
    }

    /// CSV with header `element,left,right,two_sided` (cell numbers).
    pub fn membership_csv(&self, table: &ElementTable) -> String {
        let mut s = String::from("element,left,right,two_sided\n");
        for x in 0..table.len() {
            let c = &self.cells;
            s += &format!("{},{},{},{}\n", table.text(x), c.left.cell_of[x], c.right.cell_of[x], c.two_sided.cell_of[x]);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coxeter::CoxeterSystem;
    use std::sync::Arc;

    fn data(name: &str) -> (KLTable, CellData) {
        let w = CoxeterSystem::preset(name).unwrap();
        let kl = KLTable::new(Arc::new(w.element_table(None).unwrap()));
        let d = CellData::compute(&kl).unwrap();
        (kl, d)
    }

    fn named(t: &ElementTable, cells: &Cells) -> BTreeSet<BTreeSet<String>> {
        cells.cells.iter().map(|c| c.iter().map(|&x| t.text(x)).collect()).collect()
    }

    fn set(v: &[&[&str]]) -> BTreeSet<BTreeSet<String>> {
        v.iter().map(|c| c.iter().map(|s| s.to_string()).collect()).collect()
    }

    /// Oracle: preorder by brute-force closure over products with generators
    /// only, `C_s C_y` and `C_y C_s`.
    fn generator_cells(kl: &KLTable, side: CellSide) -> BTreeSet<BTreeSet<String>> {
        let t = kl.table();
        let n = t.len();
        let mut reach = vec![vec![false; n]; n];
        for y in 0..n {
            reach[y][y] = true;
            for s in 0..t.system().rank() {
                let gs = t.rmul(0, s).unwrap();
                let mut prods = Vec::new();
                if side != CellSide::Right {
                    prods.push(kl.kl_mul(&HeckeElt::basis(gs), y).unwrap());
                }
                if side != CellSide::Left {
                    prods.push(kl.kl_mul(&HeckeElt::basis(y), gs).unwrap());
                }
                for p in prods {
                    for (z, _) in p.terms() {
                        reach[y][z] = true;
                    }
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if reach[i][k] && reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
        (0..n)
            .map(|x| (0..n).filter(|&y| reach[x][y] && reach[y][x]).map(|y| t.text(y)).collect())
            .collect()
    }

    #[test]
    fn a2_cells() {
        let (kl, d) = data("A2");
        let t = kl.table();
        assert_eq!(named(t, &d.cells.two_sided), set(&[&["e"], &["1", "2", "12", "21"], &["121"]]));
        assert_eq!(named(t, &d.cells.left), set(&[&["e"], &["1", "21"], &["2", "12"], &["121"]]));
        assert_eq!(named(t, &d.cells.right), set(&[&["e"], &["1", "12"], &["2", "21"], &["121"]]));
        for side in [CellSide::Left, CellSide::Right, CellSide::TwoSided] {
            assert_eq!(named(t, d.cells.side(side)), generator_cells(&kl, side));
        }
    }

    #[test]
    fn b3_cells_match_generator_oracle() {
        let (kl, d) = data("B3");
        let t = kl.table();
        for side in [CellSide::Left, CellSide::Right, CellSide::TwoSided] {
            assert_eq!(named(t, d.cells.side(side)), generator_cells(&kl, side));
        }
        assert!(d.cells.two_sided.cells.iter().any(|c| c == &vec![0]));
    }

    #[test]
    fn a_function_and_gamma_examples() {
        let (kl, d) = data("A2");
        let t = kl.table();
        let p = |w: &str| t.parse(w).unwrap();
        assert_eq!(d.a[0], 0);
        assert_eq!(d.a[p("1")], 1);
        assert_eq!(d.a[p("121")], 3);
        assert_eq!(d.gamma.gamma(p("1"), p("1"), p("1")), Int::ONE);
        assert_eq!(d.gamma.gamma(p("12"), p("21"), p("1")), Int::ONE);
        assert_eq!(d.gamma.gamma(p("12"), p("21"), p("121")), Int::ZERO);
        let (kl5, d5) = data("I2:5");
        assert_eq!(d5.a[kl5.table().len() - 1], 5);
    }

    #[test]
    fn distinguished_and_jring() {
        for name in ["A2", "I2:5", "A3"] {
            let (kl, d) = data(name);
            let t = kl.table();
            let dist = distinguished_involutions(t, &d.gamma, &d.cells).unwrap();
            assert_eq!(dist.len(), d.cells.left.cells.len());
            if name != "A3" {
                let middle: Vec<String> = dist.iter().filter(|&&x| t.length(x) == 1).map(|&x| t.text(x)).collect();
                assert_eq!(middle, vec!["1", "2"]);
            }
            let report = jring_verify(t, &d.products, &d.gamma, &d.cells, &dist);
            for r in &report {
                assert_eq!(r.status, Status::Pass, "{name}: {r:?}");
            }
        }
    }

    #[test]
    fn a2_jring_products() {
        let (kl, d) = data("A2");
        let t = kl.table();
        let p = |w: &str| t.parse(w).unwrap() as u32;
        assert_eq!(d.gamma.jmul(p("12") as usize, p("21") as usize), &[(p("1"), Int::ONE)]);
    }

    #[test]
    fn csv_exports() {
        let (kl, d) = data("A2");
        let csv = d.a_function_csv(kl.table());
        assert!(csv.starts_with("element,length,a\ne,0,0\n"));
        assert!(csv.contains("121,3,3"));
        assert!(d.membership_csv(kl.table()).starts_with("element,left,right,two_sided\n"));
    }

    #[test]
    fn infinite_groups_rejected() {
        let w = CoxeterSystem::preset("I2:inf").unwrap();
        let kl = KLTable::for_system(&w, Some(4)).unwrap();
        assert!(matches!(CellData::compute(&kl), Err(CellError::Infinite)));
    }
}
