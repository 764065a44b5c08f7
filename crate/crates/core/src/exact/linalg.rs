//! Dense matrices over a [`NumberField`] with exact elimination.

use std::fmt;

use super::field::{NumberField, Scalar};

#[derive(Clone, PartialEq)]
pub struct Mat {
    field: &'static NumberField,
    rows: usize,
    cols: usize,
    data: Vec<Scalar>,
}

impl Mat {
    pub fn zeros(field: &'static NumberField, rows: usize, cols: usize) -> Mat {
        Mat { field, rows, cols, data: vec![field.zero(); rows * cols] }
    }

    pub fn identity(field: &'static NumberField, n: usize) -> Mat {
        let mut m = Mat::zeros(field, n, n);
        for i in 0..n {
            m[(i, i)] = field.one();
        }
        m
    }

    pub fn from_rows(field: &'static NumberField, rows: Vec<Vec<Scalar>>) -> Mat {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged matrix");
            data.extend(row);
        }
        Mat { field, rows: r, cols: c, data }
    }

    pub fn from_fn(field: &'static NumberField, rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Scalar) -> Mat {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { field, rows, cols, data }
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
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[Scalar] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<Scalar> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Scalar::is_zero)
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.field, self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    pub fn scale(&self, s: &Scalar) -> Mat {
        Mat { field: self.field, rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            field: self.field,
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            field: self.field,
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "dimension mismatch in product");
        let mut out = Mat::zeros(self.field, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if b.is_zero() {
                        continue;
                    }
                    let t = a * b;
                    out[(i, j)] = &out[(i, j)] + &t;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Scalar]) -> Vec<Scalar> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut acc = self.field.zero();
                for (a, b) in self.row(i).iter().zip(v) {
                    if !a.is_zero() && !b.is_zero() {
                        acc = &acc + &(a * b);
                    }
                }
                acc
            })
            .collect()
    }

    pub fn pow(&self, e: u32) -> Mat {
        assert!(self.is_square());
        let mut acc = Mat::identity(self.field, self.rows);
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// Submatrix on the given row and column index lists.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Mat {
        Mat::from_fn(self.field, rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])].clone())
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_cols(field: &'static NumberField, nrows: usize, cols: &[Vec<Scalar>]) -> Mat {
        Mat::from_fn(field, nrows, cols.len(), |i, j| cols[j][i].clone())
    }

    /// Reduced row echelon form; returns the pivot columns.
    pub fn rref(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(p) = (r..self.rows).find(|&i| !self[(i, c)].is_zero()) else {
                continue;
            };
            self.swap_rows(r, p);
            let inv = self[(r, c)].inv();
            for j in c..self.cols {
                self[(r, j)] = &self[(r, j)] * &inv;
            }
            for i in 0..self.rows {
                if i == r || self[(i, c)].is_zero() {
                    continue;
                }
                let f = self[(i, c)].clone();
                for j in c..self.cols {
                    if self[(r, j)].is_zero() {
                        continue;
                    }
                    let t = &f * &self[(r, j)];
                    self[(i, j)] = &self[(i, j)] - &t;
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn rank(&self) -> usize {
        self.clone().rref().len()
    }

    /// Basis of the right kernel `{v : A v = 0}`, as column vectors.
    pub fn kernel(&self) -> Vec<Vec<Scalar>> {
        let mut m = self.clone();
        let pivots = m.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![self.field.zero(); self.cols];
                v[f] = self.field.one();
                for (r, &p) in pivots.iter().enumerate() {
                    v[p] = -&m[(r, f)];
                }
                v
            })
            .collect()
    }

    pub fn inverse(&self) -> Option<Mat> {
        assert!(self.is_square());
        let n = self.rows;
        let mut aug = Mat::zeros(self.field, n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug[(i, j)] = self[(i, j)].clone();
            }
            aug[(i, n + i)] = self.field.one();
        }
        let pivots = aug.rref();
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return None;
        }
        Some(Mat::from_fn(self.field, n, n, |i, j| aug[(i, n + j)].clone()))
    }

    pub fn determinant(&self) -> Scalar {
        assert!(self.is_square());
        let mut m = self.clone();
        let n = self.rows;
        let mut det = self.field.one();
        for c in 0..n {
            let Some(p) = (c..n).find(|&i| !m[(i, c)].is_zero()) else {
                return self.field.zero();
            };
            if p != c {
                m.swap_rows(p, c);
                det = -det;
            }
            let piv = m[(c, c)].clone();
            det = &det * &piv;
            let inv = piv.inv();
            for i in c + 1..n {
                if m[(i, c)].is_zero() {
                    continue;
                }
                let f = &m[(i, c)] * &inv;
                for j in c..n {
                    let t = &f * &m[(c, j)];
                    m[(i, j)] = &m[(i, j)] - &t;
                }
            }
        }
        det
    }

    /// Inertia `(positive, negative, zero)` of a symmetric matrix, by
    /// congruence diagonalization over the ordered field.
    pub fn inertia(&self) -> (usize, usize, usize) {
        assert!(self.is_symmetric(), "inertia of a non-symmetric matrix");
        let mut m = self.clone();
        let n = self.rows;
        let (mut pos, mut neg) = (0, 0);
        let mut active: Vec<usize> = (0..n).collect();
        while let Some(&first) = active.first() {
            let _ = first;
            // pick a nonzero diagonal pivot, or manufacture one
            let piv = active.iter().copied().find(|&i| !m[(i, i)].is_zero());
            let p = match piv {
                Some(p) => p,
                None => {
                    let pair = active
                        .iter()
                        .flat_map(|&i| active.iter().map(move |&j| (i, j)))
                        .find(|&(i, j)| i < j && !m[(i, j)].is_zero());
                    match pair {
                        None => break,
                        Some((i, j)) => {
                            // row_i += row_j, col_i += col_j
                            for k in 0..n {
                                let t = m[(j, k)].clone();
                                m[(i, k)] = &m[(i, k)] + &t;
                            }
                            for k in 0..n {
                                let t = m[(k, j)].clone();
                                m[(k, i)] = &m[(k, i)] + &t;
                            }
                            i
                        }
                    }
                }
            };
            let d = m[(p, p)].clone();
            if d.is_positive() {
                pos += 1;
            } else {
                neg += 1;
            }
            let dinv = d.inv();
            active.retain(|&i| i != p);
            for &i in &active {
                if m[(i, p)].is_zero() {
                    continue;
                }
                let f = &m[(i, p)] * &dinv;
                for &j in &active {
                    if m[(p, j)].is_zero() {
                        continue;
                    }
                    let t = &f * &m[(p, j)];
                    m[(i, j)] = &m[(i, j)] - &t;
                }
            }
            for &i in &active {
                m[(i, p)] = self.field.zero();
                m[(p, i)] = self.field.zero();
            }
        }
        (pos, neg, n - pos - neg)
    }

    /// Signature `positive - negative` of a symmetric matrix.
    pub fn signature(&self) -> i64 {
        let (p, n, _) = self.inertia();
        p as i64 - n as i64
    }

    /// Block matrix from a grid of blocks (all blocks in a row share a height).
    pub fn block(field: &'static NumberField, grid: &[Vec<&Mat>]) -> Mat {
        let heights: Vec<usize> = grid.iter().map(|r| r[0].rows).collect();
        let widths: Vec<usize> = grid[0].iter().map(|b| b.cols).collect();
        let (h, w) = (heights.iter().sum(), widths.iter().sum());
        let mut out = Mat::zeros(field, h, w);
        let mut r0 = 0;
        for (bi, row) in grid.iter().enumerate() {
            let mut c0 = 0;
            for (bj, b) in row.iter().enumerate() {
                assert_eq!((b.rows, b.cols), (heights[bi], widths[bj]), "block shape mismatch");
                for i in 0..b.rows {
                    for j in 0..b.cols {
                        out[(r0 + i, c0 + j)] = b[(i, j)].clone();
                    }
                }
                c0 += widths[bj];
            }
            r0 += heights[bi];
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = Scalar;
    fn index(&self, (i, j): (usize, usize)) -> &Scalar {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Scalar {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[{}x{}]", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|x| x.to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::Q;

    fn q(n: i64) -> Scalar {
        NumberField::rationals().int(n)
    }

    #[test]
    fn kernel_and_rank() {
        let f = NumberField::rationals();
        let a = Mat::from_rows(f, vec![vec![q(1), q(2), q(3)], vec![q(2), q(4), q(6)]]);
        assert_eq!(a.rank(), 1);
        let k = a.kernel();
        assert_eq!(k.len(), 2);
        for v in k {
            assert!(a.mul_vec(&v).iter().all(Scalar::is_zero));
        }
    }

    #[test]
    fn inverse_roundtrip() {
        let f = NumberField::get(5);
        let u = f.generator();
        let a = Mat::from_rows(f, vec![vec![u.clone(), f.one()], vec![f.int(2), &u * &u]]);
        let inv = a.inverse().unwrap();
        assert_eq!(a.mul(&inv), Mat::identity(f, 2));
        assert!(!a.determinant().is_zero());
    }

    #[test]
    fn inertia_with_zero_diagonal() {
        let f = NumberField::rationals();
        // hyperbolic plane
        let h = Mat::from_rows(f, vec![vec![q(0), q(1)], vec![q(1), q(0)]]);
        assert_eq!(h.inertia(), (1, 1, 0));
        let d = Mat::from_rows(f, vec![vec![q(1), q(0)], vec![q(0), q(-1)]]);
        assert_eq!(d.signature(), 0);
        let s = Mat::from_rows(
            f,
            vec![vec![q(2), q(1), q(0)], vec![q(1), q(2), q(1)], vec![q(0), q(1), q(2)]],
        );
        assert_eq!(s.inertia(), (3, 0, 0));
        let z = Mat::from_rows(f, vec![vec![Scalar::from_q(f, Q::new(1, 2)), q(0)], vec![q(0), q(0)]]);
        assert_eq!(z.inertia(), (1, 0, 1));
    }
}
