//! Small dense row-major matrices and rank-3 arrays over `f64`.
//!
//! Chart dimensions in this crate are tiny (at most a dozen), so everything
//! is plain `Vec<f64>` with LU factorization for inversion. No external
//! linear algebra dependency.

use std::fmt;

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                write!(f, "{:>12.5e} ", self.get(i, j))?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat {
            rows: r,
            cols: c,
            data,
        }
    }

    /// Assemble a square matrix from four equally sized square blocks.
    pub fn from_blocks(a: &Mat, b: &Mat, c: &Mat, d: &Mat) -> Self {
        let n = a.rows;
        assert!(
            [a, b, c, d].iter().all(|m| m.rows == n && m.cols == n),
            "blocks must be square and equal-sized"
        );
        let mut m = Mat::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, a.get(i, j));
                m.set(i, j + n, b.get(i, j));
                m.set(i + n, j, c.get(i, j));
                m.set(i + n, j + n, d.get(i, j));
            }
        }
        m
    }

    /// Extract the square sub-block starting at (`r0`, `c0`) of size `n`.
    pub fn block(&self, r0: usize, c0: usize, n: usize) -> Mat {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, self.get(r0 + i, c0 + j));
            }
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Mat {
        let mut m = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m.set(j, i, self.get(i, j));
            }
        }
        m
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "dimension mismatch in matmul");
        let mut m = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    m.add_to(i, j, a * other.get(k, j));
                }
            }
        }
        m
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "dimension mismatch in matvec");
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut s = 0.0;
            for j in 0..self.cols {
                s += self.get(i, j) * v[j];
            }
            out[i] = s;
        }
        out
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// Largest deviation from antisymmetry, `max |m_ij + m_ji|`.
    pub fn antisymmetry_defect(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let mut d = 0.0f64;
        for i in 0..self.rows {
            for j in 0..=i {
                d = d.max((self.get(i, j) + self.get(j, i)).abs());
            }
        }
        d
    }

    /// Force exact antisymmetry by averaging with the negated transpose.
    pub fn antisymmetrized(&self) -> Mat {
        assert_eq!(self.rows, self.cols);
        let mut m = Mat::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m.set(i, j, 0.5 * (self.get(i, j) - self.get(j, i)));
            }
        }
        m
    }

    fn lu(&self) -> Option<(Mat, Vec<usize>, f64)> {
        assert_eq!(self.rows, self.cols, "LU needs a square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let mut p = k;
            let mut best = a.get(k, k).abs();
            for i in k + 1..n {
                let v = a.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return None;
            }
            if p != k {
                for j in 0..n {
                    let t = a.get(k, j);
                    a.set(k, j, a.get(p, j));
                    a.set(p, j, t);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = a.get(k, k);
            for i in k + 1..n {
                let f = a.get(i, k) / pivot;
                a.set(i, k, f);
                for j in k + 1..n {
                    let v = a.get(i, j) - f * a.get(k, j);
                    a.set(i, j, v);
                }
            }
        }
        Some((a, perm, sign))
    }

    pub fn det(&self) -> f64 {
        match self.lu() {
            None => 0.0,
            Some((lu, _, sign)) => {
                let mut d = sign;
                for i in 0..self.rows {
                    d *= lu.get(i, i);
                }
                d
            }
        }
    }

    /// Matrix inverse via LU with partial pivoting. `None` when singular.
    pub fn inverse(&self) -> Option<Mat> {
        let n = self.rows;
        let (lu, perm, _) = self.lu()?;
        let mut inv = Mat::zeros(n, n);
        let mut col = vec![0.0; n];
        for e in 0..n {
            for (i, c) in col.iter_mut().enumerate() {
                *c = if perm[i] == e { 1.0 } else { 0.0 };
            }
            // forward substitution (unit lower triangle)
            for i in 0..n {
                let mut s = col[i];
                for j in 0..i {
                    s -= lu.get(i, j) * col[j];
                }
                col[i] = s;
            }
            // back substitution
            for i in (0..n).rev() {
                let mut s = col[i];
                for j in i + 1..n {
                    s -= lu.get(i, j) * col[j];
                }
                col[i] = s / lu.get(i, i);
            }
            for i in 0..n {
                inv.set(i, e, col[i]);
            }
        }
        Some(inv)
    }
}

/// Rank-3 array with the same tiny-dimension assumptions as [`Mat`].
#[derive(Clone, Debug)]
pub struct Tensor3 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Tensor3 {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.n + j) * self.n + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.data[(i * self.n + j) * self.n + k] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// Largest deviation from full antisymmetry over all 6 permutations.
    pub fn antisymmetry_defect(&self) -> f64 {
        let n = self.n;
        let mut d = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let v = self.get(i, j, k);
                    d = d.max((v + self.get(j, i, k)).abs());
                    d = d.max((v + self.get(i, k, j)).abs());
                    d = d.max((v - self.get(j, k, i)).abs());
                    d = d.max((v - self.get(k, i, j)).abs());
                    d = d.max((v + self.get(k, j, i)).abs());
                }
            }
        }
        d
    }
}

/// max |a_i - b_i| over two equal-length slices.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// max |a_i|.
pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_roundtrip() {
        let m = Mat::from_rows(&[
            vec![2.0, 1.0, 0.0],
            vec![-1.0, 3.0, 0.5],
            vec![0.25, 0.0, 1.5],
        ]);
        let inv = m.inverse().unwrap();
        let id = m.matmul(&inv);
        assert!(id.sub(&Mat::identity(3)).max_abs() < 1e-13);
    }

    #[test]
    fn singular_matrix_has_no_inverse() {
        let m = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(m.inverse().is_none());
        assert_eq!(m.det(), 0.0);
    }

    #[test]
    fn det_of_block_symplectic() {
        // [[0, I], [-I, 0]] in dimension 2n has determinant 1
        for n in 1..4 {
            let z = Mat::zeros(n, n);
            let id = Mat::identity(n);
            let omega = Mat::from_blocks(&z, &id, &id.scale(-1.0), &z);
            assert!((omega.det() - 1.0).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn tensor3_antisymmetry_defect() {
        let mut t = Tensor3::zeros(3);
        t.set(0, 1, 2, 1.0);
        t.set(1, 0, 2, -1.0);
        t.set(0, 2, 1, -1.0);
        t.set(2, 0, 1, 1.0);
        t.set(1, 2, 0, 1.0);
        t.set(2, 1, 0, -1.0);
        assert_eq!(t.antisymmetry_defect(), 0.0);
        t.set(2, 1, 0, 0.5);
        assert!(t.antisymmetry_defect() > 0.0);
    }
}
