use nalgebra::{Matrix4, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Conditioning limit above which the inverse is treated as meaningless.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Parameter order of every FIM row and column.
pub const PARAMS: [&str; 4] = ["A", "B", "omega", "phi"];

/// 4×4 Fisher information over `[A, B, ω, φ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherMatrix {
    pub entries: [[f64; 4]; 4],
}

impl FisherMatrix {
    pub fn new(entries: [[f64; 4]; 4]) -> Self {
        Self { entries }
    }

    /// Build from the 10 upper-triangle entries in row order.
    pub(crate) fn from_upper(u: &[f64; 10]) -> Self {
        let mut m = [[0.0; 4]; 4];
        let mut idx = 0;
        for i in 0..4 {
            for j in i..4 {
                m[i][j] = u[idx];
                m[j][i] = u[idx];
                idx += 1;
            }
        }
        Self { entries: m }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j]
    }

    pub fn trace(&self) -> f64 {
        (0..4).map(|i| self.entries[i][i]).sum()
    }

    fn to_na(self) -> Matrix4<f64> {
        Matrix4::from_fn(|i, j| self.entries[i][j])
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        let scale = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .map(|(i, j)| self.entries[i][j].abs())
            .fold(0.0, f64::max);
        (0..4).all(|i| {
            (0..4).all(|j| (self.entries[i][j] - self.entries[j][i]).abs() <= rel_tol * scale)
        })
    }

    pub fn eigenvalues(&self) -> [f64; 4] {
        let e = SymmetricEigen::new(self.to_na()).eigenvalues;
        let mut v = [e[0], e[1], e[2], e[3]];
        v.sort_by(f64::total_cmp);
        v
    }

    /// All eigenvalues `>= -tol·trace`.
    pub fn is_psd(&self, tol: f64) -> bool {
        let t = self.trace().abs();
        self.eigenvalues()[0] >= -tol * t
    }

    /// Symmetric diagonal scaling `D^{-1/2}·I·D^{-1/2}`; `None` when a
    /// diagonal entry is not strictly positive.
    fn equilibrated(&self) -> Option<([f64; 4], [[f64; 4]; 4])> {
        let mut d = [0.0; 4];
        for i in 0..4 {
            let v = self.entries[i][i];
            if !(v > 0.0 && v.is_finite()) {
                return None;
            }
            d[i] = 1.0 / v.sqrt();
        }
        let mut m = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = self.entries[i][j] * d[i] * d[j];
            }
        }
        Some((d, m))
    }

    /// 2-norm condition number of the equilibrated matrix, `∞` if singular.
    ///
    /// Equilibration removes the scale differences between parameters (ω
    /// entries grow like N³) so the number measures genuine collinearity.
    pub fn condition(&self) -> f64 {
        let Some((_, m)) = self.equilibrated() else {
            return f64::INFINITY;
        };
        let ev = FisherMatrix::new(m).eigenvalues();
        if ev[0] <= 0.0 {
            f64::INFINITY
        } else {
            ev[3] / ev[0]
        }
    }

    /// Inverse via Gauss-Jordan with partial pivoting on the equilibrated
    /// matrix; `None` when ill-conditioned beyond [`CONDITION_LIMIT`].
    pub fn inverse(&self) -> Option<[[f64; 4]; 4]> {
        if !(self.condition() <= CONDITION_LIMIT) {
            return None;
        }
        let (d, m) = self.equilibrated()?;
        let inv = gauss_jordan(m)?;
        let mut out = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = inv[i][j] * d[i] * d[j];
            }
        }
        Some(out)
    }
}

fn gauss_jordan(m: [[f64; 4]; 4]) -> Option<[[f64; 4]; 4]> {
    let mut a = [[0.0; 8]; 4];
    for i in 0..4 {
        a[i][..4].copy_from_slice(&m[i]);
        a[i][4 + i] = 1.0;
    }
    for col in 0..4 {
        let piv = (col..4)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .unwrap();
        if a[piv][col] == 0.0 {
            return None;
        }
        a.swap(col, piv);
        let p = a[col][col];
        for v in a[col].iter_mut() {
            *v /= p;
        }
        for r in 0..4 {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for c in 0..8 {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    let mut inv = [[0.0; 4]; 4];
    for i in 0..4 {
        inv[i].copy_from_slice(&a[i][4..]);
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaled_identity() {
        let mut e = [[0.0; 4]; 4];
        for (i, row) in e.iter_mut().enumerate() {
            row[i] = 2.5;
        }
        let inv = FisherMatrix::new(e).inverse().unwrap();
        assert_eq!(inv[0][0], 0.4);
        assert_eq!(inv[2][2], 0.4);
        assert_eq!(FisherMatrix::new(e).condition(), 1.0);
    }

    #[test]
    fn singular_and_zero_diagonal() {
        let mut e = [[1.0; 4]; 4];
        assert!(FisherMatrix::new(e).inverse().is_none());
        e = [[0.0; 4]; 4];
        e[0][0] = 1.0;
        e[1][1] = 1.0;
        assert_eq!(FisherMatrix::new(e).condition(), f64::INFINITY);
    }

    #[test]
    fn upper_triangle_layout() {
        let u = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        let f = FisherMatrix::from_upper(&u);
        assert_eq!(f.get(0, 3), 4.0);
        assert_eq!(f.get(3, 0), 4.0);
        assert_eq!(f.get(1, 2), 6.0);
        assert_eq!(f.get(3, 3), 10.0);
        assert!(f.is_symmetric(0.0));
    }
}
