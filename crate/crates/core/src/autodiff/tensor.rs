//! Dense 64-bit tensors in row-major order.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ShapeError {
    #[error("shape mismatch: {op} got {lhs:?} and {rhs:?}")]
    Mismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: expected {expected}, got shape {got:?}")]
    Invalid {
        op: &'static str,
        expected: String,
        got: Vec<usize>,
    },
    #[error("reshape from {from:?} to {to:?} changes the element count")]
    BadReshape { from: Vec<usize>, to: Vec<usize> },
}

/// Dense array of f64 in row-major order. The element count always equals
/// the product of the shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "shape {:?} does not match {} elements",
            shape,
            data.len()
        );
        Self { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            shape: vec![],
            data: vec![v],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(m * n);
        for r in rows {
            assert_eq!(r.len(), n, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            shape: vec![m, n],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_scalar(&self) -> bool {
        self.shape.is_empty() || self.data.len() == 1
    }

    pub fn scalar_value(&self) -> f64 {
        debug_assert!(self.is_scalar());
        self.data[0]
    }

    pub fn rows(&self) -> usize {
        debug_assert_eq!(self.shape.len(), 2);
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        debug_assert_eq!(self.shape.len(), 2);
        self.shape[1]
    }

    pub fn at2(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn reshaped(mut self, shape: Vec<usize>) -> Result<Self, ShapeError> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(ShapeError::BadReshape {
                from: self.shape.clone(),
                to: shape,
            });
        }
        self.shape = shape;
        Ok(self)
    }
}

/// C[m,n] = A[m,k] * B[k,n], plain ikj loops; fine at desk scale.
pub(crate) fn matmul_raw(a: &Tensor, b: &Tensor) -> Result<Tensor, ShapeError> {
    if a.shape.len() != 2 || b.shape.len() != 2 || a.shape[1] != b.shape[0] {
        return Err(ShapeError::Mismatch {
            op: "matmul",
            lhs: a.shape.clone(),
            rhs: b.shape.clone(),
        });
    }
    let (m, k, n) = (a.shape[0], a.shape[1], b.shape[1]);
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let a_row = &a.data[i * k..(i + 1) * k];
        let o_row = &mut out[i * n..(i + 1) * n];
        for (kk, &aik) in a_row.iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            let b_row = &b.data[kk * n..(kk + 1) * n];
            for (j, &bkj) in b_row.iter().enumerate() {
                o_row[j] += aik * bkj;
            }
        }
    }
    Ok(Tensor::new(vec![m, n], out))
}

/// C[m,n] = A^T[m,k_rows...]: helper products used by matmul backward.
/// grad_a = g[m,n] * b^T[n,k] and grad_b = a^T[k,m] * g[m,n].
pub(crate) fn matmul_nt(g: &Tensor, b: &Tensor) -> Tensor {
    // g[m,n] * b[k,n]^T -> [m,k]
    let (m, n) = (g.shape[0], g.shape[1]);
    let k = b.shape[0];
    debug_assert_eq!(b.shape[1], n);
    let mut out = vec![0.0; m * k];
    for i in 0..m {
        let g_row = &g.data[i * n..(i + 1) * n];
        let o_row = &mut out[i * k..(i + 1) * k];
        for (kk, o) in o_row.iter_mut().enumerate() {
            let b_row = &b.data[kk * n..(kk + 1) * n];
            let mut acc = 0.0;
            for j in 0..n {
                acc += g_row[j] * b_row[j];
            }
            *o = acc;
        }
    }
    Tensor::new(vec![m, k], out)
}

pub(crate) fn matmul_tn(a: &Tensor, g: &Tensor) -> Tensor {
    // a[m,k]^T * g[m,n] -> [k,n]
    let (m, k) = (a.shape[0], a.shape[1]);
    let n = g.shape[1];
    debug_assert_eq!(g.shape[0], m);
    let mut out = vec![0.0; k * n];
    for i in 0..m {
        let a_row = &a.data[i * k..(i + 1) * k];
        let g_row = &g.data[i * n..(i + 1) * n];
        for (kk, &aik) in a_row.iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            let o_row = &mut out[kk * n..(kk + 1) * n];
            for j in 0..n {
                o_row[j] += aik * g_row[j];
            }
        }
    }
    Tensor::new(vec![k, n], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity_is_identity() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        let mut eye = Tensor::zeros(vec![3, 3]);
        for i in 0..3 {
            eye.data_mut()[i * 3 + i] = 1.0;
        }
        let c = matmul_raw(&a, &eye).unwrap();
        assert_eq!(c, a);
    }

    #[test]
    fn matmul_rejects_mismatched_shapes() {
        let a = Tensor::zeros(vec![2, 3]);
        let b = Tensor::zeros(vec![2, 3]);
        let err = matmul_raw(&a, &b).unwrap_err();
        assert!(err.to_string().contains("[2, 3]"));
    }

    #[test]
    fn transpose_products_match_naive() {
        let a = Tensor::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0], vec![2.0, 1.0]]); // 3x2
        let g = Tensor::from_rows(&[vec![1.0, 0.0, 2.0], vec![0.0, 1.0, -1.0], vec![3.0, 1.0, 0.0]]); // 3x3
        // grad wrt b of a*b: a^T g -> 2x3
        let tn = matmul_tn(&a, &g);
        assert_eq!(tn.shape(), &[2, 3]);
        // naive check of one entry: sum_i a[i][0]*g[i][2]
        let want = 1.0 * 2.0 + 0.5 * (-1.0) + 2.0 * 0.0;
        assert_eq!(tn.at2(0, 2), want);

        let b = Tensor::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.0, 1.0], vec![4.0, -3.0]]); // 4x2
        let g2 = Tensor::from_rows(&[vec![1.0, 0.0], vec![2.0, -1.0], vec![0.0, 1.0]]); // 3x2
        let nt = matmul_nt(&g2, &b);
        assert_eq!(nt.shape(), &[3, 4]);
        // entry (1, 0) = sum_j g2[1][j] * b[0][j]
        let want = 2.0 * 1.0 + (-1.0) * 2.0;
        assert_eq!(nt.at2(1, 0), want);
    }
}
