use crate::{Error, Result};
use faer::{Mat, MatRef, Side};

/// Eigendecomposition of a real symmetric matrix: ascending eigenvalues,
/// eigenvectors as matching columns.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
}

/// Dense symmetric eigensolve with a reproducible output convention:
/// eigenvalues ascending, each eigenvector scaled so its largest-magnitude
/// component (first such index on ties) is positive.
pub fn diagonalize(matrix: &Mat<f64>) -> Result<Eigen> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(Error::Contract(format!(
            "matrix must be square, got {}x{}",
            n,
            matrix.ncols()
        )));
    }
    for i in 0..n {
        for k in (i + 1)..n {
            if matrix[(i, k)] != matrix[(k, i)] {
                return Err(Error::Contract(format!(
                    "matrix not symmetric at ({i},{k})"
                )));
            }
        }
    }

    let evd = matrix
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigensolver failed: {e:?}")))?;

    let raw_values = evd.S();
    let raw_vectors = evd.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw_values[a].total_cmp(&raw_values[b]));

    let mut values = Vec::with_capacity(n);
    let mut vectors = Mat::<f64>::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        values.push(raw_values[src]);
        let mut max_abs = 0.0f64;
        let mut sign = 1.0f64;
        for i in 0..n {
            let v = raw_vectors[(i, src)];
            if v.abs() > max_abs {
                max_abs = v.abs();
                sign = if v < 0.0 { -1.0 } else { 1.0 };
            }
        }
        for i in 0..n {
            vectors[(i, col)] = sign * raw_vectors[(i, src)];
        }
    }
    Ok(Eigen { values, vectors })
}

/// Largest eigenpair residual ‖H v − E v‖₂ over `sample` evenly spread
/// eigenpairs (all of them if `sample` ≥ n). Used to enforce the solver
/// post-condition without paying O(n³) for a full check.
pub fn residual_max(matrix: MatRef<'_, f64>, eigen: &Eigen, sample: usize) -> f64 {
    let n = matrix.nrows();
    if n == 0 {
        return 0.0;
    }
    let step = if sample >= n { 1 } else { (n / sample).max(1) };
    let mut worst = 0.0f64;
    for k in (0..n).step_by(step) {
        let mut norm2 = 0.0;
        for i in 0..n {
            let mut hv = 0.0;
            for l in 0..n {
                hv += matrix[(i, l)] * eigen.vectors[(l, k)];
            }
            let r = hv - eigen.values[k] * eigen.vectors[(i, k)];
            norm2 += r * r;
        }
        worst = worst.max(norm2.sqrt());
    }
    worst
}

/// Frobenius norm, the scale reference for residual bounds.
pub fn frobenius_norm(matrix: MatRef<'_, f64>) -> f64 {
    let mut s = 0.0;
    for k in 0..matrix.ncols() {
        for i in 0..matrix.nrows() {
            s += matrix[(i, k)] * matrix[(i, k)];
        }
    }
    s.sqrt()
}
