use super::basis::{check_basis_in_range, BasisState};
use crate::{ModelParams, Result};
use faer::Mat;
use std::collections::HashMap;

/// Assemble the Hamiltonian of the extended Dicke model in the given basis.
///
/// Diagonal: ω·n + ω0·m. Co-rotating coupling (λ/√N)·√(n+1)·√(j(j+1)−m(m−1))
/// links (n,m) with (n+1,m−1); counter-rotating (δλ/√N)·√(n+1)·√(j(j+1)−m(m+1))
/// links (n,m) with (n+1,m+1). All elements are real and the matrix is filled
/// symmetrically from the same computed value.
pub fn hamiltonian_matrix(params: &ModelParams, basis: &[BasisState]) -> Result<Mat<f64>> {
    check_basis_in_range(params, basis)?;
    let dim = basis.len();
    let index: HashMap<(u32, i32), usize> = basis
        .iter()
        .enumerate()
        .map(|(i, s)| ((s.n, s.m_twice), i))
        .collect();

    let j = params.j();
    let jjp1 = j * (j + 1.0);
    let co = params.coupling_prefactor();
    let counter = params.delta * co;

    let mut h = Mat::<f64>::zeros(dim, dim);
    for (i, s) in basis.iter().enumerate() {
        let m = s.m();
        h[(i, i)] = params.omega * s.n as f64 + params.omega0 * m;

        let boson = ((s.n + 1) as f64).sqrt();
        // (n, m) -> (n+1, m−1)
        if let Some(&k) = index.get(&(s.n + 1, s.m_twice - 2)) {
            let v = co * boson * (jjp1 - m * (m - 1.0)).sqrt();
            h[(i, k)] = v;
            h[(k, i)] = v;
        }
        // (n, m) -> (n+1, m+1)
        if counter != 0.0 {
            if let Some(&k) = index.get(&(s.n + 1, s.m_twice + 2)) {
                let v = counter * boson * (jjp1 - m * (m + 1.0)).sqrt();
                h[(i, k)] = v;
                h[(k, i)] = v;
            }
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{build_basis, diagonalize, Sector};

    #[test]
    fn spin_half_block_matches_analytic() {
        let p = ModelParams::new(1.0, 1.0, 0.8, 0.0, 1, 1).unwrap();
        let basis = build_basis(&p, &Sector::MBlock(1)).unwrap();
        let h = hamiltonian_matrix(&p, &basis).unwrap();
        assert_eq!(h.nrows(), 2);
        assert!((h[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((h[(1, 1)] - 0.5).abs() < 1e-15);
        assert!((h[(0, 1)] - 0.8).abs() < 1e-15);
        assert!((h[(1, 0)] - 0.8).abs() < 1e-15);
        let eig = diagonalize(&h).unwrap();
        assert!((eig.values[0] + 0.3).abs() < 1e-12);
        assert!((eig.values[1] - 1.3).abs() < 1e-12);
    }

    #[test]
    fn lambda_zero_is_diagonal() {
        let p = ModelParams::new(1.3, 0.7, 0.0, 0.5, 6, 6).unwrap();
        let basis = build_basis(&p, &Sector::ParityBlock { parity: 1, n_max: 5 }).unwrap();
        let h = hamiltonian_matrix(&p, &basis).unwrap();
        for i in 0..basis.len() {
            for k in 0..basis.len() {
                if i == k {
                    let want = 1.3 * basis[i].n as f64 + 0.7 * basis[i].m();
                    assert!((h[(i, k)] - want).abs() < 1e-15);
                } else {
                    assert_eq!(h[(i, k)], 0.0);
                }
            }
        }
    }

    #[test]
    fn delta_zero_conserves_m() {
        // assemble in a mixed basis (two M blocks glued together): all cross
        // elements must vanish exactly
        let p = ModelParams::new(1.0, 1.0, 2.5, 0.0, 4, 4).unwrap();
        let mut basis = build_basis(&p, &Sector::MBlock(3)).unwrap();
        let other = build_basis(&p, &Sector::MBlock(5)).unwrap();
        let split = basis.len();
        basis.extend_from_slice(&other);
        let h = hamiltonian_matrix(&p, &basis).unwrap();
        for i in 0..split {
            for k in split..basis.len() {
                assert_eq!(h[(i, k)], 0.0);
                assert_eq!(h[(k, i)], 0.0);
            }
        }
    }

    #[test]
    fn delta_couples_m_blocks_in_steps_of_two() {
        let p = ModelParams::new(1.0, 1.0, 2.5, 0.3, 4, 4).unwrap();
        let basis = build_basis(&p, &Sector::ParityBlock { parity: 1, n_max: 8 }).unwrap();
        let h = hamiltonian_matrix(&p, &basis).unwrap();
        for (i, a) in basis.iter().enumerate() {
            for (k, b) in basis.iter().enumerate() {
                let dm = (a.m_total(&p) - b.m_total(&p)).abs();
                if h[(i, k)] != 0.0 && i != k {
                    assert!(dm == 0 || dm == 2, "unexpected coupling at |ΔM| = {dm}");
                }
            }
        }
    }

    #[test]
    fn out_of_range_basis_rejected() {
        let p = ModelParams::new(1.0, 1.0, 2.5, 0.0, 4, 4).unwrap();
        let bad = vec![BasisState { n: 0, m_twice: 6 }];
        assert!(hamiltonian_matrix(&p, &bad).is_err());
        let bad = vec![BasisState { n: 0, m_twice: 3 }];
        assert!(hamiltonian_matrix(&p, &bad).is_err());
    }
}
