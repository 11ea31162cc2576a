mod common;

use common::{kron_ref, lyapunov_series_oracle, to_sq, Sq};
use proptest::prelude::*;
use rand::Rng;
use satsync::matkernel::{
    eigenvalues, is_positive_definite, kron, lyapunov_residual, solve_discrete_lyapunov, spectral_norm,
    spectral_radius,
};
use satsync::Matrix;

fn square(max: usize) -> impl Strategy<Value = Matrix> {
    (1..=max).prop_flat_map(|n| {
        prop::collection::vec(-3.0f64..3.0, n * n).prop_map(move |d| Matrix::from_row_major(n, n, d).unwrap())
    })
}

fn fixed(n: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-3.0f64..3.0, n * n).prop_map(move |d| Matrix::from_row_major(n, n, d).unwrap())
}

fn max_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn kron_is_associative(a in square(3), b in square(2), c in square(2)) {
        let left = kron(&kron(&a, &b), &c);
        let right = kron(&a, &kron(&b, &c));
        prop_assert!(max_diff(&left, &right) <= 1e-12 * (1.0 + left.max_abs()));
    }

    #[test]
    fn kron_matches_block_definition(a in square(3), b in square(3)) {
        let got = kron(&a, &b);
        let want = kron_ref(&to_sq(&a), &to_sq(&b));
        prop_assert_eq!(got.as_slice(), &want.a[..]);
    }

    #[test]
    fn kron_mixed_product(a in fixed(2), b in fixed(3), c in fixed(2), d in fixed(3)) {
        let left = kron(&a, &b).matmul(&kron(&c, &d)).unwrap();
        let right = kron(&a.matmul(&c).unwrap(), &b.matmul(&d).unwrap());
        prop_assert!(max_diff(&left, &right) <= 1e-10 * (1.0 + left.max_abs()));
    }

    #[test]
    fn eigenvalue_product_is_determinant_and_sum_is_trace(m in square(4)) {
        let ev = eigenvalues(&m).unwrap();
        prop_assert_eq!(ev.len(), m.rows());
        let prod = ev.iter().fold(num_complex::Complex64::new(1.0, 0.0), |p, z| p * z);
        let sum: num_complex::Complex64 = ev.iter().sum();
        let det = det_ref(&to_sq(&m));
        let trace: f64 = (0..m.rows()).map(|i| m[(i, i)]).sum();
        let scale = 1.0 + m.max_abs().powi(m.rows() as i32);
        prop_assert!((prod.re - det).abs() <= 1e-8 * scale, "{prod} vs {det}");
        prop_assert!(prod.im.abs() <= 1e-8 * scale);
        prop_assert!((sum.re - trace).abs() <= 1e-8 * (1.0 + m.max_abs()));
        prop_assert!(sum.im.abs() <= 1e-8 * (1.0 + m.max_abs()));
    }

    #[test]
    fn spectral_norm_dominates_radius(m in square(5)) {
        let rho = spectral_radius(&m).unwrap();
        let norm = spectral_norm(&m);
        prop_assert!(norm >= rho - 1e-9 * (1.0 + rho), "{norm} < {rho}");
        prop_assert!(norm <= m.frobenius_norm() * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn spectral_norm_bounds_action(m in square(4), v in prop::collection::vec(-1.0f64..1.0, 4)) {
        let v = &v[..m.cols()];
        let mv = m.mul_vec(v).unwrap();
        let lhs = mv.iter().map(|x| x * x).sum::<f64>().sqrt();
        let rhs = spectral_norm(&m) * v.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!(lhs <= rhs * (1.0 + 1e-10) + 1e-12);
    }
}

/// Determinant by Gaussian elimination with partial pivoting.
fn det_ref(m: &Sq) -> f64 {
    let n = m.n;
    let mut a = m.a.clone();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i * n + c].abs().total_cmp(&a[j * n + c].abs())).unwrap();
        if a[p * n + c] == 0.0 {
            return 0.0;
        }
        if p != c {
            for j in 0..n {
                a.swap(p * n + j, c * n + j);
            }
            det = -det;
        }
        det *= a[c * n + c];
        for r in c + 1..n {
            let f = a[r * n + c] / a[c * n + c];
            for j in c..n {
                a[r * n + j] -= f * a[c * n + j];
            }
        }
    }
    det
}

#[test]
fn random_schur_lyapunov_solves_match_series() {
    let mut rng = common::rng(7);
    for trial in 0..100 {
        let n = rng.gen_range(1..=6);
        let raw = Matrix::from_row_major(n, n, (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let rho = spectral_radius(&raw).unwrap();
        let target = rng.gen_range(0.05..0.95);
        let m = if rho > 0.0 { raw.scale(target / rho) } else { raw };
        let q = Matrix::identity(n).scale(2.0);
        let p = solve_discrete_lyapunov(&m, &q).unwrap();
        let res = lyapunov_residual(&m, &p, &q);
        assert!(res < 1e-9 * (1.0 + p.frobenius_norm()), "trial {trial}: residual {res}");
        assert!(is_positive_definite(&p).unwrap(), "trial {trial}");
        let oracle = lyapunov_series_oracle(&to_sq(&m), 2.0);
        let diff = p.as_slice().iter().zip(&oracle.a).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-8 * (1.0 + p.max_abs()), "trial {trial}: {diff}");
    }
}

#[test]
fn lyapunov_rejects_unstable() {
    let m = Matrix::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]);
    assert!(solve_discrete_lyapunov(&m, &Matrix::identity(2)).is_err());
}
