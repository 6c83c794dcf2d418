use nalgebra::{DMatrix, DVector};

/// Lawson-Hanson non-negative least squares: argmin ||A x - b|| with x >= 0.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * a.norm().max(1.0);
    for _ in 0..3 * n + 10 {
        let w = a.transpose() * (b - a * &x);
        let cand = (0..n).filter(|&j| !passive[j] && w[j] > tol).max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = cand else { break };
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
            let sub = a.select_columns(&idx);
            let z_sub = match sub.clone().svd(true, true).solve(b, 1e-14) {
                Ok(z) => z,
                Err(_) => return x,
            };
            if z_sub.iter().all(|v| *v > 0.0) {
                for (k, &i) in idx.iter().enumerate() {
                    x[i] = z_sub[k];
                }
                for i in 0..n {
                    if !passive[i] {
                        x[i] = 0.0;
                    }
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (k, &i) in idx.iter().enumerate() {
                if z_sub[k] <= 0.0 {
                    alpha = alpha.min(x[i] / (x[i] - z_sub[k]));
                }
            }
            for (k, &i) in idx.iter().enumerate() {
                x[i] += alpha * (z_sub[k] - x[i]);
                if x[i] <= tol {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            if idx.iter().all(|&i| !passive[i]) {
                break;
            }
        }
    }
    x
}

/// Whether `p` is a convex combination of `points`, via a penalised NNLS
/// problem whose last row enforces sum(lambda) = 1.
pub fn in_convex_hull(points: &[Vec<f64>], p: &[f64]) -> bool {
    if points.is_empty() {
        return false;
    }
    let d = p.len();
    let n = points.len();
    let weight = 1e3;
    let mut a = DMatrix::zeros(d + 1, n);
    for (j, q) in points.iter().enumerate() {
        for i in 0..d {
            a[(i, j)] = q[i];
        }
        a[(d, j)] = weight;
    }
    let mut b = DVector::zeros(d + 1);
    for i in 0..d {
        b[i] = p[i];
    }
    b[d] = weight;
    let lambda = nnls(&a, &b);
    let resid = (&a * &lambda - &b).norm();
    resid < 1e-6 * (1.0 + DVector::from_column_slice(p).norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nnls_matches_unconstrained_when_positive() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let x_true = DVector::from_vec(vec![2.0, 3.0]);
        let b = &a * &x_true;
        let x = nnls(&a, &b);
        assert!((x - x_true).norm() < 1e-10);
    }

    #[test]
    fn nnls_clamps_negative_direction() {
        let a = DMatrix::identity(2, 2);
        let b = DVector::from_vec(vec![1.0, -1.0]);
        let x = nnls(&a, &b);
        assert_eq!(x[1], 0.0);
        assert!((x[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hull_of_a_square() {
        let sq: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        assert!(in_convex_hull(&sq, &[0.5, 0.5]));
        assert!(in_convex_hull(&sq, &[0.9, 0.1]));
        assert!(!in_convex_hull(&sq, &[1.1, 0.5]));
        assert!(!in_convex_hull(&sq, &[-0.01, -0.01]));
    }
}
