//! Matrix-free GMRES.
//!
//! The operator is only ever applied to vectors, which lets the controller
//! pass a directional finite difference of the KKT residual instead of an
//! assembled Jacobian. No restarts: `max_iters` caps the Krylov dimension,
//! which keeps the cost per controller step fixed.

#[derive(Debug, Clone, PartialEq)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    /// True residual `‖b − A x‖`, re-evaluated with one extra operator application.
    pub residual_norm: f64,
    pub iterations: usize,
    /// The Arnoldi process produced a zero vector before the residual was small.
    pub breakdown: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Solve `A x = rhs` starting from `x = 0`.
pub fn gmres_solve<A>(apply: A, rhs: &[f64], max_iters: usize, tol: f64) -> GmresOutcome
where
    A: FnMut(&[f64]) -> Vec<f64>,
{
    gmres_solve_from(apply, rhs, &vec![0.0; rhs.len()], max_iters, tol)
}

/// Solve `A x = rhs` starting from `x0`. Stops once the least-squares
/// residual falls below `tol · ‖rhs‖`.
pub fn gmres_solve_from<A>(mut apply: A, rhs: &[f64], x0: &[f64], max_iters: usize, tol: f64) -> GmresOutcome
where
    A: FnMut(&[f64]) -> Vec<f64>,
{
    let n = rhs.len();
    assert_eq!(x0.len(), n, "initial guess has the wrong dimension");
    let max_iters = max_iters.max(1).min(n.max(1));
    let rhs_norm = norm(rhs);

    if rhs_norm == 0.0 && x0.iter().all(|x| *x == 0.0) {
        return GmresOutcome {
            x: vec![0.0; n],
            residual_norm: 0.0,
            iterations: 0,
            breakdown: false,
        };
    }

    let mut r0 = apply(x0);
    for (r, b) in r0.iter_mut().zip(rhs) {
        *r = b - *r;
    }
    let beta = norm(&r0);
    let target = tol * rhs_norm;
    if beta <= target || beta == 0.0 {
        return GmresOutcome {
            x: x0.to_vec(),
            residual_norm: beta,
            iterations: 0,
            breakdown: false,
        };
    }

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_iters + 1);
    basis.push(r0.iter().map(|r| r / beta).collect());
    // Column-major upper Hessenberg factor, rotated in place into R.
    let mut hess: Vec<Vec<f64>> = Vec::with_capacity(max_iters);
    let mut cs: Vec<f64> = Vec::with_capacity(max_iters);
    let mut sn: Vec<f64> = Vec::with_capacity(max_iters);
    let mut g = vec![0.0; max_iters + 1];
    g[0] = beta;

    let mut k = 0;
    let mut breakdown = false;
    for j in 0..max_iters {
        let mut w = apply(&basis[j]);
        let w_scale = norm(&w);
        let mut h = vec![0.0; j + 2];
        // Modified Gram-Schmidt, two passes.
        for _ in 0..2 {
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                h[i] += hij;
                axpy(-hij, v, &mut w);
            }
        }
        let h_next = norm(&w);
        h[j + 1] = h_next;

        for i in 0..j {
            let t = cs[i] * h[i] + sn[i] * h[i + 1];
            h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
            h[i] = t;
        }
        let denom = h[j].hypot(h[j + 1]);
        if denom <= f64::EPSILON * w_scale || denom == 0.0 {
            // A maps the new basis vector into the span already explored.
            breakdown = true;
            break;
        }
        let (c, s) = (h[j] / denom, h[j + 1] / denom);
        cs.push(c);
        sn.push(s);
        h[j] = denom;
        h[j + 1] = 0.0;
        g[j + 1] = -s * g[j];
        g[j] *= c;
        hess.push(h);
        k = j + 1;

        let ls_residual = g[j + 1].abs();
        if ls_residual <= target {
            break;
        }
        if h_next <= 1e3 * f64::EPSILON * w_scale.max(f64::MIN_POSITIVE) {
            // The Krylov space is invariant under A, so the least-squares
            // solution above is already exact.
            break;
        }
        basis.push(w.iter().map(|x| x / h_next).collect());
    }

    // Back substitution on the rotated factor; drop trailing singular columns.
    while k > 0 && hess[k - 1][k - 1].abs() <= f64::EPSILON * hess[0][0].abs() {
        k -= 1;
        breakdown = true;
    }
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut acc = g[i];
        for (l, yl) in y.iter().enumerate().take(k).skip(i + 1) {
            acc -= hess[l][i] * yl;
        }
        y[i] = acc / hess[i][i];
    }
    let mut x = x0.to_vec();
    for (yi, v) in y.iter().zip(&basis) {
        axpy(*yi, v, &mut x);
    }

    let ax = apply(&x);
    let residual_norm = rhs.iter().zip(&ax).map(|(b, a)| (b - a) * (b - a)).sum::<f64>().sqrt();
    GmresOutcome {
        x,
        residual_norm,
        iterations: k,
        breakdown,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|row| dot(row, x)).collect()
    }

    #[test]
    fn identity_converges_in_one_iteration() {
        let b = vec![1.0, -2.0, 3.5, 0.25];
        let out = gmres_solve(|x| x.to_vec(), &b, 4, 1e-12);
        assert_eq!(out.iterations, 1);
        assert!(!out.breakdown);
        for (x, b) in out.x.iter().zip(&b) {
            assert!((x - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let out = gmres_solve(|x| x.iter().map(|v| 3.0 * v).collect(), &[0.0; 5], 5, 1e-10);
        assert_eq!(out.x, vec![0.0; 5]);
        assert_eq!(out.residual_norm, 0.0);
    }

    #[test]
    fn diagonal_system() {
        let d = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [1.0, 1.0, 1.0, 1.0, 1.0];
        let out = gmres_solve(|x| x.iter().zip(&d).map(|(x, d)| x * d).collect(), &b, 5, 1e-14);
        for (x, d) in out.x.iter().zip(&d) {
            assert!((x - 1.0 / d).abs() < 1e-12);
        }
        assert!(out.residual_norm < 1e-12);
    }

    #[test]
    fn singular_operator_flags_breakdown() {
        // A annihilates e2, and b has a component the range cannot reach.
        let a = vec![vec![1.0, 0.0], vec![0.0, 0.0]];
        let out = gmres_solve(|x| matvec(&a, x), &[0.0, 1.0], 2, 1e-12);
        assert!(out.breakdown);
        assert!(out.x.iter().all(|x| x.is_finite()));
        assert!((out.residual_norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn warm_start_at_solution_returns_immediately() {
        let a = vec![vec![4.0, 1.0], vec![1.0, 3.0]];
        let x_true = [0.3, -0.7];
        let b = matvec(&a, &x_true);
        let out = gmres_solve_from(|x| matvec(&a, x), &b, &x_true, 2, 1e-12);
        assert_eq!(out.iterations, 0);
        assert_eq!(out.x, x_true.to_vec());
    }

    #[test]
    fn truncated_krylov_reports_true_residual() {
        let a: Vec<Vec<f64>> = (0..6)
            .map(|i| {
                (0..6)
                    .map(|j| {
                        if i == j {
                            2.0 + i as f64
                        } else {
                            0.3 / (1.0 + (i + j) as f64)
                        }
                    })
                    .collect()
            })
            .collect();
        let b = vec![1.0, -1.0, 2.0, 0.5, -0.3, 0.9];
        let out = gmres_solve(|x| matvec(&a, x), &b, 2, 1e-14);
        let ax = matvec(&a, &out.x);
        let true_res = norm(&b.iter().zip(&ax).map(|(b, a)| b - a).collect::<Vec<_>>());
        assert!((out.residual_norm - true_res).abs() < 1e-10);
        assert_eq!(out.iterations, 2);
    }
}
