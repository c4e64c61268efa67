//! Preconditioned conjugate gradients for symmetric positive semi-definite
//! operators whose null space is the constant vector.

pub(crate) struct CgOutcome {
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(x: &mut [f64]) {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    for v in x.iter_mut() {
        *v -= m;
    }
}

/// Solves `A x = b` for `b` orthogonal to constants, returning the mean-zero
/// solution. Stops when `|r| <= tol * |b|` (Euclidean norms). `diag` is the
/// Jacobi preconditioner.
pub(crate) fn cg_singular<F>(
    matvec: F,
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> CgOutcome
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut rhs = b.to_vec();
    remove_mean(&mut rhs);
    remove_mean(x);
    let bnorm = dot(&rhs, &rhs).sqrt();
    let mut ax = vec![0.0; n];
    matvec(x, &mut ax);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    if bnorm == 0.0 {
        x.fill(0.0);
        return CgOutcome {
            residual: 0.0,
        };
    }
    let precond = |r: &[f64], z: &mut [f64]| {
        for ((z, r), d) in z.iter_mut().zip(r).zip(diag) {
            *z = if *d > 0.0 { r / d } else { *r };
        }
        remove_mean(z);
    };
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut it = 0;
    let mut rnorm = dot(&r, &r).sqrt();
    while rnorm > tol * bnorm && it < max_iter {
        matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        // Recompute the true residual periodically to avoid drift.
        if it % 50 == 49 {
            matvec(x, &mut ax);
            for k in 0..n {
                r[k] = rhs[k] - ax[k];
            }
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
        rnorm = dot(&r, &r).sqrt();
        it += 1;
    }
    remove_mean(x);
    matvec(x, &mut ax);
    let res = rhs
        .iter()
        .zip(&ax)
        .map(|(b, a)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt();
    CgOutcome {
        residual: res / bnorm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_laplacian() {
        // Path graph on 5 nodes.
        let n = 5;
        let matvec = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let mut s = 0.0;
                if i > 0 {
                    s += x[i] - x[i - 1];
                }
                if i + 1 < n {
                    s += x[i] - x[i + 1];
                }
                y[i] = s;
            }
        };
        let diag = [1.0, 2.0, 2.0, 2.0, 1.0];
        let b = [1.0, 0.0, 0.0, 0.0, -1.0];
        let mut x = vec![0.0; n];
        let out = cg_singular(matvec, &diag, &b, &mut x, 1e-14, 100);
        assert!(out.residual < 1e-12);
        // Unit current through four unit resistors: potential drop of 4.
        assert!((x[0] - x[4] - 4.0).abs() < 1e-12);
        assert!(x.iter().sum::<f64>().abs() < 1e-12);
    }
}
