use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Works for `b < a` (returns the signed integral).
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

const GL_POINTS: usize = 20;

/// Nodes and weights of the Gauss-Legendre rule on `[-1, 1]` (Golub-Welsch).
fn gauss_legendre_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_POINTS;
        let mut jacobi = DMatrix::zeros(n, n);
        for k in 1..n {
            let b = k as f64 / ((4 * k * k - 1) as f64).sqrt();
            jacobi[(k - 1, k)] = b;
            jacobi[(k, k - 1)] = b;
        }
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> =
            (0..n).map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2))).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.into_iter().unzip()
    })
}

/// Composite 20-point Gauss-Legendre over `[a, b]` split into equal panels no
/// longer than `max_panel`. The result is a smooth function of the endpoints,
/// unlike adaptive schemes whose subdivision pattern jumps.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, max_panel: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (x, w) = gauss_legendre_rule();
    let panels = ((b - a).abs() / max_panel).ceil().max(1.0) as usize;
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        let mut acc = 0.0;
        for (xi, wi) in x.iter().zip(w) {
            acc += wi * f(mid + 0.5 * h * xi);
        }
        total += 0.5 * h * acc;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_rule_is_exact_on_polynomials() {
        let (x, w) = gauss_legendre_rule();
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
        let v = gauss_legendre(&|t: f64| t.powi(39), -1.0, 1.0, 10.0);
        assert!(v.abs() < 1e-14);
        let v = gauss_legendre(&|t: f64| t.powi(38), 0.0, 1.0, 10.0);
        assert!((v - 1.0 / 39.0).abs() < 1e-14);
        let v = gauss_legendre(&|t: f64| t.exp(), 2.0, -3.0, 0.5);
        assert!((v - ((-3f64).exp() - 2f64.exp())).abs() < 1e-13);
    }

    #[test]
    fn integrates_smooth_functions() {
        let v = adaptive_simpson(&|x: f64| x.exp(), 0.0, 2.0, 1e-12);
        assert!((v - (2f64.exp() - 1.0)).abs() < 1e-11);
        let v = adaptive_simpson(&|x: f64| 1.0 / (1.0 + (-x).exp()), 3.0, -4.0, 1e-12);
        let softplus = |x: f64| (1.0 + x.exp()).ln();
        assert!((v - (softplus(-4.0) - softplus(3.0))).abs() < 1e-11);
    }
}
