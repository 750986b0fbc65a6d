//! Small numeric helpers shared across the crate.

/// Numerically stable `ln(e^a + e^b)`.
pub fn logsumexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if a > b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// Stable `ln(sum exp(x_i))` over a slice. Returns -inf for an empty
/// slice or one made entirely of -inf terms.
pub fn logsumexp_slice(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance
/// `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(&f, a, fa, b, fb);
    recurse(&f, a, fa, b, fb, whole, m, fm, tol, 48)
}

/// Non-central moment `E[X^k]` of `X ~ N(mu, sigma^2)` via the recurrence
/// `M_k = mu M_{k-1} + (k-1) sigma^2 M_{k-2}`.
pub fn normal_noncentral_moment(k: usize, mu: f64, sigma: f64) -> f64 {
    let mut prev = 1.0; // M_0
    let mut cur = mu; // M_1
    if k == 0 {
        return prev;
    }
    for j in 2..=k {
        let next = mu * cur + (j - 1) as f64 * sigma * sigma * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `ln` of the surface area of the unit sphere in d dimensions,
/// `S_d = 2 pi^{d/2} / Gamma(d/2)`.
pub fn ln_sphere_surface(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    std::f64::consts::LN_2 + half * std::f64::consts::PI.ln()
        - statrs::function::gamma::ln_gamma(half)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn logsumexp_matches_naive_in_safe_range() {
        let a = 0.5;
        let b = 2.0;
        assert_relative_eq!(
            logsumexp(a, b),
            (a.exp() + b.exp()).ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn logsumexp_handles_large_arguments() {
        // naive evaluation overflows here
        assert_relative_eq!(logsumexp(1234.0, 1232.0), 1234.0 + (-2.0f64).exp().ln_1p());
    }

    #[test]
    fn logsumexp_neg_inf_identity() {
        assert_eq!(logsumexp(f64::NEG_INFINITY, 2.0), 2.0);
        assert_eq!(
            logsumexp(f64::NEG_INFINITY, f64::NEG_INFINITY),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn logsumexp_slice_empty_and_all_neg_inf() {
        assert_eq!(logsumexp_slice(&[]), f64::NEG_INFINITY);
        assert_eq!(
            logsumexp_slice(&[f64::NEG_INFINITY, f64::NEG_INFINITY]),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn simpson_polynomial_is_near_exact() {
        let q = adaptive_simpson(|x| x * x * x - 2.0 * x + 1.0, -1.0, 3.0, 1e-12);
        // exact: [x^4/4 - x^2 + x] from -1 to 3 = 14.25 - (-1.75)
        assert_relative_eq!(q, 16.0, epsilon = 1e-10);
    }

    #[test]
    fn simpson_gaussian_integral() {
        let q = adaptive_simpson(
            |x: f64| (-0.5 * x * x).exp(),
            -8.0,
            8.0,
            1e-10,
        );
        assert_relative_eq!(q, (2.0 * std::f64::consts::PI).sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn moments_match_quadrature() {
        // E[X^3] for N(2, 0.25): mu^3 + 3 mu sigma^2
        assert_relative_eq!(
            normal_noncentral_moment(3, 2.0, 0.5),
            8.0 + 3.0 * 2.0 * 0.25,
            epsilon = 1e-12
        );
        let q = adaptive_simpson(
            |x: f64| {
                x.powi(9) * (-0.5 * ((x - 2.0) / 0.1).powi(2)).exp()
                    / (0.1 * (2.0 * std::f64::consts::PI).sqrt())
            },
            0.0,
            4.0,
            1e-9,
        );
        assert_relative_eq!(q, normal_noncentral_moment(9, 2.0, 0.1), max_relative = 1e-8);
    }

    #[test]
    fn sphere_surface_small_d() {
        use std::f64::consts::PI;
        assert_relative_eq!(ln_sphere_surface(2).exp(), 2.0 * PI, epsilon = 1e-12);
        assert_relative_eq!(ln_sphere_surface(3).exp(), 4.0 * PI, epsilon = 1e-10);
    }
}
