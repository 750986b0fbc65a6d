//! Analytic benchmark likelihoods with known (or precisely computable)
//! evidences, all defined on a unit-hypercube prior via an affine
//! prior transform.
//!
//! Likelihood zeros (the plateau tails) are represented by a
//! `f64::NEG_INFINITY` log-likelihood sentinel; everything downstream
//! treats such points as exact ties.

use crate::error::{Error, Result};
use crate::math::{adaptive_simpson, ln_sphere_surface, logsumexp, normal_noncentral_moment};
use crate::Problem;
use statrs::function::erf::erf;

const LN_2PI: f64 = 1.8378770664093453;

/// Plateau likelihood constants: a unit Gaussian around 1/2 supported
/// on the central interval of width sigma, exactly zero outside it.
/// With the `[-3, 3]` prior the zero plateau covers 5/6 of the prior
/// mass.
pub const PLATEAU_MU: f64 = 0.5;
pub const PLATEAU_SIGMA: f64 = 1.0;

/// One analytic test likelihood.
///
/// Prior boxes are part of each problem definition: `[0,1]^d` for the
/// Gaussian, `[-5,5]^2` for Rosenbrock, `[-6,6]^d` for the shells,
/// `[-30,30]^d` for the mixture and `[-3,3]` for the plateau.
#[derive(Debug, Clone, PartialEq)]
pub enum ToyProblem {
    /// Spherical Gaussian pdf, mean `mu` and deviation `sigma` in every
    /// dimension. Analytic log-evidence is 0.
    Gaussian { d: usize, mu: f64, sigma: f64 },
    /// `-lnL(x, y) = (1 - x)^2 + 100 (y - x^2)^2`, d = 2.
    Rosenbrock,
    /// Two Gaussian shells of width `w` at radius `r` around `(+/-c, 0, ..., 0)`.
    Shells { d: usize, c: f64, r: f64, w: f64 },
    /// Product of log-gamma and Gaussian mixture factors with four
    /// identical modes; defined for even d.
    Mixture { d: usize },
    /// One-dimensional truncated Gaussian with an exact-zero tail
    /// plateau over 5/6 of the prior.
    Plateau,
}

impl ToyProblem {
    pub fn gaussian(d: usize) -> Self {
        ToyProblem::Gaussian {
            d,
            mu: 0.5,
            sigma: 0.001,
        }
    }

    pub fn rosenbrock() -> Self {
        ToyProblem::Rosenbrock
    }

    pub fn shells(d: usize) -> Self {
        ToyProblem::Shells {
            d,
            c: 3.5,
            r: 2.0,
            w: 0.1,
        }
    }

    pub fn mixture(d: usize) -> Self {
        ToyProblem::Mixture { d }
    }

    pub fn plateau() -> Self {
        ToyProblem::Plateau
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ToyProblem::Gaussian { .. } => "gaussian",
            ToyProblem::Rosenbrock => "rosenbrock",
            ToyProblem::Shells { .. } => "shells",
            ToyProblem::Mixture { .. } => "mixture",
            ToyProblem::Plateau => "plateau",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ToyProblem::Gaussian { d, .. } => *d,
            ToyProblem::Rosenbrock => 2,
            ToyProblem::Shells { d, .. } => *d,
            ToyProblem::Mixture { d } => *d,
            ToyProblem::Plateau => 1,
        }
    }

    /// Per-dimension prior box.
    pub fn prior_bounds(&self) -> Vec<(f64, f64)> {
        let (lo, hi) = match self {
            ToyProblem::Gaussian { .. } => (0.0, 1.0),
            ToyProblem::Rosenbrock => (-5.0, 5.0),
            ToyProblem::Shells { .. } => (-6.0, 6.0),
            ToyProblem::Mixture { .. } => (-30.0, 30.0),
            ToyProblem::Plateau => (-3.0, 3.0),
        };
        vec![(lo, hi); self.dim()]
    }

    /// Checks the kind-specific structural invariants.
    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(Error::Settings(msg));
        match self {
            ToyProblem::Gaussian { d, sigma, .. } => {
                if *d == 0 {
                    return err("gaussian requires d >= 1".into());
                }
                if !(*sigma > 0.0) {
                    return err(format!("gaussian sigma must be positive, got {sigma}"));
                }
            }
            ToyProblem::Rosenbrock | ToyProblem::Plateau => {}
            ToyProblem::Shells { d, c, r, w } => {
                if *d == 0 {
                    return err("shells requires d >= 1".into());
                }
                if !(*w > 0.0) || !(*r > 0.0) || !c.is_finite() {
                    return err(format!("bad shells parameters c={c} r={r} w={w}"));
                }
            }
            ToyProblem::Mixture { d } => {
                if *d == 0 || *d % 2 != 0 {
                    return err(format!("mixture requires even d >= 2, got {d}"));
                }
            }
        }
        Ok(())
    }

    /// Reference log-evidence.
    ///
    /// Rosenbrock is computed by adaptive quadrature of the
    /// semi-analytic one-dimensional integrand (abs tol 1e-8) and
    /// rounded to four decimals; the shells value uses the
    /// `2 <|x|^{d-1}> S_d / 12^d` closed form with the `(d-1)`-th
    /// non-central moment of `N(r, w^2)`, ignoring box truncation.
    /// The plateau has no reference value and returns an error.
    pub fn analytic_log_evidence(&self) -> Result<f64> {
        match self {
            ToyProblem::Gaussian { .. } => Ok(0.0),
            ToyProblem::Rosenbrock => {
                let q = rosenbrock_log_evidence_quadrature();
                Ok((q * 1e4).round() / 1e4)
            }
            ToyProblem::Shells { d, r, w, .. } => {
                let moment = normal_noncentral_moment(*d - 1, *r, *w);
                Ok(2.0f64.ln() + moment.ln() + ln_sphere_surface(*d) - *d as f64 * 12.0f64.ln())
            }
            ToyProblem::Mixture { d } => Ok(-(*d as f64) * 60.0f64.ln()),
            ToyProblem::Plateau => Err(Error::UnsupportedProblem(
                "plateau has no analytic evidence; compare against quadrature".into(),
            )),
        }
    }
}

/// Unrounded semi-analytic Rosenbrock log-evidence:
/// `Z = sqrt(pi)/2000 * int_-5^5 [erf(10(5-x^2)) + erf(10(5+x^2))] e^{-(1-x)^2} dx`.
pub fn rosenbrock_log_evidence_quadrature() -> f64 {
    let integrand =
        |x: f64| (erf(10.0 * (5.0 - x * x)) + erf(10.0 * (5.0 + x * x))) * (-(1.0 - x).powi(2)).exp();
    let q = adaptive_simpson(integrand, -5.0, 5.0, 1e-8);
    (std::f64::consts::PI.sqrt() / 2000.0 * q).ln()
}

fn ln_normal(z: f64) -> f64 {
    -0.5 * LN_2PI - 0.5 * z * z
}

/// Log-gamma pdf with unit shape and scale, shifted to `mu`:
/// `f(x) = exp((x - mu) - e^{x - mu})`.
fn ln_log_gamma(x: f64, mu: f64) -> f64 {
    let z = x - mu;
    z - z.exp()
}

fn ln_shell(radius: f64, r: f64, w: f64) -> f64 {
    -((2.0 * std::f64::consts::PI).sqrt() * w).ln() - (radius - r).powi(2) / (2.0 * w * w)
}

impl Problem for ToyProblem {
    fn dimension(&self) -> usize {
        self.dim()
    }

    fn prior_transform(&self, unit: &[f64]) -> Vec<f64> {
        assert_eq!(unit.len(), self.dim(), "prior_transform dimension mismatch");
        self.prior_bounds()
            .iter()
            .zip(unit)
            .map(|(&(lo, hi), &u)| lo + u * (hi - lo))
            .collect()
    }

    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        assert_eq!(theta.len(), self.dim(), "log_likelihood dimension mismatch");
        match self {
            ToyProblem::Gaussian { d, mu, sigma } => {
                let quad: f64 = theta.iter().map(|&t| (t - mu).powi(2)).sum();
                -0.5 * *d as f64 * LN_2PI - *d as f64 * sigma.ln() - quad / (2.0 * sigma * sigma)
            }
            ToyProblem::Rosenbrock => {
                let (x, y) = (theta[0], theta[1]);
                -((1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2))
            }
            ToyProblem::Shells { c, r, w, .. } => {
                let radius = |sign: f64| {
                    let mut s = (theta[0] - sign * c).powi(2);
                    for &t in &theta[1..] {
                        s += t * t;
                    }
                    s.sqrt()
                };
                logsumexp(ln_shell(radius(1.0), *r, *w), ln_shell(radius(-1.0), *r, *w))
            }
            ToyProblem::Mixture { d } => {
                let mut total = 0.0;
                for (k, &t) in theta.iter().enumerate() {
                    let i = k + 1;
                    total += if i == 1 {
                        logsumexp(ln_log_gamma(t, 10.0), ln_log_gamma(t, -10.0))
                            - std::f64::consts::LN_2
                    } else if i == 2 {
                        logsumexp(ln_normal(t - 10.0), ln_normal(t + 10.0))
                            - std::f64::consts::LN_2
                    } else if i <= (d + 2) / 2 {
                        ln_log_gamma(t, 10.0)
                    } else {
                        ln_normal(t - 10.0)
                    };
                }
                total
            }
            ToyProblem::Plateau => {
                let z = (theta[0] - PLATEAU_MU) / PLATEAU_SIGMA;
                if z.abs() <= 0.5 {
                    -0.5 * z * z
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn prior_transform_examples() {
        let g = ToyProblem::gaussian(2);
        assert_eq!(g.prior_transform(&[0.5, 0.5]), vec![0.5, 0.5]);

        let r = ToyProblem::rosenbrock();
        assert_eq!(r.prior_transform(&[0.0, 1.0]), vec![-5.0, 5.0]);

        let s = ToyProblem::shells(2);
        assert_eq!(s.prior_transform(&[0.5, 0.75]), vec![0.0, 3.0]);
    }

    #[test]
    #[should_panic(expected = "dimension mismatch")]
    fn prior_transform_rejects_wrong_dimension() {
        ToyProblem::gaussian(2).prior_transform(&[0.5]);
    }

    #[test]
    fn rosenbrock_maximum_is_zero() {
        assert_eq!(ToyProblem::rosenbrock().log_likelihood(&[1.0, 1.0]), 0.0);
    }

    #[test]
    fn gaussian_center_value() {
        // ln(1/sqrt(2 pi 1e-6)), checked against scipy
        let p = ToyProblem::gaussian(1);
        assert_relative_eq!(
            p.log_likelihood(&[0.5]),
            5.988816745777465,
            epsilon = 1e-12
        );
    }

    #[test]
    fn plateau_tail_is_neg_inf() {
        let p = ToyProblem::plateau();
        assert_eq!(p.log_likelihood(&[2.0]), f64::NEG_INFINITY);
        assert_eq!(p.log_likelihood(&[-0.01]), f64::NEG_INFINITY);
        assert_eq!(p.log_likelihood(&[1.01]), f64::NEG_INFINITY);
        assert!(p.log_likelihood(&[0.99]).is_finite());
        assert!(p.log_likelihood(&[0.01]).is_finite());
        // the supported interval is 1/6 of the [-3, 3] prior
        assert_eq!(p.log_likelihood(&[0.5]), 0.0);
    }

    #[test]
    fn shells_point_value() {
        // at (5.5, 0): on the +c shell, 9 - r = 7 sigmas * 70 away from -c
        let p = ToyProblem::shells(2);
        assert_relative_eq!(
            p.log_likelihood(&[5.5, 0.0]),
            1.383646559789373,
            epsilon = 1e-12
        );
    }

    #[test]
    fn gaussian_analytic_evidence_is_zero() {
        for d in [1, 2, 10, 50] {
            assert_eq!(ToyProblem::gaussian(d).analytic_log_evidence().unwrap(), 0.0);
        }
    }

    #[test]
    fn rosenbrock_evidence_matches_reference() {
        let q = rosenbrock_log_evidence_quadrature();
        // below the whole-real-line approximation -5.763 and rounding to
        // the reference -5.804
        assert!(q < -5.763);
        assert!((q - (-5.804)).abs() < 5e-4, "quadrature {q}");
        assert_relative_eq!(
            ToyProblem::rosenbrock().analytic_log_evidence().unwrap(),
            -5.8041,
            epsilon = 1e-12
        );
    }

    #[test]
    fn shells_evidence_matches_reference_table() {
        // (d, reference) pairs, reference rounded to 2 decimals
        for (d, reference) in [(2, -1.75), (10, -14.59), (30, -60.13), (50, -112.42)] {
            let z = ToyProblem::shells(d).analytic_log_evidence().unwrap();
            assert!(
                (z - reference).abs() < 5e-3,
                "shells d={d}: {z} vs {reference}"
            );
        }
        // full-precision values from an independent scipy evaluation
        assert_relative_eq!(
            ToyProblem::shells(2).analytic_log_evidence().unwrap(),
            -1.7456418720467646,
            epsilon = 1e-10
        );
        assert_relative_eq!(
            ToyProblem::shells(50).analytic_log_evidence().unwrap(),
            -112.41512356047497,
            epsilon = 1e-8
        );
    }

    #[test]
    fn mixture_evidence_matches_reference_table() {
        for (d, reference) in [(2, -8.19), (10, -40.94), (20, -81.89)] {
            let z = ToyProblem::mixture(d).analytic_log_evidence().unwrap();
            assert!(
                (z - reference).abs() < 5e-3,
                "mixture d={d}: {z} vs {reference}"
            );
        }
    }

    #[test]
    fn plateau_has_no_analytic_evidence() {
        assert!(matches!(
            ToyProblem::plateau().analytic_log_evidence(),
            Err(Error::UnsupportedProblem(_))
        ));
    }

    #[test]
    fn validate_rejects_bad_shapes() {
        assert!(ToyProblem::Mixture { d: 3 }.validate().is_err());
        assert!(ToyProblem::Mixture { d: 0 }.validate().is_err());
        assert!(ToyProblem::Gaussian {
            d: 2,
            mu: 0.5,
            sigma: 0.0
        }
        .validate()
        .is_err());
        assert!(ToyProblem::shells(10).validate().is_ok());
    }

    #[test]
    fn gaussian_quadrature_agrees_with_analytic_d1() {
        // midpoint rule, 1e4 nodes, paper parameters
        let p = ToyProblem::gaussian(1);
        let n = 10_000;
        let mut sum = 0.0;
        for i in 0..n {
            let x = (i as f64 + 0.5) / n as f64;
            sum += p.log_likelihood(&[x]).exp();
        }
        let log_z = (sum / n as f64).ln();
        assert!(log_z.abs() < 1e-3, "quadrature logZ = {log_z}");
    }

    #[test]
    fn gaussian_quadrature_agrees_with_analytic_d2() {
        let p = ToyProblem::Gaussian {
            d: 2,
            mu: 0.5,
            sigma: 0.05,
        };
        let n = 1500;
        let mut sum = 0.0;
        for i in 0..n {
            let x = (i as f64 + 0.5) / n as f64;
            for j in 0..n {
                let y = (j as f64 + 0.5) / n as f64;
                sum += p.log_likelihood(&[x, y]).exp();
            }
        }
        let log_z = (sum / (n * n) as f64).ln();
        assert!(log_z.abs() < 1e-3, "quadrature logZ = {log_z}");
    }

    /// Piecewise panels keep adaptive Simpson from skipping the two
    /// narrow modes at +/-10 on the wide [-30, 30] box.
    fn panel_quadrature<F: Fn(f64) -> f64>(f: F, tol: f64) -> f64 {
        (-15..15)
            .map(|k| adaptive_simpson(&f, 2.0 * k as f64, 2.0 * (k + 1) as f64, tol))
            .sum()
    }

    #[test]
    fn mixture_quadrature_validates_log_gamma_convention() {
        // the likelihood factorizes, so (int f1)(int f2) comes from two
        // one-dimensional quadratures of full likelihood evaluations:
        // int L(x, y0) dx * int L(x0, y) dy / L(x0, y0)
        let p = ToyProblem::mixture(2);
        let qx = panel_quadrature(|x| p.log_likelihood(&[x, 10.0]).exp(), 1e-12);
        let qy = panel_quadrature(|y| p.log_likelihood(&[0.3, y]).exp(), 1e-12);
        let log_z = qx.ln() + qy.ln() - p.log_likelihood(&[0.3, 10.0]) - 2.0 * 60.0f64.ln();
        assert!(
            (log_z - (-8.1886891244442)).abs() < 1e-4,
            "quadrature logZ = {log_z}"
        );
    }

    #[test]
    fn mixture_modes_are_identical() {
        // the factors are mixtures of identically shaped components at
        // +/-10, so the likelihood repeats between mode neighborhoods
        // (up to the far mode's exponentially small leakage) and the
        // Gaussian coordinate is exactly even
        let p = ToyProblem::mixture(4);
        for &delta in &[0.0, 0.4, -0.8, 1.5] {
            for &y in &[9.6, -10.3, 0.7] {
                let plus = p.log_likelihood(&[10.0 + delta, y, 10.0, 10.0]);
                let minus = p.log_likelihood(&[-10.0 + delta, y, 10.0, 10.0]);
                assert!((plus - minus).abs() < 1e-6, "{plus} vs {minus}");
                assert_eq!(plus, p.log_likelihood(&[10.0 + delta, -y, 10.0, 10.0]));
            }
        }
        // all four modes carry the same likelihood
        let m = p.log_likelihood(&[10.0, 10.0, 10.0, 10.0]);
        for corner in [[-10.0, 10.0], [10.0, -10.0], [-10.0, -10.0]] {
            let v = p.log_likelihood(&[corner[0], corner[1], 10.0, 10.0]);
            assert!((v - m).abs() < 1e-6);
        }
    }

    #[test]
    fn shells_invariant_under_rotation_about_center_axis() {
        let p = ToyProblem::shells(3);
        let base = [1.2, 1.5, -0.7];
        let reference = p.log_likelihood(&base);
        for k in 1..8 {
            let phi = k as f64 * 0.77;
            let (s, c) = phi.sin_cos();
            let rotated = [
                base[0],
                c * base[1] - s * base[2],
                s * base[1] + c * base[2],
            ];
            assert_relative_eq!(p.log_likelihood(&rotated), reference, epsilon = 1e-12);
        }
    }
}
