//! Moment fitting for (true objective, surrogate value) pairs, the
//! conditional-normal estimate and quantile bound built on it, a chi-squared
//! normality check and the projector residual bound.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::learning::FeatureMatrix;
use crate::{Error, Result};

pub const POWER_ITERATIONS: usize = 1000;
pub const POWER_TOL: f64 = 1e-10;
pub const NORMALITY_ALPHA: f64 = 0.05;
pub const MIN_NORMALITY_SAMPLES: usize = 30;

/// Sample moments of a paired sample (X, Y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BivariateFit {
    pub mu_x: f64,
    pub mu_y: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub rho: f64,
    pub n: usize,
}

impl BivariateFit {
    fn check(&self) -> Result<()> {
        let ok = self.sigma_x > 0.0
            && self.sigma_y > 0.0
            && self.sigma_x.is_finite()
            && self.sigma_y.is_finite()
            && self.rho.abs() <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Degenerate(format!(
                "fit with sigma_x={}, sigma_y={}, rho={}",
                self.sigma_x, self.sigma_y, self.rho
            )))
        }
    }

    /// Standard deviation of X given Y: σ_X·√(1−ρ²).
    pub fn conditional_sigma(&self) -> Result<f64> {
        self.check()?;
        Ok(self.sigma_x * (1.0 - self.rho * self.rho).max(0.0).sqrt())
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased moments and Pearson correlation.
pub fn fit_bivariate(x: &[f64], y: &[f64]) -> Result<BivariateFit> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "paired samples differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 pairs, got {n}")));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::Degenerate("zero variance in paired sample".into()));
    }
    let denom = (n - 1) as f64;
    Ok(BivariateFit {
        mu_x: mx,
        mu_y: my,
        sigma_x: (sxx / denom).sqrt(),
        sigma_y: (syy / denom).sqrt(),
        rho: (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0),
        n,
    })
}

/// E[X | Y = ŷ] = μ_X + σ_X ρ (ŷ − μ_Y) / σ_Y.
pub fn conditional_expectation(fit: &BivariateFit, y_hat: f64) -> Result<f64> {
    fit.check()?;
    Ok(fit.mu_x + fit.sigma_x * fit.rho * (y_hat - fit.mu_y) / fit.sigma_y)
}

/// ζ with P(X < ζ | Y = ŷ) = 1 − α under bivariate normality.
pub fn conditional_upper_bound(fit: &BivariateFit, y_hat: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let mu = conditional_expectation(fit, y_hat)?;
    Ok(fit.conditional_sigma()? * inverse_normal_cdf(1.0 - alpha) + mu)
}

/// Standard normal quantile by Acklam's rational approximation
/// (relative error below 1.15e-9 on the open unit interval).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    if p.is_nan() || p <= 0.0 {
        return if p == 0.0 { f64::NEG_INFINITY } else { f64::NAN };
    }
    if p >= 1.0 {
        return if p == 1.0 { f64::INFINITY } else { f64::NAN };
    }
    let tail = |q: f64| {
        let q = (-2.0 * q.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < P_LOW {
        tail(p)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail(1.0 - p)
    }
}

/// Sturges' rule: ⌈log₂ n⌉ + 1.
pub fn sturges_bins(n: usize) -> usize {
    (n.max(1) as f64).log2().ceil() as usize + 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityReport {
    pub bins: usize,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub rejected: bool,
}

/// Pearson chi-squared test against the normal fitted by sample mean and
/// unbiased standard deviation, over equal-probability bins.
pub fn chi2_normality(values: &[f64], bins: Option<usize>) -> Result<NormalityReport> {
    let n = values.len();
    if n < MIN_NORMALITY_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "normality check needs at least {MIN_NORMALITY_SAMPLES} values, got {n}"
        )));
    }
    let bins = bins.unwrap_or_else(|| sturges_bins(n));
    if bins < 4 {
        return Err(Error::InvalidArgument(format!(
            "{bins} bins leave no degrees of freedom after fitting two parameters"
        )));
    }
    let mu = mean(values);
    let var = values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var <= 0.0 {
        return Err(Error::Degenerate("constant sample has no fitted normal".into()));
    }
    let sigma = var.sqrt();
    let edges: Vec<f64> = (1..bins)
        .map(|k| mu + sigma * inverse_normal_cdf(k as f64 / bins as f64))
        .collect();
    let mut observed = vec![0usize; bins];
    for &v in values {
        observed[edges.partition_point(|&e| e <= v)] += 1;
    }
    let expected = n as f64 / bins as f64;
    let statistic = observed
        .iter()
        .map(|&o| (o as f64 - expected).powi(2) / expected)
        .sum::<f64>();
    let dof = bins - 3;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let p_value = dist.sf(statistic);
    Ok(NormalityReport { bins, statistic, dof, p_value, rejected: p_value < NORMALITY_ALPHA })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualBound {
    /// min_β ‖Aβ − b/‖b‖‖.
    pub residual: f64,
    /// √λ_max of the residual projector.
    pub bound: f64,
    pub lambda_max: f64,
    pub holds: bool,
    pub rank: usize,
    /// True when AᵀA was singular and the projector came from the SVD.
    pub fallback: bool,
}

/// Residual bound check for a feature matrix.
pub fn theorem5_check(a: &FeatureMatrix, b: &[f64]) -> Result<ResidualBound> {
    let dense = DMatrix::from_fn(a.rows(), a.cols(), |i, j| a.get(i, j) as f64);
    residual_bound(&dense, b)
}

/// Least-squares residual of the normalized target against √λ_max of
/// I − A(AᵀA)⁻¹Aᵀ. Rank-deficient A uses the SVD projector instead.
pub fn residual_bound(a: &DMatrix<f64>, b: &[f64]) -> Result<ResidualBound> {
    if a.nrows() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "matrix has {} rows but target has {}",
            a.nrows(),
            b.len()
        )));
    }
    let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || a.ncols() == 0 {
        return Err(Error::Degenerate("zero target or empty matrix".into()));
    }
    let bbar = DVector::from_iterator(b.len(), b.iter().map(|v| v / norm));

    let svd = a.clone().svd(true, false);
    let smax = svd.singular_values.max();
    let tol = smax * f64::EPSILON * a.nrows().max(a.ncols()) as f64;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();

    let chol = if rank == a.ncols() { (a.transpose() * a).cholesky() } else { None };
    let fallback = chol.is_none();
    let project: Box<dyn Fn(&DVector<f64>) -> DVector<f64>> = match chol {
        Some(c) => {
            let a = a.clone();
            Box::new(move |v| &a * c.solve(&(a.transpose() * v)))
        }
        None => {
            let u = svd.u.as_ref().expect("left singular vectors requested");
            let keep: Vec<usize> = (0..svd.singular_values.len())
                .filter(|&k| svd.singular_values[k] > tol)
                .collect();
            let basis = u.select_columns(&keep);
            Box::new(move |v| &basis * (basis.transpose() * v))
        }
    };
    let residual = (&bbar - project(&bbar)).norm();
    let lambda_max = power_iteration(a.nrows(), |v| v - project(v));
    let bound = lambda_max.max(0.0).sqrt();
    Ok(ResidualBound {
        residual,
        bound,
        lambda_max,
        holds: residual <= bound + 1e-9,
        rank,
        fallback,
    })
}

/// Top eigenvalue of a symmetric positive semidefinite operator.
fn power_iteration(dim: usize, op: impl Fn(&DVector<f64>) -> DVector<f64>) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v = DVector::from_fn(dim, |_, _| rng.random::<f64>() - 0.5);
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let w = op(&v);
        let next = v.dot(&w);
        let len = w.norm();
        if len < 1e-300 {
            return 0.0;
        }
        v = w / len;
        if (next - lambda).abs() < POWER_TOL {
            return next;
        }
        lambda = next;
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::Normal;

    fn bisect_quantile(p: f64) -> f64 {
        let n = Normal::standard();
        let (mut lo, mut hi) = (-40.0f64, 40.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if n.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn fit(mu_x: f64, mu_y: f64, sigma_x: f64, sigma_y: f64, rho: f64) -> BivariateFit {
        BivariateFit { mu_x, mu_y, sigma_x, sigma_y, rho, n: 100 }
    }

    #[test]
    fn perfect_correlation() {
        let x = [1.0, 2.0, 4.0, 7.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((fit_bivariate(&x, &x).unwrap().rho - 1.0).abs() < 1e-12);
        assert!((fit_bivariate(&x, &neg).unwrap().rho + 1.0).abs() < 1e-12);
    }

    #[test]
    fn five_point_moments() {
        // x mean 3, Σdx² = 10; y mean 4, Σdy² = 10, Σdxdy = 9.
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.0, 3.0, 5.0, 4.0, 6.0];
        let f = fit_bivariate(&x, &y).unwrap();
        assert_eq!((f.mu_x, f.mu_y, f.n), (3.0, 4.0, 5));
        assert!((f.sigma_x - 2.5f64.sqrt()).abs() < 1e-12);
        assert!((f.sigma_y - 2.5f64.sqrt()).abs() < 1e-12);
        assert!((f.rho - 0.9).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(fit_bivariate(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::Degenerate(_))));
        assert!(fit_bivariate(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(conditional_expectation(&fit(0.0, 0.0, 0.0, 1.0, 0.5), 1.0).is_err());
    }

    #[test]
    fn conditional_expectation_cases() {
        let f = fit(10.0, 5.0, 2.0, 1.0, 0.8);
        assert!((conditional_expectation(&f, 3.0).unwrap() - 6.8).abs() < 1e-12);
        assert_eq!(conditional_expectation(&f, 5.0).unwrap(), 10.0);
        let ind = fit(10.0, 5.0, 2.0, 1.0, 0.0);
        assert_eq!(conditional_expectation(&ind, -40.0).unwrap(), 10.0);
    }

    #[test]
    fn upper_bound_cases() {
        let f = fit(10.0, 5.0, 2.0, 1.0, 0.8);
        let mu = conditional_expectation(&f, 3.0).unwrap();
        assert!((conditional_upper_bound(&f, 3.0, 0.5).unwrap() - mu).abs() < 1e-12);
        let ind = fit(10.0, 5.0, 2.0, 1.0, 0.0);
        let one_sigma = Normal::standard().cdf(-1.0);
        let z = conditional_upper_bound(&ind, 0.0, one_sigma).unwrap();
        assert!((z - 12.0).abs() < 1e-8, "{z}");
        assert!(conditional_upper_bound(&f, 3.0, 0.0).is_err());
        assert!(conditional_upper_bound(&f, 3.0, 1.0).is_err());
    }

    #[test]
    fn quantile_matches_bisection() {
        let mut ps = vec![1e-12, 1e-9, 1e-6, 1e-3, 0.02425, 0.5, 0.97575, 0.999, 1.0 - 1e-6];
        ps.extend((1..100).map(|k| k as f64 / 100.0));
        for p in ps {
            let (x, oracle) = (inverse_normal_cdf(p), bisect_quantile(p));
            assert!((x - oracle).abs() <= 1.2e-9 * oracle.abs().max(1.0), "p={p}: {x} vs {oracle}");
        }
        assert_eq!(inverse_normal_cdf(0.5), 0.0);
    }

    #[test]
    fn too_few_bins_or_samples() {
        let v: Vec<f64> = (0..50).map(|k| k as f64).collect();
        assert!(chi2_normality(&v, Some(3)).is_err());
        assert!(chi2_normality(&v[..20], None).is_err());
        let r = chi2_normality(&v, Some(4)).unwrap();
        assert_eq!(r.dof, 1);
        assert!(r.statistic >= 0.0);
    }

    #[test]
    fn exact_fit_has_zero_residual() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let b: Vec<f64> = (0..4).map(|i| 2.0 + 3.0 * i as f64).collect();
        let r = residual_bound(&a, &b).unwrap();
        assert!(r.residual < 1e-12);
        assert!((r.lambda_max - 1.0).abs() < 1e-9);
        assert!(r.holds && !r.fallback);
    }

    #[test]
    fn rank_deficient_uses_the_svd_projector() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let r = residual_bound(&a, &[1.0, 2.0, 3.0]).unwrap();
        assert!(r.fallback);
        assert_eq!(r.rank, 1);
        assert!((r.lambda_max - 1.0).abs() < 1e-9);
        assert!(r.holds);
    }

    #[test]
    fn full_row_rank_gives_zero_spectrum() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 2.0, 0.0, 1.0, 1.0]);
        let r = residual_bound(&a, &[3.0, -1.0]).unwrap();
        assert!(r.lambda_max.abs() < 1e-9 && r.residual < 1e-9 && r.holds);
    }
}
