//! Laguerre polynomials, Laguerre functions on `C^n`, the normalisation
//! constants `c_{n,k}` and sublaplacian eigenvalues.

use num_complex::Complex64;
use num_rational::Ratio;

use crate::error::{Error, Result};

/// Largest ray index accepted anywhere in the crate.
pub const KMAX_LIMIT: usize = 64;

/// Type and degree of a Laguerre polynomial `L^delta_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaguerreParams {
    pub k: usize,
    pub delta: f64,
}

impl LaguerreParams {
    pub fn new(k: usize, delta: f64) -> Result<Self> {
        if !(delta > -1.0) {
            return Err(Error::InvalidArgument(format!("Laguerre type must exceed -1, got {delta}")));
        }
        Ok(Self { k, delta })
    }
}

/// `L^delta_k(t)` by the three-term recurrence.
pub fn laguerre_poly(k: usize, delta: f64, t: f64) -> Result<f64> {
    LaguerreParams::new(k, delta)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("Laguerre argument must be >= 0, got {t}")));
    }
    let mut out = vec![0.0; k + 1];
    laguerre_all(delta, t, &mut out);
    Ok(out[k])
}

/// Fills `out[j] = L^delta_j(t)` for `j = 0..out.len()`.
pub fn laguerre_all(delta: f64, t: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() == 1 {
        return;
    }
    out[1] = 1.0 + delta - t;
    for j in 1..out.len() - 1 {
        let jf = j as f64;
        out[j + 1] = ((2.0 * jf + 1.0 + delta - t) * out[j] - (jf + delta) * out[j - 1]) / (jf + 1.0);
    }
}

/// `phi^{n-1}_{k,lambda}` as a function of `|z|^2`.
pub fn laguerre_fn_r2(k: usize, n: usize, lambda: f64, r2: f64) -> Result<f64> {
    check_n_lambda(n, lambda)?;
    let x = 0.5 * lambda.abs() * r2;
    Ok(laguerre_poly(k, (n - 1) as f64, x)? * (-0.5 * x).exp())
}

/// `phi^{n-1}_{k,lambda}(z) = L^{n-1}_k(|lambda||z|^2/2) exp(-|lambda||z|^2/4)`.
pub fn laguerre_fn(k: usize, n: usize, lambda: f64, z: &[Complex64]) -> Result<f64> {
    if z.len() != n {
        return Err(Error::DimensionMismatch(format!("z has {} components, n = {n}", z.len())));
    }
    let r2: f64 = z.iter().map(|c| c.norm_sqr()).sum();
    laguerre_fn_r2(k, n, lambda, r2)
}

/// `out[k] = phi^{n-1}_{k,lambda}` at squared radius `r2`, all `k` at once.
pub fn laguerre_fns_all(n: usize, lambda: f64, r2: f64, out: &mut [f64]) {
    let x = 0.5 * lambda.abs() * r2;
    laguerre_all((n - 1) as f64, x, out);
    let e = (-0.5 * x).exp();
    for v in out.iter_mut() {
        *v *= e;
    }
}

fn check_n_lambda(n: usize, lambda: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda must be finite and nonzero, got {lambda}")));
    }
    Ok(())
}

/// Binomial coefficient as `u128`.
pub fn binom(a: u64, b: u64) -> u128 {
    if b > a {
        return 0;
    }
    let b = b.min(a - b);
    let mut acc: u128 = 1;
    for i in 0..b as u128 {
        acc = acc * (a as u128 - i) / (i + 1);
    }
    acc
}

/// `binom(k + n - 1, k)`, the dimension factor of the `k`-th ray.
pub fn ray_multiplicity(n: usize, k: usize) -> f64 {
    binom((k + n - 1) as u64, k as u64) as f64
}

/// Exact normalisation constant `c_{n,k} = k!(n-1)!/(k+n-1)!`.
pub fn c_norm(n: usize, k: usize) -> Ratio<u128> {
    assert!(n >= 1, "n must be at least 1");
    Ratio::new(1, binom((k + n - 1) as u64, k as u64))
}

pub fn c_norm_f64(n: usize, k: usize) -> f64 {
    1.0 / ray_multiplicity(n, k)
}

/// Sublaplacian eigenvalue `(2k + n)|lambda|` on `e^{n-1}_{k,lambda}`.
pub fn eigenvalue(n: usize, k: usize, lambda: f64) -> Result<f64> {
    check_n_lambda(n, lambda)?;
    Ok((2 * k + n) as f64 * lambda.abs())
}

/// Tabulated Laguerre functions on a finite set of squared radii, for a list
/// of `|lambda|` values and all `k <= kmax`.
///
/// Layout: `values[(node * radii.len() + r) * (kmax + 1) + k]`, so the `k`
/// sweep at a fixed `(node, radius)` is contiguous.
#[derive(Debug, Clone)]
pub struct LaguerreTable {
    n: usize,
    kmax: usize,
    n_radii: usize,
    values: Vec<f64>,
}

impl LaguerreTable {
    pub fn build(n: usize, kmax: usize, lambdas: &[f64], radii2: &[f64]) -> Result<Self> {
        if kmax > KMAX_LIMIT {
            return Err(Error::InvalidArgument(format!("Kmax {kmax} exceeds {KMAX_LIMIT}")));
        }
        for &l in lambdas {
            check_n_lambda(n, l)?;
        }
        let kk = kmax + 1;
        let mut values = vec![0.0; lambdas.len() * radii2.len() * kk];
        for (j, &l) in lambdas.iter().enumerate() {
            for (r, &r2) in radii2.iter().enumerate() {
                let base = (j * radii2.len() + r) * kk;
                laguerre_fns_all(n, l, r2, &mut values[base..base + kk]);
            }
        }
        Ok(Self {
            n,
            kmax,
            n_radii: radii2.len(),
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    /// All `k` values at `(node, radius)`.
    #[inline]
    pub fn row(&self, node: usize, r: usize) -> &[f64] {
        let kk = self.kmax + 1;
        let base = (node * self.n_radii + r) * kk;
        &self.values[base..base + kk]
    }

    /// Every radius row of one node, `n_radii * (kmax + 1)` values.
    pub fn node_block(&self, node: usize) -> &[f64] {
        let len = self.n_radii * (self.kmax + 1);
        &self.values[node * len..(node + 1) * len]
    }

    pub fn get(&self, k: usize, node: usize, r: usize) -> f64 {
        self.row(node, r)[k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// Exact coefficients of `L^delta_k` from Rodrigues' formula:
    /// `t^{-d} e^t / k! (d/dt)^k (e^{-t} t^{k+d})` expands by Leibniz to
    /// `sum_j (-1)^j binom(k+d, k-j) t^j / j!`.
    fn rodrigues_coeffs(k: u64, d: u64) -> Vec<f64> {
        let mut fact = 1.0;
        (0..=k)
            .map(|j| {
                if j > 0 {
                    fact *= j as f64;
                }
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * binom(k + d, k - j) as f64 / fact
            })
            .collect()
    }

    fn eval_poly(coeffs: &[f64], t: f64) -> f64 {
        coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    #[test]
    fn degree_zero_is_one() {
        for &(d, t) in &[(0.0, 0.0), (2.5, 3.0), (-0.5, 100.0)] {
            assert_eq!(laguerre_poly(0, d, t).unwrap(), 1.0);
        }
    }

    #[test]
    fn small_values() {
        assert_eq!(laguerre_poly(1, 0.0, 1.0).unwrap(), 0.0);
        assert!((laguerre_poly(3, 2.0, 0.0).unwrap() - 10.0).abs() < 1e-14);
        assert_eq!(rodrigues_coeffs(1, 0), vec![1.0, -1.0]);
    }

    #[test]
    fn domain_errors() {
        assert!(laguerre_poly(2, -1.0, 1.0).is_err());
        assert!(laguerre_poly(2, 0.0, -1.0).is_err());
        assert!(laguerre_fn(1, 1, 0.0, &[Complex64::new(1.0, 0.0)]).is_err());
        assert!(eigenvalue(1, 0, 0.0).is_err());
    }

    #[test]
    fn recurrence_matches_rodrigues() {
        for k in 0..=6u64 {
            for d in 0..=4u64 {
                let coeffs = rodrigues_coeffs(k, d);
                for &t in &[0.1, 1.0, 5.0, 20.0] {
                    let want = eval_poly(&coeffs, t);
                    let got = laguerre_poly(k as usize, d as f64, t).unwrap();
                    let scale = want.abs().max(1.0);
                    assert!((got - want).abs() <= 1e-12 * scale, "k={k} d={d} t={t}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn uniform_bound() {
        let mut out = vec![0.0; 17];
        for n in 1..=3usize {
            for i in 0..20_000 {
                let t = i as f64 * 0.01;
                laguerre_all((n - 1) as f64, t, &mut out);
                let e = (-0.5 * t).exp();
                for (k, &l) in out.iter().enumerate() {
                    let bound = ray_multiplicity(n, k);
                    assert!((l * e).abs() <= bound * (1.0 + 1e-12), "n={n} k={k} t={t}");
                }
            }
        }
    }

    #[test]
    fn special_values_of_phi() {
        let z = [Complex64::new(0.7, -0.4)];
        let lam = 1.3;
        let r2 = z[0].norm_sqr();
        assert_eq!(laguerre_fn(0, 1, lam, &z).unwrap(), (-lam * r2 / 4.0).exp());
        let zero = [Complex64::new(0.0, 0.0); 3];
        for k in 0..6 {
            let want = binom(k as u64 + 2, k as u64) as f64;
            assert!((laguerre_fn(k, 3, -0.8, &zero).unwrap() - want).abs() < 1e-12);
        }
    }

    /// Radial quadrature of `|phi|^2` over `C^1` (`2 pi int r |phi|^2 dr`) by
    /// composite Simpson, independent of the grid machinery.
    #[test]
    fn norm_identity_radial() {
        for &lam in &[0.5f64, 1.0, 2.0] {
            for k in 0..=8 {
                let rmax = (2.0 * (60.0 + 8.0 * k as f64) / lam).sqrt();
                let m = 20_000;
                let h = rmax / m as f64;
                let mut acc = 0.0;
                for i in 0..=m {
                    let r = i as f64 * h;
                    let w = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                    let phi = laguerre_fn_r2(k, 1, lam, r * r).unwrap();
                    acc += w * r * phi * phi;
                }
                let got = 2.0 * PI * acc * h / 3.0;
                let want = 2.0 * PI / lam;
                assert!((got - want).abs() / want < 1e-9, "lam={lam} k={k}: {got}");
            }
        }
    }

    #[test]
    fn c_norm_values() {
        for k in 0..10 {
            assert_eq!(c_norm(1, k), Ratio::new(1, 1));
        }
        assert_eq!(c_norm(2, 1), Ratio::new(1, 2));
        assert_eq!(c_norm(3, 2), Ratio::new(1, 6));
        for n in 2..5 {
            for k in 0..20 {
                assert!(c_norm(n, k + 1) < c_norm(n, k));
                assert_eq!(c_norm_f64(n, k), 1.0 / ray_multiplicity(n, k));
            }
        }
    }

    #[test]
    fn eigenvalues() {
        assert_eq!(eigenvalue(1, 0, 1.0).unwrap(), 1.0);
        assert_eq!(eigenvalue(3, 2, -0.5).unwrap(), 3.5);
        assert_eq!(eigenvalue(2, 4, 0.3).unwrap(), eigenvalue(2, 4, -0.3).unwrap());
    }

    #[test]
    fn table_matches_direct() {
        let lams = [0.5, -1.5, 3.0];
        let radii = [0.0, 0.25, 2.0, 9.0];
        let t = LaguerreTable::build(2, 5, &lams, &radii).unwrap();
        for (j, &l) in lams.iter().enumerate() {
            for (r, &r2) in radii.iter().enumerate() {
                for k in 0..=5 {
                    assert_eq!(t.get(k, j, r), laguerre_fn_r2(k, 2, l, r2).unwrap());
                }
            }
        }
        assert!(LaguerreTable::build(1, KMAX_LIMIT + 1, &lams, &radii).is_err());
    }

    proptest! {
        #[test]
        fn phi_is_radial(theta in 0.0..(2.0 * PI), phase2 in 0.0..(2.0 * PI),
                         a in -3.0..3.0f64, b in -3.0..3.0f64, k in 0usize..10, lam in 0.1..4.0f64) {
            let z = [Complex64::new(a, b), Complex64::new(b, -a)];
            let rot = [z[0] * Complex64::from_polar(1.0, theta), z[1] * Complex64::from_polar(1.0, phase2)];
            let v1 = laguerre_fn(k, 2, lam, &z).unwrap();
            let v2 = laguerre_fn(k, 2, lam, &rot).unwrap();
            prop_assert!((v1 - v2).abs() <= 1e-10 * (1.0 + v1.abs()));
        }
    }
}
