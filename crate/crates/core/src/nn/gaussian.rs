use super::Real;
use crate::error::{Error, Result};

pub const LOGVAR_MIN: f64 = -20.0;
pub const LOGVAR_MAX: f64 = 20.0;

/// Diagonal-Gaussian posterior `N(mu, exp(logvar))`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianLatent<T = f32> {
    pub mu: Vec<T>,
    pub logvar: Vec<T>,
}

impl<T: Real> GaussianLatent<T> {
    /// Builds a latent, clamping `logvar` into `[-20, 20]`.
    pub fn new(mu: Vec<T>, logvar: Vec<T>) -> Result<Self> {
        if mu.len() != logvar.len() {
            return Err(Error::shape(format!(
                "mu has {} entries, logvar {}",
                mu.len(),
                logvar.len()
            )));
        }
        if mu.iter().chain(&logvar).any(|v| !v.is_finite()) {
            return Err(Error::domain("latent contains non-finite values"));
        }
        let logvar = logvar.into_iter().map(clamp_logvar).collect();
        Ok(Self { mu, logvar })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn sigma(&self) -> Vec<T> {
        self.logvar
            .iter()
            .map(|&lv| (lv * T::of(0.5)).exp())
            .collect()
    }
}

pub(crate) fn clamp_logvar<T: Real>(lv: T) -> T {
    lv.max(T::of(LOGVAR_MIN)).min(T::of(LOGVAR_MAX))
}

/// KL divergence from `N(mu, sigma^2)` to the standard normal prior:
/// `0.5 * sum(mu^2 + sigma^2 - ln sigma^2 - 1)`, accumulated in f64.
pub fn gaussian_kl<T: Real>(latent: &GaussianLatent<T>) -> f64 {
    latent
        .mu
        .iter()
        .zip(&latent.logvar)
        .map(|(&m, &lv)| {
            let m = m.f64();
            let lv = clamp_logvar(lv.f64());
            // exp(lv) - lv - 1 >= 0 exactly; computed as expm1 for small lv.
            0.5 * (m * m + (lv.exp_m1() - lv))
        })
        .sum()
}

/// Gradients of [`gaussian_kl`] with respect to `mu` and `logvar`.
pub fn kl_grad<T: Real>(mu: T, logvar: T) -> (T, T) {
    (mu, T::of(0.5) * (logvar.exp() - T::one()))
}

/// `z = mu + exp(logvar / 2) * eps`.
pub fn reparameterize<T: Real>(latent: &GaussianLatent<T>, eps: &[T]) -> Result<Vec<T>> {
    if eps.len() != latent.dim() {
        return Err(Error::shape(format!(
            "noise has {} entries, latent dimension is {}",
            eps.len(),
            latent.dim()
        )));
    }
    Ok(latent
        .mu
        .iter()
        .zip(latent.sigma())
        .zip(eps)
        .map(|((&m, s), &e)| m + s * e)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Prng;

    fn latent(mu: &[f64], lv: &[f64]) -> GaussianLatent<f64> {
        GaussianLatent::new(mu.to_vec(), lv.to_vec()).unwrap()
    }

    #[test]
    fn kl_analytic_cases() {
        assert_eq!(gaussian_kl(&latent(&[0.0, 0.0], &[0.0, 0.0])), 0.0);
        assert!((gaussian_kl(&latent(&[1.0], &[0.0])) - 0.5).abs() < 1e-12);
        let expected = 0.5 * (4.0 - 4f64.ln() - 1.0);
        assert!((gaussian_kl(&latent(&[0.0], &[4f64.ln()])) - expected).abs() < 1e-12);
    }

    /// Monte-Carlo oracle: KL = E_q[ln q(z) - ln p(z)].
    #[test]
    fn kl_matches_monte_carlo_estimate() {
        let lv = 4f64.ln();
        let sigma = (lv / 2.0).exp();
        let mut rng = Prng::new(2024);
        let n = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let e = rng.gaussian();
            let z = sigma * e;
            // ln q(z) - ln p(z) with the 2*pi terms cancelling
            acc += -0.5 * e * e - sigma.ln() + 0.5 * z * z;
        }
        let mc = acc / n as f64;
        let analytic = gaussian_kl(&latent(&[0.0], &[lv]));
        assert!((mc - analytic).abs() < 1e-2, "mc {mc} analytic {analytic}");
        assert!((analytic - 0.806_852_819_440_054_7).abs() < 1e-9);
    }

    #[test]
    fn logvar_is_clamped() {
        let l = latent(&[0.0], &[1e4]);
        assert_eq!(l.logvar[0], LOGVAR_MAX);
        assert!(gaussian_kl(&l).is_finite());
    }

    #[test]
    fn non_finite_rejected() {
        assert!(GaussianLatent::new(vec![f64::NAN], vec![0.0]).is_err());
        assert!(GaussianLatent::new(vec![0.0], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn reparameterize_cases() {
        let l = latent(&[0.5, -1.0], &[0.3, 0.2]);
        assert_eq!(reparameterize(&l, &[0.0, 0.0]).unwrap(), l.mu);
        let unit = latent(&[0.0, 0.0], &[0.0, 0.0]);
        assert_eq!(reparameterize(&unit, &[1.5, -0.25]).unwrap(), vec![1.5, -0.25]);
        let l = latent(&[1.0], &[2.0 * 3f64.ln()]);
        let z = reparameterize(&l, &[2.0]).unwrap();
        assert!((z[0] - 7.0).abs() < 1e-12);
        assert!(matches!(reparameterize(&l, &[1.0, 2.0]), Err(Error::Shape(_))));
    }
}
