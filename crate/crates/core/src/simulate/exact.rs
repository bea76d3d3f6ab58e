use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::process::BirthDeathSpec;
use crate::spectrum::TruncatedGenerator;

/// Largest threshold state the dense oracle accepts.
pub const MAX_EXACT_STATES: usize = 8;

/// Passage law `n − 1 → n` as a finite sum of exponentials,
/// `f(θ) = Σ cₖ e^{−μₖθ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactPassageLaw {
    pub rates: Vec<f64>,
    pub coefficients: Vec<f64>,
}

impl ExactPassageLaw {
    pub fn new(spec: &BirthDeathSpec, threshold_state: usize) -> Result<Self> {
        if threshold_state > MAX_EXACT_STATES {
            return Err(Error::OutOfRange {
                what: "exact oracle threshold state",
                value: threshold_state as i64,
                lo: 1,
                hi: MAX_EXACT_STATES as i64,
            });
        }
        let gen = TruncatedGenerator::truncate(spec, threshold_state)?;
        let block = gen.passage_block()?;
        let (diag, off) = gen.sub_generator(block).symmetrized();
        let m = diag.len();
        let mut a = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            a[(i, i)] = diag[i];
        }
        for (i, &o) in off.iter().enumerate() {
            a[(i, i + 1)] = o;
            a[(i + 1, i)] = o;
        }
        let eig = SymmetricEigen::new(a);
        let exit = spec.birth_rate(threshold_state - 1);
        let rates = eig.eigenvalues.iter().copied().collect();
        let coefficients = (0..m)
            .map(|k| exit * eig.eigenvectors[(m - 1, k)].powi(2))
            .collect();
        Ok(Self {
            rates,
            coefficients,
        })
    }

    pub fn density(&self, theta: f64) -> f64 {
        if theta < 0.0 {
            return 0.0;
        }
        self.rates
            .iter()
            .zip(&self.coefficients)
            .map(|(mu, c)| c * (-mu * theta).exp())
            .sum::<f64>()
            .max(0.0)
    }

    pub fn survival(&self, theta: f64) -> f64 {
        if theta <= 0.0 {
            return 1.0;
        }
        self.rates
            .iter()
            .zip(&self.coefficients)
            .map(|(mu, c)| c / mu * (-mu * theta).exp())
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }

    pub fn cdf(&self, theta: f64) -> f64 {
        1.0 - self.survival(theta)
    }

    pub fn mean(&self) -> f64 {
        self.rates
            .iter()
            .zip(&self.coefficients)
            .map(|(mu, c)| c / (mu * mu))
            .sum()
    }
}

/// Exact density of the passage time `n − 1 → n` for `n ≤ 8`.
pub fn exact_small_n_density(spec: &BirthDeathSpec, threshold_state: usize, theta: f64) -> Result<f64> {
    Ok(ExactPassageLaw::new(spec, threshold_state)?.density(theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::exact_mean_hitting;
    use crate::quad::integrate;

    #[test]
    fn one_state_chain() {
        let ou = BirthDeathSpec::ornstein_uhlenbeck(10).unwrap();
        for &t in &[0.0, 0.003, 0.02, 0.1] {
            let f = exact_small_n_density(&ou, 1, t).unwrap();
            let want = 100.0 * (-100.0 * t).exp();
            assert!((f - want).abs() <= 1e-12 * want.max(1e-300));
        }
    }

    #[test]
    fn two_state_ou() {
        let ou = BirthDeathSpec::ornstein_uhlenbeck(10).unwrap();
        let law = ExactPassageLaw::new(&ou, 2).unwrap();
        let mut r = law.rates.clone();
        r.sort_by(f64::total_cmp);
        let s = 1000f64.sqrt();
        assert!((r[0] - (100.0 - s)).abs() < 1e-10);
        assert!((r[1] - (100.0 + s)).abs() < 1e-10);
        let total = integrate(&|t| law.density(t), 0.0, 2.0, 1e-14, 1e-13);
        assert!((total - 1.0).abs() < 1e-10);
        assert!((law.survival(0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_matches_recursion() {
        let ou = BirthDeathSpec::ornstein_uhlenbeck(10).unwrap();
        let im = BirthDeathSpec::imitation(0.5, 12).unwrap();
        for n in 1..=8 {
            for spec in [&ou, &im] {
                let law = ExactPassageLaw::new(spec, n).unwrap();
                let m = exact_mean_hitting(spec, n).unwrap();
                assert!((law.mean() / m - 1.0).abs() < 1e-9, "n={n}");
            }
        }
    }

    #[test]
    fn scope_limit() {
        let ou = BirthDeathSpec::ornstein_uhlenbeck(20).unwrap();
        assert!(matches!(
            exact_small_n_density(&ou, 9, 1.0),
            Err(Error::OutOfRange { .. })
        ));
    }
}
