//! Exact symmetric α-stable variates and the calibration of power-law jump measures.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{domain, Result};
use crate::quad;

/// Draw with characteristic function `exp(-scale_c |ξ|^alpha)` (Chambers–Mallows–Stuck).
pub fn exact_stable_sample<R: Rng + ?Sized>(alpha: f64, scale_c: f64, rng: &mut R) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(domain(format!("stable index {alpha} outside (0, 2)")));
    }
    if !(scale_c > 0.0) {
        return Err(domain(format!("stable scale {scale_c} must be positive")));
    }
    let v = PI * (rng.random::<f64>() - 0.5);
    let unit = if alpha == 1.0 {
        v.tan()
    } else {
        let w: f64 = Exp1.sample(rng);
        (alpha * v).sin() / v.cos().powf(1.0 / alpha)
            * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
    };
    Ok(unit * scale_c.powf(1.0 / alpha))
}

/// `c_alpha = 2 ∫_0^∞ (1 - cos u) u^{-1-alpha} du`, so that the jump measure `|s|^{-1-alpha} ds`
/// has characteristic exponent `c_alpha |ξ|^alpha`.
pub fn stable_char_constant(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(domain(format!("stable index {alpha} outside (0, 2)")));
    }
    // ∫_0^1 by the cosine series, term by term.
    let mut head = 0.0;
    let mut factorial = 1.0;
    for k in 1..30 {
        let two_k = 2.0 * k as f64;
        factorial *= (two_k - 1.0) * two_k;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        head += sign / (factorial * (two_k - alpha));
    }
    // ∫_1^∞ u^{-1-alpha} = 1/alpha minus the oscillatory part ∫_1^∞ cos u · u^{-1-alpha}.
    let beta = 1.0 + alpha;
    let periods = 2000usize;
    let end = 2.0 * PI * periods as f64;
    let integrand = |u: f64| u.cos() * u.powf(-beta);
    let mut oscillatory = quad::adaptive(&integrand, 1.0, 2.0 * PI, 4, 1e-13, 0.0)?;
    for p in 1..periods {
        let a = 2.0 * PI * p as f64;
        oscillatory += quad::composite(&integrand, a, a + 2.0 * PI, 4);
    }
    // Integration by parts at a whole number of periods: β U^{-β-1} + O(U^{-β-3}).
    oscillatory += beta * end.powf(-beta - 1.0);
    Ok(2.0 * (head + 1.0 / alpha - oscillatory))
}

/// Distribution function of the centred Cauchy law with the given scale.
pub fn cauchy_cdf(x: f64, scale: f64) -> f64 {
    0.5 + (x / scale).atan() / PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn calibration_at_one_is_pi() {
        assert!((stable_char_constant(1.0).unwrap() - PI).abs() < 1e-6);
    }

    #[test]
    fn cauchy_median_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut draws: Vec<f64> = (0..200_000).map(|_| exact_stable_sample(1.0, 1.0, &mut rng).unwrap()).collect();
        draws.sort_by(f64::total_cmp);
        assert!(draws[draws.len() / 2].abs() < 0.01);
    }

    #[test]
    fn rejects_gaussian_index() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(exact_stable_sample(2.0, 1.0, &mut rng).is_err());
        assert!(stable_char_constant(2.0).is_err());
    }
}
