use rand::distr::Distribution;
use statrs::distribution::Laplace;

use crate::error::{Error, Result};

/// Integer part, truncating toward zero.
pub fn int_part(x: f64) -> i64 {
    x.trunc() as i64
}

/// int(Y) for Y ~ Lap(1/ε_v).
pub fn laplace_int_noise<R: rand::Rng + ?Sized>(epsilon_v: f64, rng: &mut R) -> Result<i64> {
    if !(epsilon_v.is_finite() && epsilon_v > 0.0) {
        return Err(Error::param(format!("per-leaf budget must be positive and finite, got {epsilon_v}")));
    }
    let lap = Laplace::new(0.0, 1.0 / epsilon_v).map_err(|e| Error::param(e.to_string()))?;
    loop {
        // the inverse-cdf sampler returns -inf when the uniform hits -0.5
        let y = lap.sample(rng);
        if y.is_finite() {
            return Ok(int_part(y));
        }
    }
}
