//! Model parameters, normalization constants and the closed-form quantities
//! shared by every engine.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Euler–Mascheroni constant, the mean of the standard Gumbel law.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Variance of the standard Gumbel law, π²/6.
pub const GUMBEL_VARIANCE: f64 = PI * PI / 6.0;

/// Sleep probability `p = λ / (1 + λ)` from the sleep rate.
pub fn derive_p(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::domain(format!(
            "sleep rate must be positive and finite, got {lambda}"
        )));
    }
    Ok(lambda / (1.0 + lambda))
}

/// Model parameters. `p` is stored canonically; construct from a sleep rate
/// with [`Params::from_lambda`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub seed: u64,
}

impl Params {
    pub fn new(n: usize, p: f64, q: f64, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("n must be positive"));
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::domain(format!("p must lie in (0, 1], got {p}")));
        }
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::domain(format!("q must lie in [0, 1], got {q}")));
        }
        Ok(Params { n, p, q, seed })
    }

    pub fn from_lambda(n: usize, lambda: f64, q: f64, seed: u64) -> Result<Self> {
        Params::new(n, derive_p(lambda)?, q, seed)
    }

    pub fn constants(&self) -> DerivedConstants {
        constants(self)
    }

    /// Rejects `q = 0`, for operations that need dissipation to terminate.
    pub(crate) fn require_dissipative(&self) -> Result<()> {
        if self.q > 0.0 {
            Ok(())
        } else {
            Err(Error::domain("this operation needs q > 0"))
        }
    }
}

/// Normalization constants derived from [`Params`].
///
/// Quantities that are undefined for the given parameters are `None` rather
/// than infinities or NaN: `r_n` at `q = 0`, `f_n` whenever `r_n <= √n`, and
/// `q_prime` at `q = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub n: usize,
    pub p: f64,
    pub r_n: Option<f64>,
    pub sigma: f64,
    pub a_n: f64,
    pub f_n: Option<f64>,
    pub alpha_n: f64,
    pub q_prime: Option<f64>,
}

pub fn constants(params: &Params) -> DerivedConstants {
    let n = params.n as f64;
    let p = params.p;
    let q = params.q;
    let sigma = (p * (1.0 - p)).sqrt();
    let r_n = (q > 0.0).then(|| 1.0 / q);
    let f_n = r_n
        .filter(|&r| r > n.sqrt())
        .map(|r| (2.0 * (r / n.sqrt()).ln()).sqrt());
    // Sink ticks at rate q' against n coordinate clocks, so a tick is the
    // next event with probability q'/(n + q') = q.
    let q_prime = (q < 1.0).then(|| n * q / (1.0 - q));
    DerivedConstants {
        n: params.n,
        p,
        r_n,
        sigma,
        a_n: sigma * n.sqrt(),
        f_n,
        alpha_n: (p * (1.0 - p) * n * n.ln()).sqrt(),
        q_prime,
    }
}

/// Asymptotic cluster rate `x e^{-x²/2} / √(2π)` of exceedances above `x`.
pub fn mu(x: f64) -> f64 {
    x * (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn gumbel_cdf(x: f64) -> f64 {
    (-(-x).exp()).exp()
}

/// Inverse of [`gumbel_cdf`] on (0, 1).
pub fn gumbel_quantile(u: f64) -> f64 {
    -(-u.ln()).ln()
}

/// Centres and scales a sleeping-particle count so that, in the Gumbel
/// regime, the result is approximately standard Gumbel:
/// `f_n ((S − pn)/a_n − f_n) − log(σ/√(2π))`.
#[allow(non_snake_case)]
pub fn normalize_S(s: f64, consts: &DerivedConstants) -> Result<f64> {
    let f_n = consts
        .f_n
        .ok_or_else(|| Error::domain("f_n is undefined (need r_n > √n)"))?;
    let s_n = (s - consts.p * consts.n as f64) / consts.a_n;
    Ok(f_n * (s_n - f_n) - (consts.sigma / (2.0 * PI).sqrt()).ln())
}

/// The count whose normalized value is `g`; inverse of [`normalize_S`].
#[allow(non_snake_case)]
pub fn denormalize_S(g: f64, consts: &DerivedConstants) -> Result<f64> {
    let f_n = consts
        .f_n
        .ok_or_else(|| Error::domain("f_n is undefined (need r_n > √n)"))?;
    let shift = (consts.sigma / (2.0 * PI).sqrt()).ln();
    Ok(consts.p * consts.n as f64 + consts.a_n * (f_n + (g + shift) / f_n))
}

/// Bernoulli relative entropy `D(a ‖ p)` in nats.
pub fn kl_bernoulli(a: f64, p: f64) -> Result<f64> {
    let open = |v: f64| v > 0.0 && v < 1.0;
    if !open(a) || !open(p) {
        return Err(Error::domain(format!(
            "D(a‖p) needs a, p in (0, 1), got a={a}, p={p}"
        )));
    }
    Ok(a * (a / p).ln() + (1.0 - a) * ((1.0 - a) / (1.0 - p)).ln())
}
