//! Power statistics of stationary Gaussian noise.
//!
//! A frame of `N` i.i.d. samples `X_i ~ N(0, σ²)` has an average power
//! `P = (1/N) Σ X_i²` that is Gamma distributed with shape `N/2` and rate
//! `N/(2σ²)`. Grouping `K` such powers and taking their spread about the
//! mean gives the variance-of-power statistic `Q`. The closed forms below
//! are what the detector thresholds are built from.
//!
//! The second half of the module holds the recursive mean/variance
//! estimator used for superblock statistics, with optional "phantom"
//! prior samples (MAP mode).

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Noise model parameters: amplitude variance, frame length and superblock length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    sigma_x2: f64,
    frame_len: usize,
    superblock_len: usize,
}

impl NoiseParams {
    pub fn new(sigma_x2: f64, frame_len: usize, superblock_len: usize) -> Result<Self> {
        if !(sigma_x2.is_finite() && sigma_x2 > 0.0) {
            return Err(Error::invalid(format!("sigma_x2 must be positive, got {sigma_x2}")));
        }
        if frame_len < 2 {
            return Err(Error::invalid(format!("frame length must be >= 2, got {frame_len}")));
        }
        if superblock_len < 2 {
            return Err(Error::invalid(format!("superblock length must be >= 2, got {superblock_len}")));
        }
        Ok(Self { sigma_x2, frame_len, superblock_len })
    }

    pub fn sigma_x2(&self) -> f64 {
        self.sigma_x2
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn superblock_len(&self) -> usize {
        self.superblock_len
    }

    /// Same frame/superblock geometry with a different noise variance.
    pub fn with_sigma_x2(self, sigma_x2: f64) -> Result<Self> {
        Self::new(sigma_x2, self.frame_len, self.superblock_len)
    }
}

/// Gamma law of the frame power estimate: shape `b = N/2`, rate `a = N/(2σ²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaPowerModel {
    pub shape: f64,
    pub rate: f64,
}

impl GammaPowerModel {
    pub fn from_params(params: &NoiseParams) -> Self {
        let n = params.frame_len as f64;
        Self { shape: n / 2.0, rate: n / (2.0 * params.sigma_x2) }
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }

    pub fn mode(&self) -> f64 {
        ((self.shape - 1.0) / self.rate).max(0.0)
    }

    /// Density `aᵇ p^(b-1) e^(-ap) / Γ(b)`; zero outside `p > 0`.
    pub fn pdf(&self, p: f64) -> f64 {
        if !(p > 0.0) || !p.is_finite() {
            return 0.0;
        }
        let ln = self.shape * self.rate.ln() + (self.shape - 1.0) * p.ln() - self.rate * p - ln_gamma(self.shape);
        ln.exp()
    }
}

pub fn gamma_power_pdf(model: &GammaPowerModel, p: f64) -> f64 {
    model.pdf(p)
}

/// Expected frame power and its variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerStats {
    pub p_mean: f64,
    pub p_var: f64,
}

/// Expected variance-of-power over a superblock and the variance of that estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarStats {
    pub q_mean: f64,
    pub q_var: f64,
}

pub fn power_stats(params: &NoiseParams) -> PowerStats {
    let s2 = params.sigma_x2;
    let n = params.frame_len as f64;
    PowerStats { p_mean: s2, p_var: 2.0 * s2 * s2 / n }
}

pub fn var_stats(params: &NoiseParams) -> VarStats {
    let s4 = params.sigma_x2 * params.sigma_x2;
    let n = params.frame_len as f64;
    let k = params.superblock_len as f64;
    VarStats { q_mean: 2.0 * s4 / n, q_var: 8.0 * (n + 6.0) * s4 * s4 / (n * n * n * k) }
}

/// Mean of squared samples.
pub fn frame_power(frame: &[f64]) -> Result<f64> {
    if frame.is_empty() {
        return Err(Error::invalid("frame_power of an empty frame"));
    }
    Ok(sum_squares(frame) / frame.len() as f64)
}

#[inline]
pub(crate) fn sum_squares(frame: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorise without reassociating.
    let mut acc = [0.0f64; 4];
    let mut chunks = frame.chunks_exact(4);
    for c in &mut chunks {
        acc[0] += c[0] * c[0];
        acc[1] += c[1] * c[1];
        acc[2] += c[2] * c[2];
        acc[3] += c[3] * c[3];
    }
    let tail: f64 = chunks.remainder().iter().map(|x| x * x).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Recursive mean and unbiased variance.
///
/// Mean: `m_n = m_{n-1} + (x_n - m_{n-1}) / n`.
/// Variance: `σ_n² = (n-2)/(n-1) σ_{n-1}² + n/(n-1)² (x_n - m_n)²`, with the
/// mean updated first. Starting from `m_1 = x_1`, `σ_1² = 0` this reproduces
/// the batch estimates.
///
/// A MAP estimate starts the same recursion from `N` phantom samples that
/// carry the prior moments. The mean and the variance may use different
/// phantom counts; in that case the variance tracks the deviation sum of its
/// pseudo-sample set so it stays exact with respect to the weighted batch
/// formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunningEstimate {
    observations: u64,
    prior_count_mean: u64,
    prior_count_var: u64,
    mean: f64,
    prev_mean: f64,
    var: f64,
    // Σ (y - m) over the variance pseudo-sample set; stays 0 when the two
    // counts are equal.
    dev_sum: f64,
    pending_var: bool,
}

impl RunningEstimate {
    /// ML estimator seeded with its first observation.
    pub fn from_first(x: f64) -> Result<Self> {
        check_finite(x)?;
        Ok(Self {
            observations: 1,
            prior_count_mean: 0,
            prior_count_var: 0,
            mean: x,
            prev_mean: x,
            var: 0.0,
            dev_sum: 0.0,
            pending_var: false,
        })
    }

    /// Runs the full recursion over `xs`. Returns `None` for an empty slice.
    pub fn from_slice(xs: &[f64]) -> Result<Option<Self>> {
        let Some((&first, rest)) = xs.split_first() else {
            return Ok(None);
        };
        let mut est = Self::from_first(first)?;
        for &x in rest {
            est.update(x)?;
        }
        Ok(Some(est))
    }

    /// Count of real observations (phantoms excluded).
    pub fn n(&self) -> u64 {
        self.observations
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn var(&self) -> f64 {
        self.var
    }

    pub fn prior_count_mean(&self) -> u64 {
        self.prior_count_mean
    }

    pub fn prior_count_var(&self) -> u64 {
        self.prior_count_var
    }

    fn mean_weight(&self) -> u64 {
        self.prior_count_mean + self.observations
    }

    fn var_weight(&self) -> u64 {
        self.prior_count_var + self.observations
    }

    /// Mean step only. Must be followed by [`update_var`](Self::update_var)
    /// with the same `x` before the next observation.
    pub fn update_mean(&mut self, x: f64) -> Result<()> {
        check_finite(x)?;
        if self.pending_var {
            return Err(Error::invalid("update_mean called twice without update_var"));
        }
        self.observations += 1;
        let n = self.mean_weight() as f64;
        self.prev_mean = self.mean;
        self.mean += (x - self.mean) / n;
        self.pending_var = true;
        Ok(())
    }

    /// Variance step using the already-updated mean.
    pub fn update_var(&mut self, x: f64) -> Result<()> {
        check_finite(x)?;
        if !self.pending_var {
            return Err(Error::invalid("update_var requires a preceding update_mean"));
        }
        self.pending_var = false;
        let n = self.var_weight() as f64;
        let dev = x - self.mean;
        let v = if self.prior_count_mean == self.prior_count_var {
            if n < 2.0 {
                0.0
            } else {
                (n - 2.0) / (n - 1.0) * self.var + n / ((n - 1.0) * (n - 1.0)) * dev * dev
            }
        } else {
            // Old pseudo-set has n - 1 members; shift its squared deviations
            // to the new mean and add the new point.
            let prev_n = n - 1.0;
            let shift = self.mean - self.prev_mean;
            let prev_ss = if prev_n >= 2.0 { (prev_n - 1.0) * self.var } else { 0.0 };
            let ss = prev_ss + prev_n * shift * shift - 2.0 * shift * self.dev_sum + dev * dev;
            self.dev_sum = self.dev_sum - prev_n * shift + dev;
            ss / (n - 1.0)
        };
        debug_assert!(v >= -1e-15 * (1.0 + self.mean * self.mean + x * x), "negative variance {v}");
        self.var = v.max(0.0);
        Ok(())
    }

    pub fn update(&mut self, x: f64) -> Result<()> {
        self.update_mean(x)?;
        self.update_var(x)
    }
}

/// MAP estimator: the recursion resumes after `prior_count_*` phantom
/// samples whose mean and unbiased variance equal the priors.
pub fn init_map(
    prior_mean: f64,
    prior_var: f64,
    prior_count_mean: u64,
    prior_count_var: u64,
) -> Result<RunningEstimate> {
    check_finite(prior_mean)?;
    if !prior_var.is_finite() || prior_var < 0.0 {
        return Err(Error::invalid(format!("prior variance must be >= 0, got {prior_var}")));
    }
    if prior_count_mean == 0 || prior_count_var == 0 {
        return Err(Error::invalid("phantom sample counts must be >= 1"));
    }
    Ok(RunningEstimate {
        observations: 0,
        prior_count_mean,
        prior_count_var,
        mean: prior_mean,
        prev_mean: prior_mean,
        var: prior_var,
        dev_sum: 0.0,
        pending_var: false,
    })
}

fn check_finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("non-finite observation {x}")))
    }
}
