//! Posterior / likelihood-ratio / log-odds conversions for two-class scores
//! and recalibration to a different prior odds ratio.
//!
//! All arithmetic is in the log domain. Posteriors of exactly 0 or 1 are
//! rejected unless the caller opts into clamping.

use crate::error::{Error, Result};

/// Default clamp epsilon for callers that opt into clamping.
pub const DEFAULT_CLAMP_EPS: f64 = 1e-12;

/// Prior odds at training time and at deployment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OddsSpec {
    train_odds: f64,
    deploy_odds: f64,
}

impl OddsSpec {
    pub fn new(train_odds: f64, deploy_odds: f64) -> Result<Self> {
        for (name, v) in [("train", train_odds), ("deploy", deploy_odds)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} odds must be positive and finite, got {v}")));
            }
        }
        Ok(Self { train_odds, deploy_odds })
    }

    pub fn train_odds(&self) -> f64 {
        self.train_odds
    }

    pub fn deploy_odds(&self) -> f64 {
        self.deploy_odds
    }

    /// `LO' - LO`.
    pub fn bias(&self) -> f64 {
        self.deploy_odds.ln() - self.train_odds.ln()
    }
}

/// Logistic function without overflow for large |z|.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(p / (1 - p))`.
pub fn logit(p: f64) -> Result<f64> {
    check_open_unit(p)?;
    Ok(p.ln() - (-p).ln_1p())
}

pub fn posterior_from_llr(llr: f64, log_odds: f64) -> Result<f64> {
    if !llr.is_finite() || !log_odds.is_finite() {
        return Err(Error::invalid(format!("non-finite score (llr={llr}, lo={log_odds})")));
    }
    Ok(sigmoid(llr + log_odds))
}

/// `LR·O = p / (1 - p)`.
pub fn lr_odds_product(posterior: f64) -> Result<f64> {
    check_open_unit(posterior)?;
    Ok(posterior / (1.0 - posterior))
}

pub fn recalibrate(posterior: f64, odds: &OddsSpec) -> Result<f64> {
    Ok(sigmoid(logit(posterior)? + odds.bias()))
}

/// Like [`recalibrate`] but pulls 0 and 1 inside `[eps, 1 - eps]` first.
pub fn recalibrate_clamped(posterior: f64, odds: &OddsSpec, eps: f64) -> Result<f64> {
    if posterior.is_nan() || !(0.0..=1.0).contains(&posterior) {
        return Err(Error::OutOfDomain(format!("posterior {posterior} outside [0, 1]")));
    }
    recalibrate(posterior.clamp(eps, 1.0 - eps), odds)
}

fn check_open_unit(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfDomain(format!("posterior {p} must lie strictly inside (0, 1)")))
    }
}
