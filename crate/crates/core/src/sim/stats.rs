use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::SimError;

/// `D_max γ^N / (1 − γ)`: bound on the discounted data after slot `N`.
pub fn truncation_error(d_max: f64, gamma: f64, horizon: usize) -> Result<f64, SimError> {
    if gamma >= 1.0 {
        return Err(SimError::DivergentHorizon);
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(SimError::InvalidConfig(format!("discount {gamma} outside [0, 1)")));
    }
    Ok(d_max * gamma.powi(horizon as i32) / (1.0 - gamma))
}

/// Upper `p` quantile of Student's t with `df` degrees of freedom.
pub fn student_t_quantile(p: f64, df: f64) -> f64 {
    if p >= 1.0 {
        return f64::INFINITY;
    }
    StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom").inverse_cdf(p)
}

/// Sample mean of per-realization values with its confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimate: f64,
    pub sigma_hat: f64,
    pub eps_t: f64,
    pub eps_n: f64,
    pub lo: f64,
    pub hi: f64,
    pub values: Vec<f64>,
}

/// Mean, biased standard deviation `sqrt((1/T) Σ (v − mean)²)`, half-width
/// `t_{(1+δ)/2} σ̂ / √T` with `T − 1` degrees of freedom, and the interval
/// `[mean − ε_T, mean + ε_T + ε_N]`.
pub fn estimate(values: &[f64], confidence: f64, eps_n: f64) -> Result<EstimateReport, SimError> {
    let t = values.len();
    if t < 2 {
        return Err(SimError::InvalidConfig(format!("{t} values; at least 2 needed")));
    }
    if !(confidence > 0.0 && confidence <= 1.0) {
        return Err(SimError::InvalidConfig(format!("confidence {confidence} outside (0, 1]")));
    }
    let n = t as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sigma_hat = var.sqrt();
    let eps_t = if sigma_hat == 0.0 {
        0.0
    } else {
        student_t_quantile((1.0 + confidence) / 2.0, n - 1.0) * sigma_hat / n.sqrt()
    };
    Ok(EstimateReport {
        estimate: mean,
        sigma_hat,
        eps_t,
        eps_n,
        lo: mean - eps_t,
        hi: mean + eps_t + eps_n,
        values: values.to_vec(),
    })
}
