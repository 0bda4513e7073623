//! Monte Carlo measurement simulation and maximum-likelihood estimation.

mod oracle;
mod rng;

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::classical_fisher_momentum;
use crate::gaussian::{ChannelDescriptor, GaussianState, OscillatorParams};

pub use oracle::{
    fisher_grid_oracle, moment_ode_oracle, MomentumGrid, SingleModeMoments, MIN_GRID_POINTS,
    MIN_HALF_WIDTH_SIGMAS, ODE_STEPS_PER_UNIT,
};
pub use rng::RngStream;

pub const REPORT_SCHEMA: &str = "forcebound.estimation_report/1";

fn draw<R: Rng>(rng: &mut R, mean: f64, sd: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            mean + sd * z
        })
        .collect()
}

/// `n` draws from the momentum marginal of `mode`.
pub fn sample_momentum(
    state: &GaussianState,
    mode: usize,
    rng: &RngStream,
    n: usize,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Argument("sample count must be >= 1".into()));
    }
    let (mean, var) = state.momentum_marginal(mode)?;
    Ok(draw(&mut rng.generator(), mean, var.sqrt(), n))
}

/// Gaussian-likelihood estimate `(mean(P) - sqrt(eta) <P>_0) / D`.
pub fn mle_force(samples: &[f64], d: f64, sqrt_eta: f64, mean_p0: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::NoInformation(format!(
            "drive coupling D = {d}: momentum carries no information on the force"
        )));
    }
    if samples.is_empty() {
        return Err(Error::Argument("no samples".into()));
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    Ok((mean - sqrt_eta * mean_p0) / d)
}

/// Sample-based Fisher estimate: the sample variance of the score
/// `D (P - mu) / var` of the Gaussian momentum likelihood.
pub fn score_fisher_estimate(samples: &[f64], mean_p: f64, var_p: f64, d: f64) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::Argument("need at least two samples".into()));
    }
    let scores: Vec<f64> = samples.iter().map(|p| d * (p - mean_p) / var_p).collect();
    Ok(mean_and_variance(&scores).1)
}

fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub mean: f64,
    /// Unbiased sample variance of the per-trial estimates.
    pub variance: f64,
    pub n_trials: usize,
    pub nu_shots: usize,
    /// Total number of simulated measurements.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub schema: String,
    pub f_true: f64,
    pub estimates: EstimateSummary,
    pub empirical_mse: f64,
    /// `1 / (nu_shots F_P)`
    pub crb_prediction: f64,
    /// `empirical_mse / crb_prediction`
    pub attainment_ratio: f64,
    pub fisher_momentum: f64,
    pub d_factor: f64,
    pub eta: f64,
}

impl EstimationReport {
    /// Three standard deviations of the MSE estimator for Gaussian errors.
    pub fn tolerance(&self) -> f64 {
        attainment_tolerance(self.estimates.n_trials)
    }

    pub fn attains_crb(&self) -> bool {
        (self.attainment_ratio - 1.0).abs() < self.tolerance()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Numerical(e.to_string()))
    }
}

/// `3 sqrt(2 / n_trials)`
pub fn attainment_tolerance(n_trials: usize) -> f64 {
    3.0 * (2.0 / n_trials as f64).sqrt()
}

struct Setup {
    mean_p: f64,
    sd_p: f64,
    mean_p0: f64,
    sqrt_eta: f64,
    eta: f64,
    d: f64,
    fisher: f64,
}

fn setup(params: &OscillatorParams, probe: &GaussianState, t: f64) -> Result<Setup> {
    if probe.n_modes() != 1 {
        return Err(Error::Precondition(format!(
            "probe must be a single mode, got {} modes",
            probe.n_modes()
        )));
    }
    let channel = ChannelDescriptor::from_params(params, t)?;
    let (mean_p, var_p) = probe.evolve_forced(0, params, t)?.momentum_marginal(0)?;
    let (mean_p0, _) = probe.momentum_marginal(0)?;
    let fisher = classical_fisher_momentum(var_p, channel.d_factor)?;
    if !(channel.d_factor > 0.0) {
        return Err(Error::NoInformation(format!(
            "D = {} at t = {t}",
            channel.d_factor
        )));
    }
    Ok(Setup {
        mean_p,
        sd_p: var_p.sqrt(),
        mean_p0,
        sqrt_eta: channel.sqrt_eta(),
        eta: channel.eta,
        d: channel.d_factor,
        fisher,
    })
}

fn check_counts(nu_shots: usize, n_trials: usize) -> Result<()> {
    if nu_shots == 0 || n_trials == 0 {
        return Err(Error::Argument(format!(
            "nu_shots and n_trials must be >= 1, got {nu_shots} and {n_trials}"
        )));
    }
    Ok(())
}

/// Prepare, evolve, measure momentum `nu_shots` times and estimate the
/// force, `n_trials` times. Trial `k` draws from `rng.substream(k)`.
pub fn run_experiment(
    params: &OscillatorParams,
    probe: &GaussianState,
    t: f64,
    nu_shots: usize,
    n_trials: usize,
    rng: &RngStream,
) -> Result<EstimationReport> {
    check_counts(nu_shots, n_trials)?;
    let s = setup(params, probe, t)?;
    let estimates = (0..n_trials as u64)
        .into_par_iter()
        .map(|k| {
            let samples = draw(
                &mut rng.substream(k).generator(),
                s.mean_p,
                s.sd_p,
                nu_shots,
            );
            mle_force(&samples, s.d, s.sqrt_eta, s.mean_p0)
        })
        .collect::<Result<Vec<f64>>>()?;

    let f_true = params.force();
    let (mean, variance) = mean_and_variance(&estimates);
    let empirical_mse =
        estimates.iter().map(|f| (f - f_true).powi(2)).sum::<f64>() / n_trials as f64;
    let crb_prediction = 1.0 / (nu_shots as f64 * s.fisher);
    Ok(EstimationReport {
        schema: REPORT_SCHEMA.into(),
        f_true,
        estimates: EstimateSummary {
            mean,
            variance,
            n_trials,
            nu_shots,
            count: n_trials * nu_shots,
        },
        empirical_mse,
        crb_prediction,
        attainment_ratio: empirical_mse / crb_prediction,
        fisher_momentum: s.fisher,
        d_factor: s.d,
        eta: s.eta,
    })
}

/// Stream the raw samples of the [`run_experiment`] call with the same
/// arguments as CSV (`trial,shot,p_value`).
pub fn write_samples_csv<W: Write>(
    out: &mut W,
    params: &OscillatorParams,
    probe: &GaussianState,
    t: f64,
    nu_shots: usize,
    n_trials: usize,
    rng: &RngStream,
) -> Result<()> {
    check_counts(nu_shots, n_trials)?;
    let s = setup(params, probe, t)?;
    let io = |e: std::io::Error| Error::Numerical(format!("writing samples: {e}"));
    writeln!(out, "trial,shot,p_value").map_err(io)?;
    for k in 0..n_trials as u64 {
        let samples = draw(
            &mut rng.substream(k).generator(),
            s.mean_p,
            s.sd_p,
            nu_shots,
        );
        for (j, p) in samples.iter().enumerate() {
            writeln!(out, "{k},{j},{p:e}").map_err(io)?;
        }
    }
    Ok(())
}
