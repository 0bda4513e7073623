//! Closed form against independent route, identity by identity.

use std::fmt::Write as _;

use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::fisher::force_bound_physical_for_variance;
use crate::fisher::{
    attenuation_d, classical_fisher_momentum, extended_qfi_thermal, extended_qfi_zero_t,
    g_opt_zero_t, lambda_opt_thermal, qfi_min, thermal_qfi_minimum, zero_t_qfi_minimum,
    BoundInputs, GaugeParams,
};
use crate::gaussian::{purified_evolution, ChannelDescriptor, GaussianState, OscillatorParams};
use crate::montecarlo::{fisher_grid_oracle, moment_ode_oracle, MomentumGrid, RngStream};
use crate::protocol::{sequential_bound, ProtocolConfig};

pub const ETA_GRID: [f64; 5] = [0.1, 0.3, 0.6, 0.9, 0.99];
pub const N_THERMAL_GRID: [f64; 4] = [0.0, 0.5, 2.0, 10.0];
pub const VAR_X0_GRID: [f64; 6] = [0.05, 0.2, 0.5, 1.0, 5.0, 50.0];

pub const ATTAINABILITY_TOL: f64 = 1e-12;
pub const GAUGE_OPTIMUM_TOL: f64 = 1e-12;
pub const GAUGE_SLACK: f64 = 1e-9;
pub const PURIFICATION_TOL: f64 = 1e-12;
pub const PURITY_TOL: f64 = 1e-9;
pub const GRID_ORACLE_TOL: f64 = 1e-6;
pub const ODE_ORACLE_TOL: f64 = 1e-10;
pub const CROSS_MODULE_TOL: f64 = 1e-12;

/// `D(omega, gamma, t)` used on the closed-form side of the suite.
pub type DFactorFn = fn(f64, f64, f64) -> f64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Worst observed discrepancy (for floors: largest relative undershoot).
    pub worst: f64,
    pub tolerance: f64,
    pub cases: usize,
}

impl CheckResult {
    fn new(name: &str, worst: f64, tolerance: f64, cases: usize) -> Self {
        Self {
            name: name.into(),
            passed: worst.is_finite() && worst <= tolerance,
            worst,
            tolerance,
            cases,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Suite {
    pub d_factor: DFactorFn,
    pub seed: u64,
    pub random_gauges: usize,
    pub random_probes: usize,
}

impl Default for Suite {
    fn default() -> Self {
        Self {
            d_factor: attenuation_d,
            seed: 20_160_101,
            random_gauges: 200,
            random_probes: 100,
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Unit `omega`, unit `gamma`; `eta` fixes the probing time.
fn grid_case(eta: f64, n: f64, force: f64) -> Result<(OscillatorParams, f64)> {
    Ok((
        OscillatorParams::dimensionless(1.0, 1.0, n, force)?,
        -eta.ln(),
    ))
}

fn min_uncertainty(v: f64) -> Result<GaussianState> {
    GaussianState::single_mode(0.0, 0.0, v, 0.25 / v, 0.0)
}

impl Suite {
    pub fn run(&self) -> Result<Vec<CheckResult>> {
        Ok(vec![
            self.attainability()?,
            self.zero_t_gauge_optimum()?,
            self.zero_t_gauge_floor()?,
            self.thermal_gauge_optimum()?,
            self.thermal_gauge_floor()?,
            self.purification_trace_out()?,
            self.purification_purity()?,
            self.fisher_grid_agreement()?,
            self.moment_ode_agreement()?,
            self.sequential_cross_module()?,
        ])
    }

    fn closed_d(&self, t: f64) -> f64 {
        (self.d_factor)(1.0, 1.0, t)
    }

    /// Minimised QFI against the momentum Fisher information read off the
    /// evolved moments.
    pub fn attainability(&self) -> Result<CheckResult> {
        let mut worst = 0.0f64;
        let mut cases = 0;
        for &eta in &ETA_GRID {
            for &n in &N_THERMAL_GRID {
                for &v in &VAR_X0_GRID {
                    let (params, t) = grid_case(eta, n, 1.0)?;
                    let probe = min_uncertainty(v)?;
                    let (mean_p, var_p) =
                        probe.evolve_forced(0, &params, t)?.momentum_marginal(0)?;
                    let (mean_free, _) = probe
                        .evolve_forced(0, &params.with_force(0.0), t)?
                        .momentum_marginal(0)?;
                    let fp = classical_fisher_momentum(var_p, mean_p - mean_free)?;
                    let channel = ChannelDescriptor::from_params(&params, t)?;
                    let inputs = BoundInputs::from_channel(&channel, v, 1.0)?;
                    worst = worst.max(rel(qfi_min(&inputs, self.closed_d(t)), fp));
                    cases += 1;
                }
            }
        }
        Ok(CheckResult::new(
            "attainability identity",
            worst,
            ATTAINABILITY_TOL,
            cases,
        ))
    }

    pub fn zero_t_gauge_optimum(&self) -> Result<CheckResult> {
        let mut worst = 0.0f64;
        let mut cases = 0;
        for &eta in &ETA_GRID {
            for &v in &VAR_X0_GRID {
                let d = self.closed_d(-eta.ln());
                let min = zero_t_qfi_minimum(eta, d, v);
                let at_opt = extended_qfi_zero_t(g_opt_zero_t(eta, d, v, 0.5)?, eta, d, v, 0.5)?;
                let inputs = BoundInputs::new(eta, 0.0, v, 1.0)?;
                worst = worst
                    .max(rel(at_opt, min))
                    .max(rel(qfi_min(&inputs, d), min));
                cases += 1;
            }
        }
        Ok(CheckResult::new(
            "zero-T gauge optimum",
            worst,
            GAUGE_OPTIMUM_TOL,
            cases,
        ))
    }

    pub fn zero_t_gauge_floor(&self) -> Result<CheckResult> {
        let mut rng = RngStream::new(self.seed, 1).generator();
        let mut worst = f64::NEG_INFINITY;
        let mut cases = 0;
        for &eta in &ETA_GRID {
            for &v in &VAR_X0_GRID {
                let d = self.closed_d(-eta.ln());
                let min = zero_t_qfi_minimum(eta, d, v);
                for _ in 0..self.random_gauges {
                    let g = rng.random_range(-5.0..5.0) * d;
                    let q = extended_qfi_zero_t(g, eta, d, v, 0.5)?;
                    worst = worst.max((min - q) / min);
                    cases += 1;
                }
            }
        }
        Ok(CheckResult::new(
            "zero-T gauge floor",
            worst,
            GAUGE_SLACK,
            cases,
        ))
    }

    fn thermal_channel(&self, eta: f64, n: f64) -> Result<ChannelDescriptor> {
        ChannelDescriptor::from_eta(eta, n, self.closed_d(-eta.ln()))
    }

    pub fn thermal_gauge_optimum(&self) -> Result<CheckResult> {
        let mut worst = 0.0f64;
        let mut cases = 0;
        for &eta in &ETA_GRID {
            for &n in &N_THERMAL_GRID {
                let channel = self.thermal_channel(eta, n)?;
                for &v in &VAR_X0_GRID {
                    let min = thermal_qfi_minimum(&channel, v, 0.5, 0.5);
                    let gauge = lambda_opt_thermal(&channel, v, 0.5, 0.5)?;
                    let at_opt = extended_qfi_thermal(&gauge, &channel, v, 0.5, 0.5);
                    let inputs = BoundInputs::from_channel(&channel, v, 1.0)?;
                    worst = worst
                        .max(rel(at_opt, min))
                        .max(rel(qfi_min(&inputs, channel.d_factor), min));
                    cases += 1;
                }
            }
        }
        Ok(CheckResult::new(
            "thermal gauge optimum",
            worst,
            GAUGE_OPTIMUM_TOL,
            cases,
        ))
    }

    pub fn thermal_gauge_floor(&self) -> Result<CheckResult> {
        let mut rng = RngStream::new(self.seed, 2).generator();
        let mut worst = f64::NEG_INFINITY;
        let mut cases = 0;
        for &eta in &ETA_GRID {
            for &n in &N_THERMAL_GRID {
                let channel = self.thermal_channel(eta, n)?;
                for &v in &VAR_X0_GRID {
                    let min = thermal_qfi_minimum(&channel, v, 0.5, 0.5);
                    for _ in 0..self.random_gauges {
                        let gauge = GaugeParams::thermal(
                            rng.random_range(-5.0..5.0),
                            rng.random_range(-5.0..5.0),
                        );
                        let q = extended_qfi_thermal(&gauge, &channel, v, 0.5, 0.5);
                        worst = worst.max((min - q) / min);
                        cases += 1;
                    }
                }
            }
        }
        Ok(CheckResult::new(
            "thermal gauge floor",
            worst,
            GAUGE_SLACK,
            cases,
        ))
    }

    fn random_probes(&self, stream: u64) -> Result<Vec<GaussianState>> {
        let mut rng = RngStream::new(self.seed, stream).generator();
        (0..self.random_probes)
            .map(|_| {
                GaussianState::squeezed(
                    rng.random_range(0.0..1.5),
                    rng.random_range(0.0..std::f64::consts::PI),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                )
            })
            .collect()
    }

    pub fn purification_trace_out(&self) -> Result<CheckResult> {
        let probes = self.random_probes(3)?;
        let mut worst = 0.0f64;
        let mut cases = 0;
        for &eta in &ETA_GRID {
            for &n in &N_THERMAL_GRID {
                let (params, t) = grid_case(eta, n, 0.37)?;
                for probe in &probes {
                    let reduced = purified_evolution(probe, &params, t)?.partial_trace(&[0])?;
                    let direct = probe.evolve_forced(0, &params, t)?;
                    worst = worst.max(reduced.max_moment_diff(&direct).unwrap_or(f64::INFINITY));
                    cases += 1;
                }
            }
        }
        Ok(CheckResult::new(
            "purification trace-out",
            worst,
            PURIFICATION_TOL,
            cases,
        ))
    }

    pub fn purification_purity(&self) -> Result<CheckResult> {
        let probes = self.random_probes(3)?;
        let mut worst = 0.0f64;
        let mut cases = 0;
        for &eta in &ETA_GRID {
            for &n in &N_THERMAL_GRID {
                let (params, t) = grid_case(eta, n, 0.37)?;
                for probe in &probes {
                    let global = purified_evolution(probe, &params, t)?;
                    worst = worst.max((global.det2cov() - 1.0).abs());
                    cases += 1;
                }
            }
        }
        Ok(CheckResult::new(
            "purification purity",
            worst,
            PURITY_TOL,
            cases,
        ))
    }

    pub fn fisher_grid_agreement(&self) -> Result<CheckResult> {
        let mut worst = 0.0f64;
        let mut cases = 0;
        for &eta in &[0.1, 0.6, 0.99] {
            for &n in &[0.0, 2.0, 10.0] {
                for &v in &[0.05, 1.0, 50.0] {
                    let (params, t) = grid_case(eta, n, 0.2)?;
                    let oracle = fisher_grid_oracle(
                        &params,
                        &min_uncertainty(v)?,
                        t,
                        None,
                        &MomentumGrid::default(),
                    )?;
                    let channel = ChannelDescriptor::from_params(&params, t)?;
                    let inputs = BoundInputs::from_channel(&channel, v, 1.0)?;
                    worst = worst.max(rel(qfi_min(&inputs, self.closed_d(t)), oracle));
                    cases += 1;
                }
            }
        }
        Ok(CheckResult::new(
            "fisher grid oracle",
            worst,
            GRID_ORACLE_TOL,
            cases,
        ))
    }

    pub fn moment_ode_agreement(&self) -> Result<CheckResult> {
        let probe = GaussianState::squeezed(0.7, 0.4, 0.3, -0.8)?;
        let c = probe.cov();
        let cov = [[c[(0, 0)], c[(0, 1)]], [c[(1, 0)], c[(1, 1)]]];
        let mut worst = 0.0f64;
        let mut cases = 0;
        for &gamma_t in &[0.01, 0.5, 2.0, 10.0] {
            for &n in &N_THERMAL_GRID {
                let params = OscillatorParams::dimensionless(1.0, 1.0, n, 0.6)?;
                let m = moment_ode_oracle(&params, [0.3, -0.8], cov, gamma_t)?;
                let e = probe.evolve_forced(0, &params, gamma_t)?;
                let pairs = [
                    (m.mean[0], e.mean()[0]),
                    (m.mean[1], e.mean()[1]),
                    (m.cov[0][0], e.cov()[(0, 0)]),
                    (m.cov[0][1], e.cov()[(0, 1)]),
                    (m.cov[1][1], e.cov()[(1, 1)]),
                ];
                for (a, b) in pairs {
                    worst = worst.max((a - b).abs() / b.abs().max(1.0));
                }
                cases += 1;
            }
        }
        Ok(CheckResult::new(
            "moment ODE oracle",
            worst,
            ODE_ORACLE_TOL,
            cases,
        ))
    }

    /// Sequential bound against the single-shot bound at `eta = e^{-gamma tau}`
    /// and `nu = t_total / tau`.
    pub fn sequential_cross_module(&self) -> Result<CheckResult> {
        let mut worst = 0.0f64;
        let mut cases = 0;
        let (mass, omega, gamma) = (1e-25, 2.0 * std::f64::consts::PI * 1e6, 50.0);
        for &n in &N_THERMAL_GRID {
            let params = OscillatorParams::new(mass, omega, gamma, n)?;
            for &gamma_tau in &[1e-3, 0.1, 1.0, 5.0] {
                for &energy in &[1.0, 10.0, 1e4] {
                    let tau = gamma_tau / gamma;
                    let t_total = 37.0 * tau;
                    let config = ProtocolConfig::new(params, t_total, tau, energy)?;
                    let lhs = sequential_bound(&config)?;
                    let rhs = force_bound_physical_for_variance(
                        &params,
                        config.var_x0(),
                        t_total / tau,
                        tau,
                    )?
                    .expect_finite()?;
                    worst = worst.max(rel(lhs, rhs));
                    cases += 1;
                }
            }
        }
        Ok(CheckResult::new(
            "sequential cross-module",
            worst,
            CROSS_MODULE_TOL,
            cases,
        ))
    }
}

pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.passed)
}

/// Fixed-width PASS/FAIL table, one identity per line.
pub fn render_table(results: &[CheckResult]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<26} {:>6} {:>12} {:>10} {:>7}",
        "identity", "status", "worst", "tolerance", "cases"
    );
    for r in results {
        let _ = writeln!(
            out,
            "{:<26} {:>6} {:>12.3e} {:>10.0e} {:>7}",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.worst,
            r.tolerance,
            r.cases
        );
    }
    out
}
