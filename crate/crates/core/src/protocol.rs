//! Sequential probe, measure and reset strategy.
//!
//! The total sensing time `t_total` is split into `nu = t_total / tau`
//! cycles. Each cycle starts from a fresh probe (reset is instantaneous and
//! perfect), senses the force for `tau` and ends with a momentum
//! measurement. The probe enters only through the calibration
//! `E = 2 var_x0 (2 n_T + 1)`.
//!
//! Optimising `tau` reduces to minimising the dimensionless ratio to the
//! potential sensitivity,
//!
//! ```text
//! ratio^2(x) = (x / 4) (1 - (1 - 1/E) e^{-x}) / (1 - e^{-x/2})^2,   x = gamma tau,
//! ```
//!
//! which is smooth and unimodal in `ln x`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::gaussian::OscillatorParams;
use crate::optimize::{bisect, golden_section};

/// Search interval for `ln(gamma tau)`.
pub const LOG_GAMMA_TAU_BRACKET: (f64, f64) = (-12.0, 6.0);
/// Relative tolerance on the optimal `gamma tau`.
pub const GAMMA_TAU_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolConfig {
    pub t_total: f64,
    pub tau: f64,
    /// `E = 2 var_x0 (2 n_T + 1)`.
    pub calibration_e: f64,
    pub params: OscillatorParams,
}

impl ProtocolConfig {
    pub fn new(
        params: OscillatorParams,
        t_total: f64,
        tau: f64,
        calibration_e: f64,
    ) -> Result<Self> {
        if !(t_total > 0.0 && t_total.is_finite()) {
            return Err(domain(format!("total time must be > 0, got {t_total}")));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(domain(format!("probing time must be > 0, got {tau}")));
        }
        if !(calibration_e > 0.0 && calibration_e.is_finite()) {
            return Err(domain(format!(
                "calibration E must be > 0, got {calibration_e}"
            )));
        }
        Ok(Self {
            t_total,
            tau,
            calibration_e,
            params,
        })
    }

    /// Calibration for a probe with initial position variance `var_x0`.
    pub fn calibration_for_variance(params: &OscillatorParams, var_x0: f64) -> f64 {
        2.0 * var_x0 * params.thermal_factor()
    }

    /// Initial position variance encoded by the calibration.
    pub fn var_x0(&self) -> f64 {
        self.calibration_e / (2.0 * self.params.thermal_factor())
    }

    /// Continuous number of cycles.
    pub fn nu(&self) -> f64 {
        self.t_total / self.tau
    }

    /// Whole number of cycles that fit in `t_total`.
    pub fn nu_floor(&self) -> u64 {
        (self.t_total / self.tau).floor() as u64
    }
}

/// Single-measurement limit at `gamma t >> 1`,
/// `sqrt(m hbar omega gamma^2 (2 n_T + 1) / 2)`.
pub fn delta_f_infinity(params: &OscillatorParams) -> Result<f64> {
    if !(params.gamma() > 0.0) {
        return Err(domain(
            "the single-measurement limit needs gamma > 0 (no steady state otherwise)",
        ));
    }
    let p = params;
    Ok((p.mass() * p.hbar() * p.omega() * p.gamma().powi(2) * p.thermal_factor() / 2.0).sqrt())
}

/// Potential sensitivity `sqrt(2 m hbar omega gamma (2 n_T + 1) / t_total)`.
pub fn potential_sensitivity(params: &OscillatorParams, t_total: f64) -> Result<f64> {
    if !(t_total > 0.0) {
        return Err(domain(format!("total time must be > 0, got {t_total}")));
    }
    if !(params.gamma() > 0.0) {
        return Err(domain("potential sensitivity needs gamma > 0"));
    }
    let p = params;
    Ok((2.0 * p.mass() * p.hbar() * p.omega() * p.gamma() * p.thermal_factor() / t_total).sqrt())
}

/// `1 - (1 - 1/E) e^{-x}` without cancellation at small `x`.
fn numerator(gamma_tau: f64, calibration_e: f64) -> f64 {
    -(-gamma_tau).exp_m1() + (-gamma_tau).exp() / calibration_e
}

/// Sequential-measurement bound with an explicit (possibly non-integer)
/// number of cycles.
pub fn sequential_bound_with_nu(config: &ProtocolConfig, nu: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::NoInformation(format!("{nu} measurement cycles")));
    }
    let x = config.params.gamma() * config.tau;
    let lost = -(-0.5 * x).exp_m1();
    Ok(delta_f_infinity(&config.params)?
        * (numerator(x, config.calibration_e) / (nu * lost * lost)).sqrt())
}

/// Sequential-measurement bound (newtons) with `nu = t_total / tau`.
pub fn sequential_bound(config: &ProtocolConfig) -> Result<f64> {
    if config.tau > config.t_total {
        return Err(domain(format!(
            "probing time {} exceeds total time {}",
            config.tau, config.t_total
        )));
    }
    sequential_bound_with_nu(config, config.nu())
}

/// Squared ratio of the sequential bound to the potential sensitivity as a
/// function of `x = gamma tau`.
pub fn ratio_squared(gamma_tau: f64, calibration_e: f64) -> f64 {
    let lost = -(-0.5 * gamma_tau).exp_m1();
    0.25 * gamma_tau * numerator(gamma_tau, calibration_e) / (lost * lost)
}

/// `d/dx ln ratio^2(x)`.
fn log_ratio_slope(gamma_tau: f64, calibration_e: f64) -> f64 {
    let x = gamma_tau;
    let a = 1.0 - 1.0 / calibration_e;
    1.0 / x + a * (-x).exp() / numerator(x, calibration_e) - 1.0 / (0.5 * x).exp_m1()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalTau {
    pub gamma_tau: f64,
    /// Optimal probing time in seconds; `gamma_tau / gamma`.
    pub tau: f64,
    /// Optimised ratio of the sequential bound to the potential sensitivity.
    pub ratio: f64,
}

/// Minimise [`ratio_squared`] over `gamma tau`. Returns `(gamma_tau, ratio)`.
///
/// Golden-section search on `ln(gamma tau)` locates the minimum; the
/// stationary point is then refined by bisection on the analytic slope,
/// which resolves the argument to [`GAMMA_TAU_REL_TOL`] where function
/// comparisons alone stall near `sqrt(eps)`.
pub fn optimal_gamma_tau(calibration_e: f64) -> Result<(f64, f64)> {
    if !(calibration_e > 0.0 && calibration_e.is_finite()) {
        return Err(domain(format!(
            "calibration E must be > 0, got {calibration_e}"
        )));
    }
    let (lo, hi) = LOG_GAMMA_TAU_BRACKET;
    let objective = |s: f64| ratio_squared(s.exp(), calibration_e).ln();
    let coarse = golden_section(objective, lo, hi, 1e-7, 400)?;
    if coarse.x - lo < 1e-3 || hi - coarse.x < 1e-3 {
        return Err(Error::Numerical(format!(
            "optimal gamma*tau for E = {calibration_e} lies at the edge of the search bracket \
             (ln gamma*tau = {})",
            coarse.x
        )));
    }
    let slope = |s: f64| log_ratio_slope(s.exp(), calibration_e);
    let (mut a, mut b) = (coarse.lo, coarse.hi);
    let mut width = 1e-6;
    while !(slope(a) < 0.0 && slope(b) > 0.0) {
        a = (coarse.x - width).max(lo);
        b = (coarse.x + width).min(hi);
        if a == lo && b == hi {
            return Err(Error::Numerical(format!(
                "could not bracket the stationary point for E = {calibration_e}"
            )));
        }
        width *= 4.0;
    }
    let s = bisect(slope, a, b, 0.1 * GAMMA_TAU_REL_TOL, 200)?;
    let x = s.exp();
    Ok((x, ratio_squared(x, calibration_e).sqrt()))
}

/// Optimal probing time for the calibration `E` and damping `gamma`.
pub fn optimal_tau(calibration_e: f64, gamma: f64) -> Result<OptimalTau> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(domain(format!("gamma must be > 0, got {gamma}")));
    }
    let (gamma_tau, ratio) = optimal_gamma_tau(calibration_e)?;
    Ok(OptimalTau {
        gamma_tau,
        tau: gamma_tau / gamma,
        ratio,
    })
}

/// Two-term large-`E` expansion of the optimised ratio,
/// `1 + (3/E)^{2/3} / 8`. Only meaningful for `E >> 1`.
pub fn asymptotic_ratio(calibration_e: f64) -> f64 {
    1.0 + (3.0 / calibration_e).powf(2.0 / 3.0) / 8.0
}

/// Leading-order optimal `gamma tau`, `(E / 24)^{-1/3}`.
pub fn asymptotic_gamma_tau(calibration_e: f64) -> f64 {
    (calibration_e / 24.0).powf(-1.0 / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Figure2Point {
    pub calibration_e: f64,
    pub gamma_tau_opt: f64,
    pub ratio: f64,
}

/// Optimised ratio to the potential sensitivity over a grid of
/// calibrations, in input order.
pub fn figure2_curve(grid: &[f64]) -> Result<Vec<Figure2Point>> {
    if grid.is_empty() {
        return Err(Error::Argument("calibration grid is empty".into()));
    }
    grid.par_iter()
        .map(|&e| {
            let (gamma_tau_opt, ratio) = optimal_gamma_tau(e)?;
            Ok(Figure2Point {
                calibration_e: e,
                gamma_tau_opt,
                ratio,
            })
        })
        .collect()
}

/// Undamped oscillator under pure momentum diffusion at rate `diffusion`
/// (the `gamma -> 0`, `gamma n_T = diffusion` limit).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiffusiveParams {
    pub mass: f64,
    pub omega: f64,
    /// Momentum diffusion rate, 1/s.
    pub diffusion: f64,
    pub var_x0: f64,
    pub hbar: f64,
}

impl DiffusiveParams {
    pub fn new(mass: f64, omega: f64, diffusion: f64, var_x0: f64, hbar: f64) -> Result<Self> {
        for (name, v) in [
            ("mass", mass),
            ("omega", omega),
            ("diffusion", diffusion),
            ("var_x0", var_x0),
            ("hbar", hbar),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(domain(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(Self {
            mass,
            omega,
            diffusion,
            var_x0,
            hbar,
        })
    }

    fn check_time(t_total: f64) -> Result<()> {
        if t_total > 0.0 && t_total.is_finite() {
            Ok(())
        } else {
            Err(domain(format!("total time must be > 0, got {t_total}")))
        }
    }

    /// Heuristic diffusive limit `sqrt(4 m hbar omega D / t_total)`.
    pub fn heuristic_bound(&self, t_total: f64) -> Result<f64> {
        Self::check_time(t_total)?;
        Ok((4.0 * self.mass * self.hbar * self.omega * self.diffusion / t_total).sqrt())
    }
}

/// Force bound in the diffusive limit, where the optimal probing time is the
/// whole of `t_total`.
pub fn diffusive_bound(params: &DiffusiveParams, t_total: f64) -> Result<f64> {
    let first = params.heuristic_bound(t_total)?;
    let mix = 4.0 * params.diffusion * params.var_x0 * t_total;
    Ok(first * (1.0 + 1.0 / mix).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensitivityReport {
    /// Sequential bound at the optimal probing time, continuous `nu`.
    pub delta_f_bound: f64,
    pub delta_f_infinity: f64,
    pub delta_f_min: f64,
    pub tau_opt: f64,
    pub ratio_to_potential: f64,
}

/// Optimise the probing time for `params`, `t_total` and calibration `E`.
pub fn sensitivity_report(
    params: &OscillatorParams,
    t_total: f64,
    calibration_e: f64,
) -> Result<SensitivityReport> {
    let opt = optimal_tau(calibration_e, params.gamma())?;
    let config = ProtocolConfig::new(*params, t_total, opt.tau, calibration_e)?;
    let delta_f_bound = sequential_bound_with_nu(&config, config.nu())?;
    let delta_f_min = potential_sensitivity(params, t_total)?;
    Ok(SensitivityReport {
        delta_f_bound,
        delta_f_infinity: delta_f_infinity(params)?,
        delta_f_min,
        tau_opt: opt.tau,
        ratio_to_potential: delta_f_bound / delta_f_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fisher::force_bound_physical_for_variance;
    use approx::assert_relative_eq;

    fn ion() -> OscillatorParams {
        OscillatorParams::new(1e-25, 2.0 * std::f64::consts::PI * 1e6, 10.0, 0.0).unwrap()
    }

    #[test]
    fn delta_f_infinity_examples() {
        let p = ion();
        let cold = delta_f_infinity(&p).unwrap();
        // oracle: direct SI arithmetic, kg * J s * rad/s * s^-2 = N^2
        let direct = (1e-25 * crate::HBAR * 2.0 * std::f64::consts::PI * 1e6 * 100.0 / 2.0).sqrt();
        assert_relative_eq!(cold, direct, max_relative = 1e-14);
        let doubled = delta_f_infinity(&p.with_gamma(20.0).unwrap()).unwrap();
        assert_relative_eq!(doubled, 2.0 * cold, max_relative = 1e-14);
        let warm = delta_f_infinity(&p.with_n_thermal(1.5).unwrap()).unwrap();
        assert_relative_eq!(warm, cold * 4f64.sqrt(), max_relative = 1e-14);
        assert!(delta_f_infinity(&p.with_gamma(0.0).unwrap()).is_err());
    }

    #[test]
    fn potential_sensitivity_examples() {
        let p = ion().with_n_thermal(0.7).unwrap();
        let a = potential_sensitivity(&p, 1.0).unwrap();
        let b = potential_sensitivity(&p, 4.0).unwrap();
        assert_relative_eq!(b, a / 2.0, max_relative = 1e-14);
        let cold = ion();
        let direct = (2.0 * 1e-25 * crate::HBAR * cold.omega() * 10.0 / 3.0).sqrt();
        assert_relative_eq!(
            potential_sensitivity(&cold, 3.0).unwrap(),
            direct,
            max_relative = 1e-14
        );
        for gt in [1.0, 100.0] {
            let t = gt / p.gamma();
            let r = delta_f_infinity(&p).unwrap() / potential_sensitivity(&p, t).unwrap();
            assert_relative_eq!(r, (gt / 4.0f64).sqrt(), max_relative = 1e-13);
        }
    }

    #[test]
    fn sequential_bound_limits() {
        let p = ion().with_n_thermal(2.0).unwrap();
        // gamma tau >> 1 with nu = 1
        let c = ProtocolConfig::new(p, 5.0, 5.0, 3.0).unwrap();
        assert_relative_eq!(
            sequential_bound(&c).unwrap(),
            delta_f_infinity(&p).unwrap(),
            max_relative = 1e-12
        );
        let c = ProtocolConfig::new(p, 50.0, 5.0, 3.0).unwrap();
        assert_relative_eq!(
            sequential_bound(&c).unwrap(),
            delta_f_infinity(&p).unwrap() / 10f64.sqrt(),
            max_relative = 1e-12
        );
        assert!(sequential_bound(&ProtocolConfig::new(p, 1.0, 2.0, 3.0).unwrap()).is_err());
    }

    #[test]
    fn coherent_probe_numerator_collapses() {
        let p = ion();
        let c = ProtocolConfig::new(p, 2.0, 0.04, 1.0).unwrap();
        let x = p.gamma() * c.tau;
        let expect = delta_f_infinity(&p).unwrap() / (c.nu().sqrt() * (1.0 - (-x / 2.0).exp()));
        assert_relative_eq!(sequential_bound(&c).unwrap(), expect, max_relative = 1e-12);
    }

    #[test]
    fn ratio_identity_against_definitions() {
        let p = ion().with_n_thermal(0.4).unwrap();
        let t_total = 3.0;
        let e = 7.5;
        for x in [0.1, 1.0, 10.0] {
            let tau = x / p.gamma();
            let c = ProtocolConfig::new(p, t_total, tau, e).unwrap();
            let r = sequential_bound(&c).unwrap() / potential_sensitivity(&p, t_total).unwrap();
            let direct =
                (x / 4.0) * (1.0 - (1.0 - 1.0 / e) * (-x).exp()) / (1.0 - (-x / 2.0).exp()).powi(2);
            assert_relative_eq!(r * r, direct, max_relative = 1e-12);
            assert_relative_eq!(ratio_squared(x, e), direct, max_relative = 1e-13);
        }
    }

    #[test]
    fn cross_module_identity() {
        for n in [0.0, 0.5, 3.0] {
            let p = ion().with_n_thermal(n).unwrap();
            for e in [0.2, 1.0, 40.0, 1e5] {
                for tau in [1e-3, 0.05, 0.8] {
                    let c = ProtocolConfig::new(p, 2.0, tau, e).unwrap();
                    let seq = sequential_bound(&c).unwrap();
                    let phys = force_bound_physical_for_variance(&p, c.var_x0(), c.nu(), tau)
                        .unwrap()
                        .value()
                        .unwrap();
                    assert!((seq - phys).abs() / phys < 1e-12, "{seq} vs {phys}");
                }
            }
        }
    }

    #[test]
    fn optimal_tau_for_coherent_calibration() {
        // oracle: bisection on e^u - 1 = 2u, x = 2u
        let u = bisect(|u: f64| u.exp_m1() - 2.0 * u, 0.5, 3.0, 1e-15, 200).unwrap();
        let o = optimal_tau(1.0, 2.0).unwrap();
        assert_relative_eq!(o.gamma_tau, 2.0 * u, max_relative = 1e-10);
        assert_relative_eq!(o.gamma_tau, 2.512_862_417_252_339, max_relative = 1e-10);
        assert_relative_eq!(o.tau, o.gamma_tau / 2.0, max_relative = 1e-15);
        assert_relative_eq!(o.ratio, 1.108_017_933_583_236, max_relative = 1e-12);
        assert_relative_eq!(
            o.ratio,
            ratio_squared(2.0 * u, 1.0).sqrt(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn optimal_tau_asymptote() {
        let (x, r) = optimal_gamma_tau(2.4e7).unwrap();
        assert!((x / 0.01 - 1.0).abs() < 0.01, "{x}");
        assert!(r > 1.0 && r < 1.0001);
        let (x, _) = optimal_gamma_tau(1e6).unwrap();
        assert_relative_eq!(x, 0.028_844_229_555_965_07, max_relative = 1e-9);
    }

    #[test]
    fn optimal_tau_is_true_minimum() {
        for e in [0.01, 0.3, 1.0, 5.0, 1e3, 1e6, 1e9] {
            let (x, r) = optimal_gamma_tau(e).unwrap();
            for k in [0.9, 0.99, 1.01, 1.1] {
                assert!(ratio_squared(x * k, e).sqrt() >= r);
            }
            assert!(r >= 1.0 - 1e-9);
        }
        assert!(optimal_gamma_tau(0.0).is_err());
        assert!(optimal_tau(1.0, 0.0).is_err());
    }

    #[test]
    fn bracket_failure_is_reported() {
        // the minimiser runs off the top of the bracket for absurdly small E
        let err = optimal_gamma_tau(1e-200).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)), "{err}");
    }

    #[test]
    fn asymptotic_expansion() {
        assert_relative_eq!(asymptotic_ratio(3.0), 1.125, max_relative = 1e-15);
        assert!((asymptotic_ratio(1e30) - 1.0).abs() < 1e-10);
        let (_, r) = optimal_gamma_tau(1000.0).unwrap();
        assert!(((r - asymptotic_ratio(1000.0)) * 1000.0).abs() < 0.5);
    }

    #[test]
    fn figure2_monotone_and_ordered() {
        let grid: Vec<f64> = (0..80)
            .map(|k| 0.5 * 10f64.powf(k as f64 * 6.3 / 79.0))
            .collect();
        let curve = figure2_curve(&grid).unwrap();
        assert_eq!(curve.len(), grid.len());
        for (pt, &e) in curve.iter().zip(&grid) {
            assert_eq!(pt.calibration_e, e);
        }
        for w in curve.windows(2) {
            assert!(w[1].ratio <= w[0].ratio);
        }
        assert!((curve[0].ratio - 1.0) > 0.1);
        assert!(curve.last().unwrap().ratio < 1.001);
        assert!(figure2_curve(&[]).is_err());
        assert!(figure2_curve(&[1.0, -2.0]).is_err());
    }

    #[test]
    fn diffusive_examples() {
        let p = DiffusiveParams::new(1e-25, 6e6, 30.0, 1e6, crate::HBAR).unwrap();
        let t = 2.0;
        let first = p.heuristic_bound(t).unwrap();
        assert_relative_eq!(diffusive_bound(&p, t).unwrap(), first, max_relative = 1e-7);
        // 4 D var t = 1
        let q = DiffusiveParams::new(1e-25, 6e6, 0.5, 0.5, crate::HBAR).unwrap();
        let t = 1.0;
        assert_relative_eq!(
            diffusive_bound(&q, t).unwrap(),
            q.heuristic_bound(t).unwrap() * 2f64.sqrt(),
            max_relative = 1e-14
        );
        assert!(diffusive_bound(&q, 0.0).is_err());
        assert!(DiffusiveParams::new(1e-25, 6e6, 0.0, 0.5, crate::HBAR).is_err());
    }

    #[test]
    fn diffusive_limit_of_sequential_bound() {
        for &(diff, var, t) in &[(1.0, 0.5, 0.05), (2.0, 0.25, 0.5), (0.5, 2.0, 25.0)] {
            let gamma = 1e-6;
            let p = OscillatorParams::new(1e-25, 6e6, gamma, diff / gamma).unwrap();
            let e = ProtocolConfig::calibration_for_variance(&p, var);
            let c = ProtocolConfig::new(p, t, t, e).unwrap();
            let seq = sequential_bound(&c).unwrap();
            let d = DiffusiveParams::new(1e-25, 6e6, diff, var, crate::HBAR).unwrap();
            let closed = diffusive_bound(&d, t).unwrap();
            assert!((seq - closed).abs() / closed < 1e-3);
        }
    }

    #[test]
    fn diffusive_decreasing() {
        let p = DiffusiveParams::new(1.0, 1.0, 1.0, 0.5, 1.0).unwrap();
        let q = DiffusiveParams { var_x0: 0.9, ..p };
        assert!(diffusive_bound(&p, 2.0).unwrap() < diffusive_bound(&p, 1.0).unwrap());
        assert!(diffusive_bound(&q, 1.0).unwrap() < diffusive_bound(&p, 1.0).unwrap());
    }

    #[test]
    fn sensitivity_report_ratio() {
        let p = ion().with_n_thermal(1.0).unwrap();
        let rep = sensitivity_report(&p, 10.0, 50.0).unwrap();
        assert!(rep.ratio_to_potential >= 1.0 - 1e-9);
        let (_, r) = optimal_gamma_tau(50.0).unwrap();
        assert_relative_eq!(rep.ratio_to_potential, r, max_relative = 1e-12);
        assert_relative_eq!(rep.delta_f_bound, rep.delta_f_min * r, max_relative = 1e-12);
    }
}
