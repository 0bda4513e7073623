//! Independent numerical routes to the closed forms: Fisher information by
//! quadrature of the momentum likelihood, and moments by integrating the
//! Langevin moment equations.

use crate::error::{domain, Error, Result};
use crate::gaussian::{ChannelDescriptor, GaussianState, OscillatorParams};

/// Smallest accepted grid span, in standard deviations on each side.
pub const MIN_HALF_WIDTH_SIGMAS: f64 = 5.0;
pub const MIN_GRID_POINTS: usize = 10_000;

/// Momentum grid for [`fisher_grid_oracle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentumGrid {
    /// Centred on the momentum mean, `half_width_sigmas` standard
    /// deviations each way.
    Auto {
        half_width_sigmas: f64,
        points: usize,
    },
    /// Absolute bounds in momentum units.
    Explicit { lo: f64, hi: f64, points: usize },
}

impl Default for MomentumGrid {
    fn default() -> Self {
        MomentumGrid::Auto {
            half_width_sigmas: 12.0,
            points: 1 << 14,
        }
    }
}

fn gaussian_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let z = x - mean;
    (-0.5 * z * z / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Fisher information of a momentum measurement on the evolved probe,
/// computed as the integral of `(dp/dF)^2 / p` over a momentum grid, with
/// `dp/dF` from central differences of the evolved state in `F`.
///
/// `delta_f` defaults to `1e-4 sigma / D`.
pub fn fisher_grid_oracle(
    params: &OscillatorParams,
    probe: &GaussianState,
    t: f64,
    delta_f: Option<f64>,
    grid: &MomentumGrid,
) -> Result<f64> {
    let f0 = params.force();
    let at = |force: f64| -> Result<(f64, f64)> {
        probe
            .evolve_forced(0, &params.with_force(force), t)?
            .momentum_marginal(0)
    };
    let (mean, var) = at(f0)?;
    let sigma = var.sqrt();
    let d = ChannelDescriptor::from_params(params, t)?.d_factor;
    let step = match delta_f {
        Some(h) if h > 0.0 => h,
        Some(h) => {
            return Err(domain(format!(
                "finite-difference step must be > 0, got {h}"
            )))
        }
        None if d > 0.0 => 1e-4 * sigma / d,
        None => 1e-4 * sigma,
    };
    let (lo, hi, points) = match *grid {
        MomentumGrid::Auto {
            half_width_sigmas,
            points,
        } => {
            if half_width_sigmas < MIN_HALF_WIDTH_SIGMAS {
                return Err(Error::Argument(format!(
                    "momentum grid spans {half_width_sigmas} sigma each way, need >= {MIN_HALF_WIDTH_SIGMAS}"
                )));
            }
            (
                mean - half_width_sigmas * sigma,
                mean + half_width_sigmas * sigma,
                points,
            )
        }
        MomentumGrid::Explicit { lo, hi, points } => {
            if lo > mean - MIN_HALF_WIDTH_SIGMAS * sigma
                || hi < mean + MIN_HALF_WIDTH_SIGMAS * sigma
            {
                return Err(Error::Argument(format!(
                    "momentum grid [{lo}, {hi}] does not cover mean {mean} +/- {MIN_HALF_WIDTH_SIGMAS} sigma (sigma = {sigma})"
                )));
            }
            (lo, hi, points)
        }
    };
    if points < MIN_GRID_POINTS {
        return Err(Error::Argument(format!(
            "momentum grid has {points} points, need >= {MIN_GRID_POINTS}"
        )));
    }
    let (mean_plus, var_plus) = at(f0 + step)?;
    let (mean_minus, var_minus) = at(f0 - step)?;

    let h = (hi - lo) / (points - 1) as f64;
    let mut total = 0.0;
    for k in 0..points {
        let p = lo + k as f64 * h;
        let p0 = gaussian_pdf(p, mean, var);
        if p0 <= 0.0 {
            continue;
        }
        let dp = (gaussian_pdf(p, mean_plus, var_plus) - gaussian_pdf(p, mean_minus, var_minus))
            / (2.0 * step);
        let w = if k == 0 || k + 1 == points { 0.5 } else { 1.0 };
        total += w * dp * dp / p0;
    }
    Ok(total * h)
}

/// Moments of a single mode after time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleModeMoments {
    /// `(<X>, <P>)`
    pub mean: [f64; 2],
    /// `[[var X, cov XP], [cov XP, var P]]`
    pub cov: [[f64; 2]; 2],
}

/// Minimum number of RK4 steps per unit of `gamma t`.
pub const ODE_STEPS_PER_UNIT: usize = 1000;

/// Integrate the Langevin moment equations with fixed-step RK4:
///
/// ```text
/// d<X>/dt = -gamma <X> / 2
/// d<P>/dt = omega F / 2 - gamma <P> / 2
/// dV/dt   = -gamma V + gamma (2 n_T + 1) I / 2
/// ```
pub fn moment_ode_oracle(
    params: &OscillatorParams,
    init_mean: [f64; 2],
    init_cov: [[f64; 2]; 2],
    t: f64,
) -> Result<SingleModeMoments> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(domain(format!("time must be >= 0, got {t}")));
    }
    let gamma = params.gamma();
    let drive = 0.5 * params.omega() * params.force();
    let source = 0.5 * gamma * params.thermal_factor();
    let rhs = |y: &[f64; 5]| -> [f64; 5] {
        [
            -0.5 * gamma * y[0],
            drive - 0.5 * gamma * y[1],
            -gamma * y[2] + source,
            -gamma * y[3],
            -gamma * y[4] + source,
        ]
    };
    let steps = ((gamma * t * ODE_STEPS_PER_UNIT as f64).ceil() as usize).max(ODE_STEPS_PER_UNIT);
    let h = t / steps as f64;
    let mut y = [
        init_mean[0],
        init_mean[1],
        init_cov[0][0],
        init_cov[0][1],
        init_cov[1][1],
    ];
    let axpy = |y: &[f64; 5], k: &[f64; 5], a: f64| -> [f64; 5] {
        std::array::from_fn(|i| y[i] + a * k[i])
    };
    for _ in 0..steps {
        let k1 = rhs(&y);
        let k2 = rhs(&axpy(&y, &k1, 0.5 * h));
        let k3 = rhs(&axpy(&y, &k2, 0.5 * h));
        let k4 = rhs(&axpy(&y, &k3, h));
        for i in 0..5 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    Ok(SingleModeMoments {
        mean: [y[0], y[1]],
        cov: [[y[2], y[3]], [y[3], y[4]]],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fisher::{classical_fisher_min_uncertainty, BoundInputs};
    use approx::assert_relative_eq;

    #[test]
    fn grid_oracle_matches_coherent_closed_form() {
        for &(gamma, t) in &[(1.0, 0.3), (0.5, 2.0), (2.0, 1.7)] {
            let p = OscillatorParams::dimensionless(1.3, gamma, 0.0, 0.2).unwrap();
            let probe = GaussianState::coherent(0.4, -0.3).unwrap();
            let d = ChannelDescriptor::from_params(&p, t).unwrap().d_factor;
            let oracle = fisher_grid_oracle(&p, &probe, t, None, &MomentumGrid::default()).unwrap();
            assert_relative_eq!(oracle, 2.0 * d * d, max_relative = 1e-6);
        }
    }

    #[test]
    fn grid_oracle_example_value() {
        let p = OscillatorParams::dimensionless(1.0, 1.0, 2.0, 0.0).unwrap();
        let probe = GaussianState::squeezed_ground(1.0625).unwrap();
        assert_relative_eq!(probe.cov()[(0, 0)], 2.0, max_relative = 1e-14);
        let oracle =
            fisher_grid_oracle(&p, &probe, 2f64.ln(), None, &MomentumGrid::default()).unwrap();
        assert_relative_eq!(oracle, 0.065_361_095_334_784_72, max_relative = 1e-6);
    }

    #[test]
    fn grid_oracle_independent_of_force() {
        let probe = GaussianState::squeezed_ground(3.0).unwrap();
        let a = OscillatorParams::dimensionless(1.0, 0.7, 1.0, 0.0).unwrap();
        let b = a.with_force(1.0);
        let fa = fisher_grid_oracle(&a, &probe, 1.1, None, &MomentumGrid::default()).unwrap();
        let fb = fisher_grid_oracle(&b, &probe, 1.1, None, &MomentumGrid::default()).unwrap();
        assert!((fa - fb).abs() < 1e-8);
    }

    #[test]
    fn grid_oracle_converged_in_spacing() {
        let probe = GaussianState::squeezed_ground(3.0).unwrap();
        let p = OscillatorParams::dimensionless(1.0, 0.7, 1.0, 0.3).unwrap();
        let coarse = fisher_grid_oracle(&p, &probe, 1.1, None, &MomentumGrid::default()).unwrap();
        let fine = fisher_grid_oracle(
            &p,
            &probe,
            1.1,
            None,
            &MomentumGrid::Auto {
                half_width_sigmas: 12.0,
                points: 2 * (1 << 14) - 1,
            },
        )
        .unwrap();
        assert!((coarse - fine).abs() < 1e-8);
    }

    #[test]
    fn grid_oracle_agrees_on_grid() {
        for eta in [0.1, 0.6, 0.99] {
            for n in [0.0, 2.0, 10.0] {
                for v in [0.05, 0.5, 50.0] {
                    let t = -f64::ln(eta);
                    let p = OscillatorParams::dimensionless(1.0, 1.0, n, 0.1).unwrap();
                    let probe = GaussianState::single_mode(0.0, 0.0, v, 0.25 / v, 0.0).unwrap();
                    let d = ChannelDescriptor::from_params(&p, t).unwrap().d_factor;
                    let closed = classical_fisher_min_uncertainty(
                        &BoundInputs::new(eta, n, v, 1.0).unwrap(),
                        d,
                    );
                    let oracle =
                        fisher_grid_oracle(&p, &probe, t, None, &MomentumGrid::default()).unwrap();
                    assert!(
                        (oracle - closed).abs() / closed < 1e-6,
                        "{eta} {n} {v}: {oracle} vs {closed}"
                    );
                }
            }
        }
    }

    #[test]
    fn underspanned_grid_rejected() {
        let probe = GaussianState::vacuum(1).unwrap();
        let p = OscillatorParams::dimensionless(1.0, 1.0, 0.0, 0.0).unwrap();
        let small = MomentumGrid::Auto {
            half_width_sigmas: 3.0,
            points: 20_000,
        };
        assert!(fisher_grid_oracle(&p, &probe, 1.0, None, &small).is_err());
        let sparse = MomentumGrid::Auto {
            half_width_sigmas: 12.0,
            points: 100,
        };
        assert!(fisher_grid_oracle(&p, &probe, 1.0, None, &sparse).is_err());
        let off = MomentumGrid::Explicit {
            lo: 1.0,
            hi: 10.0,
            points: 20_000,
        };
        assert!(fisher_grid_oracle(&p, &probe, 1.0, None, &off).is_err());
        let fine = MomentumGrid::Explicit {
            lo: -10.0,
            hi: 10.0,
            points: 40_000,
        };
        let d = ChannelDescriptor::from_params(&p, 1.0).unwrap().d_factor;
        assert_relative_eq!(
            fisher_grid_oracle(&p, &probe, 1.0, None, &fine).unwrap(),
            2.0 * d * d,
            max_relative = 1e-6
        );
    }

    #[test]
    fn ode_stationary_and_fixed_point() {
        let p = OscillatorParams::dimensionless(1.0, 1.0, 0.0, 0.0).unwrap();
        let m = moment_ode_oracle(&p, [0.0, 0.0], [[0.5, 0.0], [0.0, 0.5]], 3.0).unwrap();
        assert!(m.mean[0].abs() < 1e-15 && m.mean[1].abs() < 1e-15);
        assert!((m.cov[0][0] - 0.5).abs() < 1e-14 && (m.cov[1][1] - 0.5).abs() < 1e-14);

        let p = OscillatorParams::dimensionless(2.0, 0.5, 1.5, 0.3).unwrap();
        let m = moment_ode_oracle(&p, [1.0, -2.0], [[3.0, 0.4], [0.4, 0.2]], 120.0).unwrap();
        assert_relative_eq!(m.mean[1], 2.0 * 0.3 / 0.5, max_relative = 1e-10);
        assert_relative_eq!(m.cov[1][1], 2.0, max_relative = 1e-10);
        assert_relative_eq!(m.cov[0][0], 2.0, max_relative = 1e-10);
    }

    #[test]
    fn ode_matches_loss_channel_example() {
        let p = OscillatorParams::dimensionless(1.0, 1.0, 2.0, 0.0).unwrap();
        let m = moment_ode_oracle(&p, [0.0, 0.0], [[5.0, 0.0], [0.0, 5.0]], 2f64.ln()).unwrap();
        assert!((m.cov[1][1] - 3.75).abs() < 1e-10);
        assert!((m.cov[0][0] - 3.75).abs() < 1e-10);
    }

    #[test]
    fn ode_matches_evolve_forced() {
        let probe = GaussianState::squeezed(0.8, 0.6, 0.5, -1.0).unwrap();
        let c = probe.cov();
        for &(gamma, n, t) in &[
            (1.0, 0.0, 2f64.ln()),
            (0.3, 4.0, 10.0),
            (2.0, 0.5, 5.0),
            (0.0, 1.0, 2.0),
        ] {
            let p = OscillatorParams::dimensionless(1.7, gamma, n, 0.9).unwrap();
            let m = moment_ode_oracle(
                &p,
                [0.5, -1.0],
                [[c[(0, 0)], c[(0, 1)]], [c[(1, 0)], c[(1, 1)]]],
                t,
            )
            .unwrap();
            let e = probe.evolve_forced(0, &p, t).unwrap();
            let pairs = [
                (m.mean[0], e.mean()[0]),
                (m.mean[1], e.mean()[1]),
                (m.cov[0][0], e.cov()[(0, 0)]),
                (m.cov[0][1], e.cov()[(0, 1)]),
                (m.cov[1][1], e.cov()[(1, 1)]),
            ];
            for (a, b) in pairs {
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
        assert!(moment_ode_oracle(
            &OscillatorParams::dimensionless(1.0, 1.0, 0.0, 0.0).unwrap(),
            [0.0; 2],
            [[0.5, 0.0], [0.0, 0.5]],
            -1.0
        )
        .is_err());
    }
}
