//! Fisher information of momentum measurements, the extended-system quantum
//! Fisher information and its gauge minimisation, and the force bounds that
//! follow from them.
//!
//! The zero-temperature extension carries one environment mode and a gauge
//! `G`; the thermal extension carries two environment modes and gauges
//! `(lambda1, lambda2)`. At `theta2 = 0` the two coincide under
//! `G = -D lambda1`.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{domain, Error, Result};
use crate::gaussian::{squeezed_position_variance, ChannelDescriptor, OscillatorParams};

/// Below this value of `gamma t` the displacement factor uses its series
/// limit `omega t / 2`.
pub const NOISELESS_THRESHOLD: f64 = 1e-12;

/// Momentum displacement per unit dimensionless force accumulated in time
/// `t`: `(omega / gamma)(1 - exp(-gamma t / 2))`, or `omega t / 2` without
/// damping.
pub fn attenuation_d(omega: f64, gamma: f64, t: f64) -> f64 {
    if gamma * t < NOISELESS_THRESHOLD {
        0.5 * omega * t
    } else {
        -(omega / gamma) * (-0.5 * gamma * t).exp_m1()
    }
}

/// A precision bound that may carry no information at all (zero signal).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Finite(f64),
    NoInformation,
}

impl Bound {
    pub fn value(self) -> Option<f64> {
        match self {
            Bound::Finite(v) => Some(v),
            Bound::NoInformation => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Bound::Finite(_))
    }

    /// Scale a finite bound; no-information stays no-information.
    pub fn scale(self, factor: f64) -> Bound {
        match self {
            Bound::Finite(v) => Bound::Finite(v * factor),
            Bound::NoInformation => Bound::NoInformation,
        }
    }

    pub fn expect_finite(self) -> Result<f64> {
        self.value()
            .ok_or_else(|| Error::NoInformation("zero momentum displacement".into()))
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Finite(v) => write!(f, "{v:e}"),
            Bound::NoInformation => f.write_str("no-information"),
        }
    }
}

impl Serialize for Bound {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Bound::Finite(v) => s.serialize_f64(*v),
            Bound::NoInformation => s.serialize_str("no-information"),
        }
    }
}

/// Inputs shared by the closed-form bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub eta: f64,
    pub one_minus_eta: f64,
    pub n_thermal: f64,
    /// Initial position variance of the probe.
    pub var_x0: f64,
    /// Number of repetitions; continuous in the bound formulas.
    pub nu: f64,
}

impl BoundInputs {
    pub fn new(eta: f64, n_thermal: f64, var_x0: f64, nu: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(domain(format!(
                "transmissivity must lie in (0, 1], got {eta}"
            )));
        }
        Self::checked(eta, 1.0 - eta, n_thermal, var_x0, nu)
    }

    pub fn from_channel(channel: &ChannelDescriptor, var_x0: f64, nu: f64) -> Result<Self> {
        Self::checked(
            channel.eta,
            channel.one_minus_eta,
            channel.n_thermal,
            var_x0,
            nu,
        )
    }

    fn checked(eta: f64, one_minus_eta: f64, n_thermal: f64, var_x0: f64, nu: f64) -> Result<Self> {
        if !(n_thermal >= 0.0) || !n_thermal.is_finite() {
            return Err(domain(format!(
                "thermal occupation must be >= 0, got {n_thermal}"
            )));
        }
        if !(var_x0 > 0.0) || !var_x0.is_finite() {
            return Err(domain(format!(
                "initial position variance must be > 0, got {var_x0}"
            )));
        }
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(domain(format!("repetition count must be > 0, got {nu}")));
        }
        Ok(Self {
            eta,
            one_minus_eta,
            n_thermal,
            var_x0,
            nu,
        })
    }

    /// Momentum variance of a minimum-uncertainty probe, `1 / (4 var_x0)`.
    pub fn var_p0(&self) -> f64 {
        0.25 / self.var_x0
    }

    /// Momentum variance after the loss channel for a minimum-uncertainty probe.
    pub fn var_p_t(&self) -> f64 {
        self.eta * self.var_p0() + (2.0 * self.n_thermal + 1.0) * self.one_minus_eta / 2.0
    }
}

/// Environment-only displacement parameters of the purification.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct GaugeParams {
    pub g: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl GaugeParams {
    pub fn zero_t(g: f64) -> Self {
        Self {
            g,
            ..Self::default()
        }
    }

    pub fn thermal(lambda1: f64, lambda2: f64) -> Self {
        Self {
            g: 0.0,
            lambda1,
            lambda2,
        }
    }

    /// Thermal gauges equivalent to the zero-temperature `g` when
    /// `theta2 = 0`: `lambda1 = -g / d`, `lambda2 = 0`.
    pub fn from_zero_t(g: f64, d: f64) -> Self {
        Self {
            g,
            lambda1: -g / d,
            lambda2: 0.0,
        }
    }
}

/// Fisher information of a momentum measurement, `D^2 / var_p_t`.
pub fn classical_fisher_momentum(var_p_t: f64, d: f64) -> Result<f64> {
    if !(var_p_t > 0.0) {
        return Err(domain(format!(
            "momentum variance must be > 0, got {var_p_t}"
        )));
    }
    Ok(d * d / var_p_t)
}

/// Momentum-measurement Fisher information for a minimum-uncertainty probe
/// written in terms of its initial position variance.
pub fn classical_fisher_min_uncertainty(inputs: &BoundInputs, d: f64) -> f64 {
    let v = inputs.var_x0;
    let thermal = 2.0 * inputs.n_thermal + 1.0;
    d * d * 4.0 * v / (inputs.eta + 2.0 * thermal * inputs.one_minus_eta * v)
}

fn check_unit(eta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eta) {
        Ok(())
    } else {
        Err(domain(format!(
            "transmissivity must lie in [0, 1], got {eta}"
        )))
    }
}

/// QFI of system plus one vacuum-started environment for gauge `g`.
pub fn extended_qfi_zero_t(g: f64, eta: f64, d: f64, var_xs: f64, var_xr: f64) -> Result<f64> {
    check_unit(eta)?;
    let (c, s) = (eta.sqrt(), (1.0 - eta).sqrt());
    let sys = -g * s + d * c;
    let env = d * s + g * c;
    Ok(4.0 * var_xs * sys * sys + 4.0 * var_xr * env * env)
}

/// Gauge minimising [`extended_qfi_zero_t`].
pub fn g_opt_zero_t(eta: f64, d: f64, var_xs: f64, var_xr: f64) -> Result<f64> {
    check_unit(eta)?;
    let denom = (1.0 - eta) * var_xs + eta * var_xr;
    if !(denom > 0.0) {
        return Err(domain("degenerate gauge denominator (vanishing variances)"));
    }
    Ok((eta * (1.0 - eta)).sqrt() * (var_xs - var_xr) * d / denom)
}

/// Minimum of the zero-temperature extended QFI for a vacuum environment.
pub fn zero_t_qfi_minimum(eta: f64, d: f64, var_xs: f64) -> f64 {
    d * d * 4.0 * var_xs / (eta + 2.0 * (1.0 - eta) * var_xs)
}

struct ThermalTrig {
    c1: f64,
    s1: f64,
    ch: f64,
    sh: f64,
}

impl ThermalTrig {
    fn new(channel: &ChannelDescriptor) -> Self {
        let (s1, c1) = channel.theta1.sin_cos();
        Self {
            c1,
            s1,
            ch: channel.theta2.cosh(),
            sh: channel.theta2.sinh(),
        }
    }
}

/// QFI of system plus two vacuum-started environments with gauges
/// `(lambda1, lambda2)`; the displacement factor is `channel.d_factor`.
pub fn extended_qfi_thermal(
    gauge: &GaugeParams,
    channel: &ChannelDescriptor,
    var_xs: f64,
    var_xr1: f64,
    var_xr2: f64,
) -> f64 {
    let t = ThermalTrig::new(channel);
    let (l1, l2) = (gauge.lambda1, gauge.lambda2);
    let w = t.ch + l2 * t.sh;
    let sys = w * t.c1 + l1 * t.s1;
    let env1 = -w * t.s1 + l1 * t.c1;
    let env2 = t.sh + l2 * t.ch;
    let two_d = 2.0 * channel.d_factor;
    two_d * two_d * (var_xs * sys * sys + var_xr1 * env1 * env1 + var_xr2 * env2 * env2)
}

/// Stationary point of [`extended_qfi_thermal`] in `(lambda1, lambda2)`.
pub fn lambda_opt_thermal(
    channel: &ChannelDescriptor,
    var_xs: f64,
    var_xr1: f64,
    var_xr2: f64,
) -> Result<GaugeParams> {
    for (name, v) in [
        ("var_xs", var_xs),
        ("var_xr1", var_xr1),
        ("var_xr2", var_xr2),
    ] {
        if !(v > 0.0) {
            return Err(domain(format!("{name} must be > 0, got {v}")));
        }
    }
    let t = ThermalTrig::new(channel);
    let mix = var_xr1 * t.c1 * t.c1 + var_xs * t.s1 * t.s1;
    let k = var_xs * var_xr1 / mix;
    let lambda2 = -t.ch * t.sh * (var_xr2 + k) / (t.ch * t.ch * var_xr2 + t.sh * t.sh * k);
    let lambda1 = (var_xr1 - var_xs) * t.c1 * t.s1 / mix * (t.ch + lambda2 * t.sh);
    Ok(GaugeParams::thermal(lambda1, lambda2))
}

/// Minimum of [`extended_qfi_thermal`] over the gauges, for arbitrary
/// initial environment variances.
pub fn thermal_qfi_minimum(
    channel: &ChannelDescriptor,
    var_xs: f64,
    var_xr1: f64,
    var_xr2: f64,
) -> f64 {
    let t = ThermalTrig::new(channel);
    let inv = t.sh * t.sh / var_xr2
        + t.ch * t.ch * t.s1 * t.s1 / var_xr1
        + t.ch * t.ch * t.c1 * t.c1 / var_xs;
    let two_d = 2.0 * channel.d_factor;
    two_d * two_d / inv
}

/// Quantum Fisher information of the probe, `[2D]^2 / [2(1-eta)(2n+1) + eta / var_x0]`.
pub fn qfi_min(inputs: &BoundInputs, d: f64) -> f64 {
    let thermal = 2.0 * inputs.n_thermal + 1.0;
    4.0 * d * d / (2.0 * inputs.one_minus_eta * thermal + inputs.eta / inputs.var_x0)
}

/// Lower bound on the uncertainty of the dimensionless force after
/// `inputs.nu` repetitions.
pub fn force_bound_dimensionless(inputs: &BoundInputs, d: f64) -> Bound {
    if !(d > 0.0) {
        return Bound::NoInformation;
    }
    let thermal = 2.0 * inputs.n_thermal + 1.0;
    let inner = inputs.one_minus_eta * thermal + 0.5 * inputs.eta / inputs.var_x0;
    Bound::Finite(inner.sqrt() / (d * (2.0 * inputs.nu).sqrt()))
}

/// Bound on the physical force (newtons) for a probe of initial position
/// variance `var_x0`, probing time `t` and `nu` repetitions.
pub fn force_bound_physical_for_variance(
    params: &OscillatorParams,
    var_x0: f64,
    nu: f64,
    t: f64,
) -> Result<Bound> {
    let channel = ChannelDescriptor::from_params(params, t)?;
    let inputs = BoundInputs::from_channel(&channel, var_x0, nu)?;
    Ok(force_bound_dimensionless(&inputs, channel.d_factor).scale(params.force_scale()))
}

/// Bound on the physical force (newtons) for the optimal probe at mean
/// energy `energy`: the momentum-squeezed ground state.
pub fn force_bound_physical(
    params: &OscillatorParams,
    energy: f64,
    nu: f64,
    t: f64,
) -> Result<Bound> {
    let var_x0 = squeezed_position_variance(energy)?;
    force_bound_physical_for_variance(params, var_x0, nu, t)
}
