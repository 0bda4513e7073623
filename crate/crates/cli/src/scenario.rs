//! Scenario files.
//!
//! ```toml
//! name = "ion"
//!
//! [oscillator]
//! mass = 1.0e-25          # kg
//! omega = 6.283e6         # rad/s
//! gamma = 10.0            # 1/s
//! temperature = 1.0e-4    # K; or n_thermal = ..., never both
//! force = 1.0e-21         # N
//! # hbar, k_b override the CODATA values
//!
//! [probe]
//! kind = "squeezed_ground"   # vacuum | coherent | squeezed_ground
//! energy = 5.0               # units of hbar omega, zero point included
//!
//! [protocol]
//! t_total = 1.0           # s
//! tau = 0.01              # s
//! # calibration_e = ...   # defaults to 2 var_x0 (2 n_T + 1) of the probe
//!
//! [diffusive]             # optional
//! diffusion = 0.5         # 1/s
//!
//! [simulation]
//! n_trials = 10000
//! nu_shots = 1
//! seed = 42
//! ```
//!
//! Coherent probes take `mean_x` and `mean_p` in quadrature units.

use std::ops::Range;
use std::path::Path;

use forcebound::{GaussianState, OscillatorParams, HBAR, K_B};
use serde::Deserialize;
use toml::Spanned;

use crate::error::{CliError, CliResult};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    oscillator: Spanned<RawOscillator>,
    probe: Spanned<RawProbe>,
    protocol: Option<Spanned<RawProtocol>>,
    diffusive: Option<Spanned<RawDiffusive>>,
    simulation: Option<Spanned<RawSimulation>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOscillator {
    mass: Spanned<f64>,
    omega: Spanned<f64>,
    gamma: Spanned<f64>,
    temperature: Option<Spanned<f64>>,
    n_thermal: Option<Spanned<f64>>,
    force: Option<Spanned<f64>>,
    hbar: Option<Spanned<f64>>,
    k_b: Option<Spanned<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProbe {
    kind: Spanned<String>,
    mean_x: Option<Spanned<f64>>,
    mean_p: Option<Spanned<f64>>,
    energy: Option<Spanned<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProtocol {
    t_total: Spanned<f64>,
    tau: Spanned<f64>,
    calibration_e: Option<Spanned<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDiffusive {
    diffusion: Spanned<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    n_trials: Spanned<i64>,
    nu_shots: Spanned<i64>,
    seed: Spanned<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Probe {
    Vacuum,
    Coherent { mean_x: f64, mean_p: f64 },
    SqueezedGround { energy: f64 },
}

impl Probe {
    pub fn state(&self) -> forcebound::Result<GaussianState> {
        match *self {
            Probe::Vacuum => GaussianState::vacuum(1),
            Probe::Coherent { mean_x, mean_p } => GaussianState::coherent(mean_x, mean_p),
            Probe::SqueezedGround { energy } => GaussianState::squeezed_ground(energy),
        }
    }

    pub fn var_x0(&self) -> forcebound::Result<f64> {
        match *self {
            Probe::Vacuum | Probe::Coherent { .. } => Ok(0.5),
            Probe::SqueezedGround { energy } => {
                forcebound::gaussian::squeezed_position_variance(energy)
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Probe::Vacuum => "vacuum",
            Probe::Coherent { .. } => "coherent",
            Probe::SqueezedGround { .. } => "squeezed_ground",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolSpec {
    pub t_total: f64,
    pub tau: f64,
    pub calibration_e: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationSpec {
    pub n_trials: usize,
    pub nu_shots: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub params: OscillatorParams,
    pub probe: Probe,
    pub protocol: Option<ProtocolSpec>,
    /// Momentum diffusion rate, 1/s.
    pub diffusion: Option<f64>,
    pub simulation: Option<SimulationSpec>,
}

struct Source<'a> {
    origin: &'a str,
    text: &'a str,
}

impl Source<'_> {
    fn line(&self, span: Range<usize>) -> usize {
        let end = span.start.min(self.text.len());
        self.text[..end].matches('\n').count() + 1
    }

    fn error(&self, span: Range<usize>, msg: impl std::fmt::Display) -> CliError {
        CliError::Config(format!("{}:{}: {msg}", self.origin, self.line(span)))
    }

    fn check<T>(
        &self,
        value: &Spanned<T>,
        field: &str,
        ok: impl Fn(&T) -> bool,
        need: &str,
    ) -> CliResult<T>
    where
        T: Copy + std::fmt::Display,
    {
        let v = *value.get_ref();
        if ok(&v) {
            Ok(v)
        } else {
            Err(self.error(value.span(), format!("{field} must be {need}, got {v}")))
        }
    }

    fn positive(&self, value: &Spanned<f64>, field: &str) -> CliResult<f64> {
        self.check(
            value,
            field,
            |v| *v > 0.0 && v.is_finite(),
            "positive and finite",
        )
    }

    fn non_negative(&self, value: &Spanned<f64>, field: &str) -> CliResult<f64> {
        self.check(
            value,
            field,
            |v| *v >= 0.0 && v.is_finite(),
            "non-negative and finite",
        )
    }

    fn finite(&self, value: &Spanned<f64>, field: &str) -> CliResult<f64> {
        self.check(value, field, |v| v.is_finite(), "finite")
    }

    fn count(&self, value: &Spanned<i64>, field: &str) -> CliResult<usize> {
        Ok(self.check(value, field, |v| *v >= 1, "an integer >= 1")? as usize)
    }

    fn lift<T>(&self, span: Range<usize>, r: forcebound::Result<T>) -> CliResult<T> {
        r.map_err(|e| self.error(span, e))
    }
}

impl Scenario {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("reading scenario {}", path.display()), e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parse and validate; `origin` prefixes error messages.
    pub fn parse(text: &str, origin: &str) -> CliResult<Self> {
        let src = Source { origin, text };
        let raw: RawScenario = toml::from_str(text).map_err(|e| match e.span() {
            Some(span) => src.error(span, e.message()),
            None => CliError::Config(format!("{origin}: {}", e.message())),
        })?;

        let osc = raw.oscillator.get_ref();
        let osc_span = raw.oscillator.span();
        let mass = src.positive(&osc.mass, "oscillator.mass")?;
        let omega = src.positive(&osc.omega, "oscillator.omega")?;
        let gamma = src.non_negative(&osc.gamma, "oscillator.gamma")?;
        let hbar = match &osc.hbar {
            Some(h) => src.positive(h, "oscillator.hbar")?,
            None => HBAR,
        };
        let k_b = match &osc.k_b {
            Some(k) => src.positive(k, "oscillator.k_b")?,
            None => K_B,
        };
        let params = match (&osc.temperature, &osc.n_thermal) {
            (Some(t), None) => {
                let temperature = src.non_negative(t, "oscillator.temperature")?;
                src.lift(
                    t.span(),
                    OscillatorParams::from_temperature(mass, omega, gamma, temperature, hbar, k_b),
                )?
            }
            (None, Some(n)) => {
                let n = src.non_negative(n, "oscillator.n_thermal")?;
                src.lift(
                    osc_span.clone(),
                    OscillatorParams::new(mass, omega, gamma, n).and_then(|p| p.with_hbar(hbar)),
                )?
            }
            (Some(t), Some(_)) => {
                return Err(src.error(
                    t.span(),
                    "give exactly one of oscillator.temperature and oscillator.n_thermal, not both",
                ))
            }
            (None, None) => {
                return Err(src.error(
                    osc_span,
                    "oscillator needs one of temperature (K) or n_thermal",
                ))
            }
        };
        let params = match &osc.force {
            Some(f) => params.with_physical_force(src.finite(f, "oscillator.force")?),
            None => params,
        };

        let probe = Self::probe(&src, &raw.probe)?;

        let protocol = match &raw.protocol {
            None => None,
            Some(p) => {
                let pr = p.get_ref();
                let t_total = src.positive(&pr.t_total, "protocol.t_total")?;
                let tau = src.positive(&pr.tau, "protocol.tau")?;
                if tau > t_total {
                    return Err(src.error(
                        pr.tau.span(),
                        format!(
                            "protocol.tau ({tau}) must not exceed protocol.t_total ({t_total})"
                        ),
                    ));
                }
                let calibration_e = match &pr.calibration_e {
                    Some(e) => Some(src.positive(e, "protocol.calibration_e")?),
                    None => None,
                };
                Some(ProtocolSpec {
                    t_total,
                    tau,
                    calibration_e,
                })
            }
        };

        let diffusion = match &raw.diffusive {
            Some(d) => Some(src.positive(&d.get_ref().diffusion, "diffusive.diffusion")?),
            None => None,
        };

        let simulation = match &raw.simulation {
            None => None,
            Some(s) => {
                let sim = s.get_ref();
                Some(SimulationSpec {
                    n_trials: src.count(&sim.n_trials, "simulation.n_trials")?,
                    nu_shots: src.count(&sim.nu_shots, "simulation.nu_shots")?,
                    seed: src.check(
                        &sim.seed,
                        "simulation.seed",
                        |v| *v >= 0,
                        "a non-negative integer",
                    )? as u64,
                })
            }
        };

        Ok(Scenario {
            name: raw.name.unwrap_or_else(|| "unnamed".into()),
            params,
            probe,
            protocol,
            diffusion,
            simulation,
        })
    }

    fn probe(src: &Source, raw: &Spanned<RawProbe>) -> CliResult<Probe> {
        let p = raw.get_ref();
        let kind_span = p.kind.span();
        let unexpected = |name: &str, field: &Option<Spanned<f64>>| -> CliResult<()> {
            match field {
                Some(f) => Err(src.error(
                    f.span(),
                    format!("probe.{name} does not apply to kind '{}'", p.kind.get_ref()),
                )),
                None => Ok(()),
            }
        };
        let required = |name: &str, field: &Option<Spanned<f64>>| -> CliResult<Spanned<f64>> {
            field.clone().ok_or_else(|| {
                src.error(
                    kind_span.clone(),
                    format!("probe kind '{}' needs probe.{name}", p.kind.get_ref()),
                )
            })
        };
        let probe = match p.kind.get_ref().as_str() {
            "vacuum" => {
                unexpected("mean_x", &p.mean_x)?;
                unexpected("mean_p", &p.mean_p)?;
                unexpected("energy", &p.energy)?;
                Probe::Vacuum
            }
            "coherent" => {
                unexpected("energy", &p.energy)?;
                Probe::Coherent {
                    mean_x: src.finite(&required("mean_x", &p.mean_x)?, "probe.mean_x")?,
                    mean_p: src.finite(&required("mean_p", &p.mean_p)?, "probe.mean_p")?,
                }
            }
            "squeezed_ground" => {
                unexpected("mean_x", &p.mean_x)?;
                unexpected("mean_p", &p.mean_p)?;
                let e = required("energy", &p.energy)?;
                let energy = src.check(
                    &e,
                    "probe.energy",
                    |v| *v >= 0.5 && v.is_finite(),
                    ">= 0.5 (zero point included)",
                )?;
                Probe::SqueezedGround { energy }
            }
            other => return Err(src.error(
                kind_span,
                format!(
                    "unknown probe.kind '{other}' (expected vacuum, coherent or squeezed_ground)"
                ),
            )),
        };
        src.lift(raw.span(), probe.state())?;
        Ok(probe)
    }

    pub fn require_protocol(&self) -> CliResult<ProtocolSpec> {
        self.protocol.ok_or_else(|| {
            CliError::Config(format!(
                "scenario '{}' has no [protocol] section",
                self.name
            ))
        })
    }

    pub fn require_simulation(&self) -> CliResult<SimulationSpec> {
        self.simulation.ok_or_else(|| {
            CliError::Config(format!(
                "scenario '{}' has no [simulation] section",
                self.name
            ))
        })
    }

    /// Calibration `E`: explicit, or `2 var_x0 (2 n_T + 1)` of the probe.
    pub fn calibration_e(&self) -> CliResult<f64> {
        let protocol = self.require_protocol()?;
        match protocol.calibration_e {
            Some(e) => Ok(e),
            None => Ok(forcebound::ProtocolConfig::calibration_for_variance(
                &self.params,
                self.probe.var_x0()?,
            )),
        }
    }
}
