use std::fmt::Write as _;
use std::path::Path;

use forcebound::fisher::{classical_fisher_momentum, force_bound_dimensionless, qfi_min};
use forcebound::montecarlo::{run_experiment, write_samples_csv};
use forcebound::protocol::{
    asymptotic_gamma_tau, asymptotic_ratio, delta_f_infinity, diffusive_bound, optimal_tau,
    potential_sensitivity, sequential_bound, sequential_bound_with_nu, DiffusiveParams,
};
use forcebound::validation::{all_passed, render_table, Suite};
use forcebound::{
    Bound, BoundInputs, ChannelDescriptor, EstimationReport, ProtocolConfig, RngStream,
};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::grid::GridSpec;
use crate::scenario::Scenario;

pub const BOUND_SCHEMA: &str = "forcebound.bound/1";
pub const PROTOCOL_SCHEMA: &str = "forcebound.protocol/1";
pub const FIGURE2_SCHEMA: &str = "forcebound.figure2/1";
pub const SIMULATE_SCHEMA: &str = "forcebound.simulate/1";

fn num(name: &str, v: f64) -> CliResult<String> {
    if v.is_finite() {
        Ok(format!("{v:e}"))
    } else {
        Err(CliError::Numerical(format!("{name} evaluated to {v}")))
    }
}

/// `quantity,value,unit` table behind a schema comment.
struct Table {
    schema: &'static str,
    scenario: String,
    rows: Vec<(&'static str, String, &'static str)>,
}

impl Table {
    fn new(schema: &'static str, scenario: &str) -> Self {
        Self {
            schema,
            scenario: scenario.into(),
            rows: Vec::new(),
        }
    }

    fn value(&mut self, name: &'static str, v: f64, unit: &'static str) -> CliResult<()> {
        let s = num(name, v)?;
        self.rows.push((name, s, unit));
        Ok(())
    }

    fn bound(&mut self, name: &'static str, b: Bound, unit: &'static str) {
        self.rows.push((name, b.to_string(), unit));
    }

    fn text(&mut self, name: &'static str, v: impl ToString) {
        self.rows.push((name, v.to_string(), "-"));
    }

    fn render(&self) -> String {
        let mut out = format!(
            "# {}\n# scenario: {}\nquantity,value,unit\n",
            self.schema, self.scenario
        );
        for (name, value, unit) in &self.rows {
            let _ = writeln!(out, "{name},{value},{unit}");
        }
        out
    }
}

/// Single-shot and repeated bounds for the scenario probe, with probing
/// time `tau` and `nu = t_total / tau` repetitions.
pub fn cmd_bound(scenario: &Scenario) -> CliResult<String> {
    let protocol = scenario.require_protocol()?;
    let params = &scenario.params;
    let t = protocol.tau;
    let nu = protocol.t_total / protocol.tau;
    let channel = ChannelDescriptor::from_params(params, t)?;
    let var_x0 = scenario.probe.var_x0()?;
    let inputs = BoundInputs::from_channel(&channel, var_x0, nu)?;
    let (_, var_p_t) = scenario
        .probe
        .state()?
        .evolve_forced(0, params, t)?
        .momentum_marginal(0)?;
    let d = channel.d_factor;
    let dimensionless = force_bound_dimensionless(&inputs, d);

    let mut table = Table::new(BOUND_SCHEMA, &scenario.name);
    table.text("probe", scenario.probe.label());
    table.value("eta", channel.eta, "1")?;
    table.value("d_factor", d, "1")?;
    table.value("n_thermal", params.n_thermal(), "1")?;
    table.value("var_x0", var_x0, "1")?;
    table.value("var_p_t", var_p_t, "1")?;
    table.value("nu", nu, "1")?;
    if d > 0.0 {
        table.value(
            "fisher_momentum",
            classical_fisher_momentum(var_p_t, d)?,
            "1",
        )?;
    } else {
        table.bound("fisher_momentum", Bound::NoInformation, "1");
    }
    table.value("qfi", qfi_min(&inputs, d), "1")?;
    table.bound("delta_F", dimensionless, "1");
    table.value("force_scale", params.force_scale(), "N")?;
    table.bound("delta_f", dimensionless.scale(params.force_scale()), "N");
    Ok(table.render())
}

/// Sequential protocol at the configured `tau` and at the optimal one.
pub fn cmd_protocol(scenario: &Scenario) -> CliResult<String> {
    let protocol = scenario.require_protocol()?;
    let params = scenario.params;
    let calibration_e = scenario.calibration_e()?;
    let mut table = Table::new(PROTOCOL_SCHEMA, &scenario.name);
    table.value("calibration_E", calibration_e, "1")?;

    if params.gamma() > 0.0 {
        let config = ProtocolConfig::new(params, protocol.t_total, protocol.tau, calibration_e)?;
        let delta_f_min = potential_sensitivity(&params, protocol.t_total)?;
        let bound = sequential_bound(&config)?;
        let opt = optimal_tau(calibration_e, params.gamma())?;
        let opt_config = ProtocolConfig::new(params, protocol.t_total, opt.tau, calibration_e)?;
        let opt_bound = sequential_bound_with_nu(&opt_config, opt_config.nu())?;

        table.value("gamma_tau", params.gamma() * protocol.tau, "1")?;
        table.value("tau", protocol.tau, "s")?;
        table.value("nu", config.nu(), "1")?;
        table.value("nu_floor", config.nu_floor() as f64, "1")?;
        table.value("delta_f_E", bound, "N")?;
        table.value(
            "delta_f_E_floor",
            sequential_bound_with_nu(&config, config.nu_floor() as f64)?,
            "N",
        )?;
        table.value("ratio", bound / delta_f_min, "1")?;
        table.value("gamma_tau_opt", opt.gamma_tau, "1")?;
        table.value("tau_opt", opt.tau, "s")?;
        table.value("nu_opt", opt_config.nu(), "1")?;
        table.value("delta_f_E_opt", opt_bound, "N")?;
        table.value("ratio_opt", opt.ratio, "1")?;
        table.value("ratio_asymptotic", asymptotic_ratio(calibration_e), "1")?;
        table.value(
            "gamma_tau_opt_asymptotic",
            asymptotic_gamma_tau(calibration_e),
            "1",
        )?;
        table.value("delta_f_min", delta_f_min, "N")?;
        table.value("delta_f_inf", delta_f_infinity(&params)?, "N")?;
    } else if scenario.diffusion.is_none() {
        return Err(CliError::Config(format!(
            "scenario '{}': the protocol needs oscillator.gamma > 0 or a [diffusive] section",
            scenario.name
        )));
    }

    if let Some(diffusion) = scenario.diffusion {
        let var_x0 = scenario.probe.var_x0()?;
        let dp = DiffusiveParams::new(
            params.mass(),
            params.omega(),
            diffusion,
            var_x0,
            params.hbar(),
        )?;
        let t = protocol.t_total;
        table.value("diffusion", diffusion, "1/s")?;
        table.value("diffusive_heuristic", dp.heuristic_bound(t)?, "N")?;
        table.value(
            "diffusive_correction",
            (1.0 + 1.0 / (4.0 * diffusion * var_x0 * t)).sqrt(),
            "1",
        )?;
        table.value("diffusive_bound", diffusive_bound(&dp, t)?, "N")?;
    }
    Ok(table.render())
}

/// Optimised ratio to the potential sensitivity over a calibration grid.
pub fn cmd_figure2(grid: &GridSpec) -> CliResult<String> {
    let values = grid.values();
    let curve = forcebound::protocol::figure2_curve(&values)?;
    let mut out = format!("# {FIGURE2_SCHEMA}\ncalibration_E,gamma_tau_opt,ratio\n");
    for p in curve {
        let _ = writeln!(
            out,
            "{},{},{}",
            num("calibration_E", p.calibration_e)?,
            num("gamma_tau_opt", p.gamma_tau_opt)?,
            num("ratio", p.ratio)?
        );
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct SimulateOutput {
    pub schema: &'static str,
    pub scenario: String,
    pub probe: &'static str,
    pub seed: u64,
    /// Probing time per trial, s.
    pub tau: f64,
    /// Newtons per unit of dimensionless force.
    pub force_scale: f64,
    pub tolerance: f64,
    pub verdict: &'static str,
    pub report: EstimationReport,
}

impl SimulateOutput {
    pub fn passed(&self) -> bool {
        self.verdict == "PASS"
    }
}

fn finite_report(r: &EstimationReport) -> CliResult<()> {
    let fields = [
        ("f_true", r.f_true),
        ("estimate mean", r.estimates.mean),
        ("estimate variance", r.estimates.variance),
        ("empirical_mse", r.empirical_mse),
        ("crb_prediction", r.crb_prediction),
        ("attainment_ratio", r.attainment_ratio),
    ];
    for (name, v) in fields {
        num(name, v)?;
    }
    Ok(())
}

/// Monte Carlo run of the scenario; `seed` overrides the scenario seed.
/// Raw samples go to `samples` when given.
pub fn cmd_simulate(
    scenario: &Scenario,
    seed: Option<u64>,
    samples: Option<&Path>,
) -> CliResult<SimulateOutput> {
    let protocol = scenario.require_protocol()?;
    let sim = scenario.require_simulation()?;
    let seed = seed.unwrap_or(sim.seed);
    let probe = scenario.probe.state()?;
    let rng = RngStream::new(seed, 0);
    let report = run_experiment(
        &scenario.params,
        &probe,
        protocol.tau,
        sim.nu_shots,
        sim.n_trials,
        &rng,
    )?;
    finite_report(&report)?;
    if let Some(path) = samples {
        let file = std::fs::File::create(path)
            .map_err(|e| CliError::io(format!("creating {}", path.display()), e))?;
        let mut w = std::io::BufWriter::new(file);
        write_samples_csv(
            &mut w,
            &scenario.params,
            &probe,
            protocol.tau,
            sim.nu_shots,
            sim.n_trials,
            &rng,
        )?;
    }
    let tolerance = report.tolerance();
    Ok(SimulateOutput {
        schema: SIMULATE_SCHEMA,
        scenario: scenario.name.clone(),
        probe: scenario.probe.label(),
        seed,
        tau: protocol.tau,
        force_scale: scenario.params.force_scale(),
        tolerance,
        verdict: if report.attains_crb() { "PASS" } else { "FAIL" },
        report,
    })
}

pub fn simulate_json(output: &SimulateOutput) -> CliResult<String> {
    let mut s =
        serde_json::to_string_pretty(output).map_err(|e| CliError::Numerical(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Identity suite; the table and whether every identity passed.
pub fn cmd_validate_with(suite: &Suite) -> CliResult<(String, bool)> {
    let results = suite.run()?;
    Ok((render_table(&results), all_passed(&results)))
}

pub fn cmd_validate() -> CliResult<(String, bool)> {
    cmd_validate_with(&Suite::default())
}
