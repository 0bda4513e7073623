//! Multimode Gaussian states and the channels acting on them.
//!
//! Quadratures are ordered `(X1, P1, X2, P2, ...)` with `[X, P] = i`, so the
//! vacuum covariance is `I / 2`. Everything happens in the interaction
//! picture: no free rotation at the oscillator frequency is ever applied,
//! and the forced damped dynamics reduce to a thermal loss channel followed
//! by a momentum displacement.
//!
//! Two-mode maps use the convention that a positive beam-splitter angle
//! sends `X_i -> cos(theta) X_i + sin(theta) X_j` and
//! `X_j -> -sin(theta) X_i + cos(theta) X_j` (identically for `P`).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fisher::attenuation_d;
use crate::{HBAR, K_B};

/// Absolute tolerance on covariance symmetry.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Slack on the symplectic eigenvalues in the uncertainty check.
pub const POSITIVITY_TOL: f64 = 1e-9;
/// Tolerance on `det(2 cov) = 1` when a pure state is required.
pub const PURITY_TOL: f64 = 1e-9;

/// First and second moments of an `n`-mode Gaussian state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateRepr", into = "StateRepr")]
pub struct GaussianState {
    n_modes: usize,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

/// JSON form used for fixtures: covariance stored row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct StateRepr {
    n_modes: usize,
    mean: Vec<f64>,
    cov: Vec<f64>,
}

impl From<GaussianState> for StateRepr {
    fn from(s: GaussianState) -> Self {
        let dim = 2 * s.n_modes;
        let mut cov = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                cov.push(s.cov[(r, c)]);
            }
        }
        StateRepr {
            n_modes: s.n_modes,
            mean: s.mean.iter().copied().collect(),
            cov,
        }
    }
}

impl TryFrom<StateRepr> for GaussianState {
    type Error = Error;

    fn try_from(r: StateRepr) -> Result<Self> {
        let dim = 2 * r.n_modes;
        if r.cov.len() != dim * dim {
            return Err(Error::Argument(format!(
                "covariance has {} entries, expected {}",
                r.cov.len(),
                dim * dim
            )));
        }
        let cov = DMatrix::from_row_slice(dim, dim, &r.cov);
        GaussianState::from_moments(r.mean, cov)
    }
}

#[inline]
fn xi(mode: usize) -> usize {
    2 * mode
}

#[inline]
fn pi(mode: usize) -> usize {
    2 * mode + 1
}

/// Standard symplectic form for `n_modes` in `(X, P)` block ordering.
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let dim = 2 * n_modes;
    let mut omega = DMatrix::zeros(dim, dim);
    for m in 0..n_modes {
        omega[(xi(m), pi(m))] = 1.0;
        omega[(pi(m), xi(m))] = -1.0;
    }
    omega
}

/// Embed a 4x4 map acting on `(X_i, P_i, X_j, P_j)` into the full space.
fn embed_two_mode(n_modes: usize, i: usize, j: usize, block: [[f64; 4]; 4]) -> DMatrix<f64> {
    let dim = 2 * n_modes;
    let mut s = DMatrix::identity(dim, dim);
    let idx = [xi(i), pi(i), xi(j), pi(j)];
    for (r, &row) in idx.iter().enumerate() {
        for (c, &col) in idx.iter().enumerate() {
            s[(row, col)] = block[r][c];
        }
    }
    s
}

/// Linear map implemented by [`GaussianState::beam_splitter`].
pub fn beam_splitter_matrix(n_modes: usize, i: usize, j: usize, theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    embed_two_mode(
        n_modes,
        i,
        j,
        [
            [c, 0.0, s, 0.0],
            [0.0, c, 0.0, s],
            [-s, 0.0, c, 0.0],
            [0.0, -s, 0.0, c],
        ],
    )
}

/// Linear map implemented by [`GaussianState::two_mode_squeeze`].
pub fn two_mode_squeeze_matrix(n_modes: usize, i: usize, j: usize, theta2: f64) -> DMatrix<f64> {
    let (sh, ch) = (theta2.sinh(), theta2.cosh());
    embed_two_mode(
        n_modes,
        i,
        j,
        [
            [ch, 0.0, sh, 0.0],
            [0.0, ch, 0.0, -sh],
            [sh, 0.0, ch, 0.0],
            [0.0, -sh, 0.0, ch],
        ],
    )
}

/// Maximal position variance for a single-mode state of mean energy
/// `energy` (units of the oscillator quantum, zero point included).
pub fn squeezed_position_variance(energy: f64) -> Result<f64> {
    if !(energy >= 0.5) || !energy.is_finite() {
        return Err(domain(format!(
            "mean energy must be finite and >= 1/2 (zero point included), got {energy}"
        )));
    }
    Ok(energy + (energy * energy - 0.25).max(0.0).sqrt())
}

/// Squeezing parameter `r` of the momentum-squeezed ground state with mean
/// energy `energy`, i.e. `var(X) = exp(2r) / 2`.
pub fn squeezing_parameter(energy: f64) -> Result<f64> {
    Ok(0.5 * (2.0 * squeezed_position_variance(energy)?).ln())
}

impl GaussianState {
    /// Vacuum on `n_modes` modes.
    pub fn vacuum(n_modes: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::Argument("a state needs at least one mode".into()));
        }
        let dim = 2 * n_modes;
        Ok(Self {
            n_modes,
            mean: DVector::zeros(dim),
            cov: DMatrix::identity(dim, dim) * 0.5,
        })
    }

    /// Build a state from explicit moments, checking symmetry and the
    /// uncertainty relation.
    pub fn from_moments(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::Argument(format!(
                "mean vector length must be a positive even number, got {dim}"
            )));
        }
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(Error::Argument(format!(
                "covariance is {}x{}, expected {dim}x{dim}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(domain("moments must be finite"));
        }
        for r in 0..dim {
            for c in (r + 1)..dim {
                if (cov[(r, c)] - cov[(c, r)]).abs() > SYMMETRY_TOL {
                    return Err(domain(format!("covariance not symmetric at ({r}, {c})")));
                }
            }
        }
        let state = Self {
            n_modes: dim / 2,
            mean: DVector::from_vec(mean),
            cov,
        };
        if !state.is_physical() {
            return Err(domain("covariance violates the uncertainty relation"));
        }
        Ok(state)
    }

    /// Single-mode state from its five moments.
    pub fn single_mode(
        mean_x: f64,
        mean_p: f64,
        var_x: f64,
        var_p: f64,
        cov_xp: f64,
    ) -> Result<Self> {
        let cov = DMatrix::from_row_slice(2, 2, &[var_x, cov_xp, cov_xp, var_p]);
        Self::from_moments(vec![mean_x, mean_p], cov)
    }

    /// Coherent state: displaced vacuum.
    pub fn coherent(mean_x: f64, mean_p: f64) -> Result<Self> {
        Self::single_mode(mean_x, mean_p, 0.5, 0.5, 0.0)
    }

    /// Momentum-squeezed ground state with mean energy `energy`
    /// (`(var X + var P) / 2`, zero point included). This state maximises
    /// the position variance at fixed energy.
    pub fn squeezed_ground(energy: f64) -> Result<Self> {
        let var_x = squeezed_position_variance(energy)?;
        Self::single_mode(0.0, 0.0, var_x, 0.25 / var_x, 0.0)
    }

    /// Pure squeezed state with squeezing `r` along an axis rotated by `phi`
    /// from `X`, displaced to `(mean_x, mean_p)`.
    pub fn squeezed(r: f64, phi: f64, mean_x: f64, mean_p: f64) -> Result<Self> {
        let (s, c) = phi.sin_cos();
        let big = 0.5 * (2.0 * r).exp();
        let small = 0.5 * (-2.0 * r).exp();
        let var_x = c * c * big + s * s * small;
        let var_p = s * s * big + c * c * small;
        let cov_xp = s * c * (big - small);
        Self::single_mode(mean_x, mean_p, var_x, var_p, cov_xp)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.n_modes {
            return Err(Error::ModeOutOfRange {
                index: mode,
                n_modes: self.n_modes,
            });
        }
        Ok(())
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        self.check_mode(i)?;
        self.check_mode(j)?;
        if i == j {
            return Err(Error::Argument(format!(
                "two-mode operation needs distinct modes, got {i} twice"
            )));
        }
        Ok(())
    }

    /// Symplectic eigenvalues, sorted ascending, one per mode. Fails when
    /// the covariance is not positive definite.
    pub fn symplectic_spectrum(&self) -> Result<Vec<f64>> {
        let eig = SymmetricEigen::new(self.cov.clone());
        if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
            return Err(domain("covariance is not positive definite"));
        }
        let sqrt_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
        let root = &eig.eigenvectors * sqrt_diag * eig.eigenvectors.transpose();
        let a = &root * symplectic_form(self.n_modes) * &root;
        let gram = a.transpose() * a;
        let mut nu2: Vec<f64> = SymmetricEigen::new(gram)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        nu2.sort_by(f64::total_cmp);
        // eigenvalues of the Gram matrix come in degenerate pairs
        Ok(nu2
            .chunks(2)
            .map(|pair| (0.5 * (pair[0] + pair[1])).max(0.0).sqrt())
            .collect())
    }

    /// `cov + (i/2) Omega >= 0`, with [`POSITIVITY_TOL`] slack.
    pub fn is_physical(&self) -> bool {
        match self.symplectic_spectrum() {
            Ok(nu) => nu.iter().all(|&v| v >= 0.5 - POSITIVITY_TOL),
            Err(_) => false,
        }
    }

    /// `det(2 cov)`; equal to one exactly for pure states.
    pub fn det2cov(&self) -> f64 {
        (&self.cov * 2.0).determinant()
    }

    /// Purity `tr(rho^2) = 1 / sqrt(det(2 cov))`.
    pub fn purity(&self) -> f64 {
        1.0 / self.det2cov().sqrt()
    }

    pub fn is_pure(&self) -> bool {
        (self.det2cov() - 1.0).abs() <= PURITY_TOL
    }

    /// Apply a linear map `S` to the moments: `mean -> S mean`,
    /// `cov -> S cov S^T`.
    pub fn apply_linear(&self, s: &DMatrix<f64>) -> Result<Self> {
        let dim = 2 * self.n_modes;
        if s.nrows() != dim || s.ncols() != dim {
            return Err(Error::Argument(format!(
                "map is {}x{}, state dimension is {dim}",
                s.nrows(),
                s.ncols()
            )));
        }
        let cov = s * &self.cov * s.transpose();
        Ok(Self {
            n_modes: self.n_modes,
            mean: s * &self.mean,
            cov: symmetrize(cov),
        })
    }

    /// Phase-space displacement of one mode. Covariance is untouched.
    pub fn displace(&self, mode: usize, dx: f64, dp: f64) -> Result<Self> {
        self.check_mode(mode)?;
        let mut out = self.clone();
        out.mean[xi(mode)] += dx;
        out.mean[pi(mode)] += dp;
        Ok(out)
    }

    /// Passive beam splitter between modes `i` and `j` with transmissivity
    /// `cos^2(theta)`.
    pub fn beam_splitter(&self, i: usize, j: usize, theta: f64) -> Result<Self> {
        self.check_pair(i, j)?;
        self.apply_linear(&beam_splitter_matrix(self.n_modes, i, j, theta))
    }

    /// Two-mode squeezer between modes `i` and `j`.
    pub fn two_mode_squeeze(&self, i: usize, j: usize, theta2: f64) -> Result<Self> {
        self.check_pair(i, j)?;
        self.apply_linear(&two_mode_squeeze_matrix(self.n_modes, i, j, theta2))
    }

    /// Thermal loss channel of transmissivity `eta` into a reservoir with
    /// mean occupation `n_thermal`, applied to `mode`.
    pub fn thermal_loss(&self, mode: usize, eta: f64, n_thermal: f64) -> Result<Self> {
        self.check_mode(mode)?;
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(domain(format!(
                "transmissivity must lie in (0, 1], got {eta}"
            )));
        }
        if !(n_thermal >= 0.0) || !n_thermal.is_finite() {
            return Err(domain(format!(
                "thermal occupation must be >= 0, got {n_thermal}"
            )));
        }
        Ok(self.thermal_loss_unchecked(mode, eta, 1.0 - eta, n_thermal))
    }

    /// Loss channel with `eta` in `[0, 1]`; `one_minus_eta` is passed in so
    /// callers holding `exp(-gamma t)` can supply it without cancellation.
    fn thermal_loss_unchecked(
        &self,
        mode: usize,
        eta: f64,
        one_minus_eta: f64,
        n_thermal: f64,
    ) -> Self {
        let mut out = self.clone();
        let root = eta.sqrt();
        let dim = 2 * self.n_modes;
        for q in [xi(mode), pi(mode)] {
            out.mean[q] *= root;
            for k in 0..dim {
                out.cov[(q, k)] *= root;
                out.cov[(k, q)] *= root;
            }
        }
        let added = one_minus_eta * (n_thermal + 0.5);
        out.cov[(xi(mode), xi(mode))] += added;
        out.cov[(pi(mode), pi(mode))] += added;
        out
    }

    /// Evolve `mode` under the resonant force and the thermal reservoir for
    /// a time `t`: loss channel with `eta = exp(-gamma t)` followed by the
    /// momentum displacement `D(eta) F`. The composite channel is the
    /// contract; the ordering only fixes a picture.
    pub fn evolve_forced(&self, mode: usize, params: &OscillatorParams, t: f64) -> Result<Self> {
        self.check_mode(mode)?;
        let channel = ChannelDescriptor::from_params(params, t)?;
        let lossy = self.thermal_loss_unchecked(
            mode,
            channel.eta,
            channel.one_minus_eta,
            params.n_thermal(),
        );
        lossy.displace(mode, 0.0, channel.d_factor * params.force())
    }

    /// Keep only the listed modes, in the given order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::Argument(
                "partial trace must keep at least one mode".into(),
            ));
        }
        for (k, &m) in keep.iter().enumerate() {
            self.check_mode(m)?;
            if keep[..k].contains(&m) {
                return Err(Error::Argument(format!("mode {m} listed twice")));
            }
        }
        let idx: Vec<usize> = keep.iter().flat_map(|&m| [xi(m), pi(m)]).collect();
        let dim = idx.len();
        let mean = DVector::from_iterator(dim, idx.iter().map(|&q| self.mean[q]));
        let cov = DMatrix::from_fn(dim, dim, |r, c| self.cov[(idx[r], idx[c])]);
        Ok(Self {
            n_modes: keep.len(),
            mean,
            cov,
        })
    }

    /// Direct sum `self (+) other`: the product state.
    pub fn tensor(&self, other: &GaussianState) -> Self {
        let (da, db) = (2 * self.n_modes, 2 * other.n_modes);
        let mut mean = DVector::zeros(da + db);
        mean.rows_mut(0, da).copy_from(&self.mean);
        mean.rows_mut(da, db).copy_from(&other.mean);
        let mut cov = DMatrix::zeros(da + db, da + db);
        cov.view_mut((0, 0), (da, da)).copy_from(&self.cov);
        cov.view_mut((da, da), (db, db)).copy_from(&other.cov);
        Self {
            n_modes: self.n_modes + other.n_modes,
            mean,
            cov,
        }
    }

    /// Mean and variance of the momentum quadrature of `mode`.
    pub fn momentum_marginal(&self, mode: usize) -> Result<(f64, f64)> {
        self.check_mode(mode)?;
        Ok((self.mean[pi(mode)], self.cov[(pi(mode), pi(mode))]))
    }

    /// Mean and variance of the position quadrature of `mode`.
    pub fn position_marginal(&self, mode: usize) -> Result<(f64, f64)> {
        self.check_mode(mode)?;
        Ok((self.mean[xi(mode)], self.cov[(xi(mode), xi(mode))]))
    }

    /// Largest absolute difference between the moments of two states with
    /// the same number of modes.
    pub fn max_moment_diff(&self, other: &GaussianState) -> Option<f64> {
        if self.n_modes != other.n_modes {
            return None;
        }
        let dm = (&self.mean - &other.mean).amax();
        let dc = (&self.cov - &other.cov).amax();
        Some(dm.max(dc))
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Build the three-mode purification `(S, R1, R2)` of the forced thermal
/// evolution of a pure single-mode probe: beam splitter `S-R1` at angle
/// `theta1`, two-mode squeezer `S-R2` at `theta2`, then the displacement of
/// `S`. Tracing out the reservoir modes reproduces
/// [`GaussianState::evolve_forced`].
pub fn purified_evolution(
    probe: &GaussianState,
    params: &OscillatorParams,
    t: f64,
) -> Result<GaussianState> {
    if probe.n_modes() != 1 {
        return Err(Error::Precondition(format!(
            "purification needs a single-mode probe, got {} modes",
            probe.n_modes()
        )));
    }
    if !probe.is_pure() {
        return Err(Error::Precondition(format!(
            "purification needs a pure probe, det(2 cov) = {}",
            probe.det2cov()
        )));
    }
    let channel = ChannelDescriptor::from_params(params, t)?;
    probe
        .tensor(&GaussianState::vacuum(2)?)
        .beam_splitter(0, 1, channel.theta1)?
        .two_mode_squeeze(0, 2, channel.theta2)?
        .displace(0, 0.0, channel.d_factor * params.force())
}

/// Physical constants of the probe oscillator and its reservoir.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams {
    mass: f64,
    omega: f64,
    gamma: f64,
    n_thermal: f64,
    force_dimensionless: f64,
    hbar: f64,
}

/// Bose-Einstein occupation `1 / (exp(hbar omega / k_B T) - 1)`; zero at
/// `T = 0`.
pub fn bose_einstein(hbar: f64, omega: f64, k_b: f64, temperature: f64) -> Result<f64> {
    if !(temperature >= 0.0) || !temperature.is_finite() {
        return Err(domain(format!(
            "temperature must be >= 0, got {temperature}"
        )));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    let x = hbar * omega / (k_b * temperature);
    Ok(1.0 / x.exp_m1())
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(domain(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

fn non_negative(name: &str, v: f64) -> Result<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(domain(format!(
            "{name} must be non-negative and finite, got {v}"
        )))
    }
}

impl OscillatorParams {
    /// Oscillator with zero applied force and the CODATA value of hbar.
    pub fn new(mass: f64, omega: f64, gamma: f64, n_thermal: f64) -> Result<Self> {
        Ok(Self {
            mass: positive("mass", mass)?,
            omega: positive("omega", omega)?,
            gamma: non_negative("gamma", gamma)?,
            n_thermal: non_negative("n_thermal", n_thermal)?,
            force_dimensionless: 0.0,
            hbar: HBAR,
        })
    }

    /// Reservoir occupation from a temperature in kelvin.
    pub fn from_temperature(
        mass: f64,
        omega: f64,
        gamma: f64,
        temperature: f64,
        hbar: f64,
        k_b: f64,
    ) -> Result<Self> {
        let hbar = positive("hbar", hbar)?;
        let k_b = positive("k_B", k_b)?;
        let n = bose_einstein(hbar, omega, k_b, temperature)?;
        Self::new(mass, omega, gamma, n)?.with_hbar(hbar)
    }

    /// Same as [`from_temperature`](Self::from_temperature) with CODATA constants.
    pub fn from_temperature_si(
        mass: f64,
        omega: f64,
        gamma: f64,
        temperature: f64,
    ) -> Result<Self> {
        Self::from_temperature(mass, omega, gamma, temperature, HBAR, K_B)
    }

    /// Unit mass and frequency, for purely dimensionless work.
    pub fn dimensionless(omega: f64, gamma: f64, n_thermal: f64, force: f64) -> Result<Self> {
        Ok(Self::new(1.0, omega, gamma, n_thermal)?.with_force(force))
    }

    pub fn with_force(mut self, force_dimensionless: f64) -> Self {
        self.force_dimensionless = force_dimensionless;
        self
    }

    /// Set the force from its physical amplitude in newtons.
    pub fn with_physical_force(self, force_newton: f64) -> Self {
        let scale = self.force_scale();
        self.with_force(force_newton / scale)
    }

    pub fn with_hbar(mut self, hbar: f64) -> Result<Self> {
        self.hbar = positive("hbar", hbar)?;
        Ok(self)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        self.gamma = non_negative("gamma", gamma)?;
        Ok(self)
    }

    pub fn with_n_thermal(mut self, n_thermal: f64) -> Result<Self> {
        self.n_thermal = non_negative("n_thermal", n_thermal)?;
        Ok(self)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n_thermal(&self) -> f64 {
        self.n_thermal
    }

    /// Dimensionless force `F`.
    pub fn force(&self) -> f64 {
        self.force_dimensionless
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// `sqrt(hbar m omega^3)`: newtons per unit dimensionless force.
    pub fn force_scale(&self) -> f64 {
        (self.hbar * self.mass * self.omega.powi(3)).sqrt()
    }

    /// Physical force amplitude `f = F sqrt(hbar m omega^3)`.
    pub fn physical_force(&self) -> f64 {
        self.force_dimensionless * self.force_scale()
    }

    /// `coth(hbar omega / 2 k_B T) = 2 n_T + 1`.
    pub fn thermal_factor(&self) -> f64 {
        2.0 * self.n_thermal + 1.0
    }
}

/// Quantities derived from the reservoir for one probing interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelDescriptor {
    /// Transmissivity `exp(-gamma t)`.
    pub eta: f64,
    /// `1 - eta`, computed without cancellation.
    pub one_minus_eta: f64,
    /// Momentum displacement per unit force, `D(eta)`.
    pub d_factor: f64,
    /// Beam-splitter angle of the purification.
    pub theta1: f64,
    /// Two-mode squeezing angle of the purification.
    pub theta2: f64,
    pub n_thermal: f64,
}

impl ChannelDescriptor {
    pub fn new(omega: f64, gamma: f64, n_thermal: f64, t: f64) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(domain(format!("time must be >= 0, got {t}")));
        }
        non_negative("gamma", gamma)?;
        positive("omega", omega)?;
        let eta = (-gamma * t).exp();
        let one_minus_eta = -(-gamma * t).exp_m1();
        Self::build(
            eta,
            one_minus_eta,
            n_thermal,
            attenuation_d(omega, gamma, t),
        )
    }

    pub fn from_params(params: &OscillatorParams, t: f64) -> Result<Self> {
        Self::new(params.omega(), params.gamma(), params.n_thermal(), t)
    }

    /// Descriptor for a given transmissivity and displacement factor, when
    /// no underlying time is at hand.
    pub fn from_eta(eta: f64, n_thermal: f64, d_factor: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(domain(format!(
                "transmissivity must lie in (0, 1], got {eta}"
            )));
        }
        non_negative("d_factor", d_factor)?;
        Self::build(eta, 1.0 - eta, n_thermal, d_factor)
    }

    fn build(eta: f64, one_minus_eta: f64, n_thermal: f64, d_factor: f64) -> Result<Self> {
        non_negative("n_thermal", n_thermal)?;
        // cos(theta1) = sqrt(eta / c), sin(theta1) = sqrt((1 - eta)(n + 1) / c)
        // with c = n (1 - eta) + 1 = cosh^2(theta2)
        let theta1 = ((one_minus_eta * (n_thermal + 1.0)).sqrt()).atan2(eta.sqrt());
        let theta2 = (n_thermal * one_minus_eta).sqrt().asinh();
        Ok(Self {
            eta,
            one_minus_eta,
            d_factor,
            theta1,
            theta2,
            n_thermal,
        })
    }

    pub fn sqrt_eta(&self) -> f64 {
        self.eta.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(omega: f64, gamma: f64, n: f64, force: f64) -> OscillatorParams {
        OscillatorParams::dimensionless(omega, gamma, n, force).unwrap()
    }

    #[test]
    fn vacuum_moments() {
        let v = GaussianState::vacuum(1).unwrap();
        assert_eq!(v.mean().as_slice(), &[0.0, 0.0]);
        assert_eq!(v.cov(), &(DMatrix::identity(2, 2) * 0.5));
        let v3 = GaussianState::vacuum(3).unwrap();
        assert_eq!(v3.cov(), &(DMatrix::identity(6, 6) * 0.5));
        let nu = v.symplectic_spectrum().unwrap();
        assert_abs_diff_eq!(nu[0], 0.5, epsilon = 1e-15);
        assert!(GaussianState::vacuum(0).is_err());
    }

    #[test]
    fn squeezed_ground_variances() {
        let s = GaussianState::squeezed_ground(0.5).unwrap();
        assert_abs_diff_eq!(s.cov()[(0, 0)], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.cov()[(1, 1)], 0.5, epsilon = 1e-15);

        // oracle: squeeze X -> e^r X applied to the vacuum variance
        let e = 1.25;
        let r = squeezing_parameter(e).unwrap();
        let s = GaussianState::squeezed_ground(e).unwrap();
        assert_abs_diff_eq!(s.cov()[(0, 0)], (5.0 + 21f64.sqrt()) / 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.cov()[(0, 0)], (2.0 * r).exp() * 0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(s.cov()[(0, 0)] * s.cov()[(1, 1)], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(
            0.5 * (s.cov()[(0, 0)] + s.cov()[(1, 1)]),
            e,
            epsilon = 1e-12
        );

        assert!(matches!(
            GaussianState::squeezed_ground(0.49),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn displacement_group_property() {
        let v = GaussianState::vacuum(1).unwrap();
        assert_eq!(v.displace(0, 0.0, 0.0).unwrap(), v);
        let d = v.displace(0, 0.0, 1.3).unwrap();
        assert_eq!(d.momentum_marginal(0).unwrap(), (1.3, 0.5));
        let two = v
            .displace(0, 0.0, 0.4)
            .unwrap()
            .displace(0, 0.0, 0.9)
            .unwrap();
        let one = v.displace(0, 0.0, 1.3).unwrap();
        assert!(two.max_moment_diff(&one).unwrap() < 1e-15);
        assert!(matches!(
            v.displace(1, 0.0, 0.0),
            Err(Error::ModeOutOfRange { .. })
        ));
    }

    #[test]
    fn beam_splitter_limits() {
        let a = GaussianState::squeezed(0.7, 0.3, 1.0, -2.0).unwrap();
        let b = GaussianState::coherent(0.5, 0.25).unwrap();
        let ab = a.tensor(&b);
        assert!(
            ab.beam_splitter(0, 1, 0.0)
                .unwrap()
                .max_moment_diff(&ab)
                .unwrap()
                < 1e-15
        );

        let swapped = ab.beam_splitter(0, 1, std::f64::consts::FRAC_PI_2).unwrap();
        // theta = pi/2: mode 0 <- mode 1, mode 1 <- -mode 0
        let m0 = swapped.partial_trace(&[0]).unwrap();
        let m1 = swapped.partial_trace(&[1]).unwrap();
        assert!(m0.max_moment_diff(&b).unwrap() < 1e-15);
        let neg_a = GaussianState::squeezed(0.7, 0.3, -1.0, 2.0).unwrap();
        assert!(m1.max_moment_diff(&neg_a).unwrap() < 1e-14);

        let vac = GaussianState::vacuum(2).unwrap();
        let out = vac.beam_splitter(0, 1, 0.83).unwrap();
        assert!(out.max_moment_diff(&vac).unwrap() < 1e-15);
        assert!(matches!(
            vac.beam_splitter(1, 1, 0.1),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn two_mode_squeeze_reduced_state_is_thermal() {
        let vac = GaussianState::vacuum(2).unwrap();
        assert_eq!(vac.two_mode_squeeze(0, 1, 0.0).unwrap(), vac);
        let r = 0.6;
        let out = vac.two_mode_squeeze(0, 1, r).unwrap();
        // oracle: explicit 4x4 congruence S (I/2) S^T
        let (ch, sh) = (r.cosh(), r.sinh());
        let s = DMatrix::from_row_slice(
            4,
            4,
            &[
                ch, 0., sh, 0., 0., ch, 0., -sh, sh, 0., ch, 0., 0., -sh, 0., ch,
            ],
        );
        let expect = &s * DMatrix::identity(4, 4) * 0.5 * s.transpose();
        assert!((out.cov() - &expect).amax() < 1e-14);
        for m in 0..2 {
            let red = out.partial_trace(&[m]).unwrap();
            assert_abs_diff_eq!(red.cov()[(0, 0)], (2.0 * r).cosh() / 2.0, epsilon = 1e-14);
            assert_abs_diff_eq!(red.cov()[(1, 1)], (2.0 * r).cosh() / 2.0, epsilon = 1e-14);
            assert!(red.det2cov() > 1.0);
        }
        assert!(out.is_pure());
        assert!(vac.two_mode_squeeze(0, 0, 0.2).is_err());
    }

    #[test]
    fn thermal_loss_examples() {
        let s = GaussianState::single_mode(0.3, -0.7, 5.0, 5.0, 0.0).unwrap();
        assert_eq!(s.thermal_loss(0, 1.0, 3.0).unwrap(), s);
        let vac = GaussianState::vacuum(1).unwrap();
        let out = vac.thermal_loss(0, 0.37, 0.0).unwrap();
        assert!(out.max_moment_diff(&vac).unwrap() < 1e-15);
        let out = s.thermal_loss(0, 0.5, 2.0).unwrap();
        assert_abs_diff_eq!(out.cov()[(1, 1)], 3.75, epsilon = 1e-14);
        assert_abs_diff_eq!(out.cov()[(0, 0)], 3.75, epsilon = 1e-14);
        assert_abs_diff_eq!(out.mean()[1], -0.7 * 0.5f64.sqrt(), epsilon = 1e-15);
        assert!(matches!(s.thermal_loss(0, 0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(s.thermal_loss(0, 1.2, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn thermal_loss_scales_cross_covariance() {
        let two = GaussianState::vacuum(2)
            .unwrap()
            .two_mode_squeeze(0, 1, 0.5)
            .unwrap();
        let out = two.thermal_loss(0, 0.64, 1.0).unwrap();
        assert_abs_diff_eq!(out.cov()[(0, 2)], 0.8 * two.cov()[(0, 2)], epsilon = 1e-15);
        assert_abs_diff_eq!(out.cov()[(3, 1)], 0.8 * two.cov()[(3, 1)], epsilon = 1e-15);
        assert_abs_diff_eq!(out.cov()[(2, 2)], two.cov()[(2, 2)], epsilon = 1e-15);
    }

    #[test]
    fn evolve_forced_examples() {
        let vac = GaussianState::vacuum(1).unwrap();
        let p = params(1.0, 1.0, 0.0, 0.0);
        for t in [0.0, 0.5, 3.0, 40.0] {
            let out = vac.evolve_forced(0, &p, t).unwrap();
            assert!(out.max_moment_diff(&vac).unwrap() < 1e-15);
        }
        // noiseless limit: displacement omega F t / 2
        let p0 = params(2.0, 0.0, 0.0, 0.7);
        let out = vac.evolve_forced(0, &p0, 3.0).unwrap();
        assert_abs_diff_eq!(out.mean()[1], 2.0 * 0.7 * 3.0 / 2.0, epsilon = 1e-14);
        assert!((out.cov() - vac.cov()).amax() < 1e-15);

        let p1 = params(1.0, 1.0, 0.0, 1.0);
        let out = vac.evolve_forced(0, &p1, 2f64.ln()).unwrap();
        let (m, v) = out.momentum_marginal(0).unwrap();
        assert_abs_diff_eq!(m, 1.0 - 0.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.5, epsilon = 1e-15);
        assert!(vac.evolve_forced(0, &p1, -1.0).is_err());
    }

    #[test]
    fn evolve_forced_reaches_steady_state() {
        let p = params(3.0, 0.5, 1.5, 0.2);
        let a = GaussianState::squeezed(1.0, 0.4, 2.0, -3.0).unwrap();
        let b = GaussianState::vacuum(1).unwrap();
        for s in [a, b] {
            let out = s.evolve_forced(0, &p, 200.0).unwrap();
            let (m, v) = out.momentum_marginal(0).unwrap();
            assert_abs_diff_eq!(m, 3.0 * 0.2 / 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(v, (2.0 * 1.5 + 1.0) / 2.0, epsilon = 1e-12);
            // far beyond the exp underflow the channel still evaluates
            let far = s.evolve_forced(0, &p, 1e5).unwrap();
            assert_abs_diff_eq!(far.momentum_marginal(0).unwrap().1, 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn purification_limits() {
        let probe = GaussianState::squeezed(0.4, 0.9, 0.1, 0.2).unwrap();
        let p = params(1.0, 1.0, 0.0, 0.5);
        let c = ChannelDescriptor::from_params(&p, 0.8).unwrap();
        assert_eq!(c.theta2, 0.0);
        assert_abs_diff_eq!(c.theta1.cos(), c.eta.sqrt(), epsilon = 1e-15);

        let at_zero = purified_evolution(&probe, &p, 0.0).unwrap();
        let expect = probe.tensor(&GaussianState::vacuum(2).unwrap());
        assert!(at_zero.max_moment_diff(&expect).unwrap() < 1e-15);

        let p = params(1.0, 1.0, 2.0, 1.0);
        let vac = GaussianState::vacuum(1).unwrap();
        let full = purified_evolution(&vac, &p, 2f64.ln()).unwrap();
        assert!(full.is_pure());
        let red = full.partial_trace(&[0]).unwrap();
        assert_abs_diff_eq!(
            red.cov()[(1, 1)],
            0.5 * 0.5 + 5.0 * 0.5 / 2.0,
            epsilon = 1e-13
        );
        assert_abs_diff_eq!(red.mean()[1], 1.0 - 0.5f64.sqrt(), epsilon = 1e-15);

        let mixed = GaussianState::single_mode(0.0, 0.0, 1.0, 1.0, 0.0).unwrap();
        assert!(matches!(
            purified_evolution(&mixed, &p, 1.0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn partial_trace_cases() {
        let a = GaussianState::squeezed(0.3, 0.0, 1.0, 0.0).unwrap();
        let b = GaussianState::coherent(-1.0, 2.0).unwrap();
        let ab = a.tensor(&b);
        assert_eq!(ab.partial_trace(&[0, 1]).unwrap(), ab);
        assert_eq!(ab.partial_trace(&[0]).unwrap(), a);
        assert_eq!(ab.partial_trace(&[1]).unwrap(), b);
        assert!(ab.partial_trace(&[]).is_err());
        assert!(ab.partial_trace(&[2]).is_err());
        assert!(ab.partial_trace(&[1, 1]).is_err());
    }

    #[test]
    fn channel_descriptor_invariants() {
        for &(gamma, n, t) in &[(1.0, 0.0, 0.3), (0.2, 3.0, 2.0), (5.0, 0.5, 0.01)] {
            let c = ChannelDescriptor::new(2.0, gamma, n, t).unwrap();
            assert_abs_diff_eq!(c.eta, (-gamma * t).exp(), epsilon = 1e-15);
            assert_abs_diff_eq!(
                c.d_factor,
                2.0 / gamma * (1.0 - c.eta.sqrt()),
                epsilon = 1e-14
            );
            let cc = n * (1.0 - c.eta) + 1.0;
            assert_abs_diff_eq!(c.theta1.cos(), (c.eta / cc).sqrt(), epsilon = 1e-14);
            assert_abs_diff_eq!(c.theta2.cosh(), cc.sqrt(), epsilon = 1e-14);
        }
        let c = ChannelDescriptor::new(2.0, 0.0, 1.0, 3.0).unwrap();
        assert_eq!(c.d_factor, 3.0);
        assert_eq!(c.eta, 1.0);
    }

    #[test]
    fn bose_einstein_matches_cotanh() {
        let (omega, t) = (2.0 * std::f64::consts::PI * 1e6, 1e-4);
        let p = OscillatorParams::from_temperature_si(1e-25, omega, 10.0, t).unwrap();
        let x = HBAR * omega / (2.0 * K_B * t);
        let coth = 1.0 / x.tanh();
        assert!((p.thermal_factor() - coth).abs() / coth < 1e-12);
        let cold = OscillatorParams::from_temperature_si(1e-25, omega, 10.0, 0.0).unwrap();
        assert_eq!(cold.n_thermal(), 0.0);
        assert!(OscillatorParams::new(0.0, 1.0, 1.0, 0.0).is_err());
        assert!(OscillatorParams::new(1.0, 1.0, -1.0, 0.0).is_err());
        assert!(OscillatorParams::new(1.0, 1.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn physical_force_round_trip() {
        let p = OscillatorParams::new(1e-25, 6e6, 10.0, 0.0)
            .unwrap()
            .with_physical_force(3e-21);
        assert!((p.physical_force() - 3e-21).abs() < 1e-33);
        assert!((p.force() * (HBAR * 1e-25 * 6e6f64.powi(3)).sqrt() - 3e-21).abs() < 1e-33);
    }

    #[test]
    fn json_fixture_round_trip() {
        let s = GaussianState::vacuum(2)
            .unwrap()
            .two_mode_squeeze(0, 1, 0.3)
            .unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.starts_with("{\"n_modes\":2,\"mean\":[0.0,0.0,0.0,0.0],\"cov\":["));
        let back: GaussianState = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        let bad = r#"{"n_modes":1,"mean":[0.0,0.0],"cov":[0.1,0.0,0.0,0.1]}"#;
        assert!(serde_json::from_str::<GaussianState>(bad).is_err());
    }
}
