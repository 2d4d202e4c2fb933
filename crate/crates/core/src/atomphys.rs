//! Four-level Rydberg atomic response.
//!
//! The ladder |1> -probe-> |2> -coupling-> |3> -RF-> |4> is driven in the
//! rotating-wave approximation with decay gamma2 on |2> -> |1>. The steady
//! state of the Lindblad master equation yields the probe-transition
//! coherence rho21, which scales into the macroscopic susceptibility chi.
//! The imaginary part of chi attenuates the probe (Lambert-Beer) and the
//! real part shifts its phase; the derivative chi' with respect to the RF
//! Rabi frequency sets the atomic responsivity around the local-oscillator
//! operating point.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{self, CMat};

/// CODATA physical constants (SI).
pub mod constants {
    /// Reduced Planck constant (J s).
    pub const HBAR: f64 = 1.054_571_817e-34;
    /// Vacuum permittivity (F/m).
    pub const EPSILON_0: f64 = 8.854_187_8188e-12;
    /// Speed of light in vacuum (m/s).
    pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
    /// Free-space impedance (ohm).
    pub const VACUUM_IMPEDANCE: f64 = 376.730_313_412;
    /// Elementary charge (C).
    pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
    /// Boltzmann constant (J/K).
    pub const BOLTZMANN: f64 = 1.380_649e-23;
}

/// Wrap an angle to the interval (-pi, pi].
pub fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut y = x.rem_euclid(two_pi);
    if y > std::f64::consts::PI {
        y -= two_pi;
    }
    y
}

/// Atom and vapour-cell constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomicSystem {
    /// Spontaneous decay rate of |2> (rad/s).
    pub gamma2: f64,
    /// Spontaneous decay rate of |3> (rad/s, cascades |3> -> |2>).
    pub gamma3: f64,
    /// Spontaneous decay rate of |4> (rad/s, cascades |4> -> |3>).
    pub gamma4: f64,
    /// Transit relaxation rate (rad/s, uniform dephasing of excited levels).
    pub gamma: f64,
    /// Collisional relaxation rate (rad/s, uniform dephasing of excited levels).
    pub gamma_c: f64,
    /// Dipole moment of |1> -> |2> (C m).
    pub mu12: f64,
    /// Dipole moment of |3> -> |4> (C m).
    pub mu34: f64,
    /// Atomic density (m^-3).
    pub n0: f64,
    /// Excitation fraction (dimensionless, 0 < upsilon <= 1).
    pub upsilon: f64,
    /// Vapour-cell length (m).
    pub cell_length: f64,
}

impl AtomicSystem {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma2 > 0.0) {
            return Err(Error::invalid("gamma2 must be positive"));
        }
        if self.gamma3 < 0.0 || self.gamma4 < 0.0 || self.gamma < 0.0 || self.gamma_c < 0.0 {
            return Err(Error::invalid("relaxation rates must be nonnegative"));
        }
        if !(self.mu12 > 0.0) || !(self.mu34 > 0.0) {
            return Err(Error::invalid("dipole moments must be positive"));
        }
        if !(self.n0 > 0.0) {
            return Err(Error::invalid("atomic density must be positive"));
        }
        if !(self.upsilon > 0.0 && self.upsilon <= 1.0) {
            return Err(Error::invalid("excitation fraction must be in (0, 1]"));
        }
        if !(self.cell_length > 0.0) {
            return Err(Error::invalid("cell length must be positive"));
        }
        Ok(())
    }

    /// Effective density of participating atoms, upsilon * n0 (m^-3).
    pub fn effective_density(&self) -> f64 {
        self.upsilon * self.n0
    }
}

/// Probe/coupling/LO drive parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OpticalRfConfig {
    /// Probe Rabi frequency (rad/s).
    pub omega_p: f64,
    /// Coupling Rabi frequency (rad/s).
    pub omega_c: f64,
    /// Local-oscillator Rabi frequency (rad/s), the chi' operating point.
    pub omega_l: f64,
    /// Probe detuning (rad/s).
    pub delta_p: f64,
    /// Coupling detuning (rad/s).
    pub delta_c: f64,
    /// LO detuning (rad/s).
    pub delta_l: f64,
    /// Probe wavelength (m).
    pub lambda_p: f64,
    /// Probe optical frequency (Hz).
    pub f_p: f64,
    /// Probe field amplitude at the cell input.
    pub probe_amp_in: f64,
    /// Probe phase at the cell input (rad).
    pub probe_phase_in: f64,
    /// Probe beam full width at half maximum (m).
    pub fwhm_p: f64,
    /// Beam radius defining the sensor cylinder (m).
    pub beam_radius: f64,
}

impl OpticalRfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.omega_p < 0.0 || self.omega_c < 0.0 || self.omega_l < 0.0 {
            return Err(Error::invalid("Rabi frequencies must be nonnegative"));
        }
        if !(self.lambda_p > 0.0) {
            return Err(Error::invalid("probe wavelength must be positive"));
        }
        if !(self.fwhm_p > 0.0) {
            return Err(Error::invalid("probe FWHM must be positive"));
        }
        if !(self.beam_radius > 0.0) {
            return Err(Error::invalid("beam radius must be positive"));
        }
        Ok(())
    }
}

/// Susceptibility and its derivative at the LO operating point.
#[derive(Debug, Clone, Copy)]
pub struct Susceptibility {
    /// chi (dimensionless).
    pub value: Complex64,
    /// d chi / d Omega_RF at Omega_l (s).
    pub derivative: Complex64,
}

/// Real coefficients of the rational susceptibility form
/// chi = varsigma * [(a1 w^4 + a2 w^2 + a3) - j (b1 w^4 + b2 w^2 + b3)]
///              / (c1 w^4 + c2 w^2 + c3).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RationalCoefficients {
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub c: [f64; 3],
    pub varsigma: f64,
}

impl RationalCoefficients {
    fn denominator(&self, omega_rf: f64) -> f64 {
        let w2 = omega_rf * omega_rf;
        self.c[0] * w2 * w2 + self.c[1] * w2 + self.c[2]
    }
}

/// Lindblad superoperator for Hamiltonian `h` (units of rad/s) and collapse
/// operators `collapses`, acting on column-major vectorized density matrices.
pub fn lindblad_superoperator(h: &CMat, collapses: &[CMat]) -> CMat {
    let n = h.nrows();
    let id = CMat::identity(n, n);
    let i_unit = Complex64::new(0.0, 1.0);
    let mut l = (numkernel::kron(&id, h) - numkernel::kron(&h.transpose(), &id)) * (-i_unit);
    for c in collapses {
        let chc = c.adjoint() * c;
        l += numkernel::kron(&c.map(|z| z.conj()), c)
            - (numkernel::kron(&id, &chc) + numkernel::kron(&chc.transpose(), &id))
                * Complex64::new(0.5, 0.0);
    }
    l
}

/// Number of ladder levels reachable from the ground state.
///
/// A Rabi frequency of exactly zero cuts the chain: the levels above carry
/// no population in the long-time limit and would otherwise leave the
/// Lindbladian with a degenerate null space (gamma3 = gamma4 = 0).
fn active_levels(cfg: &OpticalRfConfig, omega_rf: f64) -> usize {
    if cfg.omega_c == 0.0 {
        2
    } else if omega_rf == 0.0 {
        3
    } else {
        4
    }
}

fn ladder_hamiltonian(cfg: &OpticalRfConfig, omega_rf: f64, n: usize) -> CMat {
    let rabi = [cfg.omega_p, cfg.omega_c, omega_rf];
    let cumulative = [
        0.0,
        cfg.delta_p,
        cfg.delta_p + cfg.delta_c,
        cfg.delta_p + cfg.delta_c + cfg.delta_l,
    ];
    let mut h = CMat::zeros(n, n);
    for (i, item) in cumulative.iter().enumerate().take(n) {
        h[(i, i)] = Complex64::new(-item, 0.0);
    }
    for i in 0..n - 1 {
        let coupling = Complex64::new(-rabi[i] / 2.0, 0.0);
        h[(i, i + 1)] = coupling;
        h[(i + 1, i)] = coupling;
    }
    h
}

fn collapse_operators(sys: &AtomicSystem, n: usize) -> Vec<CMat> {
    let mut ops = Vec::new();
    let mut decay = |rate: f64, lower: usize, upper: usize| {
        if rate > 0.0 && upper < n {
            let mut c = CMat::zeros(n, n);
            c[(lower, upper)] = Complex64::new(rate.sqrt(), 0.0);
            ops.push(c);
        }
    };
    decay(sys.gamma2, 0, 1);
    decay(sys.gamma3, 1, 2);
    decay(sys.gamma4, 2, 3);
    let dephasing = sys.gamma + sys.gamma_c;
    if dephasing > 0.0 {
        for i in 1..n {
            let mut c = CMat::zeros(n, n);
            c[(i, i)] = Complex64::new((2.0 * dephasing).sqrt(), 0.0);
            ops.push(c);
        }
    }
    ops
}

fn steady_state_active(
    sys: &AtomicSystem,
    cfg: &OpticalRfConfig,
    omega_rf: f64,
) -> Result<CMat> {
    let n = active_levels(cfg, omega_rf);
    let h = ladder_hamiltonian(cfg, omega_rf, n);
    let l = lindblad_superoperator(&h, &collapse_operators(sys, n));
    let x = numkernel::solve_steady_null(&l)?;
    let mut rho = CMat::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            rho[(i, j)] = x[j * n + i];
        }
    }
    Ok(rho)
}

/// Steady state of the four-level ladder, always returned as 4x4
/// (unreachable levels hold zero population).
pub fn lindblad_steady_state(
    sys: &AtomicSystem,
    cfg: &OpticalRfConfig,
    omega_rf: f64,
) -> Result<CMat> {
    sys.validate()?;
    cfg.validate()?;
    if omega_rf < 0.0 {
        return Err(Error::invalid("omega_rf must be nonnegative"));
    }
    let rho_active = steady_state_active(sys, cfg, omega_rf)?;
    let n = rho_active.nrows();

    let mut rho = CMat::zeros(4, 4);
    rho.view_mut((0, 0), (n, n)).copy_from(&rho_active);

    // The exact steady state is Hermitian; enforce it and fail loudly when
    // the solve strayed.
    let herm_dev = (&rho - rho.adjoint()).norm();
    if herm_dev > 1e-10 {
        return Err(Error::NumericalFailure(format!(
            "steady state not Hermitian (deviation {herm_dev:.3e})"
        )));
    }
    rho = (rho.clone() + rho.adjoint()) * Complex64::new(0.5, 0.0);
    let trace: Complex64 = (0..4).map(|i| rho[(i, i)]).sum();
    rho /= trace;

    let eigs = numkernel::hermitian_eigenvalues(&rho)?;
    if eigs[0] < -1e-10 {
        return Err(Error::NumericalFailure(format!(
            "steady state not PSD (min eigenvalue {:.3e})",
            eigs[0]
        )));
    }
    Ok(rho)
}

fn chi_scale(sys: &AtomicSystem) -> f64 {
    // Macroscopic scale |varsigma| = 2 Nbar mu12^2 / (eps0 hbar), with the
    // effective density Nbar = upsilon * n0 of prepared atoms and the branch
    // fixed so that imag(chi) >= 0 (absorption).
    2.0 * sys.effective_density() * sys.mu12 * sys.mu12
        / (constants::EPSILON_0 * constants::HBAR)
}

/// Susceptibility from the Lindblad steady state, chi = varsigma * rho21 / Omega_p.
pub fn susceptibility(
    sys: &AtomicSystem,
    cfg: &OpticalRfConfig,
    omega_rf: f64,
) -> Result<Complex64> {
    if cfg.omega_p <= 0.0 {
        return Err(Error::invalid(
            "susceptibility requires a nonzero probe Rabi frequency",
        ));
    }
    let rho = lindblad_steady_state(sys, cfg, omega_rf)?;
    let rho21 = rho[(1, 0)];
    Ok(rho21 * (chi_scale(sys) / cfg.omega_p))
}

/// Susceptibility from caller-supplied rational coefficients.
pub fn susceptibility_rational(rc: &RationalCoefficients, omega_rf: f64) -> Result<Complex64> {
    let denom = rc.denominator(omega_rf);
    if denom == 0.0 {
        return Err(Error::invalid(
            "rational susceptibility denominator vanishes at this omega_rf",
        ));
    }
    let w2 = omega_rf * omega_rf;
    let num_re = rc.a[0] * w2 * w2 + rc.a[1] * w2 + rc.a[2];
    let num_im = rc.b[0] * w2 * w2 + rc.b[1] * w2 + rc.b[2];
    Ok(Complex64::new(
        rc.varsigma * num_re / denom,
        -rc.varsigma * num_im / denom,
    ))
}

/// d chi / d Omega_RF at Omega_l by adaptive central differences with one
/// Richardson refinement step (relative step 1e-4, refined until stable to
/// 1e-8 relative).
pub fn susceptibility_derivative(
    sys: &AtomicSystem,
    cfg: &OpticalRfConfig,
    omega_l: f64,
) -> Result<Complex64> {
    if !(omega_l > 0.0) {
        return Err(Error::invalid("omega_l must be positive"));
    }
    let central = |h: f64| -> Result<Complex64> {
        let hi = susceptibility(sys, cfg, omega_l + h)?;
        let lo = susceptibility(sys, cfg, omega_l - h)?;
        Ok((hi - lo) / Complex64::new(2.0 * h, 0.0))
    };
    let mut h = 1e-4 * omega_l;
    if omega_l + h == omega_l {
        return Err(Error::NumericalFailure(
            "finite-difference step underflowed".into(),
        ));
    }
    let richardson = |d_h: Complex64, d_h2: Complex64| {
        (d_h2 * Complex64::new(4.0, 0.0) - d_h) / Complex64::new(3.0, 0.0)
    };
    let mut d_prev = central(h)?;
    let mut d_half = central(h / 2.0)?;
    let mut refined = richardson(d_prev, d_half);
    for _ in 0..6 {
        h /= 2.0;
        if omega_l + h / 2.0 == omega_l {
            return Err(Error::NumericalFailure(
                "finite-difference step underflowed".into(),
            ));
        }
        d_prev = d_half;
        d_half = central(h / 2.0)?;
        let next = richardson(d_prev, d_half);
        if (next - refined).norm() <= 1e-8 * next.norm().max(f64::MIN_POSITIVE) {
            return Ok(next);
        }
        refined = next;
    }
    Ok(refined)
}

/// Closed-form derivative of the rational susceptibility.
pub fn susceptibility_derivative_rational(
    rc: &RationalCoefficients,
    omega_l: f64,
) -> Result<Complex64> {
    let denom = rc.denominator(omega_l);
    if denom == 0.0 {
        return Err(Error::invalid(
            "rational susceptibility denominator vanishes at omega_l",
        ));
    }
    let w2 = omega_l * omega_l;
    let num_a = rc.a[0] * w2 * w2 + rc.a[1] * w2 + rc.a[2];
    let num_b = rc.b[0] * w2 * w2 + rc.b[1] * w2 + rc.b[2];
    let dnum_a = 2.0 * rc.a[0] * w2 + rc.a[1];
    let dnum_b = 2.0 * rc.b[0] * w2 + rc.b[1];
    let ddenom = 2.0 * rc.c[0] * w2 + rc.c[1];
    let re = 2.0 * rc.varsigma * omega_l * (dnum_a / denom - num_a * ddenom / (denom * denom));
    let im = -2.0 * rc.varsigma * omega_l * (dnum_b / denom - num_b * ddenom / (denom * denom));
    Ok(Complex64::new(re, im))
}

/// Probe beam state at the cell output.
#[derive(Debug, Clone, Copy)]
pub struct ProbeOutput {
    /// Output field amplitude (same units as the input amplitude).
    pub amp: f64,
    /// Output phase (rad).
    pub phase: f64,
    /// Output optical power (W).
    pub power: f64,
}

/// Lambert-Beer transformation of the probe through the cell.
pub fn probe_output(sys: &AtomicSystem, cfg: &OpticalRfConfig, chi: Complex64) -> ProbeOutput {
    let opt = std::f64::consts::PI * sys.cell_length / cfg.lambda_p;
    let amp = cfg.probe_amp_in * (-opt * chi.im).exp();
    let phase = cfg.probe_phase_in + opt * chi.re;
    let power = probe_power(cfg, amp);
    ProbeOutput { amp, phase, power }
}

/// Optical power of a probe beam with field amplitude `amp` and the
/// configured FWHM.
pub fn probe_power(cfg: &OpticalRfConfig, amp: f64) -> f64 {
    std::f64::consts::PI * constants::SPEED_OF_LIGHT * constants::EPSILON_0
        / (8.0 * std::f64::consts::LN_2)
        * cfg.fwhm_p
        * cfg.fwhm_p
        * amp
        * amp
}

/// Atomic responsivity kappa = alpha2 |chi'| with alpha2 = pi l mu34 / (hbar lambda_p).
pub fn responsivity(sys: &AtomicSystem, cfg: &OpticalRfConfig, chi_deriv: Complex64) -> f64 {
    let alpha2 =
        std::f64::consts::PI * sys.cell_length * sys.mu34 / (constants::HBAR * cfg.lambda_p);
    alpha2 * chi_deriv.norm()
}

/// Superimposed detection phase.
///
/// Returns (varphi, psi_p): psi_p = arccos(Im{chi'} / |chi'|) and
/// varphi = local_phase - probe_phase_out + psi_p, wrapped to (-pi, pi].
pub fn detection_phase(
    local_phase: f64,
    chi_deriv: Complex64,
    probe_phase_out: f64,
) -> Result<(f64, f64)> {
    let norm = chi_deriv.norm();
    if norm == 0.0 {
        return Err(Error::UndefinedPhase(
            "chi' = 0: detection phase undefined".into(),
        ));
    }
    let psi = (chi_deriv.im / norm).clamp(-1.0, 1.0).acos();
    let varphi = wrap_angle(local_phase - probe_phase_out + psi);
    Ok((varphi, psi))
}
