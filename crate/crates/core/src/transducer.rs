//! Balanced coherent optical detection front end.
//!
//! Converts the atomic response at the LO operating point into the
//! per-sensor gain rho, the reference phase factor Phi, and the PSL/SQL
//! noise coefficient varpi that sets the snapshot noise power.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::arraymodel::ArrayGeometry;
use crate::atomphys::{self, constants, AtomicSystem, OpticalRfConfig, ProbeOutput};
use crate::error::{Error, Result};

/// Photodetector / local-optical-beam parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhotodetectorConfig {
    /// Quantum efficiency (0, 1].
    pub eta: f64,
    /// Electron charge used in the responsivity (C).
    pub q_charge: f64,
    /// LNA gain (dimensionless).
    pub lna_gain: f64,
    /// Local optical beam power (W).
    pub local_beam_power: f64,
    /// Local optical beam phase policy.
    pub local_beam_phase: LocalPhase,
    /// Probe angular frequency omega_p = 2 pi f_p (rad/s).
    pub omega_p_angular: f64,
}

impl PhotodetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::invalid("quantum efficiency must be in (0, 1]"));
        }
        if !(self.lna_gain > 0.0) {
            return Err(Error::invalid("LNA gain must be positive"));
        }
        if !(self.local_beam_power > 0.0) {
            return Err(Error::invalid("local beam power must be positive"));
        }
        if !(self.omega_p_angular > 0.0) {
            return Err(Error::invalid("probe angular frequency must be positive"));
        }
        Ok(())
    }
}

/// How the local optical beam phase is chosen.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "value")]
pub enum LocalPhase {
    /// phi_l = phi_p(Omega_l) - psi_p, so that varphi = 0 and the PSL noise
    /// coefficient is at its minimum.
    PslOptimal,
    /// Explicit local beam phase (rad).
    Fixed(f64),
    /// Force the superimposed phase varphi itself (rad); used by the phase
    /// sweep.
    ForcedVarphi(f64),
}

/// RF local-oscillator configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoConfig {
    /// LO Rabi frequency (rad/s).
    pub omega_l: f64,
    /// LO carrier frequency (Hz).
    pub f_l: f64,
    /// LO phase at the reference sensor (rad).
    pub theta_l1: f64,
    /// LO direction of arrival (rad), known by design.
    pub vartheta: f64,
    /// LO detuning (rad/s).
    pub delta_l: f64,
}

impl LoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_l > 0.0) {
            return Err(Error::invalid("LO Rabi frequency must be positive"));
        }
        if self.vartheta.abs() >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::invalid("LO DOA must lie in (-pi/2, pi/2)"));
        }
        Ok(())
    }
}

/// Composite per-sensor response at the operating point.
#[derive(Debug, Clone, Copy)]
pub struct SensorResponse {
    /// Gain rho = 4 alpha1^2 Z0 G P_l P(Omega_l) kappa^2(Omega_l).
    pub rho: f64,
    /// Reference-sensor phase factor Phi = cos(varphi) e^{-j theta_l1}.
    pub phi_ref: Complex64,
    /// Atomic responsivity kappa(Omega_l).
    pub kappa: f64,
    /// Superimposed detection phase varphi(Omega_l) (rad).
    pub varphi: f64,
}

/// alpha1 = eta q / (hbar omega_p).
pub fn alpha1(pd: &PhotodetectorConfig) -> f64 {
    pd.eta * pd.q_charge / (constants::HBAR * pd.omega_p_angular)
}

/// Per-sensor gain rho.
pub fn sensor_gain(pd: &PhotodetectorConfig, probe_power_out: f64, kappa: f64) -> f64 {
    let a1 = alpha1(pd);
    4.0 * a1 * a1
        * constants::VACUUM_IMPEDANCE
        * pd.lna_gain
        * pd.local_beam_power
        * probe_power_out
        * kappa
        * kappa
}

/// Reference-sensor phase factor,
/// Phi = e^{-j(theta_l1 - varphi)}/2 + e^{-j(theta_l1 + varphi)}/2.
pub fn reference_phase(theta_l1: f64, varphi: f64) -> Complex64 {
    (Complex64::from_polar(1.0, -(theta_l1 - varphi))
        + Complex64::from_polar(1.0, -(theta_l1 + varphi)))
        * Complex64::new(0.5, 0.0)
}

/// LO phase at sensor `m` (1-based): theta_l1 + (2 pi / lambda) d (m-1) sin(vartheta).
pub fn lo_phase_at_sensor(m: usize, lo: &LoConfig, geom: &ArrayGeometry) -> f64 {
    lo.theta_l1
        + 2.0 * std::f64::consts::PI / geom.carrier_wavelength
            * geom.spacing
            * (m as f64 - 1.0)
            * lo.vartheta.sin()
}

/// Per-sensor phase factor in the factored form
/// Phi_m = Phi e^{-j (2 pi / lambda) d (m-1) sin(vartheta)}.
pub fn sensor_phase(
    m: usize,
    lo: &LoConfig,
    varphi: f64,
    geom: &ArrayGeometry,
) -> Result<Complex64> {
    if m < 1 || m > geom.m_sensors {
        return Err(Error::invalid(format!(
            "sensor index {m} out of range 1..={}",
            geom.m_sensors
        )));
    }
    let gradient = 2.0 * std::f64::consts::PI / geom.carrier_wavelength
        * geom.spacing
        * (m as f64 - 1.0)
        * lo.vartheta.sin();
    Ok(reference_phase(lo.theta_l1, varphi) * Complex64::from_polar(1.0, -gradient))
}

/// Per-sensor phase factor evaluated directly from the per-sensor LO phase
/// (the unfactored form); numerically identical to [`sensor_phase`].
pub fn sensor_phase_direct(
    m: usize,
    lo: &LoConfig,
    varphi: f64,
    geom: &ArrayGeometry,
) -> Result<Complex64> {
    if m < 1 || m > geom.m_sensors {
        return Err(Error::invalid(format!(
            "sensor index {m} out of range 1..={}",
            geom.m_sensors
        )));
    }
    let theta_lm = lo_phase_at_sensor(m, lo, geom);
    Ok(reference_phase(theta_lm, varphi))
}

/// Noise regime of the quantum receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseRegime {
    /// Photon shot limit.
    Psl,
    /// Standard quantum limit.
    Sql,
}

/// Operating-point quantities the noise coefficient depends on.
#[derive(Debug, Clone, Copy)]
pub struct NoiseBasis {
    /// Signal bandwidth B (Hz).
    pub bandwidth: f64,
    /// Output probe power P(Omega_l) (W).
    pub probe_power_out: f64,
    /// Probe photon energy hbar omega_p (J).
    pub photon_energy: f64,
    /// Responsivity kappa(Omega_l).
    pub kappa: f64,
    /// Detection phase varphi(Omega_l) (rad).
    pub varphi: f64,
    /// Effective atomic density upsilon N0 (m^-3).
    pub effective_density: f64,
    /// Sensor cylinder volume pi r^2 l (m^3).
    pub sensor_volume: f64,
    /// Total dephasing rate Gamma2 (rad/s).
    pub gamma2_total: f64,
    /// Dipole moment mu34 (C m).
    pub mu34: f64,
}

/// Cylindrical sensor volume from the configured beam radius.
pub fn sensor_volume(sys: &AtomicSystem, cfg: &OpticalRfConfig) -> f64 {
    std::f64::consts::PI * cfg.beam_radius * cfg.beam_radius * sys.cell_length
}

/// Noise coefficient varpi for the requested regime.
///
/// PSL: varpi = B / (2 N Phi_flux kappa^2 cos^2 varphi), with the probe
/// power expressed as a photon flux Phi_flux = P(Omega_l) / (hbar omega_p).
/// SQL: varpi = (1 / (4 Z0 N)) (hbar / mu34)^2 (Gamma2 / (Nbar V)) B.
///
/// With `unbounded_as_inf`, a PSL divergence (cos varphi = 0) returns
/// +infinity instead of an error so sweeps can plot it.
pub fn noise_coefficient(
    regime: NoiseRegime,
    n_samples: usize,
    basis: &NoiseBasis,
    unbounded_as_inf: bool,
) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be at least 1"));
    }
    if !(basis.bandwidth > 0.0) {
        return Err(Error::invalid("bandwidth must be positive"));
    }
    let n = n_samples as f64;
    match regime {
        NoiseRegime::Psl => {
            let cos = basis.varphi.cos();
            if cos.abs() < 1e-12 {
                return if unbounded_as_inf {
                    Ok(f64::INFINITY)
                } else {
                    Err(Error::UnboundedNoise(
                        "PSL noise diverges at cos(varphi) = 0".into(),
                    ))
                };
            }
            let flux = basis.probe_power_out / basis.photon_energy;
            Ok(basis.bandwidth
                / (2.0 * n * flux * basis.kappa * basis.kappa * cos * cos))
        }
        NoiseRegime::Sql => {
            let ratio = constants::HBAR / basis.mu34;
            Ok(1.0 / (4.0 * constants::VACUUM_IMPEDANCE * n)
                * ratio
                * ratio
                * (basis.gamma2_total / (basis.effective_density * basis.sensor_volume))
                * basis.bandwidth)
        }
    }
}

/// Snapshot noise power sigma^2 = 2 N rho |Phi|^2 varpi (inversion of the
/// varpi definition).
pub fn noise_power(varpi: f64, n_samples: usize, rho: f64, phi_ref: Complex64) -> f64 {
    2.0 * n_samples as f64 * rho * phi_ref.norm_sqr() * varpi
}

/// Everything downstream consumers need from the physics at the operating
/// point.
#[derive(Debug, Clone)]
pub struct FrontEnd {
    /// chi(Omega_l).
    pub chi: Complex64,
    /// chi'(Omega_l).
    pub chi_deriv: Complex64,
    /// Probe at the cell output.
    pub probe: ProbeOutput,
    /// arccos(Im chi' / |chi'|).
    pub psi_p: f64,
    /// Composite sensor response.
    pub response: SensorResponse,
    /// Inputs for the noise coefficient.
    pub noise: NoiseBasis,
}

impl FrontEnd {
    /// Noise coefficient for `regime` at `n_samples` snapshots.
    pub fn varpi(
        &self,
        regime: NoiseRegime,
        n_samples: usize,
        unbounded_as_inf: bool,
    ) -> Result<f64> {
        noise_coefficient(regime, n_samples, &self.noise, unbounded_as_inf)
    }

    /// Snapshot noise power for `regime` at `n_samples` snapshots.
    pub fn sigma2(&self, regime: NoiseRegime, n_samples: usize) -> Result<f64> {
        let varpi = self.varpi(regime, n_samples, false)?;
        Ok(noise_power(
            varpi,
            n_samples,
            self.response.rho,
            self.response.phi_ref,
        ))
    }
}

/// Derive the full front end (susceptibility, responsivity, gain, phases,
/// noise basis) at the LO operating point. Optional rational coefficients
/// switch the susceptibility evaluation to the closed form.
///
/// `gamma2_total` is the dephasing rate entering the SQL formula; it is a
/// separate knob from the Lindblad gamma2 (pass `sys.gamma2` to keep them
/// equal).
pub fn derive_front_end(
    sys: &AtomicSystem,
    cfg: &OpticalRfConfig,
    pd: &PhotodetectorConfig,
    lo: &LoConfig,
    bandwidth: f64,
    gamma2_total: f64,
    rational: Option<&atomphys::RationalCoefficients>,
) -> Result<FrontEnd> {
    sys.validate()?;
    cfg.validate()?;
    pd.validate()?;
    lo.validate()?;

    let (chi, chi_deriv) = match rational {
        Some(rc) => (
            atomphys::susceptibility_rational(rc, lo.omega_l)?,
            atomphys::susceptibility_derivative_rational(rc, lo.omega_l)?,
        ),
        None => (
            atomphys::susceptibility(sys, cfg, lo.omega_l)?,
            atomphys::susceptibility_derivative(sys, cfg, lo.omega_l)?,
        ),
    };
    let probe = atomphys::probe_output(sys, cfg, chi);
    let kappa = atomphys::responsivity(sys, cfg, chi_deriv);

    let (varphi, psi_p) = match pd.local_beam_phase {
        LocalPhase::PslOptimal => {
            let (_, psi) = atomphys::detection_phase(0.0, chi_deriv, 0.0)?;
            (0.0, psi)
        }
        LocalPhase::Fixed(phi_l) => atomphys::detection_phase(phi_l, chi_deriv, probe.phase)?,
        LocalPhase::ForcedVarphi(v) => {
            let (_, psi) = atomphys::detection_phase(0.0, chi_deriv, 0.0)?;
            (atomphys::wrap_angle(v), psi)
        }
    };

    let rho = sensor_gain(pd, probe.power, kappa);
    let phi_ref = reference_phase(lo.theta_l1, varphi);
    let response = SensorResponse {
        rho,
        phi_ref,
        kappa,
        varphi,
    };
    let noise = NoiseBasis {
        bandwidth,
        probe_power_out: probe.power,
        photon_energy: constants::HBAR * pd.omega_p_angular,
        kappa,
        varphi,
        effective_density: sys.effective_density(),
        sensor_volume: sensor_volume(sys, cfg),
        gamma2_total,
        mu34: sys.mu34,
    };
    Ok(FrontEnd {
        chi,
        chi_deriv,
        probe,
        psi_p,
        response,
        noise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arraymodel::ArrayGeometry;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn test_pd() -> PhotodetectorConfig {
        PhotodetectorConfig {
            eta: 0.8,
            q_charge: constants::ELEMENTARY_CHARGE,
            lna_gain: 1e3,
            local_beam_power: 1e-3,
            local_beam_phase: LocalPhase::PslOptimal,
            omega_p_angular: 2.0 * std::f64::consts::PI * constants::SPEED_OF_LIGHT / 852.35e-9,
        }
    }

    fn test_lo() -> LoConfig {
        LoConfig {
            omega_l: 2.0 * std::f64::consts::PI * 3.7e6,
            f_l: 6.9458e9,
            theta_l1: std::f64::consts::FRAC_PI_3,
            vartheta: 20f64.to_radians(),
            delta_l: -2.0 * std::f64::consts::PI * 7.5e3,
        }
    }

    fn test_geom() -> ArrayGeometry {
        ArrayGeometry::half_wavelength(10, 6.9458e9)
    }

    fn test_basis(varphi: f64) -> NoiseBasis {
        NoiseBasis {
            bandwidth: 1e5,
            probe_power_out: 1e-5,
            photon_energy: constants::HBAR * test_pd().omega_p_angular,
            kappa: 7.0,
            varphi,
            effective_density: 4.89e14,
            sensor_volume: std::f64::consts::PI * 50e-6 * 50e-6 * 0.1,
            gamma2_total: 2.0 * std::f64::consts::PI * 5.22e6,
            mu34: 1.25e-26,
        }
    }

    #[test]
    fn gain_is_componentwise_product() {
        let pd = test_pd();
        let (p_out, kappa) = (1.2e-5, 6.5);
        let rho = sensor_gain(&pd, p_out, kappa);
        let a1 = pd.eta * pd.q_charge / (constants::HBAR * pd.omega_p_angular);
        let expect = 4.0 * a1 * a1 * constants::VACUUM_IMPEDANCE * pd.lna_gain
            * pd.local_beam_power * p_out * kappa * kappa;
        assert_relative_eq!(rho, expect, max_relative = 1e-12);
        // linear in G, zero at kappa = 0
        let mut pd2 = pd.clone();
        pd2.lna_gain *= 2.0;
        assert_relative_eq!(sensor_gain(&pd2, p_out, kappa), 2.0 * rho, max_relative = 1e-12);
        assert_eq!(sensor_gain(&pd, p_out, 0.0), 0.0);
    }

    #[test]
    fn reference_phase_amplitude_is_cos_varphi() {
        let phi = reference_phase(0.7, 0.0);
        assert_relative_eq!(phi.norm(), 1.0, epsilon = 1e-12);
        assert_relative_eq!((phi - Complex64::from_polar(1.0, -0.7)).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn sensor_phase_flat_for_broadside_lo() {
        let mut lo = test_lo();
        lo.vartheta = 0.0;
        let geom = test_geom();
        let first = sensor_phase(1, &lo, 0.3, &geom).unwrap();
        for m in 2..=geom.m_sensors {
            let phi_m = sensor_phase(m, &lo, 0.3, &geom).unwrap();
            assert!((phi_m - first).norm() < 1e-12);
        }
    }

    #[test]
    fn sensor_phase_rejects_out_of_range_index() {
        let lo = test_lo();
        let geom = test_geom();
        assert!(sensor_phase(0, &lo, 0.0, &geom).is_err());
        assert!(sensor_phase(geom.m_sensors + 1, &lo, 0.0, &geom).is_err());
    }

    #[test]
    fn noise_coefficient_psl_linear_in_bandwidth() {
        let b1 = test_basis(0.0);
        let mut b2 = b1;
        b2.bandwidth *= 2.0;
        let v1 = noise_coefficient(NoiseRegime::Psl, 50, &b1, false).unwrap();
        let v2 = noise_coefficient(NoiseRegime::Psl, 50, &b2, false).unwrap();
        assert_relative_eq!(v2, 2.0 * v1, max_relative = 1e-12);
    }

    #[test]
    fn noise_coefficient_psl_unbounded_at_quadrature() {
        let basis = test_basis(std::f64::consts::FRAC_PI_2);
        assert!(matches!(
            noise_coefficient(NoiseRegime::Psl, 50, &basis, false),
            Err(Error::UnboundedNoise(_))
        ));
        let inf = noise_coefficient(NoiseRegime::Psl, 50, &basis, true).unwrap();
        assert!(inf.is_infinite());
    }

    #[test]
    fn noise_coefficient_sql_inverse_in_volume() {
        let b1 = test_basis(0.0);
        let mut b2 = b1;
        b2.sensor_volume *= 2.0;
        let v1 = noise_coefficient(NoiseRegime::Sql, 50, &b1, false).unwrap();
        let v2 = noise_coefficient(NoiseRegime::Sql, 50, &b2, false).unwrap();
        assert_relative_eq!(v2, v1 / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn noise_power_inverts_varpi_definition() {
        let (varpi, n, rho) = (3.7e-13, 50usize, 2.4e5);
        let phi = reference_phase(1.1, 0.4);
        let sigma2 = noise_power(varpi, n, rho, phi);
        let back = sigma2 / (2.0 * n as f64 * rho * phi.norm_sqr());
        assert_relative_eq!(back, varpi, max_relative = 1e-14);
        assert_eq!(noise_power(0.0, n, rho, phi), 0.0);
    }

    #[test]
    fn psl_composition_finite_and_positive_at_default() {
        let basis = test_basis(0.0);
        let varpi = noise_coefficient(NoiseRegime::Psl, 50, &basis, false).unwrap();
        let sigma2 = noise_power(varpi, 50, 2.4e5, reference_phase(0.3, 0.0));
        assert!(sigma2.is_finite() && sigma2 > 0.0);
    }

    #[test]
    fn front_end_at_paper_operating_point() {
        let sys = crate::atomphys::tests::test_system();
        let cfg = crate::atomphys::tests::test_optics();
        let fe = derive_front_end(&sys, &cfg, &test_pd(), &test_lo(), 1e5, sys.gamma2, None)
            .unwrap();
        assert!(fe.response.rho > 0.0);
        assert!(fe.response.kappa > 0.0);
        assert_relative_eq!(fe.response.varphi, 0.0);
        assert_relative_eq!(
            fe.response.phi_ref.norm(),
            fe.response.varphi.cos().abs(),
            epsilon = 1e-12
        );
        let psl = fe.varpi(NoiseRegime::Psl, 50, false).unwrap();
        let sql = fe.varpi(NoiseRegime::Sql, 50, false).unwrap();
        assert!(psl > sql, "PSL noisier than SQL: {psl:.3e} vs {sql:.3e}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn prop_factored_and_direct_sensor_phase_agree(
            vartheta in -1.4f64..1.4,
            theta_l1 in -3.0f64..3.0,
            varphi in -3.0f64..3.0,
        ) {
            let mut lo = test_lo();
            lo.vartheta = vartheta;
            lo.theta_l1 = theta_l1;
            let geom = test_geom();
            for m in 1..=geom.m_sensors {
                let a = sensor_phase(m, &lo, varphi, &geom).unwrap();
                let b = sensor_phase_direct(m, &lo, varphi, &geom).unwrap();
                prop_assert!((a - b).norm() < 1e-12);
                // |Phi_m| is m-independent and equals |cos varphi|
                prop_assert!((a.norm() - varphi.cos().abs()).abs() < 1e-12);
            }
        }

        #[test]
        fn prop_psl_minimized_at_cos2_one(varphi in -3.1f64..3.1) {
            let at = |v: f64| noise_coefficient(NoiseRegime::Psl, 50, &test_basis(v), true).unwrap();
            let reference = at(0.0);
            prop_assert!(at(varphi) >= reference * (1.0 - 1e-12));
        }
    }
}
