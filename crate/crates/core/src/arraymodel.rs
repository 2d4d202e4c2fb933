//! RAQ-ULA geometry, steering/mismatch matrices, path loss, and snapshot
//! synthesis, plus the classical antenna-array baseline generator.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::atomphys::constants;
use crate::error::{Error, Result};
use crate::numkernel::CMat;
use crate::transducer::{NoiseRegime, SensorResponse};

/// Uniform linear array geometry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArrayGeometry {
    /// Number of receiver sensors M.
    pub m_sensors: usize,
    /// Inter-sensor spacing d (m).
    pub spacing: f64,
    /// Carrier wavelength lambda (m).
    pub carrier_wavelength: f64,
    /// Carrier frequency f_c (Hz).
    pub carrier_freq: f64,
}

impl ArrayGeometry {
    /// Half-wavelength ULA at carrier frequency `f_c`.
    pub fn half_wavelength(m_sensors: usize, f_c: f64) -> Self {
        let lambda = constants::SPEED_OF_LIGHT / f_c;
        ArrayGeometry {
            m_sensors,
            spacing: lambda / 2.0,
            carrier_wavelength: lambda,
            carrier_freq: f_c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_sensors < 2 {
            return Err(Error::invalid("need at least 2 sensors"));
        }
        if !(self.spacing > 0.0) || !(self.carrier_wavelength > 0.0) {
            return Err(Error::invalid("spacing and wavelength must be positive"));
        }
        Ok(())
    }

    /// Phase advance per sensor for direction `theta`: (2 pi / lambda) d sin(theta).
    pub fn phase_gradient(&self, theta: f64) -> f64 {
        2.0 * std::f64::consts::PI / self.carrier_wavelength * self.spacing * theta.sin()
    }

    /// Isotropic effective aperture lambda^2 / (4 pi) (m^2).
    pub fn isotropic_aperture(&self) -> f64 {
        self.carrier_wavelength * self.carrier_wavelength / (4.0 * std::f64::consts::PI)
    }
}

/// Log-distance path loss parameters (dB).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PathLossModel {
    /// Loss at the reference distance (dB, negative for attenuation).
    pub k0_db: f64,
    /// Path-loss exponent v.
    pub exponent: f64,
    /// Reference distance u0 (m).
    pub u0: f64,
}

/// Per-snapshot echo waveform model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EchoWaveform {
    /// Unit-power circular complex Gaussian per snapshot, then scaled.
    GaussianUnitPower,
    /// Deterministic constant-modulus tones (distinct per-target
    /// frequencies), for R_s-controlled tests.
    ConstantModulus,
}

/// Multi-target scene.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetScene {
    /// Target DOAs (rad), strictly inside (-pi/2, pi/2), pairwise distinct.
    pub doas: Vec<f64>,
    /// Reflected power per target (dBm).
    pub reflected_power_dbm: Vec<f64>,
    /// Target distances (m).
    pub distances: Vec<f64>,
    /// Path loss model.
    pub pathloss: PathLossModel,
    /// Signal bandwidth B (Hz).
    pub bandwidth: f64,
    /// Echo waveform model.
    pub echo_waveform: EchoWaveform,
    /// Effective aperture for the dBm -> field conversion (m^2);
    /// `None` selects the isotropic aperture lambda^2 / (4 pi).
    pub aperture_m2: Option<f64>,
}

impl TargetScene {
    pub fn k_targets(&self) -> usize {
        self.doas.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k_targets();
        if k < 1 {
            return Err(Error::InvalidScene("need at least one target".into()));
        }
        if self.reflected_power_dbm.len() != k || self.distances.len() != k {
            return Err(Error::InvalidScene(
                "per-target field lengths must match the DOA count".into(),
            ));
        }
        for &theta in &self.doas {
            if theta.abs() >= std::f64::consts::FRAC_PI_2 {
                return Err(Error::InvalidScene(format!(
                    "DOA {theta:.4} rad outside (-pi/2, pi/2)"
                )));
            }
        }
        for i in 0..k {
            for j in i + 1..k {
                if self.doas[i] == self.doas[j] {
                    return Err(Error::InvalidScene("coincident DOAs".into()));
                }
            }
        }
        Ok(())
    }
}

/// Regime tag carried by synthesized snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Psl,
    Sql,
    Classical,
}

impl Regime {
    /// The quantum noise regime, when applicable.
    pub fn quantum(self) -> Option<NoiseRegime> {
        match self {
            Regime::Psl => Some(NoiseRegime::Psl),
            Regime::Sql => Some(NoiseRegime::Sql),
            Regime::Classical => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Psl => "psl",
            Regime::Sql => "sql",
            Regime::Classical => "classical",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Complex baseband measurement matrix Y (M x N).
#[derive(Debug, Clone)]
pub struct SnapshotMatrix {
    pub y: CMat,
    pub regime: Regime,
    pub sigma2: f64,
    pub seed: u64,
}

/// Array response vector a(theta), element m = exp(j (2 pi / lambda) (m-1) d sin(theta)).
pub fn steering_vector(theta: f64, geom: &ArrayGeometry) -> crate::numkernel::CVec {
    let grad = geom.phase_gradient(theta);
    crate::numkernel::CVec::from_fn(geom.m_sensors, |m, _| {
        Complex64::from_polar(1.0, grad * m as f64)
    })
}

/// Steering matrix A(theta) with one column per target.
pub fn steering_matrix(doas: &[f64], geom: &ArrayGeometry) -> CMat {
    let cols: Vec<_> = doas.iter().map(|&t| steering_vector(t, geom)).collect();
    CMat::from_columns(&cols.iter().map(|c| c.column(0)).collect::<Vec<_>>())
}

/// Columns d a(theta_k) / d theta_k: element m is
/// j (2 pi / lambda) (m-1) d cos(theta_k) a_m(theta_k).
pub fn steering_derivative_matrix(doas: &[f64], geom: &ArrayGeometry) -> CMat {
    let mut out = CMat::zeros(geom.m_sensors, doas.len());
    let scale = 2.0 * std::f64::consts::PI / geom.carrier_wavelength * geom.spacing;
    for (k, &theta) in doas.iter().enumerate() {
        let grad = geom.phase_gradient(theta);
        let dcos = scale * theta.cos();
        for m in 0..geom.m_sensors {
            out[(m, k)] = Complex64::new(0.0, m as f64 * dcos)
                * Complex64::from_polar(1.0, grad * m as f64);
        }
    }
    out
}

/// Diagonal LO mismatch matrix D(vartheta),
/// D_mm = exp(-j (2 pi / lambda) d (m-1) sin(vartheta)).
pub fn lo_mismatch_matrix(vartheta: f64, geom: &ArrayGeometry) -> CMat {
    let grad = geom.phase_gradient(vartheta);
    CMat::from_diagonal(&crate::numkernel::CVec::from_fn(geom.m_sensors, |m, _| {
        Complex64::from_polar(1.0, -grad * m as f64)
    }))
}

/// Log-distance path loss in dB (negative = attenuation).
pub fn path_loss_db(u: f64, pl: &PathLossModel) -> Result<f64> {
    if !(pl.u0 > 0.0) {
        return Err(Error::invalid("reference distance must be positive"));
    }
    if u < pl.u0 {
        return Err(Error::invalid(format!(
            "distance {u} m below reference {} m",
            pl.u0
        )));
    }
    Ok(pl.k0_db - 10.0 * pl.exponent * (u / pl.u0).log10())
}

/// Received echo power in watts after path loss.
pub fn received_power_w(reflected_dbm: f64, u: f64, pl: &PathLossModel) -> Result<f64> {
    let rx_dbm = reflected_dbm + path_loss_db(u, pl)?;
    Ok(10f64.powf(rx_dbm / 10.0) * 1e-3)
}

/// RF field-amplitude equivalent of a received power:
/// E = sqrt(2 Z0 P_rx / A_eff).
pub fn field_amplitude(p_rx_w: f64, aperture_m2: f64) -> f64 {
    (2.0 * constants::VACUUM_IMPEDANCE * p_rx_w / aperture_m2).sqrt()
}

/// Per-target echo field amplitudes for a scene (V/m).
pub fn echo_amplitudes(scene: &TargetScene, geom: &ArrayGeometry) -> Result<Vec<f64>> {
    let aperture = scene.aperture_m2.unwrap_or_else(|| geom.isotropic_aperture());
    scene
        .doas
        .iter()
        .enumerate()
        .map(|(k, _)| {
            let p = received_power_w(scene.reflected_power_dbm[k], scene.distances[k], &scene.pathloss)?;
            Ok(field_amplitude(p, aperture))
        })
        .collect()
}

fn complex_gaussian(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draw the K x N echo matrix S with per-target amplitudes `amps`.
pub fn draw_echo_matrix(
    waveform: EchoWaveform,
    amps: &[f64],
    n_samples: usize,
    rng: &mut impl Rng,
) -> CMat {
    let k = amps.len();
    match waveform {
        EchoWaveform::GaussianUnitPower => CMat::from_fn(k, n_samples, |ki, _| {
            complex_gaussian(rng) * amps[ki]
        }),
        EchoWaveform::ConstantModulus => CMat::from_fn(k, n_samples, |ki, t| {
            let freq = (ki as f64 + 1.0) / (k as f64 + 1.0);
            Complex64::from_polar(amps[ki], 2.0 * std::f64::consts::PI * freq * t as f64)
        }),
    }
}

/// Additive circular complex Gaussian noise matrix with total per-sample
/// variance `sigma2`.
pub fn draw_noise_matrix(rows: usize, cols: usize, sigma2: f64, rng: &mut impl Rng) -> CMat {
    let scale = sigma2.sqrt();
    CMat::from_fn(rows, cols, |_, _| complex_gaussian(rng) * scale)
}

/// Assemble Y = sqrt(rho) Phi D A S + W given pre-drawn echoes and a noise
/// source.
pub fn synthesize_from_echoes(
    geom: &ArrayGeometry,
    resp: &SensorResponse,
    vartheta: f64,
    doas: &[f64],
    echoes: &CMat,
    sigma2: f64,
    rng: &mut impl Rng,
) -> Result<CMat> {
    geom.validate()?;
    if doas.len() >= geom.m_sensors {
        return Err(Error::InvalidScene(format!(
            "K = {} targets require K < M = {}",
            doas.len(),
            geom.m_sensors
        )));
    }
    let a = steering_matrix(doas, geom);
    let d = lo_mismatch_matrix(vartheta, geom);
    let gain = Complex64::new(resp.rho.sqrt(), 0.0) * resp.phi_ref;
    let mixing = (d * a) * gain;
    let mut y = mixing * echoes;
    if sigma2 > 0.0 {
        y += draw_noise_matrix(geom.m_sensors, echoes.ncols(), sigma2, rng);
    }
    Ok(y)
}

/// Synthesize an M x N RAQ-ULA snapshot matrix per the front-end response.
/// Deterministic given `seed`.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_snapshots(
    scene: &TargetScene,
    geom: &ArrayGeometry,
    resp: &SensorResponse,
    vartheta: f64,
    n_samples: usize,
    sigma2: f64,
    regime: Regime,
    seed: u64,
) -> Result<SnapshotMatrix> {
    scene.validate()?;
    if n_samples < 1 {
        return Err(Error::invalid("need at least one snapshot"));
    }
    let amps = echo_amplitudes(scene, geom)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let echoes = draw_echo_matrix(scene.echo_waveform, &amps, n_samples, &mut rng);
    let y = synthesize_from_echoes(geom, resp, vartheta, &scene.doas, &echoes, sigma2, &mut rng)?;
    Ok(SnapshotMatrix {
        y,
        regime,
        sigma2,
        seed,
    })
}

/// Classical antenna-array receiver stand-in (3GPP-style front end).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClassicalReceiver {
    /// Receiver noise figure (dB).
    pub noise_figure_db: f64,
    /// Receiver gain applied to the signal (dB).
    pub rx_gain_db: f64,
    /// Noise reference temperature (K).
    pub temperature_k: f64,
}

impl ClassicalReceiver {
    /// Thermal noise power k_B T B scaled by the noise figure (W).
    pub fn noise_power(&self, bandwidth: f64) -> f64 {
        constants::BOLTZMANN
            * self.temperature_k
            * bandwidth
            * 10f64.powf(self.noise_figure_db / 10.0)
    }

    /// Per-target signal amplitudes in sqrt(W) including receiver gain.
    pub fn signal_amplitudes(&self, scene: &TargetScene) -> Result<Vec<f64>> {
        let gain = 10f64.powf(self.rx_gain_db / 10.0);
        scene
            .doas
            .iter()
            .enumerate()
            .map(|(k, _)| {
                let p = received_power_w(
                    scene.reflected_power_dbm[k],
                    scene.distances[k],
                    &scene.pathloss,
                )?;
                Ok((p * gain).sqrt())
            })
            .collect()
    }
}

/// Synthesize classical-array snapshots Y = A S + W with a thermal noise
/// floor; no sensor mismatch.
pub fn synthesize_classical_snapshots(
    scene: &TargetScene,
    geom: &ArrayGeometry,
    rx: &ClassicalReceiver,
    n_samples: usize,
    seed: u64,
) -> Result<SnapshotMatrix> {
    scene.validate()?;
    geom.validate()?;
    if scene.k_targets() >= geom.m_sensors {
        return Err(Error::InvalidScene(format!(
            "K = {} targets require K < M = {}",
            scene.k_targets(),
            geom.m_sensors
        )));
    }
    if n_samples < 1 {
        return Err(Error::invalid("need at least one snapshot"));
    }
    let amps = rx.signal_amplitudes(scene)?;
    let sigma2 = rx.noise_power(scene.bandwidth);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let echoes = draw_echo_matrix(scene.echo_waveform, &amps, n_samples, &mut rng);
    let a = steering_matrix(&scene.doas, geom);
    let mut y = a * echoes;
    if sigma2 > 0.0 {
        y += draw_noise_matrix(geom.m_sensors, n_samples, sigma2, &mut rng);
    }
    Ok(SnapshotMatrix {
        y,
        regime: Regime::Classical,
        sigma2,
        seed,
    })
}
