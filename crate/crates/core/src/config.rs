//! Configuration file handling.
//!
//! A single TOML file drives the whole toolkit. Every physical quantity
//! carries an explicit unit suffix in its key name (`_mhz`, `_dbm`, `_m`,
//! ...); `_mhz` rates and detunings are linear frequencies and are
//! converted to angular rad/s internally. Missing keys fall back to the
//! documented defaults, and a resolved snapshot (all defaults expanded) is
//! written next to every run so results can be replayed without the
//! original file.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::arraymodel::{ArrayGeometry, ClassicalReceiver, EchoWaveform, PathLossModel, Regime};
use crate::atomphys::{constants, AtomicSystem, OpticalRfConfig, RationalCoefficients};
use crate::error::{Error, Result};
use crate::harness::{Experiment, EstimatorKind, SceneTemplate};
use crate::transducer::{LoConfig, LocalPhase, PhotodetectorConfig};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

fn mhz_to_rad(f_mhz: f64) -> f64 {
    TWO_PI * f_mhz * 1e6
}

/// `[atoms]` section. Dipole moments, density, and rates marked "external
/// table" are documented placeholder defaults, not paper ground truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtomsSection {
    /// |2> decay rate (linear MHz); Cs 6P3/2.
    pub gamma2_mhz: f64,
    /// Total dephasing rate for the SQL noise formula (linear MHz).
    pub gamma2_total_mhz: f64,
    pub gamma3_mhz: f64,
    pub gamma4_mhz: f64,
    pub gamma_mhz: f64,
    pub gamma_c_mhz: f64,
    /// |1> -> |2> dipole moment (C m); external table.
    pub mu12_coulomb_meter: f64,
    /// |3> -> |4> dipole moment (C m); external table.
    pub mu34_coulomb_meter: f64,
    pub density_per_cm3: f64,
    pub excitation_fraction: f64,
    pub cell_length_m: f64,
}

impl Default for AtomsSection {
    fn default() -> Self {
        AtomsSection {
            gamma2_mhz: 5.22,
            gamma2_total_mhz: 5.22,
            gamma3_mhz: 0.0,
            gamma4_mhz: 0.0,
            gamma_mhz: 0.0,
            gamma_c_mhz: 0.0,
            mu12_coulomb_meter: 2.5417e-29,
            mu34_coulomb_meter: 1.25e-26,
            density_per_cm3: 4.89e10,
            excitation_fraction: 0.01,
            cell_length_m: 0.10,
        }
    }
}

/// `[optical]` section. Beam powers/radii are external-table placeholders.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticalSection {
    pub probe_rabi_mhz: f64,
    pub coupling_rabi_mhz: f64,
    /// LO Rabi frequency (linear MHz); default sits at the max-|chi'|
    /// operating point of the default atom/detuning set.
    pub lo_rabi_mhz: f64,
    pub probe_detuning_mhz: f64,
    pub coupling_detuning_mhz: f64,
    pub lo_detuning_mhz: f64,
    pub probe_wavelength_nm: f64,
    pub probe_power_in_uw: f64,
    pub probe_fwhm_um: f64,
    pub beam_radius_um: f64,
    pub probe_phase_in_rad: f64,
}

impl Default for OpticalSection {
    fn default() -> Self {
        OpticalSection {
            probe_rabi_mhz: 5.7,
            coupling_rabi_mhz: 0.97,
            lo_rabi_mhz: 3.7,
            probe_detuning_mhz: -0.9133,
            coupling_detuning_mhz: 1.8090,
            lo_detuning_mhz: -0.0075,
            probe_wavelength_nm: 852.35,
            probe_power_in_uw: 100.0,
            probe_fwhm_um: 60.0,
            beam_radius_um: 50.0,
            probe_phase_in_rad: 0.0,
        }
    }
}

/// `[photodetector]` section.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhotodetectorSection {
    pub quantum_efficiency: f64,
    pub lna_gain: f64,
    pub local_beam_power_mw: f64,
    /// Explicit local optical beam phase (rad); absent selects the
    /// PSL-optimal setting varphi = 0.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local_beam_phase_rad: Option<f64>,
}

impl Default for PhotodetectorSection {
    fn default() -> Self {
        PhotodetectorSection {
            quantum_efficiency: 0.8,
            lna_gain: 1e3,
            local_beam_power_mw: 1.0,
            local_beam_phase_rad: None,
        }
    }
}

/// `[lo]` section (RF local oscillator).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoSection {
    pub carrier_ghz: f64,
    /// theta_l1, LO phase at the reference sensor (rad).
    pub phase_ref_rad: f64,
    /// LO direction of arrival (deg).
    pub doa_deg: f64,
}

impl Default for LoSection {
    fn default() -> Self {
        LoSection {
            carrier_ghz: 6.9458,
            phase_ref_rad: std::f64::consts::FRAC_PI_3,
            doa_deg: 20.0,
        }
    }
}

/// `[array]` section.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArraySection {
    pub sensors: usize,
    pub carrier_ghz: f64,
    /// Explicit spacing (m); absent selects half-wavelength.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing_m: Option<f64>,
}

impl Default for ArraySection {
    fn default() -> Self {
        ArraySection {
            sensors: 10,
            carrier_ghz: 6.9458,
            spacing_m: None,
        }
    }
}

/// `[scene]` section.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSection {
    pub targets: usize,
    pub reflected_power_dbm: f64,
    pub bandwidth_khz: f64,
    pub center_distance_m: f64,
    pub disk_radius_m: f64,
    pub doa_min_deg: f64,
    pub doa_max_deg: f64,
    pub doa_min_separation_deg: f64,
    pub pathloss_k0_db: f64,
    pub pathloss_exponent: f64,
    pub pathloss_reference_m: f64,
    pub echo_waveform: EchoWaveform,
    /// Effective aperture for the dBm -> field conversion (m^2); absent
    /// selects lambda^2 / (4 pi).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aperture_m2: Option<f64>,
}

impl Default for SceneSection {
    fn default() -> Self {
        SceneSection {
            targets: 5,
            reflected_power_dbm: 23.0,
            bandwidth_khz: 100.0,
            center_distance_m: 1500.0,
            disk_radius_m: 500.0,
            doa_min_deg: -89.999,
            doa_max_deg: 89.999,
            doa_min_separation_deg: 1.0,
            pathloss_k0_db: -30.0,
            pathloss_exponent: 2.0,
            pathloss_reference_m: 1.0,
            echo_waveform: EchoWaveform::GaussianUnitPower,
            aperture_m2: None,
        }
    }
}

/// `[classical]` section: the antenna-array baseline stand-in.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassicalSection {
    pub noise_figure_db: f64,
    pub rx_gain_db: f64,
    pub temperature_k: f64,
}

impl Default for ClassicalSection {
    fn default() -> Self {
        ClassicalSection {
            noise_figure_db: 9.0,
            rx_gain_db: 0.0,
            temperature_k: 290.0,
        }
    }
}

/// `[run]` section.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub trials: usize,
    pub master_seed: u64,
    pub snapshots: usize,
    pub regimes: Vec<Regime>,
    pub estimators: Vec<EstimatorKind>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            trials: 500,
            master_seed: 61850,
            snapshots: 50,
            regimes: vec![Regime::Psl, Regime::Sql, Regime::Classical],
            estimators: vec![
                EstimatorKind::RaqEsprit,
                EstimatorKind::EspritNocorr,
                EstimatorKind::RaqMl,
                EstimatorKind::Crlb,
            ],
        }
    }
}

/// `[sweeps]` section: grids for the six named sweeps.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepsSection {
    pub power_dbm: Vec<f64>,
    pub sensors: Vec<f64>,
    pub targets: Vec<f64>,
    pub samples: Vec<f64>,
    pub doa_range_deg: Vec<f64>,
    pub varphi_deg: Vec<f64>,
}

impl Default for SweepsSection {
    fn default() -> Self {
        SweepsSection {
            power_dbm: vec![8.0, 13.0, 18.0, 23.0, 28.0, 33.0],
            sensors: vec![4.0, 6.0, 8.0, 10.0, 12.0, 14.0],
            targets: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            samples: vec![12.0, 25.0, 50.0, 100.0, 200.0, 400.0],
            doa_range_deg: vec![15.0, 30.0, 45.0, 60.0, 75.0, 90.0],
            varphi_deg: vec![
                -180.0, -150.0, -120.0, -90.0, -60.0, -30.0, 0.0, 30.0, 60.0, 90.0, 120.0,
                150.0, 180.0,
            ],
        }
    }
}

/// `[physics]` section: the Omega_RF inspection grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsSection {
    pub omega_rf_min_mhz: f64,
    pub omega_rf_max_mhz: f64,
    pub points: usize,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        PhysicsSection {
            omega_rf_min_mhz: 0.2,
            omega_rf_max_mhz: 14.8,
            points: 74,
        }
    }
}

/// Whole configuration file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub schema_version: u32,
    pub atoms: AtomsSection,
    pub optical: OpticalSection,
    pub photodetector: PhotodetectorSection,
    pub lo: LoSection,
    pub array: ArraySection,
    pub scene: SceneSection,
    pub classical: ClassicalSection,
    pub run: RunSection,
    pub sweeps: SweepsSection,
    pub physics: PhysicsSection,
    /// Optional rational susceptibility coefficients (SI units of rad/s in
    /// the polynomial variable); switches chi evaluation to the closed form.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rational: Option<RationalCoefficients>,
}

impl FileConfig {
    /// Parse a configuration file; parse errors carry line/column anchors.
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<FileConfig> {
        let cfg: FileConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version > 1 {
            return Err(Error::Config(format!(
                "unsupported schema_version {}",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    /// Serialize the fully resolved snapshot (every default expanded).
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Resolve into the runtime experiment description.
    pub fn resolve(&self) -> Result<Experiment> {
        let atoms = &self.atoms;
        let sys = AtomicSystem {
            gamma2: mhz_to_rad(atoms.gamma2_mhz),
            gamma3: mhz_to_rad(atoms.gamma3_mhz),
            gamma4: mhz_to_rad(atoms.gamma4_mhz),
            gamma: mhz_to_rad(atoms.gamma_mhz),
            gamma_c: mhz_to_rad(atoms.gamma_c_mhz),
            mu12: atoms.mu12_coulomb_meter,
            mu34: atoms.mu34_coulomb_meter,
            n0: atoms.density_per_cm3 * 1e6,
            upsilon: atoms.excitation_fraction,
            cell_length: atoms.cell_length_m,
        };
        sys.validate()?;

        let o = &self.optical;
        let lambda_p = o.probe_wavelength_nm * 1e-9;
        let fwhm = o.probe_fwhm_um * 1e-6;
        let power_in = o.probe_power_in_uw * 1e-6;
        // invert the FWHM power formula for the input field amplitude
        let amp_in = (8.0 * std::f64::consts::LN_2 * power_in
            / (std::f64::consts::PI * constants::SPEED_OF_LIGHT * constants::EPSILON_0 * fwhm
                * fwhm))
            .sqrt();
        let optics = OpticalRfConfig {
            omega_p: mhz_to_rad(o.probe_rabi_mhz),
            omega_c: mhz_to_rad(o.coupling_rabi_mhz),
            omega_l: mhz_to_rad(o.lo_rabi_mhz),
            delta_p: mhz_to_rad(o.probe_detuning_mhz),
            delta_c: mhz_to_rad(o.coupling_detuning_mhz),
            delta_l: mhz_to_rad(o.lo_detuning_mhz),
            lambda_p,
            f_p: constants::SPEED_OF_LIGHT / lambda_p,
            probe_amp_in: amp_in,
            probe_phase_in: o.probe_phase_in_rad,
            fwhm_p: fwhm,
            beam_radius: o.beam_radius_um * 1e-6,
        };
        optics.validate()?;

        let pd = PhotodetectorConfig {
            eta: self.photodetector.quantum_efficiency,
            q_charge: constants::ELEMENTARY_CHARGE,
            lna_gain: self.photodetector.lna_gain,
            local_beam_power: self.photodetector.local_beam_power_mw * 1e-3,
            local_beam_phase: match self.photodetector.local_beam_phase_rad {
                Some(phi) => LocalPhase::Fixed(phi),
                None => LocalPhase::PslOptimal,
            },
            omega_p_angular: TWO_PI * optics.f_p,
        };
        pd.validate()?;

        let lo = LoConfig {
            omega_l: optics.omega_l,
            f_l: self.lo.carrier_ghz * 1e9,
            theta_l1: self.lo.phase_ref_rad,
            vartheta: self.lo.doa_deg.to_radians(),
            delta_l: optics.delta_l,
        };
        lo.validate()?;

        let geom = match self.array.spacing_m {
            Some(d) => {
                let lambda = constants::SPEED_OF_LIGHT / (self.array.carrier_ghz * 1e9);
                ArrayGeometry {
                    m_sensors: self.array.sensors,
                    spacing: d,
                    carrier_wavelength: lambda,
                    carrier_freq: self.array.carrier_ghz * 1e9,
                }
            }
            None => ArrayGeometry::half_wavelength(self.array.sensors, self.array.carrier_ghz * 1e9),
        };
        geom.validate()?;

        let sc = &self.scene;
        if sc.targets >= geom.m_sensors {
            return Err(Error::InvalidScene(format!(
                "K = {} requires K < M = {}",
                sc.targets, geom.m_sensors
            )));
        }
        let scene = SceneTemplate {
            k_targets: sc.targets,
            reflected_power_dbm: sc.reflected_power_dbm,
            center_distance: sc.center_distance_m,
            disk_radius: sc.disk_radius_m,
            doa_min: sc.doa_min_deg.to_radians(),
            doa_max: sc.doa_max_deg.to_radians(),
            doa_min_separation: sc.doa_min_separation_deg.to_radians(),
            pathloss: PathLossModel {
                k0_db: sc.pathloss_k0_db,
                exponent: sc.pathloss_exponent,
                u0: sc.pathloss_reference_m,
            },
            bandwidth: sc.bandwidth_khz * 1e3,
            echo_waveform: sc.echo_waveform,
            aperture_m2: sc.aperture_m2,
        };

        let classical_rx = ClassicalReceiver {
            noise_figure_db: self.classical.noise_figure_db,
            rx_gain_db: self.classical.rx_gain_db,
            temperature_k: self.classical.temperature_k,
        };

        if self.run.trials < 1 {
            return Err(Error::Config("run.trials must be at least 1".into()));
        }
        if self.run.regimes.is_empty() || self.run.estimators.is_empty() {
            return Err(Error::Config(
                "run.regimes and run.estimators must be non-empty".into(),
            ));
        }

        Ok(Experiment {
            sys,
            optics,
            pd,
            lo,
            geom,
            scene,
            classical_rx,
            rational: self.rational.clone(),
            gamma2_total: mhz_to_rad(atoms.gamma2_total_mhz),
            regimes: self.run.regimes.clone(),
            estimators: self.run.estimators.clone(),
            trials: self.run.trials,
            n_samples: self.run.snapshots,
            master_seed: self.run.master_seed,
        })
    }

    /// Grid for a named sweep.
    pub fn sweep_grid(&self, sweep: crate::harness::SweepVariable) -> Vec<f64> {
        use crate::harness::SweepVariable as S;
        match sweep {
            S::Power => self.sweeps.power_dbm.clone(),
            S::Sensors => self.sweeps.sensors.clone(),
            S::Targets => self.sweeps.targets.clone(),
            S::Samples => self.sweeps.samples.clone(),
            S::DoaRange => self.sweeps.doa_range_deg.clone(),
            S::Phase => self.sweeps.varphi_deg.clone(),
        }
    }

    /// The Omega_RF inspection grid (rad/s).
    pub fn physics_grid(&self) -> Vec<f64> {
        let p = &self.physics;
        let n = p.points.max(2);
        (0..n)
            .map(|i| {
                let f = p.omega_rf_min_mhz
                    + (p.omega_rf_max_mhz - p.omega_rf_min_mhz) * i as f64 / (n - 1) as f64;
                mhz_to_rad(f)
            })
            .collect()
    }
}

/// Replayable description of a finished run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub sweep: String,
    pub master_seed: u64,
    pub trials: usize,
    pub config_path: String,
    pub csv_file: String,
    pub warnings: Vec<String>,
    /// Fully resolved configuration snapshot; re-running with exactly this
    /// snapshot reproduces the CSV byte for byte.
    pub resolved_config: FileConfig,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<RunManifest> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("manifest: {e}")))
    }
}
