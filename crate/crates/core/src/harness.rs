//! Monte Carlo experiment runner.
//!
//! Draws random scenes per trial, synthesizes snapshots for each configured
//! regime, runs the estimators, scores them with assignment-matched squared
//! error, and aggregates sweep tables with the analytic Eq.-21/CRLB curves
//! alongside the empirical ones. Trials are independent and reduced in
//! (grid, trial) order, so parallel and serial runs produce identical
//! tables.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arraymodel::{
    draw_echo_matrix, draw_noise_matrix, steering_matrix, synthesize_from_echoes, ArrayGeometry,
    ClassicalReceiver, EchoWaveform, PathLossModel, Regime, TargetScene,
};
use crate::atomphys::{AtomicSystem, OpticalRfConfig, RationalCoefficients};
use crate::error::{Error, Result};
use crate::estimators::{
    classical_esprit, crlb, ml_asymptotic_error, raq_esprit, raq_ml, split_subarrays,
    MlSearchOptions,
};
use crate::numkernel::CMat;
use crate::transducer::{
    derive_front_end, noise_power, FrontEnd, LoConfig, LocalPhase, PhotodetectorConfig,
};

/// Which estimator (or analytic curve) a result row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    /// Mismatch-corrected subspace estimator.
    RaqEsprit,
    /// Classical ESPRIT without the LO correction (baseline / infeasibility
    /// curve).
    EspritNocorr,
    /// Asymptotic ML error, evaluated analytically per drawn scene.
    RaqMl,
    /// Monte Carlo ML search (opt-in, K <= 3).
    RaqMlSearch,
    /// Cramer-Rao lower bound, evaluated per drawn scene.
    Crlb,
}

impl EstimatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::RaqEsprit => "raq_esprit",
            EstimatorKind::EspritNocorr => "esprit_nocorr",
            EstimatorKind::RaqMl => "raq_ml",
            EstimatorKind::RaqMlSearch => "raq_ml_search",
            EstimatorKind::Crlb => "crlb",
        }
    }
}

/// Scene randomization template (per-trial scenes are drawn from this).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneTemplate {
    pub k_targets: usize,
    pub reflected_power_dbm: f64,
    /// Distance from the array to the disk center (m).
    pub center_distance: f64,
    /// Radius of the target disk (m).
    pub disk_radius: f64,
    /// DOA draw range (rad), open interval.
    pub doa_min: f64,
    pub doa_max: f64,
    /// Minimum pairwise DOA separation when drawing (rad).
    pub doa_min_separation: f64,
    pub pathloss: PathLossModel,
    pub bandwidth: f64,
    pub echo_waveform: EchoWaveform,
    pub aperture_m2: Option<f64>,
}

/// Fully resolved experiment: physics, array, scene statistics, and run
/// controls.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub sys: AtomicSystem,
    pub optics: OpticalRfConfig,
    pub pd: PhotodetectorConfig,
    pub lo: LoConfig,
    pub geom: ArrayGeometry,
    pub scene: SceneTemplate,
    pub classical_rx: ClassicalReceiver,
    pub rational: Option<RationalCoefficients>,
    /// Dephasing rate for the SQL noise formula (rad/s); defaults to
    /// the Lindblad gamma2 in the file config.
    pub gamma2_total: f64,
    pub regimes: Vec<Regime>,
    pub estimators: Vec<EstimatorKind>,
    pub trials: usize,
    pub n_samples: usize,
    pub master_seed: u64,
}

/// The six sweep variables of the experiment suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepVariable {
    /// Reflected power (dBm).
    Power,
    /// Number of sensors M.
    Sensors,
    /// Number of targets K.
    Targets,
    /// Number of snapshots N.
    Samples,
    /// DOA half-range (deg): targets drawn in (-v, v).
    DoaRange,
    /// Detection phase varphi (deg), forced at the front end.
    Phase,
}

impl SweepVariable {
    /// CSV column tag for the swept variable.
    pub fn column_tag(self) -> &'static str {
        match self {
            SweepVariable::Power => "reflected_power_dbm",
            SweepVariable::Sensors => "m_sensors",
            SweepVariable::Targets => "k_targets",
            SweepVariable::Samples => "n_samples",
            SweepVariable::DoaRange => "doa_range_deg",
            SweepVariable::Phase => "varphi_deg",
        }
    }

    /// CLI / config name of the sweep.
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::Power => "power",
            SweepVariable::Sensors => "sensors",
            SweepVariable::Targets => "targets",
            SweepVariable::Samples => "samples",
            SweepVariable::DoaRange => "doa",
            SweepVariable::Phase => "phase",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "power" => Some(SweepVariable::Power),
            "sensors" => Some(SweepVariable::Sensors),
            "targets" => Some(SweepVariable::Targets),
            "samples" => Some(SweepVariable::Samples),
            "doa" => Some(SweepVariable::DoaRange),
            "phase" => Some(SweepVariable::Phase),
            _ => None,
        }
    }

    /// Apply a grid value to the experiment.
    pub fn apply(self, exp: &Experiment, value: f64) -> Result<Experiment> {
        let mut out = exp.clone();
        match self {
            SweepVariable::Power => out.scene.reflected_power_dbm = value,
            SweepVariable::Sensors => {
                let m = value.round() as usize;
                if m < 2 {
                    return Err(Error::invalid("sensor sweep value below 2"));
                }
                out.geom.m_sensors = m;
            }
            SweepVariable::Targets => {
                let k = value.round() as usize;
                if k < 1 {
                    return Err(Error::invalid("target sweep value below 1"));
                }
                out.scene.k_targets = k;
            }
            SweepVariable::Samples => {
                let n = value.round() as usize;
                if n < 1 {
                    return Err(Error::invalid("sample sweep value below 1"));
                }
                out.n_samples = n;
            }
            SweepVariable::DoaRange => {
                let half = value.to_radians();
                if !(half > 0.0) {
                    return Err(Error::invalid("DOA range must be positive"));
                }
                out.scene.doa_min = -half;
                out.scene.doa_max = half;
            }
            SweepVariable::Phase => {
                out.pd.local_beam_phase = LocalPhase::ForcedVarphi(value.to_radians());
            }
        }
        if out.scene.k_targets >= out.geom.m_sensors {
            return Err(Error::InvalidScene(format!(
                "K = {} requires K < M = {}",
                out.scene.k_targets, out.geom.m_sensors
            )));
        }
        Ok(out)
    }
}

/// One scored trial outcome.
#[derive(Debug, Clone)]
pub struct TrialResult {
    pub sweep_value: f64,
    pub estimator: EstimatorKind,
    pub regime: Regime,
    /// Squared DOA error (rad^2, summed over targets); +inf when the noise
    /// coefficient is unbounded; NaN when the estimator failed.
    pub squared_error: f64,
    pub converged: bool,
    pub unbounded: bool,
    pub seed: u64,
}

/// Assignment-matched squared error between an estimate and the truth.
///
/// Minimum over target-to-estimate assignments of sum_k (theta_k -
/// estimate_{pi(k)})^2, computed exactly by subset DP; K <= 16.
pub fn mse(estimated: &[f64], truth: &[f64]) -> Result<f64> {
    let k = truth.len();
    if estimated.len() != k {
        return Err(Error::invalid(format!(
            "estimate length {} vs truth length {}",
            estimated.len(),
            k
        )));
    }
    if k == 0 {
        return Err(Error::invalid("empty DOA vectors"));
    }
    if k > 16 {
        return Err(Error::invalid("assignment matching supports K <= 16"));
    }
    let cost = |i: usize, j: usize| {
        let d = truth[i] - estimated[j];
        d * d
    };
    let full = 1usize << k;
    let mut dp = vec![f64::INFINITY; full];
    dp[0] = 0.0;
    for mask in 1..full {
        let i = (mask as u32).count_ones() as usize - 1;
        let mut best = f64::INFINITY;
        for j in 0..k {
            if mask & (1 << j) != 0 {
                let prev = dp[mask ^ (1 << j)];
                if prev + cost(i, j) < best {
                    best = prev + cost(i, j);
                }
            }
        }
        dp[mask] = best;
    }
    Ok(dp[full - 1])
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// RNG streams drawn per (grid point, trial).
#[derive(Debug, Clone, Copy)]
enum RngStream {
    Scene = 1,
    Echo = 2,
    NoisePsl = 3,
    NoiseSql = 4,
    NoiseClassical = 5,
}

fn stream_seed(master: u64, grid_idx: u64, trial_idx: u64, stream: RngStream) -> u64 {
    let mut s = splitmix64(master);
    s = splitmix64(s ^ grid_idx.wrapping_mul(0xD1B54A32D192ED03));
    s = splitmix64(s ^ trial_idx.wrapping_mul(0x8CB92BA72F3D8DD7));
    splitmix64(s ^ stream as u64)
}

fn stream_rng(master: u64, grid_idx: u64, trial_idx: u64, stream: RngStream) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(stream_seed(master, grid_idx, trial_idx, stream))
}

/// Draw a random scene from the template: DOAs uniform in the configured
/// range with a pairwise separation guard, distances uniform over the
/// target disk.
pub fn draw_scene(template: &SceneTemplate, rng: &mut impl Rng) -> Result<TargetScene> {
    let k = template.k_targets;
    let span = template.doa_max - template.doa_min;
    if !(span > 0.0) {
        return Err(Error::InvalidScene("empty DOA range".into()));
    }
    let mut doas: Vec<f64> = Vec::with_capacity(k);
    let mut attempts = 0usize;
    while doas.len() < k {
        attempts += 1;
        if attempts > 10_000 {
            return Err(Error::InvalidScene(
                "could not draw separated DOAs; range too narrow for K targets".into(),
            ));
        }
        let cand = template.doa_min + rng.random::<f64>() * span;
        if cand.abs() >= std::f64::consts::FRAC_PI_2 {
            continue;
        }
        if doas
            .iter()
            .all(|&d| (d - cand).abs() >= template.doa_min_separation)
        {
            doas.push(cand);
        }
    }
    doas.sort_by(|a, b| a.partial_cmp(b).expect("finite DOA"));

    let mut distances = Vec::with_capacity(k);
    for _ in 0..k {
        let r = template.disk_radius * rng.random::<f64>().sqrt();
        let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
        let x = template.center_distance + r * phi.cos();
        let y = r * phi.sin();
        distances.push((x * x + y * y).sqrt());
    }

    Ok(TargetScene {
        doas,
        reflected_power_dbm: vec![template.reflected_power_dbm; k],
        distances,
        pathloss: template.pathloss,
        bandwidth: template.bandwidth,
        echo_waveform: template.echo_waveform,
        aperture_m2: template.aperture_m2,
    })
}

fn scale_rows(unit: &CMat, amps: &[f64]) -> CMat {
    let mut out = unit.clone();
    for (k, &a) in amps.iter().enumerate() {
        for t in 0..out.ncols() {
            out[(k, t)] *= a;
        }
    }
    out
}

fn sample_covariance(s: &CMat) -> CMat {
    s * s.adjoint() / Complex64::new(s.ncols() as f64, 0.0)
}

struct RegimeData {
    varpi: f64,
    snapshots: Option<CMat>,
    r_s: CMat,
    vartheta: f64,
}

/// Run every estimator x regime combination for one trial. Deterministic
/// given (experiment, grid index, trial index).
pub fn run_trial(
    exp: &Experiment,
    front_end: &FrontEnd,
    sweep_value: f64,
    grid_idx: u64,
    trial_idx: u64,
) -> Result<Vec<TrialResult>> {
    let mut scene_rng = stream_rng(exp.master_seed, grid_idx, trial_idx, RngStream::Scene);
    let scene = draw_scene(&exp.scene, &mut scene_rng)?;
    let truth = scene.doas.clone();
    let k = truth.len();
    let n = exp.n_samples;

    let mut echo_rng = stream_rng(exp.master_seed, grid_idx, trial_idx, RngStream::Echo);
    let unit_echoes = draw_echo_matrix(scene.echo_waveform, &vec![1.0; k], n, &mut echo_rng);

    let raq_amps = crate::arraymodel::echo_amplitudes(&scene, &exp.geom)?;
    let cl_amps = exp.classical_rx.signal_amplitudes(&scene)?;

    let mut results = Vec::new();
    for &regime in &exp.regimes {
        let data = match regime {
            Regime::Psl | Regime::Sql => {
                let quantum = regime.quantum().expect("quantum regime");
                let varpi = front_end.varpi(quantum, n, true)?;
                let echoes = scale_rows(&unit_echoes, &raq_amps);
                let r_s = sample_covariance(&echoes);
                let snapshots = if varpi.is_finite() {
                    let sigma2 = noise_power(
                        varpi,
                        n,
                        front_end.response.rho,
                        front_end.response.phi_ref,
                    );
                    let stream = if regime == Regime::Psl {
                        RngStream::NoisePsl
                    } else {
                        RngStream::NoiseSql
                    };
                    let mut noise_rng =
                        stream_rng(exp.master_seed, grid_idx, trial_idx, stream);
                    Some(synthesize_from_echoes(
                        &exp.geom,
                        &front_end.response,
                        exp.lo.vartheta,
                        &truth,
                        &echoes,
                        sigma2,
                        &mut noise_rng,
                    )?)
                } else {
                    None
                };
                RegimeData {
                    varpi,
                    snapshots,
                    r_s,
                    vartheta: exp.lo.vartheta,
                }
            }
            Regime::Classical => {
                let sigma2 = exp.classical_rx.noise_power(scene.bandwidth);
                let varpi = sigma2 / (2.0 * n as f64);
                let echoes = scale_rows(&unit_echoes, &cl_amps);
                let r_s = sample_covariance(&echoes);
                let mut noise_rng = stream_rng(
                    exp.master_seed,
                    grid_idx,
                    trial_idx,
                    RngStream::NoiseClassical,
                );
                let a = steering_matrix(&truth, &exp.geom);
                let mut y = &a * &echoes;
                if sigma2 > 0.0 {
                    y += draw_noise_matrix(exp.geom.m_sensors, n, sigma2, &mut noise_rng);
                }
                RegimeData {
                    varpi,
                    snapshots: Some(y),
                    r_s,
                    vartheta: 0.0,
                }
            }
        };

        let seed = stream_seed(exp.master_seed, grid_idx, trial_idx, RngStream::Scene);
        for &estimator in &exp.estimators {
            // the corrected estimator is only meaningful on mismatched data
            if estimator == EstimatorKind::RaqEsprit && regime == Regime::Classical {
                continue;
            }
            let mut result = TrialResult {
                sweep_value,
                estimator,
                regime,
                squared_error: f64::NAN,
                converged: false,
                unbounded: !data.varpi.is_finite(),
                seed,
            };
            if result.unbounded {
                result.squared_error = f64::INFINITY;
                results.push(result);
                continue;
            }
            match estimator {
                EstimatorKind::RaqEsprit | EstimatorKind::EspritNocorr => {
                    let y = data.snapshots.as_ref().expect("finite-noise snapshots");
                    let run = split_subarrays(y).and_then(|(y1, y2)| {
                        if estimator == EstimatorKind::RaqEsprit {
                            raq_esprit(&y1, &y2, k, &exp.geom, data.vartheta)
                        } else {
                            classical_esprit(&y1, &y2, k, &exp.geom)
                        }
                    });
                    if let Ok(est) = run {
                        result.squared_error = mse(&est.doas, &truth)?;
                        result.converged = est.converged;
                    }
                }
                EstimatorKind::RaqMlSearch => {
                    if k <= 3 {
                        let y = data.snapshots.as_ref().expect("finite-noise snapshots");
                        if let Ok(est) =
                            raq_ml(y, k, &exp.geom, data.vartheta, &MlSearchOptions::default())
                        {
                            result.squared_error = mse(&est.doas, &truth)?;
                            result.converged = est.converged;
                        }
                    }
                }
                EstimatorKind::RaqMl => {
                    if let Ok(err) = ml_asymptotic_error(
                        &truth,
                        &exp.geom,
                        data.vartheta,
                        &data.r_s,
                        data.varpi,
                        n,
                    ) {
                        result.squared_error = err;
                        result.converged = true;
                    }
                }
                EstimatorKind::Crlb => {
                    if let Ok(bound) =
                        crlb(&truth, &exp.geom, data.vartheta, &data.r_s, data.varpi)
                    {
                        result.squared_error = bound;
                        result.converged = true;
                    }
                }
            }
            results.push(result);
        }
    }
    Ok(results)
}

/// One aggregated sweep-table row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub sweep_var: String,
    pub value: f64,
    pub estimator: String,
    pub regime: String,
    pub mse: f64,
    pub trials: usize,
    pub excluded: usize,
    pub seed: u64,
}

/// Aggregated sweep results plus bookkeeping warnings.
#[derive(Debug, Clone, Default)]
pub struct SweepTable {
    pub sweep: String,
    pub rows: Vec<SweepRow>,
    pub warnings: Vec<String>,
}

fn format_value(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

fn format_mse(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:e}")
    }
}

impl SweepTable {
    pub const CSV_HEADER: &'static str =
        "sweep_var,value,estimator,regime,mse,trials,excluded,seed";

    /// Render the table as CSV (UTF-8, LF, `.` decimal, `inf` literal).
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                row.sweep_var,
                format_value(row.value),
                row.estimator,
                row.regime,
                format_mse(row.mse),
                row.trials,
                row.excluded,
                row.seed
            ));
        }
        out
    }

    /// Mean MSE of a given (estimator, regime) curve over the grid, in grid
    /// order.
    pub fn curve(&self, estimator: &str, regime: &str) -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.estimator == estimator && r.regime == regime)
            .map(|r| (r.value, r.mse))
            .collect();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite grid"));
        pts
    }
}

/// Nominal (deterministic) scene used for the `*_nominal` analytic curves:
/// targets at the disk-center distance, DOAs at even quantiles of the range.
pub fn nominal_scene(template: &SceneTemplate) -> TargetScene {
    let k = template.k_targets;
    let span = template.doa_max - template.doa_min;
    let doas: Vec<f64> = (0..k)
        .map(|i| template.doa_min + span * (i as f64 + 1.0) / (k as f64 + 1.0))
        .collect();
    TargetScene {
        doas,
        reflected_power_dbm: vec![template.reflected_power_dbm; k],
        distances: vec![template.center_distance; k],
        pathloss: template.pathloss,
        bandwidth: template.bandwidth,
        echo_waveform: template.echo_waveform,
        aperture_m2: template.aperture_m2,
    }
}

/// Derive the physics front end for an experiment.
pub fn front_end_for(exp: &Experiment) -> Result<FrontEnd> {
    derive_front_end(
        &exp.sys,
        &exp.optics,
        &exp.pd,
        &exp.lo,
        exp.scene.bandwidth,
        exp.gamma2_total,
        exp.rational.as_ref(),
    )
}

/// Physics inspection table: the front end evaluated with the operating
/// point swept across `grid_rad` (rad/s). Columns are consistent by
/// construction (`kappa` = alpha2 |chi'| etc.) and `varpi_psl` carries the
/// `inf` marker at PSL divergences.
pub fn physics_csv(exp: &Experiment, grid_rad: &[f64]) -> Result<String> {
    let mut out = String::from(
        "omega_rf_mhz,chi_re,chi_im,dchi_re,dchi_im,kappa,varphi_rad,rho,phi_re,phi_im,varpi_psl,varpi_sql\n",
    );
    let n = exp.n_samples;
    for &omega in grid_rad {
        let mut probe_exp = exp.clone();
        probe_exp.optics.omega_l = omega;
        probe_exp.lo.omega_l = omega;
        let fe = front_end_for(&probe_exp).map_err(|e| {
            Error::NumericalFailure(format!(
                "physics grid point {} MHz: {e}",
                omega / (2.0 * std::f64::consts::PI * 1e6)
            ))
        })?;
        let varpi_psl = fe.varpi(crate::transducer::NoiseRegime::Psl, n, true)?;
        let varpi_sql = fe.varpi(crate::transducer::NoiseRegime::Sql, n, true)?;
        out.push_str(&format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{}\n",
            format_value(omega / (2.0 * std::f64::consts::PI * 1e6)),
            fe.chi.re,
            fe.chi.im,
            fe.chi_deriv.re,
            fe.chi_deriv.im,
            fe.response.kappa,
            fe.response.varphi,
            fe.response.rho,
            fe.response.phi_ref.re,
            fe.response.phi_ref.im,
            format_mse(varpi_psl),
            format_mse(varpi_sql),
        ));
    }
    Ok(out)
}

fn nominal_rows(
    exp: &Experiment,
    front_end: &FrontEnd,
    sweep: SweepVariable,
    value: f64,
) -> Result<Vec<SweepRow>> {
    let scene = nominal_scene(&exp.scene);
    let n = exp.n_samples;
    let mut rows = Vec::new();
    for &regime in &exp.regimes {
        let (varpi, r_s, vartheta) = match regime {
            Regime::Psl | Regime::Sql => {
                let varpi = front_end.varpi(regime.quantum().expect("quantum"), n, true)?;
                let amps = crate::arraymodel::echo_amplitudes(&scene, &exp.geom)?;
                let r_s = CMat::from_diagonal(&crate::numkernel::CVec::from_vec(
                    amps.iter().map(|&a| Complex64::new(a * a, 0.0)).collect(),
                ));
                (varpi, r_s, exp.lo.vartheta)
            }
            Regime::Classical => {
                let varpi = exp.classical_rx.noise_power(scene.bandwidth) / (2.0 * n as f64);
                let amps = exp.classical_rx.signal_amplitudes(&scene)?;
                let r_s = CMat::from_diagonal(&crate::numkernel::CVec::from_vec(
                    amps.iter().map(|&a| Complex64::new(a * a, 0.0)).collect(),
                ));
                (varpi, r_s, 0.0)
            }
        };
        for (kind, tag) in [
            (EstimatorKind::Crlb, "crlb_nominal"),
            (EstimatorKind::RaqMl, "raq_ml_nominal"),
        ] {
            let mse_value = if !varpi.is_finite() {
                f64::INFINITY
            } else {
                match kind {
                    EstimatorKind::Crlb => {
                        crlb(&scene.doas, &exp.geom, vartheta, &r_s, varpi)?
                    }
                    _ => ml_asymptotic_error(&scene.doas, &exp.geom, vartheta, &r_s, varpi, n)?,
                }
            };
            rows.push(SweepRow {
                sweep_var: sweep.column_tag().into(),
                value,
                estimator: tag.into(),
                regime: regime.as_str().into(),
                mse: mse_value,
                trials: 0,
                excluded: 0,
                seed: exp.master_seed,
            });
        }
    }
    Ok(rows)
}

/// Run a full sweep: `trials` independent trials per grid value, aggregated
/// per (estimator, regime), plus analytic nominal rows. Bit-exact
/// reproducible for a fixed experiment and master seed.
pub fn run_sweep(exp: &Experiment, sweep: SweepVariable, grid: &[f64]) -> Result<SweepTable> {
    if grid.is_empty() {
        return Err(Error::invalid("empty sweep grid"));
    }
    for w in grid.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::invalid("sweep grid must be strictly increasing"));
        }
    }
    if exp.trials < 1 {
        return Err(Error::invalid("need at least one trial"));
    }

    let mut table = SweepTable {
        sweep: sweep.name().into(),
        ..Default::default()
    };

    for (grid_idx, &value) in grid.iter().enumerate() {
        let exp_g = sweep.apply(exp, value).map_err(|e| {
            Error::NumericalFailure(format!("grid point {}={value}: {e}", sweep.column_tag()))
        })?;
        let front_end = front_end_for(&exp_g).map_err(|e| {
            Error::NumericalFailure(format!("grid point {}={value}: {e}", sweep.column_tag()))
        })?;

        let trial_results: Vec<Vec<TrialResult>> = (0..exp_g.trials as u64)
            .into_par_iter()
            .map(|t| run_trial(&exp_g, &front_end, value, grid_idx as u64, t))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| {
                Error::NumericalFailure(format!(
                    "grid point {}={value}: {e}",
                    sweep.column_tag()
                ))
            })?;

        // reduce in (estimator, regime) groups, deterministic order
        for &estimator in &exp_g.estimators {
            for &regime in &exp_g.regimes {
                if estimator == EstimatorKind::RaqEsprit && regime == Regime::Classical {
                    continue;
                }
                let mut sum = 0.0f64;
                let mut used = 0usize;
                let mut excluded = 0usize;
                let mut unbounded = false;
                for per_trial in &trial_results {
                    for r in per_trial
                        .iter()
                        .filter(|r| r.estimator == estimator && r.regime == regime)
                    {
                        if r.unbounded {
                            unbounded = true;
                        } else if r.converged && r.squared_error.is_finite() {
                            sum += r.squared_error;
                            used += 1;
                        } else {
                            excluded += 1;
                        }
                    }
                }
                let mse_value = if unbounded {
                    f64::INFINITY
                } else if used > 0 {
                    sum / used as f64
                } else {
                    f64::NAN
                };
                if excluded * 100 > exp_g.trials {
                    table.warnings.push(format!(
                        "{}={}: {}/{} excluded {} trials ({regime})",
                        sweep.column_tag(),
                        value,
                        estimator.as_str(),
                        excluded,
                        exp_g.trials,
                    ));
                }
                table.rows.push(SweepRow {
                    sweep_var: sweep.column_tag().into(),
                    value,
                    estimator: estimator.as_str().into(),
                    regime: regime.as_str().into(),
                    mse: mse_value,
                    trials: used,
                    excluded,
                    seed: exp_g.master_seed,
                });
            }
        }
        table.rows.extend(nominal_rows(&exp_g, &front_end, sweep, value)?);
    }

    table.rows.sort_by(|a, b| {
        a.value
            .partial_cmp(&b.value)
            .expect("finite grid")
            .then_with(|| a.estimator.cmp(&b.estimator))
            .then_with(|| a.regime.cmp(&b.regime))
    });
    Ok(table)
}
