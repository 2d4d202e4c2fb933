//! DOA estimation and error bounds.
//!
//! The subspace path splits the array into the two overlapping groups
//! {1..M-1} and {2..M}, stacks their sample matrices, and reads the target
//! DOAs off the eigenvalues of pinv(U1) U2. The LO plane wave leaves a
//! known phase gradient across the sensors; the corrected estimator undoes
//! it with the multiplicative factor e^{+j (2 pi / lambda) d sin(vartheta)},
//! the uncorrected one is classical ESPRIT. The deterministic-signal ML
//! objective, its asymptotic error, and the CRLB complete the picture.

use num_complex::Complex64;

use crate::arraymodel::{
    lo_mismatch_matrix, steering_derivative_matrix, steering_matrix, ArrayGeometry,
};
use crate::error::{Error, Result};
use crate::numkernel::{self, CMat};

/// Tolerated arcsin-argument overflow before an estimate is flagged.
const CLAMP_WARN_TOL: f64 = 1e-6;

/// A DOA estimate, sorted ascending.
#[derive(Debug, Clone)]
pub struct DoaEstimate {
    /// Estimated DOAs (rad), ascending, length K.
    pub doas: Vec<f64>,
    /// Rotation eigenvalues sigma_k (diagnostics), ordered like `doas`.
    pub eigenvalues: Vec<Complex64>,
    /// Producing method tag.
    pub method: &'static str,
    /// True when an arcsin argument exceeded 1 by more than the tolerance.
    pub clamp_warning: bool,
    /// False when an iterative search hit its cap before converging.
    pub converged: bool,
}

/// Signal subspace of the stacked two-group sample matrix.
#[derive(Debug, Clone)]
pub struct SubspaceDecomposition {
    /// Rows 1..M-1 of the top-K left singular vectors.
    pub u1: CMat,
    /// Rows M..2(M-1) of the top-K left singular vectors.
    pub u2: CMat,
    /// All singular values of the stacked matrix, descending.
    pub singulars: Vec<f64>,
}

/// Split an M x N snapshot matrix into the two overlapping subarray groups.
pub fn split_subarrays(y: &CMat) -> Result<(CMat, CMat)> {
    let m = y.nrows();
    if m < 2 {
        return Err(Error::invalid("need at least 2 sensors to form subarrays"));
    }
    Ok((y.rows(0, m - 1).into_owned(), y.rows(1, m - 1).into_owned()))
}

/// Top-K signal subspace of the stacked matrix [Y1; Y2].
pub fn signal_subspace(y_stacked: &CMat, k: usize) -> Result<SubspaceDecomposition> {
    let rows = y_stacked.nrows();
    if rows % 2 != 0 {
        return Err(Error::invalid("stacked matrix must have 2(M-1) rows"));
    }
    let m_minus_1 = rows / 2;
    let m = m_minus_1 + 1;
    if k < 1 {
        return Err(Error::invalid("need at least one target"));
    }
    if k >= m {
        return Err(Error::invalid(format!("K = {k} must be below M = {m}")));
    }
    if y_stacked.ncols() < k {
        return Err(Error::invalid(format!(
            "need at least K = {k} snapshots, got {}",
            y_stacked.ncols()
        )));
    }
    let dec = numkernel::svd(y_stacked)?;
    let u = dec.u.columns(0, k).into_owned();
    Ok(SubspaceDecomposition {
        u1: u.rows(0, m_minus_1).into_owned(),
        u2: u.rows(m_minus_1, m_minus_1).into_owned(),
        singulars: dec.singular_values,
    })
}

fn esprit_core(
    y1: &CMat,
    y2: &CMat,
    k: usize,
    geom: &ArrayGeometry,
    correction_phase: f64,
    method: &'static str,
) -> Result<DoaEstimate> {
    if y1.shape() != y2.shape() {
        return Err(Error::invalid("subarray matrices must have equal shapes"));
    }
    let stacked = CMat::from_fn(2 * y1.nrows(), y1.ncols(), |i, j| {
        if i < y1.nrows() {
            y1[(i, j)]
        } else {
            y2[(i - y1.nrows(), j)]
        }
    });
    let sub = signal_subspace(&stacked, k)?;
    let psi = numkernel::pinv(&sub.u1)? * &sub.u2;
    let eig = numkernel::eig_general(&psi)?;

    let beta = 2.0 * std::f64::consts::PI / geom.carrier_wavelength * geom.spacing;
    let correction = Complex64::from_polar(1.0, correction_phase);
    let mut clamp_warning = false;
    let mut pairs: Vec<(f64, Complex64)> = eig
        .values
        .iter()
        .map(|&sigma| {
            let arg = (correction * sigma).arg() / beta;
            if arg.abs() > 1.0 + CLAMP_WARN_TOL {
                clamp_warning = true;
            }
            (arg.clamp(-1.0, 1.0).asin(), sigma)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite DOA"));
    Ok(DoaEstimate {
        doas: pairs.iter().map(|p| p.0).collect(),
        eigenvalues: pairs.iter().map(|p| p.1).collect(),
        method,
        clamp_warning,
        converged: true,
    })
}

/// Mismatch-corrected ESPRIT: applies e^{+j (2 pi / lambda) d sin(vartheta)}
/// to the rotation eigenvalues before reading off the DOAs.
pub fn raq_esprit(
    y1: &CMat,
    y2: &CMat,
    k: usize,
    geom: &ArrayGeometry,
    vartheta: f64,
) -> Result<DoaEstimate> {
    esprit_core(y1, y2, k, geom, geom.phase_gradient(vartheta), "raq_esprit")
}

/// Classical ESPRIT (no LO correction).
pub fn classical_esprit(
    y1: &CMat,
    y2: &CMat,
    k: usize,
    geom: &ArrayGeometry,
) -> Result<DoaEstimate> {
    esprit_core(y1, y2, k, geom, 0.0, "classical_esprit")
}

/// Search options for the ML estimator.
#[derive(Debug, Clone, Copy)]
pub struct MlSearchOptions {
    /// Coarse grid step (rad).
    pub grid_step: f64,
    /// Golden-section convergence tolerance (rad).
    pub refine_tol: f64,
    /// Maximum coordinate-ascent rounds.
    pub max_rounds: usize,
}

impl Default for MlSearchOptions {
    fn default() -> Self {
        MlSearchOptions {
            grid_step: 0.5f64.to_radians(),
            refine_tol: 1e-4,
            max_rounds: 20,
        }
    }
}

/// Deterministic-signal ML objective Re Tr(P R_y) with
/// P = D A (A^H A)^{-1} A^H D^H.
pub fn ml_objective(doas: &[f64], geom: &ArrayGeometry, vartheta: f64, r_y: &CMat) -> f64 {
    let a = steering_matrix(doas, geom);
    let d = lo_mismatch_matrix(vartheta, geom);
    let b = d * a;
    let gram = b.adjoint() * &b;
    let ginv = match gram.clone().try_inverse() {
        Some(inv) => inv,
        None => match numkernel::pinv(&gram) {
            Ok(p) => p,
            Err(_) => return f64::NEG_INFINITY,
        },
    };
    let c = b.adjoint() * r_y * &b;
    (ginv * c).trace().re
}

/// Maximum-likelihood DOA search by greedy initialization, coordinate-wise
/// grid scan, and per-coordinate golden-section refinement.
///
/// Exhaustive-quality only for K <= 3 (documented limit; larger K is
/// rejected).
pub fn raq_ml(
    y: &CMat,
    k: usize,
    geom: &ArrayGeometry,
    vartheta: f64,
    opts: &MlSearchOptions,
) -> Result<DoaEstimate> {
    if k < 1 || k > 3 {
        return Err(Error::invalid("ML search supports 1 <= K <= 3"));
    }
    if k >= geom.m_sensors {
        return Err(Error::invalid("K must be below M"));
    }
    let n = y.ncols();
    let r_y = y * y.adjoint() / Complex64::new(n as f64, 0.0);
    let domain = std::f64::consts::FRAC_PI_2 - 1e-3;

    let grid: Vec<f64> = {
        let mut g = Vec::new();
        let mut x = -domain;
        while x <= domain {
            g.push(x);
            x += opts.grid_step;
        }
        g
    };

    let eval = |doas: &[f64]| ml_objective(doas, geom, vartheta, &r_y);

    // Greedy initialization: add one coordinate at a time at its best grid
    // point given the ones already chosen.
    let mut doas: Vec<f64> = Vec::with_capacity(k);
    for _ in 0..k {
        doas.push(0.0);
        let idx = doas.len() - 1;
        let mut best = (f64::NEG_INFINITY, 0.0);
        for &g in &grid {
            doas[idx] = g;
            let val = eval(&doas);
            if val > best.0 {
                best = (val, g);
            }
        }
        doas[idx] = best.1;
    }

    let mut objective = eval(&doas);
    let mut converged = false;
    for _ in 0..opts.max_rounds {
        let mut moved = 0.0f64;
        for idx in 0..k {
            // coarse rescan of this coordinate
            let mut best = (objective, doas[idx]);
            let original = doas[idx];
            for &g in &grid {
                doas[idx] = g;
                let val = eval(&doas);
                if val > best.0 {
                    best = (val, g);
                }
            }
            doas[idx] = best.1;
            // golden-section refinement around the best grid point
            let lo = (best.1 - opts.grid_step).max(-domain);
            let hi = (best.1 + opts.grid_step).min(domain);
            let refined = golden_section_max(
                |x| {
                    doas[idx] = x;
                    let v = eval(&doas);
                    doas[idx] = best.1;
                    v
                },
                lo,
                hi,
                opts.refine_tol,
            );
            doas[idx] = refined.0;
            let val = eval(&doas);
            if val >= objective {
                objective = val;
            } else {
                // never let refinement move the objective backwards
                doas[idx] = best.1;
                objective = best.0;
            }
            moved = moved.max((doas[idx] - original).abs());
        }
        if moved <= opts.refine_tol {
            converged = true;
            break;
        }
    }

    let mut sorted = doas.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite DOA"));
    Ok(DoaEstimate {
        doas: sorted,
        eigenvalues: Vec::new(),
        method: "raq_ml",
        clamp_warning: false,
        converged,
    })
}

fn golden_section_max(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    (mid, f(mid))
}

fn real_hadamard_transposed(h: &CMat, r: &CMat) -> nalgebra::DMatrix<f64> {
    // Re{ H o R^T }
    let k = h.nrows();
    nalgebra::DMatrix::from_fn(k, k, |i, j| (h[(i, j)] * r[(j, i)]).re)
}

struct BoundTerms {
    x: nalgebra::DMatrix<f64>,
    gram_inv: CMat,
}

fn bound_terms(
    doas: &[f64],
    geom: &ArrayGeometry,
    vartheta: f64,
    r_s: &CMat,
) -> Result<BoundTerms> {
    let k = doas.len();
    if k == 0 || k >= geom.m_sensors {
        return Err(Error::InvalidScene("need 1 <= K < M".into()));
    }
    if r_s.nrows() != k || r_s.ncols() != k {
        return Err(Error::InvalidScene("R_s must be K x K".into()));
    }
    let a = steering_matrix(doas, geom);
    let da = steering_derivative_matrix(doas, geom);
    let d = lo_mismatch_matrix(vartheta, geom);
    let gram = a.adjoint() * &a;
    let gram_inv = gram
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidScene("A^H A is singular".into()))?;
    let b = &d * &a;
    let p = &b * &gram_inv * b.adjoint();
    let eye = CMat::identity(geom.m_sensors, geom.m_sensors);
    let dda = &d * &da;
    let h = dda.adjoint() * (eye - p) * &dda;
    let x = real_hadamard_transposed(&h, r_s);
    Ok(BoundTerms { x, gram_inv })
}

/// Asymptotic multi-target ML estimation error (rad^2, summed over targets).
pub fn ml_asymptotic_error(
    doas: &[f64],
    geom: &ArrayGeometry,
    vartheta: f64,
    r_s: &CMat,
    varpi: f64,
    n_samples: usize,
) -> Result<f64> {
    let terms = bound_terms(doas, geom, vartheta, r_s)?;
    let rs_inv = r_s
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidScene("R_s is singular".into()))?;
    let w = &rs_inv
        + &rs_inv * &terms.gram_inv * &rs_inv * Complex64::new(2.0 * n_samples as f64 * varpi, 0.0);
    let rwr = r_s * w * r_s;

    // recompute H once more for the second Hadamard product
    let a = steering_matrix(doas, geom);
    let da = steering_derivative_matrix(doas, geom);
    let d = lo_mismatch_matrix(vartheta, geom);
    let gram_inv = (a.adjoint() * &a)
        .try_inverse()
        .ok_or_else(|| Error::InvalidScene("A^H A is singular".into()))?;
    let b = &d * &a;
    let p = &b * gram_inv * b.adjoint();
    let eye = CMat::identity(geom.m_sensors, geom.m_sensors);
    let dda = &d * &da;
    let h = dda.adjoint() * (eye - p) * &dda;
    let y = real_hadamard_transposed(&h, &rwr);

    let x_inv = terms
        .x
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidScene("Re{H o R_s^T} is singular".into()))?;
    Ok(varpi * (&x_inv * &x_inv * y).trace())
}

/// Cramer-Rao lower bound (rad^2, summed over targets).
pub fn crlb(
    doas: &[f64],
    geom: &ArrayGeometry,
    vartheta: f64,
    r_s: &CMat,
    varpi: f64,
) -> Result<f64> {
    let terms = bound_terms(doas, geom, vartheta, r_s)?;
    let x_inv = terms
        .x
        .try_inverse()
        .ok_or_else(|| Error::InvalidScene("Re{H o R_s^T} is singular".into()))?;
    Ok(varpi * x_inv.trace())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arraymodel::{
        echo_amplitudes, lo_mismatch_matrix, synthesize_snapshots, EchoWaveform, PathLossModel,
        Regime, TargetScene,
    };
    use crate::transducer::SensorResponse;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn geom(m: usize) -> ArrayGeometry {
        ArrayGeometry::half_wavelength(m, 6.9458e9)
    }

    fn flat_response() -> SensorResponse {
        SensorResponse {
            rho: 1.0,
            phi_ref: Complex64::new(1.0, 0.0),
            kappa: 1.0,
            varphi: 0.0,
        }
    }

    fn scene(doas_deg: &[f64]) -> TargetScene {
        let k = doas_deg.len();
        TargetScene {
            doas: doas_deg.iter().map(|d| d.to_radians()).collect(),
            reflected_power_dbm: vec![23.0; k],
            distances: vec![1500.0; k],
            pathloss: PathLossModel {
                k0_db: -30.0,
                exponent: 2.0,
                u0: 1.0,
            },
            bandwidth: 1e5,
            echo_waveform: EchoWaveform::GaussianUnitPower,
            aperture_m2: None,
        }
    }

    fn noiseless(
        doas_deg: &[f64],
        m: usize,
        vartheta: f64,
        n: usize,
        seed: u64,
    ) -> (CMat, CMat, ArrayGeometry) {
        let g = geom(m);
        let sc = scene(doas_deg);
        let snap =
            synthesize_snapshots(&sc, &g, &flat_response(), vartheta, n, 0.0, Regime::Psl, seed)
                .unwrap();
        let (y1, y2) = split_subarrays(&snap.y).unwrap();
        (y1, y2, g)
    }

    #[test]
    fn subspace_rank_gap_and_split() {
        let (y1, y2, _) = noiseless(&[-20.0, 5.0, 40.0], 10, 0.3, 64, 2);
        let stacked = CMat::from_fn(2 * y1.nrows(), y1.ncols(), |i, j| {
            if i < y1.nrows() {
                y1[(i, j)]
            } else {
                y2[(i - y1.nrows(), j)]
            }
        });
        let sub = signal_subspace(&stacked, 3).unwrap();
        assert_eq!(sub.u1.shape(), (9, 3));
        assert_eq!(sub.u2.shape(), (9, 3));
        let ratio = sub.singulars[2] / sub.singulars[3].max(f64::MIN_POSITIVE);
        assert!(ratio > 1e8, "rank gap ratio {ratio:.3e}");
    }

    #[test]
    fn subspace_spans_stacked_steering_space() {
        let m = 10usize;
        let vartheta = 0.25f64;
        let doas = [-0.5f64, 0.1, 0.9];
        let (y1, y2, g) = noiseless(
            &doas.iter().map(|r| r.to_degrees()).collect::<Vec<_>>(),
            m,
            vartheta,
            64,
            4,
        );
        let stacked = CMat::from_fn(2 * (m - 1), y1.ncols(), |i, j| {
            if i < m - 1 {
                y1[(i, j)]
            } else {
                y2[(i - (m - 1), j)]
            }
        });
        let sub = signal_subspace(&stacked, 3).unwrap();
        let u = CMat::from_fn(2 * (m - 1), 3, |i, j| {
            if i < m - 1 {
                sub.u1[(i, j)]
            } else {
                sub.u2[(i - (m - 1), j)]
            }
        });
        // build Abar = [D1 A1; e^{-j b sin(vartheta)} D1 A1 Theta]
        let a = steering_matrix(&doas, &g);
        let d = lo_mismatch_matrix(vartheta, &g);
        let da = &d * &a;
        let da1 = da.rows(0, m - 1).into_owned();
        let da2 = da.rows(1, m - 1).into_owned();
        let abar = CMat::from_fn(2 * (m - 1), 3, |i, j| {
            if i < m - 1 {
                da1[(i, j)]
            } else {
                da2[(i - (m - 1), j)]
            }
        });
        // orthonormal basis of span(Abar)
        let qa = numkernel::svd(&abar).unwrap().u;
        // largest principal angle via the projector residual
        let resid = &u - &qa * (qa.adjoint() * &u);
        let angle = numkernel::svd(&resid).unwrap().singular_values[0];
        assert!(angle <= 1e-8, "principal angle {angle:.3e}");
    }

    #[test]
    fn raq_esprit_exact_recovery_noiseless() {
        let doas = [-34.0, 11.5, 52.0];
        let (y1, y2, g) = noiseless(&doas, 10, 20f64.to_radians(), 50, 7);
        let est = raq_esprit(&y1, &y2, 3, &g, 20f64.to_radians()).unwrap();
        for (est_doa, truth) in est.doas.iter().zip(doas.iter()) {
            assert!(
                (est_doa - truth.to_radians()).abs() <= 1e-8,
                "{est_doa} vs {truth}"
            );
        }
        assert!(!est.clamp_warning);
        // noiseless rotation eigenvalues are unimodular
        for sigma in &est.eigenvalues {
            assert_relative_eq!(sigma.norm(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn raq_equals_classical_without_mismatch() {
        let (y1, y2, g) = noiseless(&[-15.0, 30.0], 8, 0.0, 40, 9);
        let raq = raq_esprit(&y1, &y2, 2, &g, 0.0).unwrap();
        let classical = classical_esprit(&y1, &y2, 2, &g).unwrap();
        for (a, b) in raq.doas.iter().zip(classical.doas.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn single_target_mismatch_bias() {
        let vartheta = 30f64.to_radians();
        let (y1, y2, g) = noiseless(&[0.0], 10, vartheta, 50, 11);
        let raq = raq_esprit(&y1, &y2, 1, &g, vartheta).unwrap();
        assert!(raq.doas[0].abs() < 1e-10, "raq biasless: {}", raq.doas[0]);
        let classical = classical_esprit(&y1, &y2, 1, &g).unwrap();
        assert_relative_eq!(
            classical.doas[0],
            -vartheta,
            epsilon = 1e-10
        );
    }

    #[test]
    fn correction_identity_matches_demismatched_data() {
        let vartheta = 0.42f64;
        let doas = [-40.0, -5.0, 25.0];
        let g = geom(12);
        let sc = scene(&doas);
        let snap = synthesize_snapshots(
            &sc,
            &g,
            &flat_response(),
            vartheta,
            60,
            0.0,
            Regime::Psl,
            13,
        )
        .unwrap();
        let (y1, y2) = split_subarrays(&snap.y).unwrap();
        let raq = raq_esprit(&y1, &y2, 3, &g, vartheta).unwrap();
        // remove the mismatch from the data and run classical ESPRIT
        let d = lo_mismatch_matrix(vartheta, &g);
        let clean = d.adjoint() * &snap.y;
        let (c1, c2) = split_subarrays(&clean).unwrap();
        let classical = classical_esprit(&c1, &c2, 3, &g).unwrap();
        for (a, b) in raq.doas.iter().zip(classical.doas.iter()) {
            assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn esprit_rejects_bad_k() {
        let (y1, y2, g) = noiseless(&[0.0], 4, 0.0, 10, 1);
        assert!(raq_esprit(&y1, &y2, 4, &g, 0.0).is_err());
        assert!(raq_esprit(&y1, &y2, 0, &g, 0.0).is_err());
    }

    #[test]
    fn ml_objective_absorbs_unitary_mismatch() {
        let g = geom(8);
        let vartheta = 0.5;
        let sc = scene(&[-20.0, 10.0]);
        let snap = synthesize_snapshots(
            &sc,
            &g,
            &flat_response(),
            vartheta,
            30,
            1e-8,
            Regime::Psl,
            17,
        )
        .unwrap();
        let n = snap.y.ncols() as f64;
        let r_y = &snap.y * snap.y.adjoint() / Complex64::new(n, 0.0);
        let d = lo_mismatch_matrix(vartheta, &g);
        let y_white = d.adjoint() * &snap.y;
        let r_y_white = &y_white * y_white.adjoint() / Complex64::new(n, 0.0);
        for trial_doas in [[-0.3, 0.2], [-0.35, 0.18], [0.0, 0.4]] {
            let with_d = ml_objective(&trial_doas, &g, vartheta, &r_y);
            let without = ml_objective(&trial_doas, &g, 0.0, &r_y_white);
            assert_relative_eq!(with_d, without, max_relative = 1e-12);
        }
    }

    #[test]
    fn ml_single_target_noiseless_recovery() {
        let truth = 17.3f64.to_radians();
        let g = geom(10);
        let sc = scene(&[17.3]);
        let vartheta = 0.3;
        let snap =
            synthesize_snapshots(&sc, &g, &flat_response(), vartheta, 40, 0.0, Regime::Psl, 23)
                .unwrap();
        let est = raq_ml(&snap.y, 1, &g, vartheta, &MlSearchOptions::default()).unwrap();
        assert!(est.converged);
        assert!(
            (est.doas[0] - truth).abs() <= 1e-4,
            "ml {} vs {}",
            est.doas[0],
            truth
        );
    }

    #[test]
    fn ml_two_targets_agrees_with_esprit_at_high_snr() {
        let g = geom(10);
        let sc = scene(&[-24.0, 31.0]);
        let vartheta = 0.35;
        let amps = echo_amplitudes(&sc, &g).unwrap();
        let sigma2 = 1e-8 * amps[0] * amps[0];
        let snap =
            synthesize_snapshots(&sc, &g, &flat_response(), vartheta, 50, sigma2, Regime::Psl, 29)
                .unwrap();
        let (y1, y2) = split_subarrays(&snap.y).unwrap();
        let esp = raq_esprit(&y1, &y2, 2, &g, vartheta).unwrap();
        let ml = raq_ml(&snap.y, 2, &g, vartheta, &MlSearchOptions::default()).unwrap();
        for (a, b) in ml.doas.iter().zip(esp.doas.iter()) {
            assert!(
                (a - b).abs() <= 0.05f64.to_radians(),
                "ml {a} vs esprit {b}"
            );
        }
    }

    fn random_r_s(k: usize, rng: &mut impl Rng) -> CMat {
        // random full-rank Hermitian PSD signal covariance
        let f = CMat::from_fn(k, k, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        &f * f.adjoint() + CMat::identity(k, k) * Complex64::new(0.1, 0.0)
    }

    #[test]
    fn bounds_ordering_and_scaling() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let g = geom(10);
        for _ in 0..100 {
            let k = 1 + rng.random_range(0..3usize);
            let mut doas: Vec<f64> = Vec::new();
            while doas.len() < k {
                let cand = (rng.random::<f64>() - 0.5) * 160f64.to_radians();
                if doas.iter().all(|d: &f64| (d - cand).abs() > 2f64.to_radians()) {
                    doas.push(cand);
                }
            }
            doas.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let vartheta = (rng.random::<f64>() - 0.5) * 1.2;
            let r_s = random_r_s(k, &mut rng);
            let n = 50usize;
            let varpi = 1e-3 / n as f64;
            let bound = crlb(&doas, &g, vartheta, &r_s, varpi).unwrap();
            let ml_err = ml_asymptotic_error(&doas, &g, vartheta, &r_s, varpi, n).unwrap();
            assert!(bound > 0.0);
            assert!(
                ml_err >= bound * (1.0 - 1e-10),
                "ordering violated: {ml_err:.6e} < {bound:.6e}"
            );
            // exact 1/N when varpi carries the 1/N
            let varpi2 = 1e-3 / (2 * n) as f64;
            let bound2 = crlb(&doas, &g, vartheta, &r_s, varpi2).unwrap();
            let ml2 = ml_asymptotic_error(&doas, &g, vartheta, &r_s, varpi2, 2 * n).unwrap();
            assert_relative_eq!(bound2, bound / 2.0, max_relative = 1e-10);
            assert_relative_eq!(ml2, ml_err / 2.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn ml_error_collapses_to_crlb_for_vanishing_noise() {
        let g = geom(10);
        let doas = [-0.4, 0.3];
        let mut rng = ChaCha12Rng::seed_from_u64(37);
        let r_s = random_r_s(2, &mut rng);
        let varpi = 1e-15;
        let bound = crlb(&doas, &g, 0.2, &r_s, varpi).unwrap();
        let ml_err = ml_asymptotic_error(&doas, &g, 0.2, &r_s, varpi, 50).unwrap();
        assert_relative_eq!(ml_err / bound, 1.0, max_relative = 1e-6);
    }

    #[test]
    fn crlb_single_source_closed_form() {
        // deterministic single-source ULA CRLB:
        // eps = 12 varpi / (p beta^2 M (M^2 - 1)), beta = (2 pi / lambda) d cos(theta)
        let g = geom(10);
        let theta = 0.3f64;
        let p = 2.5e-4;
        let varpi = 3.7e-9;
        let r_s = CMat::from_element(1, 1, Complex64::new(p, 0.0));
        let got = crlb(&[theta], &g, 0.0, &r_s, varpi).unwrap();
        let m = g.m_sensors as f64;
        let beta = 2.0 * std::f64::consts::PI / g.carrier_wavelength * g.spacing * theta.cos();
        let oracle = 12.0 * varpi / (p * beta * beta * m * (m * m - 1.0));
        assert_relative_eq!(got, oracle, max_relative = 1e-9);
    }

    #[test]
    fn crlb_invariant_to_lo_direction() {
        let g = geom(10);
        let doas = [-0.7, -0.1, 0.5];
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        let r_s = random_r_s(3, &mut rng);
        let varpi = 1e-8;
        let at0 = crlb(&doas, &g, 0.0, &r_s, varpi).unwrap();
        let at40 = crlb(&doas, &g, 40f64.to_radians(), &r_s, varpi).unwrap();
        assert_relative_eq!(at0, at40, max_relative = 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn prop_classical_bias_law(
            theta_deg in -45.0f64..45.0,
            vartheta_deg in -30.0f64..30.0,
        ) {
            // |sin(theta) - sin(vartheta)| <= 1 here, so no phase wrap
            let vartheta = vartheta_deg.to_radians();
            let (y1, y2, g) = noiseless(&[theta_deg], 8, vartheta, 24, 47);
            let est = classical_esprit(&y1, &y2, 1, &g).unwrap();
            let expect = (theta_deg.to_radians().sin() - vartheta.sin()).clamp(-1.0, 1.0).asin();
            prop_assert!((est.doas[0] - expect).abs() <= 1e-10);
        }

        #[test]
        fn prop_exact_recovery_small_arrays(
            seed in 0u64..400,
            m in 4usize..12,
            k in 1usize..4,
        ) {
            prop_assume!(k <= m - 2);
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut doas: Vec<f64> = Vec::new();
            while doas.len() < k {
                let cand = (rng.random::<f64>() - 0.5) * 170.0;
                if doas.iter().all(|d: &f64| (d - cand).abs() > 2.0) {
                    doas.push(cand);
                }
            }
            let vartheta = (rng.random::<f64>() - 0.5) * 1.4;
            let (y1, y2, g) = noiseless(&doas, m, vartheta, 32, seed.wrapping_add(1));
            let est = raq_esprit(&y1, &y2, k, &g, vartheta).unwrap();
            let mut truth: Vec<f64> = doas.iter().map(|d| d.to_radians()).collect();
            truth.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (e, t) in est.doas.iter().zip(truth.iter()) {
                prop_assert!((e - t).abs() <= 1e-8, "est {e} truth {t}");
            }
        }
    }
}
