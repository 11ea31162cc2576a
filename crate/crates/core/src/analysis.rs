//! Gain zone, numerical Lyapunov certificate and trajectory diagnostics.
//!
//! The certificate assembles, for a concrete graph and root, the objects
//! that make the weighted Lyapunov function
//! `V = (1 − h) V₁ + h V₂` strictly decreasing off the origin:
//!
//! * `D̄`, the contraction matrix of the estimation error `e`,
//! * `Ψ = D̄ ⊗ A − I` and its induced 2-norm,
//! * the zone margin `ε = 1 − (1 + k₁ − k₂)² / (1 − k₁)`,
//! * the weight `h`, placed halfway between its lower threshold and 1,
//! * `P_D` solving `(D̄⊗A)ᵀ P_D (D̄⊗A) − P_D = −2I`,
//! * the 2×2 matrix `Φ`, which must be negative definite.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dynamics::plant_a;
use crate::graph::{GraphError, NodeId, WeightedDigraph};
use crate::matkernel::{self, kron, Matrix, MatrixError};
use crate::sim::{Coupling, Trajectory};

/// Maximum Frobenius residual accepted for `P_D`.
pub const LYAPUNOV_RESIDUAL_TOL: f64 = 1e-8;
/// Default disagreement threshold for convergence.
pub const DEFAULT_THRESHOLD: f64 = 1e-6;
/// Default number of trailing steps that must stay below the threshold.
pub const DEFAULT_DWELL: usize = 50;
/// Decay fits stop once the norm falls below this fraction of its peak,
/// where rounding in the recorded states starts to dominate.
pub const DECAY_FIT_RELATIVE_FLOOR: f64 = 1e-9;
const DECAY_FIT_ABSOLUTE_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("gains (k1={k1}, k2={k2}) lie outside the open solvable zone")]
    OutsideZone { k1: f64, k2: f64 },
    #[error("agent dimension must be at least 1")]
    ZeroDimension,
    #[error("certificate failure: {0}")]
    CertificateFailure(String),
    #[error("trajectory is missing recorded {0}")]
    MissingSignal(&'static str),
    #[error("trajectory does not match certificate: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Membership in the solvable gain zone `k₁ ∈ (0,1)`, `k₂ > 0`,
/// `(1 + k₁ − k₂)² < 1 − k₁`. The boundary pair `(1, 2)` is accepted only
/// when `allow_boundary_pair` is set.
pub fn gain_zone_check(k1: f64, k2: f64, allow_boundary_pair: bool) -> bool {
    if allow_boundary_pair && k1 == 1.0 && k2 == 2.0 {
        return true;
    }
    k1 > 0.0 && k1 < 1.0 && k2 > 0.0 && (1.0 + k1 - k2).powi(2) < 1.0 - k1
}

/// `ε = 1 − (1 + k₁ − k₂)² / (1 − k₁)`, positive inside the zone.
pub fn epsilon_margin(k1: f64, k2: f64) -> Result<f64, AnalysisError> {
    if !gain_zone_check(k1, k2, false) {
        return Err(AnalysisError::OutsideZone { k1, k2 });
    }
    Ok(1.0 - (1.0 + k1 - k2).powi(2) / (1.0 - k1))
}

/// `Φ` for the given margin data.
pub fn phi_matrix(k1: f64, k2: f64, psi_norm: f64, h: f64) -> Matrix {
    let top = -1.0 + psi_norm.powi(2) * (1.0 - h) * (k1 * k1 + k2 * k2) / h;
    let off = 1.0 + k1 - k2;
    Matrix::from_rows(&[&[top, off], &[off, -(1.0 - k1)]])
}

#[derive(Debug, Clone)]
pub struct LyapunovCertificate {
    pub k1: f64,
    pub k2: f64,
    pub n: usize,
    pub theta: NodeId,
    pub din_bounds: Vec<f64>,
    pub dbar: Matrix,
    /// `D̄ ⊗ A`, the estimation-error transition matrix.
    pub transition: Matrix,
    pub psi: Matrix,
    pub psi_norm: f64,
    pub epsilon: f64,
    pub h: f64,
    pub p_d: Matrix,
    pub phi: Matrix,
    pub contraction_radius: f64,
    pub lyapunov_residual: f64,
    pub phi_eigenvalues: [f64; 2],
}

/// Builds the certificate for root `theta`. `din_bounds` defaults to the
/// exact weighted in-degrees.
pub fn build_certificate(
    g: &WeightedDigraph,
    theta: NodeId,
    din_bounds: Option<&[f64]>,
    k1: f64,
    k2: f64,
    n: usize,
) -> Result<LyapunovCertificate, AnalysisError> {
    if n == 0 {
        return Err(AnalysisError::ZeroDimension);
    }
    let epsilon = epsilon_margin(k1, k2)?;
    let analysis = g.analyze();
    analysis.require_root(theta)?;
    let bounds = din_bounds.map_or_else(|| analysis.default_bounds(), <[f64]>::to_vec);
    let dbar = analysis.dbar(theta, &bounds)?;

    let transition = kron(&dbar, &plant_a(n));
    let dim = transition.rows();
    let psi = &transition - &Matrix::identity(dim);
    let psi_norm = matkernel::spectral_norm(&psi);

    let b = psi_norm.powi(2) * (k1 * k1 + k2 * k2);
    let h_min = b / (epsilon + b);
    let h = h_min + (1.0 - h_min) / 2.0;

    let q = Matrix::identity(dim).scale(2.0);
    let p_d = matkernel::solve_discrete_lyapunov(&transition, &q)?;
    let phi = phi_matrix(k1, k2, psi_norm, h);

    let mut phi_eigenvalues = [0.0; 2];
    phi_eigenvalues.copy_from_slice(&matkernel::symmetric_eigenvalues(&phi)?);
    let cert = LyapunovCertificate {
        k1,
        k2,
        n,
        theta,
        din_bounds: bounds,
        contraction_radius: matkernel::spectral_radius(&transition)?,
        lyapunov_residual: matkernel::lyapunov_residual(&transition, &p_d, &q),
        dbar,
        transition,
        psi,
        psi_norm,
        epsilon,
        h,
        p_d,
        phi,
        phi_eigenvalues,
    };
    cert.verify()?;
    Ok(cert)
}

impl LyapunovCertificate {
    /// Re-checks `Φ ≺ 0`, the Lyapunov residual, `P_D ≻ 0` and
    /// `ρ(D̄ ⊗ A) < 1` from the stored matrices.
    pub fn verify(&self) -> Result<(), AnalysisError> {
        let fail = |msg: String| Err(AnalysisError::CertificateFailure(msg));
        if !(self.h > 0.0 && self.h < 1.0) {
            return fail(format!("weight h = {} outside (0, 1)", self.h));
        }
        if !matkernel::is_positive_definite(&self.phi.scale(-1.0))? {
            return fail(format!("Phi is not negative definite: {:?}", self.phi));
        }
        let q = Matrix::identity(self.transition.rows()).scale(2.0);
        let residual = matkernel::lyapunov_residual(&self.transition, &self.p_d, &q);
        if !(residual < LYAPUNOV_RESIDUAL_TOL) {
            return fail(format!("Lyapunov residual {residual:e}"));
        }
        if !matkernel::is_positive_definite(&self.p_d)? {
            return fail("P_D is not positive definite".into());
        }
        let radius = matkernel::spectral_radius(&self.transition)?;
        if !(radius < 1.0) {
            return fail(format!("transition spectral radius {radius}"));
        }
        Ok(())
    }

    pub fn report(&self, g: &WeightedDigraph) -> CertificateReport {
        CertificateReport {
            k1: self.k1,
            k2: self.k2,
            agents: g.node_count(),
            n: self.n,
            theta: self.theta,
            graph_hash: graph_hash(g),
            epsilon: self.epsilon,
            h: self.h,
            psi_norm: self.psi_norm,
            spectral_radius: self.contraction_radius,
            lyapunov_residual: self.lyapunov_residual,
            phi_eigenvalues: self.phi_eigenvalues.to_vec(),
            p_d_dimension: self.p_d.rows(),
            sound: self.verify().is_ok(),
        }
    }
}

/// Exported certificate record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub k1: f64,
    pub k2: f64,
    pub agents: usize,
    pub n: usize,
    pub theta: NodeId,
    pub graph_hash: String,
    pub epsilon: f64,
    pub h: f64,
    pub psi_norm: f64,
    pub spectral_radius: f64,
    pub lyapunov_residual: f64,
    pub phi_eigenvalues: Vec<f64>,
    pub p_d_dimension: usize,
    pub sound: bool,
}

/// SHA-256 over the node count and the exact bit patterns of all edges.
pub fn graph_hash(g: &WeightedDigraph) -> String {
    let mut hasher = Sha256::new();
    hasher.update((g.node_count() as u64).to_le_bytes());
    for e in g.edges() {
        hasher.update((e.from.index() as u64).to_le_bytes());
        hasher.update((e.to.index() as u64).to_le_bytes());
        hasher.update(e.weight.to_bits().to_le_bytes());
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// `V₁`, `V₂`, `V` per step and `ΔV(k) = V(k+1) − V(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSeries {
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub v: Vec<f64>,
    pub dv: Vec<f64>,
}

/// Evaluates the weighted Lyapunov function along a full-state trajectory.
pub fn lyapunov_series(traj: &Trajectory, cert: &LyapunovCertificate) -> Result<LyapunovSeries, AnalysisError> {
    if traj.coupling != Coupling::Full {
        return Err(AnalysisError::Mismatch("Lyapunov series needs a full-state run".into()));
    }
    if traj.theta != cert.theta || traj.n != cert.n || traj.agents != cert.dbar.rows() + 1 {
        return Err(AnalysisError::Mismatch(format!(
            "trajectory (agents={}, n={}, theta={}) vs certificate (agents={}, n={}, theta={})",
            traj.agents,
            traj.n,
            traj.theta,
            cert.dbar.rows() + 1,
            cert.n,
            cert.theta
        )));
    }
    if !traj.has_states() {
        return Err(AnalysisError::MissingSignal("states"));
    }
    if !traj.has_inputs() {
        return Err(AnalysisError::MissingSignal("inputs"));
    }
    if !traj.has_errors() {
        return Err(AnalysisError::MissingSignal("estimation error"));
    }
    let n = traj.n;
    let k1 = cert.k1;
    let theta = traj.theta.index();
    let len = traj.len();
    let mut v1 = Vec::with_capacity(len);
    let mut v2 = Vec::with_capacity(len);
    let mut v = Vec::with_capacity(len);
    for k in 0..len {
        let root_x2 = &traj.state(k, theta)[n..];
        let mut acc = 0.0;
        for i in (0..traj.agents).filter(|&i| i != theta) {
            let x2 = &traj.state(k, i)[n..];
            let u = traj.input(k, i);
            let s = traj.saturated_input(k, i);
            for c in 0..n {
                let xb = x2[c] - root_x2[c];
                acc += s[c] * s[c] + 2.0 * k1 * s[c] * xb + k1 * xb * xb + 2.0 * s[c] * (u[c] - s[c]);
            }
        }
        let e = traj.estimation_error(k);
        let pe = cert.p_d.mul_vec(e)?;
        let quad: f64 = e.iter().zip(&pe).map(|(a, b)| a * b).sum();
        v1.push(acc);
        v2.push(quad);
        v.push((1.0 - cert.h) * acc + cert.h * quad);
    }
    let dv = v.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(LyapunovSeries { v1, v2, v, dv })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncMetrics {
    pub disagreement: Vec<f64>,
    pub settling_step: Option<usize>,
    pub converged: bool,
    /// Least-squares slope of `ln ‖e(k)‖` over the post-peak tail.
    pub e_decay_rate: Option<f64>,
    /// Same fit for the observer error `ē` (partial-state runs).
    pub ebar_decay_rate: Option<f64>,
}

/// Disagreement, settling and decay diagnostics of a run.
pub fn sync_metrics(traj: &Trajectory, threshold: f64, dwell: usize) -> SyncMetrics {
    let disagreement = traj.disagreement.clone();
    let settling_step = settling_step(&disagreement, threshold);
    let converged = match settling_step {
        Some(0) => true,
        Some(s) => disagreement.len() - s >= dwell,
        None => false,
    };
    let e_decay_rate = traj
        .has_errors()
        .then(|| decay_rate(&traj.error_norms(|k| traj.estimation_error(k))))
        .flatten();
    let ebar_decay_rate = (traj.has_errors() && traj.coupling == Coupling::Partial)
        .then(|| decay_rate(&traj.error_norms(|k| traj.observer_error(k))))
        .flatten();
    SyncMetrics {
        disagreement,
        settling_step,
        converged,
        e_decay_rate,
        ebar_decay_rate,
    }
}

/// First index after which every value stays below `threshold`.
pub fn settling_step(series: &[f64], threshold: f64) -> Option<usize> {
    let last_bad = series.iter().rposition(|&d| !(d < threshold));
    match last_bad {
        None if series.is_empty() => None,
        None => Some(0),
        Some(i) if i + 1 < series.len() => Some(i + 1),
        Some(_) => None,
    }
}

/// Least-squares slope of `ln r(k)` from the peak of `r` until `r` first
/// drops below `DECAY_FIT_RELATIVE_FLOOR · peak`. `None` when fewer than
/// two points qualify.
pub fn decay_rate(norms: &[f64]) -> Option<f64> {
    let (peak_idx, &peak) = norms
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    if !(peak > DECAY_FIT_ABSOLUTE_FLOOR) {
        return None;
    }
    let floor = (peak * DECAY_FIT_RELATIVE_FLOOR).max(DECAY_FIT_ABSOLUTE_FLOOR);
    let tail: Vec<(f64, f64)> = norms[peak_idx..]
        .iter()
        .take_while(|&&r| r > floor)
        .enumerate()
        .map(|(k, &r)| (k as f64, r.ln()))
        .collect();
    least_squares_slope(&tail)
}

fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}
