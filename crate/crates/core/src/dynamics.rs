//! Agent plant, saturation, network exchange and the two protocol
//! controllers.
//!
//! Each agent is a double integrator of dimension `n` per block:
//! `x1⁺ = x1 + x2`, `x2⁺ = x2 + σ(u)`. Step functions here are pure; the
//! simulation engine in [`crate::sim`] owns all mutation and enforces the
//! synchronous update order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis;
use crate::graph::{NodeId, WeightedDigraph};
use crate::matkernel::{self, Matrix, MatrixError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("agent dimension must be at least 1")]
    ZeroDimension,
    #[error("gains (k1={k1}, k2={k2}) lie outside the solvable zone")]
    OutsideZone { k1: f64, k2: f64 },
    #[error("observer gains (f1={f1}, f2={f2}) do not make A - FC Schur stable")]
    ObserverNotSchur { f1: f64, f2: f64 },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

fn check_len(what: &'static str, v: &[f64], expected: usize) -> Result<(), DynamicsError> {
    if v.len() != expected {
        return Err(DynamicsError::Dimension {
            what,
            expected,
            found: v.len(),
        });
    }
    Ok(())
}

/// `sat(w) = sgn(w) min(1, |w|)`.
#[inline]
pub fn sat(w: f64) -> f64 {
    w.clamp(-1.0, 1.0)
}

/// Componentwise unit saturation σ.
pub fn saturate(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&w| sat(w)).collect()
}

/// Plant matrix `A = [[I, I], [0, I]]` for block size `n`.
pub fn plant_a(n: usize) -> Matrix {
    let mut a = Matrix::identity(2 * n);
    for i in 0..n {
        a[(i, n + i)] = 1.0;
    }
    a
}

/// Applies `A` to a stacked `(x1; x2)` vector without forming the matrix.
pub fn apply_a(v: &[f64]) -> Vec<f64> {
    let n = v.len() / 2;
    let mut out = v.to_vec();
    for i in 0..n {
        out[i] += v[n + i];
    }
    out
}

/// State `(x1; x2)` of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    x: Vec<f64>,
}

impl AgentState {
    pub fn new(x1: &[f64], x2: &[f64]) -> Result<Self, DynamicsError> {
        if x1.is_empty() {
            return Err(DynamicsError::ZeroDimension);
        }
        check_len("velocity block", x2, x1.len())?;
        let mut x = x1.to_vec();
        x.extend_from_slice(x2);
        Ok(Self { x })
    }

    /// From a stacked vector of even length `2n`.
    pub fn from_stacked(x: Vec<f64>) -> Result<Self, DynamicsError> {
        if x.is_empty() || !x.len().is_multiple_of(2) {
            return Err(DynamicsError::Dimension {
                what: "stacked agent state",
                expected: 2 * (x.len() / 2).max(1),
                found: x.len(),
            });
        }
        Ok(Self { x })
    }

    pub fn zeros(n: usize) -> Self {
        Self { x: vec![0.0; 2 * n] }
    }

    pub fn dim(&self) -> usize {
        self.x.len() / 2
    }

    pub fn x1(&self) -> &[f64] {
        &self.x[..self.dim()]
    }

    pub fn x2(&self) -> &[f64] {
        &self.x[self.dim()..]
    }

    pub fn stacked(&self) -> &[f64] {
        &self.x
    }

    /// Output `y = C x = x1`.
    pub fn output(&self) -> &[f64] {
        self.x1()
    }
}

/// `x⁺ = A x + B σ(u)`.
pub fn agent_step(x: &AgentState, u: &[f64]) -> Result<AgentState, DynamicsError> {
    let n = x.dim();
    check_len("input", u, n)?;
    let mut next = apply_a(&x.x);
    for (v, &ui) in next[n..].iter_mut().zip(u) {
        *v += sat(ui);
    }
    Ok(AgentState { x: next })
}

/// Diffusive coupling `Σⱼ a_ij (sᵢ − sⱼ)` of node `i` for arbitrary
/// per-agent signals of equal length.
pub fn diffusive<S: AsRef<[f64]>>(signals: &[S], g: &WeightedDigraph, i: usize) -> Result<Vec<f64>, DynamicsError> {
    check_signal_count(signals, g)?;
    let own = signals[i].as_ref();
    let m = own.len();
    let mut out = vec![0.0; m];
    for (j, w) in g.in_neighbors(i) {
        let other = signals[j].as_ref();
        check_len("exchanged signal", other, m)?;
        for ((o, a), b) in out.iter_mut().zip(own).zip(other) {
            *o += w * (a - b);
        }
    }
    Ok(out)
}

/// Laplacian form `Σⱼ ℓ_ij sⱼ` of the same coupling.
pub fn diffusive_laplacian<S: AsRef<[f64]>>(
    signals: &[S],
    laplacian: &Matrix,
    i: usize,
) -> Result<Vec<f64>, DynamicsError> {
    if signals.len() != laplacian.rows() {
        return Err(DynamicsError::Dimension {
            what: "signal count",
            expected: laplacian.rows(),
            found: signals.len(),
        });
    }
    let m = signals[i].as_ref().len();
    let mut out = vec![0.0; m];
    for (j, s) in signals.iter().enumerate() {
        let s = s.as_ref();
        check_len("exchanged signal", s, m)?;
        let l = laplacian[(i, j)];
        if l == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(s) {
            *o += l * v;
        }
    }
    Ok(out)
}

fn check_signal_count<S>(signals: &[S], g: &WeightedDigraph) -> Result<(), DynamicsError> {
    if signals.len() != g.node_count() {
        return Err(DynamicsError::Dimension {
            what: "signal count",
            expected: g.node_count(),
            found: signals.len(),
        });
    }
    Ok(())
}

/// Network measurement ζᵢ from the outputs of all agents (`x1` blocks for
/// partial-state coupling, full states for full-state coupling).
pub fn network_zeta<S: AsRef<[f64]>>(outputs: &[S], g: &WeightedDigraph, i: NodeId) -> Result<Vec<f64>, DynamicsError> {
    diffusive(outputs, g, i.index())
}

/// Additional exchange ζ̂ᵢ over the internally produced variables ξⱼ.
pub fn network_zeta_hat<S: AsRef<[f64]>>(xi: &[S], g: &WeightedDigraph, i: NodeId) -> Result<Vec<f64>, DynamicsError> {
    diffusive(xi, g, i.index())
}

/// Observer gain `F = (f1 I; f2 I)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObserverGains {
    pub f1: f64,
    pub f2: f64,
}

impl ObserverGains {
    /// `A − F C` for block size `n`: per block `[[1 − f1, 1], [−f2, 1]]`.
    pub fn observer_matrix(&self, n: usize) -> Matrix {
        let mut m = plant_a(n);
        for i in 0..n {
            m[(i, i)] -= self.f1;
            m[(n + i, i)] -= self.f2;
        }
        m
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.f1.is_finite() && self.f2.is_finite()) || !matkernel::is_schur(&self.observer_matrix(1))? {
            return Err(DynamicsError::ObserverNotSchur { f1: self.f1, f2: self.f2 });
        }
        Ok(())
    }
}

/// Feedback `K = −(k1 I, k2 I)` plus optional observer gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolGains {
    pub k1: f64,
    pub k2: f64,
    #[serde(flatten, default, skip_serializing_if = "Option::is_none")]
    pub observer: Option<ObserverGains>,
}

impl ProtocolGains {
    /// `u = K χ = −(k1 χ₁ + k2 χ₂)`.
    pub fn control(&self, chi: &[f64]) -> Vec<f64> {
        let n = chi.len() / 2;
        (0..n).map(|i| -(self.k1 * chi[i] + self.k2 * chi[n + i])).collect()
    }

    pub fn validate(&self, allow_boundary_pair: bool) -> Result<(), DynamicsError> {
        if !analysis::gain_zone_check(self.k1, self.k2, allow_boundary_pair) {
            return Err(DynamicsError::OutsideZone { k1: self.k1, k2: self.k2 });
        }
        if let Some(obs) = &self.observer {
            obs.validate()?;
        }
        Ok(())
    }
}

/// Gains together with the reference root and per-node in-degree bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct GainParams {
    pub gains: ProtocolGains,
    pub theta: NodeId,
    pub din_bounds: Vec<f64>,
}

/// Which input value drives the χ update of the partial-state protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChiFeed {
    /// `B σ(u)`, the value the plant actually receives.
    #[default]
    Saturated,
    /// `B u`, the unsaturated controller output.
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Protocol1State {
    pub chi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Protocol2State {
    pub xhat: Vec<f64>,
    pub chi: Vec<f64>,
}

/// Full-state controller update
/// `χ⁺ = Aχ + Bσ(u) + A(ζ − ζ̂)/(1 + D_in)`.
pub fn protocol1_step(
    s: &Protocol1State,
    zeta: &[f64],
    zeta_hat: &[f64],
    u_applied: &[f64],
    din_bound: f64,
) -> Result<Protocol1State, DynamicsError> {
    let dim = s.chi.len();
    let n = dim / 2;
    check_len("zeta", zeta, dim)?;
    check_len("zeta_hat", zeta_hat, dim)?;
    check_len("input", u_applied, n)?;
    let scale = 1.0 / (1.0 + din_bound);
    let diff: Vec<f64> = zeta.iter().zip(zeta_hat).map(|(a, b)| scale * (a - b)).collect();
    let coupling = apply_a(&diff);
    let mut chi = apply_a(&s.chi);
    for i in 0..n {
        chi[n + i] += sat(u_applied[i]);
    }
    for (c, d) in chi.iter_mut().zip(&coupling) {
        *c += d;
    }
    Ok(Protocol1State { chi })
}

/// Partial-state controller update:
///
/// `x̂⁺ = (A − FC)x̂ + (Bζ̂₂ + Fζ)/(1 + D_in)`
/// `χ⁺ = Aχ + B·feed(u) + Ax̂ − Aζ̂₁/(1 + D_in)`
#[allow(clippy::too_many_arguments)]
pub fn protocol2_step(
    s: &Protocol2State,
    zeta: &[f64],
    zeta_hat1: &[f64],
    zeta_hat2: &[f64],
    u_applied: &[f64],
    din_bound: f64,
    observer: &ObserverGains,
    chi_feed: ChiFeed,
) -> Result<Protocol2State, DynamicsError> {
    let dim = s.chi.len();
    let n = dim / 2;
    check_len("observer state", &s.xhat, dim)?;
    check_len("zeta", zeta, n)?;
    check_len("zeta_hat1", zeta_hat1, dim)?;
    check_len("zeta_hat2", zeta_hat2, n)?;
    check_len("input", u_applied, n)?;
    let scale = 1.0 / (1.0 + din_bound);

    let mut xhat = apply_a(&s.xhat);
    for i in 0..n {
        // -F C x̂
        let y = s.xhat[i];
        xhat[i] -= observer.f1 * y;
        xhat[n + i] -= observer.f2 * y;
        // (B ζ̂₂ + F ζ) / (1 + D_in)
        xhat[i] += scale * observer.f1 * zeta[i];
        xhat[n + i] += scale * (zeta_hat2[i] + observer.f2 * zeta[i]);
    }

    let inner: Vec<f64> = s
        .chi
        .iter()
        .zip(zeta_hat1)
        .zip(&s.xhat)
        .map(|((c, z), xh)| c - scale * z + xh)
        .collect();
    let mut chi = apply_a(&inner);
    for i in 0..n {
        chi[n + i] += match chi_feed {
            ChiFeed::Saturated => sat(u_applied[i]),
            ChiFeed::Raw => u_applied[i],
        };
    }
    Ok(Protocol2State { xhat, chi })
}
