//! Synchronous closed-loop simulation and the three reference networks.
//!
//! Every step first reads all exchanged signals and computes every input
//! from the current controller states, then advances all plants and
//! controllers together. The reference agent θ applies no input and runs no
//! controller: its controller states are held at zero and it exchanges
//! zeros.

use std::fmt;
use std::str::FromStr;

use rand_core::RngCore;
use rand_xoshiro::SplitMix64;
use rand_core::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    self, agent_step, protocol1_step, protocol2_step, AgentState, ChiFeed, DynamicsError, ObserverGains,
    Protocol1State, Protocol2State, ProtocolGains,
};
use crate::graph::{Edge, GraphAnalysis, GraphError, NodeId, WeightedDigraph};

/// States beyond this magnitude abort the run.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Upper bound on `(horizon + 1) · agents · 2n`, the size of one recorded
/// state array.
pub const MAX_RECORDED_VALUES: u128 = 1 << 28;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("divergence at step {step}, agent {agent}: |state| reached {magnitude:e}")]
    Divergence { step: usize, agent: NodeId, magnitude: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    /// Agents exchange their whole state.
    Full,
    /// Agents exchange only `y = x1`.
    Partial,
}

/// Signals retained in a [`Trajectory`]. The disagreement series is always
/// recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecordFlags {
    pub states: bool,
    pub inputs: bool,
    /// Estimation error `e` and, for partial-state runs, observer error `ē`.
    pub errors: bool,
    /// Lyapunov series, evaluated after the run (full-state only).
    pub lyapunov: bool,
}

impl Default for RecordFlags {
    fn default() -> Self {
        Self {
            states: true,
            inputs: true,
            errors: true,
            lyapunov: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub graph: WeightedDigraph,
    pub coupling: Coupling,
    pub gains: ProtocolGains,
    pub theta: NodeId,
    pub din_bounds: Vec<f64>,
    pub n: usize,
    pub horizon: usize,
    pub seed: u64,
    pub init_range: f64,
    pub chi_feed: ChiFeed,
    pub randomize_controllers: bool,
    pub allow_boundary: bool,
    pub record: RecordFlags,
}

impl SimConfig {
    /// Checks every invariant the engine relies on and returns the graph
    /// analysis.
    pub fn validate(&self) -> Result<GraphAnalysis, SimError> {
        if self.n == 0 {
            return Err(SimError::Config("agent dimension n must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(SimError::Config("horizon must be at least 1".into()));
        }
        let cells = (self.horizon as u128 + 1) * self.agents() as u128 * 2 * self.n as u128;
        if cells > MAX_RECORDED_VALUES {
            return Err(SimError::Config(format!(
                "horizon {} with {} agents of dimension {} exceeds the recording limit",
                self.horizon,
                self.agents(),
                self.n
            )));
        }
        if !(self.init_range > 0.0 && self.init_range.is_finite()) {
            return Err(SimError::Config(format!(
                "init_range must be positive and finite, got {}",
                self.init_range
            )));
        }
        match (self.coupling, self.gains.observer.is_some()) {
            (Coupling::Partial, false) => {
                return Err(SimError::Config("partial-state coupling requires observer gains f1, f2".into()))
            }
            (Coupling::Full, true) => {
                return Err(SimError::Config("observer gains f1, f2 are only used with partial-state coupling".into()))
            }
            _ => {}
        }
        self.gains.validate(self.allow_boundary)?;
        let analysis = self.graph.analyze();
        analysis.require_root(self.theta)?;
        analysis.check_bounds(self.theta, &self.din_bounds)?;
        Ok(analysis)
    }

    pub fn agents(&self) -> usize {
        self.graph.node_count()
    }

    pub fn with_coupling(mut self, coupling: Coupling) -> Self {
        self.coupling = coupling;
        if coupling == Coupling::Full {
            self.gains.observer = None;
        }
        self
    }
}

/// The three reference networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    /// 4-agent directed chain.
    I,
    /// 7-agent graph with two interlocking cycles.
    II,
    /// 60-agent directed loop.
    III,
}

impl Case {
    pub const ALL: [Case; 3] = [Case::I, Case::II, Case::III];

    pub fn horizon(self) -> usize {
        match self {
            Case::I => 2_000,
            Case::II => 5_000,
            Case::III => 20_000,
        }
    }

    /// `(from, to)` pairs, 1-based, all with unit weight.
    pub fn edge_list(self) -> Vec<(usize, usize)> {
        match self {
            Case::I => vec![(1, 2), (2, 3), (3, 4)],
            Case::II => vec![(1, 2), (2, 3), (3, 4), (4, 2), (4, 5), (7, 4), (5, 6), (6, 7)],
            Case::III => {
                let mut edges: Vec<(usize, usize)> = (1..60).map(|i| (i, i + 1)).collect();
                edges.push((60, 1));
                edges
            }
        }
    }

    pub fn agents(self) -> usize {
        match self {
            Case::I => 4,
            Case::II => 7,
            Case::III => 60,
        }
    }

    pub fn graph(self) -> WeightedDigraph {
        let edges: Vec<Edge> = self
            .edge_list()
            .into_iter()
            .map(|(from, to)| Edge {
                from: NodeId::new(from - 1),
                to: NodeId::new(to - 1),
                weight: 1.0,
            })
            .collect();
        WeightedDigraph::from_edges(self.agents(), &edges).expect("reference graphs are valid")
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::I => "I",
            Case::II => "II",
            Case::III => "III",
        })
    }
}

impl FromStr for Case {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(Case::I),
            "II" | "2" => Ok(Case::II),
            "III" | "3" => Ok(Case::III),
            other => Err(format!("unknown case {other:?}; expected I, II or III")),
        }
    }
}

/// The single gain block shared by all reference cases.
pub fn reference_gains() -> ProtocolGains {
    ProtocolGains {
        k1: 0.5,
        k2: 1.0,
        observer: Some(ObserverGains { f1: 1.5, f2: 0.5 }),
    }
}

/// Partial-state configuration of a reference case with θ = 1, exact
/// in-degree bounds, `n = 1`, seed 1 and initial range 10.
pub fn build_case(which: Case) -> SimConfig {
    let graph = which.graph();
    let din_bounds = graph.analyze().default_bounds();
    SimConfig {
        graph,
        coupling: Coupling::Partial,
        gains: reference_gains(),
        theta: NodeId::new(0),
        din_bounds,
        n: 1,
        horizon: which.horizon(),
        seed: 1,
        init_range: 10.0,
        chi_feed: ChiFeed::Saturated,
        randomize_controllers: false,
        allow_boundary: false,
        record: RecordFlags::default(),
    }
}

/// Initial plant and controller states.
#[derive(Debug, Clone, PartialEq)]
pub struct Initials {
    pub states: Vec<AgentState>,
    pub chi: Vec<Vec<f64>>,
    pub xhat: Vec<Vec<f64>>,
}

impl Initials {
    pub fn zeros(agents: usize, n: usize) -> Self {
        Self {
            states: vec![AgentState::zeros(n); agents],
            chi: vec![vec![0.0; 2 * n]; agents],
            xhat: vec![vec![0.0; 2 * n]; agents],
        }
    }
}

/// Maps a SplitMix64 output to `[-range, range)` using its top 53 bits.
pub fn uniform_symmetric(word: u64, range: f64) -> f64 {
    let unit = (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    range * (2.0 * unit - 1.0)
}

/// Draws initial states i.i.d. uniform on `[-init_range, init_range]` from
/// SplitMix64 seeded with `cfg.seed`. Plant states are drawn first, agent by
/// agent in `(x1; x2)` order; controller states (`χ`, then `x̂` for
/// partial-state runs) follow only when `randomize_controllers` is set.
pub fn sample_initials(cfg: &SimConfig) -> Initials {
    let mut rng = SplitMix64::seed_from_u64(cfg.seed);
    let dim = 2 * cfg.n;
    let mut draw = |len: usize| -> Vec<f64> {
        (0..len)
            .map(|_| uniform_symmetric(rng.next_u64(), cfg.init_range))
            .collect()
    };
    let agents = cfg.agents();
    let states = (0..agents)
        .map(|_| AgentState::from_stacked(draw(dim)).expect("even length"))
        .collect();
    let mut init = Initials {
        states,
        chi: vec![vec![0.0; dim]; agents],
        xhat: vec![vec![0.0; dim]; agents],
    };
    if cfg.randomize_controllers {
        for i in 0..agents {
            init.chi[i] = draw(dim);
            if cfg.coupling == Coupling::Partial {
                init.xhat[i] = draw(dim);
            }
        }
    }
    init
}

/// Recorded run. Arrays are indexed by step `0..=horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub agents: usize,
    pub n: usize,
    pub theta: NodeId,
    pub coupling: Coupling,
    pub horizon: usize,
    states: Vec<f64>,
    chi: Vec<f64>,
    xhat: Vec<f64>,
    inputs: Vec<f64>,
    saturated: Vec<f64>,
    e: Vec<f64>,
    ebar: Vec<f64>,
    /// `max_{i,j} ‖xᵢ(k) − xⱼ(k)‖∞` per step.
    pub disagreement: Vec<f64>,
}

impl Trajectory {
    /// Number of recorded steps (`horizon + 1`).
    pub fn len(&self) -> usize {
        self.horizon + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn has_states(&self) -> bool {
        !self.states.is_empty()
    }

    pub fn has_inputs(&self) -> bool {
        !self.inputs.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        !self.e.is_empty()
    }

    fn state_stride(&self) -> usize {
        self.agents * 2 * self.n
    }

    fn reduced_stride(&self) -> usize {
        (self.agents - 1) * 2 * self.n
    }

    /// Stacked state of agent `i` at step `k`.
    pub fn state(&self, k: usize, i: usize) -> &[f64] {
        let d = 2 * self.n;
        let base = k * self.state_stride() + i * d;
        &self.states[base..base + d]
    }

    pub fn chi(&self, k: usize, i: usize) -> &[f64] {
        let d = 2 * self.n;
        let base = k * self.state_stride() + i * d;
        &self.chi[base..base + d]
    }

    pub fn xhat(&self, k: usize, i: usize) -> Option<&[f64]> {
        if self.xhat.is_empty() {
            return None;
        }
        let d = 2 * self.n;
        let base = k * self.state_stride() + i * d;
        Some(&self.xhat[base..base + d])
    }

    pub fn input(&self, k: usize, i: usize) -> &[f64] {
        let base = (k * self.agents + i) * self.n;
        &self.inputs[base..base + self.n]
    }

    pub fn saturated_input(&self, k: usize, i: usize) -> &[f64] {
        let base = (k * self.agents + i) * self.n;
        &self.saturated[base..base + self.n]
    }

    /// `e(k) = x̄(k) − χ(k)` stacked over non-root agents in index order.
    pub fn estimation_error(&self, k: usize) -> &[f64] {
        let s = self.reduced_stride();
        &self.e[k * s..(k + 1) * s]
    }

    /// `ē(k) = ((I − D̄) ⊗ I) x̄(k) − x̂(k)` stacked like `e`. Empty for
    /// full-state runs.
    pub fn observer_error(&self, k: usize) -> &[f64] {
        if self.ebar.is_empty() {
            return &[];
        }
        let s = self.reduced_stride();
        &self.ebar[k * s..(k + 1) * s]
    }

    pub(crate) fn error_norms<'a>(&'a self, f: impl Fn(usize) -> &'a [f64]) -> Vec<f64> {
        (0..self.len())
            .map(|k| f(k).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }
}

fn disagreement(states: &[AgentState]) -> f64 {
    let dim = states[0].stacked().len();
    (0..dim)
        .map(|c| {
            let (lo, hi) = states.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                let v = s.stacked()[c];
                (lo.min(v), hi.max(v))
            });
            hi - lo
        })
        .fold(0.0, f64::max)
}

/// Runs the closed loop for `cfg.horizon` steps from `initials`.
pub fn run(cfg: &SimConfig, initials: &Initials) -> Result<Trajectory, SimError> {
    let analysis = cfg.validate()?;
    let agents = cfg.agents();
    let n = cfg.n;
    let dim = 2 * n;
    let theta = cfg.theta.index();
    let g = &cfg.graph;

    if initials.states.len() != agents || initials.chi.len() != agents || initials.xhat.len() != agents {
        return Err(SimError::Config(format!("initial conditions must cover all {agents} agents")));
    }
    if initials.states.iter().any(|s| s.dim() != n)
        || initials.chi.iter().chain(&initials.xhat).any(|c| c.len() != dim)
    {
        return Err(SimError::Config(format!("initial conditions must have agent dimension {n}")));
    }
    if initials
        .states
        .iter()
        .flat_map(|s| s.stacked())
        .chain(initials.chi.iter().flatten())
        .chain(initials.xhat.iter().flatten())
        .any(|v| !v.is_finite())
    {
        return Err(SimError::Config("initial conditions must be finite".into()));
    }

    let mut x = initials.states.clone();
    let mut chi = initials.chi.clone();
    let mut xhat = initials.xhat.clone();
    chi[theta].iter_mut().for_each(|v| *v = 0.0);
    xhat[theta].iter_mut().for_each(|v| *v = 0.0);
    if cfg.coupling == Coupling::Full {
        xhat.iter_mut().for_each(|v| v.iter_mut().for_each(|c| *c = 0.0));
    }

    let len = cfg.horizon + 1;
    let rec = cfg.record;
    let partial = cfg.coupling == Coupling::Partial;
    let mut traj = Trajectory {
        agents,
        n,
        theta: cfg.theta,
        coupling: cfg.coupling,
        horizon: cfg.horizon,
        states: Vec::with_capacity(if rec.states { len * agents * dim } else { 0 }),
        chi: Vec::with_capacity(if rec.states { len * agents * dim } else { 0 }),
        xhat: Vec::with_capacity(if rec.states && partial { len * agents * dim } else { 0 }),
        inputs: Vec::with_capacity(if rec.inputs { len * agents * n } else { 0 }),
        saturated: Vec::with_capacity(if rec.inputs { len * agents * n } else { 0 }),
        e: Vec::with_capacity(if rec.errors { len * (agents - 1) * dim } else { 0 }),
        ebar: Vec::with_capacity(if rec.errors && partial { len * (agents - 1) * dim } else { 0 }),
        disagreement: Vec::with_capacity(len),
    };

    let scale: Vec<f64> = cfg.din_bounds.iter().map(|b| 1.0 / (1.0 + b)).collect();
    let neighbors: Vec<Vec<(usize, f64)>> = (0..agents).map(|i| g.in_neighbors(i).collect()).collect();
    let couple = |signals: &[&[f64]], i: usize| -> Vec<f64> {
        let own = signals[i];
        let mut out = vec![0.0; own.len()];
        for &(j, w) in &neighbors[i] {
            for ((o, a), b) in out.iter_mut().zip(own).zip(signals[j]) {
                *o += w * (a - b);
            }
        }
        out
    };
    let observer = cfg.gains.observer.unwrap_or(ObserverGains { f1: 0.0, f2: 0.0 });

    for k in 0..len {
        // inputs from current controller states
        let u: Vec<Vec<f64>> = (0..agents)
            .map(|i| if i == theta { vec![0.0; n] } else { cfg.gains.control(&chi[i]) })
            .collect();
        let sigma: Vec<Vec<f64>> = u.iter().map(|v| dynamics::saturate(v)).collect();

        // record step k
        traj.disagreement.push(disagreement(&x));
        if rec.states {
            for i in 0..agents {
                traj.states.extend_from_slice(x[i].stacked());
                traj.chi.extend_from_slice(&chi[i]);
                if partial {
                    traj.xhat.extend_from_slice(&xhat[i]);
                }
            }
        }
        if rec.inputs {
            for i in 0..agents {
                traj.inputs.extend_from_slice(&u[i]);
                traj.saturated.extend_from_slice(&sigma[i]);
            }
        }
        if rec.errors {
            let root = x[theta].stacked();
            let full: Vec<&[f64]> = x.iter().map(|s| s.stacked()).collect();
            for i in (0..agents).filter(|&i| i != theta) {
                let xi = x[i].stacked();
                traj.e.extend((0..dim).map(|c| xi[c] - root[c] - chi[i][c]));
                if partial {
                    let zeta_full = couple(&full, i);
                    traj.ebar.extend((0..dim).map(|c| scale[i] * zeta_full[c] - xhat[i][c]));
                }
            }
        }
        if k == cfg.horizon {
            break;
        }

        // exchanged signals at step k
        let outputs: Vec<&[f64]> = match cfg.coupling {
            Coupling::Full => x.iter().map(|s| s.stacked()).collect(),
            Coupling::Partial => x.iter().map(|s| s.output()).collect(),
        };

        let chi_refs: Vec<&[f64]> = chi.iter().map(Vec::as_slice).collect();
        let sigma_refs: Vec<&[f64]> = sigma.iter().map(Vec::as_slice).collect();
        let mut next_chi = chi.clone();
        let mut next_xhat = xhat.clone();
        for i in (0..agents).filter(|&i| i != theta) {
            let zeta = couple(&outputs, i);
            let zeta_hat1 = couple(&chi_refs, i);
            match cfg.coupling {
                Coupling::Full => {
                    let s = Protocol1State { chi: chi[i].clone() };
                    next_chi[i] = protocol1_step(&s, &zeta, &zeta_hat1, &u[i], cfg.din_bounds[i])?.chi;
                }
                Coupling::Partial => {
                    let zeta_hat2 = couple(&sigma_refs, i);
                    let s = Protocol2State {
                        xhat: xhat[i].clone(),
                        chi: chi[i].clone(),
                    };
                    let next = protocol2_step(
                        &s,
                        &zeta,
                        &zeta_hat1,
                        &zeta_hat2,
                        &u[i],
                        cfg.din_bounds[i],
                        &observer,
                        cfg.chi_feed,
                    )?;
                    next_chi[i] = next.chi;
                    next_xhat[i] = next.xhat;
                }
            }
        }
        let next_x: Vec<AgentState> = x
            .iter()
            .zip(&u)
            .map(|(s, ui)| agent_step(s, ui))
            .collect::<Result<_, _>>()?;

        for i in 0..agents {
            let magnitude = next_x[i]
                .stacked()
                .iter()
                .chain(&next_chi[i])
                .chain(&next_xhat[i])
                .fold(0.0f64, |m, v| if v.is_finite() { m.max(v.abs()) } else { f64::INFINITY });
            if magnitude > DIVERGENCE_LIMIT {
                return Err(SimError::Divergence {
                    step: k + 1,
                    agent: NodeId::new(i),
                    magnitude,
                });
            }
        }
        x = next_x;
        chi = next_chi;
        xhat = next_xhat;
    }
    debug_assert_eq!(analysis.node_count(), agents);
    Ok(traj)
}
