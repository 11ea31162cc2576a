//! File formats: JSON run configurations, trajectory CSV, metrics and run
//! manifests.
//!
//! Node labels are 1-based everywhere in this module. Edges are written
//! `[from, to, weight]`, meaning agent `to` listens to agent `from` with
//! weight `a_{to,from}`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{CertificateReport, SyncMetrics};
use crate::dynamics::{ChiFeed, ProtocolGains};
use crate::graph::{Edge, GraphError, NodeId, WeightedDigraph};
use crate::sim::{Coupling, RecordFlags, SimConfig, Trajectory};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("node label 0 in edge list; labels are 1-based")]
    ZeroLabel,
    #[error("trajectory lacks recorded {0}")]
    MissingSignal(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for FormatError {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => FormatError::Io(io),
            other => FormatError::Csv(format!("{other:?}")),
        }
    }
}

/// Node count plus weighted edges `[from, to, weight]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl GraphSpec {
    pub fn to_graph(&self) -> Result<WeightedDigraph, FormatError> {
        let edges = self
            .edges
            .iter()
            .map(|&(from, to, weight)| {
                Ok(Edge {
                    from: NodeId::from_one_based(from).ok_or(FormatError::ZeroLabel)?,
                    to: NodeId::from_one_based(to).ok_or(FormatError::ZeroLabel)?,
                    weight,
                })
            })
            .collect::<Result<Vec<_>, FormatError>>()?;
        Ok(WeightedDigraph::from_edges(self.n, &edges)?)
    }

    pub fn from_graph(g: &WeightedDigraph) -> Self {
        Self {
            n: g.node_count(),
            edges: g
                .edges()
                .into_iter()
                .map(|e| (e.from.one_based(), e.to.one_based(), e.weight))
                .collect(),
        }
    }
}

fn default_dim() -> usize {
    1
}

/// JSON run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub graph: GraphSpec,
    pub coupling: Coupling,
    pub gains: ProtocolGains,
    pub theta: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub din_bounds: Option<Vec<f64>>,
    #[serde(default = "default_dim")]
    pub n: usize,
    pub horizon: usize,
    #[serde(default)]
    pub seed: u64,
    pub init_range: f64,
    #[serde(default)]
    pub chi_feed: ChiFeed,
    #[serde(default)]
    pub record: RecordFlags,
    #[serde(default)]
    pub randomize_controllers: bool,
    #[serde(default)]
    pub allow_boundary: bool,
}

impl ConfigFile {
    pub fn parse(bytes: &[u8]) -> Result<Self, FormatError> {
        Ok(serde_json::from_slice(bytes)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialisation cannot fail")
    }

    /// Builds the engine configuration, filling default in-degree bounds.
    /// Semantic checks (zone, root, bounds) happen in [`SimConfig::validate`].
    pub fn resolve(&self) -> Result<SimConfig, FormatError> {
        let graph = self.graph.to_graph()?;
        let din_bounds = match &self.din_bounds {
            Some(b) => b.clone(),
            None => graph.analyze().default_bounds(),
        };
        Ok(SimConfig {
            graph,
            coupling: self.coupling,
            gains: self.gains,
            theta: self.theta,
            din_bounds,
            n: self.n,
            horizon: self.horizon,
            seed: self.seed,
            init_range: self.init_range,
            chi_feed: self.chi_feed,
            randomize_controllers: self.randomize_controllers,
            allow_boundary: self.allow_boundary,
            record: self.record,
        })
    }

    /// Fully resolved echo of an engine configuration.
    pub fn from_config(cfg: &SimConfig) -> Self {
        Self {
            graph: GraphSpec::from_graph(&cfg.graph),
            coupling: cfg.coupling,
            gains: cfg.gains,
            theta: cfg.theta,
            din_bounds: Some(cfg.din_bounds.clone()),
            n: cfg.n,
            horizon: cfg.horizon,
            seed: cfg.seed,
            init_range: cfg.init_range,
            chi_feed: cfg.chi_feed,
            record: cfg.record,
            randomize_controllers: cfg.randomize_controllers,
            allow_boundary: cfg.allow_boundary,
        }
    }
}

/// Shortest round-trip scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

fn block_names(prefix: &str, n: usize) -> Vec<String> {
    if n == 1 {
        vec![prefix.to_string()]
    } else {
        (1..=n).map(|c| format!("{prefix}_{c}")).collect()
    }
}

/// Header `k,agent,x1…,x2…,u…,sigma_u…` for agent dimension `n`.
pub fn trajectory_header(n: usize) -> Vec<String> {
    let mut h = vec!["k".to_string(), "agent".to_string()];
    for p in ["x1", "x2", "u", "sigma_u"] {
        h.extend(block_names(p, n));
    }
    h
}

/// One row per agent per step.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, w: W) -> Result<(), FormatError> {
    if !traj.has_states() {
        return Err(FormatError::MissingSignal("states"));
    }
    if !traj.has_inputs() {
        return Err(FormatError::MissingSignal("inputs"));
    }
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(trajectory_header(traj.n))?;
    let mut record: Vec<String> = Vec::with_capacity(2 + 4 * traj.n);
    for k in 0..traj.len() {
        for i in 0..traj.agents {
            record.clear();
            record.push(k.to_string());
            record.push((i + 1).to_string());
            record.extend(traj.state(k, i).iter().map(|&v| fmt_f64(v)));
            record.extend(traj.input(k, i).iter().map(|&v| fmt_f64(v)));
            record.extend(traj.saturated_input(k, i).iter().map(|&v| fmt_f64(v)));
            out.write_record(&record)?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub k: usize,
    pub agent: usize,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub u: Vec<f64>,
    pub sigma_u: Vec<f64>,
}

/// Parses a trajectory CSV, inferring the agent dimension from the header.
pub fn read_trajectory_csv<R: Read>(r: R) -> Result<Vec<TrajectoryRow>, FormatError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.len() < 6 || !(header.len() - 2).is_multiple_of(4) {
        return Err(FormatError::Csv(format!("unexpected header with {} columns", header.len())));
    }
    let n = (header.len() - 2) / 4;
    if header != trajectory_header(n) {
        return Err(FormatError::Csv(format!("unexpected header {header:?}")));
    }
    let parse_f = |s: &str| -> Result<f64, FormatError> {
        s.trim()
            .parse::<f64>()
            .map_err(|e| FormatError::Csv(format!("bad number {s:?}: {e}")))
    };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(FormatError::Csv(format!("row has {} fields, expected {}", rec.len(), header.len())));
        }
        let int = |s: &str| -> Result<usize, FormatError> {
            s.trim()
                .parse::<usize>()
                .map_err(|e| FormatError::Csv(format!("bad integer {s:?}: {e}")))
        };
        let values = rec.iter().skip(2).map(parse_f).collect::<Result<Vec<f64>, _>>()?;
        let agent = int(&rec[1])?;
        if agent == 0 {
            return Err(FormatError::ZeroLabel);
        }
        rows.push(TrajectoryRow {
            k: int(&rec[0])?,
            agent,
            x1: values[..n].to_vec(),
            x2: values[n..2 * n].to_vec(),
            u: values[2 * n..3 * n].to_vec(),
            sigma_u: values[3 * n..].to_vec(),
        });
    }
    Ok(rows)
}

/// `k,v1,v2,v,dv` rows; `dv` is empty on the final step.
pub fn write_lyapunov_csv<W: Write>(series: &crate::analysis::LyapunovSeries, w: W) -> Result<(), FormatError> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(["k", "v1", "v2", "v", "dv"])?;
    for k in 0..series.v.len() {
        out.write_record([
            k.to_string(),
            fmt_f64(series.v1[k]),
            fmt_f64(series.v2[k]),
            fmt_f64(series.v[k]),
            series.dv.get(k).map(|&d| fmt_f64(d)).unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Metrics file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub threshold: f64,
    pub dwell: usize,
    #[serde(flatten)]
    pub metrics: SyncMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub converged: bool,
    pub settling_step: Option<usize>,
    pub final_disagreement: f64,
    pub e_decay_rate: Option<f64>,
    pub ebar_decay_rate: Option<f64>,
}

impl From<&SyncMetrics> for MetricsSummary {
    fn from(m: &SyncMetrics) -> Self {
        Self {
            converged: m.converged,
            settling_step: m.settling_step,
            final_disagreement: m.disagreement.last().copied().unwrap_or(0.0),
            e_decay_rate: m.e_decay_rate,
            ebar_decay_rate: m.ebar_decay_rate,
        }
    }
}

/// Written last; its presence marks a completed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: ConfigFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateReport>,
    pub metrics: MetricsSummary,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
}

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{build_case, run, sample_initials, Case};

    const CASE_I_JSON: &str = r#"{
        "graph": {"n": 4, "edges": [[1, 2, 1.0], [2, 3, 1.0], [3, 4, 1.0]]},
        "coupling": "partial",
        "gains": {"k1": 0.5, "k2": 1.0, "f1": 1.5, "f2": 0.5},
        "theta": 1,
        "horizon": 2000,
        "seed": 1,
        "init_range": 10.0
    }"#;

    #[test]
    fn parses_minimal_config_with_defaults() {
        let file = ConfigFile::parse(CASE_I_JSON.as_bytes()).unwrap();
        assert_eq!(file.n, 1);
        assert_eq!(file.chi_feed, ChiFeed::Saturated);
        assert_eq!(file.record, RecordFlags::default());
        let cfg = file.resolve().unwrap();
        assert_eq!(cfg, build_case(Case::I));
    }

    #[test]
    fn rejects_unknown_fields_and_zero_labels() {
        let extra = CASE_I_JSON.replace("\"seed\": 1,", "\"seed\": 1, \"bogus\": 3,");
        assert!(ConfigFile::parse(extra.as_bytes()).is_err());
        let zero = CASE_I_JSON.replace("[1, 2, 1.0]", "[0, 2, 1.0]");
        let file = ConfigFile::parse(zero.as_bytes()).unwrap();
        assert!(matches!(file.resolve(), Err(FormatError::ZeroLabel)));
        let theta0 = CASE_I_JSON.replace("\"theta\": 1", "\"theta\": 0");
        assert!(ConfigFile::parse(theta0.as_bytes()).is_err());
    }

    #[test]
    fn header_shapes() {
        assert_eq!(trajectory_header(1), ["k", "agent", "x1", "x2", "u", "sigma_u"]);
        assert_eq!(trajectory_header(2)[2..4], ["x1_1".to_string(), "x1_2".to_string()]);
    }

    #[test]
    fn csv_values_reparse_exactly() {
        let mut cfg = build_case(Case::I);
        cfg.horizon = 30;
        let traj = run(&cfg, &sample_initials(&cfg)).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(!text.contains('\r'));
        let rows = read_trajectory_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 31 * 4);
        for row in &rows {
            let i = row.agent - 1;
            assert_eq!(&row.x1[..], &traj.state(row.k, i)[..1]);
            assert_eq!(&row.x2[..], &traj.state(row.k, i)[1..]);
            assert_eq!(row.u, traj.input(row.k, i));
            assert_eq!(row.sigma_u, traj.saturated_input(row.k, i));
        }
    }

    #[test]
    fn csv_reader_rejects_garbage() {
        assert!(read_trajectory_csv("a,b\n1,2\n".as_bytes()).is_err());
        let bad = "k,agent,x1,x2,u,sigma_u\n0,1,zz,0,0,0\n";
        assert!(read_trajectory_csv(bad.as_bytes()).is_err());
        let short = "k,agent,x1,x2,u,sigma_u\n0,1,0\n";
        assert!(read_trajectory_csv(short.as_bytes()).is_err());
    }
}
