//! TOML scenario files.
//!
//! Matrices are lists of rows. `D` and `De` may be omitted and default to
//! zero; a missing `x0` is drawn uniformly from `[-1, 1]` using the channel
//! seed; a missing `[agents.gains]` table means the gains are synthesized.

use std::path::Path;

use coopreg_core::comms::ChannelParams;
use coopreg_core::linalg::Mat;
use coopreg_core::plant::{AgentModel, ExoSystem, GainSet, Role};
use coopreg_core::sim::{AgentSpec, Scenario, SimConfig};
use coopreg_core::tolerance::{Tolerances, ENV_VAR};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::CliError;

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub exosystem: ExoFile,
    pub graph: GraphFile,
    pub channel: ChannelFile,
    pub sim: SimFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<TolerancesFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputFile>,
    pub agents: Vec<AgentFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExoFile {
    #[serde(rename = "S")]
    pub s: Rows,
    pub upsilon0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    /// Row `i`, column `j` > 0 when agent `i` receives from agent `j`.
    pub adjacency: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelFile {
    pub ts: f64,
    pub p_transmit: f64,
    pub p_loss: f64,
    pub delay_min: f64,
    pub delay_max: f64,
    pub h_star: f64,
    pub seed: u64,
    #[serde(default = "yes")]
    pub enforce_bound: bool,
}

fn yes() -> bool {
    true
}

fn ten() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimFile {
    /// Defaults to `ts / 10`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub horizon: f64,
    #[serde(default = "ten")]
    pub record_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancesFile {
    pub global: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputFile {
    pub dir: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoleFile {
    Follower,
    Leader,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentFile {
    pub role: RoleFile,
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "B")]
    pub b: Rows,
    #[serde(rename = "C")]
    pub c: Rows,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Rows>,
    #[serde(rename = "E")]
    pub e: Rows,
    #[serde(rename = "F")]
    pub f: Rows,
    #[serde(rename = "Ce")]
    pub ce: Rows,
    #[serde(rename = "De", default, skip_serializing_if = "Option::is_none")]
    pub de: Option<Rows>,
    #[serde(rename = "Fe")]
    pub fe: Rows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<GainsFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsFile {
    #[serde(rename = "K")]
    pub k: Rows,
    #[serde(rename = "L1")]
    pub l1: Rows,
    #[serde(rename = "L2", default, skip_serializing_if = "Option::is_none")]
    pub l2: Option<Rows>,
}

/// Stream of the channel seed reserved for initial conditions; edge
/// schedules use streams `(from << 32) | to`.
const INIT_STREAM: u64 = u64::MAX;

/// Random initial plant states in `[-1, 1]` for the given dimensions.
pub fn random_initial_states(seed: u64, dims: &[usize]) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INIT_STREAM);
    dims.iter().map(|&n| (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect()).collect()
}

fn to_rows(m: &Mat<f64>) -> Rows {
    m.to_rows()
}

fn matrix(rows: &Rows, agent: Option<usize>, field: &str) -> Result<Mat<f64>, CliError> {
    let dim_err = |message: String| match agent {
        Some(agent) => CliError::Dimension { agent: Some(agent + 1), field: field.to_string(), message },
        None => CliError::Dimension { agent: None, field: field.to_string(), message },
    };
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 {
        return Err(dim_err("matrix must have at least one row and one column".into()));
    }
    if let Some(r) = rows.iter().position(|r| r.len() != cols) {
        return Err(dim_err(format!("row {} has {} entries, expected {cols}", r + 1, rows[r].len())));
    }
    Mat::from_rows(rows).map_err(|e| dim_err(e.to_string()))
}

/// Tolerances from `COOPREG_TOL` if set, else the file's global value, else
/// the defaults.
pub fn resolve_tolerances(file: Option<&TolerancesFile>) -> Tolerances {
    if std::env::var(ENV_VAR).is_ok() {
        return Tolerances::from_env();
    }
    match file {
        Some(t) if t.global.is_finite() && t.global > 0.0 => Tolerances::scaled(t.global),
        _ => Tolerances::default(),
    }
}

impl ScenarioFile {
    pub fn parse_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Parse(e.to_string()))
    }

    /// Builds and cross-checks the in-memory scenario.
    pub fn to_scenario(&self) -> Result<Scenario, CliError> {
        if self.agents.is_empty() {
            return Err(CliError::Parse("scenario lists no agents".into()));
        }
        if let Some(first_leader) = self.agents.iter().position(|a| a.role == RoleFile::Leader) {
            if let Some(i) = (first_leader..self.agents.len()).find(|&i| self.agents[i].role == RoleFile::Follower) {
                return Err(CliError::Order { follower: i + 1, leader: first_leader + 1 });
            }
        }

        let s = matrix(&self.exosystem.s, None, "exosystem.S")?;
        let exo = ExoSystem { s, upsilon0: self.exosystem.upsilon0.clone() };
        exo.check_dimensions().map_err(|e| CliError::Dimension {
            agent: None,
            field: "exosystem".into(),
            message: e.to_string(),
        })?;
        let q = exo.q();

        let n = self.agents.len();
        let ch = &self.channel;
        let mut models = Vec::with_capacity(n);
        for (i, a) in self.agents.iter().enumerate() {
            let am = matrix(&a.a, Some(i), "A")?;
            let bm = matrix(&a.b, Some(i), "B")?;
            let cm = matrix(&a.c, Some(i), "C")?;
            let cem = matrix(&a.ce, Some(i), "Ce")?;
            let d = match &a.d {
                Some(d) => matrix(d, Some(i), "D")?,
                None => Mat::zeros(cm.rows(), bm.cols()),
            };
            let de = match &a.de {
                Some(d) => matrix(d, Some(i), "De")?,
                None => Mat::zeros(cem.rows(), bm.cols()),
            };
            let model = AgentModel {
                a: am,
                b: bm,
                c: cm,
                d,
                e: matrix(&a.e, Some(i), "E")?,
                f: matrix(&a.f, Some(i), "F")?,
                ce: cem,
                de,
                fe: matrix(&a.fe, Some(i), "Fe")?,
                role: match a.role {
                    RoleFile::Follower => Role::Follower,
                    RoleFile::Leader => Role::Leader,
                },
            };
            model.check_dimensions(q).map_err(|e| dimension_from_plant(i, e))?;
            models.push(model);
        }

        let random_x0 = random_initial_states(ch.seed, &models.iter().map(|m| m.nx()).collect::<Vec<_>>());
        let mut agents = Vec::with_capacity(n);
        for (i, (a, model)) in self.agents.iter().zip(models).enumerate() {
            let gains = match &a.gains {
                Some(g) => {
                    let gs = GainSet {
                        k: matrix(&g.k, Some(i), "gains.K")?,
                        l1: matrix(&g.l1, Some(i), "gains.L1")?,
                        l2: g.l2.as_ref().map(|l| matrix(l, Some(i), "gains.L2")).transpose()?,
                    };
                    gs.check_dimensions(&model).map_err(|e| dimension_from_plant(i, e))?;
                    if model.role == Role::Follower && gs.l2.is_some() {
                        return Err(CliError::Dimension {
                            agent: Some(i + 1),
                            field: "gains.L2".into(),
                            message: "followers take no L2 gain".into(),
                        });
                    }
                    Some(gs)
                }
                None => None,
            };
            let x0 = a.x0.clone().unwrap_or_else(|| random_x0[i].clone());
            if x0.len() != model.nx() {
                return Err(CliError::Dimension {
                    agent: Some(i + 1),
                    field: "x0".into(),
                    message: format!("expected {} entries, found {}", model.nx(), x0.len()),
                });
            }
            agents.push(AgentSpec { model, gains, x0 });
        }

        let adjacency = matrix(&self.graph.adjacency, None, "graph.adjacency")?;
        if adjacency.shape() != (n, n) {
            return Err(CliError::Dimension {
                agent: None,
                field: "graph.adjacency".into(),
                message: format!("expected {n}x{n} for {n} agents, found {:?}", adjacency.shape()),
            });
        }

        let channel = ChannelParams {
            ts: ch.ts,
            p_transmit: ch.p_transmit,
            p_loss: ch.p_loss,
            delay_min: ch.delay_min,
            delay_max: ch.delay_max,
            h_star: ch.h_star,
            seed: ch.seed,
            enforce_bound: ch.enforce_bound,
        };
        let sim = SimConfig {
            dt: self.sim.dt.unwrap_or(ch.ts / 10.0),
            horizon: self.sim.horizon,
            record_every: self.sim.record_every,
        };
        Ok(Scenario {
            name: self.name.clone(),
            agents,
            exo,
            adjacency,
            channel,
            sim,
            tolerances: resolve_tolerances(self.tolerances.as_ref()),
            force: false,
        })
    }

    /// File form of a scenario, with every field written out.
    pub fn from_scenario(sc: &Scenario) -> Self {
        let ch = &sc.channel;
        Self {
            name: sc.name.clone(),
            exosystem: ExoFile { s: to_rows(&sc.exo.s), upsilon0: sc.exo.upsilon0.clone() },
            graph: GraphFile { adjacency: to_rows(&sc.adjacency) },
            channel: ChannelFile {
                ts: ch.ts,
                p_transmit: ch.p_transmit,
                p_loss: ch.p_loss,
                delay_min: ch.delay_min,
                delay_max: ch.delay_max,
                h_star: ch.h_star,
                seed: ch.seed,
                enforce_bound: ch.enforce_bound,
            },
            sim: SimFile { dt: Some(sc.sim.dt), horizon: sc.sim.horizon, record_every: sc.sim.record_every },
            tolerances: (sc.tolerances != Tolerances::default())
                .then_some(TolerancesFile { global: sc.tolerances.regulator_residual }),
            output: None,
            agents: sc
                .agents
                .iter()
                .map(|a| AgentFile {
                    role: match a.model.role {
                        Role::Follower => RoleFile::Follower,
                        Role::Leader => RoleFile::Leader,
                    },
                    a: to_rows(&a.model.a),
                    b: to_rows(&a.model.b),
                    c: to_rows(&a.model.c),
                    d: Some(to_rows(&a.model.d)),
                    e: to_rows(&a.model.e),
                    f: to_rows(&a.model.f),
                    ce: to_rows(&a.model.ce),
                    de: Some(to_rows(&a.model.de)),
                    fe: to_rows(&a.model.fe),
                    x0: Some(a.x0.clone()),
                    gains: a.gains.as_ref().map(|g| GainsFile {
                        k: to_rows(&g.k),
                        l1: to_rows(&g.l1),
                        l2: g.l2.as_ref().map(to_rows),
                    }),
                })
                .collect(),
        }
    }
}

fn dimension_from_plant(agent: usize, e: coopreg_core::plant::PlantError) -> CliError {
    use coopreg_core::plant::PlantError;
    match e {
        PlantError::Dimension { field, expected, found } => CliError::Dimension {
            agent: Some(agent + 1),
            field: field.to_string(),
            message: format!("expected {}x{}, found {}x{}", expected.0, expected.1, found.0, found.1),
        },
        other => CliError::Dimension { agent: Some(agent + 1), field: "model".into(), message: other.to_string() },
    }
}

/// Reads and validates a scenario file.
pub fn parse_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?;
    ScenarioFile::parse_str(&text)?.to_scenario()
}
