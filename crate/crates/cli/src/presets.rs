//! Bundled scenarios.

use coopreg_core::comms::ChannelParams;
use coopreg_core::linalg::Mat;
use coopreg_core::plant::{AgentModel, ExoSystem, GainSet, Role};
use coopreg_core::sim::{AgentSpec, Scenario, SimConfig};
use coopreg_core::Tolerances;

use crate::scenario::{random_initial_states, ScenarioFile};
use crate::CliError;

pub const PRESET_NAMES: [&str; 4] = ["paper-example", "assumption4-violation", "unstable-exosystem", "lossy-extreme"];

fn m(rows: &[&[f64]]) -> Mat<f64> {
    Mat::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).expect("static preset matrix")
}

/// Agent `ẋ₁ = x₂`, `ẋ₂ = a(x₁ + x₂) + u + bυ₂`, measuring `x₁ + cυ₁` and
/// regulating `x₁ − υ₁`.
pub fn example_agent(a: f64, b: f64, c: f64, role: Role) -> AgentModel<f64> {
    AgentModel {
        a: m(&[&[0.0, 1.0], &[a, a]]),
        b: m(&[&[0.0], &[1.0]]),
        c: m(&[&[1.0, 0.0]]),
        d: m(&[&[0.0]]),
        e: m(&[&[0.0, 0.0], &[0.0, b]]),
        f: m(&[&[c, 0.0]]),
        ce: m(&[&[1.0, 0.0]]),
        de: m(&[&[0.0]]),
        fe: m(&[&[-1.0, 0.0]]),
        role,
    }
}

/// Edges `(to, from)` of the six-agent network, zero-based.
pub const EXAMPLE_EDGES: [(usize, usize); 7] = [(0, 3), (0, 4), (1, 0), (2, 0), (2, 3), (3, 1), (3, 5)];

fn example_adjacency() -> Mat<f64> {
    let mut adj = Mat::zeros(6, 6);
    for (i, j) in EXAMPLE_EDGES {
        adj[(i, j)] = 1.0;
    }
    adj
}

fn example_gains(role: Role) -> GainSet<f64> {
    match role {
        Role::Leader => GainSet {
            k: m(&[&[-10.0, -8.0]]),
            l1: m(&[&[-15.0], &[-25.0]]),
            l2: Some(m(&[&[-10.0], &[-10.0]])),
        },
        Role::Follower => GainSet { k: m(&[&[-10.0, -8.0]]), l1: m(&[&[-10.0], &[-10.0]]), l2: None },
    }
}

/// The six-agent network: four followers, two leaders, harmonic exosystem.
pub fn paper_example() -> Scenario {
    let params = [
        (-2.0, 0.0, 0.0, Role::Follower),
        (-2.0, 0.0, 0.0, Role::Follower),
        (0.0, 1.0, 0.0, Role::Follower),
        (0.0, 1.0, 0.0, Role::Follower),
        (0.0, 1.0, -1.0, Role::Leader),
        (0.0, 1.0, -1.0, Role::Leader),
    ];
    let channel = ChannelParams {
        ts: 0.1,
        p_transmit: 0.3,
        p_loss: 0.5,
        delay_min: 0.05,
        delay_max: 0.4,
        h_star: 1.5,
        seed: 1,
        enforce_bound: true,
    };
    let x0 = random_initial_states(channel.seed, &[2; 6]);
    Scenario {
        name: "paper-example".into(),
        agents: params
            .iter()
            .zip(x0)
            .map(|(&(a, b, c, role), x0)| AgentSpec { model: example_agent(a, b, c, role), gains: Some(example_gains(role)), x0 })
            .collect(),
        exo: ExoSystem { s: m(&[&[0.0, 1.0], &[-1.0, 0.0]]), upsilon0: vec![1.0, 0.0] },
        adjacency: example_adjacency(),
        channel,
        sim: SimConfig::for_sampling(channel.ts, 40.0),
        tolerances: Tolerances::default(),
        force: false,
    }
}

pub fn preset(name: &str) -> Result<Scenario, CliError> {
    let mut sc = paper_example();
    match name {
        "paper-example" => {}
        "assumption4-violation" => {
            // Follower 2 loses its only incoming edge.
            sc.adjacency[(1, 0)] = 0.0;
        }
        "unstable-exosystem" => {
            // Eigenvalues ±1; the regulator equations stay solvable.
            sc.exo.s = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
        }
        "lossy-extreme" => {
            sc.channel.p_loss = 0.95;
        }
        _ => {
            return Err(CliError::UnknownPreset {
                name: name.to_string(),
                valid: PRESET_NAMES.join(", "),
            })
        }
    }
    sc.name = name.to_string();
    Ok(sc)
}

/// Scenario file text for a preset.
pub fn preset_text(name: &str) -> Result<String, CliError> {
    let sc = preset(name)?;
    let body = ScenarioFile::from_scenario(&sc).to_toml()?;
    Ok(format!("# coopreg scenario: {name}\n# Agents are listed followers first; agent ids are 1-based in all outputs.\n\n{body}"))
}
