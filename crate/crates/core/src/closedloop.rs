//! Closed-loop vector field: plants, exosystem, controllers, observers and
//! exosystem estimators, plus the error coordinates used in the analysis.

use thiserror::Error;

use crate::comms::{predict, CommsError, EdgeState};
use crate::graph::Topology;
use crate::linalg::Mat;
use crate::plant::{AgentModel, GainSet, PlantError, RegulatorSolution, Role};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ClosedLoopError {
    #[error("operation requires a {expected} agent")]
    RoleMismatch { expected: &'static str },
    #[error("agent {agent}: regulated error from the decomposition differs from the raw output by {diff:e} (tolerance {tolerance:e})")]
    DecompositionMismatch { agent: usize, diff: f64, tolerance: f64 },
    #[error("agent {agent}: {source}")]
    Plant { agent: usize, source: PlantError },
    #[error("{0}")]
    Setup(String),
    #[error(transparent)]
    Comms(#[from] CommsError),
}

/// Plant, observer and exosystem-estimate state of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState<T> {
    pub x: Vec<T>,
    pub xhat: Vec<T>,
    pub upsilon_hat: Vec<T>,
}

impl<T: Scalar> AgentState<T> {
    pub fn zeros(nx: usize, q: usize) -> Self {
        Self { x: vec![T::zero(); nx], xhat: vec![T::zero(); nx], upsilon_hat: vec![T::zero(); q] }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.xhat).chain(&self.upsilon_hat).all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> T {
        self.x
            .iter()
            .chain(&self.xhat)
            .chain(&self.upsilon_hat)
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// `ε = x − Πυ̂`, `x̃ = x̂ − x`, `ṽ = υ̂ − υ` and the regulated error `e`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCoordinates<T> {
    pub eps: Vec<T>,
    pub x_tilde: Vec<T>,
    pub v_tilde: Vec<T>,
    pub e: Vec<T>,
}

fn sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(x, y)| *x - *y).collect()
}

fn add_into<T: Scalar>(acc: &mut [T], v: &[T]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += *b;
    }
}

/// `u = K(x̂ − Πυ̂) + Γυ̂`.
pub fn control_input<T: Scalar>(
    m: &AgentModel<T>,
    g: &GainSet<T>,
    r: &RegulatorSolution<T>,
    s: &AgentState<T>,
) -> Vec<T> {
    debug_assert_eq!(s.x.len(), m.nx());
    let feedback = g.k.mul_vec(&sub(&s.xhat, &r.pi.mul_vec(&s.upsilon_hat)));
    let mut u = r.gamma.mul_vec(&s.upsilon_hat);
    add_into(&mut u, &feedback);
    u
}

/// Measured output `y = Cx + Du + Fυ`.
pub fn measured_output<T: Scalar>(m: &AgentModel<T>, x: &[T], u: &[T], upsilon: &[T]) -> Vec<T> {
    let mut y = m.c.mul_vec(x);
    add_into(&mut y, &m.d.mul_vec(u));
    add_into(&mut y, &m.f.mul_vec(upsilon));
    y
}

/// Innovation `ŷ − y` with `ŷ = Cx̂ + Fυ̂ + Du`.
fn innovation<T: Scalar>(m: &AgentModel<T>, s: &AgentState<T>, u: &[T], y: &[T]) -> Vec<T> {
    sub(&measured_output(m, &s.xhat, u, &s.upsilon_hat), y)
}

/// `x̂̇ = Ax̂ + Eυ̂ + Bu + L1(ŷ − y)`.
pub fn observer_rhs<T: Scalar>(m: &AgentModel<T>, g: &GainSet<T>, s: &AgentState<T>, u: &[T], y: &[T]) -> Vec<T> {
    let mut d = m.a.mul_vec(&s.xhat);
    add_into(&mut d, &m.e.mul_vec(&s.upsilon_hat));
    add_into(&mut d, &m.b.mul_vec(u));
    add_into(&mut d, &g.l1.mul_vec(&innovation(m, s, u, y)));
    d
}

/// Leader estimator correction `η = L2(ŷ − y)`.
pub fn eta_leader<T: Scalar>(
    m: &AgentModel<T>,
    g: &GainSet<T>,
    s: &AgentState<T>,
    u: &[T],
    y: &[T],
) -> Result<Vec<T>, ClosedLoopError> {
    if m.role != Role::Leader {
        return Err(ClosedLoopError::RoleMismatch { expected: "leader" });
    }
    let l2 = g.l2.as_ref().ok_or(ClosedLoopError::RoleMismatch { expected: "leader" })?;
    Ok(l2.mul_vec(&innovation(m, s, u, y)))
}

/// Follower estimator correction
/// `η = −Σ a_ij (υ̂_i − e^{S(t − kx·ts)} υ̂_j(kx·ts))`.
///
/// Edges that have not delivered anything yet contribute nothing.
pub fn eta_follower<T: Scalar>(
    s: &Mat<T>,
    t: f64,
    ts: f64,
    upsilon_hat: &[T],
    edges: &[(T, &EdgeState<T>)],
) -> Result<Vec<T>, CommsError> {
    let mut eta = vec![T::zero(); upsilon_hat.len()];
    for (w, edge) in edges {
        if edge.kx.is_none() {
            continue;
        }
        let p = predict(s, edge, t, ts)?;
        for (k, e) in eta.iter_mut().enumerate() {
            *e -= *w * (upsilon_hat[k] - p[k]);
        }
    }
    Ok(eta)
}

/// Both evaluations of the regulated error: raw `Ce x + De u + Fe υ` and the
/// decomposition `(Ce + De K)ε + De K x̃ − Fe ṽ`. They differ only by the
/// regulator residual applied to `υ̂`, so the tolerance scales with the size
/// of the terms involved.
pub fn error_coordinates<T: Scalar>(
    m: &AgentModel<T>,
    g: &GainSet<T>,
    r: &RegulatorSolution<T>,
    s: &AgentState<T>,
    upsilon: &[T],
    u: &[T],
    tolerance: f64,
) -> Result<ErrorCoordinates<T>, (ErrorCoordinates<T>, f64)> {
    let eps = sub(&s.x, &r.pi.mul_vec(&s.upsilon_hat));
    let x_tilde = sub(&s.xhat, &s.x);
    let v_tilde = sub(&s.upsilon_hat, upsilon);

    let mut e = m.ce.mul_vec(&s.x);
    add_into(&mut e, &m.de.mul_vec(u));
    add_into(&mut e, &m.fe.mul_vec(upsilon));

    let dek = &m.de * &g.k;
    let mut e2 = (&m.ce + &dek).mul_vec(&eps);
    add_into(&mut e2, &dek.mul_vec(&x_tilde));
    e2 = sub(&e2, &m.fe.mul_vec(&v_tilde));

    let scale = [&s.x[..], &s.xhat, &s.upsilon_hat, upsilon, u]
        .iter()
        .flat_map(|v| v.iter())
        .fold(0.0f64, |acc, v| acc.max(v.as_f64().abs()));
    let diff = e.iter().zip(&e2).fold(0.0f64, |acc, (a, b)| acc.max((*a - *b).as_f64().abs()));
    let coords = ErrorCoordinates { eps, x_tilde, v_tilde, e };
    if diff > tolerance * (1.0 + scale) {
        Err((coords, diff))
    } else {
        Ok(coords)
    }
}

/// Follower-side view of one incoming edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InEdge<T> {
    pub from: usize,
    pub weight: T,
    /// Index into the edge-state slice passed to [`ClosedLoop::rhs`].
    pub slot: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentLoop<T> {
    pub model: AgentModel<T>,
    pub gains: GainSet<T>,
    pub regulator: RegulatorSolution<T>,
}

/// Full state: every agent plus the exosystem.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopState<T> {
    pub agents: Vec<AgentState<T>>,
    pub upsilon: Vec<T>,
}

impl<T: Scalar> LoopState<T> {
    /// `self + h·d`.
    pub fn axpy(&self, h: T, d: &Self) -> Self {
        let f = |a: &[T], b: &[T]| a.iter().zip(b).map(|(x, y)| *x + h * *y).collect::<Vec<T>>();
        Self {
            agents: self
                .agents
                .iter()
                .zip(&d.agents)
                .map(|(a, b)| AgentState {
                    x: f(&a.x, &b.x),
                    xhat: f(&a.xhat, &b.xhat),
                    upsilon_hat: f(&a.upsilon_hat, &b.upsilon_hat),
                })
                .collect(),
            upsilon: f(&self.upsilon, &d.upsilon),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.agents.iter().all(AgentState::is_finite) && self.upsilon.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> T {
        self.agents
            .iter()
            .map(AgentState::max_abs)
            .chain(self.upsilon.iter().map(|v| v.abs()))
            .fold(T::zero(), |m, v| m.max(v))
    }
}

/// Assembled closed loop. Edge states are owned by the caller and indexed by
/// position in [`ClosedLoop::edges`].
#[derive(Debug, Clone)]
pub struct ClosedLoop<T> {
    pub s: Mat<T>,
    pub ts: f64,
    pub agents: Vec<AgentLoop<T>>,
    /// `(from, to, weight)` for every edge, in adjacency order.
    pub edges: Vec<(usize, usize, T)>,
    in_edges: Vec<Vec<InEdge<T>>>,
}

impl<T: Scalar> ClosedLoop<T> {
    pub fn new(s: Mat<T>, ts: f64, agents: Vec<AgentLoop<T>>, topology: &Topology<T>) -> Result<Self, ClosedLoopError> {
        if agents.len() != topology.n() {
            return Err(ClosedLoopError::Setup(format!(
                "{} agents but the graph has {} nodes",
                agents.len(),
                topology.n()
            )));
        }
        let q = s.rows();
        for (i, a) in agents.iter().enumerate() {
            let expected = if topology.is_leader(i) { Role::Leader } else { Role::Follower };
            if a.model.role != expected {
                return Err(ClosedLoopError::Setup(format!(
                    "agent {} is declared {} but sits in the {} block",
                    i + 1,
                    a.model.role.as_str(),
                    expected.as_str()
                )));
            }
            a.model.check_dimensions(q).map_err(|source| ClosedLoopError::Plant { agent: i, source })?;
            a.gains.check_dimensions(&a.model).map_err(|source| ClosedLoopError::Plant { agent: i, source })?;
        }
        let edges = topology.edges();
        let mut in_edges = vec![Vec::new(); agents.len()];
        for (slot, &(from, to, weight)) in edges.iter().enumerate() {
            in_edges[to].push(InEdge { from, weight, slot });
        }
        Ok(Self { s, ts, agents, edges, in_edges })
    }

    pub fn in_edges(&self, i: usize) -> &[InEdge<T>] {
        &self.in_edges[i]
    }

    pub fn q(&self) -> usize {
        self.s.rows()
    }

    /// Initial state with `x` given, observers at zero and `υ̂ = 0`.
    pub fn initial_state(&self, x0: &[Vec<T>], upsilon0: &[T]) -> LoopState<T> {
        let agents = self
            .agents
            .iter()
            .zip(x0)
            .map(|(a, x)| AgentState { x: x.clone(), ..AgentState::zeros(a.model.nx(), self.q()) })
            .collect();
        LoopState { agents, upsilon: upsilon0.to_vec() }
    }

    /// Control inputs of every agent.
    pub fn inputs(&self, state: &LoopState<T>) -> Vec<Vec<T>> {
        self.agents
            .iter()
            .zip(&state.agents)
            .map(|(a, s)| control_input(&a.model, &a.gains, &a.regulator, s))
            .collect()
    }

    /// Time derivative of the whole closed loop.
    pub fn rhs(&self, t: f64, state: &LoopState<T>, edge_states: &[EdgeState<T>]) -> Result<LoopState<T>, ClosedLoopError> {
        let ups = &state.upsilon;
        let mut agents = Vec::with_capacity(self.agents.len());
        for (i, (a, s)) in self.agents.iter().zip(&state.agents).enumerate() {
            let m = &a.model;
            let u = control_input(m, &a.gains, &a.regulator, s);
            let y = measured_output(m, &s.x, &u, ups);

            let mut dx = m.a.mul_vec(&s.x);
            add_into(&mut dx, &m.b.mul_vec(&u));
            add_into(&mut dx, &m.e.mul_vec(ups));

            let dxhat = observer_rhs(m, &a.gains, s, &u, &y);

            let eta = match m.role {
                Role::Leader => eta_leader(m, &a.gains, s, &u, &y)?,
                Role::Follower => {
                    let edges: Vec<(T, &EdgeState<T>)> =
                        self.in_edges[i].iter().map(|e| (e.weight, &edge_states[e.slot])).collect();
                    eta_follower(&self.s, t, self.ts, &s.upsilon_hat, &edges)?
                }
            };
            let mut dv = self.s.mul_vec(&s.upsilon_hat);
            add_into(&mut dv, &eta);
            agents.push(AgentState { x: dx, xhat: dxhat, upsilon_hat: dv });
        }
        Ok(LoopState { agents, upsilon: self.s.mul_vec(ups) })
    }

    /// Error coordinates of every agent, with the dual check of `e`.
    pub fn errors(&self, state: &LoopState<T>, tolerance: f64) -> Result<Vec<ErrorCoordinates<T>>, ClosedLoopError> {
        self.agents
            .iter()
            .zip(&state.agents)
            .enumerate()
            .map(|(i, (a, s))| {
                let u = control_input(&a.model, &a.gains, &a.regulator, s);
                error_coordinates(&a.model, &a.gains, &a.regulator, s, &state.upsilon, &u, tolerance).map_err(
                    |(_, diff)| ClosedLoopError::DecompositionMismatch {
                        agent: i,
                        diff,
                        tolerance,
                    },
                )
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::solve_regulator_equations;
    use crate::tolerance::Tolerances;

    fn m(rows: &[&[f64]]) -> Mat<f64> {
        Mat::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn example_agent(a: f64, b: f64, c: f64, role: Role) -> AgentModel<f64> {
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

    fn rot() -> Mat<f64> {
        m(&[&[0.0, 1.0], &[-1.0, 0.0]])
    }

    fn leader_gains() -> GainSet<f64> {
        GainSet { k: m(&[&[-10.0, -8.0]]), l1: m(&[&[-15.0], &[-25.0]]), l2: Some(m(&[&[-10.0], &[-10.0]])) }
    }

    fn follower_gains() -> GainSet<f64> {
        GainSet { k: m(&[&[-10.0, -8.0]]), l1: m(&[&[-10.0], &[-10.0]]), l2: None }
    }

    fn reg(model: &AgentModel<f64>) -> RegulatorSolution<f64> {
        solve_regulator_equations(model, &rot(), &Tolerances::default()).unwrap()
    }

    fn st(x: [f64; 2], xhat: [f64; 2], vhat: [f64; 2]) -> AgentState<f64> {
        AgentState { x: x.to_vec(), xhat: xhat.to_vec(), upsilon_hat: vhat.to_vec() }
    }

    #[test]
    fn control_input_cases() {
        let model = example_agent(-2.0, 0.0, 0.0, Role::Follower);
        let r = reg(&model);
        let g = follower_gains();
        let u = control_input(&model, &g, &r, &st([0.0; 2], [1.0, 0.0], [1.0, 0.0]));
        assert!((u[0] - 1.0).abs() < 1e-12);
        // On the regulation manifold only the feedforward remains.
        let u = control_input(&model, &g, &r, &st([0.0; 2], [0.3, -0.7], [0.3, -0.7]));
        assert!((u[0] - (0.3 * 1.0 - 0.7 * 2.0)).abs() < 1e-12);
        let u = control_input(&model, &g, &r, &st([0.0; 2], [0.5, 0.25], [0.0, 0.0]));
        assert!((u[0] - (-10.0 * 0.5 - 8.0 * 0.25)).abs() < 1e-12);
    }

    #[test]
    fn observer_and_leader_estimator_against_hand_assembly() {
        let model = example_agent(0.0, 1.0, -1.0, Role::Leader);
        let g = leader_gains();
        let r = reg(&model);
        let s = st([0.4, -1.2], [0.1, 0.9], [0.7, -0.3]);
        let ups = [0.2, 0.5];
        let u = control_input(&model, &g, &r, &s);
        let y = measured_output(&model, &s.x, &u, &ups);
        let d = observer_rhs(&model, &g, &s, &u, &y);

        // ŷ − y = x̃₁ − ṽ₁ since C = [1 0], F = [−1 0], D = 0.
        let innov = (s.xhat[0] - s.x[0]) - (s.upsilon_hat[0] - ups[0]);
        let expected = [s.xhat[1] - 15.0 * innov, s.upsilon_hat[1] + u[0] - 25.0 * innov];
        assert!((d[0] - expected[0]).abs() < 1e-12 && (d[1] - expected[1]).abs() < 1e-12);

        let eta = eta_leader(&model, &g, &s, &u, &y).unwrap();
        assert!((eta[0] + 10.0 * innov).abs() < 1e-12 && (eta[1] + 10.0 * innov).abs() < 1e-12);

        // Perfect estimates: zero innovation, zero η.
        let p = st([0.4, -1.2], [0.4, -1.2], ups);
        let up = control_input(&model, &g, &r, &p);
        let yp = measured_output(&model, &p.x, &up, &ups);
        assert_eq!(eta_leader(&model, &g, &p, &up, &yp).unwrap(), vec![0.0, 0.0]);

        let follower = example_agent(-2.0, 0.0, 0.0, Role::Follower);
        assert!(matches!(
            eta_leader(&follower, &follower_gains(), &s, &u, &y),
            Err(ClosedLoopError::RoleMismatch { .. })
        ));
    }

    #[test]
    fn follower_eta_cases() {
        let vhat = [0.3, -0.4];
        let none = EdgeState::<f64>::new(2);
        assert_eq!(eta_follower(&rot(), 2.0, 0.1, &vhat, &[(1.0, &none)]).unwrap(), vec![0.0, 0.0]);

        let mut e = EdgeState::new(2);
        e.deliver(20, &[1.0, 2.0], 2.0);
        let eta = eta_follower(&Mat::zeros(2, 2), 3.0, 0.1, &vhat, &[(1.0, &e)]).unwrap();
        assert!((eta[0] - 0.7).abs() < 1e-12 && (eta[1] - 2.4).abs() < 1e-12);

        let mut same = EdgeState::new(2);
        same.deliver(20, &vhat, 2.0);
        assert_eq!(eta_follower(&rot(), 2.0, 0.1, &vhat, &[(2.0, &same), (1.0, &none)]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn error_coordinates_identities() {
        let model = example_agent(0.0, 1.0, 0.0, Role::Follower);
        let g = follower_gains();
        let r = reg(&model);
        let ups = [0.6, -0.2];
        let s = st(ups, ups, ups);
        let u = control_input(&model, &g, &r, &s);
        let c = error_coordinates(&model, &g, &r, &s, &ups, &u, 1e-9).unwrap();
        for v in [&c.eps, &c.x_tilde, &c.v_tilde, &c.e] {
            assert!(v.iter().all(|x| x.abs() < 1e-15));
        }

        let s = st([1.5, 0.3], [1.5, 0.3], ups);
        let u = control_input(&model, &g, &r, &s);
        let c = error_coordinates(&model, &g, &r, &s, &ups, &u, 1e-9).unwrap();
        assert!((c.e[0] - c.eps[0]).abs() < 1e-15);

        let s = st([1.5, 0.3], [-0.2, 0.8], [0.1, 0.9]);
        let u = control_input(&model, &g, &r, &s);
        assert!(error_coordinates(&model, &g, &r, &s, &ups, &u, 1e-9).is_ok());

        // A wrong Π breaks the identity (Γ is invisible here because De = 0).
        let mut bad = r.clone();
        bad.pi = Mat::identity(2).scale(2.0);
        let u = control_input(&model, &g, &bad, &s);
        assert!(error_coordinates(&model, &g, &bad, &s, &ups, &u, 1e-9).is_err());
    }

    fn example_loop() -> ClosedLoop<f64> {
        let mut adj = Mat::zeros(6, 6);
        for (i, j) in [(0, 3), (0, 4), (1, 0), (2, 0), (2, 3), (3, 1), (3, 5)] {
            adj[(i, j)] = 1.0;
        }
        let topo = Topology::new(4, adj).unwrap();
        let params = [(-2.0, 0.0, 0.0), (-2.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 1.0, 0.0), (0.0, 1.0, -1.0), (0.0, 1.0, -1.0)];
        let agents = params
            .iter()
            .enumerate()
            .map(|(i, &(a, b, c))| {
                let role = if i < 4 { Role::Follower } else { Role::Leader };
                let model = example_agent(a, b, c, role);
                let regulator = reg(&model);
                let gains = if i < 4 { follower_gains() } else { leader_gains() };
                AgentLoop { model, gains, regulator }
            })
            .collect();
        ClosedLoop::new(rot(), 0.1, agents, &topo).unwrap()
    }

    #[test]
    fn manifold_is_invariant() {
        let cl = example_loop();
        let ups = vec![1.0, 0.0];
        let x0: Vec<Vec<f64>> = (0..6).map(|_| ups.clone()).collect();
        let mut st = cl.initial_state(&x0, &ups);
        for a in &mut st.agents {
            a.xhat = ups.clone();
            a.upsilon_hat = ups.clone();
        }
        let mut edges: Vec<EdgeState<f64>> = cl.edges.iter().map(|_| EdgeState::new(2)).collect();
        for e in &mut edges {
            e.deliver(0, &ups, 0.0);
        }
        let d = cl.rhs(0.0, &st, &edges).unwrap();
        // On the manifold every state moves like the exosystem: ẋ = Sυ.
        let sv = rot().mul_vec(&ups);
        for a in &d.agents {
            for v in [&a.x, &a.xhat, &a.upsilon_hat] {
                assert!((v[0] - sv[0]).abs() < 1e-12 && (v[1] - sv[1]).abs() < 1e-12);
            }
        }
        for c in cl.errors(&st, 1e-9).unwrap() {
            assert!(c.e[0].abs() < 1e-15);
        }
    }

    #[test]
    fn rhs_matches_reassembly() {
        let cl = example_loop();
        let x0: Vec<Vec<f64>> = (0..6).map(|i| vec![0.1 * i as f64 - 0.2, 0.3 - 0.05 * i as f64]).collect();
        let st = cl.initial_state(&x0, &[1.0, 0.0]);
        let edges: Vec<EdgeState<f64>> = cl.edges.iter().map(|_| EdgeState::new(2)).collect();
        let d = cl.rhs(0.0, &st, &edges).unwrap();
        assert!(d.is_finite());
        let ups = [1.0, 0.0];
        for (i, (a, params)) in d.agents.iter().zip([(-2.0, 0.0), (-2.0, 0.0), (0.0, 1.0), (0.0, 1.0), (0.0, 1.0), (0.0, 1.0)]).enumerate() {
            let (ai, bi) = params;
            let x = &x0[i];
            // Observers and estimates start at zero, so u = 0.
            let dx1 = ai * x[0] + ai * x[1] + bi * ups[1];
            assert!((a.x[0] - x[1]).abs() < 1e-15 && (a.x[1] - dx1).abs() < 1e-15);
            if i < 4 {
                assert_eq!(a.upsilon_hat, vec![0.0, 0.0]);
            }
        }
    }

    #[test]
    fn rejects_role_order() {
        let cl = example_loop();
        let mut agents = cl.agents.clone();
        agents.swap(0, 5);
        let mut adj = Mat::zeros(6, 6);
        adj[(0, 5)] = 1.0;
        let topo = Topology::new(4, adj).unwrap();
        assert!(matches!(ClosedLoop::new(rot(), 0.1, agents, &topo), Err(ClosedLoopError::Setup(_))));
    }
}
