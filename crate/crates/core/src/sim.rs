//! Fixed-step simulation of the whole network and the certificate pipeline
//! that guards it.
//!
//! Integration is classic RK4 on a uniform grid. Message sends and
//! deliveries only happen on grid points: a send at slot `k` reads the
//! sender's estimate at `k·ts`, and a delivery is applied at the first grid
//! point at or after its delivery time.

use std::fmt;

use thiserror::Error;

use crate::closedloop::{AgentLoop, ClosedLoop, ClosedLoopError, ErrorCoordinates, LoopState};
use crate::comms::{audit_blackouts, generate_schedule, ChannelParams, CommsError, Delivery, EdgeState, Message};
use crate::graph::{build_laplacian, check_lemma1, small_gain_radius, GraphError, Lemma1Report, Topology};
use crate::linalg::Mat;
use crate::plant::{
    check_gains, synthesize_gains, validate_assumptions, AgentModel, AssumptionReport, ExoSystem, GainCheck,
    GainSet, Role,
};
use crate::tolerance::Tolerances;

/// Divergence threshold on any state component.
pub const DIVERGENCE_LIMIT: f64 = 1e9;

/// Fraction of the horizon, counted from the end, used for the tail bound.
pub const TAIL_FRACTION: f64 = 0.2;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation setup: {0}")]
    Config(String),
    #[error("state diverged (|state| > {limit:e}) at t = {time}")]
    Diverged { time: f64, limit: f64 },
    #[error(transparent)]
    ClosedLoop(#[from] ClosedLoopError),
    #[error(transparent)]
    Comms(#[from] CommsError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    /// Keep every `record_every`-th grid point.
    pub record_every: usize,
}

impl SimConfig {
    /// Default step `ts / 10`, recording every 10 steps.
    pub fn for_sampling(ts: f64, horizon: f64) -> Self {
        Self { dt: ts / 10.0, horizon, record_every: 10 }
    }

    /// Number of integration steps.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt + 1e-9).floor() as usize
    }

    /// Integration steps per sampling period.
    pub fn steps_per_sample(&self, ts: f64) -> usize {
        (ts / self.dt).round() as usize
    }

    pub fn validate(&self, ts: f64) -> Result<(), SimError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(SimError::Config("dt must be positive".into()));
        }
        let ratio = ts / self.dt;
        if ratio.round() < 1.0 || (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(SimError::Config(format!("ts = {ts} is not an integer multiple of dt = {}", self.dt)));
        }
        if !(self.horizon.is_finite() && self.horizon >= 10.0 * ts - 1e-12) {
            return Err(SimError::Config(format!("horizon {} is shorter than 10·ts", self.horizon)));
        }
        if self.record_every == 0 {
            return Err(SimError::Config("record_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// One agent of a scenario. Missing gains are synthesized.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub model: AgentModel<f64>,
    pub gains: Option<GainSet<f64>>,
    pub x0: Vec<f64>,
}

/// Everything a run needs. Followers come first.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub agents: Vec<AgentSpec>,
    pub exo: ExoSystem<f64>,
    /// `a[i][j] > 0`: agent `i` receives from agent `j`.
    pub adjacency: Mat<f64>,
    pub channel: ChannelParams,
    pub sim: SimConfig,
    pub tolerances: Tolerances,
    /// Simulate even when a certificate fails.
    pub force: bool,
}

impl Scenario {
    pub fn followers(&self) -> usize {
        self.agents.iter().filter(|a| a.model.role == Role::Follower).count()
    }

    /// Index of the first follower listed after a leader, if any.
    pub fn order_violation(&self) -> Option<usize> {
        let first_leader = self.agents.iter().position(|a| a.model.role == Role::Leader)?;
        (first_leader..self.agents.len()).find(|&i| self.agents[i].model.role == Role::Follower)
    }
}

/// Recorded trajectory. All per-sample series have the length of `times`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub times: Vec<f64>,
    pub states: Vec<LoopState<f64>>,
    pub inputs: Vec<Vec<Vec<f64>>>,
    pub errors: Vec<Vec<ErrorCoordinates<f64>>>,
    /// Stored message index per edge at each sample.
    pub kx: Vec<Vec<Option<u64>>>,
    /// `(from, to)` per edge, in the order used by `kx`.
    pub edges: Vec<(usize, usize)>,
    /// Every delivery applied during the run.
    pub deliveries: Vec<DeliveryEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeliveryEvent {
    pub edge: usize,
    pub k: u64,
    pub delivery_time: f64,
    /// Grid time at which it took effect.
    pub applied_at: f64,
    /// False when a newer message had already arrived.
    pub accepted: bool,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Time of the first accepted delivery on each edge.
    pub fn first_delivery(&self) -> Vec<Option<f64>> {
        let mut first = vec![None; self.edges.len()];
        for d in self.deliveries.iter().filter(|d| d.accepted) {
            first[d.edge].get_or_insert(d.applied_at);
        }
        first
    }
}

fn rk4_step(cl: &ClosedLoop<f64>, t: f64, y: &LoopState<f64>, dt: f64, edges: &[EdgeState<f64>]) -> Result<LoopState<f64>, ClosedLoopError> {
    let k1 = cl.rhs(t, y, edges)?;
    let k2 = cl.rhs(t + dt / 2.0, &y.axpy(dt / 2.0, &k1), edges)?;
    let k3 = cl.rhs(t + dt / 2.0, &y.axpy(dt / 2.0, &k2), edges)?;
    let k4 = cl.rhs(t + dt, &y.axpy(dt, &k3), edges)?;
    Ok(y.axpy(dt / 6.0, &k1).axpy(dt / 3.0, &k2).axpy(dt / 3.0, &k3).axpy(dt / 6.0, &k4))
}

/// Integrates the closed loop over `[0, cfg.horizon]`. `schedules[e]` holds
/// the messages of edge `cl.edges[e]`.
pub fn integrate(
    cl: &ClosedLoop<f64>,
    init: &LoopState<f64>,
    schedules: &[Vec<Message>],
    cfg: &SimConfig,
    decomposition_tol: f64,
) -> Result<SimTrace, SimError> {
    cfg.validate(cl.ts)?;
    if schedules.len() != cl.edges.len() {
        return Err(SimError::Config(format!("{} schedules for {} edges", schedules.len(), cl.edges.len())));
    }
    let n_steps = cfg.steps();
    let per_sample = cfg.steps_per_sample(cl.ts);
    let dt = cfg.dt;

    let mut sends: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_steps + 1];
    let mut arrivals: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_steps + 1];
    for (e, sched) in schedules.iter().enumerate() {
        for (mi, msg) in sched.iter().enumerate() {
            let send_idx = msg.k as usize * per_sample;
            if send_idx > n_steps {
                continue;
            }
            sends[send_idx].push((e, mi));
            if let Delivery::At(t) = msg.delivery {
                let idx = ((t / dt) - 1e-9).ceil().max(send_idx as f64) as usize;
                if idx <= n_steps {
                    arrivals[idx].push((e, mi));
                }
            }
        }
    }
    for list in &mut arrivals {
        list.sort_by_key(|&(e, mi)| (e, schedules[e][mi].k));
    }

    let q = cl.q();
    let mut payloads: Vec<Vec<Option<Vec<f64>>>> = schedules.iter().map(|s| vec![None; s.len()]).collect();
    let mut edge_states: Vec<EdgeState<f64>> = cl.edges.iter().map(|_| EdgeState::new(q)).collect();
    let mut trace = SimTrace {
        times: Vec::new(),
        states: Vec::new(),
        inputs: Vec::new(),
        errors: Vec::new(),
        kx: Vec::new(),
        edges: cl.edges.iter().map(|&(f, t, _)| (f, t)).collect(),
        deliveries: Vec::new(),
    };

    let mut state = init.clone();
    for n in 0..=n_steps {
        let t = n as f64 * dt;
        // Captures only read estimates and deliveries only touch edge state,
        // so capturing first also covers zero-delay messages.
        for &(e, mi) in &sends[n] {
            let from = cl.edges[e].0;
            payloads[e][mi] = Some(state.agents[from].upsilon_hat.clone());
        }
        for &(e, mi) in &arrivals[n] {
            let msg = &schedules[e][mi];
            let payload = payloads[e][mi].as_ref().expect("payload captured at send time");
            let accepted = edge_states[e].deliver(msg.k, payload, t);
            trace.deliveries.push(DeliveryEvent {
                edge: e,
                k: msg.k,
                delivery_time: msg.delivery.time().unwrap_or(t),
                applied_at: t,
                accepted,
            });
        }
        if n % cfg.record_every == 0 {
            trace.times.push(t);
            trace.inputs.push(cl.inputs(&state));
            trace.errors.push(cl.errors(&state, decomposition_tol)?);
            trace.kx.push(edge_states.iter().map(|s| s.kx).collect());
            trace.states.push(state.clone());
        }
        if n == n_steps {
            break;
        }
        state = rk4_step(cl, t, &state, dt, &edge_states)?;
        if !state.is_finite() || state.max_abs() > DIVERGENCE_LIMIT {
            return Err(SimError::Diverged { time: t + dt, limit: DIVERGENCE_LIMIT });
        }
    }
    Ok(trace)
}

/// Tail bound and decay slope of one agent's regulated error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentMetrics {
    /// `max |e|` over the final fifth of the horizon.
    pub sup_tail: f64,
    /// Least-squares slope of `log max|e|` over windows; negative when
    /// decaying. `None` if fewer than two windows are above the noise floor.
    pub decay_rate: Option<f64>,
}

/// Slope of `log(max value per window)` against window midpoints over
/// `[t0, t1]`, skipping windows whose maximum is at or below `1e-12`.
pub fn decay_slope(times: &[f64], values: &[f64], t0: f64, t1: f64, windows: usize) -> Option<f64> {
    if windows == 0 || t1 <= t0 {
        return None;
    }
    let width = (t1 - t0) / windows as f64;
    let mut maxima = vec![f64::NEG_INFINITY; windows];
    for (&t, &v) in times.iter().zip(values) {
        if t < t0 || t > t1 {
            continue;
        }
        let w = (((t - t0) / width) as usize).min(windows - 1);
        maxima[w] = maxima[w].max(v.abs());
    }
    let pts: Vec<(f64, f64)> = maxima
        .iter()
        .enumerate()
        .filter(|(_, m)| **m > 1e-12)
        .map(|(w, m)| (t0 + (w as f64 + 0.5) * width, m.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Per-agent tail bound and decay slope of `|e_i|`, using twenty windows
/// over the recorded span.
pub fn convergence_metrics(trace: &SimTrace) -> Vec<AgentMetrics> {
    let (Some(&t0), Some(&t1)) = (trace.times.first(), trace.times.last()) else {
        return Vec::new();
    };
    let tail_start = t1 - TAIL_FRACTION * (t1 - t0);
    let n_agents = trace.errors.first().map_or(0, Vec::len);
    (0..n_agents)
        .map(|i| {
            let mags: Vec<f64> = trace.errors.iter().map(|e| inf_norm(&e[i].e)).collect();
            let sup_tail = trace
                .times
                .iter()
                .zip(&mags)
                .filter(|(t, _)| **t >= tail_start - 1e-12)
                .fold(0.0f64, |m, (_, v)| m.max(*v));
            AgentMetrics { sup_tail, decay_rate: decay_slope(&trace.times, &mags, t0, t1, 20) }
        })
        .collect()
}

/// Exponential rate `λ` of the leader estimation errors `(x̃, ṽ)` fitted over
/// `[t0, t1]` in one-second windows; one entry per leader.
pub fn leader_decay_rates(trace: &SimTrace, roles: &[Role], t0: f64, t1: f64) -> Vec<(usize, Option<f64>)> {
    let windows = ((t1 - t0).round() as usize).max(1);
    roles
        .iter()
        .enumerate()
        .filter(|(_, r)| **r == Role::Leader)
        .map(|(i, _)| {
            let mags: Vec<f64> = trace
                .errors
                .iter()
                .map(|e| inf_norm(&e[i].x_tilde).max(inf_norm(&e[i].v_tilde)))
                .collect();
            (i, decay_slope(&trace.times, &mags, t0, t1, windows).map(|s| -s))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Certificate {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeBlackout {
    pub from: usize,
    pub to: usize,
    /// `None` when the edge never delivered.
    pub max_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkipActivation {
    pub from: usize,
    pub to: usize,
    /// Predictor term skipped until this time; `None` if it never arrived.
    pub until: Option<f64>,
}

/// Outcome of every pipeline stage that ran.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub scenario: String,
    pub certificates: Vec<Certificate>,
    pub assumptions: Option<AssumptionReport<f64>>,
    pub lemma1: Option<Lemma1Report<f64>>,
    pub small_gain_radius: Option<f64>,
    pub gain_checks: Vec<Option<GainCheck>>,
    pub blackouts: Option<Vec<EdgeBlackout>>,
    pub metrics: Option<Vec<AgentMetrics>>,
    pub leader_decay: Option<Vec<(usize, Option<f64>)>>,
    pub skip_rule: Option<Vec<SkipActivation>>,
    /// Reason the pipeline stopped early.
    pub aborted: Option<String>,
    pub error: Option<String>,
}

impl RunReport {
    pub fn certificates_passed(&self) -> bool {
        self.certificates.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&Certificate> {
        self.certificates.iter().find(|c| !c.passed)
    }

    fn push(&mut self, c: Certificate) {
        self.certificates.push(c);
    }
}

/// Result of [`run`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub closed_loop: Option<ClosedLoop<f64>>,
    pub schedules: Vec<Vec<Message>>,
    pub trace: Option<SimTrace>,
}

/// Graph errors phrased with 1-based agent numbers.
fn graph_detail(e: &GraphError) -> String {
    match e {
        GraphError::ZeroInDegree { follower } => format!("follower {} has zero in-degree", follower + 1),
        GraphError::LeaderHasInEdge { leader } => format!("leader {} has an incoming edge", leader + 1),
        other => other.to_string(),
    }
}

fn structural_checks(sc: &Scenario) -> Result<Topology<f64>, String> {
    sc.channel.validate().map_err(|e| e.to_string())?;
    sc.sim.validate(sc.channel.ts).map_err(|e| e.to_string())?;
    sc.exo.check_dimensions().map_err(|e| format!("exosystem: {e}"))?;
    if let Some(i) = sc.order_violation() {
        return Err(format!("agent {} is a follower listed after a leader", i + 1));
    }
    let q = sc.exo.q();
    for (i, a) in sc.agents.iter().enumerate() {
        a.model.check_dimensions(q).map_err(|e| format!("agent {}: {e}", i + 1))?;
        if a.x0.len() != a.model.nx() {
            return Err(format!("agent {}: x0 has {} entries, expected {}", i + 1, a.x0.len(), a.model.nx()));
        }
        if let Some(g) = &a.gains {
            g.check_dimensions(&a.model).map_err(|e| format!("agent {}: {e}", i + 1))?;
        }
    }
    if sc.adjacency.shape() != (sc.agents.len(), sc.agents.len()) {
        return Err(format!(
            "adjacency is {:?} but there are {} agents",
            sc.adjacency.shape(),
            sc.agents.len()
        ));
    }
    Topology::new(sc.followers(), sc.adjacency.clone()).map_err(|e| e.to_string())
}

/// Runs every certificate and, when the closed loop can be assembled,
/// returns it. Certificates are listed in pipeline order.
pub fn certify(sc: &Scenario) -> (RunReport, Option<ClosedLoop<f64>>) {
    let mut report = RunReport { scenario: sc.name.clone(), ..RunReport::default() };
    let tol = &sc.tolerances;
    let topology = match structural_checks(sc) {
        Ok(t) => t,
        Err(msg) => {
            report.push(Certificate::new("scenario structure", false, msg.clone()));
            report.aborted = Some(msg);
            return (report, None);
        }
    };
    report.push(Certificate::new("scenario structure", true, format!("{} agents, {} followers", sc.agents.len(), sc.followers())));

    let models: Vec<AgentModel<f64>> = sc.agents.iter().map(|a| a.model.clone()).collect();
    let assumptions = validate_assumptions(&models, &sc.exo, tol);
    report.push(Certificate::new(
        "exosystem spectrum on imaginary axis",
        assumptions.exo_marginal(),
        match &assumptions.exo_error {
            Some(e) => e.to_string(),
            None => format!("max |Re λ(S)| = {:.3e} (bound {:.1e})", assumptions.exo_max_abs_real, assumptions.exo_bound),
        },
    ));
    for (i, a) in assumptions.agents.iter().enumerate() {
        let id = i + 1;
        let detail = |r: &Result<bool, _>| match r {
            Ok(true) => "ok".to_string(),
            Ok(false) => "fails PBH test".to_string(),
            Err(e) => format!("{e}"),
        };
        report.push(Certificate::new(format!("agent {id} stabilizable"), a.stabilizable_ok(), detail(&a.stabilizable)));
        let what = if a.role == Role::Leader { "augmented pair detectable" } else { "detectable" };
        report.push(Certificate::new(format!("agent {id} {what}"), a.detectable_ok(), detail(&a.detectable)));
        report.push(Certificate::new(
            format!("agent {id} regulator equations"),
            a.regulator_ok(),
            match &a.regulator {
                Ok(r) => format!(
                    "residual {:.2e}, nullity {}",
                    r.residual_dynamic.max(r.residual_output),
                    r.nullity
                ),
                Err(e) => e.to_string(),
            },
        ));
    }

    let in_edge = topology.leaders_with_in_edges();
    let unreachable = topology.unreachable_followers();
    let ids = |v: &[usize]| v.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(", ");
    report.push(Certificate::new(
        "leaders have no incoming edges",
        in_edge.is_empty(),
        if in_edge.is_empty() { "ok".into() } else { format!("leaders with in-edges: {}", ids(&in_edge)) },
    ));
    report.push(Certificate::new(
        "every follower reachable from a leader",
        unreachable.is_empty(),
        if unreachable.is_empty() { "ok".into() } else { format!("unreachable followers: {}", ids(&unreachable)) },
    ));
    match build_laplacian(&topology) {
        Ok(blocks) => {
            match check_lemma1(&blocks, tol) {
                Ok(l) => {
                    report.push(Certificate::new(
                        "L1 nonsingular M-matrix",
                        l.m_matrix(),
                        format!("min Re λ(L1) = {:.6}", l.min_real_eigenvalue),
                    ));
                    report.push(Certificate::new(
                        "-inv(L1)·L2 row-stochastic",
                        l.nonnegative && l.rows_sum_to_one,
                        format!("min entry {:.3e}, max |row sum - 1| {:.3e}", l.min_weight, l.max_row_sum_error),
                    ));
                    report.lemma1 = Some(l);
                }
                Err(e) => report.push(Certificate::new("L1 nonsingular M-matrix", false, graph_detail(&e))),
            }
            match small_gain_radius(&blocks) {
                Ok(rho) => {
                    report.push(Certificate::new("small-gain radius < 1", rho < 1.0, format!("rho = {rho:.12}")));
                    report.small_gain_radius = Some(rho);
                }
                Err(e) => report.push(Certificate::new("small-gain radius < 1", false, graph_detail(&e))),
            }
        }
        Err(e) => report.push(Certificate::new("L1 nonsingular M-matrix", false, graph_detail(&e))),
    }

    let mut loops = Vec::with_capacity(sc.agents.len());
    for (i, (spec, a)) in sc.agents.iter().zip(&assumptions.agents).enumerate() {
        let id = i + 1;
        let (gains, source) = match &spec.gains {
            Some(g) => (Ok(g.clone()), "given"),
            None => (synthesize_gains(&spec.model, &sc.exo.s), "synthesized"),
        };
        let check = gains.as_ref().map_err(|e| e.clone()).and_then(|g| check_gains(&spec.model, &sc.exo.s, g));
        match &check {
            Ok(c) => report.push(Certificate::new(
                format!("agent {id} gains stabilizing"),
                c.passed(),
                format!(
                    "{source}; abscissa controller {:.4}, observer {:.4}",
                    c.controller_abscissa, c.observer_abscissa
                ),
            )),
            Err(e) => report.push(Certificate::new(format!("agent {id} gains stabilizing"), false, format!("{source}: {e}"))),
        }
        report.gain_checks.push(check.ok());
        if let (Ok(g), Ok(r)) = (gains, &a.regulator) {
            loops.push(AgentLoop { model: spec.model.clone(), gains: g, regulator: r.clone() });
        }
    }

    let ch = &sc.channel;
    let feasible = !ch.enforce_bound || ch.h_star >= ch.ts + ch.delay_min;
    report.push(Certificate::new(
        "blackout bound achievable",
        feasible,
        format!(
            "h* = {} s, ts + delay_min = {:.6} s, enforcement {}",
            ch.h_star,
            ch.ts + ch.delay_min,
            if ch.enforce_bound { "on" } else { "off" }
        ),
    ));
    report.assumptions = Some(assumptions);

    let cl = if loops.len() == sc.agents.len() {
        match ClosedLoop::new(sc.exo.s.clone(), ch.ts, loops, &topology) {
            Ok(cl) => Some(cl),
            Err(e) => {
                report.push(Certificate::new("closed loop assembled", false, e.to_string()));
                None
            }
        }
    } else {
        None
    };
    (report, cl)
}

/// Full pipeline: certificates, schedules, blackout audit, integration and
/// metrics. Stops at the first failed certificate unless `force` is set;
/// stages that cannot run without earlier results stop regardless.
pub fn run(sc: &Scenario) -> RunOutput {
    let (mut report, cl) = certify(sc);
    let mut out = RunOutput { report: RunReport::default(), closed_loop: None, schedules: Vec::new(), trace: None };
    let stop = |mut report: RunReport, out: RunOutput, reason: String| {
        report.aborted.get_or_insert(reason);
        RunOutput { report, ..out }
    };
    if let Some(c) = report.first_failure() {
        if !sc.force || cl.is_none() {
            let reason = format!("certificate failed: {}", c.name);
            return stop(report, out, reason);
        }
    }
    let Some(cl) = cl else {
        return stop(report, out, "closed loop could not be assembled".into());
    };

    let mut schedules = Vec::with_capacity(cl.edges.len());
    for &(from, to, _) in &cl.edges {
        match generate_schedule(&sc.channel, sc.sim.horizon, (from, to)) {
            Ok(s) => schedules.push(s),
            Err(e) => {
                report.error = Some(e.to_string());
                return stop(report, out, format!("schedule generation failed on edge {}->{}", from + 1, to + 1));
            }
        }
    }
    let blackouts: Vec<EdgeBlackout> = cl
        .edges
        .iter()
        .zip(&schedules)
        .map(|(&(from, to, _), s)| EdgeBlackout {
            from,
            to,
            max_gap: audit_blackouts(s, sc.sim.horizon, sc.channel.ts).ok(),
        })
        .collect();
    let worst = blackouts.iter().map(|b| b.max_gap.unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
    let within = worst <= sc.channel.h_star + 1e-9;
    report.push(Certificate::new(
        "audited blackouts within h*",
        within,
        format!("worst gap {worst:.4} s, h* = {} s", sc.channel.h_star),
    ));
    report.blackouts = Some(blackouts);
    out.schedules = schedules;
    if !within && !sc.force {
        return stop(report, out, "certificate failed: audited blackouts within h*".into());
    }

    let x0: Vec<Vec<f64>> = sc.agents.iter().map(|a| a.x0.clone()).collect();
    let init = cl.initial_state(&x0, &sc.exo.upsilon0);
    match integrate(&cl, &init, &out.schedules, &sc.sim, sc.tolerances.error_decomposition) {
        Ok(trace) => {
            let roles: Vec<Role> = sc.agents.iter().map(|a| a.model.role).collect();
            let t_end = trace.times.last().copied().unwrap_or(0.0);
            report.metrics = Some(convergence_metrics(&trace));
            report.leader_decay = Some(leader_decay_rates(&trace, &roles, 1.0_f64.min(t_end), 20.0_f64.min(t_end)));
            report.skip_rule = Some(
                trace
                    .first_delivery()
                    .iter()
                    .zip(&trace.edges)
                    .filter(|(first, _)| first.is_none_or(|t| t > 0.0))
                    .map(|(first, &(from, to))| SkipActivation { from, to, until: *first })
                    .collect(),
            );
            out.trace = Some(trace);
        }
        Err(e) => {
            report.error = Some(e.to_string());
            report.aborted = Some("integration failed".into());
        }
    }
    out.report = report;
    out.closed_loop = Some(cl);
    out
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario: {}", self.scenario)?;
        writeln!(f)?;
        writeln!(f, "certificates:")?;
        for c in &self.certificates {
            writeln!(f, "  [{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        if let Some(rho) = self.small_gain_radius {
            writeln!(f, "small-gain radius: {rho:.12}")?;
        }
        if let Some(b) = &self.blackouts {
            writeln!(f)?;
            writeln!(f, "max blackout per edge (s):")?;
            for e in b {
                match e.max_gap {
                    Some(g) => writeln!(f, "  {} -> {}: {g:.6}", e.from + 1, e.to + 1)?,
                    None => writeln!(f, "  {} -> {}: no delivery", e.from + 1, e.to + 1)?,
                }
            }
        }
        if let Some(skips) = &self.skip_rule {
            writeln!(f)?;
            writeln!(f, "edges without data (predictor term skipped):")?;
            if skips.is_empty() {
                writeln!(f, "  none")?;
            }
            for s in skips {
                match s.until {
                    Some(t) => writeln!(f, "  {} -> {}: until t = {t:.4}", s.from + 1, s.to + 1)?,
                    None => writeln!(f, "  {} -> {}: whole run", s.from + 1, s.to + 1)?,
                }
            }
        }
        if let Some(m) = &self.metrics {
            writeln!(f)?;
            writeln!(f, "regulated error (tail = final {:.0}% of horizon):", TAIL_FRACTION * 100.0)?;
            for (i, a) in m.iter().enumerate() {
                let rate = a.decay_rate.map_or("n/a".to_string(), |r| format!("{r:.4}"));
                writeln!(f, "  agent {}: sup tail |e| = {:.6e}, log-slope = {rate}", i + 1, a.sup_tail)?;
            }
        }
        if let Some(d) = &self.leader_decay {
            writeln!(f, "leader estimation error decay rate:")?;
            for (i, r) in d {
                let rate = r.map_or("n/a".to_string(), |r| format!("{r:.4}"));
                writeln!(f, "  agent {}: {rate}", i + 1)?;
            }
        }
        if let Some(e) = &self.error {
            writeln!(f)?;
            writeln!(f, "error: {e}")?;
        }
        match &self.aborted {
            Some(r) => writeln!(f, "status: aborted ({r})"),
            None => writeln!(f, "status: completed"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Mat<f64> {
        Mat::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn scalar_agent(role: Role, a: f64, f: f64) -> AgentModel<f64> {
        AgentModel {
            a: m(&[&[a]]),
            b: m(&[&[1.0]]),
            c: m(&[&[1.0]]),
            d: m(&[&[0.0]]),
            e: m(&[&[0.0, 0.0]]),
            f: m(&[&[f, 0.0]]),
            ce: m(&[&[1.0]]),
            de: m(&[&[0.0]]),
            fe: m(&[&[-1.0, 0.0]]),
            role,
        }
    }

    fn pair_scenario(s: Mat<f64>, dt: f64, horizon: f64) -> Scenario {
        let mut adj = Mat::zeros(2, 2);
        adj[(0, 1)] = 1.0;
        Scenario {
            name: "pair".into(),
            agents: vec![
                AgentSpec { model: scalar_agent(Role::Follower, 0.0, 0.0), gains: None, x0: vec![0.0] },
                AgentSpec { model: scalar_agent(Role::Leader, 0.0, -1.0), gains: None, x0: vec![0.0] },
            ],
            exo: ExoSystem { s, upsilon0: vec![1.0, 0.0] },
            adjacency: adj,
            channel: ChannelParams {
                ts: 0.1,
                p_transmit: 0.5,
                p_loss: 0.3,
                delay_min: 0.0,
                delay_max: 0.3,
                h_star: 1.0,
                seed: 3,
                enforce_bound: true,
            },
            sim: SimConfig { dt, horizon, record_every: 10 },
            tolerances: Tolerances::default(),
            force: false,
        }
    }

    #[test]
    fn exosystem_rotation_matches_closed_form() {
        let sc = pair_scenario(m(&[&[0.0, 1.0], &[-1.0, 0.0]]), 1e-3, 10.0);
        let out = run(&sc);
        assert!(out.report.aborted.is_none(), "{}", out.report);
        let last = out.trace.unwrap().states.last().unwrap().upsilon.clone();
        assert!((last[0] - 10f64.cos()).abs() < 1e-6 && (last[1] + 10f64.sin()).abs() < 1e-6);
    }

    #[test]
    fn zero_dynamics_stay_constant() {
        let mut sc = pair_scenario(Mat::zeros(2, 2), 0.01, 2.0);
        for a in &mut sc.agents {
            a.model.b = m(&[&[0.0]]);
            a.model.f = m(&[&[0.0, 0.0]]);
            a.model.fe = m(&[&[0.0, 0.0]]);
            a.gains = Some(GainSet {
                k: m(&[&[0.0]]),
                l1: m(&[&[0.0]]),
                l2: (a.model.role == Role::Leader).then(|| m(&[&[0.0], &[0.0]])),
            });
            a.x0 = vec![0.7];
        }
        let (report, cl) = certify(&sc);
        assert!(!report.certificates_passed());
        let cl = cl.unwrap();
        let init = cl.initial_state(&[vec![0.7], vec![0.7]], &[1.0, 0.0]);
        let sched = generate_schedule(&sc.channel, 2.0, (1, 0)).unwrap();
        let trace = integrate(&cl, &init, &[sched], &sc.sim, 1e-9).unwrap();
        assert_eq!(trace.len(), 21);
        for s in &trace.states {
            assert_eq!(s.agents[0].x, vec![0.7]);
            assert_eq!(s.upsilon, vec![1.0, 0.0]);
        }
    }

    #[test]
    fn decay_slope_of_exponential() {
        let times: Vec<f64> = (0..=1000).map(|i| i as f64 * 0.01).collect();
        let values: Vec<f64> = times.iter().map(|t| (-2.0 * t).exp()).collect();
        let slope = decay_slope(&times, &values, 0.0, 10.0, 20).unwrap();
        assert!((slope + 2.0).abs() < 0.1, "{slope}");
        assert!(decay_slope(&times, &vec![0.0; times.len()], 0.0, 10.0, 20).is_none());
    }

    #[test]
    fn zero_error_trace_has_zero_tail() {
        let times: Vec<f64> = (0..=10).map(f64::from).collect();
        let zero = ErrorCoordinates { eps: vec![0.0], x_tilde: vec![0.0], v_tilde: vec![0.0], e: vec![0.0] };
        let trace = SimTrace {
            states: Vec::new(),
            inputs: Vec::new(),
            errors: times.iter().map(|_| vec![zero.clone()]).collect(),
            kx: Vec::new(),
            edges: Vec::new(),
            deliveries: Vec::new(),
            times,
        };
        let m = convergence_metrics(&trace);
        assert_eq!(m[0].sup_tail, 0.0);
        assert!(m[0].decay_rate.is_none());
    }

    #[test]
    fn rk4_is_fourth_order() {
        // No messages: every follower runs open loop on its estimator, so the
        // vector field is smooth over the whole interval.
        let final_state = |dt: f64| {
            let mut sc = pair_scenario(m(&[&[0.0, 1.0], &[-1.0, 0.0]]), dt, 2.0);
            sc.agents[0].x0 = vec![0.5];
            sc.agents[1].x0 = vec![-0.3];
            let (_, cl) = certify(&sc);
            let cl = cl.unwrap();
            let init = cl.initial_state(&[vec![0.5], vec![-0.3]], &[1.0, 0.0]);
            let sc_cfg = SimConfig { record_every: 1, ..sc.sim };
            let trace = integrate(&cl, &init, &[Vec::new()], &sc_cfg, 1e-9).unwrap();
            let s = trace.states.last().unwrap().clone();
            s.agents.iter().flat_map(|a| a.x.iter().chain(&a.xhat).chain(&a.upsilon_hat).copied()).collect::<Vec<f64>>()
        };
        let a = final_state(0.05);
        let b = final_state(0.025);
        let c = final_state(0.0125);
        let d1 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let d2 = b.iter().zip(&c).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let ratio = d1 / d2;
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn certificate_failures_abort() {
        let mut sc = pair_scenario(Mat::diag(&[0.5, 0.5]), 0.01, 2.0);
        let out = run(&sc);
        assert!(out.trace.is_none());
        assert!(out.report.aborted.as_deref().unwrap().contains("exosystem"));

        sc.exo.s = m(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        sc.adjacency = Mat::zeros(2, 2);
        let out = run(&sc);
        assert!(out.trace.is_none());
        assert!(out.report.aborted.as_deref().unwrap().contains("reachable"));
    }

    #[test]
    fn diverging_run_is_reported() {
        let mut sc = pair_scenario(m(&[&[0.0, 1.0], &[-1.0, 0.0]]), 0.01, 30.0);
        sc.agents[0].gains = Some(GainSet { k: m(&[&[3.0]]), l1: m(&[&[-2.0]]), l2: None });
        sc.agents[0].x0 = vec![1.0];
        sc.force = true;
        let out = run(&sc);
        assert!(out.trace.is_none());
        assert!(out.report.error.as_deref().unwrap().contains("diverged"), "{}", out.report);
    }

    #[test]
    fn bad_config_rejected() {
        let cfg = SimConfig { dt: 0.03, horizon: 5.0, record_every: 1 };
        assert!(cfg.validate(0.1).is_err());
        let cfg = SimConfig { dt: 0.01, horizon: 0.5, record_every: 1 };
        assert!(cfg.validate(0.1).is_err());
        assert!(SimConfig::for_sampling(0.1, 5.0).validate(0.1).is_ok());
    }
}
