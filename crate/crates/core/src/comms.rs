//! Sampled, intermittent, delayed and lossy edge channels.
//!
//! On edge `(j, i)` agent `j` may transmit only at `t_k = k·ts`. Each message
//! carries its index `k` and the sender's exosystem estimate at `t_k`; it
//! arrives after a delay or is lost. The receiver keeps only the message with
//! the largest index delivered so far and propagates its payload forward with
//! `e^{S(t − t_k)}`.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{expm, Mat};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum CommsError {
    #[error("invalid channel parameter {field}: {reason}")]
    InvalidParams { field: &'static str, reason: String },
    #[error("blackout bound {h_star} s is below ts + delay_min = {needed:.6} s; no schedule can satisfy it")]
    InfeasibleBound { h_star: f64, needed: f64 },
    #[error("edge {from}->{to} has no successful delivery within the horizon")]
    NoDelivery { from: usize, to: usize },
    #[error("no message delivered yet on this edge")]
    NoDataYet,
    #[error("prediction time {t} precedes the stored send time {sent}")]
    PredictBackwards { t: f64, sent: f64 },
    #[error("schedule CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("schedule CSV line {line}: {reason}")]
    CsvRecord { line: u64, reason: String },
}

/// Statistics of one edge's communication process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Sampling period, seconds.
    pub ts: f64,
    /// Probability an allowed slot is used.
    pub p_transmit: f64,
    /// Probability a sent message is lost.
    pub p_loss: f64,
    pub delay_min: f64,
    pub delay_max: f64,
    /// Blackout bound, seconds.
    pub h_star: f64,
    pub seed: u64,
    /// Force extra deliveries so every blackout stays within `h_star`.
    pub enforce_bound: bool,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), CommsError> {
        let bad = |field, reason: &str| Err(CommsError::InvalidParams { field, reason: reason.to_string() });
        if !(self.ts.is_finite() && self.ts > 0.0) {
            return bad("ts", "must be positive");
        }
        for (field, p) in [("p_transmit", self.p_transmit), ("p_loss", self.p_loss)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(field, "must lie in [0, 1]");
            }
        }
        if !(self.delay_min.is_finite() && self.delay_min >= 0.0) {
            return bad("delay_min", "must be nonnegative");
        }
        if !(self.delay_max.is_finite() && self.delay_max >= self.delay_min) {
            return bad("delay_max", "must be at least delay_min");
        }
        if !(self.h_star.is_finite() && self.h_star > self.ts) {
            return bad("h_star", "must exceed ts");
        }
        if self.delay_max >= self.h_star {
            return bad("delay_max", "must be below h_star");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Delivery {
    At(f64),
    Lost,
}

impl Delivery {
    pub fn time(self) -> Option<f64> {
        match self {
            Delivery::At(t) => Some(t),
            Delivery::Lost => None,
        }
    }
}

/// One transmission on edge `from -> to`; the payload is captured at send
/// time by the simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Message {
    pub from: usize,
    pub to: usize,
    pub k: u64,
    pub delivery: Delivery,
}

impl Message {
    pub fn send_time(&self, ts: f64) -> f64 {
        self.k as f64 * ts
    }
}

/// Receiver-side state of one edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeState<T> {
    /// Largest delivered index, if any.
    pub kx: Option<u64>,
    pub payload: Vec<T>,
    pub last_delivery: f64,
}

impl<T: Scalar> EdgeState<T> {
    pub fn new(q: usize) -> Self {
        Self { kx: None, payload: vec![T::zero(); q], last_delivery: 0.0 }
    }

    /// Accepts a message if it is newer than what is stored; stale
    /// out-of-order arrivals are dropped. Returns whether the state changed.
    pub fn deliver(&mut self, k: u64, payload: &[T], now: f64) -> bool {
        if self.kx.is_some_and(|kx| k <= kx) {
            return false;
        }
        self.kx = Some(k);
        self.payload.clear();
        self.payload.extend_from_slice(payload);
        self.last_delivery = now;
        true
    }
}

/// `e^{S(t − kx·ts)} · payload`.
pub fn predict<T: Scalar>(s: &Mat<T>, state: &EdgeState<T>, t: f64, ts: f64) -> Result<Vec<T>, CommsError> {
    let kx = state.kx.ok_or(CommsError::NoDataYet)?;
    let sent = kx as f64 * ts;
    let staleness = t - sent;
    if staleness < 0.0 {
        return Err(CommsError::PredictBackwards { t, sent });
    }
    Ok(expm(s, T::of(staleness)).mul_vec(&state.payload))
}

fn last_slot(horizon: f64, ts: f64) -> u64 {
    ((horizon / ts) + 1e-9).floor().max(0.0) as u64
}

/// Random schedule for edge `(from, to)` over `[0, horizon]`.
///
/// Each slot is used with probability `p_transmit`; a sent message is lost
/// with probability `p_loss`, otherwise delayed uniformly in
/// `[delay_min, delay_max]`. Every edge draws from its own stream of the
/// seeded generator. With `enforce_bound`, whenever the next useful delivery
/// would arrive more than `h_star` after the previous useful send, the latest
/// slot that still meets the bound is forced through with `delay_min`.
pub fn generate_schedule(
    params: &ChannelParams,
    horizon: f64,
    edge: (usize, usize),
) -> Result<Vec<Message>, CommsError> {
    params.validate()?;
    if params.enforce_bound && params.h_star < params.ts + params.delay_min {
        return Err(CommsError::InfeasibleBound {
            h_star: params.h_star,
            needed: params.ts + params.delay_min,
        });
    }
    let (from, to) = edge;
    let ts = params.ts;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(((from as u64) << 32) | to as u64);

    let last = last_slot(horizon, ts);
    let mut slots: Vec<Option<Delivery>> = Vec::with_capacity(last as usize + 1);
    for k in 0..=last {
        let (u_send, u_loss, u_delay): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
        let slot = if u_send < params.p_transmit {
            if u_loss < params.p_loss {
                Some(Delivery::Lost)
            } else {
                let delay = params.delay_min + u_delay * (params.delay_max - params.delay_min);
                Some(Delivery::At(k as f64 * ts + delay))
            }
        } else {
            None
        };
        slots.push(slot);
    }

    if params.enforce_bound {
        enforce_blackout_bound(&mut slots, params, horizon);
    }

    Ok(slots
        .into_iter()
        .enumerate()
        .filter_map(|(k, slot)| slot.map(|delivery| Message { from, to, k: k as u64, delivery }))
        .collect())
}

fn enforce_blackout_bound(slots: &mut [Option<Delivery>], params: &ChannelParams, horizon: f64) {
    let ts = params.ts;
    let slack = 1e-9 * params.h_star.max(1.0);
    let mut prev_send = 0.0;
    let mut prev_k: Option<u64> = None;
    loop {
        let first_new = prev_k.map_or(0, |k| k + 1);
        if first_new as usize >= slots.len() {
            break;
        }
        // Earliest delivery among newer messages; later-index wins ties.
        let next = slots[first_new as usize..]
            .iter()
            .enumerate()
            .filter_map(|(off, s)| match s {
                Some(Delivery::At(t)) if *t <= horizon => Some((first_new + off as u64, *t)),
                _ => None,
            })
            .min_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        let deadline = prev_send + params.h_star;
        match next {
            Some((k, t)) if t - prev_send <= params.h_star + slack => {
                prev_send = k as f64 * ts;
                prev_k = Some(k);
            }
            None if deadline >= horizon => break,
            _ => {
                let latest = ((deadline - params.delay_min) / ts + 1e-9).floor() as u64;
                let forced = latest.min(slots.len() as u64 - 1);
                debug_assert!(forced >= first_new, "feasibility checked by caller");
                slots[forced as usize] = Some(Delivery::At(forced as f64 * ts + params.delay_min));
                prev_send = forced as f64 * ts;
                prev_k = Some(forced);
            }
        }
    }
}

/// Longest blackout on one edge: the maximum over consecutive useful
/// deliveries of `t_{k'} + τ_{k'} − t_k`, starting from time zero. A
/// delivery is useful when its index exceeds every index delivered before
/// it. Deliveries after `horizon` are ignored.
pub fn audit_blackouts(schedule: &[Message], horizon: f64, ts: f64) -> Result<f64, CommsError> {
    let mut delivered: Vec<(f64, u64)> = schedule
        .iter()
        .filter_map(|m| m.delivery.time().filter(|t| *t <= horizon).map(|t| (t, m.k)))
        .collect();
    if delivered.is_empty() {
        let (from, to) = schedule.first().map_or((0, 0), |m| (m.from, m.to));
        return Err(CommsError::NoDelivery { from, to });
    }
    delivered.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut prev_send = 0.0;
    let mut prev_k: Option<u64> = None;
    let mut worst = 0.0f64;
    for (t, k) in delivered {
        if prev_k.is_some_and(|p| k <= p) {
            continue;
        }
        worst = worst.max(t - prev_send);
        prev_send = k as f64 * ts;
        prev_k = Some(k);
    }
    Ok(worst)
}

const CSV_HEADER: [&str; 5] = ["from", "to", "k", "send_time", "delivery_time"];

/// Writes schedules as CSV with 1-based agent numbers; lost messages carry
/// `LOST` in the delivery column.
pub fn write_schedule_csv<W: Write>(out: W, messages: &[Message], ts: f64) -> Result<(), CommsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for m in messages {
        let delivery = match m.delivery {
            Delivery::At(t) => format!("{t:.16e}"),
            Delivery::Lost => "LOST".to_string(),
        };
        w.write_record([
            (m.from + 1).to_string(),
            (m.to + 1).to_string(),
            m.k.to_string(),
            format!("{:.16e}", m.send_time(ts)),
            delivery,
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads schedules written by [`write_schedule_csv`] (or produced by any
/// other process in the same layout). The send-time column is informational.
pub fn read_schedule_csv<R: Read>(input: R) -> Result<Vec<Message>, CommsError> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let fail = |reason: String| CommsError::CsvRecord { line, reason };
        if rec.len() != CSV_HEADER.len() {
            return Err(fail(format!("expected {} fields, found {}", CSV_HEADER.len(), rec.len())));
        }
        let agent = |idx: usize| -> Result<usize, CommsError> {
            match rec[idx].trim().parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v - 1),
                _ => Err(fail(format!("bad agent number {:?}", &rec[idx]))),
            }
        };
        let from = agent(0)?;
        let to = agent(1)?;
        let k = rec[2].trim().parse::<u64>().map_err(|e| fail(format!("bad k: {e}")))?;
        let delivery = match rec[4].trim() {
            "LOST" => Delivery::Lost,
            s => Delivery::At(s.parse::<f64>().map_err(|e| fail(format!("bad delivery time: {e}")))?),
        };
        out.push(Message { from, to, k, delivery });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ChannelParams {
        ChannelParams {
            ts: 0.1,
            p_transmit: 0.3,
            p_loss: 0.4,
            delay_min: 0.05,
            delay_max: 0.4,
            h_star: 1.5,
            seed: 7,
            enforce_bound: true,
        }
    }

    fn at(from: usize, to: usize, k: u64, t: f64) -> Message {
        Message { from, to, k, delivery: Delivery::At(t) }
    }

    #[test]
    fn ideal_channel_delivers_every_slot() {
        let p = ChannelParams { p_transmit: 1.0, p_loss: 0.0, delay_min: 0.0, delay_max: 0.0, ..params() };
        let sched = generate_schedule(&p, 2.0, (0, 1)).unwrap();
        assert_eq!(sched.len(), 21);
        for (k, m) in sched.iter().enumerate() {
            assert_eq!(m.k, k as u64);
            assert_eq!(m.delivery, Delivery::At(k as f64 * 0.1));
        }
        let gap = audit_blackouts(&sched, 2.0, 0.1).unwrap();
        assert!((gap - 0.1).abs() < 1e-12);
    }

    #[test]
    fn total_loss_survives_only_by_enforcement() {
        let p = ChannelParams { p_transmit: 1.0, p_loss: 1.0, ..params() };
        let sched = generate_schedule(&p, 20.0, (2, 0)).unwrap();
        let delivered: Vec<_> = sched.iter().filter(|m| m.delivery != Delivery::Lost).collect();
        assert!(!delivered.is_empty());
        for m in &delivered {
            assert_eq!(m.delivery, Delivery::At(m.send_time(0.1) + 0.05));
        }
        assert!(audit_blackouts(&sched, 20.0, 0.1).unwrap() <= 1.5 + 1e-9);

        let off = ChannelParams { enforce_bound: false, ..p };
        let sched = generate_schedule(&off, 20.0, (2, 0)).unwrap();
        assert!(matches!(audit_blackouts(&sched, 20.0, 0.1), Err(CommsError::NoDelivery { from: 2, to: 0 })));
    }

    #[test]
    fn infeasible_bound_rejected() {
        let p = ChannelParams { h_star: 0.12, delay_min: 0.05, delay_max: 0.1, ..params() };
        assert!(matches!(generate_schedule(&p, 5.0, (0, 1)), Err(CommsError::InfeasibleBound { .. })));
    }

    #[test]
    fn invalid_params_rejected() {
        let p = ChannelParams { delay_max: 2.0, ..params() };
        assert!(matches!(p.validate(), Err(CommsError::InvalidParams { field: "delay_max", .. })));
        let p = ChannelParams { p_loss: 1.5, ..params() };
        assert!(matches!(p.validate(), Err(CommsError::InvalidParams { field: "p_loss", .. })));
        let p = ChannelParams { h_star: 0.05, ..params() };
        assert!(matches!(p.validate(), Err(CommsError::InvalidParams { field: "h_star", .. })));
    }

    #[test]
    fn deterministic_and_edge_independent() {
        let a = generate_schedule(&params(), 30.0, (0, 3)).unwrap();
        let b = generate_schedule(&params(), 30.0, (0, 3)).unwrap();
        assert_eq!(a, b);
        let c = generate_schedule(&params(), 30.0, (3, 0)).unwrap();
        let ks_a: Vec<u64> = a.iter().map(|m| m.k).collect();
        let ks_c: Vec<u64> = c.iter().map(|m| m.k).collect();
        assert_ne!(ks_a, ks_c);
    }

    #[test]
    fn deliver_keeps_largest_index() {
        let mut s = EdgeState::<f64>::new(1);
        assert!(s.deliver(3, &[1.0], 0.8));
        assert_eq!(s.kx, Some(3));
        let mut trace = vec![s.kx];
        s.deliver(5, &[2.0], 1.1);
        trace.push(s.kx);
        assert!(!s.deliver(4, &[9.0], 1.3));
        trace.push(s.kx);
        assert_eq!(trace, vec![Some(3), Some(5), Some(5)]);
        assert_eq!(s.payload, vec![2.0]);
        assert_eq!(s.last_delivery, 1.1);
    }

    #[test]
    fn prediction_cases() {
        let rot = Mat::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let mut s = EdgeState::new(2);
        assert!(matches!(predict(&rot, &s, 1.0, 0.1), Err(CommsError::NoDataYet)));
        s.deliver(10, &[1.0, 0.0], 1.2);
        assert_eq!(predict(&rot, &s, 1.0, 0.1).unwrap(), vec![1.0, 0.0]);
        assert_eq!(predict(&Mat::zeros(2, 2), &s, 7.3, 0.1).unwrap(), vec![1.0, 0.0]);
        let p: Vec<f64> = predict(&rot, &s, 1.0 + std::f64::consts::FRAC_PI_2, 0.1).unwrap();
        assert!(p[0].abs() < 1e-14 && (p[1] + 1.0).abs() < 1e-14);
        assert!(matches!(predict(&rot, &s, 0.5, 0.1), Err(CommsError::PredictBackwards { .. })));
    }

    #[test]
    fn audit_formula() {
        let ts = 0.1;
        let sched = [at(0, 1, 0, 0.0), at(0, 1, 1, 0.1), at(0, 1, 2, 0.2)];
        assert!((audit_blackouts(&sched, 1.0, ts).unwrap() - ts).abs() < 1e-12);
        let sched = [at(0, 1, 0, 0.0), at(0, 1, 10, 10.0 * ts + 0.3)];
        assert!((audit_blackouts(&sched, 5.0, ts).unwrap() - (10.0 * ts + 0.3)).abs() < 1e-12);
        // Initial gap counts from time zero.
        let sched = [at(0, 1, 5, 0.9)];
        assert!((audit_blackouts(&sched, 5.0, ts).unwrap() - 0.9).abs() < 1e-12);
        // A stale arrival does not close a blackout.
        let sched = [at(0, 1, 0, 0.0), at(0, 1, 3, 0.35), at(0, 1, 2, 0.5), at(0, 1, 9, 1.3)];
        assert!((audit_blackouts(&sched, 5.0, ts).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let mut all = generate_schedule(&params(), 5.0, (0, 1)).unwrap();
        all.extend(generate_schedule(&ChannelParams { p_loss: 0.9, ..params() }, 5.0, (4, 0)).unwrap());
        assert!(all.iter().any(|m| m.delivery == Delivery::Lost));
        let mut buf = Vec::new();
        write_schedule_csv(&mut buf, &all, 0.1).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("from,to,k,send_time,delivery_time\n"));
        assert_eq!(read_schedule_csv(buf.as_slice()).unwrap(), all);
    }

    #[test]
    fn csv_errors_carry_line() {
        let text = "from,to,k,send_time,delivery_time\n1,2,0,0,0\n0,2,1,0.1,LOST\n";
        match read_schedule_csv(text.as_bytes()) {
            Err(CommsError::CsvRecord { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
