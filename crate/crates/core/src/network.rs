//! Deterministic simulation of the decentralised protocol on a cycle.
//!
//! Node `i` knows only `A_i`. Nodes `2..n` each own one lifted block
//! (`node i` owns `z_{i−1}`); node 1 owns none. Per round:
//!
//! 1. nodes `2..n` send their block to their predecessor;
//! 2. node 1 computes `x_1 = J_{A_1}(z_1)` and sends it to nodes 2 and `n`;
//! 3. nodes `2..n−1` compute `x_i`, forward it, and update their block;
//! 4. node `n` computes `x_n`, updates `z_{n−1}`, and sends `x_n` to node 1.
//!
//! Every node therefore sends exactly two messages per round. Nodes act as
//! soon as the messages they need have arrived, so the same dataflow runs
//! under a strict per-round barrier or with node `n` lagging behind
//! ([`Schedule::Pipelined`]); both give identical iterates.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{self, Blocks};
use crate::operators::MonotoneOp;
use crate::splitting::{chain_input, last_input, relax, SolveReport, DIVERGENCE_BOUND};
use crate::trace::ResidualTrace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MessageKind {
    ZPass,
    XPass,
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MessageKind::ZPass => "Z_PASS",
            MessageKind::XPass => "X_PASS",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Message {
    pub from: usize,
    pub to: usize,
    pub kind: MessageKind,
    pub body: Vec<f64>,
    pub round: usize,
}

/// Whether `a` and `b` are neighbours on the cycle `1..n`.
pub fn adjacent(a: usize, b: usize, n: usize) -> bool {
    a != b && (a % n + 1 == b || b % n + 1 == a)
}

pub struct Node {
    id: usize,
    op: Box<dyn MonotoneOp>,
    owned_z: Option<Vec<f64>>,
    last_x: Option<Vec<f64>>,
    /// Latest `x_n` received by node 1.
    peer_x: Option<Vec<f64>>,
    next_round: usize,
    sent_z: bool,
    inbox: Vec<Message>,
}

impl Node {
    pub fn new(id: usize, op: Box<dyn MonotoneOp>) -> Self {
        Node {
            id,
            op,
            owned_z: None,
            last_x: None,
            peer_x: None,
            next_round: 0,
            sent_z: false,
            inbox: Vec::new(),
        }
    }

    pub fn with_block(mut self, z: Vec<f64>) -> Self {
        self.owned_z = Some(z);
        self
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn owned_z(&self) -> Option<&[f64]> {
        self.owned_z.as_deref()
    }

    pub fn last_x(&self) -> Option<&[f64]> {
        self.last_x.as_deref()
    }

    pub fn peer_x(&self) -> Option<&[f64]> {
        self.peer_x.as_deref()
    }

    /// Rounds completed so far.
    pub fn rounds_done(&self) -> usize {
        self.next_round
    }

    fn take(&mut self, from: usize, kind: MessageKind, round: usize) -> Option<Vec<f64>> {
        let pos = self
            .inbox
            .iter()
            .position(|m| m.from == from && m.kind == kind && m.round == round)?;
        Some(self.inbox.remove(pos).body)
    }

    fn has(&self, from: usize, kind: MessageKind, round: usize, count: usize) -> bool {
        self.inbox
            .iter()
            .filter(|m| m.from == from && m.kind == kind && m.round == round)
            .count()
            >= count
    }
}

impl fmt::Debug for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Node")
            .field("id", &self.id)
            .field("op", &self.op.kind())
            .field("owned_z", &self.owned_z)
            .field("last_x", &self.last_x)
            .field("next_round", &self.next_round)
            .finish()
    }
}

/// Builds the cycle with node `i` owning `z0` block `i − 1`.
pub fn init_nodes(ops: Vec<Box<dyn MonotoneOp>>, z0: &Blocks) -> Result<Vec<Node>> {
    let n = ops.len();
    if n < 2 {
        return Err(Error::param(format!("the cycle needs at least 2 nodes, got {n}")));
    }
    if z0.count() != n - 1 {
        return Err(Error::shape(format!(
            "{n} nodes need {} lifted blocks, got {}",
            n - 1,
            z0.count()
        )));
    }
    Ok(ops
        .into_iter()
        .enumerate()
        .map(|(i, op)| {
            let node = Node::new(i + 1, op);
            if i == 0 {
                node
            } else {
                node.with_block(z0.block(i - 1).to_vec())
            }
        })
        .collect())
}

/// The concatenated owned blocks `(z_1, …, z_{n−1})`.
pub fn gather_z(nodes: &[Node]) -> Result<Blocks> {
    let blocks: Vec<&[f64]> = nodes[1..]
        .iter()
        .map(|n| {
            n.owned_z()
                .ok_or_else(|| Error::Protocol(format!("node {} has no block", n.id)))
        })
        .collect::<Result<_>>()?;
    Blocks::from_blocks(&blocks)
}

/// Everything that happened in one round.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundLog {
    pub round: usize,
    /// Messages tagged with this round, in send order.
    pub messages: Vec<Message>,
    /// `x_i` computed by node `i` (index `i − 1`).
    pub x: Vec<Vec<f64>>,
    /// `(node, new block)` for nodes `2..n`, in update order.
    pub z_updates: Vec<(usize, Vec<f64>)>,
}

impl RoundLog {
    fn new(round: usize, n: usize) -> Self {
        RoundLog {
            round,
            messages: Vec::new(),
            x: vec![Vec::new(); n],
            z_updates: Vec::new(),
        }
    }

    pub fn sent_by(&self, node: usize) -> usize {
        self.messages.iter().filter(|m| m.from == node).count()
    }

    /// The lifted point after this round, ordered by owner.
    pub fn z_after(&self) -> Result<Blocks> {
        let mut upd = self.z_updates.clone();
        upd.sort_by_key(|(id, _)| *id);
        let blocks: Vec<Vec<f64>> = upd.into_iter().map(|(_, z)| z).collect();
        Blocks::from_blocks(&blocks)
    }

    pub fn x_blocks(&self) -> Result<Blocks> {
        Blocks::from_blocks(&self.x)
    }

    /// Same content irrespective of send order.
    pub fn same_content(&self, other: &RoundLog) -> bool {
        let key = |m: &Message| (m.from, m.to, m.kind);
        let mut a = self.messages.clone();
        let mut b = other.messages.clone();
        a.sort_by_key(key);
        b.sort_by_key(key);
        let mut za = self.z_updates.clone();
        let mut zb = other.z_updates.clone();
        za.sort_by_key(|u| u.0);
        zb.sort_by_key(|u| u.0);
        self.round == other.round && a == b && self.x == other.x && za == zb
    }
}

/// Message audit over a history: every node sends exactly two messages per
/// round and only to cycle neighbours.
pub fn audit(history: &[RoundLog], n: usize) -> Result<()> {
    for log in history {
        for id in 1..=n {
            let c = log.sent_by(id);
            if c != 2 {
                return Err(Error::Protocol(format!(
                    "node {id} sent {c} messages in round {}",
                    log.round
                )));
            }
        }
        if let Some(m) = log.messages.iter().find(|m| !adjacent(m.from, m.to, n)) {
            return Err(Error::Protocol(format!(
                "message from {} to {} in round {} violates cycle adjacency",
                m.from, m.to, m.round
            )));
        }
    }
    Ok(())
}

/// CSV with columns `round,node,message_kind,l2_norm_of_payload`.
pub fn history_csv(history: &[RoundLog]) -> String {
    let mut s = String::from("round,node,message_kind,l2_norm_of_payload\n");
    for log in history {
        for m in &log.messages {
            s.push_str(&format!(
                "{},{},{},{:?}\n",
                m.round,
                m.from,
                m.kind,
                linalg::norm(&m.body)
            ));
        }
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Schedule {
    /// Every node finishes round `k` before any starts round `k + 1`.
    #[default]
    Strict,
    /// Node `n` acts only when nothing else can, so other nodes start the
    /// next round before it finishes the current one.
    Pipelined,
}

struct Engine<'a> {
    nodes: &'a mut [Node],
    gamma: f64,
    dim: usize,
    logs: BTreeMap<usize, RoundLog>,
    /// `(round, from, kind)` of every send, in global order.
    sends: Vec<(usize, usize, MessageKind)>,
}

impl<'a> Engine<'a> {
    fn new(nodes: &'a mut [Node], gamma: f64) -> Result<Self> {
        validate(nodes)?;
        let dim = nodes[1].owned_z.as_ref().map_or(0, Vec::len);
        Ok(Engine {
            nodes,
            gamma,
            dim,
            logs: BTreeMap::new(),
            sends: Vec::new(),
        })
    }

    fn n(&self) -> usize {
        self.nodes.len()
    }

    fn log(&mut self, round: usize) -> &mut RoundLog {
        let n = self.nodes.len();
        self.logs.entry(round).or_insert_with(|| RoundLog::new(round, n))
    }

    fn send(
        &mut self,
        from: usize,
        to: usize,
        kind: MessageKind,
        body: Vec<f64>,
        round: usize,
    ) -> Result<()> {
        let n = self.n();
        if !adjacent(from, to, n) {
            return Err(Error::Protocol(format!("node {from} cannot reach node {to}")));
        }
        let m = Message {
            from,
            to,
            kind,
            body,
            round,
        };
        self.log(round).messages.push(m.clone());
        self.sends.push((round, from, kind));
        self.nodes[to - 1].inbox.push(m);
        Ok(())
    }

    /// Performs one action of node `id` if its inputs are present and it has
    /// not yet passed `max_round`. Returns whether it acted.
    fn act(&mut self, id: usize, max_round: usize) -> Result<bool> {
        let n = self.n();
        let gamma = self.gamma;
        let dim = self.dim;
        let r = self.nodes[id - 1].next_round;
        if r > max_round {
            return Ok(false);
        }
        if id != 1 && !self.nodes[id - 1].sent_z {
            let z = self.nodes[id - 1].owned_z.clone().expect("validated");
            self.nodes[id - 1].sent_z = true;
            self.send(id, id - 1, MessageKind::ZPass, z, r)?;
            return Ok(true);
        }
        let mut y = vec![0.0; dim];
        let mut x = vec![0.0; dim];
        if id == 1 {
            let node = &mut self.nodes[0];
            if !node.has(2, MessageKind::ZPass, r, 1) {
                return Ok(false);
            }
            let z1 = node.take(2, MessageKind::ZPass, r).unwrap();
            if r > 0 {
                if let Some(xn) = node.take(n, MessageKind::XPass, r - 1) {
                    node.peer_x = Some(xn);
                }
            }
            node.op.resolvent_into(&z1, 1.0, &mut x);
            node.last_x = Some(x.clone());
            node.next_round += 1;
            self.log(r).x[0] = x.clone();
            self.send(1, 2, MessageKind::XPass, x.clone(), r)?;
            self.send(1, n, MessageKind::XPass, x, r)?;
        } else if id < n {
            let node = &mut self.nodes[id - 1];
            if !(node.has(id + 1, MessageKind::ZPass, r, 1) && node.has(id - 1, MessageKind::XPass, r, 1)) {
                return Ok(false);
            }
            let z_i = node.take(id + 1, MessageKind::ZPass, r).unwrap();
            let x_prev = node.take(id - 1, MessageKind::XPass, r).unwrap();
            let z_prev = node.owned_z.take().expect("validated");
            chain_input(&z_i, &z_prev, &x_prev, &mut y);
            node.op.resolvent_into(&y, 1.0, &mut x);
            let mut z_new = vec![0.0; dim];
            relax(&z_prev, &x, &x_prev, gamma, &mut z_new);
            node.owned_z = Some(z_new.clone());
            node.last_x = Some(x.clone());
            node.next_round += 1;
            node.sent_z = false;
            let log = self.log(r);
            log.x[id - 1] = x.clone();
            log.z_updates.push((id, z_new));
            self.send(id, id + 1, MessageKind::XPass, x, r)?;
        } else {
            let node = &mut self.nodes[id - 1];
            let ready = if n == 2 {
                node.has(1, MessageKind::XPass, r, 2)
            } else {
                node.has(1, MessageKind::XPass, r, 1) && node.has(n - 1, MessageKind::XPass, r, 1)
            };
            if !ready {
                return Ok(false);
            }
            let x1 = node.take(1, MessageKind::XPass, r).unwrap();
            let x_prev = node.take(n - 1, MessageKind::XPass, r).unwrap();
            let z_last = node.owned_z.take().expect("validated");
            last_input(&x1, &x_prev, &z_last, &mut y);
            node.op.resolvent_into(&y, 1.0, &mut x);
            let mut z_new = vec![0.0; dim];
            relax(&z_last, &x, &x_prev, gamma, &mut z_new);
            node.owned_z = Some(z_new.clone());
            node.last_x = Some(x.clone());
            node.next_round += 1;
            node.sent_z = false;
            let log = self.log(r);
            log.x[n - 1] = x.clone();
            log.z_updates.push((n, z_new));
            self.send(n, 1, MessageKind::XPass, x, r)?;
        }
        Ok(true)
    }

    /// Runs nodes in `ids` until none can act within `max_round`.
    fn drain(&mut self, ids: std::ops::RangeInclusive<usize>, max_round: usize) -> Result<bool> {
        let mut any = false;
        loop {
            let mut progressed = false;
            for id in ids.clone() {
                while self.act(id, max_round)? {
                    progressed = true;
                }
            }
            if !progressed {
                return Ok(any);
            }
            any = true;
        }
    }

    /// Completes rounds up to and including `last` under `schedule`.
    fn run_to(&mut self, last: usize, schedule: Schedule, horizon: usize) -> Result<()> {
        let n = self.n();
        match schedule {
            Schedule::Strict => {
                self.drain(1..=n, last)?;
            }
            Schedule::Pipelined => {
                while self.nodes[n - 1].next_round <= last {
                    self.drain(1..=n - 1, horizon)?;
                    if !self.act(n, last)? {
                        return Err(Error::Protocol("pipelined schedule stalled".into()));
                    }
                }
                self.drain(1..=n - 1, horizon)?;
            }
        }
        if let Some(node) = self.nodes.iter().find(|nd| nd.next_round <= last) {
            return Err(Error::Protocol(format!(
                "node {} stalled in round {}",
                node.id, node.next_round
            )));
        }
        Ok(())
    }

    fn take_log(&mut self, round: usize) -> RoundLog {
        let n = self.n();
        self.logs
            .remove(&round)
            .unwrap_or_else(|| RoundLog::new(round, n))
    }
}

fn validate(nodes: &[Node]) -> Result<()> {
    let n = nodes.len();
    if n < 2 {
        return Err(Error::Protocol(format!(
            "the cycle needs at least 2 nodes, got {n}"
        )));
    }
    let mut dim = None;
    for (i, node) in nodes.iter().enumerate() {
        if node.id != i + 1 {
            return Err(Error::Protocol(format!(
                "node at position {} has id {}",
                i + 1,
                node.id
            )));
        }
        match (i, &node.owned_z) {
            (0, Some(_)) => return Err(Error::Protocol("node 1 must not own a block".into())),
            (0, None) => {}
            (_, None) => return Err(Error::Protocol(format!("node {} is not initialised", node.id))),
            (_, Some(z)) => {
                if z.is_empty() || dim.is_some_and(|d| d != z.len()) {
                    return Err(Error::Protocol(format!("node {} has a malformed block", node.id)));
                }
                dim = Some(z.len());
            }
        }
    }
    let r = nodes[0].next_round;
    if nodes
        .iter()
        .any(|nd| nd.next_round != r || !nd.inbox.is_empty() || nd.sent_z)
    {
        return Err(Error::Protocol(
            "nodes are not synchronised at a round boundary".into(),
        ));
    }
    Ok(())
}

/// Runs one round under the strict schedule.
pub fn run_round(nodes: &mut [Node], gamma: f64, round_index: usize) -> Result<RoundLog> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::param(format!("gamma = {gamma} outside (0, 1]")));
    }
    let mut engine = Engine::new(nodes, gamma)?;
    if engine.nodes[0].next_round != round_index {
        return Err(Error::Protocol(format!(
            "nodes are at round {}, asked for round {round_index}",
            engine.nodes[0].next_round
        )));
    }
    engine.run_to(round_index, Schedule::Strict, round_index)?;
    // node 1 picks up x_n lazily; deliver it now so the round is closed
    let n = engine.n();
    if let Some(xn) = engine.nodes[0].take(n, MessageKind::XPass, round_index) {
        engine.nodes[0].peer_x = Some(xn);
    }
    Ok(engine.take_log(round_index))
}

#[derive(Debug)]
pub struct ProtocolReport {
    pub report: SolveReport,
    pub history: Vec<RoundLog>,
    /// `(round, sender, kind)` for every message in global send order.
    pub send_order: Vec<(usize, usize, MessageKind)>,
}

/// Runs up to `rounds` rounds, stopping once `(1/γ)‖z^{k+1} − z^k‖ ≤ tol`.
///
/// Under [`Schedule::Pipelined`] nodes other than `n` may have started the
/// round after the last reported one when this returns.
pub fn run_protocol(
    nodes: &mut [Node],
    gamma: f64,
    rounds: usize,
    tol: f64,
    schedule: Schedule,
) -> Result<ProtocolReport> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::param(format!("gamma = {gamma} outside (0, 1]")));
    }
    if !(tol >= 0.0) {
        return Err(Error::param(format!("tol = {tol} must be nonnegative")));
    }
    let mut z = gather_z(nodes)?;
    let mut engine = Engine::new(nodes, gamma)?;
    let start = engine.nodes[0].next_round;
    let n = engine.n();
    let mut history = Vec::new();
    let mut trace = ResidualTrace::new(&["residual", "consensus_spread"]);
    let mut residual = f64::INFINITY;
    let mut spread = f64::INFINITY;
    let mut converged = false;
    let mut diverged = false;
    let horizon = start + rounds.saturating_sub(1);
    for r in start..start + rounds {
        engine.run_to(r, schedule, horizon)?;
        let log = engine.take_log(r);
        let z_next = log.z_after()?;
        let x = log.x_blocks()?;
        residual = z_next.dist(&z) / gamma;
        spread = x.spread();
        trace.record(r + 1, &[residual, spread]);
        z = z_next;
        history.push(log);
        if !residual.is_finite() || residual > DIVERGENCE_BOUND {
            diverged = true;
            break;
        }
        if residual <= tol {
            converged = true;
            break;
        }
    }
    if let Some(last) = history.last() {
        if let Some(xn) = engine.nodes[0].take(n, MessageKind::XPass, last.round) {
            engine.nodes[0].peer_x = Some(xn);
        }
    }
    let x = match history.last() {
        Some(log) => log.x_blocks()?,
        None => Blocks::zeros(n, z.dim()),
    };
    let report = SolveReport {
        converged,
        diverged,
        iterations: history.len(),
        final_x: x.block(0).to_vec(),
        final_z: z,
        x,
        residual,
        consensus_spread: spread,
        trace,
    };
    Ok(ProtocolReport {
        report,
        history,
        send_order: engine.sends,
    })
}
