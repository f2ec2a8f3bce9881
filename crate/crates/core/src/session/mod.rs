//! Live steering: snapshots of the optimizer flow out through a
//! latest-wins channel, commands flow in through a validated queue that the
//! optimizer drains between vertex updates.

pub mod codec;

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tokio::sync::watch;

pub use codec::{decode_snapshot, encode_snapshot, FrameEncoder, SnapshotFrame, PROTOCOL_VERSION};

use crate::error::Result;
use crate::optimize::{Control, HistoryRow, Hooks, HyperParams, OptimizerState, Stage};
use crate::stylize::ElementKind;

/// History rows carried by each snapshot.
pub const HISTORY_TAIL: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub revision: u64,
    /// Revision at which the face buffer last changed.
    pub face_revision: u64,
    pub stage: Stage,
    pub iteration: usize,
    pub vertices: Vec<f32>,
    pub faces: Arc<Vec<u32>>,
    pub energies: Vec<f32>,
    pub energy: f64,
    pub history: Vec<HistoryRow>,
    pub params: HyperParams,
    pub element: ElementKind,
    pub paused: bool,
    pub finished: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamName {
    Eta,
    Beta,
    TvAlpha,
    NGradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum Command {
    Pause,
    Resume,
    SetParam { name: ParamName, value: f64 },
    SwitchElement { kind: ElementKind },
    TriggerSplit,
    Terminate,
    SaveCheckpoint,
}

impl Command {
    /// Range checks that do not depend on optimizer state.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if let Command::SetParam { name, value } = *self {
            let ok = match name {
                ParamName::Eta => value > 0.0 && value.is_finite(),
                ParamName::Beta => value >= 0.0 && value.is_finite(),
                ParamName::TvAlpha => value > 0.0 && value.is_finite(),
                ParamName::NGradient => (1.0..=1e6).contains(&value) && value.fract() == 0.0,
            };
            if !ok {
                return Err(match name {
                    ParamName::Eta => "eta must be positive",
                    ParamName::Beta => "beta must be non-negative",
                    ParamName::TvAlpha => "tv_alpha must be positive",
                    ParamName::NGradient => "n_gradient must be a positive integer",
                }
                .into());
            }
        }
        Ok(())
    }

    fn apply_to(&self, p: &mut HyperParams) {
        if let Command::SetParam { name, value } = *self {
            match name {
                ParamName::Eta => p.eta = value,
                ParamName::Beta => p.beta = value,
                ParamName::TvAlpha => p.tv_alpha = value,
                ParamName::NGradient => p.n_gradient = value as usize,
            }
        }
    }
}

/// A command as sent by a client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientMessage {
    pub v: u32,
    #[serde(default)]
    pub nonce: Option<String>,
    #[serde(flatten)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Reply {
    Ack {
        v: u32,
        nonce: Option<String>,
        #[serde(default)]
        duplicate: bool,
    },
    Rejected {
        v: u32,
        nonce: Option<String>,
        reason: String,
    },
}

impl Reply {
    pub fn ack(nonce: Option<String>) -> Self {
        Reply::Ack {
            v: PROTOCOL_VERSION,
            nonce,
            duplicate: false,
        }
    }

    pub fn rejected(nonce: Option<String>, reason: impl Into<String>) -> Self {
        Reply::Rejected {
            v: PROTOCOL_VERSION,
            nonce,
            reason: reason.into(),
        }
    }

    pub fn is_ack(&self) -> bool {
        matches!(self, Reply::Ack { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Starting,
    Running,
    Paused,
    Finished,
    Terminated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: RunStatus,
    pub revision: u64,
    pub iteration: usize,
    pub stage: Option<Stage>,
    pub face_count: usize,
}

struct Inner {
    snapshots: watch::Sender<Option<Arc<Snapshot>>>,
    queue: Mutex<VecDeque<Command>>,
    wake: Condvar,
    replies: Mutex<HashMap<String, Reply>>,
    closed: AtomicBool,
    terminated: AtomicBool,
}

/// Shared between the optimizer thread and any number of clients.
#[derive(Clone)]
pub struct SessionHub {
    inner: Arc<Inner>,
}

impl Default for SessionHub {
    fn default() -> Self {
        Self::new()
    }
}

impl SessionHub {
    pub fn new() -> Self {
        let (tx, _) = watch::channel(None);
        Self {
            inner: Arc::new(Inner {
                snapshots: tx,
                queue: Mutex::new(VecDeque::new()),
                wake: Condvar::new(),
                replies: Mutex::new(HashMap::new()),
                closed: AtomicBool::new(false),
                terminated: AtomicBool::new(false),
            }),
        }
    }

    /// Replaces the latest snapshot. Never waits for readers.
    pub fn publish(&self, snapshot: Snapshot) {
        self.inner.snapshots.send_replace(Some(Arc::new(snapshot)));
    }

    pub fn subscribe(&self) -> watch::Receiver<Option<Arc<Snapshot>>> {
        self.inner.snapshots.subscribe()
    }

    pub fn latest(&self) -> Option<Arc<Snapshot>> {
        self.inner.snapshots.borrow().clone()
    }

    /// Validates and queues a command. A repeated nonce returns the first
    /// reply without queueing again.
    pub fn submit(&self, msg: ClientMessage) -> Reply {
        let nonce = msg.nonce.clone();
        let mut replies = self.inner.replies.lock().expect("reply table poisoned");
        if let Some(n) = &nonce {
            if let Some(prev) = replies.get(n) {
                return match prev.clone() {
                    Reply::Ack { v, nonce, .. } => Reply::Ack {
                        v,
                        nonce,
                        duplicate: true,
                    },
                    r => r,
                };
            }
        }
        let reply = self.check(&msg).map_or_else(
            |reason| Reply::rejected(nonce.clone(), reason),
            |()| {
                if msg.command == Command::Terminate {
                    self.inner.terminated.store(true, Ordering::SeqCst);
                }
                self.inner
                    .queue
                    .lock()
                    .expect("command queue poisoned")
                    .push_back(msg.command.clone());
                self.inner.wake.notify_all();
                Reply::ack(nonce.clone())
            },
        );
        if let Some(n) = nonce {
            replies.insert(n, reply.clone());
        }
        reply
    }

    fn check(&self, msg: &ClientMessage) -> std::result::Result<(), String> {
        if msg.v != PROTOCOL_VERSION {
            return Err(format!("unsupported protocol version {}", msg.v));
        }
        if self.inner.terminated.load(Ordering::SeqCst) {
            return Err("run has been terminated".into());
        }
        if self.inner.closed.load(Ordering::SeqCst) {
            return Err("run has finished".into());
        }
        msg.command.validate()
    }

    /// Marks the run as over; further commands are rejected.
    pub fn close(&self) {
        self.inner.closed.store(true, Ordering::SeqCst);
        self.inner.wake.notify_all();
    }

    pub fn health(&self) -> Health {
        let latest = self.latest();
        let status = match &latest {
            _ if self.inner.terminated.load(Ordering::SeqCst) => RunStatus::Terminated,
            None => RunStatus::Starting,
            Some(s) if s.finished => RunStatus::Finished,
            Some(s) if s.paused => RunStatus::Paused,
            Some(_) => RunStatus::Running,
        };
        Health {
            status,
            revision: latest.as_ref().map_or(0, |s| s.revision),
            iteration: latest.as_ref().map_or(0, |s| s.iteration),
            stage: latest.as_ref().map(|s| s.stage),
            face_count: latest.as_ref().map_or(0, |s| s.faces.len() / 3),
        }
    }

    fn drain(&self) -> Vec<Command> {
        self.inner
            .queue
            .lock()
            .expect("command queue poisoned")
            .drain(..)
            .collect()
    }

    /// Blocks until a command arrives or `timeout` passes.
    fn wait(&self, timeout: Duration) {
        let q = self.inner.queue.lock().expect("command queue poisoned");
        if q.is_empty() && !self.inner.closed.load(Ordering::SeqCst) {
            let _ = self.inner.wake.wait_timeout(q, timeout);
        }
    }
}

type CheckpointFn = Box<dyn FnMut(&OptimizerState) -> Result<()> + Send>;

/// Connects an optimizer run to a hub: applies queued commands before each
/// vertex update and publishes a snapshot after each one.
pub struct SessionHooks {
    hub: SessionHub,
    revision: u64,
    face_revision: u64,
    topology: Option<u64>,
    faces: Arc<Vec<u32>>,
    paused: bool,
    checkpoint: Option<CheckpointFn>,
}

impl SessionHooks {
    /// Publishes the initial state right away.
    pub fn new(hub: SessionHub, state: &OptimizerState, start_paused: bool) -> Self {
        let mut hooks = Self {
            hub,
            revision: 0,
            face_revision: 0,
            topology: None,
            faces: Arc::new(Vec::new()),
            paused: start_paused,
            checkpoint: None,
        };
        hooks.publish(state);
        hooks
    }

    pub fn with_checkpoint(mut self, f: impl FnMut(&OptimizerState) -> Result<()> + Send + 'static) -> Self {
        self.checkpoint = Some(Box::new(f));
        self
    }

    pub fn hub(&self) -> &SessionHub {
        &self.hub
    }

    /// Builds and publishes a snapshot of `state`.
    pub fn publish(&mut self, state: &OptimizerState) {
        self.revision += 1;
        let topo = state.topology_revision();
        if self.topology != Some(topo) {
            self.topology = Some(topo);
            self.face_revision = self.revision;
            self.faces = Arc::new(
                state
                    .mesh()
                    .faces()
                    .iter()
                    .flat_map(|f| f.map(|i| i as u32))
                    .collect(),
            );
        }
        let history = state.history();
        let tail = &history[history.len().saturating_sub(HISTORY_TAIL)..];
        self.hub.publish(Snapshot {
            revision: self.revision,
            face_revision: self.face_revision,
            stage: state.stage(),
            iteration: state.updates(),
            vertices: state
                .mesh()
                .vertices()
                .iter()
                .flat_map(|p| [p.x as f32, p.y as f32, p.z as f32])
                .collect(),
            faces: self.faces.clone(),
            energies: state.evaluation().per_face.iter().map(|&e| e as f32).collect(),
            energy: state.evaluation().total,
            history: tail.to_vec(),
            params: *state.params(),
            element: state.element_kind(),
            paused: self.paused,
            finished: state.stage() == Stage::Done,
        });
    }

    fn apply(&mut self, state: &mut OptimizerState, cmd: Command) -> Result<Control> {
        match cmd {
            Command::Pause => self.paused = true,
            Command::Resume => self.paused = false,
            Command::SetParam { .. } => {
                let mut p = *state.params();
                cmd.apply_to(&mut p);
                state.set_params(p)?;
            }
            Command::SwitchElement { kind } => state.set_element_kind(kind)?,
            Command::TriggerSplit => {
                state.split()?;
            }
            Command::SaveCheckpoint => {
                if let Some(f) = self.checkpoint.as_mut() {
                    f(state)?;
                }
            }
            Command::Terminate => return Ok(Control::Terminate),
        }
        Ok(Control::Continue)
    }
}

impl Hooks for SessionHooks {
    fn before_update(&mut self, state: &mut OptimizerState) -> Result<Control> {
        loop {
            let commands = self.hub.drain();
            let changed = !commands.is_empty();
            for cmd in commands {
                if self.apply(state, cmd)? == Control::Terminate {
                    self.publish(state);
                    return Ok(Control::Terminate);
                }
            }
            if changed {
                self.publish(state);
            }
            if !self.paused {
                return Ok(Control::Continue);
            }
            self.hub.wait(Duration::from_millis(200));
        }
    }

    fn after_update(&mut self, state: &OptimizerState) -> Result<()> {
        self.publish(state);
        if state.stage() == Stage::Done {
            self.hub.close();
        }
        Ok(())
    }
}
