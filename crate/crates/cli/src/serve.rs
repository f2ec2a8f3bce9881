//! The steering server: `/session` WebSocket and `GET /health`, with the
//! optimizer on its own thread.
//!
//! Each client first gets the latest snapshot with its face buffer, then
//! every newer snapshot it has time to read. Text messages are commands and
//! are answered inline with an ack or a rejection.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use serde::Serialize;
use stealth_core::optimize::{run_schedule, Control, Hooks, OptimizerState, RunOutcome};
use stealth_core::session::{ClientMessage, FrameEncoder, Health, Reply, SessionHooks, SessionHub, PROTOCOL_VERSION};
use tokio::net::TcpListener;

use crate::commands::{write_artifacts, Checkpoints};
use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunReport {
    /// Final artifacts are on disk.
    pub artifacts_written: bool,
    pub error: Option<String>,
}

#[derive(Clone)]
struct App {
    hub: SessionHub,
    report: Arc<Mutex<RunReport>>,
}

#[derive(Debug, Serialize)]
struct HealthResponse {
    #[serde(flatten)]
    health: Health,
    #[serde(flatten)]
    report: RunReport,
}

/// A running server and its optimizer.
pub struct Server {
    pub addr: SocketAddr,
    pub hub: SessionHub,
    report: Arc<Mutex<RunReport>>,
    optimizer: std::thread::JoinHandle<()>,
    http: tokio::task::JoinHandle<()>,
}

impl Server {
    pub fn report(&self) -> RunReport {
        self.report.lock().expect("report poisoned").clone()
    }

    /// Waits for the optimizer thread, then stops serving.
    pub async fn finish(self) -> RunReport {
        let handle = self.optimizer;
        let _ = tokio::task::spawn_blocking(move || handle.join()).await;
        self.http.abort();
        self.report.lock().expect("report poisoned").clone()
    }
}

struct ServeHooks {
    session: SessionHooks,
    checkpoints: Checkpoints,
}

impl Hooks for ServeHooks {
    fn before_update(&mut self, state: &mut OptimizerState) -> stealth_core::Result<Control> {
        self.session.before_update(state)
    }

    fn after_update(&mut self, state: &OptimizerState) -> stealth_core::Result<()> {
        self.checkpoints.after_update(state)?;
        self.session.after_update(state)
    }
}

fn optimize_thread(cfg: RunConfig, hub: SessionHub, start_paused: bool) -> Result<RunOutcome, CliError> {
    let problem = cfg.problem()?;
    std::fs::create_dir_all(&cfg.output).map_err(|e| CliError::io(&cfg.output, e))?;
    cfg.save_resolved(&cfg.output)?;
    let mut state = OptimizerState::new(problem, cfg.params, cfg.seed)?;
    let mut on_demand = Checkpoints::new(&cfg.output, 0);
    let session = SessionHooks::new(hub.clone(), &state, start_paused).with_checkpoint(move |s| on_demand.write(s));
    let mut hooks = ServeHooks {
        session,
        checkpoints: Checkpoints::new(&cfg.output, cfg.checkpoint_every),
    };
    let outcome = run_schedule(&mut state, &mut hooks)?;
    write_artifacts(&state, &cfg.output)?;
    Ok(outcome)
}

/// Validates the config, then serves on `listener` and starts the
/// optimizer.
pub async fn start(cfg: RunConfig, listener: TcpListener, start_paused: bool) -> Result<Server, CliError> {
    cfg.validate()?;
    let addr = listener.local_addr().map_err(|e| CliError::Runtime(e.to_string()))?;
    let hub = SessionHub::new();
    let report = Arc::new(Mutex::new(RunReport::default()));
    let app = App {
        hub: hub.clone(),
        report: report.clone(),
    };
    let router = Router::new()
        .route("/session", get(session_ws))
        .route("/health", get(health))
        .with_state(app);
    let http = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, router).await {
            tracing::error!("server stopped: {e}");
        }
    });
    let (thread_hub, thread_report) = (hub.clone(), report.clone());
    let optimizer = std::thread::spawn(move || {
        let result = optimize_thread(cfg, thread_hub.clone(), start_paused);
        thread_hub.close();
        let mut r = thread_report.lock().expect("report poisoned");
        match result {
            Ok(outcome) => {
                tracing::info!(?outcome, "run ended");
                r.artifacts_written = true;
            }
            Err(e) => {
                tracing::error!("run failed: {e}");
                r.error = Some(e.to_string());
            }
        }
    });
    Ok(Server {
        addr,
        hub,
        report,
        optimizer,
        http,
    })
}

/// Entry point of the `serve` command: runs until interrupted.
pub fn serve_blocking(cfg: RunConfig, port: u16, start_paused: bool) -> Result<(), CliError> {
    cfg.validate()?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    rt.block_on(async move {
        let listener = TcpListener::bind(("127.0.0.1", port))
            .await
            .map_err(|e| CliError::Runtime(format!("cannot bind port {port}: {e}")))?;
        let server = start(cfg, listener, start_paused).await?;
        println!("listening on ws://{}/session", server.addr);
        let _ = tokio::signal::ctrl_c().await;
        Ok(())
    })
}

async fn health(State(app): State<App>) -> impl IntoResponse {
    Json(HealthResponse {
        health: app.hub.health(),
        report: app.report.lock().expect("report poisoned").clone(),
    })
}

async fn session_ws(ws: WebSocketUpgrade, State(app): State<App>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, app.hub))
}

fn reply_for(hub: &SessionHub, text: &str) -> Reply {
    match serde_json::from_str::<ClientMessage>(text) {
        Ok(msg) => hub.submit(msg),
        Err(e) => {
            let nonce = serde_json::from_str::<serde_json::Value>(text)
                .ok()
                .and_then(|v| v.get("nonce").and_then(|n| n.as_str()).map(String::from));
            Reply::Rejected {
                v: PROTOCOL_VERSION,
                nonce,
                reason: format!("malformed command: {e}"),
            }
        }
    }
}

async fn client(socket: WebSocket, hub: SessionHub) {
    let (mut tx, mut rx) = socket.split();
    let mut snapshots = hub.subscribe();
    let mut encoder = FrameEncoder::new();
    let mut pending = snapshots.borrow_and_update().clone();
    loop {
        if let Some(snap) = pending.take() {
            let frame = match encoder.encode(&snap) {
                Ok(f) => f,
                Err(e) => {
                    tracing::error!("frame encoding failed: {e}");
                    break;
                }
            };
            if tx.send(Message::Binary(frame.into())).await.is_err() {
                break;
            }
        }
        tokio::select! {
            changed = snapshots.changed() => {
                if changed.is_err() {
                    break;
                }
                pending = snapshots.borrow_and_update().clone();
            }
            msg = rx.next() => match msg {
                Some(Ok(Message::Text(text))) => {
                    let reply = reply_for(&hub, text.as_str());
                    let json = serde_json::to_string(&reply).expect("replies serialize");
                    if tx.send(Message::Text(json.into())).await.is_err() {
                        break;
                    }
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
        }
    }
    tracing::debug!("client disconnected");
}
