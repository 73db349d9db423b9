//! HTTP annotation service for human-in-the-loop runs.
//!
//! The selection loop runs on its own thread and blocks inside
//! [`HumanAnnotator`] until every selected tuple is labeled through
//! `POST /labels`. All queue transitions go through one mutex, so
//! concurrent submitters are totally ordered.
//!
//! | route | |
//! |---|---|
//! | `GET /pending` | tuples awaiting a label (empty while the loop is updating) |
//! | `POST /labels` | `{"tuple_id": .., "winner": "First" \| "Second"}`; 200, 409 or 400 |
//! | `GET /metrics` | latest evaluation metrics and their history |
//! | `GET /status` | iteration, phase and outstanding labels |

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use sharp_core::active_loop::{required_pool, LoopState};
use sharp_core::{
    run_iteration, validate_dataset, AnnotationQueue, AnnotationSource, Annotator, Dataset, Error, EvalSet,
    PolicyParams, PreferenceLabel, PreferenceTuple, RunConfig,
};

use crate::runlog::{JsonlWriter, MetricsEntry, RunLogRecord, WinnerRepr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Starting,
    Selecting,
    AwaitingLabels,
    Updating,
    Finished,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingItem {
    pub tuple_id: String,
    pub prompt_text: Option<String>,
    pub response_texts: [Option<String>; 2],
}

#[derive(Debug)]
struct HubState {
    queue: AnnotationQueue,
    phase: Phase,
    iteration: u64,
    iterations_total: usize,
    display: BTreeMap<String, PendingItem>,
    history: Vec<MetricsEntry>,
    labeled_total: usize,
    error: Option<String>,
}

/// Shared state between the HTTP handlers and the loop thread.
#[derive(Debug)]
pub struct Hub {
    state: Mutex<HubState>,
    changed: Condvar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusView {
    pub iteration: u64,
    pub iterations_total: usize,
    pub phase: Phase,
    pub labels_outstanding: usize,
    pub labeled_total: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsView {
    pub latest: Option<MetricsEntry>,
    pub history: Vec<MetricsEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubmitOutcome {
    Accepted { outstanding: usize },
    NotPending,
}

impl Hub {
    pub fn new(iterations_total: usize) -> Arc<Self> {
        Arc::new(Hub {
            state: Mutex::new(HubState {
                queue: AnnotationQueue::new(),
                phase: Phase::Starting,
                iteration: 0,
                iterations_total,
                display: BTreeMap::new(),
                history: Vec::new(),
                labeled_total: 0,
                error: None,
            }),
            changed: Condvar::new(),
        })
    }

    fn lock(&self) -> MutexGuard<'_, HubState> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn set_phase(&self, phase: Phase) {
        self.lock().phase = phase;
        self.changed.notify_all();
    }

    pub fn pending(&self) -> Vec<PendingItem> {
        let s = self.lock();
        if s.phase != Phase::AwaitingLabels {
            return Vec::new();
        }
        s.queue.pending().iter().filter_map(|id| s.display.get(id).cloned()).collect()
    }

    pub fn status(&self) -> StatusView {
        let s = self.lock();
        StatusView {
            iteration: s.iteration,
            iterations_total: s.iterations_total,
            phase: s.phase,
            labels_outstanding: if s.phase == Phase::AwaitingLabels { s.queue.pending().len() } else { 0 },
            labeled_total: s.labeled_total,
            error: s.error.clone(),
        }
    }

    pub fn metrics(&self) -> MetricsView {
        let s = self.lock();
        MetricsView { latest: s.history.last().cloned(), history: s.history.clone() }
    }

    pub fn submit(&self, tuple_id: &str, label: PreferenceLabel) -> SubmitOutcome {
        let mut s = self.lock();
        if s.phase != Phase::AwaitingLabels {
            return SubmitOutcome::NotPending;
        }
        let iteration = s.iteration;
        match s.queue.submit(tuple_id, label, AnnotationSource::Human, iteration) {
            Ok(_) => {
                let outstanding = s.queue.pending().len();
                drop(s);
                self.changed.notify_all();
                SubmitOutcome::Accepted { outstanding }
            }
            Err(_) => SubmitOutcome::NotPending,
        }
    }

    /// Blocks until `pred` holds on the status or `timeout` passes.
    pub fn wait_for(&self, timeout: Duration, pred: impl Fn(&StatusView) -> bool) -> bool {
        let deadline = Instant::now() + timeout;
        loop {
            if pred(&self.status()) {
                return true;
            }
            let now = Instant::now();
            if now >= deadline {
                return false;
            }
            let guard = self.lock();
            let _ = self.changed.wait_timeout(guard, (deadline - now).min(Duration::from_millis(50)));
        }
    }
}

/// Publishes each selection round on the hub and waits for human labels.
pub struct HumanAnnotator {
    hub: Arc<Hub>,
    timeout: Duration,
}

impl HumanAnnotator {
    pub fn new(hub: Arc<Hub>, timeout: Duration) -> Self {
        Self { hub, timeout }
    }
}

impl Annotator for HumanAnnotator {
    fn annotate(
        &mut self,
        iteration: u64,
        tuples: &[&PreferenceTuple],
    ) -> sharp_core::error::Result<Vec<(PreferenceLabel, AnnotationSource)>> {
        let ids: Vec<&str> = tuples.iter().map(|t| t.id.as_str()).collect();
        let mut s = self.hub.lock();
        s.queue.enqueue(&ids)?;
        for t in tuples {
            s.display.insert(
                t.id.clone(),
                PendingItem {
                    tuple_id: t.id.clone(),
                    prompt_text: t.prompt_text.clone(),
                    response_texts: t.response_texts.clone(),
                },
            );
        }
        s.iteration = iteration;
        s.phase = Phase::AwaitingLabels;
        self.hub.changed.notify_all();

        let deadline = Instant::now() + self.timeout;
        while ids.iter().any(|id| s.queue.is_pending(id)) {
            let now = Instant::now();
            if now >= deadline {
                s.queue.clear_pending();
                s.display.clear();
                s.phase = Phase::Updating;
                drop(s);
                self.hub.changed.notify_all();
                return Err(Error::AnnotationTimeout { iteration });
            }
            s = self.hub.changed.wait_timeout(s, deadline - now).unwrap_or_else(|p| p.into_inner()).0;
        }
        let labels = ids
            .iter()
            .map(|id| {
                let pair = s.queue.get(id).ok_or_else(|| Error::UnknownTuple((*id).into()))?;
                Ok((pair.label, pair.source))
            })
            .collect();
        s.display.clear();
        s.phase = Phase::Updating;
        drop(s);
        self.hub.changed.notify_all();
        labels
    }
}

/// Drives `config.iterations_n` iterations with human labels, appending
/// each record to `log`. The hub reflects progress throughout.
pub fn run_human_loop(
    hub: Arc<Hub>,
    config: &RunConfig,
    dataset: &Dataset,
    eval: Option<&EvalSet>,
    timeout: Duration,
    mut log: Option<JsonlWriter>,
) -> anyhow::Result<PolicyParams> {
    let result = (|| -> anyhow::Result<PolicyParams> {
        config.validate()?;
        if let Some(v) = validate_dataset(dataset).first() {
            anyhow::bail!("invalid dataset: {v}");
        }
        let needed = required_pool(config);
        if dataset.len() < needed {
            return Err(Error::InsufficientPool { needed, available: dataset.len() }.into());
        }
        let mut state = LoopState::new(dataset, PolicyParams::zeros(dataset.feature_dim), config.seed);
        let mut annotator = HumanAnnotator::new(hub.clone(), timeout);
        for _ in 0..config.iterations_n {
            hub.set_phase(Phase::Selecting);
            let record = run_iteration(&mut state, config, dataset, &mut annotator, eval)?;
            let line = RunLogRecord::from(&record);
            if let Some(w) = log.as_mut() {
                w.write(&line)?;
            }
            let mut s = hub.lock();
            s.labeled_total = state.labeled_count();
            s.iteration = state.iteration;
            if let Some(m) = line.metrics {
                s.history.push(m);
            }
        }
        Ok(state.policy)
    })();
    match &result {
        Ok(_) => hub.set_phase(Phase::Finished),
        Err(e) => {
            hub.lock().error = Some(e.to_string());
            hub.set_phase(Phase::Failed);
        }
    }
    result
}

#[derive(Debug, Deserialize)]
struct LabelBody {
    tuple_id: String,
    winner: WinnerRepr,
}

fn json_error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(serde_json::json!({ "error": message.into() }))).into_response()
}

async fn get_pending(State(hub): State<Arc<Hub>>) -> Json<Vec<PendingItem>> {
    Json(hub.pending())
}

async fn post_labels(State(hub): State<Arc<Hub>>, body: Bytes) -> Response {
    let body: LabelBody = match serde_json::from_slice(&body) {
        Ok(b) => b,
        Err(e) => return json_error(StatusCode::BAD_REQUEST, format!("malformed label: {e}")),
    };
    match hub.submit(&body.tuple_id, body.winner.into()) {
        SubmitOutcome::Accepted { outstanding } => {
            Json(serde_json::json!({ "accepted": true, "outstanding": outstanding })).into_response()
        }
        SubmitOutcome::NotPending => {
            json_error(StatusCode::CONFLICT, format!("tuple {} is not pending", body.tuple_id))
        }
    }
}

async fn get_metrics(State(hub): State<Arc<Hub>>) -> Json<MetricsView> {
    Json(hub.metrics())
}

async fn get_status(State(hub): State<Arc<Hub>>) -> Json<StatusView> {
    Json(hub.status())
}

pub fn router(hub: Arc<Hub>) -> Router {
    Router::new()
        .route("/pending", get(get_pending))
        .route("/labels", post(post_labels))
        .route("/metrics", get(get_metrics))
        .route("/status", get(get_status))
        .with_state(hub)
}

pub struct ServeOptions {
    pub addr: SocketAddr,
    pub timeout: Duration,
    /// Stop the server once the loop finishes or fails.
    pub exit_when_done: bool,
}

/// Binds `opts.addr`, starts the loop thread and serves until interrupted.
pub async fn serve(
    config: RunConfig,
    dataset: Dataset,
    eval: Option<EvalSet>,
    log: Option<JsonlWriter>,
    opts: ServeOptions,
) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(opts.addr)
        .await
        .map_err(|e| anyhow::anyhow!("cannot bind {}: {e}", opts.addr))?;
    let hub = Hub::new(config.iterations_n);
    let loop_hub = hub.clone();
    let (done_tx, done_rx) = tokio::sync::oneshot::channel::<()>();
    let timeout = opts.timeout;
    let worker = std::thread::spawn(move || {
        let r = run_human_loop(loop_hub, &config, &dataset, eval.as_ref(), timeout, log);
        let _ = done_tx.send(());
        r
    });
    let exit_when_done = opts.exit_when_done;
    let shutdown = async move {
        if exit_when_done {
            tokio::select! {
                _ = tokio::signal::ctrl_c() => {}
                _ = done_rx => {}
            }
        } else {
            let _ = tokio::signal::ctrl_c().await;
        }
    };
    axum::serve(listener, router(hub)).with_graceful_shutdown(shutdown).await?;
    if worker.is_finished() {
        worker.join().map_err(|_| anyhow::anyhow!("loop thread panicked"))??;
    }
    Ok(())
}
