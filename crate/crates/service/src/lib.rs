//! HTTP service hosting the commons engine.
//!
//! One process, one NDJSON event store. Writes are serialized through a
//! single engine lock and fsynced before the response is sent; reads go to
//! an immutable snapshot swapped in after each write, so they never wait on
//! a command in flight.
//!
//! Monthly job order (per house, at each month boundary): obligations and
//! shortfall penalties → account refills → karma awards → hearts tick.

pub mod api;
pub mod config;
pub mod store;

use std::sync::{Arc, Mutex, PoisonError, RwLock};
use std::time::Duration;

use axum::extract::{Request, State};
use axum::http::header;
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::Router;
use commons_core::{Clock, Engine, EngineError, EngineState, Event, HouseConfig, HouseId, SystemClock, Timestamp};

use api::ApiError;
pub use config::ServiceConfig;

/// Read-side view of the engine after some write.
#[derive(Debug, Default)]
pub struct Snapshot {
    pub state: EngineState,
    /// Length of the log this state was derived from.
    pub events: usize,
}

pub struct AppState {
    engine: Mutex<Engine>,
    snapshot: RwLock<Arc<Snapshot>>,
    clock: Arc<dyn Clock>,
    pub simulation: bool,
    pub api_key: Option<String>,
    pub house_defaults: HouseConfig,
}

pub type Shared = Arc<AppState>;

impl AppState {
    pub fn new(engine: Engine, clock: Arc<dyn Clock>, cfg: &ServiceConfig) -> Shared {
        let snapshot = Snapshot {
            state: engine.state().clone(),
            events: engine.log().len(),
        };
        Arc::new(AppState {
            engine: Mutex::new(engine),
            snapshot: RwLock::new(Arc::new(snapshot)),
            clock,
            simulation: cfg.simulation,
            api_key: cfg.api_key.clone(),
            house_defaults: cfg.house_defaults.clone(),
        })
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().unwrap_or_else(PoisonError::into_inner).clone()
    }

    /// Instant a read is evaluated at: the request's `at`, else the clock
    /// (in simulation mode, the last event).
    pub fn read_at(&self, snap: &Snapshot, at: Option<Timestamp>) -> Timestamp {
        let last = snap.state.last_at();
        match at {
            Some(at) => at,
            None if self.simulation => last,
            None => self.clock.now().max(last),
        }
    }

    /// Runs a command under the engine lock. The snapshot is refreshed even
    /// when the command fails, since advancing time may already have emitted
    /// events.
    pub fn write<T>(
        &self,
        at: Option<Timestamp>,
        f: impl FnOnce(&mut Engine, Timestamp) -> commons_core::Result<T>,
    ) -> Result<T, ApiError> {
        self.write_with_events(at, f).map(|(v, _)| v)
    }

    pub fn write_with_events<T>(
        &self,
        at: Option<Timestamp>,
        f: impl FnOnce(&mut Engine, Timestamp) -> commons_core::Result<T>,
    ) -> Result<(T, Vec<Event>), ApiError> {
        if at.is_none() && self.simulation {
            return Err(ApiError::MissingTimestamp);
        }
        let mut engine = self.engine.lock().unwrap_or_else(PoisonError::into_inner);
        let at = at.unwrap_or_else(|| engine.now());
        let before = engine.log().len();
        let result = f(&mut engine, at);
        let after = engine.log().len();
        if after != before {
            let snap = Snapshot {
                state: engine.state().clone(),
                events: after,
            };
            *self.snapshot.write().unwrap_or_else(PoisonError::into_inner) = Arc::new(snap);
        }
        let value = result?;
        Ok((value, engine.log()[before..].to_vec()))
    }

    pub fn house_events(&self, house: &HouseId) -> Vec<Event> {
        let engine = self.engine.lock().unwrap_or_else(PoisonError::into_inner);
        engine.log().iter().filter(|e| &e.house == house).cloned().collect()
    }

    /// One scheduler pass over every house at the clock's current time.
    pub fn tick_now(&self) -> Result<usize, ApiError> {
        self.write_with_events(None, |e, at| e.run_scheduler_tick(at))
            .map(|(events, _)| events.len())
    }
}

async fn require_key(State(app): State<Shared>, req: Request, next: Next) -> Response {
    if let Some(key) = &app.api_key {
        let headers = req.headers();
        let bearer = headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        let plain = headers.get("x-api-key").and_then(|v| v.to_str().ok());
        if bearer.or(plain) != Some(key.as_str()) {
            return ApiError::Unauthorized.into_response();
        }
    }
    next.run(req).await
}

pub fn router(app: Shared) -> Router {
    use api::*;
    let houses = Router::new()
        .route("/houses", post(create_house))
        .route("/houses/{h}", get(get_house))
        .route("/houses/{h}/tick", post(tick))
        .route("/houses/{h}/events", get(events))
        .route("/houses/{h}/residents", get(residents).post(add_resident))
        .route("/houses/{h}/residents/{r}", delete(remove_resident))
        .route("/houses/{h}/chores", get(chores))
        .route("/houses/{h}/chores/amendments", post(chore_amendment))
        .route("/houses/{h}/chores/{c}/claim", post(claim))
        .route("/houses/{h}/proposals", get(open_proposals))
        .route("/houses/{h}/proposals/{p}", get(proposal))
        .route("/houses/{h}/proposals/{p}/ballots", post(ballot))
        .route("/houses/{h}/obligations/{month}", get(obligations))
        .route("/houses/{h}/exemptions", post(exemption))
        .route("/houses/{h}/preferences", post(preference))
        .route("/houses/{h}/priorities", get(priorities))
        .route("/houses/{h}/hearts", get(hearts))
        .route("/houses/{h}/hearts/{r}/history", get(hearts_history))
        .route("/houses/{h}/karma", post(karma))
        .route("/houses/{h}/challenges", post(challenge))
        .route("/houses/{h}/accounts", get(accounts))
        .route("/houses/{h}/accounts/amendments", post(account_amendment))
        .route("/houses/{h}/buy-list", get(buy_list))
        .route("/houses/{h}/buy-list/amendments", post(buy_list_amendment))
        .route("/houses/{h}/purchases", get(purchases).post(purchase))
        .route("/houses/{h}/purchases/threshold", get(purchase_threshold))
        .route("/houses/{h}/ledger.csv", get(ledger_csv))
        .route_layer(middleware::from_fn_with_state(app.clone(), require_key));
    Router::new().route("/health", get(health)).merge(houses).with_state(app)
}

/// Opens the store, replays it, and returns the shared state ready to serve.
pub fn open(cfg: &ServiceConfig, clock: Arc<dyn Clock>) -> Result<Shared, EngineError> {
    let (events, journal) = store::open(&cfg.store)?;
    tracing::info!(events = events.len(), store = %cfg.store.display(), "replayed event log");
    let engine = Engine::from_log(clock.clone(), events, Box::new(journal))?;
    Ok(AppState::new(engine, clock, cfg))
}

/// Runs the service until Ctrl-C.
pub async fn serve(cfg: ServiceConfig) -> Result<(), Box<dyn std::error::Error>> {
    let app = open(&cfg, Arc::new(SystemClock))?;
    if !cfg.simulation {
        let ticker = app.clone();
        let every = Duration::from_millis(cfg.tick_interval_ms);
        tokio::spawn(async move {
            let mut interval = tokio::time::interval(every);
            loop {
                interval.tick().await;
                if let Err(e) = ticker.tick_now() {
                    tracing::error!(error = ?e, "scheduler tick failed");
                }
            }
        });
    }
    let listener = tokio::net::TcpListener::bind(&cfg.bind).await?;
    tracing::info!(bind = %cfg.bind, simulation = cfg.simulation, "listening");
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
