//! HTTP handlers. Every house-scoped route lives under `/houses/{h}`.
//!
//! Mutating requests take an optional `at` (epoch ms) in the body; reads
//! take `?at=`. Errors are `{"error": "<Code>", "message": "…"}`.

use std::collections::BTreeMap;

use axum::body::Bytes;
use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use chrono::NaiveDate;
use commons_core::consensus::{Proposal, Tally};
use commons_core::things::min_upvotes_for_price;
use commons_core::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::Shared;

// ------------------------------------------------------------------ errors

#[derive(Debug)]
pub enum ApiError {
    Engine(EngineError),
    BadRequest(String),
    MissingTimestamp,
    Unauthorized,
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        ApiError::Engine(e)
    }
}

fn status_of(e: &EngineError) -> StatusCode {
    use EngineError::*;
    match e {
        UnknownHouse(_) | UnknownProposal(_) | UnknownChore(_) | UnknownAccount(_) | UnknownItem(_) => StatusCode::NOT_FOUND,
        DuplicateHouse(_)
        | DuplicateResident(_)
        | DuplicateName(_)
        | DuplicateAccountName(_)
        | ProposalClosed(_)
        | ZeroValue
        | InsufficientFunds { .. }
        | ClockRegression { .. }
        | MonthNotEnded => StatusCode::CONFLICT,
        StoreUnavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
        CorruptLog(_) => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code, message) = match self {
            ApiError::Engine(e) => (status_of(&e), e.code(), e.to_string()),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, "BadRequest", m),
            ApiError::MissingTimestamp => (
                StatusCode::BAD_REQUEST,
                "MissingTimestamp",
                "simulation mode requires an explicit `at`".into(),
            ),
            ApiError::Unauthorized => (StatusCode::UNAUTHORIZED, "Unauthorized", "missing or wrong API key".into()),
        };
        (status, Json(serde_json::json!({ "error": code, "message": message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// JSON body whose parse failures come back in the API's error shape.
pub struct Body<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        let bytes = Bytes::from_request(req, state)
            .await
            .map_err(|e| ApiError::BadRequest(e.to_string()))?;
        let bytes = if bytes.is_empty() { Bytes::from_static(b"{}") } else { bytes };
        serde_json::from_slice(&bytes)
            .map(Body)
            .map_err(|e| ApiError::BadRequest(e.to_string()))
    }
}

fn house_id(h: String) -> ApiResult<HouseId> {
    HouseId::new(h).map_err(ApiError::from)
}

fn resident_id(r: String) -> ApiResult<ResidentId> {
    ResidentId::new(r).map_err(ApiError::from)
}

fn numeric<T>(raw: &str, what: &str, wrap: impl Fn(u64) -> T) -> ApiResult<T> {
    raw.parse()
        .map(wrap)
        .map_err(|_| ApiError::BadRequest(format!("{what} must be a non-negative integer, got {raw:?}")))
}

#[derive(Debug, Default, Deserialize)]
pub struct AtQuery {
    at: Option<Timestamp>,
}

fn created<T: Serialize>(v: T) -> Response {
    (StatusCode::CREATED, Json(v)).into_response()
}

// ----------------------------------------------------------------- service

pub async fn health(State(app): State<Shared>) -> Json<serde_json::Value> {
    let snap = app.snapshot();
    Json(serde_json::json!({
        "status": "ok",
        "houses": snap.state.houses().count(),
        "events": snap.events,
        "simulation": app.simulation,
    }))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NewHouse {
    id: HouseId,
    config: Option<HouseConfig>,
    at: Option<Timestamp>,
}

pub async fn create_house(State(app): State<Shared>, Body(req): Body<NewHouse>) -> ApiResult<Response> {
    let config = req.config.unwrap_or_else(|| app.house_defaults.clone());
    app.write(req.at, |e, at| e.create_house(&req.id, config, at))?;
    let snap = app.snapshot();
    Ok(created(summary(snap.state.house(&req.id)?)))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct HouseSummary<'a> {
    id: &'a HouseId,
    created_at: Timestamp,
    config: &'a HouseConfig,
    active_residents: Vec<ResidentId>,
    closed_through: Option<YearMonth>,
}

fn summary(h: &HouseState) -> HouseSummary<'_> {
    HouseSummary {
        id: &h.id,
        created_at: h.created_at,
        config: &h.config,
        active_residents: h.roster.active().into_iter().collect(),
        closed_through: h.closed_through,
    }
}

pub async fn get_house(State(app): State<Shared>, Path(h): Path<String>) -> ApiResult<Response> {
    let snap = app.snapshot();
    Ok(Json(summary(snap.state.house(&house_id(h)?)?)).into_response())
}

#[derive(Deserialize)]
pub struct TickReq {
    at: Option<Timestamp>,
}

/// Brings the house up to `at`: resolves due proposals and runs any monthly
/// jobs whose boundary has passed. Returns the events this produced.
pub async fn tick(State(app): State<Shared>, Path(h): Path<String>, Body(req): Body<TickReq>) -> ApiResult<Json<Vec<Event>>> {
    let house = house_id(h)?;
    let (_, events) = app.write_with_events(req.at, |e, at| e.resolve_due(&house, at))?;
    Ok(Json(events))
}

/// The house's slice of the event log as NDJSON.
pub async fn events(State(app): State<Shared>, Path(h): Path<String>) -> ApiResult<Response> {
    let house = house_id(h)?;
    app.snapshot().state.house(&house)?;
    let mut out = String::new();
    for e in app.house_events(&house) {
        out.push_str(&commons_core::ledger::to_json_line(&e));
        out.push('\n');
    }
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], out).into_response())
}

// ------------------------------------------------------------------ roster

pub async fn residents(State(app): State<Shared>, Path(h): Path<String>) -> ApiResult<Response> {
    let snap = app.snapshot();
    let house = snap.state.house(&house_id(h)?)?;
    let all: Vec<_> = house.roster.all().cloned().collect();
    Ok(Json(all).into_response())
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResidentReq {
    resident: ResidentId,
    at: Option<Timestamp>,
}

pub async fn add_resident(State(app): State<Shared>, Path(h): Path<String>, Body(req): Body<ResidentReq>) -> ApiResult<Response> {
    let house = house_id(h)?;
    let rec = app.write(req.at, |e, at| e.add_resident(&house, &req.resident, at))?;
    Ok(created(rec))
}

pub async fn remove_resident(
    State(app): State<Shared>,
    Path((h, r)): Path<(String, String)>,
    Query(q): Query<AtQuery>,
) -> ApiResult<Response> {
    let (house, resident) = (house_id(h)?, resident_id(r)?);
    let rec = app.write(q.at, |e, at| e.remove_resident(&house, &resident, at))?;
    Ok(Json(rec).into_response())
}

// ------------------------------------------------------------------ chores

pub async fn chores(State(app): State<Shared>, Path(h): Path<String>, Query(q): Query<AtQuery>) -> ApiResult<Response> {
    let snap = app.snapshot();
    let at = app.read_at(&snap, q.at);
    Ok(Json(snap.state.house(&house_id(h)?)?.chore_board(at)).into_response())
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ClaimReq {
    resident: ResidentId,
    at: Option<Timestamp>,
}

pub async fn claim(State(app): State<Shared>, Path((h, c)): Path<(String, String)>, Body(req): Body<ClaimReq>) -> ApiResult<Response> {
    let house = house_id(h)?;
    let chore = numeric(&c, "chore", ChoreId)?;
    let claim = app.write(req.at, |e, at| e.claim_chore(&house, chore, &req.resident, at))?;
    Ok(created(claim))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AmendReq<A> {
    resident: ResidentId,
    amendment: A,
    at: Option<Timestamp>,
}

#[derive(Serialize)]
struct Opened {
    proposal: ProposalId,
}

pub async fn chore_amendment(
    State(app): State<Shared>,
    Path(h): Path<String>,
    Body(req): Body<AmendReq<ChoreAmendment>>,
) -> ApiResult<Response> {
    let house = house_id(h)?;
    let proposal = app.write(req.at, |e, at| e.propose_chore_amendment(&house, &req.resident, req.amendment, at))?;
    Ok(created(Opened { proposal }))
}

pub async fn obligations(State(app): State<Shared>, Path((h, m)): Path<(String, String)>) -> ApiResult<Response> {
    let month: YearMonth = m.parse()?;
    let snap = app.snapshot();
    Ok(Json(snap.state.house(&house_id(h)?)?.obligations(month)).into_response())
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExemptionReq {
    resident: ResidentId,
    from_day: NaiveDate,
    to_day: NaiveDate,
    at: Option<Timestamp>,
}

pub async fn exemption(State(app): State<Shared>, Path(h): Path<String>, Body(req): Body<ExemptionReq>) -> ApiResult<StatusCode> {
    let house = house_id(h)?;
    app.write(req.at, |e, at| e.declare_exemption(&house, &req.resident, req.from_day, req.to_day, at))?;
    Ok(StatusCode::CREATED)
}

// --------------------------------------------------------------- proposals

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ProposalView<'a> {
    #[serde(flatten)]
    proposal: &'a Proposal<Subject>,
    deadline: Timestamp,
    tally: Tally,
    open: bool,
}

fn view(p: &Proposal<Subject>, at: Timestamp) -> ProposalView<'_> {
    ProposalView {
        proposal: p,
        deadline: p.deadline(),
        tally: p.tally(),
        open: p.is_open_at(at),
    }
}

/// Proposals still accepting ballots at `at`.
pub async fn open_proposals(State(app): State<Shared>, Path(h): Path<String>, Query(q): Query<AtQuery>) -> ApiResult<Response> {
    let snap = app.snapshot();
    let at = app.read_at(&snap, q.at);
    let house = snap.state.house(&house_id(h)?)?;
    let out: Vec<_> = house.open_proposals(at).map(|p| view(p, at)).collect();
    Ok(Json(out).into_response())
}

pub async fn proposal(
    State(app): State<Shared>,
    Path((h, p)): Path<(String, String)>,
    Query(q): Query<AtQuery>,
) -> ApiResult<Response> {
    let snap = app.snapshot();
    let at = app.read_at(&snap, q.at);
    let id = numeric(&p, "proposal", ProposalId)?;
    let house = snap.state.house(&house_id(h)?)?;
    let p = house.proposals.get(id).ok_or(EngineError::UnknownProposal(id))?;
    Ok(Json(view(p, at)).into_response())
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BallotReq {
    resident: ResidentId,
    direction: Direction,
    at: Option<Timestamp>,
}

pub async fn ballot(State(app): State<Shared>, Path((h, p)): Path<(String, String)>, Body(req): Body<BallotReq>) -> ApiResult<StatusCode> {
    let house = house_id(h)?;
    let id = numeric(&p, "proposal", ProposalId)?;
    app.write(req.at, |e, at| e.cast_ballot(&house, id, &req.resident, req.direction, at))?;
    Ok(StatusCode::NO_CONTENT)
}

// ---------------------------------------------------------- prioritization

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PreferenceReq {
    resident: ResidentId,
    preferred: ChoreId,
    deprioritized: ChoreId,
    at: Option<Timestamp>,
}

pub async fn preference(State(app): State<Shared>, Path(h): Path<String>, Body(req): Body<PreferenceReq>) -> ApiResult<StatusCode> {
    let house = house_id(h)?;
    app.write(req.at, |e, at| {
        e.submit_preference(&house, &req.resident, req.preferred, req.deprioritized, at)
    })?;
    Ok(StatusCode::CREATED)
}

pub async fn priorities(State(app): State<Shared>, Path(h): Path<String>, Query(q): Query<AtQuery>) -> ApiResult<Response> {
    let snap = app.snapshot();
    let at = app.read_at(&snap, q.at);
    Ok(Json(snap.state.house(&house_id(h)?)?.priorities(at)).into_response())
}

// ------------------------------------------------------------------ hearts

pub async fn hearts(State(app): State<Shared>, Path(h): Path<String>) -> ApiResult<Response> {
    let snap = app.snapshot();
    Ok(Json(snap.state.house(&house_id(h)?)?.hearts_board()).into_response())
}

pub async fn hearts_history(State(app): State<Shared>, Path((h, r)): Path<(String, String)>) -> ApiResult<Response> {
    let snap = app.snapshot();
    let house = snap.state.house(&house_id(h)?)?;
    let resident = resident_id(r)?;
    if house.hearts.balance(&resident).is_none() {
        return Err(EngineError::UnknownResident(resident).into());
    }
    let history: Vec<_> = house.hearts.history_of(&resident).cloned().collect();
    Ok(Json(history).into_response())
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KarmaReq {
    giver: ResidentId,
    recipient: ResidentId,
    source_message: Option<String>,
    at: Option<Timestamp>,
}

pub async fn karma(State(app): State<Shared>, Path(h): Path<String>, Body(req): Body<KarmaReq>) -> ApiResult<Response> {
    let house = house_id(h)?;
    let rec = app.write(req.at, |e, at| e.record_karma(&house, &req.giver, &req.recipient, req.source_message, at))?;
    Ok(created(rec))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChallengeReq {
    challenger: ResidentId,
    challengee: ResidentId,
    stake: Option<f64>,
    #[serde(default)]
    reason: String,
    at: Option<Timestamp>,
}

pub async fn challenge(State(app): State<Shared>, Path(h): Path<String>, Body(req): Body<ChallengeReq>) -> ApiResult<Response> {
    let house = house_id(h)?;
    let proposal = app.write(req.at, |e, at| {
        e.open_challenge(&house, &req.challenger, &req.challengee, req.stake, req.reason, at)
    })?;
    Ok(created(Opened { proposal }))
}

// ------------------------------------------------------------------ things

pub async fn accounts(State(app): State<Shared>, Path(h): Path<String>) -> ApiResult<Response> {
    let snap = app.snapshot();
    let house = snap.state.house(&house_id(h)?)?;
    let all: Vec<_> = house.things.accounts().cloned().collect();
    Ok(Json(all).into_response())
}

pub async fn account_amendment(
    State(app): State<Shared>,
    Path(h): Path<String>,
    Body(req): Body<AmendReq<AccountAmendment>>,
) -> ApiResult<Response> {
    let house = house_id(h)?;
    let proposal = app.write(req.at, |e, at| e.propose_account_amendment(&house, &req.resident, req.amendment, at))?;
    Ok(created(Opened { proposal }))
}

pub async fn buy_list(State(app): State<Shared>, Path(h): Path<String>) -> ApiResult<Response> {
    let snap = app.snapshot();
    let house = snap.state.house(&house_id(h)?)?;
    let all: Vec<_> = house.things.items().cloned().collect();
    Ok(Json(all).into_response())
}

pub async fn buy_list_amendment(
    State(app): State<Shared>,
    Path(h): Path<String>,
    Body(req): Body<AmendReq<BuyListAmendment>>,
) -> ApiResult<Response> {
    let house = house_id(h)?;
    let proposal = app.write(req.at, |e, at| e.propose_buy_list_amendment(&house, &req.resident, req.amendment, at))?;
    Ok(created(Opened { proposal }))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PurchaseReq {
    #[serde(flatten)]
    request: PurchaseRequest,
    at: Option<Timestamp>,
}

pub async fn purchase(State(app): State<Shared>, Path(h): Path<String>, Body(req): Body<PurchaseReq>) -> ApiResult<Response> {
    let house = house_id(h)?;
    let (purchase, min_upvotes) = app.write(req.at, |e, at| {
        let p = e.propose_purchase(&house, req.request, at)?;
        let min = e.house(&house)?.proposals.get(p.proposal).map_or(0, |x| x.rule.min_upvotes);
        Ok((p, min))
    })?;
    Ok(created(PurchaseOpened { purchase, min_upvotes }))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct PurchaseOpened {
    #[serde(flatten)]
    purchase: commons_core::things::PurchaseProposal,
    min_upvotes: u32,
}

#[derive(Deserialize)]
pub struct MonthQuery {
    month: Option<String>,
}

pub async fn purchases(State(app): State<Shared>, Path(h): Path<String>, Query(q): Query<MonthQuery>) -> ApiResult<Response> {
    let month = q.month.map(|m| m.parse::<YearMonth>()).transpose()?;
    let snap = app.snapshot();
    let house = snap.state.house(&house_id(h)?)?;
    Ok(Json(house.purchases_in(month)).into_response())
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ThresholdQuery {
    price: i64,
    #[serde(default)]
    free_form: bool,
}

/// Upvotes a purchase at `price` would need, so clients never recompute it.
pub async fn purchase_threshold(
    State(app): State<Shared>,
    Path(h): Path<String>,
    Query(q): Query<ThresholdQuery>,
) -> ApiResult<Response> {
    let snap = app.snapshot();
    let house = snap.state.house(&house_id(h)?)?;
    if q.price <= 0 {
        return Err(EngineError::NonPositivePrice.into());
    }
    let t = &house.config.things;
    let min = min_upvotes_for_price(Cents(q.price), t.step(), t.free_form_surcharge, q.free_form);
    let mut out = BTreeMap::new();
    out.insert("minUpvotes", min);
    Ok(Json(out).into_response())
}

pub async fn ledger_csv(State(app): State<Shared>, Path(h): Path<String>) -> ApiResult<Response> {
    let snap = app.snapshot();
    let csv = snap.state.house(&house_id(h)?)?.things.ledger_csv();
    Ok(([(header::CONTENT_TYPE, "text/csv")], csv).into_response())
}
