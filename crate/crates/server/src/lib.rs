//! HTTP/JSON front end for the control layer.
//!
//! | Method | Path | Body | Reply |
//! |---|---|---|---|
//! | GET | `/health` | | `Health` |
//! | POST | `/v1/score` | `ScoreRequest` | `QualityReport` |
//! | POST | `/v1/perturb` | `PerturbRequest` | `Correction` |
//! | POST | `/v1/terminate` | `TerminateRequest` | `TermDecision` |
//! | POST | `/v1/bank/record` | `RecordRequest` | `BankSummary` |
//! | GET | `/v1/bank` | | `BankSummary` |
//! | DELETE | `/v1/bank` | | `BankSummary` |
//! | GET | `/v1/bank/export` | | `BankFile` |
//! | POST | `/v1/bank/import` | `BankFile` | `BankSummary` |
//! | POST | `/v1/bank/inspect` | `BankFile` | `BankSummary` |
//! | POST | `/v1/campaigns` | `CampaignRequest` | `CampaignResponse` |
//! | POST | `/v1/ablations` | `AblationRequest` | `AblationResponse` |
//! | POST | `/v1/sweeps` | `SweepRequest` | `SweepResponse` |
//!
//! Failures reply with an `ErrorBody`: status 400 for bad input, 500 for
//! runtime faults. Campaign-scale work runs on the blocking pool.

pub mod ops;

use std::net::SocketAddr;

use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use sct_core::api::{
    AblationRequest, AblationResponse, BankFile, BankSummary, CampaignRequest, CampaignResponse, ErrorBody, ErrorKind,
    Health, PerturbRequest, RecordRequest, ScoreRequest, SweepRequest, SweepResponse, TerminateRequest,
};
use sct_core::perturb::Correction;
use sct_core::quality::QualityReport;
use sct_core::termination::TermDecision;
use tokio::net::TcpListener;
use tokio::task::JoinHandle;

pub use ops::AppState;

/// Store files for a full bank run to tens of megabytes.
const BODY_LIMIT: usize = 1 << 30;

pub struct ApiError(ErrorBody);

impl From<sct_core::Error> for ApiError {
    fn from(e: sct_core::Error) -> Self {
        ApiError(ErrorBody::from(&e))
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError(ErrorBody {
            kind: ErrorKind::BadRequest,
            message: r.body_text(),
        })
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self.0.kind {
            ErrorKind::Config | ErrorKind::Validation | ErrorKind::Parse | ErrorKind::BadRequest => {
                StatusCode::BAD_REQUEST
            }
            ErrorKind::Numeric | ErrorKind::Env | ErrorKind::Io | ErrorKind::Internal => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        (status, Json(self.0)).into_response()
    }
}

type Reply<T> = Result<Json<T>, ApiError>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> sct_core::Result<T> + Send + 'static) -> Reply<T> {
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => Ok(Json(r?)),
        Err(e) => Err(ApiError(ErrorBody {
            kind: ErrorKind::Internal,
            message: format!("worker failed: {e}"),
        })),
    }
}

async fn health() -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

async fn score(State(s): State<AppState>, body: Result<Json<ScoreRequest>, JsonRejection>) -> Reply<QualityReport> {
    let Json(req) = body?;
    Ok(Json(ops::score(&s, &req)?))
}

async fn perturb(State(s): State<AppState>, body: Result<Json<PerturbRequest>, JsonRejection>) -> Reply<Correction> {
    let Json(req) = body?;
    Ok(Json(ops::perturb(&s, req)?))
}

async fn terminate(
    State(s): State<AppState>,
    body: Result<Json<TerminateRequest>, JsonRejection>,
) -> Reply<TermDecision> {
    let Json(req) = body?;
    Ok(Json(ops::terminate(&s, req)?))
}

async fn record(State(s): State<AppState>, body: Result<Json<RecordRequest>, JsonRejection>) -> Reply<BankSummary> {
    let Json(req) = body?;
    Ok(Json(ops::record(&s, req)?))
}

async fn bank_summary(State(s): State<AppState>) -> Json<BankSummary> {
    Json(s.store.read(ops::summary))
}

async fn bank_clear(State(s): State<AppState>) -> Json<BankSummary> {
    Json(ops::clear(&s))
}

async fn bank_export(State(s): State<AppState>) -> Reply<BankFile> {
    blocking(move || ops::export(&s).map(|contents| BankFile { contents })).await
}

async fn bank_import(State(s): State<AppState>, body: Result<Json<BankFile>, JsonRejection>) -> Reply<BankSummary> {
    let Json(file) = body?;
    blocking(move || ops::import(&s, &file.contents)).await
}

async fn bank_inspect(State(s): State<AppState>, body: Result<Json<BankFile>, JsonRejection>) -> Reply<BankSummary> {
    let Json(file) = body?;
    blocking(move || ops::inspect(&s, &file.contents)).await
}

async fn campaigns(body: Result<Json<CampaignRequest>, JsonRejection>) -> Reply<CampaignResponse> {
    let Json(req) = body?;
    blocking(move || ops::campaign(&req)).await
}

async fn ablations(body: Result<Json<AblationRequest>, JsonRejection>) -> Reply<AblationResponse> {
    let Json(req) = body?;
    blocking(move || ops::ablation(&req)).await
}

async fn sweeps(body: Result<Json<SweepRequest>, JsonRejection>) -> Reply<SweepResponse> {
    let Json(req) = body?;
    blocking(move || ops::sweep(&req)).await
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/v1/score", post(score))
        .route("/v1/perturb", post(perturb))
        .route("/v1/terminate", post(terminate))
        .route("/v1/bank", get(bank_summary).delete(bank_clear))
        .route("/v1/bank/record", post(record))
        .route("/v1/bank/export", get(bank_export))
        .route("/v1/bank/import", post(bank_import))
        .route("/v1/bank/inspect", post(bank_inspect))
        .route("/v1/campaigns", post(campaigns))
        .route("/v1/ablations", post(ablations))
        .route("/v1/sweeps", post(sweeps))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

/// Binds `addr` and serves in a background task. Returns the bound address,
/// which differs from `addr` when its port is 0.
pub async fn spawn(addr: SocketAddr, state: AppState) -> std::io::Result<(SocketAddr, JoinHandle<std::io::Result<()>>)> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    Ok((local, tokio::spawn(serve(listener, state))))
}
