//! HTTP+JSON surface. Every error uses the envelope
//! `{"error": <MachineName>, "detail": <text>, "height": <n>}`.

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rentchain_core::chain::BlockHeader;
use rentchain_core::store::BlockExport;
use rentchain_core::{Address, Hash32, LicenseRecord, RentalAgreement, Transaction, Vehicle};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::CorsLayer;

use crate::engine::{Rejection, Snapshot};
use crate::service::NodeHandle;

pub fn router(handle: NodeHandle) -> Router {
    Router::new()
        .route("/tx", post(submit_tx))
        .route("/tx/{txid}", get(get_tx))
        .route("/mine", post(mine))
        .route("/chain", get(get_chain))
        .route("/block/{hash}", get(get_block))
        .route("/state/accounts/{address}", get(get_account))
        .route("/state/vehicles", get(list_vehicles))
        .route("/state/vehicles/{id}", get(get_vehicle))
        .route("/state/licenses", get(list_licenses))
        .route("/state/agreements/{vehicle_id}", get(get_agreement))
        .route("/state/day", get(get_day))
        .route("/state/contract", get(get_contract))
        // browser clients are served from elsewhere; the API holds no cookies
        .layer(CorsLayer::permissive())
        .with_state(handle)
}

#[derive(Debug, Serialize)]
pub struct ErrorEnvelope {
    pub error: String,
    pub detail: String,
    pub height: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amount: Option<u64>,
}

pub struct ApiError {
    status: StatusCode,
    body: ErrorEnvelope,
}

impl ApiError {
    fn new(status: StatusCode, error: &str, detail: impl Into<String>, height: u64) -> Self {
        ApiError {
            status,
            body: ErrorEnvelope {
                error: error.to_owned(),
                detail: detail.into(),
                height,
                amount: None,
            },
        }
    }

    fn not_found(what: impl Into<String>, snap: &Snapshot) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NotFound", what, snap.height)
    }

    fn parse(detail: impl Into<String>, height: u64) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "ParseError", detail, height)
    }

    fn rejected(r: Rejection, height: u64) -> Self {
        let status = match r.error.as_str() {
            "StorageError" | "Unavailable" => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError {
            status,
            body: ErrorEnvelope {
                error: r.error,
                detail: r.detail,
                height,
                amount: r.amount,
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

async fn submit_tx(State(node): State<NodeHandle>, body: String) -> ApiResult<serde_json::Value> {
    let tx: Transaction =
        serde_json::from_str(&body).map_err(|e| ApiError::parse(e.to_string(), node.snapshot().height))?;
    match node.submit(tx).await {
        Ok(ok) => Ok(Json(json!({
            "txid": ok.txid,
            "block_height": ok.block_height,
            "height": node.snapshot().height,
        }))),
        Err(r) => Err(ApiError::rejected(r, node.snapshot().height)),
    }
}

async fn mine(State(node): State<NodeHandle>) -> ApiResult<crate::engine::BlockSummary> {
    node.mine()
        .await
        .map(Json)
        .map_err(|r| ApiError::rejected(r, node.snapshot().height))
}

async fn get_tx(State(node): State<NodeHandle>, Path(txid): Path<String>) -> ApiResult<serde_json::Value> {
    let snap = node.snapshot();
    let txid: Hash32 = txid
        .parse()
        .map_err(|_| ApiError::parse("txid must be 64 hex characters", snap.height))?;
    if let Some(h) = snap.tx_index.get(&txid) {
        let block = &snap.blocks[*h as usize];
        return Ok(Json(json!({
            "txid": txid,
            "status": "included",
            "block_height": h,
            "block_hash": block.hash(),
            "height": snap.height,
        })));
    }
    if snap.pending_txids.contains(&txid) {
        return Ok(Json(
            json!({ "txid": txid, "status": "pending", "height": snap.height }),
        ));
    }
    Err(ApiError::not_found(format!("transaction {txid}"), &snap))
}

#[derive(Debug, Deserialize)]
struct ChainQuery {
    #[serde(default)]
    from: u64,
}

#[derive(Debug, Serialize)]
struct HeaderView<'a> {
    hash: Hash32,
    #[serde(flatten)]
    header: &'a BlockHeader,
    tx_count: usize,
}

async fn get_chain(State(node): State<NodeHandle>, Query(q): Query<ChainQuery>) -> Response {
    let snap = node.snapshot();
    let headers: Vec<_> = snap
        .blocks
        .iter()
        .skip(usize::try_from(q.from).unwrap_or(usize::MAX))
        .map(|b| HeaderView {
            hash: b.hash(),
            header: &b.header,
            tx_count: b.transactions.len(),
        })
        .collect();
    Json(json!({ "height": snap.height, "headers": headers })).into_response()
}

async fn get_block(State(node): State<NodeHandle>, Path(hash): Path<String>) -> Response {
    let snap = node.snapshot();
    let Ok(hash) = hash.parse::<Hash32>() else {
        return ApiError::parse("block hash must be 64 hex characters", snap.height).into_response();
    };
    match snap.block_by_hash(&hash) {
        Some(block) => Json(json!({ "height": snap.height, "block": BlockExport::new(block) })).into_response(),
        None => ApiError::not_found(format!("block {hash}"), &snap).into_response(),
    }
}

async fn get_account(State(node): State<NodeHandle>, Path(address): Path<String>) -> ApiResult<serde_json::Value> {
    let snap = node.snapshot();
    let addr: Address = address
        .parse()
        .map_err(|e: rentchain_core::crypto::CryptoError| ApiError::parse(e.to_string(), snap.height))?;
    let Some(acct) = snap.state.accounts.get(&addr) else {
        return Err(ApiError::not_found(format!("account {addr}"), &snap));
    };
    let pending_nonce = snap
        .pending_nonces
        .get(&addr)
        .copied()
        .unwrap_or(acct.nonce)
        .max(acct.nonce);
    Ok(Json(json!({
        "address": addr,
        "balance": acct.balance,
        "nonce": acct.nonce,
        "pending_nonce": pending_nonce,
        "height": snap.height,
    })))
}

#[derive(Debug, Serialize)]
struct VehicleView<'a> {
    #[serde(flatten)]
    vehicle: &'a Vehicle,
    client: Option<Address>,
}

fn vehicle_view<'a>(snap: &'a Snapshot, v: &'a Vehicle) -> VehicleView<'a> {
    VehicleView {
        vehicle: v,
        client: snap.state.contract.agreements.get(&v.vehicle_id).map(|a| a.client),
    }
}

async fn list_vehicles(State(node): State<NodeHandle>) -> Response {
    let snap = node.snapshot();
    let vehicles: Vec<_> = snap
        .state
        .contract
        .fleet
        .values()
        .map(|v| vehicle_view(&snap, v))
        .collect();
    Json(json!({ "height": snap.height, "vehicles": vehicles })).into_response()
}

async fn get_vehicle(State(node): State<NodeHandle>, Path(id): Path<String>) -> Response {
    let snap = node.snapshot();
    match snap.state.contract.fleet.get(&id) {
        Some(v) => {
            let mut body = serde_json::to_value(vehicle_view(&snap, v)).expect("serializable");
            body["height"] = json!(snap.height);
            Json(body).into_response()
        }
        None => ApiError::not_found(format!("vehicle {id}"), &snap).into_response(),
    }
}

async fn list_licenses(State(node): State<NodeHandle>) -> Response {
    let snap = node.snapshot();
    let licenses: Vec<&LicenseRecord> = snap.state.contract.licenses.values().collect();
    Json(json!({ "height": snap.height, "licenses": licenses })).into_response()
}

async fn get_agreement(State(node): State<NodeHandle>, Path(id): Path<String>) -> Response {
    let snap = node.snapshot();
    let contract = &snap.state.contract;
    let agreement: Option<&RentalAgreement> = contract.agreements.get(&id);
    match agreement {
        Some(a) => {
            let daily_price = contract.fleet.get(&id).map(|v| v.daily_price);
            let mut body = serde_json::to_value(a).expect("serializable");
            body["daily_price"] = json!(daily_price);
            body["height"] = json!(snap.height);
            Json(body).into_response()
        }
        None => ApiError::not_found(format!("agreement for vehicle {id}"), &snap).into_response(),
    }
}

async fn get_day(State(node): State<NodeHandle>) -> Response {
    let snap = node.snapshot();
    Json(json!({ "height": snap.height, "current_day": snap.state.contract.current_day })).into_response()
}

/// Full contract snapshot: licenses, fleet, agreements and the day counter.
async fn get_contract(State(node): State<NodeHandle>) -> Response {
    let snap: Arc<Snapshot> = node.snapshot();
    let c = &snap.state.contract;
    Json(json!({
        "height": snap.height,
        "licenses": c.licenses.values().collect::<Vec<_>>(),
        "fleet": c.fleet.values().collect::<Vec<_>>(),
        "agreements": c.agreements.values().collect::<Vec<_>>(),
        "current_day": c.current_day,
        "escrow_address": c.escrow_address,
        "admin": c.admin,
        "fleet_owner": c.fleet_owner,
        "surcharge_fee": c.surcharge_fee,
    }))
    .into_response()
}
