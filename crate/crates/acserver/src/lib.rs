//! The FIDO-AC server: CRS distribution and verification of attribute
//! proofs over HTTP.
//!
//! `GET /crs?policy=..&profile=..&tau=..` returns the CRS for a policy.
//! `POST /verify` checks a `Π_Att` against a policy, a challenge and a
//! mediator key-attestation certificate. The service keeps no per-request
//! state; CRSs are memoised because they are a pure function of the query.
//!
//! [`local`] is the client-side service the browser shim talks to.

pub mod local;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use fidoac::client::AttributeProof;
use fidoac::fido::{check_ac, TrustAnchors};
use fidoac::mediator::KeyAttestationCert;
use fidoac::nizk::{default_tau, zk_setup, Crs, NizkError, Policy, DEFAULT_SEED};
use fidoac::primitives::HashProfile;
use fidoac::wire;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest repetition count served by `/crs`.
pub const MAX_TAU: u32 = 1024;
/// Request body limit of `/verify`.
pub const BODY_LIMIT: usize = 32 << 20;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("missing query parameter `{0}`")]
    MissingParam(&'static str),
    #[error("unknown hash profile `{0}`")]
    UnknownProfile(String),
    #[error("tau must be between 1 and {MAX_TAU}")]
    BadTau,
    #[error(transparent)]
    Policy(#[from] NizkError),
    #[error("undecodable body: {0}")]
    Body(String),
    #[error("verification task failed")]
    Internal,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self {
            ApiError::Internal => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        (status, Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}

/// Static configuration: trust anchors, hash profile and the repetition
/// count proofs must use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerConfig {
    pub anchors: TrustAnchors,
    pub profile: HashProfile,
    pub tau: u32,
}

impl ServerConfig {
    pub fn new(anchors: TrustAnchors, profile: HashProfile) -> Self {
        ServerConfig { anchors, profile, tau: default_tau(profile) }
    }

    /// Anchors in `key=value` form plus optional `profile` and `tau`.
    pub fn from_config(text: &str) -> Result<Self, String> {
        let anchors = TrustAnchors::from_config(text)?;
        let kv = fidoac::fixtures::parse_kv(text)?;
        let profile = match kv.get("profile") {
            Some(p) => HashProfile::from_tag(p).ok_or_else(|| format!("unknown profile `{p}`"))?,
            None => HashProfile::Default,
        };
        let tau = match kv.get("tau") {
            Some(t) => t.parse().ok().filter(|t| (1..=MAX_TAU).contains(t)).ok_or("tau out of range")?,
            None => default_tau(profile),
        };
        Ok(ServerConfig { anchors, profile, tau })
    }

    pub fn to_config(&self) -> String {
        format!("{}profile={}\ntau={}\n", self.anchors.to_config(), self.profile.tag(), self.tau)
    }
}

type CrsKey = (String, HashProfile, u32);

#[derive(Clone)]
pub struct AppState {
    config: Arc<ServerConfig>,
    crs: Arc<Mutex<HashMap<CrsKey, Arc<Crs>>>>,
}

impl AppState {
    pub fn new(config: ServerConfig) -> Self {
        AppState { config: Arc::new(config), crs: Arc::default() }
    }

    pub fn config(&self) -> &ServerConfig {
        &self.config
    }

    pub fn crs(&self, policy: &Policy, profile: HashProfile, tau: u32) -> Result<Arc<Crs>, NizkError> {
        let key = (policy.to_string(), profile, tau);
        if let Some(c) = self.crs.lock().expect("crs cache").get(&key) {
            return Ok(c.clone());
        }
        let crs = Arc::new(zk_setup(policy, profile, tau, DEFAULT_SEED)?);
        self.crs.lock().expect("crs cache").insert(key, crs.clone());
        Ok(crs)
    }
}

#[derive(Debug, Deserialize)]
pub struct CrsQuery {
    pub policy: Option<String>,
    pub profile: Option<String>,
    pub tau: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrsDocument {
    pub policy: String,
    pub profile: HashProfile,
    pub tau: u32,
    /// Hex digest identifying the CRS.
    pub id: String,
    #[serde(with = "wire::b64")]
    pub crs: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyRequest {
    pub proof: AttributeProof,
    pub policy: Policy,
    #[serde(with = "wire::b64")]
    pub challenge: Vec<u8>,
    pub mediator_cert: KeyAttestationCert,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyResponse {
    pub ok: bool,
    pub reasons: Vec<String>,
}

async fn crs_handler(State(state): State<AppState>, Query(q): Query<CrsQuery>) -> Result<Json<CrsDocument>, ApiError> {
    let policy = Policy::from_canonical(q.policy.as_deref().ok_or(ApiError::MissingParam("policy"))?)?;
    let tag = q.profile.ok_or(ApiError::MissingParam("profile"))?;
    let profile = HashProfile::from_tag(&tag).ok_or(ApiError::UnknownProfile(tag))?;
    let tau: u32 = q.tau.ok_or(ApiError::MissingParam("tau"))?.parse().map_err(|_| ApiError::BadTau)?;
    if !(1..=MAX_TAU).contains(&tau) {
        return Err(ApiError::BadTau);
    }
    let crs = tokio::task::spawn_blocking(move || state.crs(&policy, profile, tau))
        .await
        .map_err(|_| ApiError::Internal)??;
    Ok(Json(CrsDocument {
        policy: crs.policy().to_string(),
        profile,
        tau,
        id: crs.id().to_hex(),
        crs: crs.canonical(),
    }))
}

/// Verification as `/verify` performs it, for callers in the same process.
pub fn verify(state: &AppState, req: &VerifyRequest) -> Result<VerifyResponse, ApiError> {
    req.policy.check()?;
    let cfg = state.config();
    let crs = state.crs(&req.policy, cfg.profile, cfg.tau)?;
    let verdict = check_ac(&req.proof, &req.policy, &req.challenge, &req.mediator_cert, &cfg.anchors, &crs);
    Ok(VerifyResponse { ok: verdict.ok(), reasons: verdict.failed().into_iter().map(str::to_owned).collect() })
}

async fn verify_handler(State(state): State<AppState>, body: Bytes) -> Result<Json<VerifyResponse>, ApiError> {
    let req: VerifyRequest = serde_json::from_slice(&body).map_err(|e| ApiError::Body(e.to_string()))?;
    let resp = tokio::task::spawn_blocking(move || verify(&state, &req)).await.map_err(|_| ApiError::Internal)??;
    Ok(Json(resp))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/crs", get(crs_handler))
        .route("/verify", post(verify_handler))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

/// Serves `app` on `addr` until Ctrl-C.
pub async fn serve(app: Router, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
