//! The local client service: answers the browser shim's proof requests on
//! localhost by running the client algorithms against a chip and a
//! mediator.

use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::State;
use axum::routing::post;
use axum::{Json, Router};
use fidoac::client::{
    ChipAccess, Client, EidCache, LocalProofRequest, LocalProofResponse, DEFAULT_LOCAL_PORT, LOCAL_PORT_ENV,
    LOCAL_PROOF_PATH,
};
use fidoac::eid::{password_for, ChipState};
use fidoac::fido::ac_challenge;
use fidoac::mediator::Mediator;
use fidoac::primitives::HashProfile;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::{ApiError, AppState};

struct Inner {
    chip: ChipState,
    client: Client,
    mediator: Mediator,
    rng: ChaCha20Rng,
}

/// One holder's device: chip, client app and a reachable mediator.
#[derive(Clone)]
pub struct LocalService {
    inner: Arc<Mutex<Inner>>,
    crs: AppState,
    profile: HashProfile,
    tau: u32,
}

impl LocalService {
    pub fn new(chip: ChipState, mediator: Mediator, crs: AppState, tau: u32, seed: u64) -> Self {
        let profile = chip.profile();
        let inner =
            Inner { chip, client: Client::new(EidCache::disabled()), mediator, rng: ChaCha20Rng::seed_from_u64(seed) };
        LocalService { inner: Arc::new(Mutex::new(inner)), crs, profile, tau }
    }

    /// Runs attestation and proof for one request.
    pub fn prove(&self, req: &LocalProofRequest) -> Result<LocalProofResponse, ApiError> {
        req.policy.check()?;
        let crs = self.crs.crs(&req.policy, self.profile, self.tau)?;
        let c = ac_challenge(&req.origin, &req.challenge);
        let mut guard = self.inner.lock().map_err(|_| ApiError::Internal)?;
        let Inner { chip, client, mediator, rng } = &mut *guard;
        let password = password_for(chip.attributes());
        let mut access = ChipAccess::new(chip, password);
        let (proof, cert) =
            client.obtain_proof(&mut access, mediator, &c, &crs, rng).map_err(|e| ApiError::Body(e.to_string()))?;
        Ok(LocalProofResponse::new(&proof, cert))
    }
}

async fn proof_handler(State(svc): State<LocalService>, body: Bytes) -> Result<Json<LocalProofResponse>, ApiError> {
    let req: LocalProofRequest = serde_json::from_slice(&body).map_err(|e| ApiError::Body(e.to_string()))?;
    let resp = tokio::task::spawn_blocking(move || svc.prove(&req)).await.map_err(|_| ApiError::Internal)??;
    Ok(Json(resp))
}

pub fn router(svc: LocalService) -> Router {
    Router::new().route(LOCAL_PROOF_PATH, post(proof_handler)).with_state(svc)
}

/// Port from the environment, else the default.
pub fn port() -> u16 {
    std::env::var(LOCAL_PORT_ENV).ok().and_then(|p| p.parse().ok()).unwrap_or(DEFAULT_LOCAL_PORT)
}
