//! [`EdgeClient`] implementations: direct calls into a store, and HTTP.

use std::sync::Arc;
use std::time::Duration;

use spherelight::codec::decode_sh;
use spherelight::estimator::ShCoefficients;
use spherelight::replay::EdgeClient;
use spherelight::{Error, Result, Vec3};

use crate::http::{CreateSession, PositionCreated, RegisterPosition, SessionCreated};
use crate::store::SessionStore;

pub struct InProcessEdge {
    store: Arc<SessionStore>,
    share_observation: bool,
}

impl InProcessEdge {
    pub fn new(store: Arc<SessionStore>) -> Self {
        Self { store, share_observation: false }
    }

    pub fn with_sharing(mut self, share: bool) -> Self {
        self.share_observation = share;
        self
    }

    pub fn store(&self) -> &Arc<SessionStore> {
        &self.store
    }
}

impl EdgeClient for InProcessEdge {
    fn create_session(&mut self, anchor_count: usize) -> Result<String> {
        self.store.create_session(anchor_count)
    }

    fn register_position(&mut self, session_id: &str, world_position: Vec3) -> Result<u32> {
        self.store.register_position(session_id, world_position)
    }

    fn estimate(&mut self, session_id: &str, position_id: u32, packet: &[u8]) -> Result<ShCoefficients> {
        self.store.estimate(session_id, position_id, packet, self.share_observation)
    }
}

/// Blocking HTTP client for the edge protocol.
pub struct HttpEdge {
    base: String,
    agent: ureq::Agent,
    share_observation: bool,
}

fn transport(e: impl std::fmt::Display) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Maps an error response back onto the error kind named in its body.
fn from_response(status: u16, body: &str) -> Error {
    let line = body.lines().next().unwrap_or("").to_string();
    let (kind, detail) = line.split_once(": ").unwrap_or(("", line.as_str()));
    let detail = detail.to_string();
    match kind {
        "invalid-argument" => Error::InvalidArgument(detail),
        "not-found" => Error::NotFound(detail),
        "insufficient-observation" => Error::InsufficientObservation,
        "malformed-packet" => Error::InvalidArgument(format!("server rejected packet: {detail}")),
        _ => transport(format!("HTTP {status}: {line}")),
    }
}

impl HttpEdge {
    pub fn new(base_url: &str) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(30)))
            .build();
        Self { base: base_url.trim_end_matches('/').to_string(), agent: config.into(), share_observation: false }
    }

    pub fn with_sharing(mut self, share: bool) -> Self {
        self.share_observation = share;
        self
    }

    fn check(resp: &mut ureq::http::Response<ureq::Body>) -> Result<()> {
        let status = resp.status().as_u16();
        if (200..300).contains(&status) {
            return Ok(());
        }
        let body = resp.body_mut().read_to_string().unwrap_or_default();
        Err(from_response(status, &body))
    }

    fn post_json<T: serde::Serialize, R: serde::de::DeserializeOwned>(&self, path: &str, body: &T) -> Result<R> {
        let body = serde_json::to_vec(body).map_err(transport)?;
        let mut resp = self
            .agent
            .post(format!("{}{path}", self.base))
            .header("content-type", "application/json")
            .send(&body[..])
            .map_err(transport)?;
        Self::check(&mut resp)?;
        Self::read_json(&mut resp)
    }

    pub fn join_session(&self, session_id: &str) -> Result<crate::store::SessionDescriptor> {
        let mut resp = self.agent.get(format!("{}/sessions/{session_id}", self.base)).call().map_err(transport)?;
        Self::check(&mut resp)?;
        Self::read_json(&mut resp)
    }

    fn read_json<R: serde::de::DeserializeOwned>(resp: &mut ureq::http::Response<ureq::Body>) -> Result<R> {
        let bytes = resp.body_mut().read_to_vec().map_err(transport)?;
        serde_json::from_slice(&bytes).map_err(transport)
    }
}

impl EdgeClient for HttpEdge {
    fn create_session(&mut self, anchor_count: usize) -> Result<String> {
        let r: SessionCreated = self.post_json("/sessions", &CreateSession { anchor_count })?;
        Ok(r.session_id)
    }

    fn register_position(&mut self, session_id: &str, p: Vec3) -> Result<u32> {
        let r: PositionCreated =
            self.post_json(&format!("/sessions/{session_id}/positions"), &RegisterPosition { x: p.x, y: p.y, z: p.z })?;
        Ok(r.position_id)
    }

    fn estimate(&mut self, session_id: &str, position_id: u32, packet: &[u8]) -> Result<ShCoefficients> {
        let mut url = format!("{}/sessions/{session_id}/positions/{position_id}/estimate", self.base);
        if self.share_observation {
            url.push_str("?share=true");
        }
        let mut resp = self
            .agent
            .post(url)
            .header("content-type", "application/octet-stream")
            .send(packet)
            .map_err(transport)?;
        Self::check(&mut resp)?;
        let bytes = resp.body_mut().read_to_vec().map_err(transport)?;
        decode_sh(&bytes)
    }
}
