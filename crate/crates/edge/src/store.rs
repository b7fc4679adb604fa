//! In-memory session and estimation-position state.
//!
//! Locking: the session map and each session's position list are
//! read-mostly `RwLock`s; every position has its own `Mutex`, so estimates
//! on one position run one at a time in arrival order while different
//! positions proceed concurrently. Decoding and validation happen before
//! any lock is taken, and state is only written after the estimator
//! succeeds, so a failed request never mutates anything.

use std::collections::HashMap;
use std::fs;
use std::ops::RangeInclusive;
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use spherelight::codec;
use spherelight::estimator::{LightingEstimator, ShCoefficients, ShProjector};
use spherelight::sampling::UnitSphereCloud;
use spherelight::sphere::AnchorSet;
use spherelight::{Error, PacketError, Result, Vec3};

pub const SUPPORTED_ANCHOR_COUNTS: RangeInclusive<usize> = 512..=4096;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PositionState {
    pub world_position: Vec3,
    pub accumulated: UnitSphereCloud,
    pub last_estimate: Option<ShCoefficients>,
    /// Seconds since the Unix epoch.
    pub updated_at: f64,
}

pub struct Session {
    id: String,
    created_at: f64,
    anchors: Arc<AnchorSet>,
    positions: RwLock<Vec<Arc<Mutex<PositionState>>>>,
}

impl Session {
    pub fn anchor_count(&self) -> usize {
        self.anchors.len()
    }

    fn position(&self, position_id: u32) -> Result<Arc<Mutex<PositionState>>> {
        self.positions
            .read()
            .expect("position list poisoned")
            .get(position_id as usize)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("position {position_id} in session {}", self.id)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionInfo {
    pub position_id: u32,
    pub world_position: [f64; 3],
    pub initialized: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDescriptor {
    pub session_id: String,
    pub anchor_count: usize,
    pub created_at: f64,
    pub positions: Vec<PositionInfo>,
}

pub struct SessionStore {
    sessions: RwLock<HashMap<String, Arc<Session>>>,
    anchor_cache: Mutex<HashMap<usize, Arc<AnchorSet>>>,
    supported: RangeInclusive<usize>,
    estimator: Arc<dyn LightingEstimator>,
}

impl Default for SessionStore {
    fn default() -> Self {
        Self::new(Arc::new(ShProjector), SUPPORTED_ANCHOR_COUNTS)
    }
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn new_session_id() -> String {
    format!("{:032x}", rand::random::<u128>())
}

impl SessionStore {
    pub fn new(estimator: Arc<dyn LightingEstimator>, supported: RangeInclusive<usize>) -> Self {
        Self {
            sessions: RwLock::new(HashMap::new()),
            anchor_cache: Mutex::new(HashMap::new()),
            supported,
            estimator,
        }
    }

    pub fn estimator_name(&self) -> &str {
        self.estimator.name()
    }

    fn anchors(&self, count: usize) -> Result<Arc<AnchorSet>> {
        let mut cache = self.anchor_cache.lock().expect("anchor cache poisoned");
        if let Some(a) = cache.get(&count) {
            return Ok(a.clone());
        }
        let a = Arc::new(AnchorSet::lattice(count)?);
        cache.insert(count, a.clone());
        Ok(a)
    }

    fn session(&self, session_id: &str) -> Result<Arc<Session>> {
        self.sessions
            .read()
            .expect("session map poisoned")
            .get(session_id)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("session {session_id}")))
    }

    pub fn create_session(&self, anchor_count: usize) -> Result<String> {
        if !self.supported.contains(&anchor_count) {
            return Err(Error::InvalidArgument(format!(
                "anchor count {anchor_count} not in supported range {}..={}",
                self.supported.start(),
                self.supported.end()
            )));
        }
        let anchors = self.anchors(anchor_count)?;
        let mut sessions = self.sessions.write().expect("session map poisoned");
        let id = loop {
            let id = new_session_id();
            if !sessions.contains_key(&id) {
                break id;
            }
        };
        sessions.insert(
            id.clone(),
            Arc::new(Session { id: id.clone(), created_at: now(), anchors, positions: RwLock::new(Vec::new()) }),
        );
        Ok(id)
    }

    pub fn join_session(&self, session_id: &str) -> Result<SessionDescriptor> {
        let session = self.session(session_id)?;
        let positions = session.positions.read().expect("position list poisoned").clone();
        let positions = positions
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let p = p.lock().expect("position poisoned");
                PositionInfo {
                    position_id: i as u32,
                    world_position: [p.world_position.x, p.world_position.y, p.world_position.z],
                    initialized: p.accumulated.initialized_count(),
                }
            })
            .collect();
        Ok(SessionDescriptor {
            session_id: session.id.clone(),
            anchor_count: session.anchor_count(),
            created_at: session.created_at,
            positions,
        })
    }

    pub fn register_position(&self, session_id: &str, world_position: Vec3) -> Result<u32> {
        if !world_position.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("position must be finite".into()));
        }
        let session = self.session(session_id)?;
        let mut positions = session.positions.write().expect("position list poisoned");
        let id = u32::try_from(positions.len()).map_err(|_| Error::InvalidArgument("too many positions".into()))?;
        positions.push(Arc::new(Mutex::new(PositionState {
            world_position,
            accumulated: UnitSphereCloud::empty(session.anchor_count()),
            last_estimate: None,
            updated_at: now(),
        })));
        Ok(id)
    }

    /// Decodes `packet`, merges it over the position's accumulated cloud,
    /// estimates lighting from the merged cloud and stores both.
    ///
    /// With `share_observation`, the packet is also merged into every other
    /// position of the session registered at exactly the same world
    /// coordinates.
    pub fn estimate(
        &self,
        session_id: &str,
        position_id: u32,
        packet: &[u8],
        share_observation: bool,
    ) -> Result<ShCoefficients> {
        let session = self.session(session_id)?;
        let slot = session.position(position_id)?;
        let incoming = codec::decode(packet)?;
        if incoming.anchor_count() != session.anchor_count() {
            return Err(PacketError::AnchorCountMismatch {
                packet: incoming.anchor_count() as u16,
                expected: session.anchor_count() as u16,
            }
            .into());
        }

        let (sh, world) = {
            let mut state = slot.lock().expect("position poisoned");
            let mut merged = state.accumulated.clone();
            merged.merge_from(&incoming)?;
            let sh = self.estimator.estimate(&merged, &session.anchors)?;
            state.accumulated = merged;
            state.last_estimate = Some(sh);
            state.updated_at = now();
            (sh, state.world_position)
        };

        if share_observation {
            let others = session.positions.read().expect("position list poisoned").clone();
            for (i, other) in others.iter().enumerate() {
                if i == position_id as usize {
                    continue;
                }
                let mut state = other.lock().expect("position poisoned");
                if state.world_position == world {
                    state.accumulated.merge_from(&incoming)?;
                    state.updated_at = now();
                }
            }
        }
        Ok(sh)
    }

    /// Accumulated cloud of one position.
    pub fn accumulated(&self, session_id: &str, position_id: u32) -> Result<UnitSphereCloud> {
        let slot = self.session(session_id)?.position(position_id)?;
        let state = slot.lock().expect("position poisoned");
        Ok(state.accumulated.clone())
    }

    pub fn snapshot(&self) -> StoreSnapshot {
        let sessions = self.sessions.read().expect("session map poisoned");
        let mut out: Vec<SessionSnapshot> = sessions
            .values()
            .map(|s| SessionSnapshot {
                session_id: s.id.clone(),
                created_at: s.created_at,
                anchor_count: s.anchor_count(),
                positions: s
                    .positions
                    .read()
                    .expect("position list poisoned")
                    .iter()
                    .map(|p| p.lock().expect("position poisoned").clone())
                    .collect(),
            })
            .collect();
        out.sort_by(|a, b| a.session_id.cmp(&b.session_id));
        StoreSnapshot { sessions: out }
    }

    pub fn save_snapshot(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec(&self.snapshot())
            .map_err(|e| Error::InvalidArgument(format!("snapshot serialization: {e}")))?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn restore(&self, snapshot: StoreSnapshot) -> Result<()> {
        let mut sessions = self.sessions.write().expect("session map poisoned");
        for s in snapshot.sessions {
            let anchors = self.anchors(s.anchor_count)?;
            if s.positions.iter().any(|p| p.accumulated.anchor_count() != s.anchor_count) {
                return Err(Error::InvalidArgument(format!("snapshot of session {} is inconsistent", s.session_id)));
            }
            let positions = s.positions.into_iter().map(|p| Arc::new(Mutex::new(p))).collect();
            sessions.insert(
                s.session_id.clone(),
                Arc::new(Session {
                    id: s.session_id,
                    created_at: s.created_at,
                    anchors,
                    positions: RwLock::new(positions),
                }),
            );
        }
        Ok(())
    }

    pub fn load_snapshot(&self, path: &Path) -> Result<()> {
        let bytes = fs::read(path)?;
        let snapshot: StoreSnapshot = serde_json::from_slice(&bytes)
            .map_err(|e| Error::InvalidArgument(format!("snapshot parse: {e}")))?;
        self.restore(snapshot)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub session_id: String,
    pub created_at: f64,
    pub anchor_count: usize,
    pub positions: Vec<PositionState>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StoreSnapshot {
    pub sessions: Vec<SessionSnapshot>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(n: usize, indices: impl IntoIterator<Item = usize>, color: f32) -> UnitSphereCloud {
        let mut c = UnitSphereCloud::empty(n);
        for i in indices {
            c.set(i, [color; 3], 1.0);
        }
        c
    }

    #[test]
    fn session_lifecycle() {
        let store = SessionStore::default();
        let a = store.create_session(1280).unwrap();
        let b = store.create_session(1280).unwrap();
        assert_ne!(a, b);
        assert_eq!(a.len(), 32);
        assert!(matches!(store.create_session(7), Err(Error::InvalidArgument(_))));
        let d = store.join_session(&a).unwrap();
        assert_eq!((d.anchor_count, d.positions.len()), (1280, 0));
        assert_eq!(store.join_session(&a).unwrap(), d);
        assert!(matches!(store.join_session("nope"), Err(Error::NotFound(_))));
    }

    #[test]
    fn positions_are_per_session() {
        let store = SessionStore::default();
        let a = store.create_session(1280).unwrap();
        let b = store.create_session(1280).unwrap();
        let p = Vec3::new(1.0, 0.0, 2.0);
        let p0 = store.register_position(&a, p).unwrap();
        let p1 = store.register_position(&a, p).unwrap();
        assert_ne!(p0, p1);
        assert_eq!(store.accumulated(&a, p0).unwrap().initialized_count(), 0);
        assert!(matches!(store.accumulated(&b, p0), Err(Error::NotFound(_))));
        assert!(matches!(store.register_position("nope", p), Err(Error::NotFound(_))));
    }

    #[test]
    fn accumulation_and_estimate() {
        let store = SessionStore::default();
        let s = store.create_session(1280).unwrap();
        let p = store.register_position(&s, Vec3::zeros()).unwrap();
        let first = codec::encode(&cloud(1280, 0..100, 0.5)).unwrap();
        store.estimate(&s, p, &first, false).unwrap();
        assert_eq!(store.accumulated(&s, p).unwrap().initialized_count(), 100);
        let second = codec::encode(&cloud(1280, 50..180, 0.5)).unwrap();
        store.estimate(&s, p, &second, false).unwrap();
        assert_eq!(store.accumulated(&s, p).unwrap().initialized_count(), 180);

        let white = codec::encode(&cloud(1280, 0..1280, 1.0)).unwrap();
        let sh = store.estimate(&s, p, &white, false).unwrap();
        for c in 0..3 {
            assert!((sh.get(c, 0) - 3.5449).abs() < 0.02);
        }
        let again = store.estimate(&s, p, &white, false).unwrap();
        assert_eq!(sh, again);
    }

    #[test]
    fn failed_requests_do_not_mutate() {
        let store = SessionStore::default();
        let s = store.create_session(1280).unwrap();
        let p = store.register_position(&s, Vec3::zeros()).unwrap();
        let good = codec::encode(&cloud(1280, 0..10, 0.5)).unwrap();
        store.estimate(&s, p, &good, false).unwrap();
        let before = store.accumulated(&s, p).unwrap();

        let mut bad = codec::encode(&cloud(1280, 10..20, 0.9)).unwrap();
        bad.pop();
        assert!(matches!(store.estimate(&s, p, &bad, false), Err(Error::MalformedPacket(_))));
        let wrong_size = codec::encode(&cloud(512, 0..10, 0.9)).unwrap();
        assert!(matches!(
            store.estimate(&s, p, &wrong_size, false),
            Err(Error::MalformedPacket(PacketError::AnchorCountMismatch { .. }))
        ));
        assert!(matches!(store.estimate(&s, 99, &good, false), Err(Error::NotFound(_))));
        assert_eq!(store.accumulated(&s, p).unwrap(), before);

        let empty_pos = store.register_position(&s, Vec3::zeros()).unwrap();
        let nothing = codec::encode(&UnitSphereCloud::empty(1280)).unwrap();
        assert!(matches!(store.estimate(&s, empty_pos, &nothing, false), Err(Error::InsufficientObservation)));
    }

    #[test]
    fn sharing_reaches_only_coincident_positions() {
        let store = SessionStore::default();
        let s = store.create_session(1280).unwrap();
        let here = Vec3::new(1.0, 1.0, 1.0);
        let a = store.register_position(&s, here).unwrap();
        let b = store.register_position(&s, here).unwrap();
        let c = store.register_position(&s, Vec3::new(2.0, 1.0, 1.0)).unwrap();
        let pkt = codec::encode(&cloud(1280, 0..40, 0.5)).unwrap();
        store.estimate(&s, a, &pkt, false).unwrap();
        assert_eq!(store.accumulated(&s, b).unwrap().initialized_count(), 0);
        store.estimate(&s, a, &pkt, true).unwrap();
        assert_eq!(store.accumulated(&s, b).unwrap().initialized_count(), 40);
        assert_eq!(store.accumulated(&s, c).unwrap().initialized_count(), 0);
    }

    #[test]
    fn snapshot_round_trip() {
        let store = SessionStore::default();
        let s = store.create_session(512).unwrap();
        let p = store.register_position(&s, Vec3::new(0.5, 0.5, 0.5)).unwrap();
        store.estimate(&s, p, &codec::encode(&cloud(512, 0..64, 0.25)).unwrap(), false).unwrap();
        let dir = std::env::temp_dir().join(format!("spherelight-snapshot-{}", std::process::id()));
        store.save_snapshot(&dir).unwrap();
        let restored = SessionStore::default();
        restored.load_snapshot(&dir).unwrap();
        let _ = fs::remove_file(&dir);
        assert_eq!(restored.join_session(&s).unwrap(), store.join_session(&s).unwrap());
        assert_eq!(restored.accumulated(&s, p).unwrap(), store.accumulated(&s, p).unwrap());
    }
}
