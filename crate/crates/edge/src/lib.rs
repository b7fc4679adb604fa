//! Edge service for sphere-sampled lighting estimation: sessions,
//! estimation positions with accumulated observations, and the HTTP
//! protocol that carries striped packets in and SH payloads out.

pub mod clients;
pub mod http;
pub mod positions;
pub mod store;

pub use clients::{HttpEdge, InProcessEdge};
pub use http::{router, serve, BackgroundServer};
pub use positions::fan_out_positions;
pub use store::{SessionDescriptor, SessionStore, SUPPORTED_ANCHOR_COUNTS};
