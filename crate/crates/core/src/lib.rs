//! Robot "mind" telemetry: a deterministic 2D robot, its perception and
//! planning stack, and a JSON/WebSocket topic bridge that streams every
//! internal data product to viewers as visualization markers.

pub mod bridge;
pub mod geometry;
pub mod perception;
pub mod planning;
pub mod scenario;
pub mod session_log;
pub mod viz;
pub mod world;

pub use geometry::{normalize_angle, Pose2D, Twist};
