//! Fog/cloud placement simulator: decomposes services into linked
//! microservices, places them with canonical or optimized strategies, and
//! accounts data-transformation, learning and data-communication time.

pub mod cost;
pub mod decomposition;
pub mod model;
pub mod optimizer;
pub mod placement;
pub mod report;
pub mod scenario;
