//! Service side of the pictorial chart authoring tool: project persistence,
//! the four generation flows, layer compositing and the HTTP API.

pub mod api;
pub mod composite;
pub mod error;
pub mod flows;
pub mod model;
pub mod service;
pub mod store;

pub use error::ServiceError;
pub use service::Service;
