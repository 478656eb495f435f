pub mod client;
pub mod eid;
pub mod fido;
pub mod fixtures;
pub mod flow;
pub mod mediator;
pub mod nizk;
pub mod primitives;
pub mod wire;
