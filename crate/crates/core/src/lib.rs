pub mod channel;
pub mod config;
pub mod deployment;
pub mod error;
pub mod geometry;
pub mod rng;
pub mod ledger;
pub mod handover;
pub mod ue;
pub mod link;
pub mod kpi;
pub mod engine;
