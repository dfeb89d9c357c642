//! Parsing, interval semantics and bounded reachability analysis for
//! Hybrid Rebeca models of cyber-physical systems.

pub mod frontend;
pub mod interval;
pub mod semantics;
pub mod flowpipe;
pub mod reach;
pub mod ha;
