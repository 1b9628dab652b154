pub mod domain;
pub mod ncp;
pub mod perf;
pub mod pnni;
pub mod scenario;
pub mod sim;
pub mod topology;
pub mod vnc;
