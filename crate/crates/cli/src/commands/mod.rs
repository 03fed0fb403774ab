pub mod common;
pub mod inflation;
pub mod replay;
pub mod scenario;
pub mod split;
pub mod synth;
pub mod value;
