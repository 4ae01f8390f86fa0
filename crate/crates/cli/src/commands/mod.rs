pub mod attrs;
pub mod eval;
pub mod generate;
pub mod stats;
pub mod train;
