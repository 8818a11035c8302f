pub mod eval;
pub mod generate;
pub mod replay;
pub mod serve;
