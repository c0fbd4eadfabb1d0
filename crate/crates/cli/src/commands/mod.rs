pub mod analyze;
pub mod curate;
pub mod degrade;
pub mod eval;
pub mod moe;
pub mod split;
