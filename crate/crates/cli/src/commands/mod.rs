pub mod evaluate;
pub mod stats;
pub mod synth;
pub mod train;
pub mod visactmap;
pub mod visrank;
