pub mod bench;
pub mod circuit;
pub mod noise;
pub mod synth;
pub mod tables;
