pub mod cli;
pub mod homi;
pub mod qmath;
pub mod sampling;
pub mod source;
pub mod spectral;
pub mod tomo;
