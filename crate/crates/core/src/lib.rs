pub mod assignment;
pub mod bytetrack;
pub mod geometry;
pub mod io;
pub mod kalman;
pub mod metrics;
pub mod pipeline;
pub mod sweep;
pub mod synth;
