pub mod bench;
pub mod features;
pub mod geometry;
pub mod grid;
pub mod kde;
pub mod metrics;
pub mod pipeline;
pub mod scheduler;
