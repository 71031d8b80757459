pub mod allometry;
pub mod cloud;
pub mod registration;
pub mod metrics;
pub mod regression;
pub mod terrain;
pub mod pipeline;
