pub mod corr;
pub mod extract;
pub mod fit;
pub mod gen;
pub mod heat_sim;
pub mod models;
pub mod predict;
pub mod report;
pub mod spectrum;
