pub mod alignment;
pub mod bayes;
pub mod cli;
pub mod correspondence;
pub mod error;
pub mod geometry;
pub mod icp;
pub mod io;
pub mod report;
pub mod slam;
