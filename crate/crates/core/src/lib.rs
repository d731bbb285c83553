pub mod catalog;
pub mod config;
pub mod feed;
pub mod geo;
pub mod metrics;
pub mod panorama;
pub mod raster;
pub mod seed;
pub mod stylize;
