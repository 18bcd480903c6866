//! Coverage path planning simulator: worlds, sensing, belief maps,
//! observations, motion, rewards, map generation, classical planners and the
//! benchmark harness.

pub mod belief;
pub mod bench;
pub mod dynamics;
pub mod episode;
pub mod grid;
pub mod lidar;
pub mod mapgen;
pub mod planners;
pub mod obsbuilder;
pub mod reward;
pub mod worldmodel;
