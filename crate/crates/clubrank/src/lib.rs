//! Club strength ratings for football leagues.
//!
//! The engine extends Glicko-2 with a three-way (win/draw/loss) expectation,
//! home advantage with a separate pandemic-window constant, league-aware
//! initialization, season-transition drift and post-season mean
//! normalization. Parameters are fitted by minimizing three-class log loss
//! over a chronological replay of the match history.

pub mod dataset;
pub mod glicko;
pub mod params;
pub mod replay;
pub mod reports;
pub mod season;
pub mod synth;
pub mod trainer;
pub mod skellam;

pub use skellam::{GoalRates, OutcomeProbs};
