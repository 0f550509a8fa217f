//! Worst-case terminal bounds for polynomial and piecewise-polynomial
//! closed-loop systems via moment relaxations of occupation-measure LPs.
//!
//! The pipeline is: build a [`dynamics::PiecewiseSystem`] (for the F-16
//! short-period model see [`f16mrac`]), relax it with [`relax::build`], solve
//! with [`sdp::solve`] and compare against the Monte-Carlo baseline in [`mc`].

pub mod cli;
pub mod dynamics;
pub mod f16mrac;
pub mod mc;
pub mod poly;
pub mod relax;
pub mod sdp;
