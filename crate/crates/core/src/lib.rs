//! Safe path following for a feedback-linearized car-like robot.
//!
//! A governor moves a virtual target along a planned path only as fast as a
//! certified peak bound on the tracking error allows, so the robot keeps a
//! margin to every obstacle under a bounded disturbance. See the guide in
//! `book/` for a walkthrough.

pub mod bounds;
pub mod error;
pub mod governor;
pub mod linearization;
pub mod numkit;
pub mod sim;
pub mod world;

pub use error::{Error, Result};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/bounds.md")]
mod book_bounds {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/linearization.md")]
mod book_linearization {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/world.md")]
mod book_world {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/governor.md")]
mod book_governor {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/simulation.md")]
mod book_simulation {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
