//! Simulator for a two-stage resource reservation market over time slots.
//!
//! Stage A partitions the available servers of each rack into coalitions
//! driven by feedback from past auctions; every coalition then agrees on a
//! unit price through a single-decree consensus round among its members.
//! Stage B is a clock-proxy combinatorial auction: per-service, per-slot
//! clocks discover prices, and a multi-round proxy phase sells runs of
//! consecutive slots that clients assemble into reservation packages.
//!
//! The [`harness`] module ties the stages together, samples scenarios from
//! configurable uniform ranges, and produces batched effectiveness metrics.

pub mod auction;
pub mod coalition;
pub mod consensus;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod simnet;
