//! Scenario engine for ethanol-blend transportation decarbonization.
//!
//! The pieces compose bottom-up: [`series`] holds year-indexed data, the model
//! modules ([`forecast`], [`adoption`], [`carbon`], [`feedstock`],
//! [`economics`]) are pure functions over their parameter types, [`engine`]
//! runs a [`scenario::Scenario`] year by year and [`uncertainty`] wraps the
//! engine in a seeded Monte Carlo.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adoption;
pub mod carbon;
pub mod economics;
pub mod engine;
pub mod feedstock;
pub mod forecast;
pub mod optim;
pub mod pathway;
pub mod scenario;
pub mod series;
pub mod uncertainty;
