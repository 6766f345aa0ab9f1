//! Finite-stage constructions of dense and free pairs of partial automorphisms
//! on countable ultrahomogeneous partial orders.
//!
//! The library works with four structures:
//!
//! * `bn` — an antichain of `n` copies of the rational line (comparable only
//!   within a row);
//! * `bomega` — the same with countably many rows;
//! * `cn` — a chain of antichains (points compare by level alone), with `n`
//!   or countably many columns;
//! * `generic` — a growing finite fragment of the generic countable poset,
//!   extended through existentially closed one-point extensions.
//!
//! Every construction is deterministic: all "choose any rational in a gap"
//! steps go through [`order::pick_between`], fresh rows and fresh elements are
//! least-available, and the resulting extension traces replay bit-exactly.
//! [`density`] packages the constructions into JSON certificates together with
//! an independent verifier that replays and revalidates everything.

pub mod bn;
pub mod bomega;
pub mod cn;
pub mod density;
pub mod generic;
pub mod instances;
pub mod order;
pub mod qchain;
pub mod sym;
pub mod words;
