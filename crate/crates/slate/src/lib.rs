//! Allocation algorithms and truthful mechanisms for ad slates whose slots
//! live in a metric space and suppress each other's value by proximity.
//!
//! The crate covers two discount models. Under the nearest-neighbor discount
//! (distance to the closest other occupied slot) it provides a constant-factor
//! LP rounding pipeline ([`nnlp`]), near-linear-time algorithms for factorized
//! valuations ([`factorized`]), and a near-optimal scheme for unit-value
//! advertisers in the plane ([`ptas`]). Under the product-distance discount it
//! provides the single-slot baseline and an executable reduction from maximum
//! independent set showing why nothing much better exists ([`proddist`]).
//! Brute-force solvers certify each guarantee on small inputs ([`oracle`]),
//! and Myerson-style payment tooling makes the monotone rules truthful
//! ([`mechanism`]).
//!
//! A narrative guide with runnable examples lives in `book/`; its code blocks
//! compile and run as part of `cargo test`.

pub mod factorized;
pub mod harness;
pub mod lp;
pub mod mechanism;
pub mod model;
pub mod nnlp;
pub mod oracle;
pub mod proddist;
pub mod ptas;

pub use model::{
    discount, nn_discount, pd_discount, social_welfare, validate_metric, DiscountModel,
    FactorizedInstance, Instance, Matching, Metric, Point,
};

// The book's code samples double as doc-tests so the guide cannot drift from
// the library.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            #[allow(dead_code)]
            struct $name;
        };
    }

    chapter!(Model, "../../../book/src/model.md");
    chapter!(Oracles, "../../../book/src/oracles.md");
    chapter!(NearestNeighborLp, "../../../book/src/nearest-neighbor-lp.md");
    chapter!(Factorized, "../../../book/src/factorized.md");
    chapter!(Ptas, "../../../book/src/ptas.md");
    chapter!(ProductDistance, "../../../book/src/product-distance.md");
    chapter!(Mechanisms, "../../../book/src/mechanisms.md");
}
