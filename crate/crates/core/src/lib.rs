//! Multi-layered social networks from hierarchical activity data.
//!
//! Users act on objects arranged in a hierarchy (forum, topic, post, ...).
//! The crate moves those activities onto a single chosen level, either up to
//! the parent or down to every child, and derives one user-to-user layer
//! per pair of roles, with relationship strengths counted over shared
//! objects.
//!
//! ```
//! use mlsn::flatten::{flatten, role_inventory, Naming};
//! use mlsn::model::Level;
//! use mlsn::synth::case_study_fixture;
//!
//! let net = case_study_fixture();
//! let flat = flatten(&net, Level::TOP).unwrap();
//! let roles = role_inventory(&flat, &Naming::Initials).unwrap();
//! assert!(roles.contains("PTF Is Author"));
//! ```

pub mod flatten;
pub mod ingest;
pub mod layers;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod synth;

pub use flatten::{flatten, Naming};
pub use layers::{build_sn, LayerKey, LayerSelection, RoleIndex, SnModel, SocialNetwork};
pub use model::{Activity, Level, LevelSchema, PreSocialNetwork};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/hierarchy.md")]
    mod hierarchy {}
    #[doc = include_str!("../../../book/src/flattening.md")]
    mod flattening {}
    #[doc = include_str!("../../../book/src/layers.md")]
    mod layers {}
    #[doc = include_str!("../../../book/src/time-windows.md")]
    mod time_windows {}
    #[doc = include_str!("../../../book/src/reports.md")]
    mod reports {}
    #[doc = include_str!("../../../book/src/input-formats.md")]
    mod input_formats {}
}
