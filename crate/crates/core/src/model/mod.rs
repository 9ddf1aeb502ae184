//! Hierarchical model: fuel tree, region nesting, parameter state and densities.

mod assemble;
mod coords;
mod density;
mod hierarchy;
mod observation;
mod regions;
mod state;

pub use assemble::Model;
pub use density::SlotParams;
pub use hierarchy::{default_tiers, FuelHierarchy, Tier, TierSpec};
pub use observation::{transfer, CountObservation, LatentGroup};
pub use regions::RegionMap;
pub use state::{BlockId, ModelState, Priors, SeriesHyper, UrbanHyper};
