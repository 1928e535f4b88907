//! Welfare-maximizing cache storage contracts for small-cell networks.
//!
//! A mobile network operator sells SBS cache storage to content providers
//! whose traffic loads are private. Storage is allocated to maximize social
//! welfare and every CP pays the welfare loss it imposes on the others, which
//! makes truthful declaration a dominant strategy.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod allocation;
pub mod catalog;
pub mod error;
pub mod mechanism;
pub mod model;
pub mod welfare;

pub use allocation::{
    brute_force_allocation, standalone_request, swap_deferred_acceptance, AllocationOutcome,
    Method, StorageGrid,
};
pub use catalog::{
    cp_demand, placement_from_allocation, zipf_popularity, CachePlacement, Demand, FileCatalog,
};
pub use error::{Error, Result};
pub use mechanism::{
    design_contracts, equal_split_report, storage_cost, vcg_price, verify_budget_balance,
    verify_ic, verify_ir, verify_price_monotonicity, ContractBundle, CpTypeVector, Design,
    DesignCache, ProfileSet, Solver, TypeGrid, WelfareReport,
};
pub use model::{Matrix, NetworkTopology, PowerMap, UserRecord};
pub use welfare::{social_welfare, CpSet, Evaluation, Scenario, WelfareModel};
