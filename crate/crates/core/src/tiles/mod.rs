//! Tile coupling between the kNN graph and site percolation on `Z^2`.

pub mod geometry;
pub mod coupling;
pub mod lattice;

pub use geometry::{lens_geometry, lens_stats, region_membership, Direction, LensGeometry, RegionId};
pub use lattice::{evaluate_tiles, lattice_clusters, lattice_path, LatticeClusters, TileCoord, TileLattice, TileParams, TileState};
pub use coupling::{estimate_c_tiles, mimic_along, mimic_path, rep_point_density, verify_coupling, CouplingReport, MimicOutcome, MimicPath, RepPair, Witness};
