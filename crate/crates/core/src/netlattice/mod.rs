//! δ-nets of ℝⁿ, their embeddings into `M`, the ε-lattice and the two
//! rounding maps: ν (to the net) and Γ (to the lattice).

mod embedding;
mod lattice;
mod net;

pub use embedding::{
    distortion_audit, AuditReport, AuditRow, EmbeddedNet, Embedding, NearestImage, Rounded,
};
pub use lattice::{gamma, gamma_checked, Cube, GammaResult, Lattice, LatticeIndex};
pub use net::{BoundingBox, Net, NetId, NetPoint};
