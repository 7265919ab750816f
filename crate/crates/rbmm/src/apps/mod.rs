//! The stylized applications: a quadratic demo, geodesic subspace tracking,
//! optimistic likelihood, CP decomposition and robust PCA.

pub mod cp;
pub mod likelihood;
pub mod quadratic;
pub mod rpca;
pub mod subspace;
