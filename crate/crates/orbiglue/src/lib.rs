//! Weighted projective singularities, their weighted blow-up resolutions,
//! and numerical checks of gluing ALE scalar-flat metrics into orbifolds.
//!
//! The crate has two halves. [`weights`] and [`restree`] are exact: they
//! classify weight vectors, build resolution trees and compute the rational
//! constant in the scalar-curvature expansion of a blow-up. [`radial`],
//! [`gluing`] and [`green`] are numerical: U(k)-invariant Kähler metrics, the
//! glued family on a flat model, and the Green's function integrals.
//!
//! ```
//! use orbiglue::restree::build_tree;
//! use orbiglue::weights::WeightVector;
//!
//! let v: WeightVector = "(-5,3,2,1)".parse().unwrap();
//! let tree = build_tree(&v, 64).unwrap();
//! assert!(tree.is_type_i);
//! assert_eq!(tree.node_count, 4);
//! ```

pub mod gluing;
pub mod green;
pub mod jet;
pub mod linalg;
pub mod ode;
pub mod quad;
pub mod radial;
pub mod restree;
pub mod weights;
