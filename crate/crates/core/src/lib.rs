//! Clifford systems, centrioles in SO(n), Birkhoff path shortening and a
//! numerical classifier of clutching maps over spheres.
//!
//! Matrices are `nalgebra::DMatrix<f64>`; see [`linalg::Mat`].

pub mod centriole;
pub mod classifier;
pub mod clifford;
pub mod division;
pub mod error;
pub mod linalg;
pub mod liegroup;
pub mod pathflow;

pub use clifford::{
    class_in_ak, class_kind, decompose, direct_sum, irreducible, irreducible_dim, is_extendible,
    restrict, second_irreducible, volume_element, ClassKind, CliffordSystem, Extension,
    IsotypicDecomposition, ModuleClass,
};
pub use centriole::{index_lower_bound, CentrioleContext};
pub use classifier::{
    classify, hopf_clutching, hopf_clutching_padded, linear_to_module, split_report, BundleReport, ClassifyConfig,
};
pub use error::{Error, Result};
pub use liegroup::{det_winding, distance, expm, geodesic_midpoint, logm, skew_spectral, GroupGeodesic, SkewSpectral};
pub use linalg::Mat;
pub use pathflow::{
    birkhoff_sweep, flow_family, normalize_poles, shorten, DiscretePath, FlowConfig, MapFamily, SphereGrid,
};
