//! Embedded manifolds, quadrature meshes with graph geodesics, and the
//! curvature quantities that feed the bound evaluators.

mod curvature;
mod manifold;
mod mesh;

pub use curvature::{
    bishop_gromov_check, diameter_empirical, kato_constant, kato_radius, kato_radius_ln4,
    model_volume, ricci_field, summarize, BishopGromov, GeometrySummary, K_FLOOR,
};
pub use manifold::{Axis, ManifoldKind, ParamManifold};
pub use mesh::{
    build_mesh, build_mesh_with_k, build_quadrature, read_geodesic_bin, ManifoldMesh, DEFAULT_K,
    DENSE_GEODESIC_LIMIT, MIN_RESOLUTION,
};
