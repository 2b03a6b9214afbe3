//! Numerical library for the Moyal-deformed free scalar field: exact
//! twisted-kernel algebra, Lorentz orbit geometry of noncommutativity
//! parameters, wedge regions, quadrature-based Wightman functionals and the
//! deformed two-particle S-matrix.

pub mod freefield;
pub mod geometry;
pub mod identities;
pub mod moyal;
pub mod testfn;
pub mod locality;
pub mod minkowski;
pub mod quad;
pub mod scattering;

pub use freefield::{fock_oracle, inner_product_theta, two_point, vacuum_functional, wick_pairings, FockLattice, FreeFieldError, MassShellMeasure, Pairing};
pub use identities::{identity_suite, limit_sweep, oracle_comparison, orbit_suite, IdentitySuiteReport, LimitRow, OracleRow, OrbitReport};
pub use scattering::{covariance_break_demo, deformed_s_matrix_element, wedge_ordering_check, SMatrixInput, SMatrixModel, ScatteringError};
pub use geometry::{
    lambda_theta, recover_orbit_params, reference_theta, theta_bilinear, GeometryError,
    LorentzFactor, LorentzProduct, NoncommMatrix, OrbitParams, ThetaSpec, Wedge,
};
pub use moyal::{mixed_associativity_gap, star_diagonal, MoyalError, QuadSpec, TensorPoly, TwistFunction, TwistedTensor};
pub use testfn::{function_from_specs, BumpPacket, GaussianPacket, PacketSpec, Space, SupportBox, SupportFlag, TestFnError, TestFunction};
pub use locality::{spectator_matrix_element, support_check_experiment, two_particle_commutator_kernel, wedge_locality_experiment, LocalityConfig, LocalityError, LocalityReport, SupportReport, Verdict};
pub use minkowski::{minkowski_product, FourVector, LorentzTransform, MinkowskiError};
