//! Observer synthesis for Lipschitz-nonlinear systems `ẋ = Ax + G f(Hx)`, `y = Cx`.
//!
//! The observer `ż = Mz + (ML + J)y + NGf(v)`, `v = Hx̂ + K(y − Cx̂)`, `x̂ = z + Ly`
//! with `M = A − LCA − JC` and `N = I − LC` is designed by LMI feasibility, certified by
//! a direct Riccati-inequality check, and co-simulated against the plant.

pub mod linalg;
pub mod lipschitz;
pub mod model;
pub mod sdp;
pub mod sim;
pub mod synth;

pub use lipschitz::{
    estimate_lipschitz, search_generalized_lipschitz, verify_innovation_lipschitz, verify_lipschitz,
    EstimateConfig, GeneralizedLipschitzPair, LipschitzError, LipschitzEstimate, VerifyConfig,
};
pub use model::{
    build_networked_sis, build_sidarthe_v, build_system, check_detectable_pair, LipschitzSystem, ModelError,
    SidartheVParams, SisNetworkParams, StateDomain,
};
pub use sdp::{solve_feasibility, SdpError, SdpProblem, SdpSolution, SolveOptions, SolveStatus};

pub use synth::{
    assemble_lmi_generalized, assemble_lmi_lipschitz, check_ari, design, recover_gains, spectral_abscissa,
    DesignCertificate, DesignMode, DesignOptions, ObserverGains, SynthError,
};
pub use sim::{
    metrics, simulate, simulate_arcak, simulate_luenberger, Metrics, ObserverInit, SimConfig, SimError, Trajectory,
};
