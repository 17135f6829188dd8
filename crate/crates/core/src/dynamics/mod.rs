//! Test systems, trajectory generation, and trajectory files.

mod integrate;
mod io;
mod systems;
mod trajectory;

pub use integrate::{
    default_spinup, generate, initial_state, integrate_states, integrate_trajectory,
    integrate_trajectory_with, IntegratorSettings, DESK_L63_SPINUP, FULL_L63_SPINUP,
};
pub use io::{load_trajectory, save_trajectory, sidecar_path, TrajectoryMeta};
pub use systems::{
    fayad_density, fayad_velocity, l63_velocity, observe, rotation_state, wrap_angle,
    L63Params, ObservationMap, State, SystemKind, SystemSpec, DEFAULT_K_MAX,
};
pub use trajectory::{ObservedTrajectory, Origin};
