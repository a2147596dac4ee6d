//! Paths, level-2 lifts and Chen's relation.

mod io;
mod lift;
mod path;

pub use io::{read_path_csv, write_jump_csv, write_lift_csv, write_sampled_csv, AnyPath};
pub use lift::{
    chen_defect, chen_reconstruct, interpolation_gap, ito_lift_jump, ito_lift_sampled, strato_lift_linear, BaseKind,
    Level2Lift, LiftKind,
};
pub use path::{DiffusiveRescale, Interpretation, JumpPath, SampledPath};
