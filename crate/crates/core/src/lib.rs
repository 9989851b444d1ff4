//! Stroboscopic (Floquet-map) dynamics of massless waves in a one-dimensional
//! cavity with a periodically moving mirror or a modulated medium.
//!
//! Units have `c = 1`. The cavity `[0, z(t)]` is unfolded into a one-way ring
//! `[-z(t), z(t))` on which every null line moves with `dx/dt = +1`.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod error;
pub mod field;
pub mod floquet;
pub mod medium;
pub mod moore;
pub mod protocol;
pub(crate) mod quad;
pub mod ray;
pub(crate) mod roots;

pub use error::{CavityError, Result};
pub use field::{
    energy_density, evolve, init_field, total_energy, EnergyReport, FieldProfile, FieldState,
    Interpolation,
};
pub use floquet::{
    inverse, iterate, map_once, map_span, CircleMap, FixedPoint, FixedPointSet, MapStep, Stability,
};
pub use medium::{
    medium_weak_map, trace_characteristic, CharacteristicState, MediumSchedule, Region, StepLaw,
};
pub use moore::{moore_r, MooreValue};
pub use protocol::{DriveProtocol, Segment, SegmentLaw, ValidationReport};
pub use ray::{advance, fly, fly_back, next_mirror_encounter, retreat, trace, Encounter, EventKind, Flight, RayState};
pub use roots::TIME_TOLERANCE;
