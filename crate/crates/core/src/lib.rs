//! Room equalisation by adding band-shaped energy to the reverberant sound
//! field through supporting loudspeakers, leaving the primary loudspeakers'
//! direct sound untouched.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerical
//! pipeline: signal containers, a complex gammatone analysis/synthesis
//! filterbank, the sloped target, RIR averaging and balancing, the per-band
//! fill-gain solver, the all-pass decorrelator, the renderer for the four
//! playback conditions and a coherent playback simulation. File formats and
//! the command line live in the `roomfill` crate.
#![no_std]
// `!(x > y)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod buffer;
pub mod convolve;
pub mod decorrelator;
pub mod error;
pub mod fft;
pub mod fixtures;
pub mod gammatone;
pub mod render;
pub mod rir;
pub mod solver;
pub mod target;
pub mod verify;

mod math;

pub use buffer::{delay, delay_samples, energy, AudioBuffer, ImpulseResponse};
pub use convolve::convolve;
pub use decorrelator::{design_decorrelator, DecorrelatorFilter};
pub use error::{Error, Result};
pub use gammatone::{erb, Filterbank, FilterbankSpec};
pub use render::{EqualisationDesign, RenderMode, RenderSettings, Renderer};
pub use rir::{average_pair, balance_levels, Channel, RirSet, Side};
pub use solver::{AnchorMode, BandGainSet, SolverConfig};
pub use target::TargetFunction;
pub use verify::{simulate_total, VerificationReport};
