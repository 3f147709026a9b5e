//! Weak Gibbs measures on subshifts of finite type.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod markov_maps;
pub mod measures;
pub mod multifractal;
pub mod numeric;
pub mod potentials;
pub mod pressure;
pub mod psi;
pub mod sft;

pub use error::{Error, Result};
pub use measures::{CylinderMeasure, MarkovMeasure, RpfGibbs, TabulatedMeasure, Verdict, WeakGibbsCertificate};
pub use potentials::{
    AdditiveSequence, CallbackSequence, ExplicitSequence, LocallyConstantPotential, PotentialSequence, SamplePolicy,
    SequenceKind,
};
pub use sft::{SymbolicPoint, TransitionSystem, Word};
pub use pressure::{PressureEstimate, PressureInput, PressureMethod};
pub use markov_maps::{CylinderInterval, ExpandingMarkovMap, MapClass};
pub use psi::{build_psi, PsiSequence};
