//! A finite-field exponential-sum laboratory.
//!
//! Builds Gauss, Kloosterman, Evans and Rudnick sums over `F_q`, evaluates their
//! multiplicative Fourier transforms over all characters at once, and measures
//! how the resulting families distribute against Haar, Sato-Tate and semicircle
//! laws.

pub mod characters;
pub mod equidist;
pub mod ffield;
pub mod formats;
pub mod haar;
pub mod kernels;
pub mod mellin;
pub mod ramification;
pub mod sum;

pub use characters::{AdditiveCharacter, MultiplicativeCharacter};
pub use ffield::{Field, FieldElement, FieldError, FieldSpec, LogTable};
pub use kernels::{KernelError, KernelMeta, KernelName, KernelPath, KernelSpec, TraceFunction};
pub use mellin::{MellinSpectrum, Provenance};
pub use equidist::{EquidistReport, ReferenceMeasure};
pub use haar::GroupSpec;
pub use ramification::{DimensionReport, RamificationProfile};
