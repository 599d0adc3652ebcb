//! Generator matrices for digital nets, built column by column so that a
//! profile of net and stratification constraints holds for every prefix.

pub mod builder;
pub mod cli;
pub mod gfield;
pub mod gfsolve;
pub mod netcons;
pub mod profile;
pub mod quality;
pub mod sampler;
pub mod verify;

pub use gfield::{Digit, FieldError, GFMatrix, PrimeBase};
pub use profile::{parse_profile, NetConstraint, Profile, ProfileError};
