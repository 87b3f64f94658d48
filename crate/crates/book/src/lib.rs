#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/applications.md")]
pub mod applications {}

#[doc = include_str!("../../../book/src/deployment.md")]
pub mod deployment {}

#[doc = include_str!("../../../book/src/platforms.md")]
pub mod platforms {}

#[doc = include_str!("../../../book/src/load.md")]
pub mod load {}

#[doc = include_str!("../../../book/src/tracing.md")]
pub mod tracing {}

#[doc = include_str!("../../../book/src/analysis.md")]
pub mod analysis {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
