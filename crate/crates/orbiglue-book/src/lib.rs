//! Runs the code in the guide under `book/src` as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/weights.md")]
pub mod weights {}
#[doc = include_str!("../../../book/src/trees.md")]
pub mod trees {}
#[doc = include_str!("../../../book/src/lambda.md")]
pub mod lambda {}
#[doc = include_str!("../../../book/src/radial.md")]
pub mod radial {}
#[doc = include_str!("../../../book/src/gluing.md")]
pub mod gluing {}
#[doc = include_str!("../../../book/src/green.md")]
pub mod green {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../book/src/limitations.md")]
pub mod limitations {}
