//! Supervised contrastive learning with hard and soft negatives for judging
//! whether a recorded rehabilitation exercise was performed correctly.
//!
//! A spatial-temporal graph network embeds skeleton sequences; correct
//! executions of each exercise type are pulled together while incorrect
//! executions of the same type (hard negatives) and executions of other types
//! (soft negatives) are pushed away. At inference a sample is scored by cosine
//! similarity to an inverse-variance-weighted reference of its type.

pub mod augment;
pub mod contrastive;
pub mod error;
pub mod evaluation;
pub mod inference;
pub mod model;
pub mod skeleton;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/augmentation.md")]
    mod augmentation {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/loss.md")]
    mod loss {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/inference.md")]
    mod inference {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
