//! Domain-adaptation data toolkit for machine translation.
//!
//! The crate covers the data side of adapting a generic MT model to a
//! specialised domain with language-model generated text:
//!
//! - [`corpus`]: bitext I/O, manifests, seeded dev/test splits
//! - [`filters`]: rule-based, semantic and global corpus filtering
//! - [`subword`]: unigram subword segmentation and vocabulary export
//! - [`services`]: generation / translation / embedding clients and mocks
//! - [`augment`]: prompt-based generation, cleanup, back- and forward-translation
//! - [`mixer`]: generic sampling and oversampled mixed fine-tuning streams
//! - [`metrics`]: BLEU, spBLEU, chrF++ and TER
//! - [`ckpt`]: tensor archives and checkpoint averaging
//! - [`humeval`]: blind 1–4 human rating sessions and aggregation
//! - [`pipeline`]: the two end-to-end setups
//! - [`cli`]: command-line front end

pub mod augment;
pub mod ckpt;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod filters;
pub mod humeval;
pub mod metrics;
pub mod mixer;
pub mod pipeline;
pub mod rng;
pub mod services;
pub mod subword;

pub use error::{Error, Result};

/// Version string embedded in metric signatures and manifests.
pub const VERSION: &str = concat!("domainsmith-", env!("CARGO_PKG_VERSION"));
