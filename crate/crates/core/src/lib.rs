//! Generic sequence-to-sequence beam search over a lexical prefix tree.
//!
//! A [`lexicon::Lexicon`] is compiled into a [`prefix_tree::PrefixTree`];
//! a [`topology::Topology`] decides how labels map onto encoder frames; a
//! [`scorer::Scorer`] supplies per-step label costs; and
//! [`search::Decoder`] runs time-, alignment- or label-synchronous beam
//! search with optional n-gram LM scoring, lookahead and recombination.
//! [`fsa`] builds sentence automata for forced alignment and export.

pub mod cli;
pub mod error;
pub mod fsa;
pub mod lexicon;
pub mod lm;
pub mod parallel;
pub mod prefix_tree;
pub mod scorer;
pub mod search;
pub mod semiring;
pub mod topology;
pub mod wer;

pub use error::{Error, Result};
