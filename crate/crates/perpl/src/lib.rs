//! A compiler and exact-inference engine for a probabilistic programming
//! language with linear types and recursive datatypes.
//!
//! Pipeline: parse and desugar the surface language into a small core
//! calculus; typecheck it under a dual-context (classical globals, linear
//! locals) discipline; insert explicit discards to make the program strictly
//! linear; eliminate recursive types by defunctionalization and
//! refunctionalization, scheduled greedily over the DR-graph; compile the
//! recursion-free result into a monotone system of polynomial equations; and
//! solve that system for its least fixed point over [0, oo]. A depth-bounded
//! exhaustive interpreter serves as an independent semantic oracle.

pub mod ast;
pub mod core;
pub mod desugar;
pub mod diag;
pub mod domain;
pub mod dr;
pub mod lexer;
pub mod linearize;
pub mod mspe;
pub mod oracle;
pub mod parser;
pub mod pipeline;
pub mod pretty;
pub mod solver;
pub mod typecheck;
