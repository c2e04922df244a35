//! Symbolic execution of quantum error-correction programs.
//!
//! Programs manipulate a stabilizer state whose generator signs are Boolean
//! expressions over symbols (injected errors, measurement coin flips, decoder
//! outputs). A single symbolic run covers every concrete error pattern at
//! once; correctness of a decoder then reduces to an SMT query per terminal
//! configuration.
//!
//! Module map:
//! - [`pauli`]: bit-packed Pauli strings and Clifford conjugation.
//! - [`expr`]: Boolean/bit-vector expressions, valuations, fresh symbols.
//! - [`tableau`]: the symbolic stabilizer tableau and its concrete twin in [`concrete`].
//! - [`program`]: AST, parser, pretty-printer and validation for the DSL.
//! - [`engine`]: symbolic transition rules, path exploration, concrete runs.
//! - [`smt`]: SMT-LIB emission and an external solver driver.
//! - [`codes`]: code families, decoder generators and the verification driver.
//! - [`sampler`]: compiled measurement samplers and random benchmark circuits.

pub mod pauli;
pub mod expr;
pub mod tableau;
pub mod concrete;
pub mod program;
pub mod engine;
pub mod smt;
pub mod codes;
pub mod sampler;
