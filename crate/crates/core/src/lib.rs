//! Model-based protocol testing.
//!
//! Users declare typed protocol modules and wire them with pipes and call
//! edges. Function bodies are synthesized by a language model, a symbolic
//! harness is emitted around them, the engine's tests are reconstructed
//! into typed values, and the tests are replayed against several real
//! implementations whose disagreements are triaged by majority vote.

pub mod ctext;
pub mod diff;
pub mod graph;
pub mod harness;
pub mod llm;
pub mod manifest;
pub mod pipeline;
pub mod prompt;
pub mod regex;
pub mod state;
pub mod symbex;
pub mod testcase;
pub mod types;

pub use graph::{
    build_graph, synthesize_plan, ArgSpec, DependencyGraph, FunctionModule, NativeModule,
    ProtocolModule, RegexModule, SynthesisPlan,
};
pub use types::{BaseKind, BaseSlot, Field, PathSeg, SemanticType};
