//! Core of the nOP processor-design toolkit.
//!
//! Instruction semantics are written as small nOP functions, compiled to
//! dataflow graphs, fused into custom functional units under a timing model,
//! and executed by an ISA-level and a cycle-level out-of-order simulator. A
//! design-space search tunes processor parameters against a cycle x area cost.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! network transports live in the `nanoop` crate.

#![no_std]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod bitvec;
pub mod dfg;
pub mod dse;
pub mod dsl;
pub mod isa;
pub mod llm;
pub mod nop;
pub mod ppa;
pub mod progen;
pub mod rtl;
pub mod state;
pub mod timing;
pub mod uarch;
pub mod verify;

pub use bitvec::BitVec;
pub use nop::{Category, NopKind};
pub use state::{Effect, MachineState, StateDelta};
