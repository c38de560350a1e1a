//! Per-thread counters of work done at finite element dimension.
//!
//! Online evaluations must never touch arrays sized by the mesh. Every
//! sparse solve and every loop over mesh entities bumps these counters so
//! tests can assert that an online call left them unchanged.

use std::cell::Cell;

thread_local! {
    static SOLVES: Cell<u64> = const { Cell::new(0) };
    static FIELD_OPS: Cell<u64> = const { Cell::new(0) };
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    /// Sparse linear solves on the finite element system.
    pub full_solves: u64,
    /// Passes over nodes, DOFs or elements of the mesh.
    pub full_field_ops: u64,
}

impl Counters {
    pub fn since(self, earlier: Counters) -> Counters {
        Counters {
            full_solves: self.full_solves - earlier.full_solves,
            full_field_ops: self.full_field_ops - earlier.full_field_ops,
        }
    }
}

pub fn snapshot() -> Counters {
    Counters {
        full_solves: SOLVES.with(Cell::get),
        full_field_ops: FIELD_OPS.with(Cell::get),
    }
}

pub(crate) fn record_solve() {
    SOLVES.with(|c| c.set(c.get() + 1));
}

pub(crate) fn record_field_op() {
    FIELD_OPS.with(|c| c.set(c.get() + 1));
}
