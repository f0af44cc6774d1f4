//! Test hook for corrupting individual backward rules, used to prove that the
//! gradient checker actually detects broken derivatives.

use std::cell::Cell;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Drops the mean-of-`dx̂·x̂` term from the layer-norm input gradient.
    LayerNormBackward,
}

thread_local! {
    static ACTIVE: Cell<Option<Fault>> = const { Cell::new(None) };
}

/// Runs `f` with `fault` active on the current thread only.
pub fn with_fault<R>(fault: Fault, f: impl FnOnce() -> R) -> R {
    struct Reset(Option<Fault>);
    impl Drop for Reset {
        fn drop(&mut self) {
            ACTIVE.with(|a| a.set(self.0));
        }
    }
    let _reset = Reset(ACTIVE.with(|a| a.replace(Some(fault))));
    f()
}

pub(crate) fn active(fault: Fault) -> bool {
    ACTIVE.with(|a| a.get() == Some(fault))
}
