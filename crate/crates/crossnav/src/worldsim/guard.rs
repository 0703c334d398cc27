//! Supervision access guard.
//!
//! Self-imitation must learn from instructions alone: no demonstration
//! paths, no target locations. Code paths that promise this wrap
//! themselves in [`without_supervision`]; any read of an episode's target
//! or demonstration inside such a scope panics. The guard is per thread
//! and re-entrant.

use std::cell::Cell;

thread_local! {
    static DEPTH: Cell<u32> = const { Cell::new(0) };
}

/// True while the current thread is inside a [`without_supervision`] scope.
pub fn supervision_blocked() -> bool {
    DEPTH.with(|d| d.get() > 0)
}

/// Panic if supervision data is being read inside a guarded scope.
pub(crate) fn check_supervision_access(what: &str) {
    if supervision_blocked() {
        panic!("{what} accessed inside a self-supervised scope");
    }
}

struct ScopeGuard;

impl Drop for ScopeGuard {
    fn drop(&mut self) {
        DEPTH.with(|d| d.set(d.get() - 1));
    }
}

/// Run `f` with supervision reads blocked on this thread.
pub fn without_supervision<T>(f: impl FnOnce() -> T) -> T {
    DEPTH.with(|d| d.set(d.get() + 1));
    let _guard = ScopeGuard;
    f()
}
