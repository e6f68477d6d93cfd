//! Placeholder while the simulator is assembled.
