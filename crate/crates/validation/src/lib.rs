//! Acceptance suite for `roughwalk`. The criteria live in
//! `tests/acceptance.rs`; run them with
//! `cargo test -p roughwalk-validation --test acceptance`.
