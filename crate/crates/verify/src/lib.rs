//! Home of the `acceptance` test target. It is a separate package so that
//! `cargo test --workspace` runs it after every other suite.
