//! Doctest harness for the book: each chapter is included as rustdoc so
//! `cargo test --doc` runs every code snippet in `book/src/`.
