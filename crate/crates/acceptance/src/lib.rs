//! Holds the `acceptance` test target, which reports one PASS/FAIL line per
//! acceptance criterion. Run it with `cargo test -p decorr-acceptance`.
