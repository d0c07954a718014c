//! Holds the `acceptance` test target only; run it with
//! `cargo test -p mcstruct-verification --test acceptance`. Set `MCSTRUCT_ACCEPTANCE=1,4` to run a
//! subset of the criteria and `MCSTRUCT_CORA_DIR` to a directory holding
//! `cora.content` and `cora.cites` for the citation-network criterion.
