//! Regenerate the bundled parity-check matrix.
//!
//! `cargo run -p turbo-ra --example gen_ldpc > crates/core/assets/ldpc_3_6_300_v1.alist`

use turbo_ra::coding::ldpc::LdpcCode;
use turbo_ra::coding::peg::{peg_regular, DEFAULT_PEG_SEED};

fn main() {
    let h = peg_regular(300, 3, 6, DEFAULT_PEG_SEED).expect("profile is feasible");
    assert!(h.has_girth_at_least_6());
    LdpcCode::new(h.clone()).expect("full rank");
    print!("{}", h.to_alist());
}
