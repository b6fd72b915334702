//! Small cases shipped with the crate.

use crate::network::{parse_case, Network};

pub const CASE3: &str = include_str!("../cases/case3.m");
pub const CASE6: &str = include_str!("../cases/case6.m");

/// `(name, text)` of every bundled case.
pub fn bundled() -> [(&'static str, &'static str); 2] {
    [("case3", CASE3), ("case6", CASE6)]
}

pub fn case3() -> Network {
    parse_case(CASE3).expect("bundled case parses")
}

pub fn case6() -> Network {
    parse_case(CASE6).expect("bundled case parses")
}
