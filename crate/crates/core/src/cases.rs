//! Bundled IEEE test cases in the MATPOWER-style text subset.

/// IEEE 14-bus case text (100 MVA base, 259 MW / 73.5 MVAr total demand).
pub fn ieee14_text() -> &'static str {
    include_str!("../cases/ieee14.m")
}

/// IEEE 30-bus case text (100 MVA base, 283.4 MW / 126.2 MVAr total demand).
pub fn ieee30_text() -> &'static str {
    include_str!("../cases/ieee30.m")
}

/// Case text for a builtin name, if known (`ieee14` or `ieee30`).
pub fn builtin(name: &str) -> Option<&'static str> {
    match name {
        "ieee14" => Some(ieee14_text()),
        "ieee30" => Some(ieee30_text()),
        _ => None,
    }
}

/// Published candidate bus sets for the bundled cases, used by the harness to
/// flag ranking discrepancies.
pub fn published_candidates(case_name: &str) -> Option<&'static [usize]> {
    match case_name {
        "ieee14" => Some(&[2, 8, 9, 10]),
        "ieee30" => Some(&[2, 6, 7]),
        _ => None,
    }
}
