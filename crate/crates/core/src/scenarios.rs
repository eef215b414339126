//! Reference scenarios shipped with the library, addressable by name.

use crate::config::{load_scenario, ConfigError, Scenario};

const BUNDLED: [(&str, &str); 8] = [
    ("experiment1", include_str!("../scenarios/experiment1.cfg")),
    ("experiment2", include_str!("../scenarios/experiment2.cfg")),
    ("experiment3", include_str!("../scenarios/experiment3.cfg")),
    ("experiment4", include_str!("../scenarios/experiment4.cfg")),
    ("experiment5_1", include_str!("../scenarios/experiment5_1.cfg")),
    ("experiment5_2", include_str!("../scenarios/experiment5_2.cfg")),
    ("experiment6", include_str!("../scenarios/experiment6.cfg")),
    ("experiment7", include_str!("../scenarios/experiment7.cfg")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

/// Config text of a bundled scenario; a trailing `.cfg` is accepted.
pub fn source(name: &str) -> Option<&'static str> {
    let key = name.strip_suffix(".cfg").unwrap_or(name);
    BUNDLED.iter().find(|(n, _)| *n == key).map(|(_, text)| *text)
}

pub fn bundled(name: &str, seed: Option<u64>) -> Option<Result<Scenario, ConfigError>> {
    source(name).map(|text| load_scenario(text, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_bundled_scenario_validates() {
        for n in names() {
            let s = bundled(n, None).unwrap().unwrap_or_else(|e| panic!("{n}: {e}"));
            assert_eq!(s.name, n);
            assert!(!s.phases.is_empty());
        }
    }

    #[test]
    fn lookup_accepts_extension() {
        assert!(source("experiment7.cfg").is_some());
        assert!(source("experiment9").is_none());
    }
}
