use super::{Confusion, OracleSpec};

/// Named teacher tiers: `(name, zero-shot accuracy)`. The `desk-*` tiers are
/// the default synthetic suite; the rest are named teacher profiles.
pub const PRESETS: &[(&str, f64)] = &[
    ("desk-high", 0.95),
    ("desk-mid", 0.60),
    ("desk-low", 0.35),
    ("gpt4o-yahoo", 0.6881),
    ("llama3.3-70b-yahoo", 0.6915),
    ("flan-t5-xxl-yahoo", 0.6662),
    ("flan-t5-xl-yahoo", 0.6397),
    ("flan-t5-large-yahoo", 0.6133),
    ("flan-t5-base-yahoo", 0.5517),
    ("flan-t5-small-yahoo", 0.2944),
];

/// Build an oracle spec from a preset name.
///
/// Desk tiers carry a 2% fallback to class 0 and systematic (adjacent-class)
/// misses; the other tiers have no fallback so their simulated
/// zero-shot accuracy lands on the named value.
pub fn preset(name: &str, num_classes: usize, seed: u64) -> Option<OracleSpec> {
    let &(_, accuracy) = PRESETS.iter().find(|(n, _)| *n == name)?;
    let desk = name.starts_with("desk-");
    Some(OracleSpec {
        name: name.to_string(),
        confusion: if desk { Confusion::AdjacentClass } else { Confusion::UniformWrong },
        fallback_rate: if desk { 0.02 } else { 0.0 },
        ..OracleSpec::new(num_classes, accuracy, seed)
    })
}
