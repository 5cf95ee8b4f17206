//! Built-in experiment files, one per weighted or variable-exponent
//! specialization of the commutator and boundedness results.

pub struct Preset {
    pub name: &'static str,
    pub anchor: &'static str,
    pub text: &'static str,
}

macro_rules! preset {
    ($name:literal, $anchor:literal) => {
        Preset { name: $name, anchor: $anchor, text: include_str!(concat!("../presets/", $name, ".toml")) }
    };
}

pub const PRESETS: &[Preset] = &[
    preset!("weighted-rough-commutator", "BMO necessity for rough bilinear commutators on power-weighted Morrey spaces"),
    preset!("linear-weighted-commutator", "BMO necessity for a linear singular commutator on a weighted Morrey space"),
    preset!("weighted-fractional-commutator", "BMO necessity for bilinear fractional commutators on two-weight Morrey spaces"),
    preset!("riesz-commutator", "BMO necessity for the Riesz potential commutator on two-weight Morrey spaces"),
    preset!("variable-rough-commutator", "BMO necessity for rough bilinear commutators on variable-exponent Morrey spaces"),
    preset!("variable-fractional-commutator", "BMO necessity for bilinear fractional commutators on variable-exponent Morrey spaces"),
    preset!("variable-rough-boundedness", "boundedness of the extended rough bilinear operator on variable-exponent Morrey spaces"),
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub fn listing() -> String {
    let width = PRESETS.iter().map(|p| p.name.len()).max().unwrap_or(0);
    PRESETS.iter().map(|p| format!("{:<width$}  {}\n", p.name, p.anchor)).collect()
}
