use std::path::Path;

use super::layout::{parse_layout_named, Layout, LayoutError};

/// Layout files compiled into the binary, by name.
pub const BUILTIN_LAYOUTS: &[(&str, &str)] = &[
    (
        "asymmetric_advantages",
        include_str!("../../layouts/asymmetric_advantages.layout"),
    ),
    (
        "coordination_ring",
        include_str!("../../layouts/coordination_ring.layout"),
    ),
    (
        "counter_circuit",
        include_str!("../../layouts/counter_circuit.layout"),
    ),
    (
        "distant_tomato",
        include_str!("../../layouts/distant_tomato.layout"),
    ),
    (
        "many_orders",
        include_str!("../../layouts/many_orders.layout"),
    ),
    (
        "distant_tomato_mini",
        include_str!("../../layouts/distant_tomato_mini.layout"),
    ),
];

/// The five full-size kitchens.
pub const STANDARD_LAYOUTS: [&str; 5] = [
    "asymmetric_advantages",
    "coordination_ring",
    "counter_circuit",
    "distant_tomato",
    "many_orders",
];

pub fn builtin_layout(name: &str) -> Option<Layout> {
    BUILTIN_LAYOUTS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(n, text)| parse_layout_named(text, n).expect("builtin layouts are valid"))
}

/// Resolves a builtin name first, then a file path.
pub fn resolve_layout(name_or_path: &str) -> Result<Layout, LayoutError> {
    if let Some(l) = builtin_layout(name_or_path) {
        return Ok(l);
    }
    Layout::load(Path::new(name_or_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_builtins_parse() {
        for (name, text) in BUILTIN_LAYOUTS {
            let l = parse_layout_named(text, name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(l.name, *name);
        }
    }
}
