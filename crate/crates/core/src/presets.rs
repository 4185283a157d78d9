//! Built-in iterated function systems used throughout tests and the CLI.

use crate::ifs::{IteratedFunctionSystem, SimilarityMap};

/// Unit interval as the attractor of `{x/2, (x+1)/2}`; just-touching, base 2.
pub fn interval() -> IteratedFunctionSystem {
    let maps = vec![
        SimilarityMap::homothety(0.5, &[0.0]).unwrap(),
        SimilarityMap::homothety(0.5, &[0.5]).unwrap(),
    ];
    with_verdict(maps)
}

/// Middle-third Cantor system `{x/3, (x+2)/3}`; disconnected, base 3.
pub fn cantor() -> IteratedFunctionSystem {
    let third = 1.0 / 3.0;
    let maps = vec![
        SimilarityMap::homothety(third, &[0.0]).unwrap(),
        SimilarityMap::homothety(third, &[2.0 * third]).unwrap(),
    ];
    with_verdict(maps)
}

/// Square carpet: the eight ratio-1/3 homotheties of the unit square that
/// skip the central cell; just-touching, base 3.
pub fn carpet() -> IteratedFunctionSystem {
    let third = 1.0 / 3.0;
    let mut maps = Vec::with_capacity(8);
    for a in 0..3 {
        for b in 0..3 {
            if a == 1 && b == 1 {
                continue;
            }
            maps.push(
                SimilarityMap::homothety(third, &[a as f64 * third, b as f64 * third]).unwrap(),
            );
        }
    }
    with_verdict(maps)
}

/// Right-angle gasket: three ratio-1/2 homotheties of the unit square
/// keeping the corner cells at (0,0), (1/2,0) and (0,1/2); just-touching,
/// base 2. The corner variant keeps every copy grid-aligned.
pub fn gasket() -> IteratedFunctionSystem {
    let maps = vec![
        SimilarityMap::homothety(0.5, &[0.0, 0.0]).unwrap(),
        SimilarityMap::homothety(0.5, &[0.5, 0.0]).unwrap(),
        SimilarityMap::homothety(0.5, &[0.0, 0.5]).unwrap(),
    ];
    with_verdict(maps)
}

fn with_verdict(maps: Vec<SimilarityMap>) -> IteratedFunctionSystem {
    let mut ifs = IteratedFunctionSystem::new(maps).expect("preset maps are valid");
    ifs.classify_and_record(2);
    ifs
}

/// Looks a preset up by name and returns it with its natural lattice base.
pub fn by_name(name: &str) -> Option<(IteratedFunctionSystem, u32)> {
    match name {
        "interval" => Some((interval(), 2)),
        "cantor" => Some((cantor(), 3)),
        "carpet" => Some((carpet(), 3)),
        "gasket" => Some((gasket(), 2)),
        _ => None,
    }
}
