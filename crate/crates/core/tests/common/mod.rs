#![allow(dead_code)]

use std::path::PathBuf;

use gapfill::export::NamedPath;
use gapfill::geo::GeoPoint;

pub fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("golden")
        .join(name)
}

fn gp(lat: f64, lon: f64) -> GeoPoint {
    GeoPoint { lat, lon }
}

/// Three short paths around a gap: the true track, a fused reconstruction
/// and a straight chord. Includes a name that needs XML escaping.
pub fn three_path_fixture() -> Vec<NamedPath> {
    vec![
        NamedPath::new(
            "truth",
            "truth",
            vec![
                gp(30.52, 114.31),
                gp(30.5201, 114.3103),
                gp(30.5204, 114.3104),
                gp(30.5208, 114.3104),
            ],
        ),
        NamedPath::new(
            "fused <gap 1>",
            "bi_rnn_nalu",
            vec![
                gp(30.52, 114.31),
                gp(30.52012, 114.31028),
                gp(30.52043, 114.31042),
                gp(30.5208, 114.3104),
            ],
        ),
        NamedPath::new(
            "chord & co",
            "linear",
            vec![gp(30.52, 114.31), gp(30.5208, 114.3104)],
        ),
    ]
}
