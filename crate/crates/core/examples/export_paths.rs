//! Writes a reconstruction and the true track as KML (for Google Earth) and
//! GeoJSON into the system temp directory.

use gapfill::experiment::{gap_to_geo, run_scenario};
use gapfill::export::{export_geojson, export_kml, NamedPath};
use gapfill::recon::{Method, ReconConfig};
use gapfill::simgen::{ScenarioConfig, ScenarioKind};

fn main() -> gapfill::Result<()> {
    let sc = ScenarioConfig::preset(ScenarioKind::RightAngleTurn, 2);
    let mut recon = ReconConfig::default();
    recon.train.epochs = 200;
    let run = run_scenario(&sc, &recon, &[Method::BiRnnNalu, Method::Gpr])?;

    let mut paths = vec![NamedPath::new(
        "truth",
        "truth",
        run.truth.points().iter().filter_map(|p| p.geo).collect(),
    )];
    for gap in &run.gaps {
        let pts = gap_to_geo(gap, &run.measured)?
            .into_iter()
            .map(|p| p.geo)
            .collect();
        paths.push(NamedPath::new(
            format!("{} gap", gap.method),
            gap.method.as_str(),
            pts,
        ));
    }

    let dir = std::env::temp_dir();
    for (name, text) in [
        ("gapfill.kml", export_kml(&paths)?),
        ("gapfill.geojson", export_geojson(&paths)?),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| gapfill::Error::io(&path, e))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
