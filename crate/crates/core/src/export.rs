//! KML and GeoJSON line exports for viewing reconstructions on a map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::GeoPoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedPath {
    pub name: String,
    /// Reconstruction method or another source tag such as `truth`.
    pub method: String,
    pub points: Vec<GeoPoint>,
}

impl NamedPath {
    pub fn new(name: impl Into<String>, method: impl Into<String>, points: Vec<GeoPoint>) -> Self {
        NamedPath {
            name: name.into(),
            method: method.into(),
            points,
        }
    }
}

fn check(paths: &[NamedPath]) -> Result<()> {
    for p in paths {
        if let Some(bad) = p.points.iter().find(|g| !g.is_valid()) {
            return Err(Error::Export(format!(
                "path `{}` has invalid coordinate ({}, {})",
                p.name, bad.lat, bad.lon
            )));
        }
    }
    Ok(())
}

const PALETTE: [&str; 8] = [
    "ff0000ff", // red
    "ff00aa00", // green
    "ffff0000", // blue
    "ff00a5ff", // orange
    "ffff00ff", // magenta
    "ffffff00", // cyan
    "ff00ffff", // yellow
    "ff800080", // purple
];

/// KML colour (`aabbggrr`) for the `i`-th path. Past the palette, hues step
/// by the golden angle.
pub fn line_color(i: usize) -> String {
    if let Some(c) = PALETTE.get(i) {
        return (*c).to_string();
    }
    let hue = (i as f64 * 0.618_033_988_749_895).fract() * 6.0;
    let x = 1.0 - (hue % 2.0 - 1.0).abs();
    let (r, g, b) = match hue as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    let byte = |v: f64| (v * 255.0).round() as u8;
    format!("ff{:02x}{:02x}{:02x}", byte(b), byte(g), byte(r))
}

fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// One styled Placemark with a LineString per path. Coordinates are
/// `lon,lat,0` with 7 decimals.
pub fn export_kml(paths: &[NamedPath]) -> Result<String> {
    check(paths)?;
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<kml xmlns=\"http://www.opengis.net/kml/2.2\">\n");
    s.push_str("<Document>\n");
    s.push_str("<name>gapfill</name>\n");
    for i in 0..paths.len() {
        s.push_str(&format!(
            "<Style id=\"path{i}\"><LineStyle><color>{}</color><width>3</width></LineStyle></Style>\n",
            line_color(i)
        ));
    }
    for (i, p) in paths.iter().enumerate() {
        s.push_str("<Placemark>\n");
        s.push_str(&format!("<name>{}</name>\n", escape_xml(&p.name)));
        s.push_str(&format!("<description>{}</description>\n", escape_xml(&p.method)));
        s.push_str(&format!("<styleUrl>#path{i}</styleUrl>\n"));
        s.push_str("<LineString>\n<tessellate>1</tessellate>\n<coordinates>\n");
        for g in &p.points {
            s.push_str(&format!("{:.7},{:.7},0\n", g.lon, g.lat));
        }
        s.push_str("</coordinates>\n</LineString>\n</Placemark>\n");
    }
    s.push_str("</Document>\n</kml>\n");
    Ok(s)
}

#[derive(Serialize, Deserialize)]
struct FeatureCollection {
    #[serde(rename = "type")]
    kind: String,
    features: Vec<Feature>,
}

#[derive(Serialize, Deserialize)]
struct Feature {
    #[serde(rename = "type")]
    kind: String,
    properties: Properties,
    geometry: Geometry,
}

#[derive(Serialize, Deserialize)]
struct Properties {
    name: String,
    method: String,
}

#[derive(Serialize, Deserialize)]
struct Geometry {
    #[serde(rename = "type")]
    kind: String,
    /// `[lon, lat]` pairs.
    coordinates: Vec<[f64; 2]>,
}

pub fn export_geojson(paths: &[NamedPath]) -> Result<String> {
    check(paths)?;
    let fc = FeatureCollection {
        kind: "FeatureCollection".into(),
        features: paths
            .iter()
            .map(|p| Feature {
                kind: "Feature".into(),
                properties: Properties {
                    name: p.name.clone(),
                    method: p.method.clone(),
                },
                geometry: Geometry {
                    kind: "LineString".into(),
                    coordinates: p.points.iter().map(|g| [g.lon, g.lat]).collect(),
                },
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&fc).map_err(|source| Error::Json {
        context: "geojson".into(),
        source,
    })?;
    s.push('\n');
    Ok(s)
}

/// Reads back the paths of a FeatureCollection of LineStrings.
pub fn parse_geojson(text: &str) -> Result<Vec<NamedPath>> {
    let fc: FeatureCollection = serde_json::from_str(text).map_err(|source| Error::Json {
        context: "geojson".into(),
        source,
    })?;
    if fc.kind != "FeatureCollection" {
        return Err(Error::Export(format!(
            "expected FeatureCollection, found {}",
            fc.kind
        )));
    }
    fc.features
        .into_iter()
        .map(|f| {
            if f.geometry.kind != "LineString" {
                return Err(Error::Export(format!("unsupported geometry {}", f.geometry.kind)));
            }
            let points = f
                .geometry
                .coordinates
                .iter()
                .map(|c| GeoPoint::new(c[1], c[0]))
                .collect::<Result<Vec<_>>>()?;
            Ok(NamedPath::new(f.properties.name, f.properties.method, points))
        })
        .collect()
}
