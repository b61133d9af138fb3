//! Electrode positions on the head plane.
//!
//! Positions are azimuthal-equidistant projections of idealised 10-20
//! spherical coordinates: radius is the polar angle from Cz divided by
//! 112.5°, so the 90° ring (Fpz, T7, Oz, T8) sits at r = 0.8 and the whole
//! montage stays inside the unit disc. `+v` points to the nose, `+u` to the
//! subject's right.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::DatasetManifest;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub name: String,
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalpLayout {
    entries: Vec<LayoutEntry>,
    index: HashMap<String, usize>,
}

// (name, polar angle from Cz in degrees, azimuth from nose towards right ear in degrees)
const SPHERICAL_10_20: &[(&str, f64, f64)] = &[
    ("Fp1", 90.0, -18.0),
    ("Fpz", 90.0, 0.0),
    ("Fp2", 90.0, 18.0),
    ("AF3", 74.0, -23.0),
    ("AF4", 74.0, 23.0),
    ("F7", 90.0, -54.0),
    ("F3", 64.0, -39.0),
    ("Fz", 45.0, 0.0),
    ("F4", 64.0, 39.0),
    ("F8", 90.0, 54.0),
    ("FC5", 72.0, -69.0),
    ("FC1", 34.0, -45.0),
    ("FC2", 34.0, 45.0),
    ("FC6", 72.0, 69.0),
    ("T7", 90.0, -90.0),
    ("C3", 45.0, -90.0),
    ("Cz", 0.0, 0.0),
    ("C4", 45.0, 90.0),
    ("T8", 90.0, 90.0),
    ("CP5", 72.0, -111.0),
    ("CP1", 34.0, -135.0),
    ("CP2", 34.0, 135.0),
    ("CP6", 72.0, 111.0),
    ("P7", 90.0, -126.0),
    ("P3", 64.0, -141.0),
    ("Pz", 45.0, 180.0),
    ("P4", 64.0, 141.0),
    ("P8", 90.0, 126.0),
    ("PO3", 74.0, -157.0),
    ("PO4", 74.0, 157.0),
    ("O1", 90.0, -162.0),
    ("Oz", 90.0, 180.0),
    ("O2", 90.0, 162.0),
];

/// Channel order of the 32-electrode montage.
pub const MONTAGE_32: [&str; 32] = [
    "Fp1", "AF3", "F3", "F7", "FC5", "FC1", "C3", "T7", "CP5", "CP1", "P3", "P7", "PO3", "O1", "Oz", "Pz", "Fp2",
    "AF4", "Fz", "F4", "F8", "FC6", "FC2", "Cz", "C4", "T8", "CP6", "CP2", "P4", "P8", "PO4", "O2",
];

/// Channel order of the 14-electrode montage.
pub const MONTAGE_14: [&str; 14] = [
    "AF3", "F7", "F3", "FC5", "T7", "P7", "O1", "O2", "P8", "T8", "FC6", "F4", "F8", "AF4",
];

fn project(name: &str) -> Option<LayoutEntry> {
    SPHERICAL_10_20.iter().find(|e| e.0 == name).map(|&(n, polar, az)| {
        let r = polar / 112.5;
        let a = az.to_radians();
        LayoutEntry {
            name: n.to_string(),
            u: r * a.sin(),
            v: r * a.cos(),
        }
    })
}

impl ScalpLayout {
    pub fn new(entries: Vec<LayoutEntry>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if !(e.u.is_finite() && e.v.is_finite()) || e.u * e.u + e.v * e.v > 1.0 + 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "electrode {} at ({}, {}) is outside the unit disc",
                    e.name, e.u, e.v
                )));
            }
            if index.insert(e.name.clone(), i).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate electrode {}", e.name)));
            }
        }
        Ok(ScalpLayout { entries, index })
    }

    fn from_names(names: &[&str]) -> Self {
        let entries = names.iter().map(|n| project(n).expect("known 10-20 name")).collect();
        Self::new(entries).expect("built-in layout is valid")
    }

    pub fn montage_32() -> Self {
        Self::from_names(&MONTAGE_32)
    }

    pub fn montage_14() -> Self {
        Self::from_names(&MONTAGE_14)
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "32" => Some(Self::montage_32()),
            "14" => Some(Self::montage_14()),
            _ => None,
        }
    }

    /// Parses the JSON layout format: `[{"name": .., "u": .., "v": ..}, ...]`.
    pub fn from_json(text: &str) -> Result<Self> {
        let entries: Vec<LayoutEntry> =
            serde_json::from_str(text).map_err(|e| Error::parse("layout", e.to_string()))?;
        Self::new(entries)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("layout serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| e.context(path.display().to_string()))
    }

    /// Resolves a manifest's `scalp_layout_ref` (a path or `builtin:<n>`).
    pub fn for_manifest(manifest: &DatasetManifest) -> Result<Self> {
        let r = manifest
            .scalp_layout_ref
            .as_deref()
            .ok_or_else(|| Error::InvalidManifest("no scalp layout referenced".into()))?;
        match r.strip_prefix("builtin:") {
            Some(b) => Self::builtin(b).ok_or_else(|| Error::InvalidManifest(format!("unknown built-in layout {r}"))),
            None => Self::load(&manifest.root.join(r)),
        }
    }

    pub fn entries(&self) -> &[LayoutEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<[f64; 2]> {
        self.index.get(name).map(|&i| [self.entries[i].u, self.entries[i].v])
    }

    /// Positions for `channels`, in order; fails on any unknown name.
    pub fn resolve(&self, channels: &[String]) -> Result<Vec<[f64; 2]>> {
        channels
            .iter()
            .map(|c| self.position(c).ok_or_else(|| Error::UnknownChannel(c.clone())))
            .collect()
    }

    /// Subset of this layout restricted to (and ordered like) `channels`.
    pub fn subset(&self, channels: &[String]) -> Result<Self> {
        let pos = self.resolve(channels)?;
        Self::new(
            channels
                .iter()
                .zip(pos)
                .map(|(n, p)| LayoutEntry {
                    name: n.clone(),
                    u: p[0],
                    v: p[1],
                })
                .collect(),
        )
    }
}
