//! Model files: TOML with a leading `format_version` key.
//!
//! ```toml
//! format_version = 1
//! gop_size = 4
//! grid = [4, 4]          # rows, cols
//! intra_factor = 1.5
//! prop_decay = 0.3
//! ref_rate = 12345.6     # informational; recomputed and checked on load
//!
//! [[frames]]
//! is_intra = true
//!
//! [[frames.ctus]]
//! complexity = 812.5
//! rate_sensitivity = 1.04
//! mask_ratio = 0.0
//! degrade_midpoint = 41.2
//! degrade_steepness = 3.3
//! ```
//!
//! Floats are written in shortest round-trip form, so load(save(m)) == m.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{FrameModel, VideoModel};
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    gop_size: usize,
    grid: [usize; 2],
    intra_factor: f64,
    prop_decay: f64,
    ref_rate: f64,
    frames: Vec<FrameModel>,
}

pub fn model_to_string(model: &VideoModel) -> String {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        gop_size: model.gop_size(),
        grid: [model.grid().0, model.grid().1],
        intra_factor: model.intra_factor(),
        prop_decay: model.prop_decay(),
        ref_rate: model.ref_rate(),
        frames: model.frames().to_vec(),
    };
    toml::to_string(&file).expect("model serialization is infallible")
}

/// 1-based line of a TOML error span; 0 when the span is unknown.
pub fn toml_line(text: &str, err: &toml::de::Error) -> u64 {
    err.span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() as u64 + 1)
        .unwrap_or(0)
}

/// Reads `format_version` first so version mismatches are reported as such.
pub fn check_version(text: &str, path: &Path, expected: u32) -> Result<()> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::parse(path, toml_line(text, &e), e.message()))?;
    let found = table
        .get("format_version")
        .and_then(|v| v.as_integer())
        .ok_or_else(|| Error::parse(path, 1, "missing integer `format_version`"))?;
    if found != i64::from(expected) {
        return Err(Error::FormatVersion {
            found: u32::try_from(found).unwrap_or(u32::MAX),
            expected,
        });
    }
    Ok(())
}

pub fn model_from_str(text: &str, path: &Path) -> Result<VideoModel> {
    check_version(text, path, MODEL_FORMAT_VERSION)?;
    let file: ModelFile = toml::from_str(text).map_err(|e| Error::parse(path, toml_line(text, &e), e.message()))?;
    let model = VideoModel::new(
        file.frames,
        file.gop_size,
        (file.grid[0], file.grid[1]),
        file.intra_factor,
        file.prop_decay,
    )?;
    let rel = (model.ref_rate() - file.ref_rate).abs() / model.ref_rate();
    if rel > 1e-9 {
        return Err(Error::parse(
            path,
            0,
            format!(
                "stored ref_rate {} disagrees with recomputed {}",
                file.ref_rate,
                model.ref_rate()
            ),
        ));
    }
    Ok(model)
}

pub fn save_model(model: &VideoModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_string(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<VideoModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_str(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{gen_model, GenSpec};
    use proptest::prelude::*;

    #[test]
    fn version_mismatch() {
        let model = gen_model(1, &GenSpec::default()).unwrap();
        let text = model_to_string(&model).replacen("format_version = 1", "format_version = 2", 1);
        assert!(matches!(
            model_from_str(&text, Path::new("m.toml")),
            Err(Error::FormatVersion { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn leading_key_is_version() {
        let model = gen_model(1, &GenSpec::default()).unwrap();
        assert!(model_to_string(&model).starts_with("format_version = 1\n"));
    }

    #[test]
    fn stale_ref_rate_rejected() {
        let model = gen_model(1, &GenSpec::default()).unwrap();
        let text = model_to_string(&model);
        let line = text.lines().find(|l| l.starts_with("ref_rate")).unwrap();
        let text = text.replace(line, "ref_rate = 1.0");
        assert!(matches!(
            model_from_str(&text, Path::new("m.toml")),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn syntax_error_has_line() {
        let err = model_from_str("format_version = 1\ngop_size = = 4\n", Path::new("m.toml")).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn round_trip_is_exact(seed in any::<u64>(), frames in 1usize..6, rows in 1usize..4) {
            let spec = GenSpec { frames, rows, ..GenSpec::default() };
            let model = gen_model(seed, &spec).unwrap();
            let back = model_from_str(&model_to_string(&model), Path::new("m.toml")).unwrap();
            prop_assert_eq!(back, model);
        }
    }
}
