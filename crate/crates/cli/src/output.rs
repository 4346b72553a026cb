use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use crate::CliError;

/// Twelve significant digits, fixed notation for moderate magnitudes.
pub fn sig12(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..12).contains(&mag) {
        let decimals = (11 - mag).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.11e}")
    }
}

pub fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Failed(format!("{}: {e}", path.display()))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| CliError::Failed(e.to_string()))
}

#[derive(Serialize)]
struct OutputDigest {
    path: String,
    sha256: String,
}

/// Everything needed to re-run a command that wrote files.
#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    parameters: &'a Value,
    seed: Option<u64>,
    version: &'static str,
    timestamp: String,
    outputs: Vec<OutputDigest>,
}

/// `SOURCE_DATE_EPOCH` when set, otherwise the current time.
fn timestamp() -> Result<String, CliError> {
    let at = match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(v) => {
            let secs: i64 = v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("SOURCE_DATE_EPOCH={v:?} is not an integer")))?;
            OffsetDateTime::from_unix_timestamp(secs).map_err(|e| CliError::Usage(e.to_string()))?
        }
        Err(_) => OffsetDateTime::now_utc(),
    };
    at.format(&Rfc3339).map_err(|e| CliError::Failed(e.to_string()))
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Writes `text` to `out` (or stdout) and, for files, a manifest next to it.
pub fn emit<P: Serialize>(
    text: &str,
    out: Option<&Path>,
    command: &str,
    parameters: &P,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let Some(path) = out else {
        print!("{text}");
        return Ok(());
    };
    std::fs::write(path, text).map_err(|e| io_err(path, e))?;
    let parameters = serde_json::to_value(parameters).map_err(|e| CliError::Failed(e.to_string()))?;
    let manifest = RunManifest {
        command,
        parameters: &parameters,
        seed,
        version: env!("CARGO_PKG_VERSION"),
        timestamp: timestamp()?,
        outputs: vec![OutputDigest {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(text.as_bytes())),
        }],
    };
    let mpath = manifest_path(path);
    std::fs::write(&mpath, to_json(&manifest)?).map_err(|e| io_err(&mpath, e))
}
