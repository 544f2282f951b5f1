//! CSV/JSON emission with atomic writes and a metadata sidecar.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

pub enum Field {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Field {
    fn render(&self) -> String {
        match self {
            Field::Num(v) => format_real(*v),
            Field::Int(v) => v.to_string(),
            Field::Text(s) => s.clone(),
        }
    }
}

/// 17 significant digits; non-finite values as inf / -inf / nan.
pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

pub trait CsvRecord {
    fn header() -> Vec<&'static str>;
    fn fields(&self) -> Vec<Field>;
}

pub fn to_csv<T: CsvRecord>(records: &[T]) -> String {
    let mut out = T::header().join(",");
    out.push('\n');
    for r in records {
        let row: Vec<String> = r.fields().iter().map(Field::render).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn emit<T: CsvRecord + Serialize>(records: &[T], format: Format, path: &Path) -> Result<()> {
    let text = match format {
        Format::Csv => to_csv(records),
        Format::Json => to_json(records)?,
    };
    write_atomic(path, text.as_bytes())
}

/// Write to a sibling temp file, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn meta_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunMeta {
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub wall_time_s: f64,
}

pub fn write_meta(out: &Path, meta: &RunMeta) -> Result<()> {
    write_atomic(&meta_path(out), to_json(meta)?.as_bytes())
}

/// Serde adapter for extended reals: +inf / -inf travel as strings.
pub mod ext_real {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&super::format_real(*v))
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(de::Error::custom(format!("not an extended real: {other}"))),
            },
        }
    }
}

pub mod ext_real_pair {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Pair(
        #[serde(with = "super::ext_real")] f64,
        #[serde(with = "super::ext_real")] f64,
    );

    pub fn serialize<S: Serializer>(v: &Option<(f64, f64)>, s: S) -> Result<S::Ok, S::Error> {
        v.map(|(a, b)| Pair(a, b)).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<(f64, f64)>, D::Error> {
        Ok(Option::<Pair>::deserialize(d)?.map(|Pair(a, b)| (a, b)))
    }
}
