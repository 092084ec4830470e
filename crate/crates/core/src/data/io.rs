//! Manifest, CSV and binary feature files.
//!
//! Binary features: `"AVFB"`, version `u16`, `m: u64`, `d: u64`, then `m·d`
//! little-endian `f64` values in row-major order.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::{FeatureMatrix, LabelVector, PairedDataset, Split};
use crate::error::{Error, Result};
use crate::model::Modality;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const FEATURE_MAGIC: &[u8; 4] = b"AVFB";
pub const FEATURE_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureFormat {
    Csv,
    Binary,
}

impl FeatureFormat {
    pub fn extension(self) -> &'static str {
        match self {
            FeatureFormat::Csv => "csv",
            FeatureFormat::Binary => "avfb",
        }
    }
}

impl std::str::FromStr for FeatureFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(FeatureFormat::Csv),
            "binary" | "bin" | "avfb" => Ok(FeatureFormat::Binary),
            other => Err(Error::Validation(format!(
                "unknown feature format {other:?}"
            ))),
        }
    }
}

/// Plain-text `key=value` description of one dataset split. Relative paths
/// resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub visual_file: PathBuf,
    pub audio_file: PathBuf,
    pub label_file: PathBuf,
    pub classes: usize,
    pub d_visual: usize,
    pub d_audio: usize,
    pub split: Split,
    /// Z-score features with training-split statistics.
    pub normalize: bool,
}

impl Manifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, path)
    }

    fn parse(text: &str, base: &Path, path: &Path) -> Result<Self> {
        let mut visual_file = None;
        let mut audio_file = None;
        let mut label_file = None;
        let mut classes = None;
        let mut d_visual = None;
        let mut d_audio = None;
        let mut split = None;
        let mut normalize = false;

        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::format(path, format!("line {}: expected key=value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let int = |v: &str| {
                v.parse::<usize>().map_err(|_| {
                    Error::format(
                        path,
                        format!("line {}: {key} is not an integer", lineno + 1),
                    )
                })
            };
            match key {
                "visual_file" => visual_file = Some(base.join(value)),
                "audio_file" => audio_file = Some(base.join(value)),
                "label_file" => label_file = Some(base.join(value)),
                "c" => classes = Some(int(value)?),
                "d_visual" => d_visual = Some(int(value)?),
                "d_audio" => d_audio = Some(int(value)?),
                "split" => split = Some(value.parse::<Split>()?),
                "normalize" => {
                    normalize = match value {
                        "zscore" | "true" | "1" => true,
                        "none" | "false" | "0" => false,
                        other => {
                            return Err(Error::format(
                                path,
                                format!("line {}: unknown normalize value {other:?}", lineno + 1),
                            ))
                        }
                    }
                }
                other => {
                    return Err(Error::format(
                        path,
                        format!("line {}: unknown key {other:?}", lineno + 1),
                    ))
                }
            }
        }
        let missing = |k: &str| Error::format(path, format!("missing key {k}"));
        Ok(Self {
            visual_file: visual_file.ok_or_else(|| missing("visual_file"))?,
            audio_file: audio_file.ok_or_else(|| missing("audio_file"))?,
            label_file: label_file.ok_or_else(|| missing("label_file"))?,
            classes: classes.ok_or_else(|| missing("c"))?,
            d_visual: d_visual.ok_or_else(|| missing("d_visual"))?,
            d_audio: d_audio.ok_or_else(|| missing("d_audio"))?,
            split: split.ok_or_else(|| missing("split"))?,
            normalize,
        })
    }

    /// Serializes with file paths written relative to `base` when possible.
    pub fn to_text(&self, base: &Path) -> String {
        let rel = |p: &Path| {
            p.strip_prefix(base)
                .unwrap_or(p)
                .to_string_lossy()
                .into_owned()
        };
        let mut s = String::new();
        let _ = writeln!(s, "visual_file={}", rel(&self.visual_file));
        let _ = writeln!(s, "audio_file={}", rel(&self.audio_file));
        let _ = writeln!(s, "label_file={}", rel(&self.label_file));
        let _ = writeln!(s, "c={}", self.classes);
        let _ = writeln!(s, "d_visual={}", self.d_visual);
        let _ = writeln!(s, "d_audio={}", self.d_audio);
        let _ = writeln!(s, "split={}", self.split);
        if self.normalize {
            let _ = writeln!(s, "normalize=zscore");
        }
        s
    }
}

/// Loads and validates the split described by a manifest.
pub fn load_dataset<T: Scalar>(manifest_path: impl AsRef<Path>) -> Result<PairedDataset<T>> {
    let m = Manifest::read(manifest_path)?;
    let visual = read_features(&m.visual_file, Modality::Visual, m.d_visual)?;
    let audio = read_features(&m.audio_file, Modality::Audio, m.d_audio)?;
    let labels = read_labels(&m.label_file, m.classes)?;
    if audio.rows() != visual.rows() || audio.rows() != labels.len() {
        return Err(Error::Validation(format!(
            "pairing mismatch: {} has {} rows, {} has {} rows, {} has {} labels",
            m.audio_file.display(),
            audio.rows(),
            m.visual_file.display(),
            visual.rows(),
            m.label_file.display(),
            labels.len()
        )));
    }
    PairedDataset::new(audio, visual, labels, m.split)
}

/// Reads CSV or binary features (detected by magic bytes) and checks the
/// column count.
pub fn read_features<T: Scalar>(
    path: impl AsRef<Path>,
    modality: Modality,
    expected_dim: usize,
) -> Result<FeatureMatrix<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let values = if bytes.starts_with(FEATURE_MAGIC) {
        decode_binary(&bytes, path)?
    } else {
        parse_csv(&bytes, path)?
    };
    if values.rows() > 0 && values.cols() != expected_dim {
        return Err(Error::format(
            path,
            format!(
                "{modality} features have {} columns, manifest declares {expected_dim}",
                values.cols()
            ),
        ));
    }
    let values = if values.rows() == 0 {
        Tensor::zeros(0, expected_dim)
    } else {
        values
    };
    FeatureMatrix::new(modality, values, path.display().to_string())
        .map_err(|e| Error::format(path, e.to_string()))
}

fn parse_csv<T: Scalar>(bytes: &[u8], path: &Path) -> Result<Tensor<T>> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::format(path, "not utf-8 text"))?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (row, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut n = 0;
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::format(
                    path,
                    format!("row {row}: cannot parse {:?} as a number", field.trim()),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::format(path, format!("row {row}: non-finite value")));
            }
            data.push(
                T::from_f64(v)
                    .ok_or_else(|| Error::format(path, format!("row {row}: value out of range")))?,
            );
            n += 1;
        }
        match cols {
            None => cols = Some(n),
            Some(c) if c != n => {
                return Err(Error::format(
                    path,
                    format!("row {row}: {n} columns, expected {c}"),
                ))
            }
            _ => {}
        }
        rows += 1;
    }
    Tensor::from_vec(rows, cols.unwrap_or(0), data)
}

fn decode_binary<T: Scalar>(bytes: &[u8], path: &Path) -> Result<Tensor<T>> {
    let header = 4 + 2 + 8 + 8;
    if bytes.len() < header {
        return Err(Error::format(path, "truncated header"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FEATURE_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported version {version}"),
        ));
    }
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let (m, d) = (u64_at(6) as usize, u64_at(14) as usize);
    let expected = m
        .checked_mul(d)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(header))
        .ok_or_else(|| Error::format(path, "shape overflow"))?;
    if bytes.len() != expected {
        return Err(Error::format(
            path,
            format!(
                "expected {expected} bytes for {m}x{d}, found {}",
                bytes.len()
            ),
        ));
    }
    let mut data = Vec::with_capacity(m * d);
    for (k, chunk) in bytes[header..].chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        if !v.is_finite() {
            return Err(Error::format(
                path,
                format!("row {}: non-finite value", k / d.max(1)),
            ));
        }
        data.push(T::from_f64(v).ok_or_else(|| Error::format(path, "value out of range"))?);
    }
    Tensor::from_vec(m, d, data)
}

pub fn write_features_csv<T: Scalar>(values: &Tensor<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(values.len() * 20);
    for i in 0..values.rows() {
        for (j, v) in values.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            // Shortest representation that parses back to the same f64.
            let _ = write!(out, "{}", v.to_f64_lossy());
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_features_binary<T: Scalar>(values: &Tensor<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        w.write_all(FEATURE_MAGIC)?;
        w.write_all(&FEATURE_VERSION.to_le_bytes())?;
        w.write_all(&(values.rows() as u64).to_le_bytes())?;
        w.write_all(&(values.cols() as u64).to_le_bytes())?;
        for &v in values.as_slice() {
            w.write_all(&v.to_f64_lossy().to_le_bytes())?;
        }
        w.flush()
    };
    write(&mut w).map_err(|e| Error::io(path, e))
}

pub fn read_labels(path: impl AsRef<Path>, classes: usize) -> Result<LabelVector> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::new();
    BufReader::new(file)
        .read_to_string(&mut text)
        .map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::new();
    for (row, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let l: usize = line
            .parse()
            .map_err(|_| Error::format(path, format!("row {row}: {line:?} is not a class id")))?;
        if l >= classes {
            return Err(Error::format(
                path,
                format!("row {row}: label {l} out of range for c={classes}"),
            ));
        }
        labels.push(l);
    }
    LabelVector::new(labels, classes)
}

pub fn write_labels(labels: &LabelVector, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for l in labels.as_slice() {
        let _ = writeln!(out, "{l}");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes `<stem>_visual.*`, `<stem>_audio.*`, `<stem>_labels.csv` and
/// `<stem>.manifest` into `dir`; returns the manifest path.
pub fn write_dataset<T: Scalar>(
    ds: &PairedDataset<T>,
    dir: impl AsRef<Path>,
    stem: &str,
    format: FeatureFormat,
) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ext = format.extension();
    let visual_file = dir.join(format!("{stem}_visual.{ext}"));
    let audio_file = dir.join(format!("{stem}_audio.{ext}"));
    let label_file = dir.join(format!("{stem}_labels.csv"));
    let write = match format {
        FeatureFormat::Csv => write_features_csv::<T>,
        FeatureFormat::Binary => write_features_binary::<T>,
    };
    write(&ds.visual.values, &visual_file)?;
    write(&ds.audio.values, &audio_file)?;
    write_labels(&ds.labels, &label_file)?;

    let manifest = Manifest {
        visual_file,
        audio_file,
        label_file,
        classes: ds.classes(),
        d_visual: ds.visual.dim(),
        d_audio: ds.audio.dim(),
        split: ds.split,
        normalize: false,
    };
    let path = dir.join(format!("{stem}.manifest"));
    fs::write(&path, manifest.to_text(dir)).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_parse_and_errors() {
        let text = "# comment\nvisual_file=v.csv\naudio_file=a.csv\nlabel_file=l.csv\nc=10\nd_visual=1024\nd_audio=128\nsplit=train\n";
        let m = Manifest::parse(text, Path::new("/d"), Path::new("/d/m")).unwrap();
        assert_eq!(m.visual_file, PathBuf::from("/d/v.csv"));
        assert_eq!((m.classes, m.d_visual, m.d_audio), (10, 1024, 128));
        assert!(!m.normalize);

        let missing = text.replace("c=10\n", "");
        assert!(Manifest::parse(&missing, Path::new("."), Path::new("m")).is_err());
        let bad = format!("{text}colour=blue\n");
        assert!(Manifest::parse(&bad, Path::new("."), Path::new("m")).is_err());
    }

    #[test]
    fn csv_errors_name_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        fs::write(&p, "1,2\n3,abc\n").unwrap();
        let err = read_features::<f64>(&p, Modality::Audio, 2).unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");

        fs::write(&p, "1,2\n3,NaN\n").unwrap();
        let err = read_features::<f64>(&p, Modality::Audio, 2).unwrap_err();
        assert!(err.to_string().contains("non-finite"), "{err}");

        fs::write(&p, "1,2\n3\n").unwrap();
        assert!(read_features::<f64>(&p, Modality::Audio, 2).is_err());

        fs::write(&p, "1,2,3\n").unwrap();
        let err = read_features::<f64>(&p, Modality::Audio, 2).unwrap_err();
        assert!(err.to_string().contains("declares 2"), "{err}");
    }

    #[test]
    fn binary_length_checked() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.avfb");
        let t = Tensor::from_fn(3, 2, |i, j| (i * 2 + j) as f64 / 7.0);
        write_features_binary(&t, &p).unwrap();
        let back = read_features::<f64>(&p, Modality::Visual, 2).unwrap();
        assert_eq!(back.values, t);
        let mut bytes = fs::read(&p).unwrap();
        bytes.pop();
        fs::write(&p, &bytes).unwrap();
        assert!(read_features::<f64>(&p, Modality::Visual, 2).is_err());
    }

    #[test]
    fn label_file_range_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.csv");
        fs::write(&p, "0\n9\n10\n").unwrap();
        let err = read_labels(&p, 10).unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
    }
}
