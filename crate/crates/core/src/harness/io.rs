//! Dataset files: the TSDS binary container and a flat CSV import.
//!
//! TSDS layout (little-endian): `"TSDS"`, u16 version, u32 V, u32 T,
//! u32 num_classes, u64 num_samples, f64 sample_rate_hz, then per sample
//! u32 label, u32 domain id (`u32::MAX` for none) and `V·T` f32 values,
//! variate-major.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::dataset::{LabeledDataset, TimeSeries};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"TSDS";
pub const VERSION: u16 = 1;
pub const NO_DOMAIN: u32 = u32::MAX;
const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 4 + 8 + 8;

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn encode_tsds(ds: &LabeledDataset) -> Result<Vec<u8>> {
    let (v, t) = ds.sample_shape().unwrap_or((0, 0));
    let rate = ds.sample_rate_hz().unwrap_or(1.0);
    let u32_of = |x: usize, what: &str| {
        u32::try_from(x).map_err(|_| Error::InvalidArgument(format!("{what} {x} exceeds u32")))
    };
    let mut out = Vec::with_capacity(HEADER_LEN + ds.len() * (8 + 4 * v * t));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&u32_of(v, "variates")?.to_le_bytes());
    out.extend_from_slice(&u32_of(t, "length")?.to_le_bytes());
    out.extend_from_slice(&u32_of(ds.num_classes(), "num_classes")?.to_le_bytes());
    out.extend_from_slice(&(ds.len() as u64).to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    for (i, s) in ds.samples().iter().enumerate() {
        out.extend_from_slice(&u32_of(ds.labels()[i], "label")?.to_le_bytes());
        let d = ds.domains().map_or(NO_DOMAIN, |d| d[i]);
        out.extend_from_slice(&d.to_le_bytes());
        for &x in s.values() {
            let f = x as f32;
            if !f.is_finite() {
                return Err(Error::at_sample(i, Error::NonFinite("value outside f32 range")));
            }
            out.extend_from_slice(&f.to_le_bytes());
        }
    }
    Ok(out)
}

fn le<const N: usize>(bytes: &[u8], at: usize) -> [u8; N] {
    bytes[at..at + N].try_into().expect("length checked")
}

pub fn decode_tsds(bytes: &[u8], name: &str) -> Result<LabeledDataset> {
    if bytes.len() < 4 {
        return Err(Error::Truncated(format!("{} bytes, header needs {HEADER_LEN}", bytes.len())));
    }
    let magic: [u8; 4] = le(bytes, 0);
    if magic != MAGIC {
        return Err(Error::BadMagic {
            expected: MAGIC,
            found: magic,
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated(format!("{} bytes, header needs {HEADER_LEN}", bytes.len())));
    }
    let version = u16::from_le_bytes(le(bytes, 4));
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let v = u32::from_le_bytes(le(bytes, 6)) as usize;
    let t = u32::from_le_bytes(le(bytes, 10)) as usize;
    let k = u32::from_le_bytes(le(bytes, 14)) as usize;
    let n = u64::from_le_bytes(le(bytes, 18));
    let rate = f64::from_le_bytes(le(bytes, 26));
    let record = v
        .checked_mul(t)
        .and_then(|vt| vt.checked_mul(4))
        .and_then(|p| p.checked_add(8))
        .ok_or_else(|| Error::Malformed(format!("sample size {v}×{t} overflows")))?;
    let expected = usize::try_from(n)
        .ok()
        .and_then(|n| n.checked_mul(record))
        .and_then(|p| p.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Malformed(format!("{n} samples overflow the address space")))?;
    if bytes.len() < expected {
        return Err(Error::Truncated(format!(
            "header promises {expected} bytes, file has {}",
            bytes.len()
        )));
    }
    if bytes.len() > expected {
        return Err(Error::Malformed(format!("{} trailing bytes", bytes.len() - expected)));
    }
    let n = n as usize;
    let mut samples = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut domains = Vec::with_capacity(n);
    for i in 0..n {
        let base = HEADER_LEN + i * record;
        let label = u32::from_le_bytes(le(bytes, base)) as usize;
        if label >= k {
            return Err(Error::LabelOutOfRange {
                sample: i,
                label,
                num_classes: k,
            });
        }
        labels.push(label);
        domains.push(u32::from_le_bytes(le(bytes, base + 4)));
        let values = bytes[base + 8..base + record]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        samples.push(TimeSeries::new(v, values, rate).map_err(|e| Error::at_sample(i, e))?);
    }
    let domains = domain_column(domains)?;
    LabeledDataset::new(name, samples, labels, domains, k)
}

fn domain_column(ids: Vec<u32>) -> Result<Option<Vec<u32>>> {
    let missing = ids.iter().filter(|&&d| d == NO_DOMAIN).count();
    match missing {
        0 if !ids.is_empty() => Ok(Some(ids)),
        m if m == ids.len() => Ok(None),
        _ => Err(Error::Malformed("domain ids present for only some samples".into())),
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned())
}

pub fn write_tsds(path: &Path, ds: &LabeledDataset) -> Result<()> {
    write_atomic(path, &encode_tsds(ds)?)
}

pub fn read_tsds(path: &Path) -> Result<LabeledDataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tsds(&bytes, &stem(path))
}

/// Parses `v{i}_t{j}` into `(i, j)`.
fn value_column(name: &str) -> Option<(usize, usize)> {
    let rest = name.strip_prefix('v')?;
    let (v, t) = rest.split_once("_t")?;
    Some((v.parse().ok()?, t.parse().ok()?))
}

/// Reads `domain,label,v0_t0,…,v{V-1}_t{T-1}` rows; an empty domain cell
/// means no domain. `num_classes` defaults to one more than the largest label.
pub fn read_csv(path: &Path, sample_rate_hz: f64, num_classes: Option<usize>) -> Result<LabeledDataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_csv(&bytes, &stem(path), sample_rate_hz, num_classes)
}

pub fn decode_csv(bytes: &[u8], name: &str, sample_rate_hz: f64, num_classes: Option<usize>) -> Result<LabeledDataset> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let header = rdr.headers()?.clone();
    if header.len() < 3 || &header[0] != "domain" || &header[1] != "label" {
        return Err(Error::Malformed("csv header must start with domain,label,v0_t0".into()));
    }
    let (last_v, last_t) = value_column(&header[header.len() - 1])
        .ok_or_else(|| Error::Malformed(format!("unrecognised column {}", &header[header.len() - 1])))?;
    let (v, t) = (last_v + 1, last_t + 1);
    if header.len() != 2 + v * t {
        return Err(Error::Malformed(format!("expected {} value columns, found {}", v * t, header.len() - 2)));
    }
    for (c, h) in header.iter().skip(2).enumerate() {
        if value_column(h) != Some((c / t, c % t)) {
            return Err(Error::Malformed(format!("column {} should be v{}_t{}, found {h}", c + 2, c / t, c % t)));
        }
    }
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    let mut domains = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::at_sample(i, Error::Malformed(what.to_string()));
        let d = rec[0].trim();
        domains.push(if d.is_empty() {
            NO_DOMAIN
        } else {
            d.parse().map_err(|_| bad("domain is not an integer"))?
        });
        labels.push(rec[1].trim().parse::<usize>().map_err(|_| bad("label is not an integer"))?);
        let values = rec
            .iter()
            .skip(2)
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad("value is not a number"))?;
        samples.push(TimeSeries::new(v, values, sample_rate_hz).map_err(|e| Error::at_sample(i, e))?);
    }
    let k = num_classes.unwrap_or_else(|| labels.iter().max().map_or(1, |m| m + 1));
    let domains = domain_column(domains)?;
    LabeledDataset::new(name, samples, labels, domains, k)
}

pub fn encode_csv(ds: &LabeledDataset) -> Result<Vec<u8>> {
    let (v, t) = ds.sample_shape().unwrap_or((0, 0));
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["domain".to_string(), "label".to_string()];
    header.extend((0..v * t).map(|c| format!("v{}_t{}", c / t, c % t)));
    w.write_record(&header)?;
    for (i, s) in ds.samples().iter().enumerate() {
        let mut row = vec![
            ds.domains().map_or(String::new(), |d| d[i].to_string()),
            ds.labels()[i].to_string(),
        ];
        row.extend(s.values().iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.into_inner()
        .map_err(|e| Error::Malformed(format!("csv buffer: {e}")))
}

/// Reads a dataset, choosing the format from the extension (`.csv` or TSDS).
pub fn read_dataset(path: &Path) -> Result<LabeledDataset> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        read_csv(path, 1.0, None)
    } else {
        read_tsds(path)
    }
}

pub fn write_dataset(path: &Path, ds: &LabeledDataset) -> Result<()> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        write_atomic(path, &encode_csv(ds)?)
    } else {
        write_tsds(path, ds)
    }
}
