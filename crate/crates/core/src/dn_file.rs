//! D-N sample files: one JSON header line followed by a CSV or binary payload.
//!
//! Each record is `lambda` followed by the `M * M` matrix entries in row-major
//! boundary order. CSV values are written with 17 significant digits so a
//! write/read cycle is bit-exact; the binary payload is little-endian `f64`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dn_maps::{check_admissible, continuous_oracle_lambda_e, DNMatrix, SampledOracle};
use crate::error::{Error, Reason, Result};
use crate::lattice::Region;
use crate::potentials::EdgePotentials;

const FORMAT: &str = "lattice-dn-samples";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Payload {
    #[default]
    Csv,
    Binary,
}

/// A grid point that was left out, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedLambda {
    pub lambda: f64,
    pub reason: Reason,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    n: usize,
    m: usize,
    payload: Payload,
    count: usize,
    lambdas: Vec<f64>,
    dropped: Vec<DroppedLambda>,
}

/// Edge-map samples of one region.
#[derive(Debug, Clone, PartialEq)]
pub struct DnFile {
    pub n: usize,
    pub samples: Vec<DNMatrix>,
    pub dropped: Vec<DroppedLambda>,
}

/// `lo, lo + 1/density, ...` up to `hi`.
pub fn uniform_grid(lo: f64, hi: f64, density: f64) -> Vec<f64> {
    let count = ((hi - lo) * density).floor() as usize + 1;
    (0..count).map(|i| lo + i as f64 / density).collect()
}

impl DnFile {
    /// Samples the edge map of known potentials on `grid`, dropping
    /// inadmissible points.
    pub fn from_forward(region: &Region, potentials: &EdgePotentials, grid: &[f64]) -> Result<Self> {
        potentials.validate(region)?;
        let results: Vec<std::result::Result<DNMatrix, DroppedLambda>> = grid
            .par_iter()
            .map(|&lambda| {
                check_admissible(region, potentials, lambda)
                    .and_then(|()| {
                        continuous_oracle_lambda_e(region, potentials, lambda).map_err(|e| match e {
                            Error::Inadmissible { reason, .. } => reason,
                            other => Reason::Degenerate {
                                detail: other.to_string(),
                            },
                        })
                    })
                    .map_err(|reason| DroppedLambda { lambda, reason })
            })
            .collect();
        let mut samples = Vec::new();
        let mut dropped = Vec::new();
        for r in results {
            match r {
                Ok(s) => samples.push(s),
                Err(d) => dropped.push(d),
            }
        }
        Ok(Self {
            n: region.n(),
            samples,
            dropped,
        })
    }

    pub fn into_oracle(self) -> Result<SampledOracle> {
        SampledOracle::new(self.n, self.samples)
    }

    pub fn write(&self, path: &Path, payload: Payload) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w, payload)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_to<W: Write>(&self, w: &mut W, payload: Payload) -> Result<()> {
        let m = 4 * (self.n + 1);
        let header = Header {
            format: FORMAT.into(),
            version: 1,
            n: self.n,
            m,
            payload,
            count: self.samples.len(),
            lambdas: self.samples.iter().map(|s| s.lambda).collect(),
            dropped: self.dropped.clone(),
        };
        serde_json::to_writer(&mut *w, &header)?;
        writeln!(w)?;
        for s in &self.samples {
            let row = s.entries.transpose(); // column-major storage of the transpose is row-major
            match payload {
                Payload::Csv => {
                    write!(w, "{:.16e}", s.lambda)?;
                    for x in row.iter() {
                        write!(w, ",{x:.16e}")?;
                    }
                    writeln!(w)?;
                }
                Payload::Binary => {
                    w.write_all(&s.lambda.to_le_bytes())?;
                    for x in row.iter() {
                        w.write_all(&x.to_le_bytes())?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }

    pub fn read_from<R: BufRead>(mut r: R) -> Result<Self> {
        let mut line = String::new();
        r.read_line(&mut line)?;
        let header: Header = serde_json::from_str(line.trim_end())
            .map_err(|e| Error::Schema(format!("bad header: {e}")))?;
        if header.format != FORMAT || header.version != 1 {
            return Err(Error::Schema(format!(
                "unsupported format {} v{}",
                header.format, header.version
            )));
        }
        let m = header.m;
        if m != 4 * (header.n + 1) || header.lambdas.len() != header.count {
            return Err(Error::Schema("inconsistent header".into()));
        }
        let width = 1 + m * m;
        let mut records: Vec<Vec<f64>> = Vec::with_capacity(header.count);
        match header.payload {
            Payload::Csv => {
                let mut row = String::new();
                for i in 0.. {
                    row.clear();
                    if r.read_line(&mut row)? == 0 {
                        break;
                    }
                    // every record is newline-terminated; a missing newline means truncation
                    if !row.ends_with('\n') {
                        return Err(Error::Schema(format!("record {i} is truncated")));
                    }
                    let row = row.trim_end();
                    if row.is_empty() {
                        continue;
                    }
                    let vals = row
                        .split(',')
                        .map(|t| t.trim().parse::<f64>())
                        .collect::<std::result::Result<Vec<f64>, _>>()
                        .map_err(|e| Error::Schema(format!("record {i}: {e}")))?;
                    if vals.len() != width {
                        return Err(Error::Schema(format!(
                            "record {i} has {} values, expected {width}",
                            vals.len()
                        )));
                    }
                    records.push(vals);
                }
            }
            Payload::Binary => {
                let mut bytes = Vec::new();
                r.read_to_end(&mut bytes)?;
                if bytes.len() != header.count * width * 8 {
                    return Err(Error::Schema(format!(
                        "binary payload has {} bytes, expected {}",
                        bytes.len(),
                        header.count * width * 8
                    )));
                }
                records = bytes
                    .chunks_exact(width * 8)
                    .map(|rec| {
                        rec.chunks_exact(8)
                            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                            .collect()
                    })
                    .collect();
            }
        }
        if records.len() != header.count {
            return Err(Error::Schema(format!(
                "payload has {} records, header announces {}",
                records.len(),
                header.count
            )));
        }
        let mut samples = Vec::with_capacity(records.len());
        for (rec, &lam) in records.iter().zip(&header.lambdas) {
            if rec[0].to_bits() != lam.to_bits() {
                return Err(Error::Schema(format!(
                    "record lambda {} does not match header {lam}",
                    rec[0]
                )));
            }
            samples.push(DNMatrix::new(lam, DMatrix::from_row_slice(m, m, &rec[1..])));
        }
        Ok(Self {
            n: header.n,
            samples,
            dropped: header.dropped,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_file(n: usize, vals: &[f64]) -> DnFile {
        let m = 4 * (n + 1);
        let samples = vals
            .chunks(m * m)
            .filter(|c| c.len() == m * m)
            .enumerate()
            .map(|(i, c)| DNMatrix::new(1.0 + i as f64 * 0.37, DMatrix::from_row_slice(m, m, c)))
            .collect();
        DnFile {
            n,
            samples,
            dropped: vec![DroppedLambda {
                lambda: 2.46,
                reason: Reason::NearT0 { point: 2.4674 },
            }],
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn csv_roundtrip_is_bit_exact(
            vals in proptest::collection::vec(
                prop_oneof![any::<f64>().prop_filter("finite", |x| x.is_finite()), -1e3f64..1e3],
                16..80,
            )
        ) {
            let file = random_file(0, &vals);
            for payload in [Payload::Csv, Payload::Binary] {
                let mut buf = Vec::new();
                file.write_to(&mut buf, payload).unwrap();
                let back = DnFile::read_from(&buf[..]).unwrap();
                prop_assert_eq!(back.samples.len(), file.samples.len());
                for (a, b) in back.samples.iter().zip(&file.samples) {
                    for (x, y) in a.entries.iter().zip(b.entries.iter()) {
                        prop_assert_eq!(x.to_bits(), y.to_bits());
                    }
                }
                prop_assert_eq!(&back.dropped, &file.dropped);
            }
        }
    }

    #[test]
    fn truncated_payload_is_a_schema_error() {
        let file = random_file(0, &(0..64).map(f64::from).collect::<Vec<_>>());
        for payload in [Payload::Csv, Payload::Binary] {
            let mut buf = Vec::new();
            file.write_to(&mut buf, payload).unwrap();
            buf.truncate(buf.len() - 20);
            assert!(matches!(DnFile::read_from(&buf[..]), Err(Error::Schema(_))));
        }
        assert!(matches!(
            DnFile::read_from(&b"not json\n"[..]),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn forward_file_logs_dropped_points() {
        let region = Region::new(0);
        let grid = [2.0, std::f64::consts::PI.powi(2), 5.0];
        let f = DnFile::from_forward(&region, &EdgePotentials::new(), &grid).unwrap();
        assert_eq!(f.samples.len(), 2);
        assert_eq!(f.dropped.len(), 1);
        assert!(matches!(f.dropped[0].reason, Reason::NearT0 { .. }));
    }
}
