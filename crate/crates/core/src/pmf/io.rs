//! JSON (`{"offset": .., "probs": [..]}`) and two-column CSV
//! (`point,probability`) encodings of [`LatticePmf`]. Probabilities are written
//! with 17 significant digits so both encodings round-trip bit-exactly.

use std::io::{Read, Write};

use super::LatticePmf;
use crate::error::{Error, Result};

impl LatticePmf {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Writes every point of the (tight) support, including interior zeros.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["point", "probability"])?;
        for (x, p) in self.iter() {
            w.write_record([x.to_string(), format!("{p:.16e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut entries: Vec<(i64, f64)> = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let parse_err = || {
                Error::Construction(format!(
                    "malformed CSV row {:?}",
                    rec.iter().collect::<Vec<_>>()
                ))
            };
            let x: i64 = rec
                .get(0)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(parse_err)?;
            let p: f64 = rec
                .get(1)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(parse_err)?;
            entries.push((x, p));
        }
        if entries.is_empty() {
            return Err(Error::Construction("empty CSV".into()));
        }
        entries.sort_by_key(|e| e.0);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Construction("duplicate point in CSV".into()));
        }
        let lo = entries[0].0;
        let hi = entries[entries.len() - 1].0;
        let mut probs = vec![0.0; (hi - lo + 1) as usize];
        for (x, p) in entries {
            probs[(x - lo) as usize] = p;
        }
        Self::new(lo, probs)
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Construction(e.to_string()))
    }
}
