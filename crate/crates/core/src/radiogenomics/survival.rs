//! Survival records, day-band classes and the survival CSV.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{data_err, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SurvivalClass {
    Short,
    Medium,
    Long,
}

impl SurvivalClass {
    pub const ALL: [SurvivalClass; 3] = [SurvivalClass::Short, SurvivalClass::Medium, SurvivalClass::Long];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }

    pub fn abbrev(self) -> &'static str {
        match self {
            SurvivalClass::Short => "S",
            SurvivalClass::Medium => "M",
            SurvivalClass::Long => "L",
        }
    }
}

impl fmt::Display for SurvivalClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SurvivalClass::Short => "short",
            SurvivalClass::Medium => "medium",
            SurvivalClass::Long => "long",
        })
    }
}

/// Day bands: short below `short_below`, long above `long_above`, medium between (inclusive).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub short_below: f64,
    pub long_above: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            short_below: 305.0,
            long_above: 456.0,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.short_below > 0.0 && self.short_below <= self.long_above) {
            return Err(Error::Config(format!(
                "survival thresholds must satisfy 0 < short_below ≤ long_above, got {} / {}",
                self.short_below, self.long_above
            )));
        }
        Ok(())
    }

    /// Banding of a possibly fractional day count (model outputs).
    pub fn band(&self, days: f64) -> SurvivalClass {
        if days < self.short_below {
            SurvivalClass::Short
        } else if days > self.long_above {
            SurvivalClass::Long
        } else {
            SurvivalClass::Medium
        }
    }
}

pub fn classify_survival(days: i64, th: &Thresholds) -> Result<SurvivalClass> {
    th.validate()?;
    if days <= 0 {
        return Err(data_err(format!("survival days must be positive, got {days}")));
    }
    Ok(th.band(days as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub id: String,
    pub days: u32,
    pub class: SurvivalClass,
    pub age: Option<f64>,
}

impl SurvivalRecord {
    pub fn new(id: impl Into<String>, days: u32, age: Option<f64>, th: &Thresholds) -> Result<Self> {
        let class = classify_survival(i64::from(days), th)?;
        Ok(Self {
            id: id.into(),
            days,
            class,
            age,
        })
    }
}

/// Reads `id, days, age` rows; an empty age cell means unknown.
pub fn read_survival(r: impl Read, th: &Thresholds) -> Result<Vec<SurvivalRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(data_err(format!("survival row {} needs id and days", line + 1)));
        }
        let days: i64 = rec[1]
            .trim()
            .parse()
            .map_err(|_| data_err(format!("survival row {}: bad days `{}`", line + 1, &rec[1])))?;
        let age = match rec.get(2).map(str::trim) {
            None | Some("") => None,
            Some(a) => Some(a.parse().map_err(|_| data_err(format!("survival row {}: bad age `{a}`", line + 1)))?),
        };
        let days = u32::try_from(days).map_err(|_| data_err(format!("survival row {}: days must be positive", line + 1)))?;
        out.push(SurvivalRecord::new(&rec[0], days, age, th)?);
    }
    Ok(out)
}

pub fn write_survival(records: &[SurvivalRecord], w: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["id", "days", "age"])?;
    for r in records {
        let age = r.age.map(|a| format!("{a:?}")).unwrap_or_default();
        wtr.write_record([r.id.as_str(), &r.days.to_string(), &age])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn load_survival(path: impl AsRef<Path>, th: &Thresholds) -> Result<Vec<SurvivalRecord>> {
    read_survival(std::fs::File::open(path)?, th)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn banding_defaults() {
        let th = Thresholds::default();
        assert_eq!(classify_survival(200, &th).unwrap(), SurvivalClass::Short);
        assert_eq!(classify_survival(400, &th).unwrap(), SurvivalClass::Medium);
        assert_eq!(classify_survival(600, &th).unwrap(), SurvivalClass::Long);
        assert_eq!(classify_survival(305, &th).unwrap(), SurvivalClass::Medium);
        assert_eq!(classify_survival(456, &th).unwrap(), SurvivalClass::Medium);
        assert!(classify_survival(0, &th).is_err());
        assert!(classify_survival(10, &Thresholds { short_below: 500.0, long_above: 100.0 }).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let th = Thresholds::default();
        let recs = vec![
            SurvivalRecord::new("a", 100, Some(61.5), &th).unwrap(),
            SurvivalRecord::new("b", 700, None, &th).unwrap(),
        ];
        let mut buf = Vec::new();
        write_survival(&recs, &mut buf).unwrap();
        assert_eq!(read_survival(buf.as_slice(), &th).unwrap(), recs);
    }
}
