use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

pub const URBAN_CLAMP: f64 = 1e-6;

/// UN urban-population proportions per country and year.
///
/// Lookups interpolate linearly between reported years and hold the end
/// values constant outside the reported range.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UnUrbanSeries {
    series: BTreeMap<String, BTreeMap<i32, f64>>,
}

#[derive(Deserialize)]
struct Row {
    country: String,
    year: i32,
    urban_proportion: f64,
}

impl UnUrbanSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, country: &str, year: i32, proportion: f64) {
        let p = proportion.clamp(URBAN_CLAMP, 1.0 - URBAN_CLAMP);
        self.series
            .entry(country.to_string())
            .or_default()
            .insert(year, p);
    }

    pub fn countries(&self) -> impl Iterator<Item = &str> {
        self.series.keys().map(String::as_str)
    }

    pub fn contains(&self, country: &str) -> bool {
        self.series.contains_key(country)
    }

    pub fn get(&self, country: &str, year: i32) -> Result<f64> {
        let points = self
            .series
            .get(country)
            .ok_or_else(|| Error::MissingOffset {
                country: country.to_string(),
                year,
            })?;
        if let Some(&p) = points.get(&year) {
            return Ok(p);
        }
        let below = points.range(..year).next_back();
        let above = points.range(year..).next();
        Ok(match (below, above) {
            (Some((&y0, &p0)), Some((&y1, &p1))) => {
                let w = f64::from(year - y0) / f64::from(y1 - y0);
                p0 + w * (p1 - p0)
            }
            (Some((_, &p)), None) | (None, Some((_, &p))) => p,
            (None, None) => unreachable!("series entries are never empty"),
        })
    }

    /// Fails with the full list of countries that have no series.
    pub fn require<'a>(&self, countries: impl IntoIterator<Item = &'a str>) -> Result<()> {
        let missing: Vec<String> = countries
            .into_iter()
            .filter(|c| !self.contains(c))
            .map(str::to_string)
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::MissingUrbanSeries(missing))
        }
    }
}

pub fn read_un_urban<R: Read>(reader: R) -> Result<UnUrbanSeries> {
    let mut csv = csv::Reader::from_reader(reader);
    let mut out = UnUrbanSeries::new();
    for (i, row) in csv.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| Error::Schema {
            row: i + 2,
            message: e.to_string(),
        })?;
        if !row.urban_proportion.is_finite() || !(0.0..=1.0).contains(&row.urban_proportion) {
            return Err(Error::Range {
                row: i + 2,
                message: format!("urban proportion {} outside [0, 1]", row.urban_proportion),
            });
        }
        out.insert(&row.country, row.year, row.urban_proportion);
    }
    Ok(out)
}

pub fn load_un_urban(path: impl AsRef<Path>) -> Result<UnUrbanSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_un_urban(file)
}

pub fn write_un_urban<W: Write>(writer: W, series: &UnUrbanSeries) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["country", "year", "urban_proportion"])?;
    for (country, points) in &series.series {
        for (year, p) in points {
            csv.write_record([country.clone(), year.to_string(), p.to_string()])?;
        }
    }
    csv.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamps_and_interpolates() {
        let text = "country,year,urban_proportion\nA,1990,0.4\nA,1992,0.6\nB,2000,0\n";
        let s = read_un_urban(text.as_bytes()).unwrap();
        assert!((s.get("A", 1991).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(s.get("A", 1980).unwrap(), 0.4);
        assert_eq!(s.get("A", 2017).unwrap(), 0.6);
        assert_eq!(s.get("B", 2000).unwrap(), 1e-6);
        assert!(matches!(s.get("C", 2000), Err(Error::MissingOffset { .. })));
        match s.require(["A", "C", "D"]) {
            Err(Error::MissingUrbanSeries(m)) => {
                assert_eq!(m, vec!["C".to_string(), "D".to_string()])
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn complete_series_round_trips() {
        let mut s = UnUrbanSeries::new();
        for y in 1990..=2017 {
            s.insert("X", y, 0.2 + 0.01 * f64::from(y - 1990));
        }
        let mut buf = Vec::new();
        write_un_urban(&mut buf, &s).unwrap();
        let back = read_un_urban(buf.as_slice()).unwrap();
        assert_eq!(back, s);
        for y in 1990..=2017 {
            assert_eq!(back.get("X", y).unwrap(), s.get("X", y).unwrap());
        }
    }
}
