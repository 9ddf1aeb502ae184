//! Survey ingestion, selection, count conversion and auxiliary series.

mod counts;
mod select;
mod survey;
pub mod synth;
mod urban;

use std::io::{Read, Write};
use std::path::Path;

use serde::Deserialize;

pub use counts::{floor_count, node_counts, to_counts, DEFAULT_TOTAL};
pub use select::{
    select_surveys, Exclusion, ExclusionRule, DEFAULT_NONRESPONSE_THRESHOLD, UNSUITABLE_FLAG,
};
pub use survey::{
    load_surveys, read_surveys, save_surveys, write_surveys, Area, SurveyObservation,
};
pub use urban::{load_un_urban, read_un_urban, write_un_urban, UnUrbanSeries, URBAN_CLAMP};

use crate::error::{Error, Result};
use crate::model::RegionMap;

#[derive(Deserialize)]
struct RegionRow {
    country: String,
    region: String,
    super_region: String,
}

pub fn read_region_map<R: Read>(reader: R) -> Result<RegionMap> {
    let mut csv = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for (i, row) in csv.deserialize::<RegionRow>().enumerate() {
        let row = row.map_err(|e| Error::Schema {
            row: i + 2,
            message: e.to_string(),
        })?;
        rows.push((row.country, row.region, row.super_region));
    }
    RegionMap::from_rows(rows)
}

pub fn load_region_map(path: impl AsRef<Path>) -> Result<RegionMap> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_region_map(file)
}

pub fn write_region_map<W: Write>(writer: W, map: &RegionMap) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["country", "region", "super_region"])?;
    for (c, r, s) in map.rows() {
        csv.write_record([c, r, s])?;
    }
    csv.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
