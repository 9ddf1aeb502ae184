use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::FuelHierarchy;

pub const ID_COLUMNS: [&str; 4] = ["survey_id", "country", "year", "area"];
pub const TRAILING_COLUMNS: [&str; 3] = ["nonresponse", "total", "flags"];

/// Tolerance for proportions within one tier summing past their parent.
const TIER_SUM_TOLERANCE: f64 = 1e-9;
/// Tolerance between a reported parent and the sum of a complete set of children.
const AGGREGATE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Area {
    Urban,
    Rural,
    Overall,
}

impl Area {
    pub const ALL: [Area; 3] = [Area::Urban, Area::Rural, Area::Overall];

    pub fn as_str(self) -> &'static str {
        match self {
            Area::Urban => "urban",
            Area::Rural => "rural",
            Area::Overall => "overall",
        }
    }

    /// Index among the two modelled areas; `None` for overall.
    pub fn modelled_index(self) -> Option<usize> {
        match self {
            Area::Urban => Some(0),
            Area::Rural => Some(1),
            Area::Overall => None,
        }
    }
}

impl fmt::Display for Area {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Area {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "urban" => Ok(Area::Urban),
            "rural" => Ok(Area::Rural),
            "overall" | "total" | "national" => Ok(Area::Overall),
            other => Err(format!("unknown area `{other}`")),
        }
    }
}

/// One survey x area record.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveyObservation {
    pub survey_id: String,
    pub country: String,
    pub year: i32,
    pub area: Area,
    /// One entry per hierarchy node; `None` when not reported.
    pub proportions: Vec<Option<f64>>,
    /// Combined unlisted-fuel / no-cooking / non-response share.
    pub nonresponse: Option<f64>,
    pub respondent_total: Option<u64>,
    pub flags: BTreeSet<String>,
}

impl SurveyObservation {
    pub fn new(survey_id: &str, country: &str, year: i32, area: Area, n_nodes: usize) -> Self {
        Self {
            survey_id: survey_id.to_string(),
            country: country.to_string(),
            year,
            area,
            proportions: vec![None; n_nodes],
            nonresponse: None,
            respondent_total: None,
            flags: BTreeSet::new(),
        }
    }

    pub fn reported_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.proportions
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|_| i))
    }
}

enum Column {
    Id(usize),
    Node(usize),
    NonResponse,
    Total,
    Flags,
}

fn parse_unit(value: &str, row: usize, column: &str) -> Result<Option<f64>> {
    let value = value.trim();
    if value.is_empty() {
        return Ok(None);
    }
    let x: f64 = value.parse().map_err(|_| Error::Schema {
        row,
        message: format!("column `{column}`: `{value}` is not a number"),
    })?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Range {
            row,
            message: format!("column `{column}`: proportion {x} outside [0, 1]"),
        });
    }
    Ok(Some(x))
}

/// Reads survey records in the documented CSV layout.
pub fn read_surveys<R: Read>(
    reader: R,
    hierarchy: &FuelHierarchy,
) -> Result<Vec<SurveyObservation>> {
    let mut csv = csv::ReaderBuilder::new()
        .flexible(false)
        .from_reader(reader);
    let headers = csv.headers()?.clone();
    let mut columns = Vec::with_capacity(headers.len());
    for name in headers.iter() {
        let name = name.trim();
        let col = if let Some(i) = ID_COLUMNS.iter().position(|c| *c == name) {
            Column::Id(i)
        } else if let Some(n) = hierarchy.node_index(name) {
            Column::Node(n)
        } else {
            match name {
                "nonresponse" => Column::NonResponse,
                "total" => Column::Total,
                "flags" => Column::Flags,
                other => {
                    return Err(Error::Schema {
                        row: 1,
                        message: format!("unknown column `{other}`"),
                    })
                }
            }
        };
        columns.push(col);
    }
    for required in ID_COLUMNS {
        if !headers.iter().any(|h| h.trim() == required) {
            return Err(Error::Schema {
                row: 1,
                message: format!("missing required column `{required}`"),
            });
        }
    }

    let mut out = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Schema {
            row,
            message: e.to_string(),
        })?;
        let mut obs = SurveyObservation::new("", "", 0, Area::Overall, hierarchy.n_nodes());
        for (col, (field, header)) in columns.iter().zip(record.iter().zip(headers.iter())) {
            match col {
                Column::Id(0) => obs.survey_id = field.trim().to_string(),
                Column::Id(1) => obs.country = field.trim().to_string(),
                Column::Id(2) => {
                    obs.year = field.trim().parse().map_err(|_| Error::Schema {
                        row,
                        message: format!("year `{field}` is not an integer"),
                    })?
                }
                Column::Id(_) => {
                    obs.area = field
                        .parse()
                        .map_err(|message| Error::Schema { row, message })?
                }
                Column::Node(n) => obs.proportions[*n] = parse_unit(field, row, header)?,
                Column::NonResponse => obs.nonresponse = parse_unit(field, row, header)?,
                Column::Total => {
                    let field = field.trim();
                    if !field.is_empty() {
                        let total: u64 = field.parse().map_err(|_| Error::Schema {
                            row,
                            message: format!("total `{field}` is not a non-negative integer"),
                        })?;
                        if total == 0 {
                            return Err(Error::Range {
                                row,
                                message: "respondent total must be positive".into(),
                            });
                        }
                        obs.respondent_total = Some(total);
                    }
                }
                Column::Flags => {
                    obs.flags = field
                        .split(';')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(str::to_string)
                        .collect()
                }
            }
        }
        if obs.survey_id.is_empty() || obs.country.is_empty() {
            return Err(Error::Schema {
                row,
                message: "survey_id and country must be non-empty".into(),
            });
        }
        check_tiers(&obs, hierarchy, row)?;
        out.push(obs);
    }
    Ok(out)
}

fn check_tiers(obs: &SurveyObservation, hierarchy: &FuelHierarchy, row: usize) -> Result<()> {
    for tier in hierarchy.tiers() {
        let present: Vec<f64> = tier
            .children
            .iter()
            .filter_map(|&c| obs.proportions[c])
            .collect();
        let sum: f64 = present.iter().sum();
        let parent = tier.parent.map_or(Some(1.0), |p| obs.proportions[p]);
        if sum > 1.0 + TIER_SUM_TOLERANCE {
            return Err(Error::Range {
                row,
                message: format!("tier `{}` proportions sum to {sum}", tier.name),
            });
        }
        if let (Some(p), Some(_)) = (parent, tier.parent) {
            if sum > p + AGGREGATE_TOLERANCE {
                return Err(Error::Schema {
                    row,
                    message: format!(
                        "tier `{}` children sum to {sum}, above their parent {p}",
                        tier.name
                    ),
                });
            }
            if present.len() == tier.children.len() && (sum - p).abs() > AGGREGATE_TOLERANCE {
                return Err(Error::Schema {
                    row,
                    message: format!(
                        "tier `{}` children sum to {sum}, parent reports {p}",
                        tier.name
                    ),
                });
            }
        }
    }
    Ok(())
}

pub fn load_surveys(
    path: impl AsRef<Path>,
    hierarchy: &FuelHierarchy,
) -> Result<Vec<SurveyObservation>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_surveys(file, hierarchy)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_surveys<W: Write>(
    writer: W,
    hierarchy: &FuelHierarchy,
    records: &[SurveyObservation],
) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = ID_COLUMNS.to_vec();
    header.extend(hierarchy.nodes().iter().map(String::as_str));
    header.extend(TRAILING_COLUMNS);
    csv.write_record(&header)?;
    for r in records {
        let mut fields = vec![
            r.survey_id.clone(),
            r.country.clone(),
            r.year.to_string(),
            r.area.to_string(),
        ];
        fields.extend(r.proportions.iter().map(|&p| fmt_opt(p)));
        fields.push(fmt_opt(r.nonresponse));
        fields.push(
            r.respondent_total
                .map(|t| t.to_string())
                .unwrap_or_default(),
        );
        fields.push(r.flags.iter().cloned().collect::<Vec<_>>().join(";"));
        csv.write_record(&fields)?;
    }
    csv.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_surveys(
    path: impl AsRef<Path>,
    hierarchy: &FuelHierarchy,
    records: &[SurveyObservation],
) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_surveys(std::io::BufWriter::new(file), hierarchy, records)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str =
        "survey_id,country,year,area,wood,cropwaste,dung,charcoal,coal,biomass,solid,kerosene,gas,electricity,others,nonresponse,total,flags\n";

    #[test]
    fn header_only_gives_empty_list() {
        let h = FuelHierarchy::default();
        assert!(read_surveys(HEADER.as_bytes(), &h).unwrap().is_empty());
    }

    #[test]
    fn out_of_range_proportion_names_the_row() {
        let h = FuelHierarchy::default();
        let text = format!(
            "{HEADER}s1,AAA,2000,urban,0.1,,,,,,,,,,,,,\ns2,AAA,2001,rural,1.2,,,,,,,,,,,,,\n"
        );
        match read_surveys(text.as_bytes(), &h) {
            Err(Error::Range { row, .. }) => assert_eq!(row, 3),
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_fuel_column_is_rejected() {
        let h = FuelHierarchy::default();
        let text = "survey_id,country,year,area,lpg\ns1,AAA,2000,urban,0.2\n";
        assert!(matches!(
            read_surveys(text.as_bytes(), &h),
            Err(Error::Schema { row: 1, .. })
        ));
    }

    #[test]
    fn inconsistent_aggregate_is_rejected() {
        let h = FuelHierarchy::default();
        // biomass 0.5 but wood + cropwaste + dung = 0.6
        let text = format!("{HEADER}s1,AAA,2000,urban,0.3,0.2,0.1,,,0.5,0.7,,,,,,,\n");
        assert!(matches!(
            read_surveys(text.as_bytes(), &h),
            Err(Error::Schema { row: 2, .. })
        ));
        let ok = format!("{HEADER}s1,AAA,2000,urban,0.3,0.1,0.1,,,0.5,0.7,,,,,,,\n");
        assert_eq!(read_surveys(ok.as_bytes(), &h).unwrap().len(), 1);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let h = FuelHierarchy::default();
        let mut a = SurveyObservation::new("DHS-1", "GHA", 2003, Area::Rural, h.n_nodes());
        a.proportions[h.node_index("solid").unwrap()] = Some(0.1 + 0.2 + 0.3);
        a.proportions[h.node_index("kerosene").unwrap()] = Some(1.0 / 3.0);
        a.proportions[h.node_index("wood").unwrap()] = Some(0.123456789012345678);
        a.nonresponse = Some(0.01);
        a.respondent_total = Some(5012);
        a.flags.insert("unsuitable".into());
        a.flags.insert("x".into());
        let mut b = SurveyObservation::new("MICS,2", "GHA", 2010, Area::Overall, h.n_nodes());
        b.proportions[h.node_index("gas").unwrap()] = Some(0.0);
        let mut buf = Vec::new();
        write_surveys(&mut buf, &h, &[a.clone(), b.clone()]).unwrap();
        let back = read_surveys(buf.as_slice(), &h).unwrap();
        assert_eq!(back, vec![a, b]);
        for (x, y) in back[0].proportions.iter().zip(&back[0].proportions) {
            assert_eq!(x.map(f64::to_bits), y.map(f64::to_bits));
        }
    }
}
