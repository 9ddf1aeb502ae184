use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Country -> region -> super-region nesting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMap {
    countries: Vec<String>,
    regions: Vec<String>,
    super_regions: Vec<String>,
    region_of: Vec<usize>,
    super_of: Vec<usize>,
}

impl RegionMap {
    /// Builds the map from `(country, region, super_region)` rows.
    ///
    /// Countries, regions and super-regions are indexed in order of first appearance.
    pub fn from_rows<I, S>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, S, S)>,
        S: AsRef<str>,
    {
        let mut map = Self {
            countries: Vec::new(),
            regions: Vec::new(),
            super_regions: Vec::new(),
            region_of: Vec::new(),
            super_of: Vec::new(),
        };
        let mut region_super: BTreeMap<String, String> = BTreeMap::new();
        for (country, region, super_region) in rows {
            let (country, region, super_region) =
                (country.as_ref(), region.as_ref(), super_region.as_ref());
            if map.countries.iter().any(|c| c == country) {
                return Err(Error::Config(format!(
                    "country `{country}` listed twice in region map"
                )));
            }
            match region_super.get(region) {
                Some(s) if s != super_region => {
                    return Err(Error::Config(format!(
                        "region `{region}` assigned to super-regions `{s}` and `{super_region}`"
                    )))
                }
                Some(_) => {}
                None => {
                    region_super.insert(region.to_string(), super_region.to_string());
                    let s = match map.super_regions.iter().position(|x| x == super_region) {
                        Some(s) => s,
                        None => {
                            map.super_regions.push(super_region.to_string());
                            map.super_regions.len() - 1
                        }
                    };
                    map.regions.push(region.to_string());
                    map.super_of.push(s);
                }
            }
            let r = map
                .regions
                .iter()
                .position(|x| x == region)
                .expect("inserted above");
            map.countries.push(country.to_string());
            map.region_of.push(r);
        }
        if map.countries.is_empty() {
            return Err(Error::Config("region map is empty".into()));
        }
        Ok(map)
    }

    pub fn countries(&self) -> &[String] {
        &self.countries
    }

    pub fn regions(&self) -> &[String] {
        &self.regions
    }

    pub fn super_regions(&self) -> &[String] {
        &self.super_regions
    }

    pub fn n_countries(&self) -> usize {
        self.countries.len()
    }

    pub fn n_regions(&self) -> usize {
        self.regions.len()
    }

    pub fn n_super_regions(&self) -> usize {
        self.super_regions.len()
    }

    pub fn country_index(&self, name: &str) -> Option<usize> {
        self.countries.iter().position(|c| c == name)
    }

    pub fn region_of(&self, country: usize) -> usize {
        self.region_of[country]
    }

    pub fn super_of(&self, region: usize) -> usize {
        self.super_of[region]
    }

    pub fn countries_in(&self, region: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.countries.len()).filter(move |&c| self.region_of[c] == region)
    }

    pub fn regions_in(&self, super_region: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.regions.len()).filter(move |&r| self.super_of[r] == super_region)
    }

    /// `(country, region, super_region)` rows in index order.
    pub fn rows(&self) -> Vec<(String, String, String)> {
        (0..self.countries.len())
            .map(|c| {
                let r = self.region_of[c];
                (
                    self.countries[c].clone(),
                    self.regions[r].clone(),
                    self.super_regions[self.super_of[r]].clone(),
                )
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nests_and_rejects_conflicts() {
        let map = RegionMap::from_rows([
            ("A", "r1", "s1"),
            ("B", "r1", "s1"),
            ("C", "r2", "s1"),
            ("D", "r3", "s2"),
        ])
        .unwrap();
        assert_eq!(map.n_regions(), 3);
        assert_eq!(map.n_super_regions(), 2);
        assert_eq!(map.countries_in(0).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(map.super_of(map.region_of(3)), 1);
        assert!(RegionMap::from_rows([("A", "r1", "s1"), ("B", "r1", "s2")]).is_err());
        assert!(RegionMap::from_rows([("A", "r1", "s1"), ("A", "r1", "s1")]).is_err());
    }
}
