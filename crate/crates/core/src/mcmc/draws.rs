use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Retained draws of the monitored parameters.
///
/// `chains[chain][draw][param]`; every chain has the same length and the
/// parameter order follows `names`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    names: Vec<String>,
    chains: Vec<Vec<Vec<f64>>>,
    /// Sampler iteration (0-based) of each retained draw.
    iterations: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row<'a> {
    param: &'a str,
    chain: usize,
    iteration: usize,
    value: f64,
}

impl PosteriorDraws {
    pub fn new(names: Vec<String>, chains: Vec<Vec<Vec<f64>>>, iterations: Vec<usize>) -> Self {
        debug_assert!(chains.iter().all(|c| c.len() == iterations.len()));
        Self {
            names,
            chains,
            iterations,
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn n_draws(&self) -> usize {
        self.iterations.len()
    }

    pub fn iterations(&self) -> &[usize] {
        &self.iterations
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Draw vector `draw` of `chain`.
    pub fn draw(&self, chain: usize, draw: usize) -> &[f64] {
        &self.chains[chain][draw]
    }

    /// All draws, chain after chain.
    pub fn pooled(&self) -> impl Iterator<Item = &[f64]> {
        self.chains.iter().flat_map(|c| c.iter().map(Vec::as_slice))
    }

    /// Per-chain trace of one parameter.
    pub fn traces(&self, param: usize) -> Vec<Vec<f64>> {
        self.chains
            .iter()
            .map(|c| c.iter().map(|d| d[param]).collect())
            .collect()
    }

    /// Pooled values of one parameter.
    pub fn values(&self, param: usize) -> Vec<f64> {
        self.pooled().map(|d| d[param]).collect()
    }

    /// Long format: `param,chain,iteration,value`, one row per value.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (p, name) in self.names.iter().enumerate() {
            for (c, chain) in self.chains.iter().enumerate() {
                for (d, draw) in chain.iter().enumerate() {
                    w.serialize(Row {
                        param: name,
                        chain: c,
                        iteration: self.iterations[d],
                        value: draw[p],
                    })?;
                }
            }
        }
        w.flush().map_err(|e| Error::io("<draws>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut names: Vec<String> = Vec::new();
        let mut name_index: HashMap<String, usize> = HashMap::new();
        let mut iterations: Vec<usize> = Vec::new();
        let mut iter_index: HashMap<usize, usize> = HashMap::new();
        let mut values: Vec<(usize, usize, usize, f64)> = Vec::new();
        let mut n_chains = 0;
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let row = i + 2;
            let field = |j: usize| {
                rec.get(j).ok_or_else(|| Error::Schema {
                    row,
                    message: "expected 4 fields".into(),
                })
            };
            let name = field(0)?;
            let parse_usize = |s: &str| {
                s.parse::<usize>().map_err(|e| Error::Schema {
                    row,
                    message: format!("bad integer `{s}`: {e}"),
                })
            };
            let chain = parse_usize(field(1)?)?;
            let iteration = parse_usize(field(2)?)?;
            let value: f64 = field(3)?.parse().map_err(|e| Error::Schema {
                row,
                message: format!("bad value: {e}"),
            })?;
            let p = *name_index.entry(name.to_string()).or_insert_with(|| {
                names.push(name.to_string());
                names.len() - 1
            });
            let d = *iter_index.entry(iteration).or_insert_with(|| {
                iterations.push(iteration);
                iterations.len() - 1
            });
            n_chains = n_chains.max(chain + 1);
            values.push((p, chain, d, value));
        }
        if values.is_empty() {
            return Err(Error::EmptyInput("draws file has no rows".into()));
        }
        let expected = names.len() * n_chains * iterations.len();
        if values.len() != expected {
            return Err(Error::Schema {
                row: 1,
                message: format!(
                    "draws are ragged: {} rows for {} parameters x {} chains x {} draws",
                    values.len(),
                    names.len(),
                    n_chains,
                    iterations.len()
                ),
            });
        }
        // draw order is by iteration regardless of row order
        let mut order: Vec<usize> = (0..iterations.len()).collect();
        order.sort_by_key(|&d| iterations[d]);
        let mut rank = vec![0; order.len()];
        for (pos, &d) in order.iter().enumerate() {
            rank[d] = pos;
        }
        let mut chains = vec![vec![vec![f64::NAN; names.len()]; iterations.len()]; n_chains];
        for (p, c, d, v) in values {
            chains[c][rank[d]][p] = v;
        }
        if chains.iter().flatten().flatten().any(|v| v.is_nan()) {
            return Err(Error::Schema {
                row: 1,
                message: "draws file has missing or duplicated rows".into(),
            });
        }
        iterations.sort_unstable();
        Ok(Self {
            names,
            chains,
            iterations,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}
