//! Graph sources, squeezing flags and file I/O.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Args;
use cvcluster::gaussian::db_to_nats;
use cvcluster::graph::GraphJson;
use cvcluster::{Graph, PaperFixture};

/// Named graph (`chain:n`, `diamond`, `multirail:m`, `paper:<fixture>`) or a
/// JSON file `{"n": .., "edges": [[a, b], ..]}` with 1-based vertices.
pub fn load_graph(source: &str) -> Result<Graph> {
    if let Some(n) = source.strip_prefix("chain:") {
        let n: usize = n.parse().with_context(|| format!("bad chain length in `{source}`"))?;
        return Ok(Graph::chain(n)?);
    }
    if let Some(m) = source.strip_prefix("multirail:") {
        let m: usize = m.parse().with_context(|| format!("bad rail count in `{source}`"))?;
        return Ok(Graph::multirail(m)?);
    }
    if source == "diamond" {
        return Ok(Graph::diamond());
    }
    if source.starts_with("paper:") {
        return Ok(source.parse::<PaperFixture>()?.graph());
    }
    let json: GraphJson = read_json(source)?;
    Ok(Graph::from_json(&json)?)
}

/// Stored vector solution for this graph, if there is one.
pub fn fixture_for(g: &Graph) -> Option<PaperFixture> {
    PaperFixture::ALL.into_iter().find(|fx| fx.graph() == *g)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &str) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read `{path}`"))?;
    serde_json::from_str(&text).with_context(|| format!("`{path}` is not valid JSON for this input"))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write `{}`", path.display()))
}

/// At most one of the four may be given; units are never inferred.
#[derive(Debug, Clone, Default, Args)]
#[group(multiple = false)]
pub struct SqueezeArgs {
    /// Uniform input squeezing in nats.
    #[arg(long, value_name = "NATS", allow_negative_numbers = true)]
    pub squeeze: Option<f64>,
    /// Uniform input squeezing in dB.
    #[arg(long, value_name = "DB", allow_negative_numbers = true)]
    pub squeeze_db: Option<f64>,
    /// Per-column squeezing in nats, comma separated.
    #[arg(long, value_name = "NATS,..", value_delimiter = ',', allow_negative_numbers = true)]
    pub squeeze_list: Option<Vec<f64>>,
    /// Per-column squeezing in dB, comma separated.
    #[arg(long, value_name = "DB,..", value_delimiter = ',', allow_negative_numbers = true)]
    pub squeeze_db_list: Option<Vec<f64>>,
}

impl SqueezeArgs {
    pub fn given(&self) -> bool {
        self.squeeze.is_some() || self.squeeze_db.is_some() || self.squeeze_list.is_some() || self.squeeze_db_list.is_some()
    }

    /// Per-column values in nats, `default` when nothing was given.
    pub fn resolve(&self, n: usize, default: f64) -> Result<Vec<f64>> {
        let values = if let Some(r) = self.squeeze {
            vec![r; n]
        } else if let Some(db) = self.squeeze_db {
            vec![db_to_nats(db); n]
        } else if let Some(list) = &self.squeeze_list {
            list.clone()
        } else if let Some(list) = &self.squeeze_db_list {
            list.iter().map(|&db| db_to_nats(db)).collect()
        } else {
            vec![default; n]
        };
        check_values(&values, n)?;
        Ok(values)
    }

    /// Uniform value only, for flags that set one squeezing level.
    pub fn uniform(&self) -> Result<Option<f64>> {
        if self.squeeze_list.is_some() || self.squeeze_db_list.is_some() {
            bail!("a per-column list is not accepted here");
        }
        let r = self.squeeze.or(self.squeeze_db.map(db_to_nats));
        if let Some(r) = r {
            check_values(&[r], 1)?;
        }
        Ok(r)
    }
}

fn check_values(values: &[f64], n: usize) -> Result<()> {
    if values.len() != n {
        bail!("expected {n} squeezing values, got {}", values.len());
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        bail!("squeezing values must be finite, got {v}");
    }
    Ok(())
}
