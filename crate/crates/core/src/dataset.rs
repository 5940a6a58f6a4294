//! Datasets on disk, splitting, and synthetic instance generation.
//!
//! A dataset directory holds comma-separated tables with header rows:
//!
//! | file                  | columns                                  |
//! |-----------------------|------------------------------------------|
//! | `queries.csv`         | `query_id,token_count[,text]`            |
//! | `prices.csv`          | `llm_id,name,price_per_token`            |
//! | `labels.csv`          | `query_id,llm_id,correct`                |
//! | `features.csv`        | `query_id,f0,...,f{d-1}` (optional)      |
//! | `cost_overrides.csv`  | `query_id,llm_id,cost` (optional)        |
//!
//! Ids are dense (`0..n`, `0..m`). Every `(query, llm)` pair must have
//! exactly one label.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{compute_cost_matrix, CostMatrix, LabelMatrix, LlmCandidate, Matrix, Query};

pub const QUERIES_FILE: &str = "queries.csv";
pub const PRICES_FILE: &str = "prices.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const FEATURES_FILE: &str = "features.csv";
pub const OVERRIDES_FILE: &str = "cost_overrides.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub queries: Vec<Query>,
    pub llms: Vec<LlmCandidate>,
    pub labels: LabelMatrix,
    /// Explicit `(query, llm)` costs replacing `token_count * price`.
    pub cost_overrides: BTreeMap<(usize, usize), f64>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.queries.len()
    }

    pub fn m(&self) -> usize {
        self.llms.len()
    }

    /// Feature dimension shared by all queries carrying features.
    pub fn feature_dim(&self) -> Option<usize> {
        self.queries
            .iter()
            .find_map(|q| q.features.as_ref().map(Vec::len))
    }

    pub fn cost_matrix(&self) -> Result<CostMatrix> {
        let base = compute_cost_matrix(&self.queries, &self.llms)?;
        if self.cost_overrides.is_empty() {
            return Ok(base);
        }
        let mut m = base.into_inner();
        for (&(i, k), &v) in &self.cost_overrides {
            m.set(i, k, v);
        }
        CostMatrix::new(m)
    }

    /// Checks shapes, id density and value ranges.
    pub fn validate(&self) -> Result<()> {
        let ctx = "dataset";
        if self.queries.is_empty() || self.llms.is_empty() {
            return Err(Error::validation(
                ctx,
                "needs at least one query and one LLM",
            ));
        }
        if self.labels.rows() != self.n() || self.labels.cols() != self.m() {
            return Err(Error::validation(
                ctx,
                format!(
                    "label matrix is {}x{}, expected {}x{}",
                    self.labels.rows(),
                    self.labels.cols(),
                    self.n(),
                    self.m()
                ),
            ));
        }
        for (i, q) in self.queries.iter().enumerate() {
            if q.id != i {
                return Err(Error::validation(
                    ctx,
                    format!("query at position {i} has id {}", q.id),
                ));
            }
        }
        for (k, l) in self.llms.iter().enumerate() {
            if l.id != k {
                return Err(Error::validation(
                    ctx,
                    format!("LLM at position {k} has id {}", l.id),
                ));
            }
            if !l.price_per_token.is_finite() || l.price_per_token < 0.0 {
                return Err(Error::validation(
                    ctx,
                    format!("LLM {k} has invalid price {}", l.price_per_token),
                ));
            }
        }
        if let Some(d) = self.feature_dim() {
            for q in &self.queries {
                if let Some(f) = &q.features {
                    if f.len() != d {
                        return Err(Error::validation(
                            ctx,
                            format!("query {} has {} features, expected {d}", q.id, f.len()),
                        ));
                    }
                    if f.iter().any(|v| !v.is_finite()) {
                        return Err(Error::validation(
                            ctx,
                            format!("query {} has a non-finite feature", q.id),
                        ));
                    }
                }
            }
        }
        for (&(i, k), &v) in &self.cost_overrides {
            if i >= self.n() || k >= self.m() {
                return Err(Error::validation(
                    ctx,
                    format!("cost override ({i}, {k}) out of range"),
                ));
            }
            if !v.is_finite() || v < 0.0 {
                return Err(Error::validation(
                    ctx,
                    format!("cost override ({i}, {k}) = {v} is invalid"),
                ));
            }
        }
        Ok(())
    }

    /// Loads `queries.csv`, `prices.csv`, `labels.csv` and, when present,
    /// `features.csv` and `cost_overrides.csv` from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let opt = |name: &str| {
            let p = dir.join(name);
            p.exists().then_some(p)
        };
        let features = opt(FEATURES_FILE);
        let mut ds = load_dataset(
            &dir.join(QUERIES_FILE),
            &dir.join(LABELS_FILE),
            &dir.join(PRICES_FILE),
            features.as_deref(),
        )?;
        if let Some(p) = opt(OVERRIDES_FILE) {
            ds.cost_overrides = read_overrides(&p, ds.n(), ds.m())?;
        }
        Ok(ds)
    }

    /// Writes the dataset in the layout read by [`Dataset::load_dir`].
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let has_text = self.queries.iter().any(|q| q.text.is_some());

        let mut w = Table::create(&dir.join(QUERIES_FILE))?;
        let mut header = vec!["query_id", "token_count"];
        if has_text {
            header.push("text");
        }
        w.row(header)?;
        for q in &self.queries {
            let mut rec = vec![q.id.to_string(), q.token_count.to_string()];
            if has_text {
                rec.push(q.text.clone().unwrap_or_default());
            }
            w.row(rec)?;
        }
        w.finish()?;

        let mut w = Table::create(&dir.join(PRICES_FILE))?;
        w.row(["llm_id", "name", "price_per_token"])?;
        for l in &self.llms {
            w.row([
                l.id.to_string(),
                l.name.clone(),
                l.price_per_token.to_string(),
            ])?;
        }
        w.finish()?;

        let mut w = Table::create(&dir.join(LABELS_FILE))?;
        w.row(["query_id", "llm_id", "correct"])?;
        for i in 0..self.n() {
            for k in 0..self.m() {
                w.row([
                    i.to_string(),
                    k.to_string(),
                    (self.labels.get(i, k) as u8).to_string(),
                ])?;
            }
        }
        w.finish()?;

        if let Some(d) = self.feature_dim() {
            let mut w = Table::create(&dir.join(FEATURES_FILE))?;
            let mut header = vec!["query_id".to_string()];
            header.extend((0..d).map(|j| format!("f{j}")));
            w.row(header)?;
            for q in &self.queries {
                if let Some(f) = &q.features {
                    let mut rec = vec![q.id.to_string()];
                    rec.extend(f.iter().map(|v| v.to_string()));
                    w.row(rec)?;
                }
            }
            w.finish()?;
        }

        if !self.cost_overrides.is_empty() {
            let mut w = Table::create(&dir.join(OVERRIDES_FILE))?;
            w.row(["query_id", "llm_id", "cost"])?;
            for (&(i, k), v) in &self.cost_overrides {
                w.row([i.to_string(), k.to_string(), v.to_string()])?;
            }
            w.finish()?;
        }
        Ok(())
    }

    /// Dataset restricted to the given queries, re-indexed densely in that order.
    pub fn subset(&self, query_ids: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = query_ids.iter().find(|&&i| i >= self.n()) {
            return Err(Error::InvalidInput(format!("unknown query id {bad}")));
        }
        let queries = query_ids
            .iter()
            .enumerate()
            .map(|(new, &old)| Query {
                id: new,
                ..self.queries[old].clone()
            })
            .collect();
        let position: BTreeMap<usize, usize> =
            query_ids.iter().enumerate().map(|(n, &o)| (o, n)).collect();
        let cost_overrides = self
            .cost_overrides
            .iter()
            .filter_map(|(&(i, k), &v)| position.get(&i).map(|&n| ((n, k), v)))
            .collect();
        Ok(Dataset {
            queries,
            llms: self.llms.clone(),
            labels: self.labels.select_rows(query_ids),
            cost_overrides,
        })
    }
}

struct Table {
    path: PathBuf,
    writer: csv::Writer<fs::File>,
}

impl Table {
    fn create(path: &Path) -> Result<Self> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(Table {
            path: path.into(),
            writer: csv::Writer::from_writer(file),
        })
    }

    fn row<I, T>(&mut self, rec: I) -> Result<()>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        self.writer
            .write_record(rec)
            .map_err(|e| csv_error(&self.path, e))
    }

    fn finish(mut self) -> Result<()> {
        self.writer.flush().map_err(|e| Error::io(&self.path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::validation(path.display().to_string(), format!("{other:?}")),
    }
}

/// A parsed table: header column positions plus records with line numbers.
struct Records {
    file: String,
    columns: Vec<String>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Records {
    fn read(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let name = path.display().to_string();
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(file);
        let columns = reader
            .headers()
            .map_err(|e| csv_error(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec));
        }
        Ok(Records {
            file: name,
            columns,
            rows,
        })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::validation(&self.file, format!("missing column `{name}`")))
    }

    fn optional_column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    fn parse<T: FromStr>(&self, line: u64, rec: &csv::StringRecord, col: usize) -> Result<T> {
        let raw = rec.get(col).unwrap_or("");
        raw.parse().map_err(|_| {
            Error::validation(
                &self.file,
                format!(
                    "line {line}: cannot parse `{}` value `{raw}`",
                    self.columns[col]
                ),
            )
        })
    }

    fn fail(&self, line: u64, msg: impl std::fmt::Display) -> Error {
        Error::validation(&self.file, format!("line {line}: {msg}"))
    }
}

fn parse_real(t: &Records, line: u64, rec: &csv::StringRecord, col: usize) -> Result<f64> {
    let v: f64 = t.parse(line, rec, col)?;
    if !v.is_finite() {
        return Err(t.fail(line, format!("`{}` must be finite", t.columns[col])));
    }
    Ok(v)
}

/// Places `(id, value)` pairs into a dense vector, rejecting gaps and repeats.
fn dense<T>(t: &Records, items: Vec<(u64, usize, T)>, what: &str) -> Result<Vec<T>> {
    let n = items.len();
    let mut slots: Vec<Option<T>> = (0..n).map(|_| None).collect();
    for (line, id, item) in items {
        if id >= n {
            return Err(t.fail(line, format!("{what} id {id} is not in 0..{n}")));
        }
        if slots[id].is_some() {
            return Err(t.fail(line, format!("duplicate {what} id {id}")));
        }
        slots[id] = Some(item);
    }
    Ok(slots.into_iter().map(|s| s.unwrap()).collect())
}

fn read_queries(path: &Path) -> Result<Vec<Query>> {
    let t = Records::read(path)?;
    let (id_col, tok_col) = (t.column("query_id")?, t.column("token_count")?);
    let text_col = t.optional_column("text");
    let mut items = Vec::with_capacity(t.rows.len());
    for (line, rec) in &t.rows {
        let id: usize = t.parse(*line, rec, id_col)?;
        let token_count: u64 = t.parse(*line, rec, tok_col)?;
        let text = text_col
            .and_then(|c| rec.get(c))
            .filter(|s| !s.is_empty())
            .map(str::to_string);
        items.push((
            *line,
            id,
            Query {
                id,
                token_count,
                text,
                features: None,
            },
        ));
    }
    dense(&t, items, "query")
}

fn read_prices(path: &Path) -> Result<Vec<LlmCandidate>> {
    let t = Records::read(path)?;
    let (id_col, name_col, price_col) = (
        t.column("llm_id")?,
        t.column("name")?,
        t.column("price_per_token")?,
    );
    let mut items = Vec::with_capacity(t.rows.len());
    for (line, rec) in &t.rows {
        let id: usize = t.parse(*line, rec, id_col)?;
        let price = parse_real(&t, *line, rec, price_col)?;
        if price < 0.0 {
            return Err(t.fail(*line, format!("negative price {price}")));
        }
        let name = rec.get(name_col).unwrap_or("").to_string();
        items.push((
            *line,
            id,
            LlmCandidate {
                id,
                name,
                price_per_token: price,
            },
        ));
    }
    dense(&t, items, "LLM")
}

fn read_labels(path: &Path, n: usize, m: usize) -> Result<LabelMatrix> {
    let t = Records::read(path)?;
    let (q_col, l_col, c_col) = (
        t.column("query_id")?,
        t.column("llm_id")?,
        t.column("correct")?,
    );
    let mut seen = vec![false; n * m];
    let mut values = Matrix::zeros(n, m);
    for (line, rec) in &t.rows {
        let i: usize = t.parse(*line, rec, q_col)?;
        let k: usize = t.parse(*line, rec, l_col)?;
        if i >= n || k >= m {
            return Err(t.fail(
                *line,
                format!("label for unknown pair (query {i}, llm {k})"),
            ));
        }
        let v = match rec.get(c_col).unwrap_or("") {
            "0" => 0.0,
            "1" => 1.0,
            other => return Err(t.fail(*line, format!("label `{other}` is not 0 or 1"))),
        };
        if std::mem::replace(&mut seen[i * m + k], true) {
            return Err(Error::DuplicateLabel {
                file: t.file.clone(),
                query_id: i,
                llm_id: k,
            });
        }
        values.set(i, k, v);
    }
    if let Some(pos) = seen.iter().position(|s| !s) {
        return Err(Error::validation(
            &t.file,
            format!("missing label for query {}, llm {}", pos / m, pos % m),
        ));
    }
    LabelMatrix::new(values)
}

fn read_features(path: &Path, queries: &mut [Query]) -> Result<()> {
    let t = Records::read(path)?;
    let id_col = t.column("query_id")?;
    let mut cols = Vec::new();
    while let Some(c) = t.optional_column(&format!("f{}", cols.len())) {
        cols.push(c);
    }
    if cols.is_empty() {
        return Err(Error::validation(&t.file, "no feature columns f0..."));
    }
    for (line, rec) in &t.rows {
        let id: usize = t.parse(*line, rec, id_col)?;
        let q = queries
            .get_mut(id)
            .ok_or_else(|| t.fail(*line, format!("features for unknown query {id}")))?;
        if q.features.is_some() {
            return Err(t.fail(*line, format!("duplicate features for query {id}")));
        }
        let f = cols
            .iter()
            .map(|&c| parse_real(&t, *line, rec, c))
            .collect::<Result<Vec<f64>>>()?;
        q.features = Some(f);
    }
    Ok(())
}

fn read_overrides(path: &Path, n: usize, m: usize) -> Result<BTreeMap<(usize, usize), f64>> {
    let t = Records::read(path)?;
    let (q_col, l_col, c_col) = (
        t.column("query_id")?,
        t.column("llm_id")?,
        t.column("cost")?,
    );
    let mut out = BTreeMap::new();
    for (line, rec) in &t.rows {
        let i: usize = t.parse(*line, rec, q_col)?;
        let k: usize = t.parse(*line, rec, l_col)?;
        if i >= n || k >= m {
            return Err(t.fail(
                *line,
                format!("override for unknown pair (query {i}, llm {k})"),
            ));
        }
        let v = parse_real(&t, *line, rec, c_col)?;
        if v < 0.0 {
            return Err(t.fail(*line, format!("negative cost {v}")));
        }
        if out.insert((i, k), v).is_some() {
            return Err(t.fail(
                *line,
                format!("duplicate override for (query {i}, llm {k})"),
            ));
        }
    }
    Ok(out)
}

/// Reads and validates a dataset from its component tables.
pub fn load_dataset(
    queries_path: &Path,
    labels_path: &Path,
    prices_path: &Path,
    features_path: Option<&Path>,
) -> Result<Dataset> {
    let mut queries = read_queries(queries_path)?;
    let llms = read_prices(prices_path)?;
    let labels = read_labels(labels_path, queries.len(), llms.len())?;
    if let Some(p) = features_path {
        read_features(p, &mut queries)?;
    }
    if let Some(path) = features_path {
        if let Some(q) = queries
            .iter()
            .find(|q| q.features.is_none() && q.text.is_none())
        {
            return Err(Error::validation(
                path.display().to_string(),
                format!("query {} has neither features nor text", q.id),
            ));
        }
    }
    let ds = Dataset {
        queries,
        llms,
        labels,
        cost_overrides: BTreeMap::new(),
    };
    ds.validate()?;
    Ok(ds)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.01,
            val_fraction: 0.01,
            seed: 0,
        }
    }
}

/// Disjoint train/validation/test query indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub spec: SplitSpec,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

fn portion(fraction: f64, n: usize) -> usize {
    // tolerate representation error, e.g. 0.07 * 100 = 7.000000000000001
    (fraction * n as f64 - 1e-9).ceil().max(0.0) as usize
}

/// Seeded shuffle of `0..n`, then `ceil(f_train * n)` train and
/// `ceil(f_val * n)` validation indices; the rest is test.
pub fn split_dataset(n: usize, spec: &SplitSpec) -> Result<SplitRecord> {
    let ok = |f: f64| f > 0.0 && f < 1.0;
    if !ok(spec.train_fraction)
        || !ok(spec.val_fraction)
        || spec.train_fraction + spec.val_fraction >= 1.0
    {
        return Err(Error::InvalidSplit(format!(
            "fractions {} and {} must lie in (0, 1) and sum below 1",
            spec.train_fraction, spec.val_fraction
        )));
    }
    let n_train = portion(spec.train_fraction, n);
    let n_val = portion(spec.val_fraction, n);
    if n_train == 0 || n_val == 0 || n_train + n_val > n {
        return Err(Error::InvalidSplit(format!(
            "{n} queries cannot provide {n_train} training and {n_val} validation queries"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let test = idx.split_off(n_train + n_val);
    let val = idx.split_off(n_train);
    Ok(SplitRecord {
        spec: *spec,
        train: idx,
        val,
        test,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    /// Prices span this many decades.
    pub price_spread: f64,
    /// In `[-1, 1]`; positive makes pricier models stronger.
    pub difficulty_correlation: f64,
}

/// Cheapest synthetic price per token.
const BASE_PRICE: f64 = 1e-5;
/// Prices are rounded to multiples of 2^-32 so that every cost sum is exact.
const PRICE_QUANTUM: f64 = 1.0 / 4_294_967_296.0;
const SKILL_SCALE: f64 = 3.0;
const DIFFICULTY_SD: f64 = 1.5;
const PROXY_NOISE_SD: f64 = 0.25;

/// Seeded random dataset with latent per-LLM skill and per-query difficulty.
pub fn synth_instance(params: &SynthParams) -> Result<Dataset> {
    let SynthParams {
        n,
        m,
        seed,
        price_spread,
        difficulty_correlation: rho,
    } = *params;
    if n == 0 || m == 0 {
        return Err(Error::InvalidParameter("n and m must be positive".into()));
    }
    if !(price_spread.is_finite() && price_spread > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "price spread must be positive, got {price_spread}"
        )));
    }
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!(
            "difficulty correlation must lie in [-1, 1], got {rho}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut llms = Vec::with_capacity(m);
    let mut skill = Vec::with_capacity(m);
    for k in 0..m {
        let t: f64 = rng.random();
        let price = (BASE_PRICE * 10f64.powf(price_spread * t) / PRICE_QUANTUM)
            .round()
            .max(1.0)
            * PRICE_QUANTUM;
        let idiosyncratic: f64 = rng.random_range(-1.0..1.0);
        skill
            .push(SKILL_SCALE * (rho * (2.0 * t - 1.0) + (1.0 - rho * rho).sqrt() * idiosyncratic));
        llms.push(LlmCandidate {
            id: k,
            name: format!("llm-{k}"),
            price_per_token: price,
        });
    }

    let difficulty_dist = Normal::new(0.0, DIFFICULTY_SD).expect("valid normal");
    let proxy_noise = Normal::new(0.0, PROXY_NOISE_SD).expect("valid normal");
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let mut queries = Vec::with_capacity(n);
    let mut labels = Matrix::zeros(n, m);
    for i in 0..n {
        let token_count = rng.random_range(10..=500u64);
        let difficulty = difficulty_dist.sample(&mut rng);
        for (k, s) in skill.iter().enumerate() {
            let p = 1.0 / (1.0 + (difficulty - s).exp());
            labels.set(i, k, rng.random_bool(p) as u8 as f64);
        }
        let features = vec![
            difficulty + proxy_noise.sample(&mut rng),
            unit.sample(&mut rng),
        ];
        queries.push(Query {
            id: i,
            token_count,
            text: None,
            features: Some(features),
        });
    }
    Ok(Dataset {
        queries,
        llms,
        labels: LabelMatrix::new(labels)?,
        cost_overrides: BTreeMap::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) {
        fs::write(dir.join(name), body).unwrap();
    }

    fn minimal(dir: &Path) {
        write(
            dir,
            QUERIES_FILE,
            "query_id,token_count,text\n0,12,hello there\n",
        );
        write(
            dir,
            PRICES_FILE,
            "llm_id,name,price_per_token\n0,small,0.5\n",
        );
        write(dir, LABELS_FILE, "query_id,llm_id,correct\n0,0,1\n");
    }

    #[test]
    fn load_minimal() {
        let dir = tempfile::tempdir().unwrap();
        minimal(dir.path());
        let ds = Dataset::load_dir(dir.path()).unwrap();
        assert_eq!((ds.n(), ds.m()), (1, 1));
        assert_eq!(ds.queries[0].text.as_deref(), Some("hello there"));
        assert_eq!(ds.cost_matrix().unwrap().get(0, 0), 6.0);
    }

    #[test]
    fn missing_label_is_named() {
        let dir = tempfile::tempdir().unwrap();
        minimal(dir.path());
        write(
            dir.path(),
            PRICES_FILE,
            "llm_id,name,price_per_token\n0,a,0.5\n1,b,1.0\n",
        );
        let err = Dataset::load_dir(dir.path()).unwrap_err();
        assert!(
            err.to_string().contains("missing label for query 0, llm 1"),
            "{err}"
        );
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn duplicate_label_rejected() {
        let dir = tempfile::tempdir().unwrap();
        minimal(dir.path());
        write(
            dir.path(),
            LABELS_FILE,
            "query_id,llm_id,correct\n0,0,1\n0,0,0\n",
        );
        assert!(matches!(
            Dataset::load_dir(dir.path()),
            Err(Error::DuplicateLabel {
                query_id: 0,
                llm_id: 0,
                ..
            })
        ));
    }

    #[test]
    fn row_level_diagnostics() {
        let dir = tempfile::tempdir().unwrap();
        minimal(dir.path());
        write(dir.path(), LABELS_FILE, "query_id,llm_id,correct\n0,0,2\n");
        let err = Dataset::load_dir(dir.path()).unwrap_err().to_string();
        assert!(
            err.contains("line 2") && err.contains("not 0 or 1"),
            "{err}"
        );

        minimal(dir.path());
        write(
            dir.path(),
            PRICES_FILE,
            "llm_id,name,price_per_token\n0,a,-1\n",
        );
        let err = Dataset::load_dir(dir.path()).unwrap_err().to_string();
        assert!(err.contains("negative price"), "{err}");

        write(
            dir.path(),
            PRICES_FILE,
            "llm_id,name,price_per_token\n0,a,NaN\n",
        );
        let err = Dataset::load_dir(dir.path()).unwrap_err().to_string();
        assert!(err.contains("finite"), "{err}");

        minimal(dir.path());
        write(dir.path(), OVERRIDES_FILE, "query_id,llm_id,cost\n0,0,-3\n");
        let err = Dataset::load_dir(dir.path()).unwrap_err().to_string();
        assert!(err.contains("negative cost"), "{err}");

        minimal(dir.path());
        fs::remove_file(dir.path().join(OVERRIDES_FILE)).unwrap();
        write(dir.path(), QUERIES_FILE, "query_id,token_count\n1,5\n");
        let err = Dataset::load_dir(dir.path()).unwrap_err().to_string();
        assert!(err.contains("query id 1"), "{err}");
    }

    #[test]
    fn missing_file_is_not_found() {
        let dir = tempfile::tempdir().unwrap();
        let err = Dataset::load_dir(dir.path()).unwrap_err();
        assert!(matches!(err, Error::NotFound(_)));
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn features_required_without_text() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), QUERIES_FILE, "query_id,token_count\n0,3\n1,4\n");
        write(
            dir.path(),
            PRICES_FILE,
            "llm_id,name,price_per_token\n0,a,1\n",
        );
        write(
            dir.path(),
            LABELS_FILE,
            "query_id,llm_id,correct\n0,0,1\n1,0,0\n",
        );
        write(dir.path(), FEATURES_FILE, "query_id,f0,f1\n0,0.5,1.5\n");
        let err = Dataset::load_dir(dir.path()).unwrap_err().to_string();
        assert!(err.contains("query 1 has neither"), "{err}");
        write(
            dir.path(),
            FEATURES_FILE,
            "query_id,f0,f1\n0,0.5,1.5\n1,2,3\n",
        );
        let ds = Dataset::load_dir(dir.path()).unwrap();
        assert_eq!(ds.feature_dim(), Some(2));
    }

    #[test]
    fn overrides_apply() {
        let dir = tempfile::tempdir().unwrap();
        minimal(dir.path());
        write(
            dir.path(),
            OVERRIDES_FILE,
            "query_id,llm_id,cost\n0,0,0.25\n",
        );
        let ds = Dataset::load_dir(dir.path()).unwrap();
        assert_eq!(ds.cost_matrix().unwrap().get(0, 0), 0.25);
    }

    #[test]
    fn round_trip_synthetic() {
        let mut ds = synth_instance(&SynthParams {
            n: 30,
            m: 4,
            seed: 5,
            price_spread: 2.0,
            difficulty_correlation: 0.5,
        })
        .unwrap();
        ds.queries[3].text = Some("quoted, \"text\" with comma".into());
        ds.cost_overrides.insert((2, 1), 0.125);
        let dir = tempfile::tempdir().unwrap();
        ds.write_dir(dir.path()).unwrap();
        let back = Dataset::load_dir(dir.path()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let s = split_dataset(100, &SplitSpec::default()).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (1, 1, 98));
        let spec = SplitSpec {
            train_fraction: 0.07,
            val_fraction: 0.1,
            seed: 4,
        };
        let a = split_dataset(100, &spec).unwrap();
        assert_eq!((a.train.len(), a.val.len(), a.test.len()), (7, 10, 83));
        assert_eq!(a, split_dataset(100, &spec).unwrap());
        let mut all: Vec<usize> = [a.train.clone(), a.val.clone(), a.test.clone()].concat();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());

        let x = split_dataset(
            1000,
            &SplitSpec {
                seed: 1,
                ..SplitSpec::default()
            },
        )
        .unwrap();
        let y = split_dataset(
            1000,
            &SplitSpec {
                seed: 2,
                ..SplitSpec::default()
            },
        )
        .unwrap();
        assert_ne!(x.train, y.train);
    }

    #[test]
    fn split_rejects_empty_parts() {
        assert!(matches!(
            split_dataset(1, &SplitSpec::default()),
            Err(Error::InvalidSplit(_))
        ));
        for (t, v) in [(0.0, 0.1), (0.5, 0.5), (1.2, 0.1)] {
            let spec = SplitSpec {
                train_fraction: t,
                val_fraction: v,
                seed: 0,
            };
            assert!(matches!(
                split_dataset(50, &spec),
                Err(Error::InvalidSplit(_))
            ));
        }
    }

    #[test]
    fn synth_basic() {
        let p = SynthParams {
            n: 1,
            m: 1,
            seed: 0,
            price_spread: 1.0,
            difficulty_correlation: 0.0,
        };
        let ds = synth_instance(&p).unwrap();
        ds.validate().unwrap();
        assert_eq!((ds.n(), ds.m()), (1, 1));

        let p = SynthParams {
            n: 50,
            m: 3,
            seed: 11,
            price_spread: 2.0,
            difficulty_correlation: 0.3,
        };
        assert_eq!(synth_instance(&p).unwrap(), synth_instance(&p).unwrap());
        let ds = synth_instance(&p).unwrap();
        assert!(ds
            .queries
            .iter()
            .all(|q| (10..=500).contains(&q.token_count)));
        assert!(ds
            .llms
            .iter()
            .all(|l| (l.price_per_token / PRICE_QUANTUM).fract() == 0.0));

        assert!(synth_instance(&SynthParams { n: 0, ..p }).is_err());
        assert!(synth_instance(&SynthParams {
            difficulty_correlation: 1.5,
            ..p
        })
        .is_err());
        assert!(synth_instance(&SynthParams {
            price_spread: 0.0,
            ..p
        })
        .is_err());
    }

    #[test]
    fn synth_pricier_is_stronger_when_correlated() {
        for seed in 0..10 {
            let p = SynthParams {
                n: 2000,
                m: 3,
                seed,
                price_spread: 3.0,
                difficulty_correlation: 1.0,
            };
            let ds = synth_instance(&p).unwrap();
            let priciest = (0..3)
                .max_by(|&a, &b| {
                    ds.llms[a]
                        .price_per_token
                        .total_cmp(&ds.llms[b].price_per_token)
                })
                .unwrap();
            let mean =
                |k: usize| (0..ds.n()).map(|i| ds.labels.get(i, k)).sum::<f64>() / ds.n() as f64;
            let best = (0..3).max_by(|&a, &b| mean(a).total_cmp(&mean(b))).unwrap();
            assert_eq!(priciest, best, "seed {seed}");
        }
    }
}
