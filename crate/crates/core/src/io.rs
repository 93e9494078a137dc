//! File formats: wide curve CSVs, the scalar table, and the on-disk draw
//! store. Every file is written under a `.partial` name and renamed into
//! place once complete.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fda::{FdaError, FunctionalDataset, Grid};
use crate::model::{DrawRecord, LatentSnapshot, PosteriorDraws};

pub const DRAWS_FILE: &str = "draws.csv";
pub const ALLOCATIONS_FILE: &str = "allocations.csv";
pub const SNAPSHOTS_FILE: &str = "latent_snapshots.csv";
pub const LATENT_MEAN_FILE: &str = "latent_mean.csv";
pub const DRAWS_META_FILE: &str = "draws_meta.json";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: malformed CSV: {message}", path.display())]
    MalformedCsv { path: PathBuf, message: String },
    #[error("{}: non-numeric cell at row {row}, column {col}: `{value}`", path.display())]
    NonNumericCell {
        path: PathBuf,
        row: usize,
        col: usize,
        value: String,
    },
    #[error("{}: duplicate id `{id}`", path.display())]
    DuplicateId { path: PathBuf, id: String },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{}: {source}", path.display())]
    Fda { path: PathBuf, source: FdaError },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn partial_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    path.with_file_name(name)
}

/// A file that only appears under its final name after [`AtomicFile::commit`].
pub struct AtomicFile {
    path: PathBuf,
    tmp: PathBuf,
    out: BufWriter<File>,
}

impl AtomicFile {
    pub fn create(path: &Path) -> Result<Self, IoError> {
        let tmp = partial_path(path);
        let file = File::create(&tmp).map_err(io_err(&tmp))?;
        Ok(Self {
            path: path.to_path_buf(),
            tmp,
            out: BufWriter::new(file),
        })
    }

    pub fn writer(&mut self) -> &mut BufWriter<File> {
        &mut self.out
    }

    pub fn commit(mut self) -> Result<(), IoError> {
        self.out.flush().map_err(io_err(&self.tmp))?;
        fs::rename(&self.tmp, &self.path).map_err(io_err(&self.path))
    }
}

/// CSV writer on top of [`AtomicFile`].
pub struct CsvSink {
    file: AtomicFile,
}

impl CsvSink {
    pub fn create<S: AsRef<str>>(path: &Path, header: &[S]) -> Result<Self, IoError> {
        let mut sink = Self {
            file: AtomicFile::create(path)?,
        };
        sink.record(header.iter().map(|h| h.as_ref().to_string()))?;
        Ok(sink)
    }

    pub fn record<I: IntoIterator<Item = String>>(&mut self, fields: I) -> Result<(), IoError> {
        let line = fields.into_iter().collect::<Vec<_>>().join(",");
        let tmp = self.file.tmp.clone();
        writeln!(self.file.writer(), "{line}").map_err(io_err(&tmp))
    }

    pub fn finish(self) -> Result<(), IoError> {
        self.file.commit()
    }
}

/// Pretty-printed JSON, written atomically.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut file = AtomicFile::create(path)?;
    serde_json::to_writer_pretty(file.writer(), value).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    writeln!(file.writer()).map_err(io_err(path))?;
    file.commit()
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Header plus rows of a CSV file, with every row as long as the header.
fn read_records(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), IoError> {
    let malformed = |message: String| IoError::MalformedCsv {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => IoError::Io {
                path: path.to_path_buf(),
                source,
            },
            other => malformed(format!("{other:?}")),
        })?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| malformed(e.to_string()))?;
        rows.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
    }
    if rows.is_empty() {
        return Err(malformed("file is empty".into()));
    }
    let header = rows.remove(0);
    Ok((header, rows))
}

fn parse_cell(path: &Path, row: usize, col: usize, value: &str) -> Result<f64, IoError> {
    value.parse::<f64>().map_err(|_| IoError::NonNumericCell {
        path: path.to_path_buf(),
        row,
        col,
        value: value.to_string(),
    })
}

/// Numeric block of a CSV: `rows[r][skip..]`. Reported row numbers are file
/// lines (the header is line 1) and columns are one-based.
fn numeric_block(path: &Path, rows: &[Vec<String>], skip: usize) -> Result<DMatrix<f64>, IoError> {
    let ncols = rows.first().map_or(0, |r| r.len().saturating_sub(skip));
    let mut out = DMatrix::zeros(rows.len(), ncols);
    for (r, row) in rows.iter().enumerate() {
        for (c, cell) in row.iter().skip(skip).enumerate() {
            out[(r, c)] = parse_cell(path, r + 2, c + skip + 1, cell)?;
        }
    }
    Ok(out)
}

fn check_unique_ids(path: &Path, ids: &[String]) -> Result<(), IoError> {
    let mut sorted: Vec<&String> = ids.iter().collect();
    sorted.sort();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(IoError::DuplicateId {
            path: path.to_path_buf(),
            id: w[0].clone(),
        });
    }
    Ok(())
}

/// Wide curve file: header `id,s_1,…,s_T`, one row per curve.
pub fn read_functional_csv(path: &Path) -> Result<FunctionalDataset, IoError> {
    let (header, rows) = read_records(path)?;
    if header.len() < 3 || header[0] != "id" {
        return Err(IoError::MalformedCsv {
            path: path.to_path_buf(),
            message: "header must be `id,s_1,...,s_T` with at least two grid points".into(),
        });
    }
    let points = header[1..]
        .iter()
        .enumerate()
        .map(|(c, v)| parse_cell(path, 1, c + 2, v))
        .collect::<Result<Vec<_>, _>>()?;
    let fda = |source| IoError::Fda {
        path: path.to_path_buf(),
        source,
    };
    let grid = Grid::new(points).map_err(fda)?;
    let ids: Vec<String> = rows.iter().map(|r| r[0].clone()).collect();
    check_unique_ids(path, &ids)?;
    let values = numeric_block(path, &rows, 1)?;
    FunctionalDataset::new(grid, values, ids).map_err(fda)
}

pub fn write_functional_csv(path: &Path, data: &FunctionalDataset) -> Result<(), IoError> {
    let header: Vec<String> = std::iter::once("id".to_string())
        .chain(data.grid().points().iter().map(|s| s.to_string()))
        .collect();
    let mut sink = CsvSink::create(path, &header)?;
    for (i, id) in data.curve_ids().iter().enumerate() {
        sink.record(std::iter::once(id.clone()).chain(data.values().row(i).iter().map(|v| v.to_string())))?;
    }
    sink.finish()
}

/// Scalar file `id,y,z_1,…,z_p` in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarTable {
    pub ids: Vec<String>,
    pub y: DVector<f64>,
    pub z: DMatrix<f64>,
    pub z_names: Vec<String>,
}

pub fn read_scalar_csv(path: &Path) -> Result<ScalarTable, IoError> {
    let (header, rows) = read_records(path)?;
    if header.len() < 2 || header[0] != "id" {
        return Err(IoError::MalformedCsv {
            path: path.to_path_buf(),
            message: "header must be `id,y,z_1,...,z_p`".into(),
        });
    }
    if rows.is_empty() {
        return Err(IoError::MalformedCsv {
            path: path.to_path_buf(),
            message: "no data rows".into(),
        });
    }
    let ids: Vec<String> = rows.iter().map(|r| r[0].clone()).collect();
    check_unique_ids(path, &ids)?;
    let block = numeric_block(path, &rows, 1)?;
    Ok(ScalarTable {
        ids,
        y: block.column(0).into_owned(),
        z: block.columns(1, block.ncols() - 1).into_owned(),
        z_names: header[2..].to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DrawsMeta {
    n_obs: usize,
    n_basis: usize,
    n_covariates: usize,
    x_truncation: usize,
}

fn fmt_all<'a, I: IntoIterator<Item = &'a f64>>(v: I) -> impl Iterator<Item = String> + use<'a, I> {
    v.into_iter().map(|x| x.to_string())
}

/// Writes the draw store into `dir`: `draws.csv` (one row per retained draw),
/// `allocations.csv` and `latent_snapshots.csv` when present,
/// `latent_mean.csv` and a small metadata file. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_draws(dir: &Path, draws: &PosteriorDraws) -> Result<(), IoError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let p = draws.records.first().map_or(0, |r| r.beta_z.len());
    let k = draws.latent_mean.ncols();
    let n = draws.latent_mean.nrows();

    let mut header = vec!["chain".to_string(), "iteration".into(), "alpha0".into()];
    header.extend((1..=p).map(|j| format!("beta_z_{j}")));
    header.extend((1..=k).map(|j| format!("gamma_{j}")));
    header.push("tau".into());
    let mut sink = CsvSink::create(&dir.join(DRAWS_FILE), &header)?;
    for r in &draws.records {
        let fields = [r.chain.to_string(), r.iteration.to_string(), r.alpha0.to_string()]
            .into_iter()
            .chain(fmt_all(r.beta_z.iter()))
            .chain(fmt_all(r.gamma.iter()))
            .chain(std::iter::once(r.tau.to_string()));
        sink.record(fields)?;
    }
    sink.finish()?;

    if draws.records.iter().any(|r| !r.x_allocations.is_empty()) {
        let mut header = vec!["chain".to_string(), "iteration".into()];
        header.extend((1..=n).map(|i| format!("z_{i}")));
        let mut sink = CsvSink::create(&dir.join(ALLOCATIONS_FILE), &header)?;
        for r in draws.records.iter().filter(|r| !r.x_allocations.is_empty()) {
            sink.record(
                [r.chain.to_string(), r.iteration.to_string()]
                    .into_iter()
                    .chain(r.x_allocations.iter().map(|z| z.to_string())),
            )?;
        }
        sink.finish()?;
    }

    let score_header = |lead: &[&str]| -> Vec<String> {
        lead.iter()
            .map(|s| s.to_string())
            .chain((1..=k).map(|j| format!("x_{j}")))
            .collect()
    };
    if !draws.snapshots.is_empty() {
        let mut sink = CsvSink::create(&dir.join(SNAPSHOTS_FILE), &score_header(&["chain", "iteration", "obs"]))?;
        for s in &draws.snapshots {
            for i in 0..s.scores.nrows() {
                sink.record(
                    [s.chain.to_string(), s.iteration.to_string(), (i + 1).to_string()]
                        .into_iter()
                        .chain(fmt_all(s.scores.row(i).iter())),
                )?;
            }
        }
        sink.finish()?;
    }

    let mut sink = CsvSink::create(&dir.join(LATENT_MEAN_FILE), &score_header(&["obs"]))?;
    for i in 0..n {
        sink.record(std::iter::once((i + 1).to_string()).chain(fmt_all(draws.latent_mean.row(i).iter())))?;
    }
    sink.finish()?;

    write_json(
        &dir.join(DRAWS_META_FILE),
        &DrawsMeta {
            n_obs: n,
            n_basis: k,
            n_covariates: p,
            x_truncation: draws.x_truncation,
        },
    )
}

fn parse_usize(path: &Path, row: usize, col: usize, value: &str) -> Result<usize, IoError> {
    value.parse::<usize>().map_err(|_| IoError::NonNumericCell {
        path: path.to_path_buf(),
        row,
        col,
        value: value.to_string(),
    })
}

fn expect_width(path: &Path, header: &[String], width: usize) -> Result<(), IoError> {
    if header.len() != width {
        return Err(IoError::MalformedCsv {
            path: path.to_path_buf(),
            message: format!("expected {width} columns, found {}", header.len()),
        });
    }
    Ok(())
}

/// Inverse of [`write_draws`].
pub fn read_draws(dir: &Path) -> Result<PosteriorDraws, IoError> {
    let meta: DrawsMeta = read_json(&dir.join(DRAWS_META_FILE))?;
    let (p, k, n) = (meta.n_covariates, meta.n_basis, meta.n_obs);

    let path = dir.join(DRAWS_FILE);
    let (header, rows) = read_records(&path)?;
    expect_width(&path, &header, 4 + p + k)?;
    let mut records = Vec::with_capacity(rows.len());
    for (r, row) in rows.iter().enumerate() {
        let line = r + 2;
        let num = |c: usize| parse_cell(&path, line, c + 1, &row[c]);
        records.push(DrawRecord {
            chain: parse_usize(&path, line, 1, &row[0])?,
            iteration: parse_usize(&path, line, 2, &row[1])?,
            alpha0: num(2)?,
            beta_z: DVector::from_iterator(p, (3..3 + p).map(num).collect::<Result<Vec<_>, _>>()?),
            gamma: DVector::from_iterator(k, (3 + p..3 + p + k).map(num).collect::<Result<Vec<_>, _>>()?),
            tau: num(3 + p + k)?,
            x_allocations: Vec::new(),
        });
    }

    let path = dir.join(ALLOCATIONS_FILE);
    if path.exists() {
        let (header, rows) = read_records(&path)?;
        expect_width(&path, &header, 2 + n)?;
        for (r, row) in rows.iter().enumerate() {
            let line = r + 2;
            let key = (
                parse_usize(&path, line, 1, &row[0])?,
                parse_usize(&path, line, 2, &row[1])?,
            );
            let alloc = row[2..]
                .iter()
                .enumerate()
                .map(|(c, v)| parse_usize(&path, line, c + 3, v).map(|z| z as u32))
                .collect::<Result<Vec<_>, _>>()?;
            let rec = records
                .iter_mut()
                .find(|d| (d.chain, d.iteration) == key)
                .ok_or_else(|| IoError::MalformedCsv {
                    path: path.clone(),
                    message: format!("allocations for unknown draw (chain {}, iteration {})", key.0, key.1),
                })?;
            rec.x_allocations = alloc;
        }
    }

    let mut snapshots: Vec<LatentSnapshot> = Vec::new();
    let path = dir.join(SNAPSHOTS_FILE);
    if path.exists() {
        let (header, rows) = read_records(&path)?;
        expect_width(&path, &header, 3 + k)?;
        let block = numeric_block(&path, &rows, 3)?;
        for (r, row) in rows.iter().enumerate() {
            let line = r + 2;
            let chain = parse_usize(&path, line, 1, &row[0])?;
            let iteration = parse_usize(&path, line, 2, &row[1])?;
            let obs = parse_usize(&path, line, 3, &row[2])?;
            if obs == 0 || obs > n {
                return Err(IoError::MalformedCsv {
                    path: path.clone(),
                    message: format!("observation index {obs} out of range on line {line}"),
                });
            }
            let needs_new = snapshots
                .last()
                .is_none_or(|s| (s.chain, s.iteration) != (chain, iteration));
            if needs_new {
                snapshots.push(LatentSnapshot {
                    chain,
                    iteration,
                    scores: DMatrix::zeros(n, k),
                });
            }
            let snap = snapshots.last_mut().expect("pushed above");
            snap.scores.set_row(obs - 1, &block.row(r));
        }
    }

    let path = dir.join(LATENT_MEAN_FILE);
    let (header, rows) = read_records(&path)?;
    expect_width(&path, &header, 1 + k)?;
    if rows.len() != n {
        return Err(IoError::MalformedCsv {
            path,
            message: format!("expected {n} rows, found {}", rows.len()),
        });
    }
    let latent_mean = numeric_block(&path, &rows, 1)?;

    Ok(PosteriorDraws {
        records,
        snapshots,
        latent_mean,
        x_truncation: meta.x_truncation,
    })
}
