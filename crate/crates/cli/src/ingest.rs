use std::collections::HashMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use sofri_core::io::{read_functional_csv, read_scalar_csv};
use sofri_core::FunctionalDataset;

use crate::config::Transform;
use crate::CliError;

/// Curves and scalars aligned to the row order of the scalar file.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub ids: Vec<String>,
    pub w: FunctionalDataset,
    pub m: FunctionalDataset,
    pub y: DVector<f64>,
    pub z: DMatrix<f64>,
    pub z_names: Vec<String>,
}

fn apply_transform(data: FunctionalDataset, transform: Transform, path: &Path) -> Result<FunctionalDataset, CliError> {
    match transform {
        Transform::None => Ok(data),
        Transform::Log2 => {
            let v = data.values();
            if let Some(pos) = v.iter().position(|x| *x <= 0.0) {
                let (row, col) = (pos % v.nrows(), pos / v.nrows());
                return Err(CliError::DomainError {
                    path: path.to_path_buf(),
                    id: data.curve_ids()[row].clone(),
                    s: data.grid().points()[col],
                    value: v[(row, col)],
                });
            }
            let logged = v.map(f64::log2);
            Ok(data.with_values(logged)?)
        }
    }
}

/// Reorders `data` to follow `ids`; every id must appear exactly once on
/// both sides.
fn align(data: &FunctionalDataset, ids: &[String], path: &Path) -> Result<FunctionalDataset, CliError> {
    let index: HashMap<&str, usize> = data
        .curve_ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mismatch = |id: &str| CliError::IdMismatch {
        id: id.to_string(),
        path: path.to_path_buf(),
    };
    let rows = ids
        .iter()
        .map(|id| index.get(id.as_str()).copied().ok_or_else(|| mismatch(id)))
        .collect::<Result<Vec<_>, _>>()?;
    if data.n_curves() != ids.len() {
        let wanted: std::collections::HashSet<&str> = ids.iter().map(String::as_str).collect();
        let extra = data
            .curve_ids()
            .iter()
            .find(|id| !wanted.contains(id.as_str()))
            .expect("extra id exists");
        return Err(mismatch(extra));
    }
    let values = DMatrix::from_fn(ids.len(), data.grid().len(), |r, c| data.values()[(rows[r], c)]);
    Ok(FunctionalDataset::new(data.grid().clone(), values, ids.to_vec())?)
}

/// `W` and `M` curves aligned on the ids of `W`, transformed.
pub fn ingest_curves(
    w_path: &Path,
    m_path: &Path,
    transform: Transform,
) -> Result<(FunctionalDataset, FunctionalDataset), CliError> {
    let w = read_functional_csv(w_path)?;
    let m = read_functional_csv(m_path)?;
    if w.grid() != m.grid() {
        return Err(CliError::GridMismatch);
    }
    let m = align(&m, w.curve_ids(), m_path)?;
    Ok((
        apply_transform(w, transform, w_path)?,
        apply_transform(m, transform, m_path)?,
    ))
}

pub fn ingest(w_path: &Path, m_path: &Path, scalars_path: &Path, transform: Transform) -> Result<Ingested, CliError> {
    let scalars = read_scalar_csv(scalars_path)?;
    let w = read_functional_csv(w_path)?;
    let m = read_functional_csv(m_path)?;
    if w.grid() != m.grid() {
        return Err(CliError::GridMismatch);
    }
    let w = align(&w, &scalars.ids, w_path)?;
    let m = align(&m, &scalars.ids, m_path)?;
    Ok(Ingested {
        w: apply_transform(w, transform, w_path)?,
        m: apply_transform(m, transform, m_path)?,
        ids: scalars.ids,
        y: scalars.y,
        z: scalars.z,
        z_names: scalars.z_names,
    })
}
