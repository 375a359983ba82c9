//! Chain file formats: per-chain log-likelihood CSVs (rows = post-warmup
//! draws, columns = observations), optional parameter CSVs with the same
//! row count, and the run manifest that ties them together.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use chainstack_core::draws::{ChainDraws, DrawSet};
use chainstack_core::CoreError;

use crate::error::{CliError, CliResult};
use crate::jsonfmt::format_float;

/// Loader options; the layout is fixed (rows = draws, cols = observations).
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Data rows to drop from the top, for manual warmup trimming.
    pub skip_rows: usize,
}

/// Parses a numeric CSV into a row-major matrix. A non-numeric first row is
/// treated as a header; ragged rows and non-finite cells are reported with
/// their position (1-based data rows).
fn read_matrix(path: &Path, opts: LoadOptions) -> CliResult<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            row: Some(idx + 1),
            col: None,
            message: format!("malformed CSV record: {e}"),
        })?;
        rows.push(record.iter().map(|s| s.trim().to_string()).collect());
    }
    // header = first row with any cell that does not parse as a number
    let has_header = rows
        .first()
        .is_some_and(|r| r.iter().any(|c| c.parse::<f64>().is_err()));
    let mut data_rows = rows.into_iter();
    let header: Option<Vec<String>> = if has_header { data_rows.next() } else { None };
    // a leading draw-index column is detected by the header name "iter"
    let drop_first_col = header
        .as_ref()
        .and_then(|h| h.first())
        .is_some_and(|c| c.eq_ignore_ascii_case("iter"));

    let mut matrix = Vec::new();
    let mut width = None;
    for (i, row) in data_rows.enumerate().skip(opts.skip_rows) {
        let cells = if drop_first_col { &row[1..] } else { &row[..] };
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(CliError::Parse {
                    path: path.to_path_buf(),
                    row: Some(i + 1),
                    col: None,
                    message: format!("ragged row: expected {w} cells, found {}", cells.len()),
                });
            }
            _ => {}
        }
        let mut parsed = Vec::with_capacity(cells.len());
        for (j, cell) in cells.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| CliError::Parse {
                path: path.to_path_buf(),
                row: Some(i + 1),
                col: Some(j + 1),
                message: format!("non-numeric cell '{cell}'"),
            })?;
            if !v.is_finite() {
                return Err(CliError::Parse {
                    path: path.to_path_buf(),
                    row: Some(i + 1),
                    col: Some(j + 1),
                    message: format!("non-finite cell '{cell}'"),
                });
            }
            parsed.push(v);
        }
        matrix.push(parsed);
    }
    Ok(matrix)
}

fn to_array(rows: Vec<Vec<f64>>) -> chainstack_core::ndarray::Array2<f64> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    chainstack_core::ndarray::Array2::from_shape_vec((nrows, ncols), flat)
        .expect("rectangular by construction")
}

/// Loads one chain's log-likelihood CSV (rows = draws, cols =
/// observations).
pub fn load_chain_csv(path: &Path, opts: LoadOptions) -> CliResult<ChainDraws> {
    let matrix = read_matrix(path, opts)?;
    if matrix.len() < 2 {
        return Err(CliError::Core(CoreError::TooFewDraws {
            needed: 2,
            got: matrix.len(),
        }));
    }
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "chain".to_string());
    let id = id.trim_end_matches("_loglik").to_string();
    ChainDraws::new(id, to_array(matrix), None).map_err(CliError::Core)
}

/// Attaches parameter draws from a CSV with the same row count.
pub fn attach_params(chain: ChainDraws, path: &Path, opts: LoadOptions) -> CliResult<ChainDraws> {
    let matrix = read_matrix(path, opts)?;
    let params = to_array(matrix);
    ChainDraws::new(
        chain.chain_id().to_string(),
        chain.log_lik().clone(),
        Some(params),
    )
    .map_err(CliError::Core)
}

/// One chain's files as recorded in the run manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestChain {
    pub id: String,
    pub log_lik: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance_rate: Option<f64>,
}

/// Run manifest listing chain files, dimensions, and provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    pub n_obs: usize,
    pub chains: Vec<ManifestChain>,
    #[serde(default)]
    pub provenance: Vec<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Finds the chain files of an input directory: `manifest.json` when
/// present, otherwise every `*_loglik.csv` (sorted by name) with
/// `*_params.csv` siblings attached when they exist.
pub fn discover_inputs(dir: &Path) -> CliResult<Vec<ManifestChain>> {
    if !dir.is_dir() {
        return Err(CliError::io(dir, "input directory not found"));
    }
    let manifest_path = dir.join(MANIFEST_FILE);
    if manifest_path.is_file() {
        let text =
            fs::read_to_string(&manifest_path).map_err(|e| CliError::io(&manifest_path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| CliError::Parse {
            path: manifest_path.clone(),
            row: None,
            col: None,
            message: format!("invalid manifest: {e}"),
        })?;
        return Ok(manifest.chains);
    }
    let mut found = Vec::new();
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with("_loglik.csv") {
            let stem = name.trim_end_matches("_loglik.csv");
            let params_name = format!("{stem}_params.csv");
            let params = dir.join(&params_name).is_file().then_some(params_name);
            found.push(ManifestChain {
                id: stem.to_string(),
                log_lik: name,
                params,
                acceptance_rate: None,
            });
        }
    }
    found.sort_by(|a, b| a.log_lik.cmp(&b.log_lik));
    if found.is_empty() {
        return Err(CliError::io(dir, "no manifest.json or *_loglik.csv files"));
    }
    Ok(found)
}

/// Loads and assembles every chain of an input directory, in manifest
/// order; chains load in parallel on the active thread pool.
pub fn load_draw_set(dir: &Path, opts: LoadOptions) -> CliResult<(DrawSet, Vec<ManifestChain>)> {
    use rayon::prelude::*;
    let entries = discover_inputs(dir)?;
    let chains: Vec<ChainDraws> = entries
        .par_iter()
        .map(|entry| {
            let mut chain = load_chain_csv(&dir.join(&entry.log_lik), opts)?;
            if chain.chain_id() != entry.id {
                chain = ChainDraws::new(
                    entry.id.clone(),
                    chain.log_lik().clone(),
                    chain.params().cloned(),
                )
                .map_err(CliError::Core)?;
            }
            if let Some(p) = &entry.params {
                chain = attach_params(chain, &dir.join(p), opts)?;
            }
            Ok(chain)
        })
        .collect::<CliResult<_>>()?;
    let ds = DrawSet::assemble(chains).map_err(CliError::Core)?;
    Ok((ds, entries))
}

/// Writes a matrix as CSV with an optional header, floats at 17
/// significant digits (bit-exact round trips).
pub fn write_matrix_csv(
    path: &Path,
    header: Option<&[String]>,
    rows: impl Iterator<Item = Vec<f64>>,
) -> CliResult<()> {
    let mut out = String::new();
    if let Some(h) = header {
        out.push_str(&h.join(","));
        out.push('\n');
    }
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn write_tmp(content: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chain_loglik.csv");
        fs::write(&path, content).unwrap();
        (dir, path)
    }

    #[test]
    fn parses_plain_table() {
        let (_d, p) = write_tmp("0,0\n0,0\n0,0\n");
        let c = load_chain_csv(&p, LoadOptions::default()).unwrap();
        assert_eq!(c.n_draws(), 3);
        assert_eq!(c.n_obs(), 2);
        assert!(c.log_lik().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn detects_header_row() {
        let (_d, p) = write_tmp("obs_0,obs_1\n1.5,2.5\n3.5,4.5\n");
        let c = load_chain_csv(&p, LoadOptions::default()).unwrap();
        assert_eq!(c.n_draws(), 2);
        assert_eq!(c.log_lik()[[0, 1]], 2.5);
    }

    #[test]
    fn drops_iter_index_column() {
        let (_d, p) = write_tmp("iter,mu\n0,1.25\n1,2.25\n");
        let c = load_chain_csv(&p, LoadOptions::default()).unwrap();
        assert_eq!(c.n_obs(), 1);
        assert_eq!(c.log_lik()[[1, 0]], 2.25);
    }

    #[test]
    fn nan_cell_is_named() {
        let (_d, p) = write_tmp("0,0\n0,NaN\n");
        match load_chain_csv(&p, LoadOptions::default()).unwrap_err() {
            CliError::Parse { row, col, .. } => {
                assert_eq!(row, Some(2));
                assert_eq!(col, Some(2));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn ragged_row_is_named() {
        let (_d, p) = write_tmp("0,0\n0\n");
        match load_chain_csv(&p, LoadOptions::default()).unwrap_err() {
            CliError::Parse { row, .. } => assert_eq!(row, Some(2)),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn too_few_rows() {
        let (_d, p) = write_tmp("0,0\n");
        match load_chain_csv(&p, LoadOptions::default()).unwrap_err() {
            CliError::Core(CoreError::TooFewDraws { got: 1, .. }) => {}
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn skip_rows_trims_top() {
        let (_d, p) = write_tmp("9,9\n1,1\n2,2\n3,3\n");
        let c = load_chain_csv(&p, LoadOptions { skip_rows: 1 }).unwrap();
        assert_eq!(c.n_draws(), 3);
        assert_eq!(c.log_lik()[[0, 0]], 1.0);
    }

    #[test]
    fn csv_roundtrip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m_loglik.csv");
        let rows = vec![
            vec![1.0 / 3.0, -2.718281828459045e-12],
            vec![5.0e-324f64.max(1e-300), 0.1 + 0.2],
        ];
        write_matrix_csv(&path, None, rows.clone().into_iter()).unwrap();
        let c = load_chain_csv(&path, LoadOptions::default()).unwrap();
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(c.log_lik()[[i, j]].to_bits(), v.to_bits(), "cell ({i},{j})");
            }
        }
    }
}
