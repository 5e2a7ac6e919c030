//! Perturbation fields from coordinate expressions or CSV node tables.

use crate::config::PerturbationConfig;
use crate::error::CliError;
use brane_core::grid::{Field, GridSpec, IndexKind};
use evalexpr::{build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node, Value};
use std::f64::consts::PI;

type Expr = Node<DefaultNumericTypes>;

fn context(x: &[f64]) -> HashMapContext<DefaultNumericTypes> {
    let mut ctx = HashMapContext::new();
    ctx.set_value("pi".into(), Value::Float(PI)).expect("fresh context");
    for (a, v) in x.iter().enumerate() {
        ctx.set_value(format!("x{a}"), Value::Float(*v)).expect("fresh context");
    }
    ctx
}

/// Parses an expression in `x0 … x{dim−1}` and `pi`, and evaluates it once
/// to catch unknown functions.
pub fn compile(text: &str, dim: usize) -> Result<Expr, String> {
    let node = build_operator_tree::<DefaultNumericTypes>(text).map_err(|e| format!("cannot parse `{text}`: {e}"))?;
    for id in node.iter_variable_identifiers() {
        let ok = id == "pi" || id.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()).is_some_and(|a| a < dim);
        if !ok {
            return Err(format!("unknown variable `{id}` in `{text}` (use x0..x{} and pi)", dim - 1));
        }
    }
    node.eval_number_with_context(&context(&vec![0.5; dim])).map_err(|e| format!("cannot evaluate `{text}`: {e}"))?;
    Ok(node)
}

/// Samples expressions component by component on the grid.
pub fn sample(grid: &GridSpec, exprs: &[String], kind: IndexKind, path: &str) -> Result<Field, CliError> {
    let nodes: Vec<Expr> = exprs
        .iter()
        .enumerate()
        .map(|(j, e)| compile(e, grid.dim()).map_err(|m| CliError::Config { path: format!("{path}[{j}]"), message: m }))
        .collect::<Result<_, _>>()?;
    let mut out = Field::zeros(grid.len(), &[(kind, exprs.len())]);
    for k in 0..grid.len() {
        let ctx = context(&grid.coords(k));
        for (j, n) in nodes.iter().enumerate() {
            let v = n.eval_number_with_context(&ctx).map_err(|e| CliError::Config {
                path: format!("{path}[{j}]"),
                message: format!("evaluation failed at node {k}: {e}"),
            })?;
            out.at_mut(k)[j] = v;
        }
    }
    Ok(out)
}

/// Reads a node table whose first `grid.dim()` columns are the grid
/// coordinates (checked against the grid) followed by `ncomp` values.
pub fn read_table(grid: &GridSpec, path: &str, ncomp: usize, key: &str) -> Result<Vec<f64>, CliError> {
    let bad = |m: String| CliError::Config { path: key.to_string(), message: format!("{path}: {m}") };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path).map_err(|e| bad(e.to_string()))?;
    let d = grid.dim();
    let mut data = Vec::with_capacity(grid.len() * ncomp);
    let mut rows = 0;
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != d + ncomp {
            return Err(bad(format!("row {} has {} columns, expected {}", k + 1, rec.len(), d + ncomp)));
        }
        if k >= grid.len() {
            return Err(bad(format!("more rows than the {} grid nodes", grid.len())));
        }
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| bad(format!("row {}: `{s}` is not a number", k + 1))))
            .collect::<Result<_, _>>()?;
        let xi = grid.coords(k);
        for a in 0..d {
            if (vals[a] - xi[a]).abs() > 1e-9 * xi[a].abs().max(1.0) {
                return Err(bad(format!("row {}: coordinate {} is {}, grid has {}", k + 1, a, vals[a], xi[a])));
            }
        }
        data.extend_from_slice(&vals[d..]);
        rows += 1;
    }
    if rows != grid.len() {
        return Err(bad(format!("{rows} rows for {} grid nodes", grid.len())));
    }
    Ok(data)
}

/// Tangential and normal parts of a named perturbation.
pub fn perturbation(grid: &GridSpec, codim: usize, cfg: &PerturbationConfig, index: usize) -> Result<(Field, Field), CliError> {
    let path = format!("perturbations[{index}]");
    let normal = match (&cfg.normal, &cfg.csv) {
        (Some(exprs), _) => {
            if exprs.len() != codim {
                return Err(CliError::Config {
                    path: format!("{path}.normal"),
                    message: format!("needs {codim} components (one per normal), got {}", exprs.len()),
                });
            }
            sample(grid, exprs, IndexKind::Normal, &format!("{path}.normal"))?
        }
        (None, Some(file)) => {
            let data = read_table(grid, file, codim, &format!("{path}.csv"))?;
            Field::from_data(&[(IndexKind::Normal, codim)], data)?
        }
        (None, None) => unreachable!("validated"),
    };
    let tangential = match &cfg.tangential {
        Some(exprs) => sample(grid, exprs, IndexKind::World, &format!("{path}.tangential"))?,
        None => Field::zeros(grid.len(), &[(IndexKind::World, grid.dim())]),
    };
    Ok((tangential, normal))
}
