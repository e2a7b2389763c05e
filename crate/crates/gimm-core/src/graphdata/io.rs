//! TUDataset flat-file and edge-list/CSV ingestion.
//!
//! TUDataset layout (all indices 1-based on disk, 0-based in memory):
//! `{DS}_A.txt` with "i, j" edge lines, `{DS}_graph_indicator.txt` with one
//! graph id per node line, `{DS}_graph_labels.txt` with one integer per
//! graph, plus optional `{DS}_node_labels.txt` / `{DS}_node_attributes.txt`.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::{infer_feature_mode, Graph, GraphDataset, Task};

/// Degree one-hot features for datasets that ship neither labels nor
/// attributes are capped at this degree.
pub const DEGREE_FEATURE_CAP: usize = 400;

fn read_to_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

fn format_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn parse_int(path: &Path, line_no: usize, text: &str) -> Result<i64> {
    text.trim()
        .parse::<i64>()
        .map_err(|_| format_err(path, line_no, format!("expected integer, got {text:?}")))
}

fn parse_pair(path: &Path, line_no: usize, text: &str) -> Result<(i64, i64)> {
    let mut parts = text.split(',');
    let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(format_err(
            path,
            line_no,
            format!("expected \"i, j\", got {text:?}"),
        ));
    };
    Ok((
        parse_int(path, line_no, a)?,
        parse_int(path, line_no, b)?,
    ))
}

/// Remaps arbitrary integer class labels to dense 0-based ids (sorted order).
fn dense_labels(raw: &[i64]) -> (Vec<usize>, usize) {
    let distinct: Vec<i64> = raw.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let ids = raw
        .iter()
        .map(|v| distinct.binary_search(v).unwrap())
        .collect();
    (ids, distinct.len())
}

pub fn load_tudataset(dir_path: impl AsRef<Path>, name: &str) -> Result<GraphDataset> {
    let dir = dir_path.as_ref();
    let a_path = dir.join(format!("{name}_A.txt"));
    let ind_path = dir.join(format!("{name}_graph_indicator.txt"));
    let glab_path = dir.join(format!("{name}_graph_labels.txt"));
    let nlab_path = dir.join(format!("{name}_node_labels.txt"));
    let nattr_path = dir.join(format!("{name}_node_attributes.txt"));

    // node -> graph assignment
    let ind_lines = read_to_lines(&ind_path)?;
    let mut node_graph = Vec::with_capacity(ind_lines.len());
    for (i, line) in ind_lines.iter().enumerate() {
        let gid = parse_int(&ind_path, i + 1, line)?;
        if gid < 1 {
            return Err(format_err(&ind_path, i + 1, "graph ids are 1-based"));
        }
        node_graph.push(gid as usize - 1);
    }
    let num_graphs = node_graph.iter().max().map_or(0, |m| m + 1);
    if num_graphs == 0 {
        return Err(format_err(&ind_path, 0, "no nodes"));
    }

    // local node index within each graph, in file order
    let mut local_of = Vec::with_capacity(node_graph.len());
    let mut counts = vec![0usize; num_graphs];
    for &g in &node_graph {
        local_of.push(counts[g]);
        counts[g] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(format_err(
            &ind_path,
            0,
            format!("graph {} has no nodes", empty + 1),
        ));
    }

    // edges, remapped per graph; global out-degrees kept for the
    // degree-feature fallback
    let a_lines = read_to_lines(&a_path)?;
    let mut edges: Vec<Vec<(u32, u32)>> = vec![Vec::new(); num_graphs];
    let mut degrees = vec![0usize; node_graph.len()];
    for (i, line) in a_lines.iter().enumerate() {
        let (iu, iv) = parse_pair(&a_path, i + 1, line)?;
        let n = node_graph.len() as i64;
        if iu < 1 || iu > n || iv < 1 || iv > n {
            return Err(format_err(
                &a_path,
                i + 1,
                format!("node id out of range 1..={n}"),
            ));
        }
        let (u, v) = (iu as usize - 1, iv as usize - 1);
        if node_graph[u] != node_graph[v] {
            return Err(format_err(
                &a_path,
                i + 1,
                format!(
                    "edge joins graph {} and graph {}",
                    node_graph[u] + 1,
                    node_graph[v] + 1
                ),
            ));
        }
        if u == v {
            return Err(format_err(&a_path, i + 1, "self-loop"));
        }
        degrees[u] += 1;
        edges[node_graph[u]].push((local_of[u] as u32, local_of[v] as u32));
    }

    // graph labels
    let glab_lines = read_to_lines(&glab_path)?;
    if glab_lines.len() != num_graphs {
        return Err(format_err(
            &glab_path,
            0,
            format!("{} labels for {} graphs", glab_lines.len(), num_graphs),
        ));
    }
    let raw_glabels: Vec<i64> = glab_lines
        .iter()
        .enumerate()
        .map(|(i, l)| parse_int(&glab_path, i + 1, l))
        .collect::<Result<_>>()?;
    let (graph_labels, num_classes) = dense_labels(&raw_glabels);

    // per-node features: one-hot labels, appended attributes, or degree one-hot
    let num_nodes_total = node_graph.len();
    let node_label_ids = if nlab_path.exists() {
        let lines = read_to_lines(&nlab_path)?;
        if lines.len() != num_nodes_total {
            return Err(format_err(
                &nlab_path,
                0,
                format!("{} labels for {} nodes", lines.len(), num_nodes_total),
            ));
        }
        let raw: Vec<i64> = lines
            .iter()
            .enumerate()
            .map(|(i, l)| parse_int(&nlab_path, i + 1, l))
            .collect::<Result<_>>()?;
        Some(dense_labels(&raw))
    } else {
        None
    };
    let attrs = if nattr_path.exists() {
        let lines = read_to_lines(&nattr_path)?;
        if lines.len() != num_nodes_total {
            return Err(format_err(
                &nattr_path,
                0,
                format!("{} rows for {} nodes", lines.len(), num_nodes_total),
            ));
        }
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(lines.len());
        for (i, line) in lines.iter().enumerate() {
            let row = line
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| format_err(&nattr_path, i + 1, format!("bad real {v:?}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if let Some(first) = rows.first() {
                if row.len() != first.len() {
                    return Err(format_err(&nattr_path, i + 1, "ragged attribute row"));
                }
            }
            rows.push(row);
        }
        Some(rows)
    } else {
        None
    };

    // degree one-hot fallback
    let degree_width = if node_label_ids.is_none() && attrs.is_none() {
        let max_deg = degrees
            .iter()
            .copied()
            .max()
            .unwrap_or(0)
            .min(DEGREE_FEATURE_CAP);
        Some((degrees, max_deg + 1))
    } else {
        None
    };

    // assemble graphs
    let label_width = node_label_ids.as_ref().map_or(0, |(_, w)| *w);
    let attr_width = attrs.as_ref().map_or(0, |rows| rows[0].len());
    let feat_width = label_width
        + attr_width
        + degree_width.as_ref().map_or(0, |(_, w)| *w);

    let mut graphs = Vec::with_capacity(num_graphs);
    let mut nodes_of: Vec<Vec<usize>> = vec![Vec::new(); num_graphs];
    for (node, &g) in node_graph.iter().enumerate() {
        nodes_of[g].push(node);
    }
    for g in 0..num_graphs {
        let n = nodes_of[g].len();
        let mut x = Tensor::zeros(n, feat_width);
        for (local, &global) in nodes_of[g].iter().enumerate() {
            let mut col = 0;
            if let Some((ids, _)) = &node_label_ids {
                x.set(local, ids[global], 1.0);
                col += label_width;
            }
            if let Some(rows) = &attrs {
                for (j, &v) in rows[global].iter().enumerate() {
                    x.set(local, col + j, v);
                }
                col += attr_width;
            }
            if let Some((deg, _)) = &degree_width {
                x.set(local, col + deg[global].min(DEGREE_FEATURE_CAP), 1.0);
            }
        }
        let mode = infer_feature_mode(&x);
        let mut graph = Graph::new(n, std::mem::take(&mut edges[g]), x, mode)?;
        graph.graph_label = Some(graph_labels[g]);
        graphs.push(graph);
    }

    let ds = GraphDataset {
        graphs,
        name: name.to_string(),
        num_classes,
        task: Task::GraphClassification,
    };
    ds.validate()?;
    Ok(ds)
}

/// Writes a graph-classification dataset back to TUDataset layout.
///
/// Features are emitted as `{name}_node_attributes.txt` at full precision,
/// so a write/load round trip reproduces them bit-exactly.
pub fn write_tudataset(ds: &GraphDataset, dir_path: impl AsRef<Path>, name: &str) -> Result<()> {
    let dir = dir_path.as_ref();
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut a_lines = String::new();
    let mut ind_lines = String::new();
    let mut glab_lines = String::new();
    let mut attr_lines = String::new();
    let mut offset = 0usize;
    for (gi, g) in ds.graphs.iter().enumerate() {
        let label = g.graph_label.ok_or_else(|| {
            Error::contract("write_tudataset", format!("graph {gi} has no label"))
        })?;
        glab_lines.push_str(&format!("{label}\n"));
        for &(u, v) in &g.edges {
            a_lines.push_str(&format!(
                "{}, {}\n",
                offset + u as usize + 1,
                offset + v as usize + 1
            ));
        }
        for r in 0..g.num_nodes {
            ind_lines.push_str(&format!("{}\n", gi + 1));
            let row: Vec<String> = g.features.row(r).iter().map(|v| format!("{v}")).collect();
            attr_lines.push_str(&row.join(", "));
            attr_lines.push('\n');
        }
        offset += g.num_nodes;
    }
    let write = |file: &str, content: &str| -> Result<()> {
        let path = dir.join(file);
        fs::write(&path, content).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    };
    write(&format!("{name}_A.txt"), &a_lines)?;
    write(&format!("{name}_graph_indicator.txt"), &ind_lines)?;
    write(&format!("{name}_graph_labels.txt"), &glab_lines)?;
    write(&format!("{name}_node_attributes.txt"), &attr_lines)?;
    Ok(())
}

/// Plain-text node-classification dataset: `edges.csv` ("u,v", 0-based),
/// `features.csv` (N rows of F reals), `labels.csv` (one class id per node).
pub fn load_edgelist_csv(
    edges_path: impl AsRef<Path>,
    features_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<GraphDataset> {
    let (edges_path, features_path, labels_path) =
        (edges_path.as_ref(), features_path.as_ref(), labels_path.as_ref());

    let feat_lines = read_to_lines(features_path)?;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(feat_lines.len());
    for (i, line) in feat_lines.iter().enumerate() {
        let row = line
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| format_err(features_path, i + 1, format!("bad real {v:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(format_err(
                    features_path,
                    i + 1,
                    format!("ragged row: {} values, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err(format_err(features_path, 0, "no feature rows"));
    }
    let f = rows[0].len();

    let label_lines = read_to_lines(labels_path)?;
    if label_lines.len() != n {
        return Err(format_err(
            labels_path,
            0,
            format!("{} labels for {} feature rows", label_lines.len(), n),
        ));
    }
    let raw_labels: Vec<i64> = label_lines
        .iter()
        .enumerate()
        .map(|(i, l)| parse_int(labels_path, i + 1, l))
        .collect::<Result<_>>()?;
    let (node_labels, num_classes) = dense_labels(&raw_labels);

    // symmetrized, deduplicated edge set
    let edge_text = fs::read_to_string(edges_path).map_err(|source| Error::Io {
        path: edges_path.display().to_string(),
        source,
    })?;
    let mut set: BTreeSet<(u32, u32)> = BTreeSet::new();
    for (i, line) in edge_text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (a, b) = parse_pair(edges_path, i + 1, line)?;
        if a < 0 || b < 0 || a as usize >= n || b as usize >= n {
            return Err(format_err(
                edges_path,
                i + 1,
                format!("node id out of range 0..{n}"),
            ));
        }
        if a == b {
            return Err(format_err(edges_path, i + 1, "self-loop"));
        }
        set.insert((a as u32, b as u32));
        set.insert((b as u32, a as u32));
    }

    let features = Tensor::new(n, f, rows.concat())?;
    let mode = infer_feature_mode(&features);
    let mut graph = Graph::new(n, set.into_iter().collect(), features, mode)?;
    graph.node_labels = Some(node_labels);

    let ds = GraphDataset {
        graphs: vec![graph],
        name: "edgelist".to_string(),
        num_classes,
        task: Task::NodeClassification,
    };
    ds.validate()?;
    Ok(ds)
}
