//! The TU graph benchmark text format: one file per field, 1-indexed,
//! comma separated.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Item};
use crate::simplicial::{Chain, ChainTuple, Embedding, SimplicialComplex};

/// A TU dataset as read from disk, before any feature processing.
#[derive(Clone, Debug, PartialEq)]
pub struct TuDataset {
    pub name: String,
    /// Undirected edges `(i, j)` with `i < j`, 1-indexed, sorted, deduplicated,
    /// without self-loops.
    pub edges: Vec<(usize, usize)>,
    /// Graph id (1-indexed) of every node.
    pub graph_indicator: Vec<usize>,
    pub graph_labels: Vec<i64>,
    pub node_labels: Option<Vec<i64>>,
    pub node_attributes: Option<Vec<Vec<f64>>>,
}

/// Which node features become embedding coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureOptions {
    /// Attribute columns to keep; all when unset.
    pub attribute_columns: Option<Vec<usize>>,
    /// Append one-hot node labels when present.
    pub node_labels: bool,
    /// Standardize every coordinate over all nodes of the dataset.
    pub standardize: bool,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        FeatureOptions { attribute_columns: None, node_labels: true, standardize: false }
    }
}

fn file_name(name: &str, field: &str) -> String {
    format!("{name}_{field}.txt")
}

fn fields(text: &str) -> Vec<&str> {
    text.split(',').map(str::trim).collect()
}

fn parse_value<T: std::str::FromStr>(path: &str, line: usize, s: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| Error::Parse { path: path.into(), line, message: format!("{s:?}: {e}") })
}

/// Non-empty lines with their 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty())
}

fn parse_column<T: std::str::FromStr>(path: &str, text: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    lines(text).map(|(n, l)| parse_value(path, n, l)).collect()
}

impl TuDataset {
    /// Reads `<name>_A.txt` and its siblings from `dir`; the name is taken
    /// from the single `*_A.txt` file present.
    pub fn read_dir(dir: &Path) -> Result<TuDataset> {
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut names = BTreeSet::new();
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            if let Some(name) = entry.file_name().to_str().and_then(|f| f.strip_suffix("_A.txt")) {
                names.insert(name.to_string());
            }
        }
        let name = match names.len() {
            0 => return Err(Error::MissingFile(dir.join("<name>_A.txt"))),
            1 => names.pop_first().expect("one name"),
            _ => return Err(Error::InvalidArgument(format!("{} holds several datasets: {:?}", dir.display(), names))),
        };
        let mut files = BTreeMap::new();
        for field in ["A", "graph_indicator", "graph_labels", "node_labels", "node_attributes"] {
            let path = dir.join(file_name(&name, field));
            match std::fs::read_to_string(&path) {
                Ok(text) => {
                    files.insert(file_name(&name, field), text);
                }
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => return Err(Error::io(path, e)),
            }
        }
        TuDataset::parse(&name, &files).map_err(|e| match e {
            Error::MissingFile(f) => Error::MissingFile(dir.join(f)),
            Error::Parse { path, line, message } => Error::Parse { path: dir.join(path), line, message },
            other => other,
        })
    }

    /// Parses a bundle of file contents keyed by file name.
    pub fn parse(name: &str, files: &BTreeMap<String, String>) -> Result<TuDataset> {
        let get = |field: &str| files.get(&file_name(name, field)).map(|t| (file_name(name, field), t.as_str()));
        let required =
            |field: &str| get(field).ok_or_else(|| Error::MissingFile(PathBuf::from(file_name(name, field))));

        let (path, text) = required("graph_indicator")?;
        let graph_indicator: Vec<usize> = parse_column(&path, text)?;
        let num_nodes = graph_indicator.len();
        let (path, text) = required("graph_labels")?;
        let graph_labels: Vec<i64> = parse_column(&path, text)?;
        let num_graphs = graph_labels.len();
        let mut seen = vec![false; num_graphs];
        for (node, &g) in graph_indicator.iter().enumerate() {
            if g == 0 || g > num_graphs {
                return Err(Error::Parse {
                    path: file_name(name, "graph_indicator").into(),
                    line: node + 1,
                    message: format!("graph id {g} outside 1..={num_graphs}"),
                });
            }
            seen[g - 1] = true;
        }
        if let Some(g) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidArgument(format!("graph ids are not contiguous: graph {} has no nodes", g + 1)));
        }

        let (path, text) = required("A")?;
        let mut edges = BTreeSet::new();
        for (n, l) in lines(text) {
            let parts = fields(l);
            if parts.len() != 2 {
                return Err(Error::Parse {
                    path: path.clone().into(),
                    line: n,
                    message: format!("expected \"i, j\", got {l:?}"),
                });
            }
            let i: usize = parse_value(&path, n, parts[0])?;
            let j: usize = parse_value(&path, n, parts[1])?;
            for v in [i, j] {
                if v == 0 || v > num_nodes {
                    return Err(Error::Parse {
                        path: path.clone().into(),
                        line: n,
                        message: format!("node {v} is not assigned to any graph"),
                    });
                }
            }
            if graph_indicator[i - 1] != graph_indicator[j - 1] {
                return Err(Error::Parse {
                    path: path.clone().into(),
                    line: n,
                    message: format!("edge ({i}, {j}) joins two graphs"),
                });
            }
            if i != j {
                edges.insert((i.min(j), i.max(j)));
            }
        }

        let node_labels = match get("node_labels") {
            Some((path, text)) => {
                let v: Vec<i64> = parse_column(&path, text)?;
                if v.len() != num_nodes {
                    return Err(Error::Parse {
                        path: path.into(),
                        line: v.len() + 1,
                        message: format!("{} node labels for {num_nodes} nodes", v.len()),
                    });
                }
                Some(v)
            }
            None => None,
        };
        let node_attributes = match get("node_attributes") {
            Some((path, text)) => {
                let mut rows = Vec::with_capacity(num_nodes);
                for (n, l) in lines(text) {
                    let row =
                        fields(l).into_iter().map(|s| parse_value::<f64>(&path, n, s)).collect::<Result<Vec<_>>>()?;
                    if let Some(first) = rows.first().map(Vec::len) {
                        if row.len() != first {
                            return Err(Error::Parse {
                                path: path.clone().into(),
                                line: n,
                                message: format!("{} columns, expected {first}", row.len()),
                            });
                        }
                    }
                    if row.iter().any(|v| !v.is_finite()) {
                        return Err(Error::Parse {
                            path: path.clone().into(),
                            line: n,
                            message: "non-finite attribute".into(),
                        });
                    }
                    rows.push(row);
                }
                if rows.len() != num_nodes {
                    return Err(Error::Parse {
                        path: path.into(),
                        line: rows.len() + 1,
                        message: format!("{} attribute rows for {num_nodes} nodes", rows.len()),
                    });
                }
                Some(rows)
            }
            None => None,
        };
        Ok(TuDataset {
            name: name.to_string(),
            edges: edges.into_iter().collect(),
            graph_indicator,
            graph_labels,
            node_labels,
            node_attributes,
        })
    }

    /// Canonical text files: both directions of every edge in sorted order,
    /// one value or comma-separated row per line.
    pub fn to_files(&self) -> BTreeMap<String, String> {
        let mut files = BTreeMap::new();
        let mut directed: Vec<(usize, usize)> = self.edges.iter().flat_map(|&(i, j)| [(i, j), (j, i)]).collect();
        directed.sort_unstable();
        let mut a = String::new();
        for (i, j) in directed {
            writeln!(a, "{i}, {j}").expect("string write");
        }
        files.insert(file_name(&self.name, "A"), a);
        let column = |values: &mut dyn Iterator<Item = String>| values.map(|v| v + "\n").collect::<String>();
        files.insert(
            file_name(&self.name, "graph_indicator"),
            column(&mut self.graph_indicator.iter().map(|v| v.to_string())),
        );
        files.insert(
            file_name(&self.name, "graph_labels"),
            column(&mut self.graph_labels.iter().map(|v| v.to_string())),
        );
        if let Some(labels) = &self.node_labels {
            files.insert(file_name(&self.name, "node_labels"), column(&mut labels.iter().map(|v| v.to_string())));
        }
        if let Some(rows) = &self.node_attributes {
            let mut rows_iter = rows.iter().map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "));
            files.insert(file_name(&self.name, "node_attributes"), column(&mut rows_iter));
        }
        files
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (file, text) in self.to_files() {
            let path = dir.join(file);
            std::fs::write(&path, text).map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn num_graphs(&self) -> usize {
        self.graph_labels.len()
    }

    /// Distinct graph labels in sorted order; class `c` is `classes()[c]`.
    pub fn classes(&self) -> Vec<i64> {
        self.graph_labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Node feature matrix after column selection, one-hot labels and
    /// optional standardization.
    pub fn node_features(&self, opts: &FeatureOptions) -> Result<Vec<Vec<f64>>> {
        let n = self.graph_indicator.len();
        let mut rows = vec![Vec::new(); n];
        if let Some(attrs) = &self.node_attributes {
            let width = attrs.first().map_or(0, Vec::len);
            let cols: Vec<usize> = opts.attribute_columns.clone().unwrap_or_else(|| (0..width).collect());
            if let Some(&c) = cols.iter().find(|&&c| c >= width) {
                return Err(Error::InvalidArgument(format!("attribute column {c} out of {width}")));
            }
            for (row, attr) in rows.iter_mut().zip(attrs) {
                row.extend(cols.iter().map(|&c| attr[c]));
            }
        } else if opts.attribute_columns.as_ref().is_some_and(|c| !c.is_empty()) {
            return Err(Error::InvalidArgument(format!("{} has no node attributes", self.name)));
        }
        if opts.node_labels {
            if let Some(labels) = &self.node_labels {
                let values: Vec<i64> = labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
                for (row, label) in rows.iter_mut().zip(labels) {
                    let hot = values.binary_search(label).expect("label collected above");
                    row.extend((0..values.len()).map(|i| if i == hot { 1.0 } else { 0.0 }));
                }
            }
        }
        let dim = rows.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::InvalidArgument(format!("{} yields no node features with these options", self.name)));
        }
        if opts.standardize {
            for c in 0..dim {
                let mean = rows.iter().map(|r| r[c]).sum::<f64>() / n as f64;
                let var = rows.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / n as f64;
                let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
                for r in &mut rows {
                    r[c] = (r[c] - mean) / scale;
                }
            }
        }
        Ok(rows)
    }

    /// One item per graph: vertices numbered by global node order, edges
    /// oriented from lower to higher node, the standard edge basis as
    /// chains. A graph without edges gets a single zero chain.
    pub fn to_dataset(&self, opts: &FeatureOptions) -> Result<Dataset> {
        let features = self.node_features(opts)?;
        let classes = self.classes();
        let mut nodes: Vec<Vec<usize>> = vec![Vec::new(); self.num_graphs()];
        for (node, &g) in self.graph_indicator.iter().enumerate() {
            nodes[g - 1].push(node + 1);
        }
        let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); self.num_graphs()];
        for &(i, j) in &self.edges {
            edges[self.graph_indicator[i - 1] - 1].push((i, j));
        }
        let items = nodes
            .iter()
            .zip(&edges)
            .zip(&self.graph_labels)
            .map(|((nodes, edges), label)| {
                let local: BTreeMap<usize, usize> = nodes.iter().enumerate().map(|(l, &g)| (g, l)).collect();
                let complex = SimplicialComplex::build(edges.iter().map(|(i, j)| [local[i], local[j]]), nodes.len())?;
                let points: Vec<&[f64]> = nodes.iter().map(|&v| features[v - 1].as_slice()).collect();
                let chains = if edges.is_empty() {
                    ChainTuple::new(vec![Chain::zero(1)])?
                } else {
                    complex.standard_basis_chains(1)?
                };
                Ok(Item {
                    complex,
                    embedding: Embedding::from_points(&points)?,
                    chains,
                    label: classes.binary_search(label).expect("label collected above"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(items, classes.len())
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn fixture() -> BTreeMap<String, String> {
        let mut f = BTreeMap::new();
        f.insert("T_A.txt".into(), "1, 2\n2, 1\n2, 3\n3, 1\n4, 5\n5, 4\n5, 5\n".into());
        f.insert("T_graph_indicator.txt".into(), "1\n1\n1\n2\n2\n".into());
        f.insert("T_graph_labels.txt".into(), "7\n-1\n".into());
        f.insert("T_node_attributes.txt".into(), "0.0, 1.5\n1, 2\n2, 0\n3, 3\n4, 4\n".into());
        f.insert("T_node_labels.txt".into(), "0\n2\n0\n2\n2\n".into());
        f
    }

    #[test]
    fn triangle_and_edge() {
        let tu = TuDataset::parse("T", &fixture()).unwrap();
        assert_eq!(tu.edges, vec![(1, 2), (1, 3), (2, 3), (4, 5)]);
        let data = tu.to_dataset(&FeatureOptions::default()).unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(data.num_classes, 2);
        assert_eq!(data.items[0].chains.len(), 3);
        assert_eq!(data.items[1].chains.len(), 1);
        // Labels keep sorted order: -1 -> 0, 7 -> 1.
        assert_eq!((data.items[0].label, data.items[1].label), (1, 0));
        assert_eq!(data.items[0].embedding.point(1), &[1.0, 2.0, 0.0, 1.0]);
        let attrs_only = FeatureOptions { attribute_columns: Some(vec![1]), node_labels: false, standardize: false };
        assert_eq!(tu.to_dataset(&attrs_only).unwrap().items[1].embedding.coords(), &[3.0, 4.0]);
    }

    #[test]
    fn standardized_columns_have_unit_variance() {
        let tu = TuDataset::parse("T", &fixture()).unwrap();
        let opts = FeatureOptions { standardize: true, ..Default::default() };
        let rows = tu.node_features(&opts).unwrap();
        for c in 0..rows[0].len() {
            let mean: f64 = rows.iter().map(|r| r[c]).sum::<f64>() / 5.0;
            let var: f64 = rows.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / 5.0;
            assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn edgeless_graph_gets_zero_chain() {
        let mut f = fixture();
        f.insert("T_A.txt".into(), "1, 2\n".into());
        let data = TuDataset::parse("T", &f).unwrap().to_dataset(&FeatureOptions::default()).unwrap();
        assert_eq!(data.items[1].chains.len(), 1);
        assert!(data.items[1].chains.chains()[0].is_zero());
    }

    #[test]
    fn malformed_inputs() {
        let mut f = fixture();
        f.remove("T_graph_labels.txt");
        assert!(matches!(TuDataset::parse("T", &f), Err(Error::MissingFile(p)) if p.ends_with("T_graph_labels.txt")));

        let mut f = fixture();
        f.insert("T_node_attributes.txt".into(), "0, 1\n1, 2\n2\n3, 3\n4, 4\n".into());
        assert!(matches!(TuDataset::parse("T", &f), Err(Error::Parse { line: 3, .. })));

        let mut f = fixture();
        f.insert("T_A.txt".into(), "1, 2\n1, 9\n".into());
        assert!(matches!(TuDataset::parse("T", &f), Err(Error::Parse { line: 2, .. })));

        let mut f = fixture();
        f.insert("T_A.txt".into(), "3, 4\n".into());
        assert!(matches!(TuDataset::parse("T", &f), Err(Error::Parse { line: 1, .. })));

        let mut f = fixture();
        f.insert("T_graph_indicator.txt".into(), "1\n1\n1\n3\n3\n".into());
        f.insert("T_graph_labels.txt".into(), "1\n2\n3\n".into());
        assert!(TuDataset::parse("T", &f).is_err());

        let mut f = fixture();
        f.insert("T_A.txt".into(), "1; 2\n".into());
        assert!(matches!(TuDataset::parse("T", &f), Err(Error::Parse { .. })));
    }

    #[test]
    fn directory_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let tu = TuDataset::parse("T", &fixture()).unwrap();
        tu.write_dir(dir.path()).unwrap();
        assert_eq!(TuDataset::read_dir(dir.path()).unwrap(), tu);
        std::fs::remove_file(dir.path().join("T_graph_labels.txt")).unwrap();
        let err = TuDataset::read_dir(dir.path()).unwrap_err();
        assert!(err.to_string().contains("T_graph_labels.txt"));
    }

    fn arb_tu() -> impl Strategy<Value = TuDataset> {
        proptest::collection::vec((1usize..6, -3i64..3), 1..5)
            .prop_flat_map(|graphs| {
                let total: usize = graphs.iter().map(|g| g.0).sum();
                let indicator: Vec<usize> = graphs.iter().enumerate().flat_map(|(g, &(n, _))| vec![g + 1; n]).collect();
                let labels: Vec<i64> = graphs.iter().map(|g| g.1).collect();
                let starts: Vec<usize> = graphs
                    .iter()
                    .scan(1, |s, g| {
                        let v = *s;
                        *s += g.0;
                        Some(v)
                    })
                    .collect();
                let sizes: Vec<usize> = graphs.iter().map(|g| g.0).collect();
                let edge = (0..graphs.len()).prop_flat_map(move |g| {
                    let (s, n) = (starts[g], sizes[g]);
                    (s..s + n, s..s + n)
                });
                (
                    proptest::collection::vec(edge, 0..12),
                    proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, 2), total),
                    proptest::collection::vec(0i64..4, total),
                    Just((indicator, labels)),
                )
            })
            .prop_map(|(raw, attrs, node_labels, (indicator, labels))| {
                let edges: BTreeSet<(usize, usize)> =
                    raw.into_iter().filter(|(i, j)| i != j).map(|(i, j)| (i.min(j), i.max(j))).collect();
                TuDataset {
                    name: "P".into(),
                    edges: edges.into_iter().collect(),
                    graph_indicator: indicator,
                    graph_labels: labels,
                    node_labels: Some(node_labels),
                    node_attributes: Some(attrs),
                }
            })
    }

    proptest! {
        #[test]
        fn parse_inverts_write(tu in arb_tu()) {
            let files = tu.to_files();
            let back = TuDataset::parse("P", &files).unwrap();
            prop_assert_eq!(&back, &tu);
            prop_assert_eq!(back.to_files(), files);
        }

        #[test]
        fn edge_chains_match_edge_count(tu in arb_tu()) {
            let data = tu.to_dataset(&FeatureOptions::default()).unwrap();
            for (g, item) in data.items.iter().enumerate() {
                let count = tu.edges.iter().filter(|&&(i, _)| tu.graph_indicator[i - 1] == g + 1).count();
                let nonzero = item.chains.chains().iter().filter(|c| !c.is_zero()).count();
                prop_assert_eq!(nonzero, count);
                prop_assert_eq!(item.complex.count(1), count);
            }
        }
    }
}
