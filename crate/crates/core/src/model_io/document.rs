use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::table::{load_csv_table, TableError, TableStore};
use crate::graph::{merge, GraphBuilder, GraphError, Hyperedge, Hypergraph, Node, Relation};
use crate::value::Value;

pub const SCHEMA_VERSION: &str = "1";

/// Metadata keys with this prefix name a CSV file to load as a table.
pub const TABLE_PREFIX: &str = "table.";

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("include cycle: {}", .0.join(" -> "))]
    IncludeCycle(Vec<String>),
    #[error("{path}: {source}")]
    Validation { path: String, source: GraphError },
    #[error("{path}: table '{table}': {source}")]
    Table {
        path: String,
        table: String,
        source: TableError,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    schema_version: String,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    includes: Vec<String>,
    #[serde(default)]
    nodes: Vec<NodeRecord>,
    #[serde(default)]
    edges: Vec<EdgeRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    domain: Option<Vec<serde_json::Value>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RelationRecord {
    kind: String,
    body: String,
}

fn default_weight() -> f64 {
    1.0
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    id: String,
    target: String,
    sources: BTreeMap<String, String>,
    relation: RelationRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    viability: Option<RelationRecord>,
    #[serde(default = "default_weight")]
    weight: f64,
    #[serde(default, skip_serializing_if = "is_false")]
    advances: bool,
}

/// A loaded graph together with the tables its metadata declares.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedModel {
    pub graph: Hypergraph,
    pub tables: TableStore,
}

fn parse_document(text: &str, path: &str) -> Result<Document, ModelError> {
    let doc: Document = serde_json::from_str(text).map_err(|e| {
        if e.is_data() {
            ModelError::Schema {
                path: path.to_owned(),
                message: e.to_string(),
            }
        } else {
            ModelError::Parse {
                path: path.to_owned(),
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            }
        }
    })?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(ModelError::Schema {
            path: path.to_owned(),
            message: format!("unsupported schema_version '{}'", doc.schema_version),
        });
    }
    Ok(doc)
}

fn value(json: &serde_json::Value, path: &str, what: &str) -> Result<Value, ModelError> {
    Value::from_json(json).map_err(|m| ModelError::Schema {
        path: path.to_owned(),
        message: format!("{what}: {m}"),
    })
}

fn relation(rec: &RelationRecord, path: &str, edge: &str) -> Result<Relation, ModelError> {
    Relation::parse(&rec.kind, &rec.body).map_err(|e| ModelError::Schema {
        path: path.to_owned(),
        message: format!("edge '{edge}': {e}"),
    })
}

/// Converts records into an unchecked graph; endpoints are verified after includes merge.
fn build_unchecked(doc: &Document, path: &str) -> Result<Hypergraph, ModelError> {
    let mut nodes = Vec::with_capacity(doc.nodes.len());
    for rec in &doc.nodes {
        let mut node = Node::new(&rec.id);
        if let Some(l) = &rec.label {
            node.label = l.clone();
        }
        node.unit = rec.unit.clone();
        node.description = rec.description.clone().unwrap_or_default();
        let what = format!("node '{}'", rec.id);
        node.initial = rec.initial.as_ref().map(|j| value(j, path, &what)).transpose()?;
        node.domain_hint = rec
            .domain
            .as_ref()
            .map(|d| {
                d.iter()
                    .map(|j| value(j, path, &what))
                    .collect::<Result<Vec<_>, _>>()
            })
            .transpose()?;
        nodes.push(node);
    }
    let mut edges = Vec::with_capacity(doc.edges.len());
    for rec in &doc.edges {
        edges.push(Hyperedge {
            id: rec.id.clone(),
            sources: rec.sources.clone(),
            target: rec.target.clone(),
            relation: relation(&rec.relation, path, &rec.id)?,
            viability: rec
                .viability
                .as_ref()
                .map(|v| relation(v, path, &rec.id))
                .transpose()?,
            weight: rec.weight,
            advances: rec.advances,
        });
    }
    Hypergraph::from_parts(nodes, edges, doc.metadata.clone()).map_err(|source| ModelError::Validation {
        path: path.to_owned(),
        source,
    })
}

/// Re-adds every member through the checked constructors.
fn check(graph: Hypergraph, path: &str) -> Result<Hypergraph, ModelError> {
    let err = |source| ModelError::Validation {
        path: path.to_owned(),
        source,
    };
    let mut b = GraphBuilder::new();
    for n in graph.nodes() {
        b.node(n.clone()).map_err(err)?;
    }
    for e in graph.edges() {
        b.edge(e.clone()).map_err(err)?;
    }
    for (k, v) in graph.metadata() {
        b.metadata(k, v);
    }
    Ok(b.build())
}

/// Merges `g2` into `g1`, identifying nodes with equal ids and dropping
/// edges `g1` already holds verbatim (diamond includes).
fn merge_by_id(g1: &Hypergraph, g2: &Hypergraph, path: &str) -> Result<Hypergraph, ModelError> {
    let shared: BTreeMap<String, String> = g2
        .nodes()
        .filter(|n| g1.node(&n.id).is_some())
        .map(|n| (n.id.clone(), n.id.clone()))
        .collect();
    let fresh: Vec<Hyperedge> = g2
        .edges()
        .filter(|e| g1.edge(&e.id) != Some(e))
        .cloned()
        .collect();
    let g2 = Hypergraph::from_parts(g2.nodes().cloned().collect(), fresh, g2.metadata().clone())
        .expect("subset of a valid graph");
    merge(g1, &g2, &shared).map_err(|source| ModelError::Validation {
        path: path.to_owned(),
        source,
    })
}

fn resolve(path: &Path, stack: &mut Vec<PathBuf>) -> Result<LoadedModel, ModelError> {
    let shown = path.display().to_string();
    let canonical = path.canonicalize().map_err(|source| ModelError::Io {
        path: shown.clone(),
        source,
    })?;
    if let Some(start) = stack.iter().position(|p| *p == canonical) {
        let mut cycle: Vec<String> = stack[start..].iter().map(|p| p.display().to_string()).collect();
        cycle.push(canonical.display().to_string());
        return Err(ModelError::IncludeCycle(cycle));
    }
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: shown.clone(),
        source,
    })?;
    let doc = parse_document(&text, &shown)?;
    let dir = path.parent().unwrap_or(Path::new("."));

    stack.push(canonical);
    let mut acc = LoadedModel {
        graph: Hypergraph::new(),
        tables: TableStore::new(),
    };
    for inc in &doc.includes {
        let sub = resolve(&dir.join(inc), stack)?;
        acc.graph = merge_by_id(&acc.graph, &sub.graph, &shown)?;
        acc.tables.extend_missing(&sub.tables);
    }
    stack.pop();

    let own = build_unchecked(&doc, &shown)?;
    let mut own_tables = TableStore::new();
    for (key, file) in &doc.metadata {
        if let Some(name) = key.strip_prefix(TABLE_PREFIX) {
            let table = load_csv_table(&dir.join(file), name).map_err(|source| ModelError::Table {
                path: shown.clone(),
                table: name.to_owned(),
                source,
            })?;
            own_tables.insert(table);
        }
    }
    own_tables.extend_missing(&acc.tables);

    let mut graph = merge_by_id(&acc.graph, &own, &shown)?;
    for (k, v) in &doc.metadata {
        graph = graph.with_metadata(k, v);
    }
    Ok(LoadedModel {
        graph,
        tables: own_tables,
    })
}

/// Loads a model document, resolving includes and declared tables.
pub fn load_model(path: &Path) -> Result<LoadedModel, ModelError> {
    let loaded = resolve(path, &mut Vec::new())?;
    Ok(LoadedModel {
        graph: check(loaded.graph, &path.display().to_string())?,
        tables: loaded.tables,
    })
}

/// Parses a self-contained document (no includes or tables).
pub fn model_from_str(text: &str) -> Result<Hypergraph, ModelError> {
    let doc = parse_document(text, "<string>")?;
    if !doc.includes.is_empty() {
        return Err(ModelError::Schema {
            path: "<string>".into(),
            message: "includes need a file location".into(),
        });
    }
    check(build_unchecked(&doc, "<string>")?, "<string>")
}

fn node_record(n: &Node) -> Result<NodeRecord, String> {
    Ok(NodeRecord {
        id: n.id.clone(),
        label: (n.label != n.id).then(|| n.label.clone()),
        unit: n.unit.clone(),
        description: (!n.description.is_empty()).then(|| n.description.clone()),
        initial: n.initial.as_ref().map(Value::to_json).transpose()?,
        domain: n
            .domain_hint
            .as_ref()
            .map(|d| d.iter().map(Value::to_json).collect())
            .transpose()?,
    })
}

fn relation_record(r: &Relation) -> RelationRecord {
    RelationRecord {
        kind: r.kind().to_owned(),
        body: r.body(),
    }
}

/// Canonical text: members sorted by id, optional fields omitted when unset.
pub fn model_to_string(graph: &Hypergraph) -> Result<String, ModelError> {
    let schema = |message: String| ModelError::Schema {
        path: "<output>".into(),
        message,
    };
    let doc = Document {
        schema_version: SCHEMA_VERSION.to_owned(),
        metadata: graph.metadata().clone(),
        includes: Vec::new(),
        nodes: graph
            .nodes()
            .map(node_record)
            .collect::<Result<_, _>>()
            .map_err(schema)?,
        edges: graph
            .edges()
            .map(|e| EdgeRecord {
                id: e.id.clone(),
                target: e.target.clone(),
                sources: e.sources.clone(),
                relation: relation_record(&e.relation),
                viability: e.viability.as_ref().map(relation_record),
                weight: e.weight,
                advances: e.advances,
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| schema(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn save_model(graph: &Hypergraph, path: &Path) -> Result<(), ModelError> {
    let text = model_to_string(graph)?;
    std::fs::write(path, text).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}
