//! GraphML export of the interaction network, plus a small reader used to
//! check round trips.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use quick_xml::escape::{escape, resolve_predefined_entity};
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::louvain::Partition;
use super::network::UserNetwork;
use crate::{Error, Result};

/// Write `net` as GraphML with `handle`, `region` and (when a partition is
/// given) `community` node attributes and a `weight` edge attribute.
/// Nodes without a region get an empty `region` value.
pub fn write_graphml<W: Write>(net: &UserNetwork, partition: Option<&Partition>, mut w: W) -> std::io::Result<()> {
    writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(w, r#"<graphml xmlns="http://graphml.graphdrawing.org/xmlns">"#)?;
    writeln!(w, r#"  <key id="d0" for="node" attr.name="handle" attr.type="string"/>"#)?;
    writeln!(w, r#"  <key id="d1" for="node" attr.name="region" attr.type="string"/>"#)?;
    writeln!(w, r#"  <key id="d2" for="node" attr.name="community" attr.type="int"/>"#)?;
    writeln!(w, r#"  <key id="d3" for="edge" attr.name="weight" attr.type="long"/>"#)?;
    writeln!(w, r#"  <graph id="interactions" edgedefault="directed">"#)?;
    for (i, node) in net.nodes.iter().enumerate() {
        writeln!(w, r#"    <node id="{}">"#, escape(node.author_id.as_str()))?;
        writeln!(w, r#"      <data key="d0">{}</data>"#, escape(node.handle.as_str()))?;
        let region = node.region.as_ref().map_or("", |r| r.as_str());
        writeln!(w, r#"      <data key="d1">{}</data>"#, escape(region))?;
        if let Some(p) = partition {
            writeln!(w, r#"      <data key="d2">{}</data>"#, p.assignment[i])?;
        }
        writeln!(w, "    </node>")?;
    }
    for (i, e) in net.edges.iter().enumerate() {
        writeln!(
            w,
            r#"    <edge id="e{i}" source="{}" target="{}">"#,
            escape(net.nodes[e.source].author_id.as_str()),
            escape(net.nodes[e.target].author_id.as_str()),
        )?;
        writeln!(w, r#"      <data key="d3">{}</data>"#, e.weight)?;
        writeln!(w, "    </edge>")?;
    }
    writeln!(w, "  </graph>")?;
    writeln!(w, "</graphml>")?;
    Ok(())
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GraphElement {
    pub id: String,
    /// Attribute name (from the key declarations) to value.
    pub data: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GraphEdge {
    pub source: String,
    pub target: String,
    pub data: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GraphDocument {
    pub directed: bool,
    pub nodes: Vec<GraphElement>,
    pub edges: Vec<GraphEdge>,
}

fn xml_err(e: impl std::fmt::Display) -> Error {
    Error::Graph(e.to_string())
}

fn attrs(start: &BytesStart<'_>) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for a in start.attributes() {
        let a = a.map_err(xml_err)?;
        let key = String::from_utf8_lossy(a.key.as_ref()).into_owned();
        out.insert(key, a.unescape_value().map_err(xml_err)?.into_owned());
    }
    Ok(out)
}

fn required(map: &BTreeMap<String, String>, name: &str, element: &str) -> Result<String> {
    map.get(name)
        .cloned()
        .ok_or_else(|| Error::Graph(format!("<{element}> without `{name}`")))
}

enum Owner {
    Node,
    Edge,
}

/// Read nodes, edges and their `<data>` values from a GraphML document.
pub fn read_graphml<R: BufRead>(input: R) -> Result<GraphDocument> {
    let mut reader = Reader::from_reader(input);
    let mut buf = Vec::new();
    let mut doc = GraphDocument::default();
    let mut keys: BTreeMap<String, String> = BTreeMap::new();
    let mut owner: Option<Owner> = None;
    let mut data_key: Option<String> = None;
    let mut text = String::new();

    loop {
        let event = reader.read_event_into(&mut buf).map_err(xml_err)?;
        match event {
            Event::Start(ref s) | Event::Empty(ref s) => {
                let empty = matches!(event, Event::Empty(_));
                let a = attrs(s)?;
                match s.local_name().as_ref() {
                    b"key" => {
                        let id = required(&a, "id", "key")?;
                        let name = a.get("attr.name").cloned().unwrap_or_else(|| id.clone());
                        keys.insert(id, name);
                    }
                    b"graph" => {
                        doc.directed = a.get("edgedefault").is_none_or(|d| d == "directed");
                    }
                    b"node" => {
                        doc.nodes.push(GraphElement {
                            id: required(&a, "id", "node")?,
                            data: BTreeMap::new(),
                        });
                        owner = (!empty).then_some(Owner::Node);
                    }
                    b"edge" => {
                        doc.edges.push(GraphEdge {
                            source: required(&a, "source", "edge")?,
                            target: required(&a, "target", "edge")?,
                            data: BTreeMap::new(),
                        });
                        owner = (!empty).then_some(Owner::Edge);
                    }
                    b"data" => {
                        let key = required(&a, "key", "data")?;
                        text.clear();
                        if empty {
                            store(&mut doc, &owner, &keys, &key, String::new());
                        } else {
                            data_key = Some(key);
                        }
                    }
                    _ => {}
                }
            }
            Event::Text(t) if data_key.is_some() => {
                text.push_str(&t.decode().map_err(xml_err)?);
            }
            Event::CData(t) if data_key.is_some() => {
                text.push_str(&String::from_utf8_lossy(&t));
            }
            Event::GeneralRef(r) if data_key.is_some() => {
                if let Some(ch) = r.resolve_char_ref().map_err(xml_err)? {
                    text.push(ch);
                } else {
                    let name = r.decode().map_err(xml_err)?;
                    let resolved = resolve_predefined_entity(&name)
                        .ok_or_else(|| Error::Graph(format!("unknown entity &{name};")))?;
                    text.push_str(resolved);
                }
            }
            Event::End(e) => match e.local_name().as_ref() {
                b"data" => {
                    if let Some(key) = data_key.take() {
                        store(&mut doc, &owner, &keys, &key, std::mem::take(&mut text));
                    }
                }
                b"node" | b"edge" => owner = None,
                _ => {}
            },
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    Ok(doc)
}

fn store(doc: &mut GraphDocument, owner: &Option<Owner>, keys: &BTreeMap<String, String>, key: &str, value: String) {
    let name = keys.get(key).cloned().unwrap_or_else(|| key.to_string());
    match owner {
        Some(Owner::Node) => {
            if let Some(n) = doc.nodes.last_mut() {
                n.data.insert(name, value);
            }
        }
        Some(Owner::Edge) => {
            if let Some(e) = doc.edges.last_mut() {
                e.data.insert(name, value);
            }
        }
        None => {}
    }
}
