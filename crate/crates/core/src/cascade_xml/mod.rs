//! Reading and writing Haar cascades in the XML interchange format.
//!
//! Both the legacy `opencv-haar-classifier` layout and the newer
//! `opencv-cascade-classifier` layout (used by the stock frontal-face models)
//! are accepted. Output is always the legacy layout in a canonical form, so
//! `serialize(parse(serialize(c)))` is byte-identical to `serialize(c)`.

mod reader;

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::haar::{Cascade, CascadeError, HaarFeature, NodeLink, Stage, WeakNode, WeakTree, WeightedRect};
use reader::{parse_document, Element};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct XmlError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum CascadeXmlError {
    #[error("malformed XML at {0}")]
    Syntax(#[from] XmlError),
    #[error("{location} (line {line}): {message}")]
    Schema { location: String, line: usize, message: String },
    #[error("invalid cascade: {0}")]
    Invalid(#[from] CascadeError),
    #[error("cascade file is not UTF-8")]
    Encoding,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn schema(location: impl Into<String>, el: &Element, message: impl Into<String>) -> CascadeXmlError {
    CascadeXmlError::Schema { location: location.into(), line: el.line, message: message.into() }
}

fn required<'a>(el: &'a Element, name: &str, location: &str) -> Result<&'a Element, CascadeXmlError> {
    el.child(name).ok_or_else(|| schema(location, el, format!("missing <{name}>")))
}

fn parse_real(s: &str) -> Option<f64> {
    let t = s.trim();
    match t.to_ascii_lowercase().as_str() {
        ".inf" | "+.inf" => Some(f64::INFINITY),
        "-.inf" => Some(f64::NEG_INFINITY),
        _ => t.parse().ok().filter(|v: &f64| !v.is_nan()),
    }
}

fn real(el: &Element, location: &str) -> Result<f64, CascadeXmlError> {
    parse_real(&el.text).ok_or_else(|| schema(location, el, format!("<{}> is not a number: {:?}", el.name, el.text.trim())))
}

fn integer(el: &Element, location: &str) -> Result<i64, CascadeXmlError> {
    el.text.trim().parse().map_err(|_| schema(location, el, format!("<{}> is not an integer: {:?}", el.name, el.text.trim())))
}

/// Parses a `<_>x y w h weight</_>` rect.
fn weighted_rect(el: &Element, location: &str) -> Result<WeightedRect, CascadeXmlError> {
    let tokens: Vec<&str> = el.text.split_whitespace().collect();
    if tokens.len() != 5 {
        return Err(schema(location, el, format!("rect needs 'x y w h weight', got {} tokens", tokens.len())));
    }
    let mut xywh = [0u32; 4];
    for (slot, tok) in xywh.iter_mut().zip(&tokens) {
        *slot = tok.parse().map_err(|_| schema(location, el, format!("rect coordinate {tok:?} is not a non-negative integer")))?;
    }
    let weight = parse_real(tokens[4]).ok_or_else(|| schema(location, el, format!("rect weight {:?} is not a number", tokens[4])))?;
    Ok(WeightedRect::new(xywh[0], xywh[1], xywh[2], xywh[3], weight))
}

/// Parses a feature element holding `<rects>` and optionally `<tilted>`.
fn feature(el: &Element, location: &str) -> Result<HaarFeature, CascadeXmlError> {
    if let Some(t) = el.child("tilted") {
        if integer(t, location)? != 0 {
            return Err(schema(location, t, "tilted features are not supported"));
        }
    }
    let rects = required(el, "rects", location)?
        .children_named("_")
        .map(|r| weighted_rect(r, location))
        .collect::<Result<Vec<_>, _>>()?;
    HaarFeature::new(rects).map_err(|e| schema(location, el, e.to_string()))
}

fn pair(el: &Element, location: &str) -> Result<(u32, u32), CascadeXmlError> {
    let v: Vec<u32> = el.text.split_whitespace().filter_map(|t| t.parse().ok()).collect();
    match v[..] {
        [w, h] if el.text.split_whitespace().count() == 2 => Ok((w, h)),
        _ => Err(schema(location, el, format!("expected two integers, got {:?}", el.text.trim()))),
    }
}

fn parse_legacy(root: &Element) -> Result<Cascade, CascadeXmlError> {
    let (w, h) = pair(required(root, "size", "cascade")?, "cascade")?;
    let mut stages = vec![];
    for (si, st) in required(root, "stages", "cascade")?.children_named("_").enumerate() {
        let loc = format!("stage {si}");
        let mut trees = vec![];
        for (ti, tr) in required(st, "trees", &loc)?.children_named("_").enumerate() {
            let loc = format!("stage {si}, tree {ti}");
            let mut nodes = vec![];
            for nd in tr.children_named("_") {
                let link = |val: &str, node: &str| -> Result<NodeLink, CascadeXmlError> {
                    match (nd.child(val), nd.child(node)) {
                        (Some(v), None) => Ok(NodeLink::Leaf(real(v, &loc)?)),
                        (None, Some(n)) => {
                            let idx = integer(n, &loc)?;
                            usize::try_from(idx).map(NodeLink::Node).map_err(|_| schema(&loc, n, format!("negative child index {idx}")))
                        }
                        _ => Err(schema(&loc, nd, format!("node needs exactly one of <{val}> or <{node}>"))),
                    }
                };
                nodes.push(WeakNode {
                    feature: feature(required(nd, "feature", &loc)?, &loc)?,
                    threshold: real(required(nd, "threshold", &loc)?, &loc)?,
                    left: link("left_val", "left_node")?,
                    right: link("right_val", "right_node")?,
                });
            }
            trees.push(WeakTree { nodes });
        }
        let threshold = real(required(st, "stage_threshold", &loc)?, &loc)?;
        stages.push(Stage { trees, threshold });
    }
    Ok(Cascade::new(w, h, stages)?)
}

fn parse_new(root: &Element) -> Result<Cascade, CascadeXmlError> {
    if let Some(ft) = root.child("featureType") {
        if ft.text.trim() != "HAAR" {
            return Err(schema("cascade", ft, format!("feature type {:?} is not supported", ft.text.trim())));
        }
    }
    let w = integer(required(root, "width", "cascade")?, "cascade")?;
    let h = integer(required(root, "height", "cascade")?, "cascade")?;
    let dim = |v: i64, el: &Element| u32::try_from(v).map_err(|_| schema("cascade", el, format!("bad window dimension {v}")));
    let (w, h) = (dim(w, root)?, dim(h, root)?);

    let features = required(root, "features", "cascade")?
        .children_named("_")
        .enumerate()
        .map(|(i, f)| feature(f, &format!("feature {i}")))
        .collect::<Result<Vec<_>, _>>()?;

    let mut stages = vec![];
    for (si, st) in required(root, "stages", "cascade")?.children_named("_").enumerate() {
        let loc = format!("stage {si}");
        let threshold = real(required(st, "stageThreshold", &loc)?, &loc)?;
        let mut trees = vec![];
        for (ti, wc) in required(st, "weakClassifiers", &loc)?.children_named("_").enumerate() {
            let loc = format!("stage {si}, tree {ti}");
            let inodes = required(wc, "internalNodes", &loc)?;
            let leaves_el = required(wc, "leafValues", &loc)?;
            let leaves = leaves_el
                .text
                .split_whitespace()
                .map(|t| parse_real(t).ok_or_else(|| schema(&loc, leaves_el, format!("leaf value {t:?} is not a number"))))
                .collect::<Result<Vec<_>, _>>()?;
            let tokens: Vec<&str> = inodes.text.split_whitespace().collect();
            if tokens.is_empty() || tokens.len() % 4 != 0 {
                return Err(schema(&loc, inodes, "internalNodes must hold groups of 'left right feature threshold'"));
            }
            let int = |t: &str| t.parse::<i64>().map_err(|_| schema(&loc, inodes, format!("{t:?} is not an integer")));
            let mut nodes = vec![];
            for group in tokens.chunks(4) {
                let link = |v: i64| -> Result<NodeLink, CascadeXmlError> {
                    if v > 0 {
                        Ok(NodeLink::Node(v as usize))
                    } else {
                        leaves
                            .get((-v) as usize)
                            .map(|&x| NodeLink::Leaf(x))
                            .ok_or_else(|| schema(&loc, leaves_el, format!("leaf index {} out of range", -v)))
                    }
                };
                let fi = int(group[2])?;
                let feature = usize::try_from(fi)
                    .ok()
                    .and_then(|i| features.get(i))
                    .ok_or_else(|| schema(&loc, inodes, format!("feature index {fi} out of range")))?;
                let threshold = parse_real(group[3]).ok_or_else(|| schema(&loc, inodes, format!("threshold {:?} is not a number", group[3])))?;
                nodes.push(WeakNode { feature: feature.clone(), threshold, left: link(int(group[0])?)?, right: link(int(group[1])?)? });
            }
            trees.push(WeakTree { nodes });
        }
        stages.push(Stage { trees, threshold });
    }
    Ok(Cascade::new(w, h, stages)?)
}

/// Parses a cascade document in either supported layout.
pub fn parse_cascade(bytes: &[u8]) -> Result<Cascade, CascadeXmlError> {
    let text = std::str::from_utf8(bytes).map_err(|_| CascadeXmlError::Encoding)?;
    let doc = parse_document(text)?;
    if doc.name != "opencv_storage" {
        return Err(schema("document", &doc, format!("root element is <{}>, expected <opencv_storage>", doc.name)));
    }
    let root = doc.children.first().ok_or_else(|| schema("document", &doc, "no cascade element"))?;
    match root.attr("type_id") {
        Some("opencv-haar-classifier") => parse_legacy(root),
        Some("opencv-cascade-classifier") => parse_new(root),
        _ if root.child("size").is_some() => parse_legacy(root),
        _ if root.child("width").is_some() => parse_new(root),
        other => Err(schema("document", root, format!("unrecognised cascade type {other:?}"))),
    }
}

pub fn load_cascade(path: impl AsRef<Path>) -> Result<Cascade, CascadeXmlError> {
    parse_cascade(&std::fs::read(path)?)
}

/// Ten significant digits; integral values print without a fraction.
pub fn format_real(v: f64) -> String {
    if v.is_infinite() {
        return if v > 0.0 { ".inf".into() } else { "-.inf".into() };
    }
    if v == v.trunc() && v.abs() < 1e15 {
        return format!("{}", v as i64);
    }
    let s = format!("{v:.9e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent form");
    let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
    format!("{mantissa}e{exp}")
}

fn write_link(out: &mut String, side: &str, link: NodeLink) {
    match link {
        NodeLink::Leaf(v) => writeln!(out, "            <{side}_val>{}</{side}_val>", format_real(v)),
        NodeLink::Node(i) => writeln!(out, "            <{side}_node>{i}</{side}_node>"),
    }
    .expect("writing to a String");
}

/// Canonical legacy-layout document.
pub fn serialize_cascade(c: &Cascade) -> Vec<u8> {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\"?>\n<opencv_storage>\n<cascade type_id=\"opencv-haar-classifier\">\n");
    let _ = writeln!(out, "  <size>{} {}</size>", c.window_w(), c.window_h());
    out.push_str("  <stages>\n");
    for (si, stage) in c.stages().iter().enumerate() {
        out.push_str("    <_>\n      <trees>\n");
        for tree in &stage.trees {
            out.push_str("        <_>\n");
            for node in &tree.nodes {
                out.push_str("          <_>\n            <feature>\n              <rects>\n");
                for r in node.feature.rects() {
                    let _ = writeln!(out, "                <_>{} {} {} {} {}</_>", r.rect.x, r.rect.y, r.rect.w, r.rect.h, format_real(r.weight));
                }
                out.push_str("              </rects>\n              <tilted>0</tilted>\n            </feature>\n");
                let _ = writeln!(out, "            <threshold>{}</threshold>", format_real(node.threshold));
                write_link(&mut out, "left", node.left);
                write_link(&mut out, "right", node.right);
                out.push_str("          </_>\n");
            }
            out.push_str("        </_>\n");
        }
        out.push_str("      </trees>\n");
        let _ = writeln!(out, "      <stage_threshold>{}</stage_threshold>", format_real(stage.threshold));
        let _ = writeln!(out, "      <parent>{}</parent>\n      <next>-1</next>\n    </_>", si as i64 - 1);
    }
    out.push_str("  </stages>\n</cascade>\n</opencv_storage>\n");
    out.into_bytes()
}

pub fn save_cascade(c: &Cascade, path: impl AsRef<Path>) -> std::io::Result<()> {
    std::fs::write(path, serialize_cascade(c))
}
