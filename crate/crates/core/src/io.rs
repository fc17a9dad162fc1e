//! Line-oriented instance files.
//!
//! ```text
//! # comment
//! n m q
//! i j w b      (m lines; 1-based endpoints, b = 1 marks a backbone edge)
//! d_1          (n lines)
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{DemandVector, Edge, Graph};

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub graph: Graph,
    pub demand: DemandVector,
    pub q: usize,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("cannot parse {what} from {tok:?}")))
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hl, header) = lines.next().ok_or_else(|| parse_err(1, "empty instance"))?;
    let mut toks = header.split_whitespace();
    let n: usize = field(toks.next(), hl, "node count n")?;
    let m: usize = field(toks.next(), hl, "edge count m")?;
    let q: usize = field(toks.next(), hl, "budget q")?;
    if toks.next().is_some() {
        return Err(parse_err(hl, "header must be exactly \"n m q\""));
    }

    let mut edges = Vec::with_capacity(m);
    let mut backbone = Vec::new();
    for e in 0..m {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| parse_err(hl, format!("expected {m} edges, found {e}")))?;
        let mut toks = l.split_whitespace();
        let i: usize = field(toks.next(), ln, "endpoint i")?;
        let j: usize = field(toks.next(), ln, "endpoint j")?;
        let w: f64 = field(toks.next(), ln, "weight w")?;
        let b: u8 = field(toks.next(), ln, "backbone flag b")?;
        if toks.next().is_some() {
            return Err(parse_err(ln, "edge line must be \"i j w b\""));
        }
        if i == 0 || j == 0 || i > n || j > n {
            return Err(parse_err(ln, format!("endpoint outside 1..={n}")));
        }
        match b {
            0 => {}
            1 => backbone.push(e),
            _ => return Err(parse_err(ln, "backbone flag must be 0 or 1")),
        }
        edges.push(Edge::new(i - 1, j - 1, w));
    }

    let mut d = Vec::with_capacity(n);
    for k in 0..n {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| parse_err(hl, format!("expected {n} demands, found {k}")))?;
        let mut toks = l.split_whitespace();
        d.push(field::<f64>(toks.next(), ln, "demand")?);
        if toks.next().is_some() {
            return Err(parse_err(ln, "one demand value per line"));
        }
    }
    if let Some((ln, _)) = lines.next() {
        return Err(parse_err(ln, "trailing content after demands"));
    }

    Ok(Instance {
        graph: Graph::new(n, edges, backbone)?,
        demand: DemandVector::new(d)?,
        q,
    })
}

/// Serializes with shortest round-trip float formatting.
pub fn write_instance(inst: &Instance) -> String {
    let g = &inst.graph;
    let mut out = String::new();
    let _ = writeln!(out, "{} {} {}", g.n(), g.m(), inst.q);
    for (e, edge) in g.edges().iter().enumerate() {
        let _ = writeln!(
            out,
            "{} {} {:?} {}",
            edge.u + 1,
            edge.v + 1,
            edge.w,
            u8::from(g.is_backbone(e))
        );
    }
    for x in inst.demand.iter() {
        let _ = writeln!(out, "{x:?}");
    }
    out
}

pub fn read_instance(path: &Path) -> Result<Instance> {
    parse_instance(&std::fs::read_to_string(path)?)
}

pub fn save_instance(path: &Path, inst: &Instance) -> Result<()> {
    std::fs::write(path, write_instance(inst))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRIANGLE: &str =
        "# triangle\n3 3 3\n1 2 1.0 1\n2 3 1.0 1 # second\n1 3 0.5 0\n1\n-1\n0\n";

    #[test]
    fn parses_triangle() {
        let inst = parse_instance(TRIANGLE).unwrap();
        assert_eq!(inst.graph.n(), 3);
        assert_eq!(inst.graph.backbone(), &[0, 1]);
        assert_eq!(inst.graph.edge(2).w, 0.5);
        assert_eq!(inst.demand.as_slice(), &[1.0, -1.0, 0.0]);
        assert_eq!(inst.q, 3);
    }

    #[test]
    fn round_trips() {
        let inst = parse_instance(TRIANGLE).unwrap();
        let again = parse_instance(&write_instance(&inst)).unwrap();
        assert_eq!(inst, again);
    }

    #[test]
    fn reports_line_numbers() {
        let bad = "3 3 3\n1 2 1.0 1\n2 x 1.0 1\n1 3 0.5 0\n1\n-1\n0\n";
        match parse_instance(bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_instance("2 1 1\n1 2 1.0 1\n1\n").is_err());
        assert!(parse_instance("2 1 1\n1 3 1.0 1\n1\n-1\n").is_err());
    }

    #[test]
    fn invalid_graph_is_rejected() {
        // Backbone does not span node 3.
        let text = "3 2 2\n1 2 1.0 1\n2 3 1.0 0\n1\n-1\n0\n";
        assert!(matches!(parse_instance(text), Err(Error::InvalidInput(_))));
    }
}
