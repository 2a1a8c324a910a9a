//! Line-based netlist format.
//!
//! ```text
//! # comment
//! R<name> n+ n- value
//! C<name> n+ n- value
//! L<name> n+ n- value
//! V<name> n+ n- sin amp omega
//! D<name> n+ n- Is k [offset]
//! M<name> n1+ n1- [n2+ n2-] model=<path|synthetic[:preset]>
//! ```
//!
//! The element kind is the first letter of its name. Node `0` (or `gnd`)
//! is ground; other nodes are numbered in order of first appearance.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    Resistor,
    Capacitor,
    Inductor,
    VoltageSource,
    Diode,
    Device,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ElementParams {
    Value(f64),
    Sine { amp: f64, omega: f64 },
    Diode { is: f64, k: f64, offset: Option<f64> },
    Device { model: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub name: String,
    pub kind: ElementKind,
    /// Node indices, `0` is ground. Two per port.
    pub terminals: Vec<usize>,
    pub params: ElementParams,
    pub line: usize,
}

impl Element {
    /// Terminal pairs `(n+, n-)`, one per branch or port.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.terminals.chunks(2).map(|c| (c[0], c[1]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    /// Names of the non-ground nodes; node `i` is `nodes[i - 1]`.
    pub nodes: Vec<String>,
    pub elements: Vec<Element>,
}

impl Netlist {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn of_kind(&self, kind: ElementKind) -> impl Iterator<Item = &Element> {
        self.elements.iter().filter(move |e| e.kind == kind)
    }

    pub fn count(&self, kind: ElementKind) -> usize {
        self.of_kind(kind).count()
    }

    /// Index of a node by name (`0` for ground).
    pub fn node_index(&self, name: &str) -> Option<usize> {
        if is_ground(name) {
            return Some(0);
        }
        self.nodes.iter().position(|n| n == name).map(|i| i + 1)
    }

    /// The electromagnetic element, if any.
    pub fn device(&self) -> Option<&Element> {
        self.of_kind(ElementKind::Device).next()
    }

    /// Number of MNA unknowns `(u, j_L, j_V)`.
    pub fn unknowns(&self) -> usize {
        self.n_nodes() + self.count(ElementKind::Inductor) + self.count(ElementKind::VoltageSource)
    }
}

fn is_ground(tok: &str) -> bool {
    tok == "0" || tok.eq_ignore_ascii_case("gnd")
}

fn valid_node_token(tok: &str) -> bool {
    !tok.is_empty() && tok.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

struct LineParser<'a> {
    origin: &'a str,
    line: usize,
}

impl LineParser<'_> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.origin, self.line, msg)
    }

    fn number(&self, tok: Option<&str>, what: &str) -> Result<f64> {
        let tok = tok.ok_or_else(|| self.err(format!("missing {what}")))?;
        let v: f64 = tok.parse().map_err(|_| self.err(format!("{what} '{tok}' is not a number")))?;
        if !v.is_finite() {
            return Err(self.err(format!("{what} must be finite")));
        }
        Ok(v)
    }

    fn positive(&self, tok: Option<&str>, what: &str) -> Result<f64> {
        let v = self.number(tok, what)?;
        if v <= 0.0 {
            return Err(self.err(format!("{what} must be positive")));
        }
        Ok(v)
    }
}

pub fn parse_netlist(text: &str, origin: &str) -> Result<Netlist> {
    let mut nodes: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut elements = Vec::new();
    let mut names = HashSet::new();
    let mut ground_seen = false;

    for (idx, raw) in text.lines().enumerate() {
        let p = LineParser { origin, line: idx + 1 };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let name = toks[0];
        let kind = match name.chars().next().map(|c| c.to_ascii_uppercase()) {
            Some('R') => ElementKind::Resistor,
            Some('C') => ElementKind::Capacitor,
            Some('L') => ElementKind::Inductor,
            Some('V') => ElementKind::VoltageSource,
            Some('D') => ElementKind::Diode,
            Some('M') => ElementKind::Device,
            _ => return Err(p.err(format!("unknown element '{name}'"))),
        };
        if !names.insert(name.to_ascii_uppercase()) {
            return Err(p.err(format!("duplicate element name '{name}'")));
        }

        let n_terms = if kind == ElementKind::Device {
            let n = toks[1..].iter().take_while(|t| !t.starts_with("model=")).count();
            if n != 2 && n != 4 {
                return Err(p.err(format!("device '{name}' needs 2 or 4 node tokens, found {n}")));
            }
            n
        } else {
            2
        };
        if toks.len() < 1 + n_terms {
            return Err(p.err(format!("element '{name}' needs {n_terms} nodes")));
        }
        let mut terminals = Vec::with_capacity(n_terms);
        for &tok in &toks[1..1 + n_terms] {
            if !valid_node_token(tok) {
                return Err(p.err(format!("invalid node token '{tok}'")));
            }
            if is_ground(tok) {
                ground_seen = true;
                terminals.push(0);
                continue;
            }
            let id = *index.entry(tok.to_string()).or_insert_with(|| {
                nodes.push(tok.to_string());
                nodes.len()
            });
            terminals.push(id);
        }
        for pair in terminals.chunks(2) {
            if pair[0] == pair[1] {
                return Err(p.err(format!("element '{name}' connects a node to itself")));
            }
        }

        let rest = &toks[1 + n_terms..];
        let params = match kind {
            ElementKind::Resistor | ElementKind::Capacitor | ElementKind::Inductor => {
                if rest.len() != 1 {
                    return Err(p.err(format!("element '{name}' takes exactly one value")));
                }
                ElementParams::Value(p.positive(rest.first().copied(), "value")?)
            }
            ElementKind::VoltageSource => {
                if rest.len() != 3 || !rest[0].eq_ignore_ascii_case("sin") {
                    return Err(p.err("voltage source expects 'sin amp omega'"));
                }
                ElementParams::Sine { amp: p.number(Some(rest[1]), "amplitude")?, omega: p.number(Some(rest[2]), "omega")? }
            }
            ElementKind::Diode => {
                if rest.len() < 2 || rest.len() > 3 {
                    return Err(p.err("diode expects 'Is k [offset]'"));
                }
                let offset = match rest.get(2) {
                    Some(t) => Some(p.number(Some(t), "offset")?),
                    None => None,
                };
                ElementParams::Diode {
                    is: p.positive(Some(rest[0]), "Is")?,
                    k: p.positive(Some(rest[1]), "k")?,
                    offset,
                }
            }
            ElementKind::Device => {
                let model = match rest {
                    [m] => m.strip_prefix("model=").unwrap_or("").to_string(),
                    _ => String::new(),
                };
                if model.is_empty() {
                    return Err(p.err(format!("device '{name}' needs a single model=<...> argument")));
                }
                ElementParams::Device { model }
            }
        };
        elements.push(Element { name: name.to_string(), kind, terminals, params, line: idx + 1 });
    }

    let netlist = Netlist { nodes, elements };
    validate(&netlist, ground_seen)?;
    Ok(netlist)
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn validate(net: &Netlist, ground_seen: bool) -> Result<()> {
    if net.elements.is_empty() {
        return Err(Error::Netlist("netlist has no elements".into()));
    }
    if !ground_seen {
        return Err(Error::Netlist("no element is connected to ground (node 0)".into()));
    }
    if net.count(ElementKind::Device) > 1 {
        return Err(Error::Netlist("at most one electromagnetic device (M) is supported".into()));
    }
    let n = net.n_nodes();
    let mut degree = vec![0usize; n + 1];
    let mut parent: Vec<usize> = (0..=n).collect();
    for e in &net.elements {
        for (a, b) in e.pairs() {
            degree[a] += 1;
            degree[b] += 1;
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
    }
    for i in 1..=n {
        if degree[i] < 2 {
            return Err(Error::Netlist(format!("node '{}' is dangling (one connection)", net.nodes[i - 1])));
        }
    }
    let root = find(&mut parent, 0);
    for i in 1..=n {
        if find(&mut parent, i) != root {
            return Err(Error::Netlist(format!("node '{}' is not connected to ground", net.nodes[i - 1])));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_problem() {
        let n = parse_netlist("V1 1 0 sin 1 4.712388980384690\nM1 1 0 model=synthetic\n", "mp").unwrap();
        assert_eq!(n.n_nodes(), 1);
        assert_eq!(n.count(ElementKind::VoltageSource), 1);
        assert_eq!(n.count(ElementKind::Device), 1);
        assert_eq!(n.unknowns(), 2);
        assert_eq!(n.elements[0].params, ElementParams::Sine { amp: 1.0, omega: 4.712388980384690 });
    }

    #[test]
    fn rectifier() {
        let text = "# half-wave rectifier\nV1 1 0 sin 250 15.707963267948966\nMT 1 0 0 2 model=synthetic:transformer:64\n\
                    C1 2 0 1e-12\nD1 2 3 2.5e-6 4\nR1 3 0 10000\n";
        let n = parse_netlist(text, "rect").unwrap();
        assert_eq!(n.n_nodes(), 3);
        assert_eq!(n.unknowns(), 4);
        assert_eq!(n.device().unwrap().terminals, vec![1, 0, 0, 2]);
    }

    #[test]
    fn first_appearance_ordering() {
        let n = parse_netlist("R1 b a 1\nR2 a 0 1\nR3 b 0 1\n", "x").unwrap();
        assert_eq!(n.nodes, vec!["b", "a"]);
        assert_eq!(n.node_index("a"), Some(2));
    }

    #[test]
    fn errors() {
        let cases = [
            ("R1 1 2 1\nR2 1 2 1\n", "ground"),
            ("R1 1 0 1\nR2 1 7 1\n", "dangling"),
            ("R1 1 0 1\nX1 1 0 1\n", "line 2"),
            ("R1 1 0\n", "line 1"),
            ("R1 1 0 -3\nR2 1 0 1\n", "positive"),
            ("V1 1 0 cos 1 2\nR1 1 0 1\n", "sin"),
            ("R1 1 0 1\nR1 1 0 2\n", "duplicate"),
            ("R1 1 0 1\nR2 1 0 1\nR3 2 3 1\nR4 2 3 1\n", "not connected"),
            ("R1 1 0 1\nR2 1 0 1\nM1 1 0 0\n", "2 or 4"),
            ("R1 1 0 1\nR2 1 0 1\nR3 1 1 1\n", "itself"),
            ("R1 1 0 1\nR2 1 n-1 1\n", "invalid node"),
        ];
        for (text, needle) in cases {
            let e = parse_netlist(text, "t").unwrap_err().to_string();
            assert!(e.contains(needle), "{text:?}: {e}");
        }
    }
}
