//! Human-writable instance documents.
//!
//! ```toml
//! vertices = ["a", "b", "c", "d"]
//! faces = [
//!     ["ab", "bc", "ca"],
//!     ...
//! ]
//!
//! [[edges]]
//! name = "ab"
//! ends = ["a", "b"]
//! phi = "pi/2"
//!
//! [prescription]
//! "a" = 4.0531920000000001e0
//!
//! [initial.k]          # or [initial.r]; optional
//! "a" = 0.0000000000000000e0
//! ```
//!
//! Faces are cyclic walks of edge names. Angles and other reals may be
//! written as numbers or as exact multiples of pi (`"pi"`, `"pi/2"`,
//! `"3pi/4"`, `"2*pi/3"`). [`Instance::to_toml`] is canonical: reals are
//! written with 17 significant digits, or as a pi token when the value is
//! exactly the one the token parses to, so parse and serialize round-trip
//! byte for byte.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::Deserialize;
use toml::Spanned;

use crate::complex::{Prescription, SurfaceComplex};
use crate::error::{Error, Result};
use crate::geometry::{k_to_r, r_to_k};

/// Largest denominator tried when writing a value back as a pi token.
const MAX_PI_DENOMINATOR: u32 = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    K(Vec<f64>),
    R(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub vertex_names: Vec<String>,
    pub edge_names: Vec<String>,
    /// Indices only are checked; see [`SurfaceComplex::validate`].
    pub complex: SurfaceComplex<f64>,
    /// Raw values in vertex order; positivity is checked by
    /// [`prescription`](Self::prescription).
    pub lhat: Option<Vec<f64>>,
    pub initial: Option<Initial>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawReal {
    Float(f64),
    Int(i64),
    Text(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEdge {
    name: Spanned<String>,
    ends: [Spanned<String>; 2],
    phi: Spanned<RawReal>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    k: Option<BTreeMap<String, RawReal>>,
    r: Option<BTreeMap<String, RawReal>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    vertices: Vec<Spanned<String>>,
    #[serde(default)]
    faces: Vec<Vec<Spanned<String>>>,
    #[serde(default)]
    edges: Vec<RawEdge>,
    prescription: Option<BTreeMap<String, RawReal>>,
    initial: Option<RawInitial>,
}

/// `(line, column)`, both 1-based, of a byte offset.
fn position(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, col)
}

fn at<T>(src: &str, item: &Spanned<T>, msg: String) -> Error {
    let (line, col) = position(src, item.span().start);
    Error::Input(format!("line {line}, column {col}: {msg}"))
}

/// Parses `pi`, `pi/q`, `p*pi`, `ppi/q`, `p*pi/q` (optionally signed) or a
/// plain decimal.
pub fn parse_real(text: &str) -> Result<f64> {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if let Some(pos) = t.find("pi") {
        let (head, tail) = (&t[..pos], &t[pos + 2..]);
        let (sign, head) = match head.strip_prefix('-') {
            Some(rest) => (-1.0, rest),
            None => (1.0, head),
        };
        let head = head.strip_suffix('*').unwrap_or(head);
        let p: u32 = if head.is_empty() {
            1
        } else {
            head.parse().map_err(|_| bad_real(text))?
        };
        let q: u32 = match tail.strip_prefix('/') {
            Some(d) => d.parse().map_err(|_| bad_real(text))?,
            None if tail.is_empty() => 1,
            None => return Err(bad_real(text)),
        };
        if q == 0 {
            return Err(bad_real(text));
        }
        return Ok(sign * pi_multiple(p, q));
    }
    t.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| bad_real(text))
}

fn bad_real(text: &str) -> Error {
    Error::Input(format!(
        "cannot read '{text}' as a number or a multiple of pi (e.g. \"pi/2\")"
    ))
}

fn pi_multiple(p: u32, q: u32) -> f64 {
    p as f64 * PI / q as f64
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Canonical text of a real: a pi token when `x` is bit-identical to
/// what that token parses to, else 17 significant digits.
pub fn format_real(x: f64) -> String {
    if let Some(token) = pi_token(x) {
        return format!("\"{token}\"");
    }
    format_float(x)
}

/// 17 significant digits in TOML-compatible exponent notation.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

fn pi_token(x: f64) -> Option<String> {
    if !(x.is_finite() && x != 0.0) {
        return None;
    }
    let (sign, a) = if x < 0.0 { ("-", -x) } else { ("", x) };
    for q in 1..=MAX_PI_DENOMINATOR {
        let p = (a * q as f64 / PI).round();
        if !(1.0..=1e6).contains(&p) {
            continue;
        }
        let p = p as u32;
        if gcd(p, q) != 1 || pi_multiple(p, q) != a {
            continue;
        }
        let num = if p == 1 { String::new() } else { p.to_string() };
        let den = if q == 1 { String::new() } else { format!("/{q}") };
        return Some(format!("{sign}{num}pi{den}"));
    }
    None
}

fn raw_value(raw: &RawReal) -> Result<f64> {
    match raw {
        RawReal::Float(x) => Ok(*x),
        RawReal::Int(i) => Ok(*i as f64),
        RawReal::Text(s) => parse_real(s),
    }
}

fn quote(s: &str) -> String {
    toml::Value::String(s.to_owned()).to_string()
}

impl Instance {
    pub fn parse(src: &str) -> Result<Self> {
        let raw: RawInstance = toml::from_str(src).map_err(|e| Error::Input(e.to_string()))?;

        let mut vindex = HashMap::new();
        let mut vertex_names = Vec::new();
        for v in &raw.vertices {
            if vindex.insert(v.get_ref().clone(), vertex_names.len()).is_some() {
                return Err(at(src, v, format!("duplicate vertex '{}'", v.get_ref())));
            }
            vertex_names.push(v.get_ref().clone());
        }
        let vertex = |name: &Spanned<String>| {
            vindex
                .get(name.get_ref())
                .copied()
                .ok_or_else(|| at(src, name, format!("unknown vertex '{}'", name.get_ref())))
        };

        let mut eindex = HashMap::new();
        let mut edge_names = Vec::new();
        let mut ends = Vec::new();
        let mut phi = Vec::new();
        for e in &raw.edges {
            if eindex.insert(e.name.get_ref().clone(), edge_names.len()).is_some() {
                return Err(at(src, &e.name, format!("duplicate edge '{}'", e.name.get_ref())));
            }
            edge_names.push(e.name.get_ref().clone());
            ends.push([vertex(&e.ends[0])?, vertex(&e.ends[1])?]);
            let value = raw_value(e.phi.get_ref()).map_err(|err| at(src, &e.phi, err.to_string()))?;
            phi.push(value);
        }

        let mut faces = Vec::new();
        for walk in &raw.faces {
            let mut ids = Vec::new();
            for name in walk {
                let id = eindex
                    .get(name.get_ref())
                    .copied()
                    .ok_or_else(|| at(src, name, format!("unknown edge '{}'", name.get_ref())))?;
                ids.push(id);
            }
            faces.push(ids);
        }

        let per_vertex = |what: &str, map: &BTreeMap<String, RawReal>| -> Result<Vec<f64>> {
            if let Some(extra) = map.keys().find(|k| !vindex.contains_key(*k)) {
                return Err(Error::Input(format!("{what}: unknown vertex '{extra}'")));
            }
            vertex_names
                .iter()
                .map(|name| match map.get(name) {
                    Some(raw) => raw_value(raw)
                        .map_err(|e| Error::Input(format!("{what} at '{name}': {e}"))),
                    None => Err(Error::Input(format!("{what}: missing vertex '{name}'"))),
                })
                .collect()
        };

        let lhat = raw
            .prescription
            .as_ref()
            .map(|m| per_vertex("prescription", m))
            .transpose()?;
        let initial = match raw.initial {
            None => None,
            Some(RawInitial { k: Some(_), r: Some(_) }) => {
                return Err(Error::Input("initial: give either k or r, not both".into()))
            }
            Some(RawInitial { k: Some(k), r: None }) => Some(Initial::K(per_vertex("initial.k", &k)?)),
            Some(RawInitial { k: None, r: Some(r) }) => Some(Initial::R(per_vertex("initial.r", &r)?)),
            Some(RawInitial { k: None, r: None }) => None,
        };

        let complex = SurfaceComplex::new(vertex_names.len(), ends, faces, phi)?;
        Ok(Self {
            vertex_names,
            edge_names,
            complex,
            lhat,
            initial,
        })
    }

    pub fn read(path: &std::path::Path) -> Result<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        let inst = Self::parse(text).map_err(|e| match e {
            Error::Input(msg) => Error::Input(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        Ok((inst, bytes))
    }

    /// Builds an instance with generated names `v0, v1, ...` and `e0, e1, ...`.
    pub fn from_complex(
        complex: SurfaceComplex<f64>,
        lhat: Option<Vec<f64>>,
        initial: Option<Initial>,
    ) -> Self {
        Self {
            vertex_names: (0..complex.n_vertices()).map(|v| format!("v{v}")).collect(),
            edge_names: (0..complex.n_edges()).map(|e| format!("e{e}")).collect(),
            complex,
            lhat,
            initial,
        }
    }

    pub fn prescription(&self) -> Result<Prescription<f64>> {
        let values = self
            .lhat
            .clone()
            .ok_or_else(|| Error::Input("instance has no [prescription] section".into()))?;
        if let Some(v) = values.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::Domain {
                what: "prescribed curvature",
                value: values[v],
                range: "(0, inf)",
            });
        }
        Prescription::new(values)
    }

    /// Starting point in `K` coordinates; zero (all radii pi/4) by default.
    pub fn initial_k(&self) -> Result<Option<Vec<f64>>> {
        match &self.initial {
            None => Ok(None),
            Some(Initial::K(k)) => Ok(Some(k.clone())),
            Some(Initial::R(r)) => r.iter().map(|&x| r_to_k(x)).collect::<Result<_>>().map(Some),
        }
    }

    pub fn to_toml(&self) -> String {
        let mut out = String::new();
        let names: Vec<String> = self.vertex_names.iter().map(|s| quote(s)).collect();
        let _ = writeln!(out, "vertices = [{}]", names.join(", "));
        if self.complex.n_faces() == 0 {
            out.push_str("faces = []\n");
        } else {
            out.push_str("faces = [\n");
            for walk in self.complex.faces() {
                let names: Vec<String> = walk.iter().map(|&e| quote(&self.edge_names[e])).collect();
                let _ = writeln!(out, "    [{}],", names.join(", "));
            }
            out.push_str("]\n");
        }
        for (e, [a, b]) in self.complex.edges().iter().enumerate() {
            let _ = write!(
                out,
                "\n[[edges]]\nname = {}\nends = [{}, {}]\nphi = {}\n",
                quote(&self.edge_names[e]),
                quote(&self.vertex_names[*a]),
                quote(&self.vertex_names[*b]),
                format_real(self.complex.phi()[e]),
            );
        }
        let table = |out: &mut String, header: &str, values: &[f64]| {
            let _ = writeln!(out, "\n[{header}]");
            for (name, x) in self.vertex_names.iter().zip(values) {
                let _ = writeln!(out, "{} = {}", quote(name), format_real(*x));
            }
        };
        if let Some(lhat) = &self.lhat {
            table(&mut out, "prescription", lhat);
        }
        match &self.initial {
            Some(Initial::K(k)) => table(&mut out, "initial.k", k),
            Some(Initial::R(r)) => table(&mut out, "initial.r", r),
            None => {}
        }
        out
    }
}

/// Radii for a `K` vector, for reports.
pub fn radii(k: &[f64]) -> Result<Vec<f64>> {
    k.iter().map(|&x| k_to_r(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::fixtures;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn pi_tokens() {
        assert_eq!(parse_real("pi/2").unwrap(), FRAC_PI_2);
        assert_eq!(parse_real(" 3 * pi / 4 ").unwrap(), 3.0 * PI / 4.0);
        assert_eq!(parse_real("2pi/3").unwrap(), 2.0 * PI / 3.0);
        assert_eq!(parse_real("-pi").unwrap(), -PI);
        assert_eq!(parse_real("1.25").unwrap(), 1.25);
        for bad in ["pi/0", "pie", "x", "pi/2/3", "inf"] {
            assert!(parse_real(bad).is_err(), "{bad}");
        }
        assert_eq!(format_real(FRAC_PI_2), "\"pi/2\"");
        assert_eq!(format_real(3.0 * PI), "\"3pi\"");
        assert_eq!(format_real(4.053192), "4.0531920000000001e0");
        assert_eq!(format_real(0.0), "0.0000000000000000e0");
        for token in ["pi/3", "5pi/6", "pi/7", "-2pi/5"] {
            let x = parse_real(token).unwrap();
            assert_eq!(format_real(x), format!("\"{token}\""));
        }
    }

    #[test]
    fn float_text_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn serialize_parse_round_trip() {
        let cube = fixtures::cube(FRAC_PI_2);
        let inst = Instance::from_complex(cube, Some(vec![2.5; 8]), Some(Initial::R(vec![0.5; 8])));
        let text = inst.to_toml();
        let back = Instance::parse(&text).unwrap();
        assert_eq!(back, inst);
        assert_eq!(back.to_toml(), text);
        assert!(back.complex.validate().is_valid());
    }

    #[test]
    fn diagnostics_carry_positions() {
        let src = "vertices = [\"a\", \"b\"]\n\n[[edges]]\nname = \"ab\"\nends = [\"a\", \"zz\"]\nphi = 1.0\n";
        let err = Instance::parse(src).unwrap_err().to_string();
        assert!(err.contains("line 5") && err.contains("'zz'"), "{err}");
        let err = Instance::parse("vertices = [\"a\"\n").unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
        let dup = "vertices = [\"a\", \"a\"]\n";
        assert!(Instance::parse(dup).unwrap_err().to_string().contains("duplicate"));
        let unknown = "vertices = [\"a\"]\ncolour = 3\n";
        assert!(Instance::parse(unknown).is_err());
    }

    #[test]
    fn prescription_and_initial_checks() {
        let tet = fixtures::tetrahedron(FRAC_PI_2);
        let mut inst = Instance::from_complex(tet, None, None);
        assert!(inst.prescription().is_err());
        inst.lhat = Some(vec![1.0, -1.0, 1.0, 1.0]);
        assert!(matches!(inst.prescription(), Err(Error::Domain { .. })));
        let text = inst.to_toml().replace("\"v3\" = 1.0000000000000000e0\n", "");
        assert!(Instance::parse(&text).unwrap_err().to_string().contains("missing vertex 'v3'"));
        inst.initial = Some(Initial::R(vec![FRAC_PI_2 / 2.0; 4]));
        let k = inst.initial_k().unwrap().unwrap();
        assert!(k.iter().all(|x| x.abs() < 1e-15));
    }
}
