//! Output documents: flow traces (commented header + CSV table) and solution
//! reports (TOML). All reals use [`format_float`], so identical runs give
//! identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use sha2::{Digest, Sha256};

use crate::curvature::evaluate;
use crate::error::{Error, Result};
use crate::feasibility::FeasibilityVerdict;
use crate::flow::{FlowConfig, FlowMethod, FlowTrace};
use crate::instance::{format_float, Instance};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Input(format!("write failed: {e}"))
}

/// Run settings echoed into trace headers.
#[derive(Debug, Clone)]
pub struct RunInfo<'a> {
    pub digest: &'a str,
    pub config: &'a FlowConfig<f64>,
    pub seed: Option<u64>,
}

fn opt_display<T: std::fmt::Display>(x: Option<T>) -> String {
    x.map_or_else(|| "none".to_owned(), |v| v.to_string())
}

pub fn write_trace<W: Write>(
    mut out: W,
    inst: &Instance,
    info: &RunInfo<'_>,
    trace: &FlowTrace<f64>,
) -> Result<()> {
    let c = info.config;
    let mut head = String::new();
    let mut line = |key: &str, value: String| {
        let _ = writeln!(head, "# {key} = {value}");
    };
    line("instance_sha256", info.digest.to_owned());
    line("method", c.method.to_string());
    if c.method != FlowMethod::Newton {
        line("integrator", c.integrator.to_string());
        line("step", format_float(c.step));
        line("tol_ode", format_float(c.tol_ode));
        line("max_time", format_float(c.max_time));
    }
    line("tol_curvature", format_float(c.tol_curvature));
    line("max_iters", c.max_iters.to_string());
    line("divergence_k", format_float(c.divergence_k));
    line("seed", opt_display(info.seed));
    line("verdict", trace.verdict.to_string());
    line("divergence", opt_display(trace.divergence));
    line(
        "fitted_rate",
        trace.fitted_rate.map_or_else(
            || "none".to_owned(),
            |f| format!("{} r_squared {}", format_float(f.slope), format_float(f.r_squared)),
        ),
    );
    out.write_all(head.as_bytes()).map_err(io_err)?;

    let mut w = csv::Writer::from_writer(out);
    let mut columns = vec!["t".to_owned()];
    columns.extend(inst.vertex_names.iter().map(|n| format!("K[{n}]")));
    columns.extend(["residual", "energy", "speed"].map(String::from));
    w.write_record(&columns).map_err(io_err)?;
    for s in &trace.samples {
        let mut row = vec![format_float(s.t)];
        row.extend(s.k.iter().map(|x| format_float(*x)));
        row.extend([s.residual, s.energy, s.speed].map(format_float));
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// A trace file read back.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub header: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_trace<R: Read>(mut input: R) -> Result<TraceTable> {
    let mut text = String::new();
    input
        .read_to_string(&mut text)
        .map_err(|e| Error::Input(format!("trace: {e}")))?;
    let header = text
        .lines()
        .filter_map(|l| l.strip_prefix("# "))
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_owned(), v.to_owned()))
        .collect();
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let columns = r
        .headers()
        .map_err(|e| Error::Input(format!("trace: {e}")))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Input(format!("trace: {e}")))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| Error::Input(format!("trace: '{f}': {e}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(TraceTable {
        header,
        columns,
        rows,
    })
}

fn quote(s: &str) -> String {
    toml::Value::String(s.to_owned()).to_string()
}

fn subset_names<'a>(inst: &'a Instance, subset: &[usize]) -> Vec<&'a str> {
    subset.iter().map(|&v| inst.vertex_names[v].as_str()).collect()
}

/// Text block shared by `check` and divergent `solve` runs.
pub fn feasibility_text(inst: &Instance, v: &FeasibilityVerdict<f64>) -> String {
    let verdict = match (v.feasible, v.boundary) {
        (true, _) => "feasible",
        (false, true) => "infeasible (boundary)",
        (false, false) => "infeasible",
    };
    format!(
        "{verdict}\nmethod: {}\nworst_subset: {{{}}}\nworst_margin: {}\n",
        v.method,
        subset_names(inst, &v.worst_subset).join(", "),
        format_float(v.worst_margin),
    )
}

/// TOML solution document for the final state of a trace.
pub fn solution_toml(
    inst: &Instance,
    lhat: &[f64],
    trace: &FlowTrace<f64>,
    report_geometry: bool,
) -> Result<String> {
    let last = trace
        .last()
        .ok_or_else(|| Error::Input("empty trace".into()))?;
    let mut out = String::new();
    let _ = writeln!(out, "verdict = {}", quote(&trace.verdict.to_string()));
    let _ = writeln!(out, "method = {}", quote(&trace.method.to_string()));
    let _ = writeln!(out, "steps = {}", trace.samples.len() - 1);
    let _ = writeln!(out, "t = {}", format_float(last.t));
    let _ = writeln!(out, "residual = {}", format_float(last.residual));
    let _ = writeln!(out, "energy = {}", format_float(last.energy));
    let _ = writeln!(out, "saturated = {}", trace.saturated);
    if let Some(d) = trace.divergence {
        let _ = writeln!(out, "divergence = {}", quote(&d.to_string()));
    }
    if let Some(f) = trace.fitted_rate {
        let _ = write!(
            out,
            "\n[fitted_rate]\nslope = {}\nintercept = {}\nr_squared = {}\nwindow = {}\ndegenerate = {}\n",
            format_float(f.slope),
            format_float(f.intercept),
            format_float(f.r_squared),
            f.window,
            f.degenerate,
        );
    }
    if let Some(c) = &trace.certificate {
        let names: Vec<String> = subset_names(inst, &c.worst_subset).iter().map(|n| quote(n)).collect();
        let _ = write!(
            out,
            "\n[certificate]\nfeasible = {}\nboundary = {}\nmethod = {}\nworst_subset = [{}]\nworst_margin = {}\n",
            c.feasible,
            c.boundary,
            quote(&c.method.to_string()),
            names.join(", "),
            format_float(c.worst_margin),
        );
    }
    let state = evaluate(&inst.complex, &last.k)?;
    for (v, name) in inst.vertex_names.iter().enumerate() {
        let _ = write!(
            out,
            "\n[vertices.{}]\nr = {}\nk = {}\nl = {}\nlhat = {}\n",
            quote(name),
            format_float(state.r[v]),
            format_float(state.k[v]),
            format_float(state.l[v]),
            format_float(lhat[v]),
        );
        if report_geometry {
            let _ = writeln!(out, "alpha = {}", format_float(state.alpha_v[v]));
        }
    }
    if report_geometry {
        for (f, walk) in inst.complex.faces().iter().enumerate() {
            let names: Vec<String> = walk.iter().map(|&e| quote(&inst.edge_names[e])).collect();
            let _ = write!(
                out,
                "\n[[faces]]\nedges = [{}]\nalpha = {}\n",
                names.join(", "),
                format_float(state.alpha_f[f]),
            );
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::run;
    use crate::oracle::{fixtures, planted};
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn digest_is_sha256() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn trace_round_trip() {
        let tet = fixtures::tetrahedron(FRAC_PI_2);
        let inst_data = planted(&tet, vec![0.2, -0.1, 0.0, 0.3], 1).unwrap();
        let inst = Instance::from_complex(tet.clone(), Some(inst_data.lhat.values().to_vec()), None);
        let config = FlowConfig::default();
        let trace = run(&tet, &inst_data.lhat, &[0.0; 4], &config).unwrap();
        let info = RunInfo {
            digest: "00",
            config: &config,
            seed: None,
        };
        let mut buf = Vec::new();
        write_trace(&mut buf, &inst, &info, &trace).unwrap();
        let table = read_trace(buf.as_slice()).unwrap();
        assert_eq!(table.header["verdict"], "converged");
        assert_eq!(table.columns.len(), 8);
        assert_eq!(table.columns[1], "K[v0]");
        assert_eq!(table.rows.len(), trace.samples.len());
        for (row, s) in table.rows.iter().zip(&trace.samples) {
            assert_eq!(row[0], s.t);
            assert_eq!(&row[1..5], s.k.as_slice());
            assert_eq!(row[6], s.energy);
        }

        let doc = solution_toml(&inst, inst_data.lhat.values(), &trace, true).unwrap();
        let parsed: toml::Value = toml::from_str(&doc).unwrap();
        assert_eq!(parsed["verdict"].as_str(), Some("converged"));
        let r = parsed["vertices"]["v1"]["r"].as_float().unwrap();
        assert!((r - crate::geometry::k_to_r(-0.1).unwrap()).abs() < 1e-9);
        assert_eq!(parsed["faces"].as_array().unwrap().len(), 4);
        let plain = solution_toml(&inst, inst_data.lhat.values(), &trace, false).unwrap();
        assert!(!plain.contains("alpha"));
    }
}
