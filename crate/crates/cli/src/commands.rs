use std::path::Path;

use boolgrow::analysis::{empirical_convergence, predict, theoretical_iterations, verify_all};
use boolgrow::connective::PRESETS;
use boolgrow::process::{exact_trajectory, fmt17, monte_carlo, FormulaSampler, Snapshot};
use boolgrow::spectrum::{bound_constants, transform};
use boolgrow::{Connective, Distribution, Domain, ProcessSpec, SupportSpec};
use serde::Serialize;
use serde_json::{json, Value};

use crate::{Command, Failure, Format, ProcessArgs};

/// Formulas printed by `sample --emit-formula`.
const EMITTED_FORMULAS: u64 = 4;

pub fn run(command: Command, format: Format) -> Result<String, Failure> {
    match command {
        Command::Classify(c) => classify(&load_connective(&c.connective)?, format),
        Command::Predict(p) => {
            json_only(format, "predict")?;
            to_json(&predict(&process(&p)?))
        }
        Command::Iterate {
            process: p,
            steps,
            every,
        } => iterate(&process(&p)?, steps, every, format),
        Command::Sample {
            process: p,
            depth,
            samples,
            seed,
            emit_formula,
        } => sample(&process(&p)?, depth, samples, seed, emit_formula, format),
        Command::Spectrum {
            input,
            connective,
            n,
            support,
            steps,
            every,
        } => {
            let alpha = connective.as_deref().map(load_connective).transpose()?;
            match input {
                Some(path) => spectrum_from_file(&path, alpha, format),
                None => {
                    let alpha = alpha.ok_or_else(|| malformed("spectrum needs --in or --connective with --n"))?;
                    let n = n.ok_or_else(|| malformed("spectrum needs --n without --in"))?;
                    let support = SupportSpec::parse(n, support.as_deref().unwrap_or("proj"))?;
                    spectrum_from_run(&ProcessSpec::new(support, alpha), steps.unwrap_or(10), every, format)
                }
            }
        }
        Command::Bounds { process: p, epsilon } => bounds(&process(&p)?, epsilon, format),
        Command::Verify { kmax, nmax, ci } => verify(kmax, nmax, ci, format),
        Command::Converge {
            process: p,
            epsilon,
            steps,
        } => {
            let report = empirical_convergence(&process(&p)?, epsilon, steps)?;
            match format {
                Format::Json => to_json(&report),
                Format::Csv => Ok(report.to_csv()),
            }
        }
    }
}

fn malformed(msg: impl Into<String>) -> Failure {
    Failure::Malformed(msg.into())
}

fn json_only(format: Format, what: &str) -> Result<(), Failure> {
    match format {
        Format::Json => Ok(()),
        Format::Csv => Err(malformed(format!("{what} has no csv output"))),
    }
}

fn to_json<S: Serialize + ?Sized>(value: &S) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Preset name, inline JSON, or a JSON file.
pub fn load_connective(source: &str) -> Result<Connective, Failure> {
    if PRESETS.contains(&source) {
        return Ok(Connective::preset(source)?);
    }
    let text = if source.trim_start().starts_with('{') {
        source.to_string()
    } else if Path::new(source).is_file() {
        std::fs::read_to_string(source)?
    } else {
        return Err(malformed(format!(
            "connective {source:?} is not a preset ({}), inline JSON, or a readable file",
            PRESETS.join(", ")
        )));
    };
    Ok(serde_json::from_str(&text)?)
}

fn process(p: &ProcessArgs) -> Result<ProcessSpec, Failure> {
    let alpha = load_connective(&p.connective.connective)?;
    Ok(ProcessSpec::new(SupportSpec::parse(p.n, &p.support)?, alpha))
}

fn classify(alpha: &Connective, format: Format) -> Result<String, Failure> {
    json_only(format, "classify")?;
    let poly = alpha.char_poly();
    let detail = alpha.convergence_detail();
    let k = alpha.arity();
    let doc = json!({
        "connective": alpha,
        "properties": alpha.class(),
        "char_poly": {
            "counts": poly.counts(),
            "beta": (0..=k).map(|i| poly.beta(i).to_string()).collect::<Vec<_>>(),
        },
        "fixed_point": alpha.fixed_point(1e-14)?,
        "convergence_class": detail.class,
        "convergence_via_dual": detail.via_dual,
        "convergence_warning": detail.warning,
        "degenerate": alpha.is_degenerate(),
    });
    to_json(&doc)
}

fn header(spec: &ProcessSpec) -> Value {
    json!({
        "n": spec.n(),
        "connective": spec.alpha,
        "support": spec.support.to_flags(),
    })
}

fn iterate(spec: &ProcessSpec, steps: usize, every: usize, format: Format) -> Result<String, Failure> {
    if every == 0 {
        return Err(malformed("--every must be positive"));
    }
    let mut snaps: Vec<Distribution<f64>> = Vec::new();
    let run = exact_trajectory::<f64>(spec, steps, |pi| {
        let i = pi.iteration();
        if i % every == 0 || i == steps {
            snaps.push(pi.clone());
        }
        Ok(())
    })?;
    match format {
        Format::Json => {
            let mut doc = header(spec);
            doc["max_drift"] = json!(run.max_drift());
            doc["snapshots"] = json!(snaps.iter().map(Distribution::to_snapshot).collect::<Vec<_>>());
            to_json(&doc)
        }
        Format::Csv => {
            let mut out = String::from("i,fn,p\n");
            for pi in &snaps {
                for &(key, p) in pi.entries() {
                    out.push_str(&format!(
                        "{},{},{}\n",
                        pi.iteration(),
                        pi.domain().format_key(key),
                        fmt17(p)
                    ));
                }
            }
            Ok(out)
        }
    }
}

fn sample(
    spec: &ProcessSpec,
    depth: usize,
    samples: u64,
    seed: u64,
    emit_formula: bool,
    format: Format,
) -> Result<String, Failure> {
    let pi = monte_carlo::<f64>(spec, depth, samples, seed)?;
    let formulas = if emit_formula {
        let sampler = FormulaSampler::new(spec, depth)?;
        (0..samples.min(EMITTED_FORMULAS))
            .map(|i| {
                let (id, formula) = sampler.sample_tree(seed, i)?;
                Ok(json!({ "index": i, "fn": Domain::General(spec.n()).format_key(id), "formula": formula }))
            })
            .collect::<Result<Vec<_>, Failure>>()?
    } else {
        Vec::new()
    };
    match format {
        Format::Json => {
            let mut doc = header(spec);
            doc["depth"] = json!(depth);
            doc["samples"] = json!(samples);
            doc["seed"] = json!(seed);
            doc["distribution"] = json!(pi.to_snapshot());
            if emit_formula {
                doc["formulas"] = json!(formulas);
            }
            to_json(&doc)
        }
        Format::Csv => {
            for f in &formulas {
                eprintln!(
                    "{} {} {}",
                    f["index"],
                    f["fn"].as_str().unwrap_or(""),
                    f["formula"].as_str().unwrap_or("")
                );
            }
            Ok(pi.to_csv())
        }
    }
}

/// Snapshots from an `iterate` or `sample` document, or a bare snapshot, plus any connective
/// recorded alongside them.
fn read_snapshots(path: &Path) -> Result<(Vec<Snapshot>, Option<Connective>), Failure> {
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let alpha = match doc.get("connective") {
        Some(c) => Some(serde_json::from_value(c.clone())?),
        None => None,
    };
    let snaps = if let Some(s) = doc.get("snapshots") {
        serde_json::from_value(s.clone())?
    } else if let Some(d) = doc.get("distribution") {
        vec![serde_json::from_value(d.clone())?]
    } else {
        vec![serde_json::from_value(doc)?]
    };
    Ok((snaps, alpha))
}

fn spectrum_from_file(path: &Path, alpha: Option<Connective>, format: Format) -> Result<String, Failure> {
    let (snaps, recorded) = read_snapshots(path)?;
    let dists = snaps
        .iter()
        .map(Distribution::<f64>::from_snapshot)
        .collect::<Result<Vec<_>, _>>()?;
    spectrum_output(&dists, alpha.or(recorded).as_ref(), format)
}

fn spectrum_from_run(spec: &ProcessSpec, steps: usize, every: usize, format: Format) -> Result<String, Failure> {
    if every == 0 {
        return Err(malformed("--every must be positive"));
    }
    let mut dists = Vec::new();
    exact_trajectory::<f64>(spec, steps, |pi| {
        if pi.iteration() % every == 0 || pi.iteration() == steps {
            dists.push(pi.clone());
        }
        Ok(())
    })?;
    spectrum_output(&dists, Some(&spec.alpha), format)
}

/// JSON: one Δ dump per distribution. CSV: `i,max_delta,bound` with the spectral envelope as the
/// bound where the connective is balanced and nonlinear and the envelope is finite.
fn spectrum_output(dists: &[Distribution<f64>], alpha: Option<&Connective>, format: Format) -> Result<String, Failure> {
    let spectra = dists.iter().map(transform).collect::<Result<Vec<_>, _>>()?;
    match format {
        Format::Json => to_json(&spectra.iter().map(|s| s.to_dump()).collect::<Vec<_>>()),
        Format::Csv => {
            let mut out = String::from("i,max_delta,bound\n");
            for s in &spectra {
                let bound = match (alpha, s.domain()) {
                    (Some(a), Domain::General(n)) => bound_constants(a, n)
                        .ok()
                        .map(|bc| bc.envelope_max(s.iteration() as f64))
                        .filter(|b| b.is_finite()),
                    _ => None,
                };
                let bound = bound.map(fmt17).unwrap_or_default();
                out.push_str(&format!("{},{},{bound}\n", s.iteration(), fmt17(s.max_nonzero())));
            }
            Ok(out)
        }
    }
}

fn bounds(spec: &ProcessSpec, epsilon: f64, format: Format) -> Result<String, Failure> {
    let iteration = theoretical_iterations(spec, epsilon);
    let constants = bound_constants(&spec.alpha, spec.n());
    let min_i = constants.as_ref().ok().map(|bc| bc.savbounds_min_i(epsilon));
    match format {
        Format::Json => {
            let mut doc = header(spec);
            doc["epsilon"] = json!(epsilon);
            doc["prediction"] = json!(predict(spec));
            match &iteration {
                Ok(b) => doc["iteration_bound"] = json!(b),
                Err(e) => doc["iteration_bound_error"] = json!(e.to_string()),
            }
            match &constants {
                Ok(bc) => {
                    doc["bound_constants"] = json!(bc);
                    doc["i_2"] = json!(bc.i_d(2));
                    if let Some(Ok(v)) = &min_i {
                        doc["explicit_min_i"] = json!(v);
                    }
                }
                Err(e) => doc["bound_constants_error"] = json!(e.to_string()),
            }
            to_json(&doc)
        }
        Format::Csv => {
            let mut rows = vec![("epsilon".to_string(), fmt17(epsilon))];
            if let Ok(b) = &iteration {
                rows.push(("bound_tag".into(), format!("{:?}", b.bound_tag)));
                rows.push(("value".into(), fmt17(b.value)));
                rows.push(("has_unknown_constant".into(), b.has_unknown_constant.to_string()));
                if let Some(g) = b.fixed_point_gap {
                    rows.push(("fixed_point_gap".into(), fmt17(g)));
                }
            }
            if let Ok(bc) = &constants {
                rows.push(("a".into(), fmt17(bc.a)));
                rows.push(("log_inv_a".into(), fmt17(bc.log_inv_a)));
                rows.push(("big_i".into(), fmt17(bc.big_i)));
                rows.push(("i_2".into(), fmt17(bc.i_d(2))));
                if let Some(Ok(v)) = &min_i {
                    rows.push(("explicit_min_i".into(), fmt17(*v)));
                }
            }
            let mut out = String::from("key,value\n");
            for (k, v) in rows {
                out.push_str(&format!("{k},{v}\n"));
            }
            Ok(out)
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn verify(kmax: usize, nmax: usize, ci: bool, format: Format) -> Result<String, Failure> {
    let results = verify_all(kmax, nmax)?;
    let text = match format {
        Format::Json => to_json(&results)?,
        Format::Csv => {
            let mut out = String::from("lemma,population,checked,pass,worst_margin,witness\n");
            for r in &results {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    csv_field(&r.lemma),
                    csv_field(&r.population),
                    r.checked,
                    r.pass,
                    r.worst_margin.map(fmt17).unwrap_or_default(),
                    csv_field(r.witness.as_deref().unwrap_or("")),
                ));
            }
            out
        }
    };
    if ci && results.iter().any(|r| !r.pass) {
        return Err(Failure::Verify(text));
    }
    Ok(text)
}
