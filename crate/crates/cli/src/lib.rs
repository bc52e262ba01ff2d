//! Command implementations behind the `qmarkov` binary.
//!
//! Every command returns an [`Outcome`]: a machine-readable [`Report`], a short
//! human rendering and the exit code (0 success/true, 1 analysed-false,
//! 2 input error).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use qmarkov_core::classical::classical_cmi;
use qmarkov_core::format::{
    parse, to_json, DistributionFile, Document, FactorSpec, Manifest, ManifestEntry, OperatorFile, TesterFile,
    FORMAT_VERSION,
};
use qmarkov_core::maps::maximally_mixed;
use qmarkov_core::markov::{
    tetrahedral_example_process, default_witness_coefficients, has_markov_order_with, quantum_cmi,
    rho_abc, mixing_witness,
};
use qmarkov_core::process::{embed_classical, markovian_process};
use qmarkov_core::tensor::{bloch_operator, paulis};
use qmarkov_core::{
    tol, BlockPartition, CpMap, Instrument, InstrumentSequence, JointDistribution,
    LabeledOperator, LogBase, ProcessTensor, C64,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FALSE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

/// Input or usage problem; always maps to exit code 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<qmarkov_core::Error> for InputError {
    fn from(e: qmarkov_core::Error) -> Self {
        InputError(e.to_string())
    }
}

type CliResult<T> = Result<T, InputError>;

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub parameters: BTreeMap<String, Value>,
    pub inputs: Vec<InputDigest>,
    pub tolerances: BTreeMap<String, f64>,
    pub result: Value,
    pub verdict: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub text: String,
    pub code: i32,
}

impl Report {
    fn new(command: &str) -> Self {
        Self {
            command: command.into(),
            parameters: BTreeMap::new(),
            inputs: Vec::new(),
            tolerances: BTreeMap::new(),
            result: Value::Null,
            verdict: None,
        }
    }

    fn param(mut self, key: &str, value: impl Serialize) -> Self {
        self.parameters
            .insert(key.into(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }

    fn tol(mut self, key: &str, value: f64) -> Self {
        self.tolerances.insert(key.into(), value);
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn read_input(path: &Path, report: &mut Report) -> CliResult<Document> {
    let bytes =
        fs::read(path).map_err(|e| InputError(format!("cannot read {}: {e}", path.display())))?;
    report.inputs.push(InputDigest {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    });
    let text = String::from_utf8(bytes)
        .map_err(|_| InputError(format!("{} is not UTF-8", path.display())))?;
    parse(&text).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn read_process(path: &Path, report: &mut Report) -> CliResult<ProcessTensor> {
    match read_input(path, report)? {
        Document::Operator(f) => Ok(ProcessTensor::new(f.to_operator()?)?),
        other => Err(InputError(format!(
            "{}: expected an operator document, found `{}`",
            path.display(),
            other.kind()
        ))),
    }
}

fn read_tester(path: &Path, report: &mut Report) -> CliResult<InstrumentSequence> {
    match read_input(path, report)? {
        Document::Tester(f) => Ok(f.to_sequence()?),
        other => Err(InputError(format!(
            "{}: expected a tester document, found `{}`",
            path.display(),
            other.kind()
        ))),
    }
}

/// Parses `"0|1|2"` or `"0,1|2|3"`; blocks are history, memory, future.
pub fn parse_partition(text: &str) -> CliResult<BlockPartition> {
    let blocks: Vec<&str> = text.split('|').collect();
    if blocks.len() != 3 {
        return Err(InputError(format!(
            "partition `{text}` must have three `|`-separated blocks"
        )));
    }
    let parse_block = |b: &str| -> CliResult<Vec<usize>> {
        b.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| InputError(format!("bad step index `{s}` in partition")))
            })
            .collect()
    };
    Ok(BlockPartition::from_blocks(
        &parse_block(blocks[0])?,
        &parse_block(blocks[1])?,
        &parse_block(blocks[2])?,
    )?)
}

pub fn parse_log_base(text: &str) -> CliResult<LogBase> {
    match text {
        "2" => Ok(LogBase::Two),
        "e" => Ok(LogBase::E),
        _ => Err(InputError(format!("log base must be 2 or e, got `{text}`"))),
    }
}

/// Named single-step instruments.
pub const INSTRUMENT_NAMES: &[&str] = &["tetrahedral", "sharp-z", "sharp"];

fn named_instrument(name: &str, d_in: usize, d_out: usize) -> CliResult<Instrument> {
    let povm = match name {
        "tetrahedral" if d_in == 2 => Instrument::tetrahedral_povm(),
        "tetrahedral" => {
            return Err(InputError(format!(
                "tetrahedral instrument needs a qubit, step has dimension {d_in}"
            )))
        }
        "sharp-z" => Instrument::computational_povm(d_in)?,
        "sharp" if d_in == d_out => return Ok(Instrument::sharp_classical(d_in)?),
        "sharp" => {
            return Err(InputError(format!(
                "sharp instrument needs equal input and output dimensions, got {d_in} and {d_out}"
            )))
        }
        _ => {
            return Err(InputError(format!(
                "unknown instrument `{name}`; expected a tester file or one of {}",
                INSTRUMENT_NAMES.join(", ")
            )))
        }
    };
    if d_out > 1 {
        Ok(povm.then_prepare(&maximally_mixed(d_out))?)
    } else {
        Ok(povm)
    }
}

/// A tester file, or a named instrument applied independently at each step.
fn memory_instrument(
    name_or_path: &str,
    process: &ProcessTensor,
    steps: &[usize],
    report: &mut Report,
) -> CliResult<InstrumentSequence> {
    let path = Path::new(name_or_path);
    if path.exists() {
        return read_tester(path, report);
    }
    let insts = steps
        .iter()
        .map(|&s| named_instrument(name_or_path, process.input_dim(s), process.output_dim(s)))
        .collect::<CliResult<Vec<_>>>()?;
    let parts: Vec<(usize, &Instrument)> = steps.iter().copied().zip(insts.iter()).collect();
    Ok(InstrumentSequence::product(&parts)?)
}

pub fn cmd_validate(path: &Path, tolerance: f64) -> CliResult<Outcome> {
    let mut report = Report::new("validate").tol("tolerance", tolerance).tol("psd", tol::PSD);
    let p = read_process(path, &mut report)?;
    let r = p.validate_with(tolerance);
    let mut violations = Vec::new();
    if !r.psd {
        violations.push(json!({"condition": "positivity", "magnitude": -r.min_eigenvalue}));
    }
    for (step, d) in &r.causality {
        if *d > tolerance {
            violations.push(json!({"condition": format!("causality at step {step}"), "magnitude": d}));
        }
    }
    if r.trace_deviation > tolerance {
        violations.push(json!({"condition": "trace", "magnitude": r.trace_deviation}));
    }
    let mut text = format!(
        "process on steps {:?}: {}\n",
        p.steps(),
        if r.valid { "valid" } else { "INVALID" }
    );
    text += &format!(
        "  min eigenvalue {:.3e}, trace {:.12} (expected {})\n",
        r.min_eigenvalue, r.trace, r.expected_trace
    );
    for (step, d) in &r.causality {
        text += &format!("  causality deviation at step {step}: {d:.3e}\n");
    }
    report.result = json!({"report": r, "violations": violations});
    report.verdict = Some(r.valid);
    Ok(Outcome {
        report,
        text,
        code: if r.valid { EXIT_OK } else { EXIT_FALSE },
    })
}

fn write_doc(dir: &Path, name: &str, doc: &Document) -> CliResult<()> {
    let path = dir.join(name);
    fs::write(&path, to_json(doc)?)
        .map_err(|e| InputError(format!("cannot write {}: {e}", path.display())))
}

fn factor_specs(op: &LabeledOperator) -> Vec<FactorSpec> {
    op.factors()
        .iter()
        .map(|f| FactorSpec {
            name: f.name.clone(),
            dim: f.dim,
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ExampleParams {
    pub steps: usize,
    pub p_flip: f64,
    pub channel: String,
}

impl Default for ExampleParams {
    fn default() -> Self {
        Self {
            steps: 3,
            p_flip: 0.3,
            channel: "identity".into(),
        }
    }
}

fn named_channel(name: &str) -> CliResult<CpMap> {
    let c = |x: f64| C64::new(x, 0.0);
    let p = paulis();
    match name {
        "identity" => Ok(CpMap::identity(2)),
        "depolarizing" => Ok(CpMap::from_kraus(
            &p.iter().map(|s| s * c(0.5)).collect::<Vec<_>>(),
            "depolarizing",
        )?),
        "dephasing" => Ok(CpMap::from_kraus(
            &[&p[0] * c(0.5f64.sqrt()), &p[3] * c(0.5f64.sqrt())],
            "dephasing",
        )?),
        _ => Err(InputError(format!(
            "unknown channel `{name}`; expected identity, depolarizing or dephasing"
        ))),
    }
}

/// Writes example files and a manifest into `dir`.
pub fn cmd_example(name: &str, params: &ExampleParams, dir: &Path) -> CliResult<Outcome> {
    fs::create_dir_all(dir)
        .map_err(|e| InputError(format!("cannot create {}: {e}", dir.display())))?;
    let mut report = Report::new("example").param("name", name);
    let mut files = Vec::new();
    let mut partitions = Vec::new();
    let mut parameters = serde_json::Map::new();
    let mut put = |file: &str, role: &str, doc: Document, factors| -> CliResult<()> {
        write_doc(dir, file, &doc)?;
        files.push(ManifestEntry {
            path: file.into(),
            role: role.into(),
            factors,
        });
        Ok(())
    };
    match name {
        "appendix-d" => {
            let p = tetrahedral_example_process();
            let state = rho_abc();
            put("process.json", "process", Document::Operator(OperatorFile::from_operator(p.op())), factor_specs(p.op()))?;
            put("state.json", "input-state", Document::Operator(OperatorFile::from_operator(&state)), factor_specs(&state))?;
            for (file, inst) in [("tetrahedral.json", "tetrahedral"), ("sharp-z.json", "sharp-z")] {
                let seq = InstrumentSequence::single(1, &named_instrument(inst, 2, 2)?)?;
                put(file, "memory-instrument", Document::Tester(TesterFile::from_sequence(&seq)), vec![])?;
            }
            partitions.push("0|1|2".to_string());
        }
        "markovian" => {
            if params.steps == 0 {
                return Err(InputError("steps must be at least 1".into()));
            }
            let ch = named_channel(&params.channel)?;
            let chans = vec![ch; params.steps - 1];
            let p = markovian_process(&chans, &bloch_operator(0.5, [0.0, 0.0, 1.0]))?;
            if p.op().dim() > 256 {
                return Err(InputError(format!("{} steps exceed the 256x256 limit", params.steps)));
            }
            put("process.json", "process", Document::Operator(OperatorFile::from_operator(p.op())), factor_specs(p.op()))?;
            parameters.insert("steps".into(), json!(params.steps));
            parameters.insert("channel".into(), json!(params.channel));
            partitions.extend(cut_strings(params.steps));
        }
        "classical-chain" => {
            let dist = JointDistribution::binary_flip_chain(params.p_flip, params.steps)?;
            let p = embed_classical(&dist, &vec![2; params.steps])?;
            if p.op().dim() > 256 {
                return Err(InputError(format!("{} steps exceed the 256x256 limit", params.steps)));
            }
            put("distribution.json", "distribution", Document::Distribution(DistributionFile::from_distribution(&dist)), vec![])?;
            put("process.json", "process", Document::Operator(OperatorFile::from_operator(p.op())), factor_specs(p.op()))?;
            parameters.insert("steps".into(), json!(params.steps));
            parameters.insert("p_flip".into(), json!(params.p_flip));
            partitions.extend(cut_strings(params.steps));
        }
        _ => {
            return Err(InputError(format!(
                "unknown example `{name}`; expected appendix-d, markovian or classical-chain"
            )))
        }
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION.into(),
        example: name.into(),
        files: files.clone(),
        partitions,
        parameters: parameters.clone(),
    };
    write_doc(dir, "manifest.json", &Document::Manifest(manifest))?;
    let written: Vec<String> = files
        .iter()
        .map(|f| f.path.clone())
        .chain(["manifest.json".to_string()])
        .collect();
    report = report.param("parameters", &parameters);
    report.result = json!({"directory": dir.display().to_string(), "files": written});
    report.verdict = Some(true);
    Ok(Outcome {
        text: format!("wrote {} to {}\n", written.join(", "), dir.display()),
        report,
        code: EXIT_OK,
    })
}

fn cut_strings(steps: usize) -> Vec<String> {
    (1..steps)
        .flat_map(|ell| BlockPartition::cuts(steps, ell))
        .map(|p| p.to_string())
        .collect()
}

pub fn cmd_born(process: &Path, tester: &Path) -> CliResult<Outcome> {
    let mut report = Report::new("born").tol("completeness", 1e-10);
    let p = read_process(process, &mut report)?;
    let seq = read_tester(tester, &mut report)?;
    let complete = seq.steps() == p.steps();
    let probs = if complete {
        p.born_distribution(&seq)?
    } else {
        // Steps outside the tester receive maximally mixed inputs.
        let rest: Vec<usize> = p
            .steps()
            .iter()
            .copied()
            .filter(|s| !seq.steps().contains(s))
            .collect();
        let norm = p.output_dim_of(&rest) as f64;
        seq.elements()
            .iter()
            .map(|e| Ok(p.contract(&e.op)?.trace().re / norm))
            .collect::<CliResult<Vec<f64>>>()?
    };
    let complete = complete && seq.validate().valid;
    let sum: f64 = probs.iter().sum();
    let ok = !complete || (sum - 1.0).abs() <= 1e-10;
    let rows: Vec<Value> = seq
        .elements()
        .iter()
        .zip(&probs)
        .map(|(e, q)| json!({"outcome": e.label, "probability": q}))
        .collect();
    let mut text = String::new();
    for (e, q) in seq.elements().iter().zip(&probs) {
        text += &format!("  {:>12}  {q:.12}\n", e.label);
    }
    text += &format!("sum {sum:.12} ({})\n", if complete { "complete tester" } else { "partial tester" });
    report.result = json!({"probabilities": rows, "sum": sum, "complete": complete});
    report.verdict = Some(ok);
    Ok(Outcome {
        report,
        text,
        code: if ok { EXIT_OK } else { EXIT_FALSE },
    })
}

pub fn cmd_condition(
    process: &Path,
    tester: &Path,
    outcome: &str,
    output: Option<&Path>,
) -> CliResult<Outcome> {
    let mut report = Report::new("condition")
        .param("outcome", outcome)
        .tol("probability_floor", tol::PROB_FLOOR);
    let p = read_process(process, &mut report)?;
    let seq = read_tester(tester, &mut report)?;
    let element = seq
        .elements()
        .iter()
        .find(|e| e.label == outcome)
        .ok_or_else(|| InputError(format!("tester has no outcome `{outcome}`")))?;
    let c = p.condition(&element.op)?;
    if let Some(path) = output {
        fs::write(path, to_json(&Document::Operator(OperatorFile::from_operator(&c.op)))?)
            .map_err(|e| InputError(format!("cannot write {}: {e}", path.display())))?;
    }
    let names: Vec<&str> = c.op.factor_names();
    report.result = json!({
        "probability": c.probability,
        "conditioned_steps": c.conditioned_steps,
        "factors": names,
        "written": output.map(|p| p.display().to_string()),
    });
    report.verdict = Some(true);
    Ok(Outcome {
        text: format!(
            "P({outcome}) = {:.12}; conditional on {}\n",
            c.probability,
            names.join(", ")
        ),
        report,
        code: EXIT_OK,
    })
}

pub fn cmd_markov_order(
    process: &Path,
    partition: &str,
    instrument: &str,
    tolerance: f64,
) -> CliResult<Outcome> {
    let mut report = Report::new("markov-order")
        .param("partition", partition)
        .param("instrument", instrument)
        .tol("factorization", tolerance)
        .tol("probability_floor", tol::PROB_FLOOR);
    let p = read_process(process, &mut report)?;
    let part = parse_partition(partition)?;
    let memory: Vec<usize> = part.memory().collect();
    let seq = memory_instrument(instrument, &p, &memory, &mut report)?;
    let v = has_markov_order_with(&p, &part, &seq, instrument, tolerance)?;
    let mut text = format!(
        "Markov order across {} with `{instrument}`: {}\n",
        v.partition,
        if v.holds { "holds" } else { "FAILS" }
    );
    for o in &v.outcomes {
        match o.distance {
            Some(d) => text += &format!("  {:>12}  p = {:.6}  distance {d:.3e}\n", o.label, o.probability),
            None => text += &format!("  {:>12}  p = {:.3e}  skipped\n", o.label, o.probability),
        }
    }
    report.verdict = Some(v.holds);
    report.result = serde_json::to_value(&v).expect("verdict serializes");
    Ok(Outcome {
        report,
        text,
        code: if v.holds { EXIT_OK } else { EXIT_FALSE },
    })
}

pub fn cmd_cmi(input: &Path, partition: &str, base: LogBase) -> CliResult<Outcome> {
    let mut report = Report::new("cmi")
        .param("partition", partition)
        .param("log_base", base.label())
        .tol("eigenvalue_floor", tol::EIG_FLOOR);
    let part = parse_partition(partition)?;
    let (kind, value) = match read_input(input, &mut report)? {
        Document::Operator(f) => {
            let p = ProcessTensor::new(f.to_operator()?)?;
            ("quantum", quantum_cmi(&p, &part, base)?)
        }
        Document::Distribution(f) => ("classical", classical_cmi(&f.to_distribution()?, &part, base)?),
        other => {
            return Err(InputError(format!(
                "expected an operator or distribution, found `{}`",
                other.kind()
            )))
        }
    };
    report.result = json!({"kind": kind, "cmi": value, "log_base": base.label()});
    report.verdict = Some(true);
    Ok(Outcome {
        text: format!("I(F:H|M) = {value:.12} ({}, log base {})\n", kind, base.label()),
        report,
        code: EXIT_OK,
    })
}

/// Parses `"a,b;c,d"` into a row-major matrix (rows are basis outcomes).
pub fn parse_coefficients(text: &str) -> CliResult<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(|r| {
            r.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| InputError(format!("bad coefficient `{x}`")))
                })
                .collect()
        })
        .collect::<CliResult<_>>()?;
    let cols = rows.first().map_or(0, Vec::len);
    if cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(InputError("coefficient rows must have equal, non-zero length".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]))
}

pub fn cmd_witness(
    process: &Path,
    partition: &str,
    instrument: &str,
    coefficients: Option<&str>,
) -> CliResult<Outcome> {
    let mut report = Report::new("witness")
        .param("partition", partition)
        .param("instrument", instrument)
        .param("coefficients", coefficients)
        .tol("factorization", tol::FACTOR);
    let p = read_process(process, &mut report)?;
    let part = parse_partition(partition)?;
    let memory: Vec<usize> = part.memory().collect();
    let basis = memory_instrument(instrument, &p, &memory, &mut report)?;
    let coeffs = match coefficients {
        Some(c) => parse_coefficients(c)?,
        None => default_witness_coefficients(basis.len()),
    };
    let w = mixing_witness(&p, &part, &basis, &coeffs)?;
    let text = format!(
        "basis instrument: {} (max distance {:.3e})\nmixed instrument: {} (max distance {:.3e})\nwitness {}\n",
        if w.basis.holds { "finite Markov order" } else { "no finite Markov order" },
        w.basis.max_distance(),
        if w.mixed.holds { "finite Markov order" } else { "no finite Markov order" },
        w.mixed.max_distance(),
        if w.demonstrated { "demonstrated" } else { "not demonstrated" },
    );
    report.verdict = Some(w.demonstrated);
    report.result = serde_json::to_value(&w).expect("witness serializes");
    Ok(Outcome {
        report,
        text,
        code: if w.demonstrated { EXIT_OK } else { EXIT_FALSE },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partitions_parse() {
        let p = parse_partition("0|1,2|3").unwrap();
        assert_eq!(p.to_string(), "0|1,2|3");
        assert!(parse_partition("0|1").is_err());
        assert!(parse_partition("0|x|2").is_err());
    }

    #[test]
    fn coefficients_parse() {
        let m = parse_coefficients("1,0;0.5,0.5").unwrap();
        assert_eq!((m.nrows(), m.ncols()), (2, 2));
        assert_eq!(m[(1, 0)], 0.5);
        assert!(parse_coefficients("1,0;1").is_err());
        assert!(parse_coefficients("a").is_err());
    }

    #[test]
    fn log_bases() {
        assert_eq!(parse_log_base("2").unwrap(), LogBase::Two);
        assert_eq!(parse_log_base("e").unwrap(), LogBase::E);
        assert!(parse_log_base("10").is_err());
    }
}
