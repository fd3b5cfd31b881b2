//! Command-line front end for the epsilog kernel: proof-script replay,
//! epsilon elimination and reconstruction, quantifier elimination with size
//! statistics, the finite-model validity oracle, and variable-condition
//! consistency checks.
//!
//! Reports are JSON on stdout; human diagnostics go to stderr. Exit codes:
//! 0 success, 1 honest failure (open goals, refuted validity, inconsistent
//! graph), 2 input or usage error.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use epsilog::{
    eliminate, eliminate_fresh, is_valid, parse_formula, parse_term, qelim, reconstruct,
    run_script, CcEntry, ChoiceCondition, Class, FiniteStructure, Formula, ProofState, QelimMode,
    ScriptStep, Sequent, Signature, Sort, Symbol, VarCond,
};

#[derive(Parser)]
#[command(name = "epsilog", version, about = "Proof kernel tools for epsilon logic")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Replay a proof script; exit 0 iff every goal is closed.
    Check(CheckArgs),
    /// Replace epsilon terms by choice-conditioned variables.
    Eliminate(EliminateArgs),
    /// Rewrite choice-condition variables back to epsilon terms.
    Reconstruct(ReconstructArgs),
    /// Eliminate quantifiers inside-out and report epsilon-term sizes.
    Qelim(QelimArgs),
    /// Brute-force validity in every listed finite structure.
    Validity(ValidityArgs),
    /// Check a variable-condition graph for consistency.
    VcCheck(VcCheckArgs),
}

#[derive(Args)]
struct FormulaInput {
    /// Signature file: `const N : i^k -> i` and `pred N : i^k` lines.
    #[arg(long, value_name = "FILE")]
    signature: Option<PathBuf>,
    /// A formula given directly on the command line.
    #[arg(long, value_name = "TEXT", conflicts_with = "file")]
    formula: Option<String>,
    /// A file with one formula per line; `#` starts a comment.
    #[arg(long, value_name = "FILE")]
    file: Option<PathBuf>,
}

impl FormulaInput {
    fn signature(&self) -> Result<Signature> {
        load_signature(&self.signature)
    }

    fn texts(&self) -> Result<Vec<String>> {
        let mut texts = Vec::new();
        if let Some(t) = &self.formula {
            texts.push(t.clone());
        }
        if let Some(p) = &self.file {
            for line in read(p)?.lines() {
                let line = line.split('#').next().unwrap_or("").trim();
                if !line.is_empty() {
                    texts.push(line.to_string());
                }
            }
        }
        Ok(texts)
    }

    fn formulas(&self, sig: &Signature) -> Result<Vec<Formula>> {
        let texts = self.texts()?;
        if texts.is_empty() {
            bail!("no input formulas: pass --formula or --file");
        }
        texts
            .iter()
            .map(|t| parse_formula(t, sig).map_err(|e| anyhow!("parsing {t:?}: {e}")))
            .collect()
    }
}

#[derive(Args)]
struct CheckArgs {
    /// Proof file: optional `problem <formula>` lines, then one step per line.
    #[arg(value_name = "PROOF", required_unless_present = "script")]
    proof: Option<PathBuf>,
    /// Alternative way to pass the proof file.
    #[arg(long, value_name = "FILE", conflicts_with = "proof")]
    script: Option<PathBuf>,
    #[command(flatten)]
    input: FormulaInput,
    /// Include the final variable-condition as Graphviz dot in the report.
    #[arg(long)]
    emit_dot: bool,
}

#[derive(Args)]
struct EliminateArgs {
    #[command(flatten)]
    input: FormulaInput,
    /// Give every epsilon occurrence its own variable instead of sharing
    /// alpha-equal ones.
    #[arg(long)]
    fresh: bool,
}

#[derive(Args)]
struct ReconstructArgs {
    #[command(flatten)]
    input: FormulaInput,
    /// Choice-condition file, one `?y := \v. eps x. <formula>` per line.
    #[arg(long, value_name = "FILE")]
    cc: PathBuf,
}

#[derive(Args)]
struct QelimArgs {
    #[command(flatten)]
    input: FormulaInput,
}

#[derive(Args)]
struct ValidityArgs {
    #[command(flatten)]
    input: FormulaInput,
    /// JSON file holding one structure object or an array of them.
    #[arg(long, value_name = "FILE")]
    structures: PathBuf,
    /// Variable-condition file with `p <sym> <sym>` and `n <sym> <sym>` lines.
    #[arg(long, value_name = "FILE")]
    vc: Option<PathBuf>,
    /// Choice-condition file, one `?y := eps x. <formula>` per line.
    #[arg(long, value_name = "FILE")]
    cc: Option<PathBuf>,
    /// Refuse structures with more elements than this.
    #[arg(long, value_name = "N", default_value_t = 3)]
    max_universe: usize,
}

#[derive(Args)]
struct VcCheckArgs {
    /// Edge file with `p <sym> <sym>` and `n <sym> <sym>` lines.
    #[arg(value_name = "FILE")]
    path: PathBuf,
    /// Include the graph as Graphviz dot in the report.
    #[arg(long)]
    emit_dot: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Check(a) => cmd_check(a),
        Cmd::Eliminate(a) => cmd_eliminate(a),
        Cmd::Reconstruct(a) => cmd_reconstruct(a),
        Cmd::Qelim(a) => cmd_qelim(a),
        Cmd::Validity(a) => cmd_validity(a),
        Cmd::VcCheck(a) => cmd_vc_check(a),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_signature(path: &Option<PathBuf>) -> Result<Signature> {
    match path {
        Some(p) => Signature::parse(&read(p)?).map_err(|e| anyhow!("{}: {e}", p.display())),
        None => Ok(Signature::new()),
    }
}

fn emit(report: &Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(report)?);
    Ok(())
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

fn cmd_check(a: CheckArgs) -> Result<ExitCode> {
    let path = a.proof.or(a.script).expect("clap guarantees one");
    let text = read(&path)?;

    // `problem` lines carry the formulas to prove; the rest is the script.
    // Blanked-out problem lines keep script line numbers aligned with the
    // file for error reporting.
    let mut problem_texts = a.input.texts()?;
    let mut script_text = String::new();
    for raw in text.lines() {
        let stripped = raw.split('#').next().unwrap_or("").trim();
        if let Some(rest) = stripped.strip_prefix("problem ") {
            problem_texts.push(rest.trim().to_string());
            script_text.push('\n');
        } else {
            script_text.push_str(raw);
            script_text.push('\n');
        }
    }
    if problem_texts.is_empty() {
        bail!("no problem formulas: add `problem <formula>` lines or pass --formula/--file");
    }

    let base_sig = a.input.signature()?;
    let (steps, sig) = epsilog::parse_script(&script_text, &base_sig)
        .map_err(|e| anyhow!("{}: {e}", path.display()))?;
    let problem: Vec<Formula> = problem_texts
        .iter()
        .map(|t| parse_formula(t, &sig).map_err(|e| anyhow!("problem formula {t:?}: {e}")))
        .collect::<Result<_>>()?;

    let report = run_script(problem, &steps, sig)?;
    let st = &report.state;
    let goals: Vec<Value> = st
        .goals
        .iter()
        .map(|(id, seq)| {
            json!({
                "id": id,
                "formulas": seq.formulas.iter().map(|f| f.to_string()).collect::<Vec<_>>(),
            })
        })
        .collect();
    let mut obj = json!({
        "command": "check",
        "success": report.success,
        "steps_applied": report.steps_applied,
        "open_goals": goals,
        "vc": vc_json(&st.vc),
        "cc": cc_json(&st.cc),
        "trace": st.trace.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
    });
    if let Some((i, cause)) = &report.failure {
        obj["failure"] = json!({
            "step": i,
            "text": describe_step(&steps[*i]),
            "cause": cause,
        });
    }
    if a.emit_dot {
        obj["dot"] = json!(st.vc.to_dot());
    }
    emit(&obj)?;

    if report.success {
        return Ok(ExitCode::SUCCESS);
    }
    if let Some((i, cause)) = &report.failure {
        eprintln!("step {i} `{}` failed: {cause}", describe_step(&steps[*i]));
        if cause.contains("(P,N)-substitution") {
            for (x, atom) in &st.vc.n {
                eprintln!("  N edge ({x}, {atom})");
            }
            for (x, y) in &st.vc.p {
                eprintln!("  P edge ({x}, {y})");
            }
        }
    } else {
        eprintln!("{} goal(s) remain open", st.goals.len());
    }
    Ok(ExitCode::from(1))
}

fn describe_step(s: &ScriptStep) -> String {
    match s {
        ScriptStep::Gamma { goal, idx, term } => format!("gamma {goal} {idx} {term}"),
        ScriptStep::DeltaMinus { goal, idx } => format!("delta- {goal} {idx}"),
        ScriptStep::DeltaPlus { goal, idx } => format!("delta+ {goal} {idx}"),
        ScriptStep::Alpha { goal, idx } => format!("alpha {goal} {idx}"),
        ScriptStep::Beta { goal, idx } => format!("beta {goal} {idx}"),
        ScriptStep::Subst { pairs } => {
            let body: Vec<String> = pairs.iter().map(|(n, t)| format!("?{n} := {t}")).collect();
            format!("subst {}", body.join(", "))
        }
        ScriptStep::Asubst { goal, pairs } => {
            let body: Vec<String> = pairs.iter().map(|(n, t)| format!("!{n} := {t}")).collect();
            format!("asubst {goal} {}", body.join(", "))
        }
        ScriptStep::Close { goal } => format!("close {goal}"),
    }
}

// ---------------------------------------------------------------------------
// eliminate / reconstruct / qelim
// ---------------------------------------------------------------------------

fn cmd_eliminate(a: EliminateArgs) -> Result<ExitCode> {
    let sig = a.input.signature()?;
    let formulas = a.input.formulas(&sig)?;
    let mut st = ProofState::new(sig);
    let mut outs = Vec::new();
    for f in &formulas {
        let (g, next) = if a.fresh { eliminate_fresh(f, st) } else { eliminate(f, st) };
        st = next;
        outs.push(g.to_string());
    }
    let obj = json!({
        "command": "eliminate",
        "formulas": outs,
        "cc": cc_json(&st.cc),
        "cc_dump": st.cc.dump(),
        "vc": vc_json(&st.vc),
    });
    emit(&obj)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_reconstruct(a: ReconstructArgs) -> Result<ExitCode> {
    let sig = a.input.signature()?;
    let formulas = a.input.formulas(&sig)?;
    let cc = parse_cc_file(&read(&a.cc)?, &sig)?;
    let mut outs = Vec::new();
    for f in &formulas {
        let g = reconstruct(f, &cc).map_err(|e| anyhow!("reconstructing {f}: {e}"))?;
        outs.push(g.to_string());
    }
    emit(&json!({ "command": "reconstruct", "formulas": outs }))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_qelim(a: QelimArgs) -> Result<ExitCode> {
    let sig = a.input.signature()?;
    let formulas = a.input.formulas(&sig)?;
    if formulas.len() != 1 {
        bail!("qelim takes exactly one formula, found {}", formulas.len());
    }
    let (out, stats) = qelim(&formulas[0], QelimMode::InsideOut)?;
    let subterms: Vec<Value> = stats
        .subterms
        .iter()
        .map(|s| json!({ "name": s.name, "depth": s.depth, "binders": s.binders }))
        .collect();
    let obj = json!({
        "command": "qelim",
        "result": out.to_string(),
        "depth": stats.whole_depth,
        "binders": stats.whole_binders,
        "subterms": subterms,
    });
    emit(&obj)?;
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// validity
// ---------------------------------------------------------------------------

fn cmd_validity(a: ValidityArgs) -> Result<ExitCode> {
    let sig = a.input.signature()?;
    let goals: Vec<Sequent> = a
        .input
        .formulas(&sig)?
        .into_iter()
        .map(Sequent::single)
        .collect();
    let vc = match &a.vc {
        Some(p) => parse_vc_file(&read(p)?)?,
        None => VarCond::empty(),
    };
    let cc = match &a.cc {
        Some(p) => parse_cc_file(&read(p)?, &sig)?,
        None => ChoiceCondition::empty(),
    };
    let structures = parse_structures(&read(&a.structures)?)?;
    if structures.is_empty() {
        bail!("{}: no structures", a.structures.display());
    }

    let mut results = Vec::new();
    let mut failures = 0usize;
    for (i, st) in structures.iter().enumerate() {
        if st.elements().len() > a.max_universe {
            bail!(
                "structure {i} has {} elements, over --max-universe {}",
                st.elements().len(),
                a.max_universe
            );
        }
        let valid = is_valid(&goals, &cc, &vc, st).map_err(|e| anyhow!("structure {i}: {e}"))?;
        if !valid {
            failures += 1;
        }
        results.push(json!({ "structure": i, "valid": valid }));
    }
    let all = failures == 0;
    emit(&json!({
        "command": "validity",
        "valid": all,
        "structures": results,
    }))?;
    if all {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("not valid in {failures} of {} structures", structures.len());
        Ok(ExitCode::from(1))
    }
}

fn parse_structures(text: &str) -> Result<Vec<FiniteStructure>> {
    let v: Value = serde_json::from_str(text).context("structures file is not JSON")?;
    let list = match v {
        Value::Array(items) => items,
        obj @ Value::Object(_) => vec![obj],
        _ => bail!("structures file must hold an object or an array of objects"),
    };
    list.into_iter().enumerate().map(|(i, v)| {
        structure_from_json(&v).map_err(|e| anyhow!("structure {i}: {e}"))
    }).collect()
}

fn as_elem(v: &Value, what: &str) -> Result<u32> {
    v.as_u64()
        .and_then(|n| u32::try_from(n).ok())
        .ok_or_else(|| anyhow!("{what} must be a small nonnegative integer, found {v}"))
}

fn structure_from_json(v: &Value) -> Result<FiniteStructure> {
    let obj = v.as_object().ok_or_else(|| anyhow!("expected an object"))?;
    let universe: Vec<u32> = obj
        .get("universe")
        .and_then(Value::as_array)
        .ok_or_else(|| anyhow!("missing `universe` array"))?
        .iter()
        .map(|e| as_elem(e, "universe element"))
        .collect::<Result<_>>()?;
    let mut preds = std::collections::BTreeMap::new();
    if let Some(ps) = obj.get("preds") {
        let map = ps.as_object().ok_or_else(|| anyhow!("`preds` must be an object"))?;
        for (name, rel) in map {
            let rows = rel
                .as_array()
                .ok_or_else(|| anyhow!("predicate `{name}` must be an array of tuples"))?;
            let mut set = std::collections::BTreeSet::new();
            for row in rows {
                let tuple = row
                    .as_array()
                    .ok_or_else(|| anyhow!("predicate `{name}` rows must be arrays"))?
                    .iter()
                    .map(|e| as_elem(e, "tuple element"))
                    .collect::<Result<Vec<u32>>>()?;
                set.insert(tuple);
            }
            preds.insert(name.clone(), set);
        }
    }
    let mut funs = std::collections::BTreeMap::new();
    if let Some(fs) = obj.get("funs") {
        let map = fs.as_object().ok_or_else(|| anyhow!("`funs` must be an object"))?;
        for (name, table) in map {
            let rows = table
                .as_object()
                .ok_or_else(|| anyhow!("function `{name}` must map `a,b` keys to elements"))?;
            let mut out = std::collections::BTreeMap::new();
            for (key, val) in rows {
                let tuple: Vec<u32> = if key.trim().is_empty() {
                    Vec::new()
                } else {
                    key.split(',')
                        .map(|s| {
                            s.trim()
                                .parse::<u32>()
                                .map_err(|_| anyhow!("bad tuple key `{key}` in `{name}`"))
                        })
                        .collect::<Result<_>>()?
                };
                out.insert(tuple, as_elem(val, "function value")?);
            }
            funs.insert(name.clone(), out);
        }
    }
    let eps_default = match obj.get("eps_default") {
        Some(v) => as_elem(v, "eps_default")?,
        None => *universe
            .iter()
            .min()
            .ok_or_else(|| anyhow!("empty universe"))?,
    };
    let st = FiniteStructure { universe, preds, funs, eps_default };
    st.validate().map_err(|e| anyhow!("{e}"))?;
    Ok(st)
}

// ---------------------------------------------------------------------------
// vc-check
// ---------------------------------------------------------------------------

fn cmd_vc_check(a: VcCheckArgs) -> Result<ExitCode> {
    let vc = parse_vc_file(&read(&a.path)?)?;
    let consistent = vc.is_consistent();
    let mut obj = json!({
        "command": "vc-check",
        "consistent": consistent,
        "vc": vc_json(&vc),
    });
    if a.emit_dot {
        obj["dot"] = json!(vc.to_dot());
    }
    emit(&obj)?;
    if consistent {
        return Ok(ExitCode::SUCCESS);
    }
    for (x, atom) in &vc.n {
        if vc.p_reaches(atom, x) {
            eprintln!("inconsistent: N edge ({x}, {atom}) is closed by a P path from {atom} to {x}");
            return Ok(ExitCode::from(1));
        }
    }
    for (u, w) in &vc.p {
        if u == w || vc.p_reaches(w, u) {
            eprintln!("inconsistent: P edge ({u}, {w}) lies on a P cycle");
            return Ok(ExitCode::from(1));
        }
    }
    eprintln!("inconsistent");
    Ok(ExitCode::from(1))
}

fn parse_vc_symbol(word: &str) -> Result<Symbol> {
    if let Some(n) = word.strip_prefix('?') {
        Ok(Symbol::free_var(n))
    } else if let Some(n) = word.strip_prefix('!') {
        Ok(Symbol::free_atom(n))
    } else {
        bail!("edge endpoint `{word}` needs a `?` or `!` sigil")
    }
}

fn parse_vc_file(text: &str) -> Result<VarCond> {
    let mut vc = VarCond::empty();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let at = |e: anyhow::Error| anyhow!("line {}: {e}", i + 1);
        match toks.as_slice() {
            ["p", a, b] => vc
                .add_p(parse_vc_symbol(a).map_err(at)?, parse_vc_symbol(b).map_err(at)?)
                .map_err(|e| anyhow!("line {}: {e}", i + 1))?,
            ["n", a, b] => vc
                .add_n(parse_vc_symbol(a).map_err(at)?, parse_vc_symbol(b).map_err(at)?)
                .map_err(|e| anyhow!("line {}: {e}", i + 1))?,
            _ => bail!("line {}: expected `p <sym> <sym>` or `n <sym> <sym>`", i + 1),
        }
    }
    Ok(vc)
}

// ---------------------------------------------------------------------------
// shared pieces
// ---------------------------------------------------------------------------

fn parse_cc_file(text: &str, sig: &Signature) -> Result<ChoiceCondition> {
    let mut cc = ChoiceCondition::empty();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = |msg: String| anyhow!("line {}: {msg}", i + 1);
        let (lhs, rhs) = line
            .split_once(":=")
            .ok_or_else(|| at("expected `?y := ...`".to_string()))?;
        let name = lhs
            .trim()
            .strip_prefix('?')
            .ok_or_else(|| at(format!("`{}` is not a free variable", lhs.trim())))?;
        let mut rest = rhs.trim();
        let mut prefix = Vec::new();
        while let Some(r) = rest.strip_prefix('\\') {
            let (v, r2) = r
                .split_once('.')
                .ok_or_else(|| at("lambda binder needs a `.`".to_string()))?;
            prefix.push(Symbol::bound_atom(v.trim()));
            rest = r2.trim_start();
        }
        let term = parse_term(rest, sig).map_err(|e| at(e.to_string()))?;
        let (bound, body) = match term {
            epsilog::Term::Eps(x, b) => (x, *b),
            other => return Err(at(format!("expected an epsilon term, found `{other}`"))),
        };
        let var = Symbol::with_sort(Class::FreeVar, name, Sort::fun_chain(prefix.len()));
        cc.insert(var, CcEntry::new(prefix, bound, body));
    }
    Ok(cc)
}

fn vc_json(vc: &VarCond) -> Value {
    let edges = |set: &std::collections::BTreeSet<(Symbol, Symbol)>| -> Vec<Value> {
        set.iter()
            .map(|(a, b)| json!([a.to_string(), b.to_string()]))
            .collect()
    };
    json!({
        "p": edges(&vc.p),
        "n": edges(&vc.n),
        "consistent": vc.is_consistent(),
    })
}

fn cc_json(cc: &ChoiceCondition) -> Value {
    let entries: Vec<Value> = cc
        .entries
        .iter()
        .map(|(y, e)| {
            json!({
                "var": y.to_string(),
                "prefix": e.prefix.iter().map(|v| v.name.clone()).collect::<Vec<_>>(),
                "bound": e.bound.name,
                "body": e.body.to_string(),
            })
        })
        .collect();
    json!(entries)
}
