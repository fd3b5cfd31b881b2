//! Brute-force finite-model oracle: evaluation over finite structures,
//! semantical valuations with access sets, the epsilon combinator,
//! compatibility with a choice condition and variable-condition, and
//! validity by exhaustive enumeration. Everything here is deliberately
//! small-scale and deterministic; it exists to check the calculus, not to
//! prove anything fast.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::choice::ChoiceCondition;
use crate::syntax::{free_symbols_sequent, Class, Formula, Sequent, Symbol, Term};
use crate::varcond::VarCond;

#[derive(Debug, Error)]
pub enum SemanticsError {
    #[error("symbol `{0}` has no value in the valuation")]
    Unvalued(Symbol),
    #[error("no interpretation for predicate `{0}`")]
    UnknownPred(String),
    #[error("no interpretation for function `{0}`")]
    UnknownFun(String),
    #[error("function `{0}` has no value for {1:?}")]
    PartialFun(String, Vec<u32>),
    #[error("term `{0}` is outside the first-order oracle fragment")]
    HigherOrder(Term),
    #[error("choice-condition entry for {0} has a lambda prefix; the oracle handles only prefix-free entries")]
    LambdaEntry(Symbol),
    #[error("semantical valuation table for {0} is not total over its access set")]
    IncompleteTable(Symbol),
    #[error("oracle scale exceeded: {0}")]
    Scale(String),
    #[error("structure is ill-formed: {0}")]
    BadStructure(String),
}

/// A finite two-valued structure. Elements are plain ids; predicate
/// interpretations are tuple sets, function interpretations total tuple
/// maps. `eps_default` is the designated element an empty choice falls
/// back to.
#[derive(Clone, Debug, Eq, PartialEq)]
pub struct FiniteStructure {
    pub universe: Vec<u32>,
    pub preds: BTreeMap<String, BTreeSet<Vec<u32>>>,
    pub funs: BTreeMap<String, BTreeMap<Vec<u32>, u32>>,
    pub eps_default: u32,
}

impl FiniteStructure {
    /// The universe, sorted and deduplicated. Evaluation iterates this, so
    /// "least satisfying element" is well-defined whatever the input order.
    pub fn elements(&self) -> Vec<u32> {
        let set: BTreeSet<u32> = self.universe.iter().copied().collect();
        set.into_iter().collect()
    }

    pub fn validate(&self) -> Result<(), SemanticsError> {
        if self.universe.is_empty() {
            return Err(SemanticsError::BadStructure("empty universe".to_string()));
        }
        let elems: BTreeSet<u32> = self.universe.iter().copied().collect();
        if !elems.contains(&self.eps_default) {
            return Err(SemanticsError::BadStructure(format!(
                "eps_default {} is outside the universe",
                self.eps_default
            )));
        }
        for (name, rel) in &self.preds {
            let mut arity = None;
            for tuple in rel {
                if *arity.get_or_insert(tuple.len()) != tuple.len() {
                    return Err(SemanticsError::BadStructure(format!(
                        "mixed tuple arity in predicate `{name}`"
                    )));
                }
                if tuple.iter().any(|e| !elems.contains(e)) {
                    return Err(SemanticsError::BadStructure(format!(
                        "predicate `{name}` mentions elements outside the universe"
                    )));
                }
            }
        }
        for (name, table) in &self.funs {
            let arity = match table.keys().next() {
                Some(k) => k.len(),
                None => {
                    return Err(SemanticsError::BadStructure(format!(
                        "function `{name}` has an empty table"
                    )))
                }
            };
            for (tuple, out) in table {
                if tuple.len() != arity {
                    return Err(SemanticsError::BadStructure(format!(
                        "mixed tuple arity in function `{name}`"
                    )));
                }
                if tuple.iter().any(|e| !elems.contains(e)) || !elems.contains(out) {
                    return Err(SemanticsError::BadStructure(format!(
                        "function `{name}` mentions elements outside the universe"
                    )));
                }
            }
            let expect = (elems.len() as u64).pow(arity as u32);
            if table.len() as u64 != expect {
                return Err(SemanticsError::BadStructure(format!(
                    "function `{name}` is not total: {} of {expect} tuples",
                    table.len()
                )));
            }
        }
        Ok(())
    }
}

/// A total valuation of individual symbols (free atoms, free variables,
/// and, during evaluation, bound atoms).
#[derive(Clone, Debug, Default, Eq, Ord, PartialEq, PartialOrd)]
pub struct Valuation(pub BTreeMap<Symbol, u32>);

impl Valuation {
    pub fn new() -> Valuation {
        Valuation(BTreeMap::new())
    }

    pub fn get(&self, s: &Symbol) -> Option<u32> {
        self.0.get(s).copied()
    }

    pub fn set(&mut self, s: Symbol, v: u32) {
        self.0.insert(s, v);
    }

    pub fn with(&self, s: Symbol, v: u32) -> Valuation {
        let mut out = self.clone();
        out.set(s, v);
        out
    }

    pub fn restrict(&self, keys: &BTreeSet<Symbol>) -> Valuation {
        Valuation(
            self.0
                .iter()
                .filter(|(k, _)| keys.contains(k))
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        )
    }

    /// Union; entries of `other` win on overlap.
    pub fn merged(&self, other: &Valuation) -> Valuation {
        let mut out = self.clone();
        for (k, v) in &other.0 {
            out.set(k.clone(), *v);
        }
        out
    }
}

/// A semantical valuation: per free variable, the set of free atoms it may
/// read (its access set) and a total table from restricted atom-valuations
/// to elements.
#[derive(Clone, Debug, Eq, PartialEq)]
pub struct SemValuation {
    pub access: BTreeMap<Symbol, BTreeSet<Symbol>>,
    pub table: BTreeMap<Symbol, BTreeMap<Valuation, u32>>,
}

/// Every total valuation of `syms` over the structure's elements, in
/// lexicographic order.
pub fn all_valuations(syms: &BTreeSet<Symbol>, elements: &[u32]) -> Vec<Valuation> {
    let mut out = vec![Valuation::new()];
    for s in syms {
        let mut next = Vec::with_capacity(out.len() * elements.len());
        for v in &out {
            for &e in elements {
                next.push(v.with(s.clone(), e));
            }
        }
        out = next;
    }
    out
}

pub fn eval_term(
    t: &Term,
    st: &FiniteStructure,
    d: &Valuation,
) -> Result<u32, SemanticsError> {
    match t {
        Term::Sym(s) => match s.class {
            Class::Constant => {
                let table = st
                    .funs
                    .get(&s.name)
                    .ok_or_else(|| SemanticsError::UnknownFun(s.name.clone()))?;
                table
                    .get(&Vec::new())
                    .copied()
                    .ok_or_else(|| SemanticsError::PartialFun(s.name.clone(), Vec::new()))
            }
            _ => d.get(s).ok_or_else(|| SemanticsError::Unvalued(s.clone())),
        },
        Term::App(h, args) => {
            if h.class != Class::Constant {
                return Err(SemanticsError::HigherOrder(t.clone()));
            }
            let mut tuple = Vec::with_capacity(args.len());
            for a in args {
                tuple.push(eval_term(a, st, d)?);
            }
            let table = st
                .funs
                .get(&h.name)
                .ok_or_else(|| SemanticsError::UnknownFun(h.name.clone()))?;
            table
                .get(&tuple)
                .copied()
                .ok_or_else(|| SemanticsError::PartialFun(h.name.clone(), tuple))
        }
        Term::Eps(x, body) => {
            // Deterministic choice: the least element satisfying the body,
            // falling back to the structure's designated default.
            for e in st.elements() {
                if eval_formula(body, st, &d.with(x.clone(), e))? {
                    return Ok(e);
                }
            }
            Ok(st.eps_default)
        }
    }
}

pub fn eval_formula(
    f: &Formula,
    st: &FiniteStructure,
    d: &Valuation,
) -> Result<bool, SemanticsError> {
    match f {
        Formula::Pred(p, args) => {
            let rel = st
                .preds
                .get(&p.name)
                .ok_or_else(|| SemanticsError::UnknownPred(p.name.clone()))?;
            let mut tuple = Vec::with_capacity(args.len());
            for a in args {
                tuple.push(eval_term(a, st, d)?);
            }
            Ok(rel.contains(&tuple))
        }
        Formula::Eq(a, b) => Ok(eval_term(a, st, d)? == eval_term(b, st, d)?),
        Formula::Not(a) => Ok(!eval_formula(a, st, d)?),
        Formula::And(a, b) => Ok(eval_formula(a, st, d)? && eval_formula(b, st, d)?),
        Formula::Or(a, b) => Ok(eval_formula(a, st, d)? || eval_formula(b, st, d)?),
        Formula::Implies(a, b) => Ok(!eval_formula(a, st, d)? || eval_formula(b, st, d)?),
        Formula::Forall(x, a) => {
            for e in st.elements() {
                if !eval_formula(a, st, &d.with(x.clone(), e))? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Formula::Exists(x, a) => {
            for e in st.elements() {
                if eval_formula(a, st, &d.with(x.clone(), e))? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
    }
}

/// A sequent is true when at least one of its formulas is.
pub fn eval_sequent(
    g: &Sequent,
    st: &FiniteStructure,
    d: &Valuation,
) -> Result<bool, SemanticsError> {
    for f in &g.formulas {
        if eval_formula(f, st, d)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Applies the epsilon combinator: the value of each variable is its table
/// read at the restriction of `t` to the variable's access set.
pub fn epsilon_combine(
    p: &SemValuation,
    t: &Valuation,
) -> Result<Valuation, SemanticsError> {
    let mut out = Valuation::new();
    for (x, table) in &p.table {
        let empty = BTreeSet::new();
        let acc = p.access.get(x).unwrap_or(&empty);
        let restricted = t.restrict(acc);
        let v = table
            .get(&restricted)
            .copied()
            .ok_or_else(|| SemanticsError::IncompleteTable(x.clone()))?;
        out.set(x.clone(), v);
    }
    Ok(out)
}

fn access_edges(p: &SemValuation) -> Vec<(Symbol, Symbol)> {
    let mut out = Vec::new();
    for (x, acc) in &p.access {
        for a in acc {
            out.push((a.clone(), x.clone()));
        }
    }
    out
}

/// Compatibility of a semantical valuation with a choice condition and
/// variable-condition: the access relation joined into P keeps the graph
/// consistent, and every entry's body, whenever satisfiable at all under a
/// total valuation, is satisfied by the value the valuation gives the
/// entry's variable.
pub fn is_compatible(
    p: &SemValuation,
    cc: &ChoiceCondition,
    vc: &VarCond,
    st: &FiniteStructure,
) -> Result<bool, SemanticsError> {
    st.validate()?;
    let mut vc2 = vc.clone();
    for (a, x) in access_edges(p) {
        vc2.add_p(a, x)
            .map_err(|e| SemanticsError::BadStructure(e.to_string()))?;
    }
    if !vc2.is_consistent() {
        return Ok(false);
    }
    let mut atoms: BTreeSet<Symbol> = p.access.values().flatten().cloned().collect();
    for (y, entry) in cc.entries.iter() {
        if !entry.prefix.is_empty() {
            return Err(SemanticsError::LambdaEntry(y.clone()));
        }
        atoms.extend(crate::syntax::free_symbols(&entry.body, &[Class::FreeAtom]));
    }
    let elements = st.elements();
    for tau in all_valuations(&atoms, &elements) {
        let delta = epsilon_combine(p, &tau)?.merged(&tau);
        for (y, entry) in cc.entries.iter() {
            let yval = delta.get(y).ok_or_else(|| SemanticsError::Unvalued(y.clone()))?;
            let mut satisfiable = false;
            for &e in &elements {
                if eval_formula(&entry.body, st, &delta.with(entry.bound.clone(), e))? {
                    satisfiable = true;
                    break;
                }
            }
            if satisfiable
                && !eval_formula(&entry.body, st, &delta.with(entry.bound.clone(), yval))?
            {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

const ENUMERATION_CAP: u128 = 5_000_000;

fn check_scale(
    elements: &[u32],
    vars: &BTreeSet<Symbol>,
    atoms: &BTreeSet<Symbol>,
) -> Result<(), SemanticsError> {
    if elements.len() > 3 {
        return Err(SemanticsError::Scale(format!(
            "universe of {} elements (max 3)",
            elements.len()
        )));
    }
    if vars.len() > 3 {
        return Err(SemanticsError::Scale(format!(
            "{} free variables in scope (max 3)",
            vars.len()
        )));
    }
    if atoms.len() > 3 {
        return Err(SemanticsError::Scale(format!(
            "{} free atoms in scope (max 3)",
            atoms.len()
        )));
    }
    Ok(())
}

/// Materializes every semantical valuation over `vars` whose access sets
/// use only atoms that individually keep (P + access edge, N) consistent,
/// with every total table over each access set. The result is pruned by
/// the variable-condition but not yet filtered by [`is_compatible`]; pair
/// the two for the full compatibility semantics.
pub fn enumerate_compatible(
    cc: &ChoiceCondition,
    vc: &VarCond,
    st: &FiniteStructure,
    vars: &BTreeSet<Symbol>,
    atoms: &BTreeSet<Symbol>,
) -> Result<Vec<SemValuation>, SemanticsError> {
    st.validate()?;
    let elements = st.elements();
    check_scale(&elements, vars, atoms)?;
    for (y, entry) in cc.entries.iter() {
        if !entry.prefix.is_empty() {
            return Err(SemanticsError::LambdaEntry(y.clone()));
        }
    }
    // Per variable: atoms whose single access edge keeps the graph
    // consistent. Subsets of these are the candidate access sets.
    let mut candidates: BTreeMap<Symbol, Vec<Symbol>> = BTreeMap::new();
    for x in vars {
        let mut ok = Vec::new();
        for a in atoms {
            let mut vc2 = vc.clone();
            vc2.add_p(a.clone(), x.clone())
                .map_err(|e| SemanticsError::BadStructure(e.to_string()))?;
            if vc2.is_consistent() {
                ok.push(a.clone());
            }
        }
        candidates.insert(x.clone(), ok);
    }
    // Cost estimate before materializing anything.
    let u = elements.len() as u128;
    let mut total: u128 = 1;
    for x in vars {
        let k = candidates[x].len() as u32;
        let mut per_var: u128 = 0;
        for mask in 0u32..(1 << k) {
            let size = mask.count_ones();
            let keys = u.checked_pow(size).ok_or_else(scale_overflow)?;
            if keys > 32 {
                return Err(scale_overflow());
            }
            let tables = u.checked_pow(keys as u32).ok_or_else(scale_overflow)?;
            per_var = per_var.checked_add(tables).ok_or_else(scale_overflow)?;
        }
        total = total.checked_mul(per_var).ok_or_else(scale_overflow)?;
        if total > ENUMERATION_CAP {
            return Err(scale_overflow());
        }
    }
    // Per variable, every (access set, total table) combination.
    let mut per_var: BTreeMap<Symbol, Vec<(BTreeSet<Symbol>, BTreeMap<Valuation, u32>)>> =
        BTreeMap::new();
    for x in vars {
        let cand = &candidates[x];
        let mut combos = Vec::new();
        for mask in 0u32..(1 << cand.len()) {
            let access: BTreeSet<Symbol> = cand
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, a)| a.clone())
                .collect();
            let keys = all_valuations(&access, &elements);
            let table_count = (elements.len() as u64).pow(keys.len() as u32);
            for t in 0..table_count {
                let mut table = BTreeMap::new();
                let mut rest = t;
                for key in &keys {
                    let idx = (rest % elements.len() as u64) as usize;
                    rest /= elements.len() as u64;
                    table.insert(key.clone(), elements[idx]);
                }
                combos.push((access.clone(), table));
            }
        }
        per_var.insert(x.clone(), combos);
    }
    // Cartesian product across variables.
    let mut out = vec![SemValuation { access: BTreeMap::new(), table: BTreeMap::new() }];
    for x in vars {
        let combos = &per_var[x];
        let mut next = Vec::with_capacity(out.len() * combos.len());
        for base in &out {
            for (access, table) in combos {
                let mut p = base.clone();
                p.access.insert(x.clone(), access.clone());
                p.table.insert(x.clone(), table.clone());
                next.push(p);
            }
        }
        out = next;
    }
    Ok(out)
}

fn scale_overflow() -> SemanticsError {
    SemanticsError::Scale("semantical valuation enumeration too large".to_string())
}

/// True when every goal is true under this valuation for every total atom
/// valuation over `atoms`.
pub fn goals_true(
    goals: &[Sequent],
    p: &SemValuation,
    st: &FiniteStructure,
    atoms: &BTreeSet<Symbol>,
) -> Result<bool, SemanticsError> {
    let elements = st.elements();
    for tau in all_valuations(atoms, &elements) {
        let delta = epsilon_combine(p, &tau)?.merged(&tau);
        for g in goals {
            if !eval_sequent(g, st, &delta)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Validity in the sense of the framework, brute-forced: some enumerated
/// compatible semantical valuation makes every goal true under every total
/// atom valuation.
pub fn is_valid(
    goals: &[Sequent],
    cc: &ChoiceCondition,
    vc: &VarCond,
    st: &FiniteStructure,
) -> Result<bool, SemanticsError> {
    st.validate()?;
    let mut vars: BTreeSet<Symbol> = BTreeSet::new();
    let mut atoms: BTreeSet<Symbol> = BTreeSet::new();
    for g in goals {
        vars.extend(free_symbols_sequent(g, &[Class::FreeVar]));
        atoms.extend(free_symbols_sequent(g, &[Class::FreeAtom]));
    }
    for (y, entry) in cc.entries.iter() {
        if !entry.prefix.is_empty() {
            return Err(SemanticsError::LambdaEntry(y.clone()));
        }
        vars.insert(y.clone());
        vars.extend(crate::syntax::free_symbols(&entry.body, &[Class::FreeVar]));
        atoms.extend(crate::syntax::free_symbols(&entry.body, &[Class::FreeAtom]));
    }
    let elements = st.elements();
    check_scale(&elements, &vars, &atoms)?;
    for p in enumerate_compatible(cc, vc, st, &vars, &atoms)? {
        if !is_compatible(&p, cc, vc, st)? {
            continue;
        }
        if goals_true(goals, &p, st, &atoms)? {
            return Ok(true);
        }
    }
    Ok(false)
}
