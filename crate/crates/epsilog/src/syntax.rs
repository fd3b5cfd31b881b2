//! Terms, formulas, sequents, and the four disjoint symbol classes, plus
//! capture-avoiding substitution, alpha-equivalence, parsing, and printing.
//!
//! Concrete syntax sigils: `?name` is a free variable, `!name` a free atom,
//! a bare lowercase identifier a bound atom, and a capitalized or declared
//! identifier a constant.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// The four disjoint symbol classes.
///
/// Free variables are implicitly existential and rigid, free atoms are
/// implicitly universal parameters that no binder may capture, bound atoms
/// are the only binder-bindable symbols, and constants come from the
/// signature.
#[derive(Clone, Copy, Debug, Eq, Hash, Ord, PartialEq, PartialOrd)]
pub enum Class {
    FreeVar,
    FreeAtom,
    BoundAtom,
    Constant,
}

/// Sorts: the single base sort `i`, or function sorts synthesized for
/// applied symbols (epsilon-elimination under binders, applied bound atoms
/// in choice-condition bodies, and function constants).
#[derive(Clone, Debug, Eq, Hash, Ord, PartialEq, PartialOrd)]
pub enum Sort {
    Base(String),
    Fun(Box<Sort>, Box<Sort>),
}

impl Sort {
    pub fn base() -> Sort {
        Sort::Base("i".to_string())
    }

    /// The sort `i^arity -> i`; `fun_chain(0)` is `i` itself.
    pub fn fun_chain(arity: usize) -> Sort {
        let mut s = Sort::base();
        for _ in 0..arity {
            s = Sort::Fun(Box::new(Sort::base()), Box::new(s));
        }
        s
    }

    pub fn arity(&self) -> usize {
        match self {
            Sort::Base(_) => 0,
            Sort::Fun(_, r) => 1 + r.arity(),
        }
    }

    pub fn is_base(&self) -> bool {
        matches!(self, Sort::Base(_))
    }
}

/// A symbol. Identity is the pair (class, name); `sort` is carried metadata
/// and takes no part in equality, ordering, or hashing, so the same symbol
/// seen bare and applied never splits in two.
#[derive(Clone, Debug)]
pub struct Symbol {
    pub class: Class,
    pub name: String,
    pub sort: Sort,
}

impl Symbol {
    pub fn new(class: Class, name: impl Into<String>) -> Symbol {
        Symbol { class, name: name.into(), sort: Sort::base() }
    }

    pub fn with_sort(class: Class, name: impl Into<String>, sort: Sort) -> Symbol {
        Symbol { class, name: name.into(), sort }
    }

    pub fn free_var(name: impl Into<String>) -> Symbol {
        Symbol::new(Class::FreeVar, name)
    }

    pub fn free_atom(name: impl Into<String>) -> Symbol {
        Symbol::new(Class::FreeAtom, name)
    }

    pub fn bound_atom(name: impl Into<String>) -> Symbol {
        Symbol::new(Class::BoundAtom, name)
    }

    pub fn constant(name: impl Into<String>) -> Symbol {
        Symbol::new(Class::Constant, name)
    }

    fn sigil(&self) -> &'static str {
        match self.class {
            Class::FreeVar => "?",
            Class::FreeAtom => "!",
            _ => "",
        }
    }
}

impl PartialEq for Symbol {
    fn eq(&self, other: &Symbol) -> bool {
        self.class == other.class && self.name == other.name
    }
}

impl Eq for Symbol {}

impl PartialOrd for Symbol {
    fn partial_cmp(&self, other: &Symbol) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Symbol {
    fn cmp(&self, other: &Symbol) -> std::cmp::Ordering {
        (self.class, &self.name).cmp(&(other.class, &other.name))
    }
}

impl std::hash::Hash for Symbol {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.class.hash(state);
        self.name.hash(state);
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.sigil(), self.name)
    }
}

/// Terms: a symbol, an applied symbol, or an epsilon term.
///
/// Application heads are constants, function-sorted free variables, or
/// applied bound atoms (the latter only inside choice-condition bodies).
/// The bound symbol of an epsilon term has class `BoundAtom`.
#[derive(Clone, Debug, Eq, Hash, PartialEq)]
pub enum Term {
    Sym(Symbol),
    App(Symbol, Vec<Term>),
    Eps(Symbol, Box<Formula>),
}

/// Formulas over terms. Quantifier-bound symbols have class `BoundAtom`.
#[derive(Clone, Debug, Eq, Hash, PartialEq)]
pub enum Formula {
    Pred(Symbol, Vec<Term>),
    Eq(Term, Term),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Forall(Symbol, Box<Formula>),
    Exists(Symbol, Box<Formula>),
}

impl Formula {
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn forall(x: Symbol, f: Formula) -> Formula {
        Formula::Forall(x, Box::new(f))
    }

    pub fn exists(x: Symbol, f: Formula) -> Formula {
        Formula::Exists(x, Box::new(f))
    }
}

/// A sequent: a disjunctively read, ordered list of formulas. The empty
/// sequent is false.
#[derive(Clone, Debug, Eq, Hash, PartialEq)]
pub struct Sequent {
    pub formulas: Vec<Formula>,
}

impl Sequent {
    pub fn new(formulas: Vec<Formula>) -> Sequent {
        Sequent { formulas }
    }

    pub fn single(f: Formula) -> Sequent {
        Sequent { formulas: vec![f] }
    }
}

#[derive(Debug, Error)]
pub enum SyntaxError {
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("sort error: {0}")]
    Sort(String),
    #[error("class error: {0}")]
    Class(String),
}

/// The sort of a term. Fully applied heads and epsilon terms are base-sorted;
/// a bare function-sorted symbol keeps its function sort.
pub fn sort_of_term(t: &Term) -> Sort {
    match t {
        Term::Sym(s) => s.sort.clone(),
        Term::App(head, args) => {
            let mut s = head.sort.clone();
            for _ in args {
                s = match s {
                    Sort::Fun(_, r) => *r,
                    Sort::Base(_) => return Sort::base(),
                };
            }
            s
        }
        Term::Eps(_, _) => Sort::base(),
    }
}

/// A substitution: a finite map from symbols to terms. The domain is either
/// all free variables or all free atoms, never mixed, and sorts are
/// preserved entry-wise.
#[derive(Clone, Debug, Default, Eq, PartialEq)]
pub struct Substitution {
    map: BTreeMap<Symbol, Term>,
}

impl Substitution {
    pub fn empty() -> Substitution {
        Substitution { map: BTreeMap::new() }
    }

    fn build(pairs: Vec<(Symbol, Term)>, class: Class) -> Result<Substitution, SyntaxError> {
        let mut map = BTreeMap::new();
        for (x, t) in pairs {
            if x.class != class {
                return Err(SyntaxError::Class(format!(
                    "substitution domain symbol {x} is not a {class:?}"
                )));
            }
            let ts = sort_of_term(&t);
            if ts != x.sort {
                return Err(SyntaxError::Sort(format!(
                    "substitution is not sort-preserving at {x}: {:?} vs {:?}",
                    x.sort, ts
                )));
            }
            map.insert(x, t);
        }
        Ok(Substitution { map })
    }

    /// A substitution on free variables.
    pub fn var_subst(pairs: Vec<(Symbol, Term)>) -> Result<Substitution, SyntaxError> {
        Substitution::build(pairs, Class::FreeVar)
    }

    /// A substitution on free atoms.
    pub fn atom_subst(pairs: Vec<(Symbol, Term)>) -> Result<Substitution, SyntaxError> {
        Substitution::build(pairs, Class::FreeAtom)
    }

    /// Internal constructor for bound-atom renamings and binder
    /// instantiations; skips the domain-class discipline of the public
    /// constructors but still requires sort preservation.
    pub(crate) fn raw(pairs: Vec<(Symbol, Term)>) -> Substitution {
        let mut map = BTreeMap::new();
        for (x, t) in pairs {
            debug_assert_eq!(x.sort, sort_of_term(&t), "raw substitution must preserve sorts");
            map.insert(x, t);
        }
        Substitution { map }
    }

    pub fn get(&self, x: &Symbol) -> Option<&Term> {
        self.map.get(x)
    }

    pub fn dom(&self) -> impl Iterator<Item = &Symbol> {
        self.map.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Symbol, &Term)> {
        self.map.iter()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn contains(&self, x: &Symbol) -> bool {
        self.map.contains_key(x)
    }
}

// ---------------------------------------------------------------------------
// Free symbols
// ---------------------------------------------------------------------------

fn collect_term(t: &Term, classes: &[Class], bound: &mut Vec<String>, out: &mut BTreeSet<Symbol>) {
    match t {
        Term::Sym(s) => collect_sym(s, classes, bound, out),
        Term::App(head, args) => {
            collect_sym(head, classes, bound, out);
            for a in args {
                collect_term(a, classes, bound, out);
            }
        }
        Term::Eps(x, body) => {
            bound.push(x.name.clone());
            collect_formula(body, classes, bound, out);
            bound.pop();
        }
    }
}

fn collect_sym(s: &Symbol, classes: &[Class], bound: &[String], out: &mut BTreeSet<Symbol>) {
    if s.class == Class::BoundAtom && bound.iter().any(|b| *b == s.name) {
        return;
    }
    if classes.contains(&s.class) {
        out.insert(s.clone());
    }
}

fn collect_formula(
    f: &Formula,
    classes: &[Class],
    bound: &mut Vec<String>,
    out: &mut BTreeSet<Symbol>,
) {
    match f {
        Formula::Pred(_, args) => {
            for a in args {
                collect_term(a, classes, bound, out);
            }
        }
        Formula::Eq(a, b) => {
            collect_term(a, classes, bound, out);
            collect_term(b, classes, bound, out);
        }
        Formula::Not(a) => collect_formula(a, classes, bound, out),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            collect_formula(a, classes, bound, out);
            collect_formula(b, classes, bound, out);
        }
        Formula::Forall(x, body) | Formula::Exists(x, body) => {
            bound.push(x.name.clone());
            collect_formula(body, classes, bound, out);
            bound.pop();
        }
    }
}

/// Symbols of the requested classes with free occurrences in a formula.
/// Bound occurrences of bound atoms are excluded.
pub fn free_symbols(f: &Formula, classes: &[Class]) -> BTreeSet<Symbol> {
    let mut out = BTreeSet::new();
    collect_formula(f, classes, &mut Vec::new(), &mut out);
    out
}

pub fn free_symbols_term(t: &Term, classes: &[Class]) -> BTreeSet<Symbol> {
    let mut out = BTreeSet::new();
    collect_term(t, classes, &mut Vec::new(), &mut out);
    out
}

pub fn free_symbols_sequent(g: &Sequent, classes: &[Class]) -> BTreeSet<Symbol> {
    let mut out = BTreeSet::new();
    for f in &g.formulas {
        collect_formula(f, classes, &mut Vec::new(), &mut out);
    }
    out
}

// ---------------------------------------------------------------------------
// Substitution application (capture-avoiding)
// ---------------------------------------------------------------------------

/// Picks a name based on `base` that is not in `avoid`.
pub fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    if !avoid.contains(base) {
        return base.to_string();
    }
    let stem = base.trim_end_matches(|c: char| c.is_ascii_digit());
    let stem = if stem.is_empty() { "v" } else { stem };
    let mut n: u64 = 0;
    loop {
        let cand = format!("{stem}{n}");
        if !avoid.contains(&cand) {
            return cand;
        }
        n += 1;
    }
}

struct Applier<'a> {
    subst: &'a Substitution,
    /// Names of bound atoms occurring free in the substitution's range;
    /// binders on these must be renamed before descending.
    danger: BTreeSet<String>,
}

impl<'a> Applier<'a> {
    fn new(subst: &'a Substitution) -> Applier<'a> {
        let mut danger = BTreeSet::new();
        for (_, t) in subst.iter() {
            for s in free_symbols_term(t, &[Class::BoundAtom]) {
                danger.insert(s.name);
            }
        }
        Applier { subst, danger }
    }

    fn hits_formula(&self, f: &Formula) -> bool {
        let present = free_symbols(f, &[Class::FreeVar, Class::FreeAtom, Class::BoundAtom]);
        self.subst.dom().any(|x| present.contains(x))
    }

    fn rebind(&self, x: &Symbol, body: &Formula) -> (Symbol, Formula) {
        if !self.danger.contains(&x.name) || !self.hits_formula(body) {
            return (x.clone(), body.clone());
        }
        let mut avoid = self.danger.clone();
        for s in free_symbols(body, &[Class::FreeVar, Class::FreeAtom, Class::BoundAtom]) {
            avoid.insert(s.name);
        }
        let fresh = Symbol::with_sort(Class::BoundAtom, fresh_name(&x.name, &avoid), x.sort.clone());
        let renamer = Substitution::raw(vec![(x.clone(), Term::Sym(fresh.clone()))]);
        let renamed = Applier::new(&renamer).formula(body);
        (fresh, renamed)
    }

    fn term(&self, t: &Term) -> Term {
        match t {
            Term::Sym(s) => match self.subst.get(s) {
                Some(r) => r.clone(),
                None => t.clone(),
            },
            Term::App(head, args) => {
                let args: Vec<Term> = args.iter().map(|a| self.term(a)).collect();
                match self.subst.get(head) {
                    // Sort preservation forces the replacement of a
                    // function-sorted head to be a bare symbol.
                    Some(Term::Sym(h)) => Term::App(h.clone(), args),
                    Some(_) => unreachable!("function-sorted symbol replaced by a composite term"),
                    None => Term::App(head.clone(), args),
                }
            }
            Term::Eps(x, body) => {
                if self.subst.contains(x) {
                    // A bound-atom renamer may target exactly this binder;
                    // the binding occurrence itself is not free.
                    let inner: Vec<(Symbol, Term)> = self
                        .subst
                        .iter()
                        .filter(|(d, _)| *d != x)
                        .map(|(d, r)| (d.clone(), r.clone()))
                        .collect();
                    let narrowed = Substitution::raw(inner);
                    return Applier::new(&narrowed).term(&Term::Eps(x.clone(), body.clone()));
                }
                let (x2, body2) = self.rebind(x, body);
                Term::Eps(x2, Box::new(self.formula(&body2)))
            }
        }
    }

    fn formula(&self, f: &Formula) -> Formula {
        match f {
            Formula::Pred(p, args) => {
                Formula::Pred(p.clone(), args.iter().map(|a| self.term(a)).collect())
            }
            Formula::Eq(a, b) => Formula::Eq(self.term(a), self.term(b)),
            Formula::Not(a) => Formula::not(self.formula(a)),
            Formula::And(a, b) => Formula::and(self.formula(a), self.formula(b)),
            Formula::Or(a, b) => Formula::or(self.formula(a), self.formula(b)),
            Formula::Implies(a, b) => Formula::implies(self.formula(a), self.formula(b)),
            Formula::Forall(x, body) => self.quant(x, body, Formula::forall),
            Formula::Exists(x, body) => self.quant(x, body, Formula::exists),
        }
    }

    fn quant(
        &self,
        x: &Symbol,
        body: &Formula,
        mk: fn(Symbol, Formula) -> Formula,
    ) -> Formula {
        if self.subst.contains(x) {
            let inner: Vec<(Symbol, Term)> = self
                .subst
                .iter()
                .filter(|(d, _)| *d != x)
                .map(|(d, r)| (d.clone(), r.clone()))
                .collect();
            let narrowed = Substitution::raw(inner);
            let applier = Applier::new(&narrowed);
            let (x2, body2) = applier.rebind(x, body);
            return mk(x2, applier.formula(&body2));
        }
        let (x2, body2) = self.rebind(x, body);
        mk(x2, self.formula(&body2))
    }
}

/// Replaces every free occurrence of a domain symbol, renaming bound atoms
/// where a free occurrence in a replacement term would be captured.
pub fn apply_subst(f: &Formula, s: &Substitution) -> Formula {
    Applier::new(s).formula(f)
}

pub fn apply_subst_term(t: &Term, s: &Substitution) -> Term {
    Applier::new(s).term(t)
}

pub fn apply_subst_sequent(g: &Sequent, s: &Substitution) -> Sequent {
    let applier = Applier::new(s);
    Sequent::new(g.formulas.iter().map(|f| applier.formula(f)).collect())
}

// ---------------------------------------------------------------------------
// Alpha-equivalence
// ---------------------------------------------------------------------------

struct AlphaCtx {
    left: Vec<String>,
    right: Vec<String>,
}

impl AlphaCtx {
    fn sym(&self, a: &Symbol, b: &Symbol) -> bool {
        if a.class != b.class {
            return false;
        }
        if a.class != Class::BoundAtom {
            return a.name == b.name;
        }
        let ia = self.left.iter().rposition(|n| *n == a.name);
        let ib = self.right.iter().rposition(|n| *n == b.name);
        match (ia, ib) {
            (Some(x), Some(y)) => x == y,
            (None, None) => a.name == b.name,
            _ => false,
        }
    }

    fn term(&mut self, a: &Term, b: &Term) -> bool {
        match (a, b) {
            (Term::Sym(x), Term::Sym(y)) => self.sym(x, y),
            (Term::App(x, xs), Term::App(y, ys)) => {
                self.sym(x, y)
                    && xs.len() == ys.len()
                    && xs.iter().zip(ys).all(|(s, t)| self.term(s, t))
            }
            (Term::Eps(x, f), Term::Eps(y, g)) => self.binder(x, f, y, g),
            _ => false,
        }
    }

    fn binder(&mut self, x: &Symbol, f: &Formula, y: &Symbol, g: &Formula) -> bool {
        self.left.push(x.name.clone());
        self.right.push(y.name.clone());
        let r = self.formula(f, g);
        self.left.pop();
        self.right.pop();
        r
    }

    fn formula(&mut self, a: &Formula, b: &Formula) -> bool {
        match (a, b) {
            (Formula::Pred(p, xs), Formula::Pred(q, ys)) => {
                p == q && xs.len() == ys.len() && xs.iter().zip(ys).all(|(s, t)| self.term(s, t))
            }
            (Formula::Eq(s1, t1), Formula::Eq(s2, t2)) => self.term(s1, s2) && self.term(t1, t2),
            (Formula::Not(x), Formula::Not(y)) => self.formula(x, y),
            (Formula::And(x1, y1), Formula::And(x2, y2))
            | (Formula::Or(x1, y1), Formula::Or(x2, y2))
            | (Formula::Implies(x1, y1), Formula::Implies(x2, y2)) => {
                self.formula(x1, x2) && self.formula(y1, y2)
            }
            (Formula::Forall(x, f), Formula::Forall(y, g))
            | (Formula::Exists(x, f), Formula::Exists(y, g)) => self.binder(x, f, y, g),
            _ => false,
        }
    }
}

/// True iff the formulas differ only by a consistent renaming of bound atoms.
pub fn alpha_equal(a: &Formula, b: &Formula) -> bool {
    AlphaCtx { left: Vec::new(), right: Vec::new() }.formula(a, b)
}

pub fn alpha_equal_term(a: &Term, b: &Term) -> bool {
    AlphaCtx { left: Vec::new(), right: Vec::new() }.term(a, b)
}

/// True iff some free bound atom occurs in the formula.
pub fn has_free_bound_atoms(f: &Formula) -> bool {
    !free_symbols(f, &[Class::BoundAtom]).is_empty()
}

pub fn has_free_bound_atoms_term(t: &Term) -> bool {
    !free_symbols_term(t, &[Class::BoundAtom]).is_empty()
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

// Precedence levels per the grammar: -> is 1 (right-assoc), | is 2, & is 3,
// unary forms are 4. `<->` never prints; it is desugared at parse time.
fn prec(f: &Formula) -> u8 {
    match f {
        Formula::Implies(_, _) => 1,
        Formula::Or(_, _) => 2,
        Formula::And(_, _) => 3,
        _ => 4,
    }
}

fn fmt_term(t: &Term, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match t {
        Term::Sym(s) => write!(f, "{s}"),
        Term::App(head, args) => {
            write!(f, "{head}(")?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                fmt_term(a, f)?;
            }
            write!(f, ")")
        }
        Term::Eps(x, body) => {
            write!(f, "eps {}. ", x.name)?;
            // A non-predicate body is parenthesized so that an enclosing
            // equation cannot be swallowed by the greedy body parse.
            if matches!(**body, Formula::Pred(_, _)) {
                fmt_formula(body, 0, f)
            } else {
                write!(f, "(")?;
                fmt_formula(body, 0, f)?;
                write!(f, ")")
            }
        }
    }
}

fn fmt_quant_body(body: &Formula, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if prec(body) == 4 {
        fmt_formula(body, 4, f)
    } else {
        write!(f, "(")?;
        fmt_formula(body, 0, f)?;
        write!(f, ")")
    }
}

fn fmt_formula(fla: &Formula, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let p = prec(fla);
    if p < min {
        write!(f, "(")?;
        fmt_formula(fla, 0, f)?;
        return write!(f, ")");
    }
    match fla {
        Formula::Pred(head, args) => {
            write!(f, "{head}")?;
            if !args.is_empty() {
                write!(f, "(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    fmt_term(a, f)?;
                }
                write!(f, ")")?;
            }
            Ok(())
        }
        Formula::Eq(a, b) => {
            // An epsilon left-hand side with a bare predicate body would
            // feed the `=` to the body's atom parse; parenthesize it.
            if let Term::Eps(x, body) = a {
                if matches!(**body, Formula::Pred(_, _)) {
                    write!(f, "eps {}. (", x.name)?;
                    fmt_formula(body, 0, f)?;
                    write!(f, ") = ")?;
                    return fmt_term(b, f);
                }
            }
            fmt_term(a, f)?;
            write!(f, " = ")?;
            fmt_term(b, f)
        }
        Formula::Not(a) => {
            write!(f, "~")?;
            match **a {
                Formula::Pred(_, _) | Formula::Not(_) => fmt_formula(a, 4, f),
                _ => {
                    write!(f, "(")?;
                    fmt_formula(a, 0, f)?;
                    write!(f, ")")
                }
            }
        }
        Formula::And(a, b) => {
            fmt_formula(a, 3, f)?;
            write!(f, " & ")?;
            fmt_formula(b, 4, f)
        }
        Formula::Or(a, b) => {
            fmt_formula(a, 2, f)?;
            write!(f, " | ")?;
            fmt_formula(b, 3, f)
        }
        Formula::Implies(a, b) => {
            fmt_formula(a, 2, f)?;
            write!(f, " -> ")?;
            fmt_formula(b, 1, f)
        }
        Formula::Forall(x, body) => {
            write!(f, "all {}. ", x.name)?;
            fmt_quant_body(body, f)
        }
        Formula::Exists(x, body) => {
            write!(f, "ex {}. ", x.name)?;
            fmt_quant_body(body, f)
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_term(self, f)
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_formula(self, 0, f)
    }
}

impl fmt::Display for Sequent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, fla) in self.formulas.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{fla}")?;
        }
        write!(f, "]")
    }
}

// ---------------------------------------------------------------------------
// Signature
// ---------------------------------------------------------------------------

/// Declared constants and predicates with their arities. Capitalized
/// identifiers not declared here are accepted as constants with the arity of
/// their first use.
#[derive(Clone, Debug, Default)]
pub struct Signature {
    pub consts: BTreeMap<String, usize>,
    pub preds: BTreeMap<String, usize>,
}

impl Signature {
    pub fn new() -> Signature {
        Signature::default()
    }

    pub fn declare_const(&mut self, name: impl Into<String>, arity: usize) {
        self.consts.insert(name.into(), arity);
    }

    pub fn declare_pred(&mut self, name: impl Into<String>, arity: usize) {
        self.preds.insert(name.into(), arity);
    }

    /// Parses one declaration per line: `const Name : i^k -> i` or
    /// `pred Name : i^k`. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Signature, SyntaxError> {
        let mut sig = Signature::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| SyntaxError::Parse { line: lineno + 1, col: 1, msg };
            let toks: Vec<&str> = line.split_whitespace().collect();
            let arity_of = |spec: &str| -> Option<usize> {
                let rest = spec.strip_prefix("i^")?;
                rest.parse().ok()
            };
            match toks.as_slice() {
                ["const", name, ":", ty, "->", "i"] => {
                    let k = arity_of(ty)
                        .ok_or_else(|| err(format!("bad constant type {ty}, expected i^k")))?;
                    sig.declare_const(*name, k);
                }
                ["pred", name, ":", ty] => {
                    let k = arity_of(ty)
                        .ok_or_else(|| err(format!("bad predicate type {ty}, expected i^k")))?;
                    sig.declare_pred(*name, k);
                }
                _ => {
                    return Err(err(format!(
                        "bad declaration {line:?}, expected `const N : i^k -> i` or `pred N : i^k`"
                    )))
                }
            }
        }
        Ok(sig)
    }
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident { sigil: Option<char>, name: String },
    LParen,
    RParen,
    Comma,
    Dot,
    EqSign,
    Tilde,
    Amp,
    Pipe,
    Arrow,
    IffArrow,
    Assign,
    Backslash,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident { sigil, name } => {
                write!(f, "{}{}", sigil.map(String::from).unwrap_or_default(), name)
            }
            Tok::LParen => write!(f, "("),
            Tok::RParen => write!(f, ")"),
            Tok::Comma => write!(f, ","),
            Tok::Dot => write!(f, "."),
            Tok::EqSign => write!(f, "="),
            Tok::Tilde => write!(f, "~"),
            Tok::Amp => write!(f, "&"),
            Tok::Pipe => write!(f, "|"),
            Tok::Arrow => write!(f, "->"),
            Tok::IffArrow => write!(f, "<->"),
            Tok::Assign => write!(f, ":="),
            Tok::Backslash => write!(f, "\\"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Spanned {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub(crate) fn lex(text: &str) -> Result<Vec<Spanned>, SyntaxError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (tline, tcol) = (line, col);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next().unwrap();
            if c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            c
        };
        if c.is_whitespace() {
            bump(&mut chars);
            continue;
        }
        if c == '#' {
            while let Some(&c2) = chars.peek() {
                if c2 == '\n' {
                    break;
                }
                bump(&mut chars);
            }
            continue;
        }
        let push = |out: &mut Vec<Spanned>, tok: Tok| {
            out.push(Spanned { tok, line: tline, col: tcol });
        };
        match c {
            '(' => {
                bump(&mut chars);
                push(&mut out, Tok::LParen);
            }
            ')' => {
                bump(&mut chars);
                push(&mut out, Tok::RParen);
            }
            ',' => {
                bump(&mut chars);
                push(&mut out, Tok::Comma);
            }
            '.' => {
                bump(&mut chars);
                push(&mut out, Tok::Dot);
            }
            '=' => {
                bump(&mut chars);
                push(&mut out, Tok::EqSign);
            }
            '~' => {
                bump(&mut chars);
                push(&mut out, Tok::Tilde);
            }
            '&' => {
                bump(&mut chars);
                push(&mut out, Tok::Amp);
            }
            '|' => {
                bump(&mut chars);
                push(&mut out, Tok::Pipe);
            }
            '\\' => {
                bump(&mut chars);
                push(&mut out, Tok::Backslash);
            }
            '-' => {
                bump(&mut chars);
                if chars.peek() == Some(&'>') {
                    bump(&mut chars);
                    push(&mut out, Tok::Arrow);
                } else {
                    return Err(SyntaxError::Parse {
                        line: tline,
                        col: tcol,
                        msg: "expected `->`".to_string(),
                    });
                }
            }
            '<' => {
                bump(&mut chars);
                if chars.peek() == Some(&'-') {
                    bump(&mut chars);
                    if chars.peek() == Some(&'>') {
                        bump(&mut chars);
                        push(&mut out, Tok::IffArrow);
                    } else {
                        return Err(SyntaxError::Parse {
                            line: tline,
                            col: tcol,
                            msg: "expected `<->`".to_string(),
                        });
                    }
                } else {
                    return Err(SyntaxError::Parse {
                        line: tline,
                        col: tcol,
                        msg: "expected `<->`".to_string(),
                    });
                }
            }
            ':' => {
                bump(&mut chars);
                if chars.peek() == Some(&'=') {
                    bump(&mut chars);
                    push(&mut out, Tok::Assign);
                } else {
                    return Err(SyntaxError::Parse {
                        line: tline,
                        col: tcol,
                        msg: "expected `:=`".to_string(),
                    });
                }
            }
            '?' | '!' => {
                bump(&mut chars);
                let mut name = String::new();
                while let Some(&c2) = chars.peek() {
                    if c2.is_ascii_alphanumeric() || c2 == '_' {
                        name.push(bump(&mut chars));
                    } else {
                        break;
                    }
                }
                if name.is_empty() || !name.chars().next().unwrap().is_ascii_alphabetic() {
                    return Err(SyntaxError::Parse {
                        line: tline,
                        col: tcol,
                        msg: format!("`{c}` must be followed by an identifier"),
                    });
                }
                push(&mut out, Tok::Ident { sigil: Some(c), name });
            }
            c2 if c2.is_ascii_alphabetic() => {
                let mut name = String::new();
                while let Some(&c3) = chars.peek() {
                    if c3.is_ascii_alphanumeric() || c3 == '_' {
                        name.push(bump(&mut chars));
                    } else {
                        break;
                    }
                }
                push(&mut out, Tok::Ident { sigil: None, name });
            }
            other => {
                return Err(SyntaxError::Parse {
                    line: tline,
                    col: tcol,
                    msg: format!("unexpected character `{other}`"),
                });
            }
        }
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

pub(crate) struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    sig: Signature,
}

/// An identifier resolved against the signature.
enum Resolved {
    Var(String),
    Atom(String),
    Bound(String),
    Const(String, usize),
    Pred(String, usize),
}

impl Parser {
    pub(crate) fn new(text: &str, sig: &Signature) -> Result<Parser, SyntaxError> {
        Ok(Parser { toks: lex(text)?, pos: 0, sig: sig.clone() })
    }

    pub(crate) fn into_signature(self) -> Signature {
        self.sig
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        (self.toks[self.pos].line, self.toks[self.pos].col)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, SyntaxError> {
        let (line, col) = self.here();
        Err(SyntaxError::Parse { line, col, msg: msg.into() })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: &Tok) -> Result<(), SyntaxError> {
        if self.peek() == want {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected `{want}`, found `{}`", self.peek()))
        }
    }

    pub(crate) fn at_eof(&self) -> bool {
        *self.peek() == Tok::Eof
    }

    pub(crate) fn expect_eof(&mut self) -> Result<(), SyntaxError> {
        if self.at_eof() {
            Ok(())
        } else {
            self.err(format!("unexpected trailing `{}`", self.peek()))
        }
    }

    fn ident(&mut self) -> Result<(Option<char>, String), SyntaxError> {
        match self.peek().clone() {
            Tok::Ident { sigil, name } => {
                self.bump();
                Ok((sigil, name))
            }
            other => self.err(format!("expected an identifier, found `{other}`")),
        }
    }

    /// One `?name := term` (or `!name := term`) assignment from a script
    /// line. Returns the bare name and the parsed term.
    pub(crate) fn assignment(&mut self, sigil: char) -> Result<(String, Term), SyntaxError> {
        let (line, col) = self.here();
        let (got, name) = self.ident()?;
        if got != Some(sigil) {
            return Err(SyntaxError::Parse {
                line,
                col,
                msg: format!("expected an identifier with the `{sigil}` sigil"),
            });
        }
        self.expect(&Tok::Assign)?;
        let term = self.term_entry()?;
        Ok((name, term))
    }

    pub(crate) fn eat_comma(&mut self) -> bool {
        if *self.peek() == Tok::Comma {
            self.bump();
            true
        } else {
            false
        }
    }

    /// A binder identifier: bare, undeclared, lowercase.
    pub(crate) fn binder_ident(&mut self) -> Result<Symbol, SyntaxError> {
        let (line, col) = self.here();
        let (sigil, name) = self.ident()?;
        if sigil.is_some() {
            return Err(SyntaxError::Parse {
                line,
                col,
                msg: format!("binder `{name}` must be a bound atom (no sigil)"),
            });
        }
        if is_keyword(&name) {
            return Err(SyntaxError::Parse {
                line,
                col,
                msg: format!("keyword `{name}` cannot be a binder"),
            });
        }
        if self.sig.consts.contains_key(&name)
            || self.sig.preds.contains_key(&name)
            || name.chars().next().unwrap().is_ascii_uppercase()
        {
            return Err(SyntaxError::Parse {
                line,
                col,
                msg: format!("binder `{name}` collides with a constant or predicate"),
            });
        }
        Ok(Symbol::bound_atom(name))
    }

    fn resolve(&mut self, sigil: Option<char>, name: String, args: usize) -> Resolved {
        match sigil {
            Some('?') => Resolved::Var(name),
            Some('!') => Resolved::Atom(name),
            _ => {
                if let Some(&k) = self.sig.preds.get(&name) {
                    Resolved::Pred(name, k)
                } else if let Some(&k) = self.sig.consts.get(&name) {
                    Resolved::Const(name, k)
                } else if name.chars().next().unwrap().is_ascii_uppercase() {
                    // Implicitly declared by first use; later uses must agree.
                    self.sig.consts.insert(name.clone(), args);
                    Resolved::Const(name, args)
                } else {
                    Resolved::Bound(name)
                }
            }
        }
    }

    fn args(&mut self) -> Result<Vec<Term>, SyntaxError> {
        let mut out = Vec::new();
        if *self.peek() != Tok::LParen {
            return Ok(out);
        }
        self.bump();
        loop {
            out.push(self.term_at(true)?);
            match self.bump() {
                Tok::Comma => continue,
                Tok::RParen => break,
                other => return self.err(format!("expected `,` or `)`, found `{other}`")),
            }
        }
        Ok(out)
    }

    fn check_base_args(&self, args: &[Term]) -> Result<(), SyntaxError> {
        for a in args {
            if !sort_of_term(a).is_base() {
                return self.err(format!("argument `{a}` is not of the base sort"));
            }
        }
        Ok(())
    }

    /// A term. With `base_required`, a bare function constant or applied
    /// symbol must come out base-sorted; the relaxation exists so that a
    /// substitution range can name a function constant such as `p` bare.
    fn term_at(&mut self, base_required: bool) -> Result<Term, SyntaxError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let t = self.term_at(base_required)?;
                self.expect(&Tok::RParen)?;
                Ok(t)
            }
            Tok::Ident { sigil: None, name } if name == "eps" => self.eps_term(),
            Tok::Ident { sigil: None, name } if name == "all" || name == "ex" => {
                self.err(format!("quantifier `{name}` cannot start a term"))
            }
            Tok::Ident { .. } => {
                let (line, col) = self.here();
                let (sigil, name) = self.ident()?;
                let args = self.args()?;
                self.check_base_args(&args)?;
                let n = args.len();
                let term = match self.resolve(sigil, name, n) {
                    Resolved::Pred(name, _) => {
                        return Err(SyntaxError::Parse {
                            line,
                            col,
                            msg: format!("predicate `{name}` used in term position"),
                        })
                    }
                    Resolved::Const(name, k) => {
                        if n == k {
                            let sym = Symbol::with_sort(Class::Constant, name, Sort::fun_chain(k));
                            if k == 0 {
                                Term::Sym(sym)
                            } else {
                                Term::App(sym, args)
                            }
                        } else if n == 0 && !base_required {
                            Term::Sym(Symbol::with_sort(Class::Constant, name, Sort::fun_chain(k)))
                        } else {
                            return Err(SyntaxError::Parse {
                                line,
                                col,
                                msg: format!("constant `{name}` expects {k} arguments, found {n}"),
                            });
                        }
                    }
                    Resolved::Var(name) => {
                        let sym =
                            Symbol::with_sort(Class::FreeVar, name, Sort::fun_chain(n));
                        if n == 0 {
                            Term::Sym(sym)
                        } else {
                            Term::App(sym, args)
                        }
                    }
                    Resolved::Atom(name) => {
                        if n > 0 {
                            return Err(SyntaxError::Parse {
                                line,
                                col,
                                msg: format!("free atom `!{name}` cannot be applied"),
                            });
                        }
                        Term::Sym(Symbol::free_atom(name))
                    }
                    Resolved::Bound(name) => {
                        let sym =
                            Symbol::with_sort(Class::BoundAtom, name, Sort::fun_chain(n));
                        if n == 0 {
                            Term::Sym(sym)
                        } else {
                            Term::App(sym, args)
                        }
                    }
                };
                Ok(term)
            }
            other => self.err(format!("expected a term, found `{other}`")),
        }
    }

    fn eps_term(&mut self) -> Result<Term, SyntaxError> {
        self.bump(); // `eps`
        let x = self.binder_ident()?;
        self.expect(&Tok::Dot)?;
        let body = self.unary()?;
        Ok(Term::Eps(x, Box::new(body)))
    }

    pub(crate) fn formula(&mut self) -> Result<Formula, SyntaxError> {
        let mut a = self.imp()?;
        while *self.peek() == Tok::IffArrow {
            self.bump();
            let b = self.imp()?;
            a = Formula::and(
                Formula::implies(a.clone(), b.clone()),
                Formula::implies(b, a),
            );
        }
        Ok(a)
    }

    fn imp(&mut self) -> Result<Formula, SyntaxError> {
        let mut parts = vec![self.or()?];
        while *self.peek() == Tok::Arrow {
            self.bump();
            parts.push(self.or()?);
        }
        let mut out = parts.pop().unwrap();
        while let Some(lhs) = parts.pop() {
            out = Formula::implies(lhs, out);
        }
        Ok(out)
    }

    fn or(&mut self) -> Result<Formula, SyntaxError> {
        let mut a = self.and()?;
        while *self.peek() == Tok::Pipe {
            self.bump();
            a = Formula::or(a, self.and()?);
        }
        Ok(a)
    }

    fn and(&mut self) -> Result<Formula, SyntaxError> {
        let mut a = self.unary()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            a = Formula::and(a, self.unary()?);
        }
        Ok(a)
    }

    fn unary(&mut self) -> Result<Formula, SyntaxError> {
        match self.peek().clone() {
            Tok::Tilde => {
                self.bump();
                Ok(Formula::not(self.unary()?))
            }
            Tok::Ident { sigil: None, name } if name == "all" || name == "ex" => {
                self.bump();
                let x = self.binder_ident()?;
                self.expect(&Tok::Dot)?;
                let body = self.unary()?;
                if name == "all" {
                    Ok(Formula::forall(x, body))
                } else {
                    Ok(Formula::exists(x, body))
                }
            }
            Tok::Ident { sigil: None, name } if name == "eps" => {
                // An epsilon term in formula position must be the left-hand
                // side of an equation.
                let t = self.eps_term()?;
                if *self.peek() == Tok::EqSign {
                    self.bump();
                    let rhs = self.term_at(true)?;
                    Ok(Formula::Eq(t, rhs))
                } else {
                    self.err("an epsilon term is not a formula; expected `=`")
                }
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Formula, SyntaxError> {
        if *self.peek() == Tok::LParen {
            // Either a parenthesized formula or a parenthesized term opening
            // an equation; try the term reading only when `=` follows.
            let save = self.pos;
            let as_term = (|| -> Result<Term, SyntaxError> {
                self.expect(&Tok::LParen)?;
                let t = self.term_at(true)?;
                self.expect(&Tok::RParen)?;
                if *self.peek() == Tok::EqSign {
                    Ok(t)
                } else {
                    self.err("not an equation")
                }
            })();
            match as_term {
                Ok(lhs) => {
                    self.expect(&Tok::EqSign)?;
                    let rhs = self.term_at(true)?;
                    return Ok(Formula::Eq(lhs, rhs));
                }
                Err(_) => {
                    self.pos = save;
                    self.expect(&Tok::LParen)?;
                    let f = self.formula()?;
                    self.expect(&Tok::RParen)?;
                    // A trailing `=` is left for the caller: it may belong to
                    // an enclosing equation, as in `eps x. (x = x) = t`.
                    return Ok(f);
                }
            }
        }
        let (line, col) = self.here();
        let (sigil, name) = self.ident()?;
        if sigil.is_none() && is_keyword(&name) {
            return Err(SyntaxError::Parse {
                line,
                col,
                msg: format!("unexpected keyword `{name}`"),
            });
        }
        let args = self.args()?;
        self.check_base_args(&args)?;
        let n = args.len();
        // First use of a capitalized name in formula position declares a
        // predicate, unless a following `=` makes it a constant term.
        if sigil.is_none()
            && name.chars().next().unwrap().is_ascii_uppercase()
            && !self.sig.preds.contains_key(&name)
            && !self.sig.consts.contains_key(&name)
            && *self.peek() != Tok::EqSign
        {
            self.sig.preds.insert(name.clone(), n);
            return Ok(Formula::Pred(
                Symbol::with_sort(Class::Constant, name, Sort::fun_chain(n)),
                args,
            ));
        }
        match self.resolve(sigil, name, n) {
            Resolved::Pred(pname, k) => {
                if n != k {
                    return Err(SyntaxError::Parse {
                        line,
                        col,
                        msg: format!("predicate `{pname}` expects {k} arguments, found {n}"),
                    });
                }
                if *self.peek() == Tok::EqSign {
                    return self.err(format!("predicate `{pname}` used in term position"));
                }
                Ok(Formula::Pred(
                    Symbol::with_sort(Class::Constant, pname, Sort::fun_chain(k)),
                    args,
                ))
            }
            resolved => {
                // A term: this atom must be an equation.
                let lhs = match resolved {
                    Resolved::Const(cname, k) => {
                        if n != k {
                            return Err(SyntaxError::Parse {
                                line,
                                col,
                                msg: format!(
                                    "constant `{cname}` expects {k} arguments, found {n}"
                                ),
                            });
                        }
                        let sym = Symbol::with_sort(Class::Constant, cname, Sort::fun_chain(k));
                        if k == 0 {
                            Term::Sym(sym)
                        } else {
                            Term::App(sym, args)
                        }
                    }
                    Resolved::Var(vname) => {
                        let sym = Symbol::with_sort(Class::FreeVar, vname, Sort::fun_chain(n));
                        if n == 0 {
                            Term::Sym(sym)
                        } else {
                            Term::App(sym, args)
                        }
                    }
                    Resolved::Atom(aname) => {
                        if n > 0 {
                            return Err(SyntaxError::Parse {
                                line,
                                col,
                                msg: format!("free atom `!{aname}` cannot be applied"),
                            });
                        }
                        Term::Sym(Symbol::free_atom(aname))
                    }
                    Resolved::Bound(bname) => {
                        let sym = Symbol::with_sort(Class::BoundAtom, bname, Sort::fun_chain(n));
                        if n == 0 {
                            Term::Sym(sym)
                        } else {
                            Term::App(sym, args)
                        }
                    }
                    Resolved::Pred(_, _) => unreachable!(),
                };
                if *self.peek() != Tok::EqSign {
                    return Err(SyntaxError::Parse {
                        line,
                        col,
                        msg: format!("`{lhs}` is a term, not a formula; expected `=`"),
                    });
                }
                self.bump();
                let rhs = self.term_at(true)?;
                Ok(Formula::Eq(lhs, rhs))
            }
        }
    }

    /// Entry point for a standalone term (substitution ranges, gamma terms).
    pub(crate) fn term_entry(&mut self) -> Result<Term, SyntaxError> {
        self.term_at(false)
    }
}

fn is_keyword(name: &str) -> bool {
    matches!(name, "all" | "ex" | "eps")
}

/// Parses a formula against a signature. Implicitly declared capitalized
/// constants are checked for arity consistency within the text but are not
/// written back to the caller's signature.
pub fn parse_formula(text: &str, sig: &Signature) -> Result<Formula, SyntaxError> {
    let mut p = Parser::new(text, sig)?;
    let f = p.formula()?;
    p.expect_eof()?;
    Ok(f)
}

/// Parses a standalone term (an epsilon term, a constant, an applied free
/// variable, ...).
pub fn parse_term(text: &str, sig: &Signature) -> Result<Term, SyntaxError> {
    let mut p = Parser::new(text, sig)?;
    let t = p.term_entry()?;
    p.expect_eof()?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig() -> Signature {
        let mut s = Signature::new();
        s.declare_pred("P", 1);
        s.declare_pred("Q", 2);
        s.declare_pred("F", 2);
        s.declare_const("c", 0);
        s.declare_const("s", 1);
        s
    }

    fn pf(text: &str) -> Formula {
        parse_formula(text, &sig()).unwrap()
    }

    #[test]
    fn parses_quantified_equation() {
        let f = pf("all x. (?y = x)");
        let y = Symbol::free_var("y");
        let x = Symbol::bound_atom("x");
        assert_eq!(
            f,
            Formula::forall(
                x.clone(),
                Formula::Eq(Term::Sym(y), Term::Sym(x))
            )
        );
    }

    #[test]
    fn parses_negated_self_inequality() {
        let f = pf("ex x. ~(x = x)");
        let x = Symbol::bound_atom("x");
        assert_eq!(
            f,
            Formula::exists(
                x.clone(),
                Formula::not(Formula::Eq(Term::Sym(x.clone()), Term::Sym(x)))
            )
        );
    }

    #[test]
    fn parses_eps_term_with_constant_argument() {
        let t = parse_term("eps z. F(z, Jesus)", &sig()).unwrap();
        let z = Symbol::bound_atom("z");
        let jesus = Symbol::constant("Jesus");
        match &t {
            Term::Eps(b, body) => {
                assert_eq!(*b, z);
                assert_eq!(
                    **body,
                    Formula::Pred(
                        Symbol::with_sort(Class::Constant, "F", Sort::fun_chain(2)),
                        vec![Term::Sym(z), Term::Sym(jesus)]
                    )
                );
            }
            other => panic!("expected an epsilon term, got {other:?}"),
        }
    }

    #[test]
    fn desugars_iff() {
        let f = pf("P(c) <-> Q(c, c)");
        match f {
            Formula::And(a, b) => {
                assert!(matches!(*a, Formula::Implies(_, _)));
                assert!(matches!(*b, Formula::Implies(_, _)));
            }
            other => panic!("expected desugared conjunction, got {other:?}"),
        }
    }

    #[test]
    fn implication_is_right_associative() {
        let f = pf("P(c) -> P(c) -> P(c)");
        match f {
            Formula::Implies(_, rhs) => assert!(matches!(*rhs, Formula::Implies(_, _))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn eps_equation_without_parens_on_either_side() {
        let f = pf("eps x. (x = x) = eps y. (y = y)");
        match f {
            Formula::Eq(Term::Eps(_, _), Term::Eps(_, _)) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn free_symbols_respects_binding() {
        let f = pf("all x. (?y = x)");
        let vars = free_symbols(&f, &[Class::FreeVar]);
        assert_eq!(vars, BTreeSet::from([Symbol::free_var("y")]));
        let bound = free_symbols(&f, &[Class::BoundAtom]);
        assert!(bound.is_empty());
    }

    #[test]
    fn free_symbols_sees_free_bound_atom_in_eps_body() {
        // w stays free inside the epsilon term.
        let t = parse_term("eps z. Q(w, z)", &sig()).unwrap();
        let free = free_symbols_term(&t, &[Class::BoundAtom]);
        assert_eq!(free, BTreeSet::from([Symbol::bound_atom("w")]));
    }

    #[test]
    fn subst_example_from_delta_minus_block() {
        let f = pf("?y = !a");
        let s = Substitution::var_subst(vec![(
            Symbol::free_var("y"),
            Term::Sym(Symbol::free_atom("a")),
        )])
        .unwrap();
        let g = apply_subst(&f, &s);
        assert_eq!(g.to_string(), "!a = !a");
    }

    #[test]
    fn empty_subst_is_identity() {
        let f = pf("all x. Q(x, ?y)");
        assert_eq!(apply_subst(&f, &Substitution::empty()), f);
    }

    #[test]
    fn capture_is_avoided_by_renaming() {
        // {?y |-> eps x. (x = x)} into all x. (x = ?y): the binder x must be
        // renamed away from the x free in nothing -- but the replacement's
        // bound x is harmless, so renaming only triggers when needed.
        let f = pf("all x. (x = ?y)");
        let eps = parse_term("eps x. (x = x)", &sig()).unwrap();
        let s = Substitution::var_subst(vec![(Symbol::free_var("y"), eps)]).unwrap();
        let g = apply_subst(&f, &s);
        // The replacement has no free bound atoms, so no renaming is needed
        // and the result keeps its binder.
        assert_eq!(g.to_string(), "all x. x = eps x. (x = x)");
        assert!(alpha_equal(&g, &pf("all w. (w = eps x. (x = x))")));
    }

    #[test]
    fn capture_renames_when_replacement_has_free_bound_atom() {
        // Replacement contains v0 free; substituting under a binder on v0
        // must rename that binder.
        let mut s = sig();
        s.declare_pred("R", 2);
        let f = parse_formula("all v0. R(v0, ?y)", &s).unwrap();
        let range = parse_term("v0", &s).unwrap();
        let sub = Substitution::var_subst(vec![(Symbol::free_var("y"), range)]).unwrap();
        let g = apply_subst(&f, &sub);
        match &g {
            Formula::Forall(x, body) => {
                assert_ne!(x.name, "v0");
                let frees = free_symbols(body, &[Class::BoundAtom]);
                assert!(frees.contains(&Symbol::bound_atom("v0")));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn alpha_equality_examples() {
        assert!(alpha_equal(&pf("all x. P(x)"), &pf("all y. P(y)")));
        assert!(!alpha_equal(&pf("all x. P(x)"), &pf("all x. Q(x, x)")));
        let a = parse_term("eps z0. F(z0, c)", &sig()).unwrap();
        let b = parse_term("eps z1. F(z1, c)", &sig()).unwrap();
        assert!(alpha_equal_term(&a, &b));
    }

    #[test]
    fn print_parse_round_trip_on_goldens() {
        for text in [
            "all x. (?y = x)",
            "ex x. ~(x = x)",
            "P(c) & Q(c, c) -> P(s(c))",
            "all v0. (ex v1. v0 = s(v1) -> v0 = s(p(v0)))",
            "eps x. (x = x) = eps y. (y = y)",
            "~(?y = ?y)",
            "ex x. ~(?y = x) -> ~(?y = ?y)",
            "P(c) | P(s(c)) | ~P(c)",
        ] {
            let mut s = sig();
            s.declare_const("p", 1);
            let f = parse_formula(text, &s).unwrap();
            let printed = f.to_string();
            let g = parse_formula(&printed, &s).unwrap();
            assert!(alpha_equal(&f, &g), "round trip failed: {text} vs {printed}");
            assert_eq!(printed, g.to_string());
        }
    }

    #[test]
    fn rejects_pred_in_term_position_and_undeclared_misuse() {
        assert!(parse_formula("P(c) = c", &sig()).is_err());
        assert!(parse_formula("s(c)", &sig()).is_err());
        assert!(parse_formula("Q(c)", &sig()).is_err());
        assert!(parse_formula("!a(c) = c", &sig()).is_err());
    }

    #[test]
    fn signature_parses_and_rejects() {
        let s = Signature::parse("const HG : i^0 -> i\npred Father : i^2\n# comment\n").unwrap();
        assert_eq!(s.consts.get("HG"), Some(&0));
        assert_eq!(s.preds.get("Father"), Some(&2));
        assert!(Signature::parse("fun F : i -> i").is_err());
    }

    #[test]
    fn capitalized_identifiers_are_implicit_constants() {
        let f = parse_formula("HG = Jesus", &Signature::new()).unwrap();
        assert_eq!(
            f,
            Formula::Eq(
                Term::Sym(Symbol::constant("HG")),
                Term::Sym(Symbol::constant("Jesus"))
            )
        );
    }
}
