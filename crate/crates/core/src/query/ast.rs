use std::collections::BTreeSet;
use std::fmt;

use crate::extraction::CompareSymbol;
use crate::graph::Direction;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Query {
    pub matches: Vec<PathPattern>,
    pub where_clause: Option<Expr>,
    pub creates: Vec<PathPattern>,
    pub sets: Vec<SetItem>,
    pub deletes: Vec<String>,
    pub detach: bool,
    pub returns: Vec<ReturnItem>,
    pub limit: Option<u64>,
}

impl Query {
    /// Whether the statement modifies the graph.
    pub fn is_write(&self) -> bool {
        !self.creates.is_empty() || !self.sets.is_empty() || !self.deletes.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathPattern {
    pub var: Option<String>,
    pub nodes: Vec<NodePat>,
    pub rels: Vec<RelPat>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodePat {
    pub var: Option<String>,
    pub labels: Vec<String>,
    pub props: Vec<(String, Expr)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelPat {
    pub var: Option<String>,
    pub rel_type: Option<String>,
    /// `Out` for `-[]->`, `In` for `<-[]-`, `Both` for `-[]-`.
    pub direction: Direction,
    pub props: Vec<(String, Expr)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetItem {
    pub var: String,
    pub key: String,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnItem {
    pub expr: Expr,
    pub alias: Option<String>,
}

impl ReturnItem {
    /// Column name: the alias, else the expression text.
    pub fn column(&self) -> String {
        self.alias.clone().unwrap_or_else(|| self.expr.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Int(i64),
    Float(f64),
    Str(String),
    Bool(bool),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlobSource {
    Url,
    File,
    Bytes,
}

impl BlobSource {
    pub fn name(self) -> &'static str {
        match self {
            BlobSource::Url => "fromURL",
            BlobSource::File => "fromFile",
            BlobSource::Bytes => "fromBytes",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Neq,
    Lt,
    Gt,
    Le,
    Ge,
    Sem(CompareSymbol),
}

impl CmpOp {
    pub fn as_str(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Neq => "<>",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
            CmpOp::Sem(s) => s.as_str(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShortestPathPat {
    pub from: String,
    pub to: String,
    pub rel_type: Option<String>,
    pub min_hops: u32,
    pub max_hops: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(Literal),
    Param(String),
    Var(String),
    Prop(Box<Expr>, String),
    /// `expr->sub_key`
    SubProp(Box<Expr>, String),
    HasLabel(String, String),
    BlobFn(BlobSource, Box<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    ShortestPath(ShortestPathPat),
}

impl Expr {
    pub fn prop(var: &str, key: &str) -> Expr {
        Expr::Prop(Box::new(Expr::Var(var.to_string())), key.to_string())
    }

    pub fn cmp(op: CmpOp, a: Expr, b: Expr) -> Expr {
        Expr::Cmp(op, Box::new(a), Box::new(b))
    }

    /// Variables the expression reads.
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Var(v) | Expr::HasLabel(v, _) => {
                out.insert(v.clone());
            }
            Expr::Prop(e, _) | Expr::SubProp(e, _) | Expr::BlobFn(_, e) | Expr::Not(e) => e.collect_vars(out),
            Expr::Cmp(_, a, b) | Expr::And(a, b) | Expr::Or(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::ShortestPath(sp) => {
                out.insert(sp.from.clone());
                out.insert(sp.to.clone());
            }
            Expr::Lit(_) | Expr::Param(_) => {}
        }
    }

    /// Whether evaluating the expression needs semantic extraction.
    pub fn is_unstructured(&self) -> bool {
        match self {
            Expr::SubProp(..) | Expr::BlobFn(..) | Expr::Cmp(CmpOp::Sem(_), ..) => true,
            Expr::Prop(e, _) | Expr::Not(e) => e.is_unstructured(),
            Expr::Cmp(_, a, b) | Expr::And(a, b) | Expr::Or(a, b) => a.is_unstructured() || b.is_unstructured(),
            _ => false,
        }
    }

    /// Sub-property keys mentioned through `->`, in order of appearance.
    pub fn sub_keys(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_sub_keys(&mut out);
        out
    }

    fn collect_sub_keys(&self, out: &mut Vec<String>) {
        match self {
            Expr::SubProp(e, k) => {
                e.collect_sub_keys(out);
                if !out.contains(k) {
                    out.push(k.clone());
                }
            }
            Expr::Prop(e, _) | Expr::BlobFn(_, e) | Expr::Not(e) => e.collect_sub_keys(out),
            Expr::Cmp(_, a, b) | Expr::And(a, b) | Expr::Or(a, b) => {
                a.collect_sub_keys(out);
                b.collect_sub_keys(out);
            }
            _ => {}
        }
    }

    /// Splits top-level conjunctions.
    pub fn conjuncts(self) -> Vec<Expr> {
        match self {
            Expr::And(a, b) => {
                let mut v = a.conjuncts();
                v.extend(b.conjuncts());
                v
            }
            e => vec![e],
        }
    }
}

fn write_str_lit(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("'")?;
    for c in s.chars() {
        match c {
            '\'' => f.write_str("\\'")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("'")
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Int(i) => write!(f, "{i}"),
            Literal::Float(x) => write!(f, "{x:?}"),
            Literal::Str(s) => write_str_lit(f, s),
            Literal::Bool(b) => f.write_str(if *b { "true" } else { "false" }),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Lit(l) => write!(f, "{l}"),
            Expr::Param(p) => write!(f, "${p}"),
            Expr::Var(v) => f.write_str(v),
            Expr::Prop(e, k) => write!(f, "{e}.{k}"),
            Expr::SubProp(e, k) => write!(f, "{e}->{k}"),
            Expr::HasLabel(v, l) => write!(f, "{v}:{l}"),
            Expr::BlobFn(s, e) => write!(f, "Blob.{}({e})", s.name()),
            Expr::Cmp(op, a, b) => write!(f, "({a} {} {b})", op.as_str()),
            Expr::And(a, b) => write!(f, "({a} AND {b})"),
            Expr::Or(a, b) => write!(f, "({a} OR {b})"),
            Expr::Not(e) => write!(f, "(NOT {e})"),
            Expr::ShortestPath(sp) => {
                write!(f, "shortestPath(({})-[", sp.from)?;
                if let Some(t) = &sp.rel_type {
                    write!(f, ":{t}")?;
                }
                write!(f, "*{}..{}]-({}))", sp.min_hops, sp.max_hops, sp.to)
            }
        }
    }
}

fn write_props(f: &mut fmt::Formatter<'_>, props: &[(String, Expr)]) -> fmt::Result {
    if props.is_empty() {
        return Ok(());
    }
    f.write_str(" {")?;
    for (i, (k, v)) in props.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{k}: {v}")?;
    }
    f.write_str("}")
}

impl fmt::Display for NodePat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        if let Some(v) = &self.var {
            f.write_str(v)?;
        }
        for l in &self.labels {
            write!(f, ":{l}")?;
        }
        write_props(f, &self.props)?;
        f.write_str(")")
    }
}

impl fmt::Display for RelPat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.direction == Direction::In { "<-[" } else { "-[" })?;
        if let Some(v) = &self.var {
            f.write_str(v)?;
        }
        if let Some(t) = &self.rel_type {
            write!(f, ":{t}")?;
        }
        write_props(f, &self.props)?;
        f.write_str(if self.direction == Direction::Out { "]->" } else { "]-" })
    }
}

impl fmt::Display for PathPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(v) = &self.var {
            write!(f, "{v} = ")?;
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if i > 0 {
                write!(f, "{}", self.rels[i - 1])?;
            }
            write!(f, "{n}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        if !self.matches.is_empty() {
            let ps: Vec<String> = self.matches.iter().map(ToString::to_string).collect();
            parts.push(format!("MATCH {}", ps.join(", ")));
        }
        if let Some(w) = &self.where_clause {
            parts.push(format!("WHERE {w}"));
        }
        for c in &self.creates {
            parts.push(format!("CREATE {c}"));
        }
        if !self.sets.is_empty() {
            let items: Vec<String> = self.sets.iter().map(|s| format!("{}.{} = {}", s.var, s.key, s.value)).collect();
            parts.push(format!("SET {}", items.join(", ")));
        }
        if !self.deletes.is_empty() {
            let kw = if self.detach { "DETACH DELETE" } else { "DELETE" };
            parts.push(format!("{kw} {}", self.deletes.join(", ")));
        }
        if !self.returns.is_empty() {
            let items: Vec<String> = self
                .returns
                .iter()
                .map(|r| match &r.alias {
                    Some(a) => format!("{} AS {a}", r.expr),
                    None => r.expr.to_string(),
                })
                .collect();
            parts.push(format!("RETURN {}", items.join(", ")));
        }
        if let Some(l) = self.limit {
            parts.push(format!("LIMIT {l}"));
        }
        f.write_str(&parts.join(" "))
    }
}
