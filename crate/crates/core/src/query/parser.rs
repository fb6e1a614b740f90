//! Recursive-descent parser.
//!
//! ```text
//! query   := (MATCH pattern (',' pattern)*)* (WHERE expr)?
//!            (CREATE pattern (',' pattern)* | SET set (',' set)* | DETACH? DELETE var (',' var)*)*
//!            (RETURN item (',' item)* (LIMIT int)?)? ';'?
//! pattern := (var '=')? node (rel node)*
//! node    := '(' var? (':' label)* props? ')'
//! rel     := ('-' | '<-') ('[' var? (':' type)? props? ']')? ('-' | '->')
//! expr    := and (OR and)*
//! and     := cmp (AND cmp)*
//! cmp     := unary (cmpop unary)?
//! unary   := NOT unary | postfix
//! postfix := primary ('.' key | '->' subkey)*
//! ```

use crate::extraction::CompareSymbol;
use crate::graph::Direction;

use super::ast::*;
use super::lexer::{tokenize, Keyword, Pos, Tok, Token};
use super::QueryError;

pub fn parse(text: &str) -> Result<Query, QueryError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, at: 0, end: end_pos(text) };
    p.query()
}

fn end_pos(text: &str) -> Pos {
    let line = text.lines().count().max(1) as u32;
    let col = text.lines().last().map(|l| l.chars().count() as u32 + 1).unwrap_or(1);
    Pos { line, col }
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
    end: Pos,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.at).map(|t| &t.tok)
    }

    fn peek_at(&self, n: usize) -> Option<&Tok> {
        self.tokens.get(self.at + n).map(|t| &t.tok)
    }

    fn pos(&self) -> Pos {
        self.tokens.get(self.at).map(|t| t.pos).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.at).map(|t| t.tok.clone());
        self.at += 1;
        t
    }

    fn error(&self, expected: &[&str]) -> QueryError {
        QueryError::Parse {
            pos: self.pos(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().map(|t| t.to_string()).unwrap_or_else(|| "end of input".into()),
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok) -> Result<(), QueryError> {
        if self.eat(&t) {
            Ok(())
        } else {
            Err(self.error(&[&t.to_string()]))
        }
    }

    fn eat_kw(&mut self, k: Keyword) -> bool {
        self.eat(&Tok::Kw(k))
    }

    fn ident(&mut self, what: &str) -> Result<String, QueryError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.at += 1;
                Ok(s)
            }
            _ => Err(self.error(&[what])),
        }
    }

    fn query(&mut self) -> Result<Query, QueryError> {
        let mut q = Query::default();
        while self.eat_kw(Keyword::Match) {
            loop {
                q.matches.push(self.pattern(true)?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        if self.eat_kw(Keyword::Where) {
            q.where_clause = Some(self.expr()?);
        }
        loop {
            if self.eat_kw(Keyword::Create) {
                loop {
                    q.creates.push(self.pattern(false)?);
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
            } else if self.eat_kw(Keyword::Set) {
                loop {
                    let var = self.ident("variable")?;
                    self.expect(Tok::Dot)?;
                    let key = self.ident("property key")?;
                    self.expect(Tok::Eq)?;
                    let value = self.expr()?;
                    q.sets.push(SetItem { var, key, value });
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
            } else if self.peek() == Some(&Tok::Kw(Keyword::Detach)) || self.peek() == Some(&Tok::Kw(Keyword::Delete)) {
                if self.eat_kw(Keyword::Detach) {
                    q.detach = true;
                }
                if !self.eat_kw(Keyword::Delete) {
                    return Err(self.error(&["DELETE"]));
                }
                loop {
                    q.deletes.push(self.ident("variable")?);
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
            } else {
                break;
            }
        }
        if self.eat_kw(Keyword::Return) {
            loop {
                let expr = self.expr()?;
                let alias = if self.eat_kw(Keyword::As) { Some(self.ident("alias")?) } else { None };
                q.returns.push(ReturnItem { expr, alias });
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            if self.eat_kw(Keyword::Limit) {
                match self.bump() {
                    Some(Tok::Int(n)) if n >= 0 => q.limit = Some(n as u64),
                    _ => {
                        self.at -= 1;
                        return Err(self.error(&["non-negative integer"]));
                    }
                }
            }
        }
        self.eat(&Tok::Semicolon);
        if self.peek().is_some() {
            let expected: &[&str] = if q.returns.is_empty() {
                &["MATCH", "WHERE", "CREATE", "SET", "DELETE", "RETURN", "end of input"]
            } else {
                &["`,`", "LIMIT", "end of input"]
            };
            return Err(self.error(expected));
        }
        if q == Query::default() {
            return Err(self.error(&["MATCH", "CREATE", "RETURN"]));
        }
        Ok(q)
    }

    fn pattern(&mut self, matching: bool) -> Result<PathPattern, QueryError> {
        let var = if matches!(self.peek(), Some(Tok::Ident(_))) && self.peek_at(1) == Some(&Tok::Eq) {
            let v = self.ident("variable")?;
            self.at += 1;
            Some(v)
        } else {
            None
        };
        let mut nodes = vec![self.node()?];
        let mut rels = Vec::new();
        while matches!(self.peek(), Some(Tok::Dash) | Some(Tok::LArrow)) {
            rels.push(self.rel(matching)?);
            nodes.push(self.node()?);
        }
        Ok(PathPattern { var, nodes, rels })
    }

    fn node(&mut self) -> Result<NodePat, QueryError> {
        self.expect(Tok::LParen)?;
        let mut n = NodePat::default();
        if let Some(Tok::Ident(v)) = self.peek() {
            n.var = Some(v.clone());
            self.at += 1;
        }
        while self.eat(&Tok::Colon) {
            n.labels.push(self.ident("label")?);
        }
        if self.peek() == Some(&Tok::LBrace) {
            n.props = self.props()?;
        }
        self.expect(Tok::RParen)?;
        Ok(n)
    }

    fn props(&mut self) -> Result<Vec<(String, Expr)>, QueryError> {
        self.expect(Tok::LBrace)?;
        let mut out = Vec::new();
        if self.eat(&Tok::RBrace) {
            return Ok(out);
        }
        loop {
            let k = self.ident("property key")?;
            self.expect(Tok::Colon)?;
            out.push((k, self.expr()?));
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(Tok::RBrace)?;
        Ok(out)
    }

    fn rel(&mut self, matching: bool) -> Result<RelPat, QueryError> {
        let incoming = match self.bump() {
            Some(Tok::LArrow) => true,
            Some(Tok::Dash) => false,
            _ => unreachable!("caller checked"),
        };
        let mut r = RelPat { var: None, rel_type: None, direction: Direction::Both, props: Vec::new() };
        if self.eat(&Tok::LBracket) {
            if let Some(Tok::Ident(v)) = self.peek() {
                r.var = Some(v.clone());
                self.at += 1;
            }
            if self.eat(&Tok::Colon) {
                r.rel_type = Some(self.ident("relationship type")?);
            }
            if self.peek() == Some(&Tok::Star) {
                let what = if matching { "MATCH" } else { "CREATE" };
                return Err(QueryError::Semantic {
                    pos: Some(self.pos()),
                    msg: format!("variable-length relationships are only supported inside shortestPath, not in {what}"),
                });
            }
            if self.peek() == Some(&Tok::LBrace) {
                r.props = self.props()?;
            }
            self.expect(Tok::RBracket)?;
        }
        let outgoing = match self.bump() {
            Some(Tok::Arrow) => true,
            Some(Tok::Dash) => false,
            _ => {
                self.at -= 1;
                return Err(self.error(&["-", "->"]));
            }
        };
        r.direction = match (incoming, outgoing) {
            (false, true) => Direction::Out,
            (true, false) => Direction::In,
            (false, false) => Direction::Both,
            (true, true) => {
                self.at -= 1;
                return Err(self.error(&["-"]));
            }
        };
        Ok(r)
    }

    pub fn expr(&mut self) -> Result<Expr, QueryError> {
        let mut e = self.and()?;
        while self.eat_kw(Keyword::Or) {
            e = Expr::Or(Box::new(e), Box::new(self.and()?));
        }
        Ok(e)
    }

    fn and(&mut self) -> Result<Expr, QueryError> {
        let mut e = self.cmp()?;
        while self.eat_kw(Keyword::And) {
            e = Expr::And(Box::new(e), Box::new(self.cmp()?));
        }
        Ok(e)
    }

    fn cmp(&mut self) -> Result<Expr, QueryError> {
        let lhs = self.unary()?;
        let op = match self.peek() {
            Some(Tok::Eq) => CmpOp::Eq,
            Some(Tok::Neq) => CmpOp::Neq,
            Some(Tok::Lt) => CmpOp::Lt,
            Some(Tok::Gt) => CmpOp::Gt,
            Some(Tok::Le) => CmpOp::Le,
            Some(Tok::Ge) => CmpOp::Ge,
            Some(Tok::Sim) => CmpOp::Sem(CompareSymbol::Similarity),
            Some(Tok::SimTilde) => CmpOp::Sem(CompareSymbol::Similar),
            Some(Tok::NotSim) => CmpOp::Sem(CompareSymbol::NotSimilar),
            Some(Tok::ContainedIn) => CmpOp::Sem(CompareSymbol::In),
            Some(Tok::Contains) => CmpOp::Sem(CompareSymbol::Contains),
            Some(Tok::LArrow) => {
                // `a<-1` is `a < -1`
                self.at += 1;
                let rhs = self.negative_number()?;
                return Ok(Expr::cmp(CmpOp::Lt, lhs, rhs));
            }
            _ => return Ok(lhs),
        };
        self.at += 1;
        let rhs = self.unary()?;
        Ok(Expr::cmp(op, lhs, rhs))
    }

    fn unary(&mut self) -> Result<Expr, QueryError> {
        if self.eat_kw(Keyword::Not) {
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, QueryError> {
        let mut e = self.primary()?;
        loop {
            if self.eat(&Tok::Dot) {
                e = Expr::Prop(Box::new(e), self.ident("property key")?);
            } else if self.eat(&Tok::Arrow) {
                e = Expr::SubProp(Box::new(e), self.ident("sub-property key")?);
            } else {
                return Ok(e);
            }
        }
    }

    fn negative_number(&mut self) -> Result<Expr, QueryError> {
        match self.bump() {
            Some(Tok::Int(i)) => Ok(Expr::Lit(Literal::Int(-i))),
            Some(Tok::Float(x)) => Ok(Expr::Lit(Literal::Float(-x))),
            _ => {
                self.at -= 1;
                Err(self.error(&["number"]))
            }
        }
    }

    fn primary(&mut self) -> Result<Expr, QueryError> {
        let pos = self.pos();
        match self.bump() {
            Some(Tok::Int(i)) => Ok(Expr::Lit(Literal::Int(i))),
            Some(Tok::Float(x)) => Ok(Expr::Lit(Literal::Float(x))),
            Some(Tok::Str(s)) => Ok(Expr::Lit(Literal::Str(s))),
            Some(Tok::Kw(Keyword::True)) => Ok(Expr::Lit(Literal::Bool(true))),
            Some(Tok::Kw(Keyword::False)) => Ok(Expr::Lit(Literal::Bool(false))),
            Some(Tok::Param(p)) => Ok(Expr::Param(p)),
            Some(Tok::Dash) => self.negative_number(),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                if name.eq_ignore_ascii_case("blob") && self.peek() == Some(&Tok::Dot) {
                    if let Some(Tok::Ident(f)) = self.peek_at(1) {
                        let src = match f.to_ascii_lowercase().as_str() {
                            "fromurl" => Some(BlobSource::Url),
                            "fromfile" => Some(BlobSource::File),
                            "frombytes" => Some(BlobSource::Bytes),
                            _ => None,
                        };
                        if let (Some(src), Some(Tok::LParen)) = (src, self.peek_at(2)) {
                            self.at += 3;
                            let arg = self.expr()?;
                            self.expect(Tok::RParen)?;
                            return Ok(Expr::BlobFn(src, Box::new(arg)));
                        }
                    }
                }
                if name.eq_ignore_ascii_case("shortestpath") && self.peek() == Some(&Tok::LParen) {
                    self.at += 1;
                    return self.shortest_path(pos);
                }
                if self.peek() == Some(&Tok::Colon) {
                    self.at += 1;
                    let label = self.ident("label")?;
                    return Ok(Expr::HasLabel(name, label));
                }
                Ok(Expr::Var(name))
            }
            _ => {
                self.at -= 1;
                Err(self.error(&["expression"]))
            }
        }
    }

    fn shortest_path(&mut self, pos: Pos) -> Result<Expr, QueryError> {
        let endpoint = |p: &mut Parser| -> Result<String, QueryError> {
            p.expect(Tok::LParen)?;
            let v = p.ident("variable")?;
            p.expect(Tok::RParen)?;
            Ok(v)
        };
        let from = endpoint(self)?;
        self.expect(Tok::Dash)?;
        self.expect(Tok::LBracket)?;
        let rel_type = if self.eat(&Tok::Colon) { Some(self.ident("relationship type")?) } else { None };
        self.expect(Tok::Star)?;
        let int = |p: &mut Parser| match p.bump() {
            Some(Tok::Int(i)) if (0..=u32::MAX as i64).contains(&i) => Ok(i as u32),
            _ => {
                p.at -= 1;
                Err(p.error(&["hop count"]))
            }
        };
        let (min_hops, max_hops) = if self.eat(&Tok::DotDot) {
            (1, int(self)?)
        } else if matches!(self.peek(), Some(Tok::Int(_))) {
            let a = int(self)?;
            if self.eat(&Tok::DotDot) {
                (a, int(self)?)
            } else {
                (a, a)
            }
        } else {
            return Err(QueryError::Semantic { pos: Some(pos), msg: "shortestPath needs a bounded hop range".into() });
        };
        if min_hops > max_hops {
            return Err(QueryError::Semantic { pos: Some(pos), msg: format!("empty hop range {min_hops}..{max_hops}") });
        }
        self.expect(Tok::RBracket)?;
        if self.peek() == Some(&Tok::Arrow) {
            return Err(QueryError::Semantic { pos: Some(self.pos()), msg: "shortestPath patterns are undirected".into() });
        }
        self.expect(Tok::Dash)?;
        let to = endpoint(self)?;
        self.expect(Tok::RParen)?;
        Ok(Expr::ShortestPath(ShortestPathPat { from, to, rel_type, min_hops, max_hops }))
    }
}

/// Parses a standalone expression.
pub fn parse_expr(text: &str) -> Result<Expr, QueryError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, at: 0, end: end_pos(text) };
    let e = p.expr()?;
    if p.peek().is_some() {
        return Err(p.error(&["end of input"]));
    }
    Ok(e)
}
