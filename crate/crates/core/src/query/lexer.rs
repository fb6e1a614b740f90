use std::fmt;

use super::QueryError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keyword {
    Match,
    Where,
    Return,
    Create,
    Set,
    Delete,
    Detach,
    And,
    Or,
    Not,
    As,
    Limit,
    True,
    False,
}

impl Keyword {
    fn from_ident(s: &str) -> Option<Self> {
        Some(match s.to_ascii_uppercase().as_str() {
            "MATCH" => Keyword::Match,
            "WHERE" => Keyword::Where,
            "RETURN" => Keyword::Return,
            "CREATE" => Keyword::Create,
            "SET" => Keyword::Set,
            "DELETE" => Keyword::Delete,
            "DETACH" => Keyword::Detach,
            "AND" => Keyword::And,
            "OR" => Keyword::Or,
            "NOT" => Keyword::Not,
            "AS" => Keyword::As,
            "LIMIT" => Keyword::Limit,
            "TRUE" => Keyword::True,
            "FALSE" => Keyword::False,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Kw(Keyword),
    Int(i64),
    Float(f64),
    Str(String),
    Param(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Dot,
    DotDot,
    Colon,
    Semicolon,
    Star,
    Pipe,
    Eq,
    Neq,
    Lt,
    Gt,
    Le,
    Ge,
    Dash,
    /// `->`
    Arrow,
    /// `<-`
    LArrow,
    /// `::`
    Sim,
    /// `~:`
    SimTilde,
    /// `!:`
    NotSim,
    /// `<:`
    ContainedIn,
    /// `>:`
    Contains,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Kw(k) => write!(f, "{}", format!("{k:?}").to_uppercase()),
            Tok::Int(i) => write!(f, "{i}"),
            Tok::Float(x) => write!(f, "{x:?}"),
            Tok::Str(s) => write!(f, "'{s}'"),
            Tok::Param(p) => write!(f, "${p}"),
            other => f.write_str(match other {
                Tok::LParen => "(",
                Tok::RParen => ")",
                Tok::LBracket => "[",
                Tok::RBracket => "]",
                Tok::LBrace => "{",
                Tok::RBrace => "}",
                Tok::Comma => ",",
                Tok::Dot => ".",
                Tok::DotDot => "..",
                Tok::Colon => ":",
                Tok::Semicolon => ";",
                Tok::Star => "*",
                Tok::Pipe => "|",
                Tok::Eq => "=",
                Tok::Neq => "<>",
                Tok::Lt => "<",
                Tok::Gt => ">",
                Tok::Le => "<=",
                Tok::Ge => ">=",
                Tok::Dash => "-",
                Tok::Arrow => "->",
                Tok::LArrow => "<-",
                Tok::Sim => "::",
                Tok::SimTilde => "~:",
                Tok::NotSim => "!:",
                Tok::ContainedIn => "<:",
                Tok::Contains => ">:",
                _ => unreachable!(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

/// Two-character operators, longest match first.
const PAIRS: [(&str, Tok); 11] = [
    ("::", Tok::Sim),
    ("~:", Tok::SimTilde),
    ("!:", Tok::NotSim),
    ("<:", Tok::ContainedIn),
    (">:", Tok::Contains),
    ("->", Tok::Arrow),
    ("<-", Tok::LArrow),
    ("<>", Tok::Neq),
    ("<=", Tok::Le),
    (">=", Tok::Ge),
    ("..", Tok::DotDot),
];

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Splits query text into tokens. A quoted string whose whole content is
/// `$name` is read as the parameter `name`.
pub fn tokenize(text: &str) -> Result<Vec<Token>, QueryError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out: Vec<Token> = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let err = |pos: Pos, msg: String| QueryError::Lex { pos, msg };

    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        let advance = |n: usize, i: &mut usize, col: &mut u32| {
            *i += n;
            *col += n as u32;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i, &mut col);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let next = chars.get(i + 1).copied();
        if let Some(n) = next {
            let pair: String = [c, n].iter().collect();
            if let Some((_, t)) = PAIRS.iter().find(|(s, _)| *s == pair) {
                out.push(Token { tok: t.clone(), pos });
                advance(2, &mut i, &mut col);
                continue;
            }
        }
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            ',' => Some(Tok::Comma),
            ';' => Some(Tok::Semicolon),
            '*' => Some(Tok::Star),
            '|' => Some(Tok::Pipe),
            '=' => Some(Tok::Eq),
            '<' => Some(Tok::Lt),
            '>' => Some(Tok::Gt),
            '-' => Some(Tok::Dash),
            '.' => Some(Tok::Dot),
            ':' => {
                let ok = matches!(
                    out.last().map(|t| &t.tok),
                    Some(Tok::Ident(_)) | Some(Tok::LParen) | Some(Tok::LBracket)
                );
                if !ok {
                    return Err(err(pos, "`:` must follow a variable, `(` or `[`".into()));
                }
                Some(Tok::Colon)
            }
            _ => None,
        };
        if let Some(t) = single {
            out.push(Token { tok: t, pos });
            advance(1, &mut i, &mut col);
            continue;
        }
        if c == '\'' {
            let mut s = String::new();
            let mut j = i + 1;
            loop {
                match chars.get(j) {
                    None => return Err(err(pos, "unterminated string".into())),
                    Some('\'') => break,
                    Some('\\') => {
                        let e = chars.get(j + 1).ok_or_else(|| err(pos, "unterminated string".into()))?;
                        s.push(match e {
                            'n' => '\n',
                            't' => '\t',
                            other => *other,
                        });
                        j += 2;
                    }
                    Some('\n') => return Err(err(pos, "newline in string".into())),
                    Some(ch) => {
                        s.push(*ch);
                        j += 1;
                    }
                }
            }
            let tok = match s.strip_prefix('$') {
                Some(p) if !p.is_empty() && p.chars().next().is_some_and(is_ident_start) && p.chars().all(is_ident_char) => {
                    Tok::Param(p.to_string())
                }
                _ => Tok::Str(s),
            };
            out.push(Token { tok, pos });
            advance(j + 1 - i, &mut i, &mut col);
            continue;
        }
        if c == '$' {
            let mut j = i + 1;
            while j < chars.len() && is_ident_char(chars[j]) {
                j += 1;
            }
            if j == i + 1 {
                return Err(err(pos, "expected parameter name after `$`".into()));
            }
            out.push(Token { tok: Tok::Param(chars[i + 1..j].iter().collect()), pos });
            advance(j - i, &mut i, &mut col);
            continue;
        }
        if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let mut float = false;
            if chars.get(j) == Some(&'.') && chars.get(j + 1).is_some_and(|d| d.is_ascii_digit()) {
                float = true;
                j += 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
            }
            if matches!(chars.get(j), Some('e') | Some('E')) {
                let mut k = j + 1;
                if matches!(chars.get(k), Some('+') | Some('-')) {
                    k += 1;
                }
                if chars.get(k).is_some_and(|d| d.is_ascii_digit()) {
                    float = true;
                    j = k;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                }
            }
            let s: String = chars[i..j].iter().collect();
            let tok = if float {
                Tok::Float(s.parse().map_err(|_| err(pos, format!("bad number {s}")))?)
            } else {
                Tok::Int(s.parse().map_err(|_| err(pos, format!("integer {s} out of range")))?)
            };
            out.push(Token { tok, pos });
            advance(j - i, &mut i, &mut col);
            continue;
        }
        if is_ident_start(c) || c == '`' {
            let (name, len) = if c == '`' {
                let end = chars[i + 1..].iter().position(|ch| *ch == '`').ok_or_else(|| err(pos, "unterminated `name`".into()))?;
                (chars[i + 1..i + 1 + end].iter().collect::<String>(), end + 2)
            } else {
                let mut j = i;
                while j < chars.len() && is_ident_char(chars[j]) {
                    j += 1;
                }
                (chars[i..j].iter().collect::<String>(), j - i)
            };
            let tok = match Keyword::from_ident(&name) {
                Some(k) if c != '`' => Tok::Kw(k),
                _ => Tok::Ident(name),
            };
            out.push(Token { tok, pos });
            advance(len, &mut i, &mut col);
            continue;
        }
        return Err(err(pos, format!("unexpected character {c:?}")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn similarity_tokens() {
        assert_eq!(
            toks("n.photo ~: m.photo"),
            vec![
                Tok::Ident("n".into()),
                Tok::Dot,
                Tok::Ident("photo".into()),
                Tok::SimTilde,
                Tok::Ident("m".into()),
                Tok::Dot,
                Tok::Ident("photo".into()),
            ]
        );
        assert!(toks("").is_empty());
    }

    #[test]
    fn maximal_munch_and_bare_colon() {
        assert_eq!(toks("a <:b"), vec![Tok::Ident("a".into()), Tok::ContainedIn, Tok::Ident("b".into())]);
        match tokenize("a < :b") {
            Err(QueryError::Lex { pos, .. }) => assert_eq!(pos, Pos { line: 1, col: 5 }),
            other => panic!("{other:?}"),
        }
        assert_eq!(toks("x::y")[1], Tok::Sim);
        assert_eq!(toks("a->b")[1], Tok::Arrow);
        assert_eq!(toks("a!:b")[1], Tok::NotSim);
        assert_eq!(toks("a>:b")[1], Tok::Contains);
    }

    #[test]
    fn ranges_keywords_params_strings() {
        assert_eq!(toks("1..3"), vec![Tok::Int(1), Tok::DotDot, Tok::Int(3)]);
        assert_eq!(toks("1.5 2e3"), vec![Tok::Float(1.5), Tok::Float(2000.0)]);
        assert_eq!(toks("match MaTcH"), vec![Tok::Kw(Keyword::Match), Tok::Kw(Keyword::Match)]);
        assert_eq!(toks("$name '$url' 'it\\'s' '$ x'"), vec![
            Tok::Param("name".into()),
            Tok::Param("url".into()),
            Tok::Str("it's".into()),
            Tok::Str("$ x".into()),
        ]);
        assert_eq!(toks("a // comment\n b"), vec![Tok::Ident("a".into()), Tok::Ident("b".into())]);
    }

    #[test]
    fn positions_track_lines() {
        let t = tokenize("MATCH (n)\n  RETURN n").unwrap();
        assert_eq!(t[4].pos, Pos { line: 2, col: 3 });
        assert!(matches!(tokenize("'abc"), Err(QueryError::Lex { .. })));
        assert!(matches!(tokenize("a # b"), Err(QueryError::Lex { .. })));
    }
}
