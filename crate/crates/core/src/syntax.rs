//! Text formats for schemas with FDs, fact files, queries and answer tuples,
//! with printers that the parsers read back unchanged.
//!
//! ```text
//! # schema file
//! relation Employee(id, name, dept)
//! fd Employee: id -> name dept
//!
//! # facts file
//! Employee(1, Bob, HR)
//! Employee(1, 'Bob Jr.', IT)
//!
//! # query file
//! Ans(x) :- Employee(x, n, 'HR').
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{
    is_identifier, is_numeral, Atom, ConjunctiveQuery, Constant, Database, Fact, Fd, FdSet, RelationDecl, Schema,
    Term, Variable,
};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Word(String),
    Quoted(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Colon,
    Turnstile,
    Arrow,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "`{w}`"),
            Tok::Quoted(q) => write!(f, "'{q}'"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Turnstile => f.write_str("`:-`"),
            Tok::Arrow => f.write_str("`->`"),
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Attaches a line number to engine errors raised while building values.
fn at_line(line: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Parse { .. } => e,
        other => parse_err(line, other.to_string()),
    }
}

/// Splits `text` into tokens tagged with their line. `#` starts a comment
/// that runs to the end of the line.
fn lex(text: &str) -> Result<Vec<(usize, Tok)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let mut chars = line.chars().peekable();
        while let Some(&c) = chars.peek() {
            match c {
                '#' => break,
                c if c.is_whitespace() => {
                    chars.next();
                }
                '(' | ')' | ',' | '.' => {
                    chars.next();
                    out.push((
                        lineno,
                        match c {
                            '(' => Tok::LParen,
                            ')' => Tok::RParen,
                            ',' => Tok::Comma,
                            _ => Tok::Dot,
                        },
                    ));
                }
                ':' => {
                    chars.next();
                    if chars.peek() == Some(&'-') {
                        chars.next();
                        out.push((lineno, Tok::Turnstile));
                    } else {
                        out.push((lineno, Tok::Colon));
                    }
                }
                '-' => {
                    chars.next();
                    if chars.next() != Some('>') {
                        return Err(parse_err(lineno, "stray `-`; expected `->`"));
                    }
                    out.push((lineno, Tok::Arrow));
                }
                '\'' => {
                    chars.next();
                    let mut s = String::new();
                    loop {
                        match chars.next() {
                            Some('\'') if chars.peek() == Some(&'\'') => {
                                chars.next();
                                s.push('\'');
                            }
                            Some('\'') => break,
                            Some(ch) => s.push(ch),
                            None => return Err(parse_err(lineno, "unterminated quoted string")),
                        }
                    }
                    out.push((lineno, Tok::Quoted(s)));
                }
                c if c.is_ascii_alphanumeric() || c == '_' => {
                    let mut w = String::new();
                    while let Some(&ch) = chars.peek() {
                        if !(ch.is_ascii_alphanumeric() || ch == '_') {
                            break;
                        }
                        w.push(ch);
                        chars.next();
                    }
                    out.push((lineno, Tok::Word(w)));
                }
                other => return Err(parse_err(lineno, format!("unexpected character `{other}`"))),
            }
        }
    }
    Ok(out)
}

struct Cursor {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    last_line: usize,
}

impl Cursor {
    fn new(toks: Vec<(usize, Tok)>, last_line: usize) -> Self {
        Cursor { toks, pos: 0, last_line }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn line(&self) -> usize {
        self.toks.get(self.pos).map_or(self.last_line, |(l, _)| *l)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn unexpected(&self, wanted: &str) -> Error {
        match self.peek() {
            Some(t) => parse_err(self.line(), format!("expected {wanted}, found {t}")),
            None => parse_err(self.line(), format!("expected {wanted}, found end of input")),
        }
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected(wanted))
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn identifier(&mut self, what: &str) -> Result<String> {
        match self.peek() {
            Some(Tok::Word(w)) if is_identifier(w) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn value(&mut self) -> Result<Constant> {
        match self.peek() {
            Some(Tok::Word(w) | Tok::Quoted(w)) => {
                let c = Constant::new(w);
                self.pos += 1;
                Ok(c)
            }
            _ => Err(self.unexpected("a value")),
        }
    }

    /// `( item, item, ... )`, possibly empty when `allow_empty` is set.
    fn list<T>(&mut self, allow_empty: bool, mut item: impl FnMut(&mut Self) -> Result<T>) -> Result<Vec<T>> {
        self.expect(Tok::LParen, "`(`")?;
        let mut items = Vec::new();
        if allow_empty && self.eat(&Tok::RParen) {
            return Ok(items);
        }
        loop {
            items.push(item(self)?);
            if self.eat(&Tok::RParen) {
                return Ok(items);
            }
            self.expect(Tok::Comma, "`,` or `)`")?;
        }
    }
}

type Lines = Vec<(usize, Vec<(usize, Tok)>)>;

/// Tokens grouped by source line, in order.
fn lines_of(text: &str) -> Result<Lines> {
    let mut grouped: BTreeMap<usize, Vec<(usize, Tok)>> = BTreeMap::new();
    for (line, tok) in lex(text)? {
        grouped.entry(line).or_default().push((line, tok));
    }
    Ok(grouped.into_iter().collect())
}

/// Reads `relation R(A, ...)` and `fd R: A ... -> B ...` lines.
pub fn parse_schema_fds(text: &str) -> Result<(Arc<Schema>, FdSet)> {
    let mut schema = Schema::new();
    let mut pending: Vec<(usize, String, Vec<String>, Vec<String>)> = Vec::new();
    for (line, toks) in lines_of(text)? {
        let mut cur = Cursor::new(toks, line);
        match cur.next() {
            Some(Tok::Word(w)) if w == "relation" => {
                let name = cur.identifier("a relation name")?;
                let attrs = cur.list(false, |c| c.identifier("an attribute name"))?;
                let decl = RelationDecl::new(&name, &attrs).map_err(at_line(line))?;
                schema.add(decl).map_err(at_line(line))?;
            }
            Some(Tok::Word(w)) if w == "fd" => {
                let rel = cur.identifier("a relation name")?;
                cur.expect(Tok::Colon, "`:`")?;
                let mut lhs = Vec::new();
                while let Some(Tok::Word(_)) = cur.peek() {
                    lhs.push(cur.identifier("an attribute name")?);
                }
                cur.expect(Tok::Arrow, "an attribute name or `->`")?;
                let mut rhs = Vec::new();
                while !cur.at_end() {
                    rhs.push(cur.identifier("an attribute name")?);
                }
                pending.push((line, rel, lhs, rhs));
            }
            _ => return Err(parse_err(line, "expected `relation` or `fd`")),
        }
        if !cur.at_end() {
            return Err(cur.unexpected("end of line"));
        }
    }
    let mut fds = Vec::with_capacity(pending.len());
    for (line, rel, lhs, rhs) in pending {
        fds.push(Fd::named(&schema, &rel, &lhs, &rhs).map_err(at_line(line))?);
    }
    let sigma = FdSet::new(&schema, fds)?;
    Ok((Arc::new(schema), sigma))
}

/// The schema file for `schema` and `sigma`: relations first, then FDs.
pub fn print_schema_fds(schema: &Schema, sigma: &FdSet) -> String {
    let mut out = String::new();
    for decl in schema.relations() {
        let attrs: Vec<&str> = decl.attributes().iter().map(|a| &**a).collect();
        out.push_str(&format!("relation {}({})\n", decl.name(), attrs.join(", ")));
    }
    for fd in sigma.fds() {
        out.push_str(&format!("fd {}\n", fd.display(schema)));
    }
    out
}

/// One fact `R(v1, ..., vn)` per line; a trailing `.` is accepted.
pub fn parse_facts(text: &str, schema: &Arc<Schema>) -> Result<Database> {
    let mut db = Database::new(Arc::clone(schema));
    for (line, toks) in lines_of(text)? {
        let mut cur = Cursor::new(toks, line);
        let rel = cur.identifier("a relation name")?;
        let values = cur.list(false, Cursor::value)?;
        cur.eat(&Tok::Dot);
        if !cur.at_end() {
            return Err(cur.unexpected("end of line"));
        }
        db.insert(Fact::new(rel, values)).map_err(at_line(line))?;
    }
    Ok(db)
}

/// The facts file of `db`, sorted.
pub fn print_facts(db: &Database) -> String {
    db.to_string()
}

/// A rule `Ans(x̄) :- body.` before the head is grounded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedQuery {
    pub head: Vec<Variable>,
    pub body: ConjunctiveQuery,
}

impl ParsedQuery {
    pub fn is_boolean(&self) -> bool {
        self.head.is_empty()
    }

    /// Substitutes `answer` for the head variables, position by position.
    pub fn ground(&self, answer: &[Constant]) -> Result<ConjunctiveQuery> {
        if answer.len() != self.head.len() {
            return Err(Error::Precondition(format!(
                "the query head has {} variables but the answer tuple has {} values",
                self.head.len(),
                answer.len()
            )));
        }
        let mut binding: BTreeMap<&Variable, &Constant> = BTreeMap::new();
        for (x, c) in self.head.iter().zip(answer) {
            if let Some(prev) = binding.insert(x, c) {
                if prev != c {
                    return Err(Error::Precondition(format!(
                        "head variable `{x}` receives both {prev} and {c}"
                    )));
                }
            }
        }
        Ok(binding.into_iter().fold(self.body.clone(), |q, (x, c)| q.substitute(x, c)))
    }

    /// The Boolean query; a nonempty head must be grounded with [`Self::ground`].
    pub fn into_boolean(self) -> Result<ConjunctiveQuery> {
        if self.is_boolean() {
            Ok(self.body)
        } else {
            Err(Error::Precondition(format!(
                "the query has {} answer variables; supply an answer tuple",
                self.head.len()
            )))
        }
    }
}

impl fmt::Display for ParsedQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let head: Vec<&str> = self.head.iter().map(Variable::name).collect();
        let body = self.body.to_string();
        write!(f, "Ans({}){}", head.join(", "), body.strip_prefix("Ans()").unwrap_or(&body))
    }
}

fn term(cur: &mut Cursor) -> Result<Term> {
    let t = match cur.peek() {
        Some(Tok::Quoted(s)) => Term::Const(Constant::new(s)),
        Some(Tok::Word(w)) if is_numeral(w) => Term::Const(Constant::new(w)),
        Some(Tok::Word(w)) if is_identifier(w) => Term::var(w),
        Some(Tok::Word(w)) => {
            return Err(parse_err(
                cur.line(),
                format!("`{w}` is neither a variable nor a numeral; quote it to make it a constant"),
            ))
        }
        _ => return Err(cur.unexpected("a term")),
    };
    cur.pos += 1;
    Ok(t)
}

/// Parses `Ans(x, ...) :- R(x, 'c', y), S(y).`
pub fn parse_query(text: &str, schema: &Schema) -> Result<ParsedQuery> {
    let toks = lex(text)?;
    let last = text.lines().count().max(1);
    let mut cur = Cursor::new(toks, last);
    match cur.peek() {
        Some(Tok::Word(w)) if w == "Ans" => {
            cur.next();
        }
        _ => return Err(cur.unexpected("`Ans`")),
    }
    let head_line = cur.line();
    let head = cur.list(true, |c| c.identifier("a head variable").map(Variable::new))?;
    cur.expect(Tok::Turnstile, "`:-`")?;
    if cur.peek() == Some(&Tok::Dot) {
        return Err(parse_err(cur.line(), "the query body is empty"));
    }
    let mut atoms = Vec::new();
    loop {
        let line = cur.line();
        let rel = cur.identifier("a relation name")?;
        let terms = cur.list(false, term)?;
        let atom = Atom::new(rel, terms);
        let decl = schema.relation(atom.relation()).map_err(at_line(line))?;
        if decl.arity() != atom.terms().len() {
            return Err(parse_err(
                line,
                format!(
                    "relation `{}` expects {} terms, got {}",
                    decl.name(),
                    decl.arity(),
                    atom.terms().len()
                ),
            ));
        }
        atoms.push(atom);
        if cur.eat(&Tok::Dot) {
            break;
        }
        cur.expect(Tok::Comma, "`,` or `.`")?;
    }
    if !cur.at_end() {
        return Err(cur.unexpected("end of input"));
    }
    let body = ConjunctiveQuery::new(schema, atoms).map_err(at_line(head_line))?;
    let vars = body.variables();
    if let Some(x) = head.iter().find(|x| !vars.contains(*x)) {
        return Err(parse_err(head_line, format!("head variable `{x}` does not occur in the body")));
    }
    Ok(ParsedQuery { head, body })
}

/// Parses a comma-separated answer tuple such as `1, 'Bob Jr.', HR`.
pub fn parse_answer(text: &str) -> Result<Vec<Constant>> {
    let mut cur = Cursor::new(lex(text)?, 1);
    let mut values = Vec::new();
    if cur.at_end() {
        return Ok(values);
    }
    loop {
        values.push(cur.value()?);
        if cur.at_end() {
            return Ok(values);
        }
        cur.expect(Tok::Comma, "`,`")?;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EMPLOYEE_SCHEMA: &str = "# Example employees\nrelation Employee(id, name, dept)\nfd Employee: id -> name dept\n";
    const EMPLOYEE_FACTS: &str = "Employee(1, Bob, HR)\nEmployee(1, Bob, IT)\nEmployee(2, Alice, IT)\nEmployee(2, Tim, IT)\n";

    #[test]
    fn schema_with_one_fd() {
        let (schema, sigma) = parse_schema_fds("relation R(A,B)\nfd R: A -> B").unwrap();
        assert_eq!(schema.relation("R").unwrap().arity(), 2);
        assert_eq!(sigma.len(), 1);
        assert_eq!(sigma.fds()[0].display(&schema), "R: A -> B");
    }

    #[test]
    fn fd_on_undeclared_relation() {
        assert!(matches!(parse_schema_fds("fd R: A -> B"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn employee_schema() {
        let (schema, sigma) = parse_schema_fds(EMPLOYEE_SCHEMA).unwrap();
        let fd = &sigma.fds()[0];
        let decl = schema.relation("Employee").unwrap();
        assert_eq!(decl.names(fd.lhs()), ["id"]);
        assert_eq!(decl.names(fd.rhs()), ["name", "dept"]);
    }

    #[test]
    fn schema_errors_carry_lines() {
        let cases = [
            ("relation R(A)\nrelation R(B)", 2),
            ("relation R(A, A)", 1),
            ("relation R(A)\n\nfd R: B -> A", 3),
            ("relation R(A)\nfd R: A B", 2),
            ("relation R()", 1),
            ("relations R(A)", 1),
            ("relation R(A) x", 1),
        ];
        for (text, line) in cases {
            match parse_schema_fds(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn trivial_fds_parse() {
        let (_, sigma) = parse_schema_fds("relation R(A, B)\nfd R: A ->").unwrap();
        assert!(sigma.fds()[0].rhs().is_empty());
    }

    #[test]
    fn fd_with_empty_lhs() {
        let (schema, sigma) = parse_schema_fds("relation R(A, B)\nfd R: -> B").unwrap();
        assert!(sigma.fds()[0].lhs().is_empty());
        let printed = print_schema_fds(&schema, &sigma);
        assert_eq!(parse_schema_fds(&printed).unwrap().1, sigma);
    }

    #[test]
    fn employee_facts() {
        let (schema, _) = parse_schema_fds(EMPLOYEE_SCHEMA).unwrap();
        assert_eq!(parse_facts(EMPLOYEE_FACTS, &schema).unwrap().len(), 4);
        assert!(parse_facts("", &schema).unwrap().is_empty());
        assert_eq!(parse_facts("Employee(1, Bob, HR)\nEmployee(1,Bob,HR).", &schema).unwrap().len(), 1);
    }

    #[test]
    fn quoted_values() {
        let (schema, _) = parse_schema_fds(EMPLOYEE_SCHEMA).unwrap();
        let db = parse_facts("Employee('1', 'O''Brien', 'R & D')", &schema).unwrap();
        let f = db.facts().next().unwrap();
        assert_eq!(f.value(0), &Constant::new("1"));
        assert_eq!(f.value(1), &Constant::new("O'Brien"));
        assert_eq!(f.to_string(), "Employee(1, 'O''Brien', 'R & D')");
    }

    #[test]
    fn fact_errors_carry_lines() {
        let (schema, _) = parse_schema_fds(EMPLOYEE_SCHEMA).unwrap();
        for (text, line) in [
            ("Employee(1, Bob, HR)\nEmployee(1, Bob)", 2),
            ("\nManager(1)", 2),
            ("Employee(1, Bob, 'HR)", 1),
            ("Employee(1, Bob, HR) Employee(2, Al, IT)", 1),
            ("Employee(1, Bob, HR", 1),
        ] {
            match parse_facts(text, &schema) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    fn rs_schema() -> Arc<Schema> {
        parse_schema_fds("relation R(A, B, C)\nrelation S(A)").unwrap().0
    }

    #[test]
    fn boolean_query() {
        let q = parse_query("Ans() :- R(x,'a',y).", &rs_schema()).unwrap();
        assert!(q.is_boolean());
        let q = q.into_boolean().unwrap();
        assert_eq!(q.len(), 1);
        assert_eq!(q.atoms()[0].terms()[1], Term::constant("a"));
        assert_eq!(q.variables().len(), 2);
    }

    #[test]
    fn numerals_are_constants() {
        let q = parse_query("Ans() :- R(x, 42, _y), S(x).", &rs_schema()).unwrap().body;
        assert_eq!(q.atoms()[0].terms()[1], Term::constant("42"));
        assert_eq!(q.atoms()[0].terms()[2], Term::var("_y"));
    }

    #[test]
    fn grounding_the_head() {
        let pq = parse_query("Ans(x, y) :- R(x, 'a', y), S(y).", &rs_schema()).unwrap();
        assert!(pq.clone().into_boolean().is_err());
        let q = pq.ground(&parse_answer("1, 'two words'").unwrap()).unwrap();
        assert!(q.variables().is_empty());
        assert_eq!(q.to_string(), "Ans() :- R(1, 'a', 'two words'), S('two words').");
        assert!(pq.ground(&[Constant::new("1")]).is_err());
    }

    #[test]
    fn repeated_head_variable() {
        let pq = parse_query("Ans(x, x) :- S(x).", &rs_schema()).unwrap();
        assert!(pq.ground(&[Constant::new("a"), Constant::new("a")]).is_ok());
        assert!(pq.ground(&[Constant::new("a"), Constant::new("b")]).is_err());
    }

    #[test]
    fn query_errors() {
        let schema = rs_schema();
        for text in [
            "Ans() :- .",
            "Ans(z) :- S(x).",
            "Ans() :- S(x)",
            "Ans() :- T(x).",
            "Ans() :- S(x, y).",
            "Ans() :- S(3x).",
            "Ans() S(x).",
            "Q() :- S(x).",
            "Ans() :- S(x). S(y).",
            "Ans('a') :- S(x).",
        ] {
            assert!(matches!(parse_query(text, &schema), Err(Error::Parse { .. })), "{text}");
        }
    }

    #[test]
    fn multi_line_query() {
        let q = parse_query("# q\nAns() :-\n  R(x, y, z),\n  S(z).\n", &rs_schema()).unwrap();
        assert_eq!(q.body.len(), 2);
        match parse_query("Ans() :-\n R(x, y, z),\n T(z).", &rs_schema()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn answers() {
        assert_eq!(parse_answer("").unwrap(), Vec::<Constant>::new());
        assert_eq!(parse_answer("a,'b c', 3").unwrap().len(), 3);
        assert!(parse_answer("a b").is_err());
        assert!(parse_answer("a,").is_err());
    }

    #[test]
    fn printed_query_reparses() {
        let schema = rs_schema();
        let pq = parse_query("Ans(y) :- R(x, 'it''s', y), S('7').", &schema).unwrap();
        let printed = pq.to_string();
        assert_eq!(printed, "Ans(y) :- R(x, 'it''s', y), S(7).");
        assert_eq!(parse_query(&printed, &schema).unwrap(), pq);
    }
}
