//! Recursive-descent parser. Parsing stops at the first offending token.

use super::ast::*;
use super::diag::{Diagnostic, Loc};
use super::lexer::{lex, Tok, Token};
use crate::engine::ir::{BinOp, UnOp};

pub const KEYWORDS: &[&str] = &[
    "model", "const", "extern", "record", "state", "init", "halt", "when", "timestep", "law",
    "then", "let", "if", "else", "for", "in", "true", "false", "random",
];

pub fn parse(src: &str) -> Result<ModelAst, Vec<Diagnostic>> {
    let toks = lex(src).map_err(|d| vec![d])?;
    let mut p = Parser { toks, pos: 0 };
    p.model().map_err(|d| vec![d])
}

/// Parses a standalone expression, such as an observable.
pub fn parse_expr(src: &str) -> Result<ExprAst, Vec<Diagnostic>> {
    let toks = lex(src).map_err(|d| vec![d])?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr(false).map_err(|d| vec![d])?;
    p.expect(&Tok::Eof, "end of expression").map_err(|d| vec![d])?;
    Ok(e)
}

type PResult<T> = Result<T, Diagnostic>;

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn loc(&self) -> Loc {
        self.toks[self.pos].loc
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> PResult<T> {
        Err(Diagnostic::error(
            "Syntax",
            self.loc(),
            format!("expected {expected}, found {}", self.peek().describe()),
        ))
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok, what: &str) -> PResult<Loc> {
        if self.peek() == t {
            Ok(self.advance().loc)
        } else {
            self.error(what)
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<Loc> {
        if self.is_kw(kw) {
            Ok(self.advance().loc)
        } else {
            self.error(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self) -> PResult<Ident> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let loc = self.advance().loc;
                Ok(Ident::new(s, loc))
            }
            _ => self.error("an identifier"),
        }
    }

    fn model(&mut self) -> PResult<ModelAst> {
        self.expect_kw("model")?;
        let name = self.ident()?;
        self.expect(&Tok::LBrace, "`{`")?;
        let mut items = Vec::new();
        while !self.eat(&Tok::RBrace) {
            items.push(self.item()?);
        }
        self.expect(&Tok::Eof, "end of input")?;
        Ok(ModelAst { name, items })
    }

    fn item(&mut self) -> PResult<Item> {
        let loc = self.loc();
        let kw = match self.peek() {
            Tok::Ident(s) => s.clone(),
            _ => return self.error("a model item"),
        };
        match kw.as_str() {
            "const" => {
                self.advance();
                let name = self.ident()?;
                self.expect(&Tok::Colon, "`:`")?;
                let ty = self.ty()?;
                self.expect(&Tok::Assign, "`=`")?;
                let value = self.expr(false)?;
                self.expect(&Tok::Semi, "`;`")?;
                Ok(Item::Const { name, ty, value })
            }
            "extern" => {
                self.advance();
                self.expect_kw("const")?;
                let name = self.ident()?;
                self.expect(&Tok::Colon, "`:`")?;
                let ty = self.ty()?;
                self.expect(&Tok::Semi, "`;`")?;
                Ok(Item::Extern { name, ty })
            }
            "record" => {
                self.advance();
                let name = self.ident()?;
                self.expect(&Tok::LBrace, "`{`")?;
                let mut fields = Vec::new();
                while !self.eat(&Tok::RBrace) {
                    let f = self.ident()?;
                    self.expect(&Tok::Colon, "`:`")?;
                    let t = self.ty()?;
                    self.expect(&Tok::Semi, "`;`")?;
                    fields.push((f, t));
                }
                Ok(Item::Record { name, fields })
            }
            "state" => {
                self.advance();
                self.expect(&Tok::LBrace, "`{`")?;
                let mut fields = Vec::new();
                let mut time = None;
                while !self.eat(&Tok::RBrace) {
                    if matches!(self.peek(), Tok::Ident(s) if s == "time") {
                        self.advance();
                        self.expect_kw("in")?;
                        self.expect(&Tok::LBracket, "`[`")?;
                        let lo = self.expr(false)?;
                        self.expect(&Tok::Comma, "`,`")?;
                        let hi = self.expr(false)?;
                        self.expect(&Tok::RBracket, "`]`")?;
                        self.expect(&Tok::Semi, "`;`")?;
                        time = Some((lo, hi));
                        continue;
                    }
                    let name = self.ident()?;
                    self.expect(&Tok::Colon, "`:`")?;
                    let ty = self.ty()?;
                    let domain = if self.eat_kw("in") {
                        Some(self.domain()?)
                    } else {
                        None
                    };
                    self.expect(&Tok::Semi, "`;`")?;
                    fields.push(FieldDecl { name, ty, domain });
                }
                Ok(Item::State { fields, time, loc })
            }
            "init" => {
                self.advance();
                let body = self.block()?;
                Ok(Item::Init { body, loc })
            }
            "halt" => {
                self.advance();
                self.expect_kw("when")?;
                let cond = self.expr(false)?;
                self.expect(&Tok::Semi, "`;`")?;
                Ok(Item::Halt { cond, loc })
            }
            "timestep" => {
                self.advance();
                let value = self.expr(false)?;
                self.expect(&Tok::Semi, "`;`")?;
                Ok(Item::Timestep { value, loc })
            }
            "law" => {
                self.advance();
                let name = self.ident()?;
                self.expect(&Tok::LBrace, "`{`")?;
                self.expect_kw("when")?;
                let guard = self.expr(false)?;
                self.expect(&Tok::Semi, "`;` after the guard")?;
                self.expect_kw("then")?;
                let body = self.block()?;
                self.expect(&Tok::RBrace, "`}`")?;
                Ok(Item::Law(LawDecl { name, guard, body }))
            }
            _ => self.error("a model item (const, extern, record, state, init, halt, timestep, law)"),
        }
    }

    fn domain(&mut self) -> PResult<DomainAst> {
        if self.eat(&Tok::LBracket) {
            let lo = self.expr(false)?;
            self.expect(&Tok::Comma, "`,`")?;
            let hi = self.expr(false)?;
            self.expect(&Tok::RBracket, "`]`")?;
            Ok(DomainAst::Interval(lo, hi))
        } else if self.eat(&Tok::LBrace) {
            Ok(DomainAst::Set(self.expr_list(&Tok::RBrace)?))
        } else {
            self.error("`[lo, hi]` or `{values}`")
        }
    }

    fn ty(&mut self) -> PResult<TypeAst> {
        let loc = self.loc();
        let name = match self.peek() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => s.clone(),
            _ => return self.error("a type"),
        };
        self.advance();
        let kind = match name.as_str() {
            "real" => TypeAstKind::Real,
            "int" => TypeAstKind::Int,
            "bool" => TypeAstKind::Bool,
            "complex" => TypeAstKind::Complex,
            "vector" => {
                self.expect(&Tok::LBracket, "`[`")?;
                let n = self.expr(false)?;
                self.expect(&Tok::RBracket, "`]`")?;
                TypeAstKind::Vector(Box::new(n))
            }
            "cgrid" => {
                self.expect(&Tok::LBracket, "`[`")?;
                let n = self.expr(false)?;
                self.expect(&Tok::Comma, "`,`")?;
                let dx = self.expr(false)?;
                self.expect(&Tok::RBracket, "`]`")?;
                TypeAstKind::Cgrid(Box::new(n), Box::new(dx))
            }
            "list" => {
                self.expect(&Tok::Lt, "`<`")?;
                let elem = self.ty()?;
                let bound = if self.eat(&Tok::Comma) {
                    Some(Box::new(self.additive(false)?))
                } else {
                    None
                };
                self.expect(&Tok::Gt, "`>`")?;
                TypeAstKind::List(Box::new(elem), bound)
            }
            "pw" => {
                self.expect(&Tok::LBrace, "`{`")?;
                let mut attrs = Vec::new();
                loop {
                    let a = self.ident()?;
                    self.expect(&Tok::Colon, "`:`")?;
                    let t = self.ty()?;
                    attrs.push((a, t));
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                self.expect(&Tok::RBrace, "`}`")?;
                TypeAstKind::Pw(attrs)
            }
            _ => TypeAstKind::Named(name),
        };
        Ok(TypeAst { kind, loc })
    }

    fn block(&mut self) -> PResult<Vec<StmtAst>> {
        self.expect(&Tok::LBrace, "`{`")?;
        let mut out = Vec::new();
        while !self.eat(&Tok::RBrace) {
            out.push(self.stmt()?);
        }
        Ok(out)
    }

    fn stmt(&mut self) -> PResult<StmtAst> {
        let loc = self.loc();
        if self.eat_kw("let") {
            let name = self.ident()?;
            self.expect(&Tok::Assign, "`=`")?;
            let value = self.expr(false)?;
            self.expect(&Tok::Semi, "`;`")?;
            return Ok(StmtAst::Let { name, value });
        }
        if self.eat_kw("if") {
            return self.if_rest(loc);
        }
        if self.eat_kw("for") {
            let var = self.ident()?;
            self.expect_kw("in")?;
            let source = self.expr(true)?;
            let body = self.block()?;
            return Ok(StmtAst::For {
                var,
                source,
                body,
                loc,
            });
        }
        let target = self.expr(false)?;
        self.expect(&Tok::Assign, "`=`")?;
        let value = self.expr(false)?;
        self.expect(&Tok::Semi, "`;`")?;
        Ok(StmtAst::Assign { target, value, loc })
    }

    fn if_rest(&mut self, loc: Loc) -> PResult<StmtAst> {
        let cond = self.expr(true)?;
        let then = self.block()?;
        let otherwise = if self.eat_kw("else") {
            let l = self.loc();
            if self.eat_kw("if") {
                vec![self.if_rest(l)?]
            } else {
                self.block()?
            }
        } else {
            Vec::new()
        };
        Ok(StmtAst::If {
            cond,
            then,
            otherwise,
            loc,
        })
    }

    fn expr_list(&mut self, close: &Tok) -> PResult<Vec<ExprAst>> {
        let mut out = Vec::new();
        if self.eat(close) {
            return Ok(out);
        }
        loop {
            out.push(self.expr(false)?);
            if self.eat(close) {
                return Ok(out);
            }
            self.expect(&Tok::Comma, "`,`")?;
        }
    }

    /// `no_struct` forbids record literals, as in `if` and `for` heads.
    pub fn expr(&mut self, no_struct: bool) -> PResult<ExprAst> {
        self.or(no_struct)
    }

    fn binary_level(
        &mut self,
        no_struct: bool,
        ops: &[(Tok, BinOp)],
        next: fn(&mut Parser, bool) -> PResult<ExprAst>,
        chain: bool,
    ) -> PResult<ExprAst> {
        let mut lhs = next(self, no_struct)?;
        loop {
            let Some(op) = ops.iter().find(|(t, _)| t == self.peek()).map(|(_, op)| *op) else {
                return Ok(lhs);
            };
            let loc = lhs.loc;
            self.advance();
            let rhs = next(self, no_struct)?;
            lhs = ExprAst::new(ExprAstKind::Binary(op, Box::new(lhs), Box::new(rhs)), loc);
            if !chain {
                if ops.iter().any(|(t, _)| t == self.peek()) {
                    return self.error("a separate comparison (comparisons do not chain)");
                }
                return Ok(lhs);
            }
        }
    }

    fn or(&mut self, ns: bool) -> PResult<ExprAst> {
        self.binary_level(ns, &[(Tok::OrOr, BinOp::Or)], Parser::and, true)
    }

    fn and(&mut self, ns: bool) -> PResult<ExprAst> {
        self.binary_level(ns, &[(Tok::AndAnd, BinOp::And)], Parser::comparison, true)
    }

    fn comparison(&mut self, ns: bool) -> PResult<ExprAst> {
        self.binary_level(
            ns,
            &[
                (Tok::Lt, BinOp::Lt),
                (Tok::Le, BinOp::Le),
                (Tok::Gt, BinOp::Gt),
                (Tok::Ge, BinOp::Ge),
                (Tok::EqEq, BinOp::Eq),
                (Tok::Ne, BinOp::Ne),
            ],
            Parser::additive,
            false,
        )
    }

    fn additive(&mut self, ns: bool) -> PResult<ExprAst> {
        self.binary_level(
            ns,
            &[(Tok::Plus, BinOp::Add), (Tok::Minus, BinOp::Sub)],
            Parser::multiplicative,
            true,
        )
    }

    fn multiplicative(&mut self, ns: bool) -> PResult<ExprAst> {
        self.binary_level(
            ns,
            &[(Tok::Star, BinOp::Mul), (Tok::Slash, BinOp::Div)],
            Parser::unary,
            true,
        )
    }

    fn unary(&mut self, ns: bool) -> PResult<ExprAst> {
        let loc = self.loc();
        let op = match self.peek() {
            Tok::Minus => UnOp::Neg,
            Tok::Bang => UnOp::Not,
            _ => return self.power(ns),
        };
        self.advance();
        let e = self.unary(ns)?;
        Ok(ExprAst::new(ExprAstKind::Unary(op, Box::new(e)), loc))
    }

    /// `^` is right-associative and binds tighter than unary minus.
    fn power(&mut self, ns: bool) -> PResult<ExprAst> {
        let base = self.postfix(ns)?;
        if self.eat(&Tok::Caret) {
            let loc = base.loc;
            let exp = self.unary(ns)?;
            return Ok(ExprAst::new(
                ExprAstKind::Binary(BinOp::Pow, Box::new(base), Box::new(exp)),
                loc,
            ));
        }
        Ok(base)
    }

    fn postfix(&mut self, ns: bool) -> PResult<ExprAst> {
        let mut e = self.primary(ns)?;
        loop {
            let loc = e.loc;
            if self.eat(&Tok::Dot) {
                let m = self.ident()?;
                e = ExprAst::new(ExprAstKind::Member(Box::new(e), m), loc);
            } else if self.eat(&Tok::LBracket) {
                let i = self.expr(false)?;
                self.expect(&Tok::RBracket, "`]`")?;
                e = ExprAst::new(ExprAstKind::Index(Box::new(e), Box::new(i)), loc);
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self, ns: bool) -> PResult<ExprAst> {
        let loc = self.loc();
        let kind = match self.peek().clone() {
            Tok::Int(n) => {
                self.advance();
                ExprAstKind::Int(n)
            }
            Tok::Real(x) => {
                self.advance();
                ExprAstKind::Real(x)
            }
            Tok::Imag(x) => {
                self.advance();
                ExprAstKind::Imag(x)
            }
            Tok::Str(s) => {
                self.advance();
                ExprAstKind::Str(s)
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr(false)?;
                self.expect(&Tok::RParen, "`)`")?;
                return Ok(e);
            }
            Tok::LBracket => {
                self.advance();
                if self.eat(&Tok::RBracket) {
                    ExprAstKind::List(vec![])
                } else {
                    let first = self.expr(false)?;
                    if self.eat_kw("for") {
                        let var = self.ident()?;
                        self.expect_kw("in")?;
                        let source = self.expr(false)?;
                        self.expect(&Tok::RBracket, "`]`")?;
                        ExprAstKind::Comprehension {
                            body: Box::new(first),
                            var,
                            source: Box::new(source),
                        }
                    } else {
                        let mut items = vec![first];
                        while self.eat(&Tok::Comma) {
                            items.push(self.expr(false)?);
                        }
                        self.expect(&Tok::RBracket, "`]` or `,`")?;
                        ExprAstKind::List(items)
                    }
                }
            }
            Tok::Pipe => {
                self.advance();
                let var = self.ident()?;
                self.expect(&Tok::Pipe, "`|`")?;
                let body = self.expr(ns)?;
                ExprAstKind::Lambda(var, Box::new(body))
            }
            Tok::Ident(s) => match s.as_str() {
                "true" | "false" => {
                    self.advance();
                    ExprAstKind::Bool(s == "true")
                }
                "random" => {
                    self.advance();
                    return self.random_rest(loc);
                }
                _ => {
                    let id = self.ident()?;
                    if self.peek() == &Tok::LParen {
                        self.advance();
                        let args = self.expr_list(&Tok::RParen)?;
                        ExprAstKind::Call(id, args)
                    } else if !ns
                        && self.peek() == &Tok::LBrace
                        && (matches!(self.peek_at(1), Tok::RBrace)
                            || (matches!(self.peek_at(1), Tok::Ident(_))
                                && matches!(self.peek_at(2), Tok::Colon)))
                    {
                        self.advance();
                        let mut fields = Vec::new();
                        while !self.eat(&Tok::RBrace) {
                            let f = self.ident()?;
                            self.expect(&Tok::Colon, "`:`")?;
                            let v = self.expr(false)?;
                            fields.push((f, v));
                            if !self.eat(&Tok::Comma) {
                                self.expect(&Tok::RBrace, "`}` or `,`")?;
                                break;
                            }
                        }
                        ExprAstKind::Record(id, fields)
                    } else {
                        ExprAstKind::Name(id.name)
                    }
                }
            },
            _ => return self.error("an expression"),
        };
        Ok(ExprAst::new(kind, loc))
    }

    /// `random([lo, hi] | {v, ...}, DIST[(params)] [, params...])`; the
    /// range may be omitted.
    fn random_rest(&mut self, loc: Loc) -> PResult<ExprAst> {
        self.expect(&Tok::LParen, "`(` after `random`")?;
        let range = if self.eat(&Tok::LBracket) {
            let lo = self.expr(false)?;
            self.expect(&Tok::Comma, "`,`")?;
            let hi = self.expr(false)?;
            self.expect(&Tok::RBracket, "`]`")?;
            self.expect(&Tok::Comma, "`,`")?;
            RangeAst::Interval(Box::new(lo), Box::new(hi))
        } else if self.eat(&Tok::LBrace) {
            let items = self.expr_list(&Tok::RBrace)?;
            self.expect(&Tok::Comma, "`,`")?;
            RangeAst::Set(items)
        } else {
            RangeAst::Unbounded
        };
        let dist = match self.peek().clone() {
            Tok::Ident(s) => {
                let l = self.advance().loc;
                Ident::new(s, l)
            }
            _ => return self.error("a distribution (FLAT, GAUSS, WEIGHTS, PSI)"),
        };
        let mut params = Vec::new();
        if self.eat(&Tok::LParen) {
            params = self.expr_list(&Tok::RParen)?;
        }
        while self.eat(&Tok::Comma) {
            params.push(self.expr(false)?);
        }
        self.expect(&Tok::RParen, "`)`")?;
        Ok(ExprAst::new(ExprAstKind::Random { range, dist, params }, loc))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const COUNTER: &str = "model M { state { n: int in [0,100]; } init { n = 0; } \
        law Inc { when true; then { n = n + 1; } } }";

    #[test]
    fn minimal_model() {
        let m = parse(COUNTER).unwrap();
        assert_eq!(m.name.name, "M");
        let laws: Vec<_> = m.laws().collect();
        assert_eq!(laws.len(), 1);
        assert_eq!(laws[0].name.name, "Inc");
    }

    #[test]
    fn missing_semicolon_points_at_then() {
        let src = "model M { state { x: real; } init { x = 0.0; }\nlaw L { when x < 0 then { } } }";
        let d = parse(src).unwrap_err();
        assert_eq!(d[0].code, "Syntax");
        assert_eq!((d[0].loc.line, d[0].loc.col), (2, 20));
    }

    #[test]
    fn precedence() {
        let e = parse_expr("-x^2 + 3 * y < 1 && !b").unwrap();
        let ExprAstKind::Binary(BinOp::And, lhs, rhs) = e.kind else { panic!() };
        assert!(matches!(rhs.kind, ExprAstKind::Unary(UnOp::Not, _)));
        let ExprAstKind::Binary(BinOp::Lt, sum, _) = lhs.kind else { panic!() };
        let ExprAstKind::Binary(BinOp::Add, neg, _) = sum.kind else { panic!() };
        let ExprAstKind::Unary(UnOp::Neg, pow) = neg.kind else { panic!() };
        assert!(matches!(pow.kind, ExprAstKind::Binary(BinOp::Pow, _, _)));
    }

    #[test]
    fn power_is_right_associative() {
        let e = parse_expr("2 ^ 3 ^ 2").unwrap();
        let ExprAstKind::Binary(BinOp::Pow, a, b) = e.kind else { panic!() };
        assert!(matches!(a.kind, ExprAstKind::Int(2)));
        assert!(matches!(b.kind, ExprAstKind::Binary(BinOp::Pow, _, _)));
    }

    #[test]
    fn comparisons_do_not_chain() {
        assert!(parse_expr("a < b < c").is_err());
    }

    #[test]
    fn random_forms() {
        for src in [
            "random([0, 1], FLAT)",
            "random({0, 1}, WEIGHTS(1, 0))",
            "random({0, 1}, PSI, amps)",
            "random(GAUSS(0.0, 1.0))",
        ] {
            assert!(matches!(parse_expr(src).unwrap().kind, ExprAstKind::Random { .. }), "{src}");
        }
        let ExprAstKind::Random { range, params, .. } = parse_expr("random({0,1}, PSI(0.6, 0.8i))").unwrap().kind
        else {
            panic!()
        };
        assert!(matches!(range, RangeAst::Set(ref v) if v.len() == 2));
        assert!(matches!(params[1].kind, ExprAstKind::Imag(x) if x == 0.8));
    }

    #[test]
    fn record_literal_vs_block() {
        assert!(matches!(
            parse_expr("P { m: 1.0, x: 0.0 }").unwrap().kind,
            ExprAstKind::Record(_, ref f) if f.len() == 2
        ));
        let src = "model M { state { b: bool; } init { b = true; } \
            law L { when true; then { if b { b = false; } else { b = true; } } } }";
        assert!(parse(src).is_ok());
    }

    #[test]
    fn comprehension_and_lambda() {
        assert!(matches!(
            parse_expr("[x * 2 for x in xs]").unwrap().kind,
            ExprAstKind::Comprehension { .. }
        ));
        let ExprAstKind::Call(_, args) = parse_expr("f(ps, dt, |x| K * x)").unwrap().kind else {
            panic!()
        };
        assert!(matches!(args[2].kind, ExprAstKind::Lambda(..)));
    }

    #[test]
    fn keywords_are_not_identifiers() {
        let d = parse("model law { }").unwrap_err();
        assert_eq!((d[0].loc.line, d[0].loc.col), (1, 7));
    }
}
