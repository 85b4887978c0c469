use super::diag::{Diagnostic, Loc};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Real(f64),
    /// Imaginary literal such as `0.8i`.
    Imag(f64),
    Str(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Dot,
    Assign,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    AndAnd,
    OrOr,
    Bang,
    Pipe,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Real(x) => format!("`{x:?}`"),
            Tok::Imag(x) => format!("`{x:?}i`"),
            Tok::Str(s) => format!("{s:?}"),
            Tok::Eof => "end of input".into(),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Comma => ",",
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::Dot => ".",
            Tok::Assign => "=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Caret => "^",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::EqEq => "==",
            Tok::Ne => "!=",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Bang => "!",
            Tok::Pipe => "|",
            _ => "?",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub loc: Loc,
}

/// Splits `src` into tokens. The first malformed character stops lexing.
pub fn lex(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    while i < chars.len() {
        let c = chars[i];
        let loc = Loc::new(line, col);
        let bump = |i: &mut usize, col: &mut u32, n: usize| {
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
            bump(&mut i, &mut col, 1);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += (i - start) as u32;
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                loc,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            let mut real = false;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if chars.get(i) == Some(&'.') && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                real = true;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if matches!(chars.get(i), Some('e' | 'E')) {
                let mut j = i + 1;
                if matches!(chars.get(j), Some('+' | '-')) {
                    j += 1;
                }
                if chars.get(j).is_some_and(|d| d.is_ascii_digit()) {
                    real = true;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let imag = chars.get(i) == Some(&'i')
                && !chars
                    .get(i + 1)
                    .is_some_and(|d| d.is_ascii_alphanumeric() || *d == '_');
            let tok = if imag {
                i += 1;
                Tok::Imag(text.parse().expect("digits"))
            } else if real {
                Tok::Real(text.parse().expect("digits"))
            } else {
                match text.parse() {
                    Ok(n) => Tok::Int(n),
                    Err(_) => {
                        return Err(Diagnostic::error(
                            "Syntax",
                            loc,
                            format!("integer literal `{text}` is out of range"),
                        ))
                    }
                }
            };
            col += (i - start) as u32;
            out.push(Token { tok, loc });
            continue;
        }
        if c == '"' {
            let mut j = i + 1;
            let mut s = String::new();
            while j < chars.len() && chars[j] != '"' && chars[j] != '\n' {
                s.push(chars[j]);
                j += 1;
            }
            if chars.get(j) != Some(&'"') {
                return Err(Diagnostic::error("Syntax", loc, "unterminated string literal"));
            }
            col += (j + 1 - i) as u32;
            i = j + 1;
            out.push(Token { tok: Tok::Str(s), loc });
            continue;
        }
        let two = |a: char, b: char| c == a && chars.get(i + 1) == Some(&b);
        let (tok, n) = if two('<', '=') {
            (Tok::Le, 2)
        } else if two('>', '=') {
            (Tok::Ge, 2)
        } else if two('=', '=') {
            (Tok::EqEq, 2)
        } else if two('!', '=') {
            (Tok::Ne, 2)
        } else if two('&', '&') {
            (Tok::AndAnd, 2)
        } else if two('|', '|') {
            (Tok::OrOr, 2)
        } else {
            let t = match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                ',' => Tok::Comma,
                ';' => Tok::Semi,
                ':' => Tok::Colon,
                '.' => Tok::Dot,
                '=' => Tok::Assign,
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '*' => Tok::Star,
                '/' => Tok::Slash,
                '^' => Tok::Caret,
                '<' => Tok::Lt,
                '>' => Tok::Gt,
                '!' => Tok::Bang,
                '|' => Tok::Pipe,
                other => {
                    return Err(Diagnostic::error(
                        "Syntax",
                        loc,
                        format!("unexpected character {other:?}"),
                    ))
                }
            };
            (t, 1)
        };
        bump(&mut i, &mut col, n);
        out.push(Token { tok, loc });
    }
    out.push(Token {
        tok: Tok::Eof,
        loc: Loc::new(line, col),
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        lex(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn numbers() {
        assert_eq!(
            toks("1 2.5 1e-3 0.8i 3i 2.0e2"),
            vec![
                Tok::Int(1),
                Tok::Real(2.5),
                Tok::Real(1e-3),
                Tok::Imag(0.8),
                Tok::Imag(3.0),
                Tok::Real(200.0),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn member_after_int_is_not_a_real() {
        assert_eq!(toks("xs.0"), vec![Tok::Ident("xs".into()), Tok::Dot, Tok::Int(0), Tok::Eof]);
    }

    #[test]
    fn comments_and_locations() {
        let t = lex("// c\n  x <= y").unwrap();
        assert_eq!(t[0].tok, Tok::Ident("x".into()));
        assert_eq!((t[0].loc.line, t[0].loc.col), (2, 3));
        assert_eq!(t[1].tok, Tok::Le);
        assert_eq!((t[1].loc.line, t[1].loc.col), (2, 5));
    }

    #[test]
    fn bad_character() {
        let d = lex("x = 1 @ 2").unwrap_err();
        assert_eq!((d.loc.line, d.loc.col), (1, 7));
    }

    #[test]
    fn identifier_ending_in_i_is_not_imaginary() {
        assert_eq!(toks("2in"), vec![Tok::Int(2), Tok::Ident("in".into()), Tok::Eof]);
    }
}
