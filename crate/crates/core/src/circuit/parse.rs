//! Line-oriented reader and writer for the small QASM-like circuit format.

use std::f64::consts::PI;
use std::fmt::Write;

use super::{Circuit, CircuitError, Op};
use crate::unitary::{EulerAngles, GateId};

pub fn parse(text: &str) -> Result<Circuit, CircuitError> {
    let mut circuit: Option<Circuit> = None;
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let body = raw.split("//").next().unwrap_or("");
        for stmt in split_statements(body, line)? {
            let (col, stmt) = stmt;
            let op = parse_statement(stmt, line, col)?;
            match op {
                Stmt::Qreg(n) => {
                    if circuit.is_some() {
                        return Err(CircuitError::Syntax { line, column: col, message: "second qreg".into() });
                    }
                    circuit = Some(Circuit::new(n));
                }
                Stmt::Op(op) => {
                    let c = circuit.as_mut().ok_or(CircuitError::MissingQreg { line })?;
                    c.push(op).map_err(|e| e.at_line(line))?;
                }
            }
        }
    }
    circuit.ok_or(CircuitError::MissingQreg { line: 0 })
}

/// Non-empty `;`-terminated statements with their 1-based starting columns.
fn split_statements(body: &str, line: usize) -> Result<Vec<(usize, &str)>, CircuitError> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, ch) in body.char_indices() {
        if ch == ';' {
            let s = &body[start..i];
            let lead = s.len() - s.trim_start().len();
            if s.trim().is_empty() {
                return Err(CircuitError::Syntax { line, column: i + 1, message: "empty statement".into() });
            }
            out.push((start + lead + 1, s.trim()));
            start = i + 1;
        }
    }
    let rest = &body[start..];
    if !rest.trim().is_empty() {
        let lead = rest.len() - rest.trim_start().len();
        return Err(CircuitError::Syntax { line, column: start + lead + 1, message: "missing ';'".into() });
    }
    Ok(out)
}

enum Stmt {
    Qreg(usize),
    Op(Op),
}

fn parse_statement(stmt: &str, line: usize, col: usize) -> Result<Stmt, CircuitError> {
    let syntax = |offset: usize, message: String| CircuitError::Syntax { line, column: col + offset, message };
    let name_end = stmt.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).unwrap_or(stmt.len());
    let name = stmt[..name_end].to_ascii_lowercase();
    if name.is_empty() {
        return Err(syntax(0, "expected a gate name".into()));
    }
    let mut rest = stmt[name_end..].trim_start();
    let mut params = Vec::new();
    if let Some(r) = rest.strip_prefix('(') {
        let close = r.find(')').ok_or_else(|| syntax(name_end, "unclosed '('".into()))?;
        for p in r[..close].split(',') {
            params.push(eval_expr(p).map_err(|m| syntax(name_end, m))?);
        }
        rest = r[close + 1..].trim_start();
    }
    let operands = rest
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| parse_operand(s).ok_or_else(|| syntax(name_end, format!("bad operand {s:?}"))))
        .collect::<Result<Vec<usize>, _>>()?;
    let arity = |n_params: usize, n_ops: usize| -> Result<(), CircuitError> {
        if params.len() != n_params || operands.len() != n_ops {
            return Err(syntax(0, format!("{name} takes {n_params} parameters and {n_ops} operands")));
        }
        Ok(())
    };
    let op = match name.as_str() {
        "qreg" => {
            arity(0, 1)?;
            return Ok(Stmt::Qreg(operands[0]));
        }
        "cx" | "cnot" => {
            arity(0, 2)?;
            Op::Cx(operands[0], operands[1])
        }
        "h" | "s" | "t" | "x" | "y" | "z" => {
            arity(0, 1)?;
            let g = GateId::from_symbol(name.chars().next().expect("non-empty")).expect("known symbol");
            Op::Fixed(g, operands[0])
        }
        "rz" => {
            arity(1, 1)?;
            Op::Rz(params[0], operands[0])
        }
        "rx" => {
            arity(1, 1)?;
            Op::Rx(params[0], operands[0])
        }
        "ry" => {
            arity(1, 1)?;
            Op::Ry(params[0], operands[0])
        }
        "u3" | "u" => {
            arity(3, 1)?;
            Op::U3(EulerAngles::new(params[0], params[1], params[2]), operands[0])
        }
        _ => return Err(CircuitError::UnsupportedGate { line, column: col, name }),
    };
    Ok(Stmt::Op(op))
}

/// Accepts `3` or `q[3]`.
fn parse_operand(s: &str) -> Option<usize> {
    let inner = match s.find('[') {
        Some(i) => s[i + 1..].strip_suffix(']')?,
        None => s,
    };
    inner.parse().ok()
}

/// Evaluates `+ - * /` expressions over floats, `pi` and parentheses.
pub fn eval_expr(src: &str) -> Result<f64, String> {
    let tokens = tokenize(src)?;
    let mut p = ExprParser { tokens: &tokens, pos: 0 };
    let v = p.sum()?;
    if p.pos != tokens.len() {
        return Err(format!("unexpected trailing input in {src:?}"));
    }
    if !v.is_finite() {
        return Err(format!("non-finite value {src:?}"));
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>, String> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if "+-*/()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len()
                && (chars[i].is_ascii_digit()
                    || chars[i] == '.'
                    || chars[i] == 'e'
                    || chars[i] == 'E'
                    || ((chars[i] == '-' || chars[i] == '+') && matches!(chars[i - 1], 'e' | 'E')))
            {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            out.push(Tok::Num(s.parse().map_err(|_| format!("bad number {s:?}"))?));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphabetic() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            match s.to_ascii_lowercase().as_str() {
                "pi" => out.push(Tok::Num(PI)),
                _ => return Err(format!("unknown identifier {s:?}")),
            }
        } else {
            return Err(format!("unexpected character {c:?}"));
        }
    }
    Ok(out)
}

struct ExprParser<'a> {
    tokens: &'a [Tok],
    pos: usize,
}

impl ExprParser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn sum(&mut self) -> Result<f64, String> {
        let mut v = self.product()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let r = self.product()?;
            v = if c == '+' { v + r } else { v - r };
        }
        Ok(v)
    }

    fn product(&mut self) -> Result<f64, String> {
        let mut v = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let r = self.unary()?;
            v = if c == '*' { v * r } else { v / r };
        }
        Ok(v)
    }

    fn unary(&mut self) -> Result<f64, String> {
        match self.peek().cloned() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let v = self.sum()?;
                if self.peek() != Some(&Tok::Op(')')) {
                    return Err("missing ')'".into());
                }
                self.pos += 1;
                Ok(v)
            }
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(v)
            }
            _ => Err("expected a number".into()),
        }
    }
}

pub fn emit(circuit: &Circuit) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "qreg {};", circuit.num_qubits());
    for op in circuit.ops() {
        let _ = match *op {
            Op::Cx(c, t) => writeln!(out, "cx {c} {t};"),
            Op::Fixed(g, q) => writeln!(out, "{} {q};", g.symbol().to_ascii_lowercase()),
            Op::Rz(a, q) => writeln!(out, "rz({a}) {q};"),
            Op::Rx(a, q) => writeln!(out, "rx({a}) {q};"),
            Op::Ry(a, q) => writeln!(out, "ry({a}) {q};"),
            Op::U3(e, q) => writeln!(out, "u3({},{},{}) {q};", e.theta, e.phi, e.lambda),
        };
    }
    out
}
