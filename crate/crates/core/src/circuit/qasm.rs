// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! OpenQASM 2.0 subset reader.
//!
//! Accepted: the `OPENQASM 2.0;` header, `include` (ignored), one `qreg`,
//! at most one `creg`, the primitive gates of [`GateKind`], `measure`,
//! `barrier`, and `gate` definitions built from those primitives, which
//! are inlined at the call site. Parameters are constant expressions over
//! `pi`, numbers, `+ - * / ^`, and `sin cos tan exp ln sqrt`.
//!
//! Measurements must come last on each qubit.

use std::collections::HashMap;

use thiserror::Error;

use super::ir::{CircuitIR, Gate, GateKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QasmError {
    #[error("{line}:{col}: syntax error: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("{line}:{col}: unsupported gate `{name}`")]
    UnsupportedGate {
        name: String,
        line: usize,
        col: usize,
    },
    #[error("{line}:{col}: unsupported statement `{keyword}`")]
    UnsupportedStatement {
        keyword: String,
        line: usize,
        col: usize,
    },
    #[error("{line}:{col}: only one {kind} register is supported")]
    MultipleRegisters {
        kind: &'static str,
        line: usize,
        col: usize,
    },
    #[error("{line}:{col}: qubit {qubit} is used after being measured")]
    MidCircuitMeasurement {
        qubit: usize,
        line: usize,
        col: usize,
    },
    #[error("{line}:{col}: {message}")]
    Semantic {
        line: usize,
        col: usize,
        message: String,
    },
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    Sym(char),
    Arrow,
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, QasmError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let syntax = |line, col, message: String| QasmError::Syntax { line, col, message };
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else if c.is_ascii_digit()
            || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            Tok::Num(
                s.parse()
                    .map_err(|_| syntax(l0, c0, format!("bad number `{s}`")))?,
            )
        } else if c == '"' {
            i += 1;
            while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                i += 1;
            }
            if chars.get(i) != Some(&'"') {
                return Err(syntax(l0, c0, "unterminated string".into()));
            }
            i += 1;
            Tok::Str(chars[start + 1..i - 1].iter().collect())
        } else if c == '-' && chars.get(i + 1) == Some(&'>') {
            i += 2;
            Tok::Arrow
        } else if "[](){};,+-*/^=".contains(c) {
            i += 1;
            Tok::Sym(c)
        } else {
            return Err(syntax(l0, c0, format!("unexpected character `{c}`")));
        };
        col += i - start;
        out.push(Token {
            tok,
            line: l0,
            col: c0,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

#[derive(Clone, Debug)]
enum Expr {
    Num(f64),
    Var(String, usize, usize),
    Neg(Box<Expr>),
    Bin(char, Box<Expr>, Box<Expr>),
    Call(String, Box<Expr>),
}

impl Expr {
    fn eval(&self, env: &HashMap<String, f64>) -> Result<f64, QasmError> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Var(name, line, col) => match env.get(name) {
                Some(v) => *v,
                None if name == "pi" => std::f64::consts::PI,
                None => {
                    return Err(QasmError::Semantic {
                        line: *line,
                        col: *col,
                        message: format!("unknown identifier `{name}`"),
                    })
                }
            },
            Expr::Neg(e) => -e.eval(env)?,
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(env)?, b.eval(env)?);
                match op {
                    '+' => a + b,
                    '-' => a - b,
                    '*' => a * b,
                    '/' => a / b,
                    _ => a.powf(b),
                }
            }
            Expr::Call(f, e) => {
                let v = e.eval(env)?;
                match f.as_str() {
                    "sin" => v.sin(),
                    "cos" => v.cos(),
                    "tan" => v.tan(),
                    "exp" => v.exp(),
                    "ln" => v.ln(),
                    _ => v.sqrt(),
                }
            }
        })
    }
}

#[derive(Clone, Debug)]
enum Operand {
    Index(usize),
    Whole,
}

#[derive(Clone, Debug)]
struct BodyStmt {
    name: String,
    line: usize,
    col: usize,
    params: Vec<Expr>,
    args: Vec<String>,
}

#[derive(Clone, Debug)]
struct GateDef {
    params: Vec<String>,
    args: Vec<String>,
    body: Vec<BodyStmt>,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    qreg: Option<(String, usize)>,
    creg: Option<(String, usize)>,
    defs: HashMap<String, GateDef>,
    gates: Vec<Gate>,
    measured: Vec<bool>,
    written: Vec<bool>,
}

const FUNCTIONS: [&str; 6] = ["sin", "cos", "tan", "exp", "ln", "sqrt"];

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, t: &Token, message: impl Into<String>) -> QasmError {
        QasmError::Syntax {
            line: t.line,
            col: t.col,
            message: message.into(),
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<Token, QasmError> {
        let t = self.next();
        if t.tok == Tok::Sym(c) {
            Ok(t)
        } else {
            Err(self.error_at(&t, format!("expected `{c}`, found {}", describe(&t.tok))))
        }
    }

    fn at_sym(&self, c: char) -> bool {
        self.peek().tok == Tok::Sym(c)
    }

    fn ident(&mut self) -> Result<(String, Token), QasmError> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) => Ok((s.clone(), t.clone())),
            other => Err(self.error_at(
                &t,
                format!("expected identifier, found {}", describe(other)),
            )),
        }
    }

    fn integer(&mut self) -> Result<usize, QasmError> {
        let t = self.next();
        match t.tok {
            Tok::Num(v) if v >= 0.0 && v.fract() == 0.0 => Ok(v as usize),
            ref other => {
                Err(self.error_at(&t, format!("expected integer, found {}", describe(other))))
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, QasmError> {
        let mut lhs = self.term()?;
        while self.at_sym('+') || self.at_sym('-') {
            let Tok::Sym(op) = self.next().tok else {
                unreachable!()
            };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, QasmError> {
        let mut lhs = self.unary()?;
        while self.at_sym('*') || self.at_sym('/') {
            let Tok::Sym(op) = self.next().tok else {
                unreachable!()
            };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, QasmError> {
        if self.at_sym('-') {
            self.next();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.at_sym('+') {
            self.next();
            return self.unary();
        }
        let base = self.atom()?;
        if self.at_sym('^') {
            self.next();
            return Ok(Expr::Bin('^', Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, QasmError> {
        let t = self.next();
        match &t.tok {
            Tok::Num(v) => Ok(Expr::Num(*v)),
            Tok::Ident(name) if FUNCTIONS.contains(&name.as_str()) => {
                self.expect_sym('(')?;
                let e = self.expr()?;
                self.expect_sym(')')?;
                Ok(Expr::Call(name.clone(), Box::new(e)))
            }
            Tok::Ident(name) => Ok(Expr::Var(name.clone(), t.line, t.col)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect_sym(')')?;
                Ok(e)
            }
            other => Err(self.error_at(
                &t,
                format!("expected expression, found {}", describe(other)),
            )),
        }
    }

    fn param_list(&mut self) -> Result<Vec<Expr>, QasmError> {
        let mut params = Vec::new();
        if self.at_sym('(') {
            self.next();
            if !self.at_sym(')') {
                params.push(self.expr()?);
                while self.at_sym(',') {
                    self.next();
                    params.push(self.expr()?);
                }
            }
            self.expect_sym(')')?;
        }
        Ok(params)
    }

    fn operand(&mut self, creg: bool) -> Result<Operand, QasmError> {
        let (name, t) = self.ident()?;
        let reg = if creg { &self.creg } else { &self.qreg };
        let size = match reg {
            Some((n, size)) if *n == name => *size,
            _ => {
                return Err(QasmError::Semantic {
                    line: t.line,
                    col: t.col,
                    message: format!("unknown register `{name}`"),
                })
            }
        };
        if self.at_sym('[') {
            self.next();
            let it = self.peek().clone();
            let i = self.integer()?;
            self.expect_sym(']')?;
            if i >= size {
                return Err(QasmError::Semantic {
                    line: it.line,
                    col: it.col,
                    message: format!("index {i} out of range for `{name}[{size}]`"),
                });
            }
            Ok(Operand::Index(i))
        } else {
            Ok(Operand::Whole)
        }
    }

    fn statement(&mut self) -> Result<bool, QasmError> {
        let t = self.peek().clone();
        let keyword = match &t.tok {
            Tok::Eof => return Ok(false),
            Tok::Ident(s) => s.clone(),
            other => return Err(self.error_at(&t, format!("unexpected {}", describe(other)))),
        };
        match keyword.as_str() {
            "include" => {
                self.next();
                let s = self.next();
                if !matches!(s.tok, Tok::Str(_)) {
                    return Err(self.error_at(&s, "expected file name"));
                }
                self.expect_sym(';')?;
            }
            "qreg" | "creg" => self.register(keyword == "qreg")?,
            "gate" => self.gate_def()?,
            "measure" => self.measure()?,
            "barrier" => {
                self.next();
                let groups = self.operands()?;
                let n = self.qreg_size(&t)?;
                let mut qubits: Vec<usize> = Vec::new();
                for op in groups {
                    match op {
                        Operand::Index(i) => qubits.push(i),
                        Operand::Whole => qubits.extend(0..n),
                    }
                }
                qubits.sort_unstable();
                qubits.dedup();
                self.gates.push(Gate::new(GateKind::Barrier, qubits));
            }
            "opaque" | "reset" | "if" | "OPENQASM" => {
                return Err(QasmError::UnsupportedStatement {
                    keyword,
                    line: t.line,
                    col: t.col,
                })
            }
            _ => self.application()?,
        }
        Ok(true)
    }

    fn qreg_size(&self, at: &Token) -> Result<usize, QasmError> {
        self.qreg
            .as_ref()
            .map(|q| q.1)
            .ok_or_else(|| QasmError::Semantic {
                line: at.line,
                col: at.col,
                message: "no qreg declared".into(),
            })
    }

    fn operands(&mut self) -> Result<Vec<Operand>, QasmError> {
        let mut ops = vec![self.operand(false)?];
        while self.at_sym(',') {
            self.next();
            ops.push(self.operand(false)?);
        }
        self.expect_sym(';')?;
        Ok(ops)
    }

    fn register(&mut self, quantum: bool) -> Result<(), QasmError> {
        let t = self.next();
        let (name, _) = self.ident()?;
        self.expect_sym('[')?;
        let size = self.integer()?;
        self.expect_sym(']')?;
        self.expect_sym(';')?;
        let kind = if quantum { "quantum" } else { "classical" };
        let slot = if quantum {
            &mut self.qreg
        } else {
            &mut self.creg
        };
        if slot.is_some() {
            return Err(QasmError::MultipleRegisters {
                kind,
                line: t.line,
                col: t.col,
            });
        }
        if quantum && size == 0 {
            return Err(QasmError::Semantic {
                line: t.line,
                col: t.col,
                message: "empty qreg".into(),
            });
        }
        *slot = Some((name, size));
        if quantum {
            self.measured = vec![false; size];
        } else {
            self.written = vec![false; size];
        }
        Ok(())
    }

    fn gate_def(&mut self) -> Result<(), QasmError> {
        self.next();
        let (name, nt) = self.ident()?;
        if GateKind::from_name(&name).is_some() || self.defs.contains_key(&name) {
            return Err(QasmError::Semantic {
                line: nt.line,
                col: nt.col,
                message: format!("gate `{name}` is already defined"),
            });
        }
        let mut params = Vec::new();
        if self.at_sym('(') {
            self.next();
            if !self.at_sym(')') {
                params.push(self.ident()?.0);
                while self.at_sym(',') {
                    self.next();
                    params.push(self.ident()?.0);
                }
            }
            self.expect_sym(')')?;
        }
        let mut args = vec![self.ident()?.0];
        while self.at_sym(',') {
            self.next();
            args.push(self.ident()?.0);
        }
        self.expect_sym('{')?;
        let mut body = Vec::new();
        while !self.at_sym('}') {
            let (stmt, st) = self.ident()?;
            let sparams = self.param_list()?;
            let mut sargs = vec![self.ident()?];
            while self.at_sym(',') {
                self.next();
                sargs.push(self.ident()?);
            }
            self.expect_sym(';')?;
            for (a, at) in &sargs {
                if !args.contains(a) {
                    return Err(QasmError::Semantic {
                        line: at.line,
                        col: at.col,
                        message: format!("`{a}` is not an argument of `{name}`"),
                    });
                }
            }
            if stmt == "barrier" {
                continue;
            }
            body.push(BodyStmt {
                name: stmt,
                line: st.line,
                col: st.col,
                params: sparams,
                args: sargs.into_iter().map(|a| a.0).collect(),
            });
        }
        self.expect_sym('}')?;
        self.defs.insert(name, GateDef { params, args, body });
        Ok(())
    }

    fn measure(&mut self) -> Result<(), QasmError> {
        let t = self.next();
        let q = self.operand(false)?;
        let arrow = self.next();
        if arrow.tok != Tok::Arrow {
            return Err(self.error_at(&arrow, "expected `->`"));
        }
        if self.creg.is_none() {
            return Err(QasmError::Semantic {
                line: arrow.line,
                col: arrow.col,
                message: "no creg declared".into(),
            });
        }
        let c = self.operand(true)?;
        self.expect_sym(';')?;
        let pairs = match (q, c) {
            (Operand::Index(q), Operand::Index(c)) => vec![(q, c)],
            (Operand::Whole, Operand::Whole) => {
                let nq = self.qreg.as_ref().unwrap().1;
                let nc = self.creg.as_ref().unwrap().1;
                if nq != nc {
                    return Err(QasmError::Semantic {
                        line: t.line,
                        col: t.col,
                        message: format!("register sizes differ ({nq} vs {nc})"),
                    });
                }
                (0..nq).map(|i| (i, i)).collect()
            }
            _ => {
                return Err(QasmError::Semantic {
                    line: t.line,
                    col: t.col,
                    message: "cannot mix indexed and whole registers in measure".into(),
                })
            }
        };
        for (q, c) in pairs {
            if self.measured[q] {
                return Err(QasmError::MidCircuitMeasurement {
                    qubit: q,
                    line: t.line,
                    col: t.col,
                });
            }
            if self.written[c] {
                return Err(QasmError::Semantic {
                    line: t.line,
                    col: t.col,
                    message: format!("classical bit {c} written twice"),
                });
            }
            self.measured[q] = true;
            self.written[c] = true;
            self.gates.push(Gate::measure(q, c));
        }
        Ok(())
    }

    fn application(&mut self) -> Result<(), QasmError> {
        let (name, t) = self.ident()?;
        let env = HashMap::new();
        let params = self
            .param_list()?
            .iter()
            .map(|e| e.eval(&env))
            .collect::<Result<Vec<f64>, _>>()?;
        let ops = self.operands()?;
        let n = self.qreg_size(&t)?;
        let broadcast = ops.iter().any(|o| matches!(o, Operand::Whole));
        let rounds = if broadcast { n } else { 1 };
        for k in 0..rounds {
            let qubits: Vec<usize> = ops
                .iter()
                .map(|o| match o {
                    Operand::Index(i) => *i,
                    Operand::Whole => k,
                })
                .collect();
            self.apply(&name, &params, &qubits, t.line, t.col, 0)?;
        }
        Ok(())
    }

    fn apply(
        &mut self,
        name: &str,
        params: &[f64],
        qubits: &[usize],
        line: usize,
        col: usize,
        depth: usize,
    ) -> Result<(), QasmError> {
        let semantic = |message: String| QasmError::Semantic { line, col, message };
        let mut distinct = qubits.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() != qubits.len() {
            return Err(semantic(format!("repeated operand in `{name}`")));
        }
        if let Some(kind) = GateKind::from_name(name) {
            if kind.param_count() != params.len() {
                return Err(semantic(format!(
                    "`{name}` takes {} parameters, got {}",
                    kind.param_count(),
                    params.len()
                )));
            }
            if kind.arity() != Some(qubits.len()) {
                return Err(semantic(format!(
                    "`{name}` takes {} qubits, got {}",
                    kind.arity().unwrap(),
                    qubits.len()
                )));
            }
            if params.iter().any(|p| !p.is_finite()) {
                return Err(semantic(format!("non-finite parameter in `{name}`")));
            }
            if let Some(&q) = qubits.iter().find(|&&q| self.measured[q]) {
                return Err(QasmError::MidCircuitMeasurement {
                    qubit: q,
                    line,
                    col,
                });
            }
            self.gates
                .push(Gate::with_params(kind, qubits.to_vec(), params.to_vec()));
            return Ok(());
        }
        let Some(def) = self.defs.get(name).cloned() else {
            return Err(QasmError::UnsupportedGate {
                name: name.to_string(),
                line,
                col,
            });
        };
        if depth > 64 {
            return Err(semantic(format!("gate `{name}` nests too deeply")));
        }
        if def.params.len() != params.len() || def.args.len() != qubits.len() {
            return Err(semantic(format!("wrong signature in call to `{name}`")));
        }
        let env: HashMap<String, f64> = def
            .params
            .iter()
            .cloned()
            .zip(params.iter().copied())
            .collect();
        let bind: HashMap<&str, usize> = def
            .args
            .iter()
            .map(String::as_str)
            .zip(qubits.iter().copied())
            .collect();
        for stmt in &def.body {
            let p = stmt
                .params
                .iter()
                .map(|e| e.eval(&env))
                .collect::<Result<Vec<f64>, _>>()?;
            let q: Vec<usize> = stmt.args.iter().map(|a| bind[a.as_str()]).collect();
            self.apply(&stmt.name, &p, &q, stmt.line, stmt.col, depth + 1)?;
        }
        Ok(())
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Num(v) => format!("number {v}"),
        Tok::Str(s) => format!("string \"{s}\""),
        Tok::Sym(c) => format!("`{c}`"),
        Tok::Arrow => "`->`".into(),
        Tok::Eof => "end of input".into(),
    }
}

/// Parses `text` into a circuit named `circuit`.
pub fn parse_qasm(text: &str) -> Result<CircuitIR, QasmError> {
    parse_qasm_named("circuit", text)
}

pub fn parse_qasm_named(name: &str, text: &str) -> Result<CircuitIR, QasmError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        qreg: None,
        creg: None,
        defs: HashMap::new(),
        gates: Vec::new(),
        measured: Vec::new(),
        written: Vec::new(),
    };
    let head = p.next();
    if head.tok != Tok::Ident("OPENQASM".into()) {
        return Err(p.error_at(&head, "expected `OPENQASM 2.0;` header"));
    }
    let ver = p.next();
    match ver.tok {
        Tok::Num(v) if (2.0..3.0).contains(&v) => {}
        _ => return Err(p.error_at(&ver, "only OpenQASM 2.x is supported")),
    }
    p.expect_sym(';')?;
    while p.statement()? {}
    let Some((_, num_qubits)) = p.qreg else {
        return Err(p.error_at(&head, "no qreg declared"));
    };
    Ok(CircuitIR {
        name: name.to_string(),
        num_qubits,
        num_clbits: p.creg.map_or(0, |c| c.1),
        gates: p.gates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAD: &str = "OPENQASM 2.0;\ninclude \"qelib1.inc\";\n";

    fn parse(body: &str) -> Result<CircuitIR, QasmError> {
        parse_qasm(&format!("{HEAD}{body}"))
    }

    #[test]
    fn bell_prep() {
        let c = parse("qreg q[2];\ncreg c[2];\nh q[0]; cx q[0],q[1]; measure q -> c;").unwrap();
        let kinds: Vec<_> = c.gates.iter().map(|g| g.kind).collect();
        assert_eq!(
            kinds,
            vec![
                GateKind::H,
                GateKind::Cx,
                GateKind::Measure,
                GateKind::Measure
            ]
        );
        assert_eq!(c.gates[3].clbit, Some(1));
        assert_eq!(c.num_clbits, 2);
    }

    #[test]
    fn angle_expressions() {
        let c = parse(
            "qreg q[1];\nrz(pi/2) q[0];\nrx(-pi*3/4+0.25) q[0];\nu(2^3, sqrt(4), -(1e-1)) q[0];\nry(cos(0)) q[0];",
        )
        .unwrap();
        assert!((c.gates[0].params[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!((c.gates[1].params[0] - (-std::f64::consts::PI * 0.75 + 0.25)).abs() < 1e-15);
        assert_eq!(c.gates[2].params, vec![8.0, 2.0, -0.1]);
        assert_eq!(c.gates[3].params, vec![1.0]);
    }

    #[test]
    fn custom_gates_inline() {
        let c = parse(
            "gate myrot(a) x { rz(a/2) x; h x; }\ngate pair(t) a, b { myrot(t) a; cx a, b; }\nqreg q[3];\npair(pi) q[2], q[0];",
        )
        .unwrap();
        assert_eq!(c.gates.len(), 3);
        assert_eq!(c.gates[0].qubits, vec![2]);
        assert!((c.gates[0].params[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert_eq!(c.gates[2].qubits, vec![2, 0]);
    }

    #[test]
    fn broadcast_single_qubit_gates() {
        let c = parse("qreg q[3];\nh q;\ncx q[0], q;").unwrap_err();
        // the broadcast cx hits cx q[0],q[0]
        assert!(matches!(c, QasmError::Semantic { .. }));
        let c = parse("qreg q[3];\nh q;\nbarrier q;").unwrap();
        assert_eq!(c.gates.len(), 4);
        assert_eq!(c.gates[3].qubits, vec![0, 1, 2]);
    }

    #[test]
    fn rejects_unsupported_gate_with_location() {
        let e = parse("qreg q[3];\nccx q[0],q[1],q[2];").unwrap_err();
        assert_eq!(
            e,
            QasmError::UnsupportedGate {
                name: "ccx".into(),
                line: 4,
                col: 1
            }
        );
        assert!(e.to_string().contains("ccx"));
    }

    #[test]
    fn rejects_second_register() {
        let e = parse("qreg q[2];\nqreg r[2];").unwrap_err();
        assert!(matches!(
            e,
            QasmError::MultipleRegisters {
                kind: "quantum",
                line: 4,
                ..
            }
        ));
    }

    #[test]
    fn rejects_mid_circuit_measurement() {
        let e = parse("qreg q[1];\ncreg c[1];\nmeasure q[0] -> c[0];\nx q[0];").unwrap_err();
        assert!(matches!(
            e,
            QasmError::MidCircuitMeasurement {
                qubit: 0,
                line: 6,
                ..
            }
        ));
    }

    #[test]
    fn syntax_errors_carry_location() {
        let e = parse("qreg q[2]\nh q[0];").unwrap_err();
        match e {
            QasmError::Syntax { line, col, .. } => assert_eq!((line, col), (4, 1)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_qasm("qreg q[1];"),
            Err(QasmError::Syntax { .. })
        ));
        assert!(matches!(
            parse("qreg q[2];\nreset q[0];"),
            Err(QasmError::UnsupportedStatement { .. })
        ));
        assert!(matches!(
            parse("qreg q[2];\nh q[2];"),
            Err(QasmError::Semantic { .. })
        ));
    }
}
