use super::ir::*;
use super::lexer::{lex, Tok, Token};
use super::validate::{AslContext, Check, Env};
use super::{AslError, ErrorKind};
use crate::kernel::SimTime;
use crate::net::Scalar;

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    ctx: &'a AslContext,
}

type PResult<T> = Result<T, AslError>;

/// Drops the `pkt.` prefix so `pkt.ip.dst` and `ip.dst` name the same field.
fn field_path(text: &str) -> String {
    text.strip_prefix("pkt.").unwrap_or(text).to_string()
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn error_at(&self, t: &Token, kind: ErrorKind, msg: impl Into<String>) -> AslError {
        AslError::new(kind, t.line, t.col, msg)
    }

    fn syntax<T>(&self, expected: &str) -> PResult<T> {
        let t = self.here();
        Err(self.error_at(t, ErrorKind::Syntax, format!("expected {expected}, found {}", t.tok.describe())))
    }

    fn check(&self, at: &Token, r: Check) -> PResult<()> {
        r.map_err(|(kind, msg)| self.error_at(at, kind, msg))
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<()> {
        if self.eat(&tok) {
            Ok(())
        } else {
            self.syntax(what)
        }
    }

    fn keyword(&mut self, word: &str) -> bool {
        if matches!(self.peek(), Tok::Ident(w) if w == word) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.pos += 1;
                Ok(s)
            }
            _ => self.syntax(what),
        }
    }

    fn time(&mut self) -> PResult<SimTime> {
        let t = self.here().clone();
        match &t.tok {
            Tok::Int(s) | Tok::Decimal(s) => {
                self.pos += 1;
                SimTime::parse_decimal_secs(s).map_err(|e| self.error_at(&t, ErrorKind::Syntax, format!("bad time `{s}`: {e}")))
            }
            _ => self.syntax("a time in seconds"),
        }
    }

    fn coordinate(&mut self) -> PResult<f64> {
        let neg = self.eat(&Tok::Minus);
        let t = self.here().clone();
        match &t.tok {
            Tok::Int(s) | Tok::Decimal(s) => {
                self.pos += 1;
                let v: f64 = s
                    .parse()
                    .map_err(|_| self.error_at(&t, ErrorKind::Syntax, format!("bad coordinate `{s}`")))?;
                Ok(if neg { -v } else { v })
            }
            _ => self.syntax("a coordinate"),
        }
    }

    fn node(&mut self) -> PResult<String> {
        let at = self.here().clone();
        let name = self.ident("a node name")?;
        self.check(&at, self.ctx.check_node(&name))?;
        Ok(name)
    }

    /// `[a, b]` or a single bare name.
    fn node_list(&mut self) -> PResult<Vec<String>> {
        if !self.eat(&Tok::LBracket) {
            return Ok(vec![self.node()?]);
        }
        let mut out = Vec::new();
        if self.eat(&Tok::RBracket) {
            return Ok(out);
        }
        loop {
            out.push(self.node()?);
            if self.eat(&Tok::RBracket) {
                return Ok(out);
            }
            self.expect(Tok::Comma, "`,` or `]`")?;
        }
    }

    fn field(&mut self) -> PResult<String> {
        let at = self.here().clone();
        let path = match &at.tok {
            Tok::Path(p) => field_path(p),
            Tok::Ident(p) => p.clone(),
            _ => return self.syntax("a field path"),
        };
        self.pos += 1;
        self.check(&at, self.ctx.check_field(&path).map(|_| ()))?;
        Ok(path)
    }

    fn literal(&mut self) -> Option<Scalar> {
        let neg = matches!(self.peek(), Tok::Minus) && matches!(self.toks[self.pos + 1].tok, Tok::Int(_));
        if neg {
            self.pos += 1;
        }
        let lit = match self.peek().clone() {
            Tok::Int(s) => match format!("{}{s}", if neg { "-" } else { "" }).parse() {
                Ok(v) => Scalar::Int(v),
                Err(_) => Scalar::Str(s),
            },
            Tok::Decimal(s) | Tok::Address(s) | Tok::Str(s) => Scalar::Str(s),
            _ => return None,
        };
        self.pos += 1;
        Some(lit)
    }

    fn value(&mut self) -> PResult<Value> {
        if let Some(lit) = self.literal() {
            return Ok(Value::Lit(lit));
        }
        match self.peek().clone() {
            Tok::Ident(v) => {
                self.pos += 1;
                Ok(Value::Var(v))
            }
            _ => self.syntax("a value"),
        }
    }

    fn operand(&mut self) -> PResult<Operand> {
        if let Some(lit) = self.literal() {
            return Ok(Operand::Lit(lit));
        }
        match self.peek().clone() {
            Tok::Path(p) => {
                self.pos += 1;
                Ok(Operand::Field(field_path(&p)))
            }
            Tok::Ident(v) => {
                self.pos += 1;
                if self.ctx.schema().contains(&v) {
                    Ok(Operand::Field(v))
                } else {
                    Ok(Operand::Var(v))
                }
            }
            _ => self.syntax("a field, variable or literal"),
        }
    }

    fn condition(&mut self) -> PResult<Condition> {
        let mut lhs = self.conjunction()?;
        while self.eat(&Tok::Or) {
            lhs = Condition::or(lhs, self.conjunction()?);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> PResult<Condition> {
        let mut lhs = self.unary()?;
        while self.eat(&Tok::And) {
            lhs = Condition::and(lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Condition> {
        if self.eat(&Tok::Not) {
            return Ok(Condition::not(self.unary()?));
        }
        if self.eat(&Tok::LParen) {
            let c = self.condition()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(c);
        }
        let lhs = self.operand()?;
        let op = match self.peek() {
            Tok::Op("==") => CmpOp::Eq,
            Tok::Op("!=") => CmpOp::Ne,
            Tok::Op("<") => CmpOp::Lt,
            Tok::Op("<=") => CmpOp::Le,
            Tok::Op(">") => CmpOp::Gt,
            Tok::Op(">=") => CmpOp::Ge,
            _ => return self.syntax("a comparison operator"),
        };
        self.pos += 1;
        Ok(Condition::cmp(op, lhs, self.operand()?))
    }

    fn event(&mut self) -> PResult<MessagePrimitive> {
        let at = self.here().clone();
        let name = self.ident("a message primitive")?;
        self.expect(Tok::LParen, "`(`")?;
        let ev = match name.as_str() {
            "drop" => MessagePrimitive::Drop {
                pkt: self.ident("a packet variable")?,
            },
            "create" => {
                let pkt = self.ident("a packet variable")?;
                let mut fields = Vec::new();
                while self.eat(&Tok::Comma) {
                    let f = self.field()?;
                    self.expect(Tok::Comma, "`,`")?;
                    fields.push((f, self.value()?));
                }
                MessagePrimitive::Create { pkt, fields }
            }
            "clone" => {
                let src = self.ident("a packet variable")?;
                self.expect(Tok::Comma, "`,`")?;
                MessagePrimitive::Clone {
                    src,
                    dst: self.ident("a packet variable")?,
                }
            }
            "change" => {
                let pkt = self.ident("a packet variable")?;
                self.expect(Tok::Comma, "`,`")?;
                let field = self.field()?;
                self.expect(Tok::Comma, "`,`")?;
                MessagePrimitive::Change {
                    pkt,
                    field,
                    value: self.value()?,
                }
            }
            "send" => {
                let pkt = self.ident("a packet variable")?;
                self.expect(Tok::Comma, "`,`")?;
                MessagePrimitive::Send { pkt, delay: self.time()? }
            }
            "retrieve" => {
                let pkt = self.ident("a packet variable")?;
                self.expect(Tok::Comma, "`,`")?;
                let field = self.field()?;
                self.expect(Tok::Comma, "`,`")?;
                MessagePrimitive::Retrieve {
                    pkt,
                    field,
                    var: self.ident("a variable name")?,
                }
            }
            "put" => {
                let pkt = self.ident("a packet variable")?;
                self.expect(Tok::Comma, "`,`")?;
                let nodes = self.node_list()?;
                self.expect(Tok::Comma, "`,`")?;
                let direction = match self.ident("TX or RX")?.as_str() {
                    "TX" | "tx" => Direction::Tx,
                    "RX" | "rx" => Direction::Rx,
                    _ => {
                        self.pos -= 1;
                        return self.syntax("TX or RX");
                    }
                };
                self.expect(Tok::Comma, "`,`")?;
                let update_stats = match self.ident("true or false")?.as_str() {
                    "true" => true,
                    "false" => false,
                    _ => {
                        self.pos -= 1;
                        return self.syntax("true or false");
                    }
                };
                self.expect(Tok::Comma, "`,`")?;
                MessagePrimitive::Put {
                    pkt,
                    nodes,
                    direction,
                    update_stats,
                    delay: self.time()?,
                }
            }
            other => {
                return Err(self.error_at(&at, ErrorKind::Syntax, format!("unknown primitive `{other}`")));
            }
        };
        self.expect(Tok::RParen, "`)`")?;
        Ok(ev)
    }

    fn events(&mut self, env: &mut Env) -> PResult<Vec<MessagePrimitive>> {
        let mut out = Vec::new();
        loop {
            while self.eat(&Tok::Semi) {}
            if self.eat(&Tok::RBrace) {
                break;
            }
            let at = self.here().clone();
            if matches!(&at.tok, Tok::Ident(w) if w == "filter") {
                return Err(self.error_at(&at, ErrorKind::Syntax, "filter must come first and only in conditional attacks"));
            }
            let ev = self.event()?;
            self.check(&at, self.ctx.check_event(env, &ev))?;
            out.push(ev);
        }
        Ok(out)
    }

    fn attack(&mut self, cfg: &mut AttackConfig, from: &Token) -> PResult<()> {
        let start = self.time()?;
        let mut period = None;
        let mut nodes = None;
        loop {
            let at = self.here().clone();
            if self.keyword("every") {
                if period.is_some() {
                    return Err(self.error_at(&at, ErrorKind::Syntax, "duplicate `every`"));
                }
                period = Some((self.time()?, at));
            } else if self.keyword("nodes") {
                if nodes.is_some() {
                    return Err(self.error_at(&at, ErrorKind::Syntax, "duplicate `nodes`"));
                }
                self.expect(Tok::Assign, "`=`")?;
                let mut list = self.node_list()?;
                while self.eat(&Tok::Comma) {
                    list.push(self.node()?);
                }
                nodes = Some(list);
            } else {
                break;
            }
        }
        if !self.keyword("do") {
            return self.syntax("`every`, `nodes` or `do`");
        }
        self.expect(Tok::LBrace, "`{`")?;
        let nodes = nodes.unwrap_or_default();
        match period {
            Some((period, at)) => {
                if period.as_micros() == 0 {
                    return Err(self.error_at(&at, ErrorKind::Syntax, "period must be positive"));
                }
                let mut env = Env::unconditional(nodes.is_empty());
                let events = self.events(&mut env)?;
                if events.is_empty() {
                    return Err(self.error_at(from, ErrorKind::Syntax, "attack has no events"));
                }
                cfg.unconditional.push(UnconditionalAttack {
                    start,
                    period,
                    nodes,
                    events,
                });
            }
            None => {
                if nodes.is_empty() {
                    return Err(self.error_at(from, ErrorKind::Syntax, "conditional attack needs `nodes = [...]`"));
                }
                if !self.keyword("filter") {
                    return self.syntax("`filter(`");
                }
                self.expect(Tok::LParen, "`(`")?;
                let at = self.here().clone();
                let filter = self.condition()?;
                self.expect(Tok::RParen, "`)`")?;
                let mut env = Env::conditional();
                self.check(&at, self.ctx.check_condition(&env, &filter))?;
                let events = self.events(&mut env)?;
                if events.is_empty() {
                    return Err(self.error_at(from, ErrorKind::Syntax, "attack has no events"));
                }
                cfg.conditional.push(ConditionalAttack {
                    start,
                    nodes,
                    filter,
                    events,
                });
            }
        }
        Ok(())
    }

    fn physical(&mut self, kind: &str) -> PResult<NodePrimitive> {
        self.expect(Tok::LParen, "`(`")?;
        let node = self.node()?;
        self.expect(Tok::Comma, "`,`")?;
        let at = self.time()?;
        let prim = if kind == "destroy" {
            NodePrimitive::Destroy { node, at }
        } else {
            let mut position = [0.0; 3];
            for c in &mut position {
                self.expect(Tok::Comma, "`,`")?;
                *c = self.coordinate()?;
            }
            NodePrimitive::Move { node, at, position }
        };
        self.expect(Tok::RParen, "`)`")?;
        Ok(prim)
    }

    fn program(&mut self) -> PResult<AttackConfig> {
        let mut cfg = AttackConfig::default();
        loop {
            while self.eat(&Tok::Semi) {}
            let t = self.here().clone();
            match &t.tok {
                Tok::Eof => break,
                Tok::Ident(w) if w == "destroy" || w == "move" => {
                    self.pos += 1;
                    let p = self.physical(w)?;
                    cfg.physical.push(p);
                }
                Tok::Ident(w) if w == "from" => {
                    self.pos += 1;
                    self.attack(&mut cfg, &t)?;
                }
                _ => return self.syntax("`destroy`, `move` or `from`"),
            }
        }
        cfg.sort();
        Ok(cfg)
    }
}

/// Parses and validates ASL source against `ctx`.
pub fn parse(src: &str, ctx: &AslContext) -> Result<AttackConfig, AslError> {
    let toks = lex(src)?;
    Parser { toks, pos: 0, ctx }.program()
}

