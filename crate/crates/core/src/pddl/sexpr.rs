use std::fmt;

use super::PddlError;

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SExpr {
    Atom { text: String, pos: Pos },
    List { items: Vec<SExpr>, pos: Pos },
}

impl SExpr {
    pub fn pos(&self) -> Pos {
        match self {
            SExpr::Atom { pos, .. } | SExpr::List { pos, .. } => *pos,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            SExpr::Atom { text, .. } => Some(text),
            SExpr::List { .. } => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List { items, .. } => Some(items),
            SExpr::Atom { .. } => None,
        }
    }

    /// Lower-cased head symbol of a list, if the list starts with an atom.
    pub fn head_keyword(&self) -> Option<String> {
        self.as_list()
            .and_then(|items| items.first())
            .and_then(SExpr::as_atom)
            .map(str::to_ascii_lowercase)
    }
}

enum Token {
    Open(Pos),
    Close(Pos),
    Word(String, Pos),
}

fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut line = 1;
    let mut col = 1;
    let mut chars = text.chars().peekable();
    let mut word = String::new();
    let mut word_pos = Pos::default();

    fn flush(word: &mut String, pos: Pos, tokens: &mut Vec<Token>) {
        if !word.is_empty() {
            tokens.push(Token::Word(std::mem::take(word), pos));
        }
    }

    while let Some(c) = chars.next() {
        let here = Pos { line, col };
        match c {
            '(' => {
                flush(&mut word, word_pos, &mut tokens);
                tokens.push(Token::Open(here));
            }
            ')' => {
                flush(&mut word, word_pos, &mut tokens);
                tokens.push(Token::Close(here));
            }
            ';' => {
                flush(&mut word, word_pos, &mut tokens);
                while let Some(&n) = chars.peek() {
                    if n == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            c if c.is_whitespace() => flush(&mut word, word_pos, &mut tokens),
            c => {
                if word.is_empty() {
                    word_pos = here;
                }
                word.push(c);
            }
        }
        if c == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    flush(&mut word, word_pos, &mut tokens);
    tokens
}

/// Reads every top-level s-expression in `text`.
pub fn parse_all(text: &str) -> Result<Vec<SExpr>, PddlError> {
    let mut stack: Vec<(Pos, Vec<SExpr>)> = Vec::new();
    let mut top = Vec::new();
    for token in tokenize(text) {
        match token {
            Token::Open(pos) => stack.push((pos, Vec::new())),
            Token::Close(pos) => {
                let (open, items) = stack.pop().ok_or_else(|| PddlError::Syntax {
                    line: pos.line,
                    col: pos.col,
                    msg: "unbalanced ')'".into(),
                })?;
                let list = SExpr::List { items, pos: open };
                match stack.last_mut() {
                    Some((_, parent)) => parent.push(list),
                    None => top.push(list),
                }
            }
            Token::Word(text, pos) => match stack.last_mut() {
                Some((_, parent)) => parent.push(SExpr::Atom { text, pos }),
                None => {
                    return Err(PddlError::Syntax {
                        line: pos.line,
                        col: pos.col,
                        msg: format!("unexpected symbol `{text}` outside of any list"),
                    })
                }
            },
        }
    }
    if let Some((pos, _)) = stack.pop() {
        return Err(PddlError::Syntax {
            line: pos.line,
            col: pos.col,
            msg: "unclosed '('".into(),
        });
    }
    Ok(top)
}

/// Reads exactly one top-level s-expression.
pub fn parse_one(text: &str) -> Result<SExpr, PddlError> {
    let mut all = parse_all(text)?;
    match all.len() {
        1 => Ok(all.pop().unwrap()),
        0 => Err(PddlError::Syntax {
            line: 1,
            col: 1,
            msg: "empty input".into(),
        }),
        _ => {
            let pos = all[1].pos();
            Err(PddlError::Syntax {
                line: pos.line,
                col: pos.col,
                msg: "trailing content after the first expression".into(),
            })
        }
    }
}
