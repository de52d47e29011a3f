//! Java tokenizer: just enough lexical structure for brace, paren and
//! declaration tracking. Comments vanish; literals become opaque tokens.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokKind {
    Ident,
    Punct,
    Str,
    Char,
    Num,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokKind,
    pub text: String,
    /// 1-based line of the first character.
    pub line: u32,
    /// 1-based line of the last character (differs for text blocks).
    pub end_line: u32,
}

impl Token {
    pub fn is(&self, text: &str) -> bool {
        self.text == text && matches!(self.kind, TokKind::Punct | TokKind::Ident)
    }

    pub fn is_ident(&self) -> bool {
        self.kind == TokKind::Ident
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub line: u32,
    pub reason: String,
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == '$'
}

fn is_ident_part(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0usize;
    let mut line = 1u32;
    let n = chars.len();

    while i < n {
        let c = chars[i];
        if c == '\n' {
            line += 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '/' && i + 1 < n && chars[i + 1] == '/' {
            while i < n && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '/' && i + 1 < n && chars[i + 1] == '*' {
            let start_line = line;
            i += 2;
            loop {
                if i + 1 >= n {
                    return Err(LexError {
                        line: start_line,
                        reason: "unterminated comment".into(),
                    });
                }
                if chars[i] == '*' && chars[i + 1] == '/' {
                    i += 2;
                    break;
                }
                if chars[i] == '\n' {
                    line += 1;
                }
                i += 1;
            }
            continue;
        }
        let start_line = line;
        if c == '"' {
            let text_block = i + 2 < n && chars[i + 1] == '"' && chars[i + 2] == '"';
            let mut j = if text_block { i + 3 } else { i + 1 };
            loop {
                if j >= n {
                    return Err(LexError {
                        line: start_line,
                        reason: "unterminated string".into(),
                    });
                }
                match chars[j] {
                    '\\' => {
                        if j + 1 < n && chars[j + 1] == '\n' {
                            line += 1;
                        }
                        j += 2;
                    }
                    '\n' if !text_block => {
                        return Err(LexError {
                            line: start_line,
                            reason: "newline in string literal".into(),
                        })
                    }
                    '\n' => {
                        line += 1;
                        j += 1;
                    }
                    '"' if text_block => {
                        if j + 2 < n && chars[j + 1] == '"' && chars[j + 2] == '"' {
                            j += 3;
                            break;
                        }
                        j += 1;
                    }
                    '"' => {
                        j += 1;
                        break;
                    }
                    _ => j += 1,
                }
            }
            out.push(Token {
                kind: TokKind::Str,
                text: chars[i..j].iter().collect(),
                line: start_line,
                end_line: line,
            });
            i = j;
            continue;
        }
        if c == '\'' {
            let mut j = i + 1;
            while j < n && chars[j] != '\'' {
                if chars[j] == '\n' {
                    return Err(LexError {
                        line,
                        reason: "newline in char literal".into(),
                    });
                }
                j += if chars[j] == '\\' { 2 } else { 1 };
            }
            if j >= n {
                return Err(LexError {
                    line,
                    reason: "unterminated char literal".into(),
                });
            }
            out.push(Token {
                kind: TokKind::Char,
                text: chars[i..=j].iter().collect(),
                line,
                end_line: line,
            });
            i = j + 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && i + 1 < n && chars[i + 1].is_ascii_digit()) {
            let mut j = i + 1;
            while j < n {
                let d = chars[j];
                let hex = chars[i..j].iter().any(|x| matches!(x, 'x' | 'X'));
                let exp_sign = matches!(d, '+' | '-')
                    && match chars[j - 1] {
                        'e' | 'E' => !hex,
                        'p' | 'P' => hex,
                        _ => false,
                    };
                if is_ident_part(d) || d == '.' || exp_sign {
                    j += 1;
                } else {
                    break;
                }
            }
            out.push(Token {
                kind: TokKind::Num,
                text: chars[i..j].iter().collect(),
                line,
                end_line: line,
            });
            i = j;
            continue;
        }
        if is_ident_start(c) {
            let mut j = i + 1;
            while j < n && is_ident_part(chars[j]) {
                j += 1;
            }
            out.push(Token {
                kind: TokKind::Ident,
                text: chars[i..j].iter().collect(),
                line,
                end_line: line,
            });
            i = j;
            continue;
        }
        let three: String = chars[i..n.min(i + 3)].iter().collect();
        let two: String = chars[i..n.min(i + 2)].iter().collect();
        let text = if three == "..." {
            three
        } else if two == "->" || two == "::" {
            two
        } else {
            c.to_string()
        };
        i += text.chars().count();
        out.push(Token {
            kind: TokKind::Punct,
            text,
            line,
            end_line: line,
        });
    }
    Ok(out)
}
