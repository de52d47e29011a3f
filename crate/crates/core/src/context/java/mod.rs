//! Java source frontend: a tokenizer and a structural parser.

mod lexer;
mod parser;

pub use lexer::{tokenize, LexError, TokKind, Token};
pub use parser::{
    parse_java, Block, BlockKind, ClassDecl, ClassKind, IdentUse, Invocation, MethodDecl, Param, ParseError,
    SourceFile, Span, VarDecl, VarKind,
};
