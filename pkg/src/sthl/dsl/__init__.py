"""ScenethesisLang front end: lexer, parser, AST, type checker, printer."""

from __future__ import annotations

from sthl.dsl.lexer import Token, tokenize
from sthl.dsl.nodes import (
    AllowCollide,
    AllowOutside,
    And,
    Arith,
    Assert,
    Assign,
    Compare,
    Declare,
    Dot,
    InsidePred,
    Name,
    Not,
    NumberLit,
    Or,
    Program,
    PropRef,
    Rand,
    Rot,
    Span,
    StringLit,
    ValueType,
    Vec3,
)
from sthl.dsl.parser import parse
from sthl.dsl.printer import print_program
from sthl.dsl.typecheck import Symbol, TypedProgram, typecheck

__all__ = [
    "Token",
    "tokenize",
    "parse",
    "typecheck",
    "print_program",
    "Program",
    "Span",
    "ValueType",
    "Declare",
    "Assert",
    "AllowCollide",
    "AllowOutside",
    "Assign",
    "Compare",
    "InsidePred",
    "And",
    "Or",
    "Not",
    "NumberLit",
    "StringLit",
    "Name",
    "Arith",
    "Rand",
    "Vec3",
    "Rot",
    "Dot",
    "PropRef",
    "Symbol",
    "TypedProgram",
]
