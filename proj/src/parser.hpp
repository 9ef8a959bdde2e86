#ifndef MTC_PARSER_HPP
#define MTC_PARSER_HPP

#include <string_view>

#include "ast.hpp"

namespace mtc {

// Parses a whole program: type definitions, pred/mode declarations and
// clauses. Checks that every called predicate is defined or builtin.
// Throws CompileError with a source position on any violation.
Program parse_program(std::string_view text);

// Parses a single term (list sugar expanded). Trailing '.' is optional.
Term parse_term_text(std::string_view text);

// Parses a single goal written in clause-body syntax.
Goal parse_goal_text(std::string_view text);

// Reads a sequence of '.'-terminated top-level terms (test suite files).
std::vector<Term> parse_suite_terms(std::string_view text);

// Converts a term to a goal: ','/';' chains, '='/comparison/'is' operators,
// not/1 and (if then else) become the corresponding goal forms.
Goal term_to_goal(const Term &t);

// Converts a term such as list(int) to a type expression.
TypeExpr term_to_type_expr(const Term &t);

}  // namespace mtc

#endif
