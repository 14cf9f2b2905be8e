// Copyright 2026 The riskbn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// The CPD expression language.
//
// Grammar (left associative, '*' binds tighter than '+'/'-'):
//   expr   := term (('+'|'-') term)*
//   term   := unary ('*' unary)*
//   unary  := '-' unary | primary
//   primary:= number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//
// Recognized calls: the distribution names (see dist.hpp), if(guard, whenTrue,
// whenFalse) over a Boolean guard, and Mixture(w1, e1, w2, e2, ...).
// Linear arithmetic is canonicalized into a single weighted sum; a sum of
// constant-weighted distributions is canonicalized into a Mixture.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "riskbn/common.hpp"
#include "riskbn/dist.hpp"

namespace riskbn {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class ExprKind { Constant, Var, WeightedSum, Product, Dist, Mixture, Partitioned };

struct Expr {
  ExprKind kind;

  // Constant
  double value = 0.0;
  // Var
  std::string var;
  // WeightedSum: bias + sum(coeff_i * term_i); terms are non-constant.
  std::vector<std::pair<double, ExprPtr>> terms;
  double bias = 0.0;
  // Product (nonlinear arithmetic)
  ExprPtr lhs, rhs;
  // Dist
  DistName dist = DistName::Normal;
  std::vector<ExprPtr> params;
  // Mixture
  std::vector<double> weights;
  std::vector<ExprPtr> comps;
  // Partitioned: discrete guard variable with one expression per state label.
  std::string guard;
  std::vector<std::pair<std::string, ExprPtr>> cases;
};

inline ExprPtr make_const(double v) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Constant;
  e->value = v;
  return e;
}

inline ExprPtr make_var(std::string id) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Var;
  e->var = std::move(id);
  return e;
}

inline ExprPtr make_sum(std::vector<std::pair<double, ExprPtr>> terms, double bias) {
  if (terms.empty()) return make_const(bias);
  if (terms.size() == 1 && bias == 0.0 && terms[0].first == 1.0) return terms[0].second;
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::WeightedSum;
  e->terms = std::move(terms);
  e->bias = bias;
  return e;
}

inline ExprPtr make_product(ExprPtr a, ExprPtr b) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Product;
  e->lhs = std::move(a);
  e->rhs = std::move(b);
  return e;
}

inline ExprPtr make_dist(DistName d, std::vector<ExprPtr> params) {
  if (static_cast<int>(params.size()) != dist_arity(d))
    throw structural_error(detail::cat(dist_name(d), " takes ", dist_arity(d), " parameter(s), got ",
                                       params.size()));
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Dist;
  e->dist = d;
  e->params = std::move(params);
  return e;
}

inline ExprPtr make_mixture(std::vector<double> weights, std::vector<ExprPtr> comps) {
  if (weights.size() != comps.size() || weights.empty())
    throw structural_error("mixture needs matching weight/component lists");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw structural_error("mixture weights must be nonnegative");
    total += w;
  }
  if (std::fabs(total - 1.0) > 1e-9)
    throw structural_error(detail::cat("mixture weights sum to ", total, ", expected 1"));
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Mixture;
  e->weights = std::move(weights);
  e->comps = std::move(comps);
  return e;
}

inline ExprPtr make_partitioned(std::string guard, std::vector<std::pair<std::string, ExprPtr>> cases) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Partitioned;
  e->guard = std::move(guard);
  e->cases = std::move(cases);
  return e;
}

// ---------------------------------------------------------------------------
// Queries

inline void collect_vars(const ExprPtr& e, std::set<std::string>& out) {
  switch (e->kind) {
    case ExprKind::Constant: break;
    case ExprKind::Var: out.insert(e->var); break;
    case ExprKind::WeightedSum:
      for (auto& [c, t] : e->terms) collect_vars(t, out);
      break;
    case ExprKind::Product:
      collect_vars(e->lhs, out);
      collect_vars(e->rhs, out);
      break;
    case ExprKind::Dist:
      for (auto& p : e->params) collect_vars(p, out);
      break;
    case ExprKind::Mixture:
      for (auto& c : e->comps) collect_vars(c, out);
      break;
    case ExprKind::Partitioned:
      out.insert(e->guard);
      for (auto& [s, c] : e->cases) collect_vars(c, out);
      break;
  }
}

inline std::set<std::string> free_vars(const ExprPtr& e) {
  std::set<std::string> out;
  collect_vars(e, out);
  return out;
}

// True when the expression resolves to a number once all variables are bound
// (no Dist/Mixture anywhere).
inline bool is_deterministic(const ExprPtr& e) {
  switch (e->kind) {
    case ExprKind::Constant:
    case ExprKind::Var: return true;
    case ExprKind::WeightedSum:
      for (auto& [c, t] : e->terms)
        if (!is_deterministic(t)) return false;
      return true;
    case ExprKind::Product: return is_deterministic(e->lhs) && is_deterministic(e->rhs);
    case ExprKind::Dist:
    case ExprKind::Mixture: return false;
    case ExprKind::Partitioned:
      for (auto& [s, c] : e->cases)
        if (!is_deterministic(c)) return false;
      return true;
  }
  return false;
}

inline bool is_stochastic(const ExprPtr& e) { return !is_deterministic(e); }

// ---------------------------------------------------------------------------
// Structural equality (used by round-trip tests)

inline bool expr_equal(const ExprPtr& a, const ExprPtr& b) {
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case ExprKind::Constant: return nearly_equal(a->value, b->value);
    case ExprKind::Var: return a->var == b->var;
    case ExprKind::WeightedSum: {
      if (!nearly_equal(a->bias, b->bias) || a->terms.size() != b->terms.size()) return false;
      for (std::size_t i = 0; i < a->terms.size(); ++i)
        if (!nearly_equal(a->terms[i].first, b->terms[i].first) ||
            !expr_equal(a->terms[i].second, b->terms[i].second))
          return false;
      return true;
    }
    case ExprKind::Product: return expr_equal(a->lhs, b->lhs) && expr_equal(a->rhs, b->rhs);
    case ExprKind::Dist: {
      if (a->dist != b->dist || a->params.size() != b->params.size()) return false;
      for (std::size_t i = 0; i < a->params.size(); ++i)
        if (!expr_equal(a->params[i], b->params[i])) return false;
      return true;
    }
    case ExprKind::Mixture: {
      if (a->weights.size() != b->weights.size()) return false;
      for (std::size_t i = 0; i < a->weights.size(); ++i)
        if (!nearly_equal(a->weights[i], b->weights[i]) || !expr_equal(a->comps[i], b->comps[i]))
          return false;
      return true;
    }
    case ExprKind::Partitioned: {
      if (a->guard != b->guard || a->cases.size() != b->cases.size()) return false;
      for (std::size_t i = 0; i < a->cases.size(); ++i)
        if (a->cases[i].first != b->cases[i].first || !expr_equal(a->cases[i].second, b->cases[i].second))
          return false;
      return true;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Canonical printer

namespace detail {

inline std::string fmt_num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

inline std::string print_expr(const ExprPtr& e, bool parenthesize_sum = false);

inline std::string print_term(double coeff, const ExprPtr& t) {
  std::string body = print_expr(t, /*parenthesize_sum=*/true);
  if (coeff == 1.0) return body;
  return detail::cat(detail::fmt_num(coeff), "*", body);
}

inline std::string print_expr(const ExprPtr& e, bool parenthesize_sum) {
  switch (e->kind) {
    case ExprKind::Constant: return detail::fmt_num(e->value);
    case ExprKind::Var: return e->var;
    case ExprKind::WeightedSum: {
      std::string s;
      bool first = true;
      if (e->bias != 0.0) {
        s = detail::fmt_num(e->bias);
        first = false;
      }
      for (auto& [c, t] : e->terms) {
        if (first) {
          s = c < 0.0 ? detail::cat("-", print_term(-c, t)) : print_term(c, t);
          first = false;
        } else {
          s += c < 0.0 ? detail::cat(" - ", print_term(-c, t)) : detail::cat(" + ", print_term(c, t));
        }
      }
      if (first) s = detail::fmt_num(e->bias);
      return parenthesize_sum ? detail::cat("(", s, ")") : s;
    }
    case ExprKind::Product:
      return detail::cat(print_expr(e->lhs, true), "*", print_expr(e->rhs, true));
    case ExprKind::Dist: {
      std::string s = detail::cat(dist_name(e->dist), "(");
      for (std::size_t i = 0; i < e->params.size(); ++i) {
        if (i) s += ", ";
        s += print_expr(e->params[i]);
      }
      return s + ")";
    }
    case ExprKind::Mixture: {
      std::string s = "Mixture(";
      for (std::size_t i = 0; i < e->comps.size(); ++i) {
        if (i) s += ", ";
        s += detail::cat(detail::fmt_num(e->weights[i]), ", ", print_expr(e->comps[i]));
      }
      return s + ")";
    }
    case ExprKind::Partitioned: {
      // Printable only for the Boolean if-form; larger guards come from the
      // model file case map and are re-emitted there.
      if (e->cases.size() == 2 && e->cases[0].first == "True" && e->cases[1].first == "False")
        return detail::cat("if(", e->guard, ", ", print_expr(e->cases[0].second), ", ",
                           print_expr(e->cases[1].second), ")");
      std::string s = detail::cat("cases(", e->guard);
      for (auto& [st, c] : e->cases) s += detail::cat(", ", st, ": ", print_expr(c));
      return s + ")";
    }
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Canonicalization: fold linear arithmetic into weighted sums, recognize
// constant-weighted sums of distributions as mixtures.

inline ExprPtr canonicalize(const ExprPtr& e);

namespace detail {

struct LinearAcc {
  double bias = 0.0;
  std::vector<std::pair<double, ExprPtr>> terms;        // deterministic, non-constant
  std::vector<std::pair<double, ExprPtr>> stochastic;   // Dist/Mixture components
};

// Peels constant multipliers off a product chain without canonicalizing the
// rest.  A null core means the whole expression is the constant `scale`.
inline std::pair<double, ExprPtr> split_scale(const ExprPtr& e) {
  if (e->kind == ExprKind::Constant) return {e->value, nullptr};
  if (e->kind == ExprKind::Product) {
    auto [ls, lc] = split_scale(e->lhs);
    auto [rs, rc] = split_scale(e->rhs);
    if (!lc && !rc) return {ls * rs, nullptr};
    if (!lc) return {ls * rs, rc};
    if (!rc) return {ls * rs, lc};
    return {1.0, e};
  }
  return {1.0, e};
}

inline void accumulate(const ExprPtr& e, double scale, LinearAcc& acc) {
  switch (e->kind) {
    case ExprKind::Constant:
      acc.bias += scale * e->value;
      return;
    case ExprKind::WeightedSum:
      acc.bias += scale * e->bias;
      for (auto& [c, t] : e->terms) accumulate(t, scale * c, acc);
      return;
    case ExprKind::Product: {
      auto [s, core] = split_scale(e);
      if (!core) {
        acc.bias += scale * s;
        return;
      }
      if (core->kind != ExprKind::Product) {
        accumulate(core, scale * s, acc);
        return;
      }
      ExprPtr cc = canonicalize(core);
      if (is_stochastic(cc)) throw structural_error("cannot multiply distribution expressions");
      acc.terms.emplace_back(scale * s, cc);
      return;
    }
    case ExprKind::Dist:
    case ExprKind::Mixture:
      acc.stochastic.emplace_back(scale, canonicalize(e));
      return;
    default:
      acc.terms.emplace_back(scale, canonicalize(e));
      return;
  }
}

}  // namespace detail

inline ExprPtr canonicalize(const ExprPtr& e) {
  switch (e->kind) {
    case ExprKind::Constant:
    case ExprKind::Var:
      return e;
    case ExprKind::WeightedSum: {
      detail::LinearAcc acc;
      acc.bias = e->bias;
      for (auto& [c, t] : e->terms) detail::accumulate(t, c, acc);
      if (!acc.stochastic.empty()) {
        if (!acc.terms.empty() || acc.bias != 0.0)
          throw structural_error("cannot mix distribution terms with arithmetic in one expression");
        std::vector<double> w;
        std::vector<ExprPtr> comps;
        for (auto& [c, t] : acc.stochastic) {
          w.push_back(c);
          comps.push_back(t);
        }
        if (w.size() == 1 && nearly_equal(w[0], 1.0)) return comps[0];
        return make_mixture(std::move(w), std::move(comps));
      }
      // Merge duplicate variable terms for a stable canonical form.
      std::vector<std::pair<double, ExprPtr>> merged;
      for (auto& [c, t] : acc.terms) {
        bool found = false;
        if (t->kind == ExprKind::Var) {
          for (auto& m : merged)
            if (m.second->kind == ExprKind::Var && m.second->var == t->var) {
              m.first += c;
              found = true;
              break;
            }
        }
        if (!found) merged.emplace_back(c, t);
      }
      return make_sum(std::move(merged), acc.bias);
    }
    case ExprKind::Product: {
      auto [s, core] = detail::split_scale(e);
      if (!core) return make_const(s);
      if (core->kind != ExprKind::Product) {
        auto sum = std::make_shared<Expr>();
        sum->kind = ExprKind::WeightedSum;
        sum->terms.emplace_back(s, core);
        return canonicalize(sum);
      }
      ExprPtr l = canonicalize(core->lhs), r = canonicalize(core->rhs);
      if (is_stochastic(l) || is_stochastic(r))
        throw structural_error("cannot multiply distribution expressions");
      ExprPtr prod = make_product(l, r);
      if (s == 1.0) return prod;
      auto sum = std::make_shared<Expr>();
      sum->kind = ExprKind::WeightedSum;
      sum->terms.emplace_back(s, prod);
      return sum;
    }
    case ExprKind::Dist: {
      std::vector<ExprPtr> ps;
      for (auto& p : e->params) {
        ExprPtr cp = canonicalize(p);
        if (is_stochastic(cp)) throw structural_error("distribution parameters must be deterministic");
        ps.push_back(cp);
      }
      return make_dist(e->dist, std::move(ps));
    }
    case ExprKind::Mixture: {
      std::vector<ExprPtr> cs;
      for (auto& c : e->comps) cs.push_back(canonicalize(c));
      return make_mixture(e->weights, std::move(cs));
    }
    case ExprKind::Partitioned: {
      std::vector<std::pair<std::string, ExprPtr>> cs;
      for (auto& [s, c] : e->cases) cs.emplace_back(s, canonicalize(c));
      return make_partitioned(e->guard, std::move(cs));
    }
  }
  return e;
}

// ---------------------------------------------------------------------------
// Parser

namespace detail {

class ExprParser {
 public:
  explicit ExprParser(const std::string& text) : text_(text) {}

  ExprPtr parse() {
    ExprPtr e = parse_sum();
    skip_ws();
    if (pos_ != text_.size()) throw parse_error("unexpected trailing input", pos_);
    return canonicalize(e);
  }

 private:
  const std::string& text_;
  std::size_t pos_ = 0;

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  ExprPtr parse_sum() {
    std::vector<std::pair<double, ExprPtr>> terms;
    terms.emplace_back(1.0, parse_term());
    for (;;) {
      skip_ws();
      if (eat('+')) terms.emplace_back(1.0, parse_term());
      else if (eat('-')) terms.emplace_back(-1.0, parse_term());
      else break;
    }
    if (terms.size() == 1) return terms[0].second;
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::WeightedSum;
    e->terms = std::move(terms);
    return e;
  }

  ExprPtr parse_term() {
    ExprPtr e = parse_unary();
    for (;;) {
      skip_ws();
      if (eat('*')) e = make_product(e, parse_unary());
      else break;
    }
    return e;
  }

  ExprPtr parse_unary() {
    skip_ws();
    if (eat('-')) {
      auto e = std::make_shared<Expr>();
      e->kind = ExprKind::WeightedSum;
      e->terms.emplace_back(-1.0, parse_unary());
      return e;
    }
    return parse_primary();
  }

  ExprPtr parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) throw parse_error("unexpected end of expression", pos_);
    char c = text_[pos_];
    if (eat('(')) {
      ExprPtr e = parse_sum();
      if (!eat(')')) throw parse_error("expected ')'", pos_);
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
    throw parse_error(cat("unexpected character '", c, "'"), pos_);
  }

  ExprPtr parse_number() {
    std::size_t start = pos_;
    std::size_t consumed = 0;
    double v = 0.0;
    try {
      v = std::stod(text_.substr(start), &consumed);
    } catch (const std::exception&) {
      throw parse_error("malformed number", start);
    }
    pos_ = start + consumed;
    return make_const(v);
  }

  ExprPtr parse_ident() {
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    std::string name = text_.substr(start, pos_ - start);
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == '(') return parse_call(name, start);
    return make_var(name);
  }

  ExprPtr parse_call(const std::string& name, std::size_t name_pos) {
    eat('(');
    std::vector<ExprPtr> args;
    if (!eat(')')) {
      do {
        args.push_back(parse_sum());
      } while (eat(','));
      if (!eat(')')) throw parse_error("expected ')' after arguments", pos_);
    }
    static const std::map<std::string, DistName> kDists = {
        {"Normal", DistName::Normal},       {"Exponential", DistName::Exponential},
        {"Gamma", DistName::Gamma},         {"Poisson", DistName::Poisson},
        {"Geometric", DistName::Geometric}, {"Uniform", DistName::Uniform}};
    if (auto it = kDists.find(name); it != kDists.end()) {
      if (static_cast<int>(args.size()) != dist_arity(it->second))
        throw parse_error(cat(name, " takes ", dist_arity(it->second), " argument(s), got ", args.size()),
                          name_pos);
      return make_dist(it->second, std::move(args));
    }
    if (name == "if") {
      if (args.size() != 3) throw parse_error("if(guard, whenTrue, whenFalse) takes 3 arguments", name_pos);
      if (args[0]->kind != ExprKind::Var) throw parse_error("if() guard must be a variable", name_pos);
      return make_partitioned(args[0]->var, {{"True", args[1]}, {"False", args[2]}});
    }
    if (name == "Mixture") {
      if (args.size() < 2 || args.size() % 2 != 0)
        throw parse_error("Mixture(w1, e1, ...) takes weight/expression pairs", name_pos);
      std::vector<double> w;
      std::vector<ExprPtr> comps;
      for (std::size_t i = 0; i < args.size(); i += 2) {
        if (args[i]->kind != ExprKind::Constant)
          throw parse_error("Mixture weights must be numeric constants", name_pos);
        w.push_back(args[i]->value);
        comps.push_back(args[i + 1]);
      }
      return make_mixture(std::move(w), std::move(comps));
    }
    throw parse_error(cat("unknown function '", name, "'"), name_pos);
  }
};

}  // namespace detail

inline ExprPtr parse_expr(const std::string& text) { return detail::ExprParser(text).parse(); }

// ---------------------------------------------------------------------------
// Evaluation

// Assignment maps variable id -> numeric value for continuous variables, or
// state label for discrete guards.
struct Assignment {
  std::map<std::string, double> values;
  std::map<std::string, std::string> states;

  double value(const std::string& id) const {
    auto it = values.find(id);
    if (it == values.end()) throw structural_error(detail::cat("missing assignment for '", id, "'"));
    return it->second;
  }
  const std::string& state(const std::string& id) const {
    auto it = states.find(id);
    if (it == states.end()) throw structural_error(detail::cat("missing state assignment for '", id, "'"));
    return it->second;
  }
};

inline double eval_value(const ExprPtr& e, const Assignment& a) {
  switch (e->kind) {
    case ExprKind::Constant: return e->value;
    case ExprKind::Var: return a.value(e->var);
    case ExprKind::WeightedSum: {
      double s = e->bias;
      for (auto& [c, t] : e->terms) s += c * eval_value(t, a);
      return s;
    }
    case ExprKind::Product: return eval_value(e->lhs, a) * eval_value(e->rhs, a);
    case ExprKind::Partitioned: {
      const std::string& st = a.state(e->guard);
      for (auto& [s, c] : e->cases)
        if (s == st) return eval_value(c, a);
      throw structural_error(detail::cat("guard '", e->guard, "' has no case for state '", st, "'"));
    }
    default:
      throw structural_error("expression is stochastic; no point value");
  }
}

// Resolved stochastic expression: a mixture of parameterized distributions
// (a single Dist is a one-component mixture).
struct ResolvedDensity {
  std::vector<double> weights;
  std::vector<Dist> comps;

  bool discrete() const {
    for (auto& c : comps)
      if (!c.discrete()) return false;
    return true;
  }
  double pdf(double x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < comps.size(); ++i) s += weights[i] * comps[i].pdf(x);
    return s;
  }
  double cdf(double x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < comps.size(); ++i) s += weights[i] * comps[i].cdf(x);
    return s;
  }
  double mean() const {
    double s = 0.0;
    for (std::size_t i = 0; i < comps.size(); ++i) s += weights[i] * comps[i].mean();
    return s;
  }
  std::pair<double, double> support(double eps) const {
    auto b = support_bound(eps);
    return {b.lo, b.hi};
  }
  SupportBound support_bound(double eps) const {
    SupportBound out{HUGE_VAL, -HUGE_VAL, true, true};
    for (auto& c : comps) {
      auto [l, h] = c.support(eps);
      auto [lh, hh] = c.support_hardness();
      if (l < out.lo - 1e-12) {
        out.lo = l;
        out.lo_hard = lh;
      } else if (l <= out.lo + 1e-12) {
        out.lo = std::min(out.lo, l);
        out.lo_hard = out.lo_hard && lh;
      }
      if (h > out.hi + 1e-12) {
        out.hi = h;
        out.hi_hard = hh;
      } else if (h >= out.hi - 1e-12) {
        out.hi = std::max(out.hi, h);
        out.hi_hard = out.hi_hard && hh;
      }
    }
    return out;
  }
  double sample(std::mt19937_64& rng) const {
    double u = (static_cast<double>(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < comps.size(); ++i) {
      acc += weights[i];
      if (u <= acc || i + 1 == comps.size()) return comps[i].sample(rng);
    }
    return comps.back().sample(rng);
  }
};

inline void resolve_density(const ExprPtr& e, const Assignment& a, double weight, ResolvedDensity& out) {
  switch (e->kind) {
    case ExprKind::Dist: {
      Dist d;
      d.name = e->dist;
      d.p0 = eval_value(e->params[0], a);
      if (e->params.size() > 1) d.p1 = eval_value(e->params[1], a);
      d.validate();
      out.weights.push_back(weight);
      out.comps.push_back(d);
      return;
    }
    case ExprKind::Mixture:
      for (std::size_t i = 0; i < e->comps.size(); ++i)
        resolve_density(e->comps[i], a, weight * e->weights[i], out);
      return;
    case ExprKind::Partitioned: {
      const std::string& st = a.state(e->guard);
      for (auto& [s, c] : e->cases)
        if (s == st) {
          resolve_density(c, a, weight, out);
          return;
        }
      throw structural_error(detail::cat("guard '", e->guard, "' has no case for state '", st, "'"));
    }
    default:
      throw structural_error("expression is deterministic; no density");
  }
}

inline ResolvedDensity eval_density(const ExprPtr& e, const Assignment& a) {
  ResolvedDensity out;
  resolve_density(e, a, 1.0, out);
  return out;
}

// ---------------------------------------------------------------------------
// Pair-block factorization.
//
// Rewrites a weighted sum over k >= 3 variables (either a deterministic CPD
// or the first parameter of a distribution) into a chain of two-variable
// blocks: E1 = c1*V1 + c2*V2, E2 = E1 + c3*V3, ..., with the bias and the
// final term folded into the last block.  Block order follows the order the
// variables appear in the sum.

struct BfBlock {
  std::string name;  // intermediate variable id ("" for the rewritten root)
  ExprPtr expr;
};

struct BfResult {
  std::vector<BfBlock> intermediates;  // in creation order
  ExprPtr rewritten;                   // expression for the original node
};

inline BfResult bf_expression(const ExprPtr& expr,
                              const std::function<std::string()>& fresh_name) {
  ExprPtr e = canonicalize(expr);
  BfResult res;

  auto factorize_sum = [&](const ExprPtr& sum) -> ExprPtr {
    if (sum->kind != ExprKind::WeightedSum || sum->terms.size() <= 2) return sum;
    for (auto& [c, t] : sum->terms)
      if (t->kind != ExprKind::Var)
        throw structural_error("cannot pair-factorize a sum with non-variable terms");
    // E1 pairs the first two terms, later blocks add one term each.
    ExprPtr prev = make_sum({sum->terms[0], sum->terms[1]}, 0.0);
    for (std::size_t i = 2; i + 1 < sum->terms.size(); ++i) {
      std::string name = fresh_name();
      res.intermediates.push_back({name, prev});
      prev = make_sum({{1.0, make_var(name)}, sum->terms[i]}, 0.0);
    }
    std::string name = fresh_name();
    res.intermediates.push_back({name, prev});
    return make_sum({{1.0, make_var(name)}, sum->terms.back()}, sum->bias);
  };

  switch (e->kind) {
    case ExprKind::WeightedSum:
      res.rewritten = factorize_sum(e);
      return res;
    case ExprKind::Dist: {
      std::vector<ExprPtr> params = e->params;
      params[0] = factorize_sum(canonicalize(params[0]));
      for (std::size_t i = 1; i < params.size(); ++i)
        if (free_vars(params[i]).size() > 0 && params[i]->kind == ExprKind::WeightedSum &&
            params[i]->terms.size() > 2)
          throw structural_error("cannot decompose a distribution with several wide parameters");
      res.rewritten = make_dist(e->dist, std::move(params));
      return res;
    }
    default:
      if (free_vars(e).size() > 2)
        throw structural_error("expression is not decomposable into pair blocks");
      res.rewritten = e;
      return res;
  }
}

}  // namespace riskbn
