//  Licensed under the Apache License, Version 2.0 (the "License");
//  you may not use this file except in compliance with the License.
//  You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
//  Unless required by applicable law or agreed to in writing, software
//  distributed under the License is distributed on an "AS IS" BASIS,
//  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//  See the License for the specific language governing permissions and
//  limitations under the License.

#include "dedopt/parser.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "dedopt/validate.hpp"

namespace dedopt {

namespace {

const char* kAggNames[] = {"count", "count0", "sum", "max", "min", "cert", "seal"};

bool is_agg_name(const std::string& s) {
  for (const char* a : kAggNames)
    if (s == a) return true;
  return false;
}

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'' || c == '.' || c == ':';
}

struct Tok {
  enum Kind { Ident, Int, Str, Punct, Newline, End } kind;
  std::string text;
  int64_t num = 0;
  int line = 0, col = 0;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) { advance(); }

  const Tok& peek() const { return tok_; }
  Tok take() {
    Tok t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    // skip spaces and comments, but stop at newlines (statement separators)
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == ' ' || c == '\t' || c == '\r') {
        ++pos_;
        ++col_;
      } else if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
    tok_.line = line_;
    tok_.col = col_;
    if (pos_ >= src_.size()) {
      tok_.kind = Tok::End;
      tok_.text = "<eof>";
      return;
    }
    char c = src_[pos_];
    if (c == '\n') {
      ++pos_;
      ++line_;
      col_ = 1;
      tok_.kind = Tok::Newline;
      tok_.text = "\\n";
      return;
    }
    if (c == '"') {
      size_t start = ++pos_;
      ++col_;
      while (pos_ < src_.size() && src_[pos_] != '"' && src_[pos_] != '\n') {
        ++pos_;
        ++col_;
      }
      if (pos_ >= src_.size() || src_[pos_] != '"')
        throw ParseError(line_, col_, "unterminated string literal");
      tok_.kind = Tok::Str;
      tok_.text = src_.substr(start, pos_ - start);
      ++pos_;
      ++col_;
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '-' && pos_ + 1 < src_.size() &&
         std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
      size_t start = pos_;
      if (c == '-') {
        ++pos_;
        ++col_;
      }
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        ++pos_;
        ++col_;
      }
      tok_.kind = Tok::Int;
      tok_.text = src_.substr(start, pos_ - start);
      tok_.num = std::stoll(tok_.text);
      return;
    }
    if (is_ident_start(c)) {
      size_t start = pos_;
      while (pos_ < src_.size() && is_ident_char(src_[pos_])) {
        ++pos_;
        ++col_;
      }
      tok_.kind = Tok::Ident;
      tok_.text = src_.substr(start, pos_ - start);
      return;
    }
    // multi-char operators
    static const char* two[] = {":-", "!=", "<=", ">=", "->"};
    for (const char* op : two) {
      if (src_.compare(pos_, 2, op) == 0) {
        tok_.kind = Tok::Punct;
        tok_.text = op;
        pos_ += 2;
        col_ += 2;
        return;
      }
    }
    tok_.kind = Tok::Punct;
    tok_.text = std::string(1, c);
    ++pos_;
    ++col_;
  }

  const std::string& src_;
  size_t pos_ = 0;
  int line_ = 1, col_ = 1;
  Tok tok_;
};

class Parser {
 public:
  explicit Parser(const std::string& src) : lex_(src) {}

  Program parse() {
    Program p;
    while (lex_.peek().kind != Tok::End) {
      if (lex_.peek().kind == Tok::Newline) {
        lex_.take();
        continue;
      }
      statement(p);
    }
    resolve(p);
    return p;
  }

 private:
  [[noreturn]] void fail(const Tok& t, const std::string& msg) {
    throw ParseError(t.line, t.col, msg + " (got '" + t.text + "')");
  }

  Tok expect(Tok::Kind k, const std::string& what) {
    if (lex_.peek().kind != k) fail(lex_.peek(), "expected " + what);
    return lex_.take();
  }

  Tok expect_punct(const std::string& p) {
    Tok t = lex_.peek();
    if (t.kind != Tok::Punct || t.text != p) fail(t, "expected '" + p + "'");
    return lex_.take();
  }

  bool at_punct(const std::string& p) {
    return lex_.peek().kind == Tok::Punct && lex_.peek().text == p;
  }

  void end_statement() {
    if (at_punct(".")) lex_.take();
    Tok t = lex_.peek();
    if (t.kind == Tok::Newline) {
      lex_.take();
    } else if (t.kind != Tok::End && !(t.kind == Tok::Punct && t.text == "}")) {
      fail(t, "expected end of statement");
    }
  }

  void statement(Program& p) {
    Tok t = lex_.peek();
    if (t.kind == Tok::Punct && t.text == ".") {
      directive(p);
    } else if (t.kind == Tok::Punct && t.text == "@") {
      annotation(p);
    } else if (t.kind == Tok::Ident && t.text == "component") {
      component(p);
    } else if (t.kind == Tok::Ident) {
      top_fact(p);
    } else {
      fail(t, "expected directive, component, or fact");
    }
  }

  void directive(Program& p) {
    lex_.take();  // '.'
    Tok name = expect(Tok::Ident, "directive name");
    Relation r;
    if (name.text == "edb" || name.text == "input") {
      Tok rel = expect(Tok::Ident, "relation name");
      expect_punct("/");
      Tok ar = expect(Tok::Int, "arity");
      r.name = rel.text;
      r.arity = static_cast<int>(ar.num);
      r.kind = name.text == "edb" ? RelationKind::EdbStored : RelationKind::Channel;
      if (r.kind == RelationKind::Channel && r.arity < 2)
        fail(ar, "input channels carry location and time; arity must be >= 2");
      declare(p, r, name);
    } else if (name.text == "function") {
      Tok rel = expect(Tok::Ident, "function name");
      Tok in = expect(Tok::Int, "input arity");
      Tok out = expect(Tok::Int, "output arity");
      r.name = rel.text;
      r.kind = RelationKind::EdbFunction;
      r.fn_inputs = static_cast<int>(in.num);
      r.fn_outputs = static_cast<int>(out.num);
      r.arity = r.fn_inputs + r.fn_outputs;
      if (lex_.peek().kind == Tok::Ident) {
        r.builtin = lex_.take().text;
        if (at_punct("(")) {
          lex_.take();
          std::string arg;
          while (!at_punct(")")) {
            if (at_punct(",")) {
              lex_.take();
              r.builtin_args.push_back(arg);
              arg.clear();
              continue;
            }
            Tok a = lex_.take();
            if (a.kind == Tok::Newline || a.kind == Tok::End)
              fail(a, "unterminated builtin argument list");
            arg += a.text;
          }
          lex_.take();
          if (!arg.empty()) r.builtin_args.push_back(arg);
        }
      }
      declare(p, r, name);
    } else {
      fail(name, "unknown directive");
    }
    end_statement();
  }

  void annotation(Program& p) {
    lex_.take();  // '@'
    Tok name = expect(Tok::Ident, "annotation name");
    if (name.text == "fd") {
      FdAnnotation fd;
      Tok rel = expect(Tok::Ident, "relation name");
      fd.relation = rel.text;
      expect_punct("(");
      fd.domain = index_list();
      expect_punct("->");
      fd.range = index_list();
      if (at_punct(":")) {
        lex_.take();
        fd.fn = expect(Tok::Ident, "function name").text;
      }
      expect_punct(")");
      p.fd_annotations.push_back(std::move(fd));
    } else if (name.text == "entangle") {
      Tok rel = expect(Tok::Ident, "relation name");
      expect_punct("(");
      for (int idx : index_list()) p.entangled.insert({rel.text, idx});
      expect_punct(")");
    } else if (name.text == "sealed") {
      SealInfo si;
      si.out = expect(Tok::Ident, "relation name").text;
      expect_punct("(");
      while (!at_punct(")")) {
        Tok key = expect(Tok::Ident, "field name");
        expect_punct("=");
        Tok val = lex_.take();
        if (key.text == "count") si.count = val.text;
        else if (key.text == "recv") si.recv = val.text;
        else if (key.text == "sealed") si.sealed = val.text;
        else if (key.text == "gate") si.gate = val.text;
        else if (key.text == "sender") si.sender = val.text;
        else if (key.text == "receiver") si.receiver = val.text;
        else if (key.text == "payload") si.payload = static_cast<int>(val.num);
        else if (key.text == "group") si.group = static_cast<int>(val.num);
        else fail(key, "unknown @sealed field");
        if (at_punct(",")) lex_.take();
      }
      expect_punct(")");
      p.seal_infos.push_back(std::move(si));
    } else {
      fail(name, "unknown annotation");
    }
    end_statement();
  }

  std::vector<int> index_list() {
    std::vector<int> out;
    for (;;) {
      Tok t = expect(Tok::Int, "attribute index");
      if (t.num < 1) fail(t, "attribute indices are 1-based");
      out.push_back(static_cast<int>(t.num) - 1);
      if (at_punct(","))
        lex_.take();
      else
        break;
    }
    return out;
  }

  void declare(Program& p, const Relation& r, const Tok& at) {
    if (p.find_relation(r.name)) fail(at, "relation '" + r.name + "' already declared");
    p.relations.push_back(r);
  }

  void component(Program& p) {
    lex_.take();  // 'component'
    Component c;
    c.name = expect(Tok::Ident, "component name").text;
    expect_punct("@");
    for (;;) {
      c.homes.push_back(expect(Tok::Ident, "home address").text);
      if (at_punct(","))
        lex_.take();
      else
        break;
    }
    expect_punct("{");
    for (;;) {
      while (lex_.peek().kind == Tok::Newline) lex_.take();
      if (at_punct("}")) {
        lex_.take();
        break;
      }
      if (lex_.peek().kind == Tok::End) fail(lex_.peek(), "unterminated component block");
      c.rules.push_back(rule());
      end_statement();
    }
    p.components.push_back(std::move(c));
  }

  Rule rule() {
    Rule r;
    r.head = literal(false);
    expect_punct(":-");
    for (;;) {
      body_elem(r);
      if (at_punct(","))
        lex_.take();
      else
        break;
    }
    return r;
  }

  void body_elem(Rule& r) {
    Tok t = lex_.peek();
    if (t.kind == Tok::Punct && t.text == "!") {
      lex_.take();
      r.lits.push_back(literal(true));
      r.order.push_back({true, static_cast<int>(r.lits.size()) - 1});
      return;
    }
    if (t.kind != Tok::Ident) fail(t, "expected literal or constraint");
    // Lookahead one token to distinguish `rel(...)` from `v op ...`.
    Tok name = lex_.take();
    if (at_punct("(")) {
      r.lits.push_back(literal_body(name, false));
      r.order.push_back({true, static_cast<int>(r.lits.size()) - 1});
    } else {
      r.cons.push_back(constraint(name));
      r.order.push_back({false, static_cast<int>(r.cons.size()) - 1});
    }
  }

  Literal literal(bool negated) {
    Tok name = expect(Tok::Ident, "relation name");
    return literal_body(name, negated);
  }

  Literal literal_body(const Tok& name, bool negated) {
    Literal l;
    l.negated = negated;
    l.relation = name.text;
    expect_punct("(");
    if (l.relation == "delay") {
      if (negated) fail(name, "delay cannot be negated");
      // delay((a,b,...), t') or delay(a, t')
      if (at_punct("(")) {
        lex_.take();
        while (!at_punct(")")) {
          l.terms.push_back(term());
          if (at_punct(",")) lex_.take();
        }
        lex_.take();
      } else {
        l.terms.push_back(term());
      }
      l.delay_inputs = static_cast<int>(l.terms.size());
      expect_punct(",");
      l.terms.push_back(term());
      expect_punct(")");
      return l;
    }
    while (!at_punct(")")) {
      l.terms.push_back(term());
      if (at_punct(",")) lex_.take();
    }
    expect_punct(")");
    return l;
  }

  Term term() {
    Tok t = lex_.take();
    if (t.kind == Tok::Int) return Term::mkconst(Value(t.num));
    if (t.kind == Tok::Str) return Term::mkconst(Value(t.text));
    if (t.kind != Tok::Ident) fail(t, "expected term");
    if (at_punct("<") && is_agg_name(t.text)) {
      lex_.take();
      std::vector<std::string> vars;
      for (;;) {
        vars.push_back(expect(Tok::Ident, "aggregate variable").text);
        if (at_punct(","))
          lex_.take();
        else
          break;
      }
      expect_punct(">");
      return Term::mkagg(t.text, std::move(vars));
    }
    return Term::mkvar(t.text);
  }

  Constraint constraint(const Tok& lhs) {
    Constraint c;
    c.lhs = lhs.text;
    Tok op = lex_.take();
    static const char* ops[] = {"=", "!=", "<", "<=", ">", ">="};
    bool ok = op.kind == Tok::Punct &&
              std::any_of(std::begin(ops), std::end(ops),
                          [&](const char* o) { return op.text == o; });
    if (!ok) fail(op, "expected comparison operator");
    c.op = op.text;
    for (;;) {
      Tok a = lex_.take();
      ExprAtom atom;
      if (a.kind == Tok::Ident) {
        atom.is_var = true;
        atom.var = a.text;
      } else if (a.kind == Tok::Int) {
        atom.is_var = false;
        atom.num = a.num;
      } else {
        fail(a, "expected variable or integer");
      }
      c.rhs.push_back(atom);
      if (at_punct("+"))
        lex_.take();
      else
        break;
    }
    return c;
  }

  void top_fact(Program& p) {
    Tok name = lex_.take();
    expect_punct("(");
    Tuple vals;
    while (!at_punct(")")) {
      Tok t = lex_.take();
      if (t.kind == Tok::Int)
        vals.push_back(Value(t.num));
      else if (t.kind == Tok::Str || t.kind == Tok::Ident)
        vals.push_back(Value(t.text));
      else
        fail(t, "expected fact value");
      if (at_punct(",")) lex_.take();
    }
    lex_.take();
    p.edb_facts.push_back({name.text, std::move(vals)});
    end_statement();
  }

  void resolve(Program& p) {
    // Heads of rules declare IDB relations; arity conflicts are errors.
    // seal<r> heads expand to r's payload width, so they resolve second.
    for (int pass = 0; pass < 2; ++pass) {
      for (auto& c : p.components) {
        for (auto& r : c.rules) {
          const std::string& hn = r.head.relation;
          if (hn == "delay") throw ParseError(1, 1, "delay cannot be a rule head");
          const Term* seal = nullptr;
          for (const auto& t : r.head.terms)
            if (t.kind == TermKind::Agg && t.agg_fn == "seal") seal = &t;
          if ((pass == 0) == (seal != nullptr)) continue;
          int arity = static_cast<int>(r.head.terms.size());
          if (seal) {
            const Relation* bundled = p.find_relation(seal->agg_vars.at(0));
            if (!bundled)
              throw ParseError(1, 1, "seal<> names unknown relation '" +
                                         seal->agg_vars.at(0) + "'");
            arity = arity - 1 + bundled->payload_arity();
          }
          Relation* existing = p.find_relation(hn);
          if (!existing) {
            Relation rel;
            rel.name = hn;
            rel.arity = arity;
            rel.kind = RelationKind::Idb;
            p.relations.push_back(rel);
          } else if (existing->is_idb_schema() && existing->arity != arity) {
            throw ParseError(1, 1, "arity mismatch for relation '" + hn + "': " +
                                       std::to_string(existing->arity) + " vs " +
                                       std::to_string(arity));
          }
        }
      }
    }
    // Body literals must resolve.
    for (auto& c : p.components) {
      for (auto& r : c.rules) {
        for (auto& l : r.lits) {
          if (l.is_delay()) continue;
          const Relation* rel = p.find_relation(l.relation);
          if (!rel)
            throw ParseError(1, 1, "unknown relation '" + l.relation +
                                       "' in component " + c.name);
          if (rel->arity != static_cast<int>(l.terms.size()))
            throw ParseError(1, 1, "arity mismatch for relation '" + l.relation +
                                       "': declared " + std::to_string(rel->arity) +
                                       ", used with " + std::to_string(l.terms.size()));
        }
      }
    }
    // EDB facts must match a stored declaration.
    for (auto& [name, vals] : p.edb_facts) {
      const Relation* rel = p.find_relation(name);
      if (!rel) throw ParseError(1, 1, "unknown relation '" + name + "' in fact");
      if (rel->kind != RelationKind::EdbStored)
        throw ParseError(1, 1, "facts may only populate EDB-stored relations ('" +
                                   name + "')");
      if (rel->arity != static_cast<int>(vals.size()))
        throw ParseError(1, 1, "arity mismatch in fact for '" + name + "'");
    }
    classify_rules(p);
  }

  Lexer lex_;
};

}  // namespace

Program parse_program(const std::string& text) { return Parser(text).parse(); }

void parse_facts_into(Program& p, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // strip comments and whitespace
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    size_t b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    size_t e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);

    auto paren = line.find('(');
    if (paren == std::string::npos || line.back() != ')')
      throw ParseError(lineno, 1, "malformed fact line");
    std::string rel = line.substr(0, paren);
    std::string body = line.substr(paren + 1, line.size() - paren - 2);
    Tuple vals;
    std::string cur;
    auto flush = [&]() {
      size_t cb = cur.find_first_not_of(" \t");
      if (cb == std::string::npos) throw ParseError(lineno, 1, "empty fact value");
      size_t ce = cur.find_last_not_of(" \t");
      std::string v = cur.substr(cb, ce - cb + 1);
      if (v.size() >= 2 && v.front() == '"' && v.back() == '"')
        vals.push_back(Value(v.substr(1, v.size() - 2)));
      else if (v.find_first_not_of("-0123456789") == std::string::npos)
        vals.push_back(Value(static_cast<int64_t>(std::stoll(v))));
      else
        vals.push_back(Value(v));
      cur.clear();
    };
    for (char ch : body) {
      if (ch == ',')
        flush();
      else
        cur += ch;
    }
    if (!cur.empty() || !body.empty()) flush();

    const Relation* r = p.find_relation(rel);
    if (!r) throw ParseError(lineno, 1, "unknown relation '" + rel + "'");
    if (r->kind != RelationKind::EdbStored)
      throw ParseError(lineno, 1, "'" + rel + "' is not an EDB-stored relation");
    if (r->arity != static_cast<int>(vals.size()))
      throw ParseError(lineno, 1, "arity mismatch in fact for '" + rel + "'");
    p.edb_facts.push_back({rel, std::move(vals)});
  }
}

void reanalyze(Program& p) {
  // Declare any new head relations introduced by rewrites.
  for (auto& c : p.components) {
    for (auto& r : c.rules) {
      const std::string& hn = r.head.relation;
      if (!p.find_relation(hn)) {
        Relation rel;
        rel.name = hn;
        rel.arity = static_cast<int>(r.head.terms.size());
        rel.kind = RelationKind::Idb;
        p.relations.push_back(rel);
      }
    }
  }
  for (auto& c : p.components) {
    for (auto& r : c.rules) {
      for (auto& l : r.lits) {
        if (l.is_delay()) continue;
        const Relation* rel = p.find_relation(l.relation);
        if (!rel)
          throw std::runtime_error("unknown relation '" + l.relation +
                                   "' after rewrite in component " + c.name);
        if (rel->arity != static_cast<int>(l.terms.size()))
          throw std::runtime_error("arity mismatch for '" + l.relation +
                                   "' after rewrite");
      }
    }
  }
  classify_rules(p);
}

}  // namespace dedopt
