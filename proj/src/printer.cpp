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

#include "dedopt/printer.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

namespace dedopt {

namespace {

bool bare_safe(const std::string& s) {
  if (s.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'' ||
          c == '.' || c == ':'))
      return false;
  return true;
}

std::string fact_value(const Value& v) {
  if (v.is_int()) return std::to_string(v.as_int());
  if (v.is_sym()) return bare_safe(v.as_sym()) ? v.as_sym() : "\"" + v.as_sym() + "\"";
  return v.str();
}

std::string rule_const(const Value& v) {
  if (v.is_int()) return std::to_string(v.as_int());
  return "\"" + v.as_sym() + "\"";
}

std::string term_str(const Term& t) {
  switch (t.kind) {
    case TermKind::Var:
      return t.var;
    case TermKind::Const:
      return rule_const(t.constant);
    case TermKind::Agg: {
      std::string out = t.agg_fn + "<";
      for (size_t i = 0; i < t.agg_vars.size(); ++i) {
        if (i) out += ",";
        out += t.agg_vars[i];
      }
      return out + ">";
    }
  }
  return "?";
}

}  // namespace

std::string print_literal(const Literal& l) {
  std::string out;
  if (l.negated) out += "!";
  out += l.relation + "(";
  if (l.is_delay()) {
    out += "(";
    for (int i = 0; i < l.delay_inputs; ++i) {
      if (i) out += ",";
      out += term_str(l.terms[i]);
    }
    out += ")," + term_str(l.terms.back());
  } else {
    for (size_t i = 0; i < l.terms.size(); ++i) {
      if (i) out += ",";
      out += term_str(l.terms[i]);
    }
  }
  return out + ")";
}

std::string print_rule(const Rule& r) {
  std::string out = print_literal(r.head) + " :- ";
  bool first = true;
  for (const auto& [is_lit, idx] : r.order) {
    if (!first) out += ", ";
    first = false;
    if (is_lit) {
      out += print_literal(r.lits[idx]);
    } else {
      const Constraint& c = r.cons[idx];
      out += c.lhs + " " + c.op + " ";
      for (size_t i = 0; i < c.rhs.size(); ++i) {
        if (i) out += " + ";
        out += c.rhs[i].is_var ? c.rhs[i].var : std::to_string(c.rhs[i].num);
      }
    }
  }
  return out;
}

std::string pretty_print(const Program& p) {
  std::ostringstream out;
  for (const auto& r : p.relations) {
    switch (r.kind) {
      case RelationKind::EdbStored:
        out << ".edb " << r.name << "/" << r.arity << "\n";
        break;
      case RelationKind::Channel:
        out << ".input " << r.name << "/" << r.arity << "\n";
        break;
      case RelationKind::EdbFunction: {
        out << ".function " << r.name << " " << r.fn_inputs << " " << r.fn_outputs;
        if (!r.builtin.empty()) {
          out << " " << r.builtin;
          if (!r.builtin_args.empty()) {
            out << "(";
            for (size_t i = 0; i < r.builtin_args.size(); ++i) {
              if (i) out << ",";
              out << r.builtin_args[i];
            }
            out << ")";
          }
        }
        out << "\n";
        break;
      }
      case RelationKind::Idb:
        break;
    }
  }
  for (const auto& fd : p.fd_annotations) {
    out << "@fd " << fd.relation << "(";
    for (size_t i = 0; i < fd.domain.size(); ++i)
      out << (i ? "," : "") << fd.domain[i] + 1;
    out << " -> ";
    for (size_t i = 0; i < fd.range.size(); ++i)
      out << (i ? "," : "") << fd.range[i] + 1;
    if (!fd.fn.empty()) out << " : " << fd.fn;
    out << ")\n";
  }
  // group entangle flags per relation, sorted
  std::map<std::string, std::vector<int>> ent;
  for (const auto& [rel, idx] : p.entangled) ent[rel].push_back(idx);
  for (auto& [rel, idxs] : ent) {
    std::sort(idxs.begin(), idxs.end());
    out << "@entangle " << rel << "(";
    for (size_t i = 0; i < idxs.size(); ++i) out << (i ? "," : "") << idxs[i] + 1;
    out << ")\n";
  }
  for (const auto& si : p.seal_infos) {
    out << "@sealed " << si.out << "(count=" << si.count << ",recv=" << si.recv
        << ",sealed=" << si.sealed << ",gate=" << si.gate << ",sender=" << si.sender
        << ",receiver=" << si.receiver << ",payload=" << si.payload
        << ",group=" << si.group << ")\n";
  }
  for (const auto& [rel, vals] : p.edb_facts) {
    out << rel << "(";
    for (size_t i = 0; i < vals.size(); ++i) out << (i ? "," : "") << fact_value(vals[i]);
    out << ")\n";
  }
  for (const auto& c : p.components) {
    out << "component " << c.name << " @ ";
    for (size_t i = 0; i < c.homes.size(); ++i) out << (i ? ", " : "") << c.homes[i];
    out << " {\n";
    for (const auto& r : c.rules) out << print_rule(r) << "\n";
    out << "}\n";
  }
  return out.str();
}

namespace {

bool relations_equal(const Program& a, const Program& b) {
  auto key = [](const Relation& r) { return r.name; };
  std::vector<Relation> ra = a.relations, rb = b.relations;
  auto by_name = [&](const Relation& x, const Relation& y) { return key(x) < key(y); };
  std::sort(ra.begin(), ra.end(), by_name);
  std::sort(rb.begin(), rb.end(), by_name);
  if (ra.size() != rb.size()) return false;
  for (size_t i = 0; i < ra.size(); ++i) {
    const Relation &x = ra[i], &y = rb[i];
    if (x.name != y.name || x.arity != y.arity || x.kind != y.kind ||
        x.fn_inputs != y.fn_inputs || x.fn_outputs != y.fn_outputs ||
        x.builtin != y.builtin || x.builtin_args != y.builtin_args)
      return false;
  }
  return true;
}

}  // namespace

bool programs_equal(const Program& a, const Program& b) {
  if (!relations_equal(a, b)) return false;
  if (a.components.size() != b.components.size()) return false;
  for (size_t i = 0; i < a.components.size(); ++i) {
    const Component &x = a.components[i], &y = b.components[i];
    if (x.name != y.name || x.homes != y.homes || !(x.rules == y.rules)) return false;
  }
  auto facts = [](const Program& p) {
    std::vector<std::string> out;
    for (const auto& [rel, vals] : p.edb_facts) out.push_back(rel + tuple_str(vals));
    std::sort(out.begin(), out.end());
    return out;
  };
  if (facts(a) != facts(b)) return false;
  if (a.entangled != b.entangled) return false;
  auto fds = [](const Program& p) {
    std::vector<std::string> out;
    for (const auto& fd : p.fd_annotations) {
      std::string s = fd.relation + ":";
      for (int d : fd.domain) s += std::to_string(d) + ",";
      s += "->";
      for (int r : fd.range) s += std::to_string(r) + ",";
      s += ":" + fd.fn;
      out.push_back(s);
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  if (fds(a) != fds(b)) return false;
  auto seals = [](const Program& p) {
    std::vector<std::string> out;
    for (const auto& s : p.seal_infos)
      out.push_back(s.out + "|" + s.count + "|" + s.recv + "|" + s.sealed + "|" +
                    s.gate + "|" + s.sender + "|" + s.receiver + "|" +
                    std::to_string(s.payload) + "|" + std::to_string(s.group));
    std::sort(out.begin(), out.end());
    return out;
  };
  return seals(a) == seals(b);
}

}  // namespace dedopt
