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

#include "dedopt/value.hpp"

namespace dedopt {

bool Value::operator<(const Value& o) const {
  if (rep_.index() != o.rep_.index()) return rep_.index() < o.rep_.index();
  return rep_ < o.rep_;
}

std::string Value::str() const {
  if (is_int()) return std::to_string(as_int());
  if (is_sym()) return as_sym();
  std::string out = "[";
  bool first = true;
  for (const auto& v : as_coll()) {
    if (!first) out += ",";
    first = false;
    out += v.str();
  }
  out += "]";
  return out;
}

uint64_t str_hash(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t Value::hash() const {
  if (is_int()) return mix64(static_cast<uint64_t>(as_int()) ^ 0x11ULL);
  if (is_sym()) return mix64(str_hash(as_sym()) ^ 0x22ULL);
  uint64_t h = 0x33ULL;
  for (const auto& v : as_coll()) h = hash_combine(h, v.hash());
  return mix64(h);
}

std::string tuple_str(const Tuple& t) {
  std::string out = "(";
  for (size_t i = 0; i < t.size(); ++i) {
    if (i) out += ",";
    out += t[i].str();
  }
  out += ")";
  return out;
}

uint64_t tuple_hash(const Tuple& t) {
  uint64_t h = 0x9e3779b97f4a7c15ULL;
  for (const auto& v : t) h = hash_combine(h, v.hash());
  return h;
}

}  // namespace dedopt
