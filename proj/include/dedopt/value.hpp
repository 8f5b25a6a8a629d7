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

#ifndef DEDOPT_VALUE_HPP_
#define DEDOPT_VALUE_HPP_

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace dedopt {

// A runtime value: integer, symbol (strings and node addresses share this
// representation), or a canonical sorted collection produced by cert<>.
class Value {
 public:
  Value() : rep_(int64_t{0}) {}
  explicit Value(int64_t i) : rep_(i) {}
  explicit Value(std::string s) : rep_(std::move(s)) {}
  explicit Value(std::vector<Value> vs) : rep_(std::move(vs)) {}

  bool is_int() const { return std::holds_alternative<int64_t>(rep_); }
  bool is_sym() const { return std::holds_alternative<std::string>(rep_); }
  bool is_coll() const { return std::holds_alternative<std::vector<Value>>(rep_); }

  int64_t as_int() const { return std::get<int64_t>(rep_); }
  const std::string& as_sym() const { return std::get<std::string>(rep_); }
  const std::vector<Value>& as_coll() const { return std::get<std::vector<Value>>(rep_); }

  bool operator==(const Value& o) const { return rep_ == o.rep_; }
  bool operator!=(const Value& o) const { return rep_ != o.rep_; }
  bool operator<(const Value& o) const;

  // Canonical text form; reparses to the same value for ints and symbols.
  std::string str() const;

  uint64_t hash() const;

 private:
  std::variant<int64_t, std::string, std::vector<Value>> rep_;
};

using Tuple = std::vector<Value>;

std::string tuple_str(const Tuple& t);
uint64_t tuple_hash(const Tuple& t);

// Deterministic 64-bit mixing; used everywhere we need stable hashing that
// must not vary between runs or platforms.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
  return mix64(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

uint64_t str_hash(const std::string& s);

}  // namespace dedopt

#endif  // DEDOPT_VALUE_HPP_
