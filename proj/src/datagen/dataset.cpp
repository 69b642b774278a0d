#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include "ttmba/datagen.hpp"

namespace ttmba {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer over seed ^ index
  std::uint64_t z = (seed ^ index) + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Expr v(const std::string& n) { return Expr::var(n); }
Expr bnot(Expr e) { return Expr::unary(Op::Not, std::move(e)); }
Expr bin(Op op, Expr a, Expr b) { return Expr::binary(op, std::move(a), std::move(b)); }

// Bitwise building blocks of targets. Index order is the canonical term order.
constexpr std::size_t kUnaryShapes = 2;
constexpr std::size_t kBinaryShapes = 7;
constexpr std::size_t kTernaryShapes = 3;

Expr bitwise_shape(std::size_t arity, std::size_t shape, const std::vector<std::string>& vs) {
  if (arity == 1) return shape == 0 ? v(vs[0]) : bnot(v(vs[0]));
  if (arity == 2) {
    const Expr a = v(vs[0]), b = v(vs[1]);
    switch (shape) {
      case 0: return bin(Op::And, a, b);
      case 1: return bin(Op::Or, a, b);
      case 2: return bin(Op::Xor, a, b);
      case 3: return bin(Op::And, a, bnot(b));
      case 4: return bin(Op::And, bnot(a), b);
      case 5: return bin(Op::Or, a, bnot(b));
      default: return bnot(bin(Op::Xor, a, b));
    }
  }
  const Expr a = v(vs[0]), b = v(vs[1]), c = v(vs[2]);
  switch (shape) {
    case 0: return bin(Op::And, bin(Op::And, a, b), c);
    case 1: return bin(Op::Or, bin(Op::Or, a, b), c);
    default: return bin(Op::Xor, bin(Op::Xor, a, b), c);
  }
}

struct Term {
  std::string key;  // canonical sort key
  Expr base;
  int coeff;
};

Expr scaled(const Expr& base, int magnitude) {
  if (magnitude == 1) return base;
  return bin(Op::Mul, Expr::constant(static_cast<Word>(magnitude)), base);
}

}  // namespace

Expr random_target(const GenConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto& pool = config.var_pool;
  if (pool.empty()) throw std::invalid_argument("random_target: empty variable pool");
  const std::size_t nterms = 1 + rng() % std::max<std::size_t>(1, config.max_terms);

  std::vector<Term> terms;
  for (std::size_t attempt = 0; terms.size() < nterms && attempt < 64; ++attempt) {
    const std::size_t max_arity = std::min<std::size_t>(3, pool.size());
    // Arity weights 1:3:1 for unary:binary:ternary shapes.
    std::size_t arity = 2;
    const auto roll = rng() % 5;
    if (roll == 0) arity = 1;
    else if (roll == 4) arity = 3;
    arity = std::min(arity, max_arity);
    std::vector<std::string> chosen = pool;
    for (std::size_t i = chosen.size(); i > 1; --i) std::swap(chosen[i - 1], chosen[rng() % i]);
    chosen.resize(arity);
    std::sort(chosen.begin(), chosen.end());
    const std::size_t nshapes = arity == 1 ? kUnaryShapes : arity == 2 ? kBinaryShapes : kTernaryShapes;
    const std::size_t shape = rng() % nshapes;
    const int span = std::max(1, config.max_coeff);
    int coeff = static_cast<int>(rng() % static_cast<std::uint64_t>(span)) + 1;
    if (rng() % 3 == 0) coeff = -coeff;

    std::string key = std::to_string(arity) + ":";
    for (const auto& c : chosen) key += c + ",";
    key += std::to_string(shape);
    if (std::any_of(terms.begin(), terms.end(), [&](const Term& t) { return t.key == key; })) continue;
    terms.push_back({key, bitwise_shape(arity, shape, chosen), coeff});
  }
  std::sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) { return a.key < b.key; });

  Expr out;
  for (const auto& t : terms) {
    const int mag = std::abs(t.coeff);
    if (!out.valid()) {
      if (t.coeff > 0) {
        out = scaled(t.base, mag);
      } else {
        out = mag == 1 ? Expr::unary(Op::Neg, t.base)
                       : bin(Op::Mul, Expr::unary(Op::Neg, Expr::constant(static_cast<Word>(mag))), t.base);
      }
    } else {
      out = bin(t.coeff > 0 ? Op::Add : Op::Sub, out, scaled(t.base, mag));
    }
  }
  return out;
}

std::vector<DatasetPair> generate(std::size_t n, const GenConfig& config, std::uint64_t seed) {
  std::vector<DatasetPair> out;
  out.reserve(n);
  const std::size_t step_span = config.max_steps >= config.min_steps
                                    ? config.max_steps - config.min_steps + 1
                                    : 1;
  for (std::size_t i = 0; i < n; ++i) {
    std::mt19937_64 rng(mix_seed(seed, i));
    for (std::size_t attempt = 0;; ++attempt) {
      if (attempt == 10000)
        throw std::runtime_error("generate: no source expression fits max_src_len");
      const Expr trg = random_target(config, rng());
      const std::size_t steps = config.min_steps + rng() % step_span;
      const Expr src = obfuscate(trg, steps, rng(), config.var_pool);
      std::string src_text = render(src);
      if (src_text.size() > config.max_src_len) continue;
      out.push_back({std::move(src_text), render(trg)});
      break;
    }
  }
  return out;
}

MalformedLine::MalformedLine(std::size_t line, const std::string& why)
    : std::runtime_error("line " + std::to_string(line) + ": " + why), line_(line) {}

std::vector<DatasetPair> parse_pairs(const std::string& text, bool has_header) {
  std::vector<DatasetPair> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool header_pending = has_header;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw MalformedLine(lineno, "expected 'src,trg'");
    if (line.find(',', comma + 1) != std::string::npos)
      throw MalformedLine(lineno, "more than one ',' on the line");
    DatasetPair p{line.substr(0, comma), line.substr(comma + 1)};
    if (p.src.empty() || p.trg.empty()) throw MalformedLine(lineno, "empty expression");
    try {
      parse(p.src);
      parse(p.trg);
    } catch (const ParseError& e) {
      throw MalformedLine(lineno, e.what());
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<DatasetPair> load_pairs(const std::filesystem::path& path, bool has_header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_pairs(buf.str(), has_header);
}

std::string format_pairs(const std::vector<DatasetPair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    out += p.src;
    out += ',';
    out += p.trg;
    out += '\n';
  }
  return out;
}

void save_pairs(const std::vector<DatasetPair>& pairs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset '" + path.string() + "'");
  out << format_pairs(pairs);
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

namespace {

struct Counts {
  std::size_t vars = 0;
  std::size_t ops = 0;
  std::size_t length = 0;
};

Counts count_tokens(const std::string& s) {
  Counts c;
  c.length = s.size();
  for (std::size_t i = 0; i < s.size();) {
    const char ch = s[i];
    if (ch >= 'a' && ch <= 'z') {
      ++c.vars;
      while (i < s.size() && ((s[i] >= 'a' && s[i] <= 'z') || (s[i] >= '0' && s[i] <= '9'))) ++i;
      continue;
    }
    if (ch == '+' || ch == '-' || ch == '*' || ch == '&' || ch == '|' || ch == '^' || ch == '~')
      ++c.ops;
    ++i;
  }
  return c;
}

struct Range {
  std::size_t lo = std::numeric_limits<std::size_t>::max();
  std::size_t hi = 0;
  void add(std::size_t v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  Spread spread() const {
    if (lo > hi) return {};
    return {(static_cast<double>(lo) + static_cast<double>(hi)) / 2.0,
            (static_cast<double>(hi) - static_cast<double>(lo)) / 2.0};
  }
};

SideStats side_stats(const std::vector<DatasetPair>& pairs, bool src) {
  Range vars, ops, len;
  for (const auto& p : pairs) {
    const Counts c = count_tokens(src ? p.src : p.trg);
    vars.add(c.vars);
    ops.add(c.ops);
    len.add(c.length);
  }
  return {vars.spread(), ops.spread(), len.spread()};
}

std::string pm(const Spread& s) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(1) << s.mid << " +- " << s.half;
  return o.str();
}

}  // namespace

DatasetStats stats(const std::vector<DatasetPair>& pairs) {
  return {pairs.size(), side_stats(pairs, true), side_stats(pairs, false)};
}

std::string format_stats_table(const DatasetStats& s) {
  std::ostringstream o;
  o << std::left << std::setw(12) << "" << std::setw(18) << "src" << "trg\n";
  o << std::setw(12) << "size" << std::setw(18) << s.count << s.count << "\n";
  o << std::setw(12) << "# of vars" << std::setw(18) << pm(s.src.vars) << pm(s.trg.vars) << "\n";
  o << std::setw(12) << "# of ops" << std::setw(18) << pm(s.src.ops) << pm(s.trg.ops) << "\n";
  o << std::setw(12) << "length" << std::setw(18) << pm(s.src.length) << pm(s.trg.length) << "\n";
  return o.str();
}

std::string format_stats_kv(const DatasetStats& s) {
  std::ostringstream o;
  o << "count=" << s.count << "\n";
  auto side = [&](const char* name, const SideStats& st) {
    auto kv = [&](const char* field, const Spread& sp) {
      o << name << "." << field << ".mid=" << sp.mid << "\n";
      o << name << "." << field << ".half=" << sp.half << "\n";
    };
    kv("vars", st.vars);
    kv("ops", st.ops);
    kv("length", st.length);
  };
  side("src", s.src);
  side("trg", s.trg);
  return o.str();
}

}  // namespace ttmba
