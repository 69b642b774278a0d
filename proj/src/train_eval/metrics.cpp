#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <stdexcept>

#include "ttmba/train.hpp"

namespace ttmba {

namespace {

std::string strip_ws(std::string_view s) {
  std::string out;
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) out += c;
  return out;
}

constexpr int kBleuOrder = 4;
constexpr double kZeroPrecision = 1e-9;

}  // namespace

bool exact_match(std::string_view pred, std::string_view ref) { return strip_ws(pred) == strip_ws(ref); }

double bleu(const std::vector<std::string>& preds, const std::vector<std::string>& refs) {
  if (preds.size() != refs.size())
    throw std::invalid_argument("bleu: " + std::to_string(preds.size()) + " predictions vs " +
                                std::to_string(refs.size()) + " references");
  std::size_t matches[kBleuOrder] = {};
  std::size_t totals[kBleuOrder] = {};
  std::size_t cand_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const std::string p = strip_ws(preds[i]);
    const std::string r = strip_ws(refs[i]);
    cand_len += p.size();
    ref_len += r.size();
    for (int n = 1; n <= kBleuOrder; ++n) {
      const auto un = static_cast<std::size_t>(n);
      if (p.size() < un) continue;
      std::map<std::string_view, std::size_t> ref_counts;
      for (std::size_t j = 0; j + un <= r.size(); ++j) ++ref_counts[std::string_view(r).substr(j, un)];
      std::map<std::string_view, std::size_t> cand_counts;
      for (std::size_t j = 0; j + un <= p.size(); ++j) ++cand_counts[std::string_view(p).substr(j, un)];
      totals[n - 1] += p.size() - un + 1;
      for (const auto& [gram, count] : cand_counts) {
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matches[n - 1] += std::min(count, it->second);
      }
    }
  }
  if (cand_len == 0) return ref_len == 0 ? 100.0 : 0.0;
  if (matches[0] == 0) return 0.0;
  double log_sum = 0.0;
  int orders = 0;
  for (int n = 0; n < kBleuOrder; ++n) {
    if (totals[n] == 0) continue;
    const double precision =
        matches[n] == 0 ? kZeroPrecision : static_cast<double>(matches[n]) / static_cast<double>(totals[n]);
    log_sum += std::log(precision);
    ++orders;
  }
  const double bp = cand_len >= ref_len
                        ? 1.0
                        : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
  return std::clamp(100.0 * bp * std::exp(log_sum / orders), 0.0, 100.0);
}

bool oracle_equivalent(const Expr& a, const Expr& b, unsigned width, std::size_t max_vars,
                       std::size_t trials, std::uint64_t seed) {
  auto vars = variables(a);
  for (const auto& v : variables(b)) vars.push_back(v);
  std::sort(vars.begin(), vars.end());
  vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
  if (vars.size() <= max_vars && !equivalent(a, b, width, max_vars)) return false;
  return randomized_check(a, b, width, trials, seed);
}

}  // namespace ttmba
