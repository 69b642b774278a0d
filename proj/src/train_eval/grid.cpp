#include <algorithm>
#include <iomanip>
#include <sstream>

#include "ttmba/train.hpp"

namespace ttmba {

namespace {

constexpr Semantics kSemanticsOrder[] = {Semantics::BoolTT, Semantics::ExtendedTT, Semantics::Both};
constexpr ConcatPosition kPositionOrder[] = {ConcatPosition::Back, ConcatPosition::Front,
                                             ConcatPosition::BackFrontOfPad};

std::size_t index_of(Semantics s) {
  return static_cast<std::size_t>(std::find(std::begin(kSemanticsOrder), std::end(kSemanticsOrder), s) -
                                  std::begin(kSemanticsOrder));
}

std::size_t index_of(ConcatPosition p) {
  return static_cast<std::size_t>(std::find(std::begin(kPositionOrder), std::end(kPositionOrder), p) -
                                  std::begin(kPositionOrder));
}

}  // namespace

std::vector<FusionSpec> default_grid() {
  std::vector<FusionSpec> grid{FusionSpec::vanilla()};
  for (auto s : kSemanticsOrder)
    for (auto p : kPositionOrder)
      for (bool sep : {false, true}) grid.push_back(FusionSpec::token(s, p, sep));
  return grid;
}

std::size_t grid_rank(const FusionSpec& spec) {
  switch (spec.mode) {
    case FusionMode::None: return 0;
    case FusionMode::TokenConcat:
      return 1 + index_of(spec.semantics) * 6 + index_of(*spec.position) * 2 + (spec.use_sep ? 1 : 0);
    case FusionMode::Add: return 19 + index_of(spec.semantics);
    case FusionMode::HiddenConcat: return 22 + index_of(spec.semantics);
  }
  return 100;
}

std::string position_label(const FusionSpec& spec) {
  switch (spec.mode) {
    case FusionMode::None: return "-";
    case FusionMode::Add: return "add";
    case FusionMode::HiddenConcat: return "hid-cat";
    case FusionMode::TokenConcat: return to_string(*spec.position);
  }
  return "?";
}

std::vector<GridRow> run_grid(const std::vector<FusionSpec>& grid, const TrainConfig& base,
                              const std::vector<DatasetPair>& train_set,
                              const std::vector<DatasetPair>& valid_set,
                              const std::vector<DatasetPair>& test_set, const GridProgress& progress) {
  if (grid.empty()) throw std::invalid_argument("grid is empty");
  std::vector<FusionSpec> specs = grid;
  std::stable_sort(specs.begin(), specs.end(),
                   [](const FusionSpec& a, const FusionSpec& b) { return grid_rank(a) < grid_rank(b); });
  std::vector<GridRow> rows;
  for (const auto& spec : specs) {
    GridRow row{spec, std::nullopt, {}};
    try {
      TrainConfig cfg = base;
      cfg.fusion = spec;
      cfg.checkpoint_path.clear();
      cfg.loss_log_path.clear();
      const auto trained = train(cfg, train_set, valid_set);
      row.report = evaluate(trained.model, test_set);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    if (progress) progress(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_grid_csv(const std::vector<GridRow>& rows) {
  std::ostringstream out;
  out << "semantics,position,sep,acc,bleu\n" << std::fixed << std::setprecision(2);
  for (const auto& r : rows) {
    out << (r.spec.fused() ? to_string(r.spec.semantics) : "vanilla") << ',' << position_label(r.spec) << ',';
    if (r.spec.mode == FusionMode::TokenConcat)
      out << (r.spec.use_sep ? 'Y' : 'N');
    else
      out << '-';
    if (r.report)
      out << ',' << r.report->accuracy << ',' << r.report->bleu << '\n';
    else
      out << ",error,error\n";
  }
  return out.str();
}

}  // namespace ttmba
