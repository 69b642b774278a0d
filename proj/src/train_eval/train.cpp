#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include "ttmba/train.hpp"

namespace ttmba {

namespace {

struct Example {
  std::vector<int> src;  // chars + <eos>
  std::vector<int> trg;  // <bos> chars <eos>
  std::vector<double> table;
};

struct Batch {
  std::size_t size = 0;
  std::size_t src_len = 0;
  std::size_t trg_len = 0;  // decoder input length (trg minus its last token)
  std::vector<int> src;
  std::vector<int> trg_in;
  std::vector<int> trg_out;
  std::vector<double> table;
};

std::vector<Example> prepare(const Transformer& model, const std::vector<DatasetPair>& pairs) {
  static const Vocab vocab;
  const auto& cfg = model.config();
  const auto& fusion = model.fusion();
  std::vector<Example> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    Example ex;
    ex.src = encode_source(vocab, p.src);
    ex.trg.push_back(Vocab::kBos);
    for (int id : vocab.encode(p.trg)) ex.trg.push_back(id);
    ex.trg.push_back(Vocab::kEos);
    if (ex.src.size() > cfg.max_len || ex.trg.size() > cfg.max_len)
      throw std::length_error("pair exceeds max_len " + std::to_string(cfg.max_len) + ": " + p.src);
    if (fusion.fused()) ex.table = expr_features(parse(p.src), fusion.semantics, cfg.width, cfg.max_vars);
    out.push_back(std::move(ex));
  }
  return out;
}

Batch collate(const std::vector<Example>& data, std::span<const std::size_t> idx) {
  Batch b;
  b.size = idx.size();
  for (auto i : idx) {
    b.src_len = std::max(b.src_len, data[i].src.size());
    b.trg_len = std::max(b.trg_len, data[i].trg.size() - 1);
  }
  b.src.assign(b.size * b.src_len, Vocab::kPad);
  b.trg_in.assign(b.size * b.trg_len, Vocab::kPad);
  b.trg_out.assign(b.size * b.trg_len, Vocab::kPad);
  for (std::size_t r = 0; r < b.size; ++r) {
    const auto& ex = data[idx[r]];
    std::copy(ex.src.begin(), ex.src.end(), b.src.begin() + static_cast<std::ptrdiff_t>(r * b.src_len));
    for (std::size_t j = 0; j + 1 < ex.trg.size(); ++j) {
      b.trg_in[r * b.trg_len + j] = ex.trg[j];
      b.trg_out[r * b.trg_len + j] = ex.trg[j + 1];
    }
    b.table.insert(b.table.end(), ex.table.begin(), ex.table.end());
  }
  return b;
}

ag::Tensor batch_loss(const Transformer& model, const Batch& b) {
  const Memory mem = model.encode_and_fuse(b.src, b.size, b.src_len, b.table);
  const ag::Tensor logits = model.decode(b.trg_in, b.trg_len, mem);
  const std::size_t v = model.config().vocab_size;
  return ag::cross_entropy(ag::reshape(logits, {b.size * b.trg_len, v}), b.trg_out, Vocab::kPad);
}

std::size_t target_tokens(const Batch& b) {
  return static_cast<std::size_t>(
      std::count_if(b.trg_out.begin(), b.trg_out.end(), [](int t) { return t != Vocab::kPad; }));
}

// Batches of similar source length; the order within equal lengths and the
// order of batches both come from `rng`.
std::vector<std::vector<std::size_t>> bucket(const std::vector<Example>& data, std::size_t batch_size,
                                             std::mt19937_64& rng) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return data[a].src.size() < data[b].src.size(); });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size)
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size)));
  std::shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

double mean_loss(const Transformer& model, const std::vector<Example>& data, std::size_t batch_size) {
  if (data.empty()) return 0.0;
  ag::NoGradGuard no_grad;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return data[a].src.size() < data[b].src.size(); });
  double total = 0.0;
  std::size_t tokens = 0;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::span<const std::size_t> idx(order.data() + i, std::min(batch_size, order.size() - i));
    const Batch b = collate(data, idx);
    const std::size_t n = target_tokens(b);
    total += batch_loss(model, b).item() * static_cast<double>(n);
    tokens += n;
  }
  return tokens ? total / static_cast<double>(tokens) : 0.0;
}

std::vector<std::vector<double>> snapshot(const ag::ParamStore& params) {
  std::vector<std::vector<double>> out;
  for (const auto& [name, t] : params) out.emplace_back(t.values().begin(), t.values().end());
  return out;
}

void restore(ag::ParamStore& params, const std::vector<std::vector<double>>& values) {
  std::size_t i = 0;
  for (auto& [name, t] : params) {
    std::copy(values[i].begin(), values[i].end(), t.values().begin());
    ++i;
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs == 0 || batch_size == 0 || patience == 0)
    throw std::invalid_argument("epochs, batch size and patience must be positive");
  if (!(lr > 0.0) || !(clip_norm > 0.0)) throw std::invalid_argument("learning rate and clip norm must be positive");
  model.validate();
  fusion.validate();
}

TrainResult train(const TrainConfig& config) {
  if (config.train_path.empty()) throw std::invalid_argument("no training dataset given");
  const auto train_set = load_pairs(config.train_path);
  const auto valid_set = config.valid_path.empty() ? std::vector<DatasetPair>{} : load_pairs(config.valid_path);
  return train(config, train_set, valid_set);
}

TrainResult train(const TrainConfig& config, const std::vector<DatasetPair>& train_set,
                  const std::vector<DatasetPair>& valid_set) {
  config.validate();
  if (train_set.empty()) throw std::invalid_argument("training set is empty");
  TrainResult result{Transformer(config.model, config.fusion, config.seed), {}, 0, 0.0};
  Transformer& model = result.model;
  const auto train_data = prepare(model, train_set);
  const auto valid_data = prepare(model, valid_set);
  const bool select_on_train = valid_data.empty();

  std::ofstream loss_log;
  if (!config.loss_log_path.empty()) {
    loss_log.open(config.loss_log_path);
    if (!loss_log) throw std::runtime_error("cannot open " + config.loss_log_path.string());
    loss_log << "epoch,split,loss\n";
  }
  auto record = [&](std::size_t epoch, const std::string& split, double loss) {
    result.log.push_back({epoch, split, loss});
    if (loss_log) {
      loss_log << epoch << ',' << split << ',' << loss << '\n';
      loss_log.flush();
    }
  };

  record(0, "train", mean_loss(model, train_data, config.batch_size));
  if (!select_on_train) record(0, "valid", mean_loss(model, valid_data, config.batch_size));

  std::mt19937_64 rng(config.seed ^ 0x7a1b5eedULL);
  model.reseed_dropout(config.seed ^ 0xd0d0ULL);
  ag::AdamState adam;
  ag::AdamConfig adam_cfg;
  std::size_t step = 0;
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best_values = snapshot(model.params());
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    model.set_training(true);
    double total = 0.0;
    std::size_t tokens = 0;
    for (const auto& idx : bucket(train_data, config.batch_size, rng)) {
      const Batch b = collate(train_data, idx);
      model.params().zero_grad();
      const ag::Tensor loss = batch_loss(model, b);
      const double value = loss.item();
      if (!std::isfinite(value))
        throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch) + ", step " +
                              std::to_string(step + 1));
      ag::backward(loss);
      ag::clip_grad_norm(model.params(), config.clip_norm);
      ++step;
      adam_cfg.lr = config.lr * std::min(1.0, static_cast<double>(step) /
                                                  static_cast<double>(std::max<std::size_t>(1, config.warmup_steps)));
      ag::adam_step(model.params(), adam, adam_cfg);
      const std::size_t n = target_tokens(b);
      total += value * static_cast<double>(n);
      tokens += n;
    }
    model.set_training(false);
    const double train_loss = total / static_cast<double>(std::max<std::size_t>(1, tokens));
    record(epoch, "train", train_loss);
    double criterion = train_loss;
    if (!select_on_train) {
      criterion = mean_loss(model, valid_data, config.batch_size);
      record(epoch, "valid", criterion);
    }
    if (config.verbose) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::cerr << "epoch " << epoch << " train " << train_loss;
      if (!select_on_train) std::cerr << " valid " << criterion;
      std::cerr << " (" << secs << " s)\n";
    }
    if (criterion < best) {
      best = criterion;
      best_values = snapshot(model.params());
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }

  restore(model.params(), best_values);
  result.best_valid_loss = best;
  if (!config.checkpoint_path.empty()) save_model(model, config.checkpoint_path);
  return result;
}

double dataset_loss(const Transformer& model, const std::vector<DatasetPair>& pairs, std::size_t batch_size) {
  return mean_loss(model, prepare(model, pairs), batch_size);
}

std::string format_loss_log(const std::vector<LossRecord>& log) {
  std::ostringstream out;
  out << "epoch,split,loss\n";
  for (const auto& r : log) out << r.epoch << ',' << r.split << ',' << r.loss << '\n';
  return out.str();
}

std::vector<std::string> predict(const Transformer& model, const std::vector<std::string>& sources,
                                 std::size_t batch_size) {
  static const Vocab vocab;
  const auto& cfg = model.config();
  const auto& fusion = model.fusion();
  std::vector<std::vector<int>> ids;
  std::vector<std::vector<double>> tables;
  for (const auto& s : sources) {
    ids.push_back(encode_source(vocab, s));
    if (ids.back().size() > cfg.max_len)
      throw std::length_error("source exceeds max_len " + std::to_string(cfg.max_len) + ": " + s);
    tables.push_back(fusion.fused() ? expr_features(parse(s), fusion.semantics, cfg.width, cfg.max_vars)
                                    : std::vector<double>{});
  }
  std::vector<std::size_t> order(sources.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return ids[a].size() < ids[b].size(); });
  std::vector<std::string> out(sources.size());
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t n = std::min(batch_size, order.size() - i);
    std::size_t len = 0;
    for (std::size_t r = 0; r < n; ++r) len = std::max(len, ids[order[i + r]].size());
    std::vector<int> src(n * len, Vocab::kPad);
    std::vector<double> table;
    for (std::size_t r = 0; r < n; ++r) {
      const auto& x = ids[order[i + r]];
      std::copy(x.begin(), x.end(), src.begin() + static_cast<std::ptrdiff_t>(r * len));
      const auto& t = tables[order[i + r]];
      table.insert(table.end(), t.begin(), t.end());
    }
    const auto decoded = model.greedy_decode(src, n, len, table, cfg.max_len - 1);
    for (std::size_t r = 0; r < n; ++r) out[order[i + r]] = vocab.decode(decoded[r]);
  }
  return out;
}

EvalReport evaluate(const Transformer& model, const std::vector<DatasetPair>& pairs, std::size_t batch_size) {
  EvalReport report;
  if (pairs.empty()) return report;
  std::vector<std::string> sources, refs;
  for (const auto& p : pairs) {
    sources.push_back(p.src);
    refs.push_back(p.trg);
  }
  const auto preds = predict(model, sources, batch_size);
  const unsigned width = model.config().width;
  const std::size_t max_vars = model.config().max_vars;
  std::size_t matches = 0, equivalents = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    EvalRecord r{pairs[i].src, pairs[i].trg, preds[i], exact_match(preds[i], pairs[i].trg), false};
    if (r.match) {
      r.equivalent = true;
    } else {
      try {
        r.equivalent = oracle_equivalent(parse(preds[i]), parse(pairs[i].trg), width, max_vars);
      } catch (const std::exception&) {
        r.equivalent = false;
      }
    }
    matches += r.match;
    equivalents += r.equivalent;
    report.records.push_back(std::move(r));
  }
  const double n = static_cast<double>(pairs.size());
  report.accuracy = 100.0 * static_cast<double>(matches) / n;
  report.equivalence_rate = 100.0 * static_cast<double>(equivalents) / n;
  report.bleu = bleu(preds, refs);
  return report;
}

}  // namespace ttmba
