#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "ttmba/checkpoint.hpp"
#include "ttmba/datagen.hpp"
#include "ttmba/model.hpp"
#include "ttmba/train.hpp"
#include "ttmba/truth_table.hpp"

using namespace ttmba;

namespace {

// Thrown for bad flag combinations detected after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Expr parse_or_report(const std::string& text, const std::string& what) {
  try {
    return parse(text);
  } catch (const ParseError& e) {
    throw std::runtime_error(what + ": " + e.what());
  }
}

void print_assignment(std::ostream& out, const Assignment& a) {
  bool first = true;
  for (const auto& [name, v] : a) {
    out << (first ? "" : " ") << name << '=' << v;
    first = false;
  }
}

std::string join(const std::vector<std::string>& xs, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? sep : "") + xs[i];
  return out;
}

struct ModelFlags {
  std::string fusion = "none";
  std::string position;
  bool sep = false;
  std::string semantics = "ext";
  std::size_t d_model = 64, heads = 4, enc_layers = 2, dec_layers = 2, ffn = 256, max_len = 128;
  double dropout = 0.0;
  std::size_t hidden_dim = 0;
  double table_gain = 128.0;
  bool full_scale = false;

  void attach(CLI::App* app, bool with_fusion) {
    if (with_fusion) {
      app->add_option("--fusion", fusion, "none|add|token|hidden")->check(CLI::IsMember({"none", "add", "token", "hidden"}));
      app->add_option("--position", position, "front|back|back-front-of-pad (token fusion)")
          ->check(CLI::IsMember({"front", "back", "back-front-of-pad"}));
      app->add_flag("--sep", sep, "insert <sep> between syntax and table token");
      app->add_option("--semantics", semantics, "bool|ext|both")->check(CLI::IsMember({"bool", "ext", "both"}));
    }
    app->add_option("--d-model", d_model);
    app->add_option("--heads", heads);
    app->add_option("--enc-layers", enc_layers);
    app->add_option("--dec-layers", dec_layers);
    app->add_option("--ffn", ffn);
    app->add_option("--max-len", max_len);
    app->add_option("--dropout", dropout);
    app->add_option("--hidden-dim", hidden_dim, "table block width for hidden fusion (0 = d-model)");
    app->add_option("--table-gain", table_gain);
    app->add_flag("--full-scale", full_scale, "D=256, 8 heads, 3+3 layers, ffn 512, max length 108");
  }

  ModelConfig config() const {
    ModelConfig c = full_scale ? ModelConfig::full_scale() : ModelConfig::desk();
    if (!full_scale) {
      c.d_model = d_model;
      c.n_heads = heads;
      c.n_encoder_layers = enc_layers;
      c.n_decoder_layers = dec_layers;
      c.ffn_dim = ffn;
      c.max_len = max_len;
    }
    c.dropout = dropout;
    c.hidden_concat_dim = hidden_dim;
    c.table_gain = table_gain;
    c.vocab_size = Vocab().size();
    return c;
  }

  FusionSpec spec() const {
    FusionSpec f;
    f.mode = parse_fusion_mode(fusion);
    if (!position.empty()) f.position = parse_position(position);
    f.use_sep = sep;
    f.semantics = parse_semantics(semantics);
    try {
      f.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return f;
  }
};

struct TrainFlags {
  std::size_t epochs = 40, batch = 32, warmup = 100, patience = 1000;
  double lr = 1e-3, clip = 1.0;
  bool verbose = false;

  void attach(CLI::App* app) {
    app->add_option("--epochs", epochs);
    app->add_option("--batch", batch);
    app->add_option("--lr", lr);
    app->add_option("--warmup", warmup);
    app->add_option("--clip", clip);
    app->add_option("--patience", patience);
    app->add_flag("-v,--verbose", verbose);
  }

  TrainConfig config(std::uint64_t seed) const {
    TrainConfig t;
    t.epochs = epochs;
    t.batch_size = batch;
    t.lr = lr;
    t.warmup_steps = warmup;
    t.clip_norm = clip;
    t.patience = patience;
    t.seed = seed;
    t.verbose = verbose;
    return t;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Truth-table guided MBA deobfuscation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 1;
  app.add_option("--seed", seed, "seed for every random choice")->capture_default_str();

  // tt
  auto* tt = app.add_subcommand("tt", "print the truth table of an expression");
  std::string tt_expr, tt_kind = "ext";
  unsigned tt_width = kDefaultWidth;
  std::size_t tt_max_vars = kDefaultMaxVars;
  bool tt_tsv = false;
  tt->add_option("--expr", tt_expr)->required();
  tt->add_option("--kind", tt_kind, "bool|ext|both")->check(CLI::IsMember({"bool", "ext", "both"}));
  tt->add_option("--width", tt_width)->check(CLI::Range(1, 64));
  tt->add_option("--max-vars", tt_max_vars)->check(CLI::Range(1, 16));
  tt->add_flag("--tsv", tt_tsv, "one tab-separated row per line");

  // verify
  auto* verify = app.add_subcommand("verify", "check two expressions for equivalence");
  std::string lhs, rhs;
  std::size_t trials = 256;
  unsigned verify_width = kDefaultWidth;
  verify->add_option("--lhs,lhs", lhs)->required();
  verify->add_option("--rhs,rhs", rhs)->required();
  verify->add_option("--trials", trials);
  verify->add_option("--width", verify_width)->check(CLI::Range(1, 64));

  // obfuscate
  auto* obf = app.add_subcommand("obfuscate", "apply random equivalence-preserving rewrites");
  std::string obf_expr;
  std::size_t obf_steps = 3;
  obf->add_option("--expr", obf_expr)->required();
  obf->add_option("--steps", obf_steps);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a dataset of src,trg pairs");
  std::size_t gen_n = 1000;
  std::string gen_out;
  GenConfig gen_cfg;
  gen->add_option("-n,--count", gen_n)->required();
  gen->add_option("-o,--out", gen_out, "output file (stdout when omitted)");
  gen->add_option("--min-steps", gen_cfg.min_steps);
  gen->add_option("--max-steps", gen_cfg.max_steps);
  gen->add_option("--max-coeff", gen_cfg.max_coeff);
  gen->add_option("--max-terms", gen_cfg.max_terms);
  gen->add_option("--max-src-len", gen_cfg.max_src_len);
  gen->add_option("--width", gen_cfg.width)->check(CLI::Range(1, 64));

  // stats
  auto* st = app.add_subcommand("stats", "summarize a dataset");
  std::string st_data;
  bool st_kv = false;
  st->add_option("--data,data", st_data)->required();
  st->add_flag("--kv", st_kv, "key=value lines instead of a table");

  // train
  auto* tr = app.add_subcommand("train", "train a model");
  std::string tr_train, tr_valid, tr_ckpt, tr_log;
  ModelFlags tr_model;
  TrainFlags tr_flags;
  tr->add_option("--train", tr_train)->required();
  tr->add_option("--valid", tr_valid);
  tr->add_option("--checkpoint", tr_ckpt)->required();
  tr->add_option("--loss-log", tr_log);
  tr_model.attach(tr, true);
  tr_flags.attach(tr);

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  std::string ev_ckpt, ev_data, ev_records;
  ev->add_option("--checkpoint", ev_ckpt)->required();
  ev->add_option("--data", ev_data)->required();
  ev->add_option("--records", ev_records, "write per-example results as TSV");

  // grid
  auto* gr = app.add_subcommand("grid", "train and evaluate the fusion configuration grid");
  std::string gr_train, gr_valid, gr_test, gr_out;
  std::vector<std::string> gr_extra;
  ModelFlags gr_model;
  TrainFlags gr_flags;
  gr->add_option("--train", gr_train)->required();
  gr->add_option("--valid", gr_valid);
  gr->add_option("--test", gr_test)->required();
  gr->add_option("-o,--out", gr_out, "CSV output (stdout when omitted)");
  gr->add_option("--extra", gr_extra, "additional rows: add-bool, add-ext, add-both, hidden-bool, hidden-ext, hidden-both");
  gr_model.attach(gr, false);
  gr_flags.attach(gr);

  // simplify
  auto* simp = app.add_subcommand("simplify", "predict and verify a simplification");
  std::string simp_expr, simp_ckpt;
  simp->add_option("--expr", simp_expr)->required();
  simp->add_option("--checkpoint", simp_ckpt)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*tt) {
      const Expr e = parse_or_report(tt_expr, "--expr");
      const auto vars = variables(e);
      std::vector<TableKind> kinds;
      if (tt_kind != "ext") kinds.push_back(TableKind::Boolean);
      if (tt_kind != "bool") kinds.push_back(TableKind::Extended);
      std::vector<TruthTable> tables;
      for (auto k : kinds) tables.push_back(extract(e, vars, tt_width, k, tt_max_vars));
      const std::size_t rows = tables.front().rows();
      if (tt_tsv) {
        std::cout << join(vars, "\t") << (vars.empty() ? "" : "\t");
        for (std::size_t k = 0; k < kinds.size(); ++k)
          std::cout << (k ? "\t" : "") << (kinds[k] == TableKind::Boolean ? "bool" : "ext");
        std::cout << '\n';
      }
      for (std::size_t r = 0; r < rows; ++r) {
        std::vector<std::string> bits;
        for (std::size_t v = 0; v < vars.size(); ++v) bits.push_back(std::to_string(tables.front().bit(r, v)));
        std::vector<std::string> vals;
        for (const auto& t : tables) vals.push_back(std::to_string(t.values[r]));
        if (tt_tsv)
          std::cout << join(bits, "\t") << (bits.empty() ? "" : "\t") << join(vals, "\t") << '\n';
        else
          std::cout << join(bits, " ") << (bits.empty() ? "" : " ") << "-> " << join(vals, " ") << '\n';
      }
      if (!tt_tsv) {
        for (std::size_t k = 0; k < kinds.size(); ++k) {
          std::vector<std::string> vals;
          for (auto v : tables[k].values) vals.push_back(std::to_string(v));
          std::cout << (kinds[k] == TableKind::Boolean ? "bool" : "ext") << ": [" << join(vals, ", ") << "]\n";
        }
      }
      return 0;
    }

    if (*verify) {
      const Expr a = parse_or_report(lhs, "lhs");
      const Expr b = parse_or_report(rhs, "rhs");
      auto vars = variables(a);
      for (const auto& v : variables(b)) vars.push_back(v);
      std::sort(vars.begin(), vars.end());
      vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
      std::optional<Assignment> witness;
      std::string source;
      if (vars.size() <= kDefaultMaxVars) {
        witness = table_witness(a, b, verify_width);
        source = "truth table";
      }
      if (!witness) {
        witness = random_witness(a, b, verify_width, trials, seed);
        source = "random trial";
      }
      if (!witness) {
        std::cout << "EQUIVALENT";
        if (vars.size() <= kDefaultMaxVars) std::cout << " (" << (std::size_t{1} << vars.size()) << " table rows";
        else std::cout << " (table skipped, " << vars.size() << " variables";
        std::cout << ", " << trials << " random trials, width " << verify_width << ")\n";
        return 0;
      }
      std::cout << "NOT-EQUIVALENT witness ";
      print_assignment(std::cout, *witness);
      std::cout << " lhs=" << evaluate(a, *witness, verify_width) << " rhs=" << evaluate(b, *witness, verify_width)
                << " (" << source << ")\n";
      return 1;
    }

    if (*obf) {
      const Expr e = parse_or_report(obf_expr, "--expr");
      std::cout << render(obfuscate(e, obf_steps, seed)) << '\n';
      return 0;
    }

    if (*gen) {
      if (gen_cfg.min_steps > gen_cfg.max_steps) throw UsageError("--min-steps exceeds --max-steps");
      const auto pairs = generate(gen_n, gen_cfg, seed);
      if (gen_out.empty())
        std::cout << format_pairs(pairs);
      else
        save_pairs(pairs, gen_out);
      return 0;
    }

    if (*st) {
      const auto s = stats(load_pairs(st_data));
      std::cout << (st_kv ? format_stats_kv(s) : format_stats_table(s));
      return 0;
    }

    if (*tr) {
      TrainConfig cfg = tr_flags.config(seed);
      cfg.model = tr_model.config();
      cfg.fusion = tr_model.spec();
      cfg.train_path = tr_train;
      cfg.valid_path = tr_valid;
      cfg.checkpoint_path = tr_ckpt;
      cfg.loss_log_path = tr_log;
      const auto result = train(cfg);
      std::cout << "best epoch " << result.best_epoch << " loss " << result.best_valid_loss << '\n';
      return 0;
    }

    if (*ev) {
      const Transformer model = load_model(ev_ckpt);
      const auto report = evaluate(model, load_pairs(ev_data));
      std::cout << "acc " << report.accuracy << "\nbleu " << report.bleu << "\nequivalent "
                << report.equivalence_rate << '\n';
      if (!ev_records.empty()) {
        std::ofstream out(ev_records);
        if (!out) throw std::runtime_error("cannot open " + ev_records);
        out << "src\ttrg\tprediction\tmatch\tequivalent\n";
        for (const auto& r : report.records)
          out << r.src << '\t' << r.trg << '\t' << r.prediction << '\t' << r.match << '\t' << r.equivalent << '\n';
      }
      return 0;
    }

    if (*gr) {
      TrainConfig base = gr_flags.config(seed);
      base.model = gr_model.config();
      std::vector<FusionSpec> grid = default_grid();
      for (const auto& x : gr_extra) {
        const auto dash = x.find('-');
        if (dash == std::string::npos) throw UsageError("bad --extra entry '" + x + "'");
        const auto mode = x.substr(0, dash);
        const Semantics s = parse_semantics(x.substr(dash + 1));
        if (mode == "add")
          grid.push_back(FusionSpec::add(s));
        else if (mode == "hidden")
          grid.push_back(FusionSpec::hidden(s));
        else
          throw UsageError("bad --extra entry '" + x + "'");
      }
      const auto train_set = load_pairs(gr_train);
      const auto valid_set = gr_valid.empty() ? std::vector<DatasetPair>{} : load_pairs(gr_valid);
      const auto test_set = load_pairs(gr_test);
      const auto rows = run_grid(grid, base, train_set, valid_set, test_set, [](const GridRow& row) {
        std::cerr << to_string(row.spec.mode) << ' ' << to_string(row.spec.semantics) << ' '
                  << position_label(row.spec) << (row.spec.use_sep ? " sep" : "") << ": ";
        if (row.report)
          std::cerr << "acc " << row.report->accuracy << " bleu " << row.report->bleu << '\n';
        else
          std::cerr << "failed: " << row.error << '\n';
      });
      const auto csv = format_grid_csv(rows);
      if (gr_out.empty()) {
        std::cout << csv;
      } else {
        std::ofstream out(gr_out);
        if (!out) throw std::runtime_error("cannot open " + gr_out);
        out << csv;
      }
      return 0;
    }

    if (*simp) {
      const Transformer model = load_model(simp_ckpt);
      const Expr input = parse_or_report(simp_expr, "--expr");
      const std::string pred = predict(model, {simp_expr}).front();
      std::string verdict = "INVALID";
      try {
        const Expr p = parse(pred);
        verdict = oracle_equivalent(input, p, model.config().width, model.config().max_vars, 256, seed)
                      ? "VERIFIED"
                      : "UNVERIFIED";
      } catch (const ParseError&) {
      }
      std::cout << "PRED " << pred << ' ' << verdict << '\n';
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
