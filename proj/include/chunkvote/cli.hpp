#pragma once

// Command-line front end. `run` takes the arguments after the program name and
// writes to the given streams, so it can be driven in-process by tests.
//
// Every subcommand accepts `--config FILE`: flat `key = value` lines whose keys
// are that subcommand's long option names. Flags on the command line win over
// the file, and the file wins over built-in defaults.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <future>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "chunkvote/cascade.hpp"
#include "chunkvote/corpus.hpp"
#include "chunkvote/ensemble.hpp"
#include "chunkvote/error.hpp"
#include "chunkvote/metrics.hpp"
#include "chunkvote/model.hpp"

namespace chunkvote::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kInternal = 3 };

namespace detail {

struct ConfigEntry {
  std::string key;
  std::string value;
};

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<ConfigEntry> parse_config(std::string_view text, const std::string& path) {
  std::vector<ConfigEntry> out;
  chunkvote::detail::for_each_line(text, [&](std::string_view raw, std::size_t line_no) {
    std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) return;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    if (key.empty()) throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
    out.push_back({key, trim(line.substr(eq + 1))});
  });
  return out;
}

inline bool given_on_command_line(const std::vector<std::string>& args, const std::string& key) {
  const std::string flag = "--" + key;
  return std::any_of(args.begin(), args.end(),
                     [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
}

// Splices config-file settings in front of the command-line flags, skipping
// keys the command line sets itself.
inline std::vector<std::string> apply_config(CLI::App& app, const std::vector<std::string>& args) {
  if (args.empty() || args[0].empty() || args[0][0] == '-') return args;
  CLI::App* sub = nullptr;
  try {
    sub = app.get_subcommand(args[0]);
  } catch (const CLI::OptionNotFound&) {
    return args;
  }
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::vector<std::string> out{args[0]};
  for (const auto& e : parse_config(read_file(path), path)) {
    if (e.key == "config" || !sub->get_option_no_throw("--" + e.key)) {
      throw ConfigError("unknown key '" + e.key + "' in config file " + path);
    }
    if (!given_on_command_line(args, e.key)) out.push_back("--" + e.key + "=" + e.value);
  }
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

inline void emit(const std::string& path, std::string_view content, std::ostream& out) {
  if (path.empty() || path == "-") out << content;
  else write_file(path, content);
}

inline Corpus read_corpus(const std::string& path, TagScheme scheme, int columns, bool strict = true) {
  return parse_conll(read_file(path), scheme, columns, strict);
}

// Innermost phrases of a nested bracketing (each interval once).
inline std::vector<ChunkSpan> base_spans(const std::vector<ChunkSpan>& spans) {
  std::vector<ChunkSpan> out;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& s : spans) {
    bool minimal = std::none_of(spans.begin(), spans.end(), [&](const ChunkSpan& o) {
      return s.begin <= o.begin && o.end <= s.end && (o.begin != s.begin || o.end != s.end);
    });
    if (minimal && seen.emplace(s.begin, s.end).second) out.push_back(s);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::string report(const EvalReport& r, const std::string& format) {
  return format == "kv" ? format_report_kv(r) : format_report(r);
}

inline std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%6.2f", 100.0 * v);
  return buf;
}

}  // namespace detail

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Train, combine and evaluate text chunkers.", "chunkvote"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  const std::vector<std::string> schemes{"iob1", "iob2"};
  const std::vector<std::string> report_formats{"text", "kv"};

  std::string config;
  auto with_config = [&](CLI::App* sub) {
    sub->add_option("--config", config, "flat key = value file of option defaults");
  };

  // convert
  auto* convert = app.add_subcommand("convert", "Rewrite a corpus under another tag scheme, or nested brackets as base chunks");
  std::string cv_in, cv_out = "-", cv_from = "iob2", cv_to = "iob2", cv_format = "conll";
  int cv_columns = 3;
  convert->add_option("--input", cv_in, "input file")->required();
  convert->add_option("--output", cv_out, "output file, - for stdout");
  convert->add_option("--from", cv_from, "input tag scheme")->check(CLI::IsMember(schemes));
  convert->add_option("--to", cv_to, "output tag scheme")->check(CLI::IsMember(schemes));
  convert->add_option("--format", cv_format, "input format: conll, or nested (innermost NPs become chunks)")
      ->check(CLI::IsMember({"conll", "nested"}));
  convert->add_option("--columns", cv_columns, "columns per token in conll input")->check(CLI::IsMember({2, 3}));
  with_config(convert);

  // baseline
  auto* baseline = app.add_subcommand("baseline", "Train the POS baseline, tag the test file and print its scores");
  std::string bl_train, bl_test, bl_scheme = "iob2", bl_out, bl_format = "text";
  bool bl_io = false;
  baseline->add_option("--train", bl_train, "labeled training file")->required();
  baseline->add_option("--test", bl_test, "labeled test file")->required();
  baseline->add_option("--scheme", bl_scheme, "tag scheme of both files")->check(CLI::IsMember(schemes));
  baseline->add_flag("--io", bl_io, "train on inside/outside tags only")->default_str("false");
  baseline->add_option("--output", bl_out, "also write the tagged test file here");
  baseline->add_option("--format", bl_format, "report format")->check(CLI::IsMember(report_formats));
  with_config(baseline);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train one learner and save the model");
  std::string tr_train, tr_learner = "igtree", tr_scheme = "iob2", tr_model = "-";
  train_cmd->add_option("--train", tr_train, "labeled training file")->required();
  train_cmd->add_option("--learner", tr_learner,
                        "kind[:key=value,...]; kinds baseline knn igtree maxent rules");
  train_cmd->add_option("--scheme", tr_scheme, "tag scheme of the training file")->check(CLI::IsMember(schemes));
  train_cmd->add_option("--model", tr_model, "model output file, - for stdout");
  with_config(train_cmd);

  // tag
  auto* tag_cmd = app.add_subcommand("tag", "Tag a corpus with a saved model");
  std::string tg_model, tg_in, tg_out = "-";
  int tg_columns = 3;
  unsigned tg_threads = 1;
  tag_cmd->add_option("--model", tg_model, "model file")->required();
  tag_cmd->add_option("--input", tg_in, "corpus to tag")->required();
  tag_cmd->add_option("--columns", tg_columns, "columns per token in the input")->check(CLI::IsMember({2, 3}));
  tag_cmd->add_option("--output", tg_out, "output file, - for stdout");
  tag_cmd->add_option("--threads", tg_threads, "tagging threads")->check(CLI::Range(1u, 256u));
  with_config(tag_cmd);

  // eval
  auto* eval = app.add_subcommand("eval", "Score predicted chunks against gold chunks");
  std::string ev_gold, ev_pred, ev_scheme = "iob2", ev_format = "text";
  double ev_beta = 1.0;
  bool ev_nested = false;
  eval->add_option("--gold", ev_gold, "gold file")->required();
  eval->add_option("--pred", ev_pred, "predicted file")->required();
  eval->add_option("--scheme", ev_scheme, "tag scheme of the gold file")->check(CLI::IsMember(schemes));
  eval->add_option("--beta", ev_beta, "F-rate beta")->check(CLI::PositiveNumber);
  eval->add_flag("--nested", ev_nested, "both files are in the nested bracket format")->default_str("false");
  eval->add_option("--format", ev_format, "report format")->check(CLI::IsMember(report_formats));
  with_config(eval);

  // cv-tune
  auto* cvtune = app.add_subcommand("cv-tune", "Build a tuning prediction table by cross-validation");
  std::string ct_train, ct_scheme = "iob2", ct_out = "-", ct_test, ct_test_out;
  std::vector<std::string> ct_learners{"baseline", "knn", "igtree", "maxent", "rules"};
  int ct_folds = 10;
  unsigned ct_threads = 1;
  cvtune->add_option("--train", ct_train, "labeled training file")->required();
  cvtune->add_option("--learner", ct_learners, "learner spec; repeat for each system")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  cvtune->add_option("--folds", ct_folds, "cross-validation folds")->check(CLI::Range(2, 1000));
  cvtune->add_option("--scheme", ct_scheme, "tag scheme")->check(CLI::IsMember(schemes));
  cvtune->add_option("--threads", ct_threads, "parallel training jobs")->check(CLI::Range(1u, 256u));
  cvtune->add_option("--output", ct_out, "tuning table output, - for stdout");
  cvtune->add_option("--test", ct_test, "also train on all data and tag this corpus");
  cvtune->add_option("--test-output", ct_test_out, "test table output (with --test)");
  with_config(cvtune);

  // weights
  auto* weights = app.add_subcommand("weights", "Estimate voting weights from a tuning table");
  std::string wt_tuning, wt_out = "-";
  weights->add_option("--tuning", wt_tuning, "tuning prediction table")->required();
  weights->add_option("--output", wt_out, "weights output, - for stdout");
  with_config(weights);

  // combine
  auto* combine = app.add_subcommand("combine", "Combine the systems of a prediction table");
  std::string cb_table, cb_method = "majority", cb_tuning, cb_weights, cb_text, cb_out = "-", cb_format = "text";
  bool cb_bracket = false, cb_report = false;
  std::size_t cb_best_n = 3;
  int cb_k = 3;
  std::vector<std::string> method_names;
  for (auto m : kAllMethods) method_names.emplace_back(to_string(m));
  combine->add_option("--table", cb_table, "prediction table to combine")->required();
  combine->add_option("--method", cb_method, "combination method")->check(CLI::IsMember(method_names));
  combine->add_option("--tuning", cb_tuning, "tuning prediction table (all methods but majority)");
  combine->add_option("--weights", cb_weights, "weights file instead of --tuning (voting methods only)");
  combine->add_flag("--bracket-level", cb_bracket, "vote on chunk starts and ends separately")->default_str("false");
  combine->add_option("--best-n", cb_best_n, "subset size for best-n")->check(CLI::Range(std::size_t{1}, std::size_t{64}));
  combine->add_option("--k", cb_k, "nearest-distance regions for stacked k-NN")->check(CLI::Range(1, 1000));
  combine->add_option("--text", cb_text, "conll corpus supplying the words of the output");
  combine->add_option("--output", cb_out, "combined corpus output, - for stdout");
  combine->add_flag("--report", cb_report, "print scores against the table's gold column")->default_str("false");
  combine->add_option("--format", cb_format, "report format")->check(CLI::IsMember(report_formats));
  with_config(combine);

  // best-n
  auto* bestn = app.add_subcommand("best-n", "Pick the system subset whose majority vote scores best");
  std::string bn_tuning;
  std::size_t bn_n = 3;
  bool bn_bracket = false;
  bestn->add_option("--tuning", bn_tuning, "tuning prediction table")->required();
  bestn->add_option("--n", bn_n, "subset size")->check(CLI::Range(std::size_t{1}, std::size_t{64}));
  bestn->add_flag("--bracket-level", bn_bracket, "score bracket-level voting")->default_str("false");
  with_config(bestn);

  // cascade
  auto* cascade = app.add_subcommand("cascade", "Nested NP bracketing with a chunk-and-collapse cascade");
  std::string cs_train, cs_test, cs_learner = "igtree", cs_head = "last", cs_label = "NP", cs_out = "-";
  std::string cs_format = "text";
  std::size_t cs_depth = 5;
  bool cs_eval = false;
  unsigned cs_threads = 1;
  cascade->add_option("--train", cs_train, "nested training file")->required();
  cascade->add_option("--test", cs_test, "nested file to bracket")->required();
  cascade->add_option("--learner", cs_learner, "learner spec for the level chunker");
  cascade->add_option("--max-depth", cs_depth, "maximum cascade levels")->check(CLI::Range(std::size_t{1}, std::size_t{100}));
  cascade->add_option("--head", cs_head, "head of a collapsed phrase")->check(CLI::IsMember({"last", "first"}));
  cascade->add_option("--label", cs_label, "phrase label to bracket");
  cascade->add_option("--threads", cs_threads, "tagging threads")->check(CLI::Range(1u, 256u));
  cascade->add_option("--output", cs_out, "nested output, - for stdout");
  cascade->add_flag("--eval", cs_eval, "print scores against the test file's brackets")->default_str("false");
  cascade->add_option("--format", cs_format, "report format")->check(CLI::IsMember(report_formats));
  with_config(cascade);

  // report
  auto* report = app.add_subcommand("report", "Score every system and every combination method on a test table");
  std::string rp_tuning, rp_table;
  std::size_t rp_best_n = 3;
  int rp_k = 3;
  report->add_option("--tuning", rp_tuning, "tuning prediction table")->required();
  report->add_option("--table", rp_table, "test prediction table with gold tags")->required();
  report->add_option("--best-n", rp_best_n, "subset size for best-n")->check(CLI::Range(std::size_t{1}, std::size_t{64}));
  report->add_option("--k", rp_k, "nearest-distance regions for stacked k-NN")->check(CLI::Range(1, 1000));
  with_config(report);

  try {
    auto full = detail::apply_config(app, args);
    std::reverse(full.begin(), full.end());
    app.parse(full);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }

  try {
    if (convert->parsed()) {
      Corpus c;
      if (cv_format == "nested") {
        c.scheme = parse_scheme(cv_to);
        for (const auto& ns : parse_nested(read_file(cv_in))) {
          Sentence s{ns.tokens};
          s.set_tags(spans_to_tags(detail::base_spans(ns.spans), s.size(), c.scheme));
          c.sentences.push_back(std::move(s));
        }
      } else {
        c = detail::read_corpus(cv_in, parse_scheme(cv_from), cv_columns);
        if (cv_columns == 3) {
          for (auto& s : c.sentences) s.set_tags(convert_scheme(s.tags(), c.scheme, parse_scheme(cv_to)));
        }
        c.scheme = parse_scheme(cv_to);
      }
      detail::emit(cv_out, write_conll(c), out);
    } else if (baseline->parsed()) {
      auto scheme = parse_scheme(bl_scheme);
      auto train_c = detail::read_corpus(bl_train, scheme, 3);
      auto test_c = detail::read_corpus(bl_test, scheme, 3);
      auto spec = LearnerSpec::of(LearnerKind::Baseline);
      spec.io = bl_io;
      auto tagged = tag_corpus(train(train_c, spec), test_c);
      if (!bl_out.empty()) detail::emit(bl_out, write_conll(tagged), out);
      out << detail::report(score_tagged(test_c, tagged), bl_format);
    } else if (train_cmd->parsed()) {
      auto spec = parse_learner_spec(tr_learner);
      auto model = train(detail::read_corpus(tr_train, parse_scheme(tr_scheme), 3), spec);
      detail::emit(tr_model, save_model(model), out);
    } else if (tag_cmd->parsed()) {
      auto model = load_model(read_file(tg_model));
      auto c = detail::read_corpus(tg_in, model.scheme, tg_columns, false);
      detail::emit(tg_out, write_conll(tag_corpus(model, c, tg_threads)), out);
    } else if (eval->parsed()) {
      if (ev_nested) {
        out << detail::report(score_nested(parse_nested(read_file(ev_gold)), parse_nested(read_file(ev_pred)), ev_beta),
                              ev_format);
      } else {
        auto scheme = parse_scheme(ev_scheme);
        auto gold = detail::read_corpus(ev_gold, scheme, 3);
        auto pred = detail::read_corpus(ev_pred, scheme, 3, false);
        out << detail::report(score_tagged(gold, pred, ev_beta), ev_format);
      }
    } else if (cvtune->parsed()) {
      auto scheme = parse_scheme(ct_scheme);
      std::vector<LearnerSpec> specs;
      for (const auto& l : ct_learners) specs.push_back(parse_learner_spec(l));
      auto train_c = detail::read_corpus(ct_train, scheme, 3);
      detail::emit(ct_out, write_table(cv_tuning_table(train_c, specs, ct_folds, ct_threads)), out);
      if (!ct_test.empty()) {
        if (ct_test_out.empty()) throw ConfigError("--test needs --test-output");
        auto test_c = detail::read_corpus(ct_test, scheme, 3);
        std::vector<std::pair<std::string, Corpus>> outputs;
        for (const auto& spec : specs) outputs.emplace_back(spec.display_name(), tag_corpus(train(train_c, spec), test_c, ct_threads));
        detail::emit(ct_test_out, write_table(make_table(test_c, outputs)), out);
      } else if (!ct_test_out.empty()) {
        throw ConfigError("--test-output needs --test");
      }
    } else if (weights->parsed()) {
      detail::emit(wt_out, write_weights(estimate_weights(parse_table(read_file(wt_tuning)))), out);
    } else if (combine->parsed()) {
      auto test = parse_table(read_file(cb_table));
      auto method = parse_method(cb_method);
      CombinerOptions opt;
      opt.k = cb_k;
      opt.best_n = cb_best_n;
      opt.bracket_level = cb_bracket;
      Combiner combiner;
      if (!cb_weights.empty()) {
        if (!cb_tuning.empty()) throw ConfigError("give either --tuning or --weights, not both");
        if (cb_bracket) throw ConfigError("--weights cannot be used with --bracket-level");
        auto w = parse_weights(read_file(cb_weights));
        if (w.systems != test.systems) throw ConfigError("weights file and table name different systems");
        combiner = Combiner::from_weights(method, std::move(w));
      } else {
        std::optional<PredictionTable> tuning;
        if (!cb_tuning.empty()) {
          tuning = parse_table(read_file(cb_tuning));
          if (tuning->systems != test.systems) throw ConfigError("tuning and test tables name different systems");
        }
        combiner = Combiner::fit(method, tuning ? &*tuning : nullptr, opt, test.systems.size());
      }
      std::optional<Corpus> text;
      if (!cb_text.empty()) text = detail::read_corpus(cb_text, TagScheme::IOB2, 3, false);
      auto combined = combine_corpus(test, combiner, text ? &*text : nullptr);
      detail::emit(cb_out, write_conll(combined), out);
      if (cb_report) {
        if (!test.has_gold()) throw ConfigError("--report needs a table with a gold column");
        SpanSets gold, pred;
        for (std::size_t s = 0; s < test.sentences.size(); ++s) {
          gold.push_back(extract_chunks(test.gold_tags(s)));
          pred.push_back(extract_chunks(combined.sentences[s].tags()));
        }
        out << detail::report(score_chunks(gold, pred), cb_format);
      }
    } else if (bestn->parsed()) {
      auto tuning = parse_table(read_file(bn_tuning));
      auto best = best_n_select(tuning, bn_n, bn_bracket);
      out << "systems:";
      for (auto s : best.systems) out << ' ' << tuning.systems[s];
      out << "\nF: " << chunkvote::detail::fixed2(100.0 * best.f) << "\n";
    } else if (cascade->parsed()) {
      auto spec = parse_learner_spec(cs_learner);
      CascadeOptions opt;
      opt.max_depth = cs_depth;
      opt.head = cs_head == "first" ? HeadRule::First : HeadRule::Last;
      opt.label = cs_label;
      auto model = train(cascade_training_corpus(parse_nested(read_file(cs_train)), opt), spec);
      auto test = parse_nested(read_file(cs_test));
      std::vector<NestedSentence> result(test.size());
      auto work = [&](std::size_t from, std::size_t to) {
        for (std::size_t i = from; i < to; ++i) {
          result[i].tokens = test[i].tokens;
          result[i].spans = cascade_bracket(Sentence{test[i].tokens}, model_chunker(model), opt);
        }
      };
      if (cs_threads <= 1) {
        work(0, test.size());
      } else {
        std::vector<std::future<void>> jobs;
        std::size_t block = (test.size() + cs_threads - 1) / cs_threads;
        for (std::size_t from = 0; from < test.size(); from += block) {
          jobs.push_back(std::async(std::launch::async, work, from, std::min(test.size(), from + block)));
        }
        for (auto& j : jobs) j.get();
      }
      detail::emit(cs_out, write_nested(result), out);
      if (cs_eval) out << detail::report(score_nested(test, result), cs_format);
    } else if (report->parsed()) {
      auto tuning = parse_table(read_file(rp_tuning));
      auto test = parse_table(read_file(rp_table));
      if (tuning.systems != test.systems) throw ConfigError("tuning and test tables name different systems");
      if (!test.has_gold()) throw ConfigError("report needs a test table with a gold column");
      SpanSets gold;
      for (std::size_t s = 0; s < test.sentences.size(); ++s) gold.push_back(extract_chunks(test.gold_tags(s)));
      auto line = [&](const std::string& name, const EvalReport& r) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-28s %s%% %s%% %s\n", name.c_str(), detail::percent(r.precision()).c_str(),
                      detail::percent(r.recall()).c_str(), detail::percent(r.f_rate()).c_str());
        out << buf;
      };
      char head[160];
      std::snprintf(head, sizeof head, "%-28s %7s %8s %7s\n", "system", "prec", "recall", "F");
      out << head;
      for (std::size_t sys = 0; sys < test.systems.size(); ++sys) {
        SpanSets pred;
        for (std::size_t s = 0; s < test.sentences.size(); ++s) pred.push_back(extract_chunks(test.system_tags(s, sys)));
        line(test.systems[sys], score_chunks(gold, pred));
      }
      for (bool bracket : {false, true}) {
        for (auto m : kAllMethods) {
          CombinerOptions opt;
          opt.k = rp_k;
          opt.best_n = std::min(rp_best_n, test.systems.size());
          opt.bracket_level = bracket;
          auto tags = Combiner::fit(m, &tuning, opt, test.systems.size()).apply(test);
          SpanSets pred;
          for (const auto& t : tags) pred.push_back(extract_chunks(t));
          line(std::string(to_string(m)) + (bracket ? " (brackets)" : ""), score_chunks(gold, pred));
        }
      }
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const AlignmentError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const TrainingError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kOk;
}

}  // namespace chunkvote::cli
