// tools/compemb.cpp

// Copyright 2026 The compemb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Command-line driver: train, eval, diarize, gradcheck.
//
// Exit codes: 0 success, 1 invalid arguments or configuration, 2 runtime
// failure (including a failed gradient check).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "compemb/compemb.hpp"

namespace fs = std::filesystem;
using namespace compemb;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitRuntime = 2;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;  // key -> value from --<key>
};

std::string dashed(std::string key) {
  for (char& c : key)
    if (c == '_') c = '-';
  return key;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "key=value config file");
  cmd->add_option("--set", args.sets, "override one key, key=value (repeatable)");
  const RunConfig defaults = RunConfig::defaults();
  for (const auto& e : defaults.entries()) {
    const std::string key = e.key;
    cmd->add_option_function<std::string>(
        "--" + dashed(key), [&args, key](const std::string& v) { args.flags[key] = v; },
        e.help.empty() ? "config key " + key : e.help);
  }
}

RunConfig resolve(const CommonArgs& args) {
  RunConfig c = RunConfig::defaults();
  if (!args.config_path.empty()) c.load_file(args.config_path);
  for (const auto& s : args.sets) c.set_assignment(s);
  for (const auto& [k, v] : args.flags) c.set(k, v);
  return c;
}

fs::path prepare_out(const RunConfig& c) {
  const fs::path out = c.get("out");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out))
    throw std::runtime_error("cannot create output directory '" + out.string() + "'");
  return out;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + p.string() + "'");
  return os;
}

void write_resolved(const fs::path& out, const RunConfig& c, const std::string& command) {
  auto os = open_out(out / ("config_" + command + ".txt"));
  c.write(os);
}

// ---------------------------------------------------------------------------

int cmd_train(const CommonArgs& args) {
  const RunConfig c = resolve(args);
  const TrainConfig tc = train_config(c);
  const SpeakerSplits splits = speaker_splits(c);
  const ModelDims dims = model_dims(c);
  const fs::path out = prepare_out(c);
  write_resolved(out, c, "train");

  const SpeakerBank bank = speaker_bank(c);
  CompositionalModel init =
      init_model(dims, tc.variant, derive_seed(tc.seed, "model-init"), c.get_double("g_init_noise"));
  if (tc.episodes_train == 0)
    std::cerr << "warning: episodes_train=0, the model is saved at initialization\n";
  const std::string tag = variant_name(tc.variant);
  std::fprintf(stderr, "training %s for %d episodes\n", tag.c_str(), tc.episodes_train);
  const TrainResult r = train(std::move(init), bank, splits, tc, [&](const LogRow& row) {
    if (row.val_accuracy)
      std::fprintf(stderr, "episode %d loss %.5f val %.2f%%\n", row.episode, row.loss,
                   *row.val_accuracy);
  });
  save_model(r.best, (out / ("model_" + tag + "_best.txt")).string());
  save_model(r.final, (out / ("model_" + tag + "_final.txt")).string());
  auto log = open_out(out / ("train_log_" + tag + ".csv"));
  write_log_csv(log, r.log);
  std::printf("best validation accuracy %.2f%% at episode %d\n", r.best_val_accuracy,
              r.best_episode);
  return kExitOk;
}

int cmd_eval(const CommonArgs& args, const std::vector<std::string>& model_paths) {
  const RunConfig c = resolve(args);
  const TrainConfig tc = train_config(c);
  const SpeakerSplits splits = speaker_splits(c);
  std::vector<CompositionalModel> models;
  for (const auto& p : model_paths) models.push_back(load_model(p));
  const fs::path out = prepare_out(c);
  write_resolved(out, c, "eval");

  const SpeakerBank bank = speaker_bank(c);
  for (const auto& m : models)
    if (m.dims.input != bank.dim)
      throw std::runtime_error("model input dimension " + std::to_string(m.dims.input) +
                               " differs from feature_dim " + std::to_string(bank.dim));
  const auto episodes = make_episodes(bank, splits.test, tc.episodes_test, tc.n_speakers,
                                      tc.max_card, c.get_int32("eval_examples_per_set"),
                                      derive_seed(tc.seed, "eval-episodes"));
  std::vector<std::unique_ptr<SetPredictor>> owned;
  for (const auto& m : models) {
    if (m.g)
      owned.push_back(std::make_unique<CompositionalPredictor>(m));
    else
      owned.push_back(std::make_unique<SingleEmPredictor>(m));
  }
  owned.push_back(std::make_unique<GuessPredictor>(derive_seed(tc.seed, "eval-guess")));
  std::vector<SetPredictor*> ptrs;
  for (auto& p : owned) ptrs.push_back(p.get());
  const MetricsReport rep = evaluate_episode_batch(ptrs, episodes);

  write_report_text(std::cout, rep);
  auto txt = open_out(out / "eval_report.txt");
  write_report_text(txt, rep);
  auto csv = open_out(out / "eval_report.csv");
  write_report_csv(csv, rep);
  return kExitOk;
}

int cmd_diarize(const CommonArgs& args, const std::string& single_path,
                const std::string& cmp_path, const std::vector<std::string>& strategy_names,
                bool dump_rttm) {
  const RunConfig c = resolve(args);
  const BenchmarkConfig bc = benchmark_config(c);
  const SpeakerSplits splits = speaker_splits(c);
  std::vector<Strategy> strategies;
  try {
    for (const auto& s : strategy_names) strategies.push_back(parse_strategy(s));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (strategies.empty()) strategies.assign(std::begin(kAllStrategies), std::end(kAllStrategies));
  std::optional<CompositionalModel> single, cmp;
  if (!single_path.empty()) single = load_model(single_path);
  if (!cmp_path.empty()) cmp = load_model(cmp_path);
  for (Strategy s : strategies) {
    if (uses_compositional_model(s) ? !cmp : !single)
      throw ConfigError("strategy " + strategy_name(s) + " needs --" +
                        (uses_compositional_model(s) ? "compositional" : "single") + " MODEL");
  }
  if (cmp && !cmp->g) throw ConfigError("--compositional model has no composition function");
  const fs::path out = prepare_out(c);
  write_resolved(out, c, "diarize");
  if (dump_rttm) fs::create_directories(out / "rttm");

  const SpeakerBank bank = speaker_bank(c);
  auto per_stream = open_out(out / "der_per_stream.csv");
  per_stream << "stream,strategy,miss_s,false_alarm_s,confusion_s,reference_speech_s,der\n";
  const BenchmarkReport rep = run_benchmark(
      bank, splits.test, bc, c.get_u64("seed"), strategies, single ? &*single : nullptr,
      cmp ? &*cmp : nullptr, [&](int i, const StreamResult& r) {
        char buf[256];
        for (std::size_t k = 0; k < r.strategies.size(); ++k) {
          const DerBreakdown& b = r.scores[k];
          std::snprintf(buf, sizeof buf, "%d,%s,%.1f,%.1f,%.1f,%.1f,%.6f\n", i,
                        strategy_name(r.strategies[k]).c_str(), b.miss, b.false_alarm,
                        b.confusion, b.total_reference_speech, b.der);
          per_stream << buf;
        }
        std::fprintf(stderr, "stream %d done\n", i);
        if (!dump_rttm) return;
        const std::string id = "stream" + std::to_string(i);
        auto ref = open_out(out / "rttm" / (id + "_reference.rttm"));
        write_rttm(ref, r.stream.reference, id);
        for (std::size_t k = 0; k < r.strategies.size(); ++k) {
          auto hyp = open_out(out / "rttm" / (id + "_" + strategy_name(r.strategies[k]) + ".rttm"));
          write_rttm(hyp, r.hypotheses[k], id);
        }
      });
  write_benchmark_text(std::cout, rep);
  auto txt = open_out(out / "der_report.txt");
  write_benchmark_text(txt, rep);
  auto csv = open_out(out / "der_report.csv");
  write_benchmark_csv(csv, rep);
  return kExitOk;
}

int cmd_gradcheck(const CommonArgs& args, const std::string& corrupt_op) {
  const RunConfig c = resolve(args);
  const double tol = c.get_double("gradcheck_tolerance");
  const int networks = c.get_int32("gradcheck_networks");
  if (!(tol > 0.0)) throw ConfigError("config: gradcheck_tolerance must be > 0");
  if (networks < 0) throw ConfigError("config: gradcheck_networks must be >= 0");
  std::optional<OpKind> corrupt;
  if (!corrupt_op.empty()) {
    for (OpKind k : kAllOps)
      if (op_name(k) == corrupt_op) corrupt = k;
    if (!corrupt) throw ConfigError("unknown op '" + corrupt_op + "'");
  }
  const fs::path out = prepare_out(c);
  write_resolved(out, c, "gradcheck");
  const GradCheckReport rep = run_gradcheck(c.get_u64("seed"), tol, networks, corrupt);
  std::ostringstream text;
  char buf[160];
  auto line = [&](const GradCheckEntry& e) {
    std::snprintf(buf, sizeof buf, "%-20s %12.3e  %s\n", e.name.c_str(), e.max_rel_error,
                  e.max_rel_error < tol ? "ok" : "FAIL");
    text << buf;
  };
  std::snprintf(buf, sizeof buf, "%-20s %12s\n", "op", "max_rel_err");
  text << buf;
  for (const auto& e : rep.ops) line(e);
  for (const auto& e : rep.networks) line(e);
  std::snprintf(buf, sizeof buf, "%s (tolerance %.1e)\n", rep.passed() ? "PASS" : "FAIL", tol);
  text << buf;
  std::cout << text.str();
  auto file = open_out(out / "gradcheck_report.txt");
  file << text.str();
  return rep.passed() ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compositional speaker embeddings: training, evaluation, diarization"};
  app.require_subcommand(1);

  CommonArgs train_args, eval_args, diar_args, grad_args;
  auto* train = app.add_subcommand("train", "train one model variant");
  add_common(train, train_args);

  auto* eval = app.add_subcommand("eval", "set-identification report on held-out speakers");
  std::vector<std::string> eval_models;
  add_common(eval, eval_args);
  eval->add_option("--model", eval_models, "model file (repeatable)")->required();

  auto* diar = app.add_subcommand("diarize", "DER benchmark on synthetic streams");
  std::string single_path, cmp_path;
  std::vector<std::string> strategies;
  bool dump_rttm = false;
  add_common(diar, diar_args);
  diar->add_option("--single", single_path, "SingleEm model file");
  diar->add_option("--compositional", cmp_path, "CmpEm or CmpEmL2 model file");
  diar->add_option("--strategy", strategies, "strategy to run (repeatable; default all)");
  diar->add_flag("--dump-rttm", dump_rttm, "write reference and hypothesis RTTM files");

  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of every op");
  std::string corrupt_op;
  add_common(grad, grad_args);
  grad->add_option("--corrupt-op", corrupt_op, "scale one op's backward rule (check self-test)")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*train) return cmd_train(train_args);
    if (*eval) return cmd_eval(eval_args, eval_models);
    if (*diar) return cmd_diarize(diar_args, single_path, cmp_path, strategies, dump_rttm);
    if (*grad) return cmd_gradcheck(grad_args, corrupt_op);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitInvalid;
}
