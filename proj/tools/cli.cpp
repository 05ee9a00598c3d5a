// Copyright 2026 The unroll-tuner Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "unroll_tuner/archive.hpp"
#include "unroll_tuner/dataset.hpp"
#include "unroll_tuner/error.hpp"
#include "unroll_tuner/eval.hpp"
#include "unroll_tuner/schedule.hpp"

namespace unroll_tuner::cli {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T number(const std::string& key, const std::string& value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw Error(ErrorCode::InvalidConfig, "bad value for " + key + ": '" + value + "'");
  }
  return out;
}

std::vector<std::string> split_commas(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto end = comma == std::string_view::npos ? text.size() : comma;
    out.emplace_back(trim(text.substr(start, end - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

std::map<std::string, std::string> parse_config_text(std::string_view text) {
  std::map<std::string, std::string> entries;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos || trim(line.substr(0, eq)).empty()) {
      throw Error(ErrorCode::ParseError,
                  "config line " + std::to_string(line_no) + ": expected key = value",
                  std::string(line));
    }
    entries[std::string(trim(line.substr(0, eq)))] = std::string(trim(line.substr(eq + 1)));
  }
  return entries;
}

std::vector<int> parse_classes(std::string_view text) {
  std::vector<int> out;
  for (const auto& item : split_commas(text)) {
    const int u = number<int>("classes", item);
    if (!is_unroll_factor(u)) {
      throw Error(ErrorCode::LabelNotInClassSet, "factor " + item + " is not in {0,2,4,8,16,32,64}");
    }
    if (std::find(out.begin(), out.end(), u) == out.end()) out.push_back(u);
  }
  if (out.empty()) throw Error(ErrorCode::InvalidConfig, "classes must not be empty");
  std::sort(out.begin(), out.end());
  return out;
}

void apply_config_entry(CliConfig& cfg, const std::string& key, const std::string& value) {
  using Setter = std::function<void(CliConfig&, const std::string&)>;
  static const std::map<std::string, Setter> setters = {
      {"seed", [](CliConfig& c, const std::string& v) { c.seed = number<std::uint64_t>("seed", v); }},
      {"jobs", [](CliConfig& c, const std::string& v) { c.jobs = number<int>("jobs", v); }},
      {"backend", [](CliConfig& c, const std::string& v) { c.backend = v; }},
      {"runs", [](CliConfig& c, const std::string& v) { c.runs = number<int>("runs", v); }},
      {"classes", [](CliConfig& c, const std::string& v) { c.classes = parse_classes(v); }},
      {"count", [](CliConfig& c, const std::string& v) { c.count = number<int>("count", v); }},
      {"gen.depth_min",
       [](CliConfig& c, const std::string& v) { c.gen.depth_min = number<int>("gen.depth_min", v); }},
      {"gen.depth_max",
       [](CliConfig& c, const std::string& v) { c.gen.depth_max = number<int>("gen.depth_max", v); }},
      {"gen.extents",
       [](CliConfig& c, const std::string& v) {
         c.gen.extent_choices.clear();
         for (const auto& e : split_commas(v)) {
           c.gen.extent_choices.push_back(number<std::int64_t>("gen.extents", e));
         }
       }},
      {"gen.max_inputs",
       [](CliConfig& c, const std::string& v) { c.gen.max_inputs = number<int>("gen.max_inputs", v); }},
      {"gen.max_leaves",
       [](CliConfig& c, const std::string& v) { c.gen.max_leaves = number<int>("gen.max_leaves", v); }},
      {"gen.schedules_per_program",
       [](CliConfig& c, const std::string& v) {
         c.gen.schedules_per_program = number<int>("gen.schedules_per_program", v);
       }},
      {"toolchain.cmd", [](CliConfig& c, const std::string& v) { c.toolchain.cmd = v; }},
      {"toolchain.flags", [](CliConfig& c, const std::string& v) { c.toolchain.flags = v; }},
      {"toolchain.timeout",
       [](CliConfig& c, const std::string& v) {
         c.toolchain.timeout = std::chrono::seconds(number<int>("toolchain.timeout", v));
       }},
      {"cost.c_body",
       [](CliConfig& c, const std::string& v) { c.cost.c_body = number<double>("cost.c_body", v); }},
      {"cost.c_loop",
       [](CliConfig& c, const std::string& v) { c.cost.c_loop = number<double>("cost.c_loop", v); }},
      {"cost.c_icache",
       [](CliConfig& c, const std::string& v) { c.cost.c_icache = number<double>("cost.c_icache", v); }},
      {"cost.icache_capacity",
       [](CliConfig& c, const std::string& v) {
         c.cost.icache_capacity = number<double>("cost.icache_capacity", v);
       }},
      {"cost.parallel_divisor",
       [](CliConfig& c, const std::string& v) {
         c.cost.parallel_divisor = number<double>("cost.parallel_divisor", v);
       }},
      {"train.learning_rate",
       [](CliConfig& c, const std::string& v) {
         c.train.learning_rate = number<double>("train.learning_rate", v);
       }},
      {"train.batch_size",
       [](CliConfig& c, const std::string& v) { c.train.batch_size = number<int>("train.batch_size", v); }},
      {"train.patience",
       [](CliConfig& c, const std::string& v) { c.train.patience = number<int>("train.patience", v); }},
      {"train.max_epochs",
       [](CliConfig& c, const std::string& v) { c.train.max_epochs = number<int>("train.max_epochs", v); }},
      {"train.min_per_class",
       [](CliConfig& c, const std::string& v) {
         c.min_per_class = number<std::int64_t>("train.min_per_class", v);
       }},
      {"train.scaler",
       [](CliConfig& c, const std::string& v) {
         if (v == to_string(ScalerMode::Standardize)) {
           c.scaler = ScalerMode::Standardize;
         } else if (v == to_string(ScalerMode::Normalize)) {
           c.scaler = ScalerMode::Normalize;
         } else {
           throw Error(ErrorCode::InvalidConfig, "unknown scaler '" + v + "'");
         }
       }},
      {"knn.k", [](CliConfig& c, const std::string& v) { c.knn.k = number<int>("knn.k", v); }},
      {"tree.max_depth",
       [](CliConfig& c, const std::string& v) { c.tree.max_depth = number<int>("tree.max_depth", v); }},
      {"tree.min_samples_split",
       [](CliConfig& c, const std::string& v) {
         c.tree.min_samples_split = number<int>("tree.min_samples_split", v);
       }},
  };
  const auto it = setters.find(key);
  if (it == setters.end()) throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
  it->second(cfg, value);
}

namespace {

struct Flags {
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> backend;
  std::optional<int> runs;
  std::optional<std::string> classes;
  std::optional<int> count;
  std::string config;
  std::string out;
  std::string in;
  std::string model;
  std::string program;
};

// defaults < config file < environment (toolchain command) < flags
CliConfig resolve(const Flags& f) {
  CliConfig cfg;
  cfg.toolchain = ToolchainConfig{};
  if (!f.config.empty()) {
    for (const auto& [k, v] : parse_config_text(read_text_file(f.config))) {
      apply_config_entry(cfg, k, v);
    }
  }
  if (const char* cmd = std::getenv("UNROLL_TUNER_TOOLCHAIN"); cmd != nullptr && *cmd != '\0') {
    cfg.toolchain.cmd = cmd;
  }
  if (f.seed) cfg.seed = *f.seed;
  if (f.jobs) cfg.jobs = *f.jobs;
  if (f.backend) cfg.backend = *f.backend;
  if (f.runs) cfg.runs = *f.runs;
  if (f.classes) cfg.classes = parse_classes(*f.classes);
  if (f.count) cfg.count = *f.count;
  if (cfg.backend != "cost" && cfg.backend != "native") {
    throw Error(ErrorCode::InvalidConfig, "backend must be cost or native");
  }
  if (cfg.jobs < 1 || cfg.runs < 1 || cfg.count < 0) {
    throw Error(ErrorCode::InvalidConfig, "jobs and runs must be positive, count non-negative");
  }
  cfg.gen.seed = cfg.seed;
  cfg.train.seed = cfg.seed;
  check_config(cfg.gen);
  cfg.train.check();
  check_params(cfg.cost);
  return cfg;
}

std::string program_file_name(int index, int k) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "p%06d_s%02d.prog", index, k);
  return buf;
}

void cmd_gen(const CliConfig& cfg, const Flags& f, std::ostream& out) {
  const fs::path dir = f.out;
  fs::create_directories(dir);
  std::size_t files = 0;
  for (int i = 0; i < cfg.count; ++i) {
    const Program p = gen_program(cfg.gen, static_cast<std::uint64_t>(i));
    const auto schedules = gen_schedules(cfg.gen, p);
    for (std::size_t k = 0; k < schedules.size(); ++k) {
      write_text_file(dir / program_file_name(i, static_cast<int>(k)), to_text(schedules[k]));
      ++files;
    }
  }
  out << "programs=" << cfg.count << " files=" << files << " dir=" << dir.string() << "\n";
}

std::vector<fs::path> program_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".prog") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

ScheduledProgram load_scheduled(const fs::path& path) {
  try {
    const ProgramFile file = parse_program_file(read_text_file(path));
    return schedule(file.program, file.schedule);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what(), e.detail());
  }
}

void print_counts(std::ostream& out, std::span<const LabeledSample> rows) {
  out << "class_counts";
  for (const auto& [label, n] : class_counts(rows)) out << " " << label << ":" << n;
  out << "\n";
}

void cmd_label(const CliConfig& cfg, const Flags& f, std::ostream& out) {
  const auto files = program_files(f.in);
  if (files.empty()) throw Error(ErrorCode::Io, "no .prog files in " + f.in);
  std::vector<ScheduledProgram> schedules;
  schedules.reserve(files.size());
  for (const auto& path : files) schedules.push_back(load_scheduled(path));
  const auto backend = make_backend(cfg.backend, cfg.cost, cfg.toolchain);
  const auto rows = label_all(schedules, *backend, cfg.runs, cfg.jobs, cfg.classes);
  save_csv(rows, f.out);
  out << "rows=" << rows.size() << " backend=" << backend->name() << " out=" << f.out << "\n";
  print_counts(out, rows);
}

SplitDataset prepare_split(const CliConfig& cfg, const std::string& corpus, std::ostream& out) {
  const auto rows = load_csv(corpus);
  const auto balanced = balance_classes(rows, cfg.min_per_class, cfg.seed);
  const auto split = split_dataset(balanced, cfg.seed);
  out << "rows=" << rows.size() << " balanced=" << balanced.size() << " train=" << split.train.size()
      << " valid=" << split.valid.size() << " test=" << split.test.size() << "\n";
  return split;
}

Predictor mlp_predictor(const Mlp<double>& model) {
  return [&model](const FeatureVector& fv) { return model.predict_class(fv); };
}

void cmd_train(const CliConfig& cfg, const Flags& f, std::ostream& out) {
  const auto split = prepare_split(cfg, f.in, out);
  const auto result = fit_classifier<double>(split, cfg.train, cfg.scaler);
  result.model.save(f.out);
  out << "epochs=" << result.history.size() << " best_epoch=" << result.best_epoch << "\n";
  if (!split.test.empty()) {
    out << "test_accuracy=" << format_double(accuracy(mlp_predictor(result.model), split.test))
        << "\n";
  }
  out << "model=" << f.out << "\n";
}

void cmd_predict(const Flags& f, std::ostream& out) {
  const auto model = Mlp<double>::load(f.model);
  const ScheduledProgram sp = load_scheduled(f.program);
  out << "unroll_factor=" << model.predict_class(extract_features(without_unroll(sp))) << "\n";
}

void cmd_baselines(const CliConfig& cfg, const Flags& f, std::ostream& out) {
  const auto split = prepare_split(cfg, f.in, out);
  if (split.test.empty()) throw Error(ErrorCode::EmptyTestSet, "test split is empty");
  std::optional<Mlp<double>> mlp;
  if (!f.model.empty()) {
    mlp = Mlp<double>::load(f.model);
  } else {
    mlp = fit_classifier<double>(split, cfg.train, cfg.scaler).model;
  }
  std::vector<int> train_labels;
  for (const auto& r : split.train) train_labels.push_back(r.label);
  const auto scaler = Scaler<double>::fit(feature_matrix<double>(split.train), cfg.scaler);
  const Eigen::MatrixXd x_scaled = scaler.transform(feature_matrix<double>(split.train));
  const auto tree = DecisionTree<double>::fit(x_scaled, train_labels, cfg.tree);
  const Predictor knn = [&](const FeatureVector& fv) {
    return knn_predict<double>(x_scaled, train_labels, cfg.knn, scaler.transform(fv));
  };
  const Predictor cart = [&](const FeatureVector& fv) { return tree.predict(scaler.transform(fv)); };
  const std::vector<std::pair<std::string, double>> table = {
      {"mlp", accuracy(mlp_predictor(*mlp), split.test)},
      {"knn", accuracy(knn, split.test)},
      {"tree", accuracy(cart, split.test)},
  };
  const std::string text = accuracy_table(table);
  if (!f.out.empty()) write_text_file(f.out, text);
  out << text;
}

void cmd_bench(const CliConfig& cfg, const Flags& f, std::ostream& out) {
  const auto model = Mlp<double>::load(f.model);
  const auto backend = make_backend(cfg.backend, cfg.cost, cfg.toolchain);
  const auto cases = benchmark_cases();
  const auto report = run_benchmarks(mlp_predictor(model), *backend, cases, cfg.runs, cfg.jobs);
  if (!f.out.empty()) write_text_file(f.out, report_csv(report));
  out << report_table(report);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Predicts loop unrolling factors for scheduled loop nests.", "unroll-tuner"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("--seed", f.seed, "Random seed (default 1)");
  app.add_option("--jobs", f.jobs, "Worker threads for labeling and benchmarks (default 1)");
  app.add_option("--backend", f.backend, "Timing backend: cost or native (default cost)");
  app.add_option("--config", f.config, "Flat key=value config file")->check(CLI::ExistingFile);
  app.add_option("--runs", f.runs, "Timed runs per measurement (default 30)");
  app.add_option("--classes", f.classes, "Unrolling factors to label with (default 0,2,4,8,16,32,64)");

  auto* gen = app.add_subcommand("gen", "Generate random programs and schedules");
  gen->add_option("--count", f.count, "Number of programs (default 100)");
  gen->add_option("--out", f.out, "Output directory")->required();

  auto* label = app.add_subcommand("label", "Label generated programs into a CSV corpus");
  label->add_option("--in", f.in, "Directory of .prog files")->required()->check(CLI::ExistingDirectory);
  label->add_option("--out", f.out, "Corpus CSV")->required();

  auto* train = app.add_subcommand("train", "Train the MLP on a corpus");
  train->add_option("--in", f.in, "Corpus CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--out", f.out, "Model file")->required();

  auto* predict = app.add_subcommand("predict", "Predict the unrolling factor of a program file");
  predict->add_option("program", f.program, "Program file")->required()->check(CLI::ExistingFile);
  predict->add_option("--model", f.model, "Model file")->required()->check(CLI::ExistingFile);

  auto* baselines = app.add_subcommand("baselines", "Compare MLP, KNN and decision tree accuracy");
  baselines->add_option("--in", f.in, "Corpus CSV")->required()->check(CLI::ExistingFile);
  baselines->add_option("--model", f.model, "Trained MLP (trained afresh when absent)")
      ->check(CLI::ExistingFile);
  baselines->add_option("--out", f.out, "Accuracy table file");

  auto* bench = app.add_subcommand("bench", "Run the benchmark suite");
  bench->add_option("--model", f.model, "Model file")->required()->check(CLI::ExistingFile);
  bench->add_option("--out", f.out, "Report CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  CliConfig cfg;
  try {
    cfg = resolve(f);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (gen->parsed()) cmd_gen(cfg, f, out);
    if (label->parsed()) cmd_label(cfg, f, out);
    if (train->parsed()) cmd_train(cfg, f, out);
    if (predict->parsed()) cmd_predict(f, out);
    if (baselines->parsed()) cmd_baselines(cfg, f, out);
    if (bench->parsed()) cmd_bench(cfg, f, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    if (!e.detail().empty()) err << e.detail() << "\n";
    return kExitPipeline;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitPipeline;
  }
  return kExitOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("unroll-tuner");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace unroll_tuner::cli
