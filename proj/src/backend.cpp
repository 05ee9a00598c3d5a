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

#include "unroll_tuner/backend.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>

#include "text_util.hpp"
#include "unroll_tuner/error.hpp"

namespace unroll_tuner {

ExecResult make_exec_result(std::vector<double> per_run_ms) {
  if (per_run_ms.empty()) throw Error(ErrorCode::NonPositiveTime, "no timed runs");
  for (double t : per_run_ms) {
    if (!(t > 0.0)) throw Error(ErrorCode::NonPositiveTime, "run time " + format_double(t));
  }
  ExecResult r;
  r.runs = static_cast<int>(per_run_ms.size());
  r.mean_ms = std::accumulate(per_run_ms.begin(), per_run_ms.end(), 0.0) / r.runs;
  r.per_run_ms = std::move(per_run_ms);
  return r;
}

// ---------------------------------------------------------------------------
// Cost model

void check_params(const CostModelParams& params) {
  const std::pair<const char*, double> fields[] = {
      {"c_body", params.c_body},
      {"c_loop", params.c_loop},
      {"c_icache", params.c_icache},
      {"icache_capacity", params.icache_capacity},
      {"parallel_divisor", params.parallel_divisor},
  };
  for (const auto& [name, value] : fields) {
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw Error(ErrorCode::InvalidConfig,
                  std::string("cost model parameter ") + name + " must be positive");
    }
  }
}

std::int64_t body_op_count(const Program& p) {
  const OpHistogram h = op_histogram(p);
  return h.sum() - op_count(h, OpKind::Store);
}

double cost_model_ns(const ScheduledProgram& sp, std::int64_t u, const CostModelParams& params) {
  const double trips = static_cast<double>(sp.trip_count());
  const double ops = static_cast<double>(body_op_count(sp.base()));
  std::int64_t applied = u;
  if (sp.depth() > 0) applied = clamp_unroll_factor(u, sp.current_iterators().back().extent());
  const double uu = static_cast<double>(std::max<std::int64_t>(applied, 1));
  double cost = trips * ops * params.c_body + trips / uu * params.c_loop +
                trips * params.c_icache * std::max(0.0, uu * ops - params.icache_capacity);
  if (sp.parallel_level()) cost /= params.parallel_divisor;
  return cost;
}

ExecResult cost_model_evaluate(const ScheduledProgram& sp, std::int64_t u,
                               const CostModelParams& params) {
  if (!is_unroll_factor(u)) {
    throw Error(ErrorCode::InvalidFactor, "unroll factor " + std::to_string(u) + " not in class set");
  }
  check_params(params);
  const auto ops = body_op_count(sp.base());
  if (static_cast<double>(ops) > params.icache_capacity) {
    throw Error(ErrorCode::InvalidConfig, "body has " + std::to_string(ops) +
                                              " ops, above icache_capacity");
  }
  return make_exec_result({cost_model_ns(sp, u, params) * 1e-6});
}

// ---------------------------------------------------------------------------
// Kernel emission

namespace {

std::string_view c_type(DataType dtype) {
  switch (dtype) {
    case DataType::Int32: return "int32_t";
    case DataType::Int64: return "int64_t";
    case DataType::Float32: return "float";
    case DataType::Float64: return "double";
  }
  return "double";
}

class KernelWriter {
 public:
  explicit KernelWriter(const ScheduledProgram& sp)
      : sp_(sp), p_(sp.base()), shapes_(buffer_shapes(sp.base())) {}

  std::string write() {
    header();
    buffers();
    kernel();
    harness();
    return out_.str();
  }

 private:
  bool integral() const { return is_integral(p_.dtype()); }

  void header() {
    out_ << "/* kernel " << p_.name << " */\n"
         << "#define _POSIX_C_SOURCE 199309L\n"
         << "#include <stdint.h>\n#include <stdio.h>\n#include <stdlib.h>\n#include <time.h>\n\n"
         << "typedef " << c_type(p_.dtype()) << " elem_t;\n";
    if (integral()) {
      const bool narrow = p_.dtype() == DataType::Int32;
      out_ << "typedef " << (narrow ? "uint32_t" : "uint64_t") << " uelem_t;\n"
           << "#define ELEM_MIN " << (narrow ? "INT32_MIN" : "INT64_MIN") << "\n"
           << "static inline elem_t op_add(elem_t a, elem_t b) { return (elem_t)((uelem_t)a + "
              "(uelem_t)b); }\n"
           << "static inline elem_t op_sub(elem_t a, elem_t b) { return (elem_t)((uelem_t)a - "
              "(uelem_t)b); }\n"
           << "static inline elem_t op_mul(elem_t a, elem_t b) { return (elem_t)((uelem_t)a * "
              "(uelem_t)b); }\n"
           << "static inline elem_t op_div(elem_t a, elem_t b) {\n"
           << "  if (b == 0) return 0;\n"
           << "  if (a == ELEM_MIN && b == -1) return a;\n"
           << "  return a / b;\n}\n";
    }
    out_ << "\n";
  }

  std::int64_t buffer_size(const std::string& name) const {
    std::int64_t n = 1;
    for (auto e : shapes_.at(name)) n *= e;
    return n;
  }

  void buffers() {
    for (const auto& [name, shape] : shapes_) {
      out_ << "static elem_t* b_" << name << ";  /* " << buffer_size(name) << " elements */\n";
    }
    out_ << "\nstatic int alloc_buffers(void) {\n";
    for (const auto& [name, shape] : shapes_) {
      out_ << "  b_" << name << " = (elem_t*)calloc(" << buffer_size(name)
           << ", sizeof(elem_t));\n"
           << "  if (!b_" << name << ") return 0;\n";
    }
    out_ << "  return 1;\n}\n\nstatic void init_buffers(void) {\n";
    for (const auto& [name, shape] : shapes_) {
      int ordinal = -1;
      for (std::size_t k = 0; k < p_.inputs.size(); ++k) {
        if (p_.inputs[k].name == name) ordinal = static_cast<int>(k);
      }
      out_ << "  for (int64_t f = 0; f < " << buffer_size(name) << "; ++f) b_" << name << "[f] = ";
      if (ordinal < 0) {
        out_ << "0;\n";
      } else if (integral()) {
        out_ << "(elem_t)(((f * 7 + " << ordinal * 3 + 1 << ") % 11) - 5);\n";
      } else {
        out_ << "(elem_t)((double)(((f * 7 + " << ordinal * 3 + 1 << ") % 11) - 5) / 4.0);\n";
      }
    }
    out_ << "}\n\n";
  }

  std::string flat_index(const BufferAccess& a) const {
    const auto& shape = shapes_.at(a.buffer);
    std::map<std::string, std::int64_t> coeff;
    std::int64_t constant = 0;
    std::int64_t stride = 1;
    for (std::size_t d = a.indices.size(); d-- > 0;) {
      constant += stride * a.indices[d].offset;
      for (const auto& name : a.indices[d].iterators) coeff[name] += stride;
      stride *= shape[d];
    }
    std::string text;
    for (const Iterator& it : p_.iterators) {
      const auto found = coeff.find(it.name);
      if (found == coeff.end() || found->second == 0) continue;
      if (!text.empty()) text += " + ";
      if (found->second != 1) text += std::to_string(found->second) + " * ";
      text += "i_" + it.name;
    }
    if (constant != 0 || text.empty()) {
      if (!text.empty()) text += " + ";
      text += std::to_string(constant);
    }
    return "b_" + a.buffer + "[" + text + "]";
  }

  std::string expr(const Expr& e) const {
    if (const auto* c = e.as_constant()) return "((elem_t)" + format_double(c->value) + ")";
    if (const auto* a = e.as_access()) return flat_index(*a);
    const BinOp& b = *e.as_binop();
    const std::string l = expr(*b.left);
    const std::string r = expr(*b.right);
    if (integral()) {
      static const char* names[] = {"op_add", "op_sub", "op_mul", "op_div"};
      return std::string(names[static_cast<int>(b.kind)]) + "(" + l + ", " + r + ")";
    }
    static const char* symbols[] = {" + ", " - ", " * ", " / "};
    return "(" + l + symbols[static_cast<int>(b.kind)] + r + ")";
  }

  std::string loop_var(int level) const {
    return "c_" + sp_.current_iterators()[static_cast<std::size_t>(level)].name;
  }

  // One copy of the body with the innermost loop value given by `inner`.
  void body(const std::string& indent, const std::string& inner) {
    const auto& map = sp_.index_map();
    const auto& offset = sp_.index_offset();
    out_ << indent << "{\n";
    std::vector<std::string> guards;
    for (int k = 0; k < p_.depth(); ++k) {
      std::string value;
      for (int j = 0; j < sp_.depth(); ++j) {
        const std::int64_t m = map(k, j);
        if (m == 0) continue;
        if (!value.empty()) value += " + ";
        if (m != 1) value += std::to_string(m) + " * ";
        value += j == sp_.depth() - 1 ? inner : loop_var(j);
      }
      if (offset(k) != 0 || value.empty()) {
        if (!value.empty()) value += " + ";
        value += std::to_string(offset(k));
      }
      const std::string& name = p_.iterators[static_cast<std::size_t>(k)].name;
      out_ << indent << "  const int64_t i_" << name << " = " << value << ";\n";
      if (sp_.needs_guard(k)) {
        guards.push_back("i_" + name + " < " + std::to_string(p_.iterators[k].upper));
      }
    }
    out_ << indent << "  ";
    if (!guards.empty()) {
      out_ << "if (";
      for (std::size_t g = 0; g < guards.size(); ++g) out_ << (g ? " && " : "") << guards[g];
      out_ << ") ";
    }
    out_ << flat_index(p_.output) << " = " << body_text_ << ";\n" << indent << "}\n";
  }

  void loops(int level, const std::string& indent) {
    if (level == sp_.depth()) {
      body(indent, sp_.depth() > 0 ? loop_var(level - 1) : std::string());
      return;
    }
    const Iterator& loop = sp_.current_iterators()[static_cast<std::size_t>(level)];
    const std::string var = loop_var(level);
    const bool parallel = sp_.loop_origins()[static_cast<std::size_t>(level)].parallel;
    const bool innermost = level == sp_.depth() - 1;
    const std::int64_t u = sp_.effective_unroll();
    if (parallel) out_ << indent << "#pragma omp parallel for\n";
    if (!innermost || u <= 1) {
      out_ << indent << "for (int64_t " << var << " = " << loop.lower << "; " << var << " < "
           << loop.upper << "; ++" << var << ") {\n";
      loops(level + 1, indent + "  ");
      out_ << indent << "}\n";
      return;
    }
    const std::int64_t split = loop.lower + sp_.main_trips() * u;
    out_ << indent << "for (int64_t " << var << " = " << loop.lower << "; " << var << " < " << split
         << "; " << var << " += " << u << ") {\n";
    for (std::int64_t r = 0; r < u; ++r) {
      body(indent + "  ", r == 0 ? var : "(" + var + " + " + std::to_string(r) + ")");
    }
    out_ << indent << "}\n";
    out_ << indent << "for (int64_t " << var << " = " << split << "; " << var << " < "
         << loop.upper << "; ++" << var << ") {\n";
    body(indent + "  ", var);
    out_ << indent << "}\n";
  }

  void kernel() {
    body_text_ = expr(p_.body);
    out_ << "static void kernel(void) {\n  /* nest begin */\n";
    loops(0, "  ");
    out_ << "  /* nest end */\n}\n\n";
  }

  void harness() {
    const std::string& outbuf = p_.output.buffer;
    out_ << "static double now_ms(void) {\n"
         << "  struct timespec ts;\n"
         << "  clock_gettime(CLOCK_MONOTONIC, &ts);\n"
         << "  return (double)ts.tv_sec * 1e3 + (double)ts.tv_nsec * 1e-6;\n}\n\n"
         << "int main(int argc, char** argv) {\n"
         << "  int runs = argc > 1 ? atoi(argv[1]) : 30;\n"
         << "  if (runs < 1) runs = 1;\n"
         << "  if (!alloc_buffers()) {\n"
         << "    fprintf(stderr, \"allocation failed\\n\");\n"
         << "    return 3;\n  }\n"
         << "  init_buffers();\n"
         << "#ifdef UNROLL_TUNER_CHECKSUM\n"
         << "  kernel();\n"
         << "  uint64_t h = 0xcbf29ce484222325ULL;\n"
         << "  const unsigned char* bytes = (const unsigned char*)b_" << outbuf << ";\n"
         << "  for (size_t k = 0; k < (size_t)" << buffer_size(outbuf) << " * sizeof(elem_t); ++k) {\n"
         << "    h ^= bytes[k];\n"
         << "    h *= 0x100000001b3ULL;\n  }\n"
         << "#endif\n"
         << "  kernel();  /* warm-up */\n"
         << "  double total = 0.0;\n"
         << "  for (int r = 0; r < runs; ++r) {\n"
         << "    const double t0 = now_ms();\n"
         << "    kernel();\n"
         << "    total += now_ms() - t0;\n  }\n"
         << "  double mean = total / runs;\n"
         << "  if (mean <= 0.0) mean = 1e-9;\n"
         << "  printf(\"mean_ms=%.17g\\n\", mean);\n"
         << "#ifdef UNROLL_TUNER_CHECKSUM\n"
         << "  printf(\"checksum=%016llx\\n\", (unsigned long long)h);\n"
         << "#endif\n"
         << "  return 0;\n}\n";
  }

  const ScheduledProgram& sp_;
  const Program& p_;
  std::map<std::string, std::vector<std::int64_t>> shapes_;
  std::string body_text_;
  std::ostringstream out_;
};

}  // namespace

std::string emit_kernel_source(const ScheduledProgram& sp) {
  if (sp.depth() > kMaxDepth) {
    throw Error(ErrorCode::DepthExceedsMax,
                "depth " + std::to_string(sp.depth()) + " exceeds " + std::to_string(kMaxDepth));
  }
  return KernelWriter(sp).write();
}

// ---------------------------------------------------------------------------
// Native execution

ToolchainConfig ToolchainConfig::from_environment() {
  ToolchainConfig config;
  if (const char* cmd = std::getenv("UNROLL_TUNER_TOOLCHAIN"); cmd != nullptr && *cmd != '\0') {
    config.cmd = cmd;
  }
  return config;
}

namespace {

std::mutex& execution_mutex() {
  static std::mutex m;
  return m;
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

struct CommandResult {
  int status = -1;  // exit code, or -1 when killed by a signal
  std::string output;
};

CommandResult run_command(const std::string& command) {
  CommandResult result;
  FILE* pipe = ::popen(command.c_str(), "r");
  if (pipe == nullptr) throw Error(ErrorCode::RunFailed, "cannot start: " + command);
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) result.output.append(buf, n);
  const int status = ::pclose(pipe);
  if (status != -1 && WIFEXITED(status)) result.status = WEXITSTATUS(status);
  return result;
}

// Scratch directory removed on scope exit.
class ScratchDir {
 public:
  ScratchDir() {
    static std::atomic<unsigned> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("unroll_tuner-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

double parse_mean(const std::string& output) {
  for (auto line : detail::split(output, '\n')) {
    line = detail::trim(line);
    if (line.starts_with("mean_ms=")) {
      if (auto v = detail::parse_double(line.substr(8))) return *v;
    }
  }
  throw Error(ErrorCode::RunFailed, "kernel printed no mean_ms line", output);
}

}  // namespace

std::uint64_t parse_checksum(std::string_view kernel_output) {
  for (auto line : detail::split(kernel_output, '\n')) {
    line = detail::trim(line);
    if (!line.starts_with("checksum=")) continue;
    line.remove_prefix(9);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v, 16);
    if (ec == std::errc() && ptr == line.data() + line.size()) return v;
  }
  throw Error(ErrorCode::RunFailed, "kernel printed no checksum line", std::string(kernel_output));
}

NativeRun native_run(std::string_view source, int runs, const ToolchainConfig& toolchain) {
  if (runs < 1) throw Error(ErrorCode::InvalidConfig, "runs must be at least 1");
  if (run_command("command -v " + shell_quote(toolchain.cmd) + " >/dev/null 2>&1").status != 0) {
    throw Error(ErrorCode::ToolchainMissing, "toolchain command not found: " + toolchain.cmd);
  }
  ScratchDir dir;
  const auto src = dir.path() / "kernel.c";
  const auto bin = dir.path() / "kernel";
  {
    std::ofstream f(src);
    f << source;
    if (!f) throw Error(ErrorCode::Io, "cannot write " + src.string());
  }
  std::string compile = toolchain.cmd + " " + toolchain.flags;
  if (toolchain.checksum) compile += " -DUNROLL_TUNER_CHECKSUM";
  compile += " -o " + shell_quote(bin.string()) + " " + shell_quote(src.string()) + " 2>&1";

  CommandResult built = run_command(compile);
  if (built.status != 0) built = run_command(compile);
  if (built.status == 127) {
    throw Error(ErrorCode::ToolchainMissing, "toolchain failed to start", built.output);
  }
  if (built.status != 0) throw Error(ErrorCode::CompileError, "kernel failed to compile", built.output);

  const std::string run = "timeout " + std::to_string(toolchain.timeout.count()) + " " +
                          shell_quote(bin.string()) + " 1 2>&1";
  std::vector<double> times;
  std::string last;
  std::lock_guard<std::mutex> lock(execution_mutex());
  for (int r = 0; r < runs; ++r) {
    CommandResult res = run_command(run);
    if (res.status == 124) {
      throw Error(ErrorCode::RunTimeout,
                  "kernel exceeded " + std::to_string(toolchain.timeout.count()) + " s");
    }
    if (res.status != 0) {
      throw Error(ErrorCode::RunFailed, "kernel exited with status " + std::to_string(res.status),
                  res.output);
    }
    times.push_back(parse_mean(res.output));
    last = std::move(res.output);
  }
  return NativeRun{make_exec_result(std::move(times)), std::move(last)};
}

ExecResult native_measure(std::string_view source, int runs, const ToolchainConfig& toolchain) {
  return native_run(source, runs, toolchain).timing;
}

// ---------------------------------------------------------------------------
// Backends

CostModelBackend::CostModelBackend(CostModelParams params) : params_(params) {
  check_params(params_);
}

ExecResult CostModelBackend::evaluate(const ScheduledProgram& sp, std::int64_t u, int) const {
  return cost_model_evaluate(sp, u, params_);
}

NativeBackend::NativeBackend(ToolchainConfig toolchain) : toolchain_(std::move(toolchain)) {}

ExecResult NativeBackend::evaluate(const ScheduledProgram& sp, std::int64_t u, int runs) const {
  if (!is_unroll_factor(u)) {
    throw Error(ErrorCode::InvalidFactor, "unroll factor " + std::to_string(u) + " not in class set");
  }
  ScheduledProgram unrolled = without_unroll(sp);
  if (u != 0 && unrolled.depth() > 0) {
    unrolled = apply_unroll(unrolled,
                            clamp_unroll_factor(u, unrolled.current_iterators().back().extent()));
  }
  return native_measure(emit_kernel_source(unrolled), runs, toolchain_);
}

std::unique_ptr<Backend> make_backend(std::string_view name, const CostModelParams& params,
                                      const ToolchainConfig& toolchain) {
  if (name == "cost") return std::make_unique<CostModelBackend>(params);
  if (name == "native") return std::make_unique<NativeBackend>(toolchain);
  throw Error(ErrorCode::InvalidConfig, "unknown backend '" + std::string(name) + "'");
}

}  // namespace unroll_tuner
