#include "run_config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace dvrnn::cli {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_unsigned(std::string_view key, std::string_view v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError(std::string(key) + ": expected a non-negative integer, got '" +
                      std::string(v) + "'");
  }
  return out;
}

double parse_real(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty() || !std::isfinite(out)) {
    throw ConfigError(std::string(key) + ": expected a number, got '" + std::string(v) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(std::string(key) + ": expected true or false, got '" + std::string(v) + "'");
}

std::string real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

void set_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  const std::string v(trim(value));
  if (key == "train") cfg.train = v;
  else if (key == "dev") cfg.dev = v;
  else if (key == "test") cfg.test = v;
  else if (key == "vocab") cfg.vocab = v;
  else if (key == "output_dir") cfg.output_dir = v;
  else if (key == "hidden") cfg.hidden = parse_unsigned<std::uint32_t>(key, v);
  else if (key == "doc") cfg.doc = parse_unsigned<std::uint32_t>(key, v);
  else if (key == "classes") cfg.classes = parse_unsigned<std::uint32_t>(key, v);
  else if (key == "min_count") cfg.min_count = parse_unsigned<std::uint32_t>(key, v);
  else if (key == "lr") cfg.lr = parse_real(key, v);
  else if (key == "doc_lr") cfg.doc_lr = parse_real(key, v);
  else if (key == "lr_decay") cfg.lr_decay = parse_real(key, v);
  else if (key == "decay_trigger") cfg.decay_trigger = parse_real(key, v);
  else if (key == "max_epochs") cfg.max_epochs = parse_unsigned<std::uint32_t>(key, v);
  else if (key == "seed") cfg.seed = parse_unsigned<std::uint64_t>(key, v);
  else if (key == "init_scale") cfg.init_scale = parse_real(key, v);
  else if (key == "gradient_clip") {
    if (v == "none" || v.empty()) cfg.gradient_clip.reset();
    else cfg.gradient_clip = parse_real(key, v);
  } else if (key == "lowercase") cfg.lowercase = parse_bool(key, v);
  else if (key == "threads") cfg.threads = parse_unsigned<std::uint32_t>(key, v);
  else if (key == "baseline_m") {
    if (v == "none" || v.empty()) cfg.baseline_m.reset();
    else cfg.baseline_m = parse_unsigned<std::uint32_t>(key, v);
  } else {
    throw ConfigError("unknown key '" + std::string(key) + "'");
  }
}

void apply_override(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
  }
  set_value(cfg, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

RunConfig parse_config(std::string_view text, std::string_view source) {
  RunConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      apply_override(cfg, line);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(source) + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string dump_config(const RunConfig& cfg) {
  std::ostringstream out;
  out << "train=" << cfg.train << '\n'
      << "dev=" << cfg.dev << '\n'
      << "test=" << cfg.test << '\n'
      << "vocab=" << cfg.vocab << '\n'
      << "output_dir=" << cfg.output_dir << '\n'
      << "hidden=" << cfg.hidden << '\n'
      << "doc=" << cfg.doc << '\n'
      << "classes=" << cfg.classes << '\n'
      << "min_count=" << cfg.min_count << '\n'
      << "lr=" << real(cfg.lr) << '\n'
      << "doc_lr=" << real(cfg.doc_lr) << '\n'
      << "lr_decay=" << real(cfg.lr_decay) << '\n'
      << "decay_trigger=" << real(cfg.decay_trigger) << '\n'
      << "max_epochs=" << cfg.max_epochs << '\n'
      << "seed=" << cfg.seed << '\n'
      << "init_scale=" << real(cfg.init_scale) << '\n'
      << "gradient_clip=" << (cfg.gradient_clip ? real(*cfg.gradient_clip) : "none") << '\n'
      << "lowercase=" << (cfg.lowercase ? "true" : "false") << '\n'
      << "threads=" << cfg.threads << '\n'
      << "baseline_m=" << (cfg.baseline_m ? std::to_string(*cfg.baseline_m) : "none") << '\n';
  return out.str();
}

void validate(const RunConfig& cfg, bool need_dev, bool need_test) {
  namespace fs = std::filesystem;
  const auto require = [](const std::string& key, const std::string& path) {
    if (path.empty()) throw ConfigError(key + " is not set");
    if (!fs::exists(path)) throw ConfigError(key + ": no such file '" + path + "'");
  };
  require("train", cfg.train);
  if (need_dev) require("dev", cfg.dev);
  if (need_test) require("test", cfg.test);
  if (!cfg.vocab.empty() && !fs::exists(cfg.vocab)) {
    throw ConfigError("vocab: no such file '" + cfg.vocab + "'");
  }
  if (cfg.hidden == 0) throw ConfigError("hidden must be at least 1");
  if (cfg.classes == 0) throw ConfigError("classes must be at least 1");
  if (cfg.threads == 0) throw ConfigError("threads must be at least 1");
  if (!(cfg.lr >= 0.0)) throw ConfigError("lr must be >= 0");
  if (!(cfg.doc_lr >= 0.0)) throw ConfigError("doc_lr must be >= 0");
  if (!(cfg.lr_decay > 0.0 && cfg.lr_decay <= 1.0)) throw ConfigError("lr_decay must be in (0, 1]");
  if (!(cfg.init_scale >= 0.0)) throw ConfigError("init_scale must be >= 0");
  if (cfg.gradient_clip && !(*cfg.gradient_clip > 0.0)) throw ConfigError("gradient_clip must be > 0");
}

}  // namespace dvrnn::cli
