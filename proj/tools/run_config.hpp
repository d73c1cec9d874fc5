#pragma once

// Run configuration for the command-line tool: a flat key=value file with
// '#' comments. Later assignments win, so command-line overrides are just
// more assignments applied after the file.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dvrnn::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string train;
  std::string dev;
  std::string test;
  std::string vocab;  // existing vocabulary file; built from train when empty
  std::string output_dir = ".";

  std::uint32_t hidden = 100;
  std::uint32_t doc = 0;
  std::uint32_t classes = 100;
  std::uint32_t min_count = 30;

  double lr = 0.1;
  double doc_lr = 0.1;
  double lr_decay = 0.5;
  double decay_trigger = 0.003;
  std::uint32_t max_epochs = 10;
  std::uint64_t seed = 1;
  double init_scale = 0.1;
  std::optional<double> gradient_clip;
  bool lowercase = false;
  std::uint32_t threads = 1;
  std::optional<std::uint32_t> baseline_m;  // sweep cost reference; defaults to hidden

  bool operator==(const RunConfig&) const = default;
};

/// Parse config text. Errors name the source and line number.
RunConfig parse_config(std::string_view text, std::string_view source = "config");
RunConfig load_config(const std::string& path);

/// Set one key; throws ConfigError for unknown keys or bad values.
void set_value(RunConfig& cfg, std::string_view key, std::string_view value);
/// "key=value" form, as accepted by --set.
void apply_override(RunConfig& cfg, std::string_view assignment);

/// Every key, one per line, in a form parse_config reads back unchanged.
std::string dump_config(const RunConfig& cfg);

/// Checks that the listed paths exist and values are in range.
void validate(const RunConfig& cfg, bool need_dev, bool need_test);

}  // namespace dvrnn::cli
