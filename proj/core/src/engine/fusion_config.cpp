#include "lol/engine/fusion_config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "lol/atomic_file.hpp"
#include "lol/error.hpp"

namespace lol::engine {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(std::string_view key, std::string_view value) {
  const std::string v = trim(value);
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(d)) {
    throw ValidationError("config key '" + std::string(key) + "' expects a number, got '" + v + "'");
  }
  return d;
}

bool parse_bool(std::string_view key, std::string_view value) {
  const std::string v = trim(value);
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  throw ValidationError("config key '" + std::string(key) + "' expects a boolean, got '" + v + "'");
}

// Shortest text that parses back to the same double.
std::string format_double(double d) {
  char buf[64];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, d);
    if (std::strtod(buf, nullptr) == d) break;
  }
  return buf;
}

}  // namespace

std::string_view to_string(Preset preset) {
  switch (preset) {
    case Preset::greedy: return "greedy";
    case Preset::icd: return "icd";
    case Preset::dola_like: return "dola_like";
    case Preset::lol: return "lol";
  }
  return "lol";
}

std::string_view to_string(ScoreNormalization n) {
  return n == ScoreNormalization::total ? "total" : "per_token";
}

std::string_view to_string(ConcatOrder order) {
  return order == ConcatOrder::instruction_first ? "instruction_first" : "context_first";
}

Preset parse_preset(std::string_view text) {
  const std::string v = trim(text);
  if (v == "greedy") return Preset::greedy;
  if (v == "icd") return Preset::icd;
  if (v == "dola_like" || v == "dola") return Preset::dola_like;
  if (v == "lol") return Preset::lol;
  throw ValidationError("unknown preset '" + v + "' (expected greedy, icd, dola_like or lol)");
}

LayerIndex resolved_exit_layer(const FusionConfig& config, int n_layers) {
  if (config.exit_layer) return *config.exit_layer;
  return std::max(1, n_layers - 1);
}

void validate(const FusionConfig& c, int n_layers) {
  auto unit = [](std::string_view name, double v, bool open_low) {
    const bool ok = open_low ? (v > 0.0 && v <= 1.0) : (v >= 0.0 && v <= 1.0);
    if (!ok) {
      throw ValidationError(std::string(name) + " = " + format_double(v) + " outside " +
                            (open_low ? "(0, 1]" : "[0, 1]"));
    }
  };
  unit("omega", c.omega, true);
  unit("omega_prime", c.omega_prime, false);
  unit("lambda", c.lambda, false);
  unit("lambda_prime", c.lambda_prime, false);
  unit("lambda_dprime", c.lambda_dprime, false);
  unit("plausibility_alpha", c.plausibility_alpha, false);
  if (c.preset == Preset::lol && c.omega_prime > 0.0 && split_words(c.instruction).empty()) {
    throw ValidationError("instruction must be non-empty when omega_prime > 0");
  }
  if (c.exit_layer && *c.exit_layer < 1) {
    throw ValidationError("exit_layer must be >= 1");
  }
  if (n_layers > 0) {
    const LayerIndex l = resolved_exit_layer(c, n_layers);
    if (l < 1 || l > n_layers) {
      throw ValidationError("exit_layer " + std::to_string(l) + " outside [1, " +
                            std::to_string(n_layers) + "]");
    }
  }
}

void apply_setting(FusionConfig& c, std::string_view raw_key, std::string_view value) {
  const std::string key = trim(raw_key);
  if (key == "omega") {
    c.omega = parse_double(key, value);
  } else if (key == "omega_prime") {
    c.omega_prime = parse_double(key, value);
  } else if (key == "lambda") {
    c.lambda = parse_double(key, value);
  } else if (key == "lambda_prime") {
    c.lambda_prime = parse_double(key, value);
  } else if (key == "lambda_dprime") {
    c.lambda_dprime = parse_double(key, value);
  } else if (key == "exit_layer") {
    const std::string v = trim(value);
    if (v == "auto" || v.empty()) {
      c.exit_layer.reset();
    } else {
      int l = 0;
      auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), l);
      if (ec != std::errc() || p != v.data() + v.size()) {
        throw ValidationError("config key 'exit_layer' expects an integer or 'auto', got '" + v + "'");
      }
      c.exit_layer = l;
    }
  } else if (key == "instruction") {
    c.instruction = trim(value);
  } else if (key == "preset") {
    c.preset = parse_preset(value);
  } else if (key == "score_normalization") {
    const std::string v = trim(value);
    if (v == "total") {
      c.score_normalization = ScoreNormalization::total;
    } else if (v == "per_token") {
      c.score_normalization = ScoreNormalization::per_token;
    } else {
      throw ValidationError("score_normalization must be total or per_token, got '" + v + "'");
    }
  } else if (key == "concat_order") {
    const std::string v = trim(value);
    if (v == "instruction_first") {
      c.concat_order = ConcatOrder::instruction_first;
    } else if (v == "context_first") {
      c.concat_order = ConcatOrder::context_first;
    } else {
      throw ValidationError("concat_order must be instruction_first or context_first, got '" + v + "'");
    }
  } else if (key == "multi_layer_fusion") {
    c.multi_layer_fusion = parse_bool(key, value);
  } else if (key == "plausibility_alpha") {
    c.plausibility_alpha = parse_double(key, value);
  } else {
    throw ValidationError("unknown config key '" + key + "'");
  }
}

FusionConfig parse_fusion_config(std::string_view text) {
  FusionConfig c;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config line " + std::to_string(line_no) + " is not 'key = value'");
    }
    apply_setting(c, line.substr(0, eq), line.substr(eq + 1));
  }
  return c;
}

FusionConfig load_fusion_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ValidationError("config file not found: " + path.string());
  }
  return parse_fusion_config(read_file(path));
}

std::string to_config_text(const FusionConfig& c) {
  std::string out;
  auto line = [&](std::string_view k, const std::string& v) {
    out.append(k).append(" = ").append(v).append("\n");
  };
  line("omega", format_double(c.omega));
  line("omega_prime", format_double(c.omega_prime));
  line("lambda", format_double(c.lambda));
  line("lambda_prime", format_double(c.lambda_prime));
  line("lambda_dprime", format_double(c.lambda_dprime));
  line("exit_layer", c.exit_layer ? std::to_string(*c.exit_layer) : "auto");
  line("instruction", c.instruction);
  line("preset", std::string(to_string(c.preset)));
  line("score_normalization", std::string(to_string(c.score_normalization)));
  line("concat_order", std::string(to_string(c.concat_order)));
  line("multi_layer_fusion", c.multi_layer_fusion ? "true" : "false");
  line("plausibility_alpha", format_double(c.plausibility_alpha));
  return out;
}

}  // namespace lol::engine
