#include "astr/config.hpp"

#include <charconv>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>

#include "astr/error.hpp"
#include "astr/io.hpp"

namespace astr::harness {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParameterError("config: key '" + std::string(key) + "' has invalid value '" + std::string(text) + "'");
  }
  return value;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

using Setter = std::function<void(Config&, std::string_view key, std::string_view value)>;
using Getter = std::function<std::string(const Config&)>;

struct Field {
  Setter set;
  Getter get;
};

template <typename T>
Field number_field(T Config::*member) {
  return {[member](Config& c, std::string_view k, std::string_view v) { c.*member = parse_number<T>(k, v); },
          [member](const Config& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double(c.*member);
            else return std::to_string(c.*member);
          }};
}

template <typename T>
Field geometry_field(T asma::PolarGeometry::*member) {
  return {[member](Config& c, std::string_view k, std::string_view v) { c.geometry.*member = parse_number<T>(k, v); },
          [member](const Config& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double(c.geometry.*member);
            else return std::to_string(c.geometry.*member);
          }};
}

Field string_field(std::string Config::*member) {
  return {[member](Config& c, std::string_view, std::string_view v) { c.*member = std::string(v); },
          [member](const Config& c) { return c.*member; }};
}

// Ordered (section, key) → field; emission follows this order.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"data.width", number_field(&Config::width)},
      {"data.height", number_field(&Config::height)},
      {"geometry.origin_x", geometry_field(&asma::PolarGeometry::origin_x)},
      {"geometry.origin_y", geometry_field(&asma::PolarGeometry::origin_y)},
      {"geometry.r_min", geometry_field(&asma::PolarGeometry::r_min)},
      {"geometry.r_max", geometry_field(&asma::PolarGeometry::r_max)},
      {"geometry.theta_min", geometry_field(&asma::PolarGeometry::theta_min)},
      {"geometry.theta_max", geometry_field(&asma::PolarGeometry::theta_max)},
      {"geometry.out_rows", geometry_field(&asma::PolarGeometry::out_rows)},
      {"geometry.out_cols", geometry_field(&asma::PolarGeometry::out_cols)},
      {"model.stride", number_field(&Config::stride)},
      {"model.channels", number_field(&Config::channels)},
      {"model.layers", number_field(&Config::layers)},
      {"model.proj_dim", number_field(&Config::proj_dim)},
      {"model.frames", number_field(&Config::frames)},
      {"scb.threshold", number_field(&Config::threshold)},
      {"loss.lambda_aux", number_field(&Config::lambda_aux)},
      {"loss.aux_reduction",
       {[](Config& c, std::string_view k, std::string_view v) {
          if (v == "mean") c.aux_reduction = losses::AuxReduction::mean;
          else if (v == "sum") c.aux_reduction = losses::AuxReduction::sum;
          else throw ParameterError("config: key '" + std::string(k) + "' must be mean|sum");
        },
        [](const Config& c) { return std::string(c.aux_reduction == losses::AuxReduction::mean ? "mean" : "sum"); }}},
      {"metrics.mae_mode",
       {[](Config& c, std::string_view k, std::string_view v) {
          if (v == "continuous") c.mae_mode = metrics::MaeMode::continuous;
          else if (v == "binary") c.mae_mode = metrics::MaeMode::binary;
          else throw ParameterError("config: key '" + std::string(k) + "' must be continuous|binary");
        },
        [](const Config& c) {
          return std::string(c.mae_mode == metrics::MaeMode::continuous ? "continuous" : "binary");
        }}},
      {"metrics.threshold", number_field(&Config::bin_threshold)},
      {"run.seed", number_field(&Config::seed)},
      {"run.threads", number_field(&Config::threads)},
      {"run.input", string_field(&Config::input)},
      {"run.output", string_field(&Config::output)},
  };
  return table;
}

const Field* find_field(const std::string& name) {
  for (const auto& [key, field] : fields())
    if (key == name) return &field;
  return nullptr;
}

}  // namespace

void Config::validate() const {
  if (width == 0 || height == 0) throw ParameterError("config: data.width and data.height must be positive");
  if (geometry.canvas_width != width || geometry.canvas_height != height) {
    throw ParameterError("config: geometry canvas must match data extents");
  }
  geometry.validate();
  model_config().validate();
  if (width % stride != 0 || height % stride != 0) {
    throw ParameterError("config: model.stride must divide data.width and data.height");
  }
  if (!(lambda_aux >= 0.0)) throw ParameterError("config: loss.lambda_aux must be >= 0");
  if (!(bin_threshold >= 0.0 && bin_threshold <= 1.0)) throw ParameterError("config: metrics.threshold must lie in [0,1]");
  if (threads < 1) throw ParameterError("config: run.threads must be >= 1");
  for (const std::string* path : {&input, &output}) {
    if (path->find_first_of("#\n\r") != std::string::npos || trim(*path) != *path) {
      throw ParameterError("config: run paths may not contain '#', line breaks or surrounding blanks");
    }
  }
}

model::ModelConfig Config::model_config() const {
  model::ModelConfig m;
  m.backbone = model::BackboneConfig::for_stride(stride, channels, seed);
  m.sa_layers = layers;
  m.proj_dim = proj_dim;
  m.frames = frames;
  m.threshold = threshold;
  return m;
}

Config parse_config(std::string_view text) {
  std::string section;
  std::map<std::string, std::string> values;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParameterError("config line " + std::to_string(line_no) + ": malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParameterError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = section + "." + std::string(trim(line.substr(0, eq)));
    if (section.empty() || !find_field(key)) throw ParameterError("config: unknown key '" + key + "'");
    if (!values.emplace(key, std::string(trim(line.substr(eq + 1)))).second) {
      throw ParameterError("config: key '" + key + "' given twice");
    }
  }

  // Fields apply in table order; the geometry defaults follow the data
  // extents before any explicit geometry key overrides them.
  Config cfg;
  for (const auto& [key, field] : fields()) {
    if (key.rfind("geometry.", 0) == 0 &&
        (cfg.geometry.canvas_width != cfg.width || cfg.geometry.canvas_height != cfg.height)) {
      cfg.geometry = asma::default_geometry(cfg.width, cfg.height);
    }
    if (auto it = values.find(key); it != values.end()) field.set(cfg, key, it->second);
  }
  cfg.validate();
  return cfg;
}

std::string emit_config(const Config& cfg) {
  std::string out;
  std::string section;
  for (const auto& [key, field] : fields()) {
    const auto dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out += '\n';
      out += "[" + sec + "]\n";
      section = sec;
    }
    out += key.substr(dot + 1) + " = " + field.get(cfg) + "\n";
  }
  return out;
}

Config load_config(const std::filesystem::path& path) { return parse_config(io::read_file(path)); }

void apply_env_overrides(Config& cfg) {
  if (const char* env = std::getenv("ASTR_SEED"); env && *env) {
    cfg.seed = parse_number<std::uint64_t>("ASTR_SEED", env);
  }
}

}  // namespace astr::harness
