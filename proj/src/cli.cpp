#include "astr/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "astr/asma.hpp"
#include "astr/bench.hpp"
#include "astr/config.hpp"
#include "astr/error.hpp"
#include "astr/io.hpp"
#include "astr/losses.hpp"
#include "astr/metrics.hpp"
#include "astr/model.hpp"
#include "astr/model_io.hpp"
#include "astr/random.hpp"
#include "astr/synthetic.hpp"

namespace astr::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

Config resolve_config(const CommonOptions& common) {
  Config cfg = common.config_path.empty() ? Config{} : load_config(common.config_path);
  apply_env_overrides(cfg);
  if (common.seed) cfg.seed = *common.seed;
  if (common.threads) cfg.threads = *common.threads;
  cfg.validate();
  return cfg;
}

// Without a config the image extents define both the canvas and the (r, θ) grid.
asma::PolarGeometry geometry_for(const Config& cfg, bool from_config, const Image& img) {
  return from_config ? cfg.geometry : asma::default_geometry(img.width, img.height);
}

// Scales the default 64×64 lesion trajectory to other frame sizes.
SyntheticSpec scaled_spec(SyntheticSpec spec) {
  const SyntheticSpec base;
  const double sx = static_cast<double>(spec.width) / static_cast<double>(base.width);
  const double sy = static_cast<double>(spec.height) / static_cast<double>(base.height);
  spec.center_x = base.center_x * sx;
  spec.center_y = base.center_y * sy;
  spec.drift_x = base.drift_x * sx;
  spec.drift_y = base.drift_y * sy;
  spec.axis_a = base.axis_a * sx;
  spec.axis_b = base.axis_b * sy;
  spec.axis_drift = base.axis_drift * std::min(sx, sy);
  return spec;
}

Tensor gt_tensor(const Image& mask) {
  Tensor t({mask.height, mask.width});
  for (std::size_t i = 0; i < mask.pixels.size(); ++i) t[i] = mask.pixels[i] > 127 ? 1.0 : 0.0;
  return t;
}

std::vector<std::pair<std::string, std::string>> read_manifest(const fs::path& path) {
  std::vector<std::pair<std::string, std::string>> rows;
  std::istringstream in(io::read_file(path));
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw ParameterError("manifest line " + std::to_string(line_no) + ": expected 'pred_path,gt_path'");
    }
    auto strip = [](std::string s) {
      const auto a = s.find_first_not_of(" \t"), b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    fs::path pred = strip(line.substr(0, comma)), gt = strip(line.substr(comma + 1));
    if (pred.is_relative()) pred = path.parent_path() / pred;
    if (gt.is_relative()) gt = path.parent_path() / gt;
    rows.emplace_back(pred.string(), gt.string());
  }
  if (rows.empty()) throw ParameterError("manifest " + path.string() + " lists no frames");
  return rows;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

int cmd_asma_convert(const CommonOptions& common, const std::string& input, const std::string& output,
                     const std::string& to, std::ostream&) {
  const Config cfg = resolve_config(common);
  const ScanMode target = parse_scan_mode(to);
  const ScanMode source = target == ScanMode::linear ? ScanMode::convex : ScanMode::linear;
  const Image img = io::read_png(input, source);
  const auto geom = geometry_for(cfg, !common.config_path.empty(), img);
  const Image converted = target == ScanMode::linear ? asma::convex_to_linear(img, geom) : asma::linear_to_convex(img, geom);
  io::write_png(output, converted);
  return kOk;
}

int cmd_asma_roundtrip(const CommonOptions& common, const std::string& input, const std::string& mode,
                       double oversample, std::ostream& out) {
  const Config cfg = resolve_config(common);
  const ScanMode source = parse_scan_mode(mode);
  const Image img = io::read_png(input, source);
  auto geom = geometry_for(cfg, !common.config_path.empty(), img);
  if (oversample > 0.0) {
    if (source == ScanMode::linear) throw ParameterError("--oversample applies to convex inputs only");
    geom = asma::oversampled(geom, oversample);
  }
  const double mae = asma::roundtrip_error(img, geom);
  out << json{{"mode", std::string(to_string(source))}, {"mae", mae}, {"mae_gray_levels", mae * 255.0},
              {"out_rows", geom.out_rows}, {"out_cols", geom.out_cols}}.dump()
      << '\n';
  return kOk;
}

int cmd_gen_synthetic(const CommonOptions& common, SyntheticSpec spec, const std::string& out_dir,
                      std::ostream& out) {
  const Config cfg = resolve_config(common);
  const SyntheticVideo video = gen_synthetic(scaled_spec(spec), cfg.seed);
  const fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string());
  std::string manifest = "# frame_path,mask_path\n";
  for (std::size_t i = 0; i < video.frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%03zu.png", i);
    io::write_png(dir / ("frame_" + std::string(name)), video.frames[i]);
    io::write_png(dir / ("mask_" + std::string(name)), video.masks[i]);
    manifest += "frame_" + std::string(name) + ",mask_" + std::string(name) + "\n";
  }
  io::write_file_atomic(dir / "manifest.csv", manifest);
  out << json{{"frames", video.frames.size()}, {"dir", dir.string()}, {"seed", cfg.seed}}.dump() << '\n';
  return kOk;
}

int cmd_forward(const CommonOptions& common, const std::vector<std::string>& frame_paths,
                std::optional<std::size_t> index, const std::string& output, const std::string& record,
                const std::string& weights_path, const std::string& save_weights, std::ostream& out) {
  const Config cfg = resolve_config(common);
  if (frame_paths.empty()) throw ParameterError("forward: no frames given");
  std::vector<Image> video;
  for (const auto& p : frame_paths) video.push_back(io::read_png(p));
  const std::size_t t = index.value_or(video.size() - 1);
  const model::ModelConfig mcfg = cfg.model_config();
  const model::ModelWeights weights =
      weights_path.empty() ? model::ModelWeights::init(mcfg) : model::load_model(weights_path, mcfg);
  if (!save_weights.empty()) model::save_model(save_weights, weights);

  const model::VideoClip clip = model::clip_sample(video, t, mcfg.frames);
  model::ForwardOptions options;
  options.threads = cfg.threads;
  const auto start = std::chrono::steady_clock::now();
  const model::SegmentationOutput result = model::astr_forward(clip, weights, options);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  io::write_png(output, from_unit_tensor(result.prob_mask, clip.frames[0].mode));
  const json line{{"t", t},
                  {"frame_times", clip.frame_times},
                  {"token_counts", result.token_counts},
                  {"feature_grid", {result.feature_height, result.feature_width}},
                  {"output", output},
                  {"ms", ms}};
  if (record.empty()) {
    out << line.dump() << '\n';
  } else {
    std::string existing;
    if (fs::exists(record)) existing = io::read_file(record);
    io::write_file_atomic(record, existing + line.dump() + "\n");
  }
  return kOk;
}

int cmd_bench_fusion(const CommonOptions& common, std::size_t h, std::size_t w, std::size_t c, std::size_t t,
                     std::size_t m, std::size_t reps, const std::string& output, std::ostream& out) {
  const Config cfg = resolve_config(common);
  const FusionBenchRow row = bench_fusion(h, w, c, t, m, reps, cfg.seed);
  const std::string csv = fusion_csv_header() + "\n" + fusion_csv_row(row) + "\n";
  if (output.empty()) out << csv;
  else io::write_file_atomic(output, csv);
  return kOk;
}

int cmd_eval_metrics(const CommonOptions& common, const std::string& manifest, const std::string& output,
                     const std::string& mae_mode, std::ostream& out) {
  Config cfg = resolve_config(common);
  if (!mae_mode.empty()) {
    if (mae_mode == "continuous") cfg.mae_mode = metrics::MaeMode::continuous;
    else if (mae_mode == "binary") cfg.mae_mode = metrics::MaeMode::binary;
    else throw ParameterError("--mae-mode must be continuous|binary");
  }
  const auto rows = read_manifest(manifest);
  std::vector<metrics::MetricReport> reports;
  std::string csv = "frame_id,mae,iou,dice,sen,spe\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Tensor pred = to_unit_tensor(io::read_png(rows[i].first));
    const Tensor gt = gt_tensor(io::read_png(rows[i].second));
    reports.push_back(metrics::frame_metrics(pred, gt, cfg.mae_mode, cfg.bin_threshold));
    const auto& r = reports.back();
    csv += std::to_string(i) + "," + fmt(r.mae) + "," + fmt(r.iou) + "," + fmt(r.dice) + "," + fmt(r.sen) + "," +
           fmt(r.spe) + "\n";
  }
  const auto s = metrics::dataset_metrics(reports);
  csv += "mean," + fmt(s.mae) + "," + fmt(s.iou) + "," + fmt(s.dice) + "," + fmt(s.sen) + "," + fmt(s.spe) + "\n";
  if (output.empty()) out << csv;
  else io::write_file_atomic(output, csv);
  return kOk;
}

int cmd_loss_check(const CommonOptions& common, std::size_t size, std::ostream& out) {
  const Config cfg = resolve_config(common);
  if (size < 4 || size % 4 != 0) throw ParameterError("--size must be a positive multiple of 4");
  Rng rng(cfg.seed);
  Tensor pred({size, size}), gt({size, size});
  for (auto& v : pred.data()) v = rng.uniform(0.05, 0.95);
  for (auto& v : gt.data()) v = rng.uniform() < 0.35 ? 1.0 : 0.0;

  std::vector<Tensor> coarse, coarse_gt;
  for (std::size_t k : {2, 4}) {
    Tensor m({size / k, size / k});
    for (auto& v : m.data()) v = rng.uniform(0.05, 0.95);
    coarse.push_back(std::move(m));
    coarse_gt.push_back(losses::downsample_mask(gt, size / k, size / k));
  }
  const auto report = losses::total_loss(pred, gt, coarse, coarse_gt, cfg.lambda_aux, cfg.aux_reduction);

  const Tensor grad = losses::loss_gradient(pred, gt);
  constexpr double step = 1e-6;
  double worst = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    Tensor up = pred, down = pred;
    up[i] += step;
    down[i] -= step;
    const double fd = (losses::combined_loss(up, gt) - losses::combined_loss(down, gt)) / (2.0 * step);
    const double scale = std::max({std::abs(fd), std::abs(grad[i]), 1e-300});
    worst = std::max(worst, std::abs(fd - grad[i]) / scale);
  }
  out << json{{"bce", report.bce},     {"dice", report.dice},   {"mae", report.mae},
              {"seg", report.seg},     {"aux", report.aux},     {"total", report.total},
              {"lambda_aux", report.lambda_aux}, {"max_grad_rel_error", worst}}
             .dump()
      << '\n';
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"astr: scan-mode augmentation, sparse-context fusion, losses and metrics"};
  app.name("astr");
  app.require_subcommand(1);
  app.fallthrough();

  CommonOptions common;
  app.add_option("--config", common.config_path, "Config file (INI-style)");
  app.add_option("--seed", common.seed, "Seed; overrides ASTR_SEED and the config");
  app.add_option("--threads", common.threads, "Worker threads (1 = bitwise deterministic)");

  std::string input, output, to = "linear", mode = "convex", record, weights_path, save_weights, manifest, mae_mode;
  double oversample = 0.0;

  auto* convert = app.add_subcommand("asma-convert", "Convert between convex and linear scan modes");
  convert->add_option("--input", input, "Input PNG")->required();
  convert->add_option("--output", output, "Output PNG")->required();
  convert->add_option("--to", to, "Target mode: linear|convex");

  auto* roundtrip = app.add_subcommand("asma-roundtrip", "Report two-way conversion error");
  roundtrip->add_option("--input", input, "Input PNG")->required();
  roundtrip->add_option("--mode", mode, "Input mode: linear|convex");
  roundtrip->add_option("--oversample", oversample, "Oversample the (r, theta) grid by this factor");

  SyntheticSpec spec;
  std::string spec_mode = "linear";
  auto* gen = app.add_subcommand("gen-synthetic", "Write a synthetic lesion video as PNG frames");
  gen->add_option("--out-dir", output, "Output directory")->required();
  gen->add_option("--frames", spec.frames, "Frame count");
  gen->add_option("--width", spec.width, "Frame width");
  gen->add_option("--height", spec.height, "Frame height");
  gen->add_option("--speckle", spec.speckle, "Speckle strength in [0,1]");
  gen->add_option("--mode", spec_mode, "Mode tag: linear|convex");

  std::vector<std::string> frames;
  std::optional<std::size_t> index;
  auto* forward = app.add_subcommand("forward", "Segment the target frame of a clip");
  forward->add_option("--frames", frames, "Frame PNGs in temporal order")->required();
  forward->add_option("--index", index, "Target frame index (default: last)");
  forward->add_option("--output", output, "Probability mask PNG")->required();
  forward->add_option("--record", record, "Append a JSON-lines record here (default: stdout)");
  forward->add_option("--weights", weights_path, "Weight file (default: seeded init)");
  forward->add_option("--save-weights", save_weights, "Write the weights used to this file");

  std::size_t h = 16, w = 16, c = 32, t = 3, m = 50, reps = 100;
  auto* bench = app.add_subcommand("bench-fusion", "Dense vs sparse fusion cost and timing as CSV");
  bench->set_help_flag("--help", "Print this help message and exit");
  bench->add_option("--h", h);
  bench->add_option("--w", w);
  bench->add_option("--c", c);
  bench->add_option("--t", t);
  bench->add_option("--m", m);
  bench->add_option("--reps", reps);
  bench->add_option("--output", output, "CSV file (default: stdout)");

  auto* eval = app.add_subcommand("eval-metrics", "Per-frame metrics for a pred,gt manifest");
  eval->add_option("--manifest", manifest, "Manifest of pred_path,gt_path lines")->required();
  eval->add_option("--output", output, "CSV file (default: stdout)");
  eval->add_option("--mae-mode", mae_mode, "continuous|binary");

  std::size_t loss_size = 8;
  auto* loss = app.add_subcommand("loss-check", "Loss report and gradient check as JSON");
  loss->add_option("--size", loss_size, "Grid side, multiple of 4");

  auto* selfcheck = app.add_subcommand("selfcheck", "Run the invariant checks");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    err << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kValidationFailure;
  }

  try {
    if (convert->parsed()) return cmd_asma_convert(common, input, output, to, out);
    if (roundtrip->parsed()) return cmd_asma_roundtrip(common, input, mode, oversample, out);
    if (gen->parsed()) {
      spec.mode = parse_scan_mode(spec_mode);
      return cmd_gen_synthetic(common, spec, output, out);
    }
    if (forward->parsed())
      return cmd_forward(common, frames, index, output, record, weights_path, save_weights, out);
    if (bench->parsed()) return cmd_bench_fusion(common, h, w, c, t, m, reps, output, out);
    if (eval->parsed()) return cmd_eval_metrics(common, manifest, output, mae_mode, out);
    if (loss->parsed()) return cmd_loss_check(common, loss_size, out);
    if (selfcheck->parsed()) return run_selfcheck(out) ? kOk : kValidationFailure;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIoFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIoFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kValidationFailure;
  }
  err << app.help();
  return kValidationFailure;
}

}  // namespace astr::harness
