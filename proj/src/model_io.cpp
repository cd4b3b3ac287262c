#include "astr/model_io.hpp"

#include <map>
#include <string>

#include "astr/error.hpp"

namespace astr::model {

namespace {

Tensor vec(const std::vector<double>& v) { return Tensor({v.size()}, v); }

void put_conv(io::WeightRecords& out, const std::string& name, const ConvLayer& layer) {
  out.emplace_back(name + ".weight", layer.kernel);
  out.emplace_back(name + ".bias", vec(layer.bias));
}

void put_attention(io::WeightRecords& out, const std::string& name, const context::AttentionWeights& w) {
  out.emplace_back(name + ".wq", w.wq);
  out.emplace_back(name + ".wk", w.wk);
  out.emplace_back(name + ".wv", w.wv);
  out.emplace_back(name + ".wo", w.wo);
  out.emplace_back(name + ".mlp_in.weight", w.mlp_in);
  out.emplace_back(name + ".mlp_in.bias", vec(w.mlp_in_bias));
  out.emplace_back(name + ".mlp_out.weight", w.mlp_out);
  out.emplace_back(name + ".mlp_out.bias", vec(w.mlp_out_bias));
}

class RecordTable {
 public:
  explicit RecordTable(const io::WeightRecords& records) {
    for (const auto& [name, t] : records) {
      if (!table_.emplace(name, &t).second) throw IoError("duplicate weight record '" + name + "'");
    }
  }

  const Tensor& get(const std::string& name) {
    auto it = table_.find(name);
    if (it == table_.end()) throw IoError("weight record '" + name + "' missing");
    used_ += 1;
    return *it->second;
  }

  std::vector<double> bias(const std::string& name) {
    const Tensor& t = get(name);
    if (t.rank() != 1) throw DimensionError("weight record '" + name + "' must be a vector");
    return t.values();
  }

  ConvLayer conv(const std::string& name) { return {get(name + ".weight"), bias(name + ".bias")}; }

  context::AttentionWeights attention(const std::string& name) {
    context::AttentionWeights w;
    w.wq = get(name + ".wq");
    w.wk = get(name + ".wk");
    w.wv = get(name + ".wv");
    w.wo = get(name + ".wo");
    w.mlp_in = get(name + ".mlp_in.weight");
    w.mlp_in_bias = bias(name + ".mlp_in.bias");
    w.mlp_out = get(name + ".mlp_out.weight");
    w.mlp_out_bias = bias(name + ".mlp_out.bias");
    return w;
  }

  bool all_used() const { return used_ == table_.size(); }

 private:
  std::map<std::string, const Tensor*> table_;
  std::size_t used_ = 0;
};

}  // namespace

io::WeightRecords to_records(const ModelWeights& weights) {
  io::WeightRecords out;
  for (std::size_t i = 0; i < weights.backbone.stages.size(); ++i)
    put_conv(out, "backbone." + std::to_string(i), weights.backbone.stages[i]);
  for (std::size_t i = 0; i < weights.self_attention.size(); ++i)
    put_attention(out, "sa." + std::to_string(i), weights.self_attention[i]);
  put_attention(out, "ca", weights.cross_attention);
  for (std::size_t i = 0; i < weights.reference_refine.size(); ++i)
    put_conv(out, "scb.refine." + std::to_string(i + 1), weights.reference_refine[i]);
  put_conv(out, "scb.decoder", weights.coarse_decoder);
  for (std::size_t i = 0; i < weights.decoder.size(); ++i)
    put_conv(out, "decoder." + std::to_string(i), weights.decoder[i]);
  put_conv(out, "head", weights.head);
  return out;
}

ModelWeights from_records(const ModelConfig& cfg, const io::WeightRecords& records) {
  cfg.validate();
  RecordTable table(records);
  ModelWeights w;
  w.config = cfg;
  std::vector<ConvLayer> stages;
  for (std::size_t i = 0; i < cfg.backbone.stages(); ++i) stages.push_back(table.conv("backbone." + std::to_string(i)));
  w.backbone = Backbone(cfg.backbone, std::move(stages));
  for (std::size_t i = 0; i < cfg.sa_layers; ++i) w.self_attention.push_back(table.attention("sa." + std::to_string(i)));
  w.cross_attention = table.attention("ca");
  for (std::size_t i = 1; i < cfg.frames; ++i) w.reference_refine.push_back(table.conv("scb.refine." + std::to_string(i)));
  w.coarse_decoder = table.conv("scb.decoder");
  for (std::size_t i = 0; i < cfg.backbone.stages(); ++i) w.decoder.push_back(table.conv("decoder." + std::to_string(i)));
  w.head = table.conv("head");
  if (!table.all_used()) throw IoError("weight file has records the configured model does not use");
  w.validate();
  return w;
}

void save_model(const std::filesystem::path& path, const ModelWeights& weights) {
  io::save_weights(path, to_records(weights));
}

ModelWeights load_model(const std::filesystem::path& path, const ModelConfig& cfg) {
  return from_records(cfg, io::load_weights(path));
}

}  // namespace astr::model
