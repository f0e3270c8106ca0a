#include "hrv/classifier.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <random>
#include <sstream>

#include "hrv/error.hpp"
#include "hrv/io.hpp"

namespace hrv {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

void TrainingConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::config, msg); };
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) fail("learning_rate must be positive");
  if (epochs < 1) fail("epochs must be at least 1");
  if (!(class_weights.negative > 0) || !(class_weights.hrv > 0)) fail("class weights must be positive");
  if (std::abs(class_weights.negative + class_weights.hrv - 1.0) > 1e-9) {
    fail("class weights must sum to 1");
  }
  if (n_freeze < 0) fail("n_freeze must be non-negative");
  if (k_folds < 2) fail("k_folds must be at least 2");
  if (batch_size < 1) fail("batch_size must be at least 1");
  if (max_seq_len < 2) fail("max_seq_len must be at least 2");
  if (weight_decay < 0) fail("weight_decay must be non-negative");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) fail("betas must lie in [0, 1)");
  if (!(adam_eps > 0)) fail("adam_eps must be positive");
  if (!(decision_threshold > 0 && decision_threshold < 1)) fail("decision_threshold must lie in (0, 1)");
  if (pooling != "first_token") fail("unsupported pooling '" + pooling + "'");
}

void TrainingConfig::validate_for(const EncoderSpec& spec) const {
  validate();
  if (n_freeze > spec.n_blocks) {
    throw Error(ErrorKind::config, "n_freeze " + std::to_string(n_freeze) + " exceeds the encoder's " +
                                       std::to_string(spec.n_blocks) + " blocks");
  }
  if (max_seq_len > spec.max_positions) {
    throw Error(ErrorKind::config, "max_seq_len " + std::to_string(max_seq_len) + " exceeds max_positions " +
                                       std::to_string(spec.max_positions));
  }
}

json to_json(const TrainingConfig& c) {
  return json{{"learning_rate", c.learning_rate},
              {"epochs", c.epochs},
              {"class_weights", json::array({c.class_weights.negative, c.class_weights.hrv})},
              {"n_freeze", c.n_freeze},
              {"k_folds", c.k_folds},
              {"batch_size", c.batch_size},
              {"max_seq_len", c.max_seq_len},
              {"seed", c.seed},
              {"weight_decay", c.weight_decay},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"adam_eps", c.adam_eps},
              {"decision_threshold", c.decision_threshold},
              {"pooling", c.pooling}};
}

namespace {

template <typename T>
void read_field(const json& j, const char* key, T& out, const char* what) {
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::config, std::string(what) + " field '" + key + "' has the wrong type");
  }
}

}  // namespace

TrainingConfig training_config_from_json(const json& j, TrainingConfig base) {
  if (!j.is_object()) throw Error(ErrorKind::config, "training config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "learning_rate") {
      read_field(j, "learning_rate", base.learning_rate, "training");
    } else if (key == "epochs") {
      read_field(j, "epochs", base.epochs, "training");
    } else if (key == "class_weights") {
      if (!value.is_array() || value.size() != 2 || !value[0].is_number() || !value[1].is_number()) {
        throw Error(ErrorKind::config, "class_weights must be [negative, hrv]");
      }
      base.class_weights = {value[0].get<double>(), value[1].get<double>()};
    } else if (key == "n_freeze") {
      read_field(j, "n_freeze", base.n_freeze, "training");
    } else if (key == "k_folds") {
      read_field(j, "k_folds", base.k_folds, "training");
    } else if (key == "batch_size") {
      read_field(j, "batch_size", base.batch_size, "training");
    } else if (key == "max_seq_len") {
      read_field(j, "max_seq_len", base.max_seq_len, "training");
    } else if (key == "seed") {
      read_field(j, "seed", base.seed, "training");
    } else if (key == "weight_decay") {
      read_field(j, "weight_decay", base.weight_decay, "training");
    } else if (key == "beta1") {
      read_field(j, "beta1", base.beta1, "training");
    } else if (key == "beta2") {
      read_field(j, "beta2", base.beta2, "training");
    } else if (key == "adam_eps") {
      read_field(j, "adam_eps", base.adam_eps, "training");
    } else if (key == "decision_threshold") {
      read_field(j, "decision_threshold", base.decision_threshold, "training");
    } else if (key == "pooling") {
      read_field(j, "pooling", base.pooling, "training");
    } else {
      throw Error(ErrorKind::config, "unknown training config key '" + key + "'");
    }
  }
  return base;
}

json to_json(const EncoderSpec& s) {
  return json{{"name", s.name},
              {"n_blocks", s.n_blocks},
              {"hidden_size", s.hidden_size},
              {"n_heads", s.n_heads},
              {"ffn_size", s.ffn_size},
              {"vocab_size", s.vocab_size},
              {"max_positions", s.max_positions},
              {"init_range", s.init_range}};
}

EncoderSpec encoder_spec_from_json(const json& j, EncoderSpec base) {
  if (!j.is_object()) throw Error(ErrorKind::config, "encoder spec must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "name") {
      read_field(j, "name", base.name, "encoder");
    } else if (key == "n_blocks") {
      read_field(j, "n_blocks", base.n_blocks, "encoder");
    } else if (key == "hidden_size") {
      read_field(j, "hidden_size", base.hidden_size, "encoder");
    } else if (key == "n_heads") {
      read_field(j, "n_heads", base.n_heads, "encoder");
    } else if (key == "ffn_size") {
      read_field(j, "ffn_size", base.ffn_size, "encoder");
    } else if (key == "vocab_size") {
      read_field(j, "vocab_size", base.vocab_size, "encoder");
    } else if (key == "max_positions") {
      read_field(j, "max_positions", base.max_positions, "encoder");
    } else if (key == "init_range") {
      read_field(j, "init_range", base.init_range, "encoder");
    } else {
      throw Error(ErrorKind::config, "unknown encoder key '" + key + "'");
    }
  }
  return base;
}

bool FreezeMask::is_frozen(const std::string& group) const {
  const auto it = frozen.find(group);
  return it != frozen.end() && it->second;
}

std::size_t FreezeMask::frozen_count() const {
  std::size_t n = 0;
  for (const auto& [_, f] : frozen) n += f;
  return n;
}

FreezeMask make_freeze_mask(const EncoderSpec& spec, int n_freeze) {
  if (n_freeze < 0 || n_freeze > spec.n_blocks) {
    throw Error(ErrorKind::config, "n_freeze " + std::to_string(n_freeze) + " is outside [0, " +
                                       std::to_string(spec.n_blocks) + "]");
  }
  FreezeMask mask;
  mask.frozen["embeddings"] = n_freeze > 0;
  for (int b = 1; b <= spec.n_blocks; ++b) mask.frozen["block." + std::to_string(b)] = b <= n_freeze;
  mask.frozen["head"] = false;
  return mask;
}

namespace {

struct ClassifierCache final : ForwardCache {
  std::unique_ptr<ForwardCache> encoder;
  VectorXd pooled;
};

}  // namespace

ClassifierModel::ClassifierModel(std::unique_ptr<Encoder> encoder, const TrainingConfig& config,
                                 std::uint64_t seed)
    : encoder_(std::move(encoder)), config_(config) {
  if (!encoder_) throw Error(ErrorKind::config, "classifier needs an encoder");
  config_.validate_for(encoder_->spec());
  freeze_ = make_freeze_mask(encoder_->spec(), config_.n_freeze);

  const Eigen::Index h = encoder_->spec().hidden_size;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::normal_distribution<double> normal(0.0, encoder_->spec().init_range);
  head_weight_.name = "head.weight";
  head_weight_.init_zero(h, 2);
  for (Eigen::Index c = 0; c < 2; ++c) {
    for (Eigen::Index r = 0; r < h; ++r) head_weight_.value(r, c) = normal(rng);
  }
  head_bias_.name = "head.bias";
  head_bias_.init_zero(1, 2);
}

std::vector<ParameterGroup> ClassifierModel::parameter_groups() {
  auto groups = encoder_->parameter_groups();
  groups.push_back({"head", {&head_weight_, &head_bias_}});
  return groups;
}

Eigen::Vector2d ClassifierModel::logits(std::span<const int> ids, std::unique_ptr<ForwardCache>* cache) const {
  std::unique_ptr<ForwardCache> enc_cache;
  VectorXd pooled = encoder_->forward(ids, cache ? &enc_cache : nullptr);
  Eigen::Vector2d out = head_weight_.value.transpose() * pooled + head_bias_.value.transpose();
  if (cache) {
    auto c = std::make_unique<ClassifierCache>();
    c->encoder = std::move(enc_cache);
    c->pooled = std::move(pooled);
    *cache = std::move(c);
  }
  return out;
}

void ClassifierModel::backward(const ForwardCache& cache, const Eigen::Vector2d& grad_logits) {
  const auto* c = dynamic_cast<const ClassifierCache*>(&cache);
  if (!c) throw Error(ErrorKind::input, "forward cache does not belong to this classifier");
  head_weight_.grad += c->pooled * grad_logits.transpose();
  head_bias_.grad += grad_logits.transpose();
  if (config_.n_freeze >= spec().n_blocks) return;
  const VectorXd grad_pooled = head_weight_.value * grad_logits;
  // Embeddings are trainable only when nothing is frozen.
  const int lowest = config_.n_freeze == 0 ? 0 : config_.n_freeze + 1;
  encoder_->backward(*c->encoder, grad_pooled, lowest);
}

void ClassifierModel::zero_grad() {
  for (auto& g : parameter_groups()) {
    for (auto* p : g.params) p->grad.setZero();
  }
}

void ClassifierModel::set_config(const TrainingConfig& config) {
  config.validate_for(spec());
  config_ = config;
  freeze_ = make_freeze_mask(spec(), config_.n_freeze);
}

ClassifierModel build_classifier(const EncoderSpec& spec, const TrainingConfig& config) {
  spec.validate();
  config.validate_for(spec);
  return ClassifierModel(make_encoder(spec, config.seed), config, config.seed);
}

double weighted_ce_loss(const MatrixXd& logits, std::span<const int> labels, const ClassWeights& weights,
                        MatrixXd* grad) {
  if (logits.cols() != 2) throw Error(ErrorKind::input, "logits must have two columns");
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) {
    throw Error(ErrorKind::input, "logits and labels differ in length");
  }
  if (labels.empty()) throw Error(ErrorKind::empty_input, "empty batch");
  if (!(weights.negative > 0) || !(weights.hrv > 0)) throw Error(ErrorKind::input, "class weights must be positive");
  if (!logits.allFinite()) throw Error(ErrorKind::numeric, "non-finite logits");

  const auto n = static_cast<double>(labels.size());
  if (grad) grad->resize(logits.rows(), 2);
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y != 0 && y != 1) throw Error(ErrorKind::input, "labels must be 0 or 1");
    const double m = std::max(logits(i, 0), logits(i, 1));
    const double lse = m + std::log(std::exp(logits(i, 0) - m) + std::exp(logits(i, 1) - m));
    const double w = weights.of(y);
    total += w * (lse - logits(i, y));
    if (grad) {
      for (int c = 0; c < 2; ++c) {
        const double p = std::exp(logits(i, c) - lse);
        (*grad)(i, c) = w * (p - (c == y ? 1.0 : 0.0)) / n;
      }
    }
  }
  const double loss = total / n;
  if (!std::isfinite(loss)) throw Error(ErrorKind::numeric, "non-finite loss");
  return loss;
}

std::vector<PredictionRecord> predict(const ClassifierModel& model, std::span<const Sentence> sentences,
                                      const PredictOptions& options) {
  if (!model.trained() && !options.allow_untrained) {
    throw Error(ErrorKind::input, "model has not been trained; pass allow_untrained to predict anyway");
  }
  std::vector<PredictionRecord> out;
  out.reserve(sentences.size());
  const auto max_len = static_cast<std::size_t>(model.config().max_seq_len);
  for (const auto& s : sentences) {
    const auto tok = model.encoder().tokenize(s.text, max_len);
    const Eigen::Vector2d z = model.logits(tok.ids, nullptr);
    const double p = 1.0 / (1.0 + std::exp(z(0) - z(1)));
    if (!std::isfinite(p)) throw Error(ErrorKind::numeric, "non-finite probability for " + to_string(s.key()));
    PredictionRecord r;
    r.key = s.key();
    r.prob_hrv = p;
    r.label = p >= model.config().decision_threshold ? 1 : 0;
    r.truncated = tok.truncated;
    r.untrained = !model.trained();
    out.push_back(std::move(r));
  }
  return out;
}

std::string write_predictions(std::span<const PredictionRecord> predictions) {
  std::string out;
  for (const auto& p : predictions) {
    json j{{"channel_id", p.key.channel_id},
           {"post_id", p.key.post_id},
           {"sent_index", p.key.sent_index},
           {"prob_hrv", p.prob_hrv},
           {"label", p.label}};
    if (p.truncated) j["truncated"] = true;
    if (p.untrained) j["untrained"] = true;
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<PredictionRecord> read_predictions(std::istream& in) {
  std::vector<PredictionRecord> out;
  io::for_each_line(in, [&](std::string_view line, std::size_t number) {
    auto fail = [&](const std::string& msg) {
      throw Error(ErrorKind::schema, "prediction line " + std::to_string(number) + ": " + msg);
    };
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      fail("not valid JSON");
    }
    if (!j.is_object()) fail("expected an object");
    PredictionRecord r;
    try {
      r.key.channel_id = j.at("channel_id").get<std::string>();
      r.key.post_id = j.at("post_id").get<std::int64_t>();
      r.key.sent_index = j.at("sent_index").get<int>();
      r.label = j.at("label").get<int>();
      r.prob_hrv = j.value("prob_hrv", static_cast<double>(r.label));
      r.truncated = j.value("truncated", false);
      r.untrained = j.value("untrained", false);
    } catch (const json::exception& e) {
      fail(e.what());
    }
    if (r.label != 0 && r.label != 1) fail("label must be 0 or 1");
    out.push_back(std::move(r));
  });
  return out;
}

namespace {

constexpr char kWeightsMagic[4] = {'H', 'R', 'V', 'W'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(std::string_view& in) {
  if (in.size() < sizeof(T)) throw Error(ErrorKind::schema, "weights file is truncated");
  T v;
  std::memcpy(&v, in.data(), sizeof(T));
  in.remove_prefix(sizeof(T));
  return v;
}

json read_json_file(const std::filesystem::path& path) {
  try {
    return json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::schema, path.string() + ": " + e.what());
  }
}

}  // namespace

void save_model(const ClassifierModel& model, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());

  // parameter_groups() hands out mutable pointers; nothing is written through them here.
  auto groups = const_cast<ClassifierModel&>(model).parameter_groups();
  std::string blob(kWeightsMagic, 4);
  std::uint32_t count = 0;
  for (const auto& g : groups) count += static_cast<std::uint32_t>(g.params.size());
  put<std::uint32_t>(blob, kModelFormatVersion);
  put<std::uint32_t>(blob, count);
  for (const auto& g : groups) {
    for (const auto* p : g.params) {
      put<std::uint32_t>(blob, static_cast<std::uint32_t>(p->name.size()));
      blob += p->name;
      put<std::int64_t>(blob, p->value.rows());
      put<std::int64_t>(blob, p->value.cols());
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
        for (Eigen::Index r = 0; r < p->value.rows(); ++r) put<double>(blob, p->value(r, c));
      }
    }
  }

  json manifest{{"format_version", kModelFormatVersion},
                {"encoder", to_json(model.spec())},
                {"trained", model.trained()},
                {"freeze", model.freeze_mask().frozen}};
  io::write_file_atomic(dir / "weights.bin", blob);
  io::write_file_atomic(dir / "config.json", to_json(model.config()).dump(2) + "\n");
  io::write_file_atomic(dir / "history.json", json(model.history()).dump() + "\n");
  io::write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

ClassifierModel load_model(const std::filesystem::path& dir) {
  for (const char* f : {"manifest.json", "config.json", "history.json", "weights.bin"}) {
    if (!std::filesystem::exists(dir / f)) {
      throw Error(ErrorKind::io, "model directory " + dir.string() + " lacks " + f);
    }
  }
  const json manifest = read_json_file(dir / "manifest.json");
  if (!manifest.is_object() || manifest.value("format_version", -1) != kModelFormatVersion) {
    throw Error(ErrorKind::schema, "unsupported model format in " + dir.string());
  }
  if (!manifest.contains("encoder")) throw Error(ErrorKind::schema, "manifest lacks the encoder spec");
  const EncoderSpec spec = encoder_spec_from_json(manifest.at("encoder"));
  const TrainingConfig config = training_config_from_json(read_json_file(dir / "config.json"));
  ClassifierModel model = build_classifier(spec, config);

  const std::string blob = io::read_file(dir / "weights.bin");
  std::string_view in = blob;
  if (in.size() < 4 || std::memcmp(in.data(), kWeightsMagic, 4) != 0) {
    throw Error(ErrorKind::schema, "weights.bin has a bad magic number");
  }
  in.remove_prefix(4);
  if (take<std::uint32_t>(in) != kModelFormatVersion) throw Error(ErrorKind::schema, "weights.bin version mismatch");
  const auto count = take<std::uint32_t>(in);

  std::map<std::string, Parameter*> by_name;
  for (auto& g : model.parameter_groups()) {
    for (auto* p : g.params) by_name[p->name] = p;
  }
  if (count != by_name.size()) throw Error(ErrorKind::schema, "weights.bin parameter count mismatch");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = take<std::uint32_t>(in);
    if (in.size() < len) throw Error(ErrorKind::schema, "weights file is truncated");
    const std::string name(in.substr(0, len));
    in.remove_prefix(len);
    const auto rows = take<std::int64_t>(in);
    const auto cols = take<std::int64_t>(in);
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw Error(ErrorKind::schema, "unknown parameter " + name);
    Parameter& p = *it->second;
    if (rows != p.value.rows() || cols != p.value.cols()) {
      throw Error(ErrorKind::schema, "shape mismatch for " + name);
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      for (Eigen::Index r = 0; r < rows; ++r) p.value(r, c) = take<double>(in);
    }
  }
  if (!in.empty()) throw Error(ErrorKind::schema, "trailing bytes in weights.bin");

  const json history = read_json_file(dir / "history.json");
  if (!history.is_array()) throw Error(ErrorKind::schema, "history.json must be an array");
  for (const auto& v : history) model.record_epoch(v.get<double>());
  if (manifest.value("trained", false)) model.mark_trained();
  return model;
}

}  // namespace hrv
