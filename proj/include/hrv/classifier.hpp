#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "hrv/corpus.hpp"
#include "hrv/encoder.hpp"

namespace hrv {

struct ClassWeights {
  double negative = 0.17;
  double hrv = 0.83;
  double of(int label) const { return label == 1 ? hrv : negative; }
  bool operator==(const ClassWeights&) const = default;
};

struct TrainingConfig {
  double learning_rate = 5e-5;
  int epochs = 5;
  ClassWeights class_weights;
  int n_freeze = 6;
  int k_folds = 5;
  int batch_size = 16;
  int max_seq_len = 128;
  std::uint64_t seed = 42;
  // AdamW; none of these were tuned.
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double decision_threshold = 0.5;
  std::string pooling = "first_token";

  // Throws config unless weights sum to 1 (±1e-9), epochs ≥ 1, and so on.
  void validate() const;
  void validate_for(const EncoderSpec& spec) const;
};

nlohmann::json to_json(const TrainingConfig& c);
// Missing keys keep `base` values; unknown keys are rejected.
TrainingConfig training_config_from_json(const nlohmann::json& j, TrainingConfig base = {});
nlohmann::json to_json(const EncoderSpec& s);
EncoderSpec encoder_spec_from_json(const nlohmann::json& j, EncoderSpec base = {});

// Group name -> frozen. Embeddings and blocks 1..n_freeze are frozen; the
// head never is.
struct FreezeMask {
  std::map<std::string, bool> frozen;
  bool is_frozen(const std::string& group) const;
  std::size_t frozen_count() const;
};

FreezeMask make_freeze_mask(const EncoderSpec& spec, int n_freeze);

class ClassifierModel {
 public:
  ClassifierModel(std::unique_ptr<Encoder> encoder, const TrainingConfig& config, std::uint64_t seed);

  const EncoderSpec& spec() const { return encoder_->spec(); }
  const TrainingConfig& config() const { return config_; }
  const FreezeMask& freeze_mask() const { return freeze_; }
  const std::vector<double>& history() const { return history_; }
  bool trained() const { return trained_; }

  Encoder& encoder() { return *encoder_; }
  const Encoder& encoder() const { return *encoder_; }

  // Encoder groups followed by "head".
  std::vector<ParameterGroup> parameter_groups();

  // Forward pass for one tokenized sentence: 2 logits (non-HRV, HRV).
  Eigen::Vector2d logits(std::span<const int> ids, std::unique_ptr<ForwardCache>* cache) const;
  // Backprop d(loss)/d(logits) through head and unfrozen encoder groups.
  void backward(const ForwardCache& cache, const Eigen::Vector2d& grad_logits);

  void zero_grad();

  // Used by training and model loading.
  void set_config(const TrainingConfig& config);
  void record_epoch(double mean_loss) { history_.push_back(mean_loss); }
  void mark_trained() { trained_ = true; }
  void clear_history() { history_.clear(); }

 private:
  std::unique_ptr<Encoder> encoder_;
  TrainingConfig config_;
  FreezeMask freeze_;
  Parameter head_weight_;  // hidden x 2
  Parameter head_bias_;    // 1 x 2
  std::vector<double> history_;
  bool trained_ = false;
};

// Throws config when n_freeze exceeds the number of blocks.
ClassifierModel build_classifier(const EncoderSpec& spec, const TrainingConfig& config);

// Mean over the batch of w[label] * -log softmax(logits)[label]. When `grad`
// is given it receives d(loss)/d(logits), batch x 2. Throws numeric on
// non-finite logits.
double weighted_ce_loss(const Eigen::MatrixXd& logits, std::span<const int> labels,
                        const ClassWeights& weights, Eigen::MatrixXd* grad = nullptr);

struct PredictionRecord {
  SentenceKey key;
  double prob_hrv = 0.0;
  int label = 0;
  bool truncated = false;
  bool untrained = false;
};

struct PredictOptions {
  bool allow_untrained = false;
};

std::vector<PredictionRecord> predict(const ClassifierModel& model, std::span<const Sentence> sentences,
                                      const PredictOptions& options = {});

// Line-delimited JSON predictions.
std::string write_predictions(std::span<const PredictionRecord> predictions);
std::vector<PredictionRecord> read_predictions(std::istream& in);

// Model directory: manifest.json, config.json, history.json, weights.bin.
inline constexpr int kModelFormatVersion = 1;
void save_model(const ClassifierModel& model, const std::filesystem::path& dir);
ClassifierModel load_model(const std::filesystem::path& dir);

}  // namespace hrv
