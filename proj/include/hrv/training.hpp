#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hrv/classifier.hpp"
#include "hrv/corpus.hpp"

namespace hrv {

// Decoupled weight decay (p -= lr * wd * p) followed by the Adam update with
// bias correction. Frozen groups are skipped entirely.
class AdamW {
 public:
  explicit AdamW(const TrainingConfig& config);

  void step(ClassifierModel& model);
  std::int64_t steps() const { return t_; }

 private:
  struct Moments {
    Eigen::MatrixXd m;
    Eigen::MatrixXd v;
  };
  TrainingConfig config_;
  std::int64_t t_ = 0;
  std::map<std::string, Moments> state_;
};

struct TokenizedExample {
  std::vector<int> ids;
  int label = 0;
};

// One optimization step on a batch; returns the batch loss.
double train_step(ClassifierModel& model, AdamW& optimizer, std::span<const TokenizedExample* const> batch);

struct TrainReport {
  std::vector<double> epoch_loss;
  std::int64_t steps = 0;
  std::size_t truncated = 0;
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

// Runs config.epochs epochs of shuffled mini-batch training on labeled
// examples and marks the model trained. Throws training_degenerate when only
// one class is present.
TrainReport train(ClassifierModel& model, std::span<const Sentence> examples, const EpochCallback& on_epoch = {});

struct Fold {
  std::vector<PostKey> validation_posts;
  std::vector<std::size_t> train;       // example indices
  std::vector<std::size_t> validation;  // example indices, original sentences only
};

// Post-level stratified k-fold partition of the original (non-augmented)
// posts. Augmented examples follow their origin post into training and never
// appear in validation; generated examples are always training-side. Throws
// input when either class has fewer than k posts.
std::vector<Fold> make_folds(std::span<const Sentence> examples, int k, std::uint64_t seed);

struct GridScore {
  TrainingConfig config;
  std::vector<double> fold_f2;
  double mean_f2 = 0.0;
};

struct CrossValidationResult {
  std::vector<GridScore> scores;  // grid order
  std::size_t best = 0;
  const TrainingConfig& best_config() const { return scores[best].config; }
};

// Trains a fresh classifier per (grid point, fold) and scores validation F2
// at sentence level. The winner has the highest mean F2; ties go to the lower
// learning rate, then fewer epochs, then earlier grid position.
CrossValidationResult cross_validate(const EncoderSpec& spec, std::span<const Sentence> examples,
                                     std::span<const TrainingConfig> grid, int k);

}  // namespace hrv
