#include "hrv/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "hrv/error.hpp"
#include "hrv/evaluation.hpp"

namespace hrv {

using Eigen::MatrixXd;

AdamW::AdamW(const TrainingConfig& config) : config_(config) { config_.validate(); }

void AdamW::step(ClassifierModel& model) {
  ++t_;
  const double lr = config_.learning_rate;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  const auto& mask = model.freeze_mask();
  for (auto& group : model.parameter_groups()) {
    if (mask.is_frozen(group.name)) continue;
    for (Parameter* p : group.params) {
      auto [it, fresh] = state_.try_emplace(p->name);
      Moments& s = it->second;
      if (fresh) {
        s.m = MatrixXd::Zero(p->value.rows(), p->value.cols());
        s.v = MatrixXd::Zero(p->value.rows(), p->value.cols());
      }
      p->value *= 1.0 - lr * config_.weight_decay;
      s.m = config_.beta1 * s.m + (1.0 - config_.beta1) * p->grad;
      s.v = config_.beta2 * s.v + (1.0 - config_.beta2) * p->grad.cwiseProduct(p->grad);
      const double step = lr / bc1;
      const double inv_bc2 = 1.0 / std::sqrt(bc2);
      p->value.array() -= step * s.m.array() / (s.v.array().sqrt() * inv_bc2 + config_.adam_eps);
      if (!p->value.allFinite()) throw Error(ErrorKind::numeric, "non-finite parameter " + p->name);
    }
  }
}

double train_step(ClassifierModel& model, AdamW& optimizer, std::span<const TokenizedExample* const> batch) {
  if (batch.empty()) throw Error(ErrorKind::empty_input, "empty batch");
  model.zero_grad();
  const auto n = static_cast<Eigen::Index>(batch.size());
  MatrixXd logits(n, 2);
  std::vector<int> labels(batch.size());
  std::vector<std::unique_ptr<ForwardCache>> caches(batch.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& ex = *batch[static_cast<std::size_t>(i)];
    logits.row(i) = model.logits(ex.ids, &caches[static_cast<std::size_t>(i)]).transpose();
    labels[static_cast<std::size_t>(i)] = ex.label;
  }
  MatrixXd grad;
  const double loss = weighted_ce_loss(logits, labels, model.config().class_weights, &grad);
  for (Eigen::Index i = 0; i < n; ++i) {
    model.backward(*caches[static_cast<std::size_t>(i)], grad.row(i).transpose());
  }
  optimizer.step(model);
  return loss;
}

TrainReport train(ClassifierModel& model, std::span<const Sentence> examples, const EpochCallback& on_epoch) {
  if (examples.empty()) throw Error(ErrorKind::empty_input, "no training examples");
  const auto& config = model.config();
  std::vector<TokenizedExample> data;
  data.reserve(examples.size());
  TrainReport report;
  bool has[2] = {false, false};
  for (const auto& s : examples) {
    if (!s.label) throw Error(ErrorKind::input, "training sentence " + to_string(s.key()) + " has no label");
    auto tok = model.encoder().tokenize(s.text, static_cast<std::size_t>(config.max_seq_len));
    report.truncated += tok.truncated;
    if (*s.label != 0 && *s.label != 1) throw Error(ErrorKind::input, "labels must be 0 or 1");
    has[*s.label] = true;
    data.push_back({std::move(tok.ids), *s.label});
  }
  if (!has[0] || !has[1]) {
    throw Error(ErrorKind::training_degenerate, "training data contains a single class");
  }

  AdamW optimizer(config);
  std::mt19937_64 rng(config.seed + 1);
  std::vector<const TokenizedExample*> order;
  order.reserve(data.size());
  for (const auto& d : data) order.push_back(&d);
  const auto bs = static_cast<std::size_t>(config.batch_size);

  model.clear_history();
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double weighted = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t len = std::min(bs, order.size() - start);
      const double loss = train_step(model, optimizer, std::span(order).subspan(start, len));
      weighted += loss * static_cast<double>(len);
    }
    const double mean = weighted / static_cast<double>(order.size());
    model.record_epoch(mean);
    report.epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  report.steps = optimizer.steps();
  model.mark_trained();
  return report;
}

std::vector<Fold> make_folds(std::span<const Sentence> examples, int k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorKind::input, "k must be at least 2");
  std::map<PostKey, int> post_class;
  for (const auto& s : examples) {
    if (s.source.kind != Source::Kind::original) continue;
    if (!s.label) throw Error(ErrorKind::input, "sentence " + to_string(s.key()) + " has no label");
    int& c = post_class[s.post()];
    c = std::max(c, *s.label);
  }
  std::vector<PostKey> positives;
  std::vector<PostKey> negatives;
  for (const auto& [key, c] : post_class) (c ? positives : negatives).push_back(key);
  if (positives.size() < static_cast<std::size_t>(k) || negatives.size() < static_cast<std::size_t>(k)) {
    throw Error(ErrorKind::input, "k = " + std::to_string(k) + " folds need at least k posts per class; have " +
                                      std::to_string(positives.size()) + " positive and " +
                                      std::to_string(negatives.size()) + " negative");
  }
  std::mt19937_64 rng(seed);
  std::shuffle(positives.begin(), positives.end(), rng);
  std::shuffle(negatives.begin(), negatives.end(), rng);

  std::vector<Fold> folds(static_cast<std::size_t>(k));
  std::map<PostKey, std::size_t> fold_of;
  std::size_t next = 0;
  for (const auto* list : {&positives, &negatives}) {
    for (const auto& key : *list) {
      fold_of[key] = next;
      folds[next].validation_posts.push_back(key);
      next = (next + 1) % folds.size();
    }
  }

  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& s = examples[i];
    if (s.source.kind == Source::Kind::llm) {
      for (auto& f : folds) f.train.push_back(i);
      continue;
    }
    const auto it = fold_of.find(s.post());
    if (it == fold_of.end()) {
      throw Error(ErrorKind::alignment, "augmented example " + to_string(s.key()) + " has no original post");
    }
    for (std::size_t f = 0; f < folds.size(); ++f) {
      if (f != it->second) {
        folds[f].train.push_back(i);
      } else if (s.source.kind == Source::Kind::original) {
        folds[f].validation.push_back(i);
      }
    }
  }
  return folds;
}

CrossValidationResult cross_validate(const EncoderSpec& spec, std::span<const Sentence> examples,
                                     std::span<const TrainingConfig> grid, int k) {
  if (grid.empty()) throw Error(ErrorKind::input, "empty hyper-parameter grid");
  for (const auto& c : grid) c.validate_for(spec);
  const auto folds = make_folds(examples, k, grid.front().seed);

  CrossValidationResult result;
  for (const auto& config : grid) {
    GridScore score;
    score.config = config;
    for (const auto& fold : folds) {
      std::vector<Sentence> train_set;
      train_set.reserve(fold.train.size());
      for (auto i : fold.train) train_set.push_back(examples[i]);
      std::vector<Sentence> validation;
      validation.reserve(fold.validation.size());
      for (auto i : fold.validation) validation.push_back(examples[i]);

      ClassifierModel model = build_classifier(spec, config);
      train(model, train_set);
      const auto predictions = predict(model, validation);
      score.fold_f2.push_back(f_beta(confusion(predictions, validation), 2.0));
    }
    score.mean_f2 = std::accumulate(score.fold_f2.begin(), score.fold_f2.end(), 0.0) /
                    static_cast<double>(score.fold_f2.size());
    result.scores.push_back(std::move(score));
  }

  for (std::size_t i = 1; i < result.scores.size(); ++i) {
    const auto& a = result.scores[i];
    const auto& b = result.scores[result.best];
    const bool better = a.mean_f2 > b.mean_f2 ||
                        (a.mean_f2 == b.mean_f2 &&
                         (a.config.learning_rate < b.config.learning_rate ||
                          (a.config.learning_rate == b.config.learning_rate && a.config.epochs < b.config.epochs)));
    if (better) result.best = i;
  }
  return result;
}

}  // namespace hrv
