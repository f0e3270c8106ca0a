#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace hrv {

struct EncoderSpec {
  std::string name = "tiny";
  int n_blocks = 2;
  int hidden_size = 32;
  int n_heads = 2;
  int ffn_size = 0;  // 0 means 4 * hidden_size
  int vocab_size = 4096;
  int max_positions = 128;
  double init_range = 0.02;

  int ffn() const { return ffn_size > 0 ? ffn_size : 4 * hidden_size; }
  // Throws config on an impossible geometry.
  void validate() const;

  // 12 blocks, hidden 768, 12 heads: the multilingual BERT-base family.
  static EncoderSpec reference_base();
};

struct Parameter {
  std::string name;
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;

  void init_zero(Eigen::Index rows, Eigen::Index cols);
};

// A freezable unit: "embeddings", "block.1" .. "block.N", or "head".
struct ParameterGroup {
  std::string name;
  std::vector<Parameter*> params;
};

struct TokenizedText {
  std::vector<int> ids;  // ids[0] is the pooling token
  bool truncated = false;
};

// Opaque per-forward state needed by backward().
class ForwardCache {
 public:
  virtual ~ForwardCache() = default;
};

// Pluggable sentence encoder. Adapters for pretrained checkpoints implement
// the same surface; the library ships a small randomly initialized
// transformer for desk-scale runs.
class Encoder {
 public:
  virtual ~Encoder() = default;

  virtual const EncoderSpec& spec() const = 0;
  virtual TokenizedText tokenize(std::string_view text, std::size_t max_len) const = 0;

  // Returns the pooled (first-token) representation. When `cache` is non-null
  // it receives what backward() needs.
  virtual Eigen::VectorXd forward(std::span<const int> ids, std::unique_ptr<ForwardCache>* cache) const = 0;

  // Accumulates parameter gradients given d(loss)/d(pooled). Groups below
  // `lowest_block` (0 = embeddings, b = block.b) receive no gradient.
  virtual void backward(const ForwardCache& cache, const Eigen::VectorXd& grad_pooled,
                        int lowest_block = 0) = 0;

  virtual std::vector<ParameterGroup> parameter_groups() = 0;
};

// Word-level tokenizer hashing case-folded tokens into the vocabulary. Id 0
// is the pooling token, id 1 is reserved.
TokenizedText hash_tokenize(std::string_view text, int vocab_size, std::size_t max_len);

// Post-layer-norm transformer encoder (BERT layout) with exact GELU.
class TinyEncoder final : public Encoder {
 public:
  TinyEncoder(const EncoderSpec& spec, std::uint64_t seed);

  const EncoderSpec& spec() const override { return spec_; }
  TokenizedText tokenize(std::string_view text, std::size_t max_len) const override;
  Eigen::VectorXd forward(std::span<const int> ids, std::unique_ptr<ForwardCache>* cache) const override;
  void backward(const ForwardCache& cache, const Eigen::VectorXd& grad_pooled, int lowest_block) override;
  std::vector<ParameterGroup> parameter_groups() override;

 private:
  struct Block {
    Parameter wq, bq, wk, bk, wv, bv, wo, bo;
    Parameter ln1_g, ln1_b;
    Parameter w1, b1, w2, b2;
    Parameter ln2_g, ln2_b;
  };

  EncoderSpec spec_;
  Parameter token_embedding_;
  Parameter position_embedding_;
  Parameter emb_ln_g_, emb_ln_b_;
  std::vector<Block> blocks_;
};

// Builds the encoder named by spec.name ("tiny"). Other names need an
// adapter and throw config.
std::unique_ptr<Encoder> make_encoder(const EncoderSpec& spec, std::uint64_t seed);

}  // namespace hrv
