#include "hrv/encoder.hpp"

#include <cmath>
#include <random>

#include "hrv/error.hpp"
#include "hrv/text.hpp"

namespace hrv {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

void EncoderSpec::validate() const {
  if (n_blocks < 1) throw Error(ErrorKind::config, "encoder needs at least one block");
  if (hidden_size < 1 || n_heads < 1) throw Error(ErrorKind::config, "hidden size and heads must be positive");
  if (hidden_size % n_heads != 0) {
    throw Error(ErrorKind::config, "hidden size " + std::to_string(hidden_size) +
                                       " is not divisible by " + std::to_string(n_heads) + " heads");
  }
  if (ffn_size < 0) throw Error(ErrorKind::config, "ffn size must be non-negative");
  if (vocab_size < 3) throw Error(ErrorKind::config, "vocabulary too small");
  if (max_positions < 2) throw Error(ErrorKind::config, "max_positions must be at least 2");
  if (!(init_range > 0)) throw Error(ErrorKind::config, "init_range must be positive");
}

EncoderSpec EncoderSpec::reference_base() {
  EncoderSpec s;
  s.name = "bert-base-multilingual-uncased";
  s.n_blocks = 12;
  s.hidden_size = 768;
  s.n_heads = 12;
  s.ffn_size = 3072;
  s.vocab_size = 105879;
  s.max_positions = 512;
  return s;
}

void Parameter::init_zero(Eigen::Index rows, Eigen::Index cols) {
  value = MatrixXd::Zero(rows, cols);
  grad = MatrixXd::Zero(rows, cols);
}

TokenizedText hash_tokenize(std::string_view text, int vocab_size, std::size_t max_len) {
  TokenizedText out;
  out.ids.push_back(0);
  const auto buckets = static_cast<std::uint64_t>(vocab_size - 2);
  for (const auto& tok : text::word_tokens(text)) {
    if (out.ids.size() >= max_len) {
      out.truncated = true;
      break;
    }
    // FNV-1a, 64 bit
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text::casefold(tok.text)) {
      h ^= c;
      h *= 1099511628211ull;
    }
    out.ids.push_back(static_cast<int>(2 + h % buckets));
  }
  return out;
}

namespace {

constexpr double kLayerNormEps = 1e-12;

struct LayerNormCache {
  MatrixXd xhat;
  VectorXd inv_std;
};

MatrixXd layer_norm(const MatrixXd& x, const Parameter& g, const Parameter& b, LayerNormCache& cache) {
  const auto t = x.rows();
  const auto h = static_cast<double>(x.cols());
  cache.xhat.resize(x.rows(), x.cols());
  cache.inv_std.resize(t);
  MatrixXd y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < t; ++r) {
    const double mean = x.row(r).mean();
    const RowVectorXd centered = x.row(r).array() - mean;
    const double var = centered.squaredNorm() / h;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.inv_std(r) = inv;
    cache.xhat.row(r) = centered * inv;
    y.row(r) = cache.xhat.row(r).cwiseProduct(g.value.row(0)) + b.value.row(0);
  }
  return y;
}

MatrixXd layer_norm_backward(const MatrixXd& dy, const LayerNormCache& cache, Parameter& g, Parameter& b,
                             bool accumulate) {
  const double h = static_cast<double>(dy.cols());
  if (accumulate) {
    g.grad.row(0) += dy.cwiseProduct(cache.xhat).colwise().sum();
    b.grad.row(0) += dy.colwise().sum();
  }
  MatrixXd dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const RowVectorXd dxhat = dy.row(r).cwiseProduct(g.value.row(0));
    const double mean_d = dxhat.sum() / h;
    const double mean_dx = dxhat.dot(cache.xhat.row(r)) / h;
    dx.row(r) = cache.inv_std(r) * (dxhat.array() - mean_d - cache.xhat.row(r).array() * mean_dx).matrix();
  }
  return dx;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return cdf + x * pdf;
}

MatrixXd affine(const MatrixXd& x, const Parameter& w, const Parameter& b) {
  return (x * w.value).rowwise() + b.value.row(0);
}

// dY -> dX for Y = X W + b, accumulating dW and db when asked.
MatrixXd affine_backward(const MatrixXd& dy, const MatrixXd& x, Parameter& w, Parameter& b, bool accumulate) {
  if (accumulate) {
    w.grad.noalias() += x.transpose() * dy;
    b.grad.row(0) += dy.colwise().sum();
  }
  return dy * w.value.transpose();
}

struct BlockCache {
  MatrixXd x, q, k, v, context;
  std::vector<MatrixXd> attention;  // per head, T x T
  LayerNormCache ln1, ln2;
  MatrixXd y1, z, gz;
};

struct TinyCache final : ForwardCache {
  std::vector<int> ids;
  LayerNormCache emb_ln;
  std::vector<BlockCache> blocks;
  Eigen::Index hidden = 0;
};

}  // namespace

TinyEncoder::TinyEncoder(const EncoderSpec& spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, spec_.init_range);
  const Eigen::Index h = spec_.hidden_size;
  const Eigen::Index f = spec_.ffn();

  auto weight = [&](Parameter& p, std::string name, Eigen::Index rows, Eigen::Index cols) {
    p.name = std::move(name);
    p.init_zero(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
      for (Eigen::Index r = 0; r < rows; ++r) p.value(r, c) = normal(rng);
    }
  };
  auto bias = [](Parameter& p, std::string name, Eigen::Index cols) {
    p.name = std::move(name);
    p.init_zero(1, cols);
  };
  auto gain = [](Parameter& p, std::string name, Eigen::Index cols) {
    p.name = std::move(name);
    p.init_zero(1, cols);
    p.value.setOnes();
  };

  weight(token_embedding_, "embeddings.token", spec_.vocab_size, h);
  weight(position_embedding_, "embeddings.position", spec_.max_positions, h);
  gain(emb_ln_g_, "embeddings.ln.gamma", h);
  bias(emb_ln_b_, "embeddings.ln.beta", h);

  blocks_.resize(static_cast<std::size_t>(spec_.n_blocks));
  for (int i = 0; i < spec_.n_blocks; ++i) {
    Block& b = blocks_[static_cast<std::size_t>(i)];
    const std::string p = "block." + std::to_string(i + 1) + ".";
    weight(b.wq, p + "attn.q.weight", h, h);
    bias(b.bq, p + "attn.q.bias", h);
    weight(b.wk, p + "attn.k.weight", h, h);
    bias(b.bk, p + "attn.k.bias", h);
    weight(b.wv, p + "attn.v.weight", h, h);
    bias(b.bv, p + "attn.v.bias", h);
    weight(b.wo, p + "attn.out.weight", h, h);
    bias(b.bo, p + "attn.out.bias", h);
    gain(b.ln1_g, p + "ln1.gamma", h);
    bias(b.ln1_b, p + "ln1.beta", h);
    weight(b.w1, p + "ffn.in.weight", h, f);
    bias(b.b1, p + "ffn.in.bias", f);
    weight(b.w2, p + "ffn.out.weight", f, h);
    bias(b.b2, p + "ffn.out.bias", h);
    gain(b.ln2_g, p + "ln2.gamma", h);
    bias(b.ln2_b, p + "ln2.beta", h);
  }
}

TokenizedText TinyEncoder::tokenize(std::string_view text, std::size_t max_len) const {
  const auto cap = std::min<std::size_t>(max_len, static_cast<std::size_t>(spec_.max_positions));
  return hash_tokenize(text, spec_.vocab_size, cap);
}

VectorXd TinyEncoder::forward(std::span<const int> ids, std::unique_ptr<ForwardCache>* cache_out) const {
  const auto t = static_cast<Eigen::Index>(ids.size());
  if (t < 1 || t > spec_.max_positions) throw Error(ErrorKind::input, "sequence length out of range");
  const Eigen::Index h = spec_.hidden_size;
  const Eigen::Index heads = spec_.n_heads;
  const Eigen::Index d = h / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  auto cache = std::make_unique<TinyCache>();
  cache->ids.assign(ids.begin(), ids.end());
  cache->hidden = h;

  MatrixXd e(t, h);
  for (Eigen::Index i = 0; i < t; ++i) {
    const int id = ids[static_cast<std::size_t>(i)];
    if (id < 0 || id >= spec_.vocab_size) throw Error(ErrorKind::input, "token id out of range");
    e.row(i) = token_embedding_.value.row(id) + position_embedding_.value.row(i);
  }
  MatrixXd x = layer_norm(e, emb_ln_g_, emb_ln_b_, cache->emb_ln);

  cache->blocks.resize(blocks_.size());
  for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
    const Block& b = blocks_[bi];
    BlockCache& c = cache->blocks[bi];
    c.x = x;
    c.q = affine(x, b.wq, b.bq);
    c.k = affine(x, b.wk, b.bk);
    c.v = affine(x, b.wv, b.bv);
    c.context.resize(t, h);
    c.attention.resize(static_cast<std::size_t>(heads));
    for (Eigen::Index hd = 0; hd < heads; ++hd) {
      MatrixXd s = c.q.middleCols(hd * d, d) * c.k.middleCols(hd * d, d).transpose() * scale;
      for (Eigen::Index r = 0; r < t; ++r) {
        const double m = s.row(r).maxCoeff();
        s.row(r) = (s.row(r).array() - m).exp();
        s.row(r) /= s.row(r).sum();
      }
      c.context.middleCols(hd * d, d) = s * c.v.middleCols(hd * d, d);
      c.attention[static_cast<std::size_t>(hd)] = std::move(s);
    }
    const MatrixXd attn_out = affine(c.context, b.wo, b.bo);
    c.y1 = layer_norm(x + attn_out, b.ln1_g, b.ln1_b, c.ln1);
    c.z = affine(c.y1, b.w1, b.b1);
    c.gz = c.z.unaryExpr([](double v) { return gelu(v); });
    const MatrixXd ffn_out = affine(c.gz, b.w2, b.b2);
    x = layer_norm(c.y1 + ffn_out, b.ln2_g, b.ln2_b, c.ln2);
  }

  VectorXd pooled = x.row(0).transpose();
  if (cache_out != nullptr) *cache_out = std::move(cache);
  return pooled;
}

void TinyEncoder::backward(const ForwardCache& base, const VectorXd& grad_pooled, int lowest_block) {
  const auto& cache = dynamic_cast<const TinyCache&>(base);
  const auto t = static_cast<Eigen::Index>(cache.ids.size());
  const Eigen::Index h = spec_.hidden_size;
  const Eigen::Index heads = spec_.n_heads;
  const Eigen::Index d = h / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  MatrixXd dx = MatrixXd::Zero(t, h);
  dx.row(0) = grad_pooled.transpose();

  for (int bi = static_cast<int>(blocks_.size()) - 1; bi >= 0; --bi) {
    const int block_no = bi + 1;
    if (block_no < lowest_block) return;
    Block& b = blocks_[static_cast<std::size_t>(bi)];
    const BlockCache& c = cache.blocks[static_cast<std::size_t>(bi)];

    const MatrixXd dr2 = layer_norm_backward(dx, c.ln2, b.ln2_g, b.ln2_b, true);
    MatrixXd dy1 = dr2;
    const MatrixXd dgz = affine_backward(dr2, c.gz, b.w2, b.b2, true);
    const MatrixXd dz = dgz.cwiseProduct(c.z.unaryExpr([](double v) { return gelu_grad(v); }));
    dy1 += affine_backward(dz, c.y1, b.w1, b.b1, true);

    const MatrixXd dr1 = layer_norm_backward(dy1, c.ln1, b.ln1_g, b.ln1_b, true);
    MatrixXd dblock_in = dr1;
    const MatrixXd dcontext = affine_backward(dr1, c.context, b.wo, b.bo, true);

    MatrixXd dq(t, h), dk(t, h), dv(t, h);
    for (Eigen::Index hd = 0; hd < heads; ++hd) {
      const MatrixXd& a = c.attention[static_cast<std::size_t>(hd)];
      const auto dc = dcontext.middleCols(hd * d, d);
      const MatrixXd da = dc * c.v.middleCols(hd * d, d).transpose();
      dv.middleCols(hd * d, d) = a.transpose() * dc;
      MatrixXd ds = a.cwiseProduct(da);
      const VectorXd row_dot = ds.rowwise().sum();
      ds -= a.cwiseProduct(row_dot.replicate(1, t));
      dq.middleCols(hd * d, d) = ds * c.k.middleCols(hd * d, d) * scale;
      dk.middleCols(hd * d, d) = ds.transpose() * c.q.middleCols(hd * d, d) * scale;
    }
    dblock_in += affine_backward(dq, c.x, b.wq, b.bq, true);
    dblock_in += affine_backward(dk, c.x, b.wk, b.bk, true);
    dblock_in += affine_backward(dv, c.x, b.wv, b.bv, true);
    dx = std::move(dblock_in);
  }

  if (lowest_block > 0) return;
  const MatrixXd de = layer_norm_backward(dx, cache.emb_ln, emb_ln_g_, emb_ln_b_, true);
  for (Eigen::Index i = 0; i < t; ++i) {
    token_embedding_.grad.row(cache.ids[static_cast<std::size_t>(i)]) += de.row(i);
    position_embedding_.grad.row(i) += de.row(i);
  }
}

std::vector<ParameterGroup> TinyEncoder::parameter_groups() {
  std::vector<ParameterGroup> groups;
  groups.push_back({"embeddings", {&token_embedding_, &position_embedding_, &emb_ln_g_, &emb_ln_b_}});
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    Block& b = blocks_[i];
    groups.push_back({"block." + std::to_string(i + 1),
                      {&b.wq, &b.bq, &b.wk, &b.bk, &b.wv, &b.bv, &b.wo, &b.bo, &b.ln1_g, &b.ln1_b,
                       &b.w1, &b.b1, &b.w2, &b.b2, &b.ln2_g, &b.ln2_b}});
  }
  return groups;
}

std::unique_ptr<Encoder> make_encoder(const EncoderSpec& spec, std::uint64_t seed) {
  spec.validate();
  if (spec.name == "tiny") return std::make_unique<TinyEncoder>(spec, seed);
  throw Error(ErrorKind::config, "no encoder adapter registered for '" + spec.name +
                                     "'; only the built-in 'tiny' encoder is available");
}

}  // namespace hrv
