#include "braindec/charlm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "braindec/common.hpp"
#include "json.hpp"

namespace braindec::charlm {

using linalg::Matrix;
using linalg::axpy;
using linalg::dot;

int ModelConfig::conv_feature_dim() const {
  int m = 0;
  for (int n : filters_per_width) m += n;
  return m;
}

void ModelConfig::validate() const {
  if (char_embed_dim <= 0 || max_word_len < 3 || lstm_hidden_dim <= 0)
    throw ValidationError("model config: dimensions must be positive (max_word_len >= 3)");
  if (filter_widths.empty() || filter_widths.size() != filters_per_width.size())
    throw ValidationError("model config: filter_widths and filters_per_width must be non-empty "
                          "lists of equal length");
  for (std::size_t i = 0; i < filter_widths.size(); ++i) {
    if (filter_widths[i] <= 0 || filters_per_width[i] <= 0)
      throw ValidationError("model config: filter widths and counts must be positive");
    if (filter_widths[i] > max_word_len)
      throw ValidationError("model config: filter width " + std::to_string(filter_widths[i]) +
                            " exceeds max_word_len " + std::to_string(max_word_len));
  }
  if (highway_layers < 0) throw ValidationError("model config: negative highway_layers");
  if (word_vocab_size <= 0 || char_vocab_size <= 0)
    throw ValidationError("model config: vocabulary sizes must be set");
}

void TrainConfig::validate() const {
  if (epochs < 0 || batch_size <= 0 || sequence_length <= 0 || initial_lr <= 0 ||
      decay_rate < 0 || gradient_clip <= 0)
    throw ValidationError("train config: all fields must be positive (epochs may be 0)");
}

int CharVocab::id_of(char c) const {
  const auto at = chars.find(c);
  return at == std::string::npos ? kUnk : 4 + static_cast<int>(at);
}

CharVocab CharVocab::build(std::span<const std::string> tokens) {
  std::array<bool, 256> seen{};
  for (const auto& t : tokens)
    for (char c : t) seen[static_cast<unsigned char>(c)] = true;
  CharVocab v;
  for (int c = 0; c < 256; ++c)
    if (seen[c]) v.chars.push_back(static_cast<char>(c));
  return v;
}

namespace {

std::string fnv1a_hex(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

std::string CharVocab::hash() const { return fnv1a_hex(chars); }

int WordVocab::id_of(const std::string& w) const {
  const auto it = to_id.find(w);
  return it == to_id.end() ? kUnk : it->second;
}

WordVocab WordVocab::build(std::span<const std::string> tokens) {
  std::map<std::string, long> counts;
  for (const auto& t : tokens)
    if (t != "<unk>" && t != "<eos>") ++counts[t];
  std::vector<std::pair<std::string, long>> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  WordVocab v;
  v.words = {"<unk>", "<eos>"};
  for (auto& [w, n] : sorted) v.words.push_back(w);
  for (int i = 0; i < static_cast<int>(v.words.size()); ++i) v.to_id[v.words[i]] = i;
  return v;
}

std::string WordVocab::hash() const {
  std::string joined;
  for (const auto& w : words) {
    joined += w;
    joined += '\x1f';
  }
  return fnv1a_hex(joined);
}

TokenizedCorpus build_corpus(const std::vector<std::string>& lines) {
  TokenizedCorpus c;
  for (const auto& line : lines) {
    std::istringstream ls(line);
    std::string tok;
    bool any = false;
    while (ls >> tok) {
      c.tokens.push_back(tok);
      any = true;
    }
    if (any) c.tokens.push_back("<eos>");
  }
  if (c.tokens.empty()) throw ValidationError("corpus is empty");
  std::vector<std::string> scan = c.tokens;
  scan.push_back("<unk>");  // special surfaces must be encodable
  c.char_vocab = CharVocab::build(scan);
  c.word_vocab = WordVocab::build(c.tokens);
  c.token_ids.reserve(c.tokens.size());
  for (const auto& t : c.tokens) c.token_ids.push_back(c.word_vocab.id_of(t));
  return c;
}

TokenizedCorpus load_text_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open corpus '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return build_corpus(lines);
}

const std::array<std::string, 5>& layer_names() {
  static const std::array<std::string, 5> names = {"Embedding", "Conv", "LSTM1", "LSTM2",
                                                   "LSTM3"};
  return names;
}

int layer_dim(const ModelConfig& cfg, const std::string& layer) {
  if (layer == "Embedding") return cfg.embedding_feature_dim();
  if (layer == "Conv") return cfg.conv_feature_dim();
  if (layer == "LSTM1" || layer == "LSTM2" || layer == "LSTM3") return cfg.lstm_hidden_dim;
  throw ValidationError("unknown layer '" + layer + "'");
}

const std::vector<double>& LayerActivations::by_name(const std::string& layer) const {
  if (layer == "Embedding") return embedding;
  if (layer == "Conv") return conv;
  if (layer == "LSTM1") return lstm1;
  if (layer == "LSTM2") return lstm2;
  if (layer == "LSTM3") return lstm3;
  throw ValidationError("unknown layer '" + layer + "'");
}

ModelWeights ModelWeights::zeros(const ModelConfig& cfg, const CharVocab& cv,
                                 const WordVocab& wv) {
  ModelConfig c = cfg;
  c.char_vocab_size = cv.size();
  c.word_vocab_size = wv.size();
  c.validate();

  ModelWeights w;
  w.config = c;
  w.char_vocab = cv;
  w.word_vocab = wv;
  w.char_embedding = Matrix(c.char_vocab_size, c.char_embed_dim);
  const int m = c.conv_feature_dim();
  for (std::size_t i = 0; i < c.filter_widths.size(); ++i) {
    w.conv_kernel.emplace_back(c.filters_per_width[i], c.filter_widths[i] * c.char_embed_dim);
    w.conv_bias.emplace_back(c.filters_per_width[i], 0.0);
  }
  for (int l = 0; l < c.highway_layers; ++l) {
    w.hw_gate_w.emplace_back(m, m);
    w.hw_transform_w.emplace_back(m, m);
    w.hw_gate_b.emplace_back(m, 0.0);
    w.hw_transform_b.emplace_back(m, 0.0);
  }
  const int h = c.lstm_hidden_dim;
  for (int l = 0; l < 3; ++l) {
    const int in = l == 0 ? m : h;
    w.lstm[l].w = Matrix(4 * h, in);
    w.lstm[l].u = Matrix(4 * h, h);
    w.lstm[l].b.assign(4 * h, 0.0);
  }
  w.out_w = Matrix(c.word_vocab_size, h);
  w.out_b.assign(c.word_vocab_size, 0.0);
  return w;
}

std::vector<ParamBlock> param_blocks(ModelWeights& w) {
  std::vector<ParamBlock> blocks;
  const int e = w.config.char_embed_dim;
  // Skip the pad row: it is defined to be zero.
  blocks.push_back({"char_embedding", w.char_embedding.row(1),
                    static_cast<std::size_t>((w.config.char_vocab_size - 1) * e)});
  for (std::size_t i = 0; i < w.conv_kernel.size(); ++i) {
    const std::string tag = std::to_string(w.config.filter_widths[i]);
    blocks.push_back({"conv_kernel_w" + tag, w.conv_kernel[i].data(), w.conv_kernel[i].size()});
    blocks.push_back({"conv_bias_w" + tag, w.conv_bias[i].data(), w.conv_bias[i].size()});
  }
  for (std::size_t l = 0; l < w.hw_gate_w.size(); ++l) {
    const std::string tag = std::to_string(l + 1);
    blocks.push_back({"highway" + tag + "_gate_w", w.hw_gate_w[l].data(), w.hw_gate_w[l].size()});
    blocks.push_back({"highway" + tag + "_gate_b", w.hw_gate_b[l].data(), w.hw_gate_b[l].size()});
    blocks.push_back(
        {"highway" + tag + "_transform_w", w.hw_transform_w[l].data(), w.hw_transform_w[l].size()});
    blocks.push_back(
        {"highway" + tag + "_transform_b", w.hw_transform_b[l].data(), w.hw_transform_b[l].size()});
  }
  for (int l = 0; l < 3; ++l) {
    const std::string tag = std::to_string(l + 1);
    blocks.push_back({"lstm" + tag + "_w", w.lstm[l].w.data(), w.lstm[l].w.size()});
    blocks.push_back({"lstm" + tag + "_u", w.lstm[l].u.data(), w.lstm[l].u.size()});
    blocks.push_back({"lstm" + tag + "_b", w.lstm[l].b.data(), w.lstm[l].b.size()});
  }
  blocks.push_back({"out_w", w.out_w.data(), w.out_w.size()});
  blocks.push_back({"out_b", w.out_b.data(), w.out_b.size()});
  return blocks;
}

ModelWeights ModelWeights::init(const ModelConfig& cfg, const CharVocab& cv, const WordVocab& wv,
                                std::uint64_t seed) {
  ModelWeights w = zeros(cfg, cv, wv);
  std::mt19937_64 rng(mix_seed(seed, 0x696e6974ull));

  auto fill_uniform = [&rng](double* data, std::size_t n, double r) {
    std::uniform_real_distribution<double> u(-r, r);
    for (std::size_t i = 0; i < n; ++i) data[i] = u(rng);
  };

  const int e = w.config.char_embed_dim;
  const int m = w.config.conv_feature_dim();
  const int h = w.config.lstm_hidden_dim;

  // Variance-preserving fan-in scaling keeps the context signal alive through
  // the conv/highway/LSTM stack even at desk-scale model sizes.
  auto xavier = [](int fan_in) { return std::sqrt(3.0 / static_cast<double>(fan_in)); };

  fill_uniform(w.char_embedding.row(1), (w.config.char_vocab_size - 1) * e, 0.5);
  for (std::size_t i = 0; i < w.conv_kernel.size(); ++i)
    fill_uniform(w.conv_kernel[i].data(), w.conv_kernel[i].size(),
                 xavier(w.config.filter_widths[i] * e));
  for (std::size_t l = 0; l < w.hw_gate_w.size(); ++l) {
    fill_uniform(w.hw_gate_w[l].data(), w.hw_gate_w[l].size(), xavier(m));
    fill_uniform(w.hw_transform_w[l].data(), w.hw_transform_w[l].size(), xavier(m));
    // Gate bias starts negative so the carry path dominates early training.
    std::fill(w.hw_gate_b[l].begin(), w.hw_gate_b[l].end(), -1.0);
  }
  for (int l = 0; l < 3; ++l) {
    const int in = l == 0 ? m : h;
    fill_uniform(w.lstm[l].w.data(), w.lstm[l].w.size(), xavier(in));
    fill_uniform(w.lstm[l].u.data(), w.lstm[l].u.size(), xavier(h));
    // Forget-gate bias +1.
    std::fill(w.lstm[l].b.begin() + h, w.lstm[l].b.begin() + 2 * h, 1.0);
  }
  fill_uniform(w.out_w.data(), w.out_w.size(), xavier(h));
  return w;
}

LstmState LstmState::zero(const ModelConfig& cfg) {
  LstmState s;
  for (int l = 0; l < 3; ++l) {
    s.h[l].assign(cfg.lstm_hidden_dim, 0.0);
    s.c[l].assign(cfg.lstm_hidden_dim, 0.0);
  }
  return s;
}

std::vector<int> encode_word_chars(const std::string& surface, const CharVocab& vocab,
                                   int max_word_len) {
  std::vector<int> ids(max_word_len, CharVocab::kPad);
  ids[0] = CharVocab::kBow;
  const std::size_t n = std::min(surface.size(), static_cast<std::size_t>(max_word_len - 2));
  for (std::size_t i = 0; i < n; ++i) ids[1 + i] = vocab.id_of(surface[i]);
  ids[1 + n] = CharVocab::kEow;
  return ids;
}

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y = W x + b
void matvec(const Matrix& w, const double* x, const double* b, double* y) {
  for (std::size_t r = 0; r < w.rows(); ++r) y[r] = dot(w.row(r), x, w.cols()) + (b ? b[r] : 0.0);
}

// out += W^T d
void matvec_t_accum(const Matrix& w, const double* d, double* out) {
  for (std::size_t r = 0; r < w.rows(); ++r) axpy(out, d[r], w.row(r), w.cols());
}

// dw += d (outer) x
void outer_accum(Matrix& dw, const double* d, const double* x) {
  for (std::size_t r = 0; r < dw.rows(); ++r)
    if (d[r] != 0.0) axpy(dw.row(r), d[r], x, dw.cols());
}

struct HwCache {
  std::vector<double> in, t, g, out;
};

struct LstmCache {
  std::vector<double> x, i, f, g, o, c_prev, c, tanh_c, h_prev, h;
};

struct StepCache {
  std::vector<int> char_ids;
  Matrix emb;                   // max_word_len x e
  std::vector<double> pooled;   // conv features (tanh at the max pre-activation)
  std::vector<int> argmax;      // winning window position per filter
  std::vector<HwCache> hw;
  std::array<LstmCache, 3> lstm;
  std::vector<double> log_probs;
  std::vector<double> probs;
};

void forward_step(const ModelWeights& w, LstmState& state, const std::string& surface,
                  StepCache& cache, bool want_probs) {
  const ModelConfig& cfg = w.config;
  const int e = cfg.char_embed_dim;
  const int len = cfg.max_word_len;
  const int m = cfg.conv_feature_dim();
  const int h = cfg.lstm_hidden_dim;

  cache.char_ids = encode_word_chars(surface, w.char_vocab, len);
  cache.emb = Matrix(len, e);
  for (int t = 0; t < len; ++t) {
    const int id = cache.char_ids[t];
    if (id != CharVocab::kPad)
      std::copy(w.char_embedding.row(id), w.char_embedding.row(id) + e, cache.emb.row(t));
  }

  cache.pooled.assign(m, 0.0);
  cache.argmax.assign(m, 0);
  int off = 0;
  for (std::size_t wi = 0; wi < cfg.filter_widths.size(); ++wi) {
    const int width = cfg.filter_widths[wi];
    const int nf = cfg.filters_per_width[wi];
    const int patch = width * e;
    const int n_pos = len - width + 1;
    for (int f = 0; f < nf; ++f) {
      const double* kernel = w.conv_kernel[wi].row(f);
      double best = -std::numeric_limits<double>::infinity();
      int best_j = 0;
      for (int j = 0; j < n_pos; ++j) {
        // Rows j..j+width-1 of the embedding matrix are contiguous.
        const double pre = dot(kernel, cache.emb.row(j), patch) + w.conv_bias[wi][f];
        if (pre > best) {
          best = pre;
          best_j = j;
        }
      }
      cache.pooled[off + f] = std::tanh(best);
      cache.argmax[off + f] = best_j;
    }
    off += nf;
  }

  cache.hw.assign(cfg.highway_layers, HwCache{});
  const std::vector<double>* cur = &cache.pooled;
  for (int l = 0; l < cfg.highway_layers; ++l) {
    HwCache& hc = cache.hw[l];
    hc.in = *cur;
    hc.t.resize(m);
    hc.g.resize(m);
    hc.out.resize(m);
    matvec(w.hw_gate_w[l], hc.in.data(), w.hw_gate_b[l].data(), hc.t.data());
    matvec(w.hw_transform_w[l], hc.in.data(), w.hw_transform_b[l].data(), hc.g.data());
    for (int i = 0; i < m; ++i) {
      hc.t[i] = sigmoid(hc.t[i]);
      hc.g[i] = std::tanh(hc.g[i]);
      hc.out[i] = hc.t[i] * hc.g[i] + (1.0 - hc.t[i]) * hc.in[i];
    }
    cur = &hc.out;
  }

  for (int l = 0; l < 3; ++l) {
    LstmCache& lc = cache.lstm[l];
    lc.x = l == 0 ? *cur : cache.lstm[l - 1].h;
    lc.h_prev = state.h[l];
    lc.c_prev = state.c[l];
    std::vector<double> pre(4 * h);
    matvec(w.lstm[l].w, lc.x.data(), w.lstm[l].b.data(), pre.data());
    for (std::size_t r = 0; r < w.lstm[l].u.rows(); ++r)
      pre[r] += dot(w.lstm[l].u.row(r), lc.h_prev.data(), h);
    lc.i.resize(h);
    lc.f.resize(h);
    lc.g.resize(h);
    lc.o.resize(h);
    lc.c.resize(h);
    lc.tanh_c.resize(h);
    lc.h.resize(h);
    for (int i = 0; i < h; ++i) {
      lc.i[i] = sigmoid(pre[i]);
      lc.f[i] = sigmoid(pre[h + i]);
      lc.g[i] = std::tanh(pre[2 * h + i]);
      lc.o[i] = sigmoid(pre[3 * h + i]);
      lc.c[i] = lc.f[i] * lc.c_prev[i] + lc.i[i] * lc.g[i];
      lc.tanh_c[i] = std::tanh(lc.c[i]);
      lc.h[i] = lc.o[i] * lc.tanh_c[i];
      if (!std::isfinite(lc.h[i]))
        throw ComputeError("forward_word: non-finite activation in LSTM layer " +
                           std::to_string(l + 1));
    }
    state.h[l] = lc.h;
    state.c[l] = lc.c;
  }

  std::vector<double> logits(cfg.word_vocab_size);
  matvec(w.out_w, cache.lstm[2].h.data(), w.out_b.data(), logits.data());
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  if (!std::isfinite(mx)) throw ComputeError("forward_word: non-finite logits");
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  const double log_z = std::log(z) + mx;
  cache.log_probs.resize(cfg.word_vocab_size);
  for (int i = 0; i < cfg.word_vocab_size; ++i) cache.log_probs[i] = logits[i] - log_z;
  if (want_probs) {
    cache.probs.resize(cfg.word_vocab_size);
    for (int i = 0; i < cfg.word_vocab_size; ++i) cache.probs[i] = std::exp(cache.log_probs[i]);
  }
}

LayerActivations activations_from_cache(const ModelConfig& cfg, const StepCache& c) {
  LayerActivations a;
  a.embedding.assign(c.emb.data(), c.emb.data() + c.emb.size());
  a.conv = c.pooled;
  a.lstm1 = c.lstm[0].h;
  a.lstm2 = c.lstm[1].h;
  a.lstm3 = c.lstm[2].h;
  (void)cfg;
  return a;
}

// Accumulates gradients for one word step; carries flow to the previous step.
void backward_step(const ModelWeights& w, const StepCache& cache,
                   const std::vector<double>& dlogits, ModelWeights& grads,
                   std::array<std::vector<double>, 3>& dh_carry,
                   std::array<std::vector<double>, 3>& dc_carry) {
  const ModelConfig& cfg = w.config;
  const int e = cfg.char_embed_dim;
  const int m = cfg.conv_feature_dim();
  const int h = cfg.lstm_hidden_dim;

  outer_accum(grads.out_w, dlogits.data(), cache.lstm[2].h.data());
  for (std::size_t i = 0; i < dlogits.size(); ++i) grads.out_b[i] += dlogits[i];

  std::vector<double> dh(h, 0.0);
  matvec_t_accum(w.out_w, dlogits.data(), dh.data());

  std::vector<double> dx;
  for (int l = 2; l >= 0; --l) {
    const LstmCache& lc = cache.lstm[l];
    if (l < 2) dh = dx;  // input grad of the layer above
    for (int i = 0; i < h; ++i) dh[i] += dh_carry[l][i];

    std::vector<double> dpre(4 * h);
    for (int i = 0; i < h; ++i) {
      const double do_ = dh[i] * lc.tanh_c[i];
      double dc = dh[i] * lc.o[i] * (1.0 - lc.tanh_c[i] * lc.tanh_c[i]) + dc_carry[l][i];
      const double df = dc * lc.c_prev[i];
      const double di = dc * lc.g[i];
      const double dg = dc * lc.i[i];
      dpre[i] = di * lc.i[i] * (1.0 - lc.i[i]);
      dpre[h + i] = df * lc.f[i] * (1.0 - lc.f[i]);
      dpre[2 * h + i] = dg * (1.0 - lc.g[i] * lc.g[i]);
      dpre[3 * h + i] = do_ * lc.o[i] * (1.0 - lc.o[i]);
      dc_carry[l][i] = dc * lc.f[i];
    }
    outer_accum(grads.lstm[l].w, dpre.data(), lc.x.data());
    outer_accum(grads.lstm[l].u, dpre.data(), lc.h_prev.data());
    for (int i = 0; i < 4 * h; ++i) grads.lstm[l].b[i] += dpre[i];

    dx.assign(lc.x.size(), 0.0);
    matvec_t_accum(w.lstm[l].w, dpre.data(), dx.data());
    std::fill(dh_carry[l].begin(), dh_carry[l].end(), 0.0);
    matvec_t_accum(w.lstm[l].u, dpre.data(), dh_carry[l].data());
  }

  std::vector<double> dz = dx;  // gradient at the highway output
  for (int l = cfg.highway_layers - 1; l >= 0; --l) {
    const HwCache& hc = cache.hw[l];
    std::vector<double> dpre_t(m), dpre_g(m), dy(m);
    for (int i = 0; i < m; ++i) {
      const double dt = dz[i] * (hc.g[i] - hc.in[i]);
      const double dg = dz[i] * hc.t[i];
      dpre_t[i] = dt * hc.t[i] * (1.0 - hc.t[i]);
      dpre_g[i] = dg * (1.0 - hc.g[i] * hc.g[i]);
      dy[i] = dz[i] * (1.0 - hc.t[i]);
    }
    outer_accum(grads.hw_gate_w[l], dpre_t.data(), hc.in.data());
    outer_accum(grads.hw_transform_w[l], dpre_g.data(), hc.in.data());
    for (int i = 0; i < m; ++i) {
      grads.hw_gate_b[l][i] += dpre_t[i];
      grads.hw_transform_b[l][i] += dpre_g[i];
    }
    matvec_t_accum(w.hw_gate_w[l], dpre_t.data(), dy.data());
    matvec_t_accum(w.hw_transform_w[l], dpre_g.data(), dy.data());
    dz = std::move(dy);
  }

  // Conv and embeddings.
  Matrix demb(cfg.max_word_len, e);
  int off = 0;
  for (std::size_t wi = 0; wi < cfg.filter_widths.size(); ++wi) {
    const int width = cfg.filter_widths[wi];
    const int nf = cfg.filters_per_width[wi];
    const int patch = width * e;
    for (int f = 0; f < nf; ++f) {
      const double pooled = cache.pooled[off + f];
      const double dpre = dz[off + f] * (1.0 - pooled * pooled);
      if (dpre == 0.0) continue;
      const int j = cache.argmax[off + f];
      axpy(grads.conv_kernel[wi].row(f), dpre, cache.emb.row(j), patch);
      grads.conv_bias[wi][f] += dpre;
      axpy(demb.row(j), dpre, w.conv_kernel[wi].row(f), patch);
    }
    off += nf;
  }
  for (int t = 0; t < cfg.max_word_len; ++t) {
    const int id = cache.char_ids[t];
    if (id != CharVocab::kPad) axpy(grads.char_embedding.row(id), 1.0, demb.row(t), e);
  }
}

double grad_global_norm(ModelWeights& grads) {
  double sq = 0.0;
  for (const auto& b : param_blocks(grads))
    for (std::size_t i = 0; i < b.size; ++i) sq += b.data[i] * b.data[i];
  return std::sqrt(sq);
}

}  // namespace

ForwardResult forward_word(const ModelWeights& weights, const LstmState& state,
                           const std::string& surface) {
  StepCache cache;
  LstmState next = state;
  forward_step(weights, next, surface, cache, false);
  ForwardResult r;
  r.activations = activations_from_cache(weights.config, cache);
  r.log_probs = std::move(cache.log_probs);
  r.state = std::move(next);
  return r;
}

std::vector<LayerActivations> extract_representations(const ModelWeights& weights,
                                                      const stimuli::StimulusSentence& sentence) {
  std::vector<LayerActivations> out;
  LstmState state = LstmState::zero(weights.config);
  StepCache cache;
  for (const auto& word : sentence.words) {
    forward_step(weights, state, word.surface, cache, false);
    if (!word.is_function_word()) out.push_back(activations_from_cache(weights.config, cache));
  }
  return out;
}

std::vector<LayerActivations> extract_layer_sequence(const ModelWeights& weights,
                                                     std::span<const std::string> tokens) {
  std::vector<LayerActivations> out;
  LstmState state = LstmState::zero(weights.config);
  StepCache cache;
  for (const auto& tok : tokens) {
    forward_step(weights, state, tok, cache, false);
    out.push_back(activations_from_cache(weights.config, cache));
  }
  return out;
}

TrainResult train(const ModelConfig& cfg, const TrainConfig& tcfg, const TokenizedCorpus& corpus) {
  tcfg.validate();
  if (corpus.tokens.empty()) throw ValidationError("train: empty corpus");

  TrainResult result;
  result.weights = ModelWeights::init(cfg, corpus.char_vocab, corpus.word_vocab, tcfg.seed);
  ModelWeights& w = result.weights;

  const long total = static_cast<long>(corpus.tokens.size());
  // Keep every stream long enough for at least one full BPTT window.
  const long max_streams = std::max(1L, total / (tcfg.sequence_length + 1));
  const int batches = static_cast<int>(std::max(1L, std::min<long>(tcfg.batch_size, max_streams)));
  const long chunk_len = total / batches;
  if (chunk_len < 2) throw ValidationError("train: corpus too small for one prediction");

  ModelWeights grads = ModelWeights::zeros(w.config, w.char_vocab, w.word_vocab);
  auto wblocks = param_blocks(w);
  auto gblocks = param_blocks(grads);

  std::vector<LstmState> states(batches, LstmState::zero(w.config));
  std::vector<StepCache> caches(tcfg.sequence_length);

  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    const double lr = tcfg.initial_lr / (1.0 + tcfg.decay_rate * epoch);
    for (auto& s : states) s = LstmState::zero(w.config);

    double epoch_ce = 0.0;
    long epoch_positions = 0;
    int batch_no = 0;
    for (long w0 = 0; w0 + 1 < chunk_len; w0 += tcfg.sequence_length, ++batch_no) {
      const int tau = static_cast<int>(std::min<long>(tcfg.sequence_length, chunk_len - 1 - w0));
      const long n_positions = static_cast<long>(tau) * batches;

      for (auto& b : gblocks) std::fill(b.data, b.data + b.size, 0.0);
      double window_ce = 0.0;

      for (int b = 0; b < batches; ++b) {
        const long base = static_cast<long>(b) * chunk_len + w0;
        for (int t = 0; t < tau; ++t)
          forward_step(w, states[b], corpus.tokens[base + t], caches[t], true);

        std::array<std::vector<double>, 3> dh_carry, dc_carry;
        for (int l = 0; l < 3; ++l) {
          dh_carry[l].assign(w.config.lstm_hidden_dim, 0.0);
          dc_carry[l].assign(w.config.lstm_hidden_dim, 0.0);
        }
        for (int t = tau - 1; t >= 0; --t) {
          const int target = corpus.token_ids[base + t + 1];
          window_ce -= std::log(std::max(caches[t].probs[target], 1e-300));
          std::vector<double> dlogits = caches[t].probs;
          dlogits[target] -= 1.0;
          const double scale = 1.0 / static_cast<double>(n_positions);
          for (double& v : dlogits) v *= scale;
          backward_step(w, caches[t], dlogits, grads, dh_carry, dc_carry);
        }
      }

      const double loss = window_ce / static_cast<double>(n_positions);
      if (!std::isfinite(loss))
        throw ComputeError("train: divergence (non-finite loss) at epoch " +
                           std::to_string(epoch) + " batch " + std::to_string(batch_no));

      const double norm = grad_global_norm(grads);
      const double scale = norm > tcfg.gradient_clip ? tcfg.gradient_clip / norm : 1.0;
      for (std::size_t i = 0; i < wblocks.size(); ++i)
        axpy(wblocks[i].data, -lr * scale, gblocks[i].data, wblocks[i].size);

      epoch_ce += window_ce;
      epoch_positions += n_positions;
    }
    result.loss_curve.push_back(epoch_ce / static_cast<double>(epoch_positions));
  }
  return result;
}

double perplexity(const ModelWeights& weights, std::span<const std::string> inputs,
                  std::span<const std::string> targets) {
  if (inputs.empty()) throw ValidationError("perplexity: empty sequence");
  if (inputs.size() != targets.size())
    throw ValidationError("perplexity: inputs and targets must have equal length");

  LstmState state = LstmState::zero(weights.config);
  StepCache cache;
  double nll = 0.0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    forward_step(weights, state, inputs[t], cache, false);
    nll -= cache.log_probs[weights.word_vocab.id_of(targets[t])];
  }
  return std::exp(nll / static_cast<double>(inputs.size()));
}

namespace {

// Mean next-token cross-entropy over a batch of token sequences, with the
// analytic gradients when grads != nullptr.
double batch_loss(const ModelWeights& w, const std::vector<std::vector<std::string>>& sequences,
                  ModelWeights* grads) {
  long n_positions = 0;
  for (const auto& seq : sequences) n_positions += static_cast<long>(seq.size()) - 1;
  if (n_positions <= 0) throw ValidationError("gradient_check: sequences need >= 2 tokens");

  double ce = 0.0;
  for (const auto& seq : sequences) {
    const int tau = static_cast<int>(seq.size()) - 1;
    LstmState state = LstmState::zero(w.config);
    std::vector<StepCache> caches(tau);
    for (int t = 0; t < tau; ++t) forward_step(w, state, seq[t], caches[t], true);

    if (grads) {
      std::array<std::vector<double>, 3> dh_carry, dc_carry;
      for (int l = 0; l < 3; ++l) {
        dh_carry[l].assign(w.config.lstm_hidden_dim, 0.0);
        dc_carry[l].assign(w.config.lstm_hidden_dim, 0.0);
      }
      for (int t = tau - 1; t >= 0; --t) {
        const int target = w.word_vocab.id_of(seq[t + 1]);
        ce -= std::log(std::max(caches[t].probs[target], 1e-300));
        std::vector<double> dlogits = caches[t].probs;
        dlogits[target] -= 1.0;
        for (double& v : dlogits) v /= static_cast<double>(n_positions);
        backward_step(w, caches[t], dlogits, *grads, dh_carry, dc_carry);
      }
    } else {
      for (int t = 0; t < tau; ++t)
        ce -= std::log(std::max(caches[t].probs[w.word_vocab.id_of(seq[t + 1])], 1e-300));
    }
  }
  return ce / static_cast<double>(n_positions);
}

}  // namespace

GradientCheckResult gradient_check(const ModelWeights& weights,
                                   const std::vector<std::vector<std::string>>& sequences,
                                   int min_samples, std::uint64_t seed) {
  ModelWeights work = weights;  // mutable copy for finite differences
  ModelWeights grads = ModelWeights::zeros(work.config, work.char_vocab, work.word_vocab);
  batch_loss(work, sequences, &grads);

  auto wblocks = param_blocks(work);
  auto gblocks = param_blocks(grads);

  GradientCheckResult res;
  res.grad_norm = grad_global_norm(grads);

  std::mt19937_64 rng(mix_seed(seed, 0x67636865636bull));
  const double step = 1e-5;
  const int per_block =
      std::max(1, (min_samples + static_cast<int>(wblocks.size()) - 1) /
                      static_cast<int>(wblocks.size()));

  for (std::size_t bi = 0; bi < wblocks.size(); ++bi) {
    const std::size_t n = wblocks[bi].size;
    const int samples = static_cast<int>(std::min<std::size_t>(per_block, n));
    for (int s = 0; s < samples; ++s) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      const std::size_t idx = pick(rng);
      double* p = wblocks[bi].data + idx;
      const double saved = *p;
      *p = saved + step;
      const double up = batch_loss(work, sequences, nullptr);
      *p = saved - step;
      const double down = batch_loss(work, sequences, nullptr);
      *p = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = gblocks[bi].data[idx];
      const double rel =
          std::abs(analytic - numeric) / std::max(1e-6, std::abs(analytic) + std::abs(numeric));
      res.max_rel_error = std::max(res.max_rel_error, rel);
      ++res.n_checked;
    }
  }
  return res;
}

namespace {

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"char_embed_dim", c.char_embed_dim},
          {"max_word_len", c.max_word_len},
          {"filter_widths", c.filter_widths},
          {"filters_per_width", c.filters_per_width},
          {"highway_layers", c.highway_layers},
          {"lstm_hidden_dim", c.lstm_hidden_dim},
          {"word_vocab_size", c.word_vocab_size},
          {"char_vocab_size", c.char_vocab_size}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.char_embed_dim = j.at("char_embed_dim").get<int>();
  c.max_word_len = j.at("max_word_len").get<int>();
  c.filter_widths = j.at("filter_widths").get<std::vector<int>>();
  c.filters_per_width = j.at("filters_per_width").get<std::vector<int>>();
  c.highway_layers = j.at("highway_layers").get<int>();
  c.lstm_hidden_dim = j.at("lstm_hidden_dim").get<int>();
  c.word_vocab_size = j.at("word_vocab_size").get<int>();
  c.char_vocab_size = j.at("char_vocab_size").get<int>();
  return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelWeights& weights) {
  ModelWeights& w = const_cast<ModelWeights&>(weights);
  auto blocks = param_blocks(w);

  nlohmann::json header;
  header["format"] = "braindec-lm";
  header["version"] = 1;
  header["config"] = config_to_json(w.config);
  header["char_vocab"] = w.char_vocab.chars;
  header["word_vocab"] = w.word_vocab.words;
  header["char_vocab_hash"] = w.char_vocab.hash();
  header["word_vocab_hash"] = w.word_vocab.hash();
  nlohmann::json jb = nlohmann::json::array();
  for (const auto& b : blocks) jb.push_back({{"name", b.name}, {"size", b.size}});
  header["blocks"] = std::move(jb);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write checkpoint '" + path + "'");
  out << header.dump() << "\n";
  for (const auto& b : blocks)
    out.write(reinterpret_cast<const char*>(b.data),
              static_cast<std::streamsize>(b.size * sizeof(double)));
  if (!out) throw ComputeError("checkpoint write failed for '" + path + "'");
}

ModelWeights load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("checkpoint '" + path + "': missing header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("checkpoint '" + path + "': corrupt header: " + e.what());
  }
  if (header.value("format", "") != "braindec-lm" || header.value("version", 0) != 1)
    throw ValidationError("checkpoint '" + path + "': unsupported format/version");

  CharVocab cv;
  cv.chars = header.at("char_vocab").get<std::string>();
  WordVocab wv;
  wv.words = header.at("word_vocab").get<std::vector<std::string>>();
  for (int i = 0; i < static_cast<int>(wv.words.size()); ++i) wv.to_id[wv.words[i]] = i;

  if (cv.hash() != header.at("char_vocab_hash").get<std::string>())
    throw ValidationError("checkpoint '" + path + "': character vocabulary mismatch (hash)");
  if (wv.hash() != header.at("word_vocab_hash").get<std::string>())
    throw ValidationError("checkpoint '" + path + "': word vocabulary mismatch (hash)");

  const ModelConfig cfg = config_from_json(header.at("config"));
  if (cfg.char_vocab_size != cv.size() || cfg.word_vocab_size != wv.size())
    throw ValidationError("checkpoint '" + path + "': vocabulary size mismatch with config");

  ModelWeights w = ModelWeights::zeros(cfg, cv, wv);
  auto blocks = param_blocks(w);
  const auto& jb = header.at("blocks");
  if (jb.size() != blocks.size())
    throw ValidationError("checkpoint '" + path + "': block table mismatch");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (jb[i].at("name").get<std::string>() != blocks[i].name ||
        jb[i].at("size").get<std::size_t>() != blocks[i].size)
      throw ValidationError("checkpoint '" + path + "': shape mismatch in block '" +
                            blocks[i].name + "'");
    in.read(reinterpret_cast<char*>(blocks[i].data),
            static_cast<std::streamsize>(blocks[i].size * sizeof(double)));
    if (!in)
      throw ValidationError("checkpoint '" + path + "': truncated weight data in block '" +
                            blocks[i].name + "'");
  }
  char extra;
  if (in.read(&extra, 1))
    throw ValidationError("checkpoint '" + path + "': trailing bytes after weight data");
  for (const auto& b : blocks)
    for (std::size_t i = 0; i < b.size; ++i)
      if (!std::isfinite(b.data[i]))
        throw ValidationError("checkpoint '" + path + "': non-finite weight in block '" + b.name +
                              "'");
  return w;
}

}  // namespace braindec::charlm
