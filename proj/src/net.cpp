#include "ido/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "ido/errors.hpp"
#include "ido/rng.hpp"

namespace ido {

size_t Model::param_count() const {
  size_t n = 0;
  for (const auto& l : layers) n += l.w.size() + l.b.size();
  return n;
}

bool Model::finite() const {
  for (const auto& l : layers) {
    for (double v : l.w)
      if (!std::isfinite(v)) return false;
    for (double v : l.b)
      if (!std::isfinite(v)) return false;
  }
  return true;
}

Model init_model(const std::vector<int>& dims, uint64_t seed) {
  if (dims.size() < 2) throw std::invalid_argument("init_model: need at least input and output dims");
  for (int d : dims)
    if (d < 1) throw std::invalid_argument("init_model: layer widths must be positive");

  Model m;
  m.dims = dims;
  Rng rng(seed);
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    Model::Layer layer;
    layer.in = dims[l];
    layer.out = dims[l + 1];
    layer.w.resize(static_cast<size_t>(layer.in) * layer.out);
    layer.b.assign(layer.out, 0.0);
    const double bound = std::sqrt(6.0 / layer.in);
    for (auto& v : layer.w) v = rng.uniform(-bound, bound);
    m.layers.push_back(std::move(layer));
  }
  return m;
}

void forward(const Model& m, std::span<const double> x, Workspace& ws) {
  if (static_cast<int>(x.size()) != m.input_dim())
    throw std::invalid_argument("forward: feature width does not match input dim");
  ws.act.resize(m.layers.size() + 1);
  ws.act[0].assign(x.begin(), x.end());
  for (size_t l = 0; l < m.layers.size(); ++l) {
    const auto& layer = m.layers[l];
    auto& out = ws.act[l + 1];
    out.assign(layer.out, 0.0);
    const auto& in = ws.act[l];
    for (int o = 0; o < layer.out; ++o) {
      const double* wr = layer.w.data() + static_cast<size_t>(o) * layer.in;
      double z = layer.b[o];
      for (int i = 0; i < layer.in; ++i) z += wr[i] * in[i];
      out[o] = z;
    }
    if (l + 1 < m.layers.size()) {
      for (auto& v : out) v = std::tanh(v);
    } else {
      double hi = out[0];
      for (double v : out) hi = std::max(hi, v);
      double z = 0.0;
      for (auto& v : out) {
        v = std::exp(v - hi);
        z += v;
      }
      for (auto& v : out) v /= z;
    }
  }
}

std::vector<double> forward_probs(const Model& m, std::span<const double> x) {
  Workspace ws;
  forward(m, x, ws);
  return ws.act.back();
}

int predict(const Model& m, std::span<const double> x) {
  Workspace ws;
  forward(m, x, ws);
  const auto& p = ws.act.back();
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

void Gradients::zero() {
  for (auto& v : w) std::fill(v.begin(), v.end(), 0.0);
  for (auto& v : b) std::fill(v.begin(), v.end(), 0.0);
}

void Gradients::scale(double s) {
  for (auto& v : w)
    for (auto& x : v) x *= s;
  for (auto& v : b)
    for (auto& x : v) x *= s;
}

bool Gradients::finite() const {
  for (const auto& v : w)
    for (double x : v)
      if (!std::isfinite(x)) return false;
  for (const auto& v : b)
    for (double x : v)
      if (!std::isfinite(x)) return false;
  return true;
}

Gradients make_gradients(const Model& m) {
  Gradients g;
  for (const auto& l : m.layers) {
    g.w.emplace_back(l.w.size(), 0.0);
    g.b.emplace_back(l.b.size(), 0.0);
  }
  return g;
}

void backward_from_dp(const Model& m, const Workspace& ws, std::span<const double> dLdp,
                      Gradients& g) {
  const auto& p = ws.act.back();
  const int k = m.output_dim();

  // softmax Jacobian: dL/dz_j = p_j * (g_j - sum_k g_k p_k)
  double dot = 0.0;
  for (int j = 0; j < k; ++j) dot += dLdp[j] * p[j];
  std::vector<double> dz(k);
  for (int j = 0; j < k; ++j) dz[j] = p[j] * (dLdp[j] - dot);

  for (size_t l = m.layers.size(); l-- > 0;) {
    const auto& layer = m.layers[l];
    const auto& in = ws.act[l];
    auto& gw = g.w[l];
    auto& gb = g.b[l];
    for (int o = 0; o < layer.out; ++o) {
      const double d = dz[o];
      gb[o] += d;
      double* gwr = gw.data() + static_cast<size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) gwr[i] += d * in[i];
    }
    if (l == 0) break;
    std::vector<double> dh(layer.in, 0.0);
    for (int o = 0; o < layer.out; ++o) {
      const double d = dz[o];
      const double* wr = layer.w.data() + static_cast<size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) dh[i] += d * wr[i];
    }
    dz.assign(layer.in, 0.0);
    for (int i = 0; i < layer.in; ++i) dz[i] = dh[i] * (1.0 - in[i] * in[i]);  // tanh'
  }
}

double ce_loss(std::span<const double> p, int label) {
  return -std::log(std::max(p[label], kProbFloor));
}

void ce_grad_p(std::span<const double> p, int label, double scale, std::span<double> dLdp) {
  if (p[label] > kProbFloor) dLdp[label] += scale * (-1.0 / p[label]);
}

SgdMomentum::SgdMomentum(double momentum) : momentum_(momentum) {
  if (momentum < 0.0 || momentum >= 1.0)
    throw std::invalid_argument("sgd: momentum must be in [0,1)");
}

void SgdMomentum::step(Model& m, const Gradients& g, double lr) {
  if (!g.finite()) throw std::runtime_error("sgd: non-finite gradients");
  if (vw_.empty()) {
    for (const auto& l : m.layers) {
      vw_.emplace_back(l.w.size(), 0.0);
      vb_.emplace_back(l.b.size(), 0.0);
    }
  }
  for (size_t l = 0; l < m.layers.size(); ++l) {
    auto& layer = m.layers[l];
    for (size_t i = 0; i < layer.w.size(); ++i) {
      vw_[l][i] = momentum_ * vw_[l][i] + g.w[l][i];
      layer.w[i] -= lr * vw_[l][i];
    }
    for (size_t i = 0; i < layer.b.size(); ++i) {
      vb_[l][i] = momentum_ * vb_[l][i] + g.b[l][i];
      layer.b[i] -= lr * vb_[l][i];
    }
  }
}

void AugmentParams::validate() const {
  if (weak_sigma < 0.0 || strong_sigma < weak_sigma)
    throw std::invalid_argument("augment: need 0 <= weak_sigma <= strong_sigma");
  if (strong_dropout < 0.0 || strong_dropout >= 1.0)
    throw std::invalid_argument("augment: strong_dropout must be in [0,1)");
}

std::vector<double> feature_stds(std::span<const double> features, size_t n, int dim) {
  if (n == 0) throw std::invalid_argument("feature_stds: empty feature matrix");
  std::vector<double> mean(dim, 0.0), var(dim, 0.0);
  for (size_t i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) mean[j] += features[i * dim + j];
  for (auto& v : mean) v /= static_cast<double>(n);
  for (size_t i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) {
      const double d = features[i * dim + j] - mean[j];
      var[j] += d * d;
    }
  std::vector<double> out(dim);
  for (int j = 0; j < dim; ++j) out[j] = std::sqrt(var[j] / static_cast<double>(n));
  return out;
}

std::vector<double> augment(std::span<const double> batch, int dim, View view,
                            const AugmentParams& p, std::span<const double> stds, uint64_t seed) {
  p.validate();
  if (static_cast<int>(stds.size()) != dim)
    throw std::invalid_argument("augment: stds width mismatch");
  const size_t n = batch.size() / dim;
  std::vector<double> out(batch.begin(), batch.end());
  Rng rng(seed);
  const double sigma = view == View::weak ? p.weak_sigma : p.strong_sigma;
  for (size_t i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) {
      if (sigma > 0.0) out[i * dim + j] += sigma * stds[j] * rng.normal();
      if (view == View::strong && p.strong_dropout > 0.0 && rng.uniform() < p.strong_dropout)
        out[i * dim + j] = 0.0;
    }
  }
  return out;
}

double grad_check(const Model& m, LossProbe& probe, double step) {
  probe.capture(m);
  Gradients analytic = make_gradients(m);
  probe.loss_and_grad(m, analytic);

  Model work = m;
  double max_rel = 0.0;
  auto probe_param = [&](double& theta, double ga) {
    const double saved = theta;
    theta = saved + step;
    const double up = probe.loss_frozen(work);
    theta = saved - step;
    const double dn = probe.loss_frozen(work);
    theta = saved;
    const double fd = (up - dn) / (2.0 * step);
    const double denom = std::max({1e-6, std::abs(ga), std::abs(fd)});
    max_rel = std::max(max_rel, std::abs(ga - fd) / denom);
  };
  for (size_t l = 0; l < work.layers.size(); ++l) {
    for (size_t i = 0; i < work.layers[l].w.size(); ++i)
      probe_param(work.layers[l].w[i], analytic.w[l][i]);
    for (size_t i = 0; i < work.layers[l].b.size(); ++i)
      probe_param(work.layers[l].b[i], analytic.b[l][i]);
  }
  return max_rel;
}

CeLossProbe::CeLossProbe(std::vector<double> features, std::vector<int> labels, int dim)
    : features_(std::move(features)), labels_(std::move(labels)), dim_(dim) {}

double CeLossProbe::loss_and_grad(const Model& m, Gradients& g) const {
  g.zero();
  const size_t n = labels_.size();
  Workspace ws;
  std::vector<double> dp(m.output_dim());
  double loss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    forward(m, {features_.data() + i * dim_, static_cast<size_t>(dim_)}, ws);
    const auto& p = ws.act.back();
    loss += ce_loss(p, labels_[i]);
    std::fill(dp.begin(), dp.end(), 0.0);
    ce_grad_p(p, labels_[i], 1.0 / n, dp);
    backward_from_dp(m, ws, dp, g);
  }
  return loss / static_cast<double>(n);
}

double CeLossProbe::loss_frozen(const Model& m) const {
  const size_t n = labels_.size();
  double loss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const auto p = forward_probs(m, {features_.data() + i * dim_, static_cast<size_t>(dim_)});
    loss += ce_loss(p, labels_[i]);
  }
  return loss / static_cast<double>(n);
}

namespace {
constexpr char kMagic[8] = {'I', 'D', 'O', '.', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const Model& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  const uint32_t version = kVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const uint32_t n_dims = static_cast<uint32_t>(m.dims.size());
  out.write(reinterpret_cast<const char*>(&n_dims), sizeof(n_dims));
  for (int d : m.dims) {
    const int32_t v = d;
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  for (const auto& l : m.layers) {
    out.write(reinterpret_cast<const char*>(l.w.data()),
              static_cast<std::streamsize>(l.w.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(l.b.data()),
              static_cast<std::streamsize>(l.b.size() * sizeof(double)));
  }
  if (!out) throw io_error("checkpoint write failed: " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw parse_error(path + ": not a checkpoint file");
  uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!in || version != kVersion)
    throw parse_error(path + ": unsupported checkpoint version " + std::to_string(version));
  uint32_t n_dims = 0;
  in.read(reinterpret_cast<char*>(&n_dims), sizeof(n_dims));
  if (!in || n_dims < 2 || n_dims > 64) throw parse_error(path + ": corrupt layer count");
  std::vector<int> dims(n_dims);
  for (auto& d : dims) {
    int32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in || v < 1) throw parse_error(path + ": corrupt layer dims");
    d = v;
  }
  Model m;
  m.dims = dims;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    Model::Layer layer;
    layer.in = dims[l];
    layer.out = dims[l + 1];
    layer.w.resize(static_cast<size_t>(layer.in) * layer.out);
    layer.b.resize(layer.out);
    in.read(reinterpret_cast<char*>(layer.w.data()),
            static_cast<std::streamsize>(layer.w.size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(layer.b.data()),
            static_cast<std::streamsize>(layer.b.size() * sizeof(double)));
    if (!in) throw parse_error(path + ": truncated parameter data");
    m.layers.push_back(std::move(layer));
  }
  return m;
}

}  // namespace ido
