#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ido {

// Small tanh MLP with a softmax head. Parameters are plain doubles so
// checkpoints round-trip bit-exactly.
struct Model {
  struct Layer {
    int in = 0;
    int out = 0;
    std::vector<double> w;  // out x in, row-major
    std::vector<double> b;  // out
  };
  std::vector<int> dims;
  std::vector<Layer> layers;

  int input_dim() const { return dims.front(); }
  int output_dim() const { return dims.back(); }
  size_t param_count() const;
  bool finite() const;
};

// Uniform fan-in init: U(-sqrt(6/fan_in), +sqrt(6/fan_in)), zero biases.
Model init_model(const std::vector<int>& dims, uint64_t seed);

// Per-sample forward cache. act[0] is the input, act[l] the output of layer
// l (tanh for hidden layers, softmax at the top).
struct Workspace {
  std::vector<std::vector<double>> act;
};

void forward(const Model& m, std::span<const double> x, Workspace& ws);
std::vector<double> forward_probs(const Model& m, std::span<const double> x);
int predict(const Model& m, std::span<const double> x);

struct Gradients {
  std::vector<std::vector<double>> w;
  std::vector<std::vector<double>> b;
  void zero();
  void scale(double s);
  bool finite() const;
};
Gradients make_gradients(const Model& m);

// Accumulates one sample's parameter gradients given dL/d(probs). Applies
// the softmax Jacobian at the head, then standard backprop.
void backward_from_dp(const Model& m, const Workspace& ws, std::span<const double> dLdp,
                      Gradients& g);

inline constexpr double kProbFloor = 1e-12;

double ce_loss(std::span<const double> p, int label);
// adds the CE probability-space gradient into dLdp, scaled by `scale`
void ce_grad_p(std::span<const double> p, int label, double scale, std::span<double> dLdp);

// Classical momentum: v <- mu*v + g; theta <- theta - lr*v.
class SgdMomentum {
 public:
  explicit SgdMomentum(double momentum);
  void step(Model& m, const Gradients& g, double lr);

 private:
  double momentum_;
  std::vector<std::vector<double>> vw_;
  std::vector<std::vector<double>> vb_;
};

struct AugmentParams {
  double weak_sigma = 0.05;
  double strong_sigma = 0.2;
  double strong_dropout = 0.1;
  void validate() const;
};

enum class View { weak, strong };

std::vector<double> feature_stds(std::span<const double> features, size_t n, int dim);

// weak: Gaussian jitter scaled per-feature; strong: larger jitter plus
// independent feature dropout. Deterministic under seed.
std::vector<double> augment(std::span<const double> batch, int dim, View view,
                            const AugmentParams& p, std::span<const double> stds, uint64_t seed);

// A differentiable loss over the model, checkable by finite differences.
// capture() snapshots any gradient-detached quantities (pseudo-labels,
// confidence) at the current parameters; loss_frozen() must hold them fixed
// so the finite-difference probe sees exactly what the analytic gradient
// differentiates.
class LossProbe {
 public:
  virtual ~LossProbe() = default;
  virtual void capture(const Model&) {}
  virtual double loss_and_grad(const Model& m, Gradients& g) const = 0;
  virtual double loss_frozen(const Model& m) const = 0;
};

// Max relative error between analytic gradients and central differences.
double grad_check(const Model& m, LossProbe& probe, double step = 1e-5);

// Single-view CE over a fixed batch; the baseline probe.
class CeLossProbe : public LossProbe {
 public:
  CeLossProbe(std::vector<double> features, std::vector<int> labels, int dim);
  double loss_and_grad(const Model& m, Gradients& g) const override;
  double loss_frozen(const Model& m) const override;

 private:
  std::vector<double> features_;
  std::vector<int> labels_;
  int dim_;
};

// Versioned binary checkpoint; load is bit-exact.
void save_checkpoint(const Model& m, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace ido
