#pragma once

// Dense double-precision building blocks for the neural models: a small
// row-major matrix type, GRU cell with exact hand-derived backward pass,
// softmax / losses, Adam, finite-difference gradient checking, and the
// embedding table loader.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evinf/common.hpp"

namespace evinf::num {

struct Tensor2 {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;  // row-major

  Tensor2() = default;
  Tensor2(int r, int c) : rows(r), cols(c), v(size_t(r) * size_t(c), 0.0) {}

  double& at(int r, int c) { return v[size_t(r) * cols + c]; }
  double at(int r, int c) const { return v[size_t(r) * cols + c]; }
  void zero() { std::fill(v.begin(), v.end(), 0.0); }
  size_t size() const { return v.size(); }
  bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }
};

// A tensor paired with its gradient accumulator. Gradients are zeroed by the
// optimizer step; non-trainable parameters (frozen embeddings) are skipped by
// both the optimizer and grad_check.
struct Parameter {
  std::string name;
  Tensor2 value;
  Tensor2 grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, int r, int c, bool train = true)
      : name(std::move(n)), value(r, c), grad(r, c), trainable(train) {}
};

using Vec = std::vector<double>;

void matvec(const Tensor2& a, std::span<const double> x, std::span<double> y);       // y = A x
void matvec_add(const Tensor2& a, std::span<const double> x, std::span<double> y);   // y += A x
void matvec_t_add(const Tensor2& a, std::span<const double> x, std::span<double> y); // y += A^T x
void outer_add(Tensor2& a, std::span<const double> x, std::span<const double> y);    // A += x y^T
void add_to(std::span<double> y, std::span<const double> x);                         // y += x

double dot(std::span<const double> a, std::span<const double> b);
double sigmoid(double x);

// max-subtracted softmax; strictly positive output summing to 1
Vec softmax(std::span<const double> scores);
// ds_i = alpha_i * (dalpha_i - sum_j alpha_j * dalpha_j)
Vec softmax_backward(std::span<const double> alpha, std::span<const double> dalpha);

double cross_entropy(std::span<const double> logits, int cls);
Vec cross_entropy_backward(std::span<const double> logits, int cls);  // softmax - onehot

// target may be fractional (uniform evidence targets); prob clamped to
// [1e-7, 1 - 1e-7] inside
double binary_cross_entropy(double prob, double target);
double binary_cross_entropy_dprob(double prob, double target);

// ---------------------------------------------------------------------------
// GRU cell
//
// z  = sigmoid(Wz x + Uz h + bz)
// r  = sigmoid(Wr x + Ur h + br)
// hc = tanh(Wh x + Uh (r*h) + bh)
// h' = (1 - z)*h + z*hc
// ---------------------------------------------------------------------------

struct GruParams {
  int input_dim = 0;
  int hidden = 0;
  Parameter Wz, Wr, Wh;  // hidden x input_dim
  Parameter Uz, Ur, Uh;  // hidden x hidden
  Parameter bz, br, bh;  // 1 x hidden

  GruParams() = default;
  GruParams(int input_dim, int hidden);
  void init(Rng& rng);  // uniform(-k, k), k = 1/sqrt(hidden)
  std::vector<Parameter*> parameters();
};

struct GruStepCache {
  Vec x, h_prev, z, r, hc;
};

// h_new; fills cache when given (needed for the backward pass)
Vec gru_step(std::span<const double> x, std::span<const double> h,
             const GruParams& p, GruStepCache* cache = nullptr);

struct GruStepGrads {
  Vec dx, dh_prev;
};

// accumulates parameter gradients into p, returns input gradients
GruStepGrads gru_step_backward(const GruStepCache& cache, std::span<const double> dh_new,
                               GruParams& p);

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig cfg = {});

  // Bias-corrected update over all trainable parameters. Accumulated
  // gradients are multiplied by grad_scale first (1/batch for mean loss)
  // and zeroed afterwards.
  void step(double grad_scale = 1.0);

  long step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Tensor2> m_, v_;
  AdamConfig cfg_;
  long t_ = 0;
};

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

// Central differences per coordinate of every trainable parameter.
// `loss` must be a pure forward evaluation; `compute_grads` runs
// forward+backward and leaves gradients accumulated on the parameters.
// Returns the max relative error; throws NumericalError on non-finite values.
double grad_check(const std::function<double()>& loss,
                  const std::function<void()>& compute_grads,
                  std::span<Parameter* const> params, double step = 1e-5);

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

// Token embedding table, frozen by default. Row 0 is PAD and stays zero under
// random init; unknown ids must be mapped to OOV by the caller.
struct Embedding {
  Parameter table;  // vocab_size x dim

  Embedding() = default;
  Embedding(int vocab_size, int dim, Rng& rng, double sigma = 0.1);

  int dim() const { return table.value.cols; }
  int vocab_size() const { return table.value.rows; }
  std::span<const double> row(int id) const;
};

// "token v1 v2 ... vk" text lines; dimension inferred from the first line.
// Tokens present in the file get its vector, everything else keeps the random
// init. Returns the number of vocab tokens that were found in the file.
int load_embeddings_text(const std::string& path,
                         const std::function<std::optional<int>(const std::string&)>& token_to_id,
                         Embedding& emb);

}  // namespace evinf::num
