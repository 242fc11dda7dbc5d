#include "evinf/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace evinf::num {

static void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

void matvec(const Tensor2& a, std::span<const double> x, std::span<double> y) {
  require(int(x.size()) == a.cols && int(y.size()) == a.rows, "matvec: shape mismatch");
  for (int i = 0; i < a.rows; ++i) {
    const double* row = a.v.data() + size_t(i) * a.cols;
    double s = 0.0;
    for (int j = 0; j < a.cols; ++j) s += row[j] * x[j];
    y[i] = s;
  }
}

void matvec_add(const Tensor2& a, std::span<const double> x, std::span<double> y) {
  require(int(x.size()) == a.cols && int(y.size()) == a.rows, "matvec_add: shape mismatch");
  for (int i = 0; i < a.rows; ++i) {
    const double* row = a.v.data() + size_t(i) * a.cols;
    double s = 0.0;
    for (int j = 0; j < a.cols; ++j) s += row[j] * x[j];
    y[i] += s;
  }
}

void matvec_t_add(const Tensor2& a, std::span<const double> x, std::span<double> y) {
  require(int(x.size()) == a.rows && int(y.size()) == a.cols, "matvec_t_add: shape mismatch");
  for (int i = 0; i < a.rows; ++i) {
    const double* row = a.v.data() + size_t(i) * a.cols;
    const double xi = x[i];
    for (int j = 0; j < a.cols; ++j) y[j] += row[j] * xi;
  }
}

void outer_add(Tensor2& a, std::span<const double> x, std::span<const double> y) {
  require(int(x.size()) == a.rows && int(y.size()) == a.cols, "outer_add: shape mismatch");
  for (int i = 0; i < a.rows; ++i) {
    double* row = a.v.data() + size_t(i) * a.cols;
    const double xi = x[i];
    for (int j = 0; j < a.cols; ++j) row[j] += xi * y[j];
  }
}

void add_to(std::span<double> y, std::span<const double> x) {
  require(x.size() == y.size(), "add_to: shape mismatch");
  for (size_t i = 0; i < y.size(); ++i) y[i] += x[i];
}

double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "dot: shape mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vec softmax(std::span<const double> scores) {
  require(!scores.empty(), "softmax: empty input");
  const double mx = *std::max_element(scores.begin(), scores.end());
  Vec out(scores.size());
  double sum = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - mx);
    sum += out[i];
  }
  for (double& o : out) o /= sum;
  return out;
}

Vec softmax_backward(std::span<const double> alpha, std::span<const double> dalpha) {
  require(alpha.size() == dalpha.size(), "softmax_backward: shape mismatch");
  double inner = 0.0;
  for (size_t i = 0; i < alpha.size(); ++i) inner += alpha[i] * dalpha[i];
  Vec ds(alpha.size());
  for (size_t i = 0; i < alpha.size(); ++i) ds[i] = alpha[i] * (dalpha[i] - inner);
  return ds;
}

double cross_entropy(std::span<const double> logits, int cls) {
  require(cls >= 0 && cls < int(logits.size()), "cross_entropy: class out of range");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double lse = 0.0;
  for (double l : logits) lse += std::exp(l - mx);
  return std::log(lse) + mx - logits[cls];
}

Vec cross_entropy_backward(std::span<const double> logits, int cls) {
  Vec g = softmax(logits);
  g[cls] -= 1.0;
  return g;
}

static constexpr double kBceEps = 1e-7;

double binary_cross_entropy(double prob, double target) {
  const double p = std::clamp(prob, kBceEps, 1.0 - kBceEps);
  return -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
}

double binary_cross_entropy_dprob(double prob, double target) {
  const double p = std::clamp(prob, kBceEps, 1.0 - kBceEps);
  return -target / p + (1.0 - target) / (1.0 - p);
}

// ---------------------------------------------------------------------------
// GRU
// ---------------------------------------------------------------------------

GruParams::GruParams(int in_dim, int hid)
    : input_dim(in_dim),
      hidden(hid),
      Wz("gru.Wz", hid, in_dim),
      Wr("gru.Wr", hid, in_dim),
      Wh("gru.Wh", hid, in_dim),
      Uz("gru.Uz", hid, hid),
      Ur("gru.Ur", hid, hid),
      Uh("gru.Uh", hid, hid),
      bz("gru.bz", 1, hid),
      br("gru.br", 1, hid),
      bh("gru.bh", 1, hid) {
  require(in_dim > 0 && hid > 0, "GruParams: dims must be positive");
}

void GruParams::init(Rng& rng) {
  const double k = 1.0 / std::sqrt(double(hidden));
  for (Parameter* p : parameters())
    for (double& w : p->value.v) w = rng.uniform(-k, k);
}

std::vector<Parameter*> GruParams::parameters() {
  return {&Wz, &Wr, &Wh, &Uz, &Ur, &Uh, &bz, &br, &bh};
}

Vec gru_step(std::span<const double> x, std::span<const double> h,
             const GruParams& p, GruStepCache* cache) {
  require(int(x.size()) == p.input_dim, "gru_step: input dim mismatch");
  require(int(h.size()) == p.hidden, "gru_step: hidden dim mismatch");
  const int d = p.hidden;

  Vec z(d), r(d), hc(d), rh(d), h_new(d);
  matvec(p.Wz.value, x, z);
  matvec_add(p.Uz.value, h, z);
  matvec(p.Wr.value, x, r);
  matvec_add(p.Ur.value, h, r);
  for (int i = 0; i < d; ++i) {
    z[i] = sigmoid(z[i] + p.bz.value.v[i]);
    r[i] = sigmoid(r[i] + p.br.value.v[i]);
    rh[i] = r[i] * h[i];
  }
  matvec(p.Wh.value, x, hc);
  matvec_add(p.Uh.value, rh, hc);
  for (int i = 0; i < d; ++i) {
    hc[i] = std::tanh(hc[i] + p.bh.value.v[i]);
    h_new[i] = (1.0 - z[i]) * h[i] + z[i] * hc[i];
  }

  if (cache) {
    cache->x.assign(x.begin(), x.end());
    cache->h_prev.assign(h.begin(), h.end());
    cache->z = z;
    cache->r = r;
    cache->hc = hc;
  }
  return h_new;
}

GruStepGrads gru_step_backward(const GruStepCache& c, std::span<const double> dh_new,
                               GruParams& p) {
  const int d = p.hidden;
  require(int(dh_new.size()) == d, "gru_step_backward: grad dim mismatch");

  Vec dah(d), dar(d), daz(d), drh(d), rh(d);
  GruStepGrads g;
  g.dx.assign(p.input_dim, 0.0);
  g.dh_prev.assign(d, 0.0);

  for (int i = 0; i < d; ++i) {
    rh[i] = c.r[i] * c.h_prev[i];
    const double dz = dh_new[i] * (c.hc[i] - c.h_prev[i]);
    const double dhc = dh_new[i] * c.z[i];
    g.dh_prev[i] = dh_new[i] * (1.0 - c.z[i]);
    dah[i] = dhc * (1.0 - c.hc[i] * c.hc[i]);
    daz[i] = dz * c.z[i] * (1.0 - c.z[i]);
  }

  outer_add(p.Wh.grad, dah, c.x);
  outer_add(p.Uh.grad, dah, rh);
  add_to(std::span<double>(p.bh.grad.v), dah);
  matvec_t_add(p.Uh.value, dah, drh);  // drh = Uh^T dah

  for (int i = 0; i < d; ++i) {
    const double dr = drh[i] * c.h_prev[i];
    g.dh_prev[i] += drh[i] * c.r[i];
    dar[i] = dr * c.r[i] * (1.0 - c.r[i]);
  }

  outer_add(p.Wr.grad, dar, c.x);
  outer_add(p.Ur.grad, dar, c.h_prev);
  add_to(std::span<double>(p.br.grad.v), dar);
  matvec_t_add(p.Ur.value, dar, g.dh_prev);

  outer_add(p.Wz.grad, daz, c.x);
  outer_add(p.Uz.grad, daz, c.h_prev);
  add_to(std::span<double>(p.bz.grad.v), daz);
  matvec_t_add(p.Uz.value, daz, g.dh_prev);

  matvec_t_add(p.Wz.value, daz, g.dx);
  matvec_t_add(p.Wr.value, dar, g.dx);
  matvec_t_add(p.Wh.value, dah, g.dx);
  return g;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

Adam::Adam(std::vector<Parameter*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Parameter* p : params_) {
    m_.emplace_back(p->value.rows, p->value.cols);
    v_.emplace_back(p->value.rows, p->value.cols);
  }
}

void Adam::step(double grad_scale) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
  for (size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    if (!p.trainable) {
      p.grad.zero();
      continue;
    }
    for (size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad.v[i] * grad_scale;
      m_[k].v[i] = cfg_.beta1 * m_[k].v[i] + (1.0 - cfg_.beta1) * g;
      v_[k].v[i] = cfg_.beta2 * v_[k].v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m_[k].v[i] / bc1;
      const double vhat = v_[k].v[i] / bc2;
      p.value.v[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
    p.grad.zero();
  }
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

double grad_check(const std::function<double()>& loss,
                  const std::function<void()>& compute_grads,
                  std::span<Parameter* const> params, double step) {
  for (Parameter* p : params) p->grad.zero();
  compute_grads();

  std::vector<Tensor2> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->grad);

  double max_rel = 0.0;
  for (size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    if (!p.trainable) continue;
    for (size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value.v[i];
      p.value.v[i] = saved + step;
      const double lp = loss();
      p.value.v[i] = saved - step;
      const double lm = loss();
      p.value.v[i] = saved;
      const double numeric = (lp - lm) / (2.0 * step);
      const double a = analytic[k].v[i];
      if (!std::isfinite(numeric) || !std::isfinite(a))
        throw NumericalError("grad_check: non-finite value at " + p.name);
      // coordinates where both sides vanish are treated as exact
      if (std::abs(a) < 1e-7 && std::abs(numeric) < 1e-7) continue;
      const double rel = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric));
      max_rel = std::max(max_rel, rel);
    }
  }
  for (Parameter* p : params) p->grad.zero();
  return max_rel;
}

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

Embedding::Embedding(int vocab_size, int dim, Rng& rng, double sigma)
    : table("embedding", vocab_size, dim, /*train=*/false) {
  require(vocab_size > 0 && dim > 0, "Embedding: dims must be positive");
  // row 0 is PAD and stays zero
  for (int r = 1; r < vocab_size; ++r)
    for (int c = 0; c < dim; ++c) table.value.at(r, c) = sigma * rng.normal();
}

std::span<const double> Embedding::row(int id) const {
  if (id < 0 || id >= table.value.rows)
    throw std::invalid_argument("Embedding::row: id out of range");
  return {table.value.v.data() + size_t(id) * table.value.cols, size_t(table.value.cols)};
}

int load_embeddings_text(const std::string& path,
                         const std::function<std::optional<int>(const std::string&)>& token_to_id,
                         Embedding& emb) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding file: " + path);
  std::string line;
  int dim = -1;
  int loaded = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    std::vector<double> vals;
    double x;
    while (ss >> x) vals.push_back(x);
    if (dim < 0) {
      dim = int(vals.size());
      if (dim == 0) throw DataError("embedding file first line has no values: " + path);
      if (dim != emb.dim())
        throw DataError("embedding file dimension " + std::to_string(dim) +
                        " does not match table dimension " + std::to_string(emb.dim()));
    }
    if (int(vals.size()) != dim)
      throw DataError("embedding file line with inconsistent dimension: " + token);
    if (auto id = token_to_id(token)) {
      for (int c = 0; c < dim; ++c) emb.table.value.at(*id, c) = vals[c];
      ++loaded;
    }
  }
  return loaded;
}

}  // namespace evinf::num
