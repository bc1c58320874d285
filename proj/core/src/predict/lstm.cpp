#include <cmath>
#include <optional>

#include <fmt/format.h>

#include "flowlab/error.hpp"
#include "flowlab/lstm.hpp"
#include "flowlab/rng.hpp"

namespace flowlab::predict {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;

void Architecture::validate() const {
  if (input_dim < 1 || lookback < 1 || hidden1 < 1 || hidden2 < 1 || heads < 1 || key_dim < 1) {
    throw PreconditionError("predict", "architecture sizes must be positive");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw PreconditionError("predict", fmt::format("dropout must lie in [0, 1), got {}", dropout));
  }
}

Parameters Parameters::zeros_like() const {
  Parameters out = *this;
  out.visit([](std::string_view, MatrixXd& m) { m.setZero(); });
  return out;
}

std::size_t Parameters::count() const {
  std::size_t n = 0;
  visit([&](std::string_view, const MatrixXd& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

bool Parameters::all_finite() const {
  bool ok = true;
  visit([&](std::string_view, const MatrixXd& m) { ok = ok && m.allFinite(); });
  return ok;
}

LstmModel LstmModel::zeros(const Architecture& arch) {
  arch.validate();
  const int D = arch.input_dim, H1 = arch.hidden1, H2 = arch.hidden2;
  const int A = arch.heads * arch.key_dim;
  LstmModel m;
  m.arch = arch;
  auto& p = m.params;
  p.wx1 = MatrixXd::Zero(4 * H1, D);
  p.wh1 = MatrixXd::Zero(4 * H1, H1);
  p.b1 = MatrixXd::Zero(4 * H1, 1);
  p.wx2 = MatrixXd::Zero(4 * H2, H1);
  p.wh2 = MatrixXd::Zero(4 * H2, H2);
  p.b2 = MatrixXd::Zero(4 * H2, 1);
  p.wq = MatrixXd::Zero(A, H2);
  p.bq = MatrixXd::Zero(A, 1);
  p.wk = MatrixXd::Zero(A, H1);
  p.bk = MatrixXd::Zero(A, 1);
  p.wv = MatrixXd::Zero(A, H1);
  p.bv = MatrixXd::Zero(A, 1);
  p.wo = MatrixXd::Zero(H2, A);
  p.bo = MatrixXd::Zero(H2, 1);
  p.w_out = MatrixXd::Zero(1, H2);
  p.b_out = MatrixXd::Zero(1, 1);
  return m;
}

LstmModel LstmModel::initialize(const Architecture& arch, std::uint64_t seed) {
  LstmModel m = zeros(arch);
  Rng rng(seed);
  const int D = arch.input_dim, H1 = arch.hidden1, H2 = arch.hidden2;
  const int A = arch.heads * arch.key_dim;
  auto fill = [&](MatrixXd& mat, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index j = 0; j < mat.cols(); ++j) {
      for (Eigen::Index i = 0; i < mat.rows(); ++i) mat(i, j) = rng.uniform(-bound, bound);
    }
  };
  auto& p = m.params;
  fill(p.wx1, D + H1);
  fill(p.wh1, D + H1);
  fill(p.b1, D + H1);
  fill(p.wx2, H1 + H2);
  fill(p.wh2, H1 + H2);
  fill(p.b2, H1 + H2);
  fill(p.wq, H2);
  fill(p.bq, H2);
  fill(p.wk, H1);
  fill(p.bk, H1);
  fill(p.wv, H1);
  fill(p.bv, H1);
  fill(p.wo, A);
  fill(p.bo, A);
  fill(p.w_out, H2);
  fill(p.b_out, H2);
  return m;
}

namespace {

MatrixXd sigmoid(const MatrixXd& x) {
  return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

MatrixXd tanh_of(const MatrixXd& x) {
  return x.unaryExpr([](double v) { return std::tanh(v); });
}

struct LayerCache {
  std::vector<MatrixXd> i, f, g, o, c, tanh_c, h;  // one entry per step, hidden x batch
};

// Runs one LSTM layer over all steps from zero initial state.
LayerCache run_layer(const MatrixXd& wx, const MatrixXd& wh, const MatrixXd& b,
                     const std::vector<MatrixXd>& inputs) {
  const Eigen::Index H = wh.cols();
  const Eigen::Index B = inputs.front().cols();
  LayerCache cache;
  MatrixXd h = MatrixXd::Zero(H, B);
  MatrixXd c = MatrixXd::Zero(H, B);
  for (const auto& x : inputs) {
    MatrixXd z = wx * x + wh * h;
    z.colwise() += b.col(0);
    MatrixXd i = sigmoid(z.middleRows(0, H));
    MatrixXd f = sigmoid(z.middleRows(H, H));
    MatrixXd g = tanh_of(z.middleRows(2 * H, H));
    MatrixXd o = sigmoid(z.middleRows(3 * H, H));
    c = f.cwiseProduct(c) + i.cwiseProduct(g);
    MatrixXd tc = tanh_of(c);
    h = o.cwiseProduct(tc);
    cache.i.push_back(std::move(i));
    cache.f.push_back(std::move(f));
    cache.g.push_back(std::move(g));
    cache.o.push_back(std::move(o));
    cache.c.push_back(c);
    cache.tanh_c.push_back(std::move(tc));
    cache.h.push_back(h);
  }
  return cache;
}

// Backpropagation through time. `dh_ext[t]` is the loss gradient reaching
// h_t from outside the layer (may be empty for steps without one).
// Accumulates parameter gradients and returns d loss / d input per step.
std::vector<MatrixXd> backprop_layer(const MatrixXd& wx, const MatrixXd& wh,
                                     const std::vector<MatrixXd>& inputs, const LayerCache& cache,
                                     const std::vector<MatrixXd>& dh_ext, MatrixXd& dwx,
                                     MatrixXd& dwh, MatrixXd& db) {
  const Eigen::Index H = wh.cols();
  const Eigen::Index B = inputs.front().cols();
  const auto K = inputs.size();
  std::vector<MatrixXd> dx(K);
  MatrixXd dh_next = MatrixXd::Zero(H, B);
  MatrixXd dc_next = MatrixXd::Zero(H, B);
  MatrixXd dz(4 * H, B);
  for (std::size_t s = K; s-- > 0;) {
    MatrixXd dh = dh_next;
    if (dh_ext[s].size() != 0) dh += dh_ext[s];
    const auto& i = cache.i[s];
    const auto& f = cache.f[s];
    const auto& g = cache.g[s];
    const auto& o = cache.o[s];
    const auto& tc = cache.tanh_c[s];
    const MatrixXd dc = dh.cwiseProduct(o).cwiseProduct((1.0 - tc.array().square()).matrix()) + dc_next;
    dz.middleRows(0, H) = dc.cwiseProduct(g).cwiseProduct(i.cwiseProduct((1.0 - i.array()).matrix()));
    if (s > 0) {
      dz.middleRows(H, H) =
          dc.cwiseProduct(cache.c[s - 1]).cwiseProduct(f.cwiseProduct((1.0 - f.array()).matrix()));
    } else {
      dz.middleRows(H, H).setZero();
    }
    dz.middleRows(2 * H, H) = dc.cwiseProduct(i).cwiseProduct((1.0 - g.array().square()).matrix());
    dz.middleRows(3 * H, H) = dh.cwiseProduct(tc).cwiseProduct(o.cwiseProduct((1.0 - o.array()).matrix()));
    dwx.noalias() += dz * inputs[s].transpose();
    if (s > 0) dwh.noalias() += dz * cache.h[s - 1].transpose();
    db.col(0) += dz.rowwise().sum();
    dx[s] = wx.transpose() * dz;
    dh_next = wh.transpose() * dz;
    dc_next = dc.cwiseProduct(f);
  }
  return dx;
}

MatrixXd dropout_mask(Rng& rng, Eigen::Index rows, Eigen::Index cols, double rate) {
  MatrixXd mask(rows, cols);
  const double keep = 1.0 - rate;
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) mask(i, j) = rng.uniform() < keep ? 1.0 / keep : 0.0;
  }
  return mask;
}

struct Cache {
  LayerCache l1;
  std::vector<MatrixXd> mask1;  // empty without dropout
  std::vector<MatrixXd> y1;     // layer-1 output after dropout
  LayerCache l2;
  MatrixXd mask2;
  MatrixXd q;  // query input: final layer-2 state after dropout
  MatrixXd Q;  // projected queries, heads*key_dim x batch
  std::vector<MatrixXd> Kp, Vp;
  std::vector<MatrixXd> weights;  // per head, lookback x batch
  MatrixXd O;                     // concatenated head outputs
  MatrixXd z;                     // attention output + residual
  RowVectorXd pred;
};

void forward(const LstmModel& model, const std::vector<MatrixXd>& steps, Rng* dropout, Cache& c) {
  const auto& a = model.arch;
  const auto& p = model.params;
  if (static_cast<int>(steps.size()) != a.lookback) {
    throw PreconditionError("predict", fmt::format("expected {} steps, got {}", a.lookback, steps.size()));
  }
  const Eigen::Index B = steps.front().cols();
  const auto K = steps.size();
  const int dk = a.key_dim;

  c.l1 = run_layer(p.wx1, p.wh1, p.b1, steps);
  c.y1 = c.l1.h;
  c.mask1.clear();
  if (dropout != nullptr && a.dropout > 0.0) {
    for (std::size_t s = 0; s < K; ++s) {
      c.mask1.push_back(dropout_mask(*dropout, a.hidden1, B, a.dropout));
      c.y1[s] = c.y1[s].cwiseProduct(c.mask1.back());
    }
  }
  c.l2 = run_layer(p.wx2, p.wh2, p.b2, c.y1);
  c.q = c.l2.h.back();
  c.mask2.resize(0, 0);
  if (dropout != nullptr && a.dropout > 0.0) {
    c.mask2 = dropout_mask(*dropout, a.hidden2, B, a.dropout);
    c.q = c.q.cwiseProduct(c.mask2);
  }

  c.Q = p.wq * c.q;
  c.Q.colwise() += p.bq.col(0);
  c.Kp.resize(K);
  c.Vp.resize(K);
  for (std::size_t s = 0; s < K; ++s) {
    c.Kp[s] = p.wk * c.y1[s];
    c.Kp[s].colwise() += p.bk.col(0);
    c.Vp[s] = p.wv * c.y1[s];
    c.Vp[s].colwise() += p.bv.col(0);
  }
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
  c.weights.assign(static_cast<std::size_t>(a.heads), MatrixXd(static_cast<Eigen::Index>(K), B));
  c.O = MatrixXd::Zero(a.heads * dk, B);
  for (int h = 0; h < a.heads; ++h) {
    auto& w = c.weights[static_cast<std::size_t>(h)];
    const auto Qh = c.Q.middleRows(h * dk, dk);
    for (std::size_t s = 0; s < K; ++s) {
      w.row(static_cast<Eigen::Index>(s)) =
          Qh.cwiseProduct(c.Kp[s].middleRows(h * dk, dk)).colwise().sum() * inv_sqrt_dk;
    }
    const RowVectorXd peak = w.colwise().maxCoeff();
    w = (w.rowwise() - peak).array().exp().matrix();
    const RowVectorXd total = w.colwise().sum();
    w.array().rowwise() /= total.array();
    for (std::size_t s = 0; s < K; ++s) {
      c.O.middleRows(h * dk, dk).array() +=
          c.Vp[s].middleRows(h * dk, dk).array().rowwise() * w.row(static_cast<Eigen::Index>(s)).array();
    }
  }
  c.z = p.wo * c.O;
  c.z.colwise() += p.bo.col(0);
  c.z += c.q;
  c.pred = p.w_out * c.z;
  c.pred.array() += p.b_out(0, 0);
}

void backward(const LstmModel& model, const std::vector<MatrixXd>& steps, const Cache& c,
              const RowVectorXd& dpred, Parameters& g) {
  const auto& a = model.arch;
  const auto& p = model.params;
  const auto K = steps.size();
  const Eigen::Index B = dpred.cols();
  const int dk = a.key_dim;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

  g.w_out.noalias() += dpred * c.z.transpose();
  g.b_out(0, 0) += dpred.sum();
  const MatrixXd dz = p.w_out.transpose() * dpred;

  MatrixXd dq = dz;
  g.wo.noalias() += dz * c.O.transpose();
  g.bo.col(0) += dz.rowwise().sum();
  const MatrixXd dO = p.wo.transpose() * dz;

  MatrixXd dQ = MatrixXd::Zero(c.Q.rows(), B);
  std::vector<MatrixXd> dK(K, MatrixXd::Zero(c.Q.rows(), B));
  std::vector<MatrixXd> dV(K, MatrixXd::Zero(c.Q.rows(), B));
  for (int h = 0; h < a.heads; ++h) {
    const auto& w = c.weights[static_cast<std::size_t>(h)];
    const auto dOh = dO.middleRows(h * dk, dk);
    MatrixXd dw(static_cast<Eigen::Index>(K), B);
    for (std::size_t s = 0; s < K; ++s) {
      const auto row = static_cast<Eigen::Index>(s);
      dV[s].middleRows(h * dk, dk) = (dOh.array().rowwise() * w.row(row).array()).matrix();
      dw.row(row) = dOh.cwiseProduct(c.Vp[s].middleRows(h * dk, dk)).colwise().sum();
    }
    const RowVectorXd expected = w.cwiseProduct(dw).colwise().sum();
    const MatrixXd dscore = w.cwiseProduct((dw.rowwise() - expected)) * inv_sqrt_dk;
    const auto Qh = c.Q.middleRows(h * dk, dk);
    for (std::size_t s = 0; s < K; ++s) {
      const auto row = static_cast<Eigen::Index>(s);
      dQ.middleRows(h * dk, dk).array() +=
          c.Kp[s].middleRows(h * dk, dk).array().rowwise() * dscore.row(row).array();
      dK[s].middleRows(h * dk, dk) = (Qh.array().rowwise() * dscore.row(row).array()).matrix();
    }
  }
  g.wq.noalias() += dQ * c.q.transpose();
  g.bq.col(0) += dQ.rowwise().sum();
  dq.noalias() += p.wq.transpose() * dQ;

  std::vector<MatrixXd> dy1(K);
  for (std::size_t s = 0; s < K; ++s) {
    g.wk.noalias() += dK[s] * c.y1[s].transpose();
    g.bk.col(0) += dK[s].rowwise().sum();
    g.wv.noalias() += dV[s] * c.y1[s].transpose();
    g.bv.col(0) += dV[s].rowwise().sum();
    dy1[s] = p.wk.transpose() * dK[s] + p.wv.transpose() * dV[s];
  }

  MatrixXd dh2 = c.mask2.size() != 0 ? MatrixXd(dq.cwiseProduct(c.mask2)) : dq;
  std::vector<MatrixXd> ext2(K);
  ext2.back() = std::move(dh2);
  const auto dx2 = backprop_layer(p.wx2, p.wh2, c.y1, c.l2, ext2, g.wx2, g.wh2, g.b2);

  std::vector<MatrixXd> ext1(K);
  for (std::size_t s = 0; s < K; ++s) {
    MatrixXd d = dy1[s] + dx2[s];
    if (!c.mask1.empty()) d = d.cwiseProduct(c.mask1[s]);
    ext1[s] = std::move(d);
  }
  backprop_layer(p.wx1, p.wh1, steps, c.l1, ext1, g.wx1, g.wh1, g.b1);
}

void check_finite(const LstmModel& model) {
  if (!model.params.all_finite()) throw Error("predict", "NonFiniteParameter", "model contains NaN or Inf");
}

}  // namespace

BatchOutput forward_batch(const LstmModel& model, const Batch& batch) {
  check_finite(model);
  Cache c;
  forward(model, batch.steps, nullptr, c);
  BatchOutput out;
  out.predictions = c.pred;
  out.attention = MatrixXd::Zero(model.arch.lookback, batch.steps.front().cols());
  for (const auto& w : c.weights) out.attention += w;
  out.attention /= static_cast<double>(model.arch.heads);
  return out;
}

double loss_and_gradient(const LstmModel& model, const Batch& batch, Parameters* gradient,
                         const std::uint64_t* dropout_seed) {
  check_finite(model);
  const Eigen::Index B = batch.size();
  if (B == 0) throw PreconditionError("predict", "empty batch");
  std::optional<Rng> rng;
  if (dropout_seed != nullptr) rng.emplace(*dropout_seed);
  Cache c;
  forward(model, batch.steps, rng ? &*rng : nullptr, c);
  const RowVectorXd residual = c.pred - batch.targets;
  const double loss = residual.squaredNorm() / static_cast<double>(B);
  if (gradient != nullptr) {
    if (gradient->count() != model.params.count()) *gradient = model.params.zeros_like();
    const RowVectorXd dpred = residual * (2.0 / static_cast<double>(B));
    backward(model, batch.steps, c, dpred, *gradient);
  }
  return loss;
}

ForwardResult lstm_forward(const LstmModel& model, const Eigen::MatrixXd& inputs, bool train_mode,
                           std::uint64_t seed) {
  check_finite(model);
  const auto& a = model.arch;
  if (inputs.rows() != a.lookback || inputs.cols() != a.input_dim) {
    throw PreconditionError("predict", fmt::format("inputs must be {} x {}, got {} x {}", a.lookback,
                                                   a.input_dim, inputs.rows(), inputs.cols()));
  }
  std::vector<MatrixXd> steps(static_cast<std::size_t>(a.lookback));
  for (int s = 0; s < a.lookback; ++s) {
    MatrixXd x = inputs.row(s).transpose();
    if (a.input_dim == 3) x = ((x.col(0) - model.feature_mean).cwiseQuotient(model.feature_sd)).eval();
    steps[static_cast<std::size_t>(s)] = x;
  }
  std::optional<Rng> rng;
  if (train_mode) rng.emplace(seed);
  Cache c;
  forward(model, steps, rng ? &*rng : nullptr, c);
  ForwardResult out;
  out.prediction = model.target_mean + model.target_sd * c.pred(0);
  out.attention_profile = Eigen::VectorXd::Zero(a.lookback);
  for (const auto& w : c.weights) out.attention_profile += w.col(0);
  out.attention_profile /= static_cast<double>(a.heads);
  return out;
}

}  // namespace flowlab::predict
