#include <cmath>

#include "citeworth/error.hpp"
#include "citeworth/neural.hpp"

namespace citeworth::neural {

namespace {

double sigm(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

LstmParams LstmParams::zeros(std::size_t input, std::size_t hidden) {
  const auto h = static_cast<Eigen::Index>(hidden);
  LstmParams p;
  p.Wx = MatrixXd::Zero(4 * h, static_cast<Eigen::Index>(input));
  p.Wh = MatrixXd::Zero(4 * h, h);
  p.b = VectorXd::Zero(4 * h);
  return p;
}

namespace {

struct Gates {
  VectorXd i, f, g, o, c, h;
};

Gates step(const VectorXd& x, const VectorXd& h_prev, const VectorXd& c_prev, const LstmParams& p) {
  const Eigen::Index h = static_cast<Eigen::Index>(p.hidden());
  if (x.size() != p.Wx.cols() || h_prev.size() != h || c_prev.size() != h) {
    throw Error(ErrorCode::DimensionMismatch, "lstm_step: input or state size");
  }
  const VectorXd a = p.Wx * x + p.Wh * h_prev + p.b;
  Gates s;
  s.i = a.segment(0, h).unaryExpr(&sigm);
  s.f = a.segment(h, h).unaryExpr(&sigm);
  s.g = a.segment(2 * h, h).array().tanh();
  s.o = a.segment(3 * h, h).unaryExpr(&sigm);
  s.c = s.f.cwiseProduct(c_prev) + s.i.cwiseProduct(s.g);
  s.h = s.o.cwiseProduct(s.c.array().tanh().matrix());
  return s;
}

}  // namespace

LstmState lstm_step(const VectorXd& x, const VectorXd& h_prev, const VectorXd& c_prev,
                    const LstmParams& p) {
  Gates s = step(x, h_prev, c_prev, p);
  return {std::move(s.h), std::move(s.c)};
}

MatrixXd lstm_forward(const MatrixXd& X, const LstmParams& p, LstmCache* cache) {
  const Eigen::Index n = X.rows();
  const Eigen::Index h = static_cast<Eigen::Index>(p.hidden());
  MatrixXd H(n, h);
  if (cache) {
    cache->X = X;
    cache->C.resize(n, h);
    cache->I.resize(n, h);
    cache->F.resize(n, h);
    cache->G.resize(n, h);
    cache->O.resize(n, h);
  }
  VectorXd hp = VectorXd::Zero(h), cp = VectorXd::Zero(h);
  for (Eigen::Index t = 0; t < n; ++t) {
    Gates s = step(X.row(t).transpose(), hp, cp, p);
    H.row(t) = s.h.transpose();
    if (cache) {
      cache->C.row(t) = s.c.transpose();
      cache->I.row(t) = s.i.transpose();
      cache->F.row(t) = s.f.transpose();
      cache->G.row(t) = s.g.transpose();
      cache->O.row(t) = s.o.transpose();
    }
    hp = std::move(s.h);
    cp = std::move(s.c);
  }
  if (cache) cache->H = H;
  return H;
}

void lstm_backward(const LstmCache& cache, const MatrixXd& dH, const LstmParams& p,
                   LstmParams& grad, MatrixXd& dX) {
  const Eigen::Index n = cache.X.rows();
  const Eigen::Index h = static_cast<Eigen::Index>(p.hidden());
  dX = MatrixXd::Zero(n, cache.X.cols());
  VectorXd dh_next = VectorXd::Zero(h), dc_next = VectorXd::Zero(h);
  VectorXd da(4 * h);
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const VectorXd i = cache.I.row(t).transpose();
    const VectorXd f = cache.F.row(t).transpose();
    const VectorXd g = cache.G.row(t).transpose();
    const VectorXd o = cache.O.row(t).transpose();
    const VectorXd c = cache.C.row(t).transpose();
    const VectorXd c_prev = t > 0 ? VectorXd(cache.C.row(t - 1).transpose()) : VectorXd::Zero(h);
    const VectorXd h_prev = t > 0 ? VectorXd(cache.H.row(t - 1).transpose()) : VectorXd::Zero(h);
    const VectorXd tc = c.array().tanh();

    const VectorXd dh = dH.row(t).transpose() + dh_next;
    const VectorXd dc = dc_next + (dh.array() * o.array() * (1.0 - tc.array().square())).matrix();
    da.segment(0, h) = (dc.array() * g.array() * i.array() * (1.0 - i.array())).matrix();
    da.segment(h, h) = (dc.array() * c_prev.array() * f.array() * (1.0 - f.array())).matrix();
    da.segment(2 * h, h) = (dc.array() * i.array() * (1.0 - g.array().square())).matrix();
    da.segment(3 * h, h) = (dh.array() * tc.array() * o.array() * (1.0 - o.array())).matrix();

    grad.Wx.noalias() += da * cache.X.row(t);
    grad.Wh.noalias() += da * h_prev.transpose();
    grad.b += da;
    dX.row(t) = (p.Wx.transpose() * da).transpose();
    dh_next = p.Wh.transpose() * da;
    dc_next = dc.cwiseProduct(f);
  }
}

EncoderState bilstm_encode(const MatrixXd& X, const LstmParams& fwd, const LstmParams& bwd,
                           BiLstmCache* cache) {
  if (X.rows() == 0) throw Error(ErrorCode::EmptyInput, "bilstm_encode needs at least one step");
  const MatrixXd Hf = lstm_forward(X, fwd, cache ? &cache->fwd : nullptr);
  const MatrixXd Xr = X.colwise().reverse();
  const MatrixXd Hb = lstm_forward(Xr, bwd, cache ? &cache->bwd : nullptr).colwise().reverse();
  EncoderState s;
  s.H.resize(X.rows(), Hf.cols() + Hb.cols());
  s.H << Hf, Hb;
  return s;
}

void bilstm_backward(const BiLstmCache& cache, const MatrixXd& dH, const LstmParams& fwd,
                     const LstmParams& bwd, LstmParams& grad_fwd, LstmParams& grad_bwd,
                     MatrixXd& dX) {
  const Eigen::Index hf = static_cast<Eigen::Index>(fwd.hidden());
  const Eigen::Index hb = static_cast<Eigen::Index>(bwd.hidden());
  MatrixXd dXf, dXr;
  lstm_backward(cache.fwd, dH.leftCols(hf), fwd, grad_fwd, dXf);
  const MatrixXd dHr = dH.rightCols(hb).colwise().reverse();
  lstm_backward(cache.bwd, dHr, bwd, grad_bwd, dXr);
  dX = dXf + MatrixXd(dXr.colwise().reverse());
}

}  // namespace citeworth::neural
