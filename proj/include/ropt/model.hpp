#pragma once

#include <cmath>
#include <stdexcept>

#include "ropt/random.hpp"
#include "ropt/types.hpp"

namespace ropt {

// Parameter layout (row-major blocks):
//   linear:   W (output_dim x input_dim)
//   affine:   W, then b (output_dim)
//   mlp_tanh: W1 (hidden x input), b1 (hidden), W2 (output x hidden), b2 (output)

inline Vec predict(const ModelFamily& f, const Vec& theta, const Vec& x) {
  if (theta.size() != param_count(f))
    throw std::invalid_argument("theta: length must equal param_count");
  if (x.size() != f.input_dim) throw std::invalid_argument("x: length must equal input_dim");
  switch (f.kind) {
    case FamilyKind::linear: {
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
          W(theta.data(), f.output_dim, f.input_dim);
      return W * x;
    }
    case FamilyKind::affine: {
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
          W(theta.data(), f.output_dim, f.input_dim);
      Eigen::Map<const Vec> b(theta.data() + f.output_dim * f.input_dim, f.output_dim);
      return W * x + b;
    }
    case FamilyKind::mlp_tanh: {
      const double* p = theta.data();
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
          W1(p, f.hidden_dim, f.input_dim);
      p += f.hidden_dim * f.input_dim;
      Eigen::Map<const Vec> b1(p, f.hidden_dim);
      p += f.hidden_dim;
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
          W2(p, f.output_dim, f.hidden_dim);
      p += f.output_dim * f.hidden_dim;
      Eigen::Map<const Vec> b2(p, f.output_dim);
      Vec hpre = W1 * x + b1;
      return W2 * hpre.array().tanh().matrix() + b2;
    }
  }
  throw std::logic_error("unknown model family");
}

// Accumulates w * d(loss)/d(theta) into g given df = d(loss)/d(prediction).
inline void accumulate_param_grad(const ModelFamily& f, const Vec& theta, const Vec& x,
                                  const Vec& df, double w, Vec& g) {
  if (g.size() != param_count(f)) throw std::invalid_argument("g: length must equal param_count");
  if (df.size() != f.output_dim) throw std::invalid_argument("df: length must equal output_dim");
  switch (f.kind) {
    case FamilyKind::linear: {
      Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
          gW(g.data(), f.output_dim, f.input_dim);
      gW.noalias() += w * df * x.transpose();
      return;
    }
    case FamilyKind::affine: {
      Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
          gW(g.data(), f.output_dim, f.input_dim);
      gW.noalias() += w * df * x.transpose();
      Eigen::Map<Vec> gb(g.data() + f.output_dim * f.input_dim, f.output_dim);
      gb.noalias() += w * df;
      return;
    }
    case FamilyKind::mlp_tanh: {
      const double* p = theta.data();
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
          W1(p, f.hidden_dim, f.input_dim);
      p += f.hidden_dim * f.input_dim;
      Eigen::Map<const Vec> b1(p, f.hidden_dim);
      p += f.hidden_dim;
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
          W2(p, f.output_dim, f.hidden_dim);
      Vec hpre = W1 * x + b1;
      Vec h = hpre.array().tanh().matrix();
      Vec dh = W2.transpose() * df;                              // dL/dh
      Vec dpre = dh.array() * (1.0 - h.array().square());        // dL/dhpre
      double* q = g.data();
      Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
          gW1(q, f.hidden_dim, f.input_dim);
      gW1.noalias() += w * dpre * x.transpose();
      q += f.hidden_dim * f.input_dim;
      Eigen::Map<Vec> gb1(q, f.hidden_dim);
      gb1.noalias() += w * dpre;
      q += f.hidden_dim;
      Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
          gW2(q, f.output_dim, f.hidden_dim);
      gW2.noalias() += w * df * h.transpose();
      q += f.output_dim * f.hidden_dim;
      Eigen::Map<Vec> gb2(q, f.output_dim);
      gb2.noalias() += w * df;
      return;
    }
  }
  throw std::logic_error("unknown model family");
}

inline Vec init_params(const ModelFamily& f, std::uint64_t seed) {
  auto g = make_engine(seed);
  Vec theta(param_count(f));
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = uniform_real(g, -0.1, 0.1);
  return theta;
}

}  // namespace ropt
