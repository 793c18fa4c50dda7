#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "deeptrade/activations.hpp"
#include "deeptrade/matrix.hpp"
#include "deeptrade/rng.hpp"

namespace deeptrade {

/// Peephole LSTM cell parameters. The peephole weights are element-wise
/// (diagonal) vectors; the input and forget gates peek at c_{t-1}, the
/// output gate at the freshly computed c_t.
struct LstmCellParams {
  Matrix W_ix, W_im;  // input gate
  Matrix W_fx, W_fm;  // forget gate
  Matrix W_cx, W_cm;  // cell candidate
  Matrix W_ox, W_om;  // output gate
  std::vector<double> w_ic, w_fc, w_oc;
  std::vector<double> b_i, b_f, b_c, b_o;

  std::size_t input_dim() const { return W_ix.cols(); }
  std::size_t hidden_dim() const { return W_ix.rows(); }
};

struct LstmCellGrads {
  Matrix W_ix, W_im, W_fx, W_fm, W_cx, W_cm, W_ox, W_om;
  std::vector<double> w_ic, w_fc, w_oc;
  std::vector<double> b_i, b_f, b_c, b_o;
};

inline LstmCellParams make_lstm_cell(std::size_t hidden, std::size_t input) {
  LstmCellParams p;
  for (Matrix* w : {&p.W_ix, &p.W_fx, &p.W_cx, &p.W_ox}) w->resize(hidden, input);
  for (Matrix* w : {&p.W_im, &p.W_fm, &p.W_cm, &p.W_om}) w->resize(hidden, hidden);
  for (auto* v : {&p.w_ic, &p.w_fc, &p.w_oc, &p.b_i, &p.b_f, &p.b_c, &p.b_o})
    v->assign(hidden, 0.0);
  return p;
}

inline LstmCellGrads make_lstm_grads(const LstmCellParams& p) {
  LstmCellGrads g;
  const std::size_t h = p.hidden_dim(), in = p.input_dim();
  for (Matrix* w : {&g.W_ix, &g.W_fx, &g.W_cx, &g.W_ox}) w->resize(h, in);
  for (Matrix* w : {&g.W_im, &g.W_fm, &g.W_cm, &g.W_om}) w->resize(h, h);
  for (auto* v : {&g.w_ic, &g.w_fc, &g.w_oc, &g.b_i, &g.b_f, &g.b_c, &g.b_o})
    v->assign(h, 0.0);
  return g;
}

/// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per weight block.
inline void init_lstm_cell(LstmCellParams& p, Rng& rng) {
  auto init_matrix = [&rng](Matrix& w) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols()));
    for (double& v : w.storage()) v = rng.uniform(-bound, bound);
  };
  for (Matrix* w : {&p.W_ix, &p.W_im, &p.W_fx, &p.W_fm, &p.W_cx, &p.W_cm,
                    &p.W_ox, &p.W_om})
    init_matrix(*w);
  const double bound = 1.0 / std::sqrt(static_cast<double>(p.hidden_dim()));
  for (auto* v : {&p.w_ic, &p.w_fc, &p.w_oc})
    for (double& x : *v) x = rng.uniform(-bound, bound);
  // Biases start at zero.
}

inline void append_lstm_tensors(std::vector<TensorRef>& out,
                                const std::string& prefix, LstmCellParams& p) {
  out.push_back(ref(prefix + ".W_ix", p.W_ix));
  out.push_back(ref(prefix + ".W_im", p.W_im));
  out.push_back(ref(prefix + ".w_ic", p.w_ic));
  out.push_back(ref(prefix + ".b_i", p.b_i));
  out.push_back(ref(prefix + ".W_fx", p.W_fx));
  out.push_back(ref(prefix + ".W_fm", p.W_fm));
  out.push_back(ref(prefix + ".w_fc", p.w_fc));
  out.push_back(ref(prefix + ".b_f", p.b_f));
  out.push_back(ref(prefix + ".W_cx", p.W_cx));
  out.push_back(ref(prefix + ".W_cm", p.W_cm));
  out.push_back(ref(prefix + ".b_c", p.b_c));
  out.push_back(ref(prefix + ".W_ox", p.W_ox));
  out.push_back(ref(prefix + ".W_om", p.W_om));
  out.push_back(ref(prefix + ".w_oc", p.w_oc));
  out.push_back(ref(prefix + ".b_o", p.b_o));
}

inline void append_lstm_tensors(std::vector<TensorRef>& out,
                                const std::string& prefix, LstmCellGrads& g) {
  out.push_back(ref(prefix + ".W_ix", g.W_ix));
  out.push_back(ref(prefix + ".W_im", g.W_im));
  out.push_back(ref(prefix + ".w_ic", g.w_ic));
  out.push_back(ref(prefix + ".b_i", g.b_i));
  out.push_back(ref(prefix + ".W_fx", g.W_fx));
  out.push_back(ref(prefix + ".W_fm", g.W_fm));
  out.push_back(ref(prefix + ".w_fc", g.w_fc));
  out.push_back(ref(prefix + ".b_f", g.b_f));
  out.push_back(ref(prefix + ".W_cx", g.W_cx));
  out.push_back(ref(prefix + ".W_cm", g.W_cm));
  out.push_back(ref(prefix + ".b_c", g.b_c));
  out.push_back(ref(prefix + ".W_ox", g.W_ox));
  out.push_back(ref(prefix + ".W_om", g.W_om));
  out.push_back(ref(prefix + ".w_oc", g.w_oc));
  out.push_back(ref(prefix + ".b_o", g.b_o));
}

/// Everything the backward pass needs from one forward step. Columns are
/// batch samples throughout.
struct LstmStepCache {
  Matrix x;       // (in, B)
  Matrix m_prev;  // (h, B)
  Matrix c_prev;  // (h, B)
  Matrix i, f, g, o;
  Matrix c;       // post-update cell state
  Matrix tanh_c;
};

/// One cell step:
///   i = sigma(W_ix x + W_im m_prev + w_ic . c_prev + b_i)
///   f = sigma(W_fx x + W_fm m_prev + w_fc . c_prev + b_f)
///   c = f . c_prev + i . tanh(W_cx x + W_cm m_prev + b_c)
///   o = sigma(W_ox x + W_om m_prev + w_oc . c + b_o)
///   m = o . tanh(c)
/// Outputs m and c; fills `cache` when given.
inline void lstm_cell_forward(const LstmCellParams& p, const Matrix& x,
                              const Matrix& m_prev, const Matrix& c_prev,
                              Matrix& m_out, Matrix& c_out,
                              LstmStepCache* cache = nullptr) {
  require(x.rows() == p.input_dim(), "lstm_cell_forward: input dim mismatch");
  require(m_prev.rows() == p.hidden_dim() && c_prev.rows() == p.hidden_dim(),
          "lstm_cell_forward: state dim mismatch");
  require(m_prev.cols() == x.cols() && c_prev.cols() == x.cols(),
          "lstm_cell_forward: batch width mismatch");

  Matrix i, f, g, o;
  gemm(i, p.W_ix, x);
  gemm(i, p.W_im, m_prev, true);
  add_rowscale(i, p.w_ic, c_prev);
  add_bias(i, p.b_i);
  sigmoid_inplace(i);

  gemm(f, p.W_fx, x);
  gemm(f, p.W_fm, m_prev, true);
  add_rowscale(f, p.w_fc, c_prev);
  add_bias(f, p.b_f);
  sigmoid_inplace(f);

  gemm(g, p.W_cx, x);
  gemm(g, p.W_cm, m_prev, true);
  add_bias(g, p.b_c);
  tanh_inplace(g);

  c_out.resize(p.hidden_dim(), x.cols());
  add_hadamard(c_out, f, c_prev);
  add_hadamard(c_out, i, g);

  gemm(o, p.W_ox, x);
  gemm(o, p.W_om, m_prev, true);
  add_rowscale(o, p.w_oc, c_out);
  add_bias(o, p.b_o);
  sigmoid_inplace(o);

  Matrix tanh_c = c_out;
  tanh_inplace(tanh_c);
  m_out.resize(p.hidden_dim(), x.cols());
  add_hadamard(m_out, o, tanh_c);

  if (cache) {
    cache->x = x;
    cache->m_prev = m_prev;
    cache->c_prev = c_prev;
    cache->i = std::move(i);
    cache->f = std::move(f);
    cache->g = std::move(g);
    cache->o = std::move(o);
    cache->c = c_out;
    cache->tanh_c = std::move(tanh_c);
  }
}

namespace detail {
inline void add_row_reductions(std::vector<double>& bias_grad,
                               std::vector<double>* peep_grad,
                               const Matrix& da, const Matrix* peep_src) {
  for (std::size_t i = 0; i < da.rows(); ++i) {
    double bsum = 0.0, psum = 0.0;
    const double* dai = da.row(i);
    const double* si = peep_src ? peep_src->row(i) : nullptr;
    for (std::size_t j = 0; j < da.cols(); ++j) {
      bsum += dai[j];
      if (si) psum += dai[j] * si[j];
    }
    bias_grad[i] += bsum;
    if (peep_grad) (*peep_grad)[i] += psum;
  }
}
}  // namespace detail

/// Exact reverse-mode step. `dm` and `dc` carry the gradients flowing into
/// m_t and c_t (from the step's own loss plus everything downstream); on
/// return they hold the gradients w.r.t. m_{t-1} and c_{t-1}. Returns dL/dx
/// and accumulates parameter gradients into `grads`.
inline Matrix lstm_cell_backward(const LstmCellParams& p,
                                 const LstmStepCache& cache, Matrix& dm,
                                 Matrix& dc, LstmCellGrads& grads) {
  const std::size_t h = p.hidden_dim();
  const std::size_t B = cache.x.cols();
  require(dm.rows() == h && dm.cols() == B, "lstm_cell_backward: dm shape");
  require(dc.rows() == h && dc.cols() == B, "lstm_cell_backward: dc shape");

  Matrix da_o(h, B), da_i(h, B), da_f(h, B), da_g(h, B);
  Matrix dc_total = dc;

  for (std::size_t idx = 0; idx < h * B; ++idx) {
    const double o = cache.o.storage()[idx];
    const double tc = cache.tanh_c.storage()[idx];
    const double dmv = dm.storage()[idx];
    const double do_ = dmv * tc;
    da_o.storage()[idx] = do_ * o * (1.0 - o);
    dc_total.storage()[idx] += dmv * o * (1.0 - tc * tc);
  }
  // c_t feeds the output gate through its peephole.
  add_rowscale(dc_total, p.w_oc, da_o);

  for (std::size_t idx = 0; idx < h * B; ++idx) {
    const double i = cache.i.storage()[idx];
    const double f = cache.f.storage()[idx];
    const double g = cache.g.storage()[idx];
    const double cp = cache.c_prev.storage()[idx];
    const double dcv = dc_total.storage()[idx];
    da_i.storage()[idx] = dcv * g * i * (1.0 - i);
    da_f.storage()[idx] = dcv * cp * f * (1.0 - f);
    da_g.storage()[idx] = dcv * i * (1.0 - g * g);
  }

  // Parameter gradients.
  const Matrix xT = transpose(cache.x);
  const Matrix mT = transpose(cache.m_prev);
  gemm(grads.W_ix, da_i, xT, true);
  gemm(grads.W_im, da_i, mT, true);
  gemm(grads.W_fx, da_f, xT, true);
  gemm(grads.W_fm, da_f, mT, true);
  gemm(grads.W_cx, da_g, xT, true);
  gemm(grads.W_cm, da_g, mT, true);
  gemm(grads.W_ox, da_o, xT, true);
  gemm(grads.W_om, da_o, mT, true);
  detail::add_row_reductions(grads.b_i, &grads.w_ic, da_i, &cache.c_prev);
  detail::add_row_reductions(grads.b_f, &grads.w_fc, da_f, &cache.c_prev);
  detail::add_row_reductions(grads.b_c, nullptr, da_g, nullptr);
  detail::add_row_reductions(grads.b_o, &grads.w_oc, da_o, &cache.c);

  // Carry to the previous step.
  for (std::size_t idx = 0; idx < h * B; ++idx)
    dc.storage()[idx] = dc_total.storage()[idx] * cache.f.storage()[idx];
  add_rowscale(dc, p.w_ic, da_i);
  add_rowscale(dc, p.w_fc, da_f);

  gemm_tn(dm, p.W_im, da_i);
  gemm_tn(dm, p.W_fm, da_f, true);
  gemm_tn(dm, p.W_cm, da_g, true);
  gemm_tn(dm, p.W_om, da_o, true);

  Matrix dx;
  gemm_tn(dx, p.W_ix, da_i);
  gemm_tn(dx, p.W_fx, da_f, true);
  gemm_tn(dx, p.W_cx, da_g, true);
  gemm_tn(dx, p.W_ox, da_o, true);
  return dx;
}

}  // namespace deeptrade
