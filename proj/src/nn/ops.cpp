#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

#include "tac/kernels.hpp"
#include "tac/nn.hpp"

namespace tac::nn {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

// Strided convolution is handled by splitting the zero-padded input into
// `stride` phase rows: padded[s*t + r] == phase[r][t]. Every (channel, tap)
// pair then reads a contiguous row, so forward, input-gradient and
// weight-gradient passes all reduce to accumulate_taps / dot_taps.
Var conv1d(Graph& g, Var x, Param w, Param b, int stride) {
  const auto& wi = w.store->info(w.id);
  require(wi.shape.size() == 3, "conv1d: weight must be [out, in, kernel]");
  const int cout = wi.shape[0], cin = wi.shape[1], k = wi.shape[2];
  const Tensor& in = g.value(x);
  require(in.channels == cin, "conv1d: input channel mismatch");
  require(k % 2 == 1, "conv1d: kernel must be odd");
  require(stride == 1 || stride == 2, "conv1d: stride must be 1 or 2");
  require(in.length % stride == 0, "conv1d: length not divisible by stride");
  require(b.store->info(b.id).size == static_cast<std::size_t>(cout), "conv1d: bias size mismatch");

  const int len = in.length;
  const int lout = len / stride;
  const int pad = (k - 1) / 2;
  const int plen = lout + (k - 1) / stride + 1;
  const std::size_t phase_size = static_cast<std::size_t>(cin) * stride * plen;

  auto phases = std::make_shared<std::vector<double>>(phase_size, 0.0);
  auto phase_row = [plen, stride](double* base, int ci, int r) {
    return base + (static_cast<std::size_t>(ci) * stride + r) * plen;
  };
  for (int ci = 0; ci < cin; ++ci) {
    const double* src = in.row(ci);
    for (int i = 0; i < len; ++i) {
      const int pos = i + pad;
      phase_row(phases->data(), ci, pos % stride)[pos / stride] = src[i];
    }
  }
  std::vector<const double*> rows(static_cast<std::size_t>(cin) * k);
  for (int ci = 0; ci < cin; ++ci)
    for (int j = 0; j < k; ++j) rows[ci * k + j] = phase_row(phases->data(), ci, j % stride) + j / stride;

  const auto& kt = kernels::active();
  const auto wv = g.param_values(w);
  const auto bv = g.param_values(b);
  Tensor out(cout, lout);
  for (int co = 0; co < cout; ++co) {
    double* o = out.row(co);
    std::fill(o, o + lout, bv[co]);
    kt.accumulate_taps(o, lout, rows.data(), wv.data() + static_cast<std::size_t>(co) * cin * k,
                       static_cast<std::size_t>(cin) * k);
  }

  const bool rg = g.requires_grad(x) || g.param_trainable(w) || g.param_trainable(b);
  return g.emit(std::move(out), rg, [=](Graph& gr, const std::vector<double>& gout) {
    const auto& kt2 = kernels::active();
    std::vector<const double*> taps(static_cast<std::size_t>(cin) * k);
    for (int ci = 0; ci < cin; ++ci)
      for (int j = 0; j < k; ++j) taps[ci * k + j] = phase_row(phases->data(), ci, j % stride) + j / stride;

    if (double* gw = gr.param_grad(w)) {
      for (int co = 0; co < cout; ++co)
        kt2.dot_taps(gout.data() + static_cast<std::size_t>(co) * lout, lout, taps.data(),
                     gw + static_cast<std::size_t>(co) * cin * k, static_cast<std::size_t>(cin) * k);
    }
    if (double* gb = gr.param_grad(b)) {
      for (int co = 0; co < cout; ++co) {
        const double* r = gout.data() + static_cast<std::size_t>(co) * lout;
        double s = 0.0;
        for (int t = 0; t < lout; ++t) s += r[t];
        gb[co] += s;
      }
    }
    if (gr.requires_grad(x)) {
      const auto wv2 = gr.param_values(w);
      std::vector<double> gph(phase_size, 0.0);
      std::vector<const double*> grows(static_cast<std::size_t>(cout));
      for (int co = 0; co < cout; ++co) grows[co] = gout.data() + static_cast<std::size_t>(co) * lout;
      std::vector<double> wcol(static_cast<std::size_t>(cout));
      for (int ci = 0; ci < cin; ++ci) {
        for (int j = 0; j < k; ++j) {
          for (int co = 0; co < cout; ++co) wcol[co] = wv2[(static_cast<std::size_t>(co) * cin + ci) * k + j];
          kt2.accumulate_taps(phase_row(gph.data(), ci, j % stride) + j / stride, lout, grows.data(), wcol.data(),
                              static_cast<std::size_t>(cout));
        }
      }
      auto& gx = gr.grad_mut(x);
      for (int ci = 0; ci < cin; ++ci) {
        double* dst = gx.data() + static_cast<std::size_t>(ci) * len;
        for (int i = 0; i < len; ++i) {
          const int pos = i + pad;
          dst[i] += phase_row(gph.data(), ci, pos % stride)[pos / stride];
        }
      }
    }
  });
}

Var dense(Graph& g, Var x, Param w, Param b) {
  const auto& wi = w.store->info(w.id);
  require(wi.shape.size() == 2, "dense: weight must be [out, in]");
  const int nout = wi.shape[0], nin = wi.shape[1];
  const Tensor& in = g.value(x);
  require(in.size() == static_cast<std::size_t>(nin), "dense: input size mismatch");

  const auto wv = g.param_values(w);
  const auto bv = g.param_values(b);
  std::vector<const double*> wrows(static_cast<std::size_t>(nout));
  for (int o = 0; o < nout; ++o) wrows[o] = wv.data() + static_cast<std::size_t>(o) * nin;
  Tensor out(nout, 1);
  std::copy(bv.begin(), bv.end(), out.data.begin());
  kernels::active().dot_taps(in.data.data(), nin, wrows.data(), out.data.data(), nout);

  const bool rg = g.requires_grad(x) || g.param_trainable(w) || g.param_trainable(b);
  return g.emit(std::move(out), rg, [=](Graph& gr, const std::vector<double>& gout) {
    const auto& kt = kernels::active();
    const double* xin = gr.value(x).data.data();
    if (double* gw = gr.param_grad(w)) {
      for (int o = 0; o < nout; ++o) kt.accumulate_taps(gw + static_cast<std::size_t>(o) * nin, nin, &xin, &gout[o], 1);
    }
    if (double* gb = gr.param_grad(b)) {
      for (int o = 0; o < nout; ++o) gb[o] += gout[o];
    }
    if (gr.requires_grad(x)) {
      const auto wv2 = gr.param_values(w);
      std::vector<const double*> rows(static_cast<std::size_t>(nout));
      for (int o = 0; o < nout; ++o) rows[o] = wv2.data() + static_cast<std::size_t>(o) * nin;
      kt.accumulate_taps(gr.grad_mut(x).data(), nin, rows.data(), gout.data(), nout);
    }
  });
}

Var relu(Graph& g, Var x) {
  Tensor out = g.value(x);
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return g.emit(std::move(out), g.requires_grad(x), [x](Graph& gr, const std::vector<double>& gout) {
    const auto& in = gr.value(x).data;
    auto& gx = gr.grad_mut(x);
    for (std::size_t i = 0; i < in.size(); ++i)
      if (in[i] > 0.0) gx[i] += gout[i];
  });
}

Var sigmoid(Graph& g, Var x) {
  Tensor out = g.value(x);
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  const Var y{static_cast<int>(g.node_count())};
  return g.emit(std::move(out), g.requires_grad(x), [x, y](Graph& gr, const std::vector<double>& gout) {
    const auto& s = gr.value(y).data;
    auto& gx = gr.grad_mut(x);
    for (std::size_t i = 0; i < s.size(); ++i) gx[i] += gout[i] * s[i] * (1.0 - s[i]);
  });
}

Var upsample2(Graph& g, Var x) {
  const Tensor& in = g.value(x);
  Tensor out(in.channels, in.length * 2);
  for (int c = 0; c < in.channels; ++c) {
    const double* s = in.row(c);
    double* d = out.row(c);
    for (int t = 0; t < in.length; ++t) d[2 * t] = d[2 * t + 1] = s[t];
  }
  const int channels = in.channels, len = in.length;
  return g.emit(std::move(out), g.requires_grad(x), [=](Graph& gr, const std::vector<double>& gout) {
    auto& gx = gr.grad_mut(x);
    for (int c = 0; c < channels; ++c)
      for (int t = 0; t < len; ++t) {
        const std::size_t o = static_cast<std::size_t>(c) * len * 2 + 2 * t;
        gx[static_cast<std::size_t>(c) * len + t] += gout[o] + gout[o + 1];
      }
  });
}

Var add(Graph& g, Var a, Var b) {
  const Tensor& ta = g.value(a);
  const Tensor& tb = g.value(b);
  require(ta.channels == tb.channels && ta.length == tb.length, "add: shape mismatch");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += tb.data[i];
  const bool rg = g.requires_grad(a) || g.requires_grad(b);
  return g.emit(std::move(out), rg, [a, b](Graph& gr, const std::vector<double>& gout) {
    for (Var v : {a, b}) {
      if (!gr.requires_grad(v)) continue;
      auto& gv = gr.grad_mut(v);
      for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += gout[i];
    }
  });
}

Var scale(Graph& g, Var x, double s) {
  Tensor out = g.value(x);
  for (double& v : out.data) v *= s;
  return g.emit(std::move(out), g.requires_grad(x), [x, s](Graph& gr, const std::vector<double>& gout) {
    auto& gx = gr.grad_mut(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += s * gout[i];
  });
}

Var global_avg_pool(Graph& g, Var x) {
  const Tensor& in = g.value(x);
  Tensor out(in.channels, 1);
  for (int c = 0; c < in.channels; ++c) {
    const double* r = in.row(c);
    double s = 0.0;
    for (int t = 0; t < in.length; ++t) s += r[t];
    out.data[c] = s / in.length;
  }
  const int channels = in.channels, len = in.length;
  return g.emit(std::move(out), g.requires_grad(x), [=](Graph& gr, const std::vector<double>& gout) {
    auto& gx = gr.grad_mut(x);
    for (int c = 0; c < channels; ++c) {
      const double d = gout[c] / len;
      for (int t = 0; t < len; ++t) gx[static_cast<std::size_t>(c) * len + t] += d;
    }
  });
}

Var sum(Graph& g, std::span<const Var> terms) {
  require(!terms.empty(), "sum: no terms");
  double s = 0.0;
  bool rg = false;
  for (Var v : terms) {
    require(g.value(v).size() == 1, "sum: terms must be scalars");
    s += g.value(v).scalar();
    rg = rg || g.requires_grad(v);
  }
  std::vector<Var> ts(terms.begin(), terms.end());
  return g.emit(Tensor(1, 1, s), rg, [ts](Graph& gr, const std::vector<double>& gout) {
    for (Var v : ts)
      if (gr.requires_grad(v)) gr.grad_mut(v)[0] += gout[0];
  });
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  const double mx = *std::max_element(p.begin(), p.end());
  double z = 0.0;
  for (double& v : p) {
    v = std::exp(v - mx);
    z += v;
  }
  for (double& v : p) v /= z;
  return p;
}

Var cross_entropy(Graph& g, Var logits, int label, double eps) {
  const auto& l = g.value(logits).data;
  require(label >= 0 && static_cast<std::size_t>(label) < l.size(), "cross_entropy: label out of range");
  auto p = softmax(l);
  double loss = 0.0;
  bool clamped = false;
  if (eps > 0.0) {
    const double pl = p[static_cast<std::size_t>(label)];
    clamped = pl < eps;
    loss = -std::log(clamped ? eps : pl);
  } else {
    const double m = *std::max_element(l.begin(), l.end());
    double z = 0.0;
    for (double v : l) z += std::exp(v - m);
    loss = m + std::log(z) - l[static_cast<std::size_t>(label)];
  }
  return g.emit(Tensor(1, 1, loss), g.requires_grad(logits),
                [logits, label, clamped, p = std::move(p)](Graph& gr, const std::vector<double>& gout) {
                  if (clamped) return;
                  auto& gl = gr.grad_mut(logits);
                  for (std::size_t i = 0; i < p.size(); ++i)
                    gl[i] += gout[0] * (p[i] - (static_cast<int>(i) == label ? 1.0 : 0.0));
                });
}

Var mean_squared_error(Graph& g, Var pred, const Tensor& target) {
  const auto& p = g.value(pred).data;
  require(p.size() == target.size(), "mse: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - target.data[i]) * (p[i] - target.data[i]);
  const double n = static_cast<double>(p.size());
  return g.emit(Tensor(1, 1, s / n), g.requires_grad(pred), [pred, target, n](Graph& gr, const std::vector<double>& gout) {
    const auto& pv = gr.value(pred).data;
    auto& gp = gr.grad_mut(pred);
    for (std::size_t i = 0; i < pv.size(); ++i) gp[i] += gout[0] * 2.0 * (pv[i] - target.data[i]) / n;
  });
}

Var relative_error_percent(Graph& g, Var x_hat, const Tensor& x, double eps) {
  const auto& xh = g.value(x_hat).data;
  require(xh.size() == x.size(), "relative_error_percent: size mismatch");
  const double m = static_cast<double>(xh.size());
  double s = 0.0;
  for (std::size_t i = 0; i < xh.size(); ++i) s += std::abs(x.data[i] - xh[i]) / std::max(std::abs(x.data[i]), eps);
  return g.emit(Tensor(1, 1, s * 100.0 / m), g.requires_grad(x_hat),
                [x_hat, x, eps, m](Graph& gr, const std::vector<double>& gout) {
                  const auto& v = gr.value(x_hat).data;
                  auto& gx = gr.grad_mut(x_hat);
                  const double c = gout[0] * 100.0 / m;
                  for (std::size_t i = 0; i < v.size(); ++i) {
                    const double d = v[i] - x.data[i];
                    if (d == 0.0) continue;
                    gx[i] += c * (d > 0.0 ? 1.0 : -1.0) / std::max(std::abs(x.data[i]), eps);
                  }
                });
}

}  // namespace tac::nn
