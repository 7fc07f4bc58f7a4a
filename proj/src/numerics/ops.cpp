#include "byov/numerics/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

namespace byov::num {

namespace {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using MapC = Eigen::Map<const Mat<S>>;
template <class S>
using MapM = Eigen::Map<Mat<S>>;

template <class S>
MapC<S> view(std::span<const S> data, std::size_t rows, std::size_t cols) {
  return MapC<S>(data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

template <class S>
MapM<S> view(std::span<S> data, std::size_t rows, std::size_t cols) {
  return MapM<S>(data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

template <class S>
Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>> arr(std::span<const S> data) {
  return {data.data(), static_cast<Eigen::Index>(data.size())};
}

template <class S>
Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>> arr(std::span<S> data) {
  return {data.data(), static_cast<Eigen::Index>(data.size())};
}

template <class S>
void require_2d(const Tensor<S>& t, const char* op) {
  if (t.ndim() != 2) throw DimensionError(std::string(op) + ": expected a 2-D tensor, got " + shape_str(t.shape()));
}

template <class S>
detail::Node<S>& parent(detail::Node<S>& self, std::size_t i) {
  return *self.parents[i];
}

template <class S>
std::span<const S> value_of(detail::Node<S>& n) {
  return *n.value;
}

}  // namespace

template <class S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions differ (" + shape_str(a.shape()) + " . " + shape_str(b.shape()) + ")");
  }
  Buffer<S> out(m * p);
  view<S>(std::span<S>(out), m, p).noalias() = view(a.data(), m, k) * view(b.data(), k, p);
  return make_result<S>({m, p}, std::move(out), {a, b}, [m, k, p](detail::Node<S>& self) {
    auto dc = view<S>(std::span<const S>(self.grad), m, p);
    auto& na = parent(self, 0);
    auto& nb = parent(self, 1);
    if (na.requires_grad) view(na.grad_buffer(), m, k).noalias() += dc * view(value_of(nb), k, p).transpose();
    if (nb.requires_grad) view(nb.grad_buffer(), k, p).noalias() += view(value_of(na), m, k).transpose() * dc;
  });
}

template <class S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& bias) {
  require_2d(x, "linear");
  require_2d(w, "linear");
  const std::size_t l = x.dim(0), in = x.dim(1), out = w.dim(1);
  if (w.dim(0) != in) {
    throw DimensionError("linear: input width " + std::to_string(in) + " vs weight " + shape_str(w.shape()));
  }
  if (bias.numel() != out) throw DimensionError("linear: bias length mismatch");
  Buffer<S> y(l * out);
  auto ym = view<S>(std::span<S>(y), l, out);
  ym.noalias() = view(x.data(), l, in) * view(w.data(), in, out);
  ym.rowwise() += view(bias.data(), 1, out).row(0);
  return make_result<S>({l, out}, std::move(y), {x, w, bias}, [l, in, out](detail::Node<S>& self) {
    auto dy = view<S>(std::span<const S>(self.grad), l, out);
    auto& nx = parent(self, 0);
    auto& nw = parent(self, 1);
    auto& nb = parent(self, 2);
    if (nx.requires_grad) view(nx.grad_buffer(), l, in).noalias() += dy * view(value_of(nw), in, out).transpose();
    if (nw.requires_grad) view(nw.grad_buffer(), in, out).noalias() += view(value_of(nx), l, in).transpose() * dy;
    if (nb.requires_grad) view(nb.grad_buffer(), 1, out).row(0) += dy.colwise().sum();
  });
}

template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Buffer<S> out(a.numel());
  arr(std::span<S>(out)) = arr(a.data()) + arr(b.data());
  return make_result<S>(a.shape(), std::move(out), {a, b}, [](detail::Node<S>& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      auto& n = parent(self, p);
      if (n.requires_grad) arr(n.grad_buffer()) += arr(std::span<const S>(self.grad));
    }
  });
}

template <class S>
Tensor<S> add_rowwise(const Tensor<S>& x, const Tensor<S>& v) {
  const std::size_t n = x.cols();
  if (v.numel() != n) throw DimensionError("add_rowwise: vector length must equal the last axis");
  const std::size_t r = x.numel() / n;
  Buffer<S> out(x.data().begin(), x.data().end());
  auto dv = v.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += dv[j];
  return make_result<S>(x.shape(), std::move(out), {x, v}, [r, n](detail::Node<S>& self) {
    auto& nx = parent(self, 0);
    auto& nv = parent(self, 1);
    if (nx.requires_grad) {
      auto g = nx.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (nv.requires_grad) {
      auto g = nv.grad_buffer();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
    }
  });
}

template <class S>
Tensor<S> scale(const Tensor<S>& x, S factor) {
  Buffer<S> out(x.data().begin(), x.data().end());
  for (auto& v : out) v *= factor;
  return make_result<S>(x.shape(), std::move(out), {x}, [factor](detail::Node<S>& self) {
    auto& nx = parent(self, 0);
    auto g = nx.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

template <class S>
Tensor<S> sum(const Tensor<S>& x) {
  S total = 0;
  for (S v : x.data()) total += v;
  return make_result<S>({1}, {total}, {x}, [](detail::Node<S>& self) {
    auto& nx = parent(self, 0);
    auto g = nx.grad_buffer();
    const S up = self.grad[0];
    for (auto& e : g) e += up;
  });
}

template <class S>
Tensor<S> add_scalars(const std::vector<Tensor<S>>& terms) {
  if (terms.empty()) throw ContractError("add_scalars: no terms");
  S total = 0;
  for (const auto& t : terms) total += t.item();
  return make_result<S>({1}, {total}, terms, [](detail::Node<S>& self) {
    for (auto& p : self.parents) {
      if (p->requires_grad) p->grad_buffer()[0] += self.grad[0];
    }
  });
}

template <class S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta, S eps) {
  if (!(eps > S(0))) throw ContractError("layer_norm: eps must be positive");
  const std::size_t d = x.cols();
  if (gamma.numel() != d || beta.numel() != d) throw DimensionError("layer_norm: affine length must equal the last axis");
  const std::size_t r = x.numel() / d;
  auto xv = x.data();
  auto gv = gamma.data();
  auto bv = beta.data();
  Buffer<S> xhat(x.numel());
  Buffer<S> inv_std(r);
  Buffer<S> out(x.numel());
  for (std::size_t i = 0; i < r; ++i) {
    const S* row = xv.data() + i * d;
    S mean = 0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= S(d);
    S var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= S(d);
    const S is = S(1) / std::sqrt(var + eps);
    inv_std[i] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const S h = (row[j] - mean) * is;
      xhat[i * d + j] = h;
      out[i * d + j] = h * gv[j] + bv[j];
    }
  }
  return make_result<S>(x.shape(), std::move(out), {x, gamma, beta},
                        [r, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node<S>& self) {
                          auto& nx = parent(self, 0);
                          auto& ng = parent(self, 1);
                          auto& nb = parent(self, 2);
                          auto gv = value_of(ng);
                          const S* dy = self.grad.data();
                          if (ng.requires_grad || nb.requires_grad) {
                            auto gg = ng.requires_grad ? ng.grad_buffer() : std::span<S>();
                            auto gb = nb.requires_grad ? nb.grad_buffer() : std::span<S>();
                            for (std::size_t i = 0; i < r; ++i)
                              for (std::size_t j = 0; j < d; ++j) {
                                if (!gg.empty()) gg[j] += dy[i * d + j] * xhat[i * d + j];
                                if (!gb.empty()) gb[j] += dy[i * d + j];
                              }
                          }
                          if (!nx.requires_grad) return;
                          auto gx = nx.grad_buffer();
                          for (std::size_t i = 0; i < r; ++i) {
                            S mean_dh = 0, mean_dh_h = 0;
                            for (std::size_t j = 0; j < d; ++j) {
                              const S dh = dy[i * d + j] * gv[j];
                              mean_dh += dh;
                              mean_dh_h += dh * xhat[i * d + j];
                            }
                            mean_dh /= S(d);
                            mean_dh_h /= S(d);
                            for (std::size_t j = 0; j < d; ++j) {
                              const S dh = dy[i * d + j] * gv[j];
                              gx[i * d + j] += inv_std[i] * (dh - mean_dh - xhat[i * d + j] * mean_dh_h);
                            }
                          }
                        });
}

template <class S>
Tensor<S> gelu(const Tensor<S>& x) {
  const S c = std::sqrt(S(2) / std::numbers::pi_v<S>);
  const S a = S(0.044715);
  auto xv = arr(x.data());
  Buffer<S> out(x.numel());
  Buffer<S> th(x.numel());
  arr(std::span<S>(th)) = (c * (xv + a * xv.cube())).tanh();
  arr(std::span<S>(out)) = S(0.5) * xv * (S(1) + arr(std::span<const S>(th)));
  return make_result<S>(x.shape(), std::move(out), {x}, [c, a, th = std::move(th)](detail::Node<S>& self) {
    auto& nx = parent(self, 0);
    auto xv = arr(value_of(nx));
    auto t = arr(std::span<const S>(th));
    auto d = S(0.5) * (S(1) + t) + S(0.5) * xv * (S(1) - t.square()) * (c * (S(1) + S(3) * a * xv.square()));
    arr(nx.grad_buffer()) += arr(std::span<const S>(self.grad)) * d;
  });
}

namespace {

// Softmax probabilities for one head; blocked keys get exactly zero weight.
template <class S>
Mat<S> attention_probs(const Eigen::Ref<const Mat<S>>& q, const Eigen::Ref<const Mat<S>>& k,
                       const AttentionMask<S>* mask, S inv_sqrt) {
  Mat<S> scores = (q * k.transpose()) * inv_sqrt;
  const Eigen::Index lq = scores.rows(), lk = scores.cols();
  for (Eigen::Index i = 0; i < lq; ++i) {
    S mx = -std::numeric_limits<S>::infinity();
    bool any = false;
    for (Eigen::Index j = 0; j < lk; ++j) {
      if (mask && !mask->allowed(i, j)) continue;
      if (!std::isfinite(scores(i, j))) throw NumericError("masked_attention: non-finite attention score");
      mx = std::max(mx, scores(i, j));
      any = true;
    }
    if (!any) {
      throw DegenerateAttentionError("masked_attention: query row " + std::to_string(i) + " has no allowed key");
    }
    S denom = 0;
    for (Eigen::Index j = 0; j < lk; ++j) {
      if (mask && !mask->allowed(i, j)) {
        scores(i, j) = S(0);
        continue;
      }
      const S e = std::exp(scores(i, j) - mx);
      scores(i, j) = e;
      denom += e;
    }
    scores.row(i) /= denom;
  }
  return scores;
}

}  // namespace

template <class S>
std::vector<S> attention_weights(const Tensor<S>& q, const Tensor<S>& k, const AttentionMask<S>* mask) {
  const std::size_t l = q.dim(0), d = q.dim(1);
  Mat<S> p = attention_probs<S>(view(q.data(), l, d), view(k.data(), k.dim(0), d), mask, S(1) / std::sqrt(S(d)));
  return std::vector<S>(p.data(), p.data() + p.size());
}

template <class S>
Tensor<S> masked_attention(const Tensor<S>& q, const Tensor<S>& k, const Tensor<S>& v,
                           const AttentionMask<S>* mask, std::size_t num_heads) {
  require_2d(q, "masked_attention");
  require_2d(k, "masked_attention");
  require_2d(v, "masked_attention");
  const std::size_t l = q.dim(0), d = q.dim(1);
  if (k.shape() != q.shape() || v.shape() != q.shape()) throw DimensionError("masked_attention: q, k, v shapes differ");
  if (num_heads == 0 || d % num_heads != 0) throw DimensionError("masked_attention: width not divisible by head count");
  if (mask && mask->size != l) throw DimensionError("masked_attention: mask size does not match sequence length");
  const std::size_t dh = d / num_heads;
  const S inv_sqrt = S(1) / std::sqrt(S(dh));

  auto qm = view(q.data(), l, d);
  auto km = view(k.data(), l, d);
  auto vm = view(v.data(), l, d);
  Buffer<S> out(l * d);
  auto om = view<S>(std::span<S>(out), l, d);
  std::vector<Mat<S>> probs;
  probs.reserve(num_heads);
  for (std::size_t h = 0; h < num_heads; ++h) {
    const Eigen::Index c0 = static_cast<Eigen::Index>(h * dh), w = static_cast<Eigen::Index>(dh);
    probs.push_back(attention_probs<S>(qm.middleCols(c0, w), km.middleCols(c0, w), mask, inv_sqrt));
    om.middleCols(c0, w).noalias() = probs.back() * vm.middleCols(c0, w);
  }
  return make_result<S>({l, d}, std::move(out), {q, k, v},
                        [l, d, dh, inv_sqrt, probs = std::move(probs)](detail::Node<S>& self) {
                          auto& nq = parent(self, 0);
                          auto& nk = parent(self, 1);
                          auto& nv = parent(self, 2);
                          auto dout = view<S>(std::span<const S>(self.grad), l, d);
                          auto qm = view(value_of(nq), l, d);
                          auto km = view(value_of(nk), l, d);
                          auto vm = view(value_of(nv), l, d);
                          for (std::size_t h = 0; h < probs.size(); ++h) {
                            const Eigen::Index c0 = static_cast<Eigen::Index>(h * dh), w = static_cast<Eigen::Index>(dh);
                            const Mat<S>& p = probs[h];
                            auto dout_h = dout.middleCols(c0, w);
                            if (nv.requires_grad) view(nv.grad_buffer(), l, d).middleCols(c0, w).noalias() += p.transpose() * dout_h;
                            if (!nq.requires_grad && !nk.requires_grad) continue;
                            Mat<S> dp = dout_h * vm.middleCols(c0, w).transpose();
                            Eigen::Matrix<S, Eigen::Dynamic, 1> rowdot = (dp.cwiseProduct(p)).rowwise().sum();
                            Mat<S> ds = p.cwiseProduct(dp.colwise() - rowdot) * inv_sqrt;
                            if (nq.requires_grad) view(nq.grad_buffer(), l, d).middleCols(c0, w).noalias() += ds * km.middleCols(c0, w);
                            if (nk.requires_grad) view(nk.grad_buffer(), l, d).middleCols(c0, w).noalias() += ds.transpose() * qm.middleCols(c0, w);
                          }
                        });
}

template <class S>
Tensor<S> mse_loss(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("mse_loss: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  auto av = a.data();
  auto bv = b.data();
  const S inv_n = S(1) / S(av.size());
  S total = 0;
  for (std::size_t i = 0; i < av.size(); ++i) total += (av[i] - bv[i]) * (av[i] - bv[i]);
  return make_result<S>({1}, {total * inv_n}, {a, b}, [inv_n](detail::Node<S>& self) {
    auto& na = parent(self, 0);
    auto& nb = parent(self, 1);
    auto av = value_of(na);
    auto bv = value_of(nb);
    const S up = self.grad[0] * S(2) * inv_n;
    if (na.requires_grad) {
      auto g = na.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += up * (av[i] - bv[i]);
    }
    if (nb.requires_grad) {
      auto g = nb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= up * (av[i] - bv[i]);
    }
  });
}

template <class S>
Tensor<S> mse_loss_rows(const Tensor<S>& a, const Tensor<S>& b, std::span<const std::size_t> rows) {
  if (a.shape() != b.shape()) throw DimensionError("mse_loss_rows: shape mismatch");
  if (rows.empty()) throw ContractError("mse_loss_rows: no rows selected");
  const std::size_t n = a.cols();
  const std::size_t r = a.numel() / n;
  for (std::size_t row : rows) {
    if (row >= r) throw DimensionError("mse_loss_rows: row index out of range");
  }
  std::vector<std::size_t> sel(rows.begin(), rows.end());
  auto av = a.data();
  auto bv = b.data();
  const S inv_n = S(1) / S(sel.size() * n);
  S total = 0;
  for (std::size_t row : sel)
    for (std::size_t j = 0; j < n; ++j) {
      const S diff = av[row * n + j] - bv[row * n + j];
      total += diff * diff;
    }
  return make_result<S>({1}, {total * inv_n}, {a, b}, [inv_n, n, sel = std::move(sel)](detail::Node<S>& self) {
    auto& na = parent(self, 0);
    auto& nb = parent(self, 1);
    auto av = value_of(na);
    auto bv = value_of(nb);
    const S up = self.grad[0] * S(2) * inv_n;
    for (std::size_t row : sel)
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t idx = row * n + j;
        const S diff = av[idx] - bv[idx];
        if (na.requires_grad) na.grad_buffer()[idx] += up * diff;
        if (nb.requires_grad) nb.grad_buffer()[idx] -= up * diff;
      }
  });
}

template <class S>
Tensor<S> concat_rows(const std::vector<Tensor<S>>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no parts");
  const std::size_t n = parts.front().cols();
  std::size_t total_rows = 0;
  for (const auto& p : parts) {
    if (p.ndim() != 2 || p.cols() != n) throw DimensionError("concat_rows: parts must be 2-D with equal widths");
    total_rows += p.dim(0);
  }
  Buffer<S> out;
  out.reserve(total_rows * n);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return make_result<S>({total_rows, n}, std::move(out), parts, [](detail::Node<S>& self) {
    std::size_t offset = 0;
    for (auto& p : self.parents) {
      const std::size_t len = p->value->size();
      if (p->requires_grad) {
        auto g = p->grad_buffer();
        for (std::size_t i = 0; i < len; ++i) g[i] += self.grad[offset + i];
      }
      offset += len;
    }
  });
}

template <class S>
Tensor<S> slice_rows(const Tensor<S>& x, std::size_t begin, std::size_t end) {
  require_2d(x, "slice_rows");
  if (begin >= end || end > x.dim(0)) throw DimensionError("slice_rows: invalid row range");
  const std::size_t n = x.dim(1);
  Buffer<S> out(x.data().begin() + begin * n, x.data().begin() + end * n);
  return make_result<S>({end - begin, n}, std::move(out), {x}, [begin, n](detail::Node<S>& self) {
    auto g = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * n + i] += self.grad[i];
  });
}

template <class S>
Tensor<S> gather_rows(const Tensor<S>& table, std::span<const std::size_t> indices) {
  require_2d(table, "gather_rows");
  if (indices.empty()) throw DimensionError("gather_rows: no indices");
  const std::size_t n = table.dim(1);
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  auto tv = table.data();
  Buffer<S> out(idx.size() * n);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= table.dim(0)) {
      throw DimensionError("gather_rows: index " + std::to_string(idx[i]) + " outside table of " +
                           std::to_string(table.dim(0)) + " rows");
    }
    std::copy_n(tv.begin() + idx[i] * n, n, out.begin() + i * n);
  }
  const std::size_t count = idx.size();
  return make_result<S>({count, n}, std::move(out), {table}, [n, idx = std::move(idx)](detail::Node<S>& self) {
    auto g = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < n; ++j) g[idx[i] * n + j] += self.grad[i * n + j];
  });
}

template <class S>
Tensor<S> as_row(const Tensor<S>& v) {
  Buffer<S> out(v.data().begin(), v.data().end());
  return make_result<S>({1, v.numel()}, std::move(out), {v}, [](detail::Node<S>& self) {
    auto g = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

#define BYOV_INSTANTIATE_OPS(S)                                                                                  \
  template Tensor<S> matmul(const Tensor<S>&, const Tensor<S>&);                                                 \
  template Tensor<S> linear(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&);                               \
  template Tensor<S> add(const Tensor<S>&, const Tensor<S>&);                                                    \
  template Tensor<S> add_rowwise(const Tensor<S>&, const Tensor<S>&);                                            \
  template Tensor<S> scale(const Tensor<S>&, S);                                                                 \
  template Tensor<S> sum(const Tensor<S>&);                                                                      \
  template Tensor<S> add_scalars(const std::vector<Tensor<S>>&);                                                 \
  template Tensor<S> layer_norm(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, S);                        \
  template Tensor<S> gelu(const Tensor<S>&);                                                                     \
  template Tensor<S> masked_attention(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&,                      \
                                      const AttentionMask<S>*, std::size_t);                                     \
  template std::vector<S> attention_weights(const Tensor<S>&, const Tensor<S>&, const AttentionMask<S>*);        \
  template Tensor<S> mse_loss(const Tensor<S>&, const Tensor<S>&);                                               \
  template Tensor<S> mse_loss_rows(const Tensor<S>&, const Tensor<S>&, std::span<const std::size_t>);            \
  template Tensor<S> concat_rows(const std::vector<Tensor<S>>&);                                                 \
  template Tensor<S> slice_rows(const Tensor<S>&, std::size_t, std::size_t);                                     \
  template Tensor<S> gather_rows(const Tensor<S>&, std::span<const std::size_t>);                                \
  template Tensor<S> as_row(const Tensor<S>&);

BYOV_INSTANTIATE_OPS(float)
BYOV_INSTANTIATE_OPS(double)

#undef BYOV_INSTANTIATE_OPS

}  // namespace byov::num
