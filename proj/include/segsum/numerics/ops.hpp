// Copyright 2026 The Segsum Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "segsum/numerics/mask.hpp"
#include "segsum/numerics/random.hpp"
#include "segsum/numerics/tensor.hpp"

namespace segsum::numerics {

namespace detail {

inline void require(bool ok, const char* op, const std::string& detail) {
  if (!ok) throw ShapeError(op, detail);
}

template <typename T>
std::string pair_string(const Tensor<T>& a, const Tensor<T>& b) {
  return shape_string(a.shape()) + " and " + shape_string(b.shape());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

// (m x k) . (k x n) -> (m x n). A rank-1 left operand is a single row.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require(b.rank() == 2 && a.rank() <= 2 && a.cols() == b.rows(),
                  "matmul", detail::pair_string(a, b));
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<T> out(m * n, T(0));
  const T* A = a.data();
  const T* B = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    T* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = A[i * k + p];
      const T* brow = B + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
    }
  }
  return make_result<T>("matmul", {m, n}, std::move(out), {a, b},
                        [m, k, n](Node<T>& self) {
    Node<T>& pa = *self.parents[0];
    Node<T>& pb = *self.parents[1];
    const T* g = self.grad.data();
    if (T* ga = grad_sink(pa)) {
      const T* B = pb.value.data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const T* brow = B + p * n;
          const T* grow = g + i * n;
          T acc = 0;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (T* gb = grad_sink(pb)) {
      const T* A = pa.value.data();
      for (std::size_t i = 0; i < m; ++i) {
        const T* grow = g + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const T aip = A[i * k + p];
          T* gbrow = gb + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
        }
      }
    }
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  detail::require(a.rank() == 2, "transpose", shape_string(a.shape()));
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<T> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.data()[i * c + j];
  }
  return make_result<T>("transpose", {c, r}, std::move(out), {a},
                        [r, c](Node<T>& self) {
    if (T* ga = grad_sink(*self.parents[0])) {
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += self.grad[j * r + i];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require(a.shape() == b.shape(), "add", detail::pair_string(a, b));
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_result<T>("add", a.shape(), std::move(out), {a, b},
                        [](Node<T>& self) {
    for (auto& parent : self.parents) {
      if (T* g = grad_sink(*parent)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
      }
    }
  });
}

// Adds a length-c vector to every row of an (r x c) matrix.
template <typename T>
Tensor<T> add_row(const Tensor<T>& a, const Tensor<T>& bias) {
  detail::require(bias.size() == a.cols(), "add_row", detail::pair_string(a, bias));
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<T> out(a.values().begin(), a.values().end());
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += bias.data()[j];
  }
  return make_result<T>("add_row", a.shape(), std::move(out), {a, bias},
                        [r, c](Node<T>& self) {
    if (T* ga = grad_sink(*self.parents[0])) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
    }
    if (T* gb = grad_sink(*self.parents[1])) {
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) gb[j] += self.grad[i * c + j];
      }
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * factor;
  return make_result<T>("scale", a.shape(), std::move(out), {a},
                        [factor](Node<T>& self) {
    if (T* g = grad_sink(*self.parents[0])) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * factor;
    }
  });
}

// Exact (erf based) GELU.
template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T x = a.data()[i];
    out[i] = T(0.5) * x * (T(1) + std::erf(x * T(std::numbers::sqrt2 / 2)));
  }
  return make_result<T>("gelu", a.shape(), std::move(out), {a},
                        [](Node<T>& self) {
    Node<T>& parent = *self.parents[0];
    if (T* g = grad_sink(parent)) {
      const T inv_sqrt_2pi = T(0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        const T x = parent.value[i];
        const T cdf = T(0.5) * (T(1) + std::erf(x * T(std::numbers::sqrt2 / 2)));
        const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * x * x);
        g[i] += self.grad[i] * (cdf + x * pdf);
      }
    }
  });
}

// Inverted dropout; identity when rate is zero.
template <typename T>
Tensor<T> dropout(const Tensor<T>& a, double rate, Rng& rng) {
  if (rate <= 0.0) return a;
  const T keep_scale = T(1.0 / (1.0 - rate));
  std::vector<T> keep(a.size());
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    keep[i] = rng.uniform() < rate ? T(0) : keep_scale;
    out[i] = a.data()[i] * keep[i];
  }
  return make_result<T>("dropout", a.shape(), std::move(out), {a},
                        [keep = std::move(keep)](Node<T>& self) {
    if (T* g = grad_sink(*self.parents[0])) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * keep[i];
    }
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T total = 0;
  for (T v : a.values()) total += v;
  return make_result<T>("sum", {1}, {total}, {a}, [](Node<T>& self) {
    if (T* g = grad_sink(*self.parents[0])) {
      const std::size_t n = self.parents[0]->value.size();
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
    }
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  detail::require(a.size() > 0, "mean", shape_string(a.shape()));
  return scale(sum(a), T(1) / static_cast<T>(a.size()));
}

// ---------------------------------------------------------------------------
// Shape manipulation
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  detail::require(!parts.empty(), "concat", "no inputs");
  const std::size_t r = parts.front().rows();
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const auto& part : parts) {
    detail::require(part.rows() == r, "concat",
                    detail::pair_string(parts.front(), part));
    offsets.push_back(total);
    total += part.cols();
  }
  std::vector<T> out(r * total);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const std::size_t c = parts[p].cols();
    for (std::size_t i = 0; i < r; ++i) {
      std::copy_n(parts[p].data() + i * c, c, out.data() + i * total + offsets[p]);
    }
  }
  return make_result<T>("concat", {r, total}, std::move(out), parts,
                        [r, total, offsets](Node<T>& self) {
    for (std::size_t p = 0; p < self.parents.size(); ++p) {
      Node<T>& parent = *self.parents[p];
      if (T* g = grad_sink(parent)) {
        const std::size_t c = parent.value.size() / r;
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t j = 0; j < c; ++j) {
            g[i * c + j] += self.grad[i * total + offsets[p] + j];
          }
        }
      }
    }
  });
}

// Columns [begin, end) of an (r x c) matrix.
template <typename T>
Tensor<T> slice_cols(const Tensor<T>& a, std::size_t begin, std::size_t end) {
  detail::require(begin <= end && end <= a.cols(), "slice",
                  shape_string(a.shape()) + " cols " + std::to_string(begin) +
                      ".." + std::to_string(end));
  const std::size_t r = a.rows(), c = a.cols(), w = end - begin;
  std::vector<T> out(r * w);
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(a.data() + i * c + begin, w, out.data() + i * w);
  }
  return make_result<T>("slice", {r, w}, std::move(out), {a},
                        [r, c, w, begin](Node<T>& self) {
    if (T* g = grad_sink(*self.parents[0])) {
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < w; ++j) g[i * c + begin + j] += self.grad[i * w + j];
      }
    }
  });
}

// Row gather: embedding lookup when `table` is an embedding matrix.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::span<const int> ids) {
  detail::require(table.rank() == 2, "embedding_lookup", shape_string(table.shape()));
  const std::size_t c = table.cols(), n_rows = table.rows();
  std::vector<T> out(ids.size() * c);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    detail::require(ids[i] >= 0 && static_cast<std::size_t>(ids[i]) < n_rows,
                    "embedding_lookup",
                    "index " + std::to_string(ids[i]) + " outside " +
                        shape_string(table.shape()));
    std::copy_n(table.data() + static_cast<std::size_t>(ids[i]) * c, c,
                out.data() + i * c);
  }
  std::vector<int> saved(ids.begin(), ids.end());
  return make_result<T>("embedding_lookup", {ids.size(), c}, std::move(out),
                        {table}, [c, saved = std::move(saved)](Node<T>& self) {
    if (T* g = grad_sink(*self.parents[0])) {
      for (std::size_t i = 0; i < saved.size(); ++i) {
        T* dst = g + static_cast<std::size_t>(saved[i]) * c;
        const T* src = self.grad.data() + i * c;
        for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
      }
    }
  });
}

template <typename T>
Tensor<T> embedding_lookup(const Tensor<T>& table, std::span<const int> ids) {
  return gather_rows(table, ids);
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

// Row-wise layer normalization followed by the affine map gamma * x + beta.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps = T(1e-5)) {
  const std::size_t r = x.rows(), c = x.cols();
  detail::require(gamma.size() == c && beta.size() == c, "layer_norm",
                  detail::pair_string(x, gamma));
  std::vector<T> out(r * c), normed(r * c), inv_std(r);
  for (std::size_t i = 0; i < r; ++i) {
    const T* row = x.data() + i * c;
    T mu = 0;
    for (std::size_t j = 0; j < c; ++j) mu += row[j];
    mu /= static_cast<T>(c);
    T var = 0;
    for (std::size_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(c);
    inv_std[i] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      normed[i * c + j] = (row[j] - mu) * inv_std[i];
      out[i * c + j] = normed[i * c + j] * gamma.data()[j] + beta.data()[j];
    }
  }
  return make_result<T>(
      "layer_norm", x.shape(), std::move(out), {x, gamma, beta},
      [r, c, normed = std::move(normed), inv_std = std::move(inv_std)](Node<T>& self) {
        Node<T>& px = *self.parents[0];
        Node<T>& pg = *self.parents[1];
        const T* g = self.grad.data();
        if (T* gg = grad_sink(pg)) {
          for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) gg[j] += g[i * c + j] * normed[i * c + j];
          }
        }
        if (T* gb = grad_sink(*self.parents[2])) {
          for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
          }
        }
        if (T* gx = grad_sink(px)) {
          std::vector<T> dn(c);
          for (std::size_t i = 0; i < r; ++i) {
            T sum_dn = 0, sum_dn_n = 0;
            for (std::size_t j = 0; j < c; ++j) {
              dn[j] = g[i * c + j] * pg.value[j];
              sum_dn += dn[j];
              sum_dn_n += dn[j] * normed[i * c + j];
            }
            const T k = inv_std[i] / static_cast<T>(c);
            for (std::size_t j = 0; j < c; ++j) {
              gx[i * c + j] += k * (static_cast<T>(c) * dn[j] - sum_dn -
                                    normed[i * c + j] * sum_dn_n);
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Softmax and attention
// ---------------------------------------------------------------------------

// Softmax over the admitted entries of one row; excluded entries get exactly
// zero. A row that admits nothing falls back to the unmasked softmax.
template <typename T>
void masked_softmax_row(const T* logits, const std::uint8_t* keep, std::size_t n,
                        T* probs) {
  bool any = keep == nullptr;
  for (std::size_t j = 0; !any && j < n; ++j) any = keep[j] != 0;
  if (keep != nullptr && !any) keep = nullptr;
  T peak = -std::numeric_limits<T>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    if (!keep || keep[j]) peak = std::max(peak, logits[j]);
  }
  T total = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (!keep || keep[j]) {
      probs[j] = std::exp(logits[j] - peak);
      total += probs[j];
    } else {
      probs[j] = T(0);
    }
  }
  for (std::size_t j = 0; j < n; ++j) probs[j] /= total;
}

// Row-wise masked softmax of an (r x c) tensor. The mask must be r x c.
template <typename T>
Tensor<T> softmax_masked(const Tensor<T>& logits, const Mask& mask) {
  const std::size_t r = logits.rows(), c = logits.cols();
  detail::require(mask.rows == r && mask.cols == c, "softmax_masked",
                  shape_string(logits.shape()) + " with mask " +
                      shape_string({mask.rows, mask.cols}));
  std::vector<T> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    masked_softmax_row(logits.data() + i * c, mask.row(i), c, out.data() + i * c);
  }
  return make_result<T>("softmax_masked", logits.shape(), out, {logits},
                        [r, c, probs = out](Node<T>& self) {
    if (T* g = grad_sink(*self.parents[0])) {
      for (std::size_t i = 0; i < r; ++i) {
        const T* p = probs.data() + i * c;
        const T* dy = self.grad.data() + i * c;
        T dot = 0;
        for (std::size_t j = 0; j < c; ++j) dot += p[j] * dy[j];
        for (std::size_t j = 0; j < c; ++j) g[i * c + j] += p[j] * (dy[j] - dot);
      }
    }
  });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  return softmax_masked(logits, Mask::ones(logits.rows(), logits.cols()));
}

// Per-head attention probabilities, recorded on request for inspection.
template <typename T>
struct AttentionTrace {
  std::size_t n_head = 0, query_len = 0, key_len = 0;
  std::vector<T> probs;  // n_head x query_len x key_len

  T prob(std::size_t head, std::size_t i, std::size_t j) const {
    return probs[(head * query_len + i) * key_len + j];
  }
};

// Scaled dot-product attention over `n_head` column groups of q, k and v.
// Head h uses mask `head_masks[h]` (query_len x key_len).
template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& q, const Tensor<T>& k,
                               const Tensor<T>& v, std::size_t n_head,
                               std::span<const Mask* const> head_masks,
                               AttentionTrace<T>* trace = nullptr) {
  const std::size_t tq = q.rows(), tk = k.rows(), d = q.cols();
  detail::require(k.cols() == d && v.cols() == d && v.rows() == tk, "attention",
                  shape_string(q.shape()) + ", " + detail::pair_string(k, v));
  detail::require(n_head > 0 && d % n_head == 0, "attention",
                  "width " + std::to_string(d) + " over " + std::to_string(n_head) +
                      " heads");
  detail::require(head_masks.size() == n_head, "attention",
                  std::to_string(head_masks.size()) + " masks for " +
                      std::to_string(n_head) + " heads");
  for (const Mask* mask : head_masks) {
    detail::require(mask->rows == tq && mask->cols == tk, "attention",
                    "mask " + shape_string({mask->rows, mask->cols}) + " for " +
                        shape_string({tq, tk}));
  }
  const std::size_t dh = d / n_head;
  const T scale_factor = T(1) / std::sqrt(static_cast<T>(dh));
  auto probs = std::make_shared<std::vector<T>>(n_head * tq * tk);
  std::vector<T> out(tq * d, T(0));
  std::vector<T> scores(tk);
  const T* Q = q.data();
  const T* K = k.data();
  const T* V = v.data();
  for (std::size_t h = 0; h < n_head; ++h) {
    const std::size_t off = h * dh;
    for (std::size_t i = 0; i < tq; ++i) {
      const T* qi = Q + i * d + off;
      for (std::size_t j = 0; j < tk; ++j) {
        const T* kj = K + j * d + off;
        T s = 0;
        for (std::size_t e = 0; e < dh; ++e) s += qi[e] * kj[e];
        scores[j] = s * scale_factor;
      }
      T* p = probs->data() + (h * tq + i) * tk;
      masked_softmax_row(scores.data(), head_masks[h]->row(i), tk, p);
      T* oi = out.data() + i * d + off;
      for (std::size_t j = 0; j < tk; ++j) {
        if (p[j] == T(0)) continue;
        const T* vj = V + j * d + off;
        for (std::size_t e = 0; e < dh; ++e) oi[e] += p[j] * vj[e];
      }
    }
  }
  if (trace) {
    trace->n_head = n_head;
    trace->query_len = tq;
    trace->key_len = tk;
    trace->probs = *probs;
  }
  return make_result<T>(
      "attention", {tq, d}, std::move(out), {q, k, v},
      [tq, tk, d, dh, n_head, scale_factor, probs](Node<T>& self) {
        Node<T>& pq = *self.parents[0];
        Node<T>& pk = *self.parents[1];
        Node<T>& pv = *self.parents[2];
        T* gq = grad_sink(pq);
        T* gk = grad_sink(pk);
        T* gv = grad_sink(pv);
        const T* Q = pq.value.data();
        const T* K = pk.value.data();
        const T* V = pv.value.data();
        const T* G = self.grad.data();
        std::vector<T> dp(tk);
        for (std::size_t h = 0; h < n_head; ++h) {
          const std::size_t off = h * dh;
          for (std::size_t i = 0; i < tq; ++i) {
            const T* p = probs->data() + (h * tq + i) * tk;
            const T* gi = G + i * d + off;
            T dot = 0;
            for (std::size_t j = 0; j < tk; ++j) {
              if (p[j] == T(0)) {
                dp[j] = 0;
                continue;
              }
              const T* vj = V + j * d + off;
              T s = 0;
              for (std::size_t e = 0; e < dh; ++e) s += gi[e] * vj[e];
              dp[j] = s;
              dot += p[j] * s;
              if (gv) {
                T* gvj = gv + j * d + off;
                for (std::size_t e = 0; e < dh; ++e) gvj[e] += p[j] * gi[e];
              }
            }
            for (std::size_t j = 0; j < tk; ++j) {
              if (p[j] == T(0)) continue;
              const T ds = p[j] * (dp[j] - dot) * scale_factor;
              if (gq) {
                const T* kj = K + j * d + off;
                T* gqi = gq + i * d + off;
                for (std::size_t e = 0; e < dh; ++e) gqi[e] += ds * kj[e];
              }
              if (gk) {
                const T* qi = Q + i * d + off;
                T* gkj = gk + j * d + off;
                for (std::size_t e = 0; e < dh; ++e) gkj[e] += ds * qi[e];
              }
            }
          }
        }
      });
}

}  // namespace segsum::numerics
