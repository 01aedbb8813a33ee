// Copyright 2026, The desnow Authors
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

/**
 * \file conv.hpp
 * \brief Stride-1 "same" 2D cross-correlation for range images.
 *
 * Columns are azimuth bins of a full sweep, so horizontal padding wraps
 * around. Rows are laser channels and are zero padded.
 */
#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "desnow/nn/tensor.hpp"

namespace desnow::nn {

namespace detail {

// Rows of every channel copied with `pad` wrapped columns on each side.
inline std::vector<double> pad_columns_circular(const double* src, int planes, int h, int w, int pad) {
  const int pw = w + 2 * pad;
  std::vector<double> dst(static_cast<std::size_t>(planes) * h * pw);
  for (int p = 0; p < planes; ++p)
    for (int y = 0; y < h; ++y) {
      const double* row = src + (static_cast<std::size_t>(p) * h + y) * w;
      double* out = dst.data() + (static_cast<std::size_t>(p) * h + y) * pw;
      for (int x = 0; x < pw; ++x) {
        int sx = (x - pad) % w;
        if (sx < 0) sx += w;
        out[x] = row[sx];
      }
    }
  return dst;
}

template <int KW, int NB>
inline void accumulate_block(const double* __restrict row, const double (*a)[8], double* __restrict o0,
                             double* __restrict o1, double* __restrict o2, double* __restrict o3, int w) {
  double c[NB][KW];
  for (int j = 0; j < NB; ++j)
    for (int kx = 0; kx < KW; ++kx) c[j][kx] = a[j][kx];
  for (int x = 0; x < w; ++x) {
    double s[NB] = {};
    for (int kx = 0; kx < KW; ++kx)
      for (int j = 0; j < NB; ++j) s[j] += c[j][kx] * row[x + kx];
    o0[x] += s[0];
    if constexpr (NB > 1) {
      o1[x] += s[1];
      o2[x] += s[2];
      o3[x] += s[3];
    }
  }
}

// o[oc][y][x] += sum_{ic,ky,kx} k[oc][ic][ky][kx] * in[ic][y+ky-kh/2][x+kx-kw/2],
// with `in` already column padded by kw/2 and rows zero padded implicitly.
// Output channels are processed four at a time so each input load feeds four rows.
template <int KW>
void correlate_rows(const double* in_padded, int cin, const double* k, double* o, int cout, int h, int w, int kh,
                    int kw_runtime) {
  const int kw = KW > 0 ? KW : kw_runtime;
  const int ph = kh / 2;
  const int pw_stride = w + 2 * (kw / 2);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t kplane = static_cast<std::size_t>(kh) * kw;
  for (int oc0 = 0; oc0 < cout; oc0 += 4) {
    const int nb = std::min(4, cout - oc0);
    for (int y = 0; y < h; ++y) {
      double* o0 = o + static_cast<std::size_t>(oc0) * plane + static_cast<std::size_t>(y) * w;
      double* o1 = nb > 1 ? o0 + plane : o0;
      double* o2 = nb > 2 ? o0 + 2 * plane : o0;
      double* o3 = nb > 3 ? o0 + 3 * plane : o0;
      for (int ic = 0; ic < cin; ++ic) {
        for (int ky = 0; ky < kh; ++ky) {
          const int sy = y + ky - ph;
          if (sy < 0 || sy >= h) continue;
          const double* row = in_padded + (static_cast<std::size_t>(ic) * h + sy) * pw_stride;
          double a[4][8] = {};
          for (int j = 0; j < nb; ++j)
            for (int kx = 0; kx < kw && kx < 8; ++kx)
              a[j][kx] = k[(static_cast<std::size_t>(oc0 + j) * cin + ic) * kplane + static_cast<std::size_t>(ky) * kw + kx];
          if (KW > 0) {
            if (nb == 4) {
              accumulate_block<KW, 4>(row, a, o0, o1, o2, o3, w);
            } else {
              for (int j = 0; j < nb; ++j) {
                double* oj = o0 + static_cast<std::size_t>(j) * plane;
                accumulate_block<KW, 1>(row, a + j, oj, oj, oj, oj, w);
              }
            }
          } else {
            for (int j = 0; j < nb; ++j) {
              double* oj = o0 + static_cast<std::size_t>(j) * plane;
              const double* kk = k + (static_cast<std::size_t>(oc0 + j) * cin + ic) * kplane + static_cast<std::size_t>(ky) * kw;
              for (int kx = 0; kx < kw; ++kx) {
                const double av = kk[kx];
                for (int x = 0; x < w; ++x) oj[x] += av * row[x + kx];
              }
            }
          }
        }
      }
    }
  }
}

inline void correlate(const double* in_padded, int cin, const double* k, double* o, int cout, int h, int w, int kh,
                      int kw) {
  switch (kw) {
    case 1: correlate_rows<1>(in_padded, cin, k, o, cout, h, w, kh, kw); break;
    case 3: correlate_rows<3>(in_padded, cin, k, o, cout, h, w, kh, kw); break;
    case 5: correlate_rows<5>(in_padded, cin, k, o, cout, h, w, kh, kw); break;
    default: correlate_rows<0>(in_padded, cin, k, o, cout, h, w, kh, kw); break;
  }
}

// sum_x a[x] * b[x] with eight fixed partial sums: deterministic and vectorizable.
inline double dot_lanes(const double* __restrict a, const double* __restrict b, int n) {
  double lanes[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  int x = 0;
  for (; x + 8 <= n; x += 8)
    for (int l = 0; l < 8; ++l) lanes[l] += a[x + l] * b[x + l];
  for (; x < n; ++x) lanes[x & 7] += a[x] * b[x];
  return ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
}

}  // namespace detail

/**
 * \brief Cross-correlation with circular horizontal and zero vertical padding.
 *
 * \param input  (n, in_ch, h, w)
 * \param weight (out_ch, in_ch, kh, kw), kh and kw odd
 * \param bias   (1, out_ch, 1, 1)
 * \return (n, out_ch, h, w)
 */
inline Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  const Shape is = input.shape();
  const Shape ws = weight.shape();
  if (ws.c != is.c) {
    throw std::invalid_argument("conv2d: input has " + std::to_string(is.c) + " channels, kernel expects " +
                                std::to_string(ws.c));
  }
  if (ws.h % 2 == 0 || ws.w % 2 == 0) throw std::invalid_argument("conv2d: kernel extents must be odd");
  if (bias.size() != static_cast<std::size_t>(ws.n)) throw std::invalid_argument("conv2d: bias size mismatch");
  if (ws.w > is.w) throw std::invalid_argument("conv2d: kernel wider than input");

  const int batch = is.n, cin = is.c, cout = ws.n, h = is.h, w = is.w, kh = ws.h, kw = ws.w;
  const int ph = kh / 2, pw = kw / 2;
  const Shape os{batch, cout, h, w};
  const std::size_t plane = is.plane();

  Tensor out = Tensor::make_result(os, {input.node(), weight.node(), bias.node()}, [=](detail::Node& self) {
    const double* g = self.grad.data();
    detail::Node& in_node = *self.parents[0];
    detail::Node& w_node = *self.parents[1];
    detail::Node& b_node = *self.parents[2];
    const double* x = in_node.value.data();
    const double* k = w_node.value.data();

    if (b_node.requires_grad) {
      auto& gb = b_node.grad_buffer();
      for (int b = 0; b < batch; ++b)
        for (int oc = 0; oc < cout; ++oc) {
          const double* gp = g + (static_cast<std::size_t>(b) * cout + oc) * plane;
          double acc = 0.0;
          for (std::size_t i = 0; i < plane; ++i) acc += gp[i];
          gb[oc] += acc;
        }
    }
    if (w_node.requires_grad) {
      auto& gw = w_node.grad_buffer();
      for (int b = 0; b < batch; ++b) {
        const auto xpad = detail::pad_columns_circular(x + static_cast<std::size_t>(b) * cin * plane, cin, h, w, pw);
        const int stride = w + 2 * pw;
        for (int oc = 0; oc < cout; ++oc)
          for (int ic = 0; ic < cin; ++ic) {
            const double* gp = g + (static_cast<std::size_t>(b) * cout + oc) * plane;
            double* gk = gw.data() + (static_cast<std::size_t>(oc) * cin + ic) * kh * kw;
            for (int ky = 0; ky < kh; ++ky) {
              const int dy = ky - ph;
              const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
              for (int kx = 0; kx < kw; ++kx) {
                double acc = 0.0;
                for (int y = y0; y < y1; ++y)
                  acc += detail::dot_lanes(gp + static_cast<std::size_t>(y) * w,
                                           xpad.data() + (static_cast<std::size_t>(ic) * h + (y + dy)) * stride + kx, w);
                gk[ky * kw + kx] += acc;
              }
            }
          }
      }
    }
    if (in_node.requires_grad) {
      // Input gradient is a correlation of the output gradient with the
      // channel-transposed, spatially flipped kernel.
      std::vector<double> kt(static_cast<std::size_t>(cin) * cout * kh * kw);
      for (int oc = 0; oc < cout; ++oc)
        for (int ic = 0; ic < cin; ++ic)
          for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx)
              kt[((static_cast<std::size_t>(ic) * cout + oc) * kh + (kh - 1 - ky)) * kw + (kw - 1 - kx)] =
                  k[((static_cast<std::size_t>(oc) * cin + ic) * kh + ky) * kw + kx];
      auto& gi = in_node.grad_buffer();
      for (int b = 0; b < batch; ++b) {
        const auto gpad = detail::pad_columns_circular(g + static_cast<std::size_t>(b) * cout * plane, cout, h, w, pw);
        detail::correlate(gpad.data(), cout, kt.data(), gi.data() + static_cast<std::size_t>(b) * cin * plane, cin, h,
                          w, kh, kw);
      }
    }
  });

  double* o = out.values().data();
  const double* x = input.values().data();
  const double* k = weight.values().data();
  for (int b = 0; b < batch; ++b) {
    double* ob = o + static_cast<std::size_t>(b) * cout * plane;
    for (int oc = 0; oc < cout; ++oc)
      std::fill_n(ob + static_cast<std::size_t>(oc) * plane, plane, bias[static_cast<std::size_t>(oc)]);
    const auto xpad = detail::pad_columns_circular(x + static_cast<std::size_t>(b) * cin * plane, cin, h, w, pw);
    detail::correlate(xpad.data(), cin, k, ob, cout, h, w, kh, kw);
  }
  return out;
}

}  // namespace desnow::nn
