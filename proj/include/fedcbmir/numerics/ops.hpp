#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "fedcbmir/errors.hpp"
#include "fedcbmir/numerics/tensor.hpp"

namespace fedcbmir {

// Geometry shared by a convolution and its transpose. The "image" side is
// [c_in, h, w]; the "feature" side is [c_out, ho, wo], with
// ho = floor((h + 2*pad - kh) / stride) + 1.
struct ConvGeometry {
  std::size_t c_in = 0, h = 0, w = 0;
  std::size_t c_out = 0, ho = 0, wo = 0;
  std::size_t kh = 0, kw = 0;
  std::size_t stride = 1, pad = 0;

  std::size_t patch_rows() const { return c_in * kh * kw; }
  std::size_t out_pixels() const { return ho * wo; }
};

namespace detail {

// cols[(ci*kh + ky)*kw + kx][oy*wo + ox] = image[ci][oy*s - p + ky][ox*s - p + kx]
template <class T>
void im2col(const ConvGeometry& g, std::span<const T> image, std::span<T> cols) {
  const std::size_t np = g.out_pixels();
  std::size_t r = 0;
  for (std::size_t ci = 0; ci < g.c_in; ++ci) {
    const T* plane = image.data() + ci * g.h * g.w;
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx, ++r) {
        T* row = cols.data() + r * np;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          T* dst = row + oy * g.wo;
          if (iy < 0 || iy >= static_cast<long>(g.h)) {
            for (std::size_t ox = 0; ox < g.wo; ++ox) dst[ox] = T{0};
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * g.w;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            dst[ox] = (ix < 0 || ix >= static_cast<long>(g.w)) ? T{0} : src[ix];
          }
        }
      }
    }
  }
}

// Scatter-add inverse of im2col.
template <class T>
void col2im(const ConvGeometry& g, std::span<const T> cols, std::span<T> image) {
  const std::size_t np = g.out_pixels();
  std::size_t r = 0;
  for (std::size_t ci = 0; ci < g.c_in; ++ci) {
    T* plane = image.data() + ci * g.h * g.w;
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx, ++r) {
        const T* row = cols.data() + r * np;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          T* dst = plane + static_cast<std::size_t>(iy) * g.w;
          const T* src = row + oy * g.wo;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            if (ix >= 0 && ix < static_cast<long>(g.w)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

// out[m][n] += a[m][k] * b[k][n]
template <class T>
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* out) {
  for (std::size_t i = 0; i < m; ++i) {
    T* orow = out + i * n;
    for (std::size_t j = 0; j < k; ++j) {
      const T aij = a[i * k + j];
      if (aij == T{0}) continue;
      const T* brow = b + j * n;
      for (std::size_t c = 0; c < n; ++c) orow[c] += aij * brow[c];
    }
  }
}

// out[k][n] += a[m][k]^T * b[m][n]
template <class T>
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* out) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* brow = b + i * n;
    for (std::size_t j = 0; j < k; ++j) {
      const T aij = a[i * k + j];
      if (aij == T{0}) continue;
      T* orow = out + j * n;
      for (std::size_t c = 0; c < n; ++c) orow[c] += aij * brow[c];
    }
  }
}

// out[m][k] += a[m][n] * b[k][n]^T
template <class T>
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* out) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * n;
    for (std::size_t j = 0; j < k; ++j) {
      const T* brow = b + j * n;
      T acc{0};
      for (std::size_t c = 0; c < n; ++c) acc += arow[c] * brow[c];
      out[i * k + j] += acc;
    }
  }
}

inline std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride,
                                   std::size_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

}  // namespace detail

template <class T>
ConvGeometry conv_geometry(const Tensor<T>& input, const Tensor<T>& kernel,
                           const Tensor<T>& bias, std::size_t stride, std::size_t pad) {
  if (input.rank() != 3) {
    throw DimensionError("conv2d: input must be [C,H,W], got " + to_string(input.shape()));
  }
  if (kernel.rank() != 4) {
    throw DimensionError("conv2d: kernel must be [Cout,Cin,kH,kW], got " +
                         to_string(kernel.shape()));
  }
  if (stride == 0) throw ContractError("conv2d: stride must be >= 1");
  if (kernel.dim(1) != input.dim(0)) {
    throw DimensionError("conv2d: kernel axis 1 (" + std::to_string(kernel.dim(1)) +
                         ") != input axis 0 (" + std::to_string(input.dim(0)) + ")");
  }
  if (bias.rank() != 1 || bias.dim(0) != kernel.dim(0)) {
    throw DimensionError("conv2d: bias " + to_string(bias.shape()) +
                         " does not match kernel axis 0 (" + std::to_string(kernel.dim(0)) + ")");
  }
  ConvGeometry g;
  g.c_in = input.dim(0);
  g.h = input.dim(1);
  g.w = input.dim(2);
  g.c_out = kernel.dim(0);
  g.kh = kernel.dim(2);
  g.kw = kernel.dim(3);
  g.stride = stride;
  g.pad = pad;
  if (g.kh > g.h + 2 * pad || g.kw > g.w + 2 * pad) {
    throw DimensionError("conv2d: kernel " + to_string(kernel.shape()) +
                         " larger than padded input " + to_string(input.shape()));
  }
  g.ho = detail::conv_out_extent(g.h, g.kh, stride, pad);
  g.wo = detail::conv_out_extent(g.w, g.kw, stride, pad);
  return g;
}

template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                 std::size_t stride, std::size_t pad) {
  const ConvGeometry g = conv_geometry(input, kernel, bias, stride, pad);
  const std::size_t np = g.out_pixels();
  std::vector<T> cols(g.patch_rows() * np);
  detail::im2col<T>(g, input.data(), cols);
  Tensor<T> out({g.c_out, g.ho, g.wo});
  for (std::size_t co = 0; co < g.c_out; ++co) {
    std::fill_n(out.data().data() + co * np, np, bias[co]);
  }
  detail::gemm_nn(g.c_out, g.patch_rows(), np, kernel.data().data(), cols.data(),
                  out.data().data());
  return out;
}

template <class T>
struct ConvGrads {
  Tensor<T> input, kernel, bias;
};

template <class T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& kernel,
                             const Tensor<T>& bias, std::size_t stride, std::size_t pad,
                             const Tensor<T>& grad_out) {
  const ConvGeometry g = conv_geometry(input, kernel, bias, stride, pad);
  if (grad_out.shape() != Shape{g.c_out, g.ho, g.wo}) {
    throw DimensionError("conv2d_backward: gradient shape " + to_string(grad_out.shape()));
  }
  const std::size_t np = g.out_pixels();
  const std::size_t nr = g.patch_rows();
  std::vector<T> cols(nr * np);
  detail::im2col<T>(g, input.data(), cols);

  ConvGrads<T> grads{Tensor<T>(input.shape()), Tensor<T>(kernel.shape()),
                     Tensor<T>(bias.shape())};
  const T* go = grad_out.data().data();
  for (std::size_t co = 0; co < g.c_out; ++co) {
    T acc{0};
    for (std::size_t p = 0; p < np; ++p) acc += go[co * np + p];
    grads.bias[co] = acc;
  }
  detail::gemm_nt(g.c_out, nr, np, go, cols.data(), grads.kernel.data().data());
  std::vector<T> gcols(nr * np, T{0});
  detail::gemm_tn(g.c_out, nr, np, kernel.data().data(), go, gcols.data());
  detail::col2im<T>(g, gcols, grads.input.data());
  return grads;
}

// Output extent of a transposed convolution: (H-1)*stride - 2*pad + k.
inline std::size_t transpose_out_extent(std::size_t in, std::size_t k, std::size_t stride,
                                        std::size_t pad) {
  const long e = static_cast<long>((in - 1) * stride + k) - 2 * static_cast<long>(pad);
  if (e <= 0) {
    throw DimensionError("transpose_conv2d: non-positive output extent");
  }
  return static_cast<std::size_t>(e);
}

// kernel is [C_in, C_out, kH, kW]: the same tensor a conv2d from C_out to C_in
// channels would use, so this is that convolution's adjoint.
template <class T>
ConvGeometry transpose_geometry(const Tensor<T>& input, const Tensor<T>& kernel,
                                const Tensor<T>& bias, std::size_t stride, std::size_t pad) {
  if (input.rank() != 3) {
    throw DimensionError("transpose_conv2d: input must be [C,H,W], got " +
                         to_string(input.shape()));
  }
  if (kernel.rank() != 4) {
    throw DimensionError("transpose_conv2d: kernel must be [Cin,Cout,kH,kW], got " +
                         to_string(kernel.shape()));
  }
  if (stride == 0) throw ContractError("transpose_conv2d: stride must be >= 1");
  if (kernel.dim(0) != input.dim(0)) {
    throw DimensionError("transpose_conv2d: kernel axis 0 (" + std::to_string(kernel.dim(0)) +
                         ") != input axis 0 (" + std::to_string(input.dim(0)) + ")");
  }
  if (bias.rank() != 1 || bias.dim(0) != kernel.dim(1)) {
    throw DimensionError("transpose_conv2d: bias " + to_string(bias.shape()) +
                         " does not match kernel axis 1 (" + std::to_string(kernel.dim(1)) + ")");
  }
  ConvGeometry g;
  g.c_out = input.dim(0);
  g.ho = input.dim(1);
  g.wo = input.dim(2);
  g.c_in = kernel.dim(1);
  g.kh = kernel.dim(2);
  g.kw = kernel.dim(3);
  g.stride = stride;
  g.pad = pad;
  g.h = transpose_out_extent(g.ho, g.kh, stride, pad);
  g.w = transpose_out_extent(g.wo, g.kw, stride, pad);
  if (detail::conv_out_extent(g.h, g.kh, stride, pad) != g.ho ||
      detail::conv_out_extent(g.w, g.kw, stride, pad) != g.wo) {
    throw DimensionError("transpose_conv2d: geometry is not invertible");
  }
  return g;
}

template <class T>
Tensor<T> transpose_conv2d(const Tensor<T>& input, const Tensor<T>& kernel,
                           const Tensor<T>& bias, std::size_t stride, std::size_t pad) {
  const ConvGeometry g = transpose_geometry(input, kernel, bias, stride, pad);
  const std::size_t np = g.out_pixels();
  const std::size_t nr = g.patch_rows();
  std::vector<T> cols(nr * np, T{0});
  detail::gemm_tn(g.c_out, nr, np, kernel.data().data(), input.data().data(), cols.data());
  Tensor<T> out({g.c_in, g.h, g.w});
  detail::col2im<T>(g, cols, out.data());
  const std::size_t plane = g.h * g.w;
  for (std::size_t c = 0; c < g.c_in; ++c) {
    T* dst = out.data().data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) dst[i] += bias[c];
  }
  return out;
}

template <class T>
ConvGrads<T> transpose_conv2d_backward(const Tensor<T>& input, const Tensor<T>& kernel,
                                       const Tensor<T>& bias, std::size_t stride,
                                       std::size_t pad, const Tensor<T>& grad_out) {
  const ConvGeometry g = transpose_geometry(input, kernel, bias, stride, pad);
  if (grad_out.shape() != Shape{g.c_in, g.h, g.w}) {
    throw DimensionError("transpose_conv2d_backward: gradient shape " +
                         to_string(grad_out.shape()));
  }
  const std::size_t np = g.out_pixels();
  const std::size_t nr = g.patch_rows();
  std::vector<T> cols(nr * np);
  detail::im2col<T>(g, grad_out.data(), cols);

  ConvGrads<T> grads{Tensor<T>(input.shape()), Tensor<T>(kernel.shape()),
                     Tensor<T>(bias.shape())};
  const std::size_t plane = g.h * g.w;
  for (std::size_t c = 0; c < g.c_in; ++c) {
    T acc{0};
    const T* src = grad_out.data().data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) acc += src[i];
    grads.bias[c] = acc;
  }
  detail::gemm_nn(g.c_out, nr, np, kernel.data().data(), cols.data(),
                  grads.input.data().data());
  detail::gemm_nt(g.c_out, nr, np, input.data().data(), cols.data(),
                  grads.kernel.data().data());
  return grads;
}

// y = W x + b, with x taken flat. W is [out, in].
template <class T>
Tensor<T> dense(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  if (weight.rank() != 2 || weight.dim(1) != input.size()) {
    throw DimensionError("dense: weight " + to_string(weight.shape()) + " vs input of " +
                         std::to_string(input.size()) + " values");
  }
  if (bias.rank() != 1 || bias.dim(0) != weight.dim(0)) {
    throw DimensionError("dense: bias " + to_string(bias.shape()) + " vs weight " +
                         to_string(weight.shape()));
  }
  const std::size_t n_out = weight.dim(0), n_in = weight.dim(1);
  Tensor<T> out({n_out});
  const T* x = input.data().data();
  for (std::size_t o = 0; o < n_out; ++o) {
    const T* row = weight.data().data() + o * n_in;
    T acc{0};
    for (std::size_t i = 0; i < n_in; ++i) acc += row[i] * x[i];
    out[o] = acc + bias[o];
  }
  return out;
}

template <class T>
struct DenseGrads {
  Tensor<T> input, weight, bias;
};

template <class T>
DenseGrads<T> dense_backward(const Tensor<T>& input, const Tensor<T>& weight,
                             const Tensor<T>& grad_out) {
  const std::size_t n_out = weight.dim(0), n_in = weight.dim(1);
  if (grad_out.size() != n_out) {
    throw DimensionError("dense_backward: gradient of " + std::to_string(grad_out.size()) +
                         " values for " + std::to_string(n_out) + " outputs");
  }
  DenseGrads<T> grads{Tensor<T>(input.shape()), Tensor<T>(weight.shape()),
                      grad_out.reshaped({n_out})};
  const T* x = input.data().data();
  T* gx = grads.input.data().data();
  for (std::size_t o = 0; o < n_out; ++o) {
    const T go = grad_out[o];
    const T* row = weight.data().data() + o * n_in;
    T* grow = grads.weight.data().data() + o * n_in;
    for (std::size_t i = 0; i < n_in; ++i) {
      grow[i] = go * x[i];
      gx[i] += row[i] * go;
    }
  }
  return grads;
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> out = x;
  for (auto& v : out.data()) v = v > T{0} ? v : T{0};
  return out;
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> out = x;
  for (auto& v : out.data()) v = T{1} / (T{1} + std::exp(-v));
  return out;
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

// Mean squared error, accumulated in 64-bit.
template <class T>
T mse(const Tensor<T>& input, const Tensor<T>& output) {
  require_same_shape(input, output, "mse");
  double acc = 0.0;
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double d = static_cast<double>(input[i]) - static_cast<double>(output[i]);
    acc += d * d;
  }
  return static_cast<T>(acc / static_cast<double>(input.size()));
}

}  // namespace fedcbmir
